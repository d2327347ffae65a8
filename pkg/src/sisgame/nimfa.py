"""Steady-state NIMFA infection probabilities.

Closed forms for the complete graph, the complete bipartite graph and the
multi-community (cliques sharing one core node) topology, plus a general
solver for an arbitrary adjacency matrix that the closed forms are checked
against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import NonConvergenceError, ValidationError

PREVALENCE_FLOOR = 1e-12


@dataclass(frozen=True)
class EpidemicRates:
    """Infection rate ``beta`` and curing rate ``delta``; ``tau = beta / delta``."""

    beta: float
    delta: float = 1.0

    def __post_init__(self):
        if self.beta < 0:
            raise ValidationError(f"beta must be >= 0, got {self.beta}")
        if self.delta <= 0:
            raise ValidationError(f"delta must be > 0, got {self.delta}")

    @classmethod
    def from_tau(cls, tau: float) -> "EpidemicRates":
        return cls(beta=tau, delta=1.0)

    @property
    def tau(self) -> float:
        return self.beta / self.delta


@dataclass(frozen=True)
class SteadyState:
    v: np.ndarray
    above_threshold: bool
    residual: float
    iterations: int


@dataclass(frozen=True)
class MultiCommunitySpec:
    """Communities of ``sizes[m]`` non-core nodes, all joined through one core node."""

    sizes: tuple[int, ...]
    taus: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        object.__setattr__(self, "taus", tuple(float(t) for t in self.taus))
        if len(self.sizes) < 1:
            raise ValidationError("at least one community is required")
        if len(self.sizes) != len(self.taus):
            raise ValidationError(
                f"sizes and taus differ in length ({len(self.sizes)} != {len(self.taus)})"
            )
        if any(s < 1 for s in self.sizes):
            raise ValidationError(f"every community size must be >= 1, got {self.sizes}")
        if any(not t > 0 for t in self.taus):
            raise ValidationError(f"every tau must be > 0, got {self.taus}")

    @property
    def M(self) -> int:
        return len(self.sizes)

    @property
    def total_nodes(self) -> int:
        return 1 + sum(self.sizes)

    def adjacency(self, counts: Sequence[int] | None = None) -> np.ndarray:
        """Adjacency of the induced network; node 0 is the core node.

        ``counts`` keeps only the first ``counts[m]`` non-core nodes of each
        community (the non-investors); by default every node is kept.
        """
        counts = self.sizes if counts is None else tuple(int(c) for c in counts)
        n = 1 + sum(counts)
        adj = np.zeros((n, n), dtype=float)
        start = 1
        for c in counts:
            block = slice(start, start + c)
            adj[block, block] = 1.0
            adj[0, block] = 1.0
            adj[block, 0] = 1.0
            start += c
        np.fill_diagonal(adj, 0.0)
        return adj


# -- adjacency helpers --------------------------------------------------------


def check_adjacency(adj) -> np.ndarray:
    a = np.asarray(adj, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"adjacency must be square, got shape {a.shape}")
    if not np.all((a == 0) | (a == 1)):
        raise ValidationError("adjacency entries must be 0 or 1")
    if not np.array_equal(a, a.T):
        raise ValidationError("adjacency must be symmetric")
    if np.any(np.diag(a) != 0):
        raise ValidationError("adjacency must have a zero diagonal")
    return a


def complete_graph(n: int) -> np.ndarray:
    return np.ones((n, n)) - np.eye(n)


def complete_bipartite_graph(m: int, n: int) -> np.ndarray:
    """K_{m,n}; the first ``m`` nodes form cluster M."""
    adj = np.zeros((m + n, m + n))
    adj[:m, m:] = 1.0
    adj[m:, :m] = 1.0
    return adj


def parse_edge_list(lines: Iterable[str], n: int | None = None) -> np.ndarray:
    """Build an adjacency matrix from ``"i j"`` lines (0-indexed).

    Blank lines and ``#`` comments are ignored. The node count is
    ``max index + 1`` unless ``n`` is given.
    """
    edges = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValidationError(f"line {lineno}: expected 'i j', got {raw.strip()!r}")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise ValidationError(f"line {lineno}: node ids must be integers") from None
        if i < 0 or j < 0:
            raise ValidationError(f"line {lineno}: node ids must be non-negative")
        if i == j:
            raise ValidationError(f"line {lineno}: self-loop on node {i}")
        edges.append((i, j))
    size = max((max(e) for e in edges), default=-1) + 1
    if n is not None:
        if n < size:
            raise ValidationError(f"edge list references node {size - 1} but n={n}")
        size = n
    adj = np.zeros((size, size))
    for i, j in edges:
        adj[i, j] = adj[j, i] = 1.0
    return adj


def read_edge_list(path, n: int | None = None) -> np.ndarray:
    with open(path) as fh:
        return parse_edge_list(fh, n=n)


# -- solvers ------------------------------------------------------------------


def nimfa_map(adj: np.ndarray, tau: float, v: np.ndarray) -> np.ndarray:
    """One application of the steady-state map ``v -> 1 - 1/(1 + tau*A v)``."""
    return 1.0 - 1.0 / (1.0 + tau * (adj @ v))


def nimfa_residual(adj, tau: float, v) -> float:
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        return 0.0
    return float(np.max(np.abs(v - nimfa_map(np.asarray(adj, dtype=float), tau, v))))


def solve_general(adj, tau: float, tol: float = 1e-12, max_iter: int = 10**6) -> SteadyState:
    """Metastable solution of the NIMFA steady-state equations on ``adj``.

    Newton iterations on ``v - F(v) = 0`` starting from the all-ones vector.
    From that start the iterates decrease monotonically onto the largest
    fixed point, which is the metastable one above the threshold and zero
    below it. Iteration stops once both the residual and the Newton step are
    below ``tol``; if every entry drops under the prevalence floor the zero
    solution is returned.
    """
    if not tol > 0:
        raise ValidationError(f"tol must be > 0, got {tol}")
    if max_iter < 1:
        raise ValidationError(f"max_iter must be >= 1, got {max_iter}")
    if tau < 0:
        raise ValidationError(f"tau must be >= 0, got {tau}")
    a = check_adjacency(adj)
    n = a.shape[0]
    if n == 0:
        return SteadyState(np.zeros(0), False, 0.0, 0)

    eye = np.eye(n)
    v = np.ones(n)
    for it in range(1, max_iter + 1):
        s = a @ v
        g = v - (1.0 - 1.0 / (1.0 + tau * s))
        jac = eye - (tau / (1.0 + tau * s) ** 2)[:, None] * a
        try:
            step = np.linalg.solve(jac, g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(jac, g, rcond=None)[0]
        residual = float(np.max(np.abs(g)))
        if residual <= tol and float(np.max(np.abs(step))) <= tol:
            break
        v = np.clip(v - step, 0.0, 1.0)
        if float(np.max(v)) < PREVALENCE_FLOOR:
            v = np.zeros(n)
            break
    else:
        raise NonConvergenceError(
            f"NIMFA solver did not converge in {max_iter} iterations",
            last_iterate=v,
            residual=nimfa_residual(a, tau, v),
        )
    return SteadyState(
        v=v,
        above_threshold=bool(np.max(v) > 0.0),
        residual=nimfa_residual(a, tau, v),
        iterations=it,
    )


def v_complete(n: float, tau: float) -> float:
    """Infection probability of every node of K_n.

    ``n`` may be real-valued; the same formula is then used as a continuous
    extension.
    """
    if n < 2 or tau * (n - 1) <= 1.0:
        return 0.0
    return 1.0 - 1.0 / (tau * (n - 1))


def v_bipartite(m: int, n: int, tau: float) -> tuple[float, float]:
    """Infection probabilities ``(v_M, v_N)`` of the two clusters of K_{m,n}."""
    if m <= 0 or n <= 0:
        return 0.0, 0.0
    num = tau * tau * m * n - 1.0
    if num <= 0:
        return 0.0, 0.0
    return num / (tau * m * (tau * n + 1.0)), num / (tau * n * (tau * m + 1.0))


def v_community(n_m: int, tau_m: float, u: float) -> float:
    """Infection probability of a non-core node in a community of ``n_m`` non-core nodes.

    ``u`` is the core node's infection probability. Solves the quadratic
    ``a v^2 - (a - b - 1) v - b = 0`` with ``a = tau_m (n_m - 1)``,
    ``b = tau_m u`` and keeps its non-negative root.
    """
    if u == 0:
        return v_complete(n_m, tau_m)
    b = tau_m * u
    if n_m <= 1:
        return b / (1.0 + b)
    a = tau_m * (n_m - 1)
    lin = a - b - 1.0
    disc = math.sqrt(lin * lin + 4.0 * a * b)
    if lin >= 0:
        root = (lin + disc) / (2.0 * a)
    else:
        # same root, rewritten to avoid cancellation
        root = 2.0 * b / (disc - lin)
    return max(root, 0.0)


def v_community_legacy(n_m: int, tau_m: float, u: float) -> float:
    """Variant of :func:`v_community` that divides the discriminant term by ``V`` instead of ``V**2``.

    It does not solve the steady-state equation; it is kept only to
    reproduce reference runs that were computed with it.
    """
    if u == 0:
        return v_complete(n_m, tau_m)
    b = tau_m * u
    if n_m <= 1:
        return b / (1.0 + b)
    a = tau_m * (n_m - 1)
    lin = a - b - 1.0
    if lin <= 0:
        return 0.0
    return lin * (1.0 + math.sqrt(1.0 + 4.0 * a * b / lin)) / (2.0 * a)


COMMUNITY_FORMS = {"quadratic": v_community, "legacy": v_community_legacy}


def core_infection(spec: MultiCommunitySpec, counts: Sequence[int], u: float,
                   form: str = "quadratic") -> float:
    """Core-node infection probability given per-community non-investor counts at core value ``u``."""
    v_fn = COMMUNITY_FORMS[form]
    if len(counts) != spec.M:
        raise ValidationError(f"expected {spec.M} counts, got {len(counts)}")
    total = 0.0
    for n_m, size, tau_m in zip(counts, spec.sizes, spec.taus):
        if not 0 <= n_m <= size:
            raise ValidationError(f"count {n_m} outside [0, {size}]")
        if n_m:
            total += tau_m * n_m * v_fn(n_m, tau_m, u)
    return 1.0 - 1.0 / (1.0 + total)


def core_fixed_point(spec: MultiCommunitySpec, counts: Sequence[int], tol: float = 1e-14,
                     max_iter: int = 100_000) -> float:
    """Self-consistent core probability for fixed non-investor counts.

    Iterates ``u <- core_infection(counts, u)`` from ``u = 1``.
    """
    u = 1.0
    for _ in range(max_iter):
        nxt = core_infection(spec, counts, u)
        if abs(nxt - u) <= tol:
            return nxt
        u = nxt
    raise NonConvergenceError("core fixed point did not converge", last_iterate=u)
