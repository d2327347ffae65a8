"""Parametric potential games on the multi-community network.

With the core node's infection probability ``u`` held fixed, every
community plays an independent potential game. :func:`iterate` alternates
between solving those games and recomputing ``u`` from the result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .nimfa import COMMUNITY_FORMS, MultiCommunitySpec, core_infection

CYCLE_WINDOW = 16


@dataclass(frozen=True)
class MultiCommGame:
    spec: MultiCommunitySpec
    C: float
    H: float
    form: str = "quadratic"

    def __post_init__(self):
        if not self.C > 0 or not self.H > 0:
            raise ValidationError("C and H must be > 0")
        if self.form not in COMMUNITY_FORMS:
            raise ValidationError(f"form must be one of {sorted(COMMUNITY_FORMS)}, got {self.form!r}")

    @property
    def q(self) -> float:
        return self.C / self.H

    @property
    def M(self) -> int:
        return self.spec.M


@dataclass
class MultiCommTrace:
    u_history: list[float]
    n_star_history: list[tuple[int, ...]]
    g_bounds: list[float | None]
    f_bounds: list[float | None]
    closed_form_history: list[tuple[int, ...]]
    converged: bool
    iterations: int
    epsilon: float
    cycle: list[tuple[int, ...]] | None = None
    reason: str = ""
    discrepancies: list[tuple[int, int, int, int]] = field(default_factory=list)

    @property
    def u_final(self) -> float:
        return self.u_history[-1]

    @property
    def n_star(self) -> tuple[int, ...]:
        return self.n_star_history[-1]


def _check_index(game: MultiCommGame, m: int):
    if not 0 <= m < game.M:
        raise ValidationError(f"community index {m} outside [0, {game.M})")


def potential_profile(m: int, game: MultiCommGame, u: float) -> np.ndarray:
    """The parametric potential of community ``m`` at every count 0..N_m."""
    _check_index(game, m)
    size, tau = game.spec.sizes[m], game.spec.taus[m]
    v_fn = COMMUNITY_FORMS[game.form]
    terms = np.array([v_fn(i, tau, u) if i >= 2 else 0.0 for i in range(size + 1)])
    counts = np.arange(size + 1)
    return game.C * (size - counts) + game.H * np.cumsum(terms)


def parametric_potential(m: int, game: MultiCommGame, n_m: int, u: float) -> float:
    _check_index(game, m)
    size, tau = game.spec.sizes[m], game.spec.taus[m]
    if not 0 <= n_m <= size:
        raise ValidationError(f"n_m must lie in [0, {size}], got {n_m}")
    v_fn = COMMUNITY_FORMS[game.form]
    return game.C * (size - n_m) + game.H * sum(v_fn(i, tau, u) for i in range(2, n_m + 1))


def community_equilibrium(m: int, game: MultiCommGame, u: float) -> int:
    """Argmin of the parametric potential; ties go to the smaller count."""
    if not 0.0 <= u <= 1.0:
        raise ValidationError(f"u must lie in [0, 1], got {u}")
    return int(np.argmin(potential_profile(m, game, u)))


def community_equilibrium_closed_form(m: int, game: MultiCommGame, u: float) -> int:
    """Floor estimate of the community equilibrium, clamped to [0, N_m]."""
    _check_index(game, m)
    size, tau, q = game.spec.sizes[m], game.spec.taus[m], game.q
    if q >= 1:
        return size
    est = math.floor(1.0 / (tau * (1.0 - q)) - u / q)
    return min(size, max(0, est))


def count_bounds(m: int, game: MultiCommGame, u: float) -> tuple[float, float]:
    """Open interval the interior community equilibrium is expected to fall in (``q < 1``)."""
    tau, q = game.spec.taus[m], game.q
    lo = 1.0 / (tau * (1.0 - q)) - u / q
    return lo, lo + 1.0


def bounding_functions(game: MultiCommGame, u: float) -> tuple[float | None, float | None]:
    """Lower and upper envelopes ``(g(u), f(u))`` for the next core probability.

    A value is ``None`` where its denominator is not positive.
    """
    q = game.q
    if q >= 1:
        raise ValidationError("the bounding functions need q < 1")
    total_tau = sum(game.spec.taus)
    base = 1.0 + game.M * q / (1.0 - q) - total_tau
    g_den = base - u * total_tau
    f_den = base + (1.0 + q) * total_tau - u * total_tau
    g = 1.0 - 1.0 / g_den if g_den > 0 else None
    f = 1.0 - 1.0 / f_den if f_den > 0 else None
    return g, f


def _find_cycle(ns, us, eps) -> list[tuple[int, ...]] | None:
    k = len(ns) - 1
    for period in range(2, CYCLE_WINDOW + 1):
        if k - period < 0:
            break
        if ns[k] == ns[k - period] and abs(us[k] - us[k - period]) < eps:
            return ns[k - period + 1 : k + 1]
    return None


def iterate(game: MultiCommGame, u0: float = 0.5, epsilon: float = 1e-7,
            max_iter: int = 1000) -> MultiCommTrace:
    """Alternate per-community equilibria and the core update until ``u`` settles.

    ``u_history[k]`` is the core probability fed into step ``k``;
    ``n_star_history[k]``, ``g_bounds[k]`` and ``f_bounds[k]`` are computed
    from it and bracket ``u_history[k + 1]``.
    """
    if not 0.0 <= u0 <= 1.0:
        raise ValidationError(f"u0 must lie in [0, 1], got {u0}")
    if not epsilon > 0:
        raise ValidationError(f"epsilon must be > 0, got {epsilon}")
    if max_iter < 1:
        raise ValidationError(f"max_iter must be >= 1, got {max_iter}")

    us = [float(u0)]
    ns: list[tuple[int, ...]] = []
    cfs: list[tuple[int, ...]] = []
    gs: list[float | None] = []
    fs: list[float | None] = []
    discrepancies = []
    u = float(u0)
    for k in range(max_iter):
        n_vec = tuple(community_equilibrium(m, game, u) for m in range(game.M))
        cf_vec = tuple(community_equilibrium_closed_form(m, game, u) for m in range(game.M))
        for m, (a, b) in enumerate(zip(n_vec, cf_vec)):
            if a != b:
                discrepancies.append((k, m, a, b))
        if game.q < 1:
            g, f = bounding_functions(game, u)
        else:
            g = f = None
        u_next = core_infection(game.spec, n_vec, u, game.form)
        ns.append(n_vec)
        cfs.append(cf_vec)
        gs.append(g)
        fs.append(f)
        us.append(u_next)
        if abs(u_next - u) < epsilon:
            return MultiCommTrace(us, ns, gs, fs, cfs, True, k + 1, epsilon,
                                  discrepancies=discrepancies, reason="converged")
        cycle = _find_cycle(ns, us[:-1], epsilon)
        if cycle is not None:
            return MultiCommTrace(us, ns, gs, fs, cfs, False, k + 1, epsilon, cycle=cycle,
                                  discrepancies=discrepancies, reason=f"cycle of period {len(cycle)}")
        u = u_next
    return MultiCommTrace(us, ns, gs, fs, cfs, False, max_iter, epsilon,
                          discrepancies=discrepancies, reason="max_iter exceeded")


def sandwich_violations(trace: MultiCommTrace) -> list[int]:
    """Steps ``k`` where a defined envelope fails to bracket ``u_history[k + 1]``."""
    bad = []
    for k, (g, f) in enumerate(zip(trace.g_bounds, trace.f_bounds)):
        nxt = trace.u_history[k + 1]
        if g is not None and not g < nxt:
            bad.append(k)
        elif f is not None and not nxt < f:
            bad.append(k)
    return bad


# cost ratios probed when searching for the reference two-community run
REPRODUCTION_QS = tuple(round(0.05 * i, 2) for i in range(1, 20))
REFERENCE_TWO_COMMUNITY = MultiCommunitySpec(sizes=(10, 15), taus=(0.5, 1.5))
REFERENCE_SEVEN_COMMUNITY = MultiCommunitySpec(
    sizes=(10, 15, 12, 8, 9, 4, 15), taus=(0.5, 1.5, 1.0, 1.2, 1.4, 0.8, 0.1)
)


@dataclass(frozen=True)
class ReproductionRow:
    q: float
    converged: bool
    iterations: int
    u_final: float
    n_star: tuple[int, ...]
    matches: bool


def reproduction_sweep(spec: MultiCommunitySpec = REFERENCE_TWO_COMMUNITY,
                       target_n: tuple[int, ...] = (6, 3), target_u: float = 0.8389,
                       u_tol: float = 1e-3, qs=REPRODUCTION_QS, u0: float = 0.5,
                       epsilon: float = 1e-7, H: float = 1.0,
                       form: str = "quadratic") -> list[ReproductionRow]:
    """Run :func:`iterate` for each cost ratio in ``qs`` and flag runs that hit the targets."""
    rows = []
    for q in qs:
        trace = iterate(MultiCommGame(spec, C=q * H, H=H, form=form), u0=u0, epsilon=epsilon)
        matches = trace.n_star == tuple(target_n) and abs(trace.u_final - target_u) <= u_tol
        rows.append(ReproductionRow(q, trace.converged, trace.iterations, trace.u_final,
                                    trace.n_star, matches))
    return rows
