"""Investment game on the complete bipartite graph K_{M,N}.

Pairs are written ``(n, m)``: ``n`` exposed nodes remain in cluster N and
``m`` in cluster M.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .nimfa import v_bipartite

_CEIL_RTOL = 1e-12


@dataclass(frozen=True)
class BipartiteGame:
    M: int
    N: int
    C: float
    H: float
    tau: float

    def __post_init__(self):
        for name in ("M", "N"):
            val = getattr(self, name)
            if int(val) != val or val < 1:
                raise ValidationError(f"{name} must be an integer >= 1, got {val}")
            object.__setattr__(self, name, int(val))
        if not self.C > 0 or not self.H > 0 or not self.tau > 0:
            raise ValidationError("C, H and tau must all be > 0")

    @property
    def q(self) -> float:
        return self.C / self.H

    @property
    def A(self) -> float:
        return self.tau ** 2 * (1.0 - self.q)

    @property
    def B(self) -> float:
        return self.tau * self.q

    @property
    def above_threshold(self) -> bool:
        return self.tau ** 2 * self.M * self.N > 1.0

    def v_M(self, n: int, m: int) -> float:
        return v_bipartite(m, n, self.tau)[0]

    def v_N(self, n: int, m: int) -> float:
        return v_bipartite(m, n, self.tau)[1]


@dataclass(frozen=True)
class PairCheck:
    """The four inequality values behind one equilibrium pair (costs scaled by H)."""

    n: int
    m: int
    hv_M: float
    hv_M_dev: float | None
    hv_N: float
    hv_N_dev: float | None


@dataclass(frozen=True)
class BipartiteEquilibria:
    pairs: list[tuple[int, int]]
    checks: list[PairCheck]
    balanced: bool
    condition2_holds: bool


@dataclass(frozen=True)
class BipartiteOptimum:
    case: int
    cost: float
    points: list[tuple[float, float]]
    grid_pair: tuple[int, int]
    grid_cost: float


@dataclass(frozen=True)
class BipartitePoA:
    poa: float | None
    worst_pair: tuple[int, int] | None
    social_cost_eq: float | None
    social_cost_opt: float
    upper_bound: float
    bounded: bool
    degenerate: bool
    cor6_holds: bool


def condition2(game: BipartiteGame) -> bool:
    """Hypothesis under which every equilibrium pair is balanced (|n - m| <= 1)."""
    q = game.q
    if q >= 0.5:
        return True
    if q <= 0:
        return False
    return game.tau >= (1 + q) * (1 - 2 * q) / (2 * q * (1 - q))


def check_pair(game: BipartiteGame, n: int, m: int, slack: float = 0.0) -> PairCheck | None:
    """The four inequalities for ``(n, m)``; returns ``None`` when any fails.

    Exposed nodes must be strictly better off than investing; investors
    must be no better off exposed. ``slack`` widens both sides.
    """
    C, H = game.C, game.H
    hv_m = H * game.v_M(n, m)
    hv_n = H * game.v_N(n, m)
    if not (hv_m < C + slack and hv_n < C + slack):
        return None
    hv_m_dev = hv_n_dev = None
    if m < game.M:
        hv_m_dev = H * game.v_M(n, m + 1)
        if not C <= hv_m_dev + slack:
            return None
    if n < game.N:
        hv_n_dev = H * game.v_N(n + 1, m)
        if not C <= hv_n_dev + slack:
            return None
    return PairCheck(n, m, hv_m, hv_m_dev, hv_n, hv_n_dev)


def equilibria_enumerate(game: BipartiteGame, slack: float = 0.0) -> BipartiteEquilibria:
    checks = []
    for n in range(game.N + 1):
        for m in range(game.M + 1):
            c = check_pair(game, n, m, slack)
            if c is not None:
                checks.append(c)
    pairs = [(c.n, c.m) for c in checks]
    return BipartiteEquilibria(
        pairs=pairs,
        checks=checks,
        balanced=all(abs(n - m) <= 1 for n, m in pairs),
        condition2_holds=condition2(game),
    )


def _best_response_count(rate: float, size: int) -> int:
    """Exposed count ``k`` with ``k < 1/rate <= k + 1``, capped at ``size``."""
    if rate <= 0:
        return size
    x = 1.0 / rate
    return min(size, math.ceil(x - _CEIL_RTOL * max(1.0, x)) - 1)


def equilibria_closed_form(game: BipartiteGame) -> list[tuple[int, int]]:
    """Equilibrium pairs from the coupled ceiling equations.

    For each ``n`` the cluster-M count is forced, and the pair is kept when
    the cluster-N count implied by that ``m`` is ``n`` again.
    """
    if game.q >= 1:
        return [(game.N, game.M)]
    A, B = game.A, game.B
    pairs = []
    for n in range(game.N + 1):
        m = _best_response_count(A * n - B, game.M)
        if _best_response_count(A * m - B, game.N) == n:
            pairs.append((n, m))
    return pairs


def social_cost(game: BipartiteGame, n: int, m: int) -> float:
    vm, vn = v_bipartite(m, n, game.tau)
    return game.C * (game.N - n + game.M - m) + game.H * (n * vn + m * vm)


def social_cost_grid(game: BipartiteGame) -> np.ndarray:
    """Social cost on the integer grid, indexed ``[n, m]``."""
    grid = np.empty((game.N + 1, game.M + 1))
    for n in range(game.N + 1):
        for m in range(game.M + 1):
            grid[n, m] = social_cost(game, n, m)
    return grid


def case_ratio(game: BipartiteGame) -> float:
    t, M, N = game.tau, game.M, game.N
    return t * max(M, N) * (t * (M + N) + 2) / ((t * M + 1) * (t * N + 1))


def social_optimum_bipartite(game: BipartiteGame) -> BipartiteOptimum:
    """Optimal social cost in the continuous relaxation, with the best integer pair alongside."""
    t, M, N, C, H = game.tau, game.M, game.N, game.C, game.H
    grid = social_cost_grid(game)
    gn, gm = np.unravel_index(int(np.argmin(grid)), grid.shape)
    grid_pair, grid_cost = (int(gn), int(gm)), float(grid[gn, gm])
    if M * N * t * t <= 1.0:
        return BipartiteOptimum(1, 0.0, [(float(N), float(M))], grid_pair, grid_cost)
    excess = t * t * M * N - 1.0
    if case_ratio(game) >= game.q:
        cost = C * excess / (t * t * max(M, N))
        points = []
        if M >= N:
            points.append((1.0 / (t * t * M), float(M)))
        if M <= N:
            points.append((float(N), 1.0 / (t * t * N)))
        return BipartiteOptimum(2, cost, points, grid_pair, grid_cost)
    cost = H * excess * (t * (M + N) + 2) / (t * (t * M + 1) * (t * N + 1))
    return BipartiteOptimum(3, cost, [(float(N), float(M))], grid_pair, grid_cost)


def poa_upper_bound(game: BipartiteGame) -> float:
    t, M, N, C, H = game.tau, game.M, game.N, game.C, game.H
    excess = max(t * t * M * N - 1.0, 0.0)
    if excess == 0.0:
        return math.inf
    inner = min(1.0 / (t * max(M, N)), H * (t * (M + N) + 2) / (C * (t * M + 1) * (t * N + 1)))
    return t * (M + N) / (excess * inner)


def poa_bipartite(game: BipartiteGame, equilibria: BipartiteEquilibria | None = None) -> BipartitePoA:
    """Pessimistic price of anarchy: worst equilibrium cost over the integer-grid optimum."""
    eq = equilibria if equilibria is not None else equilibria_enumerate(game)
    grid = social_cost_grid(game)
    opt = float(grid.min())
    bound = poa_upper_bound(game)
    cor6 = bound > max(2.0, game.q)
    if not eq.pairs:
        return BipartitePoA(None, None, None, opt, bound, math.isfinite(bound), True, cor6)
    worst = max(eq.pairs, key=lambda nm: (grid[nm], nm))
    s_eq = float(grid[worst])
    if opt == 0.0:
        if s_eq == 0.0:
            return BipartitePoA(1.0, worst, s_eq, opt, bound, math.isfinite(bound), False, cor6)
        return BipartitePoA(None, worst, s_eq, opt, bound, math.isfinite(bound), True, cor6)
    return BipartitePoA(s_eq / opt, worst, s_eq, opt, bound, math.isfinite(bound), False, cor6)


def counterexample_game(M: int = 12, N: int = 12, H: float = 1.0) -> BipartiteGame:
    """Parameters with ``tau^2 (1 - q) = 1e-1`` and ``tau q = 1e-4``, which admit unbalanced equilibria."""
    tau = (1.0 + math.sqrt(40_000_001)) / 20_000
    q = 1e-4 / tau
    return BipartiteGame(M=M, N=N, C=q * H, H=H, tau=tau)
