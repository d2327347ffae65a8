"""Investment game on the complete graph K_N.

Each of ``N`` nodes either invests (cost ``C``) or stays exposed and pays
``H`` times its steady-state infection probability in the complete graph
induced by the non-investors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats

from .errors import ValidationError
from .nimfa import v_complete

# guard against ceil(7.0000000001) on values that are integral in exact arithmetic
_CEIL_RTOL = 1e-12


def _ceil(x: float) -> int:
    return math.ceil(x - _CEIL_RTOL * max(1.0, abs(x)))


@dataclass(frozen=True)
class GameParams:
    N: int
    C: float
    H: float
    tau: float

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValidationError(f"N must be an integer >= 1, got {self.N}")
        if not self.C > 0:
            raise ValidationError(f"C must be > 0, got {self.C}")
        if not self.H > 0:
            raise ValidationError(f"H must be > 0, got {self.H}")
        if not self.tau > 0:
            raise ValidationError(f"tau must be > 0, got {self.tau}")
        object.__setattr__(self, "N", int(self.N))

    @property
    def q(self) -> float:
        return self.C / self.H

    @property
    def above_threshold(self) -> bool:
        return self.tau * (self.N - 1) > 1.0

    def v(self, n: float) -> float:
        return v_complete(n, self.tau)


@dataclass(frozen=True)
class PureEquilibrium:
    n_star: int
    cost_invest: float
    cost_not_invest: float
    potential_at_eq: float
    stable_not_investing: bool
    stable_investing: bool


@dataclass(frozen=True)
class MixedEquilibrium:
    p_star: float
    p_hat_star: float
    expected_cost_invest: float
    expected_cost_not: float
    solver_iterations: int
    interior: bool


@dataclass(frozen=True)
class PoAReport:
    n_star: int
    n_opt: int
    social_cost_eq: float
    social_cost_opt: float
    poa: float
    poa_upper_bound: float
    poa_mixed: float | None = None
    poa_mixed_approx: float | None = None


@dataclass(frozen=True)
class MixedOptimum:
    p_opt: float
    cost: float
    below_threshold: bool
    interval: tuple[float, float] | None = None


@dataclass(frozen=True)
class StrategyComparison:
    social_cost_pure: float
    social_cost_mixed: float
    ratio: float
    applicable: bool
    pure_cheaper: bool


# -- pure strategies ----------------------------------------------------------


def social_cost(params: GameParams, n: int) -> float:
    """Total cost when ``n`` nodes do not invest."""
    return params.C * (params.N - n) + n * params.H * params.v(n)


def potential(params: GameParams, n: int) -> float:
    if not 0 <= n <= params.N:
        raise ValidationError(f"n must lie in [0, {params.N}], got {n}")
    return params.C * (params.N - n) + params.H * sum(params.v(j) for j in range(2, n + 1))


def potential_profile(params: GameParams) -> np.ndarray:
    """The potential at every n in 0..N."""
    vs = np.array([params.v(j) for j in range(params.N + 1)])
    vs[:2] = 0.0
    n = np.arange(params.N + 1)
    return params.C * (params.N - n) + params.H * np.cumsum(vs)


def is_equilibrium(params: GameParams, n: int, atol: float = 1e-12) -> tuple[bool, bool]:
    """Whether exposed nodes and investing nodes, respectively, have no profitable deviation at ``n``."""
    exposed_ok = params.H * params.v(n) <= params.C + atol
    investors_ok = n == params.N or params.C <= params.H * params.v(n + 1) + atol
    return exposed_ok, investors_ok


def equilibrium_bruteforce(params: GameParams, atol: float = 1e-12) -> list[int]:
    """Every non-investor count that passes both no-deviation checks."""
    return [n for n in range(params.N + 1) if all(is_equilibrium(params, n, atol))]


def equilibrium_count(params: GameParams) -> int:
    if params.C >= params.H:
        return params.N
    return min(params.N, _ceil(1.0 / ((1.0 - params.q) * params.tau)))


def pure_equilibrium(params: GameParams) -> PureEquilibrium:
    n_star = equilibrium_count(params)
    exposed_ok, investors_ok = is_equilibrium(params, n_star)
    return PureEquilibrium(
        n_star=n_star,
        cost_invest=params.C,
        cost_not_invest=params.H * params.v(n_star),
        potential_at_eq=potential(params, n_star),
        stable_not_investing=exposed_ok,
        stable_investing=investors_ok,
    )


def social_optimum_candidates(params: GameParams) -> list[int]:
    """Counts that can minimise the social cost.

    Below ``1 + 1/tau`` nobody is infected and the cost falls with ``n``,
    above it the cost is monotone or unimodal, so only the two integers
    around ``1 + 1/tau`` and ``N`` need checking.
    """
    edge = 1.0 + 1.0 / params.tau
    near = {math.floor(edge + _CEIL_RTOL * edge), _ceil(edge)}
    return sorted({params.N} | {min(params.N, max(0, n)) for n in near})


def social_optimum(params: GameParams) -> tuple[int, float]:
    """Socially optimal non-investor count and its cost; ties go to the smaller count."""
    best = min(social_optimum_candidates(params), key=lambda n: (social_cost(params, n), n))
    return best, social_cost(params, best)


def social_optimum_bruteforce(params: GameParams) -> tuple[int, float]:
    costs = [social_cost(params, n) for n in range(params.N + 1)]
    best = min(range(params.N + 1), key=lambda n: (costs[n], n))
    return best, costs[best]


def poa_bound(params: GameParams) -> float:
    denom = 1.0 - (1.0 + 1.0 / params.tau) / params.N
    return 1.0 / denom if denom > 0 else math.inf


def poa_pure(params: GameParams) -> PoAReport:
    n_star = equilibrium_count(params)
    n_opt, s_opt = social_optimum(params)
    s_eq = social_cost(params, n_star)
    if n_star < n_opt:
        raise RuntimeError(f"equilibrium count {n_star} below optimum {n_opt} for {params}")
    if s_opt == 0.0:
        if s_eq != 0.0:
            raise ZeroDivisionError(f"optimal social cost is 0 but equilibrium cost is {s_eq}")
        poa = 1.0
    else:
        poa = s_eq / s_opt
    return PoAReport(
        n_star=n_star,
        n_opt=n_opt,
        social_cost_eq=s_eq,
        social_cost_opt=s_opt,
        poa=poa,
        poa_upper_bound=poa_bound(params),
    )


# -- symmetric mixed strategies -----------------------------------------------


def _exposure_weights(params: GameParams) -> np.ndarray:
    """Infection probability seen by an exposed node when ``n`` other nodes are exposed, n = 0..N-1."""
    others = np.arange(params.N)
    with np.errstate(divide="ignore"):
        w = 1.0 - 1.0 / (params.tau * others)
    w[others == 0] = 0.0
    return np.maximum(w, 0.0)


def mixed_cost_not_invest(params: GameParams, p: float) -> float:
    """Expected cost of staying exposed when every other node invests with probability ``p``."""
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"p must lie in [0, 1], got {p}")
    others = np.arange(params.N)
    pmf = stats.binom.pmf(others, params.N - 1, 1.0 - p)
    return float(params.H * np.dot(_exposure_weights(params), pmf))


def mixed_cost(params: GameParams, p_own: float, p: float) -> float:
    """Expected cost of a node investing with ``p_own`` against others investing with ``p``."""
    return p_own * params.C + (1.0 - p_own) * mixed_cost_not_invest(params, p)


def mixed_cost_approx(params: GameParams, p_own: float, p: float) -> float:
    """Mean-field version of :func:`mixed_cost`: other exposed nodes replaced by their average."""
    n_bar = (1.0 - p) * (params.N - 1)
    return p_own * params.C + (1.0 - p_own) * params.H * params.v(n_bar + 1.0)


def _bisect_indifference(params: GameParams, lo: float, hi: float, tol: float,
                         max_iter: int) -> tuple[float, int]:
    f = lambda p: mixed_cost_not_invest(params, p) - params.C
    f_lo = f(lo)
    it = 0
    mid = 0.5 * (lo + hi)
    for it in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if (hi - lo) <= tol and abs(f_mid) <= tol:
            break
        if f_mid == 0.0:
            break
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
        if mid in (lo, hi) and hi - lo <= 2 * np.finfo(float).eps:
            break
    return mid, it


def mixed_equilibrium_exact(params: GameParams, tol: float = 1e-10, max_iter: int = 200,
                            bracket: tuple[float, float] = (0.0, 1.0)) -> MixedEquilibrium:
    """Symmetric mixed equilibrium from the indifference condition.

    Bisection on ``S0(p) - C`` stops once the bracket is narrower than
    ``tol`` and the indifference residual is below ``tol``.
    """
    if not tol > 0:
        raise ValidationError(f"tol must be > 0, got {tol}")
    s0_at_zero = mixed_cost_not_invest(params, 0.0)
    p_hat = mixed_equilibrium_approx(params) if params.N >= 2 else 0.0
    if params.C >= s0_at_zero:
        return MixedEquilibrium(0.0, p_hat, params.C, s0_at_zero, 0, interior=False)
    lo, hi = bracket
    if not (0.0 <= lo < hi <= 1.0):
        raise ValidationError(f"invalid bracket {bracket}")
    if not (mixed_cost_not_invest(params, lo) - params.C) * (mixed_cost_not_invest(params, hi) - params.C) <= 0:
        raise ValidationError(f"bracket {bracket} does not enclose the equilibrium")
    p_star, iterations = _bisect_indifference(params, lo, hi, tol, max_iter)
    return MixedEquilibrium(
        p_star=p_star,
        p_hat_star=p_hat,
        expected_cost_invest=params.C,
        expected_cost_not=mixed_cost_not_invest(params, p_star),
        solver_iterations=iterations,
        interior=True,
    )


def mixed_interior_exists(params: GameParams) -> bool:
    return params.N >= 2 and params.C < params.H * (1.0 - 1.0 / (params.tau * (params.N - 1)))


def mixed_equilibrium_approx(params: GameParams) -> float:
    if params.N < 2:
        raise ValidationError("the approximate mixed equilibrium needs N >= 2")
    if not mixed_interior_exists(params):
        return 0.0
    return 1.0 - params.H / (params.tau * (params.H - params.C) * (params.N - 1))


def mixed_social_cost_approx(params: GameParams, p: float) -> float:
    return params.N * mixed_cost_approx(params, p, p)


def mixed_social_cost_exact(params: GameParams, p: float) -> float:
    return params.N * mixed_cost(params, p, p)


def mixed_social_optimum(params: GameParams) -> MixedOptimum:
    """Probability minimising the mean-field social cost, and that cost."""
    if params.N < 2:
        raise ValidationError("the mixed social optimum needs N >= 2")
    if not params.above_threshold:
        return MixedOptimum(0.0, 0.0, below_threshold=True)
    edge = 1.0 - 1.0 / (params.tau * (params.N - 1))
    cost = params.N * min(params.C, params.H) * edge
    if params.C > params.H:
        return MixedOptimum(0.0, cost, below_threshold=False)
    if params.C == params.H:
        return MixedOptimum(0.0, cost, below_threshold=False, interval=(0.0, edge))
    return MixedOptimum(edge, cost, below_threshold=False)


def mixed_social_optimum_exact(params: GameParams, grid: int = 2001) -> tuple[float, float]:
    """Minimiser of the exact expected social cost over p, by grid search plus bounded refinement."""
    ps = np.linspace(0.0, 1.0, grid)
    costs = np.array([mixed_social_cost_exact(params, p) for p in ps])
    i = int(np.argmin(costs))
    lo, hi = ps[max(i - 1, 0)], ps[min(i + 1, grid - 1)]
    res = optimize.minimize_scalar(lambda p: mixed_social_cost_exact(params, p),
                                   bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-12})
    if res.fun < costs[i]:
        return float(res.x), float(res.fun)
    return float(ps[i]), float(costs[i])


def mixed_equilibrium_social_cost(params: GameParams, p_star: float, interior: bool) -> float:
    # indifference makes every node's expected cost equal to C at an interior equilibrium
    if interior:
        return params.N * params.C
    return mixed_social_cost_exact(params, p_star)


def poa_mixed(params: GameParams) -> tuple[float, float]:
    """``(exact, approximate)`` price of anarchy under symmetric mixed strategies.

    The exact value divides the equilibrium social cost at the exact
    equilibrium by the minimum of the exact expected social cost; the
    approximate value is the mean-field closed form.
    """
    if params.N < 2 or not params.above_threshold:
        raise ValidationError("mixed PoA needs N >= 2 and an above-threshold epidemic")
    eq = mixed_equilibrium_exact(params)
    _, opt_cost = mixed_social_optimum_exact(params)
    exact = mixed_equilibrium_social_cost(params, eq.p_star, eq.interior) / opt_cost
    edge = 1.0 - 1.0 / (params.tau * (params.N - 1))
    approx = params.C / (min(params.C, params.H) * edge)
    return exact, approx


def compare_strategies(params: GameParams) -> StrategyComparison:
    """Social cost at the pure equilibrium against ``N*C`` at the mixed one.

    ``applicable`` is False when no interior mixed equilibrium exists; the
    costs and ratio are still reported, but the ordering is then not a
    guaranteed property.
    """
    s_pure = social_cost(params, equilibrium_count(params))
    s_mixed = params.N * params.C
    return StrategyComparison(
        social_cost_pure=s_pure,
        social_cost_mixed=s_mixed,
        ratio=s_pure / s_mixed,
        applicable=mixed_interior_exists(params),
        pure_cheaper=s_pure < s_mixed,
    )


@dataclass
class CompleteReport:
    """Everything the CLI reports for one complete-graph parameter set."""

    params: GameParams
    pure: PureEquilibrium
    equilibria: list[int]
    poa: PoAReport
    mixed: MixedEquilibrium | None
    mixed_optimum: MixedOptimum | None
    comparison: StrategyComparison
    notes: list[str] = field(default_factory=list)


def analyse(params: GameParams) -> CompleteReport:
    pure = pure_equilibrium(params)
    report = poa_pure(params)
    mixed = mixed_opt = None
    notes = []
    if params.N >= 2:
        mixed = mixed_equilibrium_exact(params)
        mixed_opt = mixed_social_optimum(params)
        if params.above_threshold:
            exact, approx = poa_mixed(params)
            report = PoAReport(**{**report.__dict__, "poa_mixed": exact, "poa_mixed_approx": approx})
        else:
            notes.append("below threshold: mixed PoA undefined")
    return CompleteReport(
        params=params,
        pure=pure,
        equilibria=equilibrium_bruteforce(params),
        poa=report,
        mixed=mixed,
        mixed_optimum=mixed_opt,
        comparison=compare_strategies(params),
        notes=notes,
    )
