"""Decentralized learning of the investment game on K_N.

Every node keeps a probability of investing, samples a pure action each
round, observes its normalized cost and nudges its probability toward the
action it just played, more strongly when that action was cheap.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .game_complete import GameParams
from .nimfa import v_complete


@dataclass(frozen=True)
class RlaConfig:
    """Settings of one learning run.

    ``schedule`` is ``"const"`` (rate ``b0``) or ``"decay"``
    (rate ``b0 / (1 + k / k0)``). The run stops once the largest
    probability change stays below ``epsilon_stop`` for ``patience``
    consecutive steps.
    """

    params: GameParams
    b0: float = 0.01
    schedule: str = "const"
    k0: float = 1000.0
    p0: float | tuple[float, ...] = 0.5
    epsilon_stop: float = 1e-4
    patience: int = 50
    max_steps: int = 200_000
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.b0 <= 1:
            raise ValidationError(f"b0 must lie in (0, 1], got {self.b0}")
        if self.schedule not in ("const", "decay"):
            raise ValidationError(f"schedule must be 'const' or 'decay', got {self.schedule!r}")
        if not self.k0 > 0:
            raise ValidationError(f"k0 must be > 0, got {self.k0}")
        if not self.epsilon_stop > 0:
            raise ValidationError(f"epsilon_stop must be > 0, got {self.epsilon_stop}")
        if self.patience < 1:
            raise ValidationError(f"patience must be >= 1, got {self.patience}")
        if self.max_steps < 1:
            raise ValidationError(f"max_steps must be >= 1, got {self.max_steps}")
        p0 = self.initial_probabilities()
        if np.any(p0 < 0) or np.any(p0 > 1) or not np.all(np.isfinite(p0)):
            raise ValidationError("p0 entries must lie in [0, 1]")

    def initial_probabilities(self) -> np.ndarray:
        p0 = np.asarray(self.p0, dtype=float)
        if p0.ndim == 0:
            return np.full(self.params.N, float(p0))
        if p0.shape != (self.params.N,):
            raise ValidationError(f"p0 must be a scalar or have length {self.params.N}, got {p0.shape}")
        return p0.copy()

    def rate(self, k: int) -> float:
        if self.schedule == "const":
            return self.b0
        return self.b0 / (1.0 + k / self.k0)


@dataclass
class RlaTrace:
    """Row ``k`` of each history holds the state entering step ``k``.

    ``p_history`` has one more row than the action and cost histories: the
    final probabilities.
    """

    p_history: np.ndarray
    action_history: np.ndarray
    cost_history: np.ndarray
    invest_counts: np.ndarray
    steps: int
    converged: bool
    converged_n_star: int | None
    config: RlaConfig = field(repr=False)

    @property
    def non_investor_counts(self) -> np.ndarray:
        return self.config.params.N - self.invest_counts

    @property
    def final_p(self) -> np.ndarray:
        return self.p_history[-1]

    def summary(self) -> dict:
        return {
            "steps": self.steps,
            "converged": self.converged,
            "converged_n_star": self.converged_n_star,
            "final_p": self.final_p.tolist(),
            "final_invest_count": int(self.invest_counts[-1]) if self.steps else None,
        }

    def write_csv(self, path) -> None:
        """One row per (step, node): probability, action and cost at that step."""
        with open(path, "w", newline="") as fh:
            write_trace_rows(self, fh)

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2)


TRACE_COLUMNS = ("step", "node", "p", "sigma", "cost")


def write_trace_rows(trace: RlaTrace, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for k in range(trace.steps):
        for i in range(trace.p_history.shape[1]):
            w.writerow([k, i, f"{trace.p_history[k, i]:.12g}", int(trace.action_history[k, i]),
                        f"{trace.cost_history[k, i]:.12g}"])


def _pure_count(p: np.ndarray, N: int) -> int:
    return N - int(np.rint(p).sum())


def rla_run(config: RlaConfig) -> RlaTrace:
    """Simulate the learning rule until the probabilities settle or ``max_steps`` runs out.

    Each step the costs are ``C`` for investors and ``H * v(n)`` for the
    ``n`` non-investors, scaled by ``1 / (C + H)``; every node then moves
    ``p += b * (1 - cost) * (sigma - p)``.
    """
    params = config.params
    N, C, H, tau = params.N, params.C, params.H, params.tau
    rng = np.random.default_rng(config.seed)
    p = config.initial_probabilities()
    scale = C + H

    ps, actions, costs = [p.copy()], [], []
    quiet = 0
    converged = False
    for k in range(config.max_steps):
        sigma = (rng.random(N) < p).astype(np.int8)
        n = N - int(sigma.sum())
        cost = np.where(sigma == 1, C, H * v_complete(n, tau)) / scale
        step = config.rate(k) * (1.0 - cost) * (sigma - p)
        p = np.clip(p + step, 0.0, 1.0)
        actions.append(sigma)
        costs.append(cost)
        ps.append(p.copy())
        quiet = quiet + 1 if float(np.max(np.abs(step))) < config.epsilon_stop else 0
        if quiet >= config.patience:
            converged = True
            break

    action_history = np.array(actions, dtype=np.int8).reshape(-1, N)
    return RlaTrace(
        p_history=np.array(ps),
        action_history=action_history,
        cost_history=np.array(costs).reshape(-1, N),
        invest_counts=action_history.sum(axis=1).astype(int),
        steps=len(actions),
        converged=converged,
        converged_n_star=_pure_count(p, N) if converged else None,
        config=config,
    )


def mean_field_count(params: GameParams, p: float) -> float:
    """Expected number of exposed nodes seen by one exposed node: itself plus ``(1 - p)(N - 1)`` others."""
    return (1.0 - p) * (params.N - 1) + 1.0


def replicator_rhs(params: GameParams, p: float) -> float:
    gap = params.H * v_complete(mean_field_count(params, p), params.tau) - params.C
    return p * (1.0 - p) * gap


def replicator_ode(params: GameParams, p0: float, horizon: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Classical RK4 integration of ``p' = p (1 - p) (H v(n(p)) - C)``.

    Returns ``(times, p)``. One learning step at rate ``b`` corresponds to
    ``b / (C + H)`` time units.
    """
    if not dt > 0:
        raise ValidationError(f"dt must be > 0, got {dt}")
    if not horizon >= 0:
        raise ValidationError(f"horizon must be >= 0, got {horizon}")
    if not 0.0 <= p0 <= 1.0:
        raise ValidationError(f"p0 must lie in [0, 1], got {p0}")
    steps = int(np.ceil(horizon / dt))
    times = np.linspace(0.0, steps * dt, steps + 1)
    out = np.empty(steps + 1)
    out[0] = p = float(p0)
    f = lambda x: replicator_rhs(params, x)
    for k in range(steps):
        k1 = f(p)
        k2 = f(p + 0.5 * dt * k1)
        k3 = f(p + 0.5 * dt * k2)
        k4 = f(p + dt * k3)
        p = min(1.0, max(0.0, p + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0))
        out[k + 1] = p
    return times, out


@dataclass(frozen=True)
class BatchOutcome:
    seed: int
    steps: int
    converged: bool
    n_star: int | None
    final_p: np.ndarray = field(repr=False)


def _exposed_cost_table(params: GameParams) -> np.ndarray:
    """Normalized cost of a non-investor for every count 0..N, computed exactly as in :func:`rla_run`."""
    scale = params.C + params.H
    return np.array([params.H * v_complete(n, params.tau) / scale for n in range(params.N + 1)])


def _batch_costs(params: GameParams, sigma: np.ndarray, table: np.ndarray) -> np.ndarray:
    n = params.N - sigma.sum(axis=1)
    return np.where(sigma == 1, params.C / (params.C + params.H), table[n][:, None])


def rla_batch(config: RlaConfig, seeds, block: int = 4096) -> list[BatchOutcome]:
    """Run :func:`rla_run` for many seeds at once, keeping only the outcomes.

    Each seed draws from its own generator in the same order as a single
    run, so the outcome for a seed equals ``rla_run`` with that seed.
    """
    seeds = [int(s) for s in seeds]
    N = config.params.N
    S = len(seeds)
    rngs = [np.random.default_rng(s) for s in seeds]
    p = np.tile(config.initial_probabilities(), (S, 1))
    quiet = np.zeros(S, dtype=int)
    active = np.ones(S, dtype=bool)
    steps = np.zeros(S, dtype=int)
    draws = np.empty((block, S, N))
    table = _exposed_cost_table(config.params)

    for k in range(config.max_steps):
        j = k % block
        if j == 0:
            for s in np.flatnonzero(active):
                draws[:, s] = rngs[s].random((block, N))
        if not active.any():
            break
        sigma = (draws[j] < p).astype(np.int8)
        step = config.rate(k) * (1.0 - _batch_costs(config.params, sigma, table)) * (sigma - p)
        # finished seeds are frozen; their stale draws are never used
        step[~active] = 0.0
        p = np.clip(p + step, 0.0, 1.0)
        steps += active
        calm = np.max(np.abs(step), axis=1) < config.epsilon_stop
        quiet = np.where(calm & active, quiet + 1, 0)
        active &= quiet < config.patience

    return [
        BatchOutcome(seed, int(steps[i]), not active[i],
                     None if active[i] else _pure_count(p[i], N), p[i].copy())
        for i, seed in enumerate(seeds)
    ]


def rla_mean_path(config: RlaConfig, seeds, steps: int) -> np.ndarray:
    """Investment probability averaged over nodes and seeds for ``steps`` steps, ignoring the stop rule.

    Entry ``k`` is the average entering step ``k``; the result has
    ``steps + 1`` entries.
    """
    if steps < 0:
        raise ValidationError(f"steps must be >= 0, got {steps}")
    seeds = [int(s) for s in seeds]
    N = config.params.N
    rngs = [np.random.default_rng(s) for s in seeds]
    draws = np.stack([r.random((steps, N)) for r in rngs], axis=1) if steps else None
    p = np.tile(config.initial_probabilities(), (len(seeds), 1))
    table = _exposed_cost_table(config.params)
    out = np.empty(steps + 1)
    out[0] = p.mean()
    for k in range(steps):
        sigma = (draws[k] < p).astype(np.int8)
        step = config.rate(k) * (1.0 - _batch_costs(config.params, sigma, table)) * (sigma - p)
        p = np.clip(p + step, 0.0, 1.0)
        out[k + 1] = p.mean()
    return out
