"""Protection games against SIS epidemics on complete, bipartite and multi-community networks."""

from .errors import NonConvergenceError, ValidationError
from .game_bipartite import BipartiteGame
from .game_complete import GameParams, analyse
from .multicommunity import MultiCommGame, iterate
from .nimfa import (
    EpidemicRates,
    MultiCommunitySpec,
    solve_general,
    v_bipartite,
    v_community,
    v_complete,
)
from .rla import RlaConfig, replicator_ode, rla_batch, rla_run

__all__ = [
    "BipartiteGame",
    "EpidemicRates",
    "GameParams",
    "MultiCommGame",
    "MultiCommunitySpec",
    "NonConvergenceError",
    "RlaConfig",
    "ValidationError",
    "analyse",
    "iterate",
    "replicator_ode",
    "rla_batch",
    "rla_run",
    "solve_general",
    "v_bipartite",
    "v_community",
    "v_complete",
]
