"""Command-line front end: ``sisgame <command> [options]``.

Every command produces one report, written as JSON (the default) or CSV
to ``--output``, to ``$SISGAME_OUTPUT_DIR/<command>.<format>`` when that
variable is set, or to stdout otherwise. JSON reports carry the parsed
configuration next to the result, so :func:`load_report` plus
:func:`execute` reproduces them.

Exit codes: 0 success, 2 invalid input, 3 non-convergence, 1 anything else.
Failures print a single JSON line on stderr.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import game_bipartite as gb
from . import game_complete as gc
from . import multicommunity as mc
from .errors import NonConvergenceError, ValidationError
from .nimfa import MultiCommunitySpec, read_edge_list, solve_general
from .rla import TRACE_COLUMNS, RlaConfig, rla_run

SCHEMA_VERSION = 1
OUTPUT_DIR_ENV = "SISGAME_OUTPUT_DIR"

EXIT_OK, EXIT_INTERNAL, EXIT_VALIDATION, EXIT_NONCONVERGENCE = 0, 1, 2, 3


class CliError(Exception):
    def __init__(self, kind: str, message: str, code: int):
        super().__init__(message)
        self.kind, self.code = kind, code


def fmt_num(x):
    """Round floats to 12 significant digits; non-finite values become strings."""
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return float(f"{x:.12g}")
    if isinstance(x, dict):
        return {k: fmt_num(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [fmt_num(v) for v in x]
    return x


def _cell(x) -> str:
    x = fmt_num(x)
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return f"{x:.12g}"
    if isinstance(x, list):
        return ";".join(_cell(v) for v in x)
    return str(x)


@dataclass
class Output:
    result: dict
    columns: tuple[str, ...]
    rows: list[list]


# -- commands -----------------------------------------------------------------


COMPLETE_COLUMNS = (
    "N", "C", "H", "tau", "n_star", "n_opt", "social_cost_eq", "social_cost_opt", "poa",
    "poa_upper_bound", "p_star", "p_hat_star", "mixed_interior", "poa_mixed", "poa_mixed_approx",
    "p_opt_mixed", "social_cost_mixed", "cost_ratio",
)


def complete_row(N: int, C: float, H: float, tau: float) -> dict:
    rep = gc.analyse(gc.GameParams(N, C, H, tau))
    return {
        "N": N, "C": C, "H": H, "tau": tau,
        "n_star": rep.poa.n_star,
        "n_opt": rep.poa.n_opt,
        "social_cost_eq": rep.poa.social_cost_eq,
        "social_cost_opt": rep.poa.social_cost_opt,
        "poa": rep.poa.poa,
        "poa_upper_bound": rep.poa.poa_upper_bound,
        "p_star": rep.mixed.p_star if rep.mixed else None,
        "p_hat_star": rep.mixed.p_hat_star if rep.mixed else None,
        "mixed_interior": rep.mixed.interior if rep.mixed else False,
        "poa_mixed": rep.poa.poa_mixed,
        "poa_mixed_approx": rep.poa.poa_mixed_approx,
        "p_opt_mixed": rep.mixed_optimum.p_opt if rep.mixed_optimum else None,
        "social_cost_mixed": rep.comparison.social_cost_mixed,
        "cost_ratio": rep.comparison.ratio,
    }


def cmd_complete(cfg: dict) -> Output:
    row = complete_row(cfg["n"], cfg["c"], cfg["h"], cfg["tau"])
    params = gc.GameParams(cfg["n"], cfg["c"], cfg["h"], cfg["tau"])
    result = {**row, "equilibria": gc.equilibrium_bruteforce(params)}
    if row["p_star"] is not None:
        result["mixed_residual"] = gc.mixed_cost_not_invest(params, row["p_star"]) - params.C
    return Output(result, COMPLETE_COLUMNS, [[row[c] for c in COMPLETE_COLUMNS]])


BIPARTITE_COLUMNS = ("n", "m", "social_cost", "hv_M", "hv_N")


def _bipartite_result(game: gb.BipartiteGame) -> dict:
    eq = gb.equilibria_enumerate(game)
    opt = gb.social_optimum_bipartite(game)
    poa = gb.poa_bipartite(game, eq)
    return {
        "equilibria": [list(p) for p in eq.pairs],
        "closed_form_equilibria": [list(p) for p in gb.equilibria_closed_form(game)],
        "balanced": eq.balanced,
        "condition2": eq.condition2_holds,
        "optimum_case": opt.case,
        "optimum_cost": opt.cost,
        "optimum_grid_pair": list(opt.grid_pair),
        "optimum_grid_cost": opt.grid_cost,
        "poa": poa.poa,
        "worst_pair": list(poa.worst_pair) if poa.worst_pair else None,
        "poa_upper_bound": poa.upper_bound,
        "bound_exceeds_max_2_q": poa.cor6_holds,
    }


def cmd_bipartite(cfg: dict) -> Output:
    game = gb.BipartiteGame(M=cfg["m"], N=cfg["n"], C=cfg["c"], H=cfg["h"], tau=cfg["tau"])
    result = _bipartite_result(game)
    eq = gb.equilibria_enumerate(game)
    rows = [[c.n, c.m, gb.social_cost(game, c.n, c.m), c.hv_M, c.hv_N] for c in eq.checks]
    return Output(result, BIPARTITE_COLUMNS, rows)


MULTICOMM_COLUMNS = ("k", "u", "n_star", "closed_form_n_star", "g", "f")
REPRODUCTION_COLUMNS = ("q", "converged", "iterations", "u_final", "n_star", "matches")


def _int_list(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ValidationError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ValidationError(f"expected comma-separated numbers, got {text!r}") from None


def cmd_multicomm(cfg: dict) -> Output:
    spec = MultiCommunitySpec(_int_list(cfg["sizes"]), _float_list(cfg["taus"]))
    H = cfg["h"]
    if cfg["sweep"]:
        rows = mc.reproduction_sweep(spec, target_n=tuple(_int_list(cfg["target_n"])),
                                     target_u=cfg["target_u"], u0=cfg["u0"],
                                     epsilon=cfg["eps"], H=H, form=cfg["form"])
        table = [[r.q, r.converged, r.iterations, r.u_final, list(r.n_star), r.matches] for r in rows]
        result = {
            "rows": [dict(zip(REPRODUCTION_COLUMNS, t)) for t in table],
            "reproduced": any(r.matches for r in rows),
            "matching_q": [r.q for r in rows if r.matches],
        }
        return Output(result, REPRODUCTION_COLUMNS, table)
    C = cfg["q"] * H if cfg["q"] is not None else cfg["c"]
    if C is None:
        raise ValidationError("multicomm needs --c or --q")
    game = mc.MultiCommGame(spec, C=C, H=H, form=cfg["form"])
    tr = mc.iterate(game, u0=cfg["u0"], epsilon=cfg["eps"], max_iter=cfg["max_iter"])
    if cfg["strict"] and not tr.converged:
        raise NonConvergenceError(f"multi-community iteration stopped: {tr.reason}",
                                  last_iterate=tr.u_final)
    table = [[k, tr.u_history[k], list(tr.n_star_history[k]), list(tr.closed_form_history[k]),
              tr.g_bounds[k], tr.f_bounds[k]] for k in range(tr.iterations)]
    result = {
        "converged": tr.converged,
        "reason": tr.reason,
        "iterations": tr.iterations,
        "u_final": tr.u_final,
        "n_star": list(tr.n_star),
        "cycle": [list(c) for c in tr.cycle] if tr.cycle else None,
        "sandwich_violations": mc.sandwich_violations(tr),
        "closed_form_discrepancies": len(tr.discrepancies),
    }
    return Output(result, MULTICOMM_COLUMNS, table)


def _rla_config(cfg: dict) -> RlaConfig:
    p0 = _float_list(cfg["p0"])
    return RlaConfig(
        params=gc.GameParams(cfg["n"], cfg["c"], cfg["h"], cfg["tau"]),
        b0=cfg["b0"], schedule=cfg["schedule"], k0=cfg["k0"],
        p0=p0[0] if len(p0) == 1 else tuple(p0),
        epsilon_stop=cfg["eps_stop"], patience=cfg["patience"],
        max_steps=cfg["max_steps"], seed=cfg["seed"],
    )


def cmd_rla(cfg: dict) -> Output:
    trace = rla_run(_rla_config(cfg))
    params = trace.config.params
    result = {
        **trace.summary(),
        "equilibria": gc.equilibrium_bruteforce(params),
        "action_digest": hashlib.sha256(trace.action_history.tobytes()).hexdigest(),
    }
    rows = [[k, i, trace.p_history[k, i], int(trace.action_history[k, i]), trace.cost_history[k, i]]
            for k in range(trace.steps) for i in range(params.N)]
    return Output(result, TRACE_COLUMNS, rows)


NIMFA_COLUMNS = ("node", "v")


def cmd_nimfa(cfg: dict) -> Output:
    try:
        adj = read_edge_list(cfg["edges"], n=cfg["nodes"])
    except OSError as exc:
        raise ValidationError(f"cannot read edge list: {exc.strerror}: {cfg['edges']}") from None
    sol = solve_general(adj, cfg["tau"], tol=cfg["tol"])
    result = {
        "v": sol.v.tolist(),
        "above_threshold": sol.above_threshold,
        "residual": sol.residual,
        "iterations": sol.iterations,
    }
    return Output(result, NIMFA_COLUMNS, [[i, x] for i, x in enumerate(sol.v)])


# -- sweeps -------------------------------------------------------------------


SWEEP_PARAMS = {"n", "tau", "q", "c", "h"}
BIPARTITE_SWEEP_COLUMNS = ("M", "N", "C", "H", "tau", "equilibria", "poa", "poa_upper_bound",
                           "optimum_case", "optimum_cost", "optimum_grid_cost", "balanced")
COMPARE_COLUMNS = ("k", "C", "H", "tau", "poa_bipartite", "poa_complete",
                   "bound_bipartite", "bound_complete")


def sweep_values(start: float, stop: float, step: float, integer: bool) -> list:
    if not step > 0:
        raise ValidationError(f"sweep step must be > 0, got {step}")
    if stop < start:
        raise ValidationError(f"empty sweep range [{start}, {stop}]")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    vals = [start + i * step for i in range(count)]
    if integer:
        vals = sorted({int(round(v)) for v in vals})
    return vals


def _sweep_point(model: str, point: dict) -> list:
    N, C, H, tau = point["n"], point["c"], point["h"], point["tau"]
    if model == "complete":
        row = complete_row(N, C, H, tau)
        return [row[c] for c in COMPLETE_COLUMNS]
    if model == "bipartite":
        game = gb.BipartiteGame(M=N, N=N, C=C, H=H, tau=tau)
        r = _bipartite_result(game)
        return [N, N, C, H, tau, r["equilibria"], r["poa"], r["poa_upper_bound"],
                r["optimum_case"], r["optimum_cost"], r["optimum_grid_cost"], r["balanced"]]
    game = gb.BipartiteGame(M=N, N=N, C=C, H=H, tau=tau)
    poa_b = gb.poa_bipartite(game)
    params = gc.GameParams(2 * N, C, H, tau)
    return [N, C, H, tau, poa_b.poa, gc.poa_pure(params).poa, poa_b.upper_bound, gc.poa_bound(params)]


def cmd_sweep(cfg: dict) -> Output:
    model, param = cfg["model"], cfg["param"]
    if param not in SWEEP_PARAMS:
        raise ValidationError(f"cannot sweep {param!r}; choose from {sorted(SWEEP_PARAMS)}")
    values = sweep_values(cfg["start"], cfg["stop"], cfg["step"], integer=param == "n")
    points = []
    for val in values:
        point = {"n": cfg["n"], "c": cfg["c"], "h": cfg["h"], "tau": cfg["tau"]}
        if param == "q":
            point["c"] = val * point["h"]
        else:
            point[param] = val
        points.append(point)
    columns = {"complete": COMPLETE_COLUMNS, "bipartite": BIPARTITE_SWEEP_COLUMNS,
               "compare": COMPARE_COLUMNS}[model]
    if cfg["jobs"] > 1:
        with ProcessPoolExecutor(max_workers=cfg["jobs"]) as pool:
            rows = list(pool.map(_sweep_point, [model] * len(points), points))
    else:
        rows = [_sweep_point(model, p) for p in points]
    result = {"columns": list(columns), "rows": rows}
    return Output(result, columns, rows)


COMMANDS = {
    "complete": cmd_complete,
    "bipartite": cmd_bipartite,
    "multicomm": cmd_multicomm,
    "rla": cmd_rla,
    "nimfa": cmd_nimfa,
    "sweep": cmd_sweep,
}


# -- parsing ------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("usage", message, EXIT_VALIDATION)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sisgame", description="Protection games against SIS epidemics.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--output", default=None, help="file to write; default stdout or $%s" % OUTPUT_DIR_ENV)

    def game(p, defaults=None):
        for name, kind in (("n", int), ("c", float), ("h", float), ("tau", float)):
            if defaults is None:
                p.add_argument(f"--{name}", type=kind, required=True)
            else:
                p.add_argument(f"--{name}", type=kind, default=defaults[name])

    p = sub.add_parser("complete", help="investment game on K_N")
    game(p)
    common(p)

    p = sub.add_parser("bipartite", help="investment game on K_{M,N}")
    p.add_argument("--m", type=int, required=True)
    game(p)
    common(p)

    p = sub.add_parser("multicomm", help="iterative procedure on a multi-community network")
    p.add_argument("--sizes", required=True, help="comma-separated community sizes")
    p.add_argument("--taus", required=True, help="comma-separated spreading rates")
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--h", type=float, default=1.0)
    p.add_argument("--q", type=float, default=None, help="cost ratio C/H; overrides --c")
    p.add_argument("--u0", type=float, default=0.5)
    p.add_argument("--eps", type=float, default=1e-7)
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--form", choices=sorted(mc.COMMUNITY_FORMS), default="quadratic")
    p.add_argument("--strict", action="store_true", help="exit 3 when the iteration does not converge")
    p.add_argument("--sweep", action="store_true", help="scan q and report which values hit the target")
    p.add_argument("--target-n", default="6,3")
    p.add_argument("--target-u", type=float, default=0.8389)
    common(p)

    p = sub.add_parser("rla", help="decentralized learning on K_N")
    game(p)
    p.add_argument("--b0", type=float, default=0.01)
    p.add_argument("--schedule", choices=("const", "decay"), default="const")
    p.add_argument("--k0", type=float, default=1000.0)
    p.add_argument("--p0", default="0.5", help="scalar or comma-separated per-node values")
    p.add_argument("--eps-stop", type=float, default=1e-4)
    p.add_argument("--patience", type=int, default=50)
    p.add_argument("--max-steps", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=0)
    common(p)

    p = sub.add_parser("nimfa", help="steady state on a graph read from an edge list")
    p.add_argument("--edges", required=True, help="file with one 'i j' pair per line, 0-indexed")
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--nodes", type=int, default=None, help="node count if larger than the largest id + 1")
    p.add_argument("--tol", type=float, default=1e-12)
    common(p)

    p = sub.add_parser("sweep", help="tabulate reports over a parameter range")
    p.add_argument("--model", choices=("complete", "bipartite", "compare"), default="complete")
    p.add_argument("--param", required=True, help="one of n, tau, q, c, h")
    p.add_argument("--start", type=float, required=True)
    p.add_argument("--stop", type=float, required=True)
    p.add_argument("--step", type=float, required=True)
    # fixed values for the parameters not being swept
    game(p, defaults={"n": 15, "c": 0.4, "h": 0.5, "tau": 2 / 3})
    p.add_argument("--jobs", type=int, default=1)
    common(p)
    return parser


_IO_KEYS = ("command", "format", "output")


def _known_fields(command: str) -> set[str]:
    parser = build_parser()
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    return {a.dest for a in sub.choices[command]._actions if a.dest != "help"} - set(_IO_KEYS)


@dataclass(frozen=True)
class RunConfig:
    command: str
    params: dict
    format: str = "json"
    output: str | None = None

    @classmethod
    def from_args(cls, ns: argparse.Namespace) -> "RunConfig":
        d = vars(ns).copy()
        command, fmt, output = d.pop("command"), d.pop("format"), d.pop("output")
        return cls(command, d, fmt, output)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        extra = set(d) - {"command", "params", "format", "output"}
        if extra:
            raise ValidationError(f"unknown config fields: {sorted(extra)}")
        command = d.get("command")
        if command not in COMMANDS:
            raise ValidationError(f"unknown command {command!r}")
        params = dict(d.get("params", {}))
        known = _known_fields(command)
        unknown = set(params) - known
        if unknown:
            raise ValidationError(f"unknown parameters for {command}: {sorted(unknown)}")
        missing = known - set(params)
        if missing:
            raise ValidationError(f"missing parameters for {command}: {sorted(missing)}")
        return cls(command, params, d.get("format", "json"), d.get("output"))

    def to_dict(self) -> dict:
        return {"command": self.command, "params": fmt_num(self.params),
                "format": self.format, "output": self.output}


def execute(config: RunConfig) -> Output:
    return COMMANDS[config.command](config.params)


def render_json(config: RunConfig, out: Output) -> str:
    doc = {"schema_version": SCHEMA_VERSION, "config": config.to_dict(), "result": fmt_num(out.result)}
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def render_csv(out: Output) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(out.columns)
    for row in out.rows:
        w.writerow([_cell(x) for x in row])
    return buf.getvalue()


def load_report(path) -> tuple[RunConfig, dict]:
    """Parse a JSON report back into its configuration and result."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValidationError(f"unsupported schema_version {doc.get('schema_version')!r}")
    return RunConfig.from_dict(doc["config"]), doc["result"]


def _destination(config: RunConfig) -> Path | None:
    if config.output:
        return Path(config.output)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base:
        return Path(base) / f"{config.command}.{config.format}"
    return None


def _fail(kind: str, message: str, code: int) -> int:
    line = json.dumps({"error": kind, "message": " ".join(str(message).split())})
    print(line, file=sys.stderr)
    return code


def main(argv=None) -> int:
    try:
        config = RunConfig.from_args(build_parser().parse_args(argv))
        out = execute(config)
        text = render_json(config, out) if config.format == "json" else render_csv(out)
        dest = _destination(config)
        if dest is None:
            sys.stdout.write(text)
        else:
            dest.parent.mkdir(parents=True, exist_ok=True)
            dest.write_text(text)
    except CliError as exc:
        return _fail(exc.kind, str(exc), exc.code)
    except ValidationError as exc:
        return _fail("validation", str(exc), EXIT_VALIDATION)
    except NonConvergenceError as exc:
        return _fail("nonconvergence", str(exc), EXIT_NONCONVERGENCE)
    except OSError as exc:
        return _fail("io", f"{exc.strerror}: {exc.filename}", EXIT_VALIDATION)
    except Exception as exc:  # noqa: BLE001 - reported, never a traceback
        return _fail("internal", f"{type(exc).__name__}: {exc}", EXIT_INTERNAL)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
