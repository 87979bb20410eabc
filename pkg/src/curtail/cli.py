"""Command-line surface binding all modules.

Subcommands: design, oc, monitor (init/observe/status), estimate, simulate,
repro.  Every subcommand is deterministic given its flags (plus seed where
applicable).  Numeric JSON output is full double precision; the table view
rounds for humans.

Exit codes (scriptability contract):
    0   success (including monitor Continue / NotRejectH0)
    2   invalid flags or config
    3   degenerate design
    4   event-log format or sequence violation
    5   observe on an already-terminal trial
    6   estimate on a non-terminal trial
    7   reproduction cell outside tolerance
    10  monitor decision RejectH0 (the "stop the campaign" signal)
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from types import SimpleNamespace
from typing import Optional, Sequence

import numpy as np

from .characteristics import OC_CSV_HEADER, oc_curve
from .design import (
    DegenerateDesignError,
    DesignParams,
    LocalDesignParams,
    NoSolutionError,
    TestDesign,
    design_approx,
    design_exact,
    design_local,
)
from .estimation import (
    NotTerminalError,
    confidence_interval,
    estimator_moments,
    point_estimate,
)
from .monitor import (
    EventLogError,
    MonitorError,
    TerminalStateError,
    Decision,
    decision,
    monitor_new,
    observe,
    persist,
    read_event_log,
    restore,
)
from .repro import DEFAULT_REPS, DEFAULT_SEED, TARGETS, run_target
from .simulation import SimConfig, simulate

__all__ = ["main"]

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DEGENERATE = 3
EXIT_LOG_FORMAT = 4
EXIT_TERMINAL_REUSE = 5
EXIT_NOT_TERMINAL = 6
EXIT_REPRO_FAIL = 7
EXIT_REJECT = 10

_REQUIRED = object()


class _CliExit(Exception):
    def __init__(self, code: int, message: str = ""):
        super().__init__(message)
        self.code = code
        self.message = message


def _fail(code: int, message: str) -> "_CliExit":
    return _CliExit(code, message)


# ---------------------------------------------------------------- plumbing

def _merge_config(
    parser: argparse.ArgumentParser, args: argparse.Namespace, defaults: dict
) -> SimpleNamespace:
    """Layer hard defaults < --config document < explicit flags.

    The parser suppresses unset attributes, so vars(args) holds exactly the
    explicitly provided flags.  Unknown config keys are rejected.
    """
    explicit = {k: v for k, v in vars(args).items() if k not in ("config", "func")}
    cfg = {}
    if getattr(args, "config", None):
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            parser.error(f"cannot read config: {exc}")
        if not isinstance(cfg, dict):
            parser.error("config must be a JSON object")
        unknown = set(cfg) - set(defaults)
        if unknown:
            parser.error(f"unknown config keys: {sorted(unknown)}")
    merged = dict(defaults)
    merged.update(cfg)
    merged.update(explicit)
    missing = [k for k, v in merged.items() if v is _REQUIRED]
    if missing:
        parser.error(f"missing required parameters: {sorted(missing)}")
    return SimpleNamespace(**merged)


def _add_design_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, help="type I error level")
    p.add_argument("--beta", type=float, help="type II error level")
    p.add_argument("--theta0", type=float, help="acceptable side-effect rate")
    p.add_argument("--theta1", type=float, help="elevated rate (alternative)")
    p.add_argument("--delta", type=float, help="local alternative: theta1 = theta0 (1+delta)")
    p.add_argument("--exact", action="store_true", help="exact search instead of normal approximation")


_DESIGN_DEFAULTS = {
    "alpha": _REQUIRED,
    "beta": _REQUIRED,
    "theta0": _REQUIRED,
    "theta1": None,
    "delta": None,
    "exact": False,
}


def _design_from_opts(parser: argparse.ArgumentParser, o: SimpleNamespace) -> TestDesign:
    if (o.theta1 is None) == (o.delta is None):
        parser.error("exactly one of --theta1 / --delta is required")
    try:
        if o.delta is not None:
            local = LocalDesignParams(o.alpha, o.beta, o.theta0, o.delta)
            if o.exact:
                return design_exact(local.widen())
            return design_local(local)
        params = DesignParams(o.alpha, o.beta, o.theta0, o.theta1)
        if o.exact:
            return design_exact(params)
        return design_approx(params)
    except DegenerateDesignError as exc:
        raise _fail(EXIT_DEGENERATE, f"degenerate design: {exc}")
    except ValueError as exc:
        parser.error(str(exc))
        raise AssertionError("unreachable")


def _design_table(design: TestDesign) -> str:
    rows = [
        ("N*", str(design.n_star)),
        ("k*", str(design.k_star)),
        ("attained alpha", f"{design.attained_alpha:.6f}"),
        ("attained beta", f"{design.attained_beta:.6f}"),
        ("mode", design.mode),
    ]
    width = max(len(r[0]) for r in rows)
    return "\n".join(f"{name:<{width}}  {val}" for name, val in rows)


def _parse_grid(parser: argparse.ArgumentParser, o: SimpleNamespace) -> list[float]:
    thetas: list[float] = []
    if o.thetas:
        try:
            thetas.extend(float(t) for t in str(o.thetas).split(","))
        except ValueError:
            parser.error(f"cannot parse --thetas {o.thetas!r}")
    if o.grid:
        try:
            start, stop, count = str(o.grid).split(":")
            thetas.extend(np.linspace(float(start), float(stop), int(count)).tolist())
        except ValueError:
            parser.error(f"--grid must be start:stop:count, got {o.grid!r}")
    if not thetas:
        parser.error("a theta grid is required (--thetas and/or --grid)")
    if any(not (0.0 < t < 1.0) for t in thetas):
        parser.error("grid values must lie strictly inside (0, 1)")
    return thetas


# ------------------------------------------------------------- subcommands

def _cmd_design(parser, args) -> int:
    o = _merge_config(parser, args, {**_DESIGN_DEFAULTS, "format": "json"})
    design = _design_from_opts(parser, o)
    if o.format == "json":
        print(json.dumps(design.to_dict(), sort_keys=True))
    else:
        print(_design_table(design))
    return EXIT_OK


def _cmd_oc(parser, args) -> int:
    defaults = {
        **_DESIGN_DEFAULTS,
        "thetas": None,
        "grid": None,
        "moments": False,
        "identity": "tail_shifted",
        "out": None,
    }
    o = _merge_config(parser, args, defaults)
    design = _design_from_opts(parser, o)
    thetas = _parse_grid(parser, o)
    rows = oc_curve(design, thetas)
    header = list(OC_CSV_HEADER)
    if o.moments:
        header += ["est_mean", "est_var"]
    lines = [",".join(header)]
    for oc in rows:
        vals = [
            repr(oc.theta),
            repr(oc.power),
            repr(oc.asn),
            repr(oc.sd),
            repr(oc.cv),
            repr((design.n_star - oc.asn) / design.n_star),
        ]
        if o.moments:
            mom = estimator_moments(design, oc.theta, identity=o.identity)
            vals += [repr(mom.mean), repr(mom.variance)]
        lines.append(",".join(vals))
    text = "\n".join(lines) + "\n"
    if o.out:
        Path(o.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_monitor(parser, args) -> int:
    defaults = {
        **{k: (None if v is _REQUIRED else v) for k, v in _DESIGN_DEFAULTS.items()},
        "action": _REQUIRED,
        "snapshot": _REQUIRED,
        "events": None,
    }
    o = _merge_config(parser, args, defaults)
    path = Path(o.snapshot)
    if o.action == "init":
        missing = [k for k in ("alpha", "beta", "theta0") if getattr(o, k) is None]
        if missing:
            parser.error(f"monitor init requires {missing}")
        design = _design_from_opts(parser, o)
        path.write_bytes(persist(monitor_new(design)))
        print(Decision.CONTINUE.value)
        return EXIT_OK
    try:
        state = restore(path.read_bytes())
    except OSError as exc:
        parser.error(f"cannot read snapshot: {exc}")
    except MonitorError as exc:
        raise _fail(EXIT_LOG_FORMAT, f"bad snapshot: {exc}")
    if o.action == "status":
        body = json.loads(persist(state))
        body["decision"] = decision(state).value
        print(json.dumps(body, sort_keys=True))
        return EXIT_OK
    # action == "observe"
    if o.events is None:
        parser.error("monitor observe requires --events")
    try:
        batch = list(read_event_log(Path(o.events).read_text().splitlines()))
        result = observe(state, batch)
    except OSError as exc:
        parser.error(f"cannot read event log: {exc}")
    except TerminalStateError as exc:
        raise _fail(EXIT_TERMINAL_REUSE, str(exc))
    except EventLogError as exc:
        raise _fail(EXIT_LOG_FORMAT, str(exc))
    except MonitorError as exc:
        # sequence gaps / duplicates are stream-integrity violations
        raise _fail(EXIT_LOG_FORMAT, str(exc))
    path.write_bytes(persist(result.state))
    verdict = decision(result.state)
    print(verdict.value)
    return EXIT_REJECT if verdict is Decision.REJECT_H0 else EXIT_OK


def _cmd_estimate(parser, args) -> int:
    defaults = {"snapshot": _REQUIRED, "gamma": 0.05, "format": "json"}
    o = _merge_config(parser, args, defaults)
    try:
        state = restore(Path(o.snapshot).read_bytes())
    except OSError as exc:
        parser.error(f"cannot read snapshot: {exc}")
    except MonitorError as exc:
        raise _fail(EXIT_LOG_FORMAT, f"bad snapshot: {exc}")
    try:
        est = point_estimate(state)
    except NotTerminalError as exc:
        raise _fail(EXIT_NOT_TERMINAL, str(exc))
    est = confidence_interval(est.theta_hat, est.m_star, o.gamma)
    body = {
        "theta_hat": est.theta_hat,
        "m_star": est.m_star,
        "ci_level": est.ci_level,
        "ci_lower": est.ci_lower,
        "ci_upper": est.ci_upper,
        "degenerate": est.degenerate,
        "decision": decision(state).value,
    }
    if o.format == "json":
        print(json.dumps(body, sort_keys=True))
    else:
        width = max(len(k) for k in body)
        print("\n".join(f"{k:<{width}}  {v}" for k, v in body.items()))
    return EXIT_OK


def _cmd_simulate(parser, args) -> int:
    defaults = {
        **_DESIGN_DEFAULTS,
        "theta": _REQUIRED,
        "reps": DEFAULT_REPS,
        "seed": DEFAULT_SEED,
        "gamma": 0.05,
        "format": "json",
    }
    o = _merge_config(parser, args, defaults)
    design = _design_from_opts(parser, o)
    try:
        config = SimConfig(design, o.theta, int(o.reps), int(o.seed), o.gamma)
    except ValueError as exc:
        parser.error(str(exc))
    report = simulate(config)
    print(report.to_json() if o.format == "json" else report.to_text())
    return EXIT_OK


def _cmd_repro(parser, args) -> int:
    defaults = {
        "target": _REQUIRED,
        "outdir": "repro_out",
        "seed": DEFAULT_SEED,
        "reps": DEFAULT_REPS,
    }
    o = _merge_config(parser, args, defaults)
    if o.target not in TARGETS:
        parser.error(f"--target must be one of {', '.join(TARGETS)}")
    cells = run_target(
        o.target,
        outdir=Path(o.outdir),
        seed=int(o.seed),
        reps=int(o.reps),
        progress=lambda msg: print(msg, file=sys.stderr),
    )
    for cell in cells:
        print(cell.line())
    failed = sum(not c.passed for c in cells)
    print(f"{len(cells) - failed}/{len(cells)} cells passed")
    return EXIT_REPRO_FAIL if failed else EXIT_OK


# -------------------------------------------------------------------- main

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="curtail",
        description="Optimal curtailed sequential test for elevated side-effect rates",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def new(name: str, **kw) -> argparse.ArgumentParser:
        p = sub.add_parser(name, argument_default=argparse.SUPPRESS, **kw)
        p.add_argument("--config", help="JSON document supplying any of the flags")
        return p

    p = new("design", help="compute the optimal (N*, k*)")
    _add_design_opts(p)
    p.add_argument("--format", choices=("json", "table"))
    p.set_defaults(func=_cmd_design)

    p = new("oc", help="operating-characteristic sweep as CSV")
    _add_design_opts(p)
    p.add_argument("--thetas", help="comma-separated theta values")
    p.add_argument("--grid", help="start:stop:count linear grid")
    p.add_argument("--moments", action="store_true", help="append estimator moment columns")
    p.add_argument("--identity", choices=("exact", "tail_shifted"))
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=_cmd_oc)

    p = new("monitor", help="run the sequential trial over event logs")
    p.add_argument("action", choices=("init", "observe", "status"))
    _add_design_opts(p)
    p.add_argument("--snapshot", help="snapshot file path")
    p.add_argument("--events", help="event-log JSONL path (observe)")
    p.set_defaults(func=_cmd_monitor)

    p = new("estimate", help="post-test estimate from a terminal snapshot")
    p.add_argument("--snapshot", help="snapshot file path")
    p.add_argument("--gamma", type=float, help="CI error level (default 0.05)")
    p.add_argument("--format", choices=("json", "table"))
    p.set_defaults(func=_cmd_estimate)

    p = new("simulate", help="Monte Carlo verification run")
    _add_design_opts(p)
    p.add_argument("--theta", type=float, help="true side-effect probability")
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--format", choices=("json", "table"))
    p.set_defaults(func=_cmd_simulate)

    p = new("repro", help="reproduce published tables, figures and the worked example")
    p.add_argument("--target", choices=TARGETS)
    p.add_argument("--outdir")
    p.add_argument("--seed", type=int)
    p.add_argument("--reps", type=int)
    p.set_defaults(func=_cmd_repro)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(parser, args)
    except _CliExit as exc:
        if exc.message:
            print(f"error: {exc.message}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
