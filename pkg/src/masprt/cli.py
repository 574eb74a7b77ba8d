"""Command-line entry point.

Every subcommand accepts ``--config file.json``; keys are the long option
names with underscores.  Explicit flags override the file, which overrides
built-in defaults.  The fully resolved configuration is echoed to
``<out-dir>/run.json``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .harness import (
    ExperimentSpec,
    MissingSequenceError,
    calibrate_addf,
    default_eta_grid,
    emit_outputs,
    result_row,
    run_ber_trial,
    sweep_rate,
    sweep_sync,
)
from .optimizer import OptProblem, load_sequence, save_sequence, solve_p1

logger = logging.getLogger("masprt")

COMMON_DEFAULTS = {"out_dir": ".", "workers": 1, "verbose": False}
DEFAULTS = {
    "optimize": {"ts": 0.1, "N": 20, "P": 100.0, "alpha": 1e-3, "beta": 1e-3, "T0": 5, "T1": 5,
                 "mem": 10, "restarts": 4, "seed": 0, "mu_variant": "printed", "out": "seq.json"},
    "simulate": {"scheme": "masprt", "seq": None, "tau": 0.0, "bits": 10_000, "trials": 1,
                 "seed": 0, "mem": 10, "eta": None, "truncation": "log"},
    "sweep-rate": {"rates": [0.5, 1.0, 2.0], "tau": 0.1, "schemes": ["masprt:10", "mlda:10", "addf:10"],
                   "seq": [], "N": 20, "P": 100.0, "bits": 10_000, "trials": 1, "seed": 0},
    "sweep-sync": {"taus": [0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3], "rate": 0.5,
                   "schemes": ["masprt:10", "mlda:10", "addf:10"], "seq": None, "N": 20, "P": 100.0,
                   "bits": 10_000, "trials": 1, "seed": 0},
    "calibrate-addf": {"seq": None, "grid_points": 200, "mem": 10, "bits": 10_000, "packets": 2},
}


def _parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    parser = argparse.ArgumentParser(prog="masprt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, default=S, help="JSON file with option values")
        p.add_argument("--out-dir", type=Path, default=S)
        p.add_argument("--workers", type=int, default=S, help="parallel worker processes")
        p.add_argument("-v", "--verbose", action="store_true", default=S)

    p = sub.add_parser("optimize", help="solve the sequence design problem")
    common(p)
    for name, typ in [("ts", float), ("N", int), ("P", float), ("alpha", float), ("beta", float),
                      ("T0", int), ("T1", int), ("mem", int), ("restarts", int), ("seed", int)]:
        p.add_argument(f"--{name}", type=typ, default=S)
    p.add_argument("--mu-variant", choices=["printed", "derivation"], default=S)
    p.add_argument("--out", default=S, help="output JSON path, relative to --out-dir")

    p = sub.add_parser("simulate", help="BER of one scheme at one operating point")
    common(p)
    p.add_argument("--scheme", choices=["masprt", "mlda", "addf"], default=S)
    p.add_argument("--seq", type=Path, default=S, help="optimised sequence JSON")
    for name, typ in [("tau", float), ("bits", int), ("trials", int), ("seed", int), ("mem", int),
                      ("eta", float)]:
        p.add_argument(f"--{name}", type=typ, default=S)
    p.add_argument("--truncation", choices=["log", "linear"], default=S)

    p = sub.add_parser("sweep-rate", help="BER against bit rate")
    common(p)
    p.add_argument("--rates", type=float, nargs="+", default=S)
    p.add_argument("--tau", type=float, default=S)
    p.add_argument("--schemes", nargs="+", default=S, help="scheme[:mem], e.g. masprt:10")
    p.add_argument("--seq", type=Path, nargs="+", default=S,
                   help="optimised sequence files; without them P1 is solved per rate")
    for name, typ in [("N", int), ("P", float), ("bits", int), ("trials", int), ("seed", int)]:
        p.add_argument(f"--{name}", type=typ, default=S)

    p = sub.add_parser("sweep-sync", help="BER against synchronisation offset")
    common(p)
    p.add_argument("--taus", type=float, nargs="+", default=S)
    p.add_argument("--rate", type=float, default=S)
    p.add_argument("--schemes", nargs="+", default=S)
    p.add_argument("--seq", type=Path, default=S)
    for name, typ in [("N", int), ("P", float), ("bits", int), ("trials", int), ("seed", int)]:
        p.add_argument(f"--{name}", type=typ, default=S)

    p = sub.add_parser("calibrate-addf", help="choose the ADDF threshold at tau = 0")
    common(p)
    p.add_argument("--seq", type=Path, default=S)
    for name, typ in [("grid_points", int), ("mem", int), ("bits", int), ("packets", int)]:
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=typ, default=S)
    return parser


def resolve(argv=None) -> dict:
    """Merge defaults, the optional config file and explicit flags."""
    args = vars(_parser().parse_args(argv))
    command = args.pop("command")
    config = {}
    if "config" in args:
        config = json.loads(Path(args.pop("config")).read_text())
    cfg = {**COMMON_DEFAULTS, **DEFAULTS[command], **config, **args}
    for key, value in list(cfg.items()):
        if isinstance(value, Path):
            cfg[key] = str(value)
        elif isinstance(value, list):
            cfg[key] = [str(v) if isinstance(v, Path) else v for v in value]
    cfg["command"] = command
    return cfg


def _schemes(items):
    out = []
    for item in items:
        name, _, mem = str(item).partition(":")
        out.append((name, int(mem)) if mem else (name, 10))
    return out


def _sequence(path):
    if path is None:
        raise SystemExit("error: --seq is required (create one with `masprt optimize`)")
    return load_sequence(path)


def _cmd_optimize(cfg, out_dir):
    problem = OptProblem(N=cfg["N"], ts=cfg["ts"], P=cfg["P"], alpha=cfg["alpha"], beta=cfg["beta"],
                         T0=cfg["T0"], T1=cfg["T1"], mem_depth=cfg["mem"], mu_variant=cfg["mu_variant"])
    result = solve_p1(problem, restarts=cfg["restarts"], seed=cfg["seed"])
    save_sequence(out_dir / cfg["out"], problem, result)
    print(f"||x1|| = {result.norm:.4f}  objective = {result.objective:.6g}  "
          f"slack0 = {result.slack0:.3g}  slack1 = {result.slack1:.3g}  converged = {result.converged}")
    return {"norm": result.norm, "objective": result.objective, "converged": result.converged}


def _cmd_simulate(cfg, out_dir):
    problem, x1 = _sequence(cfg["seq"])
    spec = ExperimentSpec(x1=x1, scheme=cfg["scheme"], ts=problem.ts, tau=cfg["tau"], bits=cfg["bits"],
                          trials=cfg["trials"], mem_depth=cfg["mem"], seed=cfg["seed"],
                          alpha=problem.alpha, beta=problem.beta, eta=cfg["eta"], truncation=cfg["truncation"])
    res = run_ber_trial(spec)
    rows = [result_row(spec, res)]
    emit_outputs(rows, out_dir / "results.csv")
    print(f"{spec.scheme}: BER = {res.ber:.4g} ({res.errors}/{res.bits})  "
          f"T0 = {res.mean_stop_0:.3f}  T1 = {res.mean_stop_1:.3f}  truncated = {res.truncation_rate:.3f}")
    return rows[0]


def _cmd_sweep_rate(cfg, out_dir):
    sequences = None
    if cfg["seq"]:
        sequences = {}
        for path in cfg["seq"]:
            problem, x1 = load_sequence(path)
            sequences[problem.rate] = x1
    base = ExperimentSpec(x1=np.ones(cfg["N"]), tau=cfg["tau"], bits=cfg["bits"], trials=cfg["trials"],
                          seed=cfg["seed"])
    try:
        rows = sweep_rate(base, cfg["rates"], _schemes(cfg["schemes"]), sequences=sequences, N=cfg["N"],
                          workers=cfg["workers"], P=cfg["P"])
    except MissingSequenceError as exc:
        raise SystemExit(f"error: {exc.args[0]}") from None
    emit_outputs(rows, out_dir / "results.csv", out_dir / "results.svg", x="R_bps")
    return {"rows": len(rows)}


def _cmd_sweep_sync(cfg, out_dir):
    if cfg["seq"]:
        problem, x1 = load_sequence(cfg["seq"])
        ts = problem.ts
    else:
        ts = 1.0 / (cfg["rate"] * cfg["N"])
        x1 = solve_p1(OptProblem(N=cfg["N"], ts=ts, P=cfg["P"])).x1_hat
    base = ExperimentSpec(x1=x1, ts=ts, bits=cfg["bits"], trials=cfg["trials"], seed=cfg["seed"])
    rows = sweep_sync(base, cfg["taus"], _schemes(cfg["schemes"]), workers=cfg["workers"])
    emit_outputs(rows, out_dir / "results.csv", out_dir / "results.svg", x="tau_norm")
    return {"rows": len(rows)}


def _cmd_calibrate(cfg, out_dir):
    problem, x1 = _sequence(cfg["seq"])
    spec = ExperimentSpec(x1=x1, scheme="addf", ts=problem.ts, mem_depth=cfg["mem"])
    grid = default_eta_grid(spec, cfg["grid_points"])
    cal = calibrate_addf(spec, grid, bits=cfg["bits"], packets=cfg["packets"])
    lines = ["eta,ber"] + [f"{e!r},{b!r}" for e, b in zip(cal.grid, cal.ber)]
    (out_dir / "calibration.csv").write_text("\n".join(lines) + "\n")
    print(f"eta = {cal.eta:.6g}  BER = {cal.best_ber:.4g}")
    return {"eta": cal.eta, "ber": cal.best_ber}


COMMANDS = {
    "optimize": _cmd_optimize,
    "simulate": _cmd_simulate,
    "sweep-rate": _cmd_sweep_rate,
    "sweep-sync": _cmd_sweep_sync,
    "calibrate-addf": _cmd_calibrate,
}


def main(argv=None) -> int:
    cfg = resolve(argv)
    logging.basicConfig(level=logging.INFO if cfg["verbose"] else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "run.json").write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")
    COMMANDS[cfg["command"]](cfg, out_dir)
    return 0


if __name__ == "__main__":
    sys.exit(main())
