"""Command-line front end.

Subcommands: simulate, spectrum, bound, nadir, optimize, compare. CSV floats
are written with 17 significant digits. Exit codes: 1 for parse/validation
errors, 2 for an infeasible start, 3 for numerical failures; the error is
also reported as JSON on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import MajorantProfile, majorant1, majorant2_all
from .nadir import nadir_F
from .netmodel import NetworkError, NetworkModel, load_network
from .optimizer import InfeasibleStartError, TuningConfig, minimize_nadir
from .spectral import DefectiveMatrixError
from .trajectory import analyze, integrate_reference, omega_at

log = logging.getLogger("freqnadir")

COMPARE_COLUMNS = ["row", "F_r0", "F_rF", "F_rG", "G_rG", "evals_F", "evals_G"]
TIMING_COLUMNS = ["time_F", "time_G"]


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def _gains(model: NetworkModel, text: str | None) -> np.ndarray:
    if text is None:
        return model.default_gains()
    r = np.array([float(v) for v in text.split(",")])
    if r.shape != (model.n,):
        raise NetworkError(f"--r has {r.size} entries, expected {model.n}")
    return r


def _config(args, objective: str = "G") -> TuningConfig:
    return TuningConfig(
        objective=objective,
        xi=args.xi,
        horizon=args.t1,
        eps=args.eps,
        budget=args.budget,
        oscillation_aggregate=args.aggregate,
    )


class Outputs:
    """Collects emitted artifacts so the run manifest can list them."""

    def __init__(self):
        self.artifacts: list[str] = []

    def write(self, text: str, path: str | None) -> None:
        if path is None or path == "-":
            sys.stdout.write(text)
            return
        Path(path).write_text(text, encoding="utf-8")
        self.artifacts.append(str(path))


def _csv(rows, header) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    return buf.getvalue()


def _time_grid(args) -> np.ndarray:
    return np.linspace(0.0, args.t1, args.samples)


def cmd_simulate(args, out: Outputs):
    model = load_network(args.network)
    an = analyze(model, _gains(model, args.r), args.t1)
    t = _time_grid(args)
    analytic = omega_at(an.trajectory, t)
    rows = [[ti, *analytic[:, k], "analytic"] for k, ti in enumerate(t)]
    if not args.no_rk4:
        states = integrate_reference(an.system, t)
        rows += [[ti, *states[k, : model.n], "rk4"] for k, ti in enumerate(t)]
    header = ["t", *(f"omega_{l + 1}" for l in range(model.n)), "source"]
    out.write(_csv(rows, header), args.out)


def cmd_spectrum(args, out: Outputs):
    model = load_network(args.network)
    an = analyze(model, _gains(model, args.r), args.t1)
    spec = an.spectrum
    zero = np.abs(spec.eigenvalues) <= spec.zero_threshold
    rows = [[lam.real, lam.imag, int(z)] for lam, z in zip(spec.eigenvalues, zero)]
    out.write(_csv(rows, ["re", "im", "is_zero_mode"]), args.out)


def cmd_bound(args, out: Outputs):
    model = load_network(args.network)
    an = analyze(model, _gains(model, args.r), args.t1)
    profile = MajorantProfile.from_trajectory(an.trajectory)
    t = _time_grid(args)
    w = np.abs(omega_at(an.trajectory, t))
    m1 = majorant1(profile, t)
    m2 = majorant2_all(profile, t)
    m = np.minimum(m1, m2)
    rows = [[ti, l + 1, w[l, k], m1[l, k], m2[l, k], m[l, k]] for k, ti in enumerate(t) for l in range(model.n)]
    out.write(_csv(rows, ["t", "bus", "abs_omega", "m1", "m2", "m"]), args.out)


def cmd_nadir(args, out: Outputs):
    model = load_network(args.network)
    r = _gains(model, args.r)
    result = nadir_F(model, r, eps=args.eps, horizon=args.t1)
    doc = {
        "F": result.value,
        "per_bus": list(result.per_bus),
        "argmax_t": list(result.times),
        "nodes": list(result.nodes),
        "converged": result.converged,
        "r": r.tolist(),
        "eps": args.eps,
        "t1": args.t1,
    }
    out.write(json.dumps(doc, indent=2) + "\n", args.out)


def _tune(model: NetworkModel, config: TuningConfig, r0: np.ndarray) -> dict:
    result = minimize_nadir(model, config, r0)
    f0 = nadir_F(model, r0, eps=config.eps, horizon=config.horizon).value
    f_star = (
        result.best_value
        if config.objective == "F"
        else nadir_F(model, result.r_best, eps=config.eps, horizon=config.horizon).value
    )
    return {
        "objective": config.objective,
        "r0": r0.tolist(),
        "r_star": result.r_best.tolist(),
        "objective_value": result.best_value,
        "F_r0": f0,
        "F_r_star": f_star,
        "evaluations": result.evaluations,
        "budget_exhausted": result.budget_exhausted,
        "wall_time": result.wall_time,
        "stability_margin": result.diagnostics.margin,
        "oscillation_ratio": result.diagnostics.ratio,
    }


def cmd_optimize(args, out: Outputs):
    model = load_network(args.network)
    r0 = _gains(model, args.r)
    doc = _tune(model, _config(args, args.objective), r0)
    out.write(json.dumps(doc, indent=2) + "\n", args.out)


def read_disturbances(path, n: int) -> np.ndarray:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            cells = [c.strip() for c in row if c.strip()]
            if not cells or cells[0].startswith("#"):
                continue
            try:
                values = [float(c) for c in cells]
            except ValueError:
                if not rows and lineno == 1:
                    continue  # header
                raise NetworkError(f"{path}: line {lineno}: non-numeric disturbance entry")
            if len(values) != n:
                raise NetworkError(f"{path}: line {lineno}: expected {n} columns, got {len(values)}")
            rows.append(values)
    if not rows:
        raise NetworkError(f"{path}: no disturbance rows")
    return np.array(rows)


def generate_disturbances(n: int, count: int, low: float, high: float, seed: int) -> np.ndarray:
    """Step load increases: every entry is ``-U(low, high)``."""
    rng = np.random.default_rng(seed)
    return -rng.uniform(low, high, size=(count, n))


def _compare_row(payload):
    model, config, r0, pd = payload
    m = model.with_disturbance(pd)
    res_f = _tune(m, config.with_objective("F"), r0)
    res_g = _tune(m, config.with_objective("G"), r0)
    return {
        "F_r0": res_f["F_r0"],
        "F_rF": res_f["F_r_star"],
        "F_rG": res_g["F_r_star"],
        "G_rG": res_g["objective_value"],
        "evals_F": res_f["evaluations"],
        "evals_G": res_g["evaluations"],
        "time_F": res_f["wall_time"],
        "time_G": res_g["wall_time"],
    }


def cmd_compare(args, out: Outputs):
    model = load_network(args.network)
    r0 = _gains(model, args.r)
    if args.disturbances:
        batch = read_disturbances(args.disturbances, model.n)
    else:
        low, high = (float(v) for v in args.magnitude.split(","))
        batch = generate_disturbances(model.n, args.generate, low, high, args.seed)
        if args.write_disturbances:
            text = _csv(batch.tolist(), [f"pd_{l + 1}" for l in range(model.n)])
            out.write(text, args.write_disturbances)
    config = _config(args)
    payloads = [(model, config, r0, pd) for pd in batch]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_compare_row, payloads))
    else:
        results = [_compare_row(p) for p in payloads]

    header = COMPARE_COLUMNS + TIMING_COLUMNS
    rows = [[str(i + 1)] + [res[c] for c in header[1:]] for i, res in enumerate(results)]
    means = ["mean"] + [float(np.mean([res[c] for res in results])) for c in header[1:]]
    out.write(_csv(rows + [means], header), args.out)


COMMANDS = {
    "simulate": cmd_simulate,
    "spectrum": cmd_spectrum,
    "bound": cmd_bound,
    "nadir": cmd_nadir,
    "optimize": cmd_optimize,
    "compare": cmd_compare,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="freqnadir", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, samples=False, tuning=False):
        p.add_argument("network", help="network file (.net text or .json)")
        p.add_argument("--r", help="comma-separated droop gains (default: gains in the file)")
        p.add_argument("--t1", type=float, default=100.0, help="horizon in seconds")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--manifest", help="write a JSON run manifest here")
        p.add_argument("-v", "--verbose", action="store_true")
        if samples:
            p.add_argument("--samples", type=int, default=1001, help="time samples on [0, t1]")
        if tuning:
            p.add_argument("--xi", type=float, default=0.01, help="oscillation-decay threshold")
            p.add_argument("--budget", type=int, default=5000, help="objective evaluation budget")
            p.add_argument("--aggregate", choices=("min", "max"), default="min")
            p.add_argument("--seedless", action="store_true", help="no-op: the search uses no randomness")
        return p

    p = common(sub.add_parser("simulate", help="analytic and RK4 frequency trajectories"), samples=True)
    p.add_argument("--no-rk4", action="store_true", help="skip the RK4 reference rows")
    common(sub.add_parser("spectrum", help="eigenvalues of A(r)"))
    common(sub.add_parser("bound", help="|omega| with majorants m1, m2, m"), samples=True)
    p = common(sub.add_parser("nadir", help="exact nadir F(r) by branch and bound"))
    p.add_argument("--eps", type=float, default=1e-4)
    p = common(sub.add_parser("optimize", help="tune droop gains"), tuning=True)
    p.add_argument("--objective", choices=("F", "G"), default="G")
    p.add_argument("--eps", type=float, default=1e-4)
    p = common(sub.add_parser("compare", help="F- and G-tuning over a batch of disturbances"), tuning=True)
    p.add_argument("--eps", type=float, default=1e-4)
    p.add_argument("--disturbances", help="CSV with one disturbance vector per row")
    p.add_argument("--generate", type=int, default=10, help="number of generated disturbance vectors")
    p.add_argument("--magnitude", default="0.5,1.5", help="uniform magnitude range lo,hi for generation")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--write-disturbances", help="save generated disturbances to this CSV")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for the batch")
    return parser


def _error(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code}) + "\n")
    return code


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    out = Outputs()
    try:
        COMMANDS[args.command](args, out)
    except InfeasibleStartError as exc:
        return _error("infeasible_start", str(exc), 2)
    except (NetworkError, OSError) as exc:
        return _error(type(exc).__name__, str(exc), 1)
    except (DefectiveMatrixError, ArithmeticError) as exc:
        return _error("numerical_failure", str(exc), 3)
    except ValueError as exc:
        return _error("invalid_input", str(exc), 1)
    if args.manifest:
        resolved = {k: v for k, v in vars(args).items() if k not in ("manifest", "verbose")}
        manifest = {
            "tool": "freqnadir",
            "version": __version__,
            "subcommand": args.command,
            "input": args.network,
            "config": resolved,
            "artifacts": out.artifacts,
        }
        if args.command in ("optimize", "compare"):
            manifest["tuning"] = asdict(_config(args, getattr(args, "objective", "G")))
        Path(args.manifest).write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return 0


def main() -> None:
    sys.exit(run())
