"""Command-line front end: ``kinsplit run|study|oracle --scenario FILE``.

Exit codes: 0 success, 1 configuration error, 2 property-P violation,
3 degenerate weight, 4 solver failure.  On a nonzero exit with a valid
scenario an ``abort.json`` with the machine-readable cause is written.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, Scenario, load_scenario
from .errors import KinsplitError

SCHEMA_DIR = Path(__file__).parent / "schemas"


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to null."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(path: Path, obj):
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


def write_moments_csv(path: Path, U: np.ndarray):
    U = np.asarray(U, float)
    with Path(path).open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["x_index"] + [f"U_{i + 1}" for i in range(U.shape[1])])
        for j, row in enumerate(U):
            wr.writerow([j] + [repr(float(c)) for c in row])


def read_moments_csv(path: Path) -> np.ndarray:
    with Path(path).open() as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if header[0] != "x_index" or any(h != f"U_{i + 1}" for i, h in enumerate(header[1:])):
            raise ValueError(f"bad moment CSV header {header}")
        return np.array([[float(c) for c in r[1:]] for r in rd])


def _abort(out: Path, scen: Scenario | None, err: Exception, command: str) -> int:
    code = getattr(err, "exit_code", 1)
    payload = {"command": command, "exit_code": code, **err.as_dict()}
    name = scen.outputs["abort"] if scen is not None else "abort.json"
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / name, payload)
    print(f"kinsplit {command}: {payload['error']}: {payload['message']}", file=sys.stderr)
    return code


# ----------------------------------------------------------------- commands

def cmd_run(scen: Scenario, out: Path, timings: bool = False) -> int:
    from .closure import moments_from_coeffs
    from .dual_field import write_field_csv
    from .scheme import run

    problem = scen.problem()
    cfg = scen.scheme_config()
    traj = run(cfg, scen.initial_field(), problem)
    o = scen.outputs
    for n, state in enumerate(traj.states):
        if n % o["state_stride"] == 0 or n == len(traj.states) - 1:
            write_field_csv(state, out / o["states"].format(n=n))
    records = [dict(r) for r in traj.ledger]
    if not timings:
        for r in records:
            r.pop("wall_time", None)
    write_json(out / o["ledger"], {
        "scenario": scen.name, "variant": cfg.variant, "h": cfg.h, "T": cfg.T,
        "n_steps": cfg.n_steps, "completed": traj.completed,
        "abort": None if traj.abort is None else traj.abort.as_dict(),
        "records": records})
    last = traj.states[-1]
    write_moments_csv(out / o["moments"], moments_from_coeffs(last.per_point, problem.basis, problem.quad,
                                                              problem.params))
    if traj.abort is not None:
        return _abort(out, scen, traj.abort, "run")
    return 0


def _oracle_field(scen: Scenario):
    from .closure import moments_from_coeffs, solve_moment_pde
    from .dual_field import XGrid

    grid = XGrid(scen.grid.d_x, scen.grid.L, scen.oracle["N"])
    quad = scen.quadrature()
    gam0 = scen.initial_coeffs(grid)
    U0 = moments_from_coeffs(gam0, scen.basis, quad, scen.entropy)
    return solve_moment_pde(U0, grid, scen.oracle["dt"], scen.scheme["T"], scen.basis, quad,
                            scen.entropy, gam0, cfl_max=scen.oracle["cfl"])


def cmd_oracle(scen: Scenario, out: Path) -> int:
    res = _oracle_field(scen)
    write_moments_csv(out / scen.outputs["oracle"], res.U)
    return 0


def cmd_study(scen: Scenario, out: Path, h_list=None, jobs: int = 1, seed: int | None = None) -> int:
    from .diagnostics import convergence_study

    h_list = list(h_list) if h_list else scen.study["h_list"]
    oracle = _oracle_field(scen).U if scen.study["oracle"] else None
    rep = convergence_study(scen.problem(), scen.scheme_config(h=h_list[0], ledger_on=False),
                            scen.initial_field(), h_list, scen.study["cloud_size"],
                            scen.seed if seed is None else seed, oracle=oracle, jobs=jobs)
    write_json(out / scen.outputs["report"], {"scenario": scen.name, **json.loads(rep.to_json())})
    if not rep.complete:
        cause = rep.cause or {}
        code = {"HypothesisViolation": 2, "TailUnbounded": 2, "DegenerateWeight": 3}.get(cause.get("error"), 4)
        print(f"kinsplit study: incomplete: {cause}", file=sys.stderr)
        return code
    return 0


def _h_list(text: str) -> list[float]:
    try:
        vals = [float(s) for s in text.split(",") if s.strip()]
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"--h-list expects comma-separated floats: {err}") from err
    if not vals or any(not 0 < h <= 1 for h in vals):
        raise argparse.ArgumentTypeError("--h-list entries must lie in (0, 1]")
    return vals


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kinsplit", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=("run", "study", "oracle"))
    ap.add_argument("--scenario", required=True, type=Path)
    ap.add_argument("--out", type=Path, default=Path("out"))
    ap.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    ap.add_argument("--seed", type=int, default=None, help="overrides the scenario seed")
    ap.add_argument("--h-list", type=_h_list, default=None)
    ap.add_argument("--timings", action="store_true", help="keep wall times in the ledger")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out: Path = args.out
    scen = None
    try:
        scen = load_scenario(args.scenario)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "run":
            return cmd_run(scen, out, args.timings)
        if args.command == "oracle":
            return cmd_oracle(scen, out)
        return cmd_study(scen, out, args.h_list, max(1, args.jobs), args.seed)
    except ConfigError as err:
        return _abort(out, None, err, args.command)
    except KinsplitError as err:
        return _abort(out, scen, err, args.command)
    except ValueError as err:
        # invalid combinations that only surface when objects are built
        return _abort(out, scen, ConfigError(str(err)), args.command)


if __name__ == "__main__":
    sys.exit(main())
