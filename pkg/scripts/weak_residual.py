"""Weak-form residual of the interpolated solution for seeded test functions.

    python scripts/weak_residual.py --h 0.02 0.01 0.005 0.0025
"""
import argparse

import numpy as np

from kinsplit.closure import seeded_test_functions, weak_residual
from kinsplit.config import load_scenario
from kinsplit.scheme import run


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--scenario", default="scenarios/acceptance.toml")
    ap.add_argument("--h", type=float, nargs="+", default=[0.02, 0.01, 0.005, 0.0025])
    ap.add_argument("--count", type=int, default=6)
    ap.add_argument("--nodes", type=int, default=8, help="Gauss nodes per half step")
    args = ap.parse_args()
    scen = load_scenario(args.scenario)
    problem, l0 = scen.problem(), scen.initial_field()
    tfs = seeded_test_functions(args.count, scen.scheme["T"], scen.grid.L, scen.seed)
    prev = None
    for h in args.h:
        traj = run(scen.scheme_config(h=h, ledger_on=False), l0, problem)
        r = weak_residual(traj, tfs, args.nodes)
        per = np.linalg.norm(r, axis=1)
        tot = np.linalg.norm(r)
        ratio = f"  ratio {tot / prev:.3f}" if prev else ""
        print(f"h={h:<7} |R|={tot:.3e}{ratio}  per test function {np.array2string(per, precision=2)}")
        prev = tot


if __name__ == "__main__":
    main()
