"""Run a scenario once and summarise its ledger and fitted lemma constants.

    python scripts/acceptance_run.py --scenario scenarios/acceptance.toml --h 0.01 0.005
"""
import argparse
import time

from kinsplit.config import load_scenario
from kinsplit.diagnostics import fit_lemma_constants
from kinsplit.scheme import run


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--scenario", default="scenarios/acceptance.toml")
    ap.add_argument("--h", type=float, nargs="+", default=None)
    args = ap.parse_args()
    scen = load_scenario(args.scenario)
    problem, l0 = scen.problem(), scen.initial_field()
    for h in args.h or [scen.scheme["h"]]:
        t0 = time.perf_counter()
        traj = run(scen.scheme_config(h=h), l0, problem)
        secs = time.perf_counter() - t0
        led = traj.ledger
        print(f"h={h}: {len(traj.states) - 1} steps in {secs:.2f}s, completed={traj.completed}")
        if traj.abort is not None:
            print(f"  abort: {traj.abort.as_dict()}")
        print(f"  max conservation residual {max(r['conservation_residual'] for r in led):.2e}")
        print(f"  contraction violations {sum(r['contraction_violations'] for r in led)}")
        print(f"  D: {led[0]['D']:.6e} -> {led[-1]['D']:.6e};  X: {led[0]['X']:.4f} -> {led[-1]['X']:.4f}")
        if len(led) >= 6:
            c = fit_lemma_constants(led, h)
            for name in ("C_energy0", "C_energy3", "C_est1", "C_est2", "C_eneqry00", "C_final"):
                print(f"  {name:11s} {getattr(c, name): .3e}")


if __name__ == "__main__":
    main()
