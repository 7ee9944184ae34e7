"""Cauchy-in-h convergence study with the finite-volume moment reference.

    python scripts/convergence_study.py --scenario scenarios/acceptance.toml --jobs 4
"""
import argparse
import time

from kinsplit.cli import _oracle_field
from kinsplit.config import load_scenario
from kinsplit.diagnostics import convergence_study


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--scenario", default="scenarios/acceptance.toml")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--h-list", type=float, nargs="+", default=None)
    args = ap.parse_args()
    scen = load_scenario(args.scenario)
    h_list = args.h_list or scen.study["h_list"]
    t0 = time.perf_counter()
    ref = _oracle_field(scen)
    print(f"reference: {ref.steps} finite-volume steps on N={ref.grid.N} in {time.perf_counter() - t0:.1f}s")
    t0 = time.perf_counter()
    rep = convergence_study(scen.problem(), scen.scheme_config(h=h_list[0], ledger_on=False),
                            scen.initial_field(), h_list, scen.study["cloud_size"], scen.seed,
                            oracle=ref.U, jobs=args.jobs)
    print(f"study: {time.perf_counter() - t0:.1f}s, complete={rep.complete}")
    print(f"{'h':>8} {'e(h)':>10} {'rate':>7}   relative L1 vs reference per moment")
    for i, h in enumerate(rep.h):
        e = f"{rep.distances[i]:.3e}" if i < len(rep.distances) else ""
        r = f"{rep.rates[i - 1]:.3f}" if 0 < i <= len(rep.rates) else ""
        errs = " ".join(f"{x:.3e}" for x in rep.oracle_errors[i]) if rep.oracle_errors else ""
        print(f"{h:8.4f} {e:>10} {r:>7}   {errs}")


if __name__ == "__main__":
    main()
