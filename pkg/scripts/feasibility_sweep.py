"""Sweep the trigger radius r and tabulate the jump-aware inter-execution bound."""
import argparse
import sys

import numpy as np

from ettrack.bounds import feasibility_report, min_feasible_r, scenario_constants
from ettrack.scenarios import builtin_scenario


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--rmin", type=float, default=0.004)
    p.add_argument("--rmax", type=float, default=0.05)
    p.add_argument("--points", type=int, default=12)
    args = p.parse_args(argv)
    base = builtin_scenario("case2")
    R0 = float(np.linalg.norm(base.x0 - base.reference.x_d0))
    consts = scenario_constants(base, R0)
    jump = base.reference.jump * float(np.linalg.norm(base.provider.M(R0)))
    print(f"smallest feasible r: {min_feasible_r(base.cert, base.params.sigma, base.cert.mu(R0), jump):.6g}")
    print(f"{'r':>10}{'r1':>10}{'Delta':>10}{'T_lower':>12}")
    for r in np.geomspace(args.rmin, args.rmax, args.points):
        sc = builtin_scenario("case2", r=float(r))
        (rep,) = feasibility_report(sc, constants=consts)
        T = f"{rep.T_lower:.4g}" if rep.feasible else "infeasible"
        print(f"{r:>10.5f}{rep.r1:>10.4f}{rep.delta:>10.4f}{T:>12}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
