"""Update frequency with the shrinking Lipschitz ledger versus L held at its initial value."""
import argparse
import json
import sys

from ettrack.cli import compare
from ettrack.scenarios import REPORTED_VALUES, builtin_scenario


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--scenario", choices=["case1", "case2"], default="case1")
    p.add_argument("--json", action="store_true", help="print the raw comparison")
    args = p.parse_args(argv)
    res = compare(builtin_scenario(args.scenario))
    if args.json:
        print(json.dumps(res, indent=2))
        return 0
    ref = REPORTED_VALUES[args.scenario]
    v, f = res["varying"], res["frozen"]
    print(f"{'':<26}{'ledger':>10}{'frozen':>10}")
    for key in ("total_updates", "avg_freq_total", "avg_freq_transient", "ultimate_bound_observed"):
        print(f"{key:<26}{v[key]:>10.4g}{f[key]:>10.4g}")
    print(f"ratio (total) {res['ratio_total']:.3g}, (transient) {res['ratio_transient']:.3g}")
    if "frozen_avg_freq_total" in ref:
        print(f"reported: {ref['avg_freq_total']:g} vs {ref['frozen_avg_freq_total']:g} Hz")
    return 0


if __name__ == "__main__":
    sys.exit(main())
