"""Simulate the quantized-reference benchmark and compare with the reported numbers."""
import argparse
import sys
from pathlib import Path

from ettrack.cli import main as cli_main


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default="out/case2")
    p.add_argument("--horizon", type=float)
    args = p.parse_args(argv)
    cfg = Path(__file__).resolve().parents[1] / "scenarios" / "case2.cfg"
    argv = ["run", str(cfg), "--out", args.out]
    if args.horizon:
        argv += ["--horizon", str(args.horizon)]
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
