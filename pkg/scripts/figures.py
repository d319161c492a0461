"""Regenerate the standard figures (cheese sets, isoenergetic curves, wave fields) via the CLI."""
import argparse
import sys

from qpmomentum.cli import main


def run(argv):
    code = main(argv)
    if code not in (0, 5):
        sys.exit(code)


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", help="experiment JSON (default: shipped sample)")
    ap.add_argument("--out", default="figures")
    ap.add_argument("--levels", type=int, default=2)
    args = ap.parse_args()
    common = ["--out", args.out] + (["--config", args.config] if args.config else [])
    run(["cheese", "--level", str(args.levels)] + common)
    run(["isocurve", "--level", "1"] + common)
    run(["wave", "--level", str(args.levels)] + common)
    run(["diophantine", "--max-box", "4"] + common)
