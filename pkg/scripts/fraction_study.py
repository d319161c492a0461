"""Non-resonant fraction of momenta in growing disks, through the CLI fraction command."""
import argparse
import json
import sys
import tempfile
from pathlib import Path

from qpmomentum import config
from qpmomentum.cli import main

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--radii", type=float, nargs="+", default=[4.0, 8.0, 16.0, 32.0])
    ap.add_argument("--samples", type=int, default=2000)
    ap.add_argument("--level", type=int, default=1)
    ap.add_argument("--annulus", action="store_true", help="sample R/2 < |k| < R instead of the disk")
    ap.add_argument("--out", default="fraction_study")
    args = ap.parse_args()
    data = json.loads(config.sample_config_text())
    data["fraction"] = {"radii": args.radii, "samples": args.samples, "level": args.level,
                        "annulus": args.annulus}
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "fraction.json"
        path.write_text(json.dumps(data))
        sys.exit(main(["fraction", "--config", str(path), "--out", args.out]))
