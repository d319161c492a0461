"""Command-line driver: ``qpm SUBCOMMAND --config PATH --out DIR ...``.

Exit codes: 0 ok, 2 parse error, 3 semantic violation, 4 solver/runtime
failure, 5 resonant input where that is fatal. Thread count comes from
QPM_THREADS; outputs do not depend on it.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, config as cfgmod, svg
from .isoenergetic import carve_levels, trace_curve
from .quasilattice import SchemaError, TruncationTooLarge, diophantine_report
from .resonance import ScanTooLarge, fraction_csv, hole_statistics, nonresonant_fraction
from .spectral import Resonant, ResonantAtLevel, SolverError, branch, run_multiscale
from .synthesis import field_csv, grid_render

EXIT_OK, EXIT_PARSE, EXIT_SEMANTIC, EXIT_RUNTIME, EXIT_RESONANT = 0, 2, 3, 4, 5


class Run:
    """Collects output files and writes the manifest."""

    def __init__(self, command: str, cfg: cfgmod.ExperimentConfig, out: Path):
        self.command, self.cfg, self.out = command, cfg, out
        self.files: list[str] = []
        self.t0 = time.perf_counter()
        out.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, text: str) -> None:
        (self.out / name).write_text(text)
        self.files.append(name)

    def finish(self) -> None:
        manifest = {
            "command": self.command,
            "config_hash": self.cfg.config_hash(),
            "version": __version__,
            "outputs": sorted(self.files),
            "wall_clock_s": round(time.perf_counter() - self.t0, 3),
        }
        (self.out / f"manifest_{self.command}.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _pair(text: str) -> tuple[float, float]:
    try:
        a, b = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected F,F, got {text!r}") from None
    return a, b


def _k_list(args, cfg) -> list[tuple[float, float]]:
    if args.k is not None:
        return [args.k]
    if not cfg.k_points:
        raise cfgmod.ConfigInvalid(["no k given: pass --k or list k in the config"])
    return list(cfg.k_points)


def _lambdas(args, cfg) -> list[float]:
    lams = [args.lam] if args.lam is not None else list(cfg.lambdas)
    if not lams:
        raise cfgmod.ConfigInvalid(["no lambda given: pass --lambda or list lambdas in the config"])
    for lam in lams:
        if not lam >= cfg.lambda_floor:
            raise cfgmod.ConfigInvalid([f"lambda={lam} below lambda_floor={cfg.lambda_floor}"])
    return lams


def _tag(x: float) -> str:
    return repr(float(x)).replace(".", "p").replace("-", "m")


def cmd_validate(args, cfg, run) -> int:
    print("ok")
    return EXIT_OK


def cmd_converge(args, cfg, run) -> int:
    N = args.level or cfg.levels
    status = EXIT_OK
    for i, k in enumerate(_k_list(args, cfg)):
        rep = run_multiscale(cfg.potential, k, N, cfg.schedule, cfg.continuation)
        if isinstance(rep, ResonantAtLevel):
            print(f"k=({k[0]!r},{k[1]!r}) {rep.witness}")
            run.write(f"converge_{i}.csv", rep.partial.to_csv())
            status = EXIT_RESONANT
            continue
        run.write(f"converge_{i}.csv", rep.to_csv())
        fits = ", ".join(f"{key}={val:.4g}" for key, val in rep.fits.items())
        print(f"k=({k[0]!r},{k[1]!r}) lambda={rep.rows[-1].lam!r} {fits}")
    return status


def cmd_cheese(args, cfg, run) -> int:
    N = args.level or cfg.levels
    for lam in _lambdas(args, cfg):
        sets = carve_levels(cfg.potential, lam, N, cfg.schedule, cfg.thresholds, cfg.phi_resolution,
                            cfg.continuation, cfg.eta)
        texts = []
        for n, s in enumerate(sets, start=1):
            texts.append(s.to_csv())
            run.write(f"cheese_{_tag(lam)}_L{n}.csv", texts[-1])
            run.write(f"holes_{_tag(lam)}_L{n}.csv", s.holes_csv())
            st = hole_statistics(s)
            print(f"lambda={lam!r} level={n} holes={st.count} removed={st.removed!r}"
                  + ("  (empty)" if not s.arcs else ""))
        run.write(f"cheese_{_tag(lam)}.svg", svg.angle_sets(texts))
    return EXIT_OK


def cmd_isocurve(args, cfg, run) -> int:
    N = args.level or 1
    rows = []
    for lam in _lambdas(args, cfg):
        sets = carve_levels(cfg.potential, lam, N, cfg.schedule, cfg.thresholds, cfg.phi_resolution,
                            cfg.continuation, cfg.eta)
        if not sets[-1].arcs:
            print(f"lambda={lam!r}: angle set empty at level {N}")
            continue
        curve = trace_curve(cfg.potential, lam, N, sets[-1], cfg.phi_resolution, cfg.schedule,
                            cfg.continuation, cfg.eta)
        text = curve.to_csv()
        run.write(f"isocurve_{_tag(lam)}_L{N}.csv", text)
        run.write(f"isocurve_{_tag(lam)}_L{N}.svg", svg.iso_curve(text))
        rows.append((lam, curve.max_deviation, len(curve.samples), len(curve.failures)))
        print(f"lambda={lam!r} samples={len(curve.samples)} failed={len(curve.failures)} "
              f"max_deviation={curve.max_deviation!r}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("lambda", "max_deviation", "samples", "failed"))
    for lam, dev, ns, nf in rows:
        w.writerow((repr(lam), repr(dev), ns, nf))
    run.write(f"isocurve_sweep_L{N}.csv", buf.getvalue())
    return EXIT_OK


def cmd_fraction(args, cfg, run) -> int:
    if cfg.seed is None:
        raise cfgmod.ConfigInvalid(["fraction needs a seed in the config"])
    plan = cfg.fraction
    level = args.level or plan.level
    rows = [nonresonant_fraction(cfg.potential, R, level, plan.samples, cfg.seed, cfg.thresholds,
                                 cfg.schedule, cfg.continuation, plan.annulus) for R in plan.radii]
    for e in rows:
        print(f"R={e.R!r} fraction={e.fraction!r} CI=[{e.ci_low:.4f}, {e.ci_high:.4f}]")
    run.write(f"fraction_L{level}.csv", fraction_csv(rows))
    return EXIT_OK


def cmd_wave(args, cfg, run) -> int:
    N = args.level or cfg.levels
    status = EXIT_OK
    for i, k in enumerate(_k_list(args, cfg)):
        pair = branch(cfg.potential, k, N, cfg.schedule, cfg.continuation)
        if isinstance(pair, Resonant):
            print(f"k=({k[0]!r},{k[1]!r}) {pair}")
            status = EXIT_RESONANT
            continue
        field = grid_render(pair, k, cfg.potential.freq, cfg.spatial, cfg.convention)
        text = field_csv(field, cfg.spatial)
        run.write(f"wave_{i}_L{N}.csv", text)
        run.write(f"wave_{i}_L{N}.svg", svg.field_magnitude(text))
        u = pair.coeffs.copy()
        u[pair.tset.zero_position] -= 1.0
        print(f"k=({k[0]!r},{k[1]!r}) max||psi|-1|={float(np.max(np.abs(np.abs(field) - 1))):.6g} "
              f"|u-u0|_1={float(np.sum(np.abs(u))):.6g}")
    return status


def cmd_diophantine(args, cfg, run) -> int:
    rows = diophantine_report(cfg.potential.freq, args.max_box)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("box", "min_norm"))
    for b, v in rows:
        w.writerow((b, repr(v)))
        print(f"box={b} min|p+alpha*m|={v!r}")
    run.write("diophantine.csv", buf.getvalue())
    return EXIT_OK


def cmd_render(args) -> int:
    texts = [Path(p).read_text() for p in args.csv]
    kind = args.kind
    out = (svg.angle_sets(texts) if kind == "cheese" else
           svg.iso_curve(texts[0]) if kind == "isocurve" else svg.field_magnitude(texts[0]))
    Path(args.svg).write_text(out)
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate, "converge": cmd_converge, "cheese": cmd_cheese,
    "isocurve": cmd_isocurve, "fraction": cmd_fraction, "wave": cmd_wave,
    "diophantine": cmd_diophantine,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qpm", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="experiment JSON (default: the shipped sample config)")
        p.add_argument("--out", help="output directory (default: the config's output_dir)")
        p.add_argument("--lambda", dest="lam", type=float)
        p.add_argument("--level", type=int)
        p.add_argument("--k", type=_pair, help="momentum as F,F")
        if name == "diophantine":
            p.add_argument("--max-box", type=int, default=4)
    r = sub.add_parser("render", help="rebuild an SVG from CSV files")
    r.add_argument("kind", choices=("cheese", "isocurve", "wave"))
    r.add_argument("svg")
    r.add_argument("csv", nargs="+")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "render":
        return cmd_render(args)
    try:
        cfg = cfgmod.load(args.config) if args.config else cfgmod.sample_config()
    except SchemaError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except cfgmod.ConfigInvalid as exc:
        for p in exc.problems:
            print(p)
        return EXIT_SEMANTIC
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_PARSE
    if args.level is not None and args.level < 1:
        print("--level must be >= 1")
        return EXIT_SEMANTIC
    run = Run(args.command, cfg, Path(args.out or cfg.output_dir))
    try:
        status = COMMANDS[args.command](args, cfg, run)
    except cfgmod.ConfigInvalid as exc:
        for p in exc.problems:
            print(p)
        return EXIT_SEMANTIC
    except (SolverError, TruncationTooLarge, ScanTooLarge) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    run.finish()
    return status


if __name__ == "__main__":
    sys.exit(main())
