"""Resonance tests on shifted blocks and the resulting non-resonant sets.

At level n a momentum k is resonant for the energy lam when some block
H^(s)(k + b(j)), s = n-1, has an eigenvalue within delta_n + eps0 of lam. The
shifts j run over M_n minus M_s, so no scanned block contains the zero index
(that block carries the branch itself). Level 1 uses one-point blocks: the
unperturbed test |lam - |k + b(j)|^{2l}| < delta_1.

Blocks are screened without changing any verdict. Weyl's inequality clears a
block whose diagonal stays thr + w away from lam (w = g*sum|V| bounds the
potential part). A Schur-complement bound then clears blocks whose near
diagonal cluster S cannot produce an eigenvalue in the window: any such
eigenvalue lies within |A_SC|^2 / gamma of spec(A_SS). Only the rest are
diagonalized.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .hamiltonian import potential_block
from .parallel import pmap
from .potential import PotentialSpec
from .quasilattice import GrowthSchedule, LatticeIndex, dual_vectors, int_power
from .spectral import ContinuationParams, Resonant, continue_pair, initial_pair, truncation

TWO_PI = 2.0 * math.pi
DEFAULT_MAX_BLOCKS = 20000


class ScanTooLarge(ValueError):
    """More shifted blocks requested than the configured cap."""


@dataclass(frozen=True)
class Thresholds:
    """delta_n = delta_scale * lam^e * rho^(n-1), widened by eps0.

    The exponent e defaults to 1 - 1/2l, which keeps the angular hole width
    independent of lam at level 1; a smaller e lets holes shrink as lam grows.
    """

    delta_scale: float = 0.1
    rho: float = 0.1
    eps0: float = 0.0
    full_s_scan: bool = False
    delta_exponent: Optional[float] = None

    def __post_init__(self):
        if self.delta_scale < 0 or self.eps0 < 0 or not (0 < self.rho <= 1):
            raise ValueError("need delta_scale >= 0, eps0 >= 0, 0 < rho <= 1")

    def delta(self, lam: float, level: int, l: int) -> float:
        e = 1.0 - 1.0 / (2 * l) if self.delta_exponent is None else self.delta_exponent
        return self.delta_scale * abs(lam) ** e * self.rho ** (level - 1)

    def window(self, lam: float, level: int, l: int) -> float:
        return self.delta(lam, level, l) + self.eps0


@dataclass(frozen=True)
class Witness:
    shift: LatticeIndex
    block_level: int
    distance: float
    threshold: float


@dataclass(frozen=True)
class ResonanceVerdict:
    resonant: bool
    witness: Optional[Witness] = None

    def __bool__(self) -> bool:
        return self.resonant


def _row_to_index(row) -> LatticeIndex:
    return LatticeIndex((int(row[0]), int(row[1])), (int(row[2]), int(row[3])))


def shell_shifts(level: int, s: int, schedule: GrowthSchedule) -> np.ndarray:
    """Shifts j in M_level whose block j + M_s misses the zero index, canonical order."""
    outer = truncation(level, schedule).array
    if s == 0:
        return outer[np.any(outer != 0, axis=1)]
    inner = truncation(s, schedule)
    return outer[~inner.contains(outer)]


def _scan_blocks(spec: PotentialSpec, k, lam: float, s: int, shifts: np.ndarray,
                 schedule: GrowthSchedule, thr: float) -> Optional[Witness]:
    freq = spec.freq
    kj = np.asarray(k, dtype=float) + dual_vectors(shifts, freq)
    if s == 0:
        dist = np.abs(int_power(kj[:, 0] * kj[:, 0] + kj[:, 1] * kj[:, 1], spec.l) - lam)
        hits = np.flatnonzero(dist < thr)
        if len(hits) == 0:
            return None
        i = hits[0]
        return Witness(_row_to_index(shifts[i]), 0, float(dist[i]), thr)

    block = truncation(s, schedule)
    bi = dual_vectors(block.array, freq)
    w = spec.abs_sum
    W = potential_block(spec, block) if w > 0 else None
    row_sq = np.sum(np.abs(W) ** 2, axis=1) if W is not None else None
    chunk = max(1, 400000 // len(block))
    for start in range(0, len(shifts), chunk):
        q = kj[start:start + chunk, None, :] + bi[None, :, :]
        D = int_power(q[..., 0] * q[..., 0] + q[..., 1] * q[..., 1], spec.l)
        gapd = np.abs(D - lam)
        cand = np.flatnonzero(gapd.min(axis=1) < thr + w)
        if W is not None and len(cand):
            cand = cand[~_single_site_clears(gapd[cand], row_sq, thr, w)]
        for c in cand:
            j = start + c
            if W is None:
                dist = float(gapd[c].min())
            elif _schur_clears(W, D[c], gapd[c], lam, thr, w):
                continue
            else:
                A = np.array(W)
                A[np.diag_indices_from(A)] = D[c]
                dist = float(np.min(np.abs(scipy.linalg.eigvalsh(A) - lam)))
            if dist < thr:
                return Witness(_row_to_index(shifts[j]), s, dist, thr)
    return None


def _single_site_clears(gapd: np.ndarray, row_sq: np.ndarray, thr: float, w: float) -> np.ndarray:
    """Vectorized Schur test for blocks whose near cluster is a single index.

    With S = {i} and every other diagonal more than thr + w from lam, an
    eigenvalue within thr of lam must lie within row_sq[i] / gamma_eff of d_i,
    gamma_eff = (second smallest gap) - thr - w.
    """
    order = np.partition(gapd, 1, axis=1)
    i = np.argmin(gapd, axis=1)
    gamma_eff = order[:, 1] - thr - w
    single = gamma_eff > 0
    with np.errstate(divide="ignore"):
        bound = thr + row_sq[i] / np.where(single, gamma_eff, 1.0)
    return single & (order[:, 0] >= bound)


def _schur_clears(W: np.ndarray, d: np.ndarray, gapd: np.ndarray, lam: float, thr: float,
                  w: float) -> bool:
    """True when no eigenvalue of diag(d) + W can lie within thr of lam.

    Split indices into a near cluster S and the rest C with
    min_C |d - lam| >= thr + w + gamma. An eigenvalue mu with |mu - lam| < thr
    is then at distance >= gamma from spec(A_CC), and the Schur complement puts
    it within |A_SC|_2^2 / gamma of spec(A_SS).
    """
    order = np.sort(gapd)
    for gamma in (10 * w, 100 * w):
        near = gapd < thr + w + gamma
        S = np.flatnonzero(near)
        if len(S) > 200 or len(S) == len(d):
            return False
        C = np.flatnonzero(~near)
        gamma_eff = float(order[len(S)]) - thr - w
        A_SS = np.array(W[np.ix_(S, S)])
        A_SS[np.diag_indices_from(A_SS)] = d[S]
        dist = float(np.min(np.abs(scipy.linalg.eigvalsh(A_SS) - lam)))
        W_SC = W[np.ix_(S, C)]
        # Frobenius first; the spectral norm only when that is not enough
        if dist >= thr + float(np.sum(np.abs(W_SC) ** 2)) / gamma_eff:
            return True
        if dist >= thr + float(np.linalg.norm(W_SC, 2)) ** 2 / gamma_eff:
            return True
    return False


def is_resonant(spec: PotentialSpec, k, lam_ref: float, level: int, thresholds: Thresholds,
                schedule: GrowthSchedule, max_blocks: int = DEFAULT_MAX_BLOCKS) -> ResonanceVerdict:
    if not math.isfinite(lam_ref):
        raise ValueError("lam_ref must be finite")
    if level < 1:
        raise ValueError("level must be >= 1")
    thr = thresholds.window(lam_ref, level, spec.l)
    levels = range(0, level) if thresholds.full_s_scan else [level - 1]
    plan = [(s, shell_shifts(level, s, schedule)) for s in levels]
    total = sum(len(sh) for _, sh in plan)
    if total > max_blocks:
        raise ScanTooLarge(f"{total} shifted blocks requested at level {level}; "
                           f"cap {max_blocks} would stop after block levels {[s for s, _ in plan]}")
    for s, shifts in plan:
        wit = _scan_blocks(spec, k, lam_ref, s, shifts, schedule, thr)
        if wit is not None:
            return ResonanceVerdict(True, wit)
    return ResonanceVerdict(False)


@dataclass(frozen=True)
class AngleSet:
    """Disjoint, sorted half-open arcs [a, b) inside [0, 2*pi)."""

    arcs: tuple
    level: int = 0
    lam: float = math.nan

    def __post_init__(self):
        object.__setattr__(self, "arcs", _normalize(self.arcs))

    @classmethod
    def full(cls, level: int = 0, lam: float = math.nan) -> "AngleSet":
        return cls(((0.0, TWO_PI),), level, lam)

    @property
    def length(self) -> float:
        return float(sum(b - a for a, b in self.arcs))

    def holes(self) -> list[tuple[float, float]]:
        out, cur = [], 0.0
        for a, b in self.arcs:
            if a > cur:
                out.append((cur, a))
            cur = b
        if cur < TWO_PI:
            out.append((cur, TWO_PI))
        return out

    def contains(self, phi: float) -> bool:
        return any(a <= phi < b for a, b in self.arcs)

    def intersect(self, other: "AngleSet", level: int | None = None) -> "AngleSet":
        out, i, j = [], 0, 0
        A, B = self.arcs, other.arcs
        while i < len(A) and j < len(B):
            lo, hi = max(A[i][0], B[j][0]), min(A[i][1], B[j][1])
            if lo < hi:
                out.append((lo, hi))
            if A[i][1] < B[j][1]:
                i += 1
            else:
                j += 1
        return AngleSet(tuple(out), self.level if level is None else level, self.lam)

    def minus(self, holes, level: int | None = None) -> "AngleSet":
        return self.intersect(AngleSet(tuple(holes)).complement(), level)

    def complement(self) -> "AngleSet":
        return AngleSet(tuple(self.holes()), self.level, self.lam)

    def issubset(self, other: "AngleSet") -> bool:
        for a, b in self.arcs:
            if not any(c <= a and b <= d for c, d in other.arcs):
                return False
        return True

    def to_csv(self) -> str:
        return _arcs_csv(self.arcs)

    def holes_csv(self) -> str:
        return _arcs_csv(self.holes())


def _arcs_csv(arcs) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("arc_start", "arc_end"))
    for a, b in arcs:
        w.writerow((repr(float(a)), repr(float(b))))
    return buf.getvalue()


def read_arcs_csv(text: str) -> tuple:
    rows = list(csv.reader(io.StringIO(text)))
    return tuple((float(a), float(b)) for a, b in rows[1:])


def _normalize(arcs) -> tuple:
    clean = sorted((max(0.0, float(a)), min(TWO_PI, float(b))) for a, b in arcs)
    out: list[list[float]] = []
    for a, b in clean:
        if b <= a:
            continue
        if out and a <= out[-1][1]:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return tuple((a, b) for a, b in out)


def phi_grid(resolution: int) -> np.ndarray:
    return np.arange(resolution) * (TWO_PI / resolution)


def hole_arcs(marked: np.ndarray, resolution: int) -> list[tuple[float, float]]:
    """Half-step padded arcs around marked grid samples, wrapped into [0, 2*pi)."""
    h = TWO_PI / resolution
    out = []
    for i in np.flatnonzero(marked):
        lo, hi = (i - 0.5) * h, (i + 0.5) * h
        if lo < 0:
            out.append((0.0, hi))
            out.append((TWO_PI + lo, TWO_PI))
        else:
            out.append((lo, min(hi, TWO_PI)))
    return out


@dataclass
class CheeseRun:
    """Bookkeeping of one carve: which grid samples were tested and which were marked."""

    angle_set: AngleSet
    tested: np.ndarray
    marked: np.ndarray
    witnesses: dict = field(default_factory=dict)


RadiusFn = Callable[[float], Optional[float]]


def carve(spec: PotentialSpec, lam: float, level: int, schedule: GrowthSchedule,
          thresholds: Thresholds, resolution: int = 1024, prev: AngleSet | None = None,
          radius: RadiusFn | None = None, verdict_fn=None) -> CheeseRun:
    if resolution < 2 ** 10:
        raise ValueError("phi grid needs at least 1024 samples")
    if level >= 2 and (prev is None or radius is None):
        raise ValueError("levels >= 2 need the previous angle set and radius function")
    prev = prev if prev is not None else AngleSet.full(0, lam)
    verdict_fn = verdict_fn or is_resonant
    phis = phi_grid(resolution)
    tested = np.array([prev.contains(p) for p in phis])
    kappa0 = lam ** (1.0 / (2 * spec.l))

    def probe(i):
        phi = phis[i]
        kap = kappa0 if level == 1 else radius(phi)
        if kap is None:
            return True, None
        k = kap * np.array([math.cos(phi), math.sin(phi)])
        v = verdict_fn(spec, k, lam, level, thresholds, schedule)
        return v.resonant, v.witness

    idx = np.flatnonzero(tested)
    results = pmap(probe, idx)
    marked = np.zeros(resolution, dtype=bool)
    witnesses = {}
    for i, (res, wit) in zip(idx, results):
        marked[i] = res
        if wit is not None:
            witnesses[int(i)] = wit
    aset = prev.minus(hole_arcs(marked, resolution), level=level)
    aset = AngleSet(aset.arcs, level, lam)
    return CheeseRun(aset, tested, marked, witnesses)


def carve_cheese(spec: PotentialSpec, lam: float, level: int, schedule: GrowthSchedule,
                 thresholds: Thresholds, resolution: int = 1024, prev: AngleSet | None = None,
                 radius: RadiusFn | None = None) -> AngleSet:
    """B_n(lam): the level-(n-1) set minus padded holes around resonant grid angles.

    ``radius`` gives kappa_{n-1}(lam, phi) on grid angles (None where unsolved,
    which counts as resonant); level 1 uses lam^(1/2l). An empty result is legal.
    """
    return carve(spec, lam, level, schedule, thresholds, resolution, prev, radius).angle_set


@dataclass(frozen=True)
class HoleStats:
    count: int
    lengths: tuple
    removed: float


def hole_statistics(aset: AngleSet) -> HoleStats:
    holes = aset.holes()
    if len(holes) >= 2 and holes[0][0] == 0.0 and holes[-1][1] == TWO_PI:
        # a hole through phi = 0 is one hole on the circle
        first, last = holes[0], holes[-1]
        lengths = [(first[1] - first[0]) + (last[1] - last[0])] + [b - a for a, b in holes[1:-1]]
    else:
        lengths = [b - a for a, b in holes]
    lengths.sort(reverse=True)
    return HoleStats(len(lengths), tuple(lengths), float(sum(lengths)))


@dataclass(frozen=True)
class FractionEstimate:
    R: float
    level: int
    samples: int
    nonresonant: int
    fraction: float
    ci_low: float
    ci_high: float
    annulus: bool


def wilson_interval(successes: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    p = successes / n
    den = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return max(0.0, centre - half), min(1.0, centre + half)


def sample_point(seed: int, i: int, R: float, annulus: bool) -> np.ndarray:
    """i-th momentum sample: its own Philox stream, so order and threads do not matter."""
    u = np.random.Generator(np.random.Philox(key=seed, counter=i)).random(2)
    r_in = R / 2 if annulus else 0.0
    r = math.sqrt(r_in * r_in + u[0] * (R * R - r_in * r_in))
    th = TWO_PI * u[1]
    return np.array([r * math.cos(th), r * math.sin(th)])


def resonant_through(spec: PotentialSpec, k, level: int, thresholds: Thresholds,
                     schedule: GrowthSchedule, params: ContinuationParams | None = None) -> bool:
    """k outside G_level: resonant at some level m <= level against lam^(m-1)(k)."""
    lam_ref = float(int_power(k[0] * k[0] + k[1] * k[1], spec.l))
    pair = None
    for m in range(1, level + 1):
        if m >= 2:
            tset = truncation(m - 1, schedule)
            pair = (initial_pair(spec, k, tset, params) if pair is None
                    else continue_pair(spec, k, pair, tset, params))
            if isinstance(pair, Resonant):
                return True
            lam_ref = pair.lam
        if is_resonant(spec, k, lam_ref, m, thresholds, schedule).resonant:
            return True
    return False


def nonresonant_fraction(spec: PotentialSpec, R: float, level: int, samples: int, seed: int,
                         thresholds: Thresholds, schedule: GrowthSchedule,
                         params: ContinuationParams | None = None,
                         annulus: bool = False) -> FractionEstimate:
    if R <= 0:
        raise ValueError("R must be positive")
    if samples < 1000:
        raise ValueError("need at least 1000 samples")
    flags = pmap(lambda i: resonant_through(spec, sample_point(seed, i, R, annulus), level,
                                            thresholds, schedule, params), range(samples))
    good = samples - int(sum(flags))
    lo, hi = wilson_interval(good, samples)
    return FractionEstimate(R, level, samples, good, good / samples, lo, hi, annulus)


def fraction_csv(rows: list[FractionEstimate]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("R", "level", "samples", "nonresonant", "fraction", "ci_low", "ci_high", "annulus"))
    for e in rows:
        w.writerow((repr(float(e.R)), e.level, e.samples, e.nonresonant, repr(e.fraction),
                    repr(e.ci_low), repr(e.ci_high), int(e.annulus)))
    return buf.getvalue()
