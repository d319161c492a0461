"""Isoenergetic curves D_n(lam) = {k : lam^(n)(k) = lam}, traced radially.

Along each direction nu(phi) the curve is the root kappa_n(lam, phi) of
lam^(n)(kappa*nu) = lam inside the bracket lam^(1/2l) * [1 - eta, 1 + eta].
Roots are accepted only where the branch is strictly increasing in kappa at ten
equally spaced probes of the bracket; anything else marks the direction.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .parallel import pmap
from .potential import PotentialSpec
from .quasilattice import GrowthSchedule
from .resonance import AngleSet, Thresholds, carve_cheese, phi_grid
from .spectral import ContinuationParams, Resonant, SpectralPair, branch, gradient, gradient_weights

MONOTONE_PROBES = 10
ROOT_RTOL = 1e-9


@dataclass(frozen=True)
class NoRoot:
    phi: float
    kappa_lo: float
    kappa_hi: float
    f_lo: float
    f_hi: float

    def __str__(self) -> str:
        return (f"no sign change on [{self.kappa_lo:.6g}, {self.kappa_hi:.6g}]: "
                f"lam - target = {self.f_lo:.6g}, {self.f_hi:.6g}")


@dataclass(frozen=True)
class NonMonotone:
    phi: float
    kappas: tuple
    values: tuple

    def __str__(self) -> str:
        return "branch not strictly increasing across the bracket"


class TangentialCrossing(ValueError):
    """The radial derivative of the branch is below the positivity floor."""


@dataclass(frozen=True)
class CurveSample:
    phi: float
    kappa: float
    dkappa_dphi: float
    residual: float


@dataclass(eq=False)
class IsoCurve:
    lam: float
    level: int
    samples: list[CurveSample]
    angle_set: AngleSet
    kappa0: float
    failures: dict = field(default_factory=dict)  # phi -> reason

    @property
    def max_deviation(self) -> float:
        """max |kappa - lam^(1/2l)| over the emitted samples."""
        if not self.samples:
            return math.nan
        return max(abs(s.kappa - self.kappa0) for s in self.samples)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("phi", "kappa", "dkappa_dphi", "residual"))
        for s in self.samples:
            w.writerow((repr(s.phi), repr(s.kappa), repr(s.dkappa_dphi), repr(s.residual)))
        return buf.getvalue()


def direction(phi: float) -> tuple[np.ndarray, np.ndarray]:
    c, s = math.cos(phi), math.sin(phi)
    return np.array([c, s]), np.array([-s, c])


def radial_solve(spec: PotentialSpec, lam: float, phi: float, level: int, schedule: GrowthSchedule,
                 params: ContinuationParams | None = None, eta: float = 0.2,
                 rtol: float = ROOT_RTOL):
    """kappa with lam^(level)(kappa*nu) = lam, plus the pair there.

    Returns (kappa, pair) or a NoRoot / NonMonotone / Resonant value.
    """
    if lam <= 0 or not (0 < eta < 1):
        raise ValueError("need lam > 0 and 0 < eta < 1")
    params = params or ContinuationParams()
    nu, _ = direction(phi)
    k0 = lam ** (1.0 / (2 * spec.l))

    def at(kappa):
        return branch(spec, kappa * nu, level, schedule, params)

    probes = np.linspace(k0 * (1 - eta), k0 * (1 + eta), MONOTONE_PROBES)
    vals = []
    for kap in probes:
        p = at(kap)
        if isinstance(p, Resonant):
            return p
        vals.append(p.lam - lam)
    if np.any(np.diff(vals) <= 0):
        return NonMonotone(phi, tuple(probes), tuple(vals))
    if not (vals[0] <= 0 <= vals[-1]):
        return NoRoot(phi, probes[0], probes[-1], vals[0], vals[-1])
    i = int(np.searchsorted(vals, 0.0))
    if vals[i] == 0.0:
        return float(probes[i]), at(probes[i])
    lo, hi = float(probes[i - 1]), float(probes[i])
    start = lo - vals[i - 1] * (hi - lo) / (vals[i] - vals[i - 1])
    return refine_root(spec, lam, phi, level, schedule, start, params, rtol, bracket=(lo, hi))


def refine_root(spec: PotentialSpec, lam: float, phi: float, level: int, schedule: GrowthSchedule,
                start: float, params: ContinuationParams | None = None, rtol: float = ROOT_RTOL,
                bracket: tuple[float, float] | None = None, max_iter: int = 60):
    """Newton on lam^(level)(kappa*nu) - lam from ``start``.

    With a sign-change ``bracket`` every step that leaves it is replaced by
    bisection; without one the iteration is plain Newton and a failure to
    reach ``rtol`` is reported as NoRoot.
    """
    params = params or ContinuationParams()
    nu, _ = direction(phi)
    lo, hi = bracket if bracket is not None else (0.0, math.inf)
    kappa, pair = start, None
    for _ in range(max_iter):
        pair = branch(spec, kappa * nu, level, schedule, params)
        if isinstance(pair, Resonant):
            return pair
        f = pair.lam - lam
        if f == 0.0:
            break
        if f < 0:
            lo = kappa
        else:
            hi = kappa
        slope = float(gradient(spec, kappa * nu, pair, params) @ nu)
        nxt = kappa - f / slope if slope > 0 else math.nan
        tiny = 4 * np.spacing(kappa)
        if abs(f) <= rtol * lam and (abs(nxt - kappa) <= tiny or hi - lo <= tiny):
            break
        if not (lo < nxt < hi):
            if not math.isfinite(hi):
                return NoRoot(phi, lo, hi, math.nan, f)
            nxt = 0.5 * (lo + hi)
        kappa = nxt
    if abs(pair.lam - lam) > rtol * lam:
        return NoRoot(phi, lo, hi, math.nan, pair.lam - lam)
    return kappa, pair


def curve_derivative(spec: PotentialSpec, lam: float, phi: float, kappa: float, pair: SpectralPair,
                     params: ContinuationParams | None = None, floor: float = 1e-3) -> float:
    """Implicit derivative -kappa (grad . t) / (grad . nu).

    ``floor`` is relative to the unperturbed radial slope 2l kappa^(2l-1).
    """
    nu, t = direction(phi)
    w, b = gradient_weights(spec, kappa * nu, pair, params)
    # k = kappa*nu is orthogonal to t, so only the shifts enter the tangential part
    radial = float(w @ (kappa + b @ nu))
    if radial < floor * 2 * spec.l * kappa ** (2 * spec.l - 1):
        raise TangentialCrossing(f"radial derivative {radial:.3g} below floor at phi={phi:.6g}")
    return -kappa * float(w @ (b @ t)) / radial


def radius_function(spec: PotentialSpec, lam: float, level: int, schedule: GrowthSchedule,
                    params: ContinuationParams | None = None, eta: float = 0.2, seed=None):
    """phi -> kappa_level(lam, phi), or None where the solve fails.

    With ``seed`` (a lower-level radius function) the root is refined by Newton
    from the seed value instead of a full bracket scan. Values are memoized per
    phi, so a seed shared between levels is solved once.
    """
    @lru_cache(maxsize=None)
    def kappa(phi):
        if seed is None:
            res = radial_solve(spec, lam, phi, level, schedule, params, eta)
        else:
            k0 = seed(phi)
            if k0 is None:
                return None
            res = refine_root(spec, lam, phi, level, schedule, k0, params)
        return res[0] if isinstance(res, tuple) else None
    return kappa


def trace_curve(spec: PotentialSpec, lam: float, level: int, angle_set: AngleSet, resolution: int,
                schedule: GrowthSchedule, params: ContinuationParams | None = None,
                eta: float = 0.2) -> IsoCurve:
    if not angle_set.arcs:
        raise ValueError("angle set is empty")
    phis = [float(p) for p in phi_grid(resolution) if angle_set.contains(p)]

    def solve(phi):
        res = radial_solve(spec, lam, phi, level, schedule, params, eta)
        if not isinstance(res, tuple):
            return str(res)
        kappa, pair = res
        try:
            d = curve_derivative(spec, lam, phi, kappa, pair, params)
        except Exception as exc:  # near-degenerate or tangential
            return str(exc)
        return CurveSample(phi, kappa, d, abs(pair.lam - lam))

    out = pmap(solve, phis)
    samples = [s for s in out if isinstance(s, CurveSample)]
    failures = {phi: s for phi, s in zip(phis, out) if not isinstance(s, CurveSample)}
    return IsoCurve(lam, level, samples, angle_set, lam ** (1.0 / (2 * spec.l)), failures)


def carve_levels(spec: PotentialSpec, lam: float, levels: int, schedule: GrowthSchedule,
                 thresholds: Thresholds, resolution: int = 1024,
                 params: ContinuationParams | None = None, eta: float = 0.2) -> list[AngleSet]:
    """B_1(lam) ... B_levels(lam) on one phi grid, each carved inside the previous.

    Level n >= 2 probes kappa_{n-1}(lam, phi): a full bracketed solve at level 1,
    then Newton seeded by the level below.
    """
    sets: list[AngleSet] = []
    radius = None
    for n in range(1, levels + 1):
        prev = sets[-1] if sets else None
        sets.append(carve_cheese(spec, lam, n, schedule, thresholds, resolution, prev, radius))
        radius = radius_function(spec, lam, n, schedule, params, eta, seed=radius)
    return sets
