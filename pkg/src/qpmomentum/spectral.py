"""Eigenpair continuation across nested truncations.

The non-resonant branch at level n is the eigenpair of H^(n)(k) with the
largest squared overlap with the zero-extended level-(n-1) vector (the plane
wave delta at level 0). Only eigenvalues that can carry an overlap above
``overlap_floor`` are computed: if ``ref`` is a unit vector with Rayleigh
quotient mu and residual r, any eigenvector with squared overlap >= f has its
eigenvalue within mu +/- r/sqrt(f).
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg

from . import synthesis
from .hamiltonian import HamiltonianMatrix, assemble
from .potential import PotentialSpec
from .quasilattice import GrowthSchedule, TruncationSet, build_truncation, int_power


class SolverError(RuntimeError):
    """The dense eigensolver failed or produced non-finite output."""


class NearDegenerate(ValueError):
    """Eigenvalue derivative requested for a pair inside the gap floor."""


@dataclass(frozen=True)
class ContinuationParams:
    overlap_floor: float = 0.5
    gap_rel: float = 1e-8

    def gap_floor(self, lam: float) -> float:
        return self.gap_rel * (1.0 + abs(lam))


@dataclass(frozen=True, eq=False)
class SpectralPair:
    level: int
    lam: float
    coeffs: np.ndarray
    overlap_prev: float
    l1_increment: float
    tset: TruncationSet
    k: np.ndarray
    gap: float
    diff: float = math.nan  # signed lam^(n) - lam^(n-1); lam^(0) = |k|^{2l}

    def extended_to(self, tset: TruncationSet) -> np.ndarray:
        return embed(self.coeffs, self.tset, tset)


@dataclass(frozen=True)
class Resonant:
    """No canonical continuation at ``level``: low overlap or a near-degenerate cluster."""

    level: int
    overlap: float
    gap: float
    reason: str

    def __str__(self) -> str:
        return (f"resonant at level {self.level}: {self.reason} "
                f"(overlap={self.overlap:.6g}, gap={self.gap:.6g})")


def embed(coeffs: np.ndarray, src: TruncationSet, dst: TruncationSet) -> np.ndarray:
    pos = dst.positions(src.array)
    if np.any(pos < 0):
        raise ValueError("source truncation is not contained in the destination")
    out = np.zeros(len(dst), dtype=coeffs.dtype)
    out[pos] = coeffs
    return out


def eig_all(H: HamiltonianMatrix | np.ndarray):
    """Full eigendecomposition (w ascending, V columns orthonormal)."""
    a = H.entries if isinstance(H, HamiltonianMatrix) else np.asarray(H)
    try:
        w, V = scipy.linalg.eigh(a)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverError(str(exc)) from exc
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(V))):
        raise SolverError("eigensolver returned non-finite values")
    return w, V


def _eig_window(a: np.ndarray, lo: float, hi: float):
    try:
        w, V = scipy.linalg.eigh(a, subset_by_value=(lo, hi), driver="evr")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverError(str(exc)) from exc
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(V))):
        raise SolverError("eigensolver returned non-finite values")
    return w, V


def canonical_phase(v: np.ndarray, zero_pos: int) -> np.ndarray:
    """Rotate so the zero-index coefficient is real and >= 0.

    Falls back to the largest-modulus coefficient (first in canonical order)
    when the zero-index coefficient vanishes.
    """
    pos = zero_pos if v[zero_pos] != 0 else int(np.argmax(np.abs(v)))
    anchor = v[pos]
    if np.isrealobj(v):
        return v if anchor >= 0 else -v
    out = v * (np.conj(anchor) / abs(anchor))
    out[pos] = abs(anchor)  # exactly real, not real up to rounding
    return out


def select_branch(H: HamiltonianMatrix, ref: np.ndarray, level: int,
                  params: ContinuationParams) -> tuple[float, np.ndarray, float, float] | Resonant:
    """Pick the eigenpair with the largest squared overlap with ``ref``.

    Returns (lam - mu, v, overlap, gap) where mu is the Rayleigh quotient of ``ref``.
    """
    a = H.entries
    ref = ref / np.linalg.norm(ref)
    Href = a @ ref
    mu = float(np.real(np.vdot(ref, Href)))
    r = float(np.linalg.norm(Href - mu * ref))
    gf = params.gap_floor(abs(mu) + r)
    half = r / math.sqrt(params.overlap_floor) + 2.0 * gf
    w, V = _eig_window(a, mu - half, mu + half)
    if len(w) == 0:
        return Resonant(level, 0.0, half, "no eigenvalue can carry the reference overlap")
    ov = np.abs(V.conj().T @ ref) ** 2
    i = int(np.argmax(ov))
    others = np.delete(w, i)
    gap = float(np.min(np.abs(others - w[i]))) if len(others) else float(min(w[i] - (mu - half), mu + half - w[i]))
    if ov[i] < params.overlap_floor:
        return Resonant(level, float(ov[i]), gap, "overlap below floor")
    if gap < params.gap_floor(w[i]):
        return Resonant(level, float(ov[i]), gap, "eigenvalue not simple within gap floor")
    v = canonical_phase(V[:, i], H.tset.zero_position)
    # lam - mu = <(H - mu) ref, v_perp> / <ref, v>, v_perp = v - <ref, v> ref;
    # exact because <(H - mu) ref, ref> = 0, and free of the cancellation that
    # subtracting two nearly equal eigenvalues would suffer.
    c = np.vdot(ref, v)
    step = float(np.real(np.vdot(Href - mu * ref, v - c * ref) / c))
    return step, v, float(ov[i]), gap


def initial_pair(spec: PotentialSpec, k, tset: TruncationSet,
                 params: ContinuationParams | None = None) -> SpectralPair | Resonant:
    params = params or ContinuationParams()
    H = assemble(spec, k, tset)
    u0 = np.zeros(len(tset))
    u0[tset.zero_position] = 1.0
    sel = select_branch(H, u0, tset.level, params)
    if isinstance(sel, Resonant):
        return sel
    step, v, ov, gap = sel
    lam = float(H.diag[tset.zero_position]) + step
    return SpectralPair(tset.level, lam, v, ov, float(np.sum(np.abs(v - u0))), tset, H.k, gap, step)


def continue_pair(spec: PotentialSpec, k, prev: SpectralPair, tset: TruncationSet,
                  params: ContinuationParams | None = None) -> SpectralPair | Resonant:
    params = params or ContinuationParams()
    H = assemble(spec, k, tset)
    ext = prev.extended_to(tset)
    level = prev.level + 1
    sel = select_branch(H, ext, level, params)
    if isinstance(sel, Resonant):
        return sel
    step, v, ov, gap = sel
    return SpectralPair(level, prev.lam + step, v, ov, float(np.sum(np.abs(v - ext))), tset, H.k, gap, step)


@lru_cache(maxsize=64)
def truncation(level: int, schedule: GrowthSchedule) -> TruncationSet:
    return build_truncation(level, schedule)


def branch(spec: PotentialSpec, k, level: int, schedule: GrowthSchedule,
           params: ContinuationParams | None = None, chain: list | None = None) -> SpectralPair | Resonant:
    """Continue the plane-wave branch from level 1 up to ``level``.

    Every intermediate pair is appended to ``chain`` when given.
    """
    params = params or ContinuationParams()
    pair = initial_pair(spec, k, truncation(1, schedule), params)
    if chain is not None and not isinstance(pair, Resonant):
        chain.append(pair)
    for n in range(2, level + 1):
        if isinstance(pair, Resonant):
            break
        pair = continue_pair(spec, k, pair, truncation(n, schedule), params)
        if chain is not None and not isinstance(pair, Resonant):
            chain.append(pair)
    return pair


def gradient_weights(spec: PotentialSpec, k, pair: SpectralPair,
                     params: ContinuationParams | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(w, b) with grad lam = sum_idx w_idx (k + b_idx); w = 2l |k+b|^{2l-2} |u|^2."""
    params = params or ContinuationParams()
    if pair.gap < params.gap_floor(pair.lam):
        raise NearDegenerate(f"gap {pair.gap:.3g} below floor; derivative undefined")
    b = synthesis.shift_vectors(pair.tset, spec.freq)
    q = np.asarray(k, dtype=float) + b
    q2 = q[:, 0] * q[:, 0] + q[:, 1] * q[:, 1]
    return 2 * spec.l * int_power(q2, spec.l - 1) * np.abs(pair.coeffs) ** 2, b


def gradient(spec: PotentialSpec, k, pair: SpectralPair,
             params: ContinuationParams | None = None) -> np.ndarray:
    """Hellmann-Feynman gradient: only the kinetic diagonal depends on k."""
    w, b = gradient_weights(spec, k, pair, params)
    return w @ (np.asarray(k, dtype=float) + b)


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    lam: float
    diff: float
    l1_increment: float
    residual_next: float
    residual_l1: float
    grad: tuple[float, float]


@dataclass(eq=False)
class ConvergenceReport:
    k: np.ndarray
    rows: list[ConvergenceRow]
    pairs: list[SpectralPair] = field(repr=False, default_factory=list)
    fits: dict = field(default_factory=dict)

    CSV_COLUMNS = ("n", "lambda", "diff", "l1_increment", "residual_next", "grad_x", "grad_y")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_COLUMNS)
        for r in self.rows:
            w.writerow([r.n, repr(r.lam), repr(r.diff), repr(r.l1_increment),
                        repr(r.residual_next), repr(r.grad[0]), repr(r.grad[1])])
        return buf.getvalue()


@dataclass(frozen=True)
class ResonantAtLevel:
    level: int
    witness: Resonant
    partial: ConvergenceReport


def fit_log_decay(ns, values) -> float:
    """Slope of log(values) against n; nan when fewer than two positive values."""
    pts = [(n, math.log(v)) for n, v in zip(ns, values) if v > 0]
    if len(pts) < 2:
        return math.nan
    x, y = np.array(pts).T
    return float(np.polyfit(x, y, 1)[0])


def run_multiscale(spec: PotentialSpec, k, N: int, schedule: GrowthSchedule,
                   params: ContinuationParams | None = None) -> ConvergenceReport | ResonantAtLevel:
    if N < 1:
        raise ValueError("N must be >= 1")
    params = params or ContinuationParams()
    k = np.asarray(k, dtype=float)
    report = ConvergenceReport(k, [])
    pair = None
    for n in range(1, N + 1):
        tset = truncation(n, schedule)
        pair = (initial_pair(spec, k, tset, params) if pair is None
                else continue_pair(spec, k, pair, tset, params))
        if isinstance(pair, Resonant):
            return ResonantAtLevel(n, pair, report)
        res = synthesis.residual_coefficients(spec, pair, k)
        R_next, r_next = schedule.radii(n + 1)
        inside = TruncationSet.box(R_next, r_next)
        residual_next = float(np.linalg.norm(res.coeffs[inside.contains(res.rows)]))
        try:
            grad = gradient(spec, k, pair, params)
        except NearDegenerate:
            grad = np.array([math.nan, math.nan])
        report.rows.append(ConvergenceRow(n, pair.lam, abs(pair.diff), pair.l1_increment,
                                          residual_next, res.coeff_l1, (float(grad[0]), float(grad[1]))))
        report.pairs.append(pair)
    ns = [r.n for r in report.rows]
    report.fits = {
        "diff_log_slope": fit_log_decay(ns, [r.diff for r in report.rows]),
        "residual_log_slope": fit_log_decay(ns, [r.residual_l1 for r in report.rows]),
        "increment_log_slope": fit_log_decay(ns, [r.l1_increment for r in report.rows]),
    }
    return report
