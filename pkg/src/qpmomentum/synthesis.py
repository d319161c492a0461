"""Almost-plane-wave eigenfunctions and their exact residuals.

Psi_n(k, x) = sum_idx u_idx exp(i c <k + b(idx), x>) with b = p + alpha*m.
The convention fixes c: "absorbed" (c = 1, the default, matching the kinetic
diagonal |k+b|^{2l}) or "literal" (c = 2*pi, the spatial scale of the
potential's exponents e^{2 pi i <s1 + alpha s2, x>}). Potential and wave are
always evaluated in the same convention.
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .potential import PotentialSpec, evaluate, phase_scale
from .quasilattice import Frequency, LatticeIndex, TruncationSet, dual_vectors, int_power

if TYPE_CHECKING:
    from .spectral import SpectralPair

DEFAULT_GRID_CAP = 1_000_000


def shift_vectors(tset: TruncationSet, freq: Frequency) -> np.ndarray:
    return dual_vectors(tset.array, freq)


@dataclass(frozen=True, eq=False)
class ResidualReport:
    level: int
    rows: np.ndarray        # enlarged index set M_n + supp(V), canonical order
    coeffs: np.ndarray      # residual coefficients of f_n on ``rows``
    coeff_l1: float
    coeff_l2: float
    interior_l2: float      # part of f_n on M_n itself
    support: list[LatticeIndex]  # boundary-layer indices carrying nonzero residual

    def sup_bound(self) -> float:
        return self.coeff_l1


def _shift_add(out: np.ndarray, src: np.ndarray, offset: tuple[int, ...], value) -> None:
    """out[a + offset] += value * src[a] wherever both indices are in range."""
    dst_sl, src_sl = [], []
    for o, n in zip(offset, src.shape):
        if o >= 0:
            dst_sl.append(slice(o, n))
            src_sl.append(slice(0, n - o))
        else:
            dst_sl.append(slice(0, n + o))
            src_sl.append(slice(-o, n))
    out[tuple(dst_sl)] += value * src[tuple(src_sl)]


def residual_coefficients(spec: PotentialSpec, pair: "SpectralPair", k) -> ResidualReport:
    """Coefficients of f_n = ((-Delta)^l + V - lambda) Psi_n, computed exactly.

    f_n lives on M_n + supp(V); on M_n it restates the truncated eigen-equation,
    so only the boundary layer is nonzero up to solver rounding.
    """
    tset = pair.tset
    if pair.coeffs.shape != (len(tset),):
        raise ValueError("pair coefficients do not match its truncation set")
    rp, rm = spec.reach
    big = TruncationSet.box(tset.box_p + rp, tset.box_m + rm, level=tset.level)
    U = np.zeros(big.shape4, dtype=complex)
    sub = tuple(slice(rm, rm + 2 * tset.box_m + 1) for _ in range(2)) + \
        tuple(slice(rp, rp + 2 * tset.box_p + 1) for _ in range(2))
    U[sub] = pair.coeffs.reshape(tset.shape4)

    q = np.asarray(k, dtype=float) + shift_vectors(big, spec.freq)
    kin = (int_power(q[:, 0] * q[:, 0] + q[:, 1] * q[:, 1], spec.l) - pair.lam).reshape(big.shape4)
    F = kin * U
    for (s1, s2), v in spec.scaled_items():
        # (V Psi)_idx = sum_s gV_s u_{idx - s}; grid axes are (m1, m2, p1, p2)
        _shift_add(F, U, (s2[0], s2[1], s1[0], s1[1]), v)
    f = F.ravel()
    if np.isrealobj(pair.coeffs) and spec.is_real_matrix():
        f = f.real
    inner = tset.contains(big.array)
    boundary = (~inner) & (f != 0)
    support = [LatticeIndex((int(r[0]), int(r[1])), (int(r[2]), int(r[3]))) for r in big.array[boundary]]
    return ResidualReport(tset.level, big.array, f, float(np.sum(np.abs(f))), float(np.linalg.norm(f)),
                          float(np.linalg.norm(f[inner])), support)


def _phases(k, rows: np.ndarray, freq: Frequency, x: np.ndarray, convention: str) -> np.ndarray:
    c = phase_scale(convention)
    q = np.asarray(k, dtype=float) + dual_vectors(rows, freq)
    return np.exp(1j * c * (np.atleast_2d(x) @ q.T))


def eigenfunction(pair: "SpectralPair", k, freq: Frequency, x, convention: str = "absorbed"):
    """Psi_n at one point (2,) or a batch (N, 2)."""
    x = np.asarray(x, dtype=float)
    vals = _phases(k, pair.tset.array, freq, x, convention) @ pair.coeffs
    return complex(vals[0]) if x.ndim == 1 else vals


def residual_field(report: ResidualReport, k, freq: Frequency, x, convention: str = "absorbed"):
    """f_n at points x, summed from its coefficients."""
    x = np.asarray(x, dtype=float)
    vals = _phases(k, report.rows, freq, x, convention) @ report.coeffs
    return complex(vals[0]) if x.ndim == 1 else vals


def pointwise_residual(spec: PotentialSpec, pair: "SpectralPair", k, x, convention: str = "absorbed"):
    """f_n at points x from V(x)Psi(x) products; one convention for both factors."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    ph = _phases(k, pair.tset.array, spec.freq, x, convention)
    q = np.asarray(k, dtype=float) + shift_vectors(pair.tset, spec.freq)
    kin = int_power(q[:, 0] * q[:, 0] + q[:, 1] * q[:, 1], spec.l)
    psi = ph @ pair.coeffs
    V = evaluate(spec, x, convention=convention)
    return ph @ (kin * pair.coeffs) + V * psi - pair.lam * psi


@dataclass(frozen=True)
class Grid:
    x0: float
    x1: float
    y0: float
    y1: float
    nx: int
    ny: int

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        return np.linspace(self.x0, self.x1, self.nx), np.linspace(self.y0, self.y1, self.ny)


def grid_render(pair: "SpectralPair", k, freq: Frequency, grid: Grid, convention: str = "absorbed",
                cap: int = DEFAULT_GRID_CAP) -> np.ndarray:
    """Psi_n on ``grid`` as an (ny, nx) array, rows along y."""
    if grid.nx < 1 or grid.ny < 1:
        raise ValueError("grid needs at least one point per axis")
    if grid.nx * grid.ny > cap:
        raise ValueError(f"grid of {grid.nx * grid.ny} points exceeds the cap {cap}")
    c = phase_scale(convention)
    q = np.asarray(k, dtype=float) + shift_vectors(pair.tset, freq)
    xs, ys = grid.axes()
    Ex = np.exp(1j * c * np.outer(xs, q[:, 0]))
    Ey = np.exp(1j * c * np.outer(ys, q[:, 1]))
    return (Ey * pair.coeffs) @ Ex.T


def field_csv(field: np.ndarray, grid: Grid, magnitude_only: bool = False) -> str:
    xs, ys = grid.axes()
    buf = io.StringIO()
    buf.write("x1,x2,abs\n" if magnitude_only else "x1,x2,re,im\n")
    for j, y in enumerate(ys):
        for i, x in enumerate(xs):
            v = complex(field[j, i])
            if magnitude_only:
                buf.write(f"{float(x)!r},{float(y)!r},{abs(v)!r}\n")
            else:
                buf.write(f"{float(x)!r},{float(y)!r},{v.real!r},{v.imag!r}\n")
    return buf.getvalue()
