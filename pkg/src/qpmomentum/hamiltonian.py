"""Dense truncated Hamiltonians H^(n)(k) = P_n H(k) P_n."""
from __future__ import annotations

import io
import os
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .potential import PotentialSpec, is_hermitian_symmetric, neg_key, validate
from .quasilattice import (DEFAULT_MAX_DIM, LatticeIndex, TruncationSet, TruncationTooLarge, dual_vector,
                          dual_vectors, int_power)

DEBUG = bool(os.environ.get("QPM_DEBUG"))


class NonHermitianSpec(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class HamiltonianMatrix:
    k: np.ndarray
    tset: TruncationSet
    entries: np.ndarray
    diag: np.ndarray

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def entry(self, row: LatticeIndex, col: LatticeIndex) -> complex:
        return complex(self.entries[self.tset.position(row), self.tset.position(col)])


def kinetic_diagonal(k, rows: np.ndarray, spec: PotentialSpec) -> np.ndarray:
    """|k + p + alpha*m|^{2l} for each row."""
    q = np.asarray(k, dtype=float) + dual_vectors(rows, spec.freq)
    return int_power(q[:, 0] * q[:, 0] + q[:, 1] * q[:, 1], spec.l)


def _key_row(key) -> np.ndarray:
    return np.array([key[0][0], key[0][1], key[1][0], key[1][1]], dtype=np.int64)


@lru_cache(maxsize=64)
def _check_spec(spec: PotentialSpec, allow_non_hermitian: bool) -> bool:
    problems = validate(spec)
    if spec.real_valued and not allow_non_hermitian:
        if problems:
            raise ValueError("invalid potential spec: " + "; ".join(problems))
        return True
    structural = [p for p in problems if "Hermitian" not in p and "conj" not in p]
    if structural:
        raise ValueError("invalid potential spec: " + "; ".join(structural))
    hermitian = is_hermitian_symmetric(spec)
    if not hermitian and not allow_non_hermitian:
        raise NonHermitianSpec("potential is not Hermitian-symmetric; pass allow_non_hermitian=True")
    return hermitian


@lru_cache(maxsize=16)
def _potential_block(spec: PotentialSpec, box_p: int, box_m: int, hermitian: bool) -> np.ndarray:
    tset = TruncationSet(0, box_p, box_m)
    rows = tset.array
    n = len(rows)
    items = spec.scaled_items()
    real = all(v.imag == 0 for _, v in items)
    W = np.zeros((n, n), dtype=float if real else complex)
    for key, v in items:
        if hermitian and neg_key(key) < key:
            continue
        # entry (i, j) = g V_{idx_i - idx_j}: column j = row i shifted by -key
        cols = tset.positions(rows - _key_row(key))
        ok = cols >= 0
        i = np.flatnonzero(ok)
        j = cols[ok]
        val = v.real if real else v
        W[i, j] = val
        if hermitian:
            W[j, i] = val if real else np.conj(v)
    W.setflags(write=False)
    return W


def potential_block(spec: PotentialSpec, tset: TruncationSet, hermitian: bool = True) -> np.ndarray:
    """Off-diagonal part g*V_{idx-idx'} on ``tset``; independent of k and of shifts."""
    return _potential_block(spec, tset.box_p, tset.box_m, hermitian)


def assemble(spec: PotentialSpec, k, tset: TruncationSet, *, allow_non_hermitian: bool = False,
             max_dim: int = DEFAULT_MAX_DIM) -> HamiltonianMatrix:
    if len(tset) == 0:
        raise ValueError("empty truncation set")
    if len(tset) > max_dim:
        raise TruncationTooLarge(f"dimension {len(tset)} exceeds cap {max_dim}")
    hermitian = _check_spec(spec, allow_non_hermitian)
    k = np.asarray(k, dtype=float)
    if k.shape != (2,) or not np.all(np.isfinite(k)):
        raise ValueError("k must be a finite 2-vector")
    diag = kinetic_diagonal(k, tset.array, spec)
    H = np.array(potential_block(spec, tset, hermitian))
    H[np.diag_indices_from(H)] = diag
    if DEBUG and hermitian:
        assert np.array_equal(H, H.conj().T)
    H.setflags(write=False)
    return HamiltonianMatrix(k, tset, H, diag)


def assemble_shifted(spec: PotentialSpec, k, shift: LatticeIndex, tset: TruncationSet,
                     **kwargs) -> HamiltonianMatrix:
    """The block H^(s)(k + p + alpha*m) for shift = (p, m)."""
    return assemble(spec, np.asarray(k, dtype=float) + dual_vector(shift, spec.freq), tset, **kwargs)


def dump_csv(H: HamiltonianMatrix) -> str:
    """Nonzero entries as ``row,col,re,im`` in row-major canonical order."""
    buf = io.StringIO()
    buf.write("row,col,re,im\n")
    rows, cols = np.nonzero(H.entries)
    for i, j in zip(rows, cols):
        v = complex(H.entries[i, j])
        buf.write(f"{i},{j},{v.real!r},{v.imag!r}\n")
    return buf.getvalue()
