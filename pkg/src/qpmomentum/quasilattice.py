"""Index arithmetic on the quasi-periodic dual lattice {p + alpha*m : p, m in Z^2}.

Momenta are measured in units where the shift attached to an index (p, m) is
exactly ``p + alpha*m``; the 2*pi of the spatial exponent is absorbed into the
length scale (see ``synthesis.Convention``).
"""
from __future__ import annotations

import decimal
import io
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np

DEFAULT_MAX_DIM = 2500

_DEC_CTX = decimal.Context(prec=60)


class SchemaError(ValueError):
    """A config block is malformed: unknown field, wrong type, missing entry."""


class TruncationTooLarge(ValueError):
    """Raised when a truncation would exceed the dense-solve dimension cap."""


class LatticeIndex(NamedTuple):
    p: tuple[int, int]
    m: tuple[int, int]

    @classmethod
    def zero(cls) -> "LatticeIndex":
        return cls((0, 0), (0, 0))

    def is_zero(self) -> bool:
        return self.p == (0, 0) and self.m == (0, 0)

    def __add__(self, other):  # type: ignore[override]
        return LatticeIndex((self.p[0] + other.p[0], self.p[1] + other.p[1]),
                            (self.m[0] + other.m[0], self.m[1] + other.m[1]))

    def __neg__(self) -> "LatticeIndex":
        return LatticeIndex((-self.p[0], -self.p[1]), (-self.m[0], -self.m[1]))

    def as_row(self) -> tuple[int, int, int, int]:
        return (self.p[0], self.p[1], self.m[0], self.m[1])


def _is_squarefree(d: int) -> bool:
    if d < 2:
        return False
    f = 2
    while f * f <= d:
        if d % (f * f) == 0:
            return False
        f += 1
    return True


@dataclass(frozen=True)
class Frequency:
    """The irrational frequency alpha.

    ``kind="quadratic"`` stores alpha = a + b*sqrt(d) exactly; ``kind="decimal"``
    stores a float literal and emits a warning, since small-denominator
    diagnostics are then limited by the literal's truncation.
    """

    kind: str
    a: Fraction = Fraction(0)
    b: Fraction = Fraction(0)
    d: int = 0
    literal: float = math.nan
    mu_assumed: float = 2.0

    def __post_init__(self):
        if self.kind == "quadratic":
            object.__setattr__(self, "a", Fraction(self.a))
            object.__setattr__(self, "b", Fraction(self.b))
            if self.b == 0:
                raise ValueError("quadratic frequency needs b != 0 (alpha would be rational)")
            if not _is_squarefree(int(self.d)):
                raise ValueError(f"d={self.d} must be a squarefree integer >= 2")
        elif self.kind == "decimal":
            v = float(self.literal)
            if not math.isfinite(v):
                raise ValueError("alpha must be finite")
            approx = Fraction(v).limit_denominator(1000)
            if abs(float(approx) - v) <= 4e-16 * max(1.0, abs(v)):
                raise ValueError(f"alpha={v!r} is (numerically) the rational {approx}")
            warnings.warn("decimal alpha: small-denominator diagnostics are limited "
                          "by the literal's precision", stacklevel=3)
        else:
            raise ValueError(f"unknown frequency kind {self.kind!r}")
        if not self.mu_assumed >= 2.0:
            raise ValueError("irrationality measure is always >= 2")

    @classmethod
    def quadratic(cls, a, b, d: int, mu_assumed: float = 2.0) -> "Frequency":
        return cls("quadratic", Fraction(a), Fraction(b), int(d), mu_assumed=mu_assumed)

    @classmethod
    def decimal_literal(cls, value: float, mu_assumed: float = 2.0) -> "Frequency":
        return cls("decimal", literal=float(value), mu_assumed=mu_assumed)

    @classmethod
    def sqrt2(cls) -> "Frequency":
        return cls.quadratic(0, 1, 2)

    @property
    def is_exact(self) -> bool:
        return self.kind == "quadratic"

    @property
    def value(self) -> float:
        if self.kind == "decimal":
            return self.literal
        return _quad_to_float(self.a, self.b, self.d)

    def component(self, p: int, m: int) -> float:
        """Correctly rounded value of p + alpha*m."""
        if self.kind == "decimal":
            return p + self.literal * m
        return _quad_to_float(p + self.a * m, self.b * m, self.d)

    def to_config(self) -> dict:
        if self.kind == "decimal":
            return {"kind": "decimal", "value": self.literal}
        return {"kind": "quadratic", "a": _frac_json(self.a), "b": _frac_json(self.b), "d": self.d}

    @classmethod
    def from_config(cls, block: dict) -> "Frequency":
        if not isinstance(block, dict):
            raise SchemaError("alpha block must be an object")
        kind = block.get("kind")
        if kind == "quadratic":
            _reject_unknown(block, {"kind", "a", "b", "d", "mu_assumed"}, "alpha")
            return cls.quadratic(_parse_frac(block.get("a", 0)), _parse_frac(block["b"]),
                                 int(block["d"]), mu_assumed=float(block.get("mu_assumed", 2.0)))
        if kind == "decimal":
            _reject_unknown(block, {"kind", "value", "mu_assumed"}, "alpha")
            return cls.decimal_literal(float(block["value"]),
                                       mu_assumed=float(block.get("mu_assumed", 2.0)))
        raise SchemaError(f"unknown alpha kind {kind!r}")


def _reject_unknown(block: dict, allowed: set, where: str) -> None:
    extra = set(block) - allowed
    if extra:
        raise SchemaError(f"unknown field(s) in {where}: {sorted(extra)}")


def _parse_frac(x) -> Fraction:
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10**12)
    return Fraction(x)


def _frac_json(f: Fraction):
    return f.numerator if f.denominator == 1 else str(f)


def _dec(f: Fraction) -> decimal.Decimal:
    return _DEC_CTX.divide(decimal.Decimal(f.numerator), decimal.Decimal(f.denominator))


def _quad_decimal(x: Fraction, y: Fraction, d: int) -> decimal.Decimal:
    return _DEC_CTX.add(_dec(x), _DEC_CTX.multiply(_dec(y), _DEC_CTX.sqrt(decimal.Decimal(d))))


def _quad_to_float(x: Fraction, y: Fraction, d: int) -> float:
    if y == 0:
        return float(x)
    return float(_quad_decimal(x, y, d))


def _quad_sign(u: Fraction, v: Fraction, d: int) -> int:
    """Exact sign of u + v*sqrt(d)."""
    su = (u > 0) - (u < 0)
    sv = (v > 0) - (v < 0)
    if su == 0 or sv == 0 or su == sv:
        return su or sv
    return su if u * u > d * v * v else (-su if u * u < d * v * v else 0)


@dataclass(frozen=True)
class GrowthSchedule:
    """Box radii per level: R_n = R1 * f_1 * ... * f_{n-1}, optionally capped.

    ``factor`` is either one number used at every level or a sequence of
    per-level factors (the last entry repeats).
    """

    R1: int = 1
    r1: int = 1
    factor: float | tuple = 2
    R_max: int | None = None
    r_max: int | None = None
    max_dim: int = DEFAULT_MAX_DIM

    def __post_init__(self):
        if self.R1 < 1 or self.r1 < 1:
            raise ValueError("R1 and r1 must be >= 1")
        facs = self.factor if isinstance(self.factor, (tuple, list)) else (self.factor,)
        if len(facs) == 0 or any(f < 2 for f in facs):
            raise ValueError("growth factors must be >= 2")
        object.__setattr__(self, "factor",
                           tuple(facs) if isinstance(self.factor, (tuple, list)) else self.factor)

    def _factor(self, i: int) -> float:
        if isinstance(self.factor, tuple):
            return self.factor[min(i, len(self.factor) - 1)]
        return self.factor

    def radii(self, level: int) -> tuple[int, int]:
        if level < 1:
            raise ValueError("level must be >= 1")
        R, r = self.R1, self.r1
        for i in range(level - 1):
            R = int(round(R * self._factor(i)))
            r = int(round(r * self._factor(i)))
        if self.R_max is not None:
            R = min(R, max(self.R_max, self.R1))
        if self.r_max is not None:
            r = min(r, max(self.r_max, self.r1))
        return R, r


@dataclass(frozen=True)
class TruncationSet:
    """The box {(p, m) : |p|_inf <= box_p, |m|_inf <= box_m} in canonical order.

    Canonical order is lexicographic on (m1, m2, p1, p2); ``array`` holds the
    rows as (p1, p2, m1, m2).
    """

    level: int
    box_p: int
    box_m: int
    array: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.box_p < 0 or self.box_m < 0:
            raise ValueError("box radii must be non-negative")
        R, r = self.box_p, self.box_m
        m1, m2, p1, p2 = np.meshgrid(np.arange(-r, r + 1), np.arange(-r, r + 1),
                                     np.arange(-R, R + 1), np.arange(-R, R + 1), indexing="ij")
        arr = np.stack([p1.ravel(), p2.ravel(), m1.ravel(), m2.ravel()], axis=1).astype(np.int64)
        arr.setflags(write=False)
        object.__setattr__(self, "array", arr)

    @classmethod
    def box(cls, R: int, r: int, level: int = 1) -> "TruncationSet":
        return cls(level, R, r)

    def __len__(self) -> int:
        return self.array.shape[0]

    @property
    def shape4(self) -> tuple[int, int, int, int]:
        """Shape of the (m1, m2, p1, p2) grid whose C-order ravel is canonical."""
        nm, np_ = 2 * self.box_m + 1, 2 * self.box_p + 1
        return (nm, nm, np_, np_)

    @property
    def indices(self) -> list[LatticeIndex]:
        return [LatticeIndex((int(a), int(b)), (int(c), int(d))) for a, b, c, d in self.array]

    @property
    def zero_position(self) -> int:
        return len(self) // 2  # the box is symmetric, so the origin sits in the middle

    def contains(self, rows: np.ndarray) -> np.ndarray:
        rows = np.atleast_2d(rows)
        return (np.all(np.abs(rows[:, :2]) <= self.box_p, axis=1)
                & np.all(np.abs(rows[:, 2:]) <= self.box_m, axis=1))

    def positions(self, rows: np.ndarray) -> np.ndarray:
        """Canonical positions of (p1, p2, m1, m2) rows; -1 where outside the box."""
        rows = np.atleast_2d(np.asarray(rows, dtype=np.int64))
        R, r = self.box_p, self.box_m
        nR, nr = 2 * R + 1, 2 * r + 1
        pos = (((rows[:, 2] + r) * nr + (rows[:, 3] + r)) * nR + (rows[:, 0] + R)) * nR + (rows[:, 1] + R)
        return np.where(self.contains(rows), pos, -1)

    def position(self, idx: LatticeIndex) -> int:
        return int(self.positions(np.array([idx.as_row()]))[0])

    def issubset(self, other: "TruncationSet") -> bool:
        return bool(np.all(other.contains(self.array)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("p1,p2,m1,m2\n")
        for row in self.array:
            buf.write(",".join(str(int(v)) for v in row) + "\n")
        return buf.getvalue()


def build_truncation(level: int, schedule: GrowthSchedule | None = None) -> TruncationSet:
    schedule = schedule or GrowthSchedule()
    R, r = schedule.radii(level)
    card = (2 * R + 1) ** 2 * (2 * r + 1) ** 2
    if card > schedule.max_dim:
        raise TruncationTooLarge(f"level {level}: {card} indices exceed the cap {schedule.max_dim}")
    return TruncationSet(level, R, r)


def int_power(x, n: int):
    """x**n by repeated multiplication; vectorized pow may use SIMD code that differs in the last bit."""
    out = x
    for _ in range(n - 1):
        out = out * x
    return out if n >= 1 else x * 0 + 1


def dual_vector(idx: LatticeIndex, freq: Frequency) -> np.ndarray:
    return np.array([freq.component(idx.p[0], idx.m[0]), freq.component(idx.p[1], idx.m[1])])


def dual_vectors(rows: np.ndarray, freq: Frequency) -> np.ndarray:
    """Vectorized p + alpha*m for (N, 4) rows; float alpha, machine accurate."""
    rows = np.atleast_2d(rows)
    alpha = freq.value
    return rows[:, :2].astype(float) + alpha * rows[:, 2:].astype(float)


def _exact_sq_norm(row, freq: Frequency) -> tuple[Fraction, Fraction]:
    """|p + alpha*m|^2 as u + v*sqrt(d) with rational u, v."""
    a, b, d = freq.a, freq.b, freq.d
    u = Fraction(0)
    v = Fraction(0)
    for p, m in ((row[0], row[2]), (row[1], row[3])):
        x, y = p + a * m, b * m
        u += x * x + y * y * d
        v += 2 * x * y
    return u, v


def min_shift_norm(tset: TruncationSet, freq: Frequency) -> tuple[float, LatticeIndex]:
    """Smallest |p + alpha*m| over the nonzero indices of ``tset``.

    Ties are resolved toward the largest (m, p) key in canonical order, so the
    returned representative has m pointing in the positive direction.
    """
    rows = tset.array
    nonzero = np.any(rows != 0, axis=1)
    if not np.any(nonzero):
        raise ValueError("truncation set has no nonzero index")
    rows = rows[nonzero]
    norms = np.hypot(*dual_vectors(rows, freq).T)
    best = norms.min()
    cand = np.flatnonzero(norms <= best * (1 + 1e-9) + 1e-300)
    if not freq.is_exact:
        ties = cand[norms[cand] == best]
        row = rows[ties[-1]]
        return float(best), LatticeIndex((int(row[0]), int(row[1])), (int(row[2]), int(row[3])))
    keyed = [(_exact_sq_norm(rows[i], freq), i) for i in cand]
    (u0, v0), i0 = keyed[0]
    for (u, v), i in keyed[1:]:
        s = _quad_sign(u - u0, v - v0, freq.d)
        if s <= 0:  # strictly smaller, or a tie later in canonical order
            (u0, v0), i0 = (u, v), i
    value = float(_DEC_CTX.sqrt(_quad_decimal(u0, v0, freq.d)))
    row = rows[i0]
    return value, LatticeIndex((int(row[0]), int(row[1])), (int(row[2]), int(row[3])))


def diophantine_report(freq: Frequency, max_box: int) -> list[tuple[int, float]]:
    """Rows (box radius, min |p + alpha*m|) with both boxes equal to the radius."""
    return [(b, min_shift_norm(TruncationSet.box(b, b), freq)[0]) for b in range(1, max_box + 1)]


def fit_decay_constant(rows: Sequence[tuple[int, float]]) -> float:
    """Largest c with min_norm >= c / box across the report rows."""
    return min(v * b for b, v in rows) if rows else math.nan
