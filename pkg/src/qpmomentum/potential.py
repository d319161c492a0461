"""Quasi-periodic trigonometric-polynomial potentials.

    V(x) = g * sum_{s1, s2} V_{s1,s2} exp(i c <s1 + alpha*s2, x>),  0 < |s1|_1 + |s2|_1 <= Q,

with c = 2*pi in the literal convention and c = 1 in the absorbed one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .quasilattice import Frequency, SchemaError

Key = tuple[tuple[int, int], tuple[int, int]]

CONVENTIONS = {"absorbed": 1.0, "literal": 2.0 * math.pi}


def phase_scale(convention: str) -> float:
    try:
        return CONVENTIONS[convention]
    except KeyError:
        raise ValueError(f"unknown 2*pi convention {convention!r}") from None


def key_order(key: Key) -> int:
    (a, b), (c, d) = key
    return abs(a) + abs(b) + abs(c) + abs(d)


def neg_key(key: Key) -> Key:
    (a, b), (c, d) = key
    return ((-a, -b), (-c, -d))


@dataclass(frozen=True)
class PotentialSpec:
    freq: Frequency
    l: int
    Q: int
    coeffs: dict = field(default_factory=dict)
    coupling: float = 1.0
    real_valued: bool = True

    def __hash__(self):
        return hash((self.freq, self.l, self.Q, self.coupling, self.real_valued,
                     tuple(sorted(self.coeffs.items(), key=lambda kv: kv[0]))))

    @property
    def keys(self) -> list[Key]:
        return sorted(self.coeffs)

    def scaled_items(self) -> list[tuple[Key, complex]]:
        """(key, g*V_key) for nonzero scaled amplitudes, sorted by key."""
        out = []
        for key in self.keys:
            v = self.coupling * complex(self.coeffs[key])
            if v != 0:
                out.append((key, v))
        return out

    @property
    def abs_sum(self) -> float:
        """g * sum |V|: bound on the operator norm of the potential part."""
        return abs(self.coupling) * sum(abs(complex(v)) for v in self.coeffs.values())

    @property
    def reach(self) -> tuple[int, int]:
        """Largest |s1|_inf and |s2|_inf among stored keys."""
        rp = max((max(abs(k[0][0]), abs(k[0][1])) for k in self.coeffs), default=0)
        rm = max((max(abs(k[1][0]), abs(k[1][1])) for k in self.coeffs), default=0)
        return rp, rm

    def is_real_matrix(self) -> bool:
        return all(complex(v).imag == 0 for _, v in self.scaled_items())

    def with_coupling(self, g: float) -> "PotentialSpec":
        return PotentialSpec(self.freq, self.l, self.Q, dict(self.coeffs), float(g), self.real_valued)

    def to_config(self) -> dict:
        return {
            "alpha": self.freq.to_config(),
            "l": self.l,
            "Q": self.Q,
            "coupling": self.coupling,
            "real_valued": self.real_valued,
            "coefficients": [
                {"s1": list(k[0]), "s2": list(k[1]), "re": complex(v).real, "im": complex(v).imag}
                for k, v in sorted(self.coeffs.items())
            ],
        }


_SPEC_FIELDS = {"alpha", "l", "Q", "coupling", "coefficients", "real_valued"}
_COEF_FIELDS = {"s1", "s2", "re", "im"}


def _int_pair(x, what: str) -> tuple[int, int]:
    if (not isinstance(x, list) or len(x) != 2
            or not all(isinstance(v, int) and not isinstance(v, bool) for v in x)):
        raise SchemaError(f"{what} must be a list of two integers, got {x!r}")
    return (x[0], x[1])


def _number(x, what: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise SchemaError(f"{what} must be a number, got {x!r}")
    return float(x)


def from_config(block: dict) -> PotentialSpec:
    """Parse the JSON potential block.

    Schema::

        {"alpha": {"kind": "quadratic", "a": 0, "b": 1, "d": 2}
                  | {"kind": "decimal", "value": 1.4142...},
         "l": 2, "Q": 2, "coupling": 0.05, "real_valued": true,
         "coefficients": [{"s1": [1, 0], "s2": [0, 0], "re": 1.0, "im": 0.0}, ...]}

    ``coupling`` defaults to 1 and ``real_valued`` to true; ``im`` defaults to 0.
    Unknown fields and repeated keys raise ``SchemaError``. Invariants are not
    checked here; see ``validate``.
    """
    if not isinstance(block, dict):
        raise SchemaError("potential block must be an object")
    extra = set(block) - _SPEC_FIELDS
    if extra:
        raise SchemaError(f"unknown field(s) in potential: {sorted(extra)}")
    for req in ("alpha", "l", "Q", "coefficients"):
        if req not in block:
            raise SchemaError(f"potential block is missing {req!r}")
    try:
        freq = Frequency.from_config(block["alpha"])
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"bad alpha block: {exc}") from None
    for name in ("l", "Q"):
        if isinstance(block[name], bool) or not isinstance(block[name], int):
            raise SchemaError(f"{name} must be an integer")
    if not isinstance(block["coefficients"], list):
        raise SchemaError("coefficients must be a list")
    coeffs: dict = {}
    for entry in block["coefficients"]:
        if not isinstance(entry, dict):
            raise SchemaError("coefficient entries must be objects")
        extra = set(entry) - _COEF_FIELDS
        if extra:
            raise SchemaError(f"unknown field(s) in coefficient: {sorted(extra)}")
        key = (_int_pair(entry.get("s1"), "s1"), _int_pair(entry.get("s2"), "s2"))
        if key in coeffs:
            raise SchemaError(f"duplicate coefficient key {key}")
        coeffs[key] = complex(_number(entry.get("re", 0.0), "re"), _number(entry.get("im", 0.0), "im"))
    real_valued = block.get("real_valued", True)
    if not isinstance(real_valued, bool):
        raise SchemaError("real_valued must be a boolean")
    return PotentialSpec(freq, block["l"], block["Q"], coeffs,
                         _number(block.get("coupling", 1.0), "coupling"), real_valued)


def validate(spec: PotentialSpec) -> list[str]:
    """All violated invariants, one message per offending key (empty means valid)."""
    problems = []
    if spec.l < 2:
        problems.append(f"l={spec.l}: polyharmonic order must be >= 2")
    if spec.Q < 1:
        problems.append(f"Q={spec.Q}: frequency cutoff must be >= 1")
    if not math.isfinite(spec.coupling):
        problems.append("coupling must be finite")
    for key in spec.keys:
        order = key_order(key)
        if order == 0:
            problems.append(f"key s1={key[0]}, s2={key[1]}: |s1|+|s2|=0 (constant term excluded)")
        elif order > spec.Q:
            problems.append(f"key s1={key[0]}, s2={key[1]}: cutoff exceeded (|s1|+|s2|={order} > Q={spec.Q})")
        v = complex(spec.coeffs[key])
        if not (math.isfinite(v.real) and math.isfinite(v.imag)):
            problems.append(f"key s1={key[0]}, s2={key[1]}: non-finite amplitude")
    if spec.real_valued:
        for key in spec.keys:
            partner = neg_key(key)
            if partner not in spec.coeffs:
                problems.append(f"key s1={key[0]}, s2={key[1]}: Hermitian partner "
                                f"s1={partner[0]}, s2={partner[1]} missing")
            elif complex(spec.coeffs[partner]) != complex(spec.coeffs[key]).conjugate():
                if key < partner:
                    problems.append(f"key s1={key[0]}, s2={key[1]}: V(-s) != conj(V(s))")
    return problems


def is_hermitian_symmetric(spec: PotentialSpec) -> bool:
    return all(neg_key(k) in spec.coeffs
               and complex(spec.coeffs[neg_key(k)]) == complex(v).conjugate()
               for k, v in spec.coeffs.items())


def coefficient(spec: PotentialSpec, s1, s2) -> complex:
    key = (tuple(int(v) for v in s1), tuple(int(v) for v in s2))
    if key_order(key) == 0 or key_order(key) > spec.Q:
        return 0j
    return complex(spec.coeffs.get(key, 0j))


def frequency_vectors(spec: PotentialSpec, keys: Iterable[Key] | None = None) -> np.ndarray:
    """(K, 2) array of s1 + alpha*s2."""
    keys = spec.keys if keys is None else list(keys)
    alpha = spec.freq.value
    return np.array([[k[0][0] + alpha * k[1][0], k[0][1] + alpha * k[1][1]] for k in keys],
                    dtype=float).reshape(-1, 2)


def evaluate(spec: PotentialSpec, x, convention: str = "literal") -> complex | np.ndarray:
    """V(x) for a point (2,) or a batch (N, 2) of points."""
    c = phase_scale(convention)
    items = spec.scaled_items()
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if not items:
        out = np.zeros(len(pts), dtype=complex)
    else:
        freqs = frequency_vectors(spec, [k for k, _ in items])
        amps = np.array([v for _, v in items])
        out = np.exp(1j * c * (pts @ freqs.T)) @ amps
    return complex(out[0]) if single else out
