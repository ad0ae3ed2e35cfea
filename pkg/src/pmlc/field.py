"""Prime-field arithmetic and evaluation points.

Scalars are :class:`FieldElement` values bound to a :class:`FieldSpec`.
Bulk data (files, coefficient vectors, answers) lives in numpy integer
arrays whose entries are kept reduced into ``[0, q)``; the helpers at the
bottom of this module do the modular linear algebra on those arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from sympy import isprime, nextprime

__all__ = [
    "FieldError",
    "FieldSpec",
    "FieldElement",
    "EvaluationPoints",
    "OpCounter",
    "add",
    "mul",
    "inv",
    "default_modulus",
    "default_points",
    "symbol_width",
    "to_array",
    "matmul_mod",
    "outer_mod",
]

# int64 is exact as long as a single product fits; above this we fall back
# to Python ints stored in object arrays.
_INT64_MODULUS_LIMIT = 2**31
_INT64_MAX = 2**63 - 1


class FieldError(ValueError):
    """Raised on invalid field operations (mismatched moduli, zero inverse, ...)."""


@dataclass(frozen=True)
class FieldSpec:
    """A prime field F_q."""

    q: int

    def __post_init__(self):
        if not isinstance(self.q, (int, np.integer)) or self.q < 2 or not isprime(int(self.q)):
            raise FieldError(f"modulus {self.q!r} is not prime")
        object.__setattr__(self, "q", int(self.q))

    def __call__(self, value: int) -> FieldElement:
        return FieldElement(int(value) % self.q, self)

    @property
    def zero(self) -> FieldElement:
        return FieldElement(0, self)

    @property
    def one(self) -> FieldElement:
        return FieldElement(1, self)

    @property
    def dtype(self):
        return np.int64 if self.q < _INT64_MODULUS_LIMIT else object

    def elements(self):
        for v in range(self.q):
            yield FieldElement(v, self)


@dataclass(frozen=True)
class FieldElement:
    value: int
    field: FieldSpec = field(repr=False)

    def __post_init__(self):
        if not 0 <= self.value < self.field.q:
            raise FieldError(f"{self.value} not reduced modulo {self.field.q}")

    def _coerce(self, other) -> FieldElement:
        if isinstance(other, FieldElement):
            if other.field.q != self.field.q:
                raise FieldError(
                    f"mismatched moduli {self.field.q} and {other.field.q}"
                )
            return other
        if isinstance(other, (int, np.integer)):
            return self.field(int(other))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return FieldElement((self.value + other.value) % self.field.q, self.field)

    __radd__ = __add__

    def __neg__(self):
        return FieldElement(-self.value % self.field.q, self.field)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return FieldElement((self.value - other.value) % self.field.q, self.field)

    def __rsub__(self, other):
        return -(self - other)

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return FieldElement(self.value * other.value % self.field.q, self.field)

    __rmul__ = __mul__

    def inverse(self) -> FieldElement:
        if self.value == 0:
            raise ZeroDivisionError(f"0 has no inverse modulo {self.field.q}")
        return FieldElement(pow(self.value, -1, self.field.q), self.field)

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self * other.inverse()

    def __pow__(self, exponent: int):
        if exponent < 0:
            return self.inverse() ** -exponent
        return FieldElement(pow(self.value, exponent, self.field.q), self.field)

    def __int__(self):
        return self.value

    def __str__(self):
        return str(self.value)


def add(a: FieldElement, b: FieldElement) -> FieldElement:
    return a + b


def mul(a: FieldElement, b: FieldElement) -> FieldElement:
    return a * b


def inv(a: FieldElement) -> FieldElement:
    return a.inverse()


class EvaluationPoints(NamedTuple):
    """Interpolation nodes ``beta`` (K+T of them) and server points ``alpha`` (N)."""

    beta: tuple[int, ...]
    alpha: tuple[int, ...]

    def validate(self, q: int) -> None:
        values = self.beta + self.alpha
        if len(set(v % q for v in values)) != len(values):
            raise FieldError("evaluation points are not pairwise distinct")
        if any(not 0 <= v < q for v in values):
            raise FieldError("evaluation points must be reduced field elements")


def default_modulus(N: int, K: int, T: int) -> int:
    """Smallest prime >= max(N + K + T, 257)."""
    lower = max(N + K + T, 257)
    return lower if isprime(lower) else int(nextprime(lower))


def default_points(spec: FieldSpec | int, N: int, K: int, T: int) -> EvaluationPoints:
    """Canonical points: ``beta_k = k`` then ``alpha_n = K + T + n``."""
    q = spec.q if isinstance(spec, FieldSpec) else int(spec)
    if q < N + K + T:
        raise FieldError(f"field too small: q={q} < N+K+T={N + K + T}")
    return EvaluationPoints(
        beta=tuple(range(K + T)),
        alpha=tuple(range(K + T, K + T + N)),
    )


def symbol_width(q: int) -> int:
    """Bytes per serialized symbol: the smallest of 1, 2, 4, 8 holding q - 1."""
    for width in (1, 2, 4, 8):
        if q - 1 < 256**width:
            return width
    raise FieldError(f"modulus {q} does not fit in 8 bytes")


@dataclass
class OpCounter:
    """Field multiplication/addition tally, accumulated by the array helpers."""

    mul: int = 0
    add: int = 0

    def __iadd__(self, other: OpCounter):
        self.mul += other.mul
        self.add += other.add
        return self


def to_array(values, q: int) -> np.ndarray:
    """Reduce ``values`` modulo q into a fresh array of the field's dtype."""
    arr = np.asarray(values)
    if q < _INT64_MODULUS_LIMIT and arr.dtype.kind in "iu":
        return np.mod(arr, q).astype(np.int64)
    obj = np.array(values, dtype=object)
    reduced = np.asarray(np.frompyfunc(lambda v: int(v) % q, 1, 1)(obj), dtype=object).reshape(obj.shape)
    return reduced.astype(np.int64) if q < _INT64_MODULUS_LIMIT else reduced


def matmul_mod(a: np.ndarray, b: np.ndarray, q: int, counter: OpCounter | None = None) -> np.ndarray:
    """Exact ``a @ b mod q`` for reduced operands.

    With int64 storage the inner dimension is processed in chunks small
    enough that partial sums cannot overflow.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if counter is not None:
        rows = a.shape[0] if a.ndim > 1 else 1
        inner = a.shape[-1]
        cols = b.shape[-1] if b.ndim > 1 else 1
        counter.mul += rows * inner * cols
        counter.add += rows * max(inner - 1, 0) * cols
    if a.dtype == object or b.dtype == object:
        return np.mod(a.astype(object) @ b.astype(object), q)
    inner = a.shape[-1]
    chunk = max(1, _INT64_MAX // max((q - 1) ** 2, 1))
    if inner <= chunk:
        return np.mod(a @ b, q)
    out = None
    for start in range(0, inner, chunk):
        part = np.mod(a[..., start:start + chunk] @ b[start:start + chunk], q)
        out = part if out is None else np.mod(out + part, q)
    return out


def outer_mod(col: np.ndarray, row: np.ndarray, q: int, counter: OpCounter | None = None) -> np.ndarray:
    if counter is not None:
        counter.mul += col.size * row.size
    return np.mod(np.multiply.outer(col, row), q)
