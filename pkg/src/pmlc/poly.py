"""Vector-valued polynomials over F_q.

A polynomial with vector coefficients is stored as one ``(D + 1, V)`` array,
lowest degree first, so the interpolation weights for a node set are
computed once and applied to all V components together.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from pmlc.field import FieldElement, FieldError, OpCounter, matmul_mod, to_array

__all__ = ["VectorPolynomial", "InterpolationNodes", "nodes_for", "interpolate", "evaluate"]


@dataclass(frozen=True)
class VectorPolynomial:
    coeffs: np.ndarray
    q: int

    def __post_init__(self):
        c = np.asarray(self.coeffs)
        if c.ndim == 1:
            c = c.reshape(-1, 1)
        if c.ndim != 2 or c.shape[0] < 1 or c.shape[1] < 1:
            raise ValueError(f"coefficients must be a non-empty (D+1, V) array, got {c.shape}")
        c = to_array(c, self.q)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def degree_bound(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def width(self) -> int:
        return self.coeffs.shape[1]

    def degree(self) -> int:
        """Actual degree; -1 for the zero polynomial."""
        nonzero = np.flatnonzero(np.any(self.coeffs != 0, axis=1))
        return int(nonzero[-1]) if nonzero.size else -1

    def __call__(self, x, counter: OpCounter | None = None) -> np.ndarray:
        return evaluate(self, x, counter)

    def __eq__(self, other):
        if not isinstance(other, VectorPolynomial) or other.q != self.q:
            return NotImplemented
        if other.width != self.width:
            return False
        n = max(self.coeffs.shape[0], other.coeffs.shape[0])
        return bool(np.array_equal(_pad(self.coeffs, n), _pad(other.coeffs, n)))

    __hash__ = None


def _pad(c: np.ndarray, rows: int) -> np.ndarray:
    if c.shape[0] == rows:
        return c
    out = np.zeros((rows, c.shape[1]), dtype=c.dtype)
    out[: c.shape[0]] = c
    return out


class InterpolationNodes:
    """Precomputed Lagrange data for a fixed set of distinct nodes.

    ``basis`` row i holds the coefficients of the i-th Lagrange basis
    polynomial (barycentric weight already folded in), so interpolation of
    any value array is a single modular matrix product.
    """

    def __init__(self, xs, q: int):
        xs = [int(x) % q for x in xs]
        if not xs:
            raise ValueError("need at least one interpolation node")
        if len(set(xs)) != len(xs):
            raise FieldError(f"duplicate interpolation nodes {xs}")
        self.xs = tuple(xs)
        self.q = q

    def __len__(self):
        return len(self.xs)

    @cached_property
    def weights(self) -> tuple[int, ...]:
        q = self.q
        out = []
        for i, xi in enumerate(self.xs):
            denom = 1
            for j, xj in enumerate(self.xs):
                if j != i:
                    denom = denom * (xi - xj) % q
            out.append(pow(denom, -1, q))
        return tuple(out)

    @cached_property
    def basis(self) -> np.ndarray:
        q = self.q
        n = len(self.xs)
        # master polynomial prod (x - x_j), lowest degree first
        master = [1]
        for xj in self.xs:
            nxt = [0] * (len(master) + 1)
            for d, c in enumerate(master):
                nxt[d + 1] = (nxt[d + 1] + c) % q
                nxt[d] = (nxt[d] - c * xj) % q
            master = nxt
        rows = []
        for xi, wi in zip(self.xs, self.weights):
            # synthetic division of master by (x - xi)
            quotient = [0] * n
            carry = 0
            for d in range(n, 0, -1):
                carry = (master[d] + carry * xi) % q
                quotient[d - 1] = carry
            rows.append([c * wi % q for c in quotient])
        basis = to_array(rows, q)
        basis.setflags(write=False)
        return basis

    def interpolate(self, ys, counter: OpCounter | None = None) -> VectorPolynomial:
        ys = to_array(ys, self.q)
        if ys.ndim == 1:
            ys = ys.reshape(-1, 1)
        if ys.shape[0] != len(self.xs):
            raise ValueError(f"expected {len(self.xs)} values, got {ys.shape[0]}")
        coeffs = matmul_mod(self.basis.T, ys, self.q, counter)
        return VectorPolynomial(coeffs, self.q)


@lru_cache(maxsize=256)
def nodes_for(xs: tuple[int, ...], q: int) -> InterpolationNodes:
    """Shared, cached node data; node sets repeat across polynomials and rounds."""
    return InterpolationNodes(xs, q)


def interpolate(points, q: int, counter: OpCounter | None = None) -> VectorPolynomial:
    """Unique polynomial of degree <= len(points) - 1 through ``points``.

    ``points`` is a sequence of ``(x, y)`` pairs where ``y`` is a scalar or a
    1-D vector; all ``y`` must have the same width.
    """
    points = list(points)
    if not points:
        raise ValueError("need at least one point")
    xs = [int(x) for x, _ in points]
    ys = [np.atleast_1d(np.asarray(_plain(y), dtype=object)) for _, y in points]
    widths = {y.shape for y in ys}
    if len(widths) != 1 or any(y.ndim != 1 for y in ys):
        raise ValueError(f"inconsistent value widths {sorted(widths)}")
    return InterpolationNodes(xs, q).interpolate(np.stack(ys), counter)


def _plain(y):
    if isinstance(y, FieldElement):
        return y.value
    if isinstance(y, (list, tuple)):
        return [v.value if isinstance(v, FieldElement) else v for v in y]
    return y


def evaluate(p: VectorPolynomial, x, counter: OpCounter | None = None) -> np.ndarray:
    """Horner evaluation at a single point; returns a width-V vector."""
    if isinstance(x, FieldElement):
        if x.field.q != p.q:
            raise FieldError(f"point in F_{x.field.q}, polynomial over F_{p.q}")
        x = x.value
    x = int(x) % p.q
    acc = p.coeffs[-1].copy()
    for c in p.coeffs[-2::-1]:
        acc = np.mod(acc * x + c, p.q)
    if counter is not None:
        steps = p.coeffs.shape[0] - 1
        counter.mul += steps * p.width
        counter.add += steps * p.width
    return acc
