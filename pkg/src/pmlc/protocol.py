"""The private multiple linear computation scheme.

The user wants ``C @ files`` (P combinations of M files of length L) from N
replicated servers while hiding ``C`` from any T colluding servers and
tolerating S silent ones. The hyperparameters trade costs:

* ``E`` splits every file into E pieces (rows of the layout matrix ``W``),
* ``K`` splits the block-diagonal expanded coefficients into K row blocks
  that are packed into one Lagrange polynomial per column,
* ``R`` forces each polynomial to vanish at R server points, so those
  evaluations are neither uploaded nor multiplied by the server.

Typical flow::

    params = Params(N=6, T=1, S=1, M=3, P=3, L=4, q=11, K=3, E=2, R=1)
    queries = generate_queries(params, C, sample_noise(params, rng))
    W = layout(files, params)
    answers = [compute_answer(qn, W, params.q) for qn in queries]
    result = decode(answers[:5], params)
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass, field, fields, replace
from math import gcd
from typing import Iterable, Mapping

import numpy as np
from sympy import isprime

from pmlc.field import (
    EvaluationPoints,
    OpCounter,
    default_modulus,
    default_points,
    matmul_mod,
    to_array,
)
from pmlc.poly import VectorPolynomial, nodes_for

__all__ = [
    "ProtocolError",
    "InvalidParams",
    "Params",
    "validate",
    "advise_E",
    "layout",
    "ExpandedCoefficients",
    "expand_and_partition",
    "zero_index_set",
    "query_indices",
    "sample_noise",
    "QueryPolynomialSet",
    "build_query_polynomials",
    "Query",
    "make_queries",
    "check_query_indices",
    "Answer",
    "compute_answer",
    "DecodedResult",
    "decode",
    "generate_queries",
    "linear_combinations",
]


class ProtocolError(RuntimeError):
    """A protocol run cannot proceed (malformed query, too few answers, ...)."""


class InvalidParams(ValueError):
    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class Params:
    """System parameters (N, T, S, M, P, L), field size q, hyperparameters (K, E, R).

    ``q=None`` picks the default modulus for (N, K, T).
    """

    N: int
    T: int
    S: int
    M: int
    P: int
    L: int
    q: int | None = None
    K: int = 1
    E: int = 1
    R: int = 0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if value is not None and not isinstance(value, (int, np.integer)):
                raise TypeError(f"{f.name} must be an integer, got {value!r}")
            if value is not None:
                object.__setattr__(self, f.name, int(value))
        if self.q is None:
            object.__setattr__(self, "q", default_modulus(self.N, self.K, self.T))

    @property
    def ME(self) -> int:
        return self.M * self.E

    @property
    def width(self) -> int:
        """Length PE/K of each coefficient column slice, query vector and answer row count."""
        return self.P * self.E // self.K

    @property
    def piece_length(self) -> int:
        return self.L // self.E

    @property
    def per_server(self) -> int:
        """ME/N: columns assigned to each residue class mod N."""
        return self.ME // self.N

    @property
    def degree_bound(self) -> int:
        return self.K + self.T + self.R - 1

    @property
    def threshold(self) -> int:
        """Number of answers the decoder waits for."""
        return self.N - self.S

    def with_(self, **changes) -> Params:
        return replace(self, **changes)

    def validate(self) -> list[str]:
        return validate(self)

    def check(self) -> Params:
        violations = validate(self)
        if violations:
            raise InvalidParams(violations)
        return self

    def as_dict(self) -> dict[str, int]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def validate(params: Params) -> list[str]:
    """Every violated constraint, in a fixed order; an empty list means valid."""
    p = params
    out = []
    for name in ("N", "M", "P", "L", "K", "E", "T"):
        if getattr(p, name) < 1:
            out.append(f"{name}={getattr(p, name)} must be >= 1")
    for name in ("S", "R"):
        if getattr(p, name) < 0:
            out.append(f"{name}={getattr(p, name)} must be >= 0")
    if p.S >= p.N:
        out.append(f"S={p.S} must be < N={p.N}")
    if p.K + p.R > p.N - p.S - p.T:
        out.append(f"K+R={p.K + p.R} > N-S-T={p.N - p.S - p.T}")
    if p.E >= 1 and p.L % p.E:
        out.append(f"E does not divide L ({p.E} does not divide {p.L})")
    if p.N >= 1 and p.ME % p.N:
        out.append(f"N does not divide ME ({p.N} does not divide {p.ME})")
    if p.K >= 1 and (p.P * p.E) % p.K:
        out.append(f"K does not divide PE ({p.K} does not divide {p.P * p.E})")
    if p.q < 2 or not isprime(p.q):
        out.append(f"q={p.q} is not prime")
    if p.q < p.N + p.K + p.T:
        out.append(f"q={p.q} < N+K+T={p.N + p.K + p.T}")
    return out


def advise_E(K: int, P: int) -> int:
    """Smallest piece count E with K | P*E."""
    if K < 1 or P < 1:
        raise ValueError("K and P must be positive")
    return K // gcd(K, P)


def layout(files, params: Params) -> np.ndarray:
    """Rearrange the (M, L) files into the (ME, L/E) matrix W.

    Row ``e*M + m`` is piece ``e`` of file ``m``.
    """
    files = to_array(files, params.q)
    if files.shape != (params.M, params.L):
        raise ValueError(f"files must have shape {(params.M, params.L)}, got {files.shape}")
    W = files.reshape(params.M, params.E, params.piece_length).transpose(1, 0, 2)
    W = np.ascontiguousarray(W.reshape(params.ME, params.piece_length))
    W.setflags(write=False)
    return W


def _coefficients(C, params: Params) -> np.ndarray:
    C = to_array(C, params.q)
    if C.shape != (params.P, params.M):
        raise ValueError(f"coefficient matrix must have shape {(params.P, params.M)}, got {C.shape}")
    C.setflags(write=False)
    return C


class ExpandedCoefficients:
    """``diag(C, ..., C)`` (E copies) split into K row blocks of PE/K rows.

    Only ``C`` is stored; columns are produced on demand.
    """

    def __init__(self, C, params: Params):
        self.params = params
        self.C = _coefficients(C, params)
        p = params
        rows = np.arange(p.P * p.E)
        self._row_piece = rows // p.P
        self._row_comb = rows % p.P

    def entry(self, row: int, col: int) -> int:
        p = self.params
        if row // p.P != col // p.M:
            return 0
        return int(self.C[row % p.P, col % p.M])

    def _full_column(self, ell: int) -> np.ndarray:
        p = self.params
        piece, m = divmod(ell, p.M)
        col = np.where(self._row_piece == piece, self.C[self._row_comb, m], 0)
        return col.astype(self.C.dtype)

    def column(self, k: int, ell: int) -> np.ndarray:
        """Column ``ell`` of block ``k``: a vector of length PE/K."""
        w = self.params.width
        return self._full_column(ell)[k * w:(k + 1) * w]

    def columns(self, ell: int) -> np.ndarray:
        """All K block slices of column ``ell`` as a (K, PE/K) array."""
        return self._full_column(ell).reshape(self.params.K, self.params.width)

    def block(self, k: int) -> np.ndarray:
        return np.stack([self.column(k, ell) for ell in range(self.params.ME)], axis=1)

    def dense(self) -> np.ndarray:
        return np.vstack([self.block(k) for k in range(self.params.K)])


def expand_and_partition(C, params: Params) -> ExpandedCoefficients:
    return ExpandedCoefficients(C, params)


def zero_index_set(n: int, params: Params) -> set[int]:
    """Columns whose polynomial is forced to vanish at server ``n``'s point."""
    p = params
    if not 0 <= n < p.N:
        raise ValueError(f"server index {n} outside [0, {p.N})")
    return {(n + r) % p.N + s * p.N for r in range(p.R) for s in range(p.per_server)}


def query_indices(n: int, params: Params) -> list[int]:
    """Columns evaluated for server ``n`` (complement of the zero set), ascending."""
    p = params
    if not 0 <= n < p.N:
        raise ValueError(f"server index {n} outside [0, {p.N})")
    return sorted((n + r) % p.N + s * p.N for r in range(p.R, p.N) for s in range(p.per_server))


def sample_noise(params: Params, rng=None) -> np.ndarray:
    """Uniform masking noise of shape (ME, T, PE/K).

    ``rng`` may be a seed or ``numpy.random.Generator``; ``None`` draws from
    the OS entropy source.
    """
    p = params
    shape = (p.ME, p.T, p.width)
    if rng is None:
        size = int(np.prod(shape))
        return to_array([secrets.randbelow(p.q) for _ in range(size)], p.q).reshape(shape)
    rng = np.random.default_rng(rng)
    if p.q <= 2**63:
        return to_array(rng.integers(0, p.q, size=shape, dtype=np.int64), p.q)
    draws = rng.integers(0, 2**32, size=shape + (2,), dtype=np.uint64).astype(object)
    return to_array(draws[..., 0] * 2**32 + draws[..., 1], p.q)


@dataclass(frozen=True)
class QueryPolynomialSet:
    """The ME query polynomials, plus the conditions each was built from."""

    polys: tuple[VectorPolynomial, ...]
    params: Params
    points: EvaluationPoints
    stacked: np.ndarray = field(repr=False, compare=False)

    def __len__(self):
        return len(self.polys)

    def __getitem__(self, ell: int) -> VectorPolynomial:
        return self.polys[ell]

    def zero_points(self, ell: int) -> list[int]:
        """Server indices at which ``f_ell`` is forced to vanish."""
        N = self.params.N
        return [(ell - r) % N for r in range(self.params.R)]

    def evaluate(self, ells, x: int, counter: OpCounter | None = None) -> np.ndarray:
        """Values ``f_ell(x)`` for each ell in ``ells``, shape (len(ells), PE/K)."""
        q = self.params.q
        sel = self.stacked[list(ells)]
        acc = sel[:, -1].copy()
        for d in range(sel.shape[1] - 2, -1, -1):
            acc = np.mod(acc * x + sel[:, d], q)
        if counter is not None:
            steps = sel.shape[1] - 1
            counter.mul += steps * sel.shape[0] * sel.shape[2]
            counter.add += steps * sel.shape[0] * sel.shape[2]
        return acc


def build_query_polynomials(
    expanded: ExpandedCoefficients,
    noise,
    points: EvaluationPoints | None = None,
    params: Params | None = None,
    counter: OpCounter | None = None,
) -> QueryPolynomialSet:
    """Interpolate one polynomial per column of the expanded coefficients.

    ``f_ell`` takes the K coefficient slices at ``beta_0..beta_{K-1}``, the T
    noise vectors at ``beta_K..beta_{K+T-1}`` and zero at the R points
    ``alpha_{(ell - r) mod N}``. Columns in the same residue class mod N share
    a node set and are interpolated together.
    """
    p = params or expanded.params
    points = points or default_points(p.q, p.N, p.K, p.T)
    points.validate(p.q)
    noise = to_array(noise, p.q)
    if noise.shape != (p.ME, p.T, p.width):
        raise ValueError(f"noise must have shape {(p.ME, p.T, p.width)}, got {noise.shape}")
    w = p.width
    nodes_count = p.K + p.T + p.R
    stacked = np.zeros((p.ME, nodes_count, w), dtype=noise.dtype)
    zeros = np.zeros((p.R, w), dtype=noise.dtype)
    for residue in range(min(p.N, p.ME)):
        ells = list(range(residue, p.ME, p.N))
        xs = list(points.beta) + [points.alpha[(residue - r) % p.N] for r in range(p.R)]
        nodes = nodes_for(tuple(xs), p.q)
        # (nodes, w * len(ells)): each column block is one polynomial's values
        values = np.concatenate(
            [np.vstack([expanded.columns(ell), noise[ell], zeros]) for ell in ells], axis=1
        )
        coeffs = nodes.interpolate(values, counter).coeffs
        stacked[ells] = coeffs.reshape(nodes_count, len(ells), w).transpose(1, 0, 2)
    polys = tuple(VectorPolynomial(stacked[ell], p.q) for ell in range(p.ME))
    stacked.setflags(write=False)
    return QueryPolynomialSet(polys, p, points, stacked)


@dataclass(frozen=True)
class Query:
    """Evaluations sent to one server: column index -> vector of length PE/K.

    ``R`` and ``E`` travel with the query so the server can check the index
    set and pick the matching rows of its layout matrix.
    """

    server_index: int
    entries: Mapping[int, np.ndarray]
    R: int
    E: int

    def __eq__(self, other):
        if not isinstance(other, Query):
            return NotImplemented
        return (
            (self.server_index, self.R, self.E) == (other.server_index, other.R, other.E)
            and list(self.entries) == list(other.entries)
            and all(np.array_equal(self.entries[k], other.entries[k]) for k in self.entries)
        )

    __hash__ = None

    @property
    def symbols(self) -> int:
        return sum(len(v) for v in self.entries.values())

    def matrix(self) -> np.ndarray:
        """Entries stacked in index order, shape (count, PE/K)."""
        return np.stack(list(self.entries.values()))


def make_queries(
    polys: QueryPolynomialSet,
    points: EvaluationPoints | None = None,
    params: Params | None = None,
    counter: OpCounter | None = None,
    servers: Iterable[int] | None = None,
) -> list[Query]:
    """Nonzero evaluations for each server (all N unless ``servers`` is given)."""
    p = params or polys.params
    points = points or polys.points
    out = []
    for n in range(p.N) if servers is None else servers:
        ells = query_indices(n, p)
        values = polys.evaluate(ells, points.alpha[n], counter)
        for row in values:
            row.setflags(write=False)
        out.append(Query(n, dict(zip(ells, values)), p.R, p.E))
    return out


def generate_queries(
    params: Params,
    C,
    noise,
    points: EvaluationPoints | None = None,
    counter: OpCounter | None = None,
    servers: Iterable[int] | None = None,
) -> list[Query]:
    """Expand ``C``, build the query polynomials and evaluate them."""
    polys = build_query_polynomials(expand_and_partition(C, params), noise, points, params, counter)
    return make_queries(polys, polys.points, params, counter, servers)


def check_query_indices(query: Query, N: int, M: int) -> None:
    """Raise ProtocolError unless the query's indices are exactly the expected ones."""
    ME = M * query.E
    if ME % N:
        raise ProtocolError(f"N={N} does not divide ME={ME}")
    expected = sorted(
        (query.server_index + r) % N + s * N for r in range(query.R, N) for s in range(ME // N)
    )
    if sorted(query.entries) != expected:
        raise ProtocolError(
            f"server {query.server_index}: query indices {sorted(query.entries)} != {expected}"
        )


@dataclass(frozen=True)
class Answer:
    server_index: int
    matrix: np.ndarray

    @property
    def symbols(self) -> int:
        return int(self.matrix.size)


def compute_answer(query: Query, W: np.ndarray, q: int, counter: OpCounter | None = None) -> Answer:
    """Sum of outer products ``f_ell(alpha_n) * w_ell`` over the query's entries."""
    W = np.asarray(W)
    ells = list(query.entries)
    if any(not 0 <= ell < W.shape[0] for ell in ells):
        raise ProtocolError(f"query index outside layout rows [0, {W.shape[0]})")
    if not ells:
        raise ProtocolError("empty query")
    F = query.matrix()
    if F.shape[0] and W.shape[0] == 0:
        raise ProtocolError("empty layout matrix")
    A = matmul_mod(F.T, W[ells], q, counter)
    A.setflags(write=False)
    return Answer(query.server_index, A)


@dataclass(frozen=True)
class DecodedResult:
    """The P recovered combinations, shape (P, L)."""

    computations: np.ndarray
    servers_used: tuple[int, ...]
    answer_polynomial: VectorPolynomial | None = field(default=None, repr=False, compare=False)

    def __eq__(self, other):
        if not isinstance(other, DecodedResult):
            return NotImplemented
        return np.array_equal(self.computations, other.computations)

    __hash__ = None


def _answer_map(answers) -> dict[int, Answer]:
    if isinstance(answers, Mapping):
        items = list(answers.items())
    else:
        items = [(a.server_index, a) if isinstance(a, Answer) else tuple(a) for a in answers]
    out: dict[int, Answer] = {}
    for n, a in items:
        if n in out:
            raise ProtocolError(f"duplicate answer from server {n}")
        out[int(n)] = a
    return out


def decode(
    answers,
    params: Params,
    points: EvaluationPoints | None = None,
    subset: Iterable[int] | None = None,
    counter: OpCounter | None = None,
) -> DecodedResult:
    """Recover ``C @ files`` from at least N - S answers.

    The answer polynomial is interpolated from the lowest N - S server
    indices present (or from ``subset``), evaluated at ``beta_0..beta_{K-1}``,
    and the stacked blocks are reassembled piece by piece into P rows.
    """
    p = params
    points = points or default_points(p.q, p.N, p.K, p.T)
    by_server = _answer_map(answers)
    if subset is None:
        if len(by_server) < p.threshold:
            raise ProtocolError(f"need {p.threshold} answers, got {len(by_server)}")
        used = sorted(by_server)[: p.threshold]
    else:
        used = list(subset)
        if len(set(used)) != len(used):
            raise ProtocolError(f"duplicate server indices in subset {used}")
        if len(used) < p.threshold:
            raise ProtocolError(f"subset of {len(used)} servers, need {p.threshold}")
        missing = [n for n in used if n not in by_server]
        if missing:
            raise ProtocolError(f"no answer from servers {missing}")
    shape = (p.width, p.piece_length)
    for n in used:
        if by_server[n].matrix.shape != shape:
            raise ProtocolError(f"answer from server {n} has shape {by_server[n].matrix.shape}, expected {shape}")
    values = np.stack([by_server[n].matrix.reshape(-1) for n in used])
    h = nodes_for(tuple(points.alpha[n] for n in used), p.q).interpolate(values, counter)
    blocks = [h(points.beta[k], counter).reshape(shape) for k in range(p.K)]
    CW = np.vstack(blocks)  # rows e*P + i
    result = CW.reshape(p.E, p.P, p.piece_length).transpose(1, 0, 2).reshape(p.P, p.L)
    result = np.ascontiguousarray(result)
    result.setflags(write=False)
    return DecodedResult(result, tuple(used), h)


def linear_combinations(C, files, q: int) -> np.ndarray:
    """Plain ``C @ files mod q``."""
    return matmul_mod(to_array(C, q), to_array(files, q), q)
