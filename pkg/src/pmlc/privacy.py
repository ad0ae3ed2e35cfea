"""Checking that colluding servers learn nothing about the coefficients.

For tiny parameters every possible noise tensor is enumerated and the
queries a coalition would receive are tallied; T-privacy holds exactly when
the resulting view histograms are identical for any two coefficient
matrices. A Monte-Carlo distance covers sizes too large to enumerate.
"""

from __future__ import annotations

import itertools
import json
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from pmlc.field import EvaluationPoints, default_points, to_array
from pmlc.protocol import (
    Params,
    Query,
    build_query_polynomials,
    expand_and_partition,
    generate_queries,
)
from pmlc.wire import encode_query

__all__ = [
    "BudgetExceeded",
    "Scheme",
    "UnderMaskedScheme",
    "ViewDistribution",
    "LeakReport",
    "PrivacyReport",
    "SampledDistance",
    "view_key",
    "exhaustive_view_distribution",
    "verify_t_privacy",
    "sampled_view_distance",
    "noise_to_evaluation_counts",
    "is_bijection",
]

DEFAULT_BUDGET = 10**6


class BudgetExceeded(RuntimeError):
    def __init__(self, required: int, budget: int):
        self.required = required
        self.budget = budget
        super().__init__(f"enumeration of {required} noise tensors exceeds budget {budget}")


class Scheme:
    """How noise is shaped and turned into queries.

    The default is the real protocol; tests subclass it to build weakened
    variants.
    """

    def noise_shape(self, params: Params) -> tuple[int, ...]:
        return (params.ME, params.T, params.width)

    def queries(self, params: Params, C, noise, points: EvaluationPoints, servers) -> list[Query]:
        return generate_queries(params, C, noise, points, servers=servers)


class UnderMaskedScheme(Scheme):
    """Negative control: only T - 1 noise nodes are random, the last is pinned to zero.

    Not private; exists so the verifiers can be shown to catch a leak.
    """

    def noise_shape(self, params: Params) -> tuple[int, ...]:
        return (params.ME, params.T - 1, params.width)

    def queries(self, params: Params, C, noise, points: EvaluationPoints, servers) -> list[Query]:
        noise = np.asarray(noise, dtype=np.int64).reshape(self.noise_shape(params))
        padded = np.concatenate([noise, np.zeros((params.ME, 1, params.width), dtype=np.int64)], axis=1)
        return generate_queries(params, C, padded, points, servers=servers)


def view_key(queries: list[Query], params: Params) -> bytes:
    return b"".join(encode_query(qn, params) for qn in queries)


@dataclass
class ViewDistribution:
    histogram: Counter = field(default_factory=Counter)
    total: int = 0

    def __post_init__(self):
        assert sum(self.histogram.values()) == self.total

    def is_flat(self) -> bool:
        return len(set(self.histogram.values())) <= 1

    def __eq__(self, other):
        if not isinstance(other, ViewDistribution):
            return NotImplemented
        return self.total == other.total and self.histogram == other.histogram

    def merge(self, other: ViewDistribution) -> ViewDistribution:
        return ViewDistribution(self.histogram + other.histogram, self.total + other.total)


def _noise_space(params: Params, scheme: Scheme, budget: int):
    shape = scheme.noise_shape(params)
    dims = int(np.prod(shape))
    required = params.q**dims
    if required > budget:
        raise BudgetExceeded(required, budget)
    return shape, dims, required


def exhaustive_view_distribution(
    params: Params,
    C,
    coalition,
    *,
    budget: int = DEFAULT_BUDGET,
    points: EvaluationPoints | None = None,
    scheme: Scheme | None = None,
) -> ViewDistribution:
    """Histogram of the coalition's joint query view over every noise tensor."""
    params.check()
    scheme = scheme or Scheme()
    coalition = sorted(set(coalition))
    points = points or default_points(params.q, params.N, params.K, params.T)
    shape, dims, required = _noise_space(params, scheme, budget)
    if not coalition:
        return ViewDistribution(Counter({b"": required}), required)
    hist = Counter()
    for values in itertools.product(range(params.q), repeat=dims):
        noise = np.array(values, dtype=np.int64).reshape(shape)
        hist[view_key(scheme.queries(params, C, noise, points, coalition), params)] += 1
    return ViewDistribution(hist, required)


@dataclass
class LeakReport:
    coalition: list[int]
    view: str
    count_c1: int
    count_c2: int


@dataclass
class PrivacyReport:
    ok: bool
    coalitions_checked: list[list[int]]
    leaks: list[LeakReport] = field(default_factory=list)
    oversized: bool = False

    def to_json(self) -> str:
        return json.dumps(
            {
                "ok": self.ok,
                "coalitions_checked": self.coalitions_checked,
                "oversized": self.oversized,
                "leaks": [vars(leak) for leak in self.leaks],
            },
            indent=2,
            sort_keys=True,
        ) + "\n"


def verify_t_privacy(
    params: Params,
    C1,
    C2,
    coalitions,
    *,
    budget: int = DEFAULT_BUDGET,
    points: EvaluationPoints | None = None,
    scheme: Scheme | None = None,
    allow_oversized: bool = False,
) -> PrivacyReport:
    """Compare exhaustive view distributions under ``C1`` and ``C2``.

    Only the first differing view per coalition is reported. Coalitions
    larger than T are rejected unless ``allow_oversized``, since nothing is
    claimed for them.
    """
    coalitions = [sorted(set(c)) for c in coalitions]
    oversized = any(len(c) > params.T for c in coalitions)
    if oversized and not allow_oversized:
        raise ValueError(f"coalition larger than T={params.T}")
    leaks = []
    for coalition in coalitions:
        d1 = exhaustive_view_distribution(params, C1, coalition, budget=budget, points=points, scheme=scheme)
        d2 = exhaustive_view_distribution(params, C2, coalition, budget=budget, points=points, scheme=scheme)
        if d1 == d2:
            continue
        for key in sorted(set(d1.histogram) | set(d2.histogram)):
            if d1.histogram[key] != d2.histogram[key]:
                leaks.append(LeakReport(coalition, key.hex(), d1.histogram[key], d2.histogram[key]))
                break
    return PrivacyReport(not leaks, coalitions, leaks, oversized)


@dataclass
class SampledDistance:
    """Empirical total-variation distance and its permutation null.

    Even identical distributions give a positive empirical distance; the
    bound is the null mean plus three null standard deviations.
    """

    estimate: float
    samples: int
    null_mean: float
    null_std: float

    @property
    def bound(self) -> float:
        return self.null_mean + 3 * self.null_std

    @property
    def consistent_with_zero(self) -> bool:
        return self.estimate <= self.bound


def _tv(a, b, n: int) -> float:
    ca, cb = Counter(a), Counter(b)
    return sum(abs(ca[k] - cb[k]) for k in ca.keys() | cb.keys()) / (2 * n)


def sampled_view_distance(
    params: Params,
    C1,
    C2,
    coalition,
    samples: int,
    *,
    seed=None,
    permutations: int = 50,
    points: EvaluationPoints | None = None,
    scheme: Scheme | None = None,
) -> SampledDistance:
    if samples < 1:
        raise ValueError("samples must be >= 1")
    params.check()
    scheme = scheme or Scheme()
    coalition = sorted(set(coalition))
    points = points or default_points(params.q, params.N, params.K, params.T)
    shape = scheme.noise_shape(params)
    rng = np.random.default_rng(seed)

    def draw(C):
        return [
            view_key(
                scheme.queries(params, C, rng.integers(0, params.q, size=shape), points, coalition),
                params,
            )
            for _ in range(samples)
        ]

    v1, v2 = draw(C1), draw(C2)
    pooled = np.array(v1 + v2, dtype=object)
    null = []
    for _ in range(permutations):
        perm = rng.permutation(pooled)
        null.append(_tv(perm[:samples], perm[samples:], samples))
    return SampledDistance(_tv(v1, v2, samples), samples, float(np.mean(null)), float(np.std(null)))


def noise_to_evaluation_counts(
    params: Params,
    C,
    ell: int,
    coalition,
    component: int = 0,
    *,
    background_noise=None,
    points: EvaluationPoints | None = None,
) -> Counter:
    """Tally of coalition evaluations of one scalar component of ``f_ell``.

    All ``q**T`` values of the T noise symbols feeding that component are
    enumerated; the rest of the noise tensor stays at ``background_noise``
    (zeros by default).
    """
    params.check()
    points = points or default_points(params.q, params.N, params.K, params.T)
    coalition = sorted(set(coalition))
    expanded = expand_and_partition(C, params)
    base = np.zeros((params.ME, params.T, params.width), dtype=np.int64)
    if background_noise is not None:
        base = to_array(background_noise, params.q).copy()
    counts = Counter()
    for values in itertools.product(range(params.q), repeat=params.T):
        noise = base.copy()
        noise[ell, :, component] = values
        polys = build_query_polynomials(expanded, noise, points, params)
        f = polys[ell]
        counts[tuple(int(f(points.alpha[n])[component]) for n in coalition)] += 1
    return counts


def is_bijection(counts: Counter, q: int, T: int) -> bool:
    return len(counts) == q**T and all(c == 1 for c in counts.values())
