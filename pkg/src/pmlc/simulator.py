"""In-process orchestration of one user and N replicated servers.

Messages cross a :class:`Transport` as wire-format bytes, so byte counts in
the transcript are the real encoded sizes. Unresponsive servers simply
never reply; the user decodes from the first N - S replies it holds.
"""

from __future__ import annotations

import queue
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Literal

import numpy as np

from pmlc.field import EvaluationPoints, OpCounter, default_points, to_array
from pmlc.metrics import CostReport
from pmlc.protocol import (
    Answer,
    DecodedResult,
    Params,
    ProtocolError,
    Query,
    advise_E,
    build_query_polynomials,
    check_query_indices,
    compute_answer,
    decode,
    expand_and_partition,
    layout,
    linear_combinations,
    make_queries,
    sample_noise,
    validate,
)
from pmlc.wire import decode_answer, decode_query, encode_answer, encode_header, encode_query

__all__ = [
    "ServerNode",
    "Transport",
    "InProcessTransport",
    "RoundConfig",
    "SessionTranscript",
    "run_round",
    "sweep",
    "extract_colluding_view",
]

USER = "user"


class ServerNode:
    """A server holding a read-only copy of the layout matrix."""

    def __init__(self, index: int, storage: np.ndarray, params: Params):
        self.index = index
        self.params = params
        storage = np.asarray(storage)
        if storage.flags.writeable:
            storage = storage.copy()
            storage.setflags(write=False)
        self._storage = storage
        self.counter = OpCounter()

    @property
    def storage(self) -> np.ndarray:
        return self._storage

    def respond(self, query: Query) -> Answer:
        if query.server_index != self.index:
            raise ProtocolError(f"server {self.index} received query for {query.server_index}")
        if (query.R, query.E) != (self.params.R, self.params.E):
            raise ProtocolError("query hyperparameters do not match the session header")
        check_query_indices(query, self.params.N, self.params.M)
        return compute_answer(query, self._storage, self.params.q, self.counter)

    def handle(self, payload: bytes) -> bytes:
        return encode_answer(self.respond(decode_query(payload, self.params)), self.params)


class Transport:
    """Point-to-point byte delivery between named endpoints."""

    def send(self, dest, payload: bytes) -> None:
        raise NotImplementedError

    def receive(self, dest) -> bytes | None:
        """Next pending payload for ``dest``, or None when none is waiting."""
        raise NotImplementedError


class InProcessTransport(Transport):
    def __init__(self):
        self._queues: dict = {}

    def _queue(self, dest) -> queue.SimpleQueue:
        return self._queues.setdefault(dest, queue.SimpleQueue())

    def send(self, dest, payload: bytes) -> None:
        self._queue(dest).put(bytes(payload))

    def receive(self, dest) -> bytes | None:
        try:
            return self._queue(dest).get_nowait()
        except queue.Empty:
            return None


@dataclass(frozen=True)
class RoundConfig:
    """Which servers stay silent in a round.

    ``fixed`` uses ``unresponsive_set`` as given; ``random`` draws S servers
    per round from ``rng_seed`` (the set changes between rounds).
    """

    unresponsive_set: frozenset[int] = frozenset()
    selection_mode: Literal["fixed", "random"] = "fixed"
    rng_seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "unresponsive_set", frozenset(int(n) for n in self.unresponsive_set))
        if self.selection_mode not in ("fixed", "random"):
            raise ValueError(f"unknown selection mode {self.selection_mode!r}")

    @classmethod
    def fixed(cls, servers: Iterable[int] = ()) -> RoundConfig:
        return cls(frozenset(servers), "fixed")

    @classmethod
    def random(cls, seed: int | None = None) -> RoundConfig:
        return cls(frozenset(), "random", seed)

    def validate(self, params: Params) -> None:
        bad = [n for n in self.unresponsive_set if not 0 <= n < params.N]
        if bad:
            raise ValueError(f"unresponsive servers {sorted(bad)} outside [0, {params.N})")
        if len(self.unresponsive_set) > params.S:
            raise ValueError(
                f"{len(self.unresponsive_set)} unresponsive servers exceeds S={params.S}"
            )

    def resolve(self, params: Params, round_index: int = 0) -> frozenset[int]:
        self.validate(params)
        if self.selection_mode == "fixed":
            return self.unresponsive_set
        rng = np.random.default_rng(None if self.rng_seed is None else [self.rng_seed, round_index])
        return frozenset(int(n) for n in rng.choice(params.N, size=params.S, replace=False))


@dataclass
class SessionTranscript:
    params: Params
    unresponsive: frozenset[int]
    queries: list[Query]
    answers: dict[int, Answer]
    header_bytes: int
    query_bytes: dict[int, int]
    answer_bytes: dict[int, int]
    decoded: DecodedResult | None
    decode_ok: bool
    query_ops: OpCounter
    answer_ops: dict[int, OpCounter]
    decode_ops: OpCounter
    timings: dict[str, float] = field(default_factory=dict, compare=False)

    @property
    def used_servers(self) -> tuple[int, ...]:
        return self.decoded.servers_used if self.decoded is not None else ()

    def cost_report(self) -> CostReport:
        used = self.used_servers
        return CostReport(
            params=self.params,
            upload_symbols=sum(qn.symbols for qn in self.queries),
            download_symbols=sum(self.answers[n].symbols for n in used),
            upload_bytes=self.header_bytes * len(self.queries) + sum(self.query_bytes.values()),
            download_bytes=sum(self.answer_bytes[n] for n in used),
            query_mul_count=self.query_ops.mul,
            answer_mul_count=max((c.mul for c in self.answer_ops.values()), default=0),
            decode_mul_count=self.decode_ops.mul,
            decode_ok=self.decode_ok,
        )


def run_round(
    params: Params,
    C,
    files,
    round_config: RoundConfig | None = None,
    *,
    seed=None,
    round_index: int = 0,
    points: EvaluationPoints | None = None,
    transport: Transport | None = None,
    workers: int | None = None,
) -> tuple[DecodedResult, SessionTranscript]:
    """Query, answer and decode once.

    ``seed`` drives the masking noise (OS entropy when None). Raises
    :class:`ProtocolError` if decoding disagrees with the direct product.
    """
    params.check()
    round_config = round_config or RoundConfig()
    silent = round_config.resolve(params, round_index)
    points = points or default_points(params.q, params.N, params.K, params.T)
    transport = transport or InProcessTransport()
    W = layout(files, params)
    nodes = [ServerNode(n, W, params) for n in range(params.N)]
    timings = {}

    t0 = time.perf_counter()
    query_ops = OpCounter()
    noise = sample_noise(params, None if seed is None else np.random.default_rng([seed, round_index]))
    polys = build_query_polynomials(expand_and_partition(C, params), noise, points, params, query_ops)
    queries = make_queries(polys, points, params, query_ops)
    header = encode_header(params)
    query_bytes = {}
    for qn in queries:
        payload = encode_query(qn, params)
        query_bytes[qn.server_index] = len(payload)
        transport.send(qn.server_index, header + payload)
    timings["query"] = time.perf_counter() - t0

    t0 = time.perf_counter()

    def serve(node: ServerNode):
        message = transport.receive(node.index)
        if message is None or node.index in silent:
            return
        transport.send(USER, node.handle(message[len(header):]))

    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            list(pool.map(serve, nodes))
    else:
        for node in nodes:
            serve(node)
    answers, answer_bytes = {}, {}
    while (message := transport.receive(USER)) is not None:
        answer = decode_answer(message, params)
        answers[answer.server_index] = answer
        answer_bytes[answer.server_index] = len(message)
    answers = dict(sorted(answers.items()))
    answer_bytes = dict(sorted(answer_bytes.items()))
    timings["answer"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    decode_ops = OpCounter()
    decoded = decode(answers, params, points, counter=decode_ops)
    expected = linear_combinations(C, files, params.q)
    ok = bool(np.array_equal(decoded.computations, expected))
    timings["decode"] = time.perf_counter() - t0

    transcript = SessionTranscript(
        params=params,
        unresponsive=silent,
        queries=queries,
        answers=answers,
        header_bytes=len(header),
        query_bytes=query_bytes,
        answer_bytes=answer_bytes,
        decoded=decoded,
        decode_ok=ok,
        query_ops=query_ops,
        answer_ops={n: nodes[n].counter for n in answers},
        decode_ops=decode_ops,
        timings=timings,
    )
    if not ok:
        raise ProtocolError("decoded result differs from the direct computation")
    return decoded, transcript


def sweep(
    base: Params,
    grid: Iterable[tuple[int, int | None, int]],
    *,
    seed: int = 0,
    round_config: RoundConfig | None = None,
    auto_q: bool = False,
) -> list[CostReport]:
    """One round per (K, E, R) grid point over fixed (N, T, S, M, P, L).

    ``E=None`` selects :func:`advise_E`. Invalid points come back with
    ``status="invalid"`` and their violations instead of measurements.
    With ``auto_q`` the field is re-chosen per point.
    """
    rng = np.random.default_rng(seed)
    C = to_array(rng.integers(0, base.q, size=(base.P, base.M)), base.q)
    files = to_array(rng.integers(0, base.q, size=(base.M, base.L)), base.q)
    round_config = round_config or RoundConfig.random(seed)
    reports = []
    for i, (K, E, R) in enumerate(grid):
        E = advise_E(K, base.P) if E is None else E
        changes = dict(K=K, E=E, R=R)
        if auto_q:
            changes["q"] = None
        params = base.with_(**changes)
        violations = validate(params)
        if violations:
            reports.append(CostReport(params, status="invalid", violations=violations))
            continue
        if auto_q and params.q != base.q:
            C_i, files_i = np.mod(C, params.q), np.mod(files, params.q)
        else:
            C_i, files_i = C, files
        _, transcript = run_round(params, C_i, files_i, round_config, seed=seed, round_index=i)
        reports.append(transcript.cost_report())
    return reports


def extract_colluding_view(transcript: SessionTranscript, coalition: Iterable[int]) -> list[Query]:
    """The queries a coalition of at most T servers gets to see together."""
    coalition = sorted(set(coalition))
    if len(coalition) > transcript.params.T:
        raise ValueError(f"coalition of {len(coalition)} exceeds T={transcript.params.T}")
    by_server = {qn.server_index: qn for qn in transcript.queries}
    return [by_server[n] for n in coalition]
