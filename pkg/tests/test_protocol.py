import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import EXAMPLE, brute_force_combinations, random_instance
from pmlc.field import FieldError, OpCounter, default_points
from pmlc.poly import interpolate
from pmlc.protocol import (
    Answer,
    InvalidParams,
    Params,
    ProtocolError,
    Query,
    advise_E,
    build_query_polynomials,
    check_query_indices,
    compute_answer,
    decode,
    expand_and_partition,
    generate_queries,
    layout,
    make_queries,
    query_indices,
    sample_noise,
    zero_index_set,
)

# Interpolation table of the worked example, entry by entry:
# (i, m) stands for c_{i,m}, 0 for a literal zero.
EXAMPLE_TABLE = {
    0: [[(0, 0), (1, 0)], [(2, 0), 0], [0, 0]],
    1: [[(0, 1), (1, 1)], [(2, 1), 0], [0, 0]],
    2: [[(0, 2), (1, 2)], [(2, 2), 0], [0, 0]],
    3: [[0, 0], [0, (0, 0)], [(1, 0), (2, 0)]],
    4: [[0, 0], [0, (0, 1)], [(1, 1), (2, 1)]],
    5: [[0, 0], [0, (0, 2)], [(1, 2), (2, 2)]],
}


def symbolic(entry, C):
    return 0 if entry == 0 else int(C[entry])


def run_all(params, C, files, noise_seed=0):
    noise = sample_noise(params, noise_seed)
    queries = generate_queries(params, C, noise)
    W = layout(files, params)
    return queries, [compute_answer(qn, W, params.q) for qn in queries]


class TestValidate:
    def test_example_example_valid(self, example_params):
        assert example_params.validate() == []

    def test_k_plus_r_bound(self, example_params):
        violations = example_params.with_(K=4, R=1).validate()
        assert "K+R=5 > N-S-T=4" in violations

    def test_divisibility(self, example_params):
        violations = example_params.with_(E=3).validate()
        assert any("E does not divide L" in v for v in violations)
        assert any("N does not divide ME" in v for v in violations)
        assert len(violations) == 2

    def test_reports_all(self):
        p = Params(N=4, T=3, S=4, M=3, P=2, L=5, q=4, K=2, E=2, R=1)
        assert len(p.validate()) >= 5
        with pytest.raises(InvalidParams) as exc:
            p.check()
        assert len(exc.value.violations) == len(p.validate())

    def test_small_field(self, example_params):
        assert any("N+K+T" in v for v in example_params.with_(q=7).validate())

    def test_default_q(self):
        p = Params(N=6, T=1, S=1, M=3, P=3, L=4, K=3, E=2, R=1)
        assert p.q == 257 and p.validate() == []


def test_advise_E():
    assert advise_E(3, 3) == 1
    assert advise_E(4, 6) == 2 and (6 * 2) % 4 == 0
    assert advise_E(5, 1) == 5
    for K in range(1, 13):
        for P in range(1, 13):
            E = advise_E(K, P)
            assert (P * E) % K == 0
            assert all((P * e) % K for e in range(1, E))


class TestLayout:
    def test_example_layout(self, example_params):
        files = np.arange(12).reshape(3, 4) % 11  # w^(m)_j = 4m + j
        W = layout(files, example_params)
        expected = [
            [files[0, 0], files[0, 1]],
            [files[1, 0], files[1, 1]],
            [files[2, 0], files[2, 1]],
            [files[0, 2], files[0, 3]],
            [files[1, 2], files[1, 3]],
            [files[2, 2], files[2, 3]],
        ]
        assert W.tolist() == expected

    def test_no_partition(self):
        p = Params(N=3, T=1, S=0, M=3, P=1, L=5, q=17)
        files = np.arange(15).reshape(3, 5)
        assert np.array_equal(layout(files, p), files)

    def test_full_partition(self):
        p = Params(N=2, T=1, S=0, M=1, P=1, L=4, q=11, E=4)
        W = layout([[1, 2, 3, 4]], p)
        assert W.tolist() == [[1], [2], [3], [4]]

    def test_shape_mismatch(self, example_params):
        with pytest.raises(ValueError):
            layout(np.zeros((3, 5), dtype=int), example_params)

    def test_read_only(self, example_params):
        W = layout(np.zeros((3, 4), dtype=int), example_params)
        with pytest.raises(ValueError):
            W[0, 0] = 1


class TestExpanded:
    def test_example_matrix(self, example_params):
        C = np.array([[1, 2, 3], [4, 5, 6], [7, 8, 9]])
        z = [0, 0, 0]
        expected = [
            [1, 2, 3] + z,
            [4, 5, 6] + z,
            [7, 8, 9] + z,
            z + [1, 2, 3],
            z + [4, 5, 6],
            z + [7, 8, 9],
        ]
        ex = expand_and_partition(C, example_params)
        assert ex.dense().tolist() == expected
        # dashed-line partition: blocks of PE/K = 2 rows
        for k in range(3):
            assert ex.block(k).tolist() == expected[2 * k:2 * k + 2]

    def test_single_block(self):
        p = Params(N=3, T=1, S=0, M=3, P=2, L=2, q=11)
        C = [[1, 2, 3], [4, 5, 6]]
        assert expand_and_partition(C, p).dense().tolist() == C

    def test_identity(self):
        p = Params(N=3, T=1, S=0, M=3, P=3, L=2, q=11)
        ex = expand_and_partition(np.eye(3, dtype=int), p)
        assert np.array_equal(ex.dense(), np.eye(3, dtype=int))

    @settings(max_examples=25)
    @given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 3), st.data())
    def test_block_diagonal(self, P, M, E, data):
        K = data.draw(st.sampled_from([k for k in range(1, P * E + 1) if (P * E) % k == 0]))
        p = Params(N=1, T=1, S=0, M=M, P=P, L=E, q=101, K=K, E=E)
        C = np.array(data.draw(st.lists(st.lists(st.integers(0, 100), min_size=M, max_size=M), min_size=P, max_size=P)))
        ex = expand_and_partition(C, p)
        dense = ex.dense()
        assert dense.shape == (P * E, M * E)
        for a, b in itertools.product(range(P * E), range(M * E)):
            want = C[a % P, b % M] if a // P == b // M else 0
            assert dense[a, b] == want == ex.entry(a, b)


class TestIndexSets:
    def test_example_server_zero(self, example_params):
        assert zero_index_set(0, example_params) == {0}
        assert query_indices(0, example_params) == [1, 2, 3, 4, 5]

    def test_example_queries_skip_own_column(self, example_params):
        for n in range(6):
            assert query_indices(n, example_params) == [ell for ell in range(6) if ell != n]

    def test_no_forcing(self, example_params):
        p = example_params.with_(R=0)
        for n in range(p.N):
            assert zero_index_set(n, p) == set()
            assert query_indices(n, p) == list(range(p.ME))

    def test_enumerated_example(self):
        p = Params(N=4, T=1, S=0, M=4, P=1, L=2, q=11, K=1, E=2, R=2)
        expected = {(3 + r) % 4 + 4 * s for r in (0, 1) for s in (0, 1)}
        assert expected == {3, 7, 0, 4}
        assert zero_index_set(3, p) == expected

    def test_partition(self):
        p = Params(N=5, T=1, S=0, M=5, P=1, L=6, q=101, K=1, E=3, R=2)
        for n in range(p.N):
            zeros, sent = zero_index_set(n, p), set(query_indices(n, p))
            assert zeros | sent == set(range(p.ME)) and not zeros & sent
            assert len(sent) == (p.N - p.R) * p.ME // p.N


class TestQueryPolynomials:
    def test_example_table(self, example_params):
        p = example_params
        C = np.array([[1, 2, 3], [4, 5, 6], [7, 8, 9]])
        noise = sample_noise(p, 5)
        polys = build_query_polynomials(expand_and_partition(C, p), noise)
        pts = polys.points
        for ell, rows in EXAMPLE_TABLE.items():
            f = polys[ell]
            assert f.degree_bound == 4
            for k, entry in enumerate(rows):
                assert f(pts.beta[k]).tolist() == [symbolic(e, C) for e in entry]
            assert f(pts.beta[3]).tolist() == noise[ell, 0].tolist()
            assert f(pts.alpha[ell]).tolist() == [0, 0]
            assert polys.zero_points(ell) == [ell]

    def test_constant_case(self):
        p = Params(N=3, T=1, S=0, M=3, P=1, L=1, q=11)
        C = [[4, 4, 4]]
        noise = np.full((3, 1, 1), 4)
        polys = build_query_polynomials(expand_and_partition(C, p), noise)
        for f in polys.polys:
            assert f.degree() == 0

    @settings(max_examples=15, deadline=None)
    @given(st.data())
    def test_defining_conditions(self, data):
        N = data.draw(st.integers(3, 7))
        T = data.draw(st.integers(1, N - 2))
        S = data.draw(st.integers(0, N - T - 1))
        K = data.draw(st.integers(1, N - S - T))
        R = data.draw(st.integers(0, N - S - T - K))
        P = K * data.draw(st.integers(1, 2))
        p = Params(N=N, T=T, S=S, M=N, P=P, L=2, q=101, K=K, E=1, R=R)
        assert p.validate() == []
        C, _ = random_instance(p, data.draw(st.integers(0, 99)))
        ex = expand_and_partition(C, p)
        noise = sample_noise(p, 1)
        polys = build_query_polynomials(ex, noise)
        pts = polys.points
        for ell in range(p.ME):
            f = polys[ell]
            assert f.degree() <= p.degree_bound
            for k in range(K):
                assert f(pts.beta[k]).tolist() == ex.column(k, ell).tolist()
            for t in range(T):
                assert f(pts.beta[K + t]).tolist() == noise[ell, t].tolist()
            for r in range(R):
                assert not f(pts.alpha[(ell - r) % N]).any()
        # zero-forcing soundness
        for n in range(N):
            for ell in zero_index_set(n, p):
                assert not polys[ell](pts.alpha[n]).any()

    def test_noise_shape_checked(self, example_params):
        ex = expand_and_partition(np.ones((3, 3), dtype=int), example_params)
        with pytest.raises(ValueError):
            build_query_polynomials(ex, np.zeros((6, 2, 2), dtype=int))

    def test_coincident_points(self, example_params):
        ex = expand_and_partition(np.ones((3, 3), dtype=int), example_params)
        pts = default_points(11, 6, 3, 1)
        bad = pts._replace(alpha=(0,) + pts.alpha[1:])
        with pytest.raises(FieldError):
            build_query_polynomials(ex, sample_noise(example_params, 0), bad)


class TestQueriesAndAnswers:
    def test_cardinality_and_header(self, example_params):
        queries, _ = run_all(example_params, *random_instance(example_params, 0))
        for n, qn in enumerate(queries):
            assert qn.server_index == n
            assert list(qn.entries) == query_indices(n, example_params)
            assert len(qn.entries) == (6 - 1) * 6 // 6
            assert (qn.R, qn.E) == (1, 2)
            check_query_indices(qn, 6, 3)

    def test_no_suppression_when_r_zero(self, example_params):
        p = example_params.with_(R=0)
        queries, _ = run_all(p, *random_instance(p, 0))
        assert all(len(qn.entries) == p.ME for qn in queries)

    def test_omitted_evaluations_are_zero(self, example_params):
        C, _ = random_instance(example_params, 3)
        polys = build_query_polynomials(expand_and_partition(C, example_params), sample_noise(example_params, 3))
        for n in range(6):
            for ell in zero_index_set(n, example_params):
                assert not polys[ell](polys.points.alpha[n]).any()

    def test_example_answer_expression(self, example_params):
        p = example_params
        C, files = random_instance(p, 11)
        polys = build_query_polynomials(expand_and_partition(C, p), sample_noise(p, 11))
        (q0,) = make_queries(polys, servers=[0])
        W = layout(files, p)
        a0 = compute_answer(q0, W, p.q)
        expected = np.zeros((2, 2), dtype=np.int64)
        for ell in range(1, 6):
            expected = (expected + np.outer(polys[ell](polys.points.alpha[0]), W[ell])) % p.q
        assert np.array_equal(a0.matrix, expected)
        assert a0.matrix.shape == (p.width, p.piece_length)

    def test_zero_storage(self, example_params):
        queries, _ = run_all(example_params, *random_instance(example_params, 0))
        W = np.zeros((6, 2), dtype=np.int64)
        assert not compute_answer(queries[0], W, 11).matrix.any()

    def test_single_entry_outer_product(self):
        qn = Query(0, {0: np.array([1, 0])}, R=0, E=1)
        ans = compute_answer(qn, np.array([[3, 4]]), 11)
        assert ans.matrix.tolist() == [[3, 4], [0, 0]]

    def test_bad_index(self):
        qn = Query(0, {5: np.array([1, 0])}, R=0, E=1)
        with pytest.raises(ProtocolError):
            compute_answer(qn, np.array([[3, 4]]), 11)

    def test_index_mismatch_detected(self, example_params):
        queries, _ = run_all(example_params, *random_instance(example_params, 0))
        entries = dict(queries[0].entries)
        entries[0] = entries.pop(1)
        with pytest.raises(ProtocolError):
            check_query_indices(Query(0, entries, 1, 2), 6, 3)

    def test_answer_multiplies(self, example_params):
        p = example_params
        queries, _ = run_all(p, *random_instance(p, 0))
        counter = OpCounter()
        compute_answer(queries[2], layout(random_instance(p, 0)[1], p), p.q, counter)
        assert counter.mul == (p.N - p.R) * p.ME // p.N * p.width * p.piece_length == 20


class TestDecode:
    def test_example_decoded_blocks(self, example_params):
        p = example_params
        C, files = random_instance(p, 21)
        _, answers = run_all(p, C, files, 21)
        result = decode(answers[:5], p)
        W = layout(files, p).tolist()
        h = result.answer_polynomial
        beta = default_points(p.q, p.N, p.K, p.T).beta

        def comb(coeffs, rows):
            return [sum(c * W[r][j] for c, r in zip(coeffs, rows)) % p.q for j in range(2)]

        c = C.tolist()
        h0 = h(beta[0]).reshape(2, 2).tolist()
        assert h0 == [comb(c[0], [0, 1, 2]), comb(c[1], [0, 1, 2])]
        h1 = h(beta[1]).reshape(2, 2).tolist()
        assert h1 == [comb(c[2], [0, 1, 2]), comb(c[0], [3, 4, 5])]
        h2 = h(beta[2]).reshape(2, 2).tolist()
        assert h2 == [comb(c[1], [3, 4, 5]), comb(c[2], [3, 4, 5])]

    def test_random_instance_matches_oracle(self, example_params):
        C, files = random_instance(example_params, 1)
        _, answers = run_all(example_params, C, files)
        result = decode(answers, example_params)
        assert result.computations.tolist() == brute_force_combinations(C, files, 11)
        assert result.servers_used == (0, 1, 2, 3, 4)

    def test_zero_coefficients(self, example_params):
        _, files = random_instance(example_params, 2)
        _, answers = run_all(example_params, np.zeros((3, 3), dtype=int), files)
        assert not decode(answers, example_params).computations.any()

    def test_too_few_answers(self, example_params):
        _, answers = run_all(example_params, *random_instance(example_params, 0))
        with pytest.raises(ProtocolError):
            decode(answers[:4], example_params)

    def test_duplicate_servers(self, example_params):
        _, answers = run_all(example_params, *random_instance(example_params, 0))
        with pytest.raises(ProtocolError):
            decode(answers[:4] + [answers[0]], example_params)
        with pytest.raises(ProtocolError):
            decode(answers, example_params, subset=[0, 1, 2, 3, 3])

    def test_subset_option(self, example_params):
        C, files = random_instance(example_params, 4)
        _, answers = run_all(example_params, C, files)
        a = decode(answers, example_params, subset=[5, 4, 3, 2, 1])
        b = decode(answers, example_params, subset=[0, 2, 3, 4, 5])
        assert a == b
        with pytest.raises(ProtocolError):
            decode(answers[:5], example_params, subset=[1, 2, 3, 4, 5])

    def test_noise_independence(self, example_params):
        C, files = random_instance(example_params, 9)
        _, a1 = run_all(example_params, C, files, noise_seed=1)
        _, a2 = run_all(example_params, C, files, noise_seed=2)
        assert decode(a1, example_params) == decode(a2, example_params)

    def test_degree_bound_with_extra_points(self):
        p = Params(N=8, T=1, S=3, M=4, P=2, L=4, q=257, K=1, E=2, R=1)
        _, answers = run_all(p, *random_instance(p, 0))
        h = decode(answers, p).answer_polynomial
        assert h.degree_bound == p.N - p.S - 1 > p.degree_bound
        assert not h.coeffs[p.degree_bound + 1:].any()


def small_param_sets():
    out = []
    for N in range(3, 7):
        for T in range(1, N - 1):
            for S in range(0, N - T - 1):
                for K in range(1, N - S - T + 1):
                    R = N - S - T - K
                    for P, M, E, L in ((K, N, 1, 2), (1, N, K, 2 * K)):
                        p = Params(N=N, T=T, S=S, M=M, P=P, L=L, q=101, K=K, E=E, R=R)
                        if not p.validate():
                            out.append(p)
    return out


@pytest.mark.parametrize("params", small_param_sets(), ids=lambda p: f"N{p.N}T{p.T}S{p.S}K{p.K}E{p.E}R{p.R}P{p.P}")
def test_correctness_every_unresponsive_set(params):
    C, files = random_instance(params, params.N * 100 + params.K)
    _, answers = run_all(params, C, files, noise_seed=params.R)
    oracle = brute_force_combinations(C, files, params.q)
    for silent in itertools.combinations(range(params.N), params.S):
        received = [a for a in answers if a.server_index not in silent]
        assert decode(received, params).computations.tolist() == oracle


def test_degenerate_max_collusion():
    p = Params(N=5, T=3, S=1, M=5, P=2, L=3, q=101, K=1, E=1, R=0)
    assert p.validate() == []
    C, files = random_instance(p, 0)
    _, answers = run_all(p, C, files)
    assert decode(answers, p).computations.tolist() == brute_force_combinations(C, files, 101)


def test_answers_as_mapping(example_params):
    C, files = random_instance(example_params, 0)
    _, answers = run_all(example_params, C, files)
    mapping = {a.server_index: a for a in answers[1:]}
    assert decode(mapping, example_params).servers_used == (1, 2, 3, 4, 5)
    with pytest.raises(ProtocolError):
        decode({0: Answer(0, np.zeros((3, 3), dtype=np.int64)), **mapping}, example_params)
