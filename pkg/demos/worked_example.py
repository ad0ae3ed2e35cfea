"""Walk through one round of the six-server example by hand.

Three files of four symbols each, three private combinations, one silent
server. Prints the layout, the queries server 0 receives, and the decoded
result next to the direct product.

    python demos/worked_example.py
"""
import numpy as np

from pmlc import Params
from pmlc.protocol import (
    build_query_polynomials,
    compute_answer,
    decode,
    expand_and_partition,
    layout,
    linear_combinations,
    make_queries,
    sample_noise,
)

params = Params(N=6, T=1, S=1, M=3, P=3, L=4, q=11, K=3, E=2, R=1)
rng = np.random.default_rng(7)
C = rng.integers(0, params.q, size=(params.P, params.M))
files = rng.integers(0, params.q, size=(params.M, params.L))

print("coefficients C:\n", C)
print("files:\n", files)

# each file is cut in two; row e*M + m of W is piece e of file m
W = layout(files, params)
print("layout W (6 x 2):\n", W)

expanded = expand_and_partition(C, params)
print("expanded coefficients, 3 blocks of 2 rows:\n", expanded.dense())

noise = sample_noise(params, rng)
polys = build_query_polynomials(expanded, noise)
queries = make_queries(polys)
print("server 0 gets columns", list(queries[0].entries), "(column 0 is forced to zero there)")

answers = [compute_answer(qn, W, params.q) for qn in queries]
silent = 4
received = [a for a in answers if a.server_index != silent]
result = decode(received, params)

print("decoded from servers", result.servers_used)
print(result.computations)
print("direct product matches:", np.array_equal(result.computations, linear_combinations(C, files, params.q)))
