"""Enumerate every noise draw and compare what a server sees.

With q=7 and four one-symbol columns there are 7**4 noise tensors, few
enough to list. A single server's view has the same histogram for the
all-zero coefficients as for a random row, and each view occurs once.
An under-masked variant fails the same check.

    python demos/privacy_check.py
"""
import numpy as np

from pmlc import Params
from pmlc.privacy import UnderMaskedScheme, exhaustive_view_distribution, verify_t_privacy

params = Params(N=4, T=1, S=0, M=4, P=1, L=2, q=7, K=1, E=1, R=0)
C_zero = np.zeros((1, 4), dtype=np.int64)
C_secret = np.array([[5, 1, 0, 3]])

for server in range(params.N):
    a = exhaustive_view_distribution(params, C_zero, [server])
    b = exhaustive_view_distribution(params, C_secret, [server])
    print(f"server {server}: {len(a.histogram)} distinct views, flat={a.is_flat()}, same as secret={a == b}")

weak = Params(N=3, T=2, S=0, M=3, P=1, L=1, q=7, K=1, E=1, R=0)
report = verify_t_privacy(weak, np.zeros((1, 3), dtype=np.int64), np.array([[1, 2, 3]]), [[0, 1]],
                          scheme=UnderMaskedScheme())
print("under-masked scheme, two colluders:", "ok" if report.ok else "leak found")

