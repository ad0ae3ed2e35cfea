"""How K, E and R move upload and download cost.

Sweeps the hyperparameters for a fixed system and prints measured costs,
which always equal the closed forms. Larger K shrinks download, R trims
upload, and E is the price paid to keep K | PE.

    python demos/cost_tradeoff.py
"""
from pmlc import Params
from pmlc.metrics import reconcile
from pmlc.simulator import sweep

base = Params(N=8, T=2, S=1, M=8, P=2, L=12, q=257)
room = base.N - base.S - base.T
grid = [(K, None, R) for K in range(1, room + 1) for R in range(0, room - K + 1)]

print(f"{'K':>2} {'E':>2} {'R':>2} {'upload':>7} {'download':>9} {'server mults':>13}")
for report in sweep(base, grid, seed=1):
    p = report.params
    if report.status != "ok":
        print(f"{p.K:>2} {p.E:>2} {p.R:>2}  skipped: {'; '.join(report.violations)}")
        continue
    assert not reconcile(report)
    print(f"{p.K:>2} {p.E:>2} {p.R:>2} {report.upload_symbols:>7} {report.download_symbols:>9} "
          f"{report.answer_mul_count:>13}")

# single-combination case with K = E = N - S - T: download (N-S)L/(N-S-T)
plc = Params(N=6, T=1, S=1, M=3, P=1, L=16, K=4, E=4, R=0)
(report,) = sweep(plc, [(4, 4, 0)], seed=1)
print("\nP=1, K=E=4: download", report.download_symbols, "symbols for L =", plc.L)
