"""The three evaluation metrics, on inputs small enough to check by hand.

Run:  python3 demos/metrics_tour.py
"""

import warnings

import numpy as np
import scipy.stats

from hiersum import f_score, f_score_multi, kendall_tau, spearman_rho, substream

print("keyshot F between binary frame masks")
print("  precision divides overlap by the truth mask size,")
print("  recall divides it by the generated mask size:")
cases = [
    ("identical", [1, 1, 0, 0], [1, 1, 0, 0]),
    ("disjoint", [1, 1, 0, 0], [0, 0, 1, 1]),
    ("quarter overlap", [1] * 8, [1, 1, 0, 0] + [0] * 4),
    ("generated covers truth", [1, 1, 0, 0], [1, 1, 1, 1]),
]
for label, truth, generated in cases:
    p, r, f = f_score(truth, generated)
    print(f"  {label:24s} P={p:.4f} R={r:.4f} F={f:.4f}")

users = np.array([
    [1, 1, 0, 0, 0, 0],
    [0, 0, 1, 1, 0, 0],
    [1, 0, 0, 0, 0, 1],
])
generated = np.array([1, 1, 0, 0, 0, 0])
print("\nthree users, one generated mask:")
for mode in ("max", "mean"):
    print(f"  f_score_multi mode={mode!r}: {f_score_multi(users, generated, mode):.4f}")

print("\nrank correlations between predicted and human importance")
truth = np.arange(10, dtype=np.float64)
for label, pred in [
    ("same order", truth * 3.0 + 1.0),
    ("reversed", -truth),
    ("one swap", np.array([1.0, 0.0, 2, 3, 4, 5, 6, 7, 8, 9])),
    ("heavy ties", np.array([0.0, 0, 0, 1, 1, 1, 2, 2, 2, 2])),
]:
    tau = kendall_tau(pred, truth)
    rho = spearman_rho(pred, truth)
    print(f"  {label:12s} tau={tau:+.4f}  rho={rho:+.4f}")

# both handle ties the same way scipy does; spot check on random vectors
rng = substream(9, "metrics")
worst_tau = worst_rho = 0.0
for _ in range(50):
    pred = rng.integers(0, 6, size=30).astype(np.float64)
    truth = rng.normal(size=30)
    worst_tau = max(worst_tau, abs(kendall_tau(pred, truth) - scipy.stats.kendalltau(pred, truth).statistic))
    worst_rho = max(worst_rho, abs(spearman_rho(pred, truth) - scipy.stats.spearmanr(pred, truth).statistic))
print(f"\nagreement with scipy over 50 tied random vectors:")
print(f"  max |tau - scipy tau-b| = {worst_tau:.2e}")
print(f"  max |rho - scipy rho|   = {worst_rho:.2e}")

print("\na constant vector has no ranking; both correlations fall back to 0:")
with warnings.catch_warnings(record=True) as caught:
    warnings.simplefilter("always")
    tau = kendall_tau(np.ones(5), np.arange(5))
    rho = spearman_rho(np.ones(5), np.arange(5))
print(f"  tau={tau:.1f} rho={rho:.1f}  (each call warns: {caught[0].message})")
