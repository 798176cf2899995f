"""Estimate the column space of a tensor unfolding from wedges versus from
uniformly sampled entries, at the same expected number of observed entries."""

import math

from wedgetc import rng
from wedgetc.completion import estimate_subspace
from wedgetc.harness import budget_rates
from wedgetc.subspace import procrustes_align
from wedgetc.tensor_core import random_cp_model, unfolding_svd

n, r = 200, 3
model = random_cp_model(n, r, rng=rng.stream(0, rng.MODEL))
U = unfolding_svd(model, 0, right=False)[0][:, :r]

print(f"n={n}, r={r}: spectral-norm error of the aligned basis")
for s in (1.9, 1.7, 1.5):
    p_w, p_u = budget_rates(n, s, c=8.0)
    budget = 8.0 * math.log(n) * n ** (3 - s)
    line = [f"budget ~{budget:9.0f} entries"]
    for scheme, rate in (("wedge", p_w), ("uniform", p_u)):
        est, used = estimate_subspace(model, 0, r, rate, seed=rng.derive_seed(0, rng.WEDGE), init=scheme)
        line.append(f"{scheme}: {procrustes_align(est.U, U).op_err:.3f} ({used} entries)")
    print("  " + " | ".join(line))
