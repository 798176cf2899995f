"""Size of the sampling deviation q^{-1} P_Omega(T) - T measured by the
delocalized spectral norm and by the plain spectral norm."""

import math

from wedgetc import rng
from wedgetc.delta_norm import concentration_probe
from wedgetc.tensor_core import cp_incoherence_check, random_cp_model

n = 30
model = random_cp_model(n, 2, rng=rng.stream(3, rng.MODEL))
delta = math.sqrt(cp_incoherence_check(model) / n)
_, summary = concentration_probe(model, delta, [0.03, 0.1, 0.3], seeds=range(5), restarts=3, iters=60)
print(f"delta = {delta:.3f}")
for q, d, o in zip(summary["q"], summary["median_delta_norm"], summary["median_op_norm"]):
    print(f"  q={q:<5} delta-norm {d:8.4f}   spectral norm {o:8.4f}")
print(f"log-log slope of the delta-norm in q: {summary['slope']:.2f}")
