"""Recover CP factors from a sparse sample: wedge initialization, factor
retrieval, then gradient descent. Prints the error every 25 iterations."""

import math

from wedgetc import rng
from wedgetc.gd import CPErrorEvaluator, gd_complete
from wedgetc.tensor_core import random_cp_model

n, r = 60, 2
model = random_cp_model(n, r, rng=rng.stream(2, rng.MODEL))
p = 8 * r**4 * math.log(n) ** 2 / n**3
q = 8 * r * math.log(n) / n**1.5
res = gd_complete(model, p, q, seed=2, evaluator=CPErrorEvaluator(model))
print(f"p={p:.2e}, q={q:.3f}, entries used: {res.samples['total']} of {n**3}")
for row in res.state.trace[::25]:
    print(f"  iter {row['iteration']:4d}  F={row['F']:.3e}  rel err={row['rel_err_F']:.3e}")
print(f"stopped after {res.state.t} iterations ({res.state.stop_reason}), "
      f"final rel err {res.state.trace[-1]['rel_err_F']:.2e}")
