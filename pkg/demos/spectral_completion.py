"""Complete a symmetric order-3 tensor: wedge-sampled subspace, then a
debiased uniform sample projected onto it along every mode."""

from wedgetc import rng
from wedgetc.completion import SpectralCompletionConfig, spectral_complete_symmetric
from wedgetc.tensor_core import random_cp_model

model = random_cp_model(150, 2, rng=rng.stream(1, rng.MODEL))
for q in (0.002, 0.008, 0.032):
    res = spectral_complete_symmetric(model, SpectralCompletionConfig(rank=2, p=2e-3, q=q, seed=1))
    print(f"q={q:<5} relative error {res.rel_error_exact:.4f}  "
          f"entries: {res.samples['init']} for the subspace + {res.samples['uniform']} uniform")
