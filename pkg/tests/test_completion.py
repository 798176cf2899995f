import numpy as np
import pytest

from wedgetc import rng as rngmod
from wedgetc.completion import (
    RankError,
    SpectralCompletionConfig,
    TuckerEstimate,
    estimate_subspace,
    matched_uniform_rate,
    multilinear_project,
    spectral_complete_asymmetric,
    spectral_complete_symmetric,
)
from wedgetc.sampling import sample_uniform, sample_wedges
from wedgetc.tensor_core import cp_to_dense, random_cp_model, unfold


def sym_model(n, r, seed, order=3):
    return random_cp_model(n, r, order=order, rng=rngmod.stream(seed, rngmod.MODEL))


@pytest.mark.parametrize("order,n", [(3, 15), (4, 8)])
def test_exact_at_full_sampling(order, n):
    model = sym_model(n, 2, 0, order)
    cfg = SpectralCompletionConfig(rank=2, p=1.0, q=1.0, seed=1)
    for complete in (spectral_complete_symmetric, spectral_complete_asymmetric):
        res = complete(model, cfg)
        assert res.rel_error < 1e-10 and res.error_path == "full"


def test_exact_asymmetric_rectangular():
    model = random_cp_model(0, 3, rng=rngmod.stream(2), symmetric=False, dims=(6, 7, 8))
    res = spectral_complete_asymmetric(model, SpectralCompletionConfig(rank=3, p=1.0, q=1.0))
    assert res.rel_error < 1e-10
    with pytest.raises(ValueError):
        spectral_complete_symmetric(model, SpectralCompletionConfig(rank=3, p=1.0, q=1.0))


def test_full_q_error_is_projection_error():
    model = sym_model(20, 2, 3)
    res = spectral_complete_symmetric(model, SpectralCompletionConfig(rank=2, p=2e-3, q=1.0, seed=4))
    T = cp_to_dense(model)
    P = res.subspaces[0].projector()
    direct = np.linalg.norm(T - multilinear_project(T, [P, P, P])) / np.linalg.norm(T)
    assert res.rel_error == pytest.approx(direct, rel=1e-10)
    assert res.rel_error_exact == pytest.approx(direct, rel=1e-6)


def test_shared_seeds_reproduce_symmetric_result():
    model = sym_model(15, 2, 5)
    cfg = SpectralCompletionConfig(rank=2, p=0.01, q=0.3, seed=6)
    sym = spectral_complete_symmetric(model, cfg)
    asym = spectral_complete_asymmetric(model, SpectralCompletionConfig(rank=2, p=0.01, q=0.3, seed=6, shared_wedge_seed=True))
    np.testing.assert_allclose(asym.estimate.to_dense(), sym.estimate.to_dense(), atol=1e-12)
    assert asym.rel_error == pytest.approx(sym.rel_error, rel=1e-12)
    independent = spectral_complete_asymmetric(model, cfg)
    assert independent.samples["init"] > sym.samples["init"]


def test_asymmetric_moderate_rates():
    errs = []
    for s in range(10):
        model = random_cp_model(0, 2, rng=rngmod.stream(s), symmetric=False, dims=(20, 30, 40))
        errs.append(spectral_complete_asymmetric(model, SpectralCompletionConfig(rank=2, p=0.3, q=0.5, seed=s)).rel_error)
    assert np.median(errs) < 0.1


def test_projection_idempotent_and_low_rank():
    model = sym_model(12, 2, 7)
    res = spectral_complete_symmetric(model, SpectralCompletionConfig(rank=2, p=0.02, q=0.4, seed=8))
    That = res.estimate.to_dense()
    P = res.subspaces[0].projector()
    np.testing.assert_allclose(multilinear_project(That, [P, P, P]), That, atol=1e-10 * np.abs(That).max())
    s = np.linalg.svd(unfold(That, 0), compute_uv=False)
    assert np.all(s[2:] < 1e-10 * s[0])


def test_sample_accounting():
    model = sym_model(15, 2, 9)
    cfg = SpectralCompletionConfig(rank=2, p=0.01, q=0.2, seed=10)
    res = spectral_complete_symmetric(model, cfg)
    wedges = sample_wedges(15, 225, 0.01, rngmod.derive_seed(10, rngmod.WEDGE, 0))
    obs = sample_uniform(model.shape, 0.2, rngmod.derive_seed(10, rngmod.UNIFORM))
    assert res.samples["init"] == 2 * len(wedges) - wedges.diagonal_count
    assert res.samples["total"] == res.samples["init"] + len(obs)


def test_sparse_path_and_subset_error():
    model = sym_model(30, 2, 11)
    cfg = SpectralCompletionConfig(rank=2, p=3e-3, q=0.3, seed=12, dense_cap=1000)
    res = spectral_complete_symmetric(model, cfg)
    dense = spectral_complete_symmetric(model, SpectralCompletionConfig(rank=2, p=3e-3, q=0.3, seed=12))
    assert res.error_path == "subset" and dense.error_path == "full"
    np.testing.assert_allclose(res.estimate.core, dense.estimate.core, atol=1e-10)
    assert res.rel_error == pytest.approx(dense.rel_error, rel=0.25)
    assert res.rel_error_exact == pytest.approx(dense.rel_error, rel=1e-6)


def test_tucker_entries_match_dense(gen):
    bases = [np.linalg.qr(gen.standard_normal((n, 2)))[0] for n in (4, 5, 6)]
    est = TuckerEstimate(core=gen.standard_normal((2, 2, 2)), bases=bases)
    D = est.to_dense()
    idx = [gen.integers(0, n, 30) for n in (4, 5, 6)]
    np.testing.assert_allclose(est.entries(idx), D[tuple(idx)], atol=1e-13)
    assert est.frobenius_norm() == pytest.approx(np.linalg.norm(D))


def test_error_decreases_with_q():
    n, r, p = 30, 2, 16 * np.log(30) / 30**3 * 64
    worse = 0
    for s in range(20):
        model = sym_model(n, r, 100 + s)
        lo = spectral_complete_symmetric(model, SpectralCompletionConfig(rank=r, p=p, q=0.02, seed=s)).rel_error
        hi = spectral_complete_symmetric(model, SpectralCompletionConfig(rank=r, p=p, q=0.08, seed=s)).rel_error
        worse += lo >= hi
    # one-sided sign test at the 5% level: P(Bin(20, 1/2) >= 15) < 0.05
    assert worse >= 15


def test_rank_and_config_errors():
    with pytest.raises(RankError):
        estimate_subspace(sym_model(3, 1, 0), 0, 4, 0.5, 0)
    for bad in (dict(rank=0, p=0.1, q=0.1), dict(rank=1, p=0.0, q=0.1), dict(rank=1, p=0.1, q=2.0),
                dict(rank=1, p=0.1, q=0.1, init="bogus")):
        with pytest.raises(ValueError):
            SpectralCompletionConfig(**bad)


def test_matched_uniform_rate():
    assert matched_uniform_rate(100, 10000, 1e-6) == pytest.approx(1e-4)
    assert matched_uniform_rate(100, 10000, 0.5) == 1.0
