"""CP-factor retrieval and gradient descent for symmetric order-3 tensors.

The objective is the sampled least-squares loss

    F(X) = 1/(6q) * || P_Omega(T - sum_i x_i o x_i o x_i) ||_F^2

over ``X`` in R^{n x r}. Every quantity is evaluated sparsely over the
observed set in O(|Omega| r).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import rng as rngmod
from .sampling import ObservationSet, observed_values
from .tensor_core import CPModel

__all__ = [
    "SampledTensor",
    "RetrievalCandidate",
    "RetrievalError",
    "DivergenceError",
    "GDState",
    "CPErrorEvaluator",
    "default_num_probes",
    "retrieval_candidates",
    "retrieve_cp_factors",
    "gd_objective_value",
    "gd_gradient",
    "gd_run",
    "default_step_size",
]


class RetrievalError(RuntimeError):
    def __init__(self, survivors, needed):
        super().__init__(f"only {survivors} of {needed} retrieval candidates survived pruning")
        self.survivors = survivors
        self.needed = needed


class DivergenceError(RuntimeError):
    def __init__(self, iteration, value, state=None):
        super().__init__(f"gradient descent diverged at iteration {iteration} (F={value:.3e})")
        self.iteration = iteration
        self.state = state


@dataclass
class SampledTensor:
    """Observed entries of an ``n x n x n`` tensor with sampling rate ``q``."""

    n: int
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    values: np.ndarray
    q: float
    _incidence: tuple = field(default=None, repr=False)

    @classmethod
    def from_observations(cls, source, obs: ObservationSet):
        if len(obs.shape) != 3 or len(set(obs.shape)) != 1:
            raise ValueError("gradient descent supports n x n x n tensors only")
        vals = source(obs) if callable(source) else observed_values(source, obs)
        a, b, c = (np.asarray(x, dtype=np.int64) for x in obs.indices)
        return cls(n=obs.shape[0], a=a, b=b, c=c, values=np.asarray(vals, dtype=np.float64), q=obs.q)

    def __len__(self):
        return int(self.values.size)

    def incidence(self):
        """Sparse ``n x |Omega|`` scatter matrices for the three modes."""
        if self._incidence is None:
            N = len(self)
            cols = np.arange(N)
            ones = np.ones(N)
            self._incidence = tuple(
                sp.csr_matrix((ones, (idx, cols)), shape=(self.n, N)) for idx in (self.a, self.b, self.c)
            )
        return self._incidence

    def predict(self, X):
        return np.sum(X[self.a] * X[self.b] * X[self.c], axis=1)


def gd_objective_value(X, data: SampledTensor) -> float:
    if len(data) == 0:
        return 0.0
    res = data.predict(X) - data.values
    return float(res @ res) / (6 * data.q)


def gd_gradient(X, data: SampledTensor) -> np.ndarray:
    """Gradient of the sampled loss.

    With residual ``E = P_Omega(sum_j x_j^{o3} - T)``, column ``i`` is
    ``(1/(3q)) (E x_2 x_i x_3 x_i + E x_1 x_i x_3 x_i + E x_1 x_i x_2 x_i)``.
    """
    X = np.asarray(X, dtype=np.float64)
    if len(data) == 0:
        return np.zeros_like(X)
    Xa, Xb, Xc = X[data.a], X[data.b], X[data.c]
    E = (np.sum(Xa * Xb * Xc, axis=1) - data.values)[:, None]
    Sa, Sb, Sc = data.incidence()
    G = Sa @ (E * Xb * Xc) + Sb @ (E * Xa * Xc) + Sc @ (E * Xa * Xb)
    return G / (3 * data.q)


@dataclass
class RetrievalCandidate:
    tau: int
    theta: np.ndarray
    u: np.ndarray
    lam: float
    gap: float
    sigma: tuple


def default_num_probes(r: int) -> int:
    return max(32, 8 * r * math.ceil(math.log(r) + 1))


def _probe_matrix(data: SampledTensor, theta):
    """``q^{-1} T_obs x_3 theta`` as a dense ``n x n`` matrix."""
    n = data.n
    w = data.values * theta[data.c] / data.q
    return np.bincount(data.a * n + data.b, weights=w, minlength=n * n).reshape(n, n)


def cubic_form(data: SampledTensor, u) -> float:
    """``<q^{-1} T_obs, u o u o u>``."""
    return float(np.sum(data.values * u[data.a] * u[data.b] * u[data.c]) / data.q)


def retrieval_candidates(U_hat, data: SampledTensor, L: int, seed) -> list:
    U_hat = np.asarray(U_hat)
    out = []
    for tau in range(L):
        g = rngmod.stream(seed, rngmod.PROBE, tau).standard_normal(U_hat.shape[0])
        theta = U_hat @ (U_hat.T @ g)
        M = _probe_matrix(data, theta)
        W, s, _ = np.linalg.svd(M)
        u = W[:, 0]
        lam = cubic_form(data, u)
        if lam < 0:
            u, lam = -u, -lam
        s2 = s[1] if s.size > 1 else 0.0
        out.append(RetrievalCandidate(tau, theta, u, lam, float(s[0] - s2), (float(s[0]), float(s2))))
    return out


def prune_candidates(cands, r, threshold=0.5):
    """Greedy selection by descending spectral gap, skipping candidates too
    correlated with an already selected one."""
    order = sorted(range(len(cands)), key=lambda t: -cands[t].gap)
    chosen = []
    for t in order:
        c = cands[t]
        if c.lam <= 0:
            continue
        if all(abs(c.u @ s.u) <= threshold for s in chosen):
            chosen.append(c)
            if len(chosen) == r:
                break
    if len(chosen) < r:
        raise RetrievalError(len(chosen), r)
    return chosen


def retrieve_cp_factors(U_hat, data: SampledTensor, r=None, L=None, seed=0, threshold=0.5):
    """Initial factor matrix ``X0`` (n x r) with columns ``lam^{1/3} u``.

    Returns ``(X0, selected_candidates)``.
    """
    U_hat = U_hat.U if hasattr(U_hat, "U") else np.asarray(U_hat)
    r = U_hat.shape[1] if r is None else r
    L = default_num_probes(r) if L is None else L
    if L < r:
        raise ValueError("need at least r probes")
    chosen = prune_candidates(retrieval_candidates(U_hat, data, L, seed), r, threshold)
    X0 = np.column_stack([np.cbrt(c.lam) * c.u for c in chosen])
    return X0, chosen


def default_step_size(lam_max: float) -> float:
    return 0.125 * lam_max ** (-4.0 / 3.0)


def _kr_self(X):
    """Columns x_i kron x_i (index of the first factor varies fastest)."""
    return (X[:, None, :] * X[None, :, :]).reshape(-1, X.shape[1], order="F")


class CPErrorEvaluator:
    """Relative errors of ``sum_i x_i^{o3}`` against a symmetric order-3 model.

    Small tensors are compared densely through the ``n x n^2`` unfolding; larger
    ones on a fixed random subset of entries.
    """

    def __init__(self, model: CPModel, dense_limit=1 << 21, subset_size=None, seed=0):
        if not (model.symmetric and model.order == 3):
            raise ValueError("error evaluator expects a symmetric order-3 model")
        self.model = model
        X = model.factor(0) * np.cbrt(model.weights)
        n = X.shape[0]
        self.dense = n**3 <= dense_limit
        if self.dense:
            self.T = X @ _kr_self(X).T
        else:
            gen = rngmod.stream(seed, rngmod.EVAL)
            size = subset_size or n * n
            self.idx = tuple(gen.integers(0, n, size=size) for _ in range(3))
            a, b, c = self.idx
            self.T = np.sum(X[a] * X[b] * X[c], axis=1)
        self.norm_f = float(np.linalg.norm(self.T))
        self.norm_inf = float(np.abs(self.T).max())

    def __call__(self, X):
        if self.dense:
            D = X @ _kr_self(X).T - self.T
        else:
            a, b, c = self.idx
            D = np.sum(X[a] * X[b] * X[c], axis=1) - self.T
        return float(np.linalg.norm(D)) / self.norm_f, float(np.abs(D).max()) / self.norm_inf


@dataclass
class GDState:
    X: np.ndarray
    eta: float
    t: int
    F: float
    trace: list
    stop_reason: str = ""

    def column(self, name):
        return np.array([row[name] for row in self.trace])


def gd_run(X0, data: SampledTensor, eta: float, t_max: int = 500, stop_tol: float = 1e-12, evaluator=None):
    """Plain gradient descent ``X <- X - eta grad F(X)``.

    Stops after ``t_max`` steps or when ``||X_{t+1} - X_t||_F / ||X_t||_F``
    drops below ``stop_tol``. Raises :class:`DivergenceError` when ``F`` grows
    beyond ten times its running minimum or becomes non-finite.
    """
    if eta <= 0:
        raise ValueError("step size must be positive")
    X = np.array(X0, dtype=np.float64)
    F = gd_objective_value(X, data)
    trace = []

    def record(t, F, X):
        row = dict(iteration=t, F=F)
        if evaluator is not None:
            row["rel_err_F"], row["rel_err_inf"] = evaluator(X)
        trace.append(row)

    record(0, F, X)
    F_min = F
    # F at X = 0; growth below this scale is rounding noise, not divergence
    F_floor = 1e-12 * float(data.values @ data.values) / (6 * data.q)
    reason = "t_max"
    t = 0
    while t < t_max:
        step = eta * gd_gradient(X, data)
        X_new = X - step
        t += 1
        F = gd_objective_value(X_new, data)
        change = np.linalg.norm(step) / max(np.linalg.norm(X), np.finfo(float).tiny)
        X = X_new
        if not np.isfinite(F) or (F > 10 * F_min and F > F_floor):
            if np.all(np.isfinite(X)):
                record(t, F, X)
            raise DivergenceError(t, F, GDState(X=X, eta=eta, t=t, F=F, trace=trace, stop_reason="diverged"))
        F_min = min(F_min, F)
        record(t, F, X)
        if change < stop_tol:
            reason = "stalled_step"
            break
    return GDState(X=X, eta=eta, t=t, F=F, trace=trace, stop_reason=reason)


@dataclass
class GDResult:
    state: GDState
    X0: np.ndarray
    U_hat: np.ndarray
    samples: dict
    candidates: list


def gd_complete(model: CPModel, p: float, q: float, seed=0, init="wedge", L=None, eta=None,
                t_max=500, stop_tol=1e-12, threshold=0.5, evaluator=None):
    """Subspace initialization, factor retrieval, then gradient descent.

    ``init="wedge"`` estimates the mode-1 subspace from wedges sampled at
    rate ``p``; ``init="uniform"`` uses the hollowed Gram matrix of entries
    sampled at rate ``p``. Retrieval and descent share one uniform sample
    at rate ``q``.
    """
    from .completion import estimate_subspace
    from .sampling import sample_uniform

    if not (model.symmetric and model.order == 3):
        raise ValueError("gradient descent supports symmetric order-3 models only")
    sub_seed = rngmod.derive_seed(seed, rngmod.WEDGE if init == "wedge" else rngmod.INIT_UNIFORM, 0)
    est, init_used = estimate_subspace(model, 0, model.rank, p, sub_seed, init)
    obs = sample_uniform(model.shape, q, rngmod.derive_seed(seed, rngmod.UNIFORM))
    data = SampledTensor.from_observations(model, obs)
    X0, chosen = retrieve_cp_factors(est.U, data, L=L, seed=rngmod.derive_seed(seed, rngmod.PROBE), threshold=threshold)
    if eta is None:
        eta = default_step_size(max(c.lam for c in chosen))
    state = gd_run(X0, data, eta, t_max=t_max, stop_tol=stop_tol, evaluator=evaluator)
    samples = dict(init=init_used, uniform=len(obs), total=init_used + len(obs))
    return GDResult(state=state, X0=X0, U_hat=est.U, samples=samples, candidates=chosen)
