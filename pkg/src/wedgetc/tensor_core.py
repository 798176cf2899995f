"""Dense and lazy tensor representations, CP models, unfoldings and norms.

Dense tensors are plain ``numpy.ndarray`` objects stored in row-major order.
An unfolding along mode ``j`` is an ``n_j x m_j`` array whose column index
enumerates the remaining modes with the *smallest* remaining mode varying
fastest::

    col(i_{l != j}) = sum_{l != j} i_l * prod_{t != j, t < l} n_t

All indices in code are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DENSE_CAP",
    "BudgetExceededError",
    "CPModel",
    "IncoherenceReport",
    "random_cp_model",
    "cp_to_dense",
    "cp_entry",
    "cp_entries",
    "unfold",
    "fold",
    "unfolding_entries",
    "mode_product",
    "matrix_norms",
    "incoherence_of_matrix",
    "cp_incoherence_check",
    "incoherence_report",
    "unfolding_svd",
    "col_to_multi",
]

#: default cap on the number of entries a dense tensor may hold
DENSE_CAP = 2**27


class BudgetExceededError(MemoryError):
    """Raised when a dense materialization would exceed the entry cap."""


@dataclass(frozen=True, eq=False)
class CPModel:
    """Rank-``r`` CP tensor ``sum_i w_i x_i^(1) o ... o x_i^(k)``.

    ``factors`` holds one ``n_j x r`` matrix per mode. For symmetric models a
    single matrix is stored and shared by all ``order`` modes.
    """

    factors: tuple
    order: int
    weights: np.ndarray = None
    symmetric: bool = False

    def __post_init__(self):
        factors = tuple(np.asarray(f, dtype=np.float64) for f in self.factors)
        if self.order < 2:
            raise ValueError("order must be >= 2")
        if self.symmetric and len(factors) != 1:
            raise ValueError("symmetric model takes exactly one factor matrix")
        if not self.symmetric and len(factors) != self.order:
            raise ValueError(f"expected {self.order} factor matrices, got {len(factors)}")
        r = factors[0].shape[1]
        if r < 1:
            raise ValueError("rank must be >= 1")
        for f in factors:
            if f.ndim != 2 or f.shape[1] != r or f.shape[0] < 1:
                raise ValueError("factor matrices must be n_j x r with a common r")
            if not np.all(np.isfinite(f)):
                raise ValueError("factor entries must be finite")
        w = np.ones(r) if self.weights is None else np.asarray(self.weights, dtype=np.float64)
        if w.shape != (r,) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be a finite vector of length r")
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "weights", w)

    @classmethod
    def symmetric_from(cls, X, order=3, weights=None):
        return cls(factors=(X,), order=order, weights=weights, symmetric=True)

    @property
    def rank(self) -> int:
        return self.factors[0].shape[1]

    @property
    def shape(self) -> tuple:
        return tuple(self.factor(j).shape[0] for j in range(self.order))

    @property
    def size(self) -> int:
        return int(np.prod(self.shape, dtype=object))

    def factor(self, j: int) -> np.ndarray:
        return self.factors[0] if self.symmetric else self.factors[j]

    def cp_weights(self) -> np.ndarray:
        """lambda_i = |w_i| prod_j ||x_i^(j)||; equals ||x_i||^3 for unit-weight order-3 models."""
        lam = np.abs(self.weights).copy()
        for j in range(self.order):
            lam = lam * np.linalg.norm(self.factor(j), axis=0)
        return lam

    def kappa_cp(self) -> float:
        lam = self.cp_weights()
        return float(lam.max() / lam.min())

    def frobenius_norm(self) -> float:
        """Exact ||T||_F from factor Gram matrices (no materialization)."""
        G = np.outer(self.weights, self.weights)
        for j in range(self.order):
            F = self.factor(j)
            G = G * (F.T @ F)
        return float(np.sqrt(max(G.sum(), 0.0)))

    # -- serialization -------------------------------------------------
    def to_json_dict(self) -> dict:
        return {
            "order": self.order,
            "dims": list(self.shape),
            "rank": self.rank,
            "symmetric": self.symmetric,
            "factors": [f.tolist() for f in self.factors],
            "weights": self.weights.tolist(),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "CPModel":
        model = cls(
            factors=tuple(np.array(f, dtype=np.float64) for f in d["factors"]),
            order=int(d["order"]),
            weights=d.get("weights"),
            symmetric=bool(d["symmetric"]),
        )
        if list(model.shape) != list(d["dims"]) or model.rank != int(d["rank"]):
            raise ValueError("CP model JSON dims/rank disagree with factors")
        return model


def random_cp_model(n, r, order=3, *, rng, symmetric=True, dims=None, normalize=True):
    """CP model with i.i.d. Gaussian factors, columns normalized to unit length."""
    if symmetric:
        X = rng.standard_normal((n, r))
        if normalize:
            X /= np.linalg.norm(X, axis=0)
        return CPModel.symmetric_from(X, order=order)
    dims = tuple(dims) if dims is not None else (n,) * order
    factors = []
    for nj in dims:
        F = rng.standard_normal((nj, r))
        if normalize:
            F /= np.linalg.norm(F, axis=0)
        factors.append(F)
    return CPModel(factors=tuple(factors), order=len(dims))


def _check_cap(count, cap):
    cap = DENSE_CAP if cap is None else cap
    if count > cap:
        raise BudgetExceededError(f"dense tensor of {count} entries exceeds cap of {cap}")


def cp_to_dense(model: CPModel, cap=None) -> np.ndarray:
    _check_cap(model.size, cap)
    T = np.zeros(model.shape)
    for i in range(model.rank):
        term = model.weights[i] * model.factor(0)[:, i]
        for j in range(1, model.order):
            term = np.multiply.outer(term, model.factor(j)[:, i])
        T += term
    return T


def cp_entries(model: CPModel, indices) -> np.ndarray:
    """Vectorized entry evaluation; ``indices`` is a sequence of k index arrays.

    Uses the same summation order as :func:`cp_to_dense`, so results agree
    bit for bit.
    """
    idx = [np.asarray(a, dtype=np.int64) for a in indices]
    if len(idx) != model.order:
        raise ValueError(f"expected {model.order} index arrays")
    for j, a in enumerate(idx):
        if a.size and (a.min() < 0 or a.max() >= model.shape[j]):
            raise IndexError(f"mode-{j} index out of range")
    out = np.zeros(np.broadcast(*idx).shape)
    for i in range(model.rank):
        term = model.weights[i] * model.factor(0)[idx[0], i]
        for j in range(1, model.order):
            term = term * model.factor(j)[idx[j], i]
        out += term
    return out


def cp_entry(model: CPModel, index) -> float:
    if len(index) != model.order:
        raise IndexError("index length must equal the tensor order")
    return float(cp_entries(model, [np.array([i]) for i in index])[0])


def _check_mode(mode, order):
    if not 0 <= mode < order:
        raise ValueError(f"mode {mode} invalid for order-{order} tensor")


def unfold(T, mode: int) -> np.ndarray:
    """Mode-``mode`` unfolding of a dense array or a :class:`CPModel`."""
    if isinstance(T, CPModel):
        T = cp_to_dense(T)
    T = np.asarray(T)
    _check_mode(mode, T.ndim)
    return np.moveaxis(T, mode, 0).reshape(T.shape[mode], -1, order="F")


def fold(M, mode: int, shape) -> np.ndarray:
    shape = tuple(shape)
    _check_mode(mode, len(shape))
    M = np.asarray(M)
    rest = shape[:mode] + shape[mode + 1:]
    if M.shape != (shape[mode], int(np.prod(rest))):
        raise ValueError(f"matrix of shape {M.shape} cannot fold to {shape} along mode {mode}")
    return np.moveaxis(M.reshape((shape[mode],) + rest, order="F"), 0, mode)


def col_to_multi(cols, shape, mode):
    """Decode unfolding column indices into per-mode index arrays (others only)."""
    cols = np.asarray(cols, dtype=np.int64)
    out = []
    for ell, nl in enumerate(shape):
        if ell == mode:
            continue
        out.append(cols % nl)
        cols = cols // nl
    return out


def unfolding_entries(model: CPModel, mode: int, rows, cols) -> np.ndarray:
    """Entries ``unfold_mode(T)[rows, cols]`` evaluated lazily from the factors."""
    _check_mode(mode, model.order)
    others = col_to_multi(cols, model.shape, mode)
    idx = others[:mode] + [np.asarray(rows, dtype=np.int64)] + others[mode:]
    return cp_entries(model, idx)


def mode_product(T, mode: int, u) -> np.ndarray:
    """Contract mode ``mode`` of ``T`` with vector ``u``; the order drops by one."""
    T = np.asarray(T)
    _check_mode(mode, T.ndim)
    u = np.asarray(u)
    if u.shape != (T.shape[mode],):
        raise ValueError(f"vector length {u.shape} does not match mode size {T.shape[mode]}")
    return np.tensordot(T, u, axes=([mode], [0]))


def matrix_norms(M) -> dict:
    M = np.asarray(M, dtype=np.float64)
    if M.size == 0:
        return dict(frobenius=0.0, operator=0.0, max_abs=0.0, two_inf=0.0, inf_two=0.0)
    return dict(
        frobenius=float(np.linalg.norm(M)),
        operator=float(np.linalg.norm(M, 2)),
        max_abs=float(np.abs(M).max()),
        two_inf=float(np.linalg.norm(M, axis=1).max()),
        inf_two=float(np.linalg.norm(M, axis=0).max()),
    )


def _numerical_rank(s, rank_tol):
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.count_nonzero(s > rank_tol * s[0]))


def incoherence_of_matrix(M, rank_tol=1e-10):
    """Smallest (mu1, mu2) making ``M`` (mu1, mu2)-incoherent, with its numerical rank."""
    M = np.asarray(M, dtype=np.float64)
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    r = _numerical_rank(s, rank_tol)
    if r == 0:
        raise ValueError("matrix has numerical rank 0")
    n, m = M.shape
    mu1 = n / r * float(np.max(np.sum(U[:, :r] ** 2, axis=1)))
    mu2 = m / r * float(np.max(np.sum(Vt[:r] ** 2, axis=0)))
    return mu1, mu2, r


def cp_incoherence_check(model: CPModel) -> float:
    """Smallest mu for which both CP-incoherence conditions hold."""
    mu = 0.0
    for j in range(model.order):
        F = model.factor(j)
        n = F.shape[0]
        norms = np.linalg.norm(F, axis=0)
        if np.any(norms == 0):
            raise ValueError(f"zero factor vector in mode {j}")
        mu = max(mu, n * float(np.max(np.abs(F).max(axis=0) ** 2 / norms**2)))
        if model.rank > 1:
            C = np.abs(F.T @ F) / np.outer(norms, norms)
            np.fill_diagonal(C, 0.0)
            mu = max(mu, n * float(C.max()))
        if model.symmetric:
            break
    return mu


def _khatri_rao_rows(model, mode, start, stop):
    """Rows ``start:stop`` of the Khatri-Rao factor matching unfolding columns."""
    others = col_to_multi(np.arange(start, stop), model.shape, mode)
    K = np.ones((stop - start, model.rank))
    ell = 0
    for j in range(model.order):
        if j == mode:
            continue
        K *= model.factor(j)[others[ell]]
        ell += 1
    return K


def unfolding_svd(model: CPModel, mode: int, rank_tol=1e-10, right=True, chunk=1 << 18):
    """Thin SVD of ``unfold_mode(T)`` computed from the factors.

    Returns ``(U, s, V)``; ``V`` is ``None`` when ``right`` is false (its row
    count ``m_j`` may be huge). Unfold = P K^T with P = X^(j) diag(w) and K the
    Khatri-Rao product of the other factors, whose Gram is a Hadamard product.
    """
    _check_mode(mode, model.order)
    P = model.factor(mode) * model.weights
    G = np.ones((model.rank, model.rank))
    for j in range(model.order):
        if j != mode:
            F = model.factor(j)
            G = G * (F.T @ F)
    Qp, Rp = np.linalg.qr(P)
    # AA^T = Qp (Rp G Rp^T) Qp^T
    C = Rp @ G @ Rp.T
    evals, evecs = np.linalg.eigh((C + C.T) / 2)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    s = np.sqrt(np.clip(evals, 0, None))
    r = _numerical_rank(s, rank_tol)
    U = Qp @ evecs[:, :r]
    s = s[:r]
    if not right or r == 0:
        return U, s, None
    # V = A^T U S^-1 = K P^T U S^-1
    W = (P.T @ U) / s
    m = int(np.prod([model.shape[j] for j in range(model.order) if j != mode]))
    V = np.empty((m, r))
    for start in range(0, m, chunk):
        stop = min(m, start + chunk)
        V[start:stop] = _khatri_rao_rows(model, mode, start, stop) @ W
    return U, s, V


@dataclass
class IncoherenceReport:
    mu1: list
    mu2: list
    ranks: list
    mu_cp: float
    bounds_applicable: bool

    def incoherence_bounds_hold(self, order) -> bool:
        return all(m1 <= 2 * self.mu_cp * (1 + 1e-12) for m1 in self.mu1) and all(
            m2 <= 2 * self.mu_cp ** (order - 1) * (1 + 1e-12) for m2 in self.mu2
        )


def incoherence_report(model: CPModel, rank_tol=1e-10) -> IncoherenceReport:
    """Per-mode (mu1, mu2) of each unfolding plus the CP-level mu.

    ``bounds_applicable`` flags whether r*mu <= min_j n_j / 2; models outside
    that range are still reported.
    """
    mu1, mu2, ranks = [], [], []
    for j in range(model.order):
        U, s, V = unfolding_svd(model, j, rank_tol)
        r = len(s)
        if r == 0:
            raise ValueError(f"mode-{j} unfolding has rank 0")
        mu1.append(U.shape[0] / r * float(np.max(np.sum(U**2, axis=1))))
        mu2.append(V.shape[0] / r * float(np.max(np.sum(V**2, axis=1))))
        ranks.append(r)
    mu = cp_incoherence_check(model)
    return IncoherenceReport(mu1, mu2, ranks, mu, model.rank * mu <= min(model.shape) / 2)
