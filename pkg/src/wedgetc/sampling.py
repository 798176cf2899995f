"""Wedge sampling, uniform entry sampling and the matrices built from them.

A wedge ``(i, l, j)`` with ``i <= j`` is a length-two path through column
``l`` of an ``n x m`` matrix ``A``; observing it reveals ``A[i, l]`` and
``A[j, l]``. Wedges are encoded as a single integer key
``pair_id(i, j) * m + l`` where ``pair_id`` enumerates the upper triangle
(including the diagonal) row by row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import rng as rngmod
from .tensor_core import CPModel, cp_entries, unfolding_entries

__all__ = [
    "WedgeSampleSet",
    "ObservationSet",
    "WedgeMatrix",
    "sample_wedges",
    "sample_uniform",
    "build_wedge_matrix",
    "debiased_unfolding",
    "observed_values",
    "hollowed_gram",
    "matrix_oracle",
    "cp_unfolding_oracle",
]

_MAX_INDEX = 2**62
_CHUNK = 1 << 20


def _seed_and_rng(seed):
    if isinstance(seed, np.random.Generator):
        return None, seed
    return int(seed), rngmod.stream(seed)


def _distinct_uniform(gen, total: int, count: int) -> np.ndarray:
    """``count`` distinct integers uniform in ``[0, total)``, sorted.

    Drawing with replacement and topping up after deduplication is
    exchangeable, so the resulting set is uniform over all subsets of that
    size.
    """
    if count == 0:
        return np.empty(0, dtype=np.int64)
    if count == total:
        return np.arange(total, dtype=np.int64)
    if 3 * count > total:
        return np.sort(gen.choice(total, size=count, replace=False).astype(np.int64))
    keys = np.unique(gen.integers(0, total, size=count, dtype=np.int64))
    while keys.size < count:
        extra = gen.integers(0, total, size=count - keys.size, dtype=np.int64)
        keys = np.unique(np.concatenate([keys, extra]))
    return keys


def _bernoulli_subset(gen, total: int, rate: float) -> np.ndarray:
    """Keys of an i.i.d. Bernoulli(rate) subset of ``[0, total)``."""
    count = int(gen.binomial(total, rate)) if rate < 1 else total
    return _distinct_uniform(gen, total, count)


def _check_rate(rate, name):
    if not (0 < rate <= 1):
        raise ValueError(f"{name} must lie in (0, 1], got {rate}")


@dataclass
class WedgeSampleSet:
    n: int
    m: int
    p: float
    keys: np.ndarray
    seed: int | None = None

    @property
    def total(self) -> int:
        return self.m * self.n * (self.n + 1) // 2

    def __len__(self):
        return int(self.keys.size)

    def _starts(self):
        i = np.arange(self.n, dtype=np.int64)
        return i * self.n - i * (i - 1) // 2

    def triples(self):
        """Decode keys into arrays ``(i, l, j)`` with ``i <= j`` (0-based)."""
        pid, ell = np.divmod(self.keys, self.m)
        starts = self._starts()
        i = np.searchsorted(starts, pid, side="right") - 1
        j = i + (pid - starts[i])
        return i, ell, j

    @property
    def diagonal_count(self) -> int:
        i, _, j = self.triples()
        return int(np.count_nonzero(i == j))

    @property
    def entry_count(self) -> int:
        """Entry observations: two per wedge, one for diagonal wedges."""
        return 2 * len(self) - self.diagonal_count


@dataclass
class ObservationSet:
    shape: tuple
    q: float
    flat: np.ndarray
    seed: int | None = None

    def __len__(self):
        return int(self.flat.size)

    @property
    def indices(self):
        """Per-mode index arrays (row-major decoding of ``flat``)."""
        return np.unravel_index(self.flat, self.shape)


@dataclass
class WedgeMatrix:
    Z: np.ndarray
    p: float
    seed: int | None = None
    source: str = ""


def sample_wedges(n: int, m: int, p: float, seed) -> WedgeSampleSet:
    """Each wedge of an ``n x m`` matrix kept independently with probability ``p``."""
    _check_rate(p, "p")
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    total = m * n * (n + 1) // 2
    if total >= _MAX_INDEX:
        raise OverflowError(f"wedge set of size {total} overflows 64-bit keys")
    s, gen = _seed_and_rng(seed)
    return WedgeSampleSet(n=n, m=m, p=p, keys=_bernoulli_subset(gen, total, p), seed=s)


def sample_uniform(shape, q: float, seed) -> ObservationSet:
    """Each multi-index of ``shape`` kept independently with probability ``q``."""
    _check_rate(q, "q")
    shape = tuple(int(d) for d in shape)
    total = int(np.prod(shape, dtype=object))
    if total >= _MAX_INDEX:
        raise OverflowError("index space overflows 64-bit keys")
    s, gen = _seed_and_rng(seed)
    return ObservationSet(shape=shape, q=q, flat=_bernoulli_subset(gen, total, q), seed=s)


def matrix_oracle(A):
    A = np.asarray(A)
    return lambda rows, cols: A[rows, cols]


def cp_unfolding_oracle(model: CPModel, mode: int = 0):
    return lambda rows, cols: unfolding_entries(model, mode, rows, cols)


def build_wedge_matrix(oracle, wedges: WedgeSampleSet, source: str = "") -> WedgeMatrix:
    """Debiased wedge matrix ``Z`` with ``E[Z] = A A^T``.

    ``oracle(rows, cols)`` returns the entries ``A[rows, cols]``; it is called
    once for the left endpoints and once for the off-diagonal right endpoints.
    """
    n = wedges.n
    S = np.zeros(n * n)
    for start in range(0, len(wedges), _CHUNK):
        sub = WedgeSampleSet(wedges.n, wedges.m, wedges.p, wedges.keys[start:start + _CHUNK])
        i, ell, j = sub.triples()
        a = np.asarray(oracle(i, ell), dtype=np.float64)
        off = i != j
        b = a.copy()
        if np.any(off):
            b[off] = oracle(j[off], ell[off])
        vals = a * b
        if not np.all(np.isfinite(vals)):
            raise ValueError("entry oracle returned non-finite values")
        S += np.bincount(i * n + j, weights=vals, minlength=n * n)
    S = S.reshape(n, n) / wedges.p
    Z = S + S.T
    np.fill_diagonal(Z, np.diag(S))
    return WedgeMatrix(Z=Z, p=wedges.p, seed=wedges.seed, source=source)


def observed_values(source, obs: ObservationSet) -> np.ndarray:
    """Entries of a dense array or CP model at the observed multi-indices."""
    idx = obs.indices
    if isinstance(source, CPModel):
        return cp_entries(source, idx)
    return np.asarray(source)[idx]


def _unfold_coords(shape, idx, mode):
    cols = np.zeros_like(idx[0])
    stride = 1
    for ell, nl in enumerate(shape):
        if ell == mode:
            continue
        cols = cols + idx[ell] * stride
        stride *= nl
    return idx[mode], cols, stride


def debiased_unfolding(source, obs: ObservationSet, mode: int = 0, sparse: bool = False):
    """``q^{-1} unfold_mode(P_Omega(T))`` as a dense array or CSR matrix."""
    shape = source.shape if isinstance(source, CPModel) else np.shape(source)
    if tuple(shape) != tuple(obs.shape):
        raise ValueError(f"observation shape {obs.shape} does not match tensor shape {tuple(shape)}")
    vals = observed_values(source, obs) / obs.q
    rows, cols, m = _unfold_coords(obs.shape, obs.indices, mode)
    if sparse:
        return sp.csr_matrix((vals, (rows, cols)), shape=(shape[mode], m))
    Y = np.zeros((shape[mode], m))
    Y[rows, cols] = vals
    return Y


def hollowed_gram(oracle, n: int, m: int, rate: float, seed):
    """Uniform-sampling analogue of the wedge matrix.

    Entries of the ``n x m`` matrix are observed at ``rate``; with
    ``Ã = rate^{-1} P_Omega(A)`` the result is ``Ã Ã^T`` with its diagonal
    zeroed. Returns ``(B, obs)``.
    """
    obs = sample_uniform((n, m), rate, seed)
    rows, cols = obs.indices
    vals = np.asarray(oracle(rows, cols), dtype=np.float64) / rate
    At = sp.csr_matrix((vals, (rows, cols)), shape=(n, m))
    B = (At @ At.T).toarray()
    B = (B + B.T) / 2
    np.fill_diagonal(B, 0.0)
    return B, obs
