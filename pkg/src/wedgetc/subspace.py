"""Top-r eigenspaces, Procrustes alignment and subspace error metrics."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

__all__ = [
    "DegenerateGapWarning",
    "SubspaceEstimate",
    "AlignmentResult",
    "top_r_eigs",
    "procrustes_align",
    "subspace_errors",
    "fix_signs",
]

GAP_TOL = 1e-12


class DegenerateGapWarning(RuntimeWarning):
    """The r-th and (r+1)-th eigenvalues coincide; the eigenspace is not unique."""


@dataclass
class SubspaceEstimate:
    U: np.ndarray
    eigenvalues: np.ndarray
    degenerate_gap: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def rank(self) -> int:
        return self.U.shape[1]

    def projector(self) -> np.ndarray:
        return self.U @ self.U.T


def fix_signs(U: np.ndarray) -> np.ndarray:
    """Flip columns so each one's largest-magnitude entry is positive.

    ``argmax`` returns the first maximizer, which breaks ties by lowest index.
    """
    U = np.array(U, dtype=np.float64)
    if U.size == 0:
        return U
    rows = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[rows, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs


def top_r_eigs(Z, r: int, by: str = "signed", sym_tol: float = 1e-10) -> SubspaceEstimate:
    """Leading ``r`` eigenpairs of a symmetric matrix.

    ``by="signed"`` ranks eigenvalues by value (highest first); ``by="abs"``
    ranks by magnitude.
    """
    Z = np.asarray(Z, dtype=np.float64)
    n = Z.shape[0]
    if Z.ndim != 2 or Z.shape[1] != n:
        raise ValueError("Z must be square")
    if not 1 <= r <= n:
        raise ValueError(f"rank r={r} must satisfy 1 <= r <= n={n}")
    scale = max(np.abs(Z).max(), np.finfo(float).tiny)
    if np.abs(Z - Z.T).max() > sym_tol * scale:
        raise ValueError("Z is not symmetric within tolerance")
    evals, evecs = scipy.linalg.eigh((Z + Z.T) / 2)
    if by == "signed":
        order = np.argsort(evals, kind="stable")[::-1]
    elif by == "abs":
        order = np.argsort(np.abs(evals), kind="stable")[::-1]
    else:
        raise ValueError(f"unknown ordering {by!r}")
    evals, evecs = evals[order], evecs[:, order]
    degenerate = False
    if r < n:
        key = evals if by == "signed" else np.abs(evals)
        if abs(key[r - 1] - key[r]) <= GAP_TOL * max(abs(key[0]), 1.0):
            degenerate = True
            warnings.warn(
                f"eigenvalues {r} and {r + 1} coincide ({key[r - 1]:.3e}); "
                "returned subspace is one basis of a larger eigenspace",
                DegenerateGapWarning,
                stacklevel=2,
            )
    return SubspaceEstimate(U=fix_signs(evecs[:, :r]), eigenvalues=evals[:r], degenerate_gap=degenerate)


@dataclass
class AlignmentResult:
    H: np.ndarray
    R: np.ndarray
    angles: np.ndarray
    op_err: float
    two_inf_err: float
    sin_theta: float
    projector_gap: float
    degenerate: bool = False


def _as_basis(U):
    return U.U if isinstance(U, SubspaceEstimate) else np.asarray(U, dtype=np.float64)


def procrustes_align(U_hat, U) -> AlignmentResult:
    """Orthogonal ``R`` minimizing ``||U_hat R - U||_F`` and the resulting errors.

    ``R`` is the sign matrix of ``H = U_hat^T U``: with ``H = W cos(Theta) V^T``,
    ``R = W V^T``.
    """
    U_hat, U = _as_basis(U_hat), _as_basis(U)
    if U_hat.shape != U.shape:
        raise ValueError(f"shape mismatch {U_hat.shape} vs {U.shape}")
    H = U_hat.T @ U
    W, cos, Vt = np.linalg.svd(H)
    R = W @ Vt
    cos = np.clip(cos, -1.0, 1.0)
    angles = np.arccos(cos)
    D = U_hat @ R - U
    # sines of the principal angles are the singular values of (I - UU^T) U_hat;
    # sqrt(1 - cos^2) would lose half the digits at small angles
    sines = np.linalg.svd(U_hat - U @ H.T, compute_uv=False)
    # U_hat U_hat^T - U U^T vanishes off span[U_hat, U]; compress onto that span
    Q, _ = np.linalg.qr(np.hstack([U_hat, U]))
    A, B = Q.T @ U_hat, Q.T @ U
    P = A @ A.T - B @ B.T
    return AlignmentResult(
        H=H,
        R=R,
        angles=angles,
        op_err=float(np.linalg.norm(D, 2)),
        two_inf_err=float(np.linalg.norm(D, axis=1).max()),
        sin_theta=float(min(sines.max(), 1.0)),
        projector_gap=float(np.linalg.norm(P, 2)),
        degenerate=bool(cos.min() <= 1e-12),
    )


def subspace_errors(U_hat, U) -> dict:
    a = procrustes_align(U_hat, U)
    return dict(op_err=a.op_err, two_inf_err=a.two_inf_err, sin_theta=a.sin_theta, projector_gap=a.projector_gap)
