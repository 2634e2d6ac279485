"""Matrix-free ``S - x L`` built from an HSS Cauchy matrix and the tangential data.

With ``L = sum_j diag(f_j) C diag(g_j)`` (``f_j``/``g_j`` the columns/rows of
the factored right-hand side) and ``S - L Lambda = V R``, a product is

    (S - x L) y = L (Lambda - x I) y + V (R y),

i.e. one batched HSS product with ``p + q`` columns (complex flavor) or
``2 (p + q)`` columns (real flavor) plus a rank-``q`` correction.
"""

from __future__ import annotations

import math
import threading

import numpy as np

from .hss import HssCauchy, build_hss_cauchy, hss_error_estimate
from .partition import PartitionedData

__all__ = [
    "LoewnerOperator",
    "op_apply",
    "op_apply_adjoint",
    "inexactness_bound",
    "matvec_error_bound",
    "order_heuristic",
    "estimate_cauchy_error",
]

EXACT_ERROR_LIMIT = 4096


class LoewnerOperator:
    """Linear operator ``y -> (S - x L) y`` of shape ``(Ml, Mr)``.

    Parameters
    ----------
    cauchy : HssCauchy
        Approximation of ``1/(mu_h - lam_k)`` for the kernel points of ``pd``.
    pd : PartitionedData
        Partitioned data (either flavor).
    x : float
        Real shift.
    """

    def __init__(self, cauchy: HssCauchy, pd: PartitionedData, x: float = 0.0):
        if cauchy.shape != pd.shape:
            raise ValueError(f"Cauchy matrix is {cauchy.shape} but data give {pd.shape}")
        if np.iscomplexobj(x) and np.imag(x) != 0:
            raise ValueError("shift must be real")
        self.cauchy = cauchy
        self.pd = pd
        self.x = float(np.real(x))
        F, G = pd.rhs_L
        self._F = F
        self._G = G
        self._Fh = F.conj()
        self._Gh = G.conj()
        self.n_terms = F.shape[1]
        self.matvecs = 0
        self._lock = threading.Lock()

    @property
    def shape(self) -> tuple[int, int]:
        return self.pd.shape

    @property
    def dtype(self):
        return self.pd.dtype

    def _count(self, k):
        with self._lock:
            self.matvecs += k

    def _shifted(self, Y, adjoint=False):
        # (Lambda - x I) Y, or its adjoint
        return self.pd.apply_lam(Y, adjoint=adjoint) - self.x * Y

    def apply_loewner(self, Y):
        """``L~ Y`` for an ``(Mr, k)`` block, ``L~`` using the HSS Cauchy matrix."""
        k = Y.shape[1]
        Z = (self._G[:, :, None] * Y[None, :, :]).transpose(1, 0, 2).reshape(Y.shape[0], -1)
        CZ = self.cauchy.apply(Z).reshape(self.shape[0], self.n_terms, k)
        return np.einsum("mj,mjk->mk", self._F, CZ)

    def apply_loewner_adjoint(self, Y):
        k = Y.shape[1]
        Z = (self._Fh.T[:, :, None] * Y[None, :, :]).transpose(1, 0, 2).reshape(Y.shape[0], -1)
        CZ = self.cauchy.apply_adjoint(Z).reshape(self.shape[1], self.n_terms, k)
        return np.einsum("jm,mjk->mk", self._Gh, CZ)

    def apply_shifted_loewner(self, Y):
        """``S~ Y = L~ Lambda Y + V R Y``."""
        return self.apply_loewner(self.pd.apply_lam(Y)) + self.pd.V @ (self.pd.R @ Y)

    def apply(self, y):
        """``(S - x L) y`` for a vector or an ``(Mr, k)`` block."""
        y = np.asarray(y)
        vec = y.ndim == 1
        Y = y[:, None] if vec else y
        if Y.shape[0] != self.shape[1]:
            raise ValueError(f"dimension mismatch: operator is {self.shape}, got {y.shape[0]} rows")
        self._count(Y.shape[1])
        out = self.apply_loewner(self._shifted(Y)) + self.pd.V @ (self.pd.R @ Y)
        return out[:, 0] if vec else out

    def apply_adjoint(self, y):
        """``(S - x L)^H y``: the exact conjugate transpose of :meth:`apply`."""
        y = np.asarray(y)
        vec = y.ndim == 1
        Y = y[:, None] if vec else y
        if Y.shape[0] != self.shape[0]:
            raise ValueError(f"dimension mismatch: adjoint is {self.shape[::-1]}, got {y.shape[0]} rows")
        self._count(Y.shape[1])
        out = self._shifted(self.apply_loewner_adjoint(Y), adjoint=True)
        out = out + self.pd.R.conj().T @ (self.pd.V.conj().T @ Y)
        return out[:, 0] if vec else out

    def storage_entries(self) -> int:
        """Scalars held by the operator: HSS representation plus the data factors."""
        return self.cauchy.storage_entries() + self.pd.storage_entries()


def op_apply(op: LoewnerOperator, y):
    return op.apply(y)


def op_apply_adjoint(op: LoewnerOperator, y):
    return op.apply_adjoint(y)


def inexactness_bound(op: LoewnerOperator, cauchy_err: float) -> float:
    """Bound on ``||L - L~||_2`` given ``cauchy_err >= ||C - C~||_2``.

    ``n_terms * cauchy_err * max(|F|, |G|)**2`` with ``F, G`` the factored
    right-hand side; for the complex flavor ``n_terms = p + q`` and the
    entries of ``F, G`` are those of ``V, L, R, W``.
    """
    if cauchy_err < 0:
        raise ValueError("cauchy_err must be nonnegative")
    m = max(float(np.max(np.abs(op._F), initial=0.0)), float(np.max(np.abs(op._G), initial=0.0)))
    return op.n_terms * float(cauchy_err) * m * m


def matvec_error_bound(op: LoewnerOperator, cauchy_err: float) -> float:
    """Bound on ``||(S - x L) - op||_2``: :func:`inexactness_bound` times ``||Lambda - x I||_2``."""
    pd = op.pd
    if pd.lam_blocks is None:
        shift_norm = float(np.max(np.abs(pd.lam - op.x)))
    else:
        B = pd.lam_blocks - op.x * np.eye(2)[None]
        shift_norm = float(np.max(np.linalg.norm(B, 2, axis=(1, 2))))
    return inexactness_bound(op, cauchy_err) * shift_norm


def order_heuristic(op: LoewnerOperator) -> int:
    """``2 (p+q) hss_rank`` (complex flavor) or ``4 (p+q) hss_rank`` (real flavor)."""
    factor = 2 if op.pd.flavor == "complex" else 4
    return factor * (op.pd.p + op.pd.q) * op.cauchy.rank()


def estimate_cauchy_error(c: HssCauchy, exact_limit: int = EXACT_ERROR_LIMIT, iters: int = 20, seed=0):
    """Estimate ``||C - C~||_2``; returns ``(value, method)``.

    Up to ``exact_limit`` points the difference is probed by power iteration
    with exact (streamed) Cauchy products. Beyond that the heuristic
    ``tol * ||C~||_2`` is returned, with ``||C~||_2`` from power iteration.
    """
    if max(c.shape) <= exact_limit:
        return hss_error_estimate(c, iters=iters, seed=seed), "power-iteration"
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(c.shape[1]).astype(c.dtype)
    v /= np.linalg.norm(v)
    s = 0.0
    for _ in range(iters):
        w = c.apply_adjoint(c.apply(v))
        nw = np.linalg.norm(w)
        if nw == 0:
            break
        s = math.sqrt(nw)
        v = w / nw
    return c.tol * s, "heuristic"


def build_operator(pd: PartitionedData, x: float, tol: float = 1e-14, leaf: int = 64) -> LoewnerOperator:
    return LoewnerOperator(build_hss_cauchy(pd.mu, pd.lam, tol=tol, leaf=leaf), pd, x)
