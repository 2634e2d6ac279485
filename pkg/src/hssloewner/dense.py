"""Dense Loewner pencils: the explicit reference path and correctness oracle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ReducedModel
from .partition import PartitionedData

__all__ = [
    "DENSE_LIMIT",
    "DenseLimitError",
    "DensePencil",
    "cauchy_matrix",
    "build_dense",
    "build_dense_hadamard",
    "pencil",
    "full_svd_reduce",
    "numerical_rank",
    "rank_bound_check",
    "norm_bound",
]

DENSE_LIMIT = 20_000


class DenseLimitError(MemoryError):
    """Refusing to allocate an ``M x M`` matrix above the configured limit."""


def _check_limit(shape, limit):
    if max(shape) > limit:
        raise DenseLimitError(
            f"dense pencil of size {shape[0]}x{shape[1]} exceeds the dense limit {limit}"
        )


@dataclass(frozen=True)
class DensePencil:
    LL: np.ndarray
    SS: np.ndarray
    flavor: str

    def storage_entries(self) -> int:
        return int(self.LL.size + self.SS.size)


def cauchy_matrix(mu, lam, limit=DENSE_LIMIT) -> np.ndarray:
    """Dense ``C[h, k] = 1 / (mu[h] - lam[k])``."""
    mu = np.asarray(mu)
    lam = np.asarray(lam)
    _check_limit((mu.size, lam.size), limit)
    diff = mu[:, None] - lam[None, :]
    if np.any(diff == 0):
        h, k = np.argwhere(diff == 0)[0]
        raise ZeroDivisionError(f"point collision mu[{h}] == lam[{k}]")
    return 1.0 / diff


def build_dense(pd: PartitionedData, limit: int = DENSE_LIMIT) -> DensePencil:
    """Entrywise Loewner and shifted Loewner matrices.

    Complex flavor: ``(v_h r_k - l_h w_k) / (mu_h - lam_k)`` and
    ``(mu_h v_h r_k - lam_k l_h w_k) / (mu_h - lam_k)``. Real flavor: the
    factored right-hand sides of the squared Sylvester equations divided by
    the differences of the squared points.
    """
    C = cauchy_matrix(pd.mu, pd.lam, limit)
    if pd.flavor == "complex":
        LL = (pd.V @ pd.R - pd.L @ pd.W) * C
        SS = (pd.mu[:, None] * (pd.V @ pd.R) - (pd.L @ pd.W) * pd.lam[None, :]) * C
    else:
        F, G = pd.rhs_L
        LL = (F @ G) * C
        F, G = pd.rhs_S
        SS = (F @ G) * C
    return DensePencil(LL, SS, pd.flavor)


def build_dense_hadamard(pd: PartitionedData, limit: int = DENSE_LIMIT) -> DensePencil:
    """Assemble the pencil as sums of diagonally scaled Cauchy matrices.

    ``LL = sum_j diag(v_j) C diag(r_j) - sum_j diag(l_j) C diag(w_j)`` with
    ``v_j, l_j`` the columns of ``V, L`` and ``r_j, w_j`` the rows of
    ``R, W``; ``SS`` uses ``M v_j`` and ``w_j Lambda``. For the real flavor
    the columns/rows of the factored right-hand sides play these roles.
    """
    C = cauchy_matrix(pd.mu, pd.lam, limit)

    def hsum(cols, rows, signs):
        out = np.zeros(C.shape, dtype=np.result_type(C, cols, rows))
        for j in range(cols.shape[1]):
            out += signs[j] * (np.diag(cols[:, j]) @ C @ np.diag(rows[j]))
        return out

    if pd.flavor == "complex":
        q, p = pd.q, pd.p
        signs = [1.0] * q + [-1.0] * p
        LL = hsum(np.hstack([pd.V, pd.L]), np.vstack([pd.R, pd.W]), signs)
        SS = hsum(
            np.hstack([pd.mu[:, None] * pd.V, pd.L]),
            np.vstack([pd.R, pd.W * pd.lam[None, :]]),
            signs,
        )
    else:
        F, G = pd.rhs_L
        LL = hsum(F, G, [1.0] * F.shape[1])
        F, G = pd.rhs_S
        SS = hsum(F, G, [1.0] * F.shape[1])
    return DensePencil(LL, SS, pd.flavor)


def pencil(dp: DensePencil, x: float) -> np.ndarray:
    return dp.SS - x * dp.LL


def full_svd_reduce(dp: DensePencil, pd: PartitionedData, x: float, n: int) -> ReducedModel:
    """Project onto the ``n`` dominant singular vectors of ``SS - x LL``.

    ``E = -Y^* LL X``, ``A = -Y^* SS X``, ``B = Y^* V``, ``C = W X``, ``D = 0``.
    """
    K = pencil(dp, x)
    if not 1 <= n <= min(K.shape):
        raise ValueError(f"order n={n} must lie in [1, {min(K.shape)}]")
    Y, _, Xh = np.linalg.svd(K, full_matrices=False)
    return project(dp, pd, Y[:, :n], Xh[:n].conj().T)


def project(dp: DensePencil, pd: PartitionedData, Yn, Xn) -> ReducedModel:
    Yh = Yn.conj().T
    return ReducedModel(
        E=-(Yh @ dp.LL @ Xn),
        A=-(Yh @ dp.SS @ Xn),
        B=Yh @ pd.V,
        C=pd.W @ Xn,
        D=np.zeros((pd.p, pd.q)),
        flavor=pd.flavor,
    )


def numerical_rank(A, tol: float = 1e-10) -> int:
    """Number of singular values with ``s_k / s_1 > tol``."""
    s = np.linalg.svd(A, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s / s[0] > tol))


def rank_bound_check(dp: DensePencil, pd: PartitionedData, x: float, tol: float = 1e-10):
    """Compare ``rank(SS - x LL)`` with ``2 (p+q) rank(C)``.

    The pencil is ``C o (F G)`` with ``rank(F G) <= p + q`` (complex) or
    ``<= 2 (p + q)`` (real: the squared Sylvester right-hand side
    ``M K + K Lambda`` of a rank-``(p+q)`` term), so one factor covers both.
    """
    rank_pencil = numerical_rank(pencil(dp, x), tol)
    rank_C = numerical_rank(cauchy_matrix(pd.mu, pd.lam), tol)
    return rank_pencil, rank_C, rank_pencil <= 2 * (pd.p + pd.q) * rank_C


def _factored_norm(F, G) -> float:
    # ||F G||_2 from thin QR factors; exact up to rounding
    if F.shape[1] == 0:
        return 0.0
    _, Rf = np.linalg.qr(F)
    _, Rg = np.linalg.qr(G.conj().T)
    return float(np.linalg.norm(Rf @ Rg.conj().T, 2))


def _cauchy_fro(mu, lam, chunk: int = 1024) -> float:
    total = 0.0
    for start in range(0, mu.size, chunk):
        d = mu[start : start + chunk, None] - lam[None, :]
        total += float(np.sum(1.0 / np.abs(d) ** 2))
    return float(np.sqrt(total))


def norm_bound(pd: PartitionedData) -> tuple[float, float]:
    """Upper bounds on ``||LL||_2`` and ``||SS||_2`` via Hadamard submultiplicativity.

    ``||C o (F G)|| <= ||F G|| ||C||_F``; the Frobenius norm of the Cauchy
    matrix is streamed in row blocks without forming it.
    """
    cf = _cauchy_fro(pd.mu, pd.lam)
    return _factored_norm(*pd.rhs_L) * cf, _factored_norm(*pd.rhs_S) * cf
