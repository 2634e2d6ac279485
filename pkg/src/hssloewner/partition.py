"""Left/right partitioning of frequency data and the real change of basis.

Points come in adjacent conjugate pairs ``(i w, -i w)``. Both members of a
pair share a tangential direction, so that the real flavor produced by
:func:`realify` has purely real entries.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .data import FrequencyDataset

__all__ = [
    "PartitionKind",
    "PartitionError",
    "PartitionedData",
    "partition",
    "realify",
    "change_of_basis",
]

REALIFY_RTOL = 1e-12

_PI = np.array([[1.0, -1.0j], [1.0, 1.0j]]) / np.sqrt(2.0)


class PartitionKind(enum.Enum):
    HALF_HALF = "half-half"
    ODD_EVEN = "odd-even"
    ODD_EVEN_REAL = "odd-even-real"

    @classmethod
    def parse(cls, value) -> "PartitionKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-").replace("&", "-")
        aliases = {"halfhalf": "half-half", "oddeven": "odd-even", "oddevenreal": "odd-even-real"}
        key = aliases.get(key.replace("-", ""), key)
        for kind in cls:
            if kind.value == key:
                return kind
        raise ValueError(f"unknown partition {value!r}; choose from {[k.value for k in cls]}")


class PartitionError(ValueError):
    pass


def _block_apply(blocks, y, adjoint=False):
    # blocks: (K, 2, 2) acting on consecutive pairs of rows of y
    y = np.asarray(y)
    vec = y.ndim == 1
    Y = y.reshape(blocks.shape[0], 2, -1)
    B = blocks.conj().transpose(0, 2, 1) if adjoint else blocks
    out = np.matmul(B, Y).reshape(-1, Y.shape[-1])
    return out[:, 0] if vec else out


@dataclass(frozen=True)
class PartitionedData:
    """Tangential data of a partitioned dataset.

    ``lam`` (length ``Mr``) and ``mu`` (length ``Ml``) are the Cauchy kernel
    points: the right/left points themselves for the complex flavor, the
    diagonals of the squared real coefficient matrices (``-w**2``, each
    repeated twice) for the real flavor. ``rhs_L`` and ``rhs_S`` are factor
    pairs ``(F, G)`` with ``Mu Ll - Ll La = F @ G`` (and the analogue for
    the shifted Loewner matrix), where ``Mu``/``La`` are the diagonal
    coefficients with entries ``mu``/``lam``.
    """

    lam: np.ndarray
    mu: np.ndarray
    R: np.ndarray
    W: np.ndarray
    L: np.ndarray
    V: np.ndarray
    flavor: str
    rhs_L: tuple
    rhs_S: tuple
    right_freqs: np.ndarray
    left_freqs: np.ndarray
    lam_blocks: np.ndarray | None = None
    mu_blocks: np.ndarray | None = None

    @property
    def p(self) -> int:
        return self.W.shape[0]

    @property
    def q(self) -> int:
        return self.R.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        """Shape ``(Ml, Mr)`` of the Loewner matrices."""
        return self.mu.shape[0], self.lam.shape[0]

    @property
    def dtype(self):
        return np.float64 if self.flavor == "real" else np.complex128

    def apply_lam(self, y, adjoint=False):
        """Multiply by the right coefficient matrix (``Lambda`` or ``Lambda_r``)."""
        if self.lam_blocks is None:
            d = self.lam.conj() if adjoint else self.lam
            y = np.asarray(y)
            return d * y if y.ndim == 1 else d[:, None] * y
        return _block_apply(self.lam_blocks, y, adjoint)

    def apply_mu(self, y, adjoint=False):
        """Multiply by the left coefficient matrix (``M`` or ``M_r``)."""
        if self.mu_blocks is None:
            d = self.mu.conj() if adjoint else self.mu
            y = np.asarray(y)
            return d * y if y.ndim == 1 else d[:, None] * y
        return _block_apply(self.mu_blocks, y, adjoint)

    def lam_matrix(self) -> np.ndarray:
        return self.apply_lam(np.eye(self.shape[1], dtype=self.dtype))

    def mu_matrix(self) -> np.ndarray:
        return self.apply_mu(np.eye(self.shape[0], dtype=self.dtype))

    def storage_entries(self) -> int:
        """Number of stored scalars in the data matrices and factors."""
        arrays = [self.lam, self.mu, self.R, self.W, self.L, self.V, *self.rhs_L, *self.rhs_S]
        if self.lam_blocks is not None:
            arrays += [self.lam_blocks, self.mu_blocks]
        return int(sum(a.size for a in arrays))


def _complex_rhs(lam, mu, R, W, L, V):
    F_L = np.hstack([V, -L])
    G_L = np.vstack([R, W])
    F_S = np.hstack([mu[:, None] * V, -L])
    G_S = np.vstack([R, W * lam[None, :]])
    return (F_L, G_L), (F_S, G_S)


def partition(d: FrequencyDataset, kind) -> PartitionedData:
    """Split ``d`` into right (``lam``) and left (``mu``) conjugate-closed sets.

    Odd sample counts give a rectangular pencil: HALF_HALF puts the extra
    sample in the left set, ODD_EVEN keeps the literal odd/even split.
    """
    kind = PartitionKind.parse(kind)
    N = d.N
    if N < 2:
        raise PartitionError("need at least 2 samples")
    idx = np.arange(N)
    if kind is PartitionKind.HALF_HALF:
        right, left = idx[: N // 2], idx[N // 2 :]
    else:
        right, left = idx[0::2], idx[1::2]
    if np.intersect1d(d.freqs[right], d.freqs[left]).size:
        raise PartitionError("left and right point sets intersect (duplicate frequencies)")
    p, q = d.p, d.q
    w_r = d.omega[right]
    w_l = d.omega[left]
    lam = np.repeat(1j * w_r, 2)
    lam[1::2] *= -1
    mu = np.repeat(1j * w_l, 2)
    mu[1::2] *= -1

    R = np.zeros((q, 2 * right.size), dtype=complex)
    W = np.empty((p, 2 * right.size), dtype=complex)
    for k, j in enumerate(right):
        e = k % q
        R[e, 2 * k] = R[e, 2 * k + 1] = 1.0
        W[:, 2 * k] = d.H[j][:, e]
        W[:, 2 * k + 1] = d.H[j][:, e].conj()
    L = np.zeros((2 * left.size, p), dtype=complex)
    V = np.empty((2 * left.size, q), dtype=complex)
    for h, j in enumerate(left):
        e = h % p
        L[2 * h, e] = L[2 * h + 1, e] = 1.0
        V[2 * h] = d.H[j][e, :]
        V[2 * h + 1] = d.H[j][e, :].conj()

    rhs_L, rhs_S = _complex_rhs(lam, mu, R, W, L, V)
    pd = PartitionedData(
        lam=lam,
        mu=mu,
        R=R,
        W=W,
        L=L,
        V=V,
        flavor="complex",
        rhs_L=rhs_L,
        rhs_S=rhs_S,
        right_freqs=np.repeat(d.freqs[right], 2),
        left_freqs=np.repeat(d.freqs[left], 2),
    )
    if kind is PartitionKind.ODD_EVEN_REAL:
        pd = realify(pd)
    return pd


def change_of_basis(m: int) -> np.ndarray:
    """Dense block-diagonal unitary ``P = blkdiag(Pi, ..., Pi)`` of size ``m``."""
    if m % 2:
        raise PartitionError("change of basis needs an even dimension")
    P = np.zeros((m, m), dtype=complex)
    for k in range(0, m, 2):
        P[k : k + 2, k : k + 2] = _PI
    return P


def _to_real(a, what):
    a = np.asarray(a)
    scale = np.max(np.abs(a)) if a.size else 0.0
    if scale and np.max(np.abs(a.imag)) > REALIFY_RTOL * scale:
        raise PartitionError(f"{what}: data is not conjugate-closed (imaginary residue too large)")
    return np.ascontiguousarray(a.real)


def _check_pairs(pts, what):
    if pts.shape[0] % 2:
        raise PartitionError(f"{what}: odd number of points, cannot form conjugate pairs")
    a, b = pts[0::2], pts[1::2]
    scale = np.maximum(np.abs(a), 1.0)
    if np.any(np.abs(b - a.conj()) > REALIFY_RTOL * scale) or np.any(np.abs(a.imag) == 0):
        raise PartitionError(f"{what}: points are not arranged in adjacent conjugate pairs")


def _pair_blocks(pts):
    # Pi^* diag(a, conj a) Pi for each pair
    K = pts.shape[0] // 2
    D = np.zeros((K, 2, 2), dtype=complex)
    D[:, 0, 0] = pts[0::2]
    D[:, 1, 1] = pts[1::2]
    return _PI.conj().T[None] @ D @ _PI[None]


def realify(pd: PartitionedData) -> PartitionedData:
    """Apply ``P = blkdiag(Pi, ...)`` to obtain the real flavor.

    The squared coefficient matrices ``Lambda_r**2`` and ``M_r**2`` are
    diagonal with entries ``-w**2``; these become the kernel points, and the
    right-hand sides of the squared Sylvester equations are stored in
    factored form.
    """
    if pd.flavor != "complex":
        raise PartitionError("realify expects complex-flavor data")
    _check_pairs(pd.lam, "right points")
    _check_pairs(pd.mu, "left points")

    def right_mul(X):  # X @ P
        Y = X.reshape(X.shape[0], -1, 2)
        return (Y @ _PI).reshape(X.shape)

    def left_mul_adj(X):  # P^* @ X
        Y = X.reshape(-1, 2, X.shape[1])
        return (_PI.conj().T[None] @ Y).reshape(X.shape)

    R_r = _to_real(right_mul(pd.R), "R")
    W_r = _to_real(right_mul(pd.W), "W")
    L_r = _to_real(left_mul_adj(pd.L), "L")
    V_r = _to_real(left_mul_adj(pd.V), "V")
    lam_blocks = _to_real(_pair_blocks(pd.lam), "Lambda")
    mu_blocks = _to_real(_pair_blocks(pd.mu), "M")

    def squared_diag(blocks, what):
        sq = blocks @ blocks
        d = sq[:, 0, 0]
        scale = np.maximum(np.abs(d), 1.0)
        off = np.abs(sq[:, 0, 1]) + np.abs(sq[:, 1, 0]) + np.abs(sq[:, 1, 1] - d)
        if np.any(off > 1e-10 * scale):
            raise PartitionError(f"{what}: squared coefficient is not a scalar multiple of I")
        return np.repeat(d, 2)

    lam_r = squared_diag(lam_blocks, "Lambda_r")
    mu_r = squared_diag(mu_blocks, "M_r")

    def lam_right(G):  # G @ Lambda_r
        Y = G.reshape(G.shape[0], -1, 2)
        return np.einsum("akj,kjb->akb", Y, lam_blocks).reshape(G.shape)

    def mu_left(F):  # M_r @ F
        return _block_apply(mu_blocks, F)

    F0 = np.hstack([V_r, -L_r])
    G0 = np.vstack([R_r, W_r])
    F_L = np.hstack([mu_left(F0), F0])
    G_L = np.vstack([G0, lam_right(G0)])
    F1 = np.hstack([mu_left(V_r), -L_r])
    G1 = np.vstack([R_r, lam_right(W_r)])
    F_S = np.hstack([mu_left(F1), F1])
    G_S = np.vstack([G1, lam_right(G1)])

    return PartitionedData(
        lam=lam_r,
        mu=mu_r,
        R=R_r,
        W=W_r,
        L=L_r,
        V=V_r,
        flavor="real",
        rhs_L=(F_L, G_L),
        rhs_S=(F_S, G_S),
        right_freqs=pd.right_freqs,
        left_freqs=pd.left_freqs,
        lam_blocks=lam_blocks,
        mu_blocks=mu_blocks,
    )
