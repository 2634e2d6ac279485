"""Dominant singular triplets of matrix-free operators and pencil projection.

Thick-restart Golub-Kahan-Lanczos bidiagonalization with full (two-pass)
reorthogonalization. The projected matrix ``B = Q^H A P`` is assembled from
the Gram-Schmidt coefficients, so after a restart it automatically takes
the "diagonal plus last column" shape without bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ReducedModel

__all__ = ["SvdResult", "partial_svd", "reduce", "ADJOINT_CHECK_TOL"]

ADJOINT_CHECK_TOL = 1e-8


class AdjointMismatchError(ValueError):
    """``apply`` and ``apply_adjoint`` fail the random pairing self-check."""


@dataclass
class SvdResult:
    """Partial SVD ``A ~ U diag(s) Vt``.

    Attributes
    ----------
    singular_values : ndarray, shape (n,)
        Descending, nonnegative.
    U : ndarray, shape (Ml, n)
    Vt : ndarray, shape (n, Mr)
    residuals : ndarray, shape (n,)
        ``||A v_i - s_i u_i||`` (the adjoint residual vanishes by construction).
    iterations : int
        Number of restart cycles.
    matvec_count : int
        Calls of ``apply`` plus ``apply_adjoint``, including the self-check.
    """

    singular_values: np.ndarray
    U: np.ndarray
    Vt: np.ndarray
    residuals: np.ndarray
    iterations: int
    matvec_count: int
    converged: bool = True
    rank_deficient: bool = False
    sigma1_history: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.singular_values.size


def _orthogonalize(v, Q, k):
    # two classical Gram-Schmidt passes against Q[:, :k]; returns coefficients
    if k == 0:
        return v, np.zeros(0, dtype=Q.dtype)
    Qk = Q[:, :k]
    h = Qk.conj().T @ v
    v = v - Qk @ h
    h2 = Qk.conj().T @ v
    v = v - Qk @ h2
    return v, h + h2


def _random_orth(rng, Q, k, dtype):
    v = rng.standard_normal(Q.shape[0])
    if np.issubdtype(dtype, np.complexfloating):
        v = v + 1j * rng.standard_normal(Q.shape[0])
    for _ in range(3):
        v, _ = _orthogonalize(v.astype(dtype), Q, k)
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            return v / nv
    raise np.linalg.LinAlgError("cannot extend an orthonormal basis that is already complete")


def _small_dense(matvec, rmatvec, shape, n, dtype, counter):
    # assemble the operator column- or row-wise with min(shape) products
    m, k_in = shape
    if k_in <= m:
        A = np.column_stack([matvec(e) for e in np.eye(k_in, dtype=dtype)])
    else:
        A = np.column_stack([rmatvec(e) for e in np.eye(m, dtype=dtype)]).conj().T
    counter[0] += min(m, k_in)
    Ub, s, Vbh = np.linalg.svd(A, full_matrices=False)
    Uk, Vk = Ub[:, :n], Vbh[:n].conj().T
    res = np.linalg.norm(A @ Vk - Uk * s[:n], axis=0)
    return s[:n], Uk, Vk, res, 0, True, [float(s[0])]


def _gkl(matvec, rmatvec, shape, n, p0, conv_tol, max_restarts, dtype, rng, counter):
    m, k_in = shape
    dim = min(m, k_in)
    kd = max(2 * n + 10, 20)
    if dim <= kd:
        # the Krylov space would exhaust the operator: factor it directly
        return _small_dense(matvec, rmatvec, shape, n, dtype, counter)
    keep = n + (kd - n) // 2
    P = np.zeros((k_in, kd), dtype=dtype)
    Q = np.zeros((m, kd), dtype=dtype)
    B = np.zeros((kd, kd), dtype=dtype)
    P[:, 0] = p0
    start = 0
    history = []
    scale = 0.0
    converged = False
    restarts = 0
    while True:
        r = None
        for j in range(start, kd):
            q = matvec(P[:, j])
            counter[0] += 1
            q, h = _orthogonalize(q, Q, j)
            B[:j, j] = h
            alpha = np.linalg.norm(q)
            scale = max(scale, alpha, float(np.max(np.abs(h), initial=0.0)))
            if alpha <= 1e-14 * max(scale, 1e-300):
                Q[:, j] = _random_orth(rng, Q, j, dtype)
                B[j, j] = 0.0
            else:
                Q[:, j] = q / alpha
                B[j, j] = alpha
            r = rmatvec(Q[:, j])
            counter[0] += 1
            r, _ = _orthogonalize(r, P, j + 1)
            beta = np.linalg.norm(r)
            if j + 1 < kd:
                if beta <= 1e-14 * max(scale, 1e-300):
                    if j + 1 >= k_in:
                        break
                    P[:, j + 1] = _random_orth(rng, P, j + 1, dtype)
                    r = np.zeros_like(r)
                else:
                    P[:, j + 1] = r / beta
        rnorm = float(np.linalg.norm(r)) if r is not None else 0.0
        Ub, s, Vbh = np.linalg.svd(B)
        history.append(float(s[0]))
        res = rnorm * np.abs(Ub[kd - 1, :])
        sig1 = s[0]
        if np.all(res[:n] <= conv_tol * sig1):
            converged = True
            break
        if restarts >= max_restarts:
            break
        restarts += 1
        Vb = Vbh.conj().T
        P[:, :keep] = P @ Vb[:, :keep]
        Q[:, :keep] = Q @ Ub[:, :keep]
        B[:] = 0
        B[np.arange(keep), np.arange(keep)] = s[:keep]
        P[:, keep] = r / rnorm
        P[:, keep + 1 :] = 0
        Q[:, keep:] = 0
        start = keep
    Uk = Q @ Ub[:, :n]
    Vk = P @ Vbh[:n].conj().T
    return s[:n], Uk, Vk, res[:n], restarts, converged, history


def partial_svd(
    apply,
    apply_adjoint,
    M,
    n: int,
    start=None,
    conv_tol: float = 1e-8,
    max_restarts: int = 200,
    dtype=None,
    seed=0,
) -> SvdResult:
    """Compute the ``n`` dominant singular triplets of a linear operator.

    Parameters
    ----------
    apply, apply_adjoint : callable
        ``y -> A y`` and ``y -> A^H y`` on 1-D arrays.
    M : int or (int, int)
        Operator shape (an int means square).
    n : int
        Number of triplets.
    start : ndarray, optional
        Starting vector in the *left* space (length ``Ml``); it seeds the
        bidiagonalization of ``A^H``. Defaults to a seeded random vector.
    conv_tol : float
        Stop when every residual is at most ``conv_tol * s_1``.
    """
    shape = (int(M), int(M)) if np.ndim(M) == 0 else (int(M[0]), int(M[1]))
    if not 1 <= n <= min(shape):
        raise ValueError(f"n={n} must lie in [1, {min(shape)}]")
    rng = np.random.default_rng(seed)
    counter = [0]

    def fwd(v):
        counter[0] += 1
        return np.asarray(apply(v))

    def adj(v):
        counter[0] += 1
        return np.asarray(apply_adjoint(v))

    # adjoint self-check, also reveals the working dtype
    x = rng.standard_normal(shape[1])
    y = rng.standard_normal(shape[0])
    Ax = fwd(x)
    Ay = adj(y)
    if dtype is None:
        dtype = np.result_type(Ax, Ay, np.float64)
    lhs = np.vdot(y, Ax)
    rhs = np.vdot(Ay, x)
    tol_scale = np.linalg.norm(Ax) * np.linalg.norm(y) + np.linalg.norm(Ay) * np.linalg.norm(x)
    if abs(lhs - rhs) > ADJOINT_CHECK_TOL * max(tol_scale, 1e-300):
        raise AdjointMismatchError(
            f"apply/apply_adjoint are not adjoint: <Ax,y>={lhs!r} vs <x,A^H y>={rhs!r}"
        )
    inner = [0]
    if start is None:
        s0 = rng.standard_normal(shape[0]).astype(dtype)
    else:
        s0 = np.asarray(start, dtype=dtype).ravel()
        if s0.size != shape[0]:
            raise ValueError(f"start vector has length {s0.size}, expected {shape[0]}")
        if not np.any(s0):
            s0 = rng.standard_normal(shape[0]).astype(dtype)
    s0 = s0 / np.linalg.norm(s0)
    # bidiagonalize A^H from the left start; swap the roles afterwards
    s, Vk, Uk, res, restarts, conv, hist = _gkl(
        lambda v: np.asarray(apply_adjoint(v), dtype=dtype),
        lambda v: np.asarray(apply(v), dtype=dtype),
        (shape[1], shape[0]),
        n,
        s0,
        conv_tol,
        max_restarts,
        dtype,
        rng,
        inner,
    )
    # sign convention: first nonzero entry of each right vector real-positive
    for i in range(n):
        nz = np.flatnonzero(np.abs(Vk[:, i]) > 1e-14 * np.max(np.abs(Vk[:, i]), initial=0.0))
        if nz.size:
            ph = Vk[nz[0], i] / abs(Vk[nz[0], i])
            Vk[:, i] /= ph
            Uk[:, i] /= ph
    s = np.maximum(s, 0.0)
    rank_def = bool(s[-1] <= conv_tol * s[0]) if s[0] > 0 else True
    return SvdResult(
        singular_values=s.astype(float),
        U=Uk,
        Vt=Vk.conj().T,
        residuals=np.asarray(res, dtype=float),
        iterations=restarts,
        matvec_count=counter[0] + inner[0],
        converged=bool(conv),
        rank_deficient=rank_def,
        sigma1_history=hist,
    )


def reduce(svd: SvdResult, op, n: int) -> ReducedModel:
    """Project the pencil onto the leading ``n`` singular vectors of ``svd``.

    ``E = -Yn^H L~ Xn``, ``A = -Yn^H S~ Xn`` (both matrix-free),
    ``B = Yn^H V``, ``C = W Xn``, ``D = 0``.
    """
    if n < 1:
        raise ValueError(f"reduced order must be positive, got {n}")
    if n > svd.n:
        raise ValueError(f"order {n} exceeds the {svd.n} computed triplets")
    Yn = svd.U[:, :n]
    Xn = svd.Vt[:n].conj().T
    pd = op.pd
    if Yn.shape[0] != op.shape[0] or Xn.shape[0] != op.shape[1]:
        raise ValueError(f"singular vectors do not match the operator shape {op.shape}")
    Yh = Yn.conj().T
    LX = op.apply_loewner(Xn)
    SX = op.apply_loewner(pd.apply_lam(Xn)) + pd.V @ (pd.R @ Xn)
    return ReducedModel(
        E=-(Yh @ LX),
        A=-(Yh @ SX),
        B=Yh @ pd.V,
        C=pd.W @ Xn,
        D=np.zeros((pd.p, pd.q)),
        flavor=pd.flavor,
    )
