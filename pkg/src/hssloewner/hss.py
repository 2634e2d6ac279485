"""Hierarchically semiseparable approximation of Cauchy matrices.

``C[h, k] = 1 / (mu[h] - lam[k])`` is compressed without ever being formed:

1. every off-diagonal sibling block of a balanced binary cluster tree is
   approximated by partially pivoted adaptive cross approximation (ACA),
   which only evaluates the crosses it selects, and recompressed to an
   orthonormal ``X diag(s) Y^H`` form;
2. nested row/column bases are formed bottom-up: a leaf basis spans all the
   off-diagonal pieces of its block row, and a parent basis is obtained by
   recompressing the children's projected pieces, which yields the
   translation operators;
3. coupling matrices follow from the projected pieces.

Matrix-vector products then cost ``O(r M)`` for off-diagonal rank ``r``.
All per-level data are stored zero-padded so the up/down sweeps run as a
handful of batched ``matmul`` calls per level.
"""

from __future__ import annotations

import math
import threading

import numpy as np

__all__ = [
    "ClusterTree",
    "HssCauchy",
    "aca_cauchy",
    "build_hss_cauchy",
    "hss_apply",
    "hss_apply_adjoint",
    "hss_rank",
    "hss_error_estimate",
    "cauchy_matvec",
]

DEFAULT_TOL = 1e-14
DEFAULT_LEAF = 64
ACA_SHARE = 0.5


class ClusterTree:
    """Balanced bisection of ``[0, m)`` into ``2**depth`` contiguous leaves.

    Node ``i`` at level ``l`` covers ``[floor(i m / 2**l), floor((i+1) m / 2**l))``,
    so children partition their parent and leaf sizes differ by at most one.
    """

    def __init__(self, m: int, leaf: int = DEFAULT_LEAF, depth: int | None = None):
        if m < 1:
            raise ValueError("cluster tree needs at least one index")
        if leaf < 1:
            raise ValueError("leaf capacity must be positive")
        self.m = int(m)
        self.leaf = int(leaf)
        if depth is None:
            depth = 0
            while math.ceil(m / 2**depth) > leaf:
                depth += 1
        self.depth = int(depth)

    def bounds(self, level: int) -> np.ndarray:
        k = np.arange(2**level + 1, dtype=np.int64)
        return (k * self.m) // 2**level

    def interval(self, level: int, i: int) -> tuple[int, int]:
        b = self.bounds(level)
        return int(b[i]), int(b[i + 1])

    @property
    def leaf_size(self) -> int:
        return int(np.max(np.diff(self.bounds(self.depth))))

    def leaf_index(self) -> np.ndarray:
        """``(2**depth, leaf_size)`` global indices; padding slots hold ``m``."""
        b = self.bounds(self.depth)
        s = self.leaf_size
        idx = b[:-1, None] + np.arange(s)[None, :]
        idx[idx >= b[1:, None]] = self.m
        return idx


def _kernel(mu, lam):
    d = mu[:, None] - lam[None, :]
    if np.any(d == 0):
        h, k = np.argwhere(d == 0)[0]
        raise ZeroDivisionError(f"point collision: mu[{h}] == lam[{k}] == {mu[h]!r}")
    return 1.0 / d


def _truncate(s, tol):
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > tol * s[0]))


def aca_cauchy(mu, lam, tol: float, max_rank: int | None = None, check_rows: int = 16):
    """Low-rank ``X diag(s) Y^H`` approximation of ``1/(mu[:,None] - lam[None,:])``.

    Partially pivoted ACA with a Frobenius-norm stopping rule
    ``||u_k|| ||v_k|| <= tol ||S_k||_F`` met on two consecutive steps
    (conjugate-symmetric point sets produce singular values in near-equal
    pairs); on apparent convergence a few unused rows are checked and the iteration resumes from any row whose
    residual is still too large. The factors are recompressed with a QR/SVD
    pass and truncated at ``tol`` relative to the largest singular value.
    Only selected rows and columns of the block are evaluated.
    """
    mu = np.asarray(mu)
    lam = np.asarray(lam)
    m, n = mu.size, lam.size
    dtype = np.result_type(mu, lam, np.float64)
    kmax = min(m, n) if max_rank is None else min(m, n, max_rank)
    cap = min(kmax, 32)
    U = np.empty((m, cap), dtype=dtype)
    V = np.empty((cap, n), dtype=dtype)
    row_used = np.zeros(m, dtype=bool)
    col_used = np.zeros(n, dtype=bool)
    rng = np.random.default_rng(m * 7919 + n)
    fro2 = 0.0
    small = 0
    k = 0
    i = m // 2
    while k < kmax:
        d = mu[i] - lam
        if np.any(d == 0):
            raise ZeroDivisionError(f"point collision at block row {i}")
        row = 1.0 / d
        if k:
            row -= U[i, :k] @ V[:k]
        row_used[i] = True
        a = np.abs(row)
        a[col_used] = -1.0
        j = int(np.argmax(a))
        piv = row[j]
        converged = False
        if a[j] <= 0 or abs(piv) <= 1e-300:
            converged = True
        else:
            v = row / piv
            dc = mu - lam[j]
            if np.any(dc == 0):
                raise ZeroDivisionError(f"point collision at block column {j}")
            col = 1.0 / dc
            if k:
                col -= U[:, :k] @ V[:k, j]
            col_used[j] = True
            nu2 = float(np.vdot(col, col).real * np.vdot(v, v).real)
            cross = 0.0
            if k:
                cross = 2.0 * float(np.real(np.sum((U[:, :k].conj().T @ col) * (V[:k].conj() @ v))))
            if k == cap:
                cap = min(kmax, 2 * cap)
                U = np.concatenate([U, np.empty((m, cap - k), dtype)], axis=1)
                V = np.concatenate([V, np.empty((cap - k, n), dtype)], axis=0)
            U[:, k] = col
            V[k] = v
            k += 1
            fro2 = max(fro2 + nu2 + cross, nu2)
            small = small + 1 if nu2 <= tol * tol * fro2 else 0
            converged = small >= 2
            if not converged:
                ac = np.abs(col)
                ac[row_used] = -1.0
                i = int(np.argmax(ac))
                if ac[i] < 0:
                    converged = True
        if converged:
            free = np.flatnonzero(~row_used)
            if free.size == 0 or k >= kmax:
                break
            probe = rng.choice(free, size=min(check_rows, free.size), replace=False)
            res = _kernel(mu[probe], lam)
            if k:
                res -= U[probe, :k] @ V[:k]
            rn = np.linalg.norm(res, axis=1)
            worst = int(np.argmax(rn))
            if rn[worst] <= tol * math.sqrt(max(fro2, 0.0)):
                break
            i = int(probe[worst])
    if k == 0:
        return np.zeros((m, 0), dtype), np.zeros(0), np.zeros((n, 0), dtype)
    Qu, Ru = np.linalg.qr(U[:, :k])
    Qv, Rv = np.linalg.qr(V[:k].T)
    W, s, Zh = np.linalg.svd(Ru @ Rv.T)
    r = _truncate(s, tol)
    X = Qu @ W[:, :r]
    Y = Qv.conj() @ Zh[:r].conj().T
    return X, s[:r], Y


def _orth_trunc(G, weights, tol):
    """Orthonormal basis of the weighted columns of ``G``, truncated at ``tol``."""
    if G.shape[1] == 0 or G.shape[0] == 0:
        return np.zeros((G.shape[0], 0), dtype=G.dtype)
    U, s, _ = np.linalg.svd(G * weights[None, :], full_matrices=False)
    return U[:, : _truncate(s, tol)]


def _pad3(blocks, shape0, shape1, dtype):
    out = np.zeros((len(blocks), shape0, shape1), dtype=dtype)
    for t, b in enumerate(blocks):
        out[t, : b.shape[0], : b.shape[1]] = b
    return out


class HssCauchy:
    """HSS approximation ``C~`` of the Cauchy matrix ``1/(mu_h - lam_k)``.

    Use :func:`build_hss_cauchy` to construct. Instances are immutable after
    construction; ``apply``/``apply_adjoint`` may be called concurrently.
    Each call to either increments ``calls`` and adds the number of
    right-hand-side columns to ``vectors`` (instrumentation).
    """

    def __init__(self, mu, lam, tol=DEFAULT_TOL, leaf=DEFAULT_LEAF):
        self.mu = np.asarray(mu)
        self.lam = np.asarray(lam)
        self.tol = float(tol)
        self.leaf = int(leaf)
        self.dtype = np.result_type(self.mu, self.lam, np.float64)
        self.calls = 0
        self.vectors = 0
        self._lock = threading.Lock()
        self.build_peak_entries = 0

    # -- construction -------------------------------------------------------
    def _build(self):
        Ml, Mr = self.mu.size, self.lam.size
        depth = max(ClusterTree(Ml, self.leaf).depth, ClusterTree(Mr, self.leaf).depth)
        depth = min(depth, int(math.floor(math.log2(min(Ml, Mr)))))
        self.row_tree = ClusterTree(Ml, self.leaf, depth)
        self.col_tree = ClusterTree(Mr, self.leaf, depth)
        L = depth
        self.depth = L
        rt, ct = self.row_tree, self.col_tree
        self.row_idx = rt.leaf_index()
        self.col_idx = ct.leaf_index()
        mu_ext = np.append(self.mu, self.mu[0])
        lam_ext = np.append(self.lam, self.lam[0])
        nl = 2**L
        D = 1.0 / (mu_ext[self.row_idx][:, :, None] - lam_ext[self.col_idx][:, None, :])
        D[self.row_idx == Ml, :] = 0
        D.transpose(0, 2, 1)[self.col_idx == Mr, :] = 0
        self.D = D.astype(self.dtype)
        self.row_ranks = [np.zeros(1, dtype=int)]
        self.col_ranks = [np.zeros(1, dtype=int)]
        self.R_row, self.R_col, self.B12, self.B21 = {}, {}, {}, {}
        if L == 0:
            self.U_leaf = np.zeros((1, rt.leaf_size, 0), self.dtype)
            self.V_leaf = np.zeros((1, ct.leaf_size, 0), self.dtype)
            self.row_ranks = [np.zeros(1, dtype=int)]
            self.col_ranks = [np.zeros(1, dtype=int)]
            self.block_ranks = []
            self.build_peak_entries = int(self.D.size)
            return

        # split the budget: truncation errors of the block factors and of
        # every basis level accumulate in the reconstructed matrix
        aca_tol = self.tol * ACA_SHARE
        tol = self.tol * (1.0 - ACA_SHARE) / (2 * L)
        # rowpiece[l][a] = (X, s): block row contribution of node a at level l
        rowpiece = [None] + [[None] * 2**l for l in range(1, L + 1)]
        colpiece = [None] + [[None] * 2**l for l in range(1, L + 1)]
        block_ranks = []
        aca_entries = 0
        for l in range(1, L + 1):
            rb, cb = rt.bounds(l), ct.bounds(l)
            for i in range(2 ** (l - 1)):
                a, b = 2 * i, 2 * i + 1
                Xab, sab, Yab = aca_cauchy(self.mu[rb[a] : rb[a + 1]], self.lam[cb[b] : cb[b + 1]], aca_tol)
                Xba, sba, Yba = aca_cauchy(self.mu[rb[b] : rb[b + 1]], self.lam[cb[a] : cb[a + 1]], aca_tol)
                rowpiece[l][a] = (Xab, sab)
                rowpiece[l][b] = (Xba, sba)
                colpiece[l][b] = (Yab, sab)
                colpiece[l][a] = (Yba, sba)
                block_ranks += [sab.size, sba.size]
                aca_entries += Xab.size + Yab.size + Xba.size + Yba.size
        self.block_ranks = block_ranks

        def leaf_pass(pieces, tree):
            bL = tree.bounds(L)
            bases, proj = [], []
            gmax = 0
            for t in range(nl):
                lo, hi = bL[t], bL[t + 1]
                Gs, ws, widths = [], [], []
                for l in range(1, L + 1):
                    anc = t >> (L - l)
                    off = tree.bounds(l)[anc]
                    X, s = pieces[l][anc]
                    Gs.append(X[lo - off : hi - off])
                    ws.append(s)
                    widths.append(s.size)
                G = np.hstack(Gs)
                gmax = max(gmax, G.size)
                Ub = _orth_trunc(G, np.concatenate(ws), tol)
                P = Ub.conj().T @ G
                proj.append(np.split(P, np.cumsum(widths)[:-1], axis=1))
                bases.append(Ub)
            return bases, proj, gmax

        U_leaf, prow, g1 = leaf_pass(rowpiece, rt)
        V_leaf, pcol, g2 = leaf_pass(colpiece, ct)
        self.build_peak_entries = int(aca_entries + self.D.size + g1 + g2)
        self.row_ranks = [None] * (L + 1)
        self.col_ranks = [None] * (L + 1)
        self.row_ranks[L] = np.array([u.shape[1] for u in U_leaf])
        self.col_ranks[L] = np.array([v.shape[1] for v in V_leaf])
        self.row_ranks[0] = np.zeros(1, dtype=int)
        self.col_ranks[0] = np.zeros(1, dtype=int)
        self.U_leaf = _pad3(U_leaf, rt.leaf_size, int(self.row_ranks[L].max()), self.dtype)
        self.V_leaf = _pad3(V_leaf, ct.leaf_size, int(self.col_ranks[L].max()), self.dtype)

        def couple(l, prow, pcol):
            # B12[l][i]: C[I_2i, J_2i+1]; B21[l][i]: C[I_2i+1, J_2i]
            b12, b21 = [], []
            for i in range(2 ** (l - 1)):
                a, b = 2 * i, 2 * i + 1
                s_ab = rowpiece[l][a][1]
                s_ba = rowpiece[l][b][1]
                b12.append((prow[a][l - 1] * s_ab[None, :]) @ pcol[b][l - 1].conj().T)
                b21.append((prow[b][l - 1] * s_ba[None, :]) @ pcol[a][l - 1].conj().T)
            rr = int(self.row_ranks[l].max())
            cr = int(self.col_ranks[l].max())
            self.B12[l] = _pad3(b12, rr, cr, self.dtype)
            self.B21[l] = _pad3(b21, rr, cr, self.dtype)

        def up(l, proj, pieces, ranks):
            # nodes at level l from children at level l+1; returns translations and new projections
            trans, newproj, newranks = [], [], []
            for t in range(2**l):
                c1, c2 = 2 * t, 2 * t + 1
                stacks = [np.vstack([proj[c1][lp], proj[c2][lp]]) for lp in range(l)]
                ws = np.concatenate([pieces[lp + 1][t >> (l - lp - 1)][1] for lp in range(l)])
                G = np.hstack(stacks)
                Rb = _orth_trunc(G, ws, tol)
                r1 = proj[c1][0].shape[0] if l else 0
                trans.append((Rb[:r1], Rb[r1:]))
                newproj.append([Rb.conj().T @ S for S in stacks])
                newranks.append(Rb.shape[1])
            return trans, newproj, np.array(newranks)

        for l in range(L - 1, 0, -1):
            couple(l + 1, prow, pcol)
            trow, prow_new, rr = up(l, prow, rowpiece, self.row_ranks)
            tcol, pcol_new, cr = up(l, pcol, colpiece, self.col_ranks)
            self.row_ranks[l] = rr
            self.col_ranks[l] = cr
            self.R_row[l + 1] = self._pack_trans(trow, l)
            self.R_col[l + 1] = self._pack_trans(tcol, l, col=True)
            prow, pcol = prow_new, pcol_new
        couple(1, prow, pcol)

    def _pack_trans(self, trans, l, col=False):
        ranks = self.col_ranks if col else self.row_ranks
        rc = int(ranks[l + 1].max())
        rp = int(ranks[l].max())
        blocks = []
        for R1, R2 in trans:
            blocks += [R1, R2]
        return _pad3(blocks, rc, rp, self.dtype)

    # -- queries ------------------------------------------------------------
    @property
    def shape(self) -> tuple[int, int]:
        return self.mu.size, self.lam.size

    def rank(self) -> int:
        """Largest stored rank over all off-diagonal sibling blocks; 0 without any."""
        return max(self.block_ranks, default=0)

    def basis_rank(self) -> int:
        """Largest nested-basis dimension over all nodes, rows and columns."""
        r = 0
        for arr in self.row_ranks + self.col_ranks:
            if arr is not None and arr.size:
                r = max(r, int(arr.max()))
        return r

    def storage_entries(self) -> int:
        """Stored scalars (including zero padding) of the HSS representation."""
        total = self.D.size + self.U_leaf.size + self.Vh_leaf.size
        for dct in (self.R_row, self.Rh_col, self.B12, self.B21):
            total += sum(a.size for a in dct.values())
        return int(total)

    def _count(self, ncols):
        with self._lock:
            self.calls += 1
            self.vectors += ncols

    # -- products -----------------------------------------------------------
    def _prepare(self):
        # forward factors, and the transposed ones as zero-copy views
        L = self.depth
        self.Vh_leaf = np.ascontiguousarray(self.V_leaf.conj().transpose(0, 2, 1))
        self.Rh_col = {l: np.ascontiguousarray(r.conj().transpose(0, 2, 1)) for l, r in self.R_col.items()}
        del self.V_leaf, self.R_col

        def t(a):
            return a.transpose(0, 2, 1)

        self._fwd = (self.D, self.Vh_leaf, self.Rh_col, self.B12, self.B21, self.R_row, self.U_leaf)
        self._trn = (
            t(self.D),
            t(self.U_leaf),
            {l: t(r) for l, r in self.R_row.items()},
            {l: t(b) for l, b in self.B21.items()},
            {l: t(b) for l, b in self.B12.items()},
            {l: t(r) for l, r in self.Rh_col.items()},
            t(self.Vh_leaf),
        )
        self._depth = L

    def _sweep(self, x, transpose):
        L = self.depth
        Ml, Mr = self.shape
        if transpose:
            in_idx, out_idx, out_m = self.row_idx, self.col_idx, Mr
            D, Vh, Rup, B12, B21, Rdown, U = self._trn
        else:
            in_idx, out_idx, out_m = self.col_idx, self.row_idx, Ml
            D, Vh, Rup, B12, B21, Rdown, U = self._fwd
        k = x.shape[1]
        dtype = np.result_type(self.dtype, x)
        xe = np.concatenate([x, np.zeros((1, k), dtype=x.dtype)], axis=0)
        xp = xe[in_idx]  # (nl, s_in, k)
        yp = np.matmul(D, xp)
        if L:
            xh = {L: np.matmul(Vh, xp)}
            for l in range(L, 1, -1):
                t = np.matmul(Rup[l], xh[l])
                xh[l - 1] = t.reshape(2 ** (l - 1), 2, t.shape[1], k).sum(axis=1)
            yh = None
            for l in range(1, L + 1):
                x2 = xh[l].reshape(2 ** (l - 1), 2, xh[l].shape[1], k)
                cpl = np.empty((2 ** (l - 1), 2, B12[l].shape[1], k), dtype=dtype)
                np.matmul(B12[l], x2[:, 1], out=cpl[:, 0])
                np.matmul(B21[l], x2[:, 0], out=cpl[:, 1])
                if yh is not None:
                    R = Rdown[l]
                    cpl += np.matmul(R.reshape(2 ** (l - 1), 2, R.shape[1], R.shape[2]), yh[:, None])
                yh = cpl.reshape(2**l, B12[l].shape[1], k)
            yp = yp + np.matmul(U, yh)
        out = np.empty((out_m + 1, k), dtype=dtype)
        out[out_idx.ravel()] = yp.reshape(-1, k)
        return out[:out_m]

    def _adjoint_sweep(self, x):
        # C^H x = conj(C^T conj(x)); no conjugation needed for real factors
        if np.iscomplexobj(np.empty(0, self.dtype)):
            return self._sweep(x.conj(), True).conj()
        out = self._sweep(x, True)
        return out

    def apply(self, y):
        """``C~ @ y`` for a vector or an ``(Mr, k)`` block."""
        y = np.asarray(y)
        vec = y.ndim == 1
        Y = y[:, None] if vec else y
        if Y.shape[0] != self.shape[1]:
            raise ValueError(f"dimension mismatch: C~ is {self.shape}, got {y.shape[0]} rows")
        self._count(Y.shape[1])
        out = self._sweep(Y, False)
        return out[:, 0] if vec else out

    def apply_adjoint(self, y):
        """``C~^H @ y`` using the stored factors in conjugate-transposed order."""
        y = np.asarray(y)
        vec = y.ndim == 1
        Y = y[:, None] if vec else y
        if Y.shape[0] != self.shape[0]:
            raise ValueError(f"dimension mismatch: C~^H is {self.shape[::-1]}, got {y.shape[0]} rows")
        self._count(Y.shape[1])
        out = self._adjoint_sweep(Y)
        return out[:, 0] if vec else out

    def densify(self, limit: int | None = None) -> np.ndarray:
        from .dense import DENSE_LIMIT, _check_limit

        _check_limit(self.shape, DENSE_LIMIT if limit is None else limit)
        return self._sweep(np.eye(self.shape[1], dtype=self.dtype), False)


def build_hss_cauchy(mu, lam, tol: float = DEFAULT_TOL, leaf: int = DEFAULT_LEAF) -> HssCauchy:
    """Compress ``1/(mu_h - lam_k)`` into HSS form with relative tolerance ``tol``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    mu = np.asarray(mu)
    lam = np.asarray(lam)
    if mu.ndim != 1 or lam.ndim != 1 or mu.size == 0 or lam.size == 0:
        raise ValueError("mu and lam must be non-empty 1-D arrays")
    common = np.intersect1d(mu, lam)
    if common.size:
        h = int(np.flatnonzero(mu == common[0])[0])
        k = int(np.flatnonzero(lam == common[0])[0])
        raise ZeroDivisionError(f"point collision: mu[{h}] == lam[{k}] == {common[0]!r}")
    c = HssCauchy(mu, lam, tol, leaf)
    c._build()
    c._prepare()
    return c


def hss_apply(c: HssCauchy, y):
    return c.apply(y)


def hss_apply_adjoint(c: HssCauchy, y):
    return c.apply_adjoint(y)


def hss_rank(c: HssCauchy) -> int:
    return c.rank()


def cauchy_matvec(mu, lam, y, chunk: int = 512):
    """Exact ``C @ y`` streamed over row blocks (never holds all of ``C``)."""
    y = np.asarray(y)
    vec = y.ndim == 1
    Y = y[:, None] if vec else y
    out = np.empty((mu.size, Y.shape[1]), dtype=np.result_type(mu, lam, Y, np.float64))
    for s in range(0, mu.size, chunk):
        out[s : s + chunk] = _kernel(mu[s : s + chunk], lam) @ Y
    return out[:, 0] if vec else out


def cauchy_rmatvec(mu, lam, y, chunk: int = 512):
    """Exact ``C^H @ y`` streamed over row blocks."""
    y = np.asarray(y)
    vec = y.ndim == 1
    Y = y[:, None] if vec else y
    out = np.zeros((lam.size, Y.shape[1]), dtype=np.result_type(mu, lam, Y, np.float64))
    for s in range(0, mu.size, chunk):
        out += _kernel(mu[s : s + chunk], lam).conj().T @ Y[s : s + chunk]
    return out[:, 0] if vec else out


def hss_error_estimate(c: HssCauchy, iters: int = 20, seed=0) -> float:
    """Estimate ``||C - C~||_2`` by power iteration on the difference.

    The exact product is streamed row block by row block, so this costs
    ``O(M^2)`` time per iteration but only ``O(M)`` extra memory.
    """
    rng = np.random.default_rng(seed)
    Ml, Mr = c.shape
    x = rng.standard_normal(Mr)
    if np.iscomplexobj(np.empty(0, c.dtype)):
        x = x + 1j * rng.standard_normal(Mr)
    x /= np.linalg.norm(x)
    sigma = 0.0
    for _ in range(iters):
        y = cauchy_matvec(c.mu, c.lam, x) - c.apply(x)
        z = cauchy_rmatvec(c.mu, c.lam, y) - c.apply_adjoint(y)
        nz = np.linalg.norm(z)
        if nz == 0:
            return 0.0
        sigma = math.sqrt(nz)
        x = z / nz
    return sigma
