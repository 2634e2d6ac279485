"""End-to-end fitting: partition, construct, reduce, score."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .data import FrequencyDataset
from .dense import DENSE_LIMIT, DenseLimitError, build_dense, full_svd_reduce, pencil, project
from .hss import DEFAULT_LEAF, DEFAULT_TOL, build_hss_cauchy
from .model import IllConditionedError, ReducedModel, h2_error
from .operator import LoewnerOperator, order_heuristic
from .partition import PartitionKind, partition
from .svd import partial_svd, reduce

__all__ = ["METHODS", "FitResult", "ConvergenceError", "fit", "resolve_shift"]

METHODS = ("dense-svd", "dense-svds", "hss")


class ConvergenceError(ArithmeticError):
    """The partial SVD did not converge within its restart budget."""


@dataclass
class FitResult:
    model: ReducedModel
    report: dict = field(default_factory=dict)


def resolve_shift(d: FrequencyDataset, x="first") -> float:
    """``"first"`` (the lowest sample frequency) or an explicit real value."""
    if x is None or (isinstance(x, str) and x.strip().lower() == "first"):
        return float(d.freqs[0])
    return float(x)


def _resolve_order(order, op_like, shape):
    if order is None or (isinstance(order, str) and order.strip().lower() == "auto"):
        n = min(order_heuristic(op_like), min(shape))
        if n < 1:
            raise ValueError("automatic order is 0 (leaf-only HSS tree); pass an explicit order")
        return n, True
    n = int(order)
    if not 1 <= n <= min(shape):
        raise ValueError(f"order {n} must lie in [1, {min(shape)}]")
    return n, False


def _start_vector(pd):
    return pd.V[:, 0]


def fit(
    d: FrequencyDataset,
    method: str = "hss",
    partition_kind="odd-even-real",
    order=50,
    x="first",
    tol: float = DEFAULT_TOL,
    leaf: int = DEFAULT_LEAF,
    seed: int = 0,
    conv_tol: float = 1e-8,
    max_restarts: int = 200,
    dense_limit: int = DENSE_LIMIT,
    score: bool = True,
    strict: bool = True,
) -> FitResult:
    """Fit a reduced descriptor model to ``d``.

    ``method`` is ``dense-svd`` (dense pencil, full SVD), ``dense-svds``
    (dense pencil, iterative partial SVD) or ``hss`` (matrix-free).
    Construction time covers partitioning plus building the pencil (dense)
    or the HSS Cauchy matrix; reduction time covers SVD and projection.
    With ``strict`` a non-converged partial SVD raises
    :class:`ConvergenceError`.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    kind = PartitionKind.parse(partition_kind)
    shift = resolve_shift(d, x)
    report = {"method": method, "partition": kind.value, "N": d.N, "p": d.p, "q": d.q, "x": shift}

    t0 = time.perf_counter()
    pd = partition(d, kind)
    report["M"] = max(pd.shape)
    if method.startswith("dense"):
        if max(pd.shape) > dense_limit:
            raise DenseLimitError(
                f"{method} needs a dense {pd.shape[0]}x{pd.shape[1]} pencil, above the dense limit {dense_limit}"
            )
        dp = build_dense(pd, dense_limit)
        t1 = time.perf_counter()
        rank_src = None
        if isinstance(order, str) and order.strip().lower() == "auto":
            rank_src = LoewnerOperator(build_hss_cauchy(pd.mu, pd.lam, tol, leaf), pd, shift)
        n, auto = _resolve_order(order, rank_src, pd.shape)
        if method == "dense-svd":
            model = full_svd_reduce(dp, pd, shift, n)
            svd_info = {"converged": True, "matvecs": 0, "restarts": 0}
            work = min(pd.shape) * sum(pd.shape) + pd.shape[0] * pd.shape[1]
        else:
            K = pencil(dp, shift)
            res = partial_svd(
                lambda v: K @ v,
                lambda v: K.conj().T @ v,
                pd.shape,
                n,
                start=_start_vector(pd),
                conv_tol=conv_tol,
                max_restarts=max_restarts,
                seed=seed,
            )
            svd_info = {"converged": res.converged, "matvecs": res.matvec_count, "restarts": res.iterations}
            if strict and not res.converged:
                raise ConvergenceError(f"partial SVD did not converge in {max_restarts} restarts")
            model = project(dp, pd, res.U, res.Vt.conj().T)
            kd = min(max(2 * n + 10, 20), min(pd.shape))
            work = K.size + kd * sum(pd.shape)
        storage = dp.storage_entries() + pd.storage_entries() + work
        report["hss_rank"] = rank_src.cauchy.rank() if rank_src is not None else ""
    else:
        c = build_hss_cauchy(pd.mu, pd.lam, tol, leaf)
        op = LoewnerOperator(c, pd, shift)
        t1 = time.perf_counter()
        n, auto = _resolve_order(order, op, pd.shape)
        res = partial_svd(
            op.apply,
            op.apply_adjoint,
            pd.shape,
            n,
            start=_start_vector(pd),
            conv_tol=conv_tol,
            max_restarts=max_restarts,
            seed=seed,
        )
        svd_info = {"converged": res.converged, "matvecs": res.matvec_count, "restarts": res.iterations}
        if strict and not res.converged:
            raise ConvergenceError(f"partial SVD did not converge in {max_restarts} restarts")
        model = reduce(res, op, n)
        kd = min(max(2 * n + 10, 20), min(pd.shape))
        # HSS data + data factors + Krylov bases + the widest batched HSS workspace
        storage = max(op.storage_entries(), c.build_peak_entries + pd.storage_entries())
        storage += kd * sum(pd.shape) + op.n_terms * n * max(pd.shape)
        report["hss_rank"] = c.rank()
    t2 = time.perf_counter()
    report.update(
        construction_s=t1 - t0,
        reduction_s=t2 - t1,
        storage_entries=int(storage),
        n=n,
        order_auto=auto,
        **svd_info,
    )
    if score:
        try:
            report["h2_error"] = h2_error(model, d)
        except IllConditionedError as exc:
            report["h2_error"] = float("nan")
            report["h2_note"] = str(exc)
    return FitResult(model, report)
