"""Reduced descriptor models ``H(s) = C (sE - A)^{-1} B + D``."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .data import FrequencyDataset

__all__ = [
    "ReducedModel",
    "IllConditionedError",
    "ModelFileError",
    "eval_tf",
    "freqresp",
    "h2_error",
    "save_model",
    "load_model",
]

COND_LIMIT = 1e12


class IllConditionedError(ArithmeticError):
    """``sE - A`` is (numerically) singular at an evaluation point."""

    def __init__(self, s, cond):
        super().__init__(f"pencil sE - A is ill-conditioned at s={s!r} (condition estimate {cond:.3e})")
        self.s = s
        self.cond = cond


class ModelFileError(ValueError):
    pass


@dataclass(frozen=True)
class ReducedModel:
    E: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    flavor: str = "complex"

    def __post_init__(self):
        if self.flavor not in ("real", "complex"):
            raise ValueError(f"unknown flavor {self.flavor!r}")
        dt = float if self.flavor == "real" else complex
        mats = {}
        for name in "EABCD":
            a = np.atleast_2d(np.asarray(getattr(self, name)))
            if dt is float:
                if np.iscomplexobj(a):
                    if np.any(a.imag != 0):
                        raise ValueError(f"real-flavor model has complex entries in {name}")
                    a = a.real
            mats[name] = np.array(a, dtype=dt)
        E, A, B, C, D = (mats[k] for k in "EABCD")
        n = E.shape[0]
        if E.shape != (n, n) or A.shape != (n, n):
            raise ValueError(f"E and A must be square of equal size, got {E.shape}, {A.shape}")
        if B.shape[0] != n or C.shape[1] != n:
            raise ValueError(f"B {B.shape} / C {C.shape} inconsistent with order {n}")
        if D.shape != (C.shape[0], B.shape[1]):
            raise ValueError(f"D has shape {D.shape}, expected {(C.shape[0], B.shape[1])}")
        for k, a in mats.items():
            a.setflags(write=False)
            object.__setattr__(self, k, a)

    @property
    def order(self) -> int:
        return self.E.shape[0]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @property
    def q(self) -> int:
        return self.B.shape[1]

    def __call__(self, s):
        return eval_tf(self, s)


def eval_tf(m: ReducedModel, s: complex) -> np.ndarray:
    """Evaluate ``C (sE - A)^{-1} B + D`` at a single point ``s``.

    Uses one pivoted LU factorization; raises :class:`IllConditionedError`
    when the 1-norm condition estimate of ``sE - A`` exceeds ``1e12``.
    """
    K = s * m.E - m.A
    anorm = np.linalg.norm(K, 1)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu, piv = sla.lu_factor(K, check_finite=True)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise IllConditionedError(s, np.inf) from exc
    if np.any(np.diag(lu) == 0):
        raise IllConditionedError(s, np.inf)
    gecon = sla.get_lapack_funcs("gecon", (lu,))
    rcond, info = gecon(lu, anorm, norm="1")
    cond = np.inf if rcond == 0 else 1.0 / rcond
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise IllConditionedError(s, cond)
    X = sla.lu_solve((lu, piv), m.B)
    return m.C @ X + m.D


def freqresp(m: ReducedModel, s, chunk: int = 4096) -> np.ndarray:
    """Evaluate the transfer function at many points; returns ``(len(s), p, q)``.

    The pencil is reduced once to generalized Schur form, after which each
    point costs one triangular solve. The condition check uses the cheap
    estimate ``||T(s)||_F / min |diag T(s)|`` of the triangular factor.
    """
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    AA, BB, Q, Z = sla.qz(m.A, m.E, output="complex")
    Cz = m.C @ Z
    Bq = Q.conj().T @ m.B
    n = m.order
    out = np.empty((s.size, m.p, m.q), dtype=complex)
    for start in range(0, s.size, chunk):
        sc = s[start : start + chunk]
        X = np.zeros((sc.size, n, m.q), dtype=complex)
        diag = sc[:, None] * np.diag(BB)[None, :] - np.diag(AA)[None, :]
        fro2 = np.zeros(sc.size)
        for i in range(n - 1, -1, -1):
            rhs = np.broadcast_to(Bq[i], (sc.size, m.q)).copy()
            if i < n - 1:
                Xt = X[:, i + 1 :, :]
                rhs -= sc[:, None] * np.einsum("j,sjq->sq", BB[i, i + 1 :], Xt)
                rhs += np.einsum("j,sjq->sq", AA[i, i + 1 :], Xt)
                row = sc[:, None] * BB[i, i + 1 :][None, :] - AA[i, i + 1 :][None, :]
                fro2 += np.sum(np.abs(row) ** 2, axis=1)
            with np.errstate(divide="ignore", invalid="ignore"):
                X[:, i, :] = rhs / diag[:, i, None]
        fro2 += np.sum(np.abs(diag) ** 2, axis=1)
        mind = np.min(np.abs(diag), axis=1)
        with np.errstate(divide="ignore"):
            cond = np.sqrt(fro2) / mind
        bad = ~np.isfinite(cond) | (cond > COND_LIMIT)
        if np.any(bad):
            k = int(np.argmax(bad))
            raise IllConditionedError(complex(sc[k]), float(cond[k]))
        out[start : start + sc.size] = np.einsum("pn,snq->spq", Cz, X) + m.D
    return out


def h2_error(m: ReducedModel, d: FrequencyDataset) -> float:
    """Normalized discrete H2 error ``sqrt(sum ||H_j - H(iw_j)||_F^2 / sum ||H_j||_F^2)``."""
    if (m.p, m.q) != (d.p, d.q):
        raise ValueError(f"model is {m.p}x{m.q} but data is {d.p}x{d.q}")
    den = float(np.sum(np.abs(d.H) ** 2))
    if den == 0:
        raise ZeroDivisionError("all-zero dataset: normalized H2 error undefined")
    Hm = freqresp(m, 1j * d.omega)
    num = float(np.sum(np.abs(d.H - Hm) ** 2))
    return float(np.sqrt(num / den))


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def save_model(m: ReducedModel, path) -> None:
    """Write ``m`` as plain text with 17 significant digits."""
    lines = [f"loewner-model v1 flavor={m.flavor} n={m.order} p={m.p} q={m.q}"]
    for name in "EABCD":
        a = getattr(m, name)
        lines.append(f"{name} {a.shape[0]} {a.shape[1]}")
        for row in a:
            if m.flavor == "real":
                lines.append(" ".join(_fmt(v) for v in row))
            else:
                lines.append(" ".join(f"{_fmt(v.real)} {_fmt(v.imag)}" for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> ReducedModel:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("loewner-model v1"):
        raise ModelFileError(f"{path}: missing 'loewner-model v1' header")
    hdr = dict(tok.split("=", 1) for tok in lines[0].split()[2:] if "=" in tok)
    try:
        flavor = hdr["flavor"]
        n, p, q = int(hdr["n"]), int(hdr["p"]), int(hdr["q"])
    except (KeyError, ValueError) as exc:
        raise ModelFileError(f"{path}: malformed header {lines[0]!r}") from exc
    if flavor not in ("real", "complex"):
        raise ModelFileError(f"{path}: unknown flavor {flavor!r}")
    expect = {"E": (n, n), "A": (n, n), "B": (n, q), "C": (p, n), "D": (p, q)}
    per = 1 if flavor == "real" else 2
    mats = {}
    pos = 1
    for name in "EABCD":
        if pos >= len(lines):
            raise ModelFileError(f"{path}: missing block {name}")
        tok = lines[pos].split()
        if len(tok) != 3 or tok[0] != name:
            raise ModelFileError(f"{path}: expected block header '{name} rows cols', got {lines[pos]!r}")
        rows, cols = int(tok[1]), int(tok[2])
        if (rows, cols) != expect[name]:
            raise ModelFileError(
                f"{path}: block {name} is {rows}x{cols} but header n={n} p={p} q={q} implies {expect[name]}"
            )
        data = []
        for r in range(rows):
            pos += 1
            if pos >= len(lines):
                raise ModelFileError(f"{path}: block {name} truncated")
            vals = lines[pos].split()
            if len(vals) != per * cols:
                other = "complex" if per == 1 else "real"
                if len(vals) == (3 - per) * cols:
                    raise ModelFileError(
                        f"{path}: block {name} row {r} looks {other} but header says flavor={flavor}"
                    )
                raise ModelFileError(f"{path}: block {name} row {r} has {len(vals)} values")
            try:
                nums = [float(v) for v in vals]
            except ValueError as exc:
                raise ModelFileError(f"{path}: block {name} row {r}: {exc}") from exc
            if per == 2:
                nums = [complex(a, b) for a, b in zip(nums[0::2], nums[1::2])]
            data.append(nums)
        pos += 1
        dt = float if per == 1 else complex
        mats[name] = np.array(data, dtype=dt).reshape(rows, cols)
    return ReducedModel(flavor=flavor, **mats)
