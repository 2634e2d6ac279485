"""Frequency-response datasets, CSV I/O and synthetic benchmark systems."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "DatasetError",
    "FrequencyDataset",
    "SyntheticSystem",
    "load_dataset",
    "save_dataset",
    "generate_synthetic",
    "sample_system",
    "save_system",
    "load_system",
]


class DatasetError(ValueError):
    """Raised for malformed or invalid frequency-response data."""


@dataclass(frozen=True)
class FrequencyDataset:
    """Ordered samples ``(f_j, H_j)`` with ``H_j`` a ``p x q`` complex matrix.

    Parameters
    ----------
    freqs : ndarray, shape (N,)
        Frequencies in Hz, strictly increasing and positive.
    H : ndarray, shape (N, p, q)
        Complex response matrices.
    """

    freqs: np.ndarray
    H: np.ndarray

    def __post_init__(self):
        freqs = np.asarray(self.freqs, dtype=float)
        H = np.asarray(self.H, dtype=complex)
        if freqs.ndim != 1:
            raise DatasetError("frequencies must be a 1-D array")
        if H.ndim == 1:
            H = H[:, None, None]
        if H.ndim != 3 or H.shape[0] != freqs.shape[0]:
            raise DatasetError(
                f"response array shape {H.shape} does not match {freqs.shape[0]} frequencies"
            )
        if freqs.shape[0] < 2:
            raise DatasetError(f"need at least 2 samples, got {freqs.shape[0]}")
        if not np.all(np.isfinite(freqs)) or np.any(freqs <= 0):
            raise DatasetError("frequencies must be finite and strictly positive")
        if np.any(np.diff(freqs) <= 0):
            raise DatasetError("frequencies must be strictly increasing (no duplicates)")
        freqs.setflags(write=False)
        H.setflags(write=False)
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "H", H)

    @property
    def N(self) -> int:
        return self.freqs.shape[0]

    @property
    def p(self) -> int:
        return self.H.shape[1]

    @property
    def q(self) -> int:
        return self.H.shape[2]

    @property
    def omega(self) -> np.ndarray:
        return 2 * np.pi * self.freqs


def _parse_meta(line: str) -> dict[str, int]:
    meta = {}
    for tok in line.lstrip("#").split():
        if "=" in tok:
            k, v = tok.split("=", 1)
            meta[k.strip()] = v.strip()
    out = {}
    for key in ("p", "q"):
        if key in meta:
            try:
                out[key] = int(meta[key])
            except ValueError as exc:
                raise DatasetError(f"bad metadata value {key}={meta[key]!r}") from exc
    return out


def load_dataset(path, format: str = "csv") -> FrequencyDataset:
    """Read a dataset from a CSV file.

    Layout: a ``# p=<p> q=<q>`` comment, a header row starting with
    ``freq_hz``, then one row per sample holding the frequency followed by
    the ``p*q`` entries of ``H_j`` in row-major order as ``re,im`` column
    pairs. Rows may appear in any order; they are sorted by frequency.
    """
    if format != "csv":
        raise DatasetError(f"unsupported dataset format {format!r}")
    p = q = None
    rows = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                meta = _parse_meta(line)
                p = meta.get("p", p)
                q = meta.get("q", q)
                continue
            if line.lower().startswith("freq_hz"):
                continue
            try:
                vals = [float(tok) for tok in line.split(",")]
            except ValueError as exc:
                raise DatasetError(f"{path}:{lineno}: malformed row: {exc}") from exc
            rows.append((lineno, vals))
    if p is None or q is None:
        raise DatasetError(f"{path}: missing '# p=<p> q=<q>' metadata line")
    if p < 1 or q < 1:
        raise DatasetError(f"{path}: p and q must be positive, got p={p} q={q}")
    ncol = 1 + 2 * p * q
    for lineno, vals in rows:
        if len(vals) != ncol:
            raise DatasetError(
                f"{path}:{lineno}: expected {ncol} columns for p={p} q={q}, got {len(vals)}"
            )
    if len(rows) < 2:
        raise DatasetError(f"{path}: need at least 2 samples, got {len(rows)}")
    arr = np.array([vals for _, vals in rows], dtype=float)
    freqs = arr[:, 0]
    if np.any(freqs <= 0) or not np.all(np.isfinite(freqs)):
        raise DatasetError(f"{path}: nonpositive or non-finite frequency")
    order = np.argsort(freqs, kind="stable")
    freqs = freqs[order]
    dup = np.nonzero(np.diff(freqs) == 0)[0]
    if dup.size:
        raise DatasetError(f"{path}: duplicate frequency {freqs[dup[0]]!r}")
    H = (arr[order, 1::2] + 1j * arr[order, 2::2]).reshape(-1, p, q)
    return FrequencyDataset(freqs, H)


def save_dataset(d: FrequencyDataset, path) -> None:
    """Write ``d`` in the CSV layout read by :func:`load_dataset`."""
    if not isinstance(d, FrequencyDataset):
        raise DatasetError("save_dataset expects a FrequencyDataset")
    p, q = d.p, d.q
    cols = ["freq_hz"]
    for i in range(p):
        for j in range(q):
            cols += [f"re_{i + 1}_{j + 1}", f"im_{i + 1}_{j + 1}"]
    flat = d.H.reshape(d.N, p * q)
    with open(path, "w") as fh:
        fh.write(f"# p={p} q={q}\n")
        fh.write(",".join(cols) + "\n")
        for f, h in zip(d.freqs, flat):
            parts = [repr(float(f))]
            for z in h:
                parts.append(repr(float(z.real)))
                parts.append(repr(float(z.imag)))
            fh.write(",".join(parts) + "\n")


@dataclass(frozen=True)
class SyntheticSystem:
    """Real LTI system in pole-residue form, poles in conjugate pairs.

    ``H(s) = sum_k residues[k] / (s - poles[k]) + D``.
    """

    poles: np.ndarray
    residues: np.ndarray
    D: np.ndarray = field(default=None)

    def __post_init__(self):
        poles = np.asarray(self.poles, dtype=complex)
        res = np.asarray(self.residues, dtype=complex)
        if res.ndim != 3 or res.shape[0] != poles.shape[0]:
            raise ValueError("residues must have shape (n, p, q) matching poles")
        D = np.zeros(res.shape[1:]) if self.D is None else np.asarray(self.D, dtype=float)
        if D.shape != res.shape[1:]:
            raise ValueError(f"D has shape {D.shape}, expected {res.shape[1:]}")
        for a in (poles, res, D):
            a.setflags(write=False)
        object.__setattr__(self, "poles", poles)
        object.__setattr__(self, "residues", res)
        object.__setattr__(self, "D", D)

    @property
    def order(self) -> int:
        return self.poles.shape[0]

    @property
    def p(self) -> int:
        return self.residues.shape[1]

    @property
    def q(self) -> int:
        return self.residues.shape[2]

    @property
    def is_stable(self) -> bool:
        """False if any generated pole has a nonnegative real part."""
        return bool(np.all(self.poles.real < 0))

    def __call__(self, s) -> np.ndarray:
        """Evaluate the transfer function at the points ``s`` (any shape)."""
        s = np.asarray(s, dtype=complex)
        flat = s.reshape(-1)
        out = np.einsum("jk,kpq->jpq", 1.0 / (flat[:, None] - self.poles[None, :]), self.residues)
        out = out + self.D
        return out.reshape(s.shape + self.D.shape)


def generate_synthetic(n: int, p: int, seed=None, q: int | None = None, D=None) -> SyntheticSystem:
    """Random stable-in-probability system with ``n/2`` conjugate pole pairs.

    Pole real parts ~ N(-1e4, 2e3), imaginary parts ~ N(1e4, 1e6).
    Residues are outer products ``a b^T`` of random vectors with real parts
    ~ N(0, 10) and imaginary parts ~ N(0, 100); the conjugate pole gets the
    conjugate residue.
    """
    if n <= 0 or n % 2:
        raise ValueError(f"order must be a positive even integer, got {n}")
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    q = p if q is None else q
    rng = np.random.default_rng(seed)
    half = n // 2
    pr = rng.normal(-1e4, 2e3, half)
    pi = rng.normal(1e4, 1e6, half)
    a = rng.normal(0.0, 10.0, (half, p)) + 1j * rng.normal(0.0, 1e2, (half, p))
    b = rng.normal(0.0, 10.0, (half, q)) + 1j * rng.normal(0.0, 1e2, (half, q))
    res = a[:, :, None] * b[:, None, :]
    poles = np.empty(n, dtype=complex)
    poles[0::2] = pr + 1j * pi
    poles[1::2] = pr - 1j * pi
    residues = np.empty((n, p, q), dtype=complex)
    residues[0::2] = res
    residues[1::2] = res.conj()
    return SyntheticSystem(poles, residues, D)


def sample_system(
    sys: SyntheticSystem,
    N: int,
    f_min: float,
    f_max: float,
    snr_db: float | None = None,
    seed=None,
) -> FrequencyDataset:
    """Sample ``sys`` at ``N`` log-spaced frequencies in ``[f_min, f_max]`` Hz.

    With ``snr_db`` set, i.i.d. circular complex Gaussian noise is added to
    every matrix entry with variance chosen so that (mean signal power) /
    (noise power) equals ``10**(snr_db/10)`` over the whole dataset.
    """
    if N < 2:
        raise ValueError(f"need N >= 2, got {N}")
    if not (0 < f_min < f_max):
        raise ValueError(f"need 0 < f_min < f_max, got {f_min}, {f_max}")
    freqs = np.geomspace(f_min, f_max, N)
    freqs[0], freqs[-1] = f_min, f_max
    H = sys(1j * 2 * np.pi * freqs)
    if snr_db is not None:
        rng = np.random.default_rng(seed)
        power = np.mean(np.abs(H) ** 2)
        sigma = math.sqrt(power / 10 ** (snr_db / 10))
        noise = rng.standard_normal(H.shape) + 1j * rng.standard_normal(H.shape)
        H = H + sigma / math.sqrt(2) * noise
    return FrequencyDataset(freqs, H)


def save_system(sys: SyntheticSystem, path) -> None:
    """Write the true system as JSON (poles, residues, D)."""
    doc = {
        "format": "pole-residue v1",
        "p": sys.p,
        "q": sys.q,
        "poles": [[z.real, z.imag] for z in sys.poles.tolist()],
        "residues": [
            [[[z.real, z.imag] for z in row] for row in R] for R in sys.residues.tolist()
        ],
        "D": sys.D.tolist(),
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def load_system(path) -> SyntheticSystem:
    doc = json.loads(Path(path).read_text())
    poles = np.array([complex(a, b) for a, b in doc["poles"]])
    res = np.array([[[complex(a, b) for a, b in row] for row in R] for R in doc["residues"]])
    return SyntheticSystem(poles, res.reshape(len(poles), doc["p"], doc["q"]), doc["D"])
