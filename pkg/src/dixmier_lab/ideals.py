"""Singular-value sequences and the quasi-norms of weak and Lorentz ideals.

All suprema scan only the stored entries; every result carries the length
``N`` of the sequence it was computed from, so callers can study how the
finite evidence changes with truncation.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable

import numpy as np
import scipy.linalg

from .regvar import VaryingFunction

ORIGINS = ("raw", "from_matrix", "from_symbol")


class IdealsError(ValueError):
    """Invalid input to an ideal quasi-norm computation."""


@dataclass(frozen=True)
class SingularSequence:
    """A finite nonincreasing nonnegative sequence μ(0) ≥ μ(1) ≥ ... ≥ 0.

    Use :meth:`from_unsorted` to build one from arbitrary magnitudes.
    """

    values: np.ndarray
    origin: str = "raw"

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).ravel()
        if vals.size and (np.any(vals < 0) or np.any(np.diff(vals) > 0)):
            raise IdealsError("singular sequence must be nonnegative and nonincreasing")
        if np.any(~np.isfinite(vals)):
            raise IdealsError("singular sequence must be finite")
        if self.origin not in ORIGINS:
            raise IdealsError(f"origin must be one of {ORIGINS}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_unsorted(cls, values: Iterable[float], origin: str = "raw") -> "SingularSequence":
        """Sort ``|values|`` decreasingly (stable) and wrap them."""
        mags = np.abs(np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=float))
        order = np.argsort(-mags, kind="stable")
        return cls(mags[order], origin)

    @property
    def N(self) -> int:
        return int(self.values.size)

    def __len__(self) -> int:
        return self.N

    def counting_function(self) -> "CountingFunction":
        return CountingFunction(self)

    def to_csv(self, path=None) -> str:
        """Single-column CSV with header ``mu``."""
        text = "mu\n" + "".join(f"{v!r}\n" for v in self.values.tolist())
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


@dataclass(frozen=True)
class CountingFunction:
    """n(s) = #{k : μ(k) > s} for a stored singular sequence."""

    seq: SingularSequence

    def __call__(self, s):
        # values are nonincreasing, so count entries strictly above s
        desc = self.seq.values
        asc = desc[::-1]
        s = np.asarray(s, dtype=float)
        return desc.size - np.searchsorted(asc, s, side="right")


@dataclass(frozen=True)
class NormReport:
    """A supremum over the stored entries with its argmax and truncation length."""

    value: float
    argmax: int
    N: int


def singular_values(matrix) -> SingularSequence:
    """All singular values of a dense matrix, nonincreasing."""
    a = np.asarray(matrix)
    if a.ndim != 2:
        raise IdealsError("expected a 2-D matrix")
    if not np.all(np.isfinite(a)):
        raise IdealsError("matrix has non-finite entries")
    if a.size == 0:
        return SingularSequence(np.zeros(0), "from_matrix")
    try:
        s = scipy.linalg.svdvals(a)
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(a) if a.shape[0] == a.shape[1] else float("nan")
        raise IdealsError(f"SVD failed ({exc}); condition estimate {cond:.3g}") from exc
    return SingularSequence(np.sort(s)[::-1], "from_matrix")


def _as_seq(seq) -> SingularSequence:
    if isinstance(seq, SingularSequence):
        return seq
    return SingularSequence(np.asarray(seq, dtype=float))


def _sup(ratios: np.ndarray, N: int) -> NormReport:
    if ratios.size == 0:
        return NormReport(0.0, -1, N)
    i = int(np.argmax(ratios))
    return NormReport(float(ratios[i]), i, N)


def weak_quasinorm(seq, f: VaryingFunction) -> NormReport:
    """sup over stored n of μ(n)/φ(n)."""
    s = _as_seq(seq)
    n = np.arange(s.N, dtype=float)
    return _sup(s.values / f.eval(n), s.N)


def lorentz_norm(seq, f: VaryingFunction) -> NormReport:
    """sup over stored n of (1/Φ(n+1)) Σ_{k≤n} μ(k)."""
    s = _as_seq(seq)
    n = np.arange(s.N, dtype=float)
    return _sup(np.cumsum(s.values) / f.primitive(n + 1.0), s.N)


def convexified_quasinorm(seq, f: VaryingFunction, q: float) -> NormReport:
    """(sup μ(n)^q/φ(n))^{1/q}, the quasi-norm of the q-convexification."""
    if q <= 0:
        raise IdealsError("q must be positive")
    s = _as_seq(seq)
    rep = weak_quasinorm(SingularSequence(s.values**q, s.origin), f)
    return NormReport(rep.value ** (1.0 / q), rep.argmax, rep.N)


@dataclass(frozen=True)
class HolderReport:
    """Witnessed constant in ‖AB‖_(q) ≤ C ‖A‖_(q0) ‖B‖_(q1)."""

    C: float
    q: float
    norm_product: float
    norm_a: float
    norm_b: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.C))


def holder_check(A, B, f: VaryingFunction, q0: float, q1: float) -> HolderReport:
    """Quasi-Hölder check for one matrix pair with ``1/q = 1/q0 + 1/q1``.

    ``C`` is the ratio of the product norm to the product of the factor
    norms; it is 0 when the product vanishes.
    """
    if q0 <= 0 or q1 <= 0:
        raise IdealsError("q0 and q1 must be positive")
    A = np.asarray(A)
    B = np.asarray(B)
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[0]:
        raise IdealsError(f"dimension mismatch {A.shape} x {B.shape}")
    q = 1.0 / (1.0 / q0 + 1.0 / q1)
    na = convexified_quasinorm(singular_values(A), f, q0).value
    nb = convexified_quasinorm(singular_values(B), f, q1).value
    nab = convexified_quasinorm(singular_values(A @ B), f, q).value
    if nab == 0.0:
        C = 0.0
    elif na * nb == 0.0:
        C = float("inf")
    else:
        C = nab / (na * nb)
    return HolderReport(C, q, nab, na, nb)


# ---------------------------------------------------------------------------
# I/O


def read_sequence_csv(path) -> np.ndarray:
    """Read a single-column CSV of reals; a non-numeric first row is treated as a header."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and r[0].strip()]
    out = []
    for i, row in enumerate(rows):
        try:
            out.append(float(row[0]))
        except ValueError:
            if i == 0:
                continue
            raise IdealsError(f"{path}: non-numeric entry {row[0]!r} on line {i + 1}") from None
    return np.asarray(out, dtype=float)


def write_matrix_binary(path, matrix) -> None:
    """Write a matrix as little-endian float64 (real) or complex128 (complex), row-major."""
    a = np.asarray(matrix)
    dtype = "<c16" if np.iscomplexobj(a) else "<f8"
    np.ascontiguousarray(a, dtype=dtype).tofile(path)


def read_matrix_binary(path, shape: tuple[int, int], complex_values: bool = False) -> np.ndarray:
    """Inverse of :func:`write_matrix_binary`."""
    dtype = "<c16" if complex_values else "<f8"
    data = np.fromfile(path, dtype=dtype)
    if data.size != shape[0] * shape[1]:
        raise IdealsError(f"{path}: expected {shape[0] * shape[1]} entries, found {data.size}")
    return data.reshape(shape)


def read_matrix_csv(path) -> np.ndarray:
    """Dense real matrix from CSV (no header)."""
    return np.loadtxt(path, delimiter=",", ndmin=2)


def matrix_to_csv(matrix) -> str:
    buf = io.StringIO()
    np.savetxt(buf, np.asarray(matrix, dtype=float), delimiter=",", fmt="%.17g")
    return buf.getvalue()
