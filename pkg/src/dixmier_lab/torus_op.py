"""Quantization of symbols on the flat tori T^1 and T^2.

Conventions
-----------
The torus carries normalized measure 1 and the Fourier basis
``e_k(x) = exp(i k·x)`` for ``k`` in the integer lattice, with ``x`` in
``[0, 2π)^d``.  Symbols are evaluated at lattice frequencies ``ξ = k``
directly, and ``⟨ξ⟩ = sqrt(1 + |ξ|²)``.  Quantization is left (Kohn–Nirenberg):

    Op(p) e_j = p(·, j) e_j = Σ_m p̂_m(j) e_{j+m},

so the matrix entry in row ``k``, column ``j`` is ``p̂_{k-j}(j)``.  A
multiplier acts diagonally by ``p(k)``.

Truncated operators live on the lattice ball ``|k| ≤ N`` listed in
lexicographic order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.linalg
from scipy import integrate

from .regvar import VaryingFunction, family

#: Matrices with more rows than this are refused by dense routines.
MAX_DENSE_ROWS = 16385
#: Bandwidth up to which the banded Hermitian eigensolver is used.
MAX_BANDED_WIDTH = 64
#: Points of the angular trapezoid rule on the circle.
ANGULAR_POINTS = 512


class TorusError(ValueError):
    """Invalid input for a torus computation."""


class InsufficientDepthError(TorusError):
    """The symbol's x-Fourier depth is too small for the requested cutoff."""


def _as_points(xi, d: int) -> np.ndarray:
    arr = np.asarray(xi, dtype=float)
    if d == 1 and (arr.ndim == 0 or arr.ndim == 1):
        return arr.reshape(-1, 1)
    if arr.ndim == 1 and arr.size == d:
        return arr.reshape(1, d)
    if arr.ndim != 2 or arr.shape[1] != d:
        raise TorusError(f"expected points of shape (P, {d}), got {arr.shape}")
    return arr


def bracket(xi) -> np.ndarray:
    """⟨ξ⟩ = sqrt(1 + |ξ|²) for points of shape (P, d)."""
    xi = np.asarray(xi, dtype=float)
    return np.sqrt(1.0 + np.sum(xi * xi, axis=-1))


# ---------------------------------------------------------------------------
# Symbols


class Symbol:
    """Base class for symbols ``p(x, ξ)`` on ``T^d × R^d``.

    Subclasses provide :meth:`fourier_table`, the x-Fourier coefficients
    ``p̂_m(ξ)`` for a list of modes, and :meth:`evaluate`.
    """

    d: int = 1
    name: str = "symbol"
    #: Largest |m| with a possibly nonzero coefficient; ``None`` means the
    #: coefficient list is exact and finite (see :meth:`modes`).
    x_fourier_depth: int | None = None

    def modes(self, max_abs: int | None = None) -> list[tuple[int, ...]]:
        raise NotImplementedError

    def fourier_table(self, modes: Sequence[tuple[int, ...]], xi) -> np.ndarray:
        """Array of shape (P, len(modes)) with ``p̂_m(ξ_p)``."""
        raise NotImplementedError

    def evaluate(self, x, xi) -> np.ndarray:
        raise NotImplementedError

    def fourier(self, m: tuple[int, ...] | int, xi) -> np.ndarray:
        m = (m,) if np.isscalar(m) else tuple(m)
        return self.fourier_table([m], xi)[:, 0]

    def p0(self, xi) -> np.ndarray:
        """The x-average ``p̂_0(ξ)``."""
        return self.fourier((0,) * self.d, xi)

    @property
    def x_independent(self) -> bool:
        """True when only the zero mode is present (unknown, hence False, for FFT symbols)."""
        if self.x_fourier_depth is not None:
            return False
        return all(all(c == 0 for c in m) for m in self.modes())

    @property
    def is_real(self) -> bool:
        return False

    def __add__(self, other: "Symbol") -> "Symbol":
        return SumSymbol([self, other], [1.0, 1.0])

    def __rmul__(self, c: complex) -> "Symbol":
        return SumSymbol([self], [c])

    def __sub__(self, other: "Symbol") -> "Symbol":
        return SumSymbol([self, other], [1.0, -1.0])


def _mode_key(m) -> tuple[int, ...]:
    return (int(m),) if np.isscalar(m) else tuple(int(v) for v in m)


class SeparableSymbol(Symbol):
    """``p(x, ξ) = Σ_j g_j(x) h_j(ξ)`` with trigonometric polynomials ``g_j``.

    Parameters
    ----------
    d : int
        Dimension, 1 or 2.
    terms : list of (dict, callable)
        Each term pairs ``{mode: coefficient}`` (``g_j(x) = Σ c_m e^{i m·x}``)
        with ``h_j`` mapping points of shape (P, d) to values of shape (P,).
    real : bool
        Whether ``p`` is known to be real valued.
    """

    def __init__(self, d: int, terms, name: str = "separable", real: bool = False):
        if d not in (1, 2):
            raise TorusError("only d = 1 and d = 2 are supported")
        self.d = d
        self.name = name
        self.terms = [({_mode_key(m): complex(c) for m, c in modes.items()}, h) for modes, h in terms]
        for modes, _ in self.terms:
            if any(len(m) != d for m in modes):
                raise TorusError("mode dimension does not match d")
        self._real = real
        self.x_fourier_depth = None

    @property
    def is_real(self) -> bool:
        return self._real

    @property
    def max_mode(self) -> int:
        return max((max(abs(v) for v in m) for modes, _ in self.terms for m in modes), default=0)

    def modes(self, max_abs: int | None = None) -> list[tuple[int, ...]]:
        found = sorted({m for modes, _ in self.terms for m in modes})
        return found

    def fourier_table(self, modes, xi) -> np.ndarray:
        pts = _as_points(xi, self.d)
        out = np.zeros((pts.shape[0], len(modes)), dtype=complex)
        for coeffs, h in self.terms:
            hv = None
            for j, m in enumerate(modes):
                c = coeffs.get(_mode_key(m))
                if c is None or c == 0:
                    continue
                if hv is None:
                    hv = np.asarray(h(pts), dtype=complex)
                out[:, j] += c * hv
        return out

    def evaluate(self, x, xi) -> np.ndarray:
        xs = _as_points(x, self.d)
        pts = _as_points(xi, self.d)
        out = np.zeros(np.broadcast_shapes((xs.shape[0],), (pts.shape[0],)), dtype=complex)
        for coeffs, h in self.terms:
            g = sum(c * np.exp(1j * (xs @ np.array(m, dtype=float))) for m, c in coeffs.items())
            out = out + g * np.asarray(h(pts), dtype=complex)
        return out


class MultiplierSymbol(SeparableSymbol):
    """An x-independent symbol ``p(ξ)``."""

    def __init__(self, d: int, h: Callable, name: str = "multiplier", real: bool = True):
        super().__init__(d, [({(0,) * d: 1.0}, h)], name=name, real=real)


class GenericSymbol(Symbol):
    """A symbol given by an evaluator, Fourier-analysed in x by FFT.

    ``func(x, xi)`` receives arrays of shape (P, d) and returns shape (P,).
    Coefficients ``p̂_m(ξ)`` for ``|m| ≤ depth`` come from an FFT over a
    ``(2·depth+1)^d`` grid in x.
    """

    def __init__(self, d: int, func: Callable, depth: int, name: str = "generic", real: bool = False):
        if d not in (1, 2):
            raise TorusError("only d = 1 and d = 2 are supported")
        self.d = d
        self.func = func
        self.x_fourier_depth = int(depth)
        self.name = name
        self._real = real
        self.decay_flag = False

    @property
    def is_real(self) -> bool:
        return self._real

    def modes(self, max_abs: int | None = None) -> list[tuple[int, ...]]:
        M = self.x_fourier_depth if max_abs is None else min(max_abs, self.x_fourier_depth)
        rng = range(-M, M + 1)
        if self.d == 1:
            return [(m,) for m in rng]
        return [(a, b) for a in rng for b in rng]

    def evaluate(self, x, xi) -> np.ndarray:
        return np.asarray(self.func(_as_points(x, self.d), _as_points(xi, self.d)), dtype=complex)

    def _coefficient_grid(self, pts: np.ndarray) -> np.ndarray:
        M = self.x_fourier_depth
        G = 2 * M + 1
        grid1 = 2 * np.pi * np.arange(G) / G
        if self.d == 1:
            xg = grid1.reshape(-1, 1)
        else:
            a, b = np.meshgrid(grid1, grid1, indexing="ij")
            xg = np.column_stack([a.ravel(), b.ravel()])
        P, X = pts.shape[0], xg.shape[0]
        vals = self.func(np.repeat(xg, P, axis=0), np.tile(pts, (X, 1)))
        vals = np.asarray(vals, dtype=complex).reshape((G,) * self.d + (P,))
        coeff = np.fft.fftn(vals, axes=tuple(range(self.d))) / G**self.d
        c0 = np.abs(coeff[(0,) * self.d])
        cM = np.abs(coeff[(M,) + (0,) * (self.d - 1)])
        if np.any(cM > 1e-10 * np.maximum(c0, 1e-300)):
            self.decay_flag = True
        return coeff

    def fourier_table(self, modes, xi) -> np.ndarray:
        pts = _as_points(xi, self.d)
        coeff = self._coefficient_grid(pts)
        M = self.x_fourier_depth
        out = np.zeros((pts.shape[0], len(modes)), dtype=complex)
        for j, m in enumerate(modes):
            m = _mode_key(m)
            if max(abs(v) for v in m) > M:
                continue
            out[:, j] = coeff[tuple(v % (2 * M + 1) for v in m)]
        return out


class SumSymbol(Symbol):
    """A finite linear combination of symbols of the same dimension."""

    def __init__(self, parts: Sequence[Symbol], coeffs: Sequence[complex]):
        ds = {p.d for p in parts}
        if len(ds) != 1:
            raise TorusError("cannot combine symbols of different dimensions")
        self.d = ds.pop()
        self.parts = list(parts)
        self.coeffs = [complex(c) for c in coeffs]
        depths = [p.x_fourier_depth for p in parts if p.x_fourier_depth is not None]
        self.x_fourier_depth = min(depths) if depths else None
        self.name = " + ".join(p.name for p in parts)

    @property
    def is_real(self) -> bool:
        return all(p.is_real for p in self.parts) and all(c.imag == 0 for c in self.coeffs)

    @property
    def max_mode(self) -> int:
        return max(getattr(p, "max_mode", p.x_fourier_depth or 0) for p in self.parts)

    def modes(self, max_abs: int | None = None) -> list[tuple[int, ...]]:
        return sorted({m for p in self.parts for m in p.modes(max_abs)})

    def fourier_table(self, modes, xi) -> np.ndarray:
        return sum(c * p.fourier_table(modes, xi) for p, c in zip(self.parts, self.coeffs))

    def evaluate(self, x, xi) -> np.ndarray:
        return sum(c * p.evaluate(x, xi) for p, c in zip(self.parts, self.coeffs))


class TabulatedSymbol(Symbol):
    """Symbol known only through tabulated lattice coefficients ``p̂_m(k)``."""

    def __init__(self, d: int, table: dict, name: str = "tabulated"):
        self.d = d
        self.table = {(tuple(m), tuple(k)): complex(v) for (m, k), v in table.items()}
        self.name = name
        self.x_fourier_depth = None

    def modes(self, max_abs: int | None = None) -> list[tuple[int, ...]]:
        return sorted({m for m, _ in self.table})

    def fourier_table(self, modes, xi) -> np.ndarray:
        pts = _as_points(xi, self.d)
        keys = [tuple(int(round(v)) for v in p) for p in pts]
        out = np.zeros((pts.shape[0], len(modes)), dtype=complex)
        for j, m in enumerate(modes):
            m = _mode_key(m)
            out[:, j] = [self.table.get((m, k), 0.0) for k in keys]
        return out

    def evaluate(self, x, xi) -> np.ndarray:
        raise TorusError("tabulated symbols can only be evaluated on the lattice")

    @classmethod
    def from_csv(cls, path, d: int) -> "TabulatedSymbol":
        """Read rows ``m..., k..., re, im`` (``d`` entries each for m and k)."""
        data = np.loadtxt(path, delimiter=",", ndmin=2, comments="#", skiprows=_header_rows(path))
        if data.shape[1] != 2 * d + 2:
            raise TorusError(f"{path}: expected {2 * d + 2} columns, got {data.shape[1]}")
        table = {}
        for row in data:
            m = tuple(int(v) for v in row[:d])
            k = tuple(int(v) for v in row[d : 2 * d])
            table[(m, k)] = complex(row[-2], row[-1])
        return cls(d, table, name=str(path))


def _header_rows(path) -> int:
    with open(path) as fh:
        first = fh.readline()
    try:
        [float(v) for v in first.split(",")]
        return 0
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# Named symbols


def _radial_from(fn: Callable[[np.ndarray], np.ndarray]) -> Callable:
    def h(pts):
        return fn(np.sqrt(np.sum(np.asarray(pts, dtype=float) ** 2, axis=-1)))

    return h


def _bracket_power(s: float) -> Callable:
    return lambda pts: bracket(pts) ** s


def _max_power(s: float) -> Callable:
    return _radial_from(lambda r: np.maximum(1.0, r) ** s)


X_PROFILES = {
    "1": {0: 1.0},
    "cos": {1: 0.5, -1: 0.5},
    "2+cos": {0: 2.0, 1: 0.5, -1: 0.5},
    "e1": {1: 1.0},
}


def radial_function(key: str, d: int) -> tuple[Callable, str]:
    """Radial profile from a key.

    ``bracket:s`` gives ⟨ξ⟩^s, ``pow:s`` gives max(1,|ξ|)^s,
    ``logbracket:k`` gives log^k⟨ξ⟩ ⟨ξ⟩^{-d}, ``zero`` gives 0, and
    ``varphi:FAMILY`` gives φ(⟨ξ⟩^d) for a registry family.
    """
    head, _, arg = key.partition(":")
    try:
        if head == "bracket":
            s = float(arg) if arg else -float(d)
            return _bracket_power(s), key
        if head == "pow":
            return _max_power(float(arg)), key
        if head == "logbracket":
            k = int(arg)
            return (lambda pts: np.log(bracket(pts)) ** k * bracket(pts) ** (-d)), key
        if head == "zero":
            return (lambda pts: np.zeros(np.asarray(pts).shape[0])), key
        if head == "varphi":
            f = family(arg)
            return (lambda pts: f.eval(bracket(pts) ** d)), key
    except ValueError as exc:
        raise TorusError(f"malformed symbol key {key!r}: {exc}") from exc
    raise TorusError(f"unknown radial profile {key!r}")


def symbol_from_key(key: str, d: int = 1) -> Symbol:
    """Build a separable symbol from ``"[xprofile*]radial"``.

    x profiles: ``1``, ``cos``, ``2+cos``, ``e1`` (in the first coordinate).
    Example: ``"2+cos*varphi:phi:-1:1"``.
    """
    xpart, sep, rpart = key.partition("*")
    if not sep:
        xpart, rpart = "1", key
    if xpart not in X_PROFILES:
        raise TorusError(f"unknown x profile {xpart!r}; choose from {sorted(X_PROFILES)}")
    h, _ = radial_function(rpart, d)
    modes = {(m,) + (0,) * (d - 1): c for m, c in X_PROFILES[xpart].items()}
    real = xpart != "e1"
    return SeparableSymbol(d, [(modes, h)], name=key, real=real)


# ---------------------------------------------------------------------------
# Lattice and quantization


def lattice_points(d: int, N: int) -> np.ndarray:
    """All ``k`` in ``Z^d`` with ``|k| ≤ N`` in lexicographic order, shape (n, d)."""
    if d not in (1, 2):
        raise TorusError("only d = 1 and d = 2 are supported")
    r = np.arange(-N, N + 1)
    if d == 1:
        return r.reshape(-1, 1)
    a, b = np.meshgrid(r, r, indexing="ij")
    pts = np.column_stack([a.ravel(), b.ravel()])
    return pts[np.sum(pts * pts, axis=1) <= N * N]


def lattice_size(d: int, N: int) -> int:
    if d == 1:
        return 2 * N + 1
    r = np.arange(-N, N + 1)
    return int(np.sum(2 * np.floor(np.sqrt(N * N - r * r)).astype(int) + 1))


def _index_lookup(pts: np.ndarray, N: int, d: int) -> Callable[[np.ndarray], np.ndarray]:
    if d == 1:
        def lookup(q):
            q = q[:, 0]
            idx = q + N
            return np.where(np.abs(q) <= N, idx, -1)

        return lookup
    table = -np.ones((2 * N + 1, 2 * N + 1), dtype=np.int64)
    table[pts[:, 0] + N, pts[:, 1] + N] = np.arange(pts.shape[0])

    def lookup2(q):
        inside = (np.abs(q[:, 0]) <= N) & (np.abs(q[:, 1]) <= N)
        out = -np.ones(q.shape[0], dtype=np.int64)
        out[inside] = table[q[inside, 0] + N, q[inside, 1] + N]
        return out

    return lookup2


@dataclass
class TruncatedOperator:
    """Dense matrix of a quantized symbol on the lattice ball ``|k| ≤ N``.

    Rows and columns follow ``lattice`` (lexicographic order).
    """

    matrix: np.ndarray
    d: int
    N: int
    lattice: np.ndarray
    symbol_ref: str
    decay_flag: bool = False

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def is_hermitian(self, atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.matrix, self.matrix.conj().T, atol=atol, rtol=0))

    def hermitian_part(self) -> np.ndarray:
        return 0.5 * (self.matrix + self.matrix.conj().T)

    def header(self) -> dict:
        return {
            "d": self.d,
            "N": self.N,
            "ordering": "lex",
            "shape": list(self.matrix.shape),
            "dtype": "complex128",
            "symbol": self.symbol_ref,
        }

    def export(self, stem) -> tuple[str, str]:
        """Write ``stem.bin`` (little-endian complex128, row-major) and ``stem.json``."""
        stem = str(stem)
        np.ascontiguousarray(self.matrix, dtype="<c16").tofile(stem + ".bin")
        with open(stem + ".json", "w") as fh:
            json.dump(self.header(), fh, sort_keys=True, indent=2)
        return stem + ".bin", stem + ".json"

    @classmethod
    def load(cls, stem) -> "TruncatedOperator":
        stem = str(stem)
        with open(stem + ".json") as fh:
            head = json.load(fh)
        mat = np.fromfile(stem + ".bin", dtype="<c16").reshape(head["shape"])
        return cls(mat, head["d"], head["N"], lattice_points(head["d"], head["N"]), head["symbol"])


def _required_modes(p: Symbol, N: int) -> list[tuple[int, ...]]:
    if p.x_fourier_depth is None:
        return [m for m in p.modes() if max(abs(v) for v in m) <= 2 * N]
    if p.x_fourier_depth < 2 * N:
        raise InsufficientDepthError(
            f"x_fourier_depth={p.x_fourier_depth} < 2N={2 * N}; increase the depth"
        )
    return p.modes(2 * N)


def quantize(p: Symbol, N: int, max_rows: int = MAX_DENSE_ROWS) -> TruncatedOperator:
    """Matrix of ``Op(p)`` on the lattice ball ``|k| ≤ N``.

    Entry (row ``k``, column ``j``) is ``p̂_{k-j}(j)``; the diagonal is
    ``p̂_0(k)`` exactly.
    """
    pts = lattice_points(p.d, N)
    n = pts.shape[0]
    if n > max_rows:
        raise TorusError(f"{n} rows exceed the cap of {max_rows}")
    modes = _required_modes(p, N)
    mat = np.zeros((n, n), dtype=complex)
    lookup = _index_lookup(pts, N, p.d)
    table = p.fourier_table(modes, pts)
    cols = np.arange(n)
    for j, m in enumerate(modes):
        rows = lookup(pts + np.array(m))
        ok = rows >= 0
        mat[rows[ok], cols[ok]] += table[ok, j]
    flag = bool(getattr(p, "decay_flag", False))
    return TruncatedOperator(mat, p.d, N, pts, p.name, flag)


# ---------------------------------------------------------------------------
# Expectation sums and symbol integrals


def _radius_sq_index(n: np.ndarray, d: int, region: str = "angle") -> np.ndarray:
    """Largest integer ``q`` with ``⟨k⟩^d ≤ n ⇔ |k|² ≤ q`` (``region="angle"``).

    With ``region="ball"`` the condition is ``|k|^d ≤ n``.
    """
    n = np.asarray(n, dtype=float)
    shift = 1.0 if region == "angle" else 0.0
    if region not in ("angle", "ball"):
        raise TorusError(f"region must be 'angle' or 'ball', got {region!r}")
    if d == 1:
        val = n * n - shift
    else:
        val = n - shift
    # the slack absorbs rounding in n but must stay below one lattice shell
    q = np.floor(val + np.minimum(0.5, 1e-12 * np.maximum(1.0, val)))
    return q.astype(np.int64)


def shell_sums(p: Symbol, q_max: int, chunk: int = 256, which: str = "p0") -> np.ndarray:
    """Sums of ``p̂_0(k)`` over lattice shells ``|k|² = q`` for ``0 ≤ q ≤ q_max``.

    ``which="abs2"`` sums ``Σ_m |p̂_m(k)|²`` (the x-integral of ``|p|²``) instead.
    """
    d = p.d
    R = int(math.isqrt(max(q_max, 0)))
    out_re = np.zeros(q_max + 1)
    out_im = np.zeros(q_max + 1)
    if q_max < 0:
        return out_re.astype(complex)
    if d == 1:
        k = np.arange(-R, R + 1)
        blocks = [k.reshape(-1, 1)]
    else:
        blocks = []
        rows = np.arange(-R, R + 1)
        for start in range(0, rows.size, chunk):
            blocks.append(rows[start : start + chunk])
    for blk in blocks:
        if d == 1:
            pts = blk
        else:
            a = np.repeat(blk, 2 * R + 1)
            b = np.tile(np.arange(-R, R + 1), blk.size)
            pts = np.column_stack([a, b])
        q = np.sum(pts * pts, axis=1)
        keep = q <= q_max
        pts, q = pts[keep], q[keep]
        if which == "p0":
            vals = p.p0(pts)
        else:
            modes = p.modes() if p.x_fourier_depth is None else p.modes(p.x_fourier_depth)
            vals = np.sum(np.abs(p.fourier_table(modes, pts)) ** 2, axis=1)
        vals = np.asarray(vals, dtype=complex)
        out_re += np.bincount(q, weights=vals.real, minlength=q_max + 1)
        out_im += np.bincount(q, weights=vals.imag, minlength=q_max + 1)
    return out_re + 1j * out_im


def _maybe_real(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    if np.iscomplexobj(x) and np.all(x.imag == 0):
        return x.real
    return x


def _radial_shell_sums_1d(p: Symbol, R: int, which: str = "p0") -> np.ndarray:
    """For d=1: sums over ``k = ±r`` for ``0 ≤ r ≤ R``."""
    k = np.arange(-R, R + 1).reshape(-1, 1)
    if which == "p0":
        vals = np.asarray(p.p0(k), dtype=complex)
    else:
        modes = p.modes() if p.x_fourier_depth is None else p.modes(p.x_fourier_depth)
        vals = np.sum(np.abs(p.fourier_table(modes, k)) ** 2, axis=1).astype(complex)
    out = vals[R:].copy()
    out[1:] += vals[:R][::-1]
    return out


def expectation_sums(p: Symbol, n_grid: Sequence[float], region: str = "angle") -> np.ndarray:
    """``E(n) = Σ_{⟨k⟩^d ≤ n} p̂_0(k)`` for each ``n`` (exact lattice sums).

    ``region="ball"`` sums over ``|k|^d ≤ n`` instead.
    """
    n = np.asarray(n_grid, dtype=float)
    q = _radius_sq_index(n, p.d, region)
    qmax = int(q.max()) if q.size else -1
    if qmax < 0:
        return np.zeros(n.shape)
    if p.d == 1:
        radius = np.array([math.isqrt(int(v)) if v >= 0 else -1 for v in q])
        cums = np.cumsum(_radial_shell_sums_1d(p, int(radius.max())))
        out = np.where(radius >= 0, cums[np.clip(radius, 0, None)], 0.0)
    else:
        cums = np.cumsum(shell_sums(p, qmax))
        out = np.where(q >= 0, cums[np.clip(q, 0, None)], 0.0)
    return _maybe_real(out)


def _radial_integral(fn: Callable[[float], float], r0: float, r1: float, epsrel: float) -> float:
    """∫_{r0}^{r1} fn(r) dr split at 1 and at powers of 2."""
    if r1 <= r0:
        return 0.0
    edges = [r0]
    e = 1.0
    while e < r1:
        if e > r0:
            edges.append(e)
        e *= 2.0
    edges.append(r1)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(fn, a, b, epsrel=epsrel, epsabs=0.0, limit=200)
        total += val
    return total


def _p0_radial_density(p: Symbol, part: str) -> Callable[[float], float]:
    """``r ↦ ∫_{|ω|=1} p̂_0(rω) dσ(ω) r^{d-1}`` (real or imaginary part)."""
    take = np.real if part == "re" else np.imag
    if p.d == 1:
        def g1(r):
            return float(take(p.p0(np.array([[r], [-r]]))).sum())

        return g1
    theta = 2 * np.pi * np.arange(ANGULAR_POINTS) / ANGULAR_POINTS
    omega = np.column_stack([np.cos(theta), np.sin(theta)])

    def g2(r):
        vals = take(p.p0(r * omega))
        return float(np.mean(vals) * 2 * np.pi * r)

    return g2


def symbol_integral(
    p: Symbol,
    n_grid: Sequence[float],
    region: str = "angle",
    epsrel: float = 1e-7,
) -> np.ndarray:
    """``I(n) = ∫_torus ∫_{cutoff} p(x, ξ) dξ dx`` with torus measure 1.

    ``region="angle"`` integrates over ``⟨ξ⟩^d ≤ n``; ``region="ball"`` over
    ``|ξ|^d ≤ n``.  The x-integral is ``p̂_0``; the ξ-integral is radial
    adaptive quadrature, with a 512-point trapezoid rule on the circle for d=2.
    """
    n = np.asarray(n_grid, dtype=float)
    if region == "angle":
        radii = np.sqrt(np.maximum(n ** (2.0 / p.d) - 1.0, 0.0))
    elif region == "ball":
        radii = n ** (1.0 / p.d)
    else:
        raise TorusError(f"region must be 'angle' or 'ball', got {region!r}")
    order = np.argsort(radii)
    out = np.zeros(n.shape, dtype=complex)
    for part in ("re", "im"):
        g = _p0_radial_density(p, part)
        acc, prev = 0.0, 0.0
        vals = np.zeros(n.shape)
        for i in order:
            acc += _radial_integral(g, prev, float(radii[i]), epsrel)
            prev = float(radii[i])
            vals[i] = acc
        out += vals if part == "re" else 1j * vals
    return _maybe_real(out)


# ---------------------------------------------------------------------------
# Eigenvalues against expectation values


def _hermitian_band(p: Symbol, N: int) -> tuple[np.ndarray, int] | None:
    """Lower banded storage of the Hermitian part of ``quantize(p, N)`` (d=1 only).

    Returns ``None`` when the symbol has no exact finite mode list.
    """
    if p.d != 1 or p.x_fourier_depth is not None:
        return None
    modes = [m[0] for m in p.modes()]
    w = max((abs(m) for m in modes), default=0)
    if w > MAX_BANDED_WIDTH:
        return None
    pts = lattice_points(1, N)
    n = pts.shape[0]
    table = p.fourier_table([(m,) for m in modes], pts)
    col = {m: table[:, i] for i, m in enumerate(modes)}
    band = np.zeros((w + 1, n), dtype=complex)
    for off in range(w + 1):
        # entry (c+off, c): (p̂_off(k_c) + conj(p̂_{-off}(k_{c+off}))) / 2
        if n - off <= 0:
            continue
        acc = np.zeros(n - off, dtype=complex)
        if off in col:
            acc += col[off][: n - off]
        if -off in col:
            acc += np.conj(col[-off][off:])
        band[off, : n - off] = 0.5 * acc
    return band, w


def hermitian_eigenvalues(p: Symbol, N: int) -> np.ndarray:
    """Eigenvalues of the Hermitian part of ``quantize(p, N)``, in ascending order."""
    banded = _hermitian_band(p, N)
    if banded is not None:
        band, w = banded
        if w == 0:
            return np.sort(band[0].real)
        if np.all(band.imag == 0):
            band = band.real
        return scipy.linalg.eigvals_banded(band, lower=True)
    op = quantize(p, N)
    return scipy.linalg.eigvalsh(op.hermitian_part())


def order_by_magnitude(vals: np.ndarray) -> np.ndarray:
    """Sort eigenvalues by decreasing absolute value (stable)."""
    vals = np.asarray(vals)
    return vals[np.argsort(-np.abs(vals), kind="stable")]


def count_within(d: int, n: float) -> int:
    """#{k ∈ Z^d : ⟨k⟩^d ≤ n}."""
    q = int(_radius_sq_index(np.array([n]), d)[0])
    if q < 0:
        return 0
    R = math.isqrt(q)
    if d == 1:
        return 2 * R + 1
    r = np.arange(-R, R + 1)
    return int(np.sum(2 * np.floor(np.sqrt(q - r * r) + 1e-12).astype(int) + 1))


@dataclass
class EigenReport:
    """δ(N) = |Σ top eigenvalues − Σ Re p̂_0| / Φ(count) for each cutoff."""

    N: np.ndarray
    delta: np.ndarray
    eig_sums: np.ndarray
    expectation: np.ndarray
    counts: np.ndarray
    padding: float

    def summary(self) -> dict:
        return {
            "N": self.N.tolist(),
            "delta": self.delta.tolist(),
            "eig_sums": self.eig_sums.tolist(),
            "expectation": self.expectation.tolist(),
            "counts": self.counts.tolist(),
            "padding": self.padding,
        }


def eigen_vs_expectation(
    p: Symbol,
    f: VaryingFunction,
    N_list: Iterable[int],
    padding: float = 2.0,
) -> EigenReport:
    """Compare eigenvalue sums of ``Re Op(p)`` with expectation sums.

    For each ``N`` the Hermitian part is diagonalized on the lattice ball of
    radius ``padding·N``.  Its eigenvalues, ordered by decreasing magnitude,
    are summed over the first ``count = #{⟨k⟩^d ≤ N}`` entries and compared
    with ``Σ_{⟨k⟩^d ≤ N} Re p̂_0(k)``.
    """
    Ns = np.asarray(list(N_list), dtype=int)
    deltas, es, xs, cs = [], [], [], []
    for N in Ns:
        radius = int(math.ceil(padding * N))
        vals = order_by_magnitude(hermitian_eigenvalues(p, radius))
        count = count_within(p.d, float(N))
        eig_sum = float(np.sum(vals[:count]))
        exp_sum = float(np.real(expectation_sums(p, [float(N)])[0]))
        deltas.append(abs(eig_sum - exp_sum) / float(f.primitive(float(count))))
        es.append(eig_sum)
        xs.append(exp_sum)
        cs.append(count)
    return EigenReport(Ns, np.array(deltas), np.array(es), np.array(xs), np.array(cs), padding)


# ---------------------------------------------------------------------------
# Dirichlet kernel estimate


@dataclass(frozen=True)
class BumpFunction:
    """Indicator of ``[-a, 1+a]`` smoothed by a Gaussian of width ``sigma``.

    It equals 1 on ``[0, 1]`` up to ``exp(-a²/(2σ²))`` and its Fourier
    transform ``∫ φ(u) e^{-2πiuη} du`` is known in closed form.
    """

    a: float = 0.05
    sigma: float = 0.005

    def __call__(self, u):
        from scipy.special import erf

        u = np.asarray(u, dtype=float)
        s = self.sigma * math.sqrt(2.0)
        return 0.5 * (erf((u + self.a) / s) - erf((u - 1.0 - self.a) / s))

    def transform(self, eta):
        eta = np.asarray(eta, dtype=float)
        L = 1.0 + 2.0 * self.a
        center = 0.5
        box = L * np.sinc(eta * L)
        return np.exp(-2j * np.pi * eta * center) * box * np.exp(-2 * (np.pi * self.sigma * eta) ** 2)


@dataclass
class DirichletReport:
    t: float
    xi: np.ndarray
    u: np.ndarray
    weighted_error: np.ndarray

    @property
    def max_error(self) -> float:
        return float(np.max(self.weighted_error)) if self.weighted_error.size else 0.0


def dirichlet_kernel_error(
    t: float,
    xi_grid,
    u_grid,
    bump: BumpFunction | None = None,
    d: int = 1,
) -> DirichletReport:
    """``|Σ_{⟨k⟩^d≤t} e^{2πi⟨u,ξ-k⟩} φ̂(ξ-k) − χ_{[0,t]}(⟨ξ⟩^d)| · ⟨t − ⟨ξ⟩^d⟩``.

    ``φ`` is the tensor power of :class:`BumpFunction`; ``xi_grid`` has shape
    (P, d) and ``u_grid`` shape (U, d) with ``u`` inside the unit cube.  The
    result has shape (P, U).
    """
    bump = bump or BumpFunction()
    xi = _as_points(xi_grid, d)
    u = _as_points(u_grid, d)
    q = int(_radius_sq_index(np.array([float(t)]), d)[0])
    if q < 0:
        ks = np.zeros((0, d))
    else:
        R = math.isqrt(q)
        ks = lattice_points(d, R)
        ks = ks[np.sum(ks * ks, axis=1) <= q]
    out = np.zeros((xi.shape[0], u.shape[0]))
    for i, x in enumerate(xi):
        diff = x[None, :] - ks
        trans = np.prod(bump.transform(diff), axis=1)
        phase = np.exp(2j * np.pi * (u @ diff.T))
        total = phase @ trans
        ang = bracket(x) ** d
        chi = 1.0 if ang <= t else 0.0
        weight = math.sqrt(1.0 + (t - ang) ** 2)
        out[i] = np.abs(total - chi) * weight
    return DirichletReport(float(t), xi, u, out)
