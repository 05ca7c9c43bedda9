"""Regularly varying functions and Karamata-type limit checks.

A :class:`VaryingFunction` bundles a positive function φ on ``[0, inf)`` with
closed-form derivatives, a primitive Φ, an inverse φ^{-1} and the claimed
variation index ρ.  The built-in families are

* ``phi:m:k``        φ_{m,k}(t) = (e+t)^m log^k(e+t)
* ``oneontlog``      1/((e+t) log(e+t))   (alias of ``phi:-1:-1``)
* ``invlog``         1/log(e+t)           (alias of ``phi:0:-1``)
* ``explogbeta:b``   Φ'(t) for Φ(t) = exp(log^b(e+t)), 0 < b < 1
* ``const``          the constant function 1

Checks in this module work on finite log-spaced grids and report deviations
from the asymptotic targets, never proofs of membership.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import sympy
from scipy import integrate, optimize, special

from ._numerics import (
    SLOPE_THRESHOLD,
    log_grid,
    loglog_slope,
    polynomial_extrapolate,
    tail_half,
    tail_slope,
)

E = math.e
#: Largest argument at which built-in families are evaluated.
T_MAX = 1e300
#: Derivative order available in closed form for the built-in families.
K_MAX = 8


class RegvarError(ValueError):
    """Base class for errors raised by this module."""


class DomainError(RegvarError):
    """An argument left the numerically safe domain of a function."""


class UnsupportedOrderError(RegvarError):
    """A derivative order beyond ``smooth_order`` was requested."""


class DivergentIntegralError(RegvarError):
    """A tail integral or series failed to converge numerically."""


class InverseDomainError(DomainError):
    """A value lies outside the range on which the inverse is defined."""


class RootFindError(RegvarError):
    """Root finding failed; ``bracket`` holds the last search interval in t."""

    def __init__(self, message: str, bracket: tuple[float, float]):
        super().__init__(f"{message} (bracket t in [{bracket[0]:.6g}, {bracket[1]:.6g}])")
        self.bracket = bracket


def _t_of_v(v):
    return np.exp(v) - E


def _v_of_t(t):
    return np.log(E + np.asarray(t, dtype=float))


def _vectorize_scalar(fn: Callable[[float], float]) -> Callable:
    def wrapped(x):
        arr = np.asarray(x, dtype=float)
        if arr.ndim == 0:
            return fn(float(arr))
        return np.array([fn(float(xi)) for xi in arr.ravel()]).reshape(arr.shape)

    return wrapped


def _brentq_v(g: Callable[[float], float], v_lo: float, v_hi: float, what: str) -> float:
    """Solve ``g(v) = 0`` for ``v = log(e+t)`` and return ``t``."""
    g_lo, g_hi = g(v_lo), g(v_hi)
    if not (np.isfinite(g_lo) and np.isfinite(g_hi)) or g_lo * g_hi > 0:
        raise RootFindError(f"{what}: no sign change", (_t_of_v(v_lo), _t_of_v(v_hi)))
    if g_lo == 0:
        return float(_t_of_v(v_lo))
    if g_hi == 0:
        return float(_t_of_v(v_hi))
    try:
        v = optimize.brentq(g, v_lo, v_hi, xtol=1e-14, rtol=1e-14, maxiter=500)
    except (RuntimeError, ValueError) as exc:  # pragma: no cover - defensive
        raise RootFindError(f"{what}: {exc}", (_t_of_v(v_lo), _t_of_v(v_hi))) from exc
    return float(_t_of_v(v))


class VaryingFunction:
    """A positive function with derivatives, primitive, inverse and index.

    Parameters
    ----------
    name : str
        Registry key or free-form label.
    derivatives : sequence of callables
        ``derivatives[n]`` evaluates the n-th derivative; entry 0 is φ itself.
        ``smooth_order`` is ``len(derivatives) - 1``.
    index : float
        Claimed variation index ρ.
    log_eval : callable, optional
        Overflow-safe ``log φ(t)``; defaults to ``log(derivatives[0](t))``.
    primitive : callable, optional
        Closed-form primitive with its natural additive constant.  When absent
        the primitive is computed by adaptive quadrature from ``t = 0``.
    primitive_inverse : callable, optional
        Closed-form inverse of ``primitive``.
    inverse : callable, optional
        Closed-form inverse of φ on its monotone tail.
    c_phi : float, optional
        Value Φ(0).  ``None`` keeps the natural constant of ``primitive`` (or 0
        for quadrature primitives).
    monotone_from : float
        φ is strictly monotone on ``[monotone_from, inf)``.
    """

    def __init__(
        self,
        name: str,
        derivatives: Sequence[Callable],
        index: float,
        *,
        log_eval: Callable | None = None,
        primitive: Callable | None = None,
        primitive_inverse: Callable | None = None,
        inverse: Callable | None = None,
        c_phi: float | None = None,
        monotone_from: float = 0.0,
        t_max: float = T_MAX,
    ):
        self.name = name
        self._derivs = tuple(derivatives)
        self.index = float(index)
        self._log_eval = log_eval
        self._prim_nat = primitive
        self._prim_nat_inv = primitive_inverse
        self._inverse = inverse
        self.monotone_from = float(monotone_from)
        self.t_max = float(t_max)
        if primitive is not None:
            nat0 = float(primitive(0.0))
        else:
            nat0 = 0.0
        self._nat0 = nat0
        self._c_phi = nat0 if c_phi is None else float(c_phi)

    # -- basic evaluation -------------------------------------------------
    def __repr__(self) -> str:
        return f"VaryingFunction({self.name!r}, index={self.index:g})"

    @property
    def smooth_order(self) -> int:
        return len(self._derivs) - 1

    @property
    def c_phi(self) -> float:
        """Φ(0)."""
        return self._c_phi

    def with_c_phi(self, c_phi: float) -> "VaryingFunction":
        """Copy of this function whose primitive satisfies Φ(0) = ``c_phi``."""
        return VaryingFunction(
            self.name,
            self._derivs,
            self.index,
            log_eval=self._log_eval,
            primitive=self._prim_nat,
            primitive_inverse=self._prim_nat_inv,
            inverse=self._inverse,
            c_phi=c_phi,
            monotone_from=self.monotone_from,
            t_max=self.t_max,
        )

    def _check_domain(self, t) -> np.ndarray:
        arr = np.asarray(t, dtype=float)
        if np.any(arr < 0) or np.any(arr > self.t_max) or np.any(~np.isfinite(arr)):
            raise DomainError(f"{self.name}: argument outside [0, {self.t_max:g}]")
        return arr

    def __call__(self, t):
        return self.eval(t)

    def eval(self, t):
        """φ(t)."""
        arr = self._check_domain(t)
        return self._derivs[0](arr)

    def log_eval(self, t):
        """log φ(t), computed without overflow where a closed form exists."""
        arr = self._check_domain(t)
        if self._log_eval is not None:
            return self._log_eval(arr)
        return np.log(self._derivs[0](arr))

    def derivative(self, t, order: int):
        """The derivative of order ``order`` at ``t``."""
        if order < 0 or order > self.smooth_order:
            raise UnsupportedOrderError(
                f"{self.name}: order {order} not in [0, {self.smooth_order}]"
            )
        arr = self._check_domain(t)
        return self._derivs[order](arr)

    # -- primitive --------------------------------------------------------
    def primitive(self, t):
        """Φ(t) = Φ(0) + ∫_0^t φ(s) ds."""
        arr = self._check_domain(t)
        if self._prim_nat is not None:
            return self._prim_nat(arr) - self._nat0 + self._c_phi
        return self._c_phi + _vectorize_scalar(self._quad_from_zero)(arr)

    def _quad_from_zero(self, t: float) -> float:
        return integrate_function(self.eval, 0.0, t)

    def primitive_inverse(self, s):
        """Φ^{-1}(s) for s ≥ Φ(0)."""
        arr = np.asarray(s, dtype=float)
        if np.any(arr < self._c_phi - 1e-12 * max(1.0, abs(self._c_phi))):
            raise InverseDomainError(f"{self.name}: Φ^-1 undefined below Φ(0)={self._c_phi:g}")
        if self._prim_nat_inv is not None:
            return np.maximum(self._prim_nat_inv(arr - self._c_phi + self._nat0), 0.0)
        return _vectorize_scalar(self._primitive_inverse_scalar)(arr)

    def _primitive_inverse_scalar(self, s: float) -> float:
        if s <= self._c_phi:
            return 0.0
        v_hi = 2.0
        v_max = math.log(self.t_max)
        while float(self.primitive(_t_of_v(v_hi))) < s:
            if v_hi >= v_max:
                raise RootFindError(f"{self.name}: Φ^-1({s:g}) beyond t_max", (0.0, self.t_max))
            v_hi = min(2 * v_hi, v_max)
        return _brentq_v(lambda v: float(self.primitive(_t_of_v(v))) - s, 1.0, v_hi, "Φ^-1")

    # -- inverse ----------------------------------------------------------
    def inverse(self, s):
        """φ^{-1}(s) on the strictly monotone tail ``[monotone_from, inf)``."""
        arr = np.asarray(s, dtype=float)
        if np.any(arr <= 0):
            raise InverseDomainError(f"{self.name}: φ^-1 needs positive arguments")
        if self._inverse is not None:
            out = self._inverse(arr)
            if np.any(out < self.monotone_from * (1 - 1e-12)) or np.any(~np.isfinite(out)):
                raise InverseDomainError(f"{self.name}: value outside the range of φ")
            return out
        return _vectorize_scalar(self._inverse_scalar)(arr)

    def _inverse_scalar(self, s: float) -> float:
        v_lo = float(_v_of_t(self.monotone_from))
        v_hi = math.log(self.t_max)
        ls = math.log(s)

        def g(v):
            return float(self.log_eval(min(_t_of_v(v), self.t_max))) - ls

        g_lo, g_hi = g(v_lo), g(v_hi)
        if g_lo * g_hi > 0:
            if abs(g_lo) < 1e-13:
                return self.monotone_from
            raise InverseDomainError(
                f"{self.name}: {s:g} outside the range of φ on [{self.monotone_from:g}, {self.t_max:g}]"
            )
        return _brentq_v(g, v_lo, v_hi, "φ^-1")


def integrate_function(func: Callable, a: float, b: float, epsrel: float = 1e-10) -> float:
    """Adaptive quadrature of ``func`` over ``[a, b]`` split into logarithmic chunks."""
    if b <= a:
        return 0.0
    edges = [a]
    if a < 1.0 < b:
        edges.append(1.0)
    lo = max(edges[-1], 1.0)
    x = math.floor(math.log10(lo)) + 1
    while 10.0**x < b:
        if 10.0**x > edges[-1]:
            edges.append(10.0**x)
        x += 1
    edges.append(b)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(lambda s: float(func(s)), lo, hi, epsrel=epsrel, epsabs=0.0, limit=200)
        total += val
    return total


# ---------------------------------------------------------------------------
# Built-in families


def _as_number(x: float):
    x = float(x)
    if x.is_integer():
        return sympy.Integer(int(x))
    return sympy.Float(x)


def _lambdify_derivatives(expr, tsym, order: int = K_MAX) -> list[Callable]:
    out = []
    current = expr
    for _ in range(order + 1):
        fn = sympy.lambdify(tsym, current, modules="numpy", cse=True)

        def wrapped(t, _fn=fn):
            t = np.asarray(t, dtype=float)
            return np.asarray(_fn(t), dtype=float) + np.zeros_like(t)

        out.append(wrapped)
        current = sympy.diff(current, tsym)
    return out


def _exp_power_antiderivative(a: float, k: int) -> Callable:
    """Antiderivative of ``exp(a v) v^k`` in ``v`` for integer ``k`` and ``a != 0``."""
    if k >= 0:

        def prim(v):
            v = np.asarray(v, dtype=float)
            acc = np.zeros_like(v)
            coeff = 1.0
            for j in range(k + 1):
                acc = acc + ((-1) ** j) * coeff * v ** (k - j) / a ** (j + 1)
                coeff *= k - j
            return np.exp(a * v) * acc

        return prim

    def prim_neg(v):
        v = np.asarray(v, dtype=float)
        val = special.expi(a * v)
        # integrate by parts upward: I_j = e^{av} v^{j+1}/(j+1) - a/(j+1) I_{j+1}
        for j in range(-2, k - 1, -1):
            val = np.exp(a * v) * v ** (j + 1) / (j + 1) - a / (j + 1) * val
        return val

    return prim_neg


def power_log(m: float, k: int, c_phi: float | None = None) -> VaryingFunction:
    """The family φ_{m,k}(t) = (e+t)^m log^k(e+t)."""
    m = float(m)
    if float(k) != int(k):
        raise RegvarError("log power k must be an integer")
    k = int(k)
    tsym = sympy.Symbol("t", nonnegative=True)
    u = sympy.E + tsym
    expr = u ** _as_number(m) * sympy.log(u) ** k
    derivs = _lambdify_derivatives(expr, tsym)

    def log_eval(t):
        v = _v_of_t(t)
        return m * v + k * np.log(v)

    if m == -1.0:
        if k == -1:

            def prim(t):
                return np.log(_v_of_t(t))

            def prim_inv(s):
                return np.exp(np.exp(s)) - E

        else:

            def prim(t):
                return _v_of_t(t) ** (k + 1) / (k + 1)

            def prim_inv(s):
                s = np.asarray(s, dtype=float)
                return np.exp(np.maximum((k + 1) * s, 0.0) ** (1.0 / (k + 1))) - E

    else:
        a = m + 1.0
        anti = _exp_power_antiderivative(a, k)
        base = float(anti(1.0))

        def prim(t):
            return anti(_v_of_t(t)) - base

        prim_inv = (lambda s: np.asarray(s, dtype=float)) if (m == 0.0 and k == 0) else None

    inverse = None
    if k == 0 and m != 0.0:

        def _power_inverse(s):
            return np.asarray(s, dtype=float) ** (1.0 / m) - E

        inverse = _power_inverse

    monotone_from = 0.0
    if m != 0.0 and -k / m > 1.0:
        monotone_from = max(0.0, math.exp(-k / m) - E)

    if m == -1.0 and k == -1:
        name = "oneontlog"
    elif m == 0.0 and k == -1:
        name = "invlog"
    elif m == 0.0 and k == 0:
        name = "const"
    else:
        name = f"phi:{m:g}:{k}"
    return VaryingFunction(
        name,
        derivs,
        index=m,
        log_eval=log_eval,
        primitive=prim,
        primitive_inverse=prim_inv,
        inverse=inverse,
        c_phi=c_phi,
        monotone_from=monotone_from,
    )


def exp_log_beta(beta: float, c_phi: float | None = None) -> VaryingFunction:
    """φ = Φ' where Φ(t) = exp(log^β(e+t)) and 0 < β < 1."""
    beta = float(beta)
    if not 0.0 < beta < 1.0:
        raise RegvarError(f"beta must lie in (0, 1), got {beta}")
    tsym = sympy.Symbol("t", nonnegative=True)
    u = sympy.E + tsym
    b = _as_number(beta)
    expr = sympy.exp(sympy.log(u) ** b) * b * sympy.log(u) ** (b - 1) / u
    derivs = _lambdify_derivatives(expr, tsym)

    def log_eval(t):
        v = _v_of_t(t)
        return v**beta + math.log(beta) + (beta - 1.0) * np.log(v) - v

    def prim(t):
        return np.exp(_v_of_t(t) ** beta)

    def prim_inv(s):
        s = np.asarray(s, dtype=float)
        return np.exp(np.maximum(np.log(np.maximum(s, E)), 1.0) ** (1.0 / beta)) - E

    return VaryingFunction(
        f"explogbeta:{beta:g}",
        derivs,
        index=-1.0,
        log_eval=log_eval,
        primitive=prim,
        primitive_inverse=prim_inv,
        c_phi=c_phi,
    )


def family(key: str) -> VaryingFunction:
    """Look up a built-in family by registry key.

    Examples
    --------
    >>> family("phi:-1:2").index
    -1.0
    >>> family("invlog").name
    'invlog'
    """
    key = key.strip()
    if key in ("oneontlog", "phi:-1:-1"):
        return power_log(-1, -1)
    if key == "invlog":
        return power_log(0, -1)
    if key == "const":
        return power_log(0, 0)
    parts = key.split(":")
    try:
        if parts[0] == "phi" and len(parts) == 3:
            return power_log(float(parts[1]), int(parts[2]))
        if parts[0] == "explogbeta" and len(parts) == 2:
            return exp_log_beta(float(parts[1]))
    except ValueError as exc:
        raise RegvarError(f"malformed family key {key!r}: {exc}") from exc
    raise RegvarError(f"unknown family key {key!r}")


FAMILY_KEYS = ("phi:m:k", "oneontlog", "invlog", "explogbeta:beta", "const")


# ---------------------------------------------------------------------------
# Deviation reports


@dataclass
class DeviationReport:
    """Long-format table of deviations from asymptotic targets.

    Each row is one (t, parameter) pair where the parameter is λ for regular
    variation checks and the derivative order n for smooth variation checks.
    """

    kind: str
    t: np.ndarray
    param: np.ndarray
    value: np.ndarray
    target: np.ndarray
    deviation: np.ndarray
    trend: dict = field(default_factory=dict)

    @property
    def max_deviation(self) -> float:
        return float(np.max(self.deviation)) if self.deviation.size else 0.0

    @property
    def shrinking(self) -> bool:
        """True when, for every parameter, the last deviation is at most the first."""
        return all(r <= 1.0 for r in self.trend.values())

    def limiting_deviation(self, relative: bool = True) -> dict:
        """Deviation extrapolated to ``t = inf`` for each parameter.

        A quadratic in ``1/log t`` is fitted over the tail half of the grid;
        power-log corrections are power series in that variable, while
        ``exp(log^β t)`` families converge more slowly and keep a visible
        residual.  With ``relative=True`` the result is divided by the target
        when the target is nonzero.
        """
        out = {}
        for p in np.unique(self.param):
            mask_p = self.param == p
            t, dev = self.t[mask_p], self.deviation[mask_p]
            target = float(self.target[mask_p][0])
            order = np.argsort(t)
            t, dev = t[order], dev[order]
            mask = tail_half(t) if t.size > 3 else np.ones(t.size, bool)
            lim = abs(polynomial_extrapolate(1.0 / np.log(t[mask]), dev[mask], degree=2))
            out[float(p)] = lim / abs(target) if relative and target != 0 else lim
        return out

    def deviations_for(self, param: float) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(t, deviation)`` rows for one parameter value."""
        mask = self.param == param
        return self.t[mask], self.deviation[mask]

    def to_csv(self, path=None) -> str:
        """Serialize with columns ``t, lambda_or_n, value, target, deviation``."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "lambda_or_n", "value", "target", "deviation"])
        for row in zip(self.t, self.param, self.value, self.target, self.deviation):
            writer.writerow([repr(float(x)) for x in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def _trend(t, param, dev) -> dict:
    out = {}
    for p in np.unique(param):
        d = dev[param == p]
        tt = t[param == p]
        first, last = d[np.argmin(tt)], d[np.argmax(tt)]
        if first == 0:
            out[float(p)] = 0.0 if last == 0 else np.inf
        else:
            out[float(p)] = float(last / first)
    return out


def check_regular_variation(
    f: VaryingFunction,
    rho: float,
    lambda_grid: Sequence[float] = (2.0, 3.0, 10.0),
    t_grid: Sequence[float] | None = None,
) -> DeviationReport:
    """Tabulate ``|f(λt)/f(t) - λ^ρ|`` over a (λ, t) grid.

    The ratio is formed from ``log f`` so it stays accurate when f itself
    underflows or overflows.
    """
    t = np.asarray(log_grid(1e2, 1e8) if t_grid is None else t_grid, dtype=float)
    lam = np.asarray(lambda_grid, dtype=float)
    if np.any(np.diff(t) <= 0):
        raise RegvarError("t_grid must be increasing")
    if np.any(lam <= 0):
        raise RegvarError("lambda values must be positive")
    if np.any(lam.max() * t > f.t_max):
        raise DomainError(f"λt exceeds the safe domain {f.t_max:g} of {f.name}")
    T, L = np.meshgrid(t, lam)
    T, L = T.ravel(), L.ravel()
    value = np.exp(f.log_eval(L * T) - f.log_eval(T))
    target = L**rho
    dev = np.abs(value - target)
    return DeviationReport("regular", T, L, value, target, dev, _trend(T, L, dev))


def _falling_factorial(rho: float, n: int) -> float:
    out = 1.0
    for j in range(n):
        out *= rho - j
    return out


def check_smooth_variation(
    f: VaryingFunction,
    rho: float,
    K: int,
    t_grid: Sequence[float] | None = None,
) -> DeviationReport:
    """Tabulate ``|t^n f^(n)(t)/f(t) - ρ(ρ-1)...(ρ-n+1)|`` for ``1 ≤ n ≤ K``."""
    if K > f.smooth_order:
        raise UnsupportedOrderError(f"{f.name}: K={K} exceeds smooth_order={f.smooth_order}")
    t = np.asarray(log_grid(1e2, 1e8) if t_grid is None else t_grid, dtype=float)
    f0 = f.eval(t)
    rows_t, rows_n, rows_v, rows_target = [], [], [], []
    for n in range(1, K + 1):
        ratio = t**n * f.derivative(t, n) / f0
        rows_t.append(t)
        rows_n.append(np.full_like(t, n))
        rows_v.append(ratio)
        rows_target.append(np.full_like(t, _falling_factorial(rho, n)))
    T, Nn, V, Tg = (np.concatenate(x) for x in (rows_t, rows_n, rows_v, rows_target))
    dev = np.abs(V - Tg)
    return DeviationReport("smooth", T, Nn, V, Tg, dev, _trend(T, Nn, dev))


# ---------------------------------------------------------------------------
# Karamata limits


@dataclass
class KaramataReport:
    """Ratios along a grid, their limit target and the final estimate.

    ``estimate`` is the raw value at the largest grid point.  When
    extrapolation was requested, ``extrapolated`` holds the polynomial
    extrapolation to the limit and ``best`` returns it.
    """

    grid: np.ndarray
    ratios: np.ndarray
    target: float
    estimate: float
    deviation_slope: float
    extrapolated: float | None = None

    @property
    def best(self) -> float:
        return self.estimate if self.extrapolated is None else self.extrapolated

    @property
    def relative_error(self) -> float:
        return abs(self.estimate - self.target) / abs(self.target)

    @property
    def best_relative_error(self) -> float:
        return abs(self.best - self.target) / abs(self.target)


def _richardson_indices(grid: np.ndarray, points: int = 4) -> np.ndarray:
    """Indices of ``points`` grid entries spread log-uniformly over the tail half."""
    lg = np.log(grid)
    lo, hi = lg[0], lg[-1]
    wanted = lo + (hi - lo) * np.linspace(0.5, 1.0, points)
    idx = np.unique([int(np.argmin(np.abs(lg - w))) for w in wanted])
    return idx


def _log_integrand(f: VaryingFunction, alpha: float, beta: float) -> Callable[[float], float]:
    """``x -> exp((α+1)x + β log φ(e^x))``: the integrand in ``x = log s``."""

    def g(x: float) -> float:
        return math.exp((alpha + 1.0) * x + beta * float(f.log_eval(math.exp(x))))

    return g


def _quad_chunks(g: Callable[[float], float], x0: float, x1: float, width: float = 2.0) -> float:
    total = 0.0
    n = max(1, int(math.ceil((x1 - x0) / width)))
    edges = np.linspace(x0, x1, n + 1)
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(g, a, b, epsrel=1e-10, epsabs=0.0, limit=200)
        total += val
    return total


def karamata_integral_limit(
    f: VaryingFunction,
    alpha: float,
    beta: float,
    side: str,
    t_grid: Sequence[float] | None = None,
    richardson: bool = False,
) -> KaramataReport:
    """Ratio ``t^{α+1} φ^β(t) / ∫ s^α φ^β(s) ds`` along a grid.

    ``side="below"`` integrates over ``[0, t]`` (``[1, t]`` if ``α ≤ -1``) and
    needs ``α ≥ β-1``; the target is ``α-β+1``.  ``side="above"`` integrates
    over ``[t, inf)`` and needs ``α < β-1``; the target is ``β-α-1``.
    Quadrature runs in the variable ``log s`` with relative tolerance 1e-10
    per chunk.
    """
    t = np.asarray(log_grid(1e2, 1e8) if t_grid is None else t_grid, dtype=float)
    if np.any(np.diff(t) <= 0) or t[0] <= 1.0:
        raise RegvarError("t_grid must be increasing and start above 1")
    g = _log_integrand(f, alpha, beta)
    x = np.log(t)
    pieces = np.array([_quad_chunks(g, a, b) for a, b in zip(x[:-1], x[1:])])
    if side == "below":
        if alpha < beta - 1:
            raise RegvarError("side='below' needs alpha >= beta - 1")
        target = alpha - beta + 1.0
        if alpha > -1.0:
            head, _ = integrate.quad(
                lambda s: s**alpha * float(np.exp(beta * f.log_eval(s))), 0.0, 1.0, epsrel=1e-10
            )
            head += _quad_chunks(g, 0.0, x[0])
        else:
            head = _quad_chunks(g, 0.0, x[0])
        integrals = head + np.concatenate([[0.0], np.cumsum(pieces)])
    elif side == "above":
        if alpha >= beta - 1:
            raise RegvarError("side='above' needs alpha < beta - 1")
        target = beta - alpha - 1.0
        tail = 0.0
        xa = x[-1]
        x_limit = math.log(f.t_max)
        while True:
            xb = min(xa + 4.0, x_limit)
            chunk = _quad_chunks(g, xa, xb)
            tail += chunk
            if chunk <= 1e-14 * tail:
                break
            if xb >= x_limit:
                raise DivergentIntegralError(
                    f"tail integral of s^{alpha:g} φ^{beta:g} did not converge by t={f.t_max:g}"
                )
            xa = xb
        integrals = tail + np.concatenate([np.cumsum(pieces[::-1])[::-1], [0.0]])
    else:
        raise RegvarError(f"side must be 'below' or 'above', got {side!r}")
    numer = np.exp((alpha + 1.0) * x + beta * f.log_eval(t))
    ratios = numer / integrals
    dev_slope = tail_slope(t, np.abs(ratios - target) + 1e-300)
    extrap = None
    if richardson:
        idx = _richardson_indices(t)
        extrap = polynomial_extrapolate(1.0 / np.log(t[idx]), ratios[idx])
    return KaramataReport(t, ratios, target, float(ratios[-1]), dev_slope, extrap)


def _dyadic_ratio(f: VaryingFunction, alpha: float, beta: float, side: str, n: int) -> float:
    ln2 = math.log(2.0)

    def log_term(k):
        k = np.asarray(k, dtype=float)
        return k * alpha * ln2 + beta * f.log_eval(2.0**k)

    ref = float(log_term(n))
    if side == "partial":
        k = np.arange(1, n + 1)
        return float(np.sum(np.exp(log_term(k) - ref)))
    k_max = int(math.floor(math.log2(f.t_max)))
    total = 0.0
    for k in range(n, k_max + 1):
        term = math.exp(float(log_term(k)) - ref)
        total += term
        if term < 1e-14 * total:
            return total
    raise DivergentIntegralError(f"dyadic tail not converged by 2^{k_max}")


def karamata_dyadic_limit(
    f: VaryingFunction,
    alpha: float,
    beta: float,
    side: str,
    n_terms: int = 40,
    richardson: bool = False,
) -> KaramataReport:
    """Dyadic ratio ``Σ 2^{kα} φ^β(2^k) / (2^{nα} φ^β(2^n))``.

    ``side="partial"`` sums ``k = 1..n`` (needs ``α > β``, target
    ``2^{α-β}/(2^{α-β}-1)``); ``side="tail"`` sums ``k ≥ n`` until terms fall
    below 1e-14 of the running total (needs ``α < β``, target
    ``1/(1-2^{α-β})``).  Terms are formed in log space, which guards against
    overflow of ``2^{kα}``.
    """
    if alpha == beta:
        raise RegvarError("alpha must differ from beta")
    r = 2.0 ** (alpha - beta)
    if side == "partial":
        if alpha < beta:
            raise RegvarError("side='partial' needs alpha > beta")
        target = r / (r - 1.0)
    elif side == "tail":
        if alpha > beta:
            raise RegvarError("side='tail' needs alpha < beta")
        target = 1.0 / (1.0 - r)
    else:
        raise RegvarError(f"side must be 'partial' or 'tail', got {side!r}")
    ns = np.unique(np.linspace(max(2, n_terms // 4), n_terms, min(n_terms - 1, 16)).astype(int))
    ratios = np.array([_dyadic_ratio(f, alpha, beta, side, int(n)) for n in ns])
    dev_slope = tail_slope(ns.astype(float), np.abs(ratios - target) + 1e-300)
    extrap = None
    if richardson:
        picks = np.unique(np.round(n_terms * np.array([1.0, 0.85, 0.7, 0.55])).astype(int))
        vals = np.array([_dyadic_ratio(f, alpha, beta, side, int(n)) for n in picks])
        extrap = polynomial_extrapolate(1.0 / picks, vals)
    return KaramataReport(ns.astype(float), ratios, target, float(ratios[-1]), dev_slope, extrap)


# ---------------------------------------------------------------------------
# Property (W) and the gap function


@dataclass
class PropertyWReport:
    """Ratios ``φ^{-1}(1/t) / (t² φ(t))`` and the W1/W2 verdicts.

    ``C1``/``C2`` are the infimum and supremum over the tail half of the
    grid; ``slope`` is the fitted log-log slope there.  W1 (bounded below)
    fails when the ratio decays with slope below ``-threshold``; W2 (bounded
    above) fails when it grows with slope above ``threshold``.
    """

    t: np.ndarray
    ratio: np.ndarray
    C1: float
    C2: float
    slope: float
    threshold: float

    @property
    def w1(self) -> bool:
        return self.C1 > 0 and self.slope >= -self.threshold

    @property
    def w2(self) -> bool:
        return np.isfinite(self.C2) and self.slope <= self.threshold

    @property
    def verdict(self) -> str:
        if self.w1 and self.w2:
            return "both"
        if self.w1:
            return "W1"
        if self.w2:
            return "W2"
        return "neither"


def check_property_w(
    f: VaryingFunction,
    t_grid: Sequence[float] | None = None,
    threshold: float = SLOPE_THRESHOLD,
) -> PropertyWReport:
    """Evaluate ``φ^{-1}(1/t) / (t² φ(t))`` and decide boundedness on the tail."""
    t = np.asarray(log_grid(1e2, 1e8) if t_grid is None else t_grid, dtype=float)
    inv = f.inverse(1.0 / t)
    ratio = inv / (t**2 * f.eval(t))
    mask = tail_half(t)
    slope = loglog_slope(t[mask], ratio[mask])
    return PropertyWReport(
        t, ratio, float(ratio[mask].min()), float(ratio[mask].max()), slope, threshold
    )


@dataclass
class GapReport:
    """The gap ``g(t) = t - Φ^{-1}(Φ(t) - 1)`` with its fitted growth."""

    t: np.ndarray
    g: np.ndarray
    slope: float
    C: float

    @property
    def epsilon(self) -> float:
        return self.slope - 0.5

    @property
    def diverges(self) -> bool:
        return bool(np.all(np.diff(self.g) > 0))

    @property
    def passed(self) -> bool:
        return self.slope > 0.5 and self.diverges


def gap_growth(f: VaryingFunction, t_grid: Sequence[float] | None = None) -> GapReport:
    """Compute the gap function and fit ``g(t) ≈ C t^{1/2+ε}``.

    Grid points with ``Φ(t) ≤ 1 + Φ(0)`` are dropped.
    """
    t = np.asarray(log_grid(1e3, 1e9) if t_grid is None else t_grid, dtype=float)
    Phi = f.primitive(t)
    keep = Phi > 1.0 + f.c_phi
    t, Phi = t[keep], Phi[keep]
    if t.size == 0:
        return GapReport(t, t.copy(), float("nan"), float("nan"))
    back = f.primitive_inverse(Phi - 1.0)
    g = t - back
    slope = loglog_slope(t, g)
    C = float(np.min(g / t**slope)) if t.size else float("nan")
    return GapReport(t, g, slope, C)
