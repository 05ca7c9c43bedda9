"""Modulation norms of a matrix against a positive reference matrix, and the
symbol-side criteria for Laplacian modulation on tori.

Finite matrices are always modulated in a trivial sense, so every norm is
reported as a curve over ``t``.  A verdict comes from the least-squares
log-log slope over the last half of the curve: ``"finite"`` when the slope is
at most 0.05, ``"diverging"`` otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
from scipy import integrate

from . import ideals
from ._numerics import SLOPE_THRESHOLD, loglog_slope, tail_half, tail_slope
from .regvar import VaryingFunction
from .torus_op import (
    ANGULAR_POINTS,
    SeparableSymbol,
    Symbol,
    _as_points,
    lattice_points,
)


class ModulationError(ValueError):
    """Invalid input to a modulation computation."""


class PreconditionError(ModulationError):
    """The input violates a documented precondition."""


@dataclass
class ModulationReport:
    """A norm ratio evaluated along a grid of ``t``.

    ``sup_estimate`` is the maximum over the grid; ``slope`` the fitted tail
    log-log slope of the positive-``t`` values.
    """

    t: np.ndarray
    values: np.ndarray
    sup_estimate: float
    slope: float
    verdict: str
    threshold: float = SLOPE_THRESHOLD

    def summary(self) -> dict:
        return {
            "t": self.t.tolist(),
            "values": self.values.tolist(),
            "sup_estimate": self.sup_estimate,
            "slope": self.slope,
            "verdict": self.verdict,
            "threshold": self.threshold,
        }

    def to_csv(self) -> str:
        return "t,value\n" + "".join(f"{a!r},{b!r}\n" for a, b in zip(self.t.tolist(), self.values.tolist()))


def _report(t: np.ndarray, values: np.ndarray, threshold: float = SLOPE_THRESHOLD) -> ModulationReport:
    values = np.asarray(values, dtype=float)
    pos = t > 0
    if np.any(np.isinf(values)):
        slope = float("inf")
    elif pos.sum() >= 2:
        slope = tail_slope(t[pos], np.where(values[pos] > 0, values[pos], 0.0))
    else:
        slope = 0.0
    verdict = "finite" if slope <= threshold else "diverging"
    return ModulationReport(t, values, float(np.max(values)) if values.size else 0.0, slope, verdict, threshold)


class ReferencePair:
    """A matrix ``G`` with a positive semidefinite reference ``V``.

    The eigendecomposition of ``V`` is computed once.  Eigenvalues are
    ordered nonincreasingly, and those within 1e-12 below zero are clamped to
    zero.
    """

    def __init__(self, G, V, *, check: bool = True):
        G = np.asarray(G)
        V = np.asarray(V)
        if V.ndim != 2 or V.shape[0] != V.shape[1]:
            raise ModulationError("V must be square")
        if G.ndim != 2 or G.shape[1] != V.shape[0]:
            raise ModulationError(f"G has shape {G.shape}, incompatible with V {V.shape}")
        if check and not np.allclose(V, V.conj().T, atol=1e-12 * max(1.0, np.abs(V).max())):
            raise ModulationError("V must be Hermitian")
        w, U = scipy.linalg.eigh(0.5 * (V + V.conj().T))
        w, U = w[::-1], U[:, ::-1]
        if np.any(w < -1e-12 * max(1.0, abs(w[0]) if w.size else 1.0)):
            raise ModulationError(f"V is not positive semidefinite (min eigenvalue {w.min():.3g})")
        w = np.maximum(w, 0.0)
        self.G = G
        self.V = V
        self.mu = w
        self.U = U
        GU = G @ U
        self._col_sq = np.sum(np.abs(GU) ** 2, axis=0)
        self._GU = GU
        for arr in (self.mu, self.U, self._col_sq):
            arr.setflags(write=False)

    @classmethod
    def diagonal(cls, G, mu) -> "ReferencePair":
        return cls(G, np.diag(np.asarray(mu, dtype=float)))

    @property
    def column_norms_sq(self) -> np.ndarray:
        """``‖G u_j‖²`` for the V-eigenvectors ``u_j``."""
        return self._col_sq

    def default_t_grid(self, per_decade: int = 40) -> np.ndarray:
        """Log grid from ``1/μ(0)`` to ``1/μ(N//4)``.

        Past that point the finite size of the matrix dominates the curves.
        """
        pos = self.mu[self.mu > 0]
        if pos.size == 0:
            raise ModulationError("V is zero")
        lo = 1.0 / pos[0]
        hi = 1.0 / pos[min(pos.size - 1, max(1, self.mu.size // 4))]
        if hi <= lo:
            hi = lo * 10.0
        n = max(8, int(math.ceil(np.log10(hi / lo) * per_decade)) + 1)
        return np.geomspace(lo, hi, n)


def strong_modulation_norm(
    pair: ReferencePair, f: VaryingFunction, t_grid: Sequence[float] | None = None
) -> ModulationReport:
    """``‖G(1+tV)^{-1}‖₂ / sqrt(φ(t))`` along a grid (Frobenius norm)."""
    t = np.asarray(pair.default_t_grid() if t_grid is None else t_grid, dtype=float)
    damp = 1.0 / (1.0 + np.outer(t, pair.mu)) ** 2
    vals = np.sqrt(damp @ pair.column_norms_sq) / np.sqrt(f.eval(t))
    return _report(t, vals)


def spectral_modulation_norm(
    pair: ReferencePair, f: VaryingFunction, t_grid: Sequence[float] | None = None
) -> ModulationReport:
    """``‖G E_V[0, 1/t]‖₂ / sqrt(φ(t))``; ``t = 0`` uses the whole space."""
    t = np.asarray(pair.default_t_grid() if t_grid is None else t_grid, dtype=float)
    with np.errstate(divide="ignore"):
        cut = np.where(t > 0, 1.0 / np.where(t > 0, t, 1.0), np.inf)
    mask = pair.mu[None, :] <= cut[:, None]
    vals = np.sqrt(mask @ pair.column_norms_sq) / np.sqrt(f.eval(t))
    return _report(t, vals)


@dataclass
class WeakReport:
    """Weak-modulation evidence at one exponent ``p``."""

    p: float
    q: float
    norm: float
    argmax: int
    N: int
    slope: float
    verdict: str


def weak_modulation_check(
    pair: ReferencePair, f: VaryingFunction, p: float = 2.0, threshold: float = SLOPE_THRESHOLD
) -> WeakReport:
    """Singular values of ``G V^{-1/p}`` measured in the q-convexified weak ideal.

    ``q = p/(p-1)``.  For ``p = 1`` (``q = ∞``) this is the operator norm.
    ``V^{-1/p}`` is a spectral pseudo-inverse with eigenvalue floor
    ``1e-13·μ(0)``.  The verdict is ``"finite"`` when the ratios
    ``μ(n)^q/φ(n)`` have tail log-log slope at most ``threshold``.
    """
    if p < 1:
        raise ModulationError("p must be at least 1")
    floor = 1e-13 * (pair.mu[0] if pair.mu.size else 0.0)
    keep = pair.mu > floor
    GU = pair._GU
    gnorm = np.linalg.norm(GU)
    if np.any(~keep) and np.linalg.norm(GU[:, ~keep]) > 1e-10 * max(gnorm, 1e-300):
        raise PreconditionError("G has components on the numerical kernel of V")
    scale = np.zeros_like(pair.mu)
    scale[keep] = pair.mu[keep] ** (-1.0 / p)
    M = (GU * scale[None, :]) @ pair.U.conj().T
    sv = ideals.singular_values(M)
    if p == 1.0:
        norm = float(sv.values[0]) if sv.N else 0.0
        return WeakReport(p, math.inf, norm, 0, sv.N, 0.0, "finite")
    q = p / (p - 1.0)
    rep = ideals.convexified_quasinorm(sv, f, q)
    n = np.arange(1, sv.N + 1, dtype=float)
    ratios = sv.values**q / f.eval(n - 1.0)
    slope = tail_slope(n, np.where(ratios > 0, ratios, 0.0)) if sv.N >= 4 else 0.0
    verdict = "finite" if slope <= threshold else "diverging"
    return WeakReport(p, q, rep.value, rep.argmax, rep.N, slope, verdict)


def weak_modulation_scan(
    pair: ReferencePair, f: VaryingFunction, ps: Sequence[float] = (1.0, 2.0, 4.0)
) -> list[WeakReport]:
    return [weak_modulation_check(pair, f, p) for p in ps]


# ---------------------------------------------------------------------------
# Symbol-side criteria


def _x_grid(d: int, n: int = 64) -> np.ndarray:
    g = 2 * np.pi * np.arange(n) / n
    if d == 1:
        return g.reshape(-1, 1)
    a, b = np.meshgrid(g, g, indexing="ij")
    return np.column_stack([a.ravel(), b.ravel()])


def x_mean(p: Symbol, xi, kind: str) -> np.ndarray:
    """x-average of ``|p(x, ξ)|`` (``kind="abs"``) or ``|p(x, ξ)|²`` (``kind="sq"``)."""
    pts = _as_points(xi, p.d)
    if kind == "sq":
        modes = p.modes() if p.x_fourier_depth is None else p.modes(p.x_fourier_depth)
        return np.sum(np.abs(p.fourier_table(modes, pts)) ** 2, axis=1)
    if isinstance(p, SeparableSymbol) and len(p.terms) == 1:
        coeffs, h = p.terms[0]
        xs = _x_grid(p.d)
        g = sum(c * np.exp(1j * (xs @ np.array(m, dtype=float))) for m, c in coeffs.items())
        return float(np.mean(np.abs(g))) * np.abs(np.asarray(h(pts), dtype=complex))
    xs = _x_grid(p.d)
    out = np.empty(pts.shape[0])
    for i, k in enumerate(pts):
        out[i] = np.mean(np.abs(p.evaluate(xs, np.repeat(k[None, :], xs.shape[0], axis=0))))
    return out


@dataclass
class _Shells:
    radius: np.ndarray  # shell radii |k|
    sums: np.ndarray  # Σ over the shell of the x-averaged quantity
    matched_radius: float  # continuum starts here (area-matched)
    R: int


def _lattice_shells(p: Symbol, kind: str, R: int) -> _Shells:
    pts = lattice_points(p.d, R)
    vals = x_mean(p, pts, kind)
    q = np.sum(pts * pts, axis=1)
    sums = np.bincount(q, weights=vals)
    present = np.bincount(q) > 0
    radius = np.sqrt(np.arange(sums.size))[present]
    if p.d == 1:
        matched = R + 0.5
    else:
        matched = math.sqrt(pts.shape[0] / math.pi)
    return _Shells(radius, sums[present], matched, R)


def _radial_density(p: Symbol, kind: str) -> Callable[[float], float]:
    """``r ↦ r^{d-1} ∫_{|ω|=1} x_mean(rω) dω``."""
    if p.d == 1:
        return lambda r: float(np.sum(x_mean(p, np.array([[r], [-r]]), kind)))
    theta = 2 * np.pi * np.arange(ANGULAR_POINTS) / ANGULAR_POINTS
    omega = np.column_stack([np.cos(theta), np.sin(theta)])
    return lambda r: float(np.mean(x_mean(p, r * omega, kind)) * 2 * np.pi * r)


R_DIVERGE = 1e140


def _continuum(density, weight, r0: float, r1: float, breaks: Sequence[float] = ()) -> float:
    """∫_{r0}^{r1} density(r)·weight(r) dr over doubling chunks.

    For ``r1 = inf`` the integration stops once a chunk past every break
    point adds less than 1e-12 of the total.  It returns ``inf`` if that
    never happens before ``R_DIVERGE``.
    """
    if r1 <= r0:
        return 0.0
    r0 = max(r0, 0.0)

    def g(r):
        return float(density(r) * weight(r))

    cuts = [b for b in breaks if r0 < b < r1]
    last_break = max(cuts, default=r0)
    e = 1.0
    while e <= r0:
        e *= 2.0
    total = 0.0
    lo = r0
    while True:
        hi = min(e, r1)
        for c in cuts:
            if lo < c < hi:
                val, _ = integrate.quad(g, lo, c, epsrel=1e-8, limit=100)
                total += val
                lo = c
        val, _ = integrate.quad(g, lo, hi, epsrel=1e-8, limit=100)
        total += val
        if hi >= r1:
            return total
        if np.isinf(r1) and lo > 16.0 * max(last_break, r0, 1.0) and abs(val) <= 1e-12 * abs(total):
            return total
        if hi >= R_DIVERGE:
            return math.inf
        lo, e = hi, 2.0 * e


def _region_integral(
    shells: _Shells,
    density,
    weight: Callable[[np.ndarray], np.ndarray],
    r_lo: float,
    r_hi: float,
    breaks: Sequence[float] = (),
) -> float:
    """Lattice sum over ``r_lo < |k| ≤ r_hi`` within the stored ball plus continuum beyond."""
    sel = (shells.radius > r_lo) & (shells.radius <= r_hi)
    lattice = float(np.sum(shells.sums[sel] * weight(shells.radius[sel]))) if sel.any() else 0.0
    start = max(shells.matched_radius, r_lo)
    return lattice + _continuum(density, weight, start, r_hi, breaks)


def _radius_of(s: float, d: int) -> float:
    """The radius ``r`` with ``⟨r⟩^d = s`` (0 if ``s ≤ 1``)."""
    return math.sqrt(max(s ** (2.0 / d) - 1.0, 0.0))


def _default_lattice_radius(d: int) -> int:
    return 4096 if d == 1 else 128


def symbol_l2_criterion(
    p: Symbol,
    f: VaryingFunction,
    t_grid: Sequence[float],
    lattice_radius: int | None = None,
) -> ModulationReport:
    """``(1/φ(t)) Σ_{φ(⟨ξ⟩^d) < 1/t} ∫ |p(x, ξ)|² dx`` along a grid.

    The ξ-sum runs over the lattice inside a stored ball and continues as an
    integral beyond it.  A divergent tail gives ``inf``.
    """
    R = _default_lattice_radius(p.d) if lattice_radius is None else lattice_radius
    shells = _lattice_shells(p, "sq", R)
    density = _radial_density(p, "sq")
    t = np.asarray(t_grid, dtype=float)
    vals = np.empty(t.size)
    one = lambda r: np.ones_like(np.asarray(r, dtype=float))  # noqa: E731
    for i, ti in enumerate(t):
        s_cut = float(f.inverse(1.0 / ti)) if 1.0 / ti < float(f.eval(f.monotone_from)) else f.monotone_from
        r_cut = _radius_of(max(s_cut, 1.0), p.d) if s_cut > 1.0 else -1.0
        vals[i] = _region_integral(shells, density, one, r_cut, math.inf) / float(f.eval(ti))
    return _report(t, vals)


@dataclass
class GrowthReport:
    """Band integrals ``B_k`` and the cumulative ratio ``Σ_{j≤k} B_j / (k+1)``."""

    k: np.ndarray
    bands: np.ndarray
    cumulative_ratio: np.ndarray
    sup_estimate: float
    slope: float
    verdict: str


def moderate_growth(
    p: Symbol,
    f: VaryingFunction,
    k_max: int = 40,
    lattice_radius: int | None = None,
) -> GrowthReport:
    """``B_k = ∫_{k < Φ(⟨ξ⟩^d) < k+1} ∫ |p| dx dξ`` for ``k ≤ k_max``.

    Bands start at ``k = ceil(Φ(0))``.  The verdict is ``"finite"`` when the
    band integrals have tail log-log slope (against k) at most 0.05.
    """
    R = _default_lattice_radius(p.d) if lattice_radius is None else lattice_radius
    shells = _lattice_shells(p, "abs", R)
    density = _radial_density(p, "abs")
    one = lambda r: np.ones_like(np.asarray(r, dtype=float))  # noqa: E731
    k0 = int(math.ceil(f.c_phi))
    ks = np.arange(k0, k_max + 1)
    bands = np.empty(ks.size)
    for i, k in enumerate(ks):
        lo = float(f.primitive_inverse(float(k))) if k > f.c_phi else 0.0
        hi = float(f.primitive_inverse(float(k + 1)))
        # thresholds on ⟨ξ⟩^d converted to radii; ⟨ξ⟩^d ≥ 1 everywhere
        r_lo = _radius_of(lo, p.d) if lo > 1.0 else -1.0
        r_hi = _radius_of(hi, p.d) if hi > 1.0 else 0.0
        bands[i] = _region_integral(shells, density, one, r_lo, r_hi)
    cum = np.cumsum(bands) / np.arange(1, ks.size + 1)
    x = (ks - k0 + 1).astype(float)
    mask = tail_half(x) if x.size > 2 else np.ones(x.size, bool)
    slope = loglog_slope(x[mask], bands[mask]) if np.all(bands[mask] > 0) else 0.0
    verdict = "finite" if slope <= SLOPE_THRESHOLD else "diverging"
    return GrowthReport(ks, bands, cum, float(bands.max()) if bands.size else 0.0, slope, verdict)


@dataclass
class DecayReport:
    """``R(t) = (1/Φ(t)) ∫∫ |p| / ⟨t − ⟨ξ⟩^d⟩`` and whether it decreases to 0."""

    t: np.ndarray
    values: np.ndarray
    slope: float
    verdict: bool


def reasonable_decay(
    p: Symbol,
    f: VaryingFunction,
    t_grid: Sequence[float],
    lattice_radius: int | None = None,
) -> DecayReport:
    """φ-reasonable decay curve.

    The verdict is true when the curve is nonincreasing over the tail half of
    the grid and its tail log-log slope is negative.
    """
    R = _default_lattice_radius(p.d) if lattice_radius is None else lattice_radius
    shells = _lattice_shells(p, "abs", R)
    density = _radial_density(p, "abs")
    t = np.asarray(t_grid, dtype=float)
    vals = np.empty(t.size)
    d = p.d
    for i, ti in enumerate(t):
        def weight(r, _t=ti):
            r = np.asarray(r, dtype=float)
            s = (1.0 + r * r) ** (d / 2.0)
            return 1.0 / np.sqrt(1.0 + (_t - s) ** 2)

        r_t = _radius_of(ti, d)
        vals[i] = _region_integral(shells, density, weight, -1.0, math.inf, breaks=(r_t,))
        vals[i] /= float(f.primitive(ti))
    if np.all(vals == 0):
        return DecayReport(t, vals, 0.0, True)
    mask = tail_half(t)
    slope = loglog_slope(t[mask], vals[mask])
    tail = vals[mask]
    verdict = bool(slope < 0 and np.all(np.diff(tail) <= 1e-12 * np.max(np.abs(tail))))
    return DecayReport(t, vals, slope, verdict)
