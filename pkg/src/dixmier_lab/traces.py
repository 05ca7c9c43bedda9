"""Dixmier-trace diagnostics from eigenvalue sequences and zeta-type estimators.

Extended limits are not constructive, so nothing here claims to evaluate a
particular Dixmier trace.  :func:`dixmier_sequence` reports the normalized
partial sums over a logarithmic tail window.  When they converge, every
Dixmier trace takes the same value and that value is reported.  Otherwise
the window range bounds the possible values.

Partial sums of sequences in a weak ideal differ from Φ by bounded terms, so
``c_n`` typically approaches its limit like ``b/log n``.  Such a null
sequence does not change any Dixmier trace.  The default verdict therefore
fits ``c_n ≈ L + b/log(e+n+1)`` over the window and judges convergence on the
residual spread.  ``correction=None`` restores the plain window rule.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special

from .regvar import VaryingFunction

#: Default relative tolerance for convergence verdicts.
DEFAULT_TOL = 0.02


class TracesError(ValueError):
    """Invalid input to a trace estimator."""


class NonSummableError(TracesError):
    """The requested power of the sequence is not summable."""


# ---------------------------------------------------------------------------
# Dixmier sequence


@dataclass
class TraceEstimate:
    """Normalized partial sums with tail-window diagnostics.

    Attributes
    ----------
    n, c : ndarray
        Sample indices and ``c_n = Σ_{k≤n} λ(k) / Φ(n+1)``.
    window_liminf, window_limsup, cesaro : float
        Minimum, maximum and logarithmic Cesàro mean of ``c`` over the window
        ``n+1 ≥ sqrt(n_max+1)``.
    correction : float or None
        Fitted coefficient ``b`` of ``1/log(e+n+1)``; ``None`` for the plain rule.
    limit : float
        ``L`` from the fit, or ``cesaro`` for the plain rule.
    residual_spread : float
        Spread of ``c - b/log(e+n+1)`` over the window (plain spread if uncorrected).
    verdict : str
        ``"converged"`` if ``residual_spread ≤ tol * max(1, |limit|)``, else ``"ambiguous"``.
    """

    n: np.ndarray
    c: np.ndarray
    window_liminf: float
    window_limsup: float
    cesaro: float
    verdict: str
    tol: float
    correction: float | None = None
    limit: float = float("nan")
    residual_spread: float = float("nan")
    interval: tuple[float, float] = (float("nan"), float("nan"))
    extra: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.verdict == "converged"

    @property
    def value(self) -> float | None:
        """The common value of all Dixmier traces when converged, else ``None``."""
        return self.limit if self.converged else None

    def summary(self, max_points: int = 400) -> dict:
        """JSON-ready dictionary; ``n``/``c`` are thinned to a log grid."""
        idx = _log_sample(self.n, max_points)
        out = {
            "n": [int(x) for x in self.n[idx]],
            "c": [float(x) for x in self.c[idx]],
            "liminf": self.window_liminf,
            "limsup": self.window_limsup,
            "cesaro": self.cesaro,
            "verdict": self.verdict,
            "tol": self.tol,
            "correction": self.correction,
            "limit": self.limit,
            "residual_spread": self.residual_spread,
            "interval": list(self.interval),
        }
        out.update(self.extra)
        return out

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.summary(), sort_keys=True, **kwargs)


def _log_sample(n: np.ndarray, max_points: int) -> np.ndarray:
    if n.size <= max_points:
        return np.arange(n.size)
    pos = np.unique(np.round(np.geomspace(1, n.size, max_points)).astype(int) - 1)
    return pos


def _log_cesaro(m: np.ndarray, c: np.ndarray) -> float:
    if m.size == 1:
        return float(c[0])
    x = np.log(m)
    width = x[-1] - x[0]
    if width <= 0:
        return float(np.mean(c))
    return float(np.trapezoid(c, x) / width)


def estimate_from_grid(
    n: Sequence[float],
    c: Sequence[float],
    tol: float = DEFAULT_TOL,
    correction: int | None = 1,
) -> TraceEstimate:
    """Tail-window diagnostics for a normalized sequence sampled at indices ``n``.

    ``n`` must be increasing nonnegative integers (or reals); the window is
    ``n+1 ≥ sqrt(n_max+1)``.  Least-squares weights are proportional to the
    spacing in ``log(n+1)``, so a log-sampled grid and the full index range
    give the same fit.  ``correction`` is the number of powers of
    ``1/log(e+n+1)`` removed before judging convergence.
    """
    n = np.asarray(n, dtype=float)
    c = np.asarray(c, dtype=float)
    if n.size == 0:
        raise TracesError("empty sequence")
    if n.shape != c.shape:
        raise TracesError("n and c must have the same shape")
    m = n + 1.0
    win = m >= math.sqrt(m[-1])
    mw, cw = m[win], c[win]
    lo, hi = float(cw.min()), float(cw.max())
    ces = _log_cesaro(mw, cw)
    if correction is None or mw.size < correction + 2:
        spread = hi - lo
        limit = ces
        verdict = "converged" if spread <= tol * max(1.0, abs(ces)) else "ambiguous"
        return TraceEstimate(
            n.astype(np.int64) if np.all(n == np.round(n)) else n,
            c, lo, hi, ces, verdict, tol, None, limit, spread, (lo, hi),
        )
    x = 1.0 / np.log(math.e + mw)
    lx = np.log(mw)
    w = np.gradient(lx) if mw.size > 1 else np.ones(1)
    design = np.column_stack([np.ones_like(x)] + [x**p for p in range(1, correction + 1)])
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(design * sw[:, None], cw * sw, rcond=None)
    corrected = cw - design[:, 1:] @ coef[1:]
    spread = float(corrected.max() - corrected.min())
    limit = float(coef[0])
    verdict = "converged" if spread <= tol * max(1.0, abs(limit)) else "ambiguous"
    return TraceEstimate(
        n.astype(np.int64) if np.all(n == np.round(n)) else n,
        c, lo, hi, ces, verdict, tol,
        float(coef[1]), limit, spread,
        (float(corrected.min()), float(corrected.max())),
        {"correction_terms": [float(x) for x in coef[1:]]} if correction > 1 else {},
    )


def dixmier_sequence(
    seq: Sequence[float],
    f: VaryingFunction,
    tol: float = DEFAULT_TOL,
    correction: int | None = 1,
) -> TraceEstimate:
    """Normalized partial sums ``c_n = Σ_{k≤n} λ(k) / Φ(n+1)`` and diagnostics.

    The sequence is used in the order given.  For positive operators pass
    nonincreasing eigenvalues; for self-adjoint ones pass eigenvalues sorted
    decreasingly by magnitude, as in the eigenvalue-sequence convention.
    """
    lam = np.asarray(seq, dtype=float).ravel()
    if lam.size == 0:
        raise TracesError("empty sequence")
    n = np.arange(lam.size, dtype=float)
    c = np.cumsum(lam) / f.primitive(n + 1.0)
    return estimate_from_grid(n, c, tol, correction)


# ---------------------------------------------------------------------------
# Zeta estimators


@dataclass(frozen=True)
class SequenceFamily:
    """An analytic sequence λ(m) = log^k(m)/m for integer ``m ≥ m_start``.

    Sums of ``λ^s`` beyond a stored range are completed in closed form by
    Euler–Maclaurin: the integral is an upper incomplete gamma function.
    """

    name: str
    k: int
    m_start: int

    def terms(self, m: np.ndarray, s: float = 1.0) -> np.ndarray:
        m = np.asarray(m, dtype=float)
        v = np.log(m)
        if self.k == 0:
            return np.exp(-s * v)
        with np.errstate(divide="ignore"):
            return np.where(v > 0, np.exp(s * (self.k * np.log(np.maximum(v, 1e-300)) - v)), 0.0)

    def sequence(self, N: int) -> np.ndarray:
        """The first ``N`` terms as a stored sequence (index n ↔ m = m_start + n)."""
        return self.terms(np.arange(self.m_start, self.m_start + N))

    def tail_integral(self, M: float, s: float) -> float:
        """∫_M^∞ λ(t)^s dt = Γ(ks+1, (s-1) log M) / (s-1)^{ks+1}."""
        a = self.k * s + 1.0
        x = (s - 1.0) * math.log(M)
        log_val = math.log(special.gammaincc(a, x)) + special.gammaln(a) - a * math.log(s - 1.0)
        return math.exp(log_val)

    def tail_sum(self, M: int, s: float) -> float:
        """Σ_{m≥M} λ(m)^s via Euler–Maclaurin through the first Bernoulli term."""
        fM = float(self.terms(M, s))
        v = math.log(M)
        # d/dm λ^s = λ^s · s · (k/(m log m) − 1/m)
        dfM = fM * s * (self.k / (M * v) - 1.0 / M)
        return self.tail_integral(M, s) + 0.5 * fM - dfM / 12.0

    def power_sum(self, s: float, M: int = 10**6) -> float:
        """Σ_{m ≥ m_start} λ(m)^s."""
        if s <= 1.0:
            raise NonSummableError("s must exceed 1")
        head = float(np.sum(self.terms(np.arange(self.m_start, M), s)))
        return head + self.tail_sum(M, s)

    def benchmark(self, s: float) -> float:
        """Γ(ks+1)/(s-1)^{ks+1}, the integral over ``[1, inf)`` in closed form."""
        a = self.k * s + 1.0
        return math.exp(special.gammaln(a) - a * math.log(s - 1.0))


_FAMILIES = {
    "harmonic": SequenceFamily("harmonic", 0, 1),
    "loglin": SequenceFamily("loglin", 1, 1),
}


def sequence_family(key: str) -> SequenceFamily:
    """Named analytic families: ``harmonic`` (1/m), ``loglin`` (log m/m), ``logk:k`` (log^k(2+n)/(2+n))."""
    if key in _FAMILIES:
        return _FAMILIES[key]
    if key.startswith("logk:"):
        try:
            k = int(key.split(":", 1)[1])
        except ValueError as exc:
            raise TracesError(f"malformed family key {key!r}") from exc
        if k < 0:
            raise TracesError("k must be nonnegative")
        return SequenceFamily(key, k, 2)
    raise TracesError(f"unknown sequence family {key!r}")


def phi_k(t, k: int):
    """Φ_k(t) = log^{k+1}(e+t)/(k+1)."""
    return np.log(math.e + np.asarray(t, dtype=float)) ** (k + 1) / (k + 1)


@dataclass
class ZetaReport:
    """Zeta-type estimates on a grid with optional analytic benchmark."""

    grid: np.ndarray
    s: np.ndarray
    values: np.ndarray
    benchmark: np.ndarray | None
    truncated: bool
    tail_fraction: np.ndarray | None = None
    completed: np.ndarray | None = None

    def summary(self) -> dict:
        return {
            "grid": self.grid.tolist(),
            "s": self.s.tolist(),
            "values": self.values.tolist(),
            "benchmark": None if self.benchmark is None else self.benchmark.tolist(),
            "truncated": self.truncated,
            "tail_fraction": None if self.tail_fraction is None else self.tail_fraction.tolist(),
            "completed": None if self.completed is None else self.completed.tolist(),
        }


def _raw_power_sum(lam: np.ndarray, s: float) -> tuple[float, float]:
    """Σ λ^s over stored terms and an integral estimate of the missing tail.

    The tail is modelled by the local power decay ``λ ~ n^{-p}`` fitted over
    the last decade of stored terms.  Raises when ``p·s ≤ 1``.
    """
    if np.any(lam < 0):
        raise TracesError("zeta estimators need a nonnegative sequence")
    total = float(np.sum(lam**s))
    N = lam.size
    if N < 20 or lam[-1] == 0.0:
        return total, 0.0
    i0 = max(1, N // 10)
    a, b = lam[i0 - 1], lam[-1]
    if a <= 0:
        return total, 0.0
    p = math.log(a / b) / math.log(N / i0)
    if p * s <= 1.0:
        raise NonSummableError(
            f"stored terms decay like n^-{p:.3g}; the power {s:.4g} is not summable"
        )
    tail = (b**s) * N / (p * s - 1.0)
    return total, tail


def zeta_estimate(seq, k: int, n_grid: Sequence[float]) -> ZetaReport:
    """``Tr(G^{1+1/log n}) / ((k+1)! Φ_k(n))`` on a grid of ``n``.

    ``seq`` is either a nonincreasing nonnegative array, summed as stored
    with ``truncated=True``, an estimate of the missing tail and the
    tail-completed values in ``completed``, or a
    :class:`SequenceFamily` whose tail is completed in closed form.
    """
    if k < 0:
        raise TracesError("k must be a nonnegative integer")
    grid = np.asarray(n_grid, dtype=float)
    if np.any(grid <= 1):
        raise TracesError("n_grid entries must exceed 1")
    s = 1.0 + 1.0 / np.log(grid)
    norm = math.factorial(k + 1) * phi_k(grid, k)
    if isinstance(seq, SequenceFamily):
        vals = np.array([seq.power_sum(si) for si in s])
        return ZetaReport(grid, s, vals / norm, None, False)
    lam = np.asarray(seq, dtype=float)
    sums, tails = zip(*(_raw_power_sum(lam, si) for si in s)) if lam.size else ((0.0,) * len(s), (0.0,) * len(s))
    sums, tails = np.array(sums), np.array(tails)
    frac = np.divide(tails, sums + tails, out=np.zeros_like(tails), where=(sums + tails) > 0)
    return ZetaReport(grid, s, sums / norm, None, True, frac, (sums + tails) / norm)


def zeta_power_limit(seq, k: int, s_grid: Sequence[float], M: int = 10**6) -> ZetaReport:
    """``(s-1)^{k+1} Σ_n λ_n^s`` on a grid of ``s > 1``.

    For a :class:`SequenceFamily` the sum beyond ``M`` is completed by
    Euler–Maclaurin and the benchmark ``(s-1)^{k+1} Γ(ks'+1)/(s-1)^{ks'+1}``
    (``k'`` the family's log power) is reported alongside.
    """
    s = np.asarray(s_grid, dtype=float)
    if np.any(s <= 1.0):
        raise TracesError("every s must exceed 1")
    scale = (s - 1.0) ** (k + 1)
    if isinstance(seq, SequenceFamily):
        sums = np.array([seq.power_sum(si, M) for si in s])
        bench = np.array([seq.benchmark(si) for si in s])
        return ZetaReport(s, s, scale * sums, scale * bench, False)
    lam = np.asarray(seq, dtype=float)
    pairs = [_raw_power_sum(lam, si) for si in s]
    sums = np.array([p[0] for p in pairs])
    tails = np.array([p[1] for p in pairs])
    frac = np.divide(tails, sums + tails, out=np.zeros_like(tails), where=(sums + tails) > 0)
    return ZetaReport(s, s, scale * sums, None, True, frac, scale * (sums + tails))
