"""Command-line front end: ``dixmier-lab <command> [options]``.

Every command writes ``config.json`` (the parsed arguments) and
``summary.json`` into ``--out``, plus command-specific CSV/binary files.
Exit status is 0 when the verdict passes, 2 when it fails, 1 on usage or
input errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import ideals, logclassical, modulated, regvar, torus_op, traces
from ._numerics import log_grid

SCHEMA = "1"
DEFAULT_MEMORY_CAP_GIB = 8.0

ANCHORS = {
    "regvar-check": "regular and smooth variation of the normalizing function",
    "karamata": "Karamata theorem for integrals and dyadic sums",
    "property-w": "property (W) of the normalizing function",
    "ideal-norms": "weak and Lorentz ideal quasi-norms",
    "trace-estimate": "Dixmier trace as an extended limit of normalized partial sums",
    "zeta": "zeta-function residue formula for Dixmier traces",
    "quantize": "quantization of toroidal symbols",
    "connes-verify": "Connes trace theorem for log-classical operators",
    "modulation": "Laplacian modulated operators and their symbol criteria",
    "dirac-demo": "trace formula for the logarithmically dampened Dirac operator",
}


class UsageError(Exception):
    """Bad command-line usage or unreadable input."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# ---------------------------------------------------------------------------
# helpers


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _ints(text: str) -> list[int]:
    try:
        return [int(float(v)) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _modes(text: str) -> dict:
    """Parse ``"1:0.5,-1:0.5"`` into ``{1: 0.5, -1: 0.5}``."""
    out = {}
    try:
        for item in text.split(","):
            m, c = item.split(":")
            out[int(m)] = complex(c.replace(" ", ""))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected mode:coefficient pairs, got {text!r}") from exc
    return out


def _clean(obj):
    """Recursively convert numpy types and non-finite floats for JSON."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, complex):
        return [_clean(obj.real), _clean(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n")


def _check_memory(rows: int, cap_gib: float, what: str) -> None:
    need = 16.0 * rows * rows
    if need > cap_gib * 2**30:
        raise UsageError(
            f"{what} needs a dense {rows}x{rows} complex matrix ({need / 2**30:.1f} GiB), "
            f"above the memory cap of {cap_gib:g} GiB"
        )


def _read_sequence(path: str) -> np.ndarray:
    try:
        values = ideals.read_sequence_csv(path)
    except OSError as exc:
        raise UsageError(str(exc)) from exc
    if values.size == 0:
        raise UsageError(f"{path}: no values")
    return values


def _read_matrix(path: str) -> np.ndarray:
    try:
        return ideals.read_matrix_csv(path)
    except (OSError, ValueError) as exc:
        raise UsageError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# commands; each returns (passed, result dict) and may write extra files


def cmd_regvar_check(args, out: Path):
    f = regvar.family(args.family)
    rho = f.index if args.rho is None else args.rho
    t = log_grid(args.t_min, args.t_max)
    rep = regvar.check_regular_variation(f, rho, args.lambdas, t)
    rep.to_csv(out / "deviations.csv")
    limits = rep.limiting_deviation()
    result = {
        "limiting_deviation": limits,
        "tol": args.tol,
        "family": f.name,
        "rho": rho,
        "max_deviation": rep.max_deviation,
        "trend": rep.trend,
        "shrinking": rep.shrinking,
    }
    passed = all(v <= args.tol for v in limits.values())
    if args.smooth:
        srep = regvar.check_smooth_variation(f, rho, args.smooth, t)
        srep.to_csv(out / "smooth_deviations.csv")
        result["smooth_trend"] = srep.trend
        slimits = srep.limiting_deviation()
        result["smooth_limiting_deviation"] = slimits
        passed = passed and all(v <= args.tol for v in slimits.values())
    return passed, result


def cmd_karamata(args, out: Path):
    f = regvar.family(args.family)
    if args.side in ("below", "above"):
        rep = regvar.karamata_integral_limit(
            f, args.alpha, args.beta, args.side, log_grid(1e2, args.t_max), args.richardson
        )
        tol = 0.10 if args.tol is None else args.tol
    else:
        rep = regvar.karamata_dyadic_limit(f, args.alpha, args.beta, args.side, args.terms, args.richardson)
        tol = 0.02 if args.tol is None else args.tol
    (out / "karamata.csv").write_text(
        "x,ratio\n" + "".join(f"{a!r},{b!r}\n" for a, b in zip(rep.grid.tolist(), rep.ratios.tolist()))
    )
    result = {
        "target": rep.target,
        "estimate": rep.estimate,
        "extrapolated": rep.extrapolated,
        "relative_error": rep.relative_error,
        "best_relative_error": rep.best_relative_error,
        "deviation_slope": rep.deviation_slope,
        "tol": tol,
    }
    return rep.best_relative_error <= tol, result


def cmd_property_w(args, out: Path):
    f = regvar.family(args.family)
    rep = regvar.check_property_w(f, log_grid(1e2, args.t_max))
    (out / "property_w.csv").write_text(
        "t,ratio\n" + "".join(f"{a!r},{b!r}\n" for a, b in zip(rep.t.tolist(), rep.ratio.tolist()))
    )
    result = {"verdict": rep.verdict, "C1": rep.C1, "C2": rep.C2, "slope": rep.slope, "expect": args.expect}
    return (args.expect is None or rep.verdict == args.expect), result


def cmd_ideal_norms(args, out: Path):
    f = regvar.family(args.family)
    if (args.input is None) == (args.matrix is None):
        raise UsageError("give exactly one of --input or --matrix")
    if args.input is not None:
        seq = ideals.SingularSequence.from_unsorted(_read_sequence(args.input))
    else:
        seq = ideals.singular_values(_read_matrix(args.matrix))
    seq.to_csv(out / "singular_values.csv")
    weak = ideals.weak_quasinorm(seq, f)
    lor = ideals.lorentz_norm(seq, f)
    result = {
        "N": seq.N,
        "weak": {"value": weak.value, "argmax": weak.argmax},
        "lorentz": {"value": lor.value, "argmax": lor.argmax},
    }
    if args.q is not None:
        cv = ideals.convexified_quasinorm(seq, f, args.q)
        result["convexified"] = {"q": args.q, "value": cv.value, "argmax": cv.argmax}
    return True, result


def cmd_trace_estimate(args, out: Path):
    correction = None if args.raw else 1
    if args.input is not None:
        lam = torus_op.order_by_magnitude(_read_sequence(args.input))
        f = regvar.family(args.phi or "phi:-1:0")
    else:
        fam = traces.sequence_family(args.family)
        lam = fam.sequence(int(args.n))
        f = regvar.family(args.phi or f"phi:-1:{fam.k}")
    est = traces.dixmier_sequence(lam, f, args.tol, correction)
    summary = est.summary()
    (out / "normalized_sums.csv").write_text(
        "n,c\n" + "".join(f"{a},{b!r}\n" for a, b in zip(summary["n"], summary["c"]))
    )
    return est.converged, summary


def cmd_zeta(args, out: Path):
    seq = traces.sequence_family(args.family) if args.input is None else _read_sequence(args.input)
    if args.s is not None:
        if args.input is not None:
            rep = traces.zeta_power_limit(seq, args.k or 0, args.s, int(args.M))
            return True, rep.summary()
        rows, ok = [], True
        for s in args.s:
            val = seq.power_sum(s, int(args.M))
            bench = seq.benchmark(s)
            rel = abs(val - bench) / bench
            ok = ok and rel <= args.tol
            rows.append({"s": s, "value": val, "benchmark": bench, "relative_error": rel,
                         "scaled": (s - 1.0) ** (seq.k + 1) * val})
        (out / "zeta.csv").write_text(
            "s,value,benchmark,relative_error\n"
            + "".join(f"{r['s']!r},{r['value']!r},{r['benchmark']!r},{r['relative_error']!r}\n" for r in rows)
        )
        return ok, {"rows": rows, "tol": args.tol}
    grid = args.n_grid or [1e2, 1e3, 1e4, 1e5, 1e6]
    if args.k is not None:
        k = args.k
    else:
        k = 0 if args.input is not None else seq.k
    rep = traces.zeta_estimate(seq, k, grid)
    return True, rep.summary()


def _symbol(args) -> torus_op.Symbol:
    if args.csv is not None:
        return torus_op.TabulatedSymbol.from_csv(args.csv, args.d)
    return torus_op.symbol_from_key(args.symbol, args.d)


def cmd_quantize(args, out: Path):
    p = _symbol(args)
    _check_memory(torus_op.lattice_size(args.d, args.N), args.memory_cap, "quantize")
    op = torus_op.quantize(p, args.N)
    bin_path, json_path = op.export(out / "operator")
    return True, {"header": op.header(), "hermitian": op.is_hermitian(), "files": [Path(bin_path).name, Path(json_path).name]}


def _logclassical_symbol(args) -> logclassical.LogClassicalSymbol:
    if args.manifest is not None:
        try:
            text = Path(args.manifest).read_text()
        except OSError as exc:
            raise UsageError(str(exc)) from exc
        s = logclassical.LogClassicalSymbol.from_manifest(text)
        if args.regularization != s.regularization:
            s = s.with_regularization(args.regularization)
    else:
        s = logclassical.named_symbol(args.family, args.d, args.regularization)
    if args.k is not None and args.k != s.k:
        raise UsageError(f"--k {args.k} does not match the symbol's log-degree {s.k}")
    return s


def cmd_connes_verify(args, out: Path):
    s = _logclassical_symbol(args)
    if args.radius is not None:
        n_max = (1.0 + float(args.radius) ** 2) ** (s.d / 2.0)
    else:
        n_max = args.n
    if args.eigen_N:
        _check_memory(torus_op.lattice_size(s.d, int(2 * max(args.eigen_N))), args.memory_cap, "eigenvalue route")
    tol = args.tol if args.tol is not None else logclassical.default_tolerance(s.d, s.k)
    rep = logclassical.connes_verify(s, n_max, tol, args.region, args.eigen_N)
    (out / "convergence.csv").write_text(rep.table_csv())
    passed = rep.trace.converged and rep.gap <= tol
    result = rep.summary()
    result["n_max"] = n_max
    return passed, result


def cmd_modulation(args, out: Path):
    f = regvar.family(args.family)
    if args.matrix is not None:
        if args.reference is None:
            raise UsageError("--matrix needs --reference")
        pair = modulated.ReferencePair(_read_matrix(args.matrix), _read_matrix(args.reference))
        strong = modulated.strong_modulation_norm(pair, f)
        spectral = modulated.spectral_modulation_norm(pair, f)
        (out / "strong.csv").write_text(strong.to_csv())
        (out / "spectral.csv").write_text(spectral.to_csv())
        weak = [vars(w) for w in modulated.weak_modulation_scan(pair, f, args.p)]
        result = {"strong": strong.summary(), "spectral": spectral.summary(), "weak": weak}
        return strong.verdict == "finite" and spectral.verdict == "finite", result
    p = _symbol(args)
    t = log_grid(args.t_min, args.t_max, 10)
    if args.mode == "l2":
        rep = modulated.symbol_l2_criterion(p, f, t)
        (out / "l2.csv").write_text(rep.to_csv())
        return rep.verdict == "finite", rep.summary()
    if args.mode == "growth":
        g = modulated.moderate_growth(p, f, args.k_max)
        return g.verdict == "finite", {"k": g.k, "bands": g.bands, "cumulative_ratio": g.cumulative_ratio,
                                       "slope": g.slope, "verdict": g.verdict}
    dec = modulated.reasonable_decay(p, f, t)
    return dec.verdict, {"t": dec.t, "values": dec.values, "slope": dec.slope, "verdict": dec.verdict}


def cmd_dirac_demo(args, out: Path):
    modes = args.modes if args.modes is not None else {1: 0.5, -1: 0.5}
    rep = logclassical.dirac_log_demo(modes, args.N, tol=args.tol)
    result = rep.summary()
    passed = rep.ratio is not None and rep.agree and abs(rep.ratio - 1.0) <= args.tol
    return passed, result


COMMANDS = {
    "regvar-check": cmd_regvar_check,
    "karamata": cmd_karamata,
    "property-w": cmd_property_w,
    "ideal-norms": cmd_ideal_norms,
    "trace-estimate": cmd_trace_estimate,
    "zeta": cmd_zeta,
    "quantize": cmd_quantize,
    "connes-verify": cmd_connes_verify,
    "modulation": cmd_modulation,
    "dirac-demo": cmd_dirac_demo,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="dixmier_out", help="output directory (default: %(default)s)")
    common.add_argument("--seed", type=int, default=0, help="seed recorded for reproducibility")
    common.add_argument("--memory-cap", type=float, default=DEFAULT_MEMORY_CAP_GIB,
                        help="refuse dense matrices above this many GiB (default: %(default)s)")

    parser = _Parser(prog="dixmier-lab", description="Numerical checks for Dixmier traces in general ideals.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("regvar-check", parents=[common], help="regular/smooth variation tables")
    p.add_argument("--family", required=True)
    p.add_argument("--rho", type=float, default=None, help="target index (default: family index)")
    p.add_argument("--lambdas", type=_floats, default=[2.0, 3.0, 10.0])
    p.add_argument("--t-min", type=float, default=1e2)
    p.add_argument("--t-max", type=float, default=1e8)
    p.add_argument("--smooth", type=int, default=0, help="also check derivatives up to this order")
    p.add_argument("--tol", type=float, default=0.05, help="bound on the extrapolated deviation")

    p = sub.add_parser("karamata", parents=[common], help="Karamata limits")
    p.add_argument("--family", required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--side", choices=["below", "above", "partial", "tail"], required=True)
    p.add_argument("--t-max", type=float, default=1e8)
    p.add_argument("--terms", type=int, default=40)
    p.add_argument("--richardson", action="store_true")
    p.add_argument("--tol", type=float, default=None)

    p = sub.add_parser("property-w", parents=[common], help="property (W) verdict")
    p.add_argument("--family", required=True)
    p.add_argument("--t-max", type=float, default=1e8)
    p.add_argument("--expect", choices=["both", "W1", "W2", "neither"], default=None)

    p = sub.add_parser("ideal-norms", parents=[common], help="weak/Lorentz quasi-norms")
    p.add_argument("--family", default="phi:-1:0")
    p.add_argument("--input", help="single-column CSV sequence")
    p.add_argument("--matrix", help="dense matrix CSV")
    p.add_argument("--q", type=float, default=None)

    p = sub.add_parser("trace-estimate", parents=[common], help="Dixmier trace estimate")
    p.add_argument("--input", help="single-column CSV eigenvalue sequence")
    p.add_argument("--family", default="harmonic", help="analytic sequence family")
    p.add_argument("--n", type=float, default=1e6, help="sequence length for --family")
    p.add_argument("--phi", default=None, help="normalizing family key")
    p.add_argument("--tol", type=float, default=traces.DEFAULT_TOL)
    p.add_argument("--raw", action="store_true", help="judge convergence without the 1/log correction")

    p = sub.add_parser("zeta", parents=[common], help="zeta-type residues")
    p.add_argument("--family", default="loglin")
    p.add_argument("--input")
    p.add_argument("--s", type=_floats, default=None)
    p.add_argument("--n-grid", type=_floats, default=None)
    p.add_argument("--k", type=int, default=None, help="log-degree of the normalization")
    p.add_argument("--M", type=float, default=1e6)
    p.add_argument("--tol", type=float, default=0.01)

    for name in ("quantize", "modulation"):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("--symbol", default="bracket:-1", help='symbol key "[xprofile*]radial"')
        p.add_argument("--csv", default=None, help="tabulated symbol CSV")
        p.add_argument("--d", type=int, choices=[1, 2], default=1)
        if name == "quantize":
            p.add_argument("--N", type=int, required=True)
        else:
            p.add_argument("--family", default="phi:-1:0")
            p.add_argument("--mode", choices=["l2", "growth", "decay"], default="l2")
            p.add_argument("--t-min", type=float, default=1e1)
            p.add_argument("--t-max", type=float, default=1e6)
            p.add_argument("--k-max", type=int, default=40)
            p.add_argument("--matrix", default=None, help="G as dense CSV")
            p.add_argument("--reference", default=None, help="V as dense CSV")
            p.add_argument("--p", type=_floats, default=[1.0, 2.0, 4.0])

    p = sub.add_parser("connes-verify", parents=[common], help="trace formula for log-classical symbols")
    p.add_argument("--d", type=int, choices=[1, 2], default=1)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--family", default="pow:-1", help="pow:-1, bracket or logbracket:k")
    p.add_argument("--manifest", default=None, help="JSON manifest of a log-classical symbol")
    p.add_argument("--n", type=float, default=1e6, help="cutoff on <xi>^d")
    p.add_argument("--radius", type=float, default=None, help="cutoff radius (overrides --n)")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--region", choices=["angle", "ball"], default="angle")
    p.add_argument("--regularization", choices=list(logclassical.REGULARIZATIONS), default="freeze")
    p.add_argument("--eigen-N", type=_ints, default=None)

    p = sub.add_parser("dirac-demo", parents=[common], help="dampened Dirac commutator traces on T^1")
    p.add_argument("--modes", type=_modes, default=None, help='Fourier modes of a, e.g. "1:0.5,-1:0.5"')
    p.add_argument("--N", type=int, default=4096)
    p.add_argument("--tol", type=float, default=0.05)
    return parser


def run(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = {k: v for k, v in vars(args).items() if k != "out"}
    config["schema"] = SCHEMA
    _dump(out / "config.json", config)
    passed, result = COMMANDS[args.command](args, out)
    _dump(out / "summary.json", {
        "schema": SCHEMA,
        "command": args.command,
        "anchor": ANCHORS[args.command],
        "passed": bool(passed),
        "result": result,
    })
    print(f"{args.command}: {'pass' if passed else 'fail'} (outputs in {out})")
    return 0 if passed else 2


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        threads = os.environ.get("DIXMIER_LAB_THREADS")
        limit = int(threads) if threads else None
        with threadpool_limits(limits=limit):
            return run(args)
    except UsageError as exc:
        print(f"dixmier-lab: error: {exc}", file=sys.stderr)
        return 1
    except (
        regvar.RegvarError,
        ideals.IdealsError,
        traces.TracesError,
        torus_op.TorusError,
        modulated.ModulationError,
        logclassical.LogClassicalError,
        ValueError,
    ) as exc:
        print(f"dixmier-lab: input error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
