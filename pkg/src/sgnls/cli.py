"""Command-line entry point: batch experiments over the gasket eigenbasis."""

from __future__ import annotations

import argparse
import contextlib
import os
import sys

import numpy as np

from . import __version__
from .cache import basis_cache_save, load_or_build
from .calculus import hs_norm, to_coeffs
from .dynamics import NlsConfig, nls_solve, propagate
from .errors import SgnlsError
from .experiments import (
    ExperimentConfig,
    ExperimentReport,
    run_derivative_check,
    run_illposedness,
    run_sobolev_saturation,
    run_strichartz,
)
from .geometry import support_measure
from .spectral import DIRICHLET, NEUMANN

#: subcommands whose solver workload wants a smaller default level
_SMALL_LEVEL_DEFAULT = {"derivcheck": 4, "nls": 4}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sgnls",
        description="Spectral analysis and Schrodinger dynamics on the "
                    "Sierpinski gasket",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("basis", "build (and cache) the eigenbasis"),
        ("spectrum", "list continuum eigenvalues"),
        ("localized", "build and validate the localized family"),
        ("sobolev", "Sobolev saturation ratios of the localized family"),
        ("illposed", "Duhamel growth ratios and slopes"),
        ("strichartz", "space-time L4 identity and H^s comparison"),
        ("derivcheck", "finite-difference flow-map derivative checks"),
        ("nls", "nonlinear split-step solve with mass-drift report"),
        ("verify", "run the quick verification battery"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--level", type=int, default=None,
                       help="refinement level M (default 6)")
        p.add_argument("--bc", choices=(DIRICHLET, NEUMANN), default=DIRICHLET)
        p.add_argument("--k", type=int, default=1,
                       help="nonlinearity order (power 2k+1)")
        p.add_argument("--s", type=float, action="append", default=None,
                       help="Sobolev regularity (repeatable)")
        p.add_argument("--q", type=int, action="append", default=None,
                       help="Lebesgue exponent (repeatable)")
        p.add_argument("--jmin", type=int, default=2)
        p.add_argument("--jmax", type=int, default=None,
                       help="last localized generation (default min(6, level))")
        p.add_argument("--T", type=float, default=1.0)
        p.add_argument("--dt", type=float, default=1e-3)
        p.add_argument("--out", type=str, default=None,
                       help="report output path")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--cache", type=str, default=None,
                       help="basis cache directory (SGNLS_CACHE overrides)")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--tolerance-profile", choices=("strict", "default"),
                       default="default")
    return parser


def _experiment_config(args) -> ExperimentConfig:
    level = args.level if args.level is not None else 6
    jmax = args.jmax if args.jmax is not None else min(6, level)
    return ExperimentConfig(
        level=level,
        bc=args.bc,
        k=args.k,
        s_values=tuple(args.s) if args.s else (0.3, 0.5),
        q_values=tuple(args.q) if args.q else (4, 6, 8),
        jmin=args.jmin,
        jmax=jmax,
        T=args.T,
        dt=args.dt,
        output_format=args.format,
        cache_dir=args.cache_dir,
        threads=args.threads,
        tolerance_profile=args.tolerance_profile,
    )


def _finish(report: ExperimentReport, args) -> int:
    for key in sorted(report.verdicts):
        status = "PASS" if report.verdicts[key] else "FAIL"
        print(f"{report.name}: {key}: {status}")
    if args.out:
        report.write(args.out, args.format)
        print(f"wrote {args.out}")
    return 0 if report.passed else 1


def _cmd_basis(args) -> int:
    level = args.level if args.level is not None else 6
    basis = load_or_build(level, args.bc, args.cache_dir)
    print(f"basis level={basis.level} bc={basis.bc} size={basis.size}")
    lam = np.sort(basis.eigenvalues)
    print("lowest eigenvalues:", " ".join(f"{v:.6f}" for v in lam[:6]))
    if args.out:
        basis_cache_save(basis, args.out)
        print(f"wrote {args.out}")
    return 0


def _cmd_spectrum(args) -> int:
    level = args.level if args.level is not None else 6
    basis = load_or_build(level, args.bc, args.cache_dir)
    report = ExperimentReport(
        name="spectrum",
        params={"level": level, "bc": args.bc},
        columns=("index", "lambda", "birth_level", "localized_j"),
    )
    for i, pair in enumerate(basis.pairs):
        j = pair.localized.j if pair.localized else ""
        report.rows.append((i, pair.lam, pair.birth_level, j))
    if args.out:
        report.write(args.out, args.format)
        print(f"wrote {args.out}")
    else:
        for row in report.rows[:20]:
            print(*row)
        if len(report.rows) > 20:
            print(f"... ({len(report.rows)} total; use --out for the full list)")
    return 0


def _cmd_localized(args) -> int:
    cfg = _experiment_config(args)
    basis = load_or_build(cfg.level, cfg.bc, cfg.cache_dir)
    report = ExperimentReport(
        name="localized", params=cfg.params(),
        columns=("j", "lambda", "ratio_to_previous", "support_measure",
                 "support_lo", "support_hi"),
    )
    prev = None
    ratios_ok, support_ok = True, True
    for j in range(cfg.jmin, cfg.jmax + 1):
        pair = basis.pairs[basis.localized_index(j)]
        supp = support_measure(pair.values, basis.vs)
        lo, hi = 2.0 * 3.0 ** (-j), 2.0 * 3.0 ** (-j + 1)
        ratio = pair.lam / prev if prev else float("nan")
        if prev:
            ratios_ok &= abs(ratio - 5.0) <= 5.0 * 1e-9
        support_ok &= lo <= supp <= hi
        report.rows.append((j, pair.lam, ratio, supp, lo, hi))
        prev = pair.lam
    report.verdicts["eigenvalue_ratio_5"] = ratios_ok
    report.verdicts["support_bounds"] = support_ok
    return _finish(report, args)


def _cmd_nls(args) -> int:
    level = args.level if args.level is not None else _SMALL_LEVEL_DEFAULT["nls"]
    jmax = args.jmax if args.jmax is not None else min(6, level)
    cfg = ExperimentConfig(level=level, bc=args.bc, k=args.k, jmin=args.jmin,
                           jmax=jmax, T=args.T, dt=args.dt,
                           cache_dir=args.cache_dir,
                           tolerance_profile=args.tolerance_profile)
    basis = load_or_build(cfg.level, cfg.bc, cfg.cache_dir)
    pair = basis.pairs[basis.localized_index(cfg.jmin)]
    u0 = to_coeffs(pair.values, basis)
    traj = nls_solve(u0, NlsConfig(k=cfg.k, mu=1.0, T=cfg.T, dt=cfg.dt))
    mass0 = hs_norm(traj[0][1], 0.0)
    drift = max(abs(hs_norm(c, 0.0) - mass0) for _, c in traj)
    report = ExperimentReport(
        name="nls", params=cfg.params(),
        columns=("t", "l2_norm"),
        rows=[(t, hs_norm(c, 0.0)) for t, c in traj],
    )
    report.verdicts["mass_conservation"] = drift <= 1e-8
    print(f"nls: mass drift {drift:.3e} over [0, {cfg.T}]")
    return _finish(report, args)


def _cmd_verify(args) -> int:
    level = args.level if args.level is not None else 6
    jmax = args.jmax if args.jmax is not None else min(6, level)
    base = dict(bc=args.bc, jmin=args.jmin, cache_dir=args.cache_dir,
                tolerance_profile=args.tolerance_profile)
    reports = [
        run_sobolev_saturation(ExperimentConfig(
            level=level, jmax=jmax, q_values=(4, 6, 8), **base)),
        run_illposedness(ExperimentConfig(
            level=level, jmax=jmax, k=args.k,
            s_values=tuple(args.s) if args.s else (0.3, 0.5),
            T=args.T, **base)),
        run_strichartz(ExperimentConfig(
            level=level, jmax=jmax, T=args.T, **base)),
        run_derivative_check(ExperimentConfig(
            level=min(level, 4), jmax=min(jmax, min(level, 4)),
            T=args.T, dt=args.dt, **base)),
    ]
    # propagator sanity: H^s isometry on a deterministic coefficient vector
    basis = load_or_build(min(level, 4), args.bc, args.cache_dir)
    rng = np.random.default_rng(0)
    c = to_coeffs(basis.pairs[0].values, basis).copy_with(
        rng.standard_normal(basis.size) + 1j * rng.standard_normal(basis.size))
    iso_dev = max(
        abs(hs_norm(propagate(c, t), s) - hs_norm(c, s)) / hs_norm(c, s)
        for t in (0.3, 1.7) for s in (0.0, 0.5, 1.0)
    )
    ok = iso_dev <= 1e-12
    print(f"verify: propagator_isometry: {'PASS' if ok else 'FAIL'}")
    failed = not ok
    for report in reports:
        for key in sorted(report.verdicts):
            status = "PASS" if report.verdicts[key] else "FAIL"
            print(f"verify: {report.name}: {key}: {status}")
        failed |= not report.passed
    return 1 if failed else 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    args.cache_dir = os.environ.get("SGNLS_CACHE") or args.cache
    stack = contextlib.ExitStack()
    try:
        from threadpoolctl import threadpool_limits
        stack.enter_context(threadpool_limits(limits=max(1, args.threads)))
    except ImportError:  # pragma: no cover - threadpoolctl ships with sklearn
        pass
    try:
        if args.command == "basis":
            return _cmd_basis(args)
        if args.command == "spectrum":
            return _cmd_spectrum(args)
        if args.command == "localized":
            return _cmd_localized(args)
        if args.command == "sobolev":
            return _finish(run_sobolev_saturation(_experiment_config(args)), args)
        if args.command == "illposed":
            return _finish(run_illposedness(_experiment_config(args)), args)
        if args.command == "strichartz":
            return _finish(run_strichartz(_experiment_config(args)), args)
        if args.command == "derivcheck":
            if args.level is None:
                args.level = _SMALL_LEVEL_DEFAULT["derivcheck"]
            if args.jmax is None:
                args.jmax = min(6, args.level)
            return _finish(run_derivative_check(_experiment_config(args)), args)
        if args.command == "nls":
            return _cmd_nls(args)
        if args.command == "verify":
            return _cmd_verify(args)
        raise AssertionError(f"unhandled command {args.command}")
    except SgnlsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    finally:
        stack.close()


if __name__ == "__main__":
    sys.exit(main())
