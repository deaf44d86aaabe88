"""covmax command line: test, simulate, mc, diagnose, taper."""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

import numpy as np

from . import diagnostics, montecarlo, specio
from .core import (
    CARDINALITY,
    THEOREM,
    CovmaxError,
    DegenerateVariance,
    NullCovariance,
    PairIndexSet,
    gumbel_quantile,
    run_test,
)
from .processes import NonstationaryLinearSpec
from .structure import (
    TaperSpec,
    assess_taper,
    choose_bandwidth,
    sample_covariance,
    tapered_estimate,
    test_bandedness,
    test_covariance,
    test_identity,
    test_stationarity,
)

EXIT_OK, EXIT_ERROR, EXIT_REJECT = 0, 1, 2


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _emit(doc: dict, out: Optional[str], schema: Optional[str] = None) -> None:
    if schema:
        specio.validate(specio.to_jsonable(doc), schema)
    text = specio.dumps(doc)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _seed(args, doc: dict, key: str = "seed") -> int:
    seed = args.seed if args.seed is not None else doc.get(key)
    if seed is None:
        raise CovmaxError(f"no seed given: pass --seed or set '{key}' in the JSON document")
    return int(seed)


def cmd_test(args) -> int:
    X = specio.read_matrix_csv(args.input)
    mode = args.normalization
    if args.null == "independence":
        idx = PairIndexSet.strict(X.shape[1])
        res = run_test(X, NullCovariance.zero(), idx, mode)
    elif args.null == "identity":
        res = test_identity(X, mode)
    elif args.null == "stationarity":
        res = test_stationarity(X, mode)
    elif args.null == "banded":
        if args.band is None:
            raise CovmaxError("--null banded needs --band")
        res = test_bandedness(X, args.band, mode)
    elif args.null == "taper":
        if args.band is None and args.eta is None:
            raise CovmaxError("--null taper needs --band or --eta")
        res = assess_taper(X, args.band, args.eta, mode)
    else:
        if not args.sigma0:
            raise CovmaxError("--null custom needs --sigma0")
        res = test_covariance(X, specio.read_matrix_csv(args.sigma0), mode)
    crit = float(gumbel_quantile(args.alpha))
    report = {
        "test": args.null,
        "n": X.shape[0],
        "m": X.shape[1],
        **res.to_dict(),
        "alpha": args.alpha,
        "critical_value": crit,
        "reject": res.reject(args.alpha),
    }
    _emit(report, args.out, "test_report")
    if args.out:
        print(
            f"statistic={res.statistic:.6g} y={res.normalized:.6g} p={res.p_value:.6g} "
            f"argmax={res.argmax_pair} reject@{args.alpha}={report['reject']}"
        )
    if report["reject"] and args.fail_on_reject:
        return EXIT_REJECT
    return EXIT_OK


def cmd_simulate(args) -> int:
    doc = specio.read_json(args.spec)
    n = args.n or doc.get("n")
    if not n:
        raise CovmaxError("sample size missing: pass --n or set 'n' in the spec")
    proc = specio.build_process(doc, args.m or doc.get("m"))
    X = proc.generate(int(n), _seed(args, doc))
    specio.write_matrix_csv(args.out, X)
    return EXIT_OK


def cmd_mc(args) -> int:
    doc = specio.read_json(args.config)
    specio.validate(doc, "study_config")
    if args.seed is not None:
        doc = {**doc, "master_seed": args.seed}
    elif "master_seed" not in doc:
        raise CovmaxError("no seed given: pass --seed or set 'master_seed' in the config")
    cfg = montecarlo.StudyConfig.from_dict(doc)
    summary = montecarlo.run_study(cfg, args.threads)
    _emit(summary.to_dict(include_runtime=args.timing), args.out, "study_summary")
    if args.csv:
        specio.write_matrix_csv(args.csv, summary.replication_rows(), ["replication", "y", "p"])
    if args.ecdf:
        specio.write_matrix_csv(args.ecdf, summary.ecdf_rows(), ["y", "ecdf", "gumbel_cdf"])
    return EXIT_OK


def cmd_diagnose(args) -> int:
    doc = specio.read_json(args.spec)
    proc = specio.build_process(doc, args.m or doc.get("m"))
    m = proc.m
    if args.index == "strict":
        idx = PairIndexSet.strict(m)
    elif args.index == "diagonal":
        idx = PairIndexSet.with_diagonal(m)
    else:
        idx = PairIndexSet.band_exterior(m, args.band or 0)
    rep = diagnostics.condition_report(proc, idx, args.b_grid, args.t_grid, cap=args.cap)
    out = rep.to_dict()
    out["index_set"] = {"kind": idx.kind, "m": m, "band": idx.band}
    spec = specio.spec_from_dict(doc)
    if isinstance(spec, NonstationaryLinearSpec):
        out["h_profile"] = diagnostics.h_profile(spec)
    _emit(out, args.out, "dependence_report")
    return EXIT_OK


def cmd_taper(args) -> int:
    X = specio.read_matrix_csv(args.input)
    n, m = X.shape
    band = args.band if args.band is not None else choose_bandwidth(n, args.eta)
    spec = TaperSpec(band, m)
    T = tapered_estimate(X, spec)
    specio.write_matrix_csv(args.out, T)
    report = {"band": band, "eta": args.eta, "n": n, "m": m}
    if args.truth:
        S = specio.read_matrix_csv(args.truth)
        if S.shape != (m, m):
            raise CovmaxError(f"--truth is {S.shape}, expected {(m, m)}")
        raw = sample_covariance(X)
        report["errors"] = {
            "tapered_operator": float(np.linalg.norm(T - S, 2)),
            "raw_operator": float(np.linalg.norm(raw - S, 2)),
            "tapered_frobenius": float(np.linalg.norm(T - S)),
            "raw_frobenius": float(np.linalg.norm(raw - S)),
        }
    if args.report or args.truth:
        _emit(report, args.report, "taper_report")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="covmax", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="run a covariance structure test on a CSV data matrix")
    t.add_argument("--input", required=True, help="CSV, rows = observations")
    t.add_argument(
        "--null",
        required=True,
        choices=["independence", "identity", "stationarity", "banded", "taper", "custom"],
    )
    t.add_argument("--band", type=int)
    t.add_argument("--eta", type=float, help="taper decay exponent; picks the band from n")
    t.add_argument("--sigma0", help="CSV with the hypothesized covariance (custom null)")
    t.add_argument("--normalization", choices=[THEOREM, CARDINALITY])
    t.add_argument("--alpha", type=float, default=0.05)
    t.add_argument("--out")
    t.add_argument("--fail-on-reject", action="store_true", help="exit 2 when H0 is rejected")
    t.set_defaults(func=cmd_test)

    s = sub.add_parser("simulate", help="generate a data matrix from a JSON generator spec")
    s.add_argument("spec")
    s.add_argument("--n", type=int)
    s.add_argument("--m", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    mc = sub.add_parser("mc", help="run a Monte Carlo study from a JSON config")
    mc.add_argument("config")
    mc.add_argument("--seed", type=int, help="overrides master_seed")
    mc.add_argument("--out")
    mc.add_argument("--csv", help="per-replication (replication, y, p) CSV")
    mc.add_argument("--ecdf", help="empirical CDF of y with the Gumbel CDF, CSV")
    mc.add_argument("--threads", type=int, help="worker threads (default COVMAX_THREADS or all cores)")
    mc.add_argument("--timing", action="store_true", help="include wall-clock runtime in the summary")
    mc.set_defaults(func=cmd_mc)

    d = sub.add_parser("diagnose", help="tabulate dependence conditions for a linear generator")
    d.add_argument("spec")
    d.add_argument("--m", type=int)
    d.add_argument("--index", choices=["strict", "diagonal", "band"], default="strict")
    d.add_argument("--band", type=int)
    d.add_argument("--b-grid", type=_ints, default=[1, 2, 4, 8, 16])
    d.add_argument("--t-grid", type=_floats, default=[0.05, 0.1, 0.2, 0.5])
    d.add_argument("--cap", type=int, default=2000)
    d.add_argument("--out")
    d.set_defaults(func=cmd_diagnose)

    tp = sub.add_parser("taper", help="flat-top tapered covariance estimate of a CSV data matrix")
    tp.add_argument("--input", required=True)
    g = tp.add_mutually_exclusive_group(required=True)
    g.add_argument("--band", type=int)
    g.add_argument("--eta", type=float)
    tp.add_argument("--truth", help="CSV with the true covariance; reports norm errors")
    tp.add_argument("--out", required=True, help="CSV for the tapered matrix")
    tp.add_argument("--report", help="JSON report path (stdout if omitted and --truth given)")
    tp.set_defaults(func=cmd_taper)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except DegenerateVariance as e:
        print(f"covmax: degenerate variance at pair {e.pair}: {e}", file=sys.stderr)
        return EXIT_ERROR
    except (CovmaxError, OSError) as e:
        print(f"covmax: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
