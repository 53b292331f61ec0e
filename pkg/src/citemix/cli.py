"""Command-line interface: ``citemix {fit,compare,curves,sample,oracle-check}``.

Exit codes: 0 success, 1 statistical failure (no usable fit, oracle mismatch),
2 usage or I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import dist_core
from .dist_core import (
    REFERENCE_WE,
    ContinuousWELaw,
    DomainError,
    GammaLaw,
    LomaxMixtureParams,
    MaxEntParams,
    WaldLaw,
    WaldParams,
    WEMixtureParams,
    hazard,
    model_from_dict,
)
from .fit import FAMILIES, FitConfig, FitResult, fit_mle, result_with_gof, sweep_and_select
from .gof import TestInfeasible, chi2_test, compare_models, empirical_ccdf
from .histogram import CountsParseError, Histogram, ingest, write_raw
from .mix_oracle import OracleFailure, gamma_mixing, mixed_pmf, mixed_pmf_mixture, rig_mixing, spike_mixing
from .sampler import RngStream, sample_counts

log = logging.getLogger("citemix")

EXIT_OK, EXIT_STAT, EXIT_USAGE = 0, 1, 2
BUNDLED = "@bundled"
ORACLE_MUS = (0.5, 2.0, 11.72, 15.66, 50.0)
ORACLE_LAMS = (0.1, 0.64, 2.0, 8.92, 50.0)
ORACLE_KS = (1, 2, 5, 10, 50, 100, 500, 1000)


class UsageError(Exception):
    pass


def bundled_dataset_path() -> Path:
    """Histogram file of 3e5 WE counts drawn at the published parameters with seed 42."""
    return Path(str(resources.files("citemix") / "data" / "synthetic_we_seed42.hist"))


def _load_hist(args) -> Histogram:
    if args.input is None:
        raise UsageError("--input is required")
    if args.input == BUNDLED:
        return ingest(bundled_dataset_path(), fmt="hist", k_shift=args.k_shift)
    return ingest(args.input, fmt=args.format, k_shift=args.k_shift)


def _load_model(args):
    if getattr(args, "model", None):
        with open(args.model) as fh:
            d = json.load(fh)
        if "selected" in d:
            if d["selected"] is None:
                raise UsageError(f"{args.model} holds no selected fit")
            d = d["selected"]
        if "params" in d:
            return FitResult.from_dict(d).model
        return model_from_dict(d)
    if getattr(args, "preset", None) == "reference":
        return REFERENCE_WE
    if getattr(args, "params", None):
        comps = json.loads(args.params)
        if isinstance(comps, dict):
            comps = [comps]
        family = args.family or "we"
        kmax = getattr(args, "kmax_support", None)
        try:
            return model_from_dict({"family": family, "components": comps, "kmax": kmax})
        except (KeyError, TypeError) as exc:
            raise UsageError(f"--params does not describe a {family} model: {exc}") from None
    raise UsageError("give a model via --model, --params or --preset reference")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=True) + "\n"


def _m_values(arg: str) -> tuple[int, ...]:
    return (1, 2, 3) if arg == "sweep" else (int(arg),)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_fit(args) -> int:
    h = _load_hist(args)
    cfg = FitConfig(n_restarts=args.restarts, m_values=_m_values(args.m), k_shift=args.k_shift)
    rng = RngStream(args.seed)
    sweep = sweep_and_select(args.family, h, cfg, rng)
    for m, why in sweep.failures.items():
        log.warning("%s M=%d failed: %s", args.family, m, why)
    results = []
    for r in sweep.results:
        if r.model is not None:
            try:
                t = chi2_test(r.model, h, min_expected=args.min_expected, alpha=args.alpha)
                r = result_with_gof(r, t.statistic, t.dof, t.p_value)
            except TestInfeasible as exc:
                log.warning("chi-square infeasible for M=%d: %s", r.m, exc)
        results.append(r)
    selected = sweep.selected
    doc = {
        "schema_version": 1,
        "selected": results[selected].to_dict() if selected is not None else None,
        "sweep": [r.to_dict() for r in results],
        "failures": {str(m): why for m, why in sweep.failures.items()},
        "alpha": args.alpha,
        "n_obs": h.total_n,
        "n_zero": h.n_zero,
        "k_shift": h.k_shift,
    }
    if args.out:
        Path(args.out).write_text(_dump(doc))
    if args.json:
        sys.stdout.write(_dump(doc))
    else:
        print(f"N={h.total_n} (zero-citation entries: {h.n_zero}), family={args.family}, k_shift={h.k_shift}")
        if len(results) >= 2:
            print(compare_models(results, h, min_expected=args.min_expected).format())
        for r in results:
            print(f"M={r.m}: loglik={r.loglik!r} AIC={r.aic!r} converged={r.converged} params={r.to_dict()['params']}")
        if selected is not None:
            best = results[selected]
            verdict = "n/a" if best.p_value is None else ("rejected" if best.p_value < args.alpha else "not rejected")
            print(f"selected M={best.m} (chi2 p={best.p_value}, {verdict} at alpha={args.alpha})")
    if selected is None:
        print("no usable fit: every M failed", file=sys.stderr)
        return EXIT_STAT
    return EXIT_OK


def cmd_compare(args) -> int:
    h = _load_hist(args)
    rng = RngStream(args.seed)
    cfg = FitConfig(n_restarts=args.restarts, k_shift=args.k_shift)
    ms = _m_values(args.m)
    specs = [("we", m) for m in ms] + [("lomax", m) for m in ms] + [("powerlaw", 1), ("powerlaw", 2)]
    results = []
    for i, (fam, m) in enumerate(specs):
        r = fit_mle(fam, m, h, cfg, rng.child(i))
        if r.model is None:
            log.warning("%s M=%d produced no model", fam, m)
            continue
        results.append(r)
    table = compare_models(results, h, min_expected=args.min_expected)
    if args.out:
        text = table.to_csv() if str(args.out).endswith(".csv") else table.to_json(indent=2) + "\n"
        Path(args.out).write_text(text)
    sys.stdout.write(table.to_json(indent=2) + "\n" if args.json else table.format() + "\n")
    return EXIT_OK


def cmd_sample(args) -> int:
    model = _load_model(args)
    if args.n < 0:
        raise UsageError("-n must be nonnegative")
    ks = sample_counts(model, RngStream(args.seed), args.n) if args.n else np.empty(0, dtype=np.int64)
    if args.out in (None, "-"):
        cs = ks - args.k_shift
        sys.stdout.write("".join(f"{c}\n" for c in cs.tolist()))
    else:
        write_raw(args.out, ks, k_shift=args.k_shift)
    return EXIT_OK


def _csv(path: Path, header: list[str], cols: list[np.ndarray]) -> None:
    with path.open("w") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*cols):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def cmd_curves(args) -> int:
    model = _load_model(args)
    if args.kmax < 1:
        raise UsageError("--kmax must be >= 1")
    if not (0 < args.tau_min < args.tau_max) or args.tau_points < 2:
        raise UsageError("tau grid must satisfy 0 < tau-min < tau-max and tau-points >= 2")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    ks = np.arange(1, args.kmax + 1)
    _csv(out / "pmf.csv", ["k", "pmf"], [ks, model.pmf(ks)])
    k0 = np.arange(0, args.kmax + 1)
    _csv(out / "ccdf.csv", ["k", "ccdf"], [k0, model.ccdf(k0)])
    written += ["pmf.csv", "ccdf.csv"]

    if args.input:
        h = _load_hist(args)
        emp = empirical_ccdf(h)
        kk = emp.x.astype(np.int64)
        _csv(out / "empirical_ccdf.csv", ["k", "empirical", "model"], [emp.x, emp.y, model.ccdf(kk - 1)])
        written.append("empirical_ccdf.csv")

    tau = np.geomspace(args.tau_min, args.tau_max, args.tau_points)
    laws = []
    if isinstance(model, WEMixtureParams):
        laws += [(f"wald{i + 1}", WaldLaw(w)) for i, (_, w) in enumerate(model.components)]
    if args.gamma:
        for j, spec in enumerate(args.gamma):
            shape, scale = (float(x) for x in spec.split(","))
            laws.append((f"gamma{j + 1}", GammaLaw(shape, scale)))
    if laws:
        _csv(out / "processing_time.csv", ["tau"] + [n for n, _ in laws], [tau] + [law.pdf(tau) for _, law in laws])
        try:
            hz = [hazard(law, tau).y for _, law in laws]
        except DomainError as exc:
            raise UsageError(str(exc)) from None
        _csv(out / "hazard.csv", ["tau"] + [n for n, _ in laws], [tau] + hz)
        written += ["processing_time.csv", "hazard.csv"]
    if isinstance(model, WEMixtureParams):
        xs = np.concatenate([[0.0], np.geomspace(args.tau_min, float(args.kmax), args.tau_points)])
        cols = [ContinuousWELaw(w).pdf(xs) for _, w in model.components]
        _csv(out / "we_continuous_pdf.csv", ["x"] + [f"component{i + 1}" for i in range(len(cols))], [xs] + cols)
        written.append("we_continuous_pdf.csv")
    print("\n".join(str(out / f) for f in written))
    return EXIT_OK


def oracle_cells(ks=ORACLE_KS, mus=ORACLE_MUS, lams=ORACLE_LAMS):
    """Yield ``(label, closed_form_fn, oracle_fn)`` for every check cell."""
    for mu in mus:
        for lam in lams:
            w = WaldParams(mu, lam)
            single = WEMixtureParams.single(mu, lam)
            yield (f"we mu={mu} lam={lam}", lambda k, s=single: dist_core.we_pmf(k, s), lambda k, w=w: mixed_pmf(k, rig_mixing(w)))
    yield (
        "we reference mixture",
        lambda k: dist_core.we_pmf(k, REFERENCE_WE),
        lambda k: mixed_pmf_mixture(k, [(c, rig_mixing(w)) for c, w in REFERENCE_WE.components]),
    )
    for b, v in ((1.0, 1.0), (2.0, 1.5), (0.5, 0.7)):
        lm = LomaxMixtureParams(((1.0, b, v),))
        yield (f"lomax b={b} v={v}", lambda k, lm=lm: dist_core.lomax_pmf(k, lm), lambda k, b=b, v=v: mixed_pmf(k, gamma_mixing(v, b)))
    for beta0 in (0.05, 0.7):
        mp = MaxEntParams(beta0)
        yield (f"spike beta={beta0}", lambda k, mp=mp: dist_core.maxent_pmf(k, mp), lambda k, b0=beta0: mixed_pmf(k, spike_mixing(b0)))


def run_oracle_check(tol: float, ks=ORACLE_KS):
    """Return (rows, worst) where rows are (label, max_rel_err or None, note)."""
    rows = []
    worst = 0.0
    for label, closed, oracle in oracle_cells(ks):
        errs = []
        note = ""
        try:
            for k in ks:
                ref = oracle(k)
                errs.append(abs(closed(k) - ref) / abs(ref))
        except OracleFailure as exc:
            rows.append((label, None, f"quadrature failure: {exc}"))
            worst = math.inf
            continue
        e = max(errs)
        # spike cells approximate a point mass, so only an absolute agreement is meaningful
        if label.startswith("spike"):
            note = "spike"
        worst = max(worst, e)
        rows.append((label, e, note))
    return rows, worst


def cmd_oracle_check(args) -> int:
    rows, worst = run_oracle_check(args.tol)
    report = {
        "schema_version": 1,
        "tolerance": args.tol,
        "max_rel_err": worst,
        "cells": [{"cell": l, "max_rel_err": e, "note": n} for l, e, n in rows],
        "pass": bool(worst <= args.tol),
    }
    if args.json:
        sys.stdout.write(_dump(report))
    else:
        for l, e, n in rows:
            flag = "FAIL" if e is None or e > args.tol else "ok"
            print(f"{flag:>4}  {l:<28} {'n/a' if e is None else format(e, '.3e')}  {n}")
        print(f"max relative error: {worst:.3e} (tolerance {args.tol:g})")
    if args.out:
        Path(args.out).write_text(_dump(report))
    return EXIT_OK if worst <= args.tol else EXIT_STAT


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="citemix", description="Citation-rate mixture models: fit, test, sample, emit curves.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def data_opts(sp, required=True):
        sp.add_argument("--input", required=required, help=f"counts file, or {BUNDLED} for the bundled synthetic dataset")
        sp.add_argument("--format", choices=("raw", "hist"), default="raw")
        sp.add_argument("--k-shift", type=int, default=1, dest="k_shift")

    def model_opts(sp):
        sp.add_argument("--family", choices=FAMILIES, default=None)
        sp.add_argument("--params", help='JSON list of components, e.g. \'[{"c":1,"mu":2,"lam":3}]\'')
        sp.add_argument("--kmax-support", type=int, default=None, help="finite support for power laws")
        sp.add_argument("--model", help="FitResult or model JSON file")
        sp.add_argument("--preset", choices=("reference",), help="the published two-component WE fit")

    fit = sub.add_parser("fit", help="maximum-likelihood fit with AIC order selection and chi-square test")
    data_opts(fit)
    fit.add_argument("--family", choices=FAMILIES, default="we")
    fit.add_argument("--m", choices=("1", "2", "3", "sweep"), default="sweep")
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--restarts", type=int, default=10)
    fit.add_argument("--alpha", type=float, default=0.1)
    fit.add_argument("--min-expected", type=float, default=5.0, dest="min_expected")
    fit.add_argument("--out")
    fit.add_argument("--json", action="store_true")
    fit.set_defaults(func=cmd_fit)

    cmp_ = sub.add_parser("compare", help="fit WE, Lomax and power-law models and rank them by AIC")
    data_opts(cmp_)
    cmp_.add_argument("--m", choices=("1", "2", "3", "sweep"), default="2")
    cmp_.add_argument("--seed", type=int, default=0)
    cmp_.add_argument("--restarts", type=int, default=6)
    cmp_.add_argument("--alpha", type=float, default=0.1)
    cmp_.add_argument("--min-expected", type=float, default=5.0, dest="min_expected")
    cmp_.add_argument("--out", help="write the table (.csv for CSV, otherwise JSON)")
    cmp_.add_argument("--json", action="store_true")
    cmp_.set_defaults(func=cmd_compare)

    curves = sub.add_parser("curves", help="emit PMF, CCDF, empirical CCDF, processing-time and hazard curves as CSV")
    model_opts(curves)
    data_opts(curves, required=False)
    curves.add_argument("--out", required=True, help="output directory")
    curves.add_argument("--kmax", type=int, default=10_000)
    curves.add_argument("--tau-min", type=float, default=1e-2, dest="tau_min")
    curves.add_argument("--tau-max", type=float, default=1e3, dest="tau_max")
    curves.add_argument("--tau-points", type=int, default=200, dest="tau_points")
    curves.add_argument("--gamma", action="append", metavar="SHAPE,SCALE", help="add a gamma processing-time law")
    curves.set_defaults(func=cmd_curves)

    sample = sub.add_parser("sample", help="draw counts from a model; writes c = k - k_shift, one per line")
    model_opts(sample)
    sample.add_argument("-n", type=int, default=1000)
    sample.add_argument("--seed", type=int, default=0)
    sample.add_argument("--k-shift", type=int, default=1, dest="k_shift")
    sample.add_argument("--out")
    sample.set_defaults(func=cmd_sample)

    oc = sub.add_parser("oracle-check", help="compare closed-form PMFs with the quadrature oracle")
    oc.add_argument("--tol", type=float, default=1e-6)
    oc.add_argument("--out")
    oc.add_argument("--json", action="store_true")
    oc.set_defaults(func=cmd_oracle_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, CountsParseError, DomainError, OSError, json.JSONDecodeError) as exc:
        print(f"citemix {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OracleFailure as exc:
        print(f"citemix {args.command}: {exc}", file=sys.stderr)
        return EXIT_STAT


if __name__ == "__main__":
    sys.exit(main())
