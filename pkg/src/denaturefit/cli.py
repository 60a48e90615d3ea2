"""Command line interface: ``denaturefit <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 data or parse error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import io as dio
from .calibration import coverage_reports, method_comparison, propagation_ratios, scatter_ensemble
from .confidence import (
    BoundNotFoundError,
    CIMethod,
    ExcessiveFailureError,
    McMode,
    Relation,
    fit_best,
    marginal_ci,
    monte_carlo_ci,
    profile_trace,
    propagate_error,
    search_ci,
)
from .lm import FitError, MaxIterationsError
from .model import PARAM_NAMES, FlatDataError, LemForm, ModelConstants, to_triple
from .rng import GaussianNoise, LorentzianNoise, Mt19937, hwhm_from_sigma
from .synth import SyntheticSpec, generate, nine_standard

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
SEED_ENV = "DENATUREFIT_SEED"

log = logging.getLogger("denaturefit")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _level(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid level {text!r}") from None
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"level must lie in (0, 1), got {v}")
    return v


def _method(text):
    try:
        return CIMethod.parse(text).value
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


_METHOD_METAVAR = "{" + ",".join(m.value for m in CIMethod) + "}"


def _positive(kind):
    def parse(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid value {text!r}") from None
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {v}")
        return v
    return parse


def _nonneg_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid value {text!r}") from None
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def _seed(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return 1


def _constants(args):
    return ModelConstants(temperature=args.temperature)


def _noise(args):
    if args.noise == "gaussian":
        return GaussianNoise(args.sigma)
    gamma = args.gamma if args.gamma is not None else hwhm_from_sigma(args.sigma)
    if args.sigma == 0 and args.gamma is None:
        raise UsageError("lorentzian noise needs a positive --gamma or --sigma")
    return LorentzianNoise(gamma=gamma, cutoff=args.cutoff)


def _noise_doc(noise):
    return {"kind": noise.kind, **dataclasses.asdict(noise)}


def _emit(doc, out):
    text = dio.dumps(doc)
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _summary(fit, intervals):
    names = PARAM_NAMES[fit.form]
    lines = [f"form {fit.form.value}: converged={fit.converged} iterations={fit.iterations}",
             f"SSE={fit.sse:.6g}  s2={fit.s2:.6g}  dof={fit.dof}"]
    se = fit.stderr()
    for i, name in enumerate(names):
        lines.append(f"  {name:>4} = {fit.vector[i]:.6g} +/- {se[i]:.3g}")
    t = to_triple(fit.params.lem)
    lines.append(f"  dG0={t.dg0:.6g} kJ/mol  m={t.m:.6g} kJ/mol/M  D50={t.d50:.6g} M")
    if fit.correlation is not None:
        lines.append(f"  corr({names[4]}, {names[5]}) = {fit.correlation[4, 5]:.4f}")
    for iv in intervals:
        if iv.param in names[4:]:
            lines.append(f"  {iv.level:.3g} marginal CI {iv.param}: [{iv.lower:.6g}, {iv.upper:.6g}]")
    return "\n".join(lines) + "\n"


# -- commands --------------------------------------------------------------------

def cmd_fit(args):
    data = dio.read_dataset(args.input)
    form = LemForm.parse(args.form)
    c = _constants(args)
    try:
        fit = fit_best(data, form, c)
    except MaxIterationsError as exc:
        doc = dio.fit_report(exc.result)
        doc["error"] = str(exc)
        _emit(doc, args.out)
        log.error("fit did not converge: %s", exc)
        return EXIT_NUMERIC
    intervals = [marginal_ci(fit, i, lv) for lv in (0.683, 0.95) for i in range(6)]
    doc = dio.fit_report(fit, intervals)
    doc["input"] = str(args.input)
    doc["temperature"] = c.temperature
    if args.json or args.out:
        _emit(doc, args.out)
    if not args.json:
        sys.stdout.write(_summary(fit, intervals))
    return EXIT_OK


def _synth_one(spec, seed, out, label=""):
    rng = Mt19937(seed)
    ds = generate(spec, rng, label)
    out = Path(out)
    dio.write_dataset(out, ds.data)
    truth = {"kind": "truth", "seed": seed, "label": label,
             "params": dio.params_doc(ds.truth),
             "noise": _noise_doc(spec.noise),
             "temperature": spec.constants.temperature}
    dio.write_json(out.with_suffix(".truth.json"), truth)
    return out


def cmd_synth(args):
    spec = SyntheticSpec(m=args.m, d50=args.d50, noise=_noise(args), constants=_constants(args))
    _synth_one(spec, _seed(args), args.out, f"m={args.m:g},d50={args.d50:g}")
    return EXIT_OK


def cmd_synth_grid(args):
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    seed = _seed(args)
    noise = _noise(args)
    c = _constants(args)
    for ds in nine_standard(seed, noise, c):
        t = to_triple(ds.truth.lem)
        path = outdir / f"std_m{t.m:g}_d50_{t.d50:g}.csv"
        dio.write_dataset(path, ds.data)
        dio.write_json(path.with_suffix(".truth.json"),
                       {"kind": "truth", "seed": seed, "label": ds.label,
                        "params": dio.params_doc(ds.truth),
                        "noise": _noise_doc(noise),
                        "temperature": c.temperature})
        print(path)
    return EXIT_OK


def _ensemble_rows(ens, fit):
    names = PARAM_NAMES[fit.form]
    for r, (vec, tri) in enumerate(zip(ens.vectors, ens.triples())):
        row = {"round": r}
        row.update({n: float(v) for n, v in zip(names, vec)})
        row.update({"triple_dg0": float(tri[0]), "triple_m": float(tri[1]), "triple_d50": float(tri[2])})
        yield row


def cmd_ci(args):
    data = dio.read_dataset(args.input)
    form = LemForm.parse(args.form)
    method = CIMethod.parse(args.method)
    c = _constants(args)
    fit = fit_best(data, form, c)
    doc = {"kind": "intervals", "form": form.value, "method": method.value,
           "level": args.level, "params": fit.params.as_dict()}
    if method in (CIMethod.MONTE_CARLO, CIMethod.BOOTSTRAP):
        mode = McMode.GAUSSIAN if method is CIMethod.MONTE_CARLO else McMode.BOOTSTRAP
        seed = _seed(args)
        intervals, ens = monte_carlo_ci(data, fit, args.level, mode, args.rounds, Mt19937(seed), c)
        doc.update(seed=seed, rounds=args.rounds, failures=ens.failures,
                   ensemble_covariance=ens.covariance)
        ens_path = args.ensemble or (Path(args.out).with_suffix(".ensemble.csv") if args.out else None)
        if ens_path:
            dio.write_rows(ens_path, _ensemble_rows(ens, fit))
            doc["ensemble_csv"] = str(ens_path)
    elif method is CIMethod.SEARCH:
        intervals = [search_ci(data, fit, i, args.level, c) for i in range(6)]
    else:
        intervals = [marginal_ci(fit, i, args.level) for i in range(6)]
    doc["intervals"] = [iv.as_dict() for iv in intervals]
    _emit(doc, args.out)
    return EXIT_OK


def cmd_profile(args):
    if not args.lo < args.hi:
        raise UsageError("--lo must be smaller than --hi")
    data = dio.read_dataset(args.input)
    form = LemForm.parse(args.form)
    grid = np.linspace(args.lo, args.hi, args.steps)
    trace = profile_trace(data, form, args.param, grid, _constants(args))
    rows = ({trace.fixed_param: f, trace.partner_param: p, "sse": s} for f, p, s in trace.rows)
    fields = [trace.fixed_param, trace.partner_param, "sse"]
    if args.out:
        dio.write_rows(args.out, rows, fields)
    else:
        dio.write_rows(sys.stdout, rows, fields)
    for v in trace.failed:
        log.warning("refit failed at %s = %g; point skipped", trace.fixed_param, v)
    return EXIT_OK


def cmd_calibrate(args):
    noise = _noise(args)
    method = CIMethod.parse(args.method)
    reports = coverage_reports(method, args.level, noise, args.trials, args.rounds, _seed(args),
                               c=_constants(args), workers=args.workers)
    rows = [row for lv in args.level for row in reports[lv].rows()]
    doc = {"kind": "coverage", "reports": [reports[lv].as_dict() for lv in args.level]}
    if args.out:
        dio.write_rows(f"{args.out}.csv", rows)
        dio.write_json(f"{args.out}.json", doc)
    for row in rows:
        print(f"{row['method']:>9} {row['noise']:>10} {row['level']:.3f} "
              f"{row['form']:>7} {row['param']:>4}  {row['fraction']:.3f}")
    for lv in args.level:
        if reports[lv].flagged:
            log.warning("%d of %d trials excluded", reports[lv].excluded, args.trials)
    return EXIT_OK


def _propagate_from_report(path, two_term, cov_coefficient):
    doc = dio.read_json(path)
    form = LemForm.parse(doc["form"])
    cov = np.asarray(doc["covariance"], dtype=float)
    names = PARAM_NAMES[form]
    x1, x2 = doc["params"][names[4]], doc["params"][names[5]]
    relation = Relation.PRODUCT if form is LemForm.M_D50 else Relation.RATIO
    derived = {LemForm.DG0_M: "d50", LemForm.M_D50: "dg0", LemForm.DG0_D50: "m"}[form]
    cov12 = 0.0 if two_term else float(cov[4, 5])
    sigma = propagate_error(x1, x2, math.sqrt(cov[4, 4]), math.sqrt(cov[5, 5]), cov12,
                            relation, cov_coefficient)
    return derived, sigma


def cmd_propagate(args):
    coef = 1.0 if args.mode == "single" else 2.0
    if args.data:
        rows = propagation_ratios(dio.read_dataset(args.data), _constants(args))
        dio.write_rows(args.out or sys.stdout, rows)
        return EXIT_OK
    if args.fit_report:
        derived, sigma = _propagate_from_report(args.fit_report, args.two_term, coef)
        doc = {"kind": "propagation", "derived": derived, "sigma": sigma,
               "terms": "two" if args.two_term else "three"}
        if args.direct_report:
            direct = dio.read_json(args.direct_report)
            if derived not in direct.get("stderr", {}):
                raise UsageError(f"direct report does not fit {derived}")
            doc["sigma_direct"] = direct["stderr"][derived]
            doc["ratio"] = sigma / doc["sigma_direct"]
        _emit(doc, args.out)
        return EXIT_OK
    missing = [n for n in ("x1", "x2", "sigma1", "sigma2") if getattr(args, n) is None]
    if missing:
        raise UsageError("need --data, --fit-report or all of --x1 --x2 --sigma1 --sigma2")
    cov = 0.0 if args.cov is None else args.cov
    sigma = propagate_error(args.x1, args.x2, args.sigma1, args.sigma2, cov,
                            Relation.parse(args.relation), coef)
    _emit({"kind": "propagation", "sigma": sigma,
           "terms": "two" if args.cov is None else "three"}, args.out)
    return EXIT_OK


def cmd_scatter(args):
    data = dio.read_dataset(args.input)
    c = _constants(args)
    mode = McMode.BOOTSTRAP if args.bootstrap else McMode.GAUSSIAN
    rows = []
    for form in ([LemForm.parse(args.form)] if args.form else list(LemForm)):
        triples = scatter_ensemble(data, form, args.rounds, Mt19937(_seed(args)), c, mode)
        rows += [{"form": form.value, "round": r, **t.as_dict()} for r, t in enumerate(triples)]
    dio.write_rows(args.out or sys.stdout, rows, ["form", "round", "dg0", "m", "d50"])
    return EXIT_OK


def cmd_compare(args):
    data = dio.read_dataset(args.input)
    table = method_comparison(data, args.level, args.rounds, _seed(args), _constants(args))
    rows = [{"form": form.value, "param": name, "method": iv.method.value, "level": iv.level,
             "center": iv.center, "lower": iv.lower, "upper": iv.upper, "width": iv.width}
            for form, name, iv in table]
    dio.write_rows(args.out or sys.stdout, rows)
    return EXIT_OK


# -- parser ----------------------------------------------------------------------

def _common(p, seed=False, noise=False):
    p.add_argument("--temperature", type=_positive(float), default=298.15,
                   help="temperature in K (default 298.15)")
    if seed:
        p.add_argument("--seed", type=int, default=None,
                       help=f"RNG seed (falls back to ${SEED_ENV}, then 1)")
    if noise:
        p.add_argument("--noise", choices=["gaussian", "lorentzian"], default="gaussian")
        p.add_argument("--sigma", type=_nonneg_float, default=10.0, help="Gaussian sd")
        p.add_argument("--gamma", type=_positive(float), default=None,
                       help="Lorentzian half-width (default: HWHM of --sigma)")
        p.add_argument("--cutoff", type=_positive(float), default=200.0,
                       help="Lorentzian rejection distance from the median")


def _form_arg(p):
    p.add_argument("--form", choices=[f.value for f in LemForm], default=LemForm.M_D50.value)


def build_parser():
    parser = _Parser(prog="denaturefit", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit a dataset")
    p.add_argument("input")
    _form_arg(p)
    p.add_argument("--out", help="write the JSON report here")
    p.add_argument("--json", action="store_true", help="print the JSON report instead of a summary")
    _common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("synth", help="generate one synthetic dataset")
    p.add_argument("--m", type=_positive(float), default=6.0)
    p.add_argument("--d50", type=_positive(float), default=4.0)
    p.add_argument("--out", required=True)
    _common(p, seed=True, noise=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("synth-grid", help="generate the nine standard datasets")
    p.add_argument("--outdir", required=True)
    _common(p, seed=True, noise=True)
    p.set_defaults(func=cmd_synth_grid)

    p = sub.add_parser("ci", help="confidence intervals for all parameters")
    p.add_argument("input")
    _form_arg(p)
    p.add_argument("--method", type=_method, default="marginal", metavar=_METHOD_METAVAR)
    p.add_argument("--level", type=_level, default=0.683)
    p.add_argument("--rounds", type=_positive(int), default=500)
    p.add_argument("--out")
    p.add_argument("--ensemble", help="CSV path for the Monte Carlo ensemble")
    _common(p, seed=True)
    p.set_defaults(func=cmd_ci)

    p = sub.add_parser("profile", help="profile trace of one LEM parameter")
    p.add_argument("input")
    _form_arg(p)
    p.add_argument("--param", choices=["p1", "p2"], required=True)
    p.add_argument("--lo", type=float, required=True)
    p.add_argument("--hi", type=float, required=True)
    p.add_argument("--steps", type=int, default=21)
    p.add_argument("--out")
    _common(p)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("calibrate", help="coverage of an interval method on synthetic trials")
    p.add_argument("--method", type=_method, default="marginal", metavar=_METHOD_METAVAR)
    p.add_argument("--level", type=_level, action="append",
                   help="confidence level; repeat for several (default 0.683)")
    p.add_argument("--trials", type=_positive(int), default=1000)
    p.add_argument("--rounds", type=_positive(int), default=100, help="Monte Carlo rounds per trial")
    p.add_argument("--workers", type=_positive(int), default=1)
    p.add_argument("--out", help="output prefix; writes PREFIX.csv and PREFIX.json")
    _common(p, seed=True, noise=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("propagate", help="error propagation for dG0 = m * D50")
    p.add_argument("--x1", type=float)
    p.add_argument("--sigma1", type=_nonneg_float)
    p.add_argument("--x2", type=float)
    p.add_argument("--sigma2", type=_nonneg_float)
    p.add_argument("--cov", type=float, help="covariance of x1 and x2 (omit for two terms)")
    p.add_argument("--relation", choices=[r.value for r in Relation], default="product")
    p.add_argument("--mode", choices=["standard", "single"], default="standard",
                   help="'single' weights the covariance term by 1 instead of 2")
    p.add_argument("--fit-report", help="take values and covariance from a fit report")
    p.add_argument("--two-term", action="store_true", help="ignore the covariance from --fit-report")
    p.add_argument("--direct-report", help="fit report with the derived parameter fitted directly")
    p.add_argument("--data", help="dataset CSV: emit propagated/direct ratios for all forms")
    p.add_argument("--out")
    _common(p)
    p.set_defaults(func=cmd_propagate)

    p = sub.add_parser("scatter", help="Monte Carlo (dG0, m, D50) ensembles")
    p.add_argument("input")
    p.add_argument("--form", choices=[f.value for f in LemForm], default=None,
                   help="one form (default: all three)")
    p.add_argument("--rounds", type=_positive(int), default=500)
    p.add_argument("--bootstrap", action="store_true")
    p.add_argument("--out")
    _common(p, seed=True)
    p.set_defaults(func=cmd_scatter)

    p = sub.add_parser("compare", help="intervals from every method, every form")
    p.add_argument("input")
    p.add_argument("--level", type=_level, default=0.683)
    p.add_argument("--rounds", type=_positive(int), default=500)
    p.add_argument("--out")
    _common(p, seed=True)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(name)s: %(levelname)s: %(message)s")
    if args.command == "calibrate" and not args.level:
        args.level = [0.683]
    if args.command == "profile" and args.steps < 2:
        parser.error("--steps must be >= 2")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"denaturefit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (dio.ParseError, FlatDataError) as exc:
        print(f"denaturefit: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FitError, BoundNotFoundError, ExcessiveFailureError, ArithmeticError) as exc:
        print(f"denaturefit: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"denaturefit: invalid input: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"denaturefit: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
