"""Coverage experiments and plot-ready ensembles for the standard datasets."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .confidence import (
    CIMethod,
    ConfidenceInterval,
    McMode,
    fit_best,
    marginal_ci,
    monte_carlo_ci,
    monte_carlo_ensemble,
    propagate_third,
    search_ci,
    shortest_interval,
)
from .lm import FitError, LmOptions
from .model import PARAM_NAMES, DenaturationDataset, LemForm, LemTriple, ModelConstants
from .rng import GaussianNoise, Mt19937, substream
from .synth import SyntheticSpec, generate

__all__ = [
    "CoverageReport",
    "coverage_experiment",
    "coverage_reports",
    "scatter_ensemble",
    "method_comparison",
    "propagation_ratios",
    "FORM_PARAMS",
]

log = logging.getLogger(__name__)

# (form, parameter) cells in the column order of the coverage table
FORM_PARAMS = (
    (LemForm.DG0_M, "m"), (LemForm.DG0_M, "dg0"),
    (LemForm.M_D50, "m"), (LemForm.M_D50, "d50"),
    (LemForm.DG0_D50, "d50"), (LemForm.DG0_D50, "dg0"),
)

MC_METHODS = (CIMethod.MONTE_CARLO, CIMethod.BOOTSTRAP)


def _cell_key(form, param):
    return f"{form.value}:{param}"


@dataclass
class CoverageReport:
    method: CIMethod
    noise: str
    level: float
    n_trials: int
    excluded: int
    hits: dict = field(default_factory=dict)
    mean_width: dict = field(default_factory=dict)
    master_seed: int = 0
    mc_rounds: int = 0

    @property
    def n_used(self) -> int:
        return self.n_trials - self.excluded

    @property
    def fractions(self) -> dict:
        n = max(self.n_used, 1)
        return {k: v / n for k, v in self.hits.items()}

    @property
    def flagged(self) -> bool:
        return self.excluded > 0.05 * self.n_trials

    def as_dict(self):
        return {
            "method": self.method.value, "noise": self.noise, "level": self.level,
            "n_trials": self.n_trials, "excluded": self.excluded, "flagged": self.flagged,
            "master_seed": self.master_seed, "mc_rounds": self.mc_rounds,
            "hits": dict(self.hits), "fractions": self.fractions,
            "mean_width": dict(self.mean_width),
        }

    def rows(self):
        frac = self.fractions
        for form, param in FORM_PARAMS:
            key = _cell_key(form, param)
            if key in self.hits:
                yield {"method": self.method.value, "noise": self.noise, "level": self.level,
                       "form": form.value, "param": param, "hits": self.hits[key],
                       "n_used": self.n_used, "fraction": frac[key],
                       "mean_width": self.mean_width.get(key, float("nan"))}


def _trial_intervals(data, method, levels, mc_rounds, mc_seed, c, opts):
    """{level: {cell: interval}} for one dataset, all three forms."""
    out = {lv: {} for lv in levels}
    for form in LemForm:
        fit = fit_best(data, form, c, opts)
        names = PARAM_NAMES[form]
        if method in MC_METHODS:
            mode = McMode.GAUSSIAN if method is CIMethod.MONTE_CARLO else McMode.BOOTSTRAP
            # identical seed for every form: the same synthetic rounds
            ens = monte_carlo_ensemble(data, fit, mode, mc_rounds, Mt19937(mc_seed), c, opts,
                                       min_rounds=1)
            for lv in levels:
                for i in (4, 5):
                    lo, hi = shortest_interval(ens.vectors[:, i], lv)
                    out[lv][_cell_key(form, names[i])] = ConfidenceInterval(
                        lo, hi, lv, method, float(fit.vector[i]), names[i])
            continue
        for lv in levels:
            for i in (4, 5):
                if method is CIMethod.MARGINAL:
                    iv = marginal_ci(fit, i, lv)
                else:
                    iv = search_ci(data, fit, i, lv, c, opts=opts)
                out[lv][_cell_key(form, names[i])] = iv
    return out


def _truth_values(spec):
    out = {}
    for form in LemForm:
        vec = spec.truth(form).to_vector()
        names = PARAM_NAMES[form]
        for i in (4, 5):
            out[_cell_key(form, names[i])] = float(vec[i])
    return out


def _run_trials(args):
    (trials, spec, method, levels, mc_rounds, master_seed, c, opts) = args
    truth = _truth_values(spec)
    results = []
    for t in trials:
        rng = substream(master_seed, t)
        data = generate(spec, rng).data
        mc_seed = rng.next_u32()
        try:
            ivs = _trial_intervals(data, method, levels, mc_rounds, mc_seed, c, opts)
        except (FitError, ValueError) as exc:
            log.debug("trial %d excluded: %s", t, exc)
            results.append((t, None))
            continue
        summary = {lv: {k: (iv.contains(truth[k]), iv.width) for k, iv in cells.items()}
                   for lv, cells in ivs.items()}
        results.append((t, summary))
    return results


def coverage_reports(method, levels=(0.683, 0.95), noise=None, n_trials: int = 1000,
                     mc_rounds: int = 100, master_seed: int = 1, m: float = 6.0,
                     d50: float = 4.0, c: ModelConstants = ModelConstants(),
                     opts: LmOptions = LmOptions(), workers: int = 1):
    """Coverage at several levels from one set of trials.

    Trial ``t`` generates its dataset from substream ``t`` of
    ``master_seed``; Monte Carlo refits inside the trial continue from the
    same stream.  A trial where any fit or interval fails is excluded and
    counted.
    """
    method = CIMethod.parse(method)
    levels = tuple(float(lv) for lv in levels)
    for lv in levels:
        if not 0.0 < lv < 1.0:
            raise ValueError(f"level must lie in (0, 1), got {lv}")
    noise = GaussianNoise(10.0) if noise is None else noise
    spec = SyntheticSpec(m=m, d50=d50, noise=noise, constants=c)

    trials = list(range(n_trials))
    if workers > 1:
        chunks = [trials[k::workers] for k in range(workers)]
        with ProcessPoolExecutor(workers) as pool:
            parts = pool.map(_run_trials, [(ch, spec, method, levels, mc_rounds, master_seed, c, opts)
                                           for ch in chunks])
            outcomes = sorted((r for part in parts for r in part), key=lambda r: r[0])
    else:
        outcomes = _run_trials((trials, spec, method, levels, mc_rounds, master_seed, c, opts))

    reports = {}
    used = [s for _, s in outcomes if s is not None]
    excluded = n_trials - len(used)
    for lv in levels:
        hits, widths = {}, {}
        for form, param in FORM_PARAMS:
            key = _cell_key(form, param)
            hits[key] = int(sum(s[lv][key][0] for s in used))
            widths[key] = float(np.mean([s[lv][key][1] for s in used])) if used else float("nan")
        reports[lv] = CoverageReport(method, noise.kind, lv, n_trials, excluded, hits, widths,
                                     master_seed, mc_rounds if method in MC_METHODS else 0)
    return reports


def coverage_experiment(method, level: float = 0.683, noise=None, n_trials: int = 1000,
                        mc_rounds: int = 100, master_seed: int = 1, **kwargs) -> CoverageReport:
    """Fraction of trials whose interval contains the generating value."""
    return coverage_reports(method, (level,), noise, n_trials, mc_rounds, master_seed,
                            **kwargs)[float(level)]


def scatter_ensemble(data: DenaturationDataset, form: LemForm, n_rounds: int = 500,
                     rng: Mt19937 | None = None, c: ModelConstants = ModelConstants(),
                     mode: McMode = McMode.GAUSSIAN) -> list[LemTriple]:
    """Monte Carlo refits of ``data`` as (dG0, m, D50) triples."""
    fit = fit_best(data, LemForm.parse(form), c)
    ens = monte_carlo_ensemble(data, fit, mode, n_rounds, rng, c, min_rounds=1)
    return [LemTriple(*row) for row in ens.triples().tolist()]


def method_comparison(data: DenaturationDataset, level: float = 0.683, n_rounds: int = 500,
                      seed: int = 1, c: ModelConstants = ModelConstants(),
                      methods=tuple(CIMethod)):
    """Intervals from every method for both LEM parameters in every form.

    Returns a list of :class:`ConfidenceInterval` tagged by form through
    their ``param`` label (``"<form>:<name>"``).
    """
    out = []
    for form in LemForm:
        fit = fit_best(data, form, c)
        names = PARAM_NAMES[form]
        mc = {}
        for method in methods:
            if method in MC_METHODS:
                mode = McMode.GAUSSIAN if method is CIMethod.MONTE_CARLO else McMode.BOOTSTRAP
                mc[method], _ = monte_carlo_ci(data, fit, level, mode, n_rounds, Mt19937(seed), c)
        for i in (4, 5):
            for method in methods:
                if method is CIMethod.MARGINAL:
                    iv = marginal_ci(fit, i, level)
                elif method is CIMethod.SEARCH:
                    iv = search_ci(data, fit, i, level, c)
                else:
                    iv = mc[method][i]
                out.append((form, names[i], iv))
    return out


def propagation_ratios(data: DenaturationDataset, c: ModelConstants = ModelConstants()):
    """Propagated over directly fitted sd of each form's derived parameter.

    One row per form: the derived parameter, its directly fitted sd (from
    a form that fits it), and the ratios for two-term and full propagation.
    """
    fits = {form: fit_best(data, form, c) for form in LemForm}
    direct_source = {"d50": (LemForm.M_D50, 5), "dg0": (LemForm.DG0_M, 4), "m": (LemForm.DG0_M, 5)}
    rows = []
    for form in LemForm:
        name, value, sd_two = propagate_third(fits[form], use_covariance=False)
        _, _, sd_full = propagate_third(fits[form], use_covariance=True)
        src, idx = direct_source[name]
        sd_direct = float(np.sqrt(fits[src].covariance[idx, idx]))
        rows.append({"form": form.value, "derived": name, "value": value,
                     "sd_direct": sd_direct, "sd_two_term": sd_two, "sd_full": sd_full,
                     "ratio_two_term": sd_two / sd_direct, "ratio_full": sd_full / sd_direct})
    return rows
