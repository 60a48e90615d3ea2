"""Confidence intervals, Monte Carlo ensembles, error propagation and profile traces.

Four interval estimators are provided:

* ``marginal`` -- t-scaled square root of the covariance diagonal;
* ``search`` -- the parameter is stepped away from the optimum, the other
  five are re-optimized, and the bound is where the SSE ratio reaches the
  F-based variance-ratio threshold (may be asymmetric);
* ``mc`` -- refits of synthetic data drawn from the best-fit curve plus
  Gaussian noise with the fit's residual variance;
* ``bootstrap`` -- as ``mc`` but the noise is the fit residuals resampled
  with replacement.

Ensemble intervals are the shortest window holding the requested fraction
of the refitted values.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .lm import FitError, FitResult, LmOptions, ZeroVarianceError, correlation_from_covariance, lm_fit
from .model import (
    N_PARAMS,
    PARAM_NAMES,
    DenaturationDataset,
    FullParams,
    LemForm,
    LemParams,
    ModelConstants,
    initial_guess,
    model_signal_vec,
    to_triple,
)
from .quantiles import f_quantile, t_quantile
from .rng import Mt19937, substream

__all__ = [
    "CIMethod",
    "McMode",
    "Relation",
    "ConfidenceInterval",
    "McEnsemble",
    "ProfileTrace",
    "BoundNotFoundError",
    "ExcessiveFailureError",
    "marginal_ci",
    "search_ci",
    "search_threshold",
    "profile_sse",
    "monte_carlo_ci",
    "shortest_interval",
    "propagate_error",
    "propagate_third",
    "profile_trace",
    "fit_best",
]

DEFAULT_SEARCH_JOINT = 2
MAX_FAILURE_FRACTION = 0.05


class CIMethod(enum.Enum):
    MARGINAL = "marginal"
    SEARCH = "search"
    MONTE_CARLO = "mc"
    BOOTSTRAP = "bootstrap"

    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower()
        aliases = {"montecarlo": "mc", "monte-carlo": "mc", "gaussian": "mc"}
        key = aliases.get(key, key)
        for m in cls:
            if m.value == key:
                return m
        raise ValueError(f"unknown method {text!r}; choose from {[m.value for m in cls]}")


class McMode(enum.Enum):
    GAUSSIAN = "gaussian"
    BOOTSTRAP = "bootstrap"


class Relation(enum.Enum):
    PRODUCT = "product"
    RATIO = "ratio"

    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        return cls(str(text).strip().lower())


class BoundNotFoundError(FitError):
    """The SSE threshold was not crossed within the search range."""


class ExcessiveFailureError(FitError):
    """Too many Monte Carlo refits failed to converge."""


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float
    level: float
    method: CIMethod
    center: float
    param: str = ""

    def __post_init__(self):
        if not self.lower <= self.upper:
            raise ValueError(f"lower {self.lower} exceeds upper {self.upper}")
        if not 0.0 < self.level < 1.0:
            raise ValueError(f"level must lie in (0, 1), got {self.level}")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def as_dict(self):
        return {"param": self.param, "method": self.method.value, "level": self.level,
                "center": self.center, "lower": self.lower, "upper": self.upper}


def _check_level(level):
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")


def fit_best(data: DenaturationDataset, form: LemForm,
             c: ModelConstants = ModelConstants(), opts: LmOptions = LmOptions()) -> FitResult:
    """Fit from the heuristic starting point."""
    return lm_fit(data, initial_guess(data, form, c), form, c, opts)


# -- marginal ------------------------------------------------------------------

def marginal_ci(fit: FitResult, i: int, level: float = 0.683) -> ConfidenceInterval:
    _check_level(level)
    if fit.covariance is None:
        raise ValueError("fit has no covariance matrix")
    if fit.dof < 1:
        raise ValueError("marginal interval needs dof >= 1")
    var = float(fit.covariance[i, i])
    if not var > 0:
        raise ZeroVarianceError(f"parameter {i} has zero variance")
    center = float(fit.vector[i])
    half = t_quantile(1.0 - (1.0 - level) / 2.0, fit.dof) * math.sqrt(var)
    return ConfidenceInterval(center - half, center + half, level, CIMethod.MARGINAL,
                              center, PARAM_NAMES[fit.form][i])


# -- parameter-space search ------------------------------------------------------

def search_threshold(sse_min: float, dof: int, level: float,
                     joint: int = DEFAULT_SEARCH_JOINT) -> float:
    """SSE at the boundary of the ``joint``-parameter variance-ratio region.

    ``sse_min * (1 + joint * F(joint, dof; level) / dof)``; with ``joint=1``
    this is the profile-likelihood bound, which coincides with the marginal
    interval for a linear model.
    """
    return sse_min * (1.0 + joint * f_quantile(level, joint, dof) / dof)


def profile_sse(data: DenaturationDataset, fit: FitResult, i: int, value: float,
                c: ModelConstants = ModelConstants(), start=None,
                opts: LmOptions = LmOptions()) -> FitResult:
    """Refit with parameter ``i`` held at ``value``."""
    vec = np.array(fit.vector if start is None else start, dtype=float)
    vec[i] = value
    start_p = FullParams.from_vector(fit.form, vec)
    fixed_opts = LmOptions(**{**opts.__dict__, "fixed": (i,)})
    return lm_fit(data, start_p, fit.form, c, fixed_opts, with_covariance=False)


def search_ci(data: DenaturationDataset, fit: FitResult, i: int, level: float = 0.683,
              c: ModelConstants = ModelConstants(), joint: int = DEFAULT_SEARCH_JOINT,
              max_steps: int = 50, rtol: float = 1e-4,
              opts: LmOptions = LmOptions()) -> ConfidenceInterval:
    """Search outward for the re-optimized SSE threshold on each side.

    Steps of one marginal half-width bracket the crossing, bisection then
    narrows it to ``rtol`` relative to the bound.
    """
    _check_level(level)
    if not fit.converged:
        raise ValueError("search interval needs a converged fit")
    center = float(fit.vector[i])
    step = marginal_ci(fit, i, level).width / 2.0
    target = search_threshold(fit.sse, fit.dof, level, joint)

    bounds = []
    for sign in (-1.0, 1.0):
        inside_v, inside_vec = center, fit.vector
        outside_v = None
        for k in range(1, max_steps + 1):
            v = center + sign * k * step
            prof = _profile_or_none(data, fit, i, v, c, inside_vec, opts)
            if prof is None or prof.sse > target:
                outside_v = v
                break
            inside_v, inside_vec = v, prof.vector
        if outside_v is None:
            raise BoundNotFoundError(
                f"SSE threshold not crossed within {max_steps} half-widths "
                f"of {PARAM_NAMES[fit.form][i]}")
        tol = rtol * max(abs(inside_v), abs(outside_v), step)
        while abs(outside_v - inside_v) > tol:
            mid = 0.5 * (inside_v + outside_v)
            prof = _profile_or_none(data, fit, i, mid, c, inside_vec, opts)
            if prof is None or prof.sse > target:
                outside_v = mid
            else:
                inside_v, inside_vec = mid, prof.vector
        bounds.append(0.5 * (inside_v + outside_v))
    return ConfidenceInterval(bounds[0], bounds[1], level, CIMethod.SEARCH, center,
                              PARAM_NAMES[fit.form][i])


def _profile_or_none(data, fit, i, value, c, start, opts):
    # an invalid region (e.g. D50 <= 0) lies outside any confidence region
    try:
        return profile_sse(data, fit, i, value, c, start, opts)
    except ValueError:
        return None


# -- ensembles -----------------------------------------------------------------

def shortest_interval(samples, level: float):
    """Narrowest window of sorted samples holding ceil(level * n) points.

    Ties go to the window with the smallest starting index.
    """
    _check_level(level)
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise ValueError("no samples")
    w = min(n, math.ceil(level * n - 1e-9))
    w = max(w, 1)
    widths = x[w - 1:] - x[: n - w + 1]
    j = int(np.argmin(widths))
    return float(x[j]), float(x[j + w - 1])


@dataclass(frozen=True, eq=False)
class McEnsemble:
    """Refitted parameter vectors from repeated synthetic datasets."""

    form: LemForm
    vectors: np.ndarray
    n_rounds: int
    failures: int = 0
    mode: McMode = McMode.GAUSSIAN

    @property
    def n_ok(self) -> int:
        return self.vectors.shape[0]

    def triples(self) -> np.ndarray:
        """Rows of (dG0, m, D50)."""
        out = np.empty((self.n_ok, 3))
        for r, vec in enumerate(self.vectors):
            t = to_triple(LemParams(self.form, vec[4], vec[5]))
            out[r] = (t.dg0, t.m, t.d50)
        return out

    @property
    def covariance(self) -> np.ndarray:
        return np.atleast_2d(np.cov(self.vectors, rowvar=False))

    @property
    def correlation(self) -> np.ndarray:
        return correlation_from_covariance(self.covariance)


def _round_dataset(data, clean, residuals, mode, sd, rng):
    n = clean.size
    if mode is McMode.GAUSSIAN:
        noise = rng.gaussians(n, sd) if sd > 0 else np.zeros(n)
    else:
        noise = residuals[rng.randbelow(n, n)]
    return DenaturationDataset(data.d, clean + noise)


def monte_carlo_ensemble(data: DenaturationDataset, fit: FitResult,
                         mode: McMode = McMode.GAUSSIAN, n_rounds: int = 500,
                         rng: Mt19937 | None = None, c: ModelConstants = ModelConstants(),
                         opts: LmOptions = LmOptions(), min_rounds: int = 50) -> McEnsemble:
    """Refit ``n_rounds`` synthetic datasets around the best fit.

    Round ``r`` draws from substream ``r`` of a master seed taken from
    ``rng``, so rounds are independent of evaluation order.
    """
    mode = McMode(mode)
    if n_rounds < min_rounds:
        raise ValueError(f"n_rounds must be >= {min_rounds}")
    rng = Mt19937() if rng is None else rng
    master = rng.next_u32()
    form = fit.form
    clean = model_signal_vec(form, fit.vector, data.d, c.rt)
    resid = data.signal - clean
    sd = math.sqrt(fit.s2)
    vectors = []
    failures = 0
    for r in range(n_rounds):
        synth = _round_dataset(data, clean, resid, mode, sd, substream(master, r))
        try:
            res = lm_fit(synth, fit.params, form, c, opts, with_covariance=False)
        except (FitError, ValueError):
            failures += 1
            continue
        vectors.append(res.vector)
    if failures > MAX_FAILURE_FRACTION * n_rounds:
        raise ExcessiveFailureError(f"{failures} of {n_rounds} refits failed")
    return McEnsemble(form, np.array(vectors).reshape(-1, N_PARAMS), n_rounds, failures, mode)


def monte_carlo_ci(data: DenaturationDataset, fit: FitResult, level: float = 0.683,
                   mode: McMode = McMode.GAUSSIAN, n_rounds: int = 500,
                   rng: Mt19937 | None = None, c: ModelConstants = ModelConstants(),
                   opts: LmOptions = LmOptions(), min_rounds: int = 50):
    """Shortest ensemble intervals for all six parameters, plus the ensemble."""
    _check_level(level)
    ens = monte_carlo_ensemble(data, fit, mode, n_rounds, rng, c, opts, min_rounds)
    method = CIMethod.MONTE_CARLO if McMode(mode) is McMode.GAUSSIAN else CIMethod.BOOTSTRAP
    names = PARAM_NAMES[fit.form]
    intervals = []
    for i in range(N_PARAMS):
        lo, hi = shortest_interval(ens.vectors[:, i], level)
        intervals.append(ConfidenceInterval(lo, hi, level, method, float(fit.vector[i]), names[i]))
    return intervals, ens


# -- error propagation -----------------------------------------------------------

def propagate_error(x1: float, x2: float, sigma1: float, sigma2: float, cov12: float = 0.0,
                    relation: Relation = Relation.PRODUCT, cov_coefficient: float = 2.0) -> float:
    """First-order standard deviation of x1*x2 or x1/x2.

    ``cov_coefficient=1`` reproduces the variant of the formula that omits
    the conventional factor of two on the covariance term.
    """
    relation = Relation.parse(relation)
    if sigma1 < 0 or sigma2 < 0:
        raise ValueError("standard deviations must be >= 0")
    if relation is Relation.PRODUCT:
        g1, g2 = x2, x1
    else:
        if x2 == 0:
            raise ZeroDivisionError("ratio with zero denominator")
        g1, g2 = 1.0 / x2, -x1 / (x2 * x2)
    var = (sigma1 * g1) ** 2 + (sigma2 * g2) ** 2 + cov_coefficient * cov12 * g1 * g2
    if var < 0:
        raise ValueError(f"negative propagated variance {var}; covariance inconsistent")
    return math.sqrt(var)


_THIRD = {
    # form -> (derived name, relation); x1, x2 are (p1, p2)
    LemForm.DG0_M: ("d50", Relation.RATIO),
    LemForm.M_D50: ("dg0", Relation.PRODUCT),
    LemForm.DG0_D50: ("m", Relation.RATIO),
}


def propagate_third(fit: FitResult, use_covariance: bool = True,
                    cov_coefficient: float = 2.0):
    """(name, value, sigma) of the LEM parameter the form does not fit."""
    if fit.covariance is None:
        raise ValueError("fit has no covariance matrix")
    name, relation = _THIRD[fit.form]
    x1, x2 = float(fit.vector[4]), float(fit.vector[5])
    cov = fit.covariance
    s1, s2 = math.sqrt(cov[4, 4]), math.sqrt(cov[5, 5])
    cov12 = float(cov[4, 5]) if use_covariance else 0.0
    value = getattr(to_triple(fit.params.lem), name)
    return name, value, propagate_error(x1, x2, s1, s2, cov12, relation, cov_coefficient)


# -- profile traces --------------------------------------------------------------

@dataclass(frozen=True)
class ProfileTrace:
    """Re-fitted partner LEM parameter as one LEM parameter is stepped."""

    form: LemForm
    fixed_param: str
    partner_param: str
    rows: tuple  # (fixed value, partner value, SSE)
    failed: tuple = ()

    @property
    def fixed_values(self) -> np.ndarray:
        return np.array([r[0] for r in self.rows])

    @property
    def partner_values(self) -> np.ndarray:
        return np.array([r[1] for r in self.rows])

    @property
    def sse(self) -> np.ndarray:
        return np.array([r[2] for r in self.rows])


def _lem_index(which) -> int:
    key = str(which).strip().lower()
    if key in ("p1", "4"):
        return 4
    if key in ("p2", "5"):
        return 5
    raise ValueError(f"profile parameter must be 'p1' or 'p2', got {which!r}")


def profile_trace(data: DenaturationDataset, form: LemForm, which, grid,
                  c: ModelConstants = ModelConstants(), fit: FitResult | None = None,
                  opts: LmOptions = LmOptions()) -> ProfileTrace:
    """Fix one LEM parameter at each grid value and refit the other five.

    Grid points are visited outward from the best fit, each refit starting
    from its neighbour's solution; a point whose refit fails is recorded in
    ``failed`` and skipped.
    """
    form = LemForm.parse(form)
    i = _lem_index(which)
    j = 9 - i
    if fit is None:
        fit = fit_best(data, form, c, opts)
    elif fit.form is not form:
        fit = lm_fit(data, fit.params, form, c, opts)
    grid = np.asarray(grid, dtype=float).ravel()
    center = float(fit.vector[i])

    solved = {}
    failed = []
    up = sorted((k for k in range(grid.size) if grid[k] >= center), key=lambda k: grid[k])
    down = sorted((k for k in range(grid.size) if grid[k] < center), key=lambda k: -grid[k])
    for sweep in (up, down):
        start = fit.vector
        for k in sweep:
            try:
                res = profile_sse(data, fit, i, grid[k], c, start, opts)
            except (FitError, ValueError):
                failed.append(float(grid[k]))
                continue
            solved[k] = (float(grid[k]), float(res.vector[j]), float(res.sse))
            start = res.vector
    names = PARAM_NAMES[form]
    rows = tuple(solved[k] for k in range(grid.size) if k in solved)
    return ProfileTrace(form, names[i], names[j], rows, tuple(sorted(failed)))
