"""Levenberg-Marquardt least squares for the denaturation model.

Steps solve ``(J^T J + lam * diag(J^T J)) delta = J^T r`` with a Cholesky
factorization; a failed factorization counts as a rejected step.  The fit
terminates when an attempted step both lowers the SSE by less than
``sse_tol`` (absolute) and moves every free parameter by less than
``step_rtol * (|p_i| + 1e-12)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import NotPositiveDefinite, cholesky_decompose, cholesky_inverse, cholesky_solve
from .model import (
    N_PARAMS,
    DenaturationDataset,
    FullParams,
    LemForm,
    ModelConstants,
    jacobian_vec,
    model_signal_vec,
)

__all__ = [
    "LmOptions",
    "FitResult",
    "FitError",
    "MaxIterationsError",
    "SingularNormalMatrix",
    "ZeroVarianceError",
    "lm_fit",
    "correlation_from_covariance",
]


class FitError(RuntimeError):
    """Base class for fitting failures."""


class MaxIterationsError(FitError):
    """Iteration cap reached; ``result`` holds the best parameters so far."""

    def __init__(self, message, result):
        super().__init__(message)
        self.result = result


class SingularNormalMatrix(FitError):
    """The damped normal matrix could not be factorized even at max damping."""


class ZeroVarianceError(ValueError):
    """A covariance diagonal entry is not strictly positive."""


@dataclass(frozen=True)
class LmOptions:
    lambda0: float = 1e-3
    lambda_factor: float = 10.0
    lambda_min: float = 1e-12
    lambda_max: float = 1e12
    max_iter: int = 200
    sse_tol: float = 1e-5
    step_rtol: float = 1e-6
    step_floor: float = 1e-12
    # column indices held at their starting values
    fixed: tuple = ()


@dataclass(frozen=True, eq=False)
class FitResult:
    params: FullParams
    sse: float
    n: int
    k: int
    covariance: np.ndarray | None
    correlation: np.ndarray | None
    converged: bool
    iterations: int
    fixed: tuple = ()
    gradient: np.ndarray | None = field(default=None, repr=False)

    @property
    def dof(self) -> int:
        return self.n - self.k

    @property
    def s2(self) -> float:
        return self.sse / self.dof

    @property
    def form(self) -> LemForm:
        return self.params.form

    @property
    def vector(self) -> np.ndarray:
        return self.params.to_vector()

    def stderr(self) -> np.ndarray:
        if self.covariance is None:
            raise ValueError("fit has no covariance matrix")
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))


def correlation_from_covariance(cov) -> np.ndarray:
    """cov_ij / sqrt(cov_ii cov_jj), with an exact unit diagonal."""
    cov = np.asarray(cov, dtype=float)
    var = np.diag(cov)
    if np.any(~(var > 0)):
        raise ZeroVarianceError("covariance has a non-positive diagonal entry")
    sd = np.sqrt(var)
    corr = cov / np.outer(sd, sd)
    corr = np.clip(0.5 * (corr + corr.T), -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return corr


def _covariance(jac, s2):
    a = jac.T @ jac
    try:
        inv = cholesky_inverse(a)
    except NotPositiveDefinite as exc:
        raise SingularNormalMatrix("J^T J is singular at the minimum") from exc
    return s2 * inv


def lm_fit(data: DenaturationDataset, start: FullParams, form: LemForm | None = None,
           c: ModelConstants = ModelConstants(), opts: LmOptions = LmOptions(),
           with_covariance: bool = True) -> FitResult:
    """Minimize the sum of squared residuals starting from ``start``.

    ``form`` defaults to the form of ``start``; a start in another form is
    converted first.  Parameters listed in ``opts.fixed`` stay at their
    starting values and do not count towards the degrees of freedom.
    Set ``with_covariance=False`` to skip the covariance matrix when only
    the minimizer is needed.
    """
    if form is not None and start.form is not form:
        start = start.with_form(form)
    form = start.form
    rt = c.rt
    d = data.d
    y = data.signal

    fixed = tuple(sorted(set(int(i) for i in opts.fixed)))
    free = np.array([i for i in range(N_PARAMS) if i not in fixed], dtype=int)
    if free.size == 0:
        raise ValueError("all parameters fixed")
    if data.d.size - free.size < 1:
        raise ValueError("need at least one degree of freedom")

    p = start.to_vector()
    if not np.all(np.isfinite(p)):
        raise ValueError("start parameters must be finite")
    r = y - model_signal_vec(form, p, d, rt)
    sse = float(r @ r)
    if not np.isfinite(sse):
        raise FitError("model is not finite at the starting parameters")

    lam = opts.lambda0
    iterations = 0
    converged = False

    def result(pvec, sse_, conv, with_cov):
        jac = jacobian_vec(form, pvec, d, rt)[:, free]
        res = y - model_signal_vec(form, pvec, d, rt)
        dof = d.size - free.size
        cov = corr = None
        if with_cov:
            cov_free = _covariance(jac, sse_ / dof)
            cov = np.zeros((N_PARAMS, N_PARAMS))
            cov[np.ix_(free, free)] = cov_free
            if not fixed and np.all(np.diag(cov) > 0):
                corr = correlation_from_covariance(cov)
        return FitResult(
            params=FullParams.from_vector(form, pvec), sse=sse_, n=d.size,
            k=free.size, covariance=cov, correlation=corr, converged=conv,
            iterations=iterations, fixed=fixed, gradient=jac.T @ res)

    while not converged:
        jac = jacobian_vec(form, p, d, rt)[:, free]
        a = jac.T @ jac
        g = jac.T @ r
        scale = np.diag(a).copy()
        scale[scale <= 0] = 1.0
        while True:
            iterations += 1
            if iterations > opts.max_iter:
                raise MaxIterationsError(
                    f"no convergence after {opts.max_iter} iterations",
                    result(p, sse, False, False))
            damped = a + np.diag(lam * scale)
            try:
                low = cholesky_decompose(damped)
            except NotPositiveDefinite:
                if lam >= opts.lambda_max:
                    raise SingularNormalMatrix(
                        "damped normal matrix not positive definite at maximum damping")
                lam = min(lam * opts.lambda_factor, opts.lambda_max)
                continue
            delta = cholesky_solve(low, g)
            trial = p.copy()
            trial[free] += delta
            r_trial = y - model_signal_vec(form, trial, d, rt)
            sse_trial = float(r_trial @ r_trial)
            if not np.isfinite(sse_trial):
                sse_trial = np.inf
            decrease = sse - sse_trial
            small = np.all(np.abs(delta) < opts.step_rtol * (np.abs(p[free]) + opts.step_floor))
            if decrease < opts.sse_tol and small:
                converged = True
                if decrease > 0:
                    p, r, sse = trial, r_trial, sse_trial
                break
            if sse_trial < sse:
                p, r, sse = trial, r_trial, sse_trial
                lam = max(lam / opts.lambda_factor, opts.lambda_min)
                break
            if lam >= opts.lambda_max:
                raise SingularNormalMatrix("no downhill step at maximum damping")
            lam = min(lam * opts.lambda_factor, opts.lambda_max)

    return result(p, sse, True, with_covariance)
