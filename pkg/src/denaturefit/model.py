"""Two-state denaturation model with the three linear-extrapolation forms.

The observed signal is the population-weighted mean of two linear
baselines,

    signal(D) = (alpha_A(D) + alpha_B(D) K) / (1 + K),   K = exp(-dG(D) / RT)

with ``alpha_A = a0 + a1 D`` (native), ``alpha_B = b0 + b1 D`` (denatured)
and ``dG(D)`` linear in the denaturant concentration.  The line ``dG(D)``
can be written with any two of (dG0, m, D50):

========  =============================  ===============
form      dG(D)                          (p1, p2)
========  =============================  ===============
DG0_M     dG0 - m D                      (dG0, m)
M_D50     -m (D - D50)                   (m, D50)
DG0_D50   dG0 (1 - D / D50)              (dG0, D50)
========  =============================  ===============

Parameter vectors always use the column order
``(a0, a1, b0, b1, p1, p2)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

__all__ = [
    "PARAM_NAMES",
    "N_PARAMS",
    "ModelConstants",
    "DenaturationDataset",
    "LemForm",
    "LemParams",
    "LemTriple",
    "FullParams",
    "DegenerateConversionError",
    "FlatDataError",
    "lem_delta_g",
    "convert",
    "to_triple",
    "model_signal",
    "model_signal_vec",
    "residuals",
    "jacobian",
    "initial_guess",
]

BASELINE_NAMES = ("a0", "a1", "b0", "b1")
N_PARAMS = 6


class DegenerateConversionError(ValueError):
    """Raised when a parameter conversion needs D50 but m is zero."""


class FlatDataError(ValueError):
    """Raised when a dataset has no detectable transition."""


@dataclass(frozen=True)
class ModelConstants:
    """Gas constant (kJ/mol/K) and temperature (K)."""

    gas_constant: float = 8.3145e-3
    temperature: float = 298.15

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        if not self.gas_constant > 0:
            raise ValueError(f"gas_constant must be positive, got {self.gas_constant}")

    @property
    def rt(self) -> float:
        return self.gas_constant * self.temperature


@dataclass(frozen=True, eq=False)
class DenaturationDataset:
    """Observed (denaturant concentration, signal) pairs.

    Duplicate concentrations are allowed.  The arrays are copied and made
    read-only on construction.
    """

    d: np.ndarray
    signal: np.ndarray

    def __post_init__(self):
        d = np.array(self.d, dtype=float).ravel()
        s = np.array(self.signal, dtype=float).ravel()
        if d.shape != s.shape:
            raise ValueError("d and signal must have the same length")
        if d.size < N_PARAMS + 2:
            raise ValueError(
                f"need at least {N_PARAMS + 2} points, got {d.size}")
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(s))):
            raise ValueError("dataset contains non-finite values")
        if np.any(d < 0):
            raise ValueError("denaturant concentrations must be >= 0")
        d.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "signal", s)

    def __len__(self):
        return self.d.size

    @classmethod
    def from_points(cls, points):
        pts = np.asarray(list(points), dtype=float).reshape(-1, 2)
        return cls(pts[:, 0], pts[:, 1])

    def points(self):
        return list(zip(self.d.tolist(), self.signal.tolist()))


class LemForm(enum.Enum):
    """Which two of (dG0, m, D50) parameterize the free-energy line."""

    DG0_M = "dg0-m"
    M_D50 = "m-d50"
    DG0_D50 = "dg0-d50"

    @property
    def param_names(self) -> tuple[str, str]:
        return _LEM_NAMES[self]

    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower().replace("_", "-")
        for form in cls:
            if form.value == key:
                return form
        raise ValueError(f"unknown LEM form {text!r}; "
                         f"choose from {[f.value for f in cls]}")


_LEM_NAMES = {
    LemForm.DG0_M: ("dg0", "m"),
    LemForm.M_D50: ("m", "d50"),
    LemForm.DG0_D50: ("dg0", "d50"),
}


def param_names(form: LemForm) -> tuple[str, ...]:
    return BASELINE_NAMES + form.param_names


PARAM_NAMES = {form: param_names(form) for form in LemForm}


@dataclass(frozen=True)
class LemTriple:
    dg0: float
    m: float
    d50: float

    def as_dict(self):
        return {"dg0": self.dg0, "m": self.m, "d50": self.d50}


@dataclass(frozen=True)
class LemParams:
    form: LemForm
    p1: float
    p2: float

    def __post_init__(self):
        if self.form in (LemForm.M_D50, LemForm.DG0_D50) and not self.p2 > 0:
            raise ValueError(f"D50 must be positive in form {self.form.value}")

    def as_dict(self):
        n1, n2 = self.form.param_names
        return {n1: self.p1, n2: self.p2}


@dataclass(frozen=True)
class FullParams:
    """Baseline coefficients plus the two LEM parameters."""

    a0: float
    a1: float
    b0: float
    b1: float
    lem: LemParams

    @property
    def form(self) -> LemForm:
        return self.lem.form

    def to_vector(self) -> np.ndarray:
        return np.array([self.a0, self.a1, self.b0, self.b1,
                         self.lem.p1, self.lem.p2], dtype=float)

    @classmethod
    def from_vector(cls, form: LemForm, vec) -> "FullParams":
        v = [float(x) for x in vec]
        if len(v) != N_PARAMS:
            raise ValueError(f"expected {N_PARAMS} parameters, got {len(v)}")
        return cls(v[0], v[1], v[2], v[3], LemParams(form, v[4], v[5]))

    def with_form(self, target: LemForm) -> "FullParams":
        return FullParams(self.a0, self.a1, self.b0, self.b1,
                          convert(self.lem, target))

    def as_dict(self):
        out = {"a0": self.a0, "a1": self.a1, "b0": self.b0, "b1": self.b1}
        out.update(self.lem.as_dict())
        return out


def lem_delta_g(lem: LemParams, d):
    """Unfolding free energy (kJ/mol) at denaturant concentration ``d``."""
    d = np.asarray(d, dtype=float) if np.ndim(d) else float(d)
    if lem.form is LemForm.DG0_M:
        return lem.p1 - lem.p2 * d
    if lem.form is LemForm.M_D50:
        return -lem.p1 * (d - lem.p2)
    if lem.p2 == 0:
        raise ZeroDivisionError("D50 is zero in the dG0/D50 form")
    return lem.p1 * (1.0 - d / lem.p2)


def to_triple(lem: LemParams) -> LemTriple:
    """All three of (dG0, m, D50) for ``lem``, using dG0 = m * D50."""
    p1, p2 = float(lem.p1), float(lem.p2)
    if lem.form is LemForm.DG0_M:
        if p2 == 0:
            raise DegenerateConversionError("m = 0: D50 is undefined")
        return LemTriple(p1, p2, p1 / p2)
    if lem.form is LemForm.M_D50:
        return LemTriple(p1 * p2, p1, p2)
    return LemTriple(p1, p1 / p2, p2)


def convert(lem: LemParams, target: LemForm) -> LemParams:
    """Re-express ``lem`` in ``target`` form; the line dG(D) is unchanged."""
    if not (np.isfinite(lem.p1) and np.isfinite(lem.p2)):
        raise ValueError("cannot convert non-finite parameters")
    if lem.form is target:
        return lem
    t = to_triple(lem)
    if target is LemForm.DG0_M:
        return LemParams(target, t.dg0, t.m)
    if target is LemForm.M_D50:
        return LemParams(target, t.m, t.d50)
    return LemParams(target, t.dg0, t.d50)


def _delta_g_vec(form: LemForm, p1, p2, d):
    if form is LemForm.DG0_M:
        return p1 - p2 * d
    if form is LemForm.M_D50:
        return -p1 * (d - p2)
    return p1 * (1.0 - d / p2)


def model_signal_vec(form: LemForm, vec, d, rt: float):
    """Signal for a raw parameter vector; the optimizer's hot path.

    Written as fN*alpha_A + fU*alpha_B with both fractions from the
    logistic function, so neither branch overflows.
    """
    a0, a1, b0, b1, p1, p2 = vec
    x = _delta_g_vec(form, p1, p2, d) / rt
    f_native = expit(x)
    f_unfolded = expit(-x)
    return f_native * (a0 + a1 * d) + f_unfolded * (b0 + b1 * d)


def model_signal(p: FullParams, d, c: ModelConstants = ModelConstants()):
    """Observed signal at concentration ``d`` (scalar or array)."""
    out = model_signal_vec(p.form, p.to_vector(), np.asarray(d, dtype=float), c.rt)
    return float(out) if np.ndim(out) == 0 else out


def residuals(p: FullParams, data: DenaturationDataset,
              c: ModelConstants = ModelConstants()) -> np.ndarray:
    """observed - model at every data point."""
    return data.signal - model_signal_vec(p.form, p.to_vector(), data.d, c.rt)


def jacobian_vec(form: LemForm, vec, d, rt: float) -> np.ndarray:
    a0, a1, b0, b1, p1, p2 = vec
    x = _delta_g_vec(form, p1, p2, d) / rt
    fn = expit(x)
    fu = expit(-x)
    # d(signal)/d(dG) = -(alpha_B - alpha_A) fN fU / RT
    ds_dg = -((b0 + b1 * d) - (a0 + a1 * d)) * fn * fu / rt
    if form is LemForm.DG0_M:
        g1, g2 = 1.0, -d
    elif form is LemForm.M_D50:
        g1, g2 = -(d - p2), p1
    else:
        g1, g2 = 1.0 - d / p2, p1 * d / (p2 * p2)
    jac = np.empty((d.size, N_PARAMS))
    jac[:, 0] = fn
    jac[:, 1] = fn * d
    jac[:, 2] = fu
    jac[:, 3] = fu * d
    jac[:, 4] = ds_dg * g1
    jac[:, 5] = ds_dg * g2
    return jac


def jacobian(p: FullParams, data: DenaturationDataset,
             c: ModelConstants = ModelConstants()) -> np.ndarray:
    """Analytic n x 6 matrix of d(signal_i)/d(param_j)."""
    return jacobian_vec(p.form, p.to_vector(), data.d, c.rt)


def _crossings(x, y, level):
    """Linearly interpolated positions where ``y`` crosses ``level``."""
    z = y - level
    out = []
    for i in range(len(x) - 1):
        if z[i] == 0:
            out.append(x[i])
        elif z[i] * z[i + 1] < 0:
            t = z[i] / (z[i] - z[i + 1])
            out.append(x[i] + t * (x[i + 1] - x[i]))
    if z[-1] == 0:
        out.append(x[-1])
    return np.array(out)


def _closest(values, target, default):
    if values.size == 0:
        return default
    return float(values[np.argmin(np.abs(values - target))])


def initial_guess(data: DenaturationDataset, form: LemForm,
                  c: ModelConstants = ModelConstants()) -> FullParams:
    """Heuristic starting point for the fit.

    Baselines are straight lines through the lowest- and highest-d 20% of
    the points.  D50 is where the baseline-normalized signal crosses one
    half; the transition width is the distance between the 0.12 and 0.88
    crossings (about 4 RT/m for a two-state transition), so m = 4 RT / width.
    """
    order = np.lexsort((data.signal, data.d))
    d = data.d[order]
    s = data.signal[order]
    n = d.size

    spread = float(np.ptp(s))
    if spread < 10 * np.finfo(float).eps * abs(float(np.mean(s))) or spread == 0:
        raise FlatDataError("signal is flat; no transition to fit")

    n_tail = max(2, int(round(0.2 * n)))
    pre = np.polyfit(d[:n_tail], s[:n_tail], 1) if np.ptp(d[:n_tail]) > 0 \
        else np.array([0.0, np.mean(s[:n_tail])])
    post = np.polyfit(d[-n_tail:], s[-n_tail:], 1) if np.ptp(d[-n_tail:]) > 0 \
        else np.array([0.0, np.mean(s[-n_tail:])])
    a1, a0 = float(pre[0]), float(pre[1])
    b1, b0 = float(post[0]), float(post[1])

    # average duplicates so noise between replicate points cancels
    ud, inv = np.unique(d, return_inverse=True)
    us = np.bincount(inv, weights=s) / np.bincount(inv)
    span = (b0 + b1 * ud) - (a0 + a1 * ud)
    span = np.where(np.abs(span) > 0, span, np.finfo(float).tiny)
    frac = (us - (a0 + a1 * ud)) / span

    d_range = float(ud[-1] - ud[0])
    mid = 0.5 * (ud[0] + ud[-1])
    d50 = _closest(_crossings(ud, frac, 0.5), mid, mid)
    # outermost crossings on the correct side: noise can only widen the
    # estimate, and a too-small m is easier for the fit to recover from
    lo = _crossings(ud, frac, 0.12)
    hi = _crossings(ud, frac, 0.88)
    lo, hi = lo[lo <= d50], hi[hi >= d50]
    width = float(hi.max() - lo.min()) if lo.size and hi.size else 0.25 * d_range
    width = min(max(width, 0.2), max(d_range, 0.2))
    m = 4.0 * c.rt / width
    if d50 <= 0:
        d50 = max(mid, 1e-3)

    lem = convert(LemParams(LemForm.M_D50, m, d50), form)
    return FullParams(a0, a1, b0, b1, lem)
