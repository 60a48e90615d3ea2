"""Synthetic chemical-denaturation datasets.

The standard design places 20 points evenly on [0, 8] M and 10 points
evenly across the transition region (K from 0.1 to 10), and measures
every concentration twice with independent noise.  Baselines are
``200 + 5 D`` (native) and ``500 + 7 D`` (denatured).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import (
    DenaturationDataset,
    FullParams,
    LemForm,
    LemParams,
    ModelConstants,
    model_signal,
)
from .rng import GaussianNoise, LorentzianNoise, Mt19937, substream

__all__ = [
    "STANDARD_M",
    "STANDARD_D50",
    "SyntheticSpec",
    "SyntheticDataset",
    "transition_bounds",
    "design_points",
    "generate",
    "standard_grid",
    "nine_standard",
]

STANDARD_M = (4.0, 6.0, 8.0)
STANDARD_D50 = (3.0, 4.0, 5.0)


@dataclass(frozen=True)
class SyntheticSpec:
    m: float = 6.0
    d50: float = 4.0
    baseline_pre: tuple = (200.0, 5.0)
    baseline_post: tuple = (500.0, 7.0)
    d_min: float = 0.0
    d_max: float = 8.0
    n_transition: int = 10
    n_span: int = 20
    duplicate: bool = True
    noise: GaussianNoise | LorentzianNoise = field(default_factory=GaussianNoise)
    constants: ModelConstants = field(default_factory=ModelConstants)

    def __post_init__(self):
        if not self.d_min < self.d50 < self.d_max:
            raise ValueError(f"need d_min < d50 < d_max, got {self.d_min}, {self.d50}, {self.d_max}")
        if self.n_transition < 2 or self.n_span < 2:
            raise ValueError("n_transition and n_span must both be >= 2")
        if not self.m > 0:
            raise ValueError("m must be positive")

    def truth(self, form: LemForm = LemForm.M_D50) -> FullParams:
        a0, a1 = self.baseline_pre
        b0, b1 = self.baseline_post
        lem = LemParams(LemForm.M_D50, self.m, self.d50)
        return FullParams(a0, a1, b0, b1, lem).with_form(form)


@dataclass(frozen=True)
class SyntheticDataset:
    """Observations plus the parameters that generated them.

    ``truth`` is kept apart from ``data`` so fitting code only ever sees
    the observations.
    """

    data: DenaturationDataset
    truth: FullParams
    label: str = ""


def transition_bounds(m: float, d50: float, c: ModelConstants = ModelConstants(),
                      d_min: float = -math.inf, d_max: float = math.inf):
    """Concentrations where K = 0.1 and K = 10, clamped to [d_min, d_max]."""
    if not m > 0:
        raise ValueError("m must be positive")
    half = c.rt * math.log(10.0) / m
    return max(d50 - half, d_min), min(d50 + half, d_max)


def design_points(spec: SyntheticSpec) -> np.ndarray:
    d_lo, d_hi = transition_bounds(spec.m, spec.d50, spec.constants, spec.d_min, spec.d_max)
    span = np.linspace(spec.d_min, spec.d_max, spec.n_span)
    trans = np.linspace(d_lo, d_hi, spec.n_transition)
    d = np.concatenate([span, trans])
    if spec.duplicate:
        d = np.repeat(d, 2)
    return np.sort(d, kind="stable")


def generate(spec: SyntheticSpec, rng: Mt19937 | None = None, label: str = "") -> SyntheticDataset:
    """Noisy observations at the design points; noise drawn in ascending-d order."""
    d = design_points(spec)
    truth = spec.truth()
    clean = model_signal(truth, d, spec.constants)
    if rng is None:
        if not (isinstance(spec.noise, GaussianNoise) and spec.noise.sigma == 0):
            raise ValueError("an rng is required for noisy data")
        noise = np.zeros(d.size)
    else:
        noise = spec.noise.sample(rng, d.size)
    return SyntheticDataset(DenaturationDataset(d, clean + noise), truth, label)


def standard_grid():
    """The 3 x 3 (m, d50) grid in row-major order over m."""
    return [(m, d50) for m in STANDARD_M for d50 in STANDARD_D50]


def nine_standard(master_seed: int = 1, noise=None,
                  constants: ModelConstants = ModelConstants()) -> list[SyntheticDataset]:
    """One dataset per grid cell; cell ``i`` draws from substream ``i``."""
    noise = GaussianNoise(10.0) if noise is None else noise
    out = []
    for i, (m, d50) in enumerate(standard_grid()):
        spec = SyntheticSpec(m=m, d50=d50, noise=noise, constants=constants)
        out.append(generate(spec, substream(master_seed, i), label=f"m={m:g},d50={d50:g}"))
    return out
