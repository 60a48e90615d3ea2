import math

import numpy as np
import pytest

from denaturefit.model import LemForm, ModelConstants, model_signal, to_triple
from denaturefit.rng import GaussianNoise, LorentzianNoise, Mt19937
from denaturefit.synth import (
    SyntheticSpec,
    design_points,
    generate,
    nine_standard,
    standard_grid,
    transition_bounds,
)

RT = ModelConstants().rt


def _k(m, d50, d):
    return math.exp(m * (d - d50) / RT)


def test_transition_bounds_example():
    lo, hi = transition_bounds(6.0, 4.0)
    assert RT == pytest.approx(2.4790, abs=1e-4)
    assert lo == pytest.approx(3.0487, abs=1e-4)
    assert hi == pytest.approx(4.9513, abs=1e-4)
    assert _k(6.0, 4.0, lo) == pytest.approx(0.1, rel=1e-9)
    assert _k(6.0, 4.0, hi) == pytest.approx(10.0, rel=1e-9)


def test_transition_bounds_sharp_limit():
    lo, hi = transition_bounds(1e9, 4.0)
    assert lo == pytest.approx(4.0, abs=1e-6) and hi == pytest.approx(4.0, abs=1e-6)
    lo, hi = transition_bounds(0.5, 1.0, d_min=0.0, d_max=8.0)
    assert lo == 0.0


def test_design_points():
    d = design_points(SyntheticSpec())
    assert d.size == 60
    assert d.min() == 0.0 and d.max() == 8.0
    assert np.all(np.diff(d) >= 0)
    values, counts = np.unique(d, return_counts=True)
    assert np.all(counts % 2 == 0)
    lo, hi = transition_bounds(6.0, 4.0)
    trans = np.linspace(lo, hi, 10)
    for t in trans:
        assert np.sum(np.isclose(d, t, rtol=0, atol=1e-12)) >= 2
    assert trans[1] - trans[0] == pytest.approx((hi - lo) / 9)


def test_noiseless_exact():
    ds = generate(SyntheticSpec(noise=GaussianNoise(0.0)))
    np.testing.assert_array_equal(ds.data.signal, model_signal(ds.truth, ds.data.d))


def test_noise_scale():
    spec = SyntheticSpec()
    clean = model_signal(spec.truth(), design_points(spec))
    for seed in range(20):
        ds = generate(spec, Mt19937(seed))
        sd = np.std(ds.data.signal - clean, ddof=0)
        assert 6.5 <= sd <= 13.5


def test_deterministic():
    a = generate(SyntheticSpec(), Mt19937(3)).data
    b = generate(SyntheticSpec(), Mt19937(3)).data
    np.testing.assert_array_equal(a.signal, b.signal)


def test_lorentzian_generation_respects_cutoff():
    spec = SyntheticSpec(noise=LorentzianNoise(cutoff=30.0))
    ds = generate(spec, Mt19937(1))
    clean = model_signal(spec.truth(), ds.data.d)
    assert np.all(np.abs(ds.data.signal - clean) <= 30.0)


def test_noisy_needs_rng():
    with pytest.raises(ValueError):
        generate(SyntheticSpec())


def test_truth_forms():
    spec = SyntheticSpec()
    assert spec.truth(LemForm.DG0_M).lem.p1 == 24.0
    with pytest.raises(ValueError):
        SyntheticSpec(d50=9.0)


def test_nine_standard():
    sets = nine_standard(1)
    assert len(sets) == 9
    assert [len(s.data) for s in sets] == [60] * 9
    assert [(to_triple(s.truth.lem).m, to_triple(s.truth.lem).d50) for s in sets] == standard_grid()
    dg0 = {(t.m, t.d50): t.dg0 for t in (to_triple(s.truth.lem) for s in sets)}
    assert dg0[(4.0, 3.0)] == 12.0
    assert dg0[(8.0, 5.0)] == 40.0
    again = nine_standard(1)
    for a, b in zip(sets, again):
        np.testing.assert_array_equal(a.data.signal, b.data.signal)
    other = nine_standard(2)
    assert not np.array_equal(sets[0].data.signal, other[0].data.signal)
