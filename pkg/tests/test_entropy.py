import math

import numpy as np
import pytest
import scipy.special as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from knnanomaly.density import DensityEstimate
from knnanomaly.entropy import (
    EntropyEstimate,
    EstimateEnsemble,
    RateModel,
    beta_entropy_closed_form,
    bias_correction,
    bias_corrected_entropy,
    confidence_interval,
    digamma,
    gaussian_entropy_closed_form,
    normalized_scores,
    plug_in_entropy,
    predicted_rates,
)

EULER_GAMMA = 0.5772156649015329


# ---------------------------------------------------------------- digamma


def test_digamma_known_values():
    assert digamma(1.0) == pytest.approx(-EULER_GAMMA, abs=1e-14)
    assert digamma(0.5) == pytest.approx(-EULER_GAMMA - 2 * math.log(2), abs=1e-13)
    # psi(n) = H_{n-1} - gamma
    assert digamma(50) == pytest.approx(sum(1.0 / j for j in range(1, 50)) - EULER_GAMMA, abs=1e-13)


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=1e-3, max_value=1e6))
def test_digamma_matches_scipy(x):
    assert digamma(x) == pytest.approx(float(sp.digamma(x)), abs=1e-10, rel=1e-12)


def test_digamma_rejects_non_positive():
    for bad in (0.0, -1.0, math.inf, math.nan):
        with pytest.raises(ValueError):
            digamma(bad)


# ---------------------------------------------------------------- bias correction


def test_bias_correction_table():
    assert bias_correction(2) == pytest.approx(EULER_GAMMA, abs=1e-12)
    assert bias_correction(50) == pytest.approx(0.010239, abs=5e-7)
    for k in range(2, 2001):
        assert bias_correction(k) == pytest.approx(math.log(k - 1) - sp.digamma(k - 1), abs=1e-10)


def test_bias_correction_decreases_to_zero():
    ks = [2, 5, 10, 50, 200, 1000]
    vals = [bias_correction(k) for k in ks]
    assert all(a > b > 0 for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-3


def test_bias_corrected_adds_correction_once():
    raw = EntropyEstimate(1.0, k=10, n_eval=100, m_ref=100)
    corr = bias_corrected_entropy(raw)
    assert corr.value == pytest.approx(1.0 + math.log(9) - sp.digamma(9), abs=1e-12)
    assert corr.bias_corrected and corr.k == 10
    with pytest.raises(ValueError, match="already"):
        bias_corrected_entropy(corr)
    with pytest.raises(ValueError):
        bias_corrected_entropy(EntropyEstimate(1.0))


# ---------------------------------------------------------------- plug-in


def test_plug_in_hand_examples():
    assert plug_in_entropy(np.ones(7)).value == 0.0
    assert plug_in_entropy([0.5, 0.5]).value == pytest.approx(math.log(2))
    assert plug_in_entropy([1.0, math.exp(-1)]).value == pytest.approx(0.5)


def test_plug_in_reports_bad_index():
    with pytest.raises(ValueError, match="index 2"):
        plug_in_entropy([1.0, 0.5, 0.0])
    with pytest.raises(ValueError):
        plug_in_entropy([])


def test_plug_in_carries_estimate_metadata():
    est = DensityEstimate(np.zeros((3, 1)), np.array([1.0, 2.0, 4.0]), 5, 30, 1, renormalized=True)
    out = plug_in_entropy(est)
    assert (out.k, out.m_ref, out.n_eval, out.renormalized) == (5, 30, 3, True)
    assert out.value == pytest.approx(-math.log(8) / 3)


# ---------------------------------------------------------------- closed forms


def test_gaussian_closed_form():
    assert gaussian_entropy_closed_form(1.0) == pytest.approx(1.41894, abs=5e-6)
    assert gaussian_entropy_closed_form(2.0) == pytest.approx(1.76551, abs=5e-6)
    assert gaussian_entropy_closed_form(1 / (2 * math.pi * math.e)) == pytest.approx(0.0, abs=1e-14)
    for s2 in (0.1, 3.0, 17.0):
        assert gaussian_entropy_closed_form(s2) == pytest.approx(stats.norm(scale=math.sqrt(s2)).entropy())


def test_beta_closed_form():
    # quoted values are truncated to five decimals
    assert beta_entropy_closed_form(4, 4) == pytest.approx(-0.38449, abs=1e-5)
    assert beta_entropy_closed_form(1, 1) == pytest.approx(0.0, abs=1e-14)
    assert 2 * beta_entropy_closed_form(4, 4) == pytest.approx(-0.76897, abs=5e-5)
    for a, b in ((0.5, 0.5), (2.0, 5.0), (10.0, 3.0)):
        assert beta_entropy_closed_form(a, b) == pytest.approx(stats.beta(a, b).entropy(), abs=1e-10)


# ---------------------------------------------------------------- ensembles


def test_ensemble_statistics():
    ens = EstimateEnsemble.from_values([1.0, 2.0, 4.0])
    assert ens.mean == pytest.approx(7 / 3)
    assert ens.variance == pytest.approx(np.var([1, 2, 4], ddof=1))
    d = ens.to_dict()
    assert d["estimates"] == [1.0, 2.0, 4.0]


def test_normalized_scores_examples():
    np.testing.assert_allclose(normalized_scores([1.0, 3.0]), [-1 / math.sqrt(2), 1 / math.sqrt(2)])
    with pytest.raises(ValueError):
        normalized_scores([2.0, 2.0, 2.0])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=40).filter(lambda v: np.ptp(v) > 1e-3))
def test_normalized_scores_have_zero_mean_unit_sd(values):
    z = normalized_scores(values)
    assert abs(z.mean()) < 1e-9
    assert z.std(ddof=1) == pytest.approx(1.0, rel=1e-9)


def test_confidence_interval_hand_example():
    # mean 1, sample variance 0.04, R = 100
    vals = np.array([0.8, 1.2] * 50)
    vals = 1.0 + (vals - 1.0) * math.sqrt(0.04 / np.var(vals, ddof=1))
    lo, hi = confidence_interval(vals, 0.95)
    assert (lo, hi) == pytest.approx((0.9608, 1.0392), abs=5e-5)
    with pytest.raises(ValueError):
        confidence_interval([1.0, 1.0], 0.95)
    with pytest.raises(ValueError):
        confidence_interval([1.0, 2.0], 1.5)


def test_predicted_rates():
    assert predicted_rates(RateModel(), 5, 100, 100) == (0.0, 0.0)
    bias, _ = predicted_rates(RateModel(c1=1, c2=1, dim=1), 10, 1000, 10)
    assert bias == pytest.approx(0.11)
    model = RateModel(c4=3.0, c5=5.0)
    _, v1 = predicted_rates(model, 10, 400, 300)
    _, v2 = predicted_rates(model, 10, 800, 600)
    assert v2 == pytest.approx(v1 / 2)
