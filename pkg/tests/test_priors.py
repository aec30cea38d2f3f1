import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from gmac_amp.priors import (BINARY, FLAT, SectionPrior, denoise, error_prob, hard_decision, mmse,
                             mmse_mc, mutual_info, mutual_info_mc, sample_section, sample_sections)

# Frozen reference values, each from an independent route (see tests/oracle_values.py).
MMSE_B2_TAU1 = 0.3249432976624347            # 1-D quad of the two-location posterior
DENOISE_B4 = (0.71123459422759385994, 0.096255135257468713353)   # 40-digit softmax
PE_B256_2LNB = 0.3174013761523822            # scipy quad of 1 - E[Phi(a+Z)^255]
MI_B4_TAU025 = (0.9191296732859275, 0.00039483894908741863)      # 4e6-sample MC, (mean, se)
MMSE_B4_E2_TAU15 = (1.0508142109551972, 0.00043102408999428325)  # 4e6-sample MC


def test_prior_validation():
    with pytest.raises(ValueError):
        SectionPrior(FLAT, 3)
    with pytest.raises(ValueError):
        SectionPrior(FLAT, 4, 0.0)
    with pytest.raises(ValueError):
        SectionPrior("psk", 4)
    assert SectionPrior(BINARY, 4).payload_bits == 3
    assert SectionPrior(FLAT, 256).payload_bits == 8


def test_noise_var_roundtrip():
    p = SectionPrior(FLAT, 4, 2.0)
    s2 = p.noise_var(6.0)
    assert s2 == pytest.approx(2.0 / (2 * 10 ** 0.6 * 2))
    assert p.ebn0_db(s2) == pytest.approx(6.0)
    with pytest.raises(ValueError):
        SectionPrior(FLAT, 1).noise_var(3.0)


def test_single_location_sample():
    np.testing.assert_array_equal(sample_section(SectionPrior(FLAT, 1, 4.0), np.random.default_rng(0)), [2.0])


@pytest.mark.parametrize("kind", [FLAT, BINARY])
def test_sample_structure(kind):
    p = SectionPrior(kind, 8, 2.0)
    x = sample_sections(p, 1000, np.random.default_rng(1))
    nz = np.count_nonzero(x, axis=1)
    np.testing.assert_array_equal(nz, 1)
    np.testing.assert_allclose(np.sum(x ** 2, axis=1), 2.0, rtol=0, atol=1e-15)
    if kind == FLAT:
        assert np.all(x >= 0)


def test_flat_location_frequencies_chi_square():
    x = sample_sections(SectionPrior(FLAT, 4), 10 ** 6, np.random.default_rng(2))
    counts = np.count_nonzero(x, axis=0)
    assert stats.chisquare(counts).pvalue > 1e-3


def test_binary_outcome_frequencies():
    x = sample_sections(SectionPrior(BINARY, 2), 400_000, np.random.default_rng(3))
    code = np.argmax(np.abs(x), axis=1) * 2 + (x.sum(axis=1) > 0)
    counts = np.bincount(code, minlength=4)
    assert stats.chisquare(counts).pvalue > 1e-3


def test_denoise_symmetry_and_limits():
    p = SectionPrior(FLAT, 2, 4.0)
    np.testing.assert_allclose(denoise(p, np.array([3.3, 3.3]), 0.7), [1.0, 1.0])
    out = denoise(SectionPrior(FLAT, 4), np.array([0.2, 1.0, 0.5, -1.0]), 1e-9)
    np.testing.assert_array_equal(out, [0.0, 1.0, 0.0, 0.0])


def test_denoise_reference_vector():
    w0, w1 = DENOISE_B4
    out = denoise(SectionPrior(FLAT, 4), np.array([1.0, 0, 0, 0]), 0.5)
    np.testing.assert_allclose(out, [w0, w1, w1, w1], rtol=1e-14)


def test_denoise_large_arguments_are_finite():
    p = SectionPrior(BINARY, 4)
    out = denoise(p, np.array([[800.0, -900.0, 0.0, 1.0]]), 1e-3)
    assert np.all(np.isfinite(out))
    np.testing.assert_allclose(out, [[0, -1.0, 0, 0]], atol=1e-12)


def test_denoise_per_section_tau():
    p = SectionPrior(FLAT, 4)
    s = np.random.default_rng(4).normal(size=(3, 4))
    tau = np.array([0.3, 1.0, 2.0])
    rows = np.array([denoise(p, s[i], tau[i]) for i in range(3)])
    np.testing.assert_allclose(denoise(p, s, tau), rows, rtol=1e-15)


@given(st.lists(st.floats(-50, 50), min_size=8, max_size=8), st.floats(1e-3, 1e3))
@settings(max_examples=60, deadline=None)
def test_flat_denoise_sums_to_root_energy(vals, tau):
    p = SectionPrior(FLAT, 8, 3.0)
    out = denoise(p, np.array(vals), tau)
    assert abs(out.sum() - math.sqrt(3.0)) < 1e-12
    np.testing.assert_array_equal(hard_decision(p, out), hard_decision(p, np.array(vals)))


@pytest.mark.parametrize("kind,s,E,expected", [
    (FLAT, [3, 1, 2], 1.0, [1, 0, 0]),
    (FLAT, [2, 2, 0], 1.0, [1, 0, 0]),
    (BINARY, [-3, 1], 4.0, [-2, 0]),
])
def test_hard_decision_cases(kind, s, E, expected):
    B = len(s) if kind == BINARY else 4
    if kind == FLAT:
        s = list(s) + [-10.0] * (4 - len(s))
        expected = list(expected) + [0] * (4 - len(expected))
    p = SectionPrior(kind, B if kind == BINARY else 4, E)
    np.testing.assert_array_equal(hard_decision(p, np.array(s, float)), expected)


def test_mmse_limits():
    p = SectionPrior(FLAT, 4)
    assert mmse(p, 1e-12) == pytest.approx(0.75, abs=1e-9)
    assert mmse(p, 1e6) == 0.0
    pb = SectionPrior(BINARY, 4)
    assert mmse(pb, 1e-12) == pytest.approx(1.0, abs=1e-9)


def test_mmse_reference_b2():
    p = SectionPrior(FLAT, 2)
    assert mmse(p, 1.0) == pytest.approx(MMSE_B2_TAU1, rel=1e-6)
    assert mmse(p, 1.0, method="quadrature") == pytest.approx(MMSE_B2_TAU1, rel=1e-8)


def test_mmse_reference_b4_energy2():
    v, se = MMSE_B4_E2_TAU15
    assert abs(mmse(SectionPrior(FLAT, 4, 2.0), 1 / 1.5) - v) < 3 * se


def test_mmse_mc_route_agrees():
    p = SectionPrior(FLAT, 2)
    v, se = mmse_mc(p, 1.0, n_samples=200_000, rng=np.random.default_rng(5))
    assert abs(v - MMSE_B2_TAU1) < 3 * se


@pytest.mark.parametrize("kind,B", [(FLAT, 4), (FLAT, 256), (BINARY, 2)])
def test_mmse_monotone_and_bounded(kind, B):
    p = SectionPrior(kind, B)
    g = np.geomspace(1e-3, 300, 50)
    m = mmse(p, g)
    assert np.all(np.diff(m) <= 1e-12)
    assert np.all((m >= 0) & (m <= p.E))


def test_mutual_info_limits_and_reference():
    p = SectionPrior(FLAT, 4)
    assert mutual_info(p, 1e9) == pytest.approx(0.0, abs=1e-8)
    assert mutual_info(p, 1e-4) == pytest.approx(math.log(4), abs=1e-9)
    v, se = MI_B4_TAU025
    assert abs(mutual_info(p, 0.25) - v) < 3 * se


def test_mutual_info_mc_route_agrees():
    p = SectionPrior(BINARY, 2)
    v, se = mutual_info_mc(p, 0.5, n_samples=200_000, rng=np.random.default_rng(6))
    assert abs(v - mutual_info(p, 0.5)) < 3 * se


@pytest.mark.parametrize("kind,B", [(FLAT, 4), (FLAT, 16), (BINARY, 2)])
def test_i_mmse_relation(kind, B):
    # d/dg of 2 I(g) equals mmse(g) / E, with g = E / tau
    p = SectionPrior(kind, B)
    for g in [0.3, 1.0, 3.0, 10.0]:
        h = 1e-4 * g
        dI = (mutual_info(p, 1 / (g + h)) - mutual_info(p, 1 / (g - h))) / (2 * h)
        assert abs(2 * dI - mmse(p, g)) < 1e-3 * p.E


def test_mutual_info_bounded_by_payload():
    for kind, B in [(FLAT, 8), (BINARY, 4)]:
        p = SectionPrior(kind, B)
        v = mutual_info(p, np.geomspace(1e-3, 1e3, 40))
        assert np.all(v >= 0) and np.all(v <= p.payload_bits * math.log(2) + 1e-9)


def test_error_prob_limits():
    assert error_prob(SectionPrior(FLAT, 1), 0.3) == 0.0
    assert error_prob(SectionPrior(FLAT, 4), 1e12) == pytest.approx(0.75, abs=1e-5)
    assert error_prob(SectionPrior(FLAT, 4), 1e-4) == pytest.approx(0.0, abs=1e-12)


def test_error_prob_reference_b256():
    p = SectionPrior(FLAT, 256)
    assert error_prob(p, 1 / (2 * math.log(256))) == pytest.approx(PE_B256_2LNB, rel=1e-9)


def test_error_prob_b256_argmax_mc():
    p = SectionPrior(FLAT, 256)
    rng = np.random.default_rng(7)
    a = math.sqrt(2 * math.log(256))
    n, wrong = 0, 0
    for _ in range(10):
        z = rng.standard_normal((20_000, 256))
        z[:, 0] += a
        wrong += np.count_nonzero(np.argmax(z, axis=1) != 0)
        n += 20_000
    ph = wrong / n
    assert abs(ph - PE_B256_2LNB) < 3 * math.sqrt(ph * (1 - ph) / n)


def test_error_prob_vectorised():
    p = SectionPrior(FLAT, 8)
    tau = np.array([[0.1, 0.5], [1.0, 2.0]])
    out = error_prob(p, tau)
    assert out.shape == (2, 2)
    assert out[0, 0] == pytest.approx(error_prob(p, 0.1))
