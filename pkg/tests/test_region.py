import io
import math

import numpy as np
import pytest

from gmac_amp.potential import largest_stationary, tau_star
from gmac_amp.priors import FLAT, SectionPrior, error_prob
from gmac_amp.region import (CONVERSE, IID, REGION_CSV_HEADER, SC, binary_entropy,
                             converse_min_ebn0, min_ebn0, q_inv, region_curve, scheme_tau,
                             write_region_csv)

CONVERSE_REF = 2.543839073153261   # mu=0.2, M=256, eps=1e-3: mpmath inverse-Q, see oracle_values.py


def test_q_inv_and_entropy():
    assert q_inv(0.5) == pytest.approx(0.0, abs=1e-15)
    assert q_inv(0.001) == pytest.approx(3.090232306167813, rel=1e-12)
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.0) == 0.0


def test_converse_reference():
    assert converse_min_ebn0(0.2, 256, 1e-3) == pytest.approx(CONVERSE_REF, rel=1e-12)


def test_converse_first_term_vanishes():
    M = 16
    eps = 1 - 1 / M
    k = 4
    ex = 2 * 0.5 * (k - eps * math.log2(M - 1) - binary_entropy(eps))
    second = (2 ** ex - 1) / (2 * 0.5 * k)
    assert converse_min_ebn0(0.5, M, eps) == pytest.approx(second, rel=1e-12)


@pytest.mark.parametrize("M,mu", [(256, 0.4), (256, 0.5), (16, 1.0), (4, 2.0)])
def test_converse_small_eps_limit(M, mu):
    # instances where the multi-user term dominates
    S = mu * math.log2(M)
    assert converse_min_ebn0(mu, M, 1e-9) == pytest.approx((2 ** (2 * S) - 1) / (2 * S), abs=1e-3)


def test_converse_monotone_in_mu():
    vals = [converse_min_ebn0(mu, 256, 1e-3) for mu in np.linspace(0.01, 0.5, 30)]
    assert np.all(np.diff(vals) >= 0)


def test_converse_domain():
    with pytest.raises(ValueError):
        converse_min_ebn0(0.1, 256, 1.0)
    with pytest.raises(ValueError):
        converse_min_ebn0(0.1, 1, 0.1)


def test_scheme_tau():
    p = SectionPrior(FLAT, 4)
    s2 = p.noise_var(7.0)
    assert scheme_tau(IID, 0.9, s2, p) == pytest.approx(s2 + 0.9 * largest_stationary(0.9, s2, p).psi)
    assert scheme_tau(SC, 0.9, s2, p) == pytest.approx(tau_star(0.9, s2, p))
    with pytest.raises(ValueError):
        scheme_tau("ldpc", 0.9, s2, p)


def test_min_ebn0_bisection_is_tight():
    p = SectionPrior(FLAT, 4)
    r = min_ebn0(IID, 0.5, p, 1e-3, tol=1e-4)
    assert r.reachable and not r.at_lower_cap

    def pe(db):
        s2 = p.noise_var(db)
        return error_prob(p, scheme_tau(IID, 0.5, s2, p))
    assert pe(r.ebn0_db + 1e-4) <= 1e-3 < pe(r.ebn0_db - 1e-4)


def test_min_ebn0_caps():
    p = SectionPrior(FLAT, 4)
    assert min_ebn0(IID, 0.05, p, 0.9).at_lower_cap
    r = min_ebn0(IID, 3.0, p, 1e-3)
    assert not r.reachable and math.isinf(r.ebn0_db)
    with pytest.raises(ValueError):
        min_ebn0(IID, 0.5, p, 0.0)


def test_sc_curve_below_iid_curve():
    p = SectionPrior(FLAT, 4)
    grid = [0.3, 0.6, 0.9, 1.1]
    iid = region_curve(IID, grid, p, tol=1e-3)
    sc = region_curve(SC, grid, p, tol=1e-3)
    for a, b in zip(sc.min_ebn0_db, iid.min_ebn0_db):
        assert a <= b + 1e-3


def test_curve_rows_and_csv():
    p = SectionPrior(FLAT, 4)
    one = region_curve(CONVERSE, [0.3], p)
    assert len(list(one.rows())) == 1
    curves = [region_curve(s, [0.5, 0.2], p) for s in (IID, SC, CONVERSE)]
    assert curves[0].mu == [0.2, 0.5]
    buf = io.StringIO()
    write_region_csv(buf, curves)
    lines = buf.getvalue().splitlines()
    assert lines[0].split(",") == REGION_CSV_HEADER
    assert len(lines) == 1 + 2 * 3
    buf = io.StringIO()
    write_region_csv(buf, [region_curve(IID, [], p)])
    assert buf.getvalue().splitlines() == [",".join(REGION_CSV_HEADER)]
