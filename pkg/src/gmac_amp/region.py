"""Minimum Eb/N0 versus user density: AMP predictions and the converse bound."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .potential import GRID_SIZE, largest_stationary, tau_star
from .priors import error_prob

IID = "iid"
SC = "sc"
CONVERSE = "converse"
SCHEMES = (IID, SC, CONVERSE)

EBN0_LO_DB = -10.0
EBN0_HI_DB = 40.0
REGION_CSV_HEADER = ["scheme", "mu", "min_ebn0_db", "reachable", "target_uer", "payload_bits"]


def scheme_tau(scheme, mu, sigma2, prior, grid_size=GRID_SIZE):
    """Effective noise the decoder converges to: SE fixed point (iid) or the
    largest global minimiser of the potential (coupled, large-size limit)."""
    if scheme == IID:
        return sigma2 + mu * largest_stationary(mu, sigma2, prior, grid_size).psi
    if scheme == SC:
        return tau_star(mu, sigma2, prior, grid_size)
    raise ValueError(f"unknown scheme {scheme!r}")


@dataclass
class MinEbN0:
    ebn0_db: float
    reachable: bool
    at_lower_cap: bool = False


def min_ebn0(scheme, mu, prior, target_uer=1e-3, tol=1e-3, lo_db=EBN0_LO_DB, hi_db=EBN0_HI_DB,
             grid_size=GRID_SIZE):
    """Bisection over Eb/N0 (dB) for the smallest value with predicted UER <= target.

    Returns ``inf`` with ``reachable=False`` if even ``hi_db`` misses the target.
    """
    if not 0 < target_uer < 1:
        raise ValueError("target_uer must lie in (0, 1)")

    def ok(db):
        s2 = float(prior.noise_var(db))
        return error_prob(prior, scheme_tau(scheme, mu, s2, prior, grid_size)) <= target_uer

    if not ok(hi_db):
        return MinEbN0(math.inf, False)
    if ok(lo_db):
        return MinEbN0(lo_db, True, True)
    lo, hi = lo_db, hi_db
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return MinEbN0(0.5 * (lo + hi), True)


def q_inv(p):
    """Inverse Gaussian tail function."""
    return norm.isf(p)


def binary_entropy(p):
    if p <= 0 or p >= 1:
        return 0.0
    return -(p * math.log2(p) + (1 - p) * math.log2(1 - p))


def converse_min_ebn0(mu, M, epsilon):
    """Lower bound on Eb/N0 (linear) for per-user error epsilon with M messages per user.

    The first term uses the positive part of Qinv(1/M) - Qinv(1-eps); for
    eps >= 1 - 1/M the single-user bound is void and only the second term
    remains.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if M < 2:
        raise ValueError("M must be at least 2")
    k = math.log2(M)
    gap = max(q_inv(1.0 / M) - q_inv(1.0 - epsilon), 0.0)
    t1 = gap ** 2 / (2.0 * k)
    ex = 2.0 * mu * (k - epsilon * math.log2(M - 1) - binary_entropy(epsilon))
    t2 = math.expm1(ex * math.log(2.0)) / (2.0 * mu * k)
    return max(t1, t2)


def to_db(x):
    return 10.0 * math.log10(x)


@dataclass
class RegionCurve:
    scheme: str
    target_uer: float
    payload_bits: float
    mu: list = field(default_factory=list)
    min_ebn0_db: list = field(default_factory=list)
    reachable: list = field(default_factory=list)

    def rows(self):
        for m, e, r in zip(self.mu, self.min_ebn0_db, self.reachable):
            yield [self.scheme, m, e, int(r), self.target_uer, self.payload_bits]


def region_curve(scheme, mu_grid, prior, target_uer=1e-3, tol=1e-3, grid_size=GRID_SIZE):
    """Minimum Eb/N0 over a grid of densities.  For the converse, epsilon = target_uer
    and M = 2^payload_bits."""
    mus = sorted(float(m) for m in mu_grid)
    curve = RegionCurve(scheme, target_uer, prior.payload_bits)
    for m in mus:
        if scheme == CONVERSE:
            M = 2.0 ** prior.payload_bits
            val, ok = to_db(converse_min_ebn0(m, M, target_uer)), True
        else:
            r = min_ebn0(scheme, m, prior, target_uer, tol, grid_size=grid_size)
            val, ok = r.ebn0_db, r.reachable
        curve.mu.append(m)
        curve.min_ebn0_db.append(val)
        curve.reachable.append(ok)
    return curve


def write_region_csv(path_or_file, curves):
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    f = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(f)
        w.writerow(REGION_CSV_HEADER)
        for c in curves:
            for row in c.rows():
                w.writerow(row)
    finally:
        if own:
            f.close()
