"""Large-payload thresholds for i.i.d. and spatially coupled codebooks (flat prior).

``ebn0`` arguments here are linear (not dB).  Spectral efficiency
``S = mu * log2(B)`` is in bits per channel use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LN2 = math.log(2.0)


def s_amp(ebn0):
    """Largest spectral efficiency an i.i.d. design decodes with AMP as B grows."""
    return 0.5 * (1.0 / LN2 - 1.0 / ebn0)


def _sopt_gap(S, ebn0):
    # 0.5*log2(1 + 2 S ebn0)/S - 1, decreasing in S, with its S -> 0 limit
    if S == 0.0:
        return ebn0 / LN2 - 1.0
    return 0.5 * math.log1p(2.0 * S * ebn0) / (LN2 * S) - 1.0


def s_opt(ebn0, tol=1e-14):
    """Positive solution of S = 0.5*log2(1 + 2 S ebn0); 0 when ebn0 <= ln 2.

    Bisection on (0, hi].  For S >= 1 we have 0.5*log2(1+2S e) <=
    0.5*log2(S) + 0.5*log2(1+2e) < S once S > max(1, log2(1+2e)), which
    gives the bracket.
    """
    if ebn0 <= LN2:
        return 0.0
    lo = 0.0
    hi = max(1.0, math.log2(1.0 + 2.0 * ebn0)) + 1.0
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if _sopt_gap(mid, ebn0) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def shannon_ebn0(S):
    """(2^{2S} - 1) / (2S): the Eb/N0 at which S equals s_opt."""
    return math.expm1(2.0 * S * LN2) / (2.0 * S)


@dataclass(frozen=True)
class LargePayloadThresholds:
    S: float
    S_AMP: float
    S_opt: float
    theta: float
    snr: float
    Delta: float
    omega_star: float
    rho_star: float
    in_window: bool

    @property
    def feasible(self):
        return self.Delta > 0


def _delta(theta, snr, S):
    return math.log1p(theta * snr) / (2.0 * theta) - S * LN2


def _omega_star(theta, snr, Delta):
    if Delta <= 0:
        return math.inf
    return theta * snr ** 2 / ((1.0 + theta * snr) * Delta)


def sc_thresholds_from_S(S, ebn0, theta):
    snr = 2.0 * ebn0 * S
    D = _delta(theta, snr, S)
    om = _omega_star(theta, snr, D)
    rho = min(D / (3.0 * snr), 0.5) if D > 0 else math.nan
    sa, so = s_amp(ebn0), s_opt(ebn0)
    win = (sa / theta <= S) and (S < so / theta)
    return LargePayloadThresholds(S, sa, so, theta, snr, D, om, rho, win)


def sc_design_params(mu, B, ebn0, omega, lam):
    """Coupled-design quantities for user density mu, section size B and (omega, lambda)."""
    if mu <= 0 or B < 2 or ebn0 <= 0:
        raise ValueError("need mu > 0, B >= 2, ebn0 > 0")
    theta = 1.0 + (omega - 1) / lam
    return sc_thresholds_from_S(mu * math.log2(B), ebn0, theta)


@dataclass(frozen=True)
class CouplingChoice:
    kind: str                 # "iid", "sc" or "infeasible"
    omega: int = 1
    lam: int = 1
    theta0: float = 1.0
    omega_star: float = math.nan
    rho_star: float = math.nan


def choose_coupling_params(S, ebn0, theta0_fraction=0.5):
    """Pick i.i.d. or a coupled (omega, lambda) for spectral efficiency S.

    The target ratio theta0 is placed a fraction ``theta0_fraction`` of the
    way from 1 to S_opt/S.  At S_opt/S itself the coupled margin Delta
    vanishes and the required width is infinite, so the endpoint cannot be
    used.  omega is the smallest integer above the required width at theta0;
    lambda is the smallest length with 1 + (omega-1)/lambda <= theta0 (and
    lambda >= 2 omega - 1).
    """
    if S <= 0 or ebn0 <= 0:
        raise ValueError("S and ebn0 must be positive")
    if not 0.0 < theta0_fraction < 1.0:
        raise ValueError("theta0_fraction must lie in (0, 1)")
    sa, so = s_amp(ebn0), s_opt(ebn0)
    if S < sa:
        return CouplingChoice("iid")
    if S >= so:
        return CouplingChoice("infeasible")
    theta0 = 1.0 + theta0_fraction * (so / S - 1.0)
    th = sc_thresholds_from_S(S, ebn0, theta0)
    omega = int(math.floor(th.omega_star)) + 1
    lam = max(int(math.ceil((omega - 1) / (theta0 - 1.0))), 2 * omega - 1)
    # guard against rounding at the boundary
    while 1.0 + (omega - 1) / lam > theta0:
        lam += 1
    final = sc_thresholds_from_S(S, ebn0, 1.0 + (omega - 1) / lam)
    return CouplingChoice("sc", omega, lam, theta0, th.omega_star, final.rho_star)


def wave_iteration_bound(lam, omega_star, omega):
    """ceil(lambda * omega_star / (2 omega))."""
    return int(math.ceil(lam * omega_star / (2.0 * omega)))


def mse_decay_level(B, delta, k=1.0):
    """B^{-k delta^2} / (delta sqrt(ln B))."""
    return B ** (-k * delta ** 2) / (delta * math.sqrt(math.log(B)))


def gap_level(B, delta_tilde, k1=1.0):
    """B^{-k1 delta_tilde^2}."""
    return B ** (-k1 * delta_tilde ** 2)


def failure_gap(B, delta2):
    """B^{-delta2^2/2} / (delta2 sqrt(ln B)) + B^{-delta2^2}."""
    return B ** (-delta2 ** 2 / 2) / (delta2 * math.sqrt(math.log(B))) + B ** (-delta2 ** 2)


@dataclass(frozen=True)
class PhaseResult:
    regime: str           # "below", "above" or "indeterminate"
    bound: float          # UER upper bound (below), lower bound (above), nan otherwise
    low_limit: float      # S must be below this for "below"
    high_limit: float     # S must exceed this for "above"
    diagnostic: bool = True   # bounds depend on unspecified constants k, k1


def large_payload_phase(mu, B, ebn0, delta, delta_tilde, k=1.0, k1=1.0, delta2=None):
    """Which side of the i.i.d. AMP transition (mu, B, ebn0) is on after one iteration.

    Returns the regime with the corresponding bound on the first-iteration
    UER: at most 4 * mse_decay_level below, at least 1 - failure_gap above.
    ``delta2`` defaults to the midpoint of (0, sqrt2 - sqrt(2 - delta_tilde)).
    The bound values depend on the constants k, k1 and are diagnostic only.
    """
    if not 0 < delta < 0.5:
        raise ValueError("delta must lie in (0, 1/2)")
    if not 0 < delta_tilde < 1:
        raise ValueError("delta_tilde must lie in (0, 1)")
    if B < 2 or mu <= 0 or ebn0 <= 0 or k <= 0 or k1 <= 0:
        raise ValueError("need B >= 2 and positive mu, ebn0, k, k1")
    d2_hi = math.sqrt(2.0) - math.sqrt(2.0 - delta_tilde)
    if delta2 is None:
        delta2 = 0.5 * d2_hi
    elif not 0 < delta2 < d2_hi:
        raise ValueError(f"delta2 must lie in (0, {d2_hi})")
    S = mu * math.log2(B)
    low = 0.5 * (1.0 / ((1.0 + delta / 2.0) * LN2) - 1.0 / ebn0)
    gB = gap_level(B, delta_tilde, k1)
    high = (1.0 / ((1.0 - delta_tilde / 2.0) * LN2) - 1.0 / ebn0) / (2.0 * (1.0 - gB))
    if S < low:
        return PhaseResult("below", 4.0 * mse_decay_level(B, delta, k), low, high)
    if S > high:
        return PhaseResult("above", 1.0 - failure_gap(B, delta2), low, high)
    return PhaseResult("indeterminate", math.nan, low, high)


def wave_crossing_iteration(psi_trace, E, level):
    """First t with max_c psi_c^t <= E * level, or None."""
    mx = np.asarray(psi_trace).max(axis=1)
    hit = np.flatnonzero(mx <= E * level)
    return int(hit[0]) if hit.size else None
