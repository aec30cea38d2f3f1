"""Deterministic evaluation of single-section channel expectations.

For a section observed as ``S = X + sqrt(tau) Z`` with one active entry of
energy ``E`` the posterior depends only on ``g = E / tau``.  Both the
posterior-mean correlation and the log-partition term involve a sum of
``B - 1`` i.i.d. terms ``h(a Z_j)`` (``h = exp`` for the flat prior,
``h = cosh`` for the sign-modulated prior, ``a = sqrt(g)``).  Writing

    1 / (1 + x)   = int_0^inf exp(-u) exp(-u x) du
    ln(1 + x)     = int_0^inf (1 - exp(-u x)) exp(-u) / u du

turns the ``B - 1`` dimensional expectation into nested one dimensional
integrals of ``L(s)^(B-1)`` with ``L(s) = E exp(-s h(aZ))``.  All integrals
are trapezoid sums on uniform grids (spectrally accurate for these
integrands), and ``L`` is carried in the log domain so that ``B`` up to
2**20 and large ``g`` do not lose precision.

Quantities are normalised to ``E = 1``.
"""

from __future__ import annotations

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import expit, logsumexp

FLAT = "flat"
BINARY = "binary"

_H = 0.05          # lattice spacing in log(u) and log(s)
_V_HI = 5.0        # exp(-e^5) is negligible
_Z1_SPAN = 10.0
_DZ1 = 0.01


def _z_grid(a, kind):
    dz = min(0.05, 0.25 / max(a, 1e-12))
    hi = a + 12.0
    lo = -14.0 if kind == FLAT else -hi
    z = np.arange(lo, hi + dz, dz)
    logw = -0.5 * z * z - 0.5 * np.log(2 * np.pi) + np.log(dz)
    return z, logw


def _log_laplace(sig, a, kind):
    """Return (ln L, ln(1-L)) at s = exp(sig), L(s) = E exp(-s h(aZ))."""
    z, logw = _z_grid(a, kind)
    if kind == FLAT:
        lnh = a * z
    else:
        az = np.abs(a * z)
        lnh = az + np.log1p(np.exp(-2 * az)) - np.log(2.0)
    lnL = np.empty_like(sig)
    ln1mL = np.empty_like(sig)
    step = max(1, 2_000_000 // z.size)
    for i in range(0, sig.size, step):
        x = sig[i:i + step, None] + lnh[None, :]
        t = np.exp(np.minimum(x, 700.0))
        lnL[i:i + step] = logsumexp(-t + logw, axis=1)
        with np.errstate(divide="ignore"):
            lt = np.where(x < -30.0, x, np.log(-np.expm1(-t)))
        ln1mL[i:i + step] = logsumexp(lt + logw, axis=1)
    # ln L from ln(1-L) when L is close to 1, avoiding cancellation
    close = ln1mL < np.log(0.5)
    lnL[close] = np.log1p(-np.exp(ln1mL[close]))
    return lnL, ln1mL


def _kernels(kappa_lo, kappa_hi, a, B, kind):
    """Kc(kappa) = E_S[c S / (1 + c S)] and J(kappa) = E_S ln(1 + c S), c = e^kappa.

    S is the sum of B-1 i.i.d. h(aZ).  Returned on a lattice of kappa.
    """
    h = _H
    v_lo = -100.0 - np.log(B)
    iv = np.arange(np.floor(v_lo / h), np.ceil(_V_HI / h) + 1).astype(np.int64)
    jk = np.arange(np.floor(kappa_lo / h) - 2, np.ceil(kappa_hi / h) + 3).astype(np.int64)
    ks = np.arange(iv[0] + jk[0], iv[-1] + jk[-1] + 1)
    lnL, _ = _log_laplace(ks * h, a, kind)
    lnLp = (B - 1) * lnL
    Q = -np.expm1(lnLp)                      # 1 - L^(B-1)
    u = np.exp(iv * h)
    eu = np.exp(-u)
    Kc = np.correlate(Q, h * u * eu, mode="valid")
    J = np.correlate(Q, h * eu, mode="valid")
    return jk * h, Kc, J


def _z1_grid():
    z = np.arange(-_Z1_SPAN, _Z1_SPAN + _DZ1 / 2, _DZ1)
    w = np.exp(-0.5 * z * z)
    return z, w / w.sum()


def _lncosh(b):
    ab = np.abs(b)
    return ab + np.log1p(np.exp(-2 * ab)) - np.log(2.0)


def section_mmse_mi(g, B, kind):
    """Normalised mmse and mutual information (nats) at section SNR g = E/tau."""
    if g < 0:
        raise ValueError("g must be non-negative")
    if g == 0:
        return (1.0 - 1.0 / B if kind == FLAT else 1.0), 0.0
    a = np.sqrt(g)
    z1, w1 = _z1_grid()
    if kind == FLAT:
        if B == 1:
            return 0.0, 0.0
        kappa = -g - a * z1
        lat, Kc, J = _kernels(kappa.min(), kappa.max(), a, B, kind)
        Kc_i = CubicSpline(lat, Kc)(kappa)
        J_i = CubicSpline(lat, J)(kappa)
        m = float(np.dot(w1, np.clip(Kc_i, 0.0, 1.0)))
        mi = float(np.log(B) - np.dot(w1, J_i))
        return m, mi
    b1 = g + a * z1
    one_m_tanh = 2.0 * expit(-2.0 * b1)
    lch = _lncosh(b1)
    if B == 1:
        m = float(np.dot(w1, one_m_tanh))
        mi = float(g - np.dot(w1, lch))
        return m, mi
    kappa = -lch
    lat, Kc, J = _kernels(kappa.min(), kappa.max(), a, B, kind)
    Kc_i = np.clip(CubicSpline(lat, Kc)(kappa), 0.0, 1.0)
    J_i = CubicSpline(lat, J)(kappa)
    m = float(np.dot(w1, one_m_tanh + (1.0 - one_m_tanh) * Kc_i))
    mi = float(np.log(B) + g - np.dot(w1, lch + J_i))
    return m, mi
