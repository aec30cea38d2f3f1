"""Section priors and the scalar functionals of the single-section channel.

A section is a length-B vector with exactly one nonzero entry of magnitude
sqrt(E).  Two codebooks are supported:

* ``flat``   - the nonzero entry is +sqrt(E), location uniform.
* ``binary`` - location uniform and sign uniform (one extra payload bit).

The functionals (mmse, mutual information, error probability) depend on the
noise level only through ``g = E / tau``; they are evaluated by deterministic
quadrature (see ``_quadrature``) and read from a cached table by default.
A Monte Carlo route is kept as an independent check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import log_ndtr, logsumexp, ndtr, erfc

from . import _quadrature
from .scalar_channel import channel_table

FLAT = _quadrature.FLAT
BINARY = _quadrature.BINARY
KINDS = (FLAT, BINARY)

GH_NODES = 200
MC_SAMPLES = 100_000


@dataclass(frozen=True)
class SectionPrior:
    kind: str = FLAT
    B: int = 4
    E: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown prior kind {self.kind!r}, expected one of {KINDS}")
        if int(self.B) != self.B or self.B < 1:
            raise ValueError("B must be a positive integer")
        if self.B & (self.B - 1):
            raise ValueError("B must be a power of two")
        if not self.E > 0:
            raise ValueError("E must be positive")
        object.__setattr__(self, "B", int(self.B))
        object.__setattr__(self, "E", float(self.E))

    @property
    def payload_bits(self):
        bits = float(np.log2(self.B))
        return bits + 1.0 if self.kind == BINARY else bits

    @property
    def alphabet_size(self):
        return 2 * self.B if self.kind == BINARY else self.B

    def noise_var(self, ebn0_db):
        """sigma^2 = N0/2 for a given Eb/N0 in dB, with E = Eb * payload_bits."""
        if self.payload_bits == 0:
            raise ValueError("Eb/N0 is undefined for a zero-payload section")
        ebn0 = 10.0 ** (np.asarray(ebn0_db, float) / 10.0)
        return self.E / (2.0 * ebn0 * self.payload_bits)

    def ebn0_db(self, sigma2):
        return 10.0 * np.log10(self.E / (2.0 * sigma2 * self.payload_bits))


def _check_positive(x, name):
    a = np.asarray(x, float)
    if np.any(~(a > 0)):
        raise ValueError(f"{name} must be positive")
    return a


# --- sampling --------------------------------------------------------------

def sample_sections(prior, L, rng):
    """(L, B) array of i.i.d. sections."""
    x = np.zeros((L, prior.B))
    loc = rng.integers(0, prior.B, size=L)
    amp = np.sqrt(prior.E)
    if prior.kind == BINARY:
        sgn = np.where(rng.integers(0, 2, size=L) == 1, 1.0, -1.0)
        x[np.arange(L), loc] = amp * sgn
    else:
        x[np.arange(L), loc] = amp
    return x


def sample_section(prior, rng):
    return sample_sections(prior, 1, rng)[0]


# --- denoiser and MAP ---------------------------------------------------------

def denoise(prior, s, tau):
    """Posterior mean of a section given S = X + sqrt(tau) Z.

    ``s`` has shape (..., B); ``tau`` is a scalar or broadcasts against
    ``s.shape[:-1]``.
    """
    s = np.asarray(s, float)
    tau = _check_positive(tau, "tau")
    rt = np.sqrt(prior.E)
    b = s * (rt / tau)[..., None] if tau.ndim else s * (rt / tau)
    if prior.kind == FLAT:
        b = b - b.max(axis=-1, keepdims=True)
        e = np.exp(b)
        return rt * e / e.sum(axis=-1, keepdims=True)
    mx = np.abs(b).max(axis=-1, keepdims=True)
    ep = np.exp(b - mx)
    em = np.exp(-b - mx)
    return rt * (ep - em) / (ep + em).sum(axis=-1, keepdims=True)


def hard_decision(prior, s, tau=1.0):
    """MAP section estimate; ties go to the lowest index.

    With uniform location (and sign) the MAP rule does not depend on tau.
    """
    _check_positive(tau, "tau")
    s = np.asarray(s, float)
    out = np.zeros_like(s)
    rt = np.sqrt(prior.E)
    if prior.kind == FLAT:
        j = np.argmax(s, axis=-1)
        np.put_along_axis(out, j[..., None], rt, axis=-1)
    else:
        j = np.argmax(np.abs(s), axis=-1)[..., None]
        sj = np.take_along_axis(s, j, axis=-1)
        np.put_along_axis(out, j, np.where(sj < 0, -rt, rt), axis=-1)
    return out


# --- scalar functionals -------------------------------------------------------

def _mc_section(prior, g, n_samples, rng, chunk=20_000):
    """Monte Carlo estimates of (m, se_m, I, se_I) at SNR g, normalised to E=1."""
    a = np.sqrt(g)
    B = prior.B
    m_sum = m_sq = i_sum = i_sq = 0.0
    done = 0
    while done < n_samples:
        k = min(chunk, n_samples - done)
        b = a * rng.standard_normal((k, B))
        b[:, 0] += g
        if prior.kind == FLAT:
            ls = logsumexp(b, axis=1)
            corr = np.exp(b[:, 0] - ls)
            mi = g + np.log(B) - ls
        else:
            mx = np.abs(b).max(axis=1, keepdims=True)
            ep = np.exp(b - mx)
            em = np.exp(-b - mx)
            tot = (ep + em).sum(axis=1)
            corr = (ep[:, 0] - em[:, 0]) / tot
            mi = np.log(B) + g - (np.log(tot / 2) + mx[:, 0])
        loss = 1.0 - corr
        m_sum += loss.sum()
        m_sq += (loss ** 2).sum()
        i_sum += mi.sum()
        i_sq += (mi ** 2).sum()
        done += k
    n = float(n_samples)
    m = m_sum / n
    i = i_sum / n
    se_m = np.sqrt(max(m_sq / n - m * m, 0.0) / n)
    se_i = np.sqrt(max(i_sq / n - i * i, 0.0) / n)
    return m, se_m, i, se_i


def _functional(prior, g, which, method, n_samples, seed):
    g = np.asarray(g, float)
    if method == "table":
        tab = channel_table(prior.kind, prior.B)
        return tab.mmse(g) if which == "m" else tab.mi(g)
    flat = np.atleast_1d(g).ravel()
    out = np.empty_like(flat)
    for i, gi in enumerate(flat):
        if method == "quadrature":
            m, mi = _quadrature.section_mmse_mi(float(gi), prior.B, prior.kind)
        elif method == "mc":
            rng = np.random.default_rng(seed)
            m, _, mi, _ = _mc_section(prior, float(gi), n_samples, rng)
        else:
            raise ValueError(f"unknown method {method!r}")
        out[i] = m if which == "m" else mi
    return out.reshape(g.shape) if g.ndim else float(out[0])


def mmse(prior, inv_tau, method="table", n_samples=MC_SAMPLES, seed=0):
    """E ||X - E[X|S]||^2 for S = X + sqrt(tau) Z, as a function of 1/tau."""
    inv_tau = _check_positive(inv_tau, "inv_tau")
    m = _functional(prior, prior.E * inv_tau, "m", method, n_samples, seed)
    return prior.E * m


def mutual_info(prior, tau, method="table", n_samples=MC_SAMPLES, seed=0):
    """I(X; S) in nats."""
    tau = _check_positive(tau, "tau")
    return _functional(prior, prior.E / tau, "i", method, n_samples, seed)


def mmse_mc(prior, inv_tau, n_samples=MC_SAMPLES, rng=None):
    """Monte Carlo (mmse, standard error)."""
    rng = np.random.default_rng(0) if rng is None else rng
    m, se, _, _ = _mc_section(prior, prior.E * float(inv_tau), n_samples, rng)
    return prior.E * m, prior.E * se


def mutual_info_mc(prior, tau, n_samples=MC_SAMPLES, rng=None):
    """Monte Carlo (I, standard error) in nats."""
    rng = np.random.default_rng(0) if rng is None else rng
    _, _, i, se = _mc_section(prior, prior.E / float(tau), n_samples, rng)
    return i, se


_gh = None


def _hermite():
    global _gh
    if _gh is None:
        x, w = np.polynomial.hermite_e.hermegauss(GH_NODES)
        _gh = x, w / np.sqrt(2 * np.pi)
    return _gh


def _pe_binary_one(a, B):
    # P(error) = P(a+Z<0) + int_{y>0} phi(y-a) (1 - erf(y/sqrt2)^(B-1)) dy
    if B == 1:
        return float(ndtr(-a))

    def f(y):
        lerf = np.log1p(-erfc(y / np.sqrt(2.0)))
        return np.exp(-0.5 * (y - a) ** 2) / np.sqrt(2 * np.pi) * -np.expm1((B - 1) * lerf)

    hi = a + 40.0
    pts = [p for p in (a,) if 0 < p < hi]
    val, _ = integrate.quad(f, 0.0, hi, points=pts or None, limit=400,
                            epsabs=1e-15, epsrel=1e-11)
    return float(ndtr(-a) + val)


def error_prob(prior, tau):
    """Probability that the MAP section decision is wrong at noise level tau."""
    tau = _check_positive(tau, "tau")
    a = np.sqrt(prior.E / tau)
    B = prior.B
    if prior.kind == FLAT:
        if B == 1:
            return np.zeros_like(a) if a.ndim else 0.0
        x, w = _hermite()
        lp = log_ndtr(np.atleast_1d(a).ravel()[:, None] + x[None, :])
        p = (-np.expm1((B - 1) * lp)) @ w
        p = np.clip(p, 0.0, 1.0)
        return p.reshape(a.shape) if a.ndim else float(p[0])
    flat = np.atleast_1d(a).ravel()
    p = np.array([_pe_binary_one(float(v), B) for v in flat])
    p = np.clip(p, 0.0, 1.0)
    return p.reshape(a.shape) if a.ndim else float(p[0])
