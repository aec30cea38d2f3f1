"""AMP decoding with SE-prescribed coefficients.

Iteration t (t = 0, 1, ..., T):

    q^t     = y - A x^t + nu^t o q^{t-1}          (nu^0 = 0, x^0 = 0)
    s^t     = x^t + (S^t o A)^T q^t
    x^{t+1} = denoise(s^t, tau^t)

The message estimate is the sectionwise MAP decision on s^T, i.e. the
decision "after T+1 iterations".  For the coupled decoder nu and S are
block constant:

    nu_i^t  = mu_in gamma^t_{r(i)} / phi^{t-1}_{r(i)}
    S_ij^t  = tau^t_{c(j)} / phi^t_{r(i)}

The i.i.d. decoder is a separate, scalar-coefficient implementation.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .coupling import mu_inner
from .large_payload import sc_design_params, wave_iteration_bound
from .priors import FLAT, denoise, hard_decision
from .state_evolution import (MAX_ITERS, TOL, CoupledTrace, UncoupledTrace, _column_tau, first_crossing,
                              predicted_uer, se_coupled_fixed_point,
                              se_uncoupled_fixed_point, uer_mse_bound)

EXPLOSION_FACTOR = 1e6
COEFFICIENTS = ("se", "online")
_PHI_FLOOR = 1e-3      # online phi never drops below this fraction of sigma2


class AMPDivergence(RuntimeError):
    """Residual blew up or went non-finite."""


# --- stop rules -------------------------------------------------------------------

@dataclass(frozen=True)
class FixedT:
    T: int

    def resolve(self, trace, **_):
        if self.T < 0:
            raise ValueError("T must be non-negative")
        return int(self.T)


@dataclass(frozen=True)
class SEConverged:
    """Stop at the first t with max_c tau_c^t <= max_c tau_c^FP + delta."""
    delta: float = 1e-6

    def resolve(self, trace, **_):
        return first_crossing(trace, self.delta)


@dataclass(frozen=True)
class SEBoundT:
    """Run ceil(lambda * omega_star / (2 omega)) iterations (flat prior, coupled design)."""

    def resolve(self, trace, base=None, prior=None, mu=None, sigma2=None, **_):
        if base is None or prior is None or prior.kind != FLAT or prior.B < 2:
            raise ValueError("SEBoundT needs a coupled flat-prior configuration with B >= 2")
        ebn0 = prior.E / (2.0 * sigma2 * prior.payload_bits)
        th = sc_design_params(mu, prior.B, ebn0, base.omega, base.lam)
        if not th.feasible:
            raise ValueError("spectral efficiency outside the coupled window; no iteration bound")
        return wave_iteration_bound(base.lam, th.omega_star, base.omega)


def parse_stop_rule(text):
    """'fixed:T', 'se:delta' or 'bound'."""
    text = text.strip().lower()
    if text.startswith("fixed:"):
        return FixedT(int(text.split(":", 1)[1]))
    if text == "se":
        return SEConverged()
    if text.startswith("se:"):
        return SEConverged(float(text.split(":", 1)[1]))
    if text == "bound":
        return SEBoundT()
    raise ValueError(f"unknown stop rule {text!r}")


# --- results ----------------------------------------------------------------------

@dataclass
class TrialResult:
    seed: object = None
    uer: float = math.nan
    predicted_uer: float = math.nan
    mse_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))
    se_psi_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))
    uer_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iterations_run: int = 0
    mse_bound: float = math.nan
    x_hat: np.ndarray = None
    state: object = None


@dataclass
class AMPState:
    x: np.ndarray
    q: np.ndarray
    q_prev: np.ndarray
    s: np.ndarray
    t: int


def uer(x_hat, x_true, L=None, B=None):
    """Fraction of sections that differ anywhere."""
    a = np.asarray(x_hat)
    b = np.asarray(x_true)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if L is not None:
        a = a.reshape(L, -1)
        b = b.reshape(L, -1)
    elif a.ndim == 1:
        raise ValueError("pass L (and B) for flat message vectors")
    return float(np.mean(np.any(a != b, axis=-1)))


def harden(state, prior, L, B):
    """Sectionwise MAP decision on the effective observation."""
    return hard_decision(prior, state.s.reshape(L, B)).ravel()


def _check(v, q0norm, t):
    if not np.all(np.isfinite(v)):
        raise AMPDivergence(f"non-finite values at iteration {t}")
    nq = np.linalg.norm(v)
    if q0norm > 0 and nq > EXPLOSION_FACTOR * q0norm:
        raise AMPDivergence(f"residual norm {nq:.3g} exceeds {EXPLOSION_FACTOR:g} x initial at iteration {t}")


def _psi_hat(x, prior, L, B):
    """Per-section posterior variance E - ||x_l||^2 of the soft estimate."""
    return np.clip(prior.E - np.sum(x.reshape(L, B) ** 2, axis=1), 0.0, prior.E)


def _finish(prior, L, B, s, x_true, mse, uer_tr, psi_bar, T, predicted, bound):
    x_hat = hard_decision(prior, s.reshape(L, B)).ravel()
    res = TrialResult(iterations_run=T, predicted_uer=predicted, mse_bound=bound, x_hat=x_hat,
                      se_psi_trace=np.asarray(psi_bar))
    if x_true is not None:
        res.uer = uer(x_hat, x_true, L, B)
        res.mse_trace = np.asarray(mse)
        res.uer_trace = np.asarray(uer_tr)
    return res


def amp_iterate_iid(y, op, prior, mu, sigma2, max_iters=MAX_ITERS, stop_rule=None, x_true=None,
                    onsager=True, trace=None, tol=TOL, coefficients="se"):
    """AMP with an i.i.d. design and scalar coefficients.

    ``coefficients="se"`` takes tau and psi from the SE trace; ``"online"``
    uses tau = ||q||^2 / n (floored like the coupled phi) and psi = E - mean ||x_l||^2 instead.
    """
    y = np.asarray(y, float)
    if y.shape != (op.n,):
        raise ValueError(f"y must have shape ({op.n},)")
    if coefficients not in COEFFICIENTS:
        raise ValueError(f"coefficients must be one of {COEFFICIENTS}")
    L, B = op.L, op.B
    stop_rule = SEConverged() if stop_rule is None else stop_rule
    if trace is None:
        trace = se_uncoupled_fixed_point(mu, sigma2, prior, tol, max_iters)
    T = min(stop_rule.resolve(trace, prior=prior, mu=mu, sigma2=sigma2), max_iters)
    if len(trace.psi) < T + 2:
        trace = se_uncoupled_fixed_point(mu, sigma2, prior, tol, max_iters=T + 1, min_iters=T + 1)
    psi, tau = trace.psi, trace.tau
    x = np.zeros(L * B)
    q_prev = np.zeros(op.n)
    mse, uer_tr = [], [math.nan]
    q0 = None
    s = None
    for t in range(T + 1):
        if x_true is not None:
            mse.append(float(np.sum((x - x_true) ** 2) / L))
        if coefficients == "se":
            psi_t, tau_prev = psi[t], (tau[t - 1] if t > 0 else None)
        else:
            psi_t = float(_psi_hat(x, prior, L, B).mean())
        nu = mu * psi_t / tau_prev if (t > 0 and onsager) else 0.0
        q = y - op.forward(x) + nu * q_prev
        if q0 is None:
            q0 = np.linalg.norm(q)
        _check(q, q0, t)
        if coefficients == "se":
            tau_t = tau[t]
        else:
            # same expression as the coupled decoder with a single row block
            tau_t = max(float(np.mean(q ** 2)), _PHI_FLOOR * sigma2)
        s = x + op.adjoint(q)
        _check(s, 0.0, t)
        if x_true is not None:
            uer_tr.append(uer(hard_decision(prior, s.reshape(L, B)), x_true.reshape(L, B)))
        x = denoise(prior, s.reshape(L, B), tau_t).ravel()
        q_prev = q
        tau_prev = tau_t
    if x_true is not None:
        mse.append(float(np.sum((x - x_true) ** 2) / L))
    res = _finish(prior, L, B, s, x_true, mse, uer_tr, psi[:T + 2], T,
                  predicted_uer([tau[T]], prior), uer_mse_bound([psi[T + 1]], prior.E))
    res.state = AMPState(x, q_prev, q_prev, s, T)
    return res


def amp_iterate_sc(y, op, base, prior, mu, sigma2, max_iters=MAX_ITERS, stop_rule=None, x_true=None,
                   onsager=True, coefficients="se", trace=None, tol=TOL):
    """Spatially coupled AMP with block-constant coefficients.

    ``coefficients="se"`` takes them from the deterministic SE trace.
    ``"online"`` measures them on the run: psi_c = E - mean ||x_l||^2 over the
    sections of column block c feeds the Onsager term, and phi_r = ||q_r||^2 / M_r
    over the rows of row block r gives tau and the adjoint scaling.  The
    measured phi absorbs the block-to-block spread of the residual energy,
    which at small block sizes is far larger than in the i.i.d. case.
    """
    y = np.asarray(y, float)
    if y.shape != (op.n,):
        raise ValueError(f"y must have shape ({op.n},)")
    if coefficients not in COEFFICIENTS:
        raise ValueError(f"coefficients must be one of {COEFFICIENTS}")
    L, B = op.L, op.B
    R, C = base.R, base.C
    rb = op.row_block
    sec_block = op.col_block[::B]
    mu_in = mu_inner(base, mu)
    stop_rule = SEConverged() if stop_rule is None else stop_rule
    if trace is None:
        trace = se_coupled_fixed_point(base, mu, sigma2, prior, tol, max_iters)
    T = min(stop_rule.resolve(trace, base=base, prior=prior, mu=mu, sigma2=sigma2), max_iters)
    if len(trace.psi) < T + 2:
        trace = se_coupled_fixed_point(base, mu, sigma2, prior, tol, max_iters=T + 1, min_iters=T + 1)
    x = np.zeros(L * B)
    q_prev = np.zeros(op.n)
    mse, uer_tr = [], [math.nan]
    q0 = None
    s = None
    phi_prev = None
    for t in range(T + 1):
        if x_true is not None:
            mse.append(float(np.sum((x - x_true) ** 2) / L))
        if coefficients == "se":
            gamma = trace.gamma[t]
        else:
            psi_hat = _psi_hat(x, prior, L, B).reshape(C, -1).mean(axis=1)
            gamma = base.W @ psi_hat
        if t > 0 and onsager:
            nu = (mu_in * gamma / phi_prev)[rb]
        else:
            nu = 0.0
        q = y - op.forward(x) + nu * q_prev
        if q0 is None:
            q0 = np.linalg.norm(q)
        _check(q, q0, t)
        if coefficients == "se":
            phi, tau = trace.phi[t], trace.tau[t]
        else:
            phi = np.maximum((q.reshape(R, -1) ** 2).mean(axis=1), _PHI_FLOOR * sigma2)
            tau = _column_tau(base.W, phi)
        S = tau[None, :] / phi[:, None]
        s = x + op.adjoint_scaled(q, S)
        _check(s, 0.0, t)
        if x_true is not None:
            uer_tr.append(uer(hard_decision(prior, s.reshape(L, B)), x_true.reshape(L, B)))
        x = denoise(prior, s.reshape(L, B), tau[sec_block]).ravel()
        q_prev = q
        phi_prev = phi
    if x_true is not None:
        mse.append(float(np.sum((x - x_true) ** 2) / L))
    psi_bar = trace.psi[:T + 2].mean(axis=1)
    res = _finish(prior, L, B, s, x_true, mse, uer_tr, psi_bar, T,
                  predicted_uer(trace.tau[T], prior), uer_mse_bound(trace.psi[T + 1], prior.E))
    res.state = AMPState(x, q_prev, q_prev, s, T)
    return res


TRIAL_CSV_HEADER = ["t", "empirical_mse", "se_psi_bar", "uer_if_hardened"]


def write_trial_csv(path_or_file, result):
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    f = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(f)
        w.writerow(TRIAL_CSV_HEADER)
        n = len(result.se_psi_trace)
        for t in range(n):
            m = result.mse_trace[t] if t < len(result.mse_trace) else math.nan
            u = result.uer_trace[t] if t < len(result.uer_trace) else math.nan
            w.writerow([t, "" if math.isnan(m) else repr(float(m)),
                        repr(float(result.se_psi_trace[t])), "" if math.isnan(u) else repr(float(u))])
    finally:
        if own:
            f.close()
