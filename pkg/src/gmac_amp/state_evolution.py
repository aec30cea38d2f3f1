"""Uncoupled and spatially coupled state evolution.

Convention for a trace of length T+1: entry t holds psi^t and the
quantities derived from it in the same iteration,

    gamma^t = W psi^t,  phi^t = sigma2 + mu_in gamma^t,
    tau_c^t = 1 / sum_r W_rc / phi_r^t,  psi^{t+1} = mmse(1 / tau^t),

with psi^0 = E.  In the uncoupled recursion tau^t = sigma2 + mu psi^t.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .coupling import mu_inner
from .priors import error_prob, mmse

TOL = 1e-8
MAX_ITERS = 10_000
_ROUNDOFF = 1e-12


@dataclass
class SEState:
    gamma: np.ndarray
    phi: np.ndarray
    tau: np.ndarray
    psi: np.ndarray
    t: int = 0


@dataclass
class UncoupledTrace:
    psi: np.ndarray       # (T+1,)
    tau: np.ndarray       # (T+1,)
    converged: bool

    @property
    def iters(self):
        return len(self.psi) - 1

    @property
    def psi_fp(self):
        return float(self.psi[-1])

    @property
    def tau_fp(self):
        return float(self.tau[-1])


@dataclass
class CoupledTrace:
    gamma: np.ndarray     # (T+1, R)
    phi: np.ndarray       # (T+1, R)
    tau: np.ndarray       # (T+1, C)
    psi: np.ndarray       # (T+1, C)
    converged: bool

    @property
    def iters(self):
        return len(self.psi) - 1

    @property
    def psi_fp(self):
        return self.psi[-1].copy()

    @property
    def tau_fp(self):
        return self.tau[-1].copy()

    def state(self, t):
        return SEState(self.gamma[t], self.phi[t], self.tau[t], self.psi[t], t)


# --- uncoupled -------------------------------------------------------------------

def se_uncoupled_step(psi, mu, sigma2, prior):
    return mmse(prior, 1.0 / (sigma2 + mu * psi))


def se_uncoupled_fixed_point(mu, sigma2, prior, tol=TOL, max_iters=MAX_ITERS, min_iters=0):
    """Iterate from psi = E until successive iterates differ by at most tol*E.

    ``min_iters`` keeps iterating past convergence (the AMP driver needs a
    trace of a given length).  Non-convergence is reported through
    ``converged`` rather than raised.
    """
    E = prior.E
    psi = [E]
    tau = [sigma2 + mu * E]
    converged = False
    for t in range(max(max_iters, min_iters)):
        nxt = float(mmse(prior, np.array([1.0 / tau[-1]]))[0])
        if nxt > psi[-1] + _ROUNDOFF * E:
            raise AssertionError(f"state evolution not monotone at t={t}: {nxt} > {psi[-1]}")
        done = abs(nxt - psi[-1]) <= tol * E
        psi.append(nxt)
        tau.append(sigma2 + mu * nxt)
        converged = converged or done
        if converged and t + 1 >= min_iters:
            break
    return UncoupledTrace(np.array(psi), np.array(tau), converged)


# --- coupled ---------------------------------------------------------------------

def _column_tau(W, phi):
    # columns with a single nonzero entry get phi_r / W_rc directly, so a
    # trivial base reproduces the uncoupled recursion bit for bit
    tau = 1.0 / (W.T @ (1.0 / phi))
    nz = W > 0
    single = nz.sum(axis=0) == 1
    if np.any(single):
        r = np.argmax(nz[:, single], axis=0)
        tau[single] = phi[r] / W[r, np.flatnonzero(single)]
    return tau


def se_coupled_state(psi, base, mu, sigma2, t=0):
    W = base.W
    gamma = W @ psi
    phi = sigma2 + mu_inner(base, mu) * gamma
    tau = _column_tau(W, phi)
    return SEState(gamma, phi, tau, np.asarray(psi, float), t)


def se_coupled_init(base, mu, sigma2, prior):
    return se_coupled_state(np.full(base.C, prior.E), base, mu, sigma2, 0)


def se_coupled_step(state, base, mu, sigma2, prior):
    psi = mmse(prior, 1.0 / state.tau)
    return se_coupled_state(psi, base, mu, sigma2, state.t + 1)


def se_coupled_fixed_point(base, mu, sigma2, prior, tol=TOL, max_iters=MAX_ITERS, min_iters=0):
    E = prior.E
    st = se_coupled_init(base, mu, sigma2, prior)
    hist = [st]
    converged = False
    for t in range(max(max_iters, min_iters)):
        nxt = se_coupled_step(st, base, mu, sigma2, prior)
        if np.any(nxt.psi > st.psi + _ROUNDOFF * E):
            raise AssertionError(f"coupled state evolution not monotone at t={t}")
        done = np.max(np.abs(nxt.psi - st.psi)) <= tol * E
        hist.append(nxt)
        st = nxt
        converged = converged or done
        if converged and t + 1 >= min_iters:
            break
    return CoupledTrace(
        np.array([h.gamma for h in hist]), np.array([h.phi for h in hist]),
        np.array([h.tau for h in hist]), np.array([h.psi for h in hist]), converged)


# --- error predictions ---------------------------------------------------------------

def predicted_uer(tau_vec, prior):
    """Mean over column blocks of the per-section MAP error at tau_c."""
    tau = np.atleast_1d(np.asarray(tau_vec, float))
    return float(np.mean(error_prob(prior, tau)))


def uer_mse_bound(psi_vec, E):
    """Upper bound (4/C) sum_c psi_c / E on the hard-decision error rate."""
    psi = np.atleast_1d(np.asarray(psi_vec, float))
    if np.any(psi < 0) or np.any(psi > E * (1 + 1e-12)):
        raise ValueError("psi entries must lie in [0, E]")
    return float(4.0 * psi.sum() / (psi.size * E))


def first_crossing(trace, delta):
    """First t with max_c tau_c^t <= max_c tau_c^FP + delta."""
    tau = np.asarray(trace.tau)
    tmax = tau.max(axis=1) if tau.ndim == 2 else tau
    hit = np.flatnonzero(tmax <= tmax[-1] + delta)
    return int(hit[0])


# --- csv ---------------------------------------------------------------------------

SE_CSV_HEADER = ["t", "block", "gamma", "phi", "tau", "psi"]


def write_se_csv(path_or_file, trace):
    """One row per (t, block); block labels are 1-based.  Row-block and
    column-block quantities share rows, blanks where a block index exceeds
    R or C."""
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    f = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(f)
        w.writerow(SE_CSV_HEADER)
        if isinstance(trace, UncoupledTrace):
            for t, (p, ta) in enumerate(zip(trace.psi, trace.tau)):
                w.writerow([t, 1, repr(float(p)), repr(float(ta)), repr(float(ta)), repr(float(p))])
            return
        R = trace.gamma.shape[1]
        C = trace.psi.shape[1]
        for t in range(trace.psi.shape[0]):
            for b in range(max(R, C)):
                row = [t, b + 1]
                row += [repr(float(trace.gamma[t, b])), repr(float(trace.phi[t, b]))] if b < R else ["", ""]
                row += [repr(float(trace.tau[t, b])), repr(float(trace.psi[t, b]))] if b < C else ["", ""]
                w.writerow(row)
    finally:
        if own:
            f.close()
