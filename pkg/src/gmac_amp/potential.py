"""Potential landscape of the uncoupled system.

    F(psi) = I(X; S_tau) + (1/(2 mu)) [ln(tau/sigma2) - mu psi / tau],  tau = sigma2 + mu psi

Its derivative is mu/(2 tau^2) * (psi - mmse(1/tau)), so stationary points
are exactly the fixed points of uncoupled state evolution.  Minimisers are
located as sign changes of the derivative on a grid and refined with Brent's
method on the derivative itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .priors import mmse, mutual_info

GRID_SIZE = 2 ** 12
LOG_POINTS = 256
REFINE_TOL = 1e-9


def _tau(mu, sigma2, psi):
    return sigma2 + mu * np.asarray(psi, float)


def potential(mu, sigma2, psi, prior):
    psi = np.asarray(psi, float)
    if np.any(psi < 0) or np.any(psi > prior.E * (1 + 1e-12)):
        raise ValueError("psi must lie in [0, E]")
    tau = _tau(mu, sigma2, psi)
    x = mu * psi / sigma2
    bracket = np.log1p(x) - mu * psi / tau
    out = mutual_info(prior, tau) + bracket / (2.0 * mu)
    return float(out) if np.ndim(out) == 0 else out


def stationarity_gap(mu, sigma2, psi, prior):
    """psi - mmse(1/tau); same sign as the potential derivative."""
    psi = np.asarray(psi, float)
    return psi - mmse(prior, 1.0 / _tau(mu, sigma2, psi))


def potential_derivative(mu, sigma2, psi, prior):
    psi = np.asarray(psi, float)
    tau = _tau(mu, sigma2, psi)
    out = mu / (2.0 * tau ** 2) * stationarity_gap(mu, sigma2, psi, prior)
    return float(out) if np.ndim(out) == 0 else out


def psi_grid(E, grid_size=GRID_SIZE, log_points=LOG_POINTS):
    """Uniform grid on [0, E] plus geometric points down to 1e-14 E."""
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    u = np.linspace(0.0, E, grid_size)
    g = np.geomspace(1e-14 * E, u[1], log_points)
    return np.unique(np.concatenate([u, g]))


@dataclass
class PotentialLandscape:
    mu: float
    sigma2: float
    prior: object
    grid: np.ndarray
    F: np.ndarray
    dF: np.ndarray


def landscape(mu, sigma2, prior, grid_size=GRID_SIZE):
    grid = psi_grid(prior.E, grid_size)
    return PotentialLandscape(mu, sigma2, prior, grid, potential(mu, sigma2, grid, prior),
                              potential_derivative(mu, sigma2, grid, prior))


def _refine(mu, sigma2, prior, a, b):
    f = lambda p: float(stationarity_gap(mu, sigma2, np.array([p]), prior)[0])
    return brentq(f, a, b, xtol=1e-15 * prior.E, rtol=4 * np.finfo(float).eps, maxiter=200)


def _crossings(mu, sigma2, prior, grid_size):
    grid = psi_grid(prior.E, grid_size)
    h = stationarity_gap(mu, sigma2, grid, prior)
    neg = h < 0
    up = np.flatnonzero(neg[:-1] & ~neg[1:])       # - to + : local minimum of F
    return grid, h, up


def minimizer_set(mu, sigma2, prior, grid_size=GRID_SIZE, refine_tol=REFINE_TOL):
    """Global minimisers of F on [0, E] and the minimum value.

    Every basin (negative-to-positive change of the derivative) is refined
    to machine precision; minimisers whose F lies within ``refine_tol`` of
    the smallest value are all returned, sorted ascending.
    """
    if grid_size < 2 ** 10:
        raise ValueError("grid_size must be at least 2**10")
    grid, h, up = _crossings(mu, sigma2, prior, grid_size)
    cands = []
    if h[0] >= 0:
        cands.append(0.0)            # derivative already non-negative at psi = 0
    for i in up:
        if h[i + 1] == 0.0:
            cands.append(float(grid[i + 1]))
        else:
            cands.append(_refine(mu, sigma2, prior, grid[i], grid[i + 1]))
    if not cands:
        # cannot happen for a proper prior (F' < 0 at 0, > 0 at E); fall back to the grid
        Fg = potential(mu, sigma2, grid, prior)
        cands = [float(grid[np.argmin(Fg)])]
    cands = np.array(sorted(set(cands)))
    Fc = np.atleast_1d(potential(mu, sigma2, cands, prior))
    Fmin = float(Fc.min())
    keep = cands[Fc <= Fmin + refine_tol]
    return [float(p) for p in keep], Fmin


@dataclass
class StationaryResult:
    psi: float
    found: bool


def largest_stationary(mu, sigma2, prior, grid_size=GRID_SIZE):
    """Largest root of the potential derivative (the uncoupled SE fixed point)."""
    grid, h, up = _crossings(mu, sigma2, prior, grid_size)
    if up.size == 0:
        return StationaryResult(0.0, bool(h[0] == 0.0))
    i = up[-1]
    if h[i + 1] == 0.0:
        return StationaryResult(float(grid[i + 1]), True)
    return StationaryResult(_refine(mu, sigma2, prior, grid[i], grid[i + 1]), True)


def tau_star(mu, sigma2, prior, grid_size=GRID_SIZE):
    """sigma2 + mu * (largest global minimiser of F)."""
    mins, _ = minimizer_set(mu, sigma2, prior, grid_size)
    return sigma2 + mu * max(mins)


def tau_bar(mu, sigma2, prior, omega, lam, epsilon=0.0, grid_size=GRID_SIZE):
    """sigma2 + theta mu (max minimiser at density theta mu + epsilon), theta = 1 + (omega-1)/lambda."""
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    theta = 1.0 + (omega - 1) / lam
    mins, _ = minimizer_set(theta * mu, sigma2, prior, grid_size)
    return sigma2 + theta * mu * (max(mins) + epsilon)
