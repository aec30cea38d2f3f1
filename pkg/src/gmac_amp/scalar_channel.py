"""Tabulated single-section channel functionals.

State evolution, the potential landscape and the region bisection evaluate
the normalised mmse and the mutual information many thousands of times.  The
deterministic quadrature in ``_quadrature`` costs ~0.1-1 s per point, so we
tabulate both on a log grid of the section SNR ``g = E / tau`` once per
``(kind, B)`` and interpolate:

* ``ln m`` is a cubic spline in ``ln g`` (PCHIP if the spline fails a
  monotonicity scan), which keeps the SE map monotone.
* ``I`` is a cubic Hermite interpolant in ``ln g`` whose slopes come from
  the exact identity ``dI/dg = m / 2``.

Tables are cached in memory and on disk (``$GMAC_AMP_CACHE`` or
``~/.cache/gmac_amp``).
"""

from __future__ import annotations

import os
import threading
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicHermiteSpline, CubicSpline, PchipInterpolator

from . import _quadrature

ENGINE_VERSION = 1
G_MIN = 1e-4
G_MAX = 400.0
N_NODES = 160
_M_FLOOR = 1e-300

_lock = threading.Lock()
_tables = {}


def cache_dir():
    d = os.environ.get("GMAC_AMP_CACHE")
    return Path(d) if d else Path.home() / ".cache" / "gmac_amp"


class ChannelTable:
    """Interpolated m(g) and I(g) for one (kind, B).  Both are normalised to E=1."""

    def __init__(self, kind, B, g, m, mi):
        self.kind = kind
        self.B = int(B)
        self.g = np.asarray(g, float)
        self.m_nodes = np.asarray(m, float)
        self.mi_nodes = np.asarray(mi, float)
        self.m0 = 1.0 - 1.0 / B if kind == _quadrature.FLAT else 1.0
        self.mi_max = np.log(B) + (np.log(2.0) if kind == _quadrature.BINARY else 0.0)
        self.trivial = kind == _quadrature.FLAT and B == 1
        if self.trivial:
            return
        x = np.log(self.g)
        lm = np.log(np.maximum(self.m_nodes, _M_FLOOR))
        spl = CubicSpline(x, lm)
        fine = np.linspace(x[0], x[-1], 40 * x.size)
        if np.any(np.diff(spl(fine)) > 0):
            spl = PchipInterpolator(x, lm)
        self._lnm = spl
        self._mi = CubicHermiteSpline(x, self.mi_nodes, 0.5 * self.g * self.m_nodes)

    def mmse(self, g):
        """Normalised mmse at SNR g (array-friendly)."""
        g = np.asarray(g, float)
        if self.trivial:
            return np.zeros_like(g)
        out = np.empty_like(g)
        lo = g < G_MIN
        hi = g > G_MAX
        mid = ~(lo | hi)
        out[mid] = np.exp(self._lnm(np.log(g[mid])))
        out[lo] = self.m0 + (self.m_nodes[0] - self.m0) * g[lo] / G_MIN
        out[hi] = 0.0
        return np.clip(out, 0.0, self.m0)

    def mi(self, g):
        """Mutual information in nats at SNR g."""
        g = np.asarray(g, float)
        if self.trivial:
            return np.zeros_like(g)
        out = np.empty_like(g)
        lo = g < G_MIN
        hi = g > G_MAX
        mid = ~(lo | hi)
        out[mid] = self._mi(np.log(g[mid]))
        # trapezoid of m/2 from 0, m linear on [0, G_MIN]
        ml = self.m0 + (self.m_nodes[0] - self.m0) * g[lo] / G_MIN
        out[lo] = 0.25 * g[lo] * (self.m0 + ml)
        out[hi] = self.mi_max
        return np.clip(out, 0.0, self.mi_max)


def _compute_nodes(kind, B):
    g = np.geomspace(G_MIN, G_MAX, N_NODES)
    m = np.empty_like(g)
    mi = np.empty_like(g)
    for i, gi in enumerate(g):
        m[i], mi[i] = _quadrature.section_mmse_mi(float(gi), B, kind)
    return g, m, mi


def _path(kind, B):
    return cache_dir() / f"{kind}_B{B}_e{ENGINE_VERSION}_n{N_NODES}.npz"


def channel_table(kind, B, use_disk=True):
    key = (kind, int(B))
    with _lock:
        tab = _tables.get(key)
        if tab is not None:
            return tab
        if kind == _quadrature.FLAT and B == 1:
            tab = ChannelTable(kind, 1, [G_MIN], [0.0], [0.0])
            _tables[key] = tab
            return tab
        path = _path(kind, B)
        data = None
        if use_disk and path.exists():
            try:
                with np.load(path) as z:
                    data = z["g"], z["m"], z["mi"]
            except (OSError, KeyError, ValueError):
                data = None
        if data is None:
            data = _compute_nodes(kind, int(B))
            if use_disk:
                try:
                    path.parent.mkdir(parents=True, exist_ok=True)
                    tmp = path.with_suffix(f".{os.getpid()}.tmp.npz")
                    np.savez(tmp, g=data[0], m=data[1], mi=data[2])
                    os.replace(tmp, path)
                except OSError:
                    pass
        tab = ChannelTable(kind, B, *data)
        _tables[key] = tab
        return tab
