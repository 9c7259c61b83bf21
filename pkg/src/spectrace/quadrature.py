"""Composite Gauss-Legendre rules on [0, 1].

Nodes and weights come from numpy's Legendre module; the panels are uniform.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre


@lru_cache(maxsize=16)
def _reference(p: int) -> tuple[np.ndarray, np.ndarray]:
    tau, om = legendre.leggauss(p)
    tau.setflags(write=False)
    om.setflags(write=False)
    return tau, om


@lru_cache(maxsize=8)
def _cumulative_matrix(p: int) -> np.ndarray:
    """S[i, j]: weight of f(tau_j) in int_{-1}^{tau_i} f, exact for degree < p."""
    tau, _ = _reference(p)
    vander = legendre.legvander(tau, p - 1)
    vint = np.empty((p, p))
    for j in range(p):
        c = np.zeros(p)
        c[j] = 1.0
        vint[:, j] = legendre.legval(tau, legendre.legint(c, lbnd=-1))
    S = vint @ np.linalg.inv(vander)
    S.setflags(write=False)
    return S


def panel_count_for_frequency(omega: float, minimum: int = 16) -> int:
    """Panels needed to resolve sin^2(omega t) with 8-point panels."""
    return max(minimum, int(np.ceil(4.0 * abs(omega) / np.pi)))


def composite_nodes(panels: int, p: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Flattened nodes and weights of the composite rule with `panels` panels."""
    tau, om = _reference(p)
    h = 1.0 / panels
    left = np.arange(panels) * h
    t = (left[:, None] + 0.5 * h * (tau + 1.0)).ravel()
    w = np.tile(0.5 * h * om, panels)
    return t, w


def integrate(f, panels: int = 16, p: int = 8) -> float:
    t, w = composite_nodes(panels, p)
    return float(np.dot(w, f(t)))


class CumulativeRule:
    """Running integrals F(t) = int_0^t f on a composite Gauss-Legendre grid.

    Values live on a (panels, p) node array; `cumulative` works on the last
    two axes so leading batch dimensions pass through.
    """

    def __init__(self, panels: int, p: int = 16):
        self.panels = panels
        self.p = p
        tau, om = _reference(p)
        self.h = 1.0 / panels
        left = np.arange(panels) * self.h
        self.t = left[:, None] + 0.5 * self.h * (tau + 1.0)
        self.w = 0.5 * self.h * om
        self._S = _cumulative_matrix(p)

    def total(self, f: np.ndarray) -> np.ndarray:
        return (f @ self.w).sum(axis=-1)

    def cumulative(self, f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return (running integral at every node, integral over [0, 1])."""
        local = (0.5 * self.h) * (f @ self._S.T)
        per_panel = f @ self.w
        start = np.cumsum(per_panel, axis=-1) - per_panel
        return start[..., None] + local, per_panel.sum(axis=-1)
