"""Eigenvalues of the channel problems with the potential switched on.

    -y'' + (gamma + q(t)) y = mu y,  y(0) = 0,  y'(1) = (mu - 1/mu) y(1)

Two routes are used.

Shooting: a fixed-step fourth-order Magnus integrator for y(0) = 0,
y'(0) = 1, and delta_fn(mu) = y'(1) - (mu - 1/mu) y(1). Principal and
negative eigenvalues are bracketed with the Weyl bound and refined with
Brent's method on delta_fn. The integrator is exact for constant potentials.

Phase deviation: for oscillatory modes the shift d = mu - lam is tiny
compared with lam, so mu itself is never formed in the iteration. With the
base root x (lam = gamma + x^2) and y = rho sin(x t + phi), the phase obeys

    phi' = -((q - d) / x) sin^2(x t + phi),  phi(0) = 0,

and the boundary condition turns into a scalar equation E(d) = 0 in terms of
phi(1) and the long-double offset u = x - pi m. The phase profile is found
by Picard iteration on a composite Gauss-Legendre grid, with a Newton solve
for d at every sweep, many modes at once.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .charroots import ChannelSpectrum
from .errors import BracketError, NonConvergenceError, PairingError, PoleProximityError, SpecError
from .model import Branch, ChannelPotential, EigenvalueRecord, PotentialSpec
from .quadrature import CumulativeRule

EPS0 = 1e-6
DEFAULT_STEPS = 4096
_SQRT3 = math.sqrt(3.0)
_GAUSS2 = (0.5 - _SQRT3 / 6.0, 0.5 + _SQRT3 / 6.0)
# growth exponent above which integrate_ivp reports scaled values
_LOG_OVERFLOW = 600.0


@dataclass(frozen=True)
class ShootingResult:
    """Boundary data of the solution with y(0) = 0, y'(0) = 1.

    When the solution grows beyond float range the stored values are scaled:
    the true ones are y1 * exp(log_scale) and yp1 * exp(log_scale).
    """

    y1: float
    yp1: float
    steps: int
    estimated_error: float
    log_scale: float = 0.0


def _potential(q_k) -> Callable:
    if q_k is None:
        return ChannelPotential()
    if isinstance(q_k, (int, float)):
        return ChannelPotential.constant(float(q_k))
    return q_k


def _shoot(gamma: float, q: Callable, lam: np.ndarray, n: int):
    """Scaled (y1, yp1, log_scale) for an array of lam values.

    Each Magnus step is multiplied by exp(-h sqrt(max(kappa_bar, 0))), which
    is smooth in lam, so the scaled shooting function stays continuous and
    its zeros are unchanged.
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    h = 1.0 / n
    left = np.arange(n) * h
    q1 = np.asarray(q(left + _GAUSS2[0] * h), dtype=float)
    q2 = np.asarray(q(left + _GAUSS2[1] * h), dtype=float)
    k1 = (gamma + q1)[:, None] - lam[None, :]
    k2 = (gamma + q2)[:, None] - lam[None, :]
    kbar = 0.5 * (k1 + k2)
    a = (_SQRT3 / 12.0) * h * h * (k1 - k2)
    s2 = a * a + h * h * kbar
    root = np.sqrt(np.abs(s2))
    with np.errstate(over="ignore", invalid="ignore"):
        ch = np.where(s2 >= 0, np.cosh(root), np.cos(root))
        sh = np.where(s2 >= 0, np.sinh(root), np.sin(root))
        ratio = np.where(root > 1e-8, sh / np.where(root > 1e-8, root, 1.0), 1.0 + s2 / 6.0)
    damp = h * np.sqrt(np.maximum(kbar, 0.0))
    scale = np.exp(-damp)
    # exp(Omega) = ch I + ratio Omega, Omega = [[a, h], [h kbar, -a]]
    e11 = (ch + ratio * a) * scale
    e12 = (ratio * h) * scale
    e21 = (ratio * h * kbar) * scale
    e22 = (ch - ratio * a) * scale
    y = np.zeros_like(lam)
    yp = np.ones_like(lam)
    for i in range(n):
        y, yp = e11[i] * y + e12[i] * yp, e21[i] * y + e22[i] * yp
    return y, yp, damp.sum(axis=0)


def integrate_ivp(gamma: float, q_k, lam: float, n: int = DEFAULT_STEPS) -> ShootingResult:
    """Integrate y(0) = 0, y'(0) = 1 to t = 1; error estimated by step halving."""
    if n < 16:
        raise SpecError("need at least 16 steps")
    q = _potential(q_k)
    y, yp, L = _shoot(gamma, q, [lam], n)
    yh, yph, Lh = _shoot(gamma, q, [lam], n // 2)
    y, yp, L = float(y[0]), float(yp[0]), float(L[0])
    rel = math.exp(float(Lh[0]) - L)
    err = max(abs(y - yh[0] * rel), abs(yp - yph[0] * rel)) / 15.0
    if L < _LOG_OVERFLOW:
        f = math.exp(L)
        return ShootingResult(y * f, yp * f, n, err * f, 0.0)
    return ShootingResult(y, yp, n, err, L)


def _sup_norm(q) -> float:
    if isinstance(q, ChannelPotential):
        return q.sup_norm()
    return float(np.max(np.abs(q(np.linspace(0.0, 1.0, 4097)))))


def _check_pole(lam):
    if np.any(np.abs(lam) < EPS0):
        raise PoleProximityError(f"|lambda| < {EPS0:g}: boundary function has a pole at 0")


def delta_fn(gamma: float, q_k, lam, n: int = DEFAULT_STEPS):
    """y'(1) - (lam - 1/lam) y(1); scaled by exp(-log_scale) only when it would overflow."""
    lam_arr = np.atleast_1d(np.asarray(lam, dtype=float))
    _check_pole(lam_arr)
    y, yp, L = _shoot(gamma, _potential(q_k), lam_arr, n)
    f = np.where(L < _LOG_OVERFLOW, np.exp(np.minimum(L, _LOG_OVERFLOW)), 1.0)
    out = (yp - (lam_arr - 1.0 / lam_arr) * y) * f
    return float(out[0]) if np.ndim(lam) == 0 else out


def _scaled_delta(gamma, q, lam, n):
    y, yp, _ = _shoot(gamma, q, lam, n)
    return yp - (lam - 1.0 / lam) * y


def shooting_eigenvalue(gamma: float, q_k, lam0: float, radius: float, n: int = DEFAULT_STEPS,
                        samples: int = 64, shrink_steps: int = 4) -> tuple[float, float]:
    """Unique zero of delta_fn in [lam0 - radius, lam0 + radius], never crossing 0.

    Returns (mu, |delta_fn(mu)|). The window is split into `samples` pieces;
    exactly one sign change must be found, otherwise the radius shrinks
    toward lam0 a few times before giving up.
    """
    q = _potential(q_k)
    r = radius
    for _ in range(shrink_steps + 1):
        lo, hi = lam0 - r, lam0 + r
        if lo < 0.0 < hi or abs(lo) < EPS0 or abs(hi) < EPS0:
            if lam0 < 0.0:
                hi = min(hi, -EPS0)
            else:
                lo = max(lo, EPS0)
        if lo < 0.0 < hi:
            raise BracketError("bracket would straddle the pole at lam = 0")
        grid = np.linspace(lo, hi, samples + 1)
        vals = _scaled_delta(gamma, q, grid, n)
        sgn = np.sign(vals)
        exact = np.flatnonzero(sgn == 0)
        if exact.size == 1:
            mu = float(grid[exact[0]])
            return mu, abs(delta_fn(gamma, q, mu, n))
        flips = np.flatnonzero(sgn[:-1] * sgn[1:] < 0)
        if flips.size == 1:
            i = int(flips[0])
            f = lambda v: float(_scaled_delta(gamma, q, np.array([v]), n)[0])
            mu = brentq(f, grid[i], grid[i + 1], xtol=1e-300, rtol=4.0 * np.finfo(float).eps,
                        maxiter=200)
            return mu, abs(delta_fn(gamma, q, mu, n))
        if flips.size == 0:
            raise BracketError(f"no eigenvalue within {r:g} of {lam0:g}")
        r *= 0.5
    raise BracketError(f"could not isolate a single eigenvalue near {lam0:g}")


def _phase_block(x, u, lam, q, bound, panel_factor, max_iter=80):
    """Shifts d for a block of oscillatory modes by phase-deviation iteration."""
    nb = x.size
    panels = max(8, int(math.ceil(panel_factor * float(x.max()))))
    rule = CumulativeRule(panels, 16)
    t = rule.t
    qv = np.broadcast_to(np.asarray(q(t), dtype=float), t.shape)
    xt = x[:, None, None] * t[None]
    phi = np.zeros((nb,) + t.shape)
    d = np.zeros(nb)
    su = np.sin(u)
    # mu = lam + d is stored in double, so d never needs to settle beyond a small fraction of ulp(lam)
    d_floor = 1e-18 + 1e-3 * np.finfo(float).eps * float(lam.min())

    def E_and_slope(dn, A, I):
        ph1 = -(A - dn * I) / x
        sup = np.sin(u + ph1)
        E = -x * np.sin(ph1) / (sup * su) - dn - dn / (lam * (lam + dn))
        return E, -I / (sup * sup) - 1.0 - 1.0 / (lam + dn) ** 2

    for _ in range(max_iter):
        s2 = np.sin(xt + phi) ** 2
        cq, A = rule.cumulative(qv * s2)
        ci, I = rule.cumulative(s2)
        # E is decreasing in d between the poles where u + phi(1) hits 0 or pi;
        # the wanted root keeps u + phi(1) inside (0, pi) and obeys the Weyl bound.
        lo = np.maximum(-bound, (A - u * x) / I)
        hi = np.minimum(bound, (A + (np.pi - u) * x) / I)
        dn = np.clip(d, lo, hi)
        dn = np.where((dn <= lo) | (dn >= hi), 0.5 * (lo + hi), dn)
        for _ in range(100):
            E, dE = E_and_slope(dn, A, I)
            lo = np.where(E > 0, dn, lo)
            hi = np.where(E < 0, dn, hi)
            nd = dn - E / dE
            nd = np.where((nd <= lo) | (nd >= hi) | ~np.isfinite(nd), 0.5 * (lo + hi), nd)
            step = nd - dn
            dn = nd
            if np.all(np.abs(step) <= 1e-18 + 1e-15 * np.abs(dn)):
                break
        new_phi = -(cq - dn[:, None, None] * ci) / x[:, None, None]
        dphi = np.max(np.abs(new_phi - phi))
        dd = np.max(np.abs(dn - d))
        phi = new_phi
        d = dn
        if dphi <= 1e-16 * (1.0 + np.max(np.abs(phi))) and dd <= d_floor + 1e-14 * np.max(np.abs(d)):
            break
    else:
        raise NonConvergenceError("phase-deviation iteration did not converge")
    E, _ = E_and_slope(d, A, I)
    return d, np.abs(E)


def phase_shifts(records: list[EigenvalueRecord], q_k, bound: float | None = None,
                 panel_factor: float = 0.5, budget: int = 3_000_000) -> tuple[np.ndarray, np.ndarray]:
    """Oscillatory shifts mu - lam for base records (any order), in blocks.

    `bound` caps |mu - lam| (the Weyl bound); by default sup|q| plus a margin.
    """
    q = _potential(q_k)
    if bound is None:
        bound = _sup_norm(q) + 1e-6
    x = np.array([r.root_param for r in records])
    u = np.array([float(r.offset) for r in records])
    lam = np.array([float(r.lam_ld) for r in records])
    order = np.argsort(x, kind="stable")
    d = np.empty(x.size)
    res = np.empty(x.size)
    i = 0
    while i < order.size:
        j = i + 1
        while j < order.size and j - i < 64:
            panels = max(8, int(math.ceil(panel_factor * x[order[j]])))
            if (j + 1 - i) * panels * 16 > budget:
                break
            j += 1
        sel = order[i:j]
        d[sel], res[sel] = _phase_block(x[sel], u[sel], lam[sel], q, bound, panel_factor)
        i = j
    return d, res


@dataclass(frozen=True)
class PerturbedPair:
    """A base record paired with its perturbed eigenvalue mu = lam + shift."""

    record: EigenvalueRecord
    mu: float
    shift: float
    residual: float
    method: str

    def __iter__(self):
        # allows `base, mu = pair`
        yield self.record
        yield self.mu


def solve_perturbed_channel(gamma: float, q_k, base: ChannelSpectrum, tol: float = 1e-12,
                            n: int = DEFAULT_STEPS, panel_factor: float = 0.5) -> list[PerturbedPair]:
    """Perturbed eigenvalue for every base record, paired by (branch, m)."""
    if not math.isclose(gamma, base.gamma, rel_tol=0.0, abs_tol=0.0):
        raise PairingError("base spectrum belongs to a different gamma")
    q = _potential(q_k)
    if isinstance(q, ChannelPotential) and q.is_zero:
        return [PerturbedPair(r, r.lam, 0.0, 0.0, "identity") for r in base.records]
    margin = 1e-6 + 1e-9 * abs(gamma)
    bound = _sup_norm(q) + margin

    osc = [r for r in base.records if r.branch is Branch.OSCILLATORY and r.root_param >= 1.0]
    shifts = {}
    if osc:
        d, res = phase_shifts(osc, q, bound, panel_factor)
        for r, di, ri in zip(osc, d, res):
            shifts[r.key] = (float(di), float(ri), "phase")

    out = []
    for r in base.records:
        if r.key in shifts:
            di, ri, how = shifts[r.key]
            out.append(PerturbedPair(r, float(r.lam_ld + np.longdouble(di)), di, ri, how))
            continue
        mu, ri = shooting_eigenvalue(gamma, q, r.lam, bound, n)
        out.append(PerturbedPair(r, mu, float(np.longdouble(mu) - r.lam_ld), ri, "shooting"))
    return out


def solve_perturbed(spectra: list[ChannelSpectrum], potential: PotentialSpec, tol: float = 1e-12,
                    n: int = DEFAULT_STEPS, workers: int = 1,
                    panel_factor: float = 0.5) -> dict[int, list[PerturbedPair]]:
    """Pairs for every channel; inactive channels pair each record with itself."""
    def one(ch):
        return ch.k, solve_perturbed_channel(ch.gamma, potential.channel(ch.k), ch, tol, n, panel_factor)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, spectra))
    else:
        results = [one(ch) for ch in spectra]
    return dict(sorted(results))
