"""Roots of the unperturbed characteristic equation, branch by branch.

For a channel with eigenvalue gamma the scalar problem

    -y'' + gamma y = lam y,  y(0) = 0,  y'(1) = (lam - 1/lam) y(1)

has y = sin(z t) with z**2 = lam - gamma, and lam is an eigenvalue exactly
when f(z) = z cot z - (z**2 + gamma) + 1/(z**2 + gamma) vanishes. Three
families of roots exist:

* oscillatory: one real z in each (pi m, pi (m+1)), m >= 1, plus one in
  (0, pi) when gamma - 1/gamma < 1;
* principal: z = i w with 0 < w < sqrt(gamma), present when gamma - 1/gamma
  >= 1, so 0 < lam < gamma;
* negative: z = i w with w > sqrt(gamma), always exactly one, lam < 0.

All solvers bisect first (the bracket guarantees uniqueness) and then polish
with safeguarded Newton steps. The arithmetic is carried in long double.
Oscillatory roots are represented as x = pi m + u, and cot x is evaluated as
cot u, so the large integer part never swamps the digits that matter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import NoSignChangeError, NonConvergenceError, PoleProximityError, SpecError
from .model import Branch, EigenvalueRecord, OperatorSpec

LD = np.longdouble
PI_LD = LD("3.14159265358979323846264338327950288419716939937510")
EPS_LD = float(np.finfo(LD).eps)
SIN_GUARD = 1e-13
POLE_GUARD = 1e-9
BISECT_WIDTH = 1e-8
MAX_POLISH = 200


def char_fn(z, gamma):
    """z cot z - (z^2 + gamma) + 1/(z^2 + gamma); z = 0 gives the limit 1 - gamma + 1/gamma."""
    z = np.asarray(z, dtype=float)
    s = z * z + gamma
    sz = np.sin(z)
    near = np.abs(sz) < SIN_GUARD
    if np.any(near & (z != 0.0)):
        raise PoleProximityError(f"char_fn evaluated within {SIN_GUARD:g} of a pole of cot")
    with np.errstate(divide="ignore", invalid="ignore"):
        zcot = np.where(z == 0.0, 1.0, z * np.cos(z) / np.where(near, 1.0, sz))
    out = zcot - s + 1.0 / s
    return float(out) if out.ndim == 0 else out


def char_fn_prime(z, gamma):
    """Analytic derivative of char_fn with respect to z."""
    z = np.asarray(z, dtype=float)
    s = z * z + gamma
    sz = np.sin(z)
    out = np.cos(z) / sz - z / (sz * sz) - 2.0 * z - 2.0 * z / (s * s)
    return float(out) if out.ndim == 0 else out


def _wcoth(w):
    """w coth w, finite at w = 0; works for double and long double arrays."""
    w = np.asarray(w)
    small = np.abs(w) < 1e-6
    safe = np.where(small, 1.0, w)
    return np.where(small, 1.0 + w * w / 3.0, safe / np.tanh(safe))


def char_fn_imag(w, gamma):
    """w coth w - (gamma - w^2) + 1/(gamma - w^2), the continuation f(i w)."""
    w = np.asarray(w, dtype=float)
    lam = gamma - w * w
    if np.any(np.abs(lam) < POLE_GUARD * max(1.0, gamma)):
        raise PoleProximityError("char_fn_imag evaluated at w = sqrt(gamma)")
    out = _wcoth(w) - lam + 1.0 / lam
    return float(out) if out.ndim == 0 else out


def has_low_oscillatory_root(gamma: float) -> bool:
    """True when the root in (0, pi) exists (gamma - 1/gamma < 1); decided in long double."""
    g = LD(gamma)
    return bool(g - 1 / g < 1)


def _floor(tol, scale):
    """Tolerance actually attainable in long double for a value of size `scale`."""
    return np.maximum(LD(tol), LD(4.0 * EPS_LD) * scale)


def _polish(F, lo, hi, tol, what):
    """Bisect to BISECT_WIDTH, then Newton with bisection fallback.

    F(v) -> (f, f', scale) for arrays; f is decreasing on every bracket with
    f(lo+) > 0 > f(hi-). Endpoints are never evaluated.
    """
    lo = lo.copy()
    hi = hi.copy()
    for _ in range(MAX_POLISH):
        wide = (hi - lo) > BISECT_WIDTH * np.maximum(1, np.abs(hi))
        if not np.any(wide):
            break
        mid = (lo + hi) / 2
        f, _, _ = F(mid)
        pos = f > 0
        lo = np.where(wide & pos, mid, lo)
        hi = np.where(wide & ~pos, mid, hi)
    else:
        raise NonConvergenceError(f"{what}: bisection did not reach width {BISECT_WIDTH:g}")

    v = (lo + hi) / 2
    done = np.zeros(v.shape, dtype=bool)
    for _ in range(MAX_POLISH):
        f, fp, scale = F(v)
        limit = _floor(tol, scale)
        done |= np.abs(f) <= limit
        if np.all(done):
            break
        pos = f > 0
        lo = np.where(~done & pos, v, lo)
        hi = np.where(~done & ~pos, v, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            nv = v - f / fp
        bad = ~np.isfinite(nv) | (nv <= lo) | (nv >= hi)
        nv = np.where(bad, (lo + hi) / 2, nv)
        done |= nv == v
        v = np.where(done, v, nv)
    f, fp, scale = F(v)
    limit = _floor(tol, scale)
    if np.any(np.abs(f) > limit):
        worst = float(np.max(np.abs(f) - limit))
        raise NonConvergenceError(f"{what}: residual exceeds tolerance by {worst:.3g}")
    return v, np.abs(f), limit


def _osc_system(gam, mm):
    def F(u):
        z = PI_LD * mm + u
        s = z * z + gam
        su = np.sin(u)
        cu = np.cos(u)
        zcot = z * cu / su
        f = zcot - s + 1 / s
        fp = cu / su - z / (su * su) - 2 * z - 2 * z / (s * s)
        scale = 2 * s + np.abs(zcot) + np.abs(fp * u)
        return f, fp, scale

    return F


def oscillatory_roots(gamma, m, tol: float = 1e-12):
    """Vectorized oscillatory roots.

    gamma and m broadcast together. Returns long-double arrays (u, residual,
    attained tolerance) with x = pi*m + u. Raises NoSignChangeError when an
    m = 0 root is requested for gamma - 1/gamma >= 1.
    """
    gam, mm = np.broadcast_arrays(np.asarray(gamma, dtype=float), np.asarray(m))
    if np.any(mm < 0):
        raise SpecError("mode index m must be >= 0")
    gam = gam.astype(LD)
    mm = mm.astype(LD)
    zero = mm == 0
    if np.any(zero & ~(gam - 1 / gam < 1)):
        raise NoSignChangeError("no oscillatory root in (0, pi) when gamma - 1/gamma >= 1")
    lo = np.zeros(gam.shape, dtype=LD)
    hi = np.full(gam.shape, PI_LD)
    return _polish(_osc_system(gam, mm), lo, hi, tol, "oscillatory root")


def _principal_system(gam):
    def F(lam):
        w = np.sqrt(np.maximum(gam - lam, 0))
        wc = _wcoth(w)
        f = wc - lam + 1 / lam
        small = w < 1e-6
        ws = np.where(small, 1, w)
        with np.errstate(over="ignore"):
            dwc = np.where(small, LD(1) / 3, (1 / np.tanh(ws) - ws / np.sinh(ws) ** 2) / (2 * ws))
        fp = -dwc - 1 - 1 / (lam * lam)
        scale = wc + lam + 1 / lam + np.abs(fp * lam)
        return f, fp, scale

    return F


def principal_roots(gamma, tol: float = 1e-12):
    """Vectorized principal roots, solved in lam on (0, gamma).

    Returns long-double (lam, residual, attained tolerance).
    """
    gam = np.asarray(gamma, dtype=float).astype(LD)
    if np.any(gam - 1 / gam < 1):
        raise NoSignChangeError("no principal root when gamma - 1/gamma < 1")
    lo = np.zeros(gam.shape, dtype=LD)
    return _polish(_principal_system(gam), lo, gam.copy(), tol, "principal root")


def _negative_system(gam):
    # G(s) = W(s) + s - 1/s with W = v coth v, v = sqrt(gamma + s): increasing in s.
    # _polish wants a decreasing function, so hand it -G.
    def F(s):
        v = np.sqrt(gam + s)
        wc = _wcoth(v)
        g = wc + s - 1 / s
        with np.errstate(over="ignore"):
            dwc = (1 / np.tanh(v) - v / np.sinh(v) ** 2) / (2 * v)
        gp = dwc + 1 + 1 / (s * s)
        scale = wc + s + 1 / s + np.abs(gp * s)
        return -g, -gp, scale

    return F


def negative_roots(gamma, tol: float = 1e-12):
    """Vectorized negative-branch roots.

    Solved in s = -lam on [1/(W1 + 2), 1] where W1 bounds w coth w on the
    bracket; returns long-double (lam, residual, attained tolerance).
    """
    gam = np.asarray(gamma, dtype=float).astype(LD)
    if np.any(gam <= 1):
        raise SpecError("negative-branch search needs gamma > 1")
    v1 = np.sqrt(gam + 1)
    lo = 1 / (_wcoth(v1) + 2)
    hi = np.ones(gam.shape, dtype=LD)
    F = _negative_system(gam)
    if np.any(F(lo)[0] <= 0) or np.any(F(hi)[0] >= 0):
        raise NoSignChangeError("negative-branch bracket lost its sign change")
    s, res, limit = _polish(F, lo, hi, tol, "negative root")
    return -s, res, limit


def _osc_record(k, gamma, m, u, res):
    x_ld = PI_LD * LD(m) + u
    lam_ld = LD(gamma) + x_ld * x_ld
    return EigenvalueRecord(k, Branch.OSCILLATORY, int(m), float(x_ld), float(lam_ld),
                            float(res), offset=u, lam_ld=lam_ld)


def _imag_record(k, gamma, branch, lam_ld, res):
    w = float(np.sqrt(LD(gamma) - lam_ld))
    return EigenvalueRecord(k, branch, None, w, float(lam_ld), float(res), lam_ld=lam_ld)


def solve_oscillatory_root(gamma: float, m: int, tol: float = 1e-12, k: int = 1) -> EigenvalueRecord:
    u, res, _ = oscillatory_roots(gamma, m, tol)
    return _osc_record(k, gamma, m, u[()], res[()])


def solve_principal_root(gamma: float, tol: float = 1e-12, k: int = 1) -> EigenvalueRecord:
    lam, res, _ = principal_roots(gamma, tol)
    return _imag_record(k, gamma, Branch.PRINCIPAL, lam[()], res[()])


def solve_negative_root(gamma: float, tol: float = 1e-12, k: int = 1) -> EigenvalueRecord:
    lam, res, _ = negative_roots(gamma, tol)
    return _imag_record(k, gamma, Branch.NEGATIVE, lam[()], res[()])


@dataclass(frozen=True)
class ChannelSpectrum:
    k: int
    gamma: float
    records: tuple[EigenvalueRecord, ...]
    # attained residual bound per record (same order), at least the requested tol
    tolerances: tuple[float, ...] = field(default=(), compare=False, repr=False)

    @cached_property
    def lams(self) -> np.ndarray:
        return np.array([r.lam for r in self.records])

    def branch(self, branch: Branch) -> list[EigenvalueRecord]:
        return [r for r in self.records if r.branch is branch]

    @property
    def oscillatory(self) -> list[EigenvalueRecord]:
        return self.branch(Branch.OSCILLATORY)

    @property
    def principal(self) -> EigenvalueRecord | None:
        found = self.branch(Branch.PRINCIPAL)
        return found[0] if found else None

    @property
    def negative(self) -> EigenvalueRecord | None:
        found = self.branch(Branch.NEGATIVE)
        return found[0] if found else None

    def census(self) -> dict[str, int]:
        out = {b.value: 0 for b in Branch}
        for r in self.records:
            out[r.branch.value] += 1
        return out

    def violations(self) -> list[str]:
        """Invariant violations of this channel (empty when sound)."""
        bad = []
        tols = self.tolerances or (math.inf,) * len(self.records)
        for r, t in zip(self.records, tols):
            bad += [f"k={self.k} {r.branch.value} m={r.m}: {v}" for v in r.check(self.gamma, t)]
        lams = self.lams
        if np.any(np.diff(lams) <= 0):
            bad.append(f"k={self.k}: eigenvalues not strictly increasing")
        osc = self.oscillatory
        ms = [r.m for r in osc]
        if len(set(ms)) != len(ms):
            bad.append(f"k={self.k}: repeated oscillatory index")
        has0 = 0 in ms
        if has0 == (self.principal is not None):
            bad.append(f"k={self.k}: need exactly one of m=0 and principal")
        return bad


def _spectrum_arrays(gammas: np.ndarray, M: int, tol: float):
    """All oscillatory roots m = 1..M for every gamma, in one vectorized solve."""
    G = np.repeat(gammas, M)
    mm = np.tile(np.arange(1, M + 1), gammas.size)
    u, res, lim = oscillatory_roots(G, mm, tol)
    shape = (gammas.size, M)
    return u.reshape(shape), res.reshape(shape), lim.reshape(shape)


def enumerate_spectrum(spec: OperatorSpec | list, M: int, include_negative: bool = True,
                       tol: float = 1e-12) -> list[ChannelSpectrum]:
    """Enumerate every channel of `spec` (or of an explicit gamma list)."""
    gammas = spec.gammas if isinstance(spec, OperatorSpec) else tuple(spec)
    if int(M) != M or M < 1:
        raise SpecError("M must be a positive integer")
    M = int(M)
    g = np.asarray(gammas, dtype=float)
    u, res, lim = _spectrum_arrays(g, M, tol)
    low = np.array([has_low_oscillatory_root(x) for x in g], dtype=bool)
    low_u = low_res = low_lim = None
    if low.any():
        low_u, low_res, low_lim = oscillatory_roots(g[low], 0, tol)
    pr_lam = pr_res = pr_lim = None
    if (~low).any():
        pr_lam, pr_res, pr_lim = principal_roots(g[~low], tol)
    ng_lam = ng_res = ng_lim = None
    if include_negative:
        ng_lam, ng_res, ng_lim = negative_roots(g, tol)

    out = []
    i_low = i_pr = 0
    for i, gamma in enumerate(gammas):
        k = i + 1
        recs, tols = [], []
        if include_negative:
            recs.append(_imag_record(k, gamma, Branch.NEGATIVE, ng_lam[i], ng_res[i]))
            tols.append(float(ng_lim[i]))
        if low[i]:
            recs.append(_osc_record(k, gamma, 0, low_u[i_low], low_res[i_low]))
            tols.append(float(low_lim[i_low]))
            i_low += 1
        else:
            recs.append(_imag_record(k, gamma, Branch.PRINCIPAL, pr_lam[i_pr], pr_res[i_pr]))
            tols.append(float(pr_lim[i_pr]))
            i_pr += 1
        for j in range(M):
            recs.append(_osc_record(k, gamma, j + 1, u[i, j], res[i, j]))
            tols.append(float(lim[i, j]))
        out.append(ChannelSpectrum(k, float(gamma), tuple(recs), tuple(tols)))
    return out


def enumerate_channel(gamma: float, M: int, include_negative: bool = True, tol: float = 1e-12,
                      k: int = 1) -> ChannelSpectrum:
    """Spectrum of one channel: m = 1..M, the m = 0 or principal root, and the negative root."""
    if gamma <= 1.0:
        raise SpecError("gamma must exceed 1")
    ch = enumerate_spectrum([gamma], M, include_negative, tol)[0]
    if k != 1:
        recs = tuple(EigenvalueRecord(k, r.branch, r.m, r.root_param, r.lam, r.residual,
                                      offset=r.offset, lam_ld=r.lam_ld) for r in ch.records)
        ch = ChannelSpectrum(k, ch.gamma, recs, ch.tolerances)
    return ch
