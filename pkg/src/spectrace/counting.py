"""Eigenvalue counting function N(lam) and its growth exponent.

Two candidate exponent tables are in circulation for gamma_k = a k^alpha:

    count table   N(lam) ~ lam^d  with d = 2 alpha/(alpha+2), alpha/2, 1
    growth table  lam_n  ~ n^d    with d = (alpha+2)/(2 alpha), 2/alpha, 1

(for alpha > 2, alpha < 2, alpha = 2). They are reciprocal, so at most one
of them can describe N(lam) when alpha != 2. The fit decides.

N counts the positive eigenvalues. The negative branch adds one eigenvalue
per channel in (-1, 0); over all channels these accumulate at 0 from below,
so they are reported separately and kept out of the fit. For generated
operators the principal eigenvalues (near sqrt(gamma_k)) of channels beyond
K also fall below the window's upper end and are included, otherwise the
count would be truncated long before the oscillatory part is.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .charroots import ChannelSpectrum, negative_roots, oscillatory_roots, principal_roots, \
    has_low_oscillatory_root
from .errors import SpecError
from .model import Branch, OperatorSpec

MATCH_TOLERANCE = 0.05


def count_below(spectra: Sequence[ChannelSpectrum], lam: float) -> int:
    """Number of records with eigenvalue strictly below lam, all channels and branches."""
    return int(sum(np.searchsorted(ch.lams, lam, side="left") for ch in spectra))


def count_by_branch(spectra: Sequence[ChannelSpectrum], lam: float) -> dict[str, int]:
    out = {b.value: 0 for b in Branch}
    for ch in spectra:
        for r in ch.records:
            if r.lam < lam:
                out[r.branch.value] += 1
    return out


def table_exponents(alpha: float) -> tuple[float, float]:
    """(count-table exponent for N(lam), growth-table exponent for lam_n)."""
    if not alpha > 0:
        raise SpecError("alpha must be positive")
    if alpha == 2.0:
        return 1.0, 1.0
    if alpha > 2.0:
        return 2.0 * alpha / (alpha + 2.0), (alpha + 2.0) / (2.0 * alpha)
    return alpha / 2.0, 2.0 / alpha


def fit_exponent(lams: Sequence[float], counts: Sequence[float]) -> tuple[float, float]:
    """Least-squares slope of log N against log lam, with R^2."""
    x = np.log(np.asarray(lams, dtype=float))
    y = np.log(np.asarray(counts, dtype=float))
    if x.size < 20:
        raise SpecError(f"need at least 20 samples, got {x.size}")
    if x.max() - x.min() < math.log(10.0) * (1.0 - 1e-12):
        raise SpecError("samples must span at least one decade")
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(coef[0]), max(0.0, r2)


@dataclass(frozen=True)
class EigenvalueCensus:
    """Sorted positive eigenvalues with their branch, plus the negative count."""

    lams: np.ndarray
    principal: np.ndarray  # bool mask aligned with lams
    negative_count: int
    tail_channels: int
    upper: float

    def N(self, lam) -> np.ndarray:
        return np.searchsorted(self.lams, lam, side="left")

    def N_principal(self, lam) -> np.ndarray:
        csum = np.concatenate([[0], np.cumsum(self.principal)])
        return csum[self.N(lam)]


def _upper_end(spec: OperatorSpec, M: int) -> float:
    osc_end = spec.gammas[0] + math.pi ** 2 * M * M
    if spec.generated:
        return min(spec.gamma(spec.K + 1), osc_end)
    return osc_end


def census(spec: OperatorSpec, M: int, tol: float = 1e-12, include_negative: bool = True,
           tail: bool = True) -> EigenvalueCensus:
    """All positive eigenvalues needed for counting below the window's upper end."""
    g = np.asarray(spec.gammas, dtype=float)
    upper = _upper_end(spec, M)
    G = np.repeat(g, M)
    mm = np.tile(np.arange(1, M + 1), g.size)
    u, _, _ = oscillatory_roots(G, mm, tol)
    x = np.pi * mm + u.astype(float)
    parts = [G + x * x]
    flags = [np.zeros(G.size, dtype=bool)]
    low = np.array([has_low_oscillatory_root(v) for v in g], dtype=bool)
    if low.any():
        u0, _, _ = oscillatory_roots(g[low], 0, tol)
        parts.append(g[low] + u0.astype(float) ** 2)
        flags.append(np.zeros(int(low.sum()), dtype=bool))
    high = g[~low]
    tail_channels = 0
    if tail and spec.generated:
        # principal roots of channels beyond K lie near sqrt(gamma_k)
        k = spec.K + 1
        extra = []
        while True:
            gk = spec.gamma(k)
            if math.sqrt(gk) - 1.0 > upper:
                break
            extra.append(gk)
            k += 1
        tail_channels = len(extra)
        high = np.concatenate([high, np.asarray(extra, dtype=float)])
    if high.size:
        lam_p, _, _ = principal_roots(high, tol)
        parts.append(lam_p.astype(float))
        flags.append(np.ones(high.size, dtype=bool))
    lams = np.concatenate(parts)
    pmask = np.concatenate(flags)
    order = np.argsort(lams, kind="stable")
    neg = 0
    if include_negative:
        neg = int(negative_roots(g, tol)[0].size)
    return EigenvalueCensus(lams[order], pmask[order], neg, tail_channels, upper)


def validity_window(spec: OperatorSpec, M: int, cen: EigenvalueCensus | None = None,
                    tol: float = 1e-12) -> tuple[float, float]:
    """(10th smallest positive eigenvalue, min(gamma_{K+1}, gamma_1 + pi^2 M^2))."""
    cen = cen or census(spec, M, tol, include_negative=False)
    hi = cen.upper
    below = cen.lams[cen.lams < hi]
    if below.size < 10:
        raise SpecError("empty counting window: fewer than 10 eigenvalues below the truncation limit")
    lo = float(below[9])
    if not lo < hi:
        raise SpecError("empty counting window")
    return lo, hi


@dataclass(frozen=True)
class CountingReport:
    samples: tuple[tuple[float, int], ...]
    principal_counts: tuple[int, ...]
    window: tuple[float, float]
    fit_window: tuple[float, float]
    delta_hat: float
    fit_quality: float
    inverse_exponent: float
    exponent_product: float
    count_table_delta: float
    growth_table_delta: float
    verdict: str
    negative_count: int
    tail_channels: int
    K: int
    M: int
    alpha: float | None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["samples"] = [list(s) for s in self.samples]
        d["principal_counts"] = list(self.principal_counts)
        d["window"] = list(self.window)
        d["fit_window"] = list(self.fit_window)
        return d


def _verdict(delta: float, tables: tuple[float, float]) -> str:
    hits = [abs(delta - t) <= MATCH_TOLERANCE for t in tables]
    if all(hits):
        return "both"
    if hits[0]:
        return "count_table"
    if hits[1]:
        return "growth_table"
    return "neither"


def counting_report(spec: OperatorSpec, M: int, tol: float = 1e-12, include_negative: bool = True,
                    fit_decades: float | None = 2.0, per_decade: int = 20,
                    tail: bool = True) -> CountingReport:
    """Sample N(lam) on a log grid over the window and fit the growth exponent.

    The fit uses the top `fit_decades` decades of the window (all of it when
    None), where the lattice count dominates the low-lying principal ones.
    """
    cen = census(spec, M, tol, include_negative, tail)
    lo, hi = validity_window(spec, M, cen)
    n_samples = max(20, int(math.ceil(per_decade * math.log10(hi / lo))) + 1)
    grid = np.geomspace(lo, hi, n_samples)
    N = cen.N(grid)
    Np = cen.N_principal(grid)
    fit_lo = lo if fit_decades is None else max(lo, hi / 10.0 ** fit_decades)
    sel = grid >= fit_lo * (1.0 - 1e-12)
    delta, r2 = fit_exponent(grid[sel], N[sel])

    # the inverse view: lam_n against n over the same range of eigenvalues
    n_lo, n_hi = int(cen.N(fit_lo)) + 1, int(cen.N(hi))
    idx = np.unique(np.round(np.geomspace(n_lo, n_hi, int(sel.sum()))).astype(int))
    inv, _ = fit_exponent(cen.lams[idx - 1], idx) if idx.size >= 20 else (math.nan, 0.0)
    eps = 1.0 / inv if inv else math.nan
    tables = table_exponents(spec.alpha) if spec.alpha is not None else (math.nan, math.nan)
    return CountingReport(
        samples=tuple((float(a), int(b)) for a, b in zip(grid, N)),
        principal_counts=tuple(int(v) for v in Np),
        window=(lo, hi),
        fit_window=(float(fit_lo), hi),
        delta_hat=delta,
        fit_quality=r2,
        inverse_exponent=eps,
        exponent_product=delta * eps,
        count_table_delta=tables[0],
        growth_table_delta=tables[1],
        verdict=_verdict(delta, tables),
        negative_count=cen.negative_count,
        tail_channels=cen.tail_channels,
        K=spec.K,
        M=int(M),
        alpha=spec.alpha,
    )
