"""Normalized modes, first-order matrix elements and regularized trace sums.

An unperturbed eigenvector of the linearized operator is the triple
Y = {y, -y(1)/lam, y(1)} with y = sin(x t) on the oscillatory branch and
y = sinh(w t)/sinh(w) on the two imaginary branches. Its squared norm in the
direct sum L2(0,1) + C + C is

    int_0^1 y^2 dt + y(1)^2 / lam^2 + y(1)^2.

On an oscillatory root this equals H / (2 x lam^2) with

    H = x lam^2 - lam^2 sin x cos x + 4 x sin^2 x + 2 x^2 lam sin x cos x,

which follows from sin x (lam - 1/lam) = x cos x. The first-order shift of
lam under the potential q is int_0^1 q y^2 dt / |Y|^2, because the boundary
components do not see q.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .charroots import LD, PI_LD, ChannelSpectrum
from .errors import NonConvergenceError, PairingError, SpecError
from .model import Branch, ChannelPotential, EigenvalueRecord, PotentialSpec, trace_endpoint
from .perturbed import PerturbedPair
from .quadrature import composite_nodes, panel_count_for_frequency

IDENTITY_GATE = 1e-9
# absolute agreement floor for quadrature checks, in units of sup|q|
_ROUNDING = 1e-14
BRANCHES = ("oscillatory", "principal", "negative")


def norm_H(x: float, gamma: float, u: float | None = None) -> float:
    """Normalization numerator H at an oscillatory root x.

    Passing the offset u = x - pi m (any precision) evaluates the
    trigonometric factors without the large-argument reduction of x.
    """
    lam = x * x + gamma
    if u is None:
        s, c = math.sin(x), math.cos(x)
    else:
        # sin x cos x and sin^2 x only depend on u
        s, c = math.sin(float(u)), math.cos(float(u))
    sc = s * c
    return x * lam * lam - lam * lam * sc + 4.0 * x * s * s + 2.0 * x * x * lam * sc


def identity_residual(x, gamma):
    """sin x (x^2 + gamma) - x cos x - sin x / (x^2 + gamma); zero at roots."""
    x = np.asarray(x, dtype=float)
    lam = x * x + gamma
    s = np.sin(x)
    out = s * lam - x * np.cos(x) - s / lam
    return float(out) if out.ndim == 0 else out


def root_identity_residual(record: EigenvalueRecord, gamma: float) -> float:
    """The same identity evaluated in long double from the record's offset."""
    if record.branch is not Branch.OSCILLATORY:
        raise SpecError("identity applies to oscillatory roots only")
    u = LD(record.offset)
    x = PI_LD * LD(record.m) + u
    lam = LD(gamma) + x * x
    sign = -1 if record.m % 2 else 1
    s, c = np.sin(u), np.cos(u)
    return float(sign * (s * lam - x * c - s / lam))


def _sin_end(record: EigenvalueRecord) -> float:
    """sin x for an oscillatory record, via its offset."""
    sign = -1.0 if record.m % 2 else 1.0
    return sign * float(np.sin(LD(record.offset)))


def _sinh_profile(w: float, t):
    """sinh(w t) / sinh(w), without overflow for large w."""
    t = np.asarray(t, dtype=float)
    if w == 0.0:
        return t.copy()
    if w < 20.0:
        return np.sinh(w * t) / math.sinh(w)
    return np.exp(w * (t - 1.0)) * (-np.expm1(-2.0 * w * t)) / (-math.expm1(-2.0 * w))


def _panels(record: EigenvalueRecord) -> int:
    if record.branch is Branch.OSCILLATORY:
        return panel_count_for_frequency(record.root_param)
    return max(16, int(math.ceil(2.0 * record.root_param)))


@dataclass(frozen=True)
class NormalizedMode:
    """A unit eigenvector of the unperturbed linearized operator.

    norm2 is the squared norm of the unnormalized triple; `weight` is the
    density y(t)^2 / norm2 whose integral against q is the matrix element.
    """

    record: EigenvalueRecord
    gamma: float
    H: float
    norm2: float
    method: str

    def profile(self, t):
        r = self.record
        if r.branch is Branch.OSCILLATORY:
            return np.sin(r.root_param * np.asarray(t, dtype=float))
        return _sinh_profile(r.root_param, t)

    @property
    def end_value(self) -> float:
        r = self.record
        return _sin_end(r) if r.branch is Branch.OSCILLATORY else 1.0

    def weight(self, t):
        return self.profile(t) ** 2 / self.norm2

    @property
    def boundary_mass(self) -> float:
        """Squares of the two boundary components, normalized."""
        y1 = self.end_value
        return y1 * y1 * (1.0 + 1.0 / (self.record.lam * self.record.lam)) / self.norm2

    def unit_norm_defect(self, panels: int | None = None) -> float:
        t, w = composite_nodes(panels or 2 * _panels(self.record))
        return float(np.dot(w, self.weight(t))) + self.boundary_mass - 1.0


def quadrature_norm2(record: EigenvalueRecord, panels: int | None = None) -> float:
    """Direct-sum squared norm of the unnormalized mode by composite quadrature."""
    t, w = composite_nodes(panels or _panels(record))
    if record.branch is Branch.OSCILLATORY:
        y = np.sin(record.root_param * t)
        end = _sin_end(record)
    else:
        y = _sinh_profile(record.root_param, t)
        end = 1.0
    lam = record.lam
    return float(np.dot(w, y * y)) + end * end * (1.0 + 1.0 / (lam * lam))


def normalized_mode(record: EigenvalueRecord, gamma: float) -> NormalizedMode:
    """Closed-form H where the root identity holds, quadrature otherwise."""
    lam = record.lam
    if record.branch is Branch.OSCILLATORY:
        x = record.root_param
        if abs(root_identity_residual(record, gamma)) < IDENTITY_GATE:
            H = norm_H(x, gamma, record.offset)
            return NormalizedMode(record, gamma, H, H / (2.0 * x * lam * lam), "closed_form")
        n2 = quadrature_norm2(record)
        return NormalizedMode(record, gamma, 2.0 * x * lam * lam * n2, n2, "quadrature")
    n2 = quadrature_norm2(record)
    w = record.root_param
    return NormalizedMode(record, gamma, 2.0 * w * lam * lam * n2, n2, "quadrature")


def matrix_element(mode: NormalizedMode, q_k: Callable, rtol: float = 1e-10,
                   max_doublings: int = 6) -> float:
    """int_0^1 w(t) q(t) dt, doubling the panel count until two rules agree."""
    if isinstance(q_k, ChannelPotential) and q_k.is_zero:
        return 0.0
    panels = _panels(mode.record)
    t, w = composite_nodes(panels)
    qv = q_k(t)
    floor = _ROUNDING * float(np.max(np.abs(qv)))
    prev = float(np.dot(w, mode.weight(t) * qv))
    for _ in range(max_doublings):
        panels *= 2
        t, w = composite_nodes(panels)
        cur = float(np.dot(w, mode.weight(t) * q_k(t)))
        if abs(cur - prev) <= rtol * abs(cur) + floor:
            return cur
        prev = cur
    raise NonConvergenceError("matrix element quadrature did not settle")


def channel_elements(spectrum: ChannelSpectrum, q_k: Callable, rtol: float = 1e-10,
                     budget: int = 4_000_000) -> tuple[np.ndarray, list[NormalizedMode]]:
    """Matrix elements for every record of a channel, in record order.

    Oscillatory modes are processed in blocks on a shared grid sized for the
    largest frequency of the block; every block is recomputed on the doubled
    grid as the convergence check. A zero potential short-circuits to zeros
    and returns no modes.
    """
    out = np.zeros(len(spectrum.records))
    if isinstance(q_k, ChannelPotential) and q_k.is_zero:
        return out, []
    modes = [normalized_mode(r, spectrum.gamma) for r in spectrum.records]
    osc = [i for i, md in enumerate(modes) if md.record.branch is Branch.OSCILLATORY]
    for i, md in enumerate(modes):
        if md.record.branch is not Branch.OSCILLATORY:
            out[i] = matrix_element(md, q_k, rtol)
    osc.sort(key=lambda i: modes[i].record.root_param)
    start = 0
    while start < len(osc):
        stop = start + 1
        while stop < len(osc):
            nodes = 8 * panel_count_for_frequency(modes[osc[stop]].record.root_param)
            if (stop + 1 - start) * nodes * 2 > budget:
                break
            stop += 1
        block = osc[start:stop]
        x = np.array([modes[i].record.root_param for i in block])
        n2 = np.array([modes[i].norm2 for i in block])
        panels = panel_count_for_frequency(float(x.max()))
        vals = []
        for p in (panels, 2 * panels):
            t, w = composite_nodes(p)
            qv = q_k(t)
            floor = _ROUNDING * float(np.max(np.abs(qv)))
            vals.append((np.sin(np.outer(x, t)) ** 2 @ (w * qv)) / n2)
        diff = np.abs(vals[1] - vals[0])
        if np.any(diff > rtol * np.abs(vals[1]) + floor):
            for j, i in enumerate(block):
                vals[1][j] = matrix_element(modes[i], q_k, rtol)
        out[block] = vals[1]
        start = stop
    return out, modes


@dataclass(frozen=True)
class TraceEntry:
    k: int
    branch: str
    m: int | None
    lam: float
    mu: float
    element: float
    shift: float

    @property
    def remainder(self) -> float:
        return self.shift - self.element


QUANTITIES = ("shift", "element", "remainder")


@dataclass(frozen=True)
class TraceLedger:
    """Paired entries, per-cutoff partial sums and their Cesaro limits.

    partial_sums[quantity][branch] is a tuple aligned with `schedule`;
    quantity is one of shift (mu - lam), element, remainder (shift - element);
    branch is one of oscillatory, principal, negative, total.
    """

    entries: tuple[TraceEntry, ...]
    schedule: tuple[int, ...]
    partial_sums: Mapping[str, Mapping[str, tuple[float, ...]]]
    target: float
    extrapolated: Mapping[str, Mapping[str, float]]
    global_pairing: tuple[float | None, ...] = ()
    cesaro_window: int = 1


def cesaro_tail(values: Sequence[float]) -> tuple[float, int]:
    """Average of the last quarter (at least one) of a sequence of partial sums."""
    n = len(values)
    if n == 0:
        raise SpecError("empty schedule")
    tail = max(1, math.ceil(n / 4))
    return math.fsum(values[-tail:]) / tail, tail


def _global_pairing_sum(entries: list[TraceEntry], n: int) -> float:
    """sum of the n smallest mu minus the n smallest lam, over the entries given.

    Entries that are in both selections contribute their shift; the rest are
    paired in sorted order, which keeps the subtraction between nearby numbers.
    """
    by_lam = sorted(range(len(entries)), key=lambda i: (entries[i].lam, entries[i].k))
    by_mu = sorted(range(len(entries)), key=lambda i: (entries[i].lam + entries[i].shift, entries[i].k))
    A = set(by_lam[:n])
    B = set(by_mu[:n])
    common = math.fsum(entries[i].shift for i in A & B)
    only_b = sorted((entries[i].lam + entries[i].shift for i in B - A))
    only_a = sorted((entries[i].lam for i in A - B))
    return common + math.fsum(b - a for b, a in zip(only_b, only_a))


def pair_and_sum(spectra: Sequence[ChannelSpectrum], pairs: Mapping[int, Sequence[PerturbedPair]],
                 elements: Mapping[int, Sequence[float]], schedule: Sequence[int],
                 target: float) -> TraceLedger:
    """Build the ledger; the cutoff M_c keeps oscillatory modes with m <= M_c."""
    schedule = tuple(int(c) for c in schedule)
    if not schedule or list(schedule) != sorted(set(schedule)) or schedule[0] < 1:
        raise SpecError("schedule must be strictly increasing positive cutoffs")
    entries = []
    for ch in spectra:
        plist = pairs.get(ch.k)
        elist = elements.get(ch.k)
        if plist is None or elist is None or len(plist) != len(ch.records) or len(elist) != len(ch.records):
            raise PairingError(f"channel {ch.k}: pairs/elements do not align with the base spectrum")
        m_max = max((r.m for r in ch.records if r.branch is Branch.OSCILLATORY), default=0)
        if schedule[-1] > m_max:
            raise PairingError(f"channel {ch.k}: cutoff {schedule[-1]} exceeds computed modes {m_max}")
        for rec, pair, el in zip(ch.records, plist, elist):
            if pair.record.key != rec.key:
                raise PairingError(f"channel {ch.k}: pairing key mismatch at {rec.key}")
            entries.append(TraceEntry(ch.k, rec.branch.value, rec.m, rec.lam, pair.mu, float(el),
                                      float(pair.shift)))

    sums = {qn: {b: [] for b in BRANCHES + ("total",)} for qn in QUANTITIES}
    global_sums = []
    for cut in schedule:
        inside = [e for e in entries if e.branch != "oscillatory" or e.m <= cut]
        for qn in QUANTITIES:
            for b in BRANCHES:
                sums[qn][b].append(math.fsum(getattr(e, qn) for e in inside if e.branch == b))
            sums[qn]["total"].append(math.fsum(sums[qn][b][-1] for b in BRANCHES))
        global_sums.append(_global_pairing_sum(entries, len(inside)) if _complete(entries, spectra, len(inside)) else None)

    partial = {qn: {b: tuple(v) for b, v in d.items()} for qn, d in sums.items()}
    extrap = {}
    window = 1
    for qn, d in partial.items():
        extrap[qn] = {}
        for b, v in d.items():
            extrap[qn][b], window = cesaro_tail(v)
    return TraceLedger(tuple(entries), schedule, partial, float(target), extrap,
                       tuple(global_sums), window)


def _complete(entries: list[TraceEntry], spectra: Sequence[ChannelSpectrum], n: int) -> bool:
    """True when the n smallest eigenvalues overall are all among the computed ones."""
    if n >= len(entries):
        return False
    top = min(float(ch.lams[-1]) for ch in spectra)
    lams = sorted(e.lam for e in entries)
    return lams[n] < top


def trace_target(potential: PotentialSpec) -> float:
    """-(tr q(0) + tr q(1)) / 4."""
    return -(trace_endpoint(potential, 0) + trace_endpoint(potential, 1)) / 4.0


def _relative(value: float, target: float) -> float | None:
    dev = abs(abs(value) - abs(target))
    if target == 0.0:
        return 0.0 if value == 0.0 else None
    return dev / abs(target)


def _sign_agrees(value: float, target: float) -> bool:
    return bool(np.sign(value) == np.sign(target))


def remainder_trend(ledger: TraceLedger, branch: str = "total") -> dict:
    """Successive differences |S_{2M} - S_M| of the remainder sums and their ratios."""
    s = ledger.partial_sums["remainder"][branch]
    diffs = [abs(b - a) for a, b in zip(s, s[1:])]
    ratios = [a / b if b > 0 else math.inf for a, b in zip(diffs, diffs[1:])]
    return {"cutoffs": list(ledger.schedule), "sums": list(s), "differences": diffs, "ratios": ratios}


def trace_verdict(ledger: TraceLedger, alpha: float | None = None) -> dict:
    """Compare the extrapolated sums with the closed-form target."""
    ex = ledger.extrapolated
    target = ledger.target
    warnings = []
    if alpha is not None and not alpha > 2.0:
        warnings.append(f"alpha = {alpha!r} is outside the trace theorem's hypothesis alpha > 2")
    osc = ex["shift"]["oscillatory"]
    total = ex["shift"]["total"]
    gp = [g for g in ledger.global_pairing if g is not None]
    report = {
        "target": target,
        "osc_sum": osc,
        "principal_sum": ex["shift"]["principal"],
        "negative_sum": ex["shift"]["negative"],
        "total_sum": total,
        "element_sums": dict(ex["element"]),
        "remainder_sums": dict(ex["remainder"]),
        "remainder_trend": {b: remainder_trend(ledger, b) for b in ("oscillatory", "total")},
        "relative_deviation_osc": _relative(osc, target),
        "relative_deviation_total": _relative(total, target),
        "sign_agrees": _sign_agrees(osc, target),
        "sign_agrees_total": _sign_agrees(total, target),
        "schedule": list(ledger.schedule),
        "cesaro_window": ledger.cesaro_window,
        "global_pairing_partial_sums": list(ledger.global_pairing),
        "global_pairing_differs": any(
            abs(g - t) > 1e-12 * max(1.0, abs(t))
            for g, t in zip(ledger.global_pairing, ledger.partial_sums["shift"]["total"]) if g is not None),
        "warnings": warnings,
    }
    if not gp:
        report["global_pairing_differs"] = False
    return report


def fourier_endpoint_limit(q_k: Callable, N: int, panels: int | None = None) -> tuple[float, float]:
    """T_N = sum_{m<=N} int cos(2 pi m t) q dt and the mean of T_n over the last quarter of n <= N.

    Both are integrals of q against closed-form kernels:
    S_N(t) = sin((2N+1) pi t) / (2 sin(pi t)) - 1/2 for the partial sum, and
    the averaged kernel (sin(L pi t) sin((N+1+N0) pi t)) / (2 L sin^2(pi t)) - 1/2
    for n = N0..N with L = N - N0 + 1.
    """
    if int(N) != N or N < 1:
        raise SpecError("N must be a positive integer")
    N = int(N)
    L = max(1, math.ceil(N / 4))
    N0 = N - L + 1
    t, w = composite_nodes(panels or (4 * N + 16), 16)
    th = np.pi * t
    st = np.sin(th)
    qv = np.asarray(q_k(t), dtype=float)
    S = np.sin((2 * N + 1) * th) / (2.0 * st) - 0.5
    Kbar = np.sin(L * th) * np.sin((N + 1 + N0) * th) / (2.0 * L * st * st) - 0.5
    return float(np.dot(w, S * qv)), float(np.dot(w, Kbar * qv))
