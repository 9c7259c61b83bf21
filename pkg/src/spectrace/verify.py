"""The invariant suite behind the `verify` command.

Every check returns a Check with a measured value and the threshold it is
held to. Checks are deterministic: the few that sample inputs draw them from
a generator with a fixed seed, so the report is byte-stable.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import counting as cnt
from .charroots import (PI_LD, char_fn, char_fn_imag, has_low_oscillatory_root, solve_oscillatory_root,
                        solve_principal_root)
from .config import RunConfig
from .discretizer import assemble_forms, eigenpair_checks, green_identity_residuals, oracle_spectrum
from .errors import NumericalError
from .model import Branch, ChannelPotential, PotentialSpec
from .perturbed import solve_perturbed
from .pipelines import spectra_for
from .quadrature import composite_nodes
from .reports import write_json
from .traceform import (channel_elements, normalized_mode, pair_and_sum, quadrature_norm2,
                        root_identity_residual, trace_target)

# used for potential checks when the config has no active channel
PROBE_POTENTIAL = ChannelPotential((1.0, 0.5, 0.0, -0.25))
BRANCH_GAMMAS = (1.05, 1.2, 1.5, 1.6, 1.62, 1.7, 2.0, 10.0, 100.0)
FEM_GAMMAS = (1.2, 2.0, 10.0, 100.0)
SEED = 20240601


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""


def _check(name, value, threshold, detail="", below=True) -> Check:
    value = float(value)
    ok = value <= threshold if below else value >= threshold
    return Check(name, bool(ok and math.isfinite(value)), value, float(threshold), detail)


def spectrum_checks(spectra) -> list[Check]:
    bad = [v for ch in spectra for v in ch.violations()]
    worst = max(float(r.residual) for ch in spectra for r in ch.records)
    tol = max(max(ch.tolerances) for ch in spectra)
    out = [
        _check("spectrum.violations", len(bad), 0, "; ".join(bad[:5])),
        _check("spectrum.max_residual", worst, tol),
    ]
    osc = [(r, ch.gamma) for ch in spectra[:3] for r in ch.oscillatory]
    ident = max(abs(root_identity_residual(r, g)) for r, g in osc)
    out.append(_check("spectrum.root_identity", ident, 1e-9))
    return out


def sign_scan_check(spectra, points: int = 10_000, modes: int = 5) -> Check:
    """Exactly one sign change of char_fn per oscillatory bracket on a fine scan."""
    worst = 0
    for ch in spectra[:3]:
        for m in range(1, modes + 1):
            z = np.linspace(math.pi * m + 1e-6, math.pi * (m + 1) - 1e-6, points)
            f = char_fn(z, ch.gamma)
            changes = int(np.count_nonzero(np.signbit(f[1:]) != np.signbit(f[:-1])))
            worst = max(worst, abs(changes - 1))
    return _check("charroots.sign_scan_uniqueness", worst, 0)


def branch_exclusivity_check() -> Check:
    failures = 0
    for g in BRANCH_GAMMAS:
        found = []
        for solver in (lambda: solve_oscillatory_root(g, 0), lambda: solve_principal_root(g)):
            try:
                solver()
                found.append(True)
            except NumericalError:
                found.append(False)
        if found.count(True) != 1 or found[0] != has_low_oscillatory_root(g):
            failures += 1
    return _check("charroots.branch_exclusivity", failures, 0)


def continuation_check(samples: int = 100) -> Check:
    """char_fn_imag(w) against Re f(i w) evaluated in complex arithmetic."""
    rng = np.random.default_rng(SEED)
    g = rng.uniform(1.05, 200.0, samples)
    w = rng.uniform(0.05, 3.0, samples) * np.sqrt(g)
    far = np.abs(g - w * w) > 1e-3 * g
    g, w = g[far], w[far]
    z = 1j * w
    s = z * z + g
    ref = (z * np.cos(z) / np.sin(z) - s + 1.0 / s).real
    got = np.array([char_fn_imag(wi, gi) for wi, gi in zip(w, g)])
    err = np.max(np.abs(got - ref) / np.maximum(1.0, np.abs(ref)))
    return _check("charroots.continuation", err, 1e-12)


def _probe_channels(cfg: RunConfig) -> list[ChannelPotential]:
    chans = [cfg.potential.channel(k) for k in cfg.potential.active]
    return chans or [PROBE_POTENTIAL]


def potential_checks(cfg: RunConfig) -> list[Check]:
    t, w = composite_nodes(8)  # 64 points
    mean = max(abs(float(np.dot(w, q(t)))) for q in _probe_channels(cfg))
    h = 1e-5
    grid = np.linspace(0.05, 0.95, 19)
    fd = 0.0
    for q in _probe_channels(cfg):
        scale = max(1.0, float(np.max(np.abs(q(grid, 1)))))
        d1 = (q(grid + h) - q(grid - h)) / (2 * h)
        d2 = (q(grid + h, 1) - q(grid - h, 1)) / (2 * h)
        fd = max(fd, float(np.max(np.abs(d1 - q(grid, 1)))) / scale,
                 float(np.max(np.abs(d2 - q(grid, 2)))) / max(1.0, float(np.max(np.abs(q(grid, 2))))))
    return [_check("model.zero_mean", mean, 1e-12), _check("model.derivative_consistency", fd, 1e-6)]


def norm_checks(spectra) -> list[Check]:
    worst = 0.0
    for ch in spectra:
        for r in ch.oscillatory:
            md = normalized_mode(r, ch.gamma)
            if md.method == "closed_form":
                worst = max(worst, abs(md.norm2 - quadrature_norm2(r)) / md.norm2)
    unit = max(abs(normalized_mode(r, ch.gamma).unit_norm_defect()) for ch in spectra[:3] for r in ch.records)
    return [_check("traceform.norm_consistency", worst, 1e-8), _check("traceform.unit_norm", unit, 1e-10)]


def perturb_and_trace_checks(cfg: RunConfig, spectra, workers: int) -> list[Check]:
    num = cfg.numerics
    pairs = solve_perturbed(spectra, cfg.potential, num["tol_root"], num["ivp_steps"], workers,
                            num["panel_factor"])
    excess = max(abs(p.shift) - cfg.potential.channel(k).sup_norm() for k, ps in pairs.items() for p in ps)
    elements = {ch.k: channel_elements(ch, cfg.potential.channel(ch.k))[0] for ch in spectra}
    ledger = pair_and_sum(spectra, pairs, elements, num["schedule"], trace_target(cfg.potential))
    out = [_check("perturbed.weyl_bound", excess, 1e-8)]
    book = 0.0
    for qn, d in ledger.partial_sums.items():
        parts = np.array([d["oscillatory"], d["principal"], d["negative"]])
        total = np.array([math.fsum(col) for col in parts.T])
        book = max(book, float(np.max(np.abs(total - np.array(d["total"])))))
    out.append(_check("traceform.branch_bookkeeping", book, 0.0))
    active = set(cfg.potential.active)
    idle = max((abs(e.shift) + abs(e.element) for e in ledger.entries if e.k not in active), default=0.0)
    out.append(_check("traceform.inactive_channels_zero", idle, 0.0))
    if not active:
        allsums = max(abs(v) for d in ledger.partial_sums.values() for vals in d.values() for v in vals)
        out.append(_check("traceform.zero_potential_sums", allsums, 0.0))
    return out


def fem_checks(n: int = 200, count: int = 8) -> list[Check]:
    from .charroots import enumerate_channel

    census_bad, asym, green, rayleigh, bc = 0, 0.0, 0.0, 0.0, 0.0
    for g in FEM_GAMMAS:
        forms = assemble_forms([g], None, n)
        asym = max(asym, float(np.max(np.abs(forms.A - forms.A.T))), float(np.max(np.abs(forms.B - forms.B.T))))
        green = max(green, float(np.max(green_identity_residuals(forms, seed=SEED))))
        chk = eigenpair_checks(forms, count)
        rayleigh = max(rayleigh, float(np.max(chk["rayleigh_residual"] / np.maximum(1.0, np.abs(chk["lams"])))))
        bc = max(bc, float(np.max(chk["boundary_relation"])))
        oc = oracle_spectrum([g], None, n, count)[0]
        base = enumerate_channel(g, count + 2)
        ref = {b.value: 0 for b in Branch}
        for r in base.records[:count]:
            ref[r.branch.value] += 1
        census_bad += oc.census() != ref
    return [
        _check("discretizer.census", census_bad, 0),
        _check("discretizer.symmetry", asym, 0.0),
        _check("discretizer.green_identity", green, 0.0),
        _check("discretizer.rayleigh", rayleigh, 1e-10),
        _check("discretizer.boundary_relation", bc, 10.0 / n),
    ]


def counting_checks(cfg: RunConfig) -> list[Check]:
    spec = cfg.operator
    num = cfg.numerics
    out = []
    recip = max(abs(a * b - 1.0) for a, b in map(cnt.table_exponents, (0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0)))
    out.append(_check("counting.table_reciprocity", recip, 1e-15))
    cen = cnt.census(spec, num["M_modes"], num["tol_root"], num["include_negative"])
    lo, hi = cnt.validity_window(spec, num["M_modes"], cen)
    grid = np.linspace(lo, hi, 100)
    N = cen.N(grid)
    out.append(_check("counting.monotone", int(np.count_nonzero(np.diff(N) < 0)), 0))
    out.append(_check("counting.window_nonempty", hi - lo, 0.0, below=False))
    cen2 = cnt.census(spec, 2 * num["M_modes"], num["tol_root"], num["include_negative"])
    grid = np.geomspace(lo, hi, 200)
    out.append(_check("counting.window_soundness", int(np.max(np.abs(cen2.N(grid) - cen.N(grid)))), 0))
    if spec.generated:
        try:
            rep = cnt.counting_report(spec, num["M_modes"], num["tol_root"], num["include_negative"],
                                      num["fit_decades"])
            out.append(_check("counting.inversion_product", abs(rep.exponent_product - 1.0), 0.05))
        except Exception as exc:  # report, do not abort the suite
            out.append(Check("counting.inversion_product", False, math.nan, 0.05, str(exc)))
    return out


def run_checks(cfg: RunConfig, workers: int = 1) -> list[Check]:
    spectra = spectra_for(cfg)
    checks = spectrum_checks(spectra)
    checks.append(sign_scan_check(spectra))
    checks.append(branch_exclusivity_check())
    checks.append(continuation_check())
    checks += potential_checks(cfg)
    checks += norm_checks(spectra)
    checks += perturb_and_trace_checks(cfg, spectra, workers)
    checks += fem_checks()
    checks += counting_checks(cfg)
    return checks


def run_verify(cfg: RunConfig, out: Path, workers: int = 1) -> tuple[list[Path], bool]:
    checks = run_checks(cfg, workers)
    passed = all(c.passed for c in checks)
    payload = {
        "all_passed": passed,
        "failed": [c.name for c in checks if not c.passed],
        "checks": [asdict(c) for c in checks],
    }
    return [write_json(out / "verify.json", payload, cfg.sha256)], passed
