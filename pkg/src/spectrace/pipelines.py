"""One function per CLI command: compute, then write artifacts."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import counting as cnt
from .charroots import ChannelSpectrum, enumerate_spectrum
from .config import RunConfig
from .discretizer import assemble_forms, dump_matrix, eigenpair_checks, green_identity_residuals, \
    oracle_spectrum
from .model import PotentialSpec
from .perturbed import PerturbedPair, solve_perturbed
from .reports import write_csv, write_json
from .traceform import TraceLedger, channel_elements, fourier_endpoint_limit, pair_and_sum, \
    trace_target, trace_verdict

FOURIER_N = 10_000


def spectra_for(cfg: RunConfig, M: int | None = None) -> list[ChannelSpectrum]:
    num = cfg.numerics
    return enumerate_spectrum(cfg.operator, M or num["M_modes"], num["include_negative"], num["tol_root"])


def _wants(cfg: RunConfig, fmt: str) -> bool:
    return fmt in cfg.output["formats"]


def run_spectrum(cfg: RunConfig, out: Path) -> list[Path]:
    spectra = spectra_for(cfg)
    paths = []
    header = ["k", "gamma", "branch", "m", "root_param", "lambda", "residual"]
    for ch in spectra:
        rows = [(r.k, ch.gamma, r.branch, r.m, r.root_param, r.lam, r.residual) for r in ch.records]
        if _wants(cfg, "csv"):
            paths.append(write_csv(out / f"spectrum_k{ch.k:03d}.csv", header, rows, cfg.sha256))
    if _wants(cfg, "json"):
        summary = {
            "channels": [{"k": ch.k, "gamma": ch.gamma, "census": ch.census(),
                          "violations": ch.violations()} for ch in spectra],
            "M_modes": cfg.numerics["M_modes"],
        }
        paths.append(write_json(out / "spectrum_summary.json", summary, cfg.sha256))
    return paths


def compute_counting(cfg: RunConfig) -> tuple[cnt.CountingReport, cnt.CountingReport | None]:
    cfg.require_modes()
    num = cfg.numerics
    kw = dict(tol=num["tol_root"], include_negative=num["include_negative"], fit_decades=num["fit_decades"])
    rep = cnt.counting_report(cfg.operator, num["M_modes"], **kw)
    rep2 = cnt.counting_report(cfg.operator, 2 * num["M_modes"], **kw) if num["check_doubling"] else None
    return rep, rep2


def run_counting(cfg: RunConfig, out: Path) -> list[Path]:
    rep, rep2 = compute_counting(cfg)
    paths = []
    if _wants(cfg, "json"):
        payload = rep.to_dict()
        if rep2 is not None:
            payload["doubled_M"] = {
                "M": rep2.M,
                "delta_hat": rep2.delta_hat,
                "verdict": rep2.verdict,
                "verdict_stable": rep2.verdict == rep.verdict,
                "window": list(rep2.window),
                "counts_unchanged": [s[1] for s in rep.samples] == [s[1] for s in rep2.samples],
            }
        paths.append(write_json(out / "counting.json", payload, cfg.sha256))
    if _wants(cfg, "csv"):
        rows = [(lam, n, p) for (lam, n), p in zip(rep.samples, rep.principal_counts)]
        paths.append(write_csv(out / "counting_samples.csv", ["lambda", "N", "N_principal"], rows, cfg.sha256))
    return paths


def compute_perturb(cfg: RunConfig, workers: int = 1) -> tuple[list[ChannelSpectrum], dict[int, list[PerturbedPair]]]:
    num = cfg.numerics
    spectra = spectra_for(cfg)
    pairs = solve_perturbed(spectra, cfg.potential, num["tol_root"], num["ivp_steps"], workers,
                            num["panel_factor"])
    return spectra, pairs


def run_perturb(cfg: RunConfig, out: Path, workers: int = 1) -> list[Path]:
    spectra, pairs = compute_perturb(cfg, workers)
    rows = []
    for ch in spectra:
        for p in pairs[ch.k]:
            r = p.record
            rows.append((r.k, r.branch, r.m, r.lam, p.mu, p.shift, p.residual, p.method))
    paths = []
    if _wants(cfg, "csv"):
        header = ["k", "branch", "m", "lambda", "mu", "mu_minus_lambda", "residual", "method"]
        paths.append(write_csv(out / "perturb.csv", header, rows, cfg.sha256))
    if _wants(cfg, "json"):
        bound = {k: cfg.potential.channel(k).sup_norm() for k in pairs}
        worst = max((abs(p.shift) - bound[k] for k, ps in pairs.items() for p in ps), default=-math.inf)
        paths.append(write_json(out / "perturb_summary.json", {
            "active_channels": list(cfg.potential.active),
            "max_weyl_excess": worst,
            "weyl_bound_holds": worst <= 1e-8,
        }, cfg.sha256))
    return paths


@dataclass(frozen=True)
class TraceRun:
    spectra: list[ChannelSpectrum]
    pairs: dict[int, list[PerturbedPair]]
    elements: dict[int, np.ndarray]
    ledger: TraceLedger
    verdict: dict


def compute_trace(cfg: RunConfig, workers: int = 1, fourier_N: int = FOURIER_N) -> TraceRun:
    cfg.require_modes()
    spectra, pairs = compute_perturb(cfg, workers)
    elements = {ch.k: channel_elements(ch, cfg.potential.channel(ch.k))[0] for ch in spectra}
    ledger = pair_and_sum(spectra, pairs, elements, cfg.numerics["schedule"], trace_target(cfg.potential))
    verdict = trace_verdict(ledger, cfg.operator.alpha)
    fourier = {}
    for k in cfg.potential.active:
        q = cfg.potential.channel(k)
        partial, ces = fourier_endpoint_limit(q, fourier_N)
        fourier[str(k)] = {"N": fourier_N, "partial_sum": partial, "cesaro": ces,
                           "endpoint_quarter": (q(0.0) + q(1.0)) / 4.0}
    verdict["fourier_endpoint"] = fourier
    return TraceRun(spectra, pairs, elements, ledger, verdict)


def run_trace(cfg: RunConfig, out: Path, workers: int = 1) -> list[Path]:
    tr = compute_trace(cfg, workers)
    paths = []
    if _wants(cfg, "csv"):
        header = ["k", "branch", "m", "lambda", "mu", "element", "mu_minus_lambda"]
        rows = [(e.k, e.branch, e.m, e.lam, e.mu, e.element, e.shift) for e in tr.ledger.entries]
        paths.append(write_csv(out / "trace_ledger.csv", header, rows, cfg.sha256))
        srows = []
        for qn, by_branch in tr.ledger.partial_sums.items():
            for b, vals in by_branch.items():
                srows += [(cut, qn, b, v) for cut, v in zip(tr.ledger.schedule, vals)]
        paths.append(write_csv(out / "trace_partial_sums.csv", ["cutoff", "quantity", "branch", "value"],
                               srows, cfg.sha256))
    if _wants(cfg, "json"):
        paths.append(write_json(out / "trace_verdict.json", tr.verdict, cfg.sha256))
    return paths


def compute_oracle(cfg: RunConfig) -> dict:
    num = cfg.numerics
    n = num["grid_n"]
    count = num["oracle_count"]
    chans = list(range(1, min(cfg.operator.K, num["oracle_channels"]) + 1))
    gammas = [cfg.operator.gamma(k) for k in chans]
    pot = PotentialSpec({k: cfg.potential.channel(k) for k in chans if k in cfg.potential.channels})
    oracle = oracle_spectrum(gammas, pot, n, count)
    base = enumerate_spectrum(gammas, count + 2, True, num["tol_root"])
    rows, channels = [], []
    for oc, ch in zip(oracle, base):
        k = chans[oc.k - 1]
        ref = ch.lams[:count]
        for i, (lam, b, m) in enumerate(zip(oc.lams, oc.branches, oc.ms)):
            rel = abs(lam - ref[i]) / abs(ref[i])
            rows.append((k, i, b, m, lam, float(ref[i]), rel))
        forms = assemble_forms([ch.gamma], PotentialSpec({1: pot.channel(k)}) if k in pot.channels else None, n)
        checks = eigenpair_checks(forms, count)
        base_census = {"oscillatory": 0, "principal": 0, "negative": 0}
        for r in ch.records[:count]:
            base_census[r.branch.value] += 1
        channels.append({
            "k": k,
            "gamma": ch.gamma,
            "census": oc.census(),
            "charroots_census": base_census,
            "census_matches": oc.census() == base_census,
            "max_asymmetry_A": float(np.max(np.abs(forms.A - forms.A.T))),
            "max_asymmetry_B": float(np.max(np.abs(forms.B - forms.B.T))),
            "max_green_residual": float(np.max(green_identity_residuals(forms))),
            "max_rayleigh_residual": float(np.max(checks["rayleigh_residual"])),
            "max_boundary_relation": float(np.max(checks["boundary_relation"])),
        })
    return {"rows": rows, "channels": channels, "grid_n": n, "potential_active": bool(pot.active)}


def run_oracle(cfg: RunConfig, out: Path) -> list[Path]:
    res = compute_oracle(cfg)
    paths = []
    if _wants(cfg, "csv"):
        header = ["k", "index", "branch", "m", "lambda_fem", "lambda_charroots", "relative_difference"]
        paths.append(write_csv(out / "oracle.csv", header, res["rows"], cfg.sha256))
    if _wants(cfg, "json"):
        payload = {k: v for k, v in res.items() if k != "rows"}
        paths.append(write_json(out / "oracle_checks.json", payload, cfg.sha256))
    if cfg.numerics["dump_matrices"]:
        n = cfg.numerics["grid_n"]
        for k in range(1, min(cfg.operator.K, cfg.numerics["oracle_channels"]) + 1):
            forms = assemble_forms([cfg.operator.gamma(k)],
                                   PotentialSpec({1: cfg.potential.channel(k)}) if k in cfg.potential.channels
                                   else None, n)
            for name, M in (("A", forms.A), ("B", forms.B)):
                p = out / f"oracle_{name}_k{k:03d}.txt"
                p.parent.mkdir(parents=True, exist_ok=True)
                dump_matrix(M, p)
                paths.append(p)
    return paths
