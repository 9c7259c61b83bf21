"""Run configuration: JSON document -> validated RunConfig."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import SpecError
from .model import OperatorSpec, PotentialSpec, make_operator_spec, operator_from_gammas

DEFAULTS: dict[str, Any] = {
    "operator": {"a": 2.0, "alpha": 3.0, "K": 30},
    "potential": {},
    "numerics": {
        "tol_root": 1e-12,
        "ivp_steps": 4096,
        "grid_n": 1000,
        "M_modes": 200,
        "include_negative": True,
        "schedule": [25, 50, 100, 200],
        "oracle_count": 10,
        "oracle_channels": 3,
        "fit_decades": 2.0,
        "check_doubling": True,
        "panel_factor": 0.5,
        "dump_matrices": False,
    },
    "output": {"directory": "out", "formats": ["csv", "json"]},
    "workers": None,
}

_NUMERIC_KEYS = set(DEFAULTS["numerics"])


def _merge(base: dict, extra: dict, where: str) -> dict:
    out = copy.deepcopy(base)
    for key, val in extra.items():
        if key not in base:
            raise SpecError(f"unknown config key {where}{key!r}")
        if isinstance(base[key], dict) and key not in ("potential",):
            if not isinstance(val, dict):
                raise SpecError(f"config section {where}{key!r} must be an object")
            if key == "operator":
                out[key] = dict(val)
            else:
                out[key] = _merge(base[key], val, f"{where}{key}.")
        else:
            out[key] = val
    return out


@dataclass(frozen=True)
class RunConfig:
    operator: OperatorSpec
    potential: PotentialSpec
    numerics: dict
    output: dict
    workers: int | None
    raw: dict = field(repr=False, compare=False)

    @property
    def sha256(self) -> str:
        return config_hash(self.raw)

    def get(self, key: str):
        return self.numerics[key]

    def require_modes(self, minimum: int = 10) -> None:
        if self.numerics["M_modes"] < minimum:
            raise SpecError(f"M_modes must be at least {minimum} for this command")


def config_hash(raw: dict) -> str:
    text = json.dumps(raw, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _operator(section: dict) -> OperatorSpec:
    keys = set(section)
    if "gammas" in keys:
        if keys - {"gammas"}:
            raise SpecError("operator: give either gammas or (a, alpha, K), not both")
        return operator_from_gammas(section["gammas"])
    if keys != {"a", "alpha", "K"}:
        raise SpecError("operator needs keys a, alpha, K (or gammas)")
    if isinstance(section["K"], bool) or not isinstance(section["K"], int):
        raise SpecError("operator.K must be an integer")
    return make_operator_spec(section["a"], section["alpha"], section["K"])


def _potential(section: dict, K: int) -> PotentialSpec:
    if not isinstance(section, dict):
        raise SpecError("potential must map channel index to a coefficient list")
    chans = {}
    for key, coeffs in section.items():
        try:
            k = int(key)
        except (TypeError, ValueError) as exc:
            raise SpecError(f"potential channel key {key!r} is not an integer") from exc
        if str(k) != str(key).strip():
            raise SpecError(f"potential channel key {key!r} is not an integer")
        if not 1 <= k <= K:
            raise SpecError(f"potential channel {k} outside 1..{K}")
        if not isinstance(coeffs, list) or not all(isinstance(c, (int, float)) and not isinstance(c, bool)
                                                   for c in coeffs):
            raise SpecError(f"potential channel {k}: coefficients must be a list of real numbers")
        chans[k] = coeffs
    return PotentialSpec.from_coefficients(chans)


def _validate_numerics(num: dict) -> None:
    def is_int(v):
        return isinstance(v, int) and not isinstance(v, bool)

    tol = num["tol_root"]
    if not isinstance(tol, (int, float)) or isinstance(tol, bool) or not 0 < tol <= 1e-6:
        raise SpecError("numerics.tol_root must lie in (0, 1e-6]")
    for key, low in (("ivp_steps", 16), ("grid_n", 8), ("M_modes", 1), ("oracle_count", 1),
                     ("oracle_channels", 1)):
        if not is_int(num[key]) or num[key] < low:
            raise SpecError(f"numerics.{key} must be an integer >= {low}")
    if not isinstance(num["include_negative"], bool):
        raise SpecError("numerics.include_negative must be true or false")
    sched = num["schedule"]
    if (not isinstance(sched, list) or not sched or not all(is_int(c) and c >= 1 for c in sched)
            or sched != sorted(set(sched))):
        raise SpecError("numerics.schedule must be a strictly increasing list of positive integers")
    if sched[-1] > num["M_modes"]:
        raise SpecError("numerics.schedule exceeds M_modes")
    fd = num["fit_decades"]
    if fd is not None and (not isinstance(fd, (int, float)) or fd < 1):
        raise SpecError("numerics.fit_decades must be null or >= 1")
    if not isinstance(num["panel_factor"], (int, float)) or num["panel_factor"] <= 0:
        raise SpecError("numerics.panel_factor must be positive")


def parse_config(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise SpecError("config must be a JSON object")
    raw = _merge(DEFAULTS, doc, "")
    op = _operator(raw["operator"])
    pot = _potential(raw["potential"], op.K)
    _validate_numerics(raw["numerics"])
    out = raw["output"]
    if not isinstance(out.get("directory"), str):
        raise SpecError("output.directory must be a string")
    fmts = out.get("formats")
    if not isinstance(fmts, list) or not set(fmts) <= {"csv", "json"}:
        raise SpecError("output.formats must be a subset of [\"csv\", \"json\"]")
    workers = raw["workers"]
    if workers is not None and (not isinstance(workers, int) or isinstance(workers, bool) or workers < 1):
        raise SpecError("workers must be null or a positive integer")
    return RunConfig(op, pot, dict(raw["numerics"]), dict(out), workers, raw)


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return parse_config({})
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SpecError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(doc)
