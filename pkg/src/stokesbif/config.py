"""Run configuration: loading, defaults, validation and command-line overrides.

A configuration is a YAML (or JSON) mapping with these sections::

    omega: [0.0]              # coefficients of omega(p) = sum c_i p^i
    R: 1.75                   # Bernoulli constant
    grid:
      n_q: 64                 # q-nodes per half wavelength
      n_p: 64                 # p-intervals
    continuation:
      n_steps: 40
      step_size: null         # null: amplitude_fraction * (R - d) / n_steps
      amplitude_fraction: 0.3 # amplitude cap as a fraction of R - d
      stagnation_fraction: 0.05
      slope_bound: 10.0
    spectra:
      M: [3]                  # odd primes
      tau_samples: 4          # Floquet samples on [0, tau_*/2] per reported point
      zero_tol: null          # null: grid-scaled default
      stride: 4               # report spectra every stride-th branch point
      routes: [dn]            # any of dn, 2d, physical
    model:
      eps: [1.0e-3, 1.0e-4, 1.0e-5, 1.0e-6]
      delta: 10.0
      sigma: 1.0
      gamma_phase: 1.5707963267948966
      k_range: [-2, 6]
      z_samples: 200

Only two environment variables are read: ``STOKESBIF_OUTDIR`` (default
output directory) and ``STOKESBIF_THREADS`` (worker threads for spectra).
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigError, PreconditionError
from .vorticity import VorticityModel, critical_constants

ENV_OUTDIR = "STOKESBIF_OUTDIR"
ENV_THREADS = "STOKESBIF_THREADS"

DEFAULTS: dict[str, Any] = {
    "omega": [0.0],
    "R": 1.75,
    "grid": {"n_q": 64, "n_p": 64},
    "continuation": {
        "n_steps": 40,
        "step_size": None,
        "amplitude_fraction": 0.3,
        "stagnation_fraction": 0.05,
        "slope_bound": 10.0,
    },
    "spectra": {"M": [3], "tau_samples": 4, "zero_tol": None, "stride": 4, "routes": ["dn"]},
    "model": {
        "eps": [1e-3, 1e-4, 1e-5, 1e-6],
        "delta": 10.0,
        "sigma": 1.0,
        "gamma_phase": math.pi / 2.0,
        "k_range": [-2, 6],
        "z_samples": 200,
    },
}

ROUTES = ("dn", "2d", "physical")


def _is_odd_prime(m: int) -> bool:
    if m < 3 or m % 2 == 0:
        return False
    return all(m % d for d in range(3, int(math.isqrt(m)) + 1, 2))


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"{where}: unknown field")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{where}: expected a mapping")
            out[key] = _merge(base[key], val, where + ".")
        else:
            out[key] = val
    return out


def _num(d: dict, key: str, where: str, *, positive=True, integer=False, allow_none=False, lo=None, hi=None):
    val = d[key]
    name = f"{where}.{key}" if where else key
    if val is None:
        if allow_none:
            return None
        raise ConfigError(f"{name}: required")
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{name}: expected a number, got {val!r}")
    if integer and int(val) != val:
        raise ConfigError(f"{name}: expected an integer, got {val!r}")
    if not math.isfinite(val):
        raise ConfigError(f"{name}: must be finite")
    if positive and val <= 0:
        raise ConfigError(f"{name}: must be positive, got {val!r}")
    if lo is not None and val < lo:
        raise ConfigError(f"{name}: must be >= {lo}, got {val!r}")
    if hi is not None and val > hi:
        raise ConfigError(f"{name}: must be <= {hi}, got {val!r}")
    return int(val) if integer else float(val)


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration; ``data`` keeps the normalised mapping."""

    data: dict

    @classmethod
    def from_mapping(cls, raw: dict | None, check_R: bool = True) -> "RunConfig":
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise ConfigError("configuration must be a mapping")
        data = _merge(DEFAULTS, raw)
        cfg = cls(data=_validate(data))
        if check_R:
            cfg.check_bernoulli()
        return cfg

    @classmethod
    def load(cls, path, check_R: bool = True) -> "RunConfig":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read ({exc.strerror})") from exc
        try:
            raw = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
        except (yaml.YAMLError, json.JSONDecodeError) as exc:
            raise ConfigError(f"{path}: parse error: {exc}") from exc
        return cls.from_mapping(raw, check_R=check_R)

    def override(self, updates: dict, check_R: bool = True) -> "RunConfig":
        """Apply dotted-key updates such as ``{"grid.n_q": 32}``."""
        nested: dict = {}
        for key, val in updates.items():
            cur = nested
            parts = key.split(".")
            for p in parts[:-1]:
                cur = cur.setdefault(p, {})
            cur[parts[-1]] = val
        merged = _merge(self.data, nested)
        cfg = RunConfig(data=_validate(merged))
        if check_R:
            cfg.check_bernoulli()
        return cfg

    # convenience accessors
    @property
    def model(self) -> VorticityModel:
        return VorticityModel(tuple(self.data["omega"]))

    @property
    def R(self) -> float:
        return self.data["R"]

    def __getitem__(self, key):
        return self.data[key]

    def check_bernoulli(self) -> None:
        crit = critical_constants(self.model)
        if not (crit.Rc < self.R < crit.R0):
            if self.R <= crit.Rc:
                raise PreconditionError(f"R below critical: R={self.R} <= Rc={crit.Rc:.12g}")
            raise PreconditionError(f"R above the stagnation bound: R={self.R} >= R0={crit.R0:.12g}")

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.data, sort_keys=False, default_flow_style=None)

    def digest(self) -> str:
        blob = json.dumps(self.data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _validate(d: dict) -> dict:
    d = copy.deepcopy(d)
    om = d["omega"]
    if isinstance(om, (int, float)) and not isinstance(om, bool):
        om = [om]
    if not isinstance(om, list) or not om:
        raise ConfigError("omega: expected a non-empty list of coefficients")
    for i, c in enumerate(om):
        if isinstance(c, bool) or not isinstance(c, (int, float)) or not math.isfinite(c):
            raise ConfigError(f"omega[{i}]: expected a finite number, got {c!r}")
    d["omega"] = [float(c) for c in om]
    d["R"] = _num(d, "R", "")
    g = d["grid"]
    g["n_q"] = _num(g, "n_q", "grid", integer=True, lo=8)
    g["n_p"] = _num(g, "n_p", "grid", integer=True, lo=8)
    c = d["continuation"]
    c["n_steps"] = _num(c, "n_steps", "continuation", positive=False, integer=True, lo=0)
    c["step_size"] = _num(c, "step_size", "continuation", allow_none=True)
    c["amplitude_fraction"] = _num(c, "amplitude_fraction", "continuation", hi=1.0)
    c["stagnation_fraction"] = _num(c, "stagnation_fraction", "continuation", hi=1.0)
    c["slope_bound"] = _num(c, "slope_bound", "continuation")
    s = d["spectra"]
    Ms = s["M"]
    if isinstance(Ms, int) and not isinstance(Ms, bool):
        Ms = [Ms]
    if not isinstance(Ms, list):
        raise ConfigError("spectra.M: expected a list of odd primes")
    for m in Ms:
        if isinstance(m, bool) or not isinstance(m, int) or not _is_odd_prime(m):
            raise ConfigError(f"spectra.M: {m!r} is not an odd prime")
    s["M"] = sorted(set(Ms))
    s["tau_samples"] = _num(s, "tau_samples", "spectra", positive=False, integer=True, lo=0)
    s["zero_tol"] = _num(s, "zero_tol", "spectra", allow_none=True)
    s["stride"] = _num(s, "stride", "spectra", integer=True)
    routes = s["routes"]
    if isinstance(routes, str):
        routes = [routes]
    if not isinstance(routes, list) or not routes or any(r not in ROUTES for r in routes):
        raise ConfigError(f"spectra.routes: expected a non-empty subset of {list(ROUTES)}, got {routes!r}")
    s["routes"] = [r for r in ROUTES if r in routes]
    m = d["model"]
    eps = m["eps"]
    if isinstance(eps, (int, float)) and not isinstance(eps, bool):
        eps = [eps]
    if not isinstance(eps, list) or not eps:
        raise ConfigError("model.eps: expected a non-empty list")
    for e in eps:
        if isinstance(e, bool) or not isinstance(e, (int, float)) or not (0.0 < e < 1.0):
            raise ConfigError(f"model.eps: {e!r} must lie in (0, 1)")
    m["eps"] = sorted((float(e) for e in eps), reverse=True)
    m["delta"] = _num(m, "delta", "model")
    m["sigma"] = _num(m, "sigma", "model")
    m["gamma_phase"] = _num(m, "gamma_phase", "model", hi=math.pi)
    kr = m["k_range"]
    if not (isinstance(kr, list) and len(kr) == 2 and all(isinstance(k, int) and not isinstance(k, bool) for k in kr)):
        raise ConfigError("model.k_range: expected [k_min, k_max] integers")
    if kr[0] > kr[1]:
        raise ConfigError("model.k_range: k_min exceeds k_max")
    m["z_samples"] = _num(m, "z_samples", "model", integer=True, lo=2)
    return d


def env_outdir(default: str = "runs") -> Path:
    return Path(os.environ.get(ENV_OUTDIR, default))


def env_threads() -> int:
    raw = os.environ.get(ENV_THREADS, "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{ENV_THREADS}: expected an integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError(f"{ENV_THREADS}: must be >= 1")
    return n
