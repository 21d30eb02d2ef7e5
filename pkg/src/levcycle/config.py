"""Run configurations for the three simulation engines.

Config files are TOML with one section per agent/block, field names kept
verbatim from the model's parameter tables (``E_0``, ``lambda_0``, ``A_N_0``,
``w_c`` ...). Every loader materializes all defaults, validates ranges and
rejects unknown keys with the offending ``section.key`` path.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .errors import ConfigError

ALLOCATORS = ("softmax", "optimizer")
VAR_EQUITY_MODES = ("deterministic", "stochastic")

# numeric guards shared by all engines
VAR_FLOOR = 1e-12        # variance floor before sigma^b with b<0 or 1/sigma
TINY_FLOOR = 1e-12       # floor for dividends and raw noise-trader weights
INSTABILITY_LIMIT = 1e12  # any price/leverage/|dB| beyond this flags the run
COND_LIMIT = 1e12        # condition-number ceiling for the clearing solve
DENOM_EPS = 1e-6         # degeneracy bound for the reduced-model price update
ALPHA_FLOOR = 1e-6       # policy rule may not drive the risk parameter to 0
WN_CLAMP = (0.05, 0.95)  # stochastic noise-trader weight clamp


@dataclass
class FullModelConfig:
    """Multi-asset model parameters (one bank, one noise trader, N_S stocks)."""

    # bank
    delta: float = 0.1        # covariance estimation memory
    alpha: float = 0.1        # risk parameter
    b: float = -0.5           # cyclicality exponent
    E_0: float = 23.0         # initial bank equity
    lambda_0: float = 5.0     # initial bank leverage, (A - c)/E
    w_c: float = 0.2          # cash weight
    gamma: float = 0.1        # dividend-price estimation memory
    beta: float = 0.1         # intensity of choice
    N_b: int = 1              # number of banks
    sigma_0: float = 0.0      # perceived-risk offset
    # noise trader
    A_N_0: float = 115.0      # initial noise trader assets
    rho: float = 0.05         # portfolio balance rate
    zeta: float = 5.0         # fundamentalist scale
    eta: float = 0.2          # weight-noise standard deviation
    # dividends
    mu: float = 1e-5          # drift
    phi: float = 0.05         # volatility
    N_S: int = 3              # number of stocks
    pi_0: float = 1.0         # initial dividend level
    # run
    T: int = 2000
    seed: int = 0
    active: bool = True       # False: no leverage management (dB = 0)
    allocator: str = "softmax"
    var_a: float = 1.0        # VaR scale consumed as-is by the optimizer

    def validate(self) -> "FullModelConfig":
        _require("bank.delta", 0.0 < self.delta <= 1.0, "must be in (0, 1]")
        _require("bank.gamma", 0.0 < self.gamma <= 1.0, "must be in (0, 1]")
        _require("bank.w_c", 0.0 < self.w_c < 1.0, "must be in (0, 1)")
        _require("bank.alpha", self.alpha > 0.0, "must be > 0")
        _require("bank.b", -0.5 <= self.b <= 0.5, "must be in [-0.5, 0.5]")
        _require("bank.E_0", self.E_0 > 0.0, "must be > 0")
        _require("bank.lambda_0", self.lambda_0 > 0.0, "must be > 0")
        _require("bank.N_b", self.N_b >= 1, "must be >= 1")
        _require("bank.sigma_0", self.sigma_0 >= 0.0, "must be >= 0")
        _require("noise_trader.A_N_0", self.A_N_0 > 0.0, "must be > 0")
        _require("noise_trader.eta", self.eta >= 0.0, "must be >= 0")
        _require("dividends.phi", self.phi >= 0.0, "must be >= 0")
        _require("dividends.N_S", self.N_S >= 1, "must be >= 1")
        _require("dividends.pi_0", self.pi_0 > 0.0, "must be > 0")
        _require("run.T", self.T >= 0, "must be >= 0")
        _require("run.allocator", self.allocator in ALLOCATORS,
                 f"must be one of {ALLOCATORS}")
        _require("run.var_a", self.var_a > 0.0, "must be > 0")
        return self

    def to_sections(self) -> dict:
        return {
            "bank": {"delta": self.delta, "alpha": self.alpha, "b": self.b,
                     "E_0": self.E_0, "lambda_0": self.lambda_0, "w_c": self.w_c,
                     "gamma": self.gamma, "beta": self.beta, "N_b": self.N_b,
                     "sigma_0": self.sigma_0},
            "noise_trader": {"A_N_0": self.A_N_0, "rho": self.rho,
                             "zeta": self.zeta, "eta": self.eta},
            "dividends": {"mu": self.mu, "phi": self.phi, "N_S": self.N_S,
                          "pi_0": self.pi_0},
            "run": {"T": self.T, "seed": self.seed, "active": self.active,
                    "allocator": self.allocator, "var_a": self.var_a},
        }


@dataclass
class VarEquityConfig:
    """Variable-equity reduced model parameters (one bank, one noise trader, one stock)."""

    # bank
    delta: float = 0.1
    alpha: float = 0.25
    b: float = -0.5
    E_0: float = 10.0         # equity target for redistribution
    lambda_0: float = 5.0
    w_B: float = 0.05         # bank stock weight (1 - w_c)
    n_0: float = 0.1          # initial bank share of the stock
    xi: float = 1.2           # equity redistribution rate (0 disables)
    sigma_0: float = 0.0
    sigma2_init: float | None = None  # None: consistent with lambda_0
    # noise trader
    rho: float = 0.9
    eta: float = 0.01
    # policy rule on the risk parameter
    alpha_0: float | None = None   # defaults to alpha
    rho_alpha: float = 0.5
    delta_alpha: float = 0.1
    theta: float = 0.0
    # run
    T: int = 5000
    seed: int = 0
    mode: str = "stochastic"

    @property
    def alpha_target(self) -> float:
        return self.alpha if self.alpha_0 is None else self.alpha_0

    def validate(self) -> "VarEquityConfig":
        _require("bank.delta", 0.0 < self.delta < 1.0, "must be in (0, 1)")
        _require("bank.alpha", self.alpha > 0.0, "must be > 0")
        _require("bank.b", -0.5 <= self.b <= 0.5, "must be in [-0.5, 0.5]")
        _require("bank.E_0", self.E_0 > 0.0, "must be > 0")
        _require("bank.w_B", 0.0 < self.w_B < 1.0, "must be in (0, 1)")
        _require("bank.n_0", 0.0 < self.n_0 <= 1.0, "must be in (0, 1]")
        _require("bank.xi", self.xi >= 0.0, "must be >= 0")
        _require("bank.sigma_0", self.sigma_0 >= 0.0, "must be >= 0")
        if self.sigma2_init is not None:
            _require("bank.sigma2_init", self.sigma2_init > 0.0, "must be > 0")
        _require("noise_trader.eta", self.eta >= 0.0, "must be >= 0")
        _require("policy_rule.rho_alpha", 0.0 < self.rho_alpha < 1.0,
                 "must be in (0, 1)")
        _require("policy_rule.delta_alpha", 0.0 <= self.delta_alpha <= 1.0,
                 "must be in [0, 1]")
        _require("policy_rule.theta", self.theta >= 0.0, "must be >= 0")
        if self.alpha_0 is not None:
            _require("policy_rule.alpha_0", self.alpha_0 > 0.0, "must be > 0")
        _require("run.T", self.T >= 0, "must be >= 0")
        _require("run.mode", self.mode in VAR_EQUITY_MODES,
                 f"must be one of {VAR_EQUITY_MODES}")
        return self

    def to_sections(self) -> dict:
        policy = {"rho_alpha": self.rho_alpha, "delta_alpha": self.delta_alpha,
                  "theta": self.theta}
        if self.alpha_0 is not None:
            policy["alpha_0"] = self.alpha_0
        return {
            "bank": {"delta": self.delta, "alpha": self.alpha, "b": self.b,
                     "E_0": self.E_0, "lambda_0": self.lambda_0, "w_B": self.w_B,
                     "n_0": self.n_0, "xi": self.xi, "sigma_0": self.sigma_0,
                     **({"sigma2_init": self.sigma2_init}
                        if self.sigma2_init is not None else {})},
            "noise_trader": {"rho": self.rho, "eta": self.eta},
            "policy_rule": policy,
            "run": {"T": self.T, "seed": self.seed, "mode": self.mode},
        }


@dataclass
class Map2DConfig:
    """Constant-equity 2D map parameters."""

    delta: float = 0.1
    alpha: float = 0.1        # price scale: p = alpha * E / sqrt(z1)
    E: float = 1.0            # constant investor equity
    z1_0: float = 0.01
    z2_0: float = 0.02
    jitter: float = 1e-12     # multiplicative perturbation amplitude on z1
    T: int = 20000
    seed: int = 0

    def validate(self) -> "Map2DConfig":
        _require("map.delta", 0.0 < self.delta < 1.0, "must be in (0, 1)")
        _require("map.alpha", self.alpha > 0.0, "must be > 0")
        _require("map.E", self.E > 0.0, "must be > 0")
        _require("map.z1_0", self.z1_0 > 0.0, "must be > 0")
        _require("map.z2_0", self.z2_0 > 0.0, "must be > 0")
        _require("map.jitter", 0.0 <= self.jitter <= 1e-10,
                 "must be in [0, 1e-10]")
        _require("run.T", self.T >= 0, "must be >= 0")
        return self

    def to_sections(self) -> dict:
        return {
            "map": {"delta": self.delta, "alpha": self.alpha, "E": self.E,
                    "z1_0": self.z1_0, "z2_0": self.z2_0, "jitter": self.jitter},
            "run": {"T": self.T, "seed": self.seed},
        }


def _require(field: str, ok: bool, message: str) -> None:
    if not ok:
        raise ConfigError(field, message)


# section.key -> (dataclass attribute, expected type)
_FULL_FIELDS = {
    ("bank", "delta"): ("delta", float), ("bank", "alpha"): ("alpha", float),
    ("bank", "b"): ("b", float), ("bank", "E_0"): ("E_0", float),
    ("bank", "lambda_0"): ("lambda_0", float), ("bank", "w_c"): ("w_c", float),
    ("bank", "gamma"): ("gamma", float), ("bank", "beta"): ("beta", float),
    ("bank", "N_b"): ("N_b", int), ("bank", "sigma_0"): ("sigma_0", float),
    ("noise_trader", "A_N_0"): ("A_N_0", float),
    ("noise_trader", "rho"): ("rho", float),
    ("noise_trader", "zeta"): ("zeta", float),
    ("noise_trader", "eta"): ("eta", float),
    ("dividends", "mu"): ("mu", float), ("dividends", "phi"): ("phi", float),
    ("dividends", "N_S"): ("N_S", int), ("dividends", "pi_0"): ("pi_0", float),
    ("run", "T"): ("T", int), ("run", "seed"): ("seed", int),
    ("run", "active"): ("active", bool),
    ("run", "allocator"): ("allocator", str), ("run", "var_a"): ("var_a", float),
}

_VAR_FIELDS = {
    ("bank", "delta"): ("delta", float), ("bank", "alpha"): ("alpha", float),
    ("bank", "b"): ("b", float), ("bank", "E_0"): ("E_0", float),
    ("bank", "lambda_0"): ("lambda_0", float), ("bank", "w_B"): ("w_B", float),
    ("bank", "n_0"): ("n_0", float), ("bank", "xi"): ("xi", float),
    ("bank", "sigma_0"): ("sigma_0", float),
    ("bank", "sigma2_init"): ("sigma2_init", float),
    ("noise_trader", "rho"): ("rho", float),
    ("noise_trader", "eta"): ("eta", float),
    ("policy_rule", "alpha_0"): ("alpha_0", float),
    ("policy_rule", "rho_alpha"): ("rho_alpha", float),
    ("policy_rule", "delta_alpha"): ("delta_alpha", float),
    ("policy_rule", "theta"): ("theta", float),
    ("run", "T"): ("T", int), ("run", "seed"): ("seed", int),
    ("run", "mode"): ("mode", str),
}

_MAP_FIELDS = {
    ("map", "delta"): ("delta", float), ("map", "alpha"): ("alpha", float),
    ("map", "E"): ("E", float), ("map", "z1_0"): ("z1_0", float),
    ("map", "z2_0"): ("z2_0", float), ("map", "jitter"): ("jitter", float),
    ("run", "T"): ("T", int), ("run", "seed"): ("seed", int),
}


def _from_sections(cls, fields, data: dict, source: str):
    kwargs: dict[str, Any] = {}
    for section, content in data.items():
        if not isinstance(content, dict):
            raise ConfigError(str(section), f"expected a section table in {source}")
        for key, value in content.items():
            try:
                attr, typ = fields[(section, key)]
            except KeyError:
                raise ConfigError(f"{section}.{key}", f"unknown field in {source}")
            kwargs[attr] = _coerce(f"{section}.{key}", value, typ)
    return cls(**kwargs).validate()


def _coerce(field: str, value, typ):
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(field, f"expected a number, got {value!r}")
        return float(value)
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(field, f"expected an integer, got {value!r}")
        return int(value)
    if typ is bool:
        if not isinstance(value, bool):
            raise ConfigError(field, f"expected a boolean, got {value!r}")
        return value
    if not isinstance(value, str):
        raise ConfigError(field, f"expected a string, got {value!r}")
    return value


def _load_toml(path: str | Path) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def load_full_config(path: str | Path | None = None, overrides: dict | None = None,
                     data: dict | None = None) -> FullModelConfig:
    return _load(FullModelConfig, _FULL_FIELDS, path, overrides, data)


def load_var_equity_config(path: str | Path | None = None, overrides: dict | None = None,
                           data: dict | None = None) -> VarEquityConfig:
    return _load(VarEquityConfig, _VAR_FIELDS, path, overrides, data)


def load_map2d_config(path: str | Path | None = None, overrides: dict | None = None,
                      data: dict | None = None) -> Map2DConfig:
    return _load(Map2DConfig, _MAP_FIELDS, path, overrides, data)


def _load(cls, fields, path, overrides, data):
    if path is not None and data is not None:
        raise ValueError("pass either a path or a data dict, not both")
    if path is not None:
        data = _load_toml(path)
    cfg = _from_sections(cls, fields, data, str(path or "config")) if data else cls()
    if overrides:
        valid = {f.name for f in dataclasses.fields(cls)}
        for attr, value in overrides.items():
            if attr not in valid:
                raise ConfigError(attr, "unknown override")
            if value is not None:
                setattr(cfg, attr, value)
        cfg.validate()
    return cfg
