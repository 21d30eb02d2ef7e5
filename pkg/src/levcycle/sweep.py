"""Grid-sweep harness: multi-seed runs over one or two parameter axes.

Every (cell, seed) combination gets an RNG stream derived from the master seed
and its grid coordinates, so the result grid is bit-identical regardless of
evaluation order, worker count or schedule. Failed runs are classifications,
never errors: bankrupt runs report CV 1e4 and unstable runs 1e5, matching the
plotting convention of the heatmap figures.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from .config import FullModelConfig, VarEquityConfig
from .errors import ConfigError
from .metrics import classify_run
from .var_equity import run_var_equity, sigma0_for_max_leverage

MODELS = ("full", "var-equity-deterministic", "var-equity-stochastic")

VAR_EQUITY_PARAMS = ("alpha", "delta", "b", "sigma_0", "lambda_m", "theta",
                     "delta_alpha", "rho_alpha", "alpha_0", "xi", "eta", "rho",
                     "w_B", "n_0", "E_0", "lambda_0", "sigma2_init")
FULL_MODEL_PARAMS = ("alpha", "delta", "b", "sigma_0", "lambda_m", "gamma",
                     "beta", "eta", "zeta", "rho", "w_c", "mu", "phi", "E_0",
                     "lambda_0", "A_N_0", "pi_0", "var_a")


@dataclass
class SweepAxis:
    name: str
    values: tuple[float, ...]

    @staticmethod
    def open_range(name: str, lo: float, hi: float, count: int) -> "SweepAxis":
        """count points on the left-open interval (lo, hi]."""
        if count < 1:
            raise ConfigError("axis.count", "must be >= 1")
        vals = tuple(lo + (hi - lo) * (i + 1) / count for i in range(count))
        return SweepAxis(name, vals)

    @staticmethod
    def closed_range(name: str, lo: float, hi: float, count: int) -> "SweepAxis":
        if count < 1:
            raise ConfigError("axis.count", "must be >= 1")
        if count == 1:
            return SweepAxis(name, (hi,))
        return SweepAxis(name, tuple(np.linspace(lo, hi, count)))

    @staticmethod
    def log_range(name: str, lo: float, hi: float, count: int) -> "SweepAxis":
        if count < 1 or lo <= 0.0:
            raise ConfigError("axis", "log axis needs count >= 1 and lo > 0")
        if count == 1:
            return SweepAxis(name, (hi,))
        return SweepAxis(name, tuple(np.geomspace(lo, hi, count)))

    @staticmethod
    def explicit(name: str, values) -> "SweepAxis":
        if not values:
            raise ConfigError("axis.values", "must be nonempty")
        return SweepAxis(name, tuple(float(v) for v in values))


@dataclass
class SweepSpec:
    model: str
    axis_x: SweepAxis
    axis_y: SweepAxis | None = None
    fixed: dict = field(default_factory=dict)
    seeds: int = 1
    T: int = 5000
    burn_in: float = 0.2
    master_seed: int = 0

    def validate(self) -> "SweepSpec":
        if self.model not in MODELS:
            raise ConfigError("model", f"must be one of {MODELS}")
        valid = FULL_MODEL_PARAMS if self.model == "full" else VAR_EQUITY_PARAMS
        for axis in filter(None, (self.axis_x, self.axis_y)):
            if axis.name not in valid:
                raise ConfigError(
                    f"axis.{axis.name}",
                    f"unknown parameter for model {self.model}; valid names: "
                    + ", ".join(valid))
        for name in self.fixed:
            if name not in valid:
                raise ConfigError(
                    f"fixed.{name}",
                    f"unknown parameter for model {self.model}; valid names: "
                    + ", ".join(valid))
        if self.seeds < 1:
            raise ConfigError("seeds", "must be >= 1")
        if not 0.0 <= self.burn_in < 1.0:
            raise ConfigError("burn_in", "must be in [0, 1)")
        if self.T < 2:
            raise ConfigError("T", "must be >= 2")
        return self

    def to_dict(self) -> dict:
        d = {"model": self.model, "seeds": self.seeds, "T": self.T,
             "burn_in": self.burn_in, "master_seed": self.master_seed,
             "axis_x": {"name": self.axis_x.name,
                        "values": list(self.axis_x.values)},
             "fixed": dict(self.fixed)}
        if self.axis_y is not None:
            d["axis_y"] = {"name": self.axis_y.name,
                           "values": list(self.axis_y.values)}
        return d


@dataclass
class SweepResult:
    spec: SweepSpec
    x_values: np.ndarray
    y_values: np.ndarray                  # length 1 for one-dimensional sweeps
    mean_cv: np.ndarray                   # (nx, ny) arithmetic mean of per-run CVs
    counts: dict                          # label -> (nx, ny) int array
    mean_max_leverage: np.ndarray         # (nx, ny)

    def columns(self) -> list[str]:
        return ["axisX_value", "axisY_value", "mean_log10_cv", "n_stable",
                "n_cyclic", "n_bankrupt", "n_unstable", "mean_max_leverage"]

    def rows(self):
        for i, x in enumerate(self.x_values):
            for j, y in enumerate(self.y_values):
                yield [x, y, float(np.log10(max(self.mean_cv[i, j], 1e-300))),
                       int(self.counts["stable"][i, j]),
                       int(self.counts["cyclic"][i, j]),
                       int(self.counts["bankrupt"][i, j]),
                       int(self.counts["unstable"][i, j]),
                       float(self.mean_max_leverage[i, j])]


def _derived_seed(master: int, ix: int, iy: int, s: int) -> int:
    ss = np.random.SeedSequence((master, ix, iy, s))
    return int(ss.generate_state(1, np.uint64)[0])


def _cell_config(spec: SweepSpec, ix: int, iy: int):
    params = dict(spec.fixed)
    params[spec.axis_x.name] = spec.axis_x.values[ix]
    if spec.axis_y is not None:
        params[spec.axis_y.name] = spec.axis_y.values[iy]

    lambda_m = params.pop("lambda_m", None)
    if spec.model == "full":
        cfg = FullModelConfig(T=spec.T)
    else:
        cfg = VarEquityConfig(
            T=spec.T,
            mode="deterministic" if spec.model.endswith("deterministic")
            else "stochastic")
    for name, value in params.items():
        setattr(cfg, name, value)
    if lambda_m is not None:
        if params.get("sigma_0"):
            raise ConfigError("fixed.sigma_0",
                              "cannot combine sigma_0 with a lambda_m axis")
        cfg.sigma_0 = sigma0_for_max_leverage(float(lambda_m), cfg.alpha, cfg.b)
    return cfg.validate()


def _evaluate_cell(spec: SweepSpec, ix: int, iy: int):
    """All seeds of one grid cell; returns aggregates keyed by the cell index."""
    n_seeds = spec.seeds
    cv_sum = 0.0
    max_lev_sum = 0.0
    counts = {"stable": 0, "cyclic": 0, "bankrupt": 0, "unstable": 0}
    for s in range(n_seeds):
        cfg = _cell_config(spec, ix, iy)
        cfg.seed = _derived_seed(spec.master_seed, ix, iy, s)
        if spec.model == "full":
            from .core_model import run_full

            run = run_full(cfg, collect_diagnostics=False)
            prices = run.prices[:, 0]
            max_lev = float(np.max(run.leverage))
        else:
            run = run_var_equity(cfg, record="price")
            prices = run.p
            max_lev = run.max_leverage
        cls = classify_run(run.status, prices, spec.burn_in)
        counts[cls.label] += 1
        cv_sum += cls.cv
        max_lev_sum += max_lev
    return ix, iy, cv_sum / n_seeds, counts, max_lev_sum / n_seeds


def _evaluate_cell_packed(args):
    return _evaluate_cell(*args)


def sweep(spec: SweepSpec, jobs: int = 1) -> SweepResult:
    """Evaluate the grid; ``jobs`` only changes wall time, never the result."""
    spec.validate()
    nx = len(spec.axis_x.values)
    ny = len(spec.axis_y.values) if spec.axis_y is not None else 1
    mean_cv = np.empty((nx, ny))
    mean_max_lev = np.empty((nx, ny))
    counts = {label: np.zeros((nx, ny), dtype=int)
              for label in ("stable", "cyclic", "bankrupt", "unstable")}

    tasks = [(spec, ix, iy) for ix in range(nx) for iy in range(ny)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_evaluate_cell_packed, tasks,
                                    chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        results = [_evaluate_cell(*task) for task in tasks]

    for ix, iy, cv, cell_counts, max_lev in results:
        mean_cv[ix, iy] = cv
        mean_max_lev[ix, iy] = max_lev
        for label, k in cell_counts.items():
            counts[label][ix, iy] = k

    y_values = (np.asarray(spec.axis_y.values) if spec.axis_y is not None
                else np.array([np.nan]))
    return SweepResult(spec=spec, x_values=np.asarray(spec.axis_x.values),
                       y_values=y_values, mean_cv=mean_cv, counts=counts,
                       mean_max_leverage=mean_max_lev)


def _axis_from_dict(key: str, data: dict) -> SweepAxis:
    try:
        name = data["name"]
    except KeyError:
        raise ConfigError(f"{key}.name", "axis needs a parameter name")
    if "values" in data:
        return SweepAxis.explicit(name, data["values"])
    kind = data.get("kind", "closed")
    try:
        lo, hi, count = data["lo"], data["hi"], data["count"]
    except KeyError as exc:
        raise ConfigError(f"{key}.{exc.args[0]}", "missing range field")
    builders = {"open": SweepAxis.open_range, "closed": SweepAxis.closed_range,
                "log": SweepAxis.log_range}
    if kind not in builders:
        raise ConfigError(f"{key}.kind", f"must be one of {sorted(builders)}")
    return builders[kind](name, float(lo), float(hi), int(count))


def load_sweep_spec(path: str | Path) -> SweepSpec:
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    return sweep_spec_from_dict(data, source=str(path))


def sweep_spec_from_dict(data: dict, source: str = "spec") -> SweepSpec:
    known = {"model", "axis_x", "axis_y", "fixed", "seeds", "T", "burn_in",
             "master_seed"}
    for key in data:
        if key not in known:
            raise ConfigError(key, f"unknown field in {source}")
    if "model" not in data or "axis_x" not in data:
        raise ConfigError("model/axis_x", f"required in {source}")
    spec = SweepSpec(
        model=data["model"],
        axis_x=_axis_from_dict("axis_x", data["axis_x"]),
        axis_y=_axis_from_dict("axis_y", data["axis_y"]) if "axis_y" in data else None,
        fixed=dict(data.get("fixed", {})),
        seeds=int(data.get("seeds", 1)),
        T=int(data.get("T", 5000)),
        burn_in=float(data.get("burn_in", 0.2)),
        master_seed=int(data.get("master_seed", 0)),
    )
    return spec.validate()


def builtin_specs() -> dict[str, SweepSpec]:
    """Named sweeps reproducing the heatmap and leverage-limit experiments."""
    return {
        "paper-alpha-delta": SweepSpec(
            model="var-equity-stochastic",
            axis_x=SweepAxis.open_range("alpha", 0.0, 0.7, 70),
            axis_y=SweepAxis.open_range("delta", 0.0, 0.5, 50),
            fixed={"b": -0.5, "sigma_0": 0.0},
            seeds=40, T=5000),
        "paper-alpha-b": SweepSpec(
            model="var-equity-deterministic",
            axis_x=SweepAxis.open_range("alpha", 0.0, 300.0, 70),
            axis_y=SweepAxis.closed_range("b", -0.5, 0.5, 50),
            fixed={"delta": 0.1, "sigma_0": 0.0},
            seeds=1, T=5000),
        "paper-theta-deltaalpha": SweepSpec(
            model="var-equity-deterministic",
            axis_x=SweepAxis.closed_range("theta", 0.0, 7.0, 29),
            axis_y=SweepAxis.closed_range("delta_alpha", 0.0, 0.7, 15),
            fixed={"alpha": 0.1, "alpha_0": 0.1, "delta": 0.1, "b": -0.5,
                   "sigma_0": 0.0},
            seeds=1, T=5000),
        "paper-leverage-limit": SweepSpec(
            model="var-equity-stochastic",
            axis_x=SweepAxis.explicit(
                "lambda_m",
                [1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0, 24.0, 32.0,
                 48.0, 64.0, 96.0, 128.0]),
            fixed={"alpha": 0.2, "delta": 0.1, "b": -0.5},
            seeds=40, T=5000),
    }
