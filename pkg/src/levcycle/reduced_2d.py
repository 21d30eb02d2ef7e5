"""Constant-equity single-asset model: a two-dimensional deterministic map.

With a single fully-invested investor at constant equity E, prices obey
``p = lambda_bar * E`` with ``lambda_bar = alpha / sqrt(sigma^2)``, and the
perceived variance drives itself:

    z1' = (1 - delta) z1 + (delta / 4) * log(z2 / z1)^2,   z2' = z1,

where z1 is the current and z2 the previous variance. The origin is a
hyperbolic fixed point: trajectories descend a near-diagonal line toward it
(the bubble phase), then get ejected along the unstable direction (the crash).
"""

from __future__ import annotations

from dataclasses import dataclass

import math

import numpy as np

from .config import VAR_FLOOR, Map2DConfig
from .seeding import make_rng


@dataclass
class State2D:
    z1: float   # sigma^2(t)
    z2: float   # sigma^2(t-1)


def step_2d(z: State2D, delta: float, var_floor: float = VAR_FLOOR) -> State2D:
    """One application of the variance map; inputs floored at var_floor."""
    z1 = max(z.z1, var_floor)
    z2 = max(z.z2, var_floor)
    log_ratio = math.log(z2 / z1)
    return State2D(z1=(1.0 - delta) * z1 + (delta / 4.0) * log_ratio * log_ratio,
                   z2=z1)


def price_2d(z: State2D, alpha: float, equity: float,
             var_floor: float = VAR_FLOOR) -> float:
    """p = alpha * E / sqrt(z1)."""
    return alpha * equity / math.sqrt(max(z.z1, var_floor))


def jacobian_2d(z: State2D, delta: float,
                var_floor: float = VAR_FLOOR) -> np.ndarray:
    z1 = max(z.z1, var_floor)
    z2 = max(z.z2, var_floor)
    log_ratio = math.log(z2 / z1)
    return np.array([
        [1.0 - delta - delta * log_ratio / (2.0 * z1),
         delta * log_ratio / (2.0 * z2)],
        [1.0, 0.0],
    ])


def eigen_closed_form(z: State2D, delta: float, var_floor: float = VAR_FLOOR):
    """Closed-form eigenpairs of the map Jacobian.

    Returns (lambda_minus, lambda_plus, e_minus, e_plus) with eigenvectors
    (lambda, 1)^T. lambda_plus = (q1 - q2)/q3 is the branch that diverges near
    the origin; for z1 = z2 the pair is {1 - delta, 0}. A negative discriminant
    yields a complex conjugate pair.
    """
    z1 = max(z.z1, var_floor)
    z2 = max(z.z2, var_floor)
    log_ratio = math.log(z2 / z1)
    q1 = -2.0 * delta * z1 * z2 - delta * z2 * log_ratio + 2.0 * z1 * z2
    disc = 8.0 * delta * z1 * z1 * z2 * log_ratio + q1 * q1
    q2 = math.sqrt(disc) if disc >= 0.0 else complex(0.0, math.sqrt(-disc))
    q3 = 4.0 * z1 * z2
    lam_plus = (q1 - q2) / q3
    lam_minus = (q1 + q2) / q3
    e_minus = np.array([lam_minus, 1.0], dtype=complex if disc < 0 else float)
    e_plus = np.array([lam_plus, 1.0], dtype=complex if disc < 0 else float)
    return lam_minus, lam_plus, e_minus, e_plus


@dataclass
class Map2DRunResult:
    z1: np.ndarray
    z2: np.ndarray
    price: np.ndarray
    lambda_minus: np.ndarray      # real part when the pair is complex
    lambda_plus_abs: np.ndarray

    @property
    def n_rows(self) -> int:
        return self.z1.shape[0]

    def columns(self) -> list[str]:
        return ["t", "z1", "z2", "price", "lambda_minus", "lambda_plus_abs"]

    def rows(self):
        for t in range(self.n_rows):
            yield [t, self.z1[t], self.z2[t], self.price[t],
                   self.lambda_minus[t], self.lambda_plus_abs[t]]


def run_2d(cfg: Map2DConfig) -> Map2DRunResult:
    """Iterate the map for T steps, recording prices and local eigenvalues.

    A multiplicative jitter of amplitude ``cfg.jitter`` on z1 stands in for the
    arbitrarily small perturbation that triggers the ejection near the origin;
    jitter = 0 leaves the map fully deterministic.
    """
    rng = make_rng(cfg.seed)
    n = cfg.T + 1
    z1s = np.empty(n)
    z2s = np.empty(n)
    z = State2D(z1=cfg.z1_0, z2=cfg.z2_0)
    z1s[0], z2s[0] = z.z1, z.z2
    for t in range(cfg.T):
        if cfg.jitter > 0.0:
            z = State2D(z1=max(z.z1 * (1.0 + cfg.jitter * rng.standard_normal()),
                               VAR_FLOOR),
                        z2=z.z2)
        z = step_2d(z, cfg.delta)
        z1s[t + 1], z2s[t + 1] = z.z1, z.z2

    price = cfg.alpha * cfg.E / np.sqrt(np.maximum(z1s, VAR_FLOOR))
    lam_minus = np.empty(n)
    lam_plus_abs = np.empty(n)
    for t in range(n):
        lm, lp, _, _ = eigen_closed_form(State2D(z1s[t], z2s[t]), cfg.delta)
        lam_minus[t] = lm.real if isinstance(lm, complex) else lm
        lam_plus_abs[t] = abs(lp)
    return Map2DRunResult(z1=z1s, z2=z2s, price=price,
                          lambda_minus=lam_minus, lambda_plus_abs=lam_plus_abs)


def phase_line_slope(z1: np.ndarray, z2: np.ndarray) -> float:
    """Through-origin least-squares slope of the near-origin phase segment.

    The segment is the descending part of the trajectory, z2 > z1, with crash
    re-entry points (top decile of z1) excluded.
    """
    descent = z2 > z1
    if descent.sum() < 10:
        raise ValueError("too few descent points for a slope fit")
    cut = np.quantile(z1[descent], 0.9)
    sel = descent & (z1 <= cut)
    return float(np.sum(z1[sel] * z2[sel]) / np.sum(z1[sel] ** 2))
