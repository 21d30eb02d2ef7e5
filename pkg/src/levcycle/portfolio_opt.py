"""Expected-return maximization under a VaR budget and no shorting.

    max_w  w . rhat   s.t.   E - a w' S w >= 0,   w_i >= 0,   sum w <= 1 - w_c

The budget cap keeps the program bounded (the printed constraint set alone is
unbounded along low-variance positive-return directions) and matches how the
weights are consumed by market clearing.

Every feasible point lies on a ray through the budget simplex, and on each ray
the objective is maximized in closed form at t* = min(1, sqrt(V / u'Su)) with
V = E/a. The solver therefore runs projected-gradient ascent with backtracking
over ray directions on the simplex (seeded from a coarse direction scan) and
cross-checks the closed-form KKT candidates of every support set, which makes
it exact for small asset counts.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, LevcycleError


@dataclass
class OptProblem:
    rhat: np.ndarray
    cov: np.ndarray
    equity: float
    a: float                  # VaR scale, consumed as given
    w_c: float = 0.0

    def validate(self) -> "OptProblem":
        if not np.all(np.isfinite(self.rhat)):
            raise LevcycleError("expected returns must be finite")
        if self.a <= 0.0:
            raise LevcycleError("VaR scale a must be positive")
        if self.equity < 0.0:
            raise LevcycleError("equity must be nonnegative")
        symctx = float(np.max(np.abs(self.cov - self.cov.T)))
        if symctx > 1e-10 * max(1.0, float(np.max(np.abs(self.cov)))):
            raise LevcycleError("covariance must be symmetric")
        eigs = np.linalg.eigvalsh(0.5 * (self.cov + self.cov.T))
        if eigs[0] < -1e-10 * max(1.0, float(eigs[-1])):
            raise LevcycleError("covariance must be positive semidefinite")
        return self


def project_simplex(u: np.ndarray, total: float) -> np.ndarray:
    """Euclidean projection onto {u >= 0, sum(u) = total}."""
    s = np.sort(u)[::-1]
    css = np.cumsum(s) - total
    idx = np.arange(1, u.shape[0] + 1)
    r = idx[s - css / idx > 0][-1]
    return np.maximum(u - css[r - 1] / r, 0.0)


def _ray_best(u: np.ndarray, rhat: np.ndarray, cov: np.ndarray,
              v_ball: float) -> tuple[float, float]:
    """Best objective and scale along the feasible ray through direction u."""
    ru = float(u @ rhat)
    if ru <= 0.0:
        return 0.0, 0.0
    quad = float(u @ cov @ u)
    if quad <= 0.0:
        return ru, 1.0
    t = min(1.0, float(np.sqrt(v_ball / quad)))
    return ru * t, t


def _coarse_directions(n: int, cap: float, pitch: int) -> np.ndarray:
    if n == 1:
        return np.array([[cap]])
    if n == 2:
        t = np.linspace(0.0, 1.0, pitch + 1)
        return cap * np.column_stack([t, 1.0 - t])
    if n == 3:
        i, j = np.meshgrid(np.arange(pitch + 1), np.arange(pitch + 1))
        keep = i + j <= pitch
        i, j = i[keep], j[keep]
        return cap * np.column_stack([i, j, pitch - i - j]) / pitch
    rng = np.random.default_rng(0)
    dirs = rng.dirichlet(np.ones(n), size=max(64, 8 * n * n)) * cap
    return np.vstack([np.full((1, n), cap / n), dirs])


def _kkt_candidates(rhat: np.ndarray, cov: np.ndarray, cap: float,
                    v_ball: float):
    """Closed-form stationary points: vertices, VaR-only and budget+VaR supports."""
    n = rhat.shape[0]
    yield np.zeros(n)
    for i in range(n):
        w = np.zeros(n)
        w[i] = cap
        yield w
    for m in range(1, n + 1):
        for support in itertools.combinations(range(n), m):
            f = list(support)
            sub = cov[np.ix_(f, f)]
            try:
                sub_inv = np.linalg.inv(sub)
            except np.linalg.LinAlgError:
                continue
            r_f = rhat[f]
            w_f = sub_inv @ r_f
            quad = float(w_f @ sub @ w_f)
            if quad > 0.0:
                w = np.zeros(n)
                w[f] = w_f * np.sqrt(v_ball / quad)
                yield w
            ones = np.ones(len(f))
            inv_one = sub_inv @ ones
            inv_r = sub_inv @ r_f
            a11 = float(ones @ inv_one)
            a1r = float(ones @ inv_r)
            arr = float(r_f @ inv_r)
            qa = a11 * cap * cap - v_ball * a11 * a11
            qb = -2.0 * a1r * cap * cap + 2.0 * v_ball * a1r * a11
            qc = arr * cap * cap - v_ball * a1r * a1r
            disc = qb * qb - 4.0 * qa * qc
            if abs(qa) < 1e-300:
                mus = [-qc / qb] if abs(qb) > 1e-300 else []
            elif disc >= 0.0:
                root = np.sqrt(disc)
                mus = [(-qb + root) / (2.0 * qa), (-qb - root) / (2.0 * qa)]
            else:
                mus = []
            for mu in mus:
                den = a1r - mu * a11
                if abs(den) < 1e-300:
                    continue
                w_f2 = (inv_r - mu * inv_one) * (cap / den)
                if np.min(w_f2) < -1e-9:
                    continue
                w = np.zeros(n)
                w[f] = w_f2
                yield w


def _cleaned(w: np.ndarray, cap: float, v_ball: float,
             cov: np.ndarray) -> np.ndarray:
    """Clamp a candidate strictly into the feasible set."""
    w = np.maximum(w, 0.0)
    s = float(w.sum())
    if s > cap:
        w = w * (cap / s)
    quad = float(w @ cov @ w)
    if quad > v_ball > 0.0:
        w = w * np.sqrt(v_ball / quad) * (1.0 - 1e-14)
    return w


def optimize_weights(prob: OptProblem, iters: int = 400, n_starts: int = 6,
                     pitch: int = 15) -> np.ndarray:
    """Solve the allocation program; the returned weights are strictly feasible."""
    prob.validate()
    rhat, cov = prob.rhat, 0.5 * (prob.cov + prob.cov.T)
    n = rhat.shape[0]
    cap = 1.0 - prob.w_c
    v_ball = prob.equity / prob.a
    if cap <= 0.0 or np.all(rhat <= 0.0) or v_ball <= 0.0:
        return np.zeros(n)

    dirs = _coarse_directions(n, cap, pitch)
    obj_dir = dirs @ rhat
    quad = np.einsum("ij,jk,ik->i", dirs, cov, dirs)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_max = np.minimum(1.0, np.sqrt(np.where(quad > 0.0,
                                                 v_ball / np.maximum(quad, 1e-300),
                                                 np.inf)))
    vals = np.where(obj_dir > 0.0, obj_dir * t_max, 0.0)
    order = np.argsort(vals)[::-1][:n_starts]

    best_obj, best_w = 0.0, np.zeros(n)
    for k in order:
        u = dirs[k].copy()
        obj, _ = _ray_best(u, rhat, cov, v_ball)
        step = cap
        converged = False
        for _ in range(iters):
            ru = float(u @ rhat)
            q = float(u @ cov @ u)
            if ru <= 0.0 or q <= 0.0 or v_ball >= q:
                grad = rhat
            else:
                scale = float(np.sqrt(v_ball / q))
                grad = scale * (rhat - (ru / q) * (cov @ u))
            improved = False
            s = step
            for _ in range(50):
                u_try = project_simplex(u + s * grad, cap)
                o_try, _ = _ray_best(u_try, rhat, cov, v_ball)
                if o_try > obj + 1e-18:
                    u, obj, step, improved = u_try, o_try, min(s * 1.7, 1e3), True
                    break
                s *= 0.4
                if s < 1e-18:
                    break
            if not improved:
                converged = True
                break
        if not converged:
            raise ConvergenceError("projected gradient hit its iteration cap",
                                   best_weights=_scaled(u, rhat, cov, v_ball),
                                   best_objective=obj)
        if obj > best_obj:
            best_obj, best_w = obj, _scaled(u, rhat, cov, v_ball)

    for cand in _kkt_candidates(rhat, cov, cap, v_ball):
        if cand.min() < -1e-9 or cand.sum() > cap * (1.0 + 1e-9):
            continue
        cand = _cleaned(cand, cap, v_ball, cov)
        obj = float(cand @ rhat)
        if obj > best_obj:
            best_obj, best_w = obj, cand
    return _cleaned(best_w, cap, v_ball, cov)


def _scaled(u: np.ndarray, rhat: np.ndarray, cov: np.ndarray,
            v_ball: float) -> np.ndarray:
    _, t = _ray_best(u, rhat, cov, v_ball)
    return t * u


def optimizing_allocator(rhat: np.ndarray, cov: np.ndarray, cfg,
                         equity: float) -> np.ndarray:
    """Drop-in replacement for the softmax rule inside the full model."""
    prob = OptProblem(rhat=rhat, cov=cov, equity=equity, a=cfg.var_a,
                      w_c=cfg.w_c)
    return optimize_weights(prob)


def run_full_with_optimizer(cfg):
    """Full-model run with the optimizing allocator swapped in."""
    from .core_model import run_full

    return run_full(cfg, weights_fn=optimizing_allocator)
