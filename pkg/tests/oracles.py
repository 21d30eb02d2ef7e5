"""Independent reference implementations used to check the engine.

Everything in here is deliberately written against the formulas directly,
on plain Python floats and lists where possible, sharing no code with the
package internals it verifies.
"""

import math

import numpy as np


def ewma_mean_replay(x_seq, delta, mu0):
    """Scripted mean-estimate recurrence replay; returns the full path."""
    mu = list(mu0)
    out = []
    for x in x_seq:
        mu = [delta * xi + (1.0 - delta) * mi for xi, mi in zip(x, mu)]
        out.append(list(mu))
    return out


def ewma_cov_replay(x_seq, delta, mu0, cov0):
    """Scripted covariance recurrence replay (mean updated first each step)."""
    n = len(mu0)
    mu = list(mu0)
    cov = [row[:] for row in cov0]
    out = []
    for x in x_seq:
        mu = [delta * xi + (1.0 - delta) * mi for xi, mi in zip(x, mu)]
        d = [xi - mi for xi, mi in zip(x, mu)]
        cov = [[delta * d[i] * d[j] + (1.0 - delta) * cov[i][j]
                for j in range(n)] for i in range(n)]
        out.append([row[:] for row in cov])
    return out


def div_price_replay(pi_seq, p_seq, gamma, r0):
    r = list(r0)
    out = []
    for pi, p in zip(pi_seq, p_seq):
        r = [(1.0 - gamma) * ri + gamma * (di / pi_) for ri, di, pi_ in zip(r, pi, p)]
        out.append(list(r))
    return out


def dividend_replay(pi0, mu, phi, shocks):
    """Geometric-walk replay with a given shock stream."""
    pi = list(pi0)
    out = []
    for eps in shocks:
        pi = [max(p * (1.0 + mu + phi * e), 1e-12) for p, e in zip(pi, eps)]
        out.append(list(pi))
    return out


def noise_v_replay(v0, rhat_seq, rho, zeta, eta, shocks):
    v = list(v0)
    n = len(v0)
    out = []
    for rhat, eps in zip(rhat_seq, shocks):
        mean_r = sum(rhat) / n
        v = [max(vi * (1.0 + rho * (1.0 / n - vi) + zeta * (ri - mean_r)
                       + eta * e), 1e-12)
             for vi, ri, e in zip(v, rhat, eps)]
        out.append(list(v))
    return out


def clearing_fixed_point(weights, ownership, cash, delta_b, iters=200000,
                         tol=1e-14):
    """Iterate p <- W (N p + c + dB) to convergence from a positive start."""
    w = np.asarray(weights, dtype=float)
    n_mat = np.asarray(ownership, dtype=float)
    inject = w @ (np.asarray(cash, dtype=float) + np.asarray(delta_b, dtype=float))
    p = np.ones(w.shape[0])
    for _ in range(iters):
        p_next = w @ (n_mat @ p) + inject
        if np.max(np.abs(p_next - p)) <= tol * max(1.0, float(np.max(np.abs(p_next)))):
            return p_next
        p = p_next
    raise RuntimeError("fixed-point iteration did not converge")


def allocation_grid_oracle(rhat, cov, equity, a, w_c, pitch=1000):
    """Best objective over a barycentric direction grid with per-ray scaling.

    Every feasible point of the program lies on a ray through the budget
    simplex; along a ray the objective is linear in the scale, so the best
    feasible scale is t = min(1, sqrt(V / u'Su)). Resolution is limited only
    by the angular pitch.
    """
    rhat = np.asarray(rhat, dtype=float)
    cov = np.asarray(cov, dtype=float)
    n = rhat.shape[0]
    cap = 1.0 - w_c
    v_ball = equity / a
    if n == 1:
        dirs = np.array([[cap]])
    elif n == 2:
        t = np.linspace(0.0, 1.0, pitch + 1)
        dirs = cap * np.column_stack([t, 1.0 - t])
    elif n == 3:
        i, j = np.meshgrid(np.arange(pitch + 1), np.arange(pitch + 1))
        keep = i + j <= pitch
        i, j = i[keep], j[keep]
        dirs = cap * np.column_stack([i, j, pitch - i - j]) / pitch
    else:
        raise ValueError("oracle supports up to three assets")
    along = dirs @ rhat
    quad = np.einsum("ij,jk,ik->i", dirs, cov, dirs)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_max = np.minimum(1.0, np.sqrt(np.where(quad > 0.0,
                                                 v_ball / np.maximum(quad, 1e-300),
                                                 np.inf)))
    values = np.where(along > 0.0, along * t_max, 0.0)
    return max(float(values.max()), 0.0)


def finite_difference_jacobian(fn, z, h_rel=1e-7):
    """Central differences for a 2D map given as fn((z1, z2)) -> (z1', z2')."""
    z = np.asarray(z, dtype=float)
    jac = np.empty((2, 2))
    for j in range(2):
        h = h_rel * abs(z[j])
        zp, zm = z.copy(), z.copy()
        zp[j] += h
        zm[j] -= h
        fp = np.asarray(fn(zp))
        fm = np.asarray(fn(zm))
        jac[:, j] = (fp - fm) / (2.0 * h)
    return jac
