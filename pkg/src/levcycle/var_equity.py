"""Variable-equity reduced model: one bank, one noise trader, one stock.

The bank holds a fixed stock weight w_B, targets leverage
``lambda_bar = alpha (sigma^2 + sigma_0)^b`` and trades ``dB = lambda_bar E - A``
each period; the price solves the single-asset clearing identity

    p' = (w_B (c_B + dB) + w_N' c_N) / (1 - w_B n - (1 - n) w_N).

Equity can be redistributed toward a target E_0 to keep long runs stationary,
the noise-trader weight may follow a mean-reverting stochastic process, and a
policy rule may steer the risk parameter alpha against the price trend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import (
    ALPHA_FLOOR,
    DENOM_EPS,
    INSTABILITY_LIMIT,
    VAR_FLOOR,
    WN_CLAMP,
    VarEquityConfig,
)
from .errors import BankruptcyError, DegenerateMarketError, LevcycleError
from .seeding import make_rng


@dataclass
class VarEquityState:
    p: float
    p_prev: float
    sigma2: float
    liabilities: float
    n: float            # bank share of the stock
    w_N: float          # noise-trader stock weight
    alpha: float        # current risk parameter
    q: float            # smoothed log-return trend


@dataclass
class PolicyRuleParams:
    alpha_0: float
    rho_alpha: float = 0.5
    delta_alpha: float = 0.1
    theta: float = 0.0


@dataclass
class RedistributionParams:
    xi: float
    E_0: float


@dataclass
class DerivedQuantities:
    lev_target: float
    assets: float
    equity: float
    delta_b: float
    cash_bank: float
    cash_nt: float


def target_leverage_scalar(sigma2: float, alpha: float, b: float,
                           sigma_0: float) -> float:
    base = sigma2 + sigma_0
    if b < 0.0 and base < VAR_FLOOR:
        base = VAR_FLOOR
    return alpha * base ** b


def derived_quantities(state: VarEquityState, w_B: float, b: float,
                       sigma_0: float) -> DerivedQuantities:
    """Target leverage, balance sheet and cash positions implied by the state."""
    lev = target_leverage_scalar(state.sigma2, state.alpha, b, sigma_0)
    assets = state.n * state.p / w_B
    equity = assets - state.liabilities
    if equity <= 0.0:
        raise BankruptcyError(f"bank equity {equity} is not positive")
    delta_b = lev * equity - assets
    cash_bank = (1.0 - w_B) * state.n * state.p / w_B
    cash_nt = (1.0 - state.w_N) * (1.0 - state.n) * state.p / state.w_N
    return DerivedQuantities(lev, assets, equity, delta_b, cash_bank, cash_nt)


def noise_weight_update(w_N: float, rho: float, eta: float,
                        rng: np.random.Generator) -> float:
    """Multiplicative mean reversion toward 1/2, clamped away from {0, 1}."""
    shock = float(rng.standard_normal())
    return _noise_weight_kernel(w_N, rho, eta, shock)


def _noise_weight_kernel(w_N: float, rho: float, eta: float, shock: float) -> float:
    w = w_N * (1.0 + (0.5 - w_N) * rho + eta * shock)
    lo, hi = WN_CLAMP
    return lo if w < lo else hi if w > hi else w


def redistribute_equity(cash_bank: float, cash_nt: float, equity: float,
                        params: RedistributionParams) -> tuple[float, float]:
    """Shift dE = xi (E_0 - E) of cash from the noise trader to the bank."""
    d_e = params.xi * (params.E_0 - equity)
    return cash_bank + d_e, cash_nt - d_e


def policy_alpha_update(alpha: float, q: float, p: float, p_prev: float,
                        params: PolicyRuleParams) -> tuple[float, float]:
    """Risk-parameter rule: alpha reverts to alpha_0 and leans against the trend.

    alpha' uses the current trend q; q then absorbs the return log(p/p_prev).
    """
    alpha_new = alpha + params.rho_alpha * (params.alpha_0 - alpha) + params.theta * q
    if alpha_new < ALPHA_FLOOR:
        alpha_new = ALPHA_FLOOR
    q_new = (1.0 - params.delta_alpha) * q + params.delta_alpha * math.log(p / p_prev)
    return alpha_new, q_new


def effective_max_leverage(alpha: float, sigma_0: float, b: float) -> float:
    """Leverage ceiling lambda_m = alpha * sigma_0^b implied by the risk offset."""
    if b >= 0.0:
        raise LevcycleError("an effective maximum leverage needs b < 0")
    if sigma_0 <= 0.0:
        raise LevcycleError("an effective maximum leverage needs sigma_0 > 0")
    return alpha * sigma_0 ** b


def sigma0_for_max_leverage(lambda_m: float, alpha: float, b: float) -> float:
    """Inverse of effective_max_leverage: sigma_0 = (lambda_m / alpha)^(1/b)."""
    if b >= 0.0:
        raise LevcycleError("a leverage ceiling needs b < 0")
    if lambda_m <= 0.0:
        raise LevcycleError("lambda_m must be positive")
    return (lambda_m / alpha) ** (1.0 / b)


# step outcome codes for the scalar kernel
_OK, _BANKRUPT, _DEGENERATE, _UNSTABLE = 0, 1, 2, 3


def _step_kernel(p, p_prev, sigma2, liab, n, w_n, alpha, q, shock,
                 delta, b, sigma_0, e_0, w_b, xi, rho, eta,
                 rho_alpha, delta_alpha, theta, alpha_target):
    """One reduced-model period on plain floats. Returns (code, state..., lam, dB).

    Update order: w_N advance; derived quantities with the previous-step
    sigma2; redistribution; sigma2; liabilities; price; bank share; policy.
    """
    w_n_old = w_n
    if shock is not None:
        w_n_new = _noise_weight_kernel(w_n, rho, eta, shock)
    else:
        w_n_new = w_n

    base = sigma2 + sigma_0
    if b < 0.0 and base < VAR_FLOOR:
        base = VAR_FLOOR
    lam = alpha * base ** b
    assets = n * p / w_b
    equity = assets - liab
    if equity <= 0.0:
        return (_BANKRUPT, p, p_prev, sigma2, liab, n, w_n, alpha, q, lam, 0.0)
    delta_b = lam * equity - assets
    cash_bank = (1.0 - w_b) * n * p / w_b
    cash_nt = (1.0 - w_n_old) * (1.0 - n) * p / w_n_old
    d_e = xi * (e_0 - equity)
    cash_bank += d_e
    cash_nt -= d_e

    x = math.log(p / p_prev)
    sigma2_new = (1.0 - delta) * sigma2 + delta * x * x
    liab_new = liab + delta_b

    den = 1.0 - w_b * n - (1.0 - n) * w_n_old
    if den <= DENOM_EPS:
        return (_DEGENERATE, p, p_prev, sigma2, liab, n, w_n, alpha, q, lam, delta_b)
    p_new = (w_b * (cash_bank + delta_b) + w_n_new * cash_nt) / den
    if (not p_new > 0.0 or p_new > INSTABILITY_LIMIT
            or abs(liab_new) > INSTABILITY_LIMIT or lam > INSTABILITY_LIMIT
            or abs(delta_b) > INSTABILITY_LIMIT or not math.isfinite(p_new)):
        return (_UNSTABLE, p, p_prev, sigma2, liab, n, w_n, alpha, q, lam, delta_b)
    n_new = w_b * (n * p_new + cash_bank + delta_b) / p_new

    alpha_new = alpha + rho_alpha * (alpha_target - alpha) + theta * q
    if alpha_new < ALPHA_FLOOR:
        alpha_new = ALPHA_FLOOR
    q_new = (1.0 - delta_alpha) * q + delta_alpha * x

    return (_OK, p_new, p, sigma2_new, liab_new, n_new, w_n_new, alpha_new,
            q_new, lam, delta_b)


def step_var_equity(state: VarEquityState, cfg: VarEquityConfig,
                    rng: np.random.Generator | None = None) -> tuple[VarEquityState, float, float]:
    """Public single-step wrapper; returns (new state, lambda_bar used, dB).

    Raises on bankruptcy, degeneracy and instability instead of returning codes.
    """
    shock = None
    if cfg.mode == "stochastic":
        if rng is None:
            raise ValueError("stochastic mode needs a generator")
        shock = float(rng.standard_normal())
    out = _step_kernel(state.p, state.p_prev, state.sigma2, state.liabilities,
                       state.n, state.w_N, state.alpha, state.q, shock,
                       cfg.delta, cfg.b, cfg.sigma_0, cfg.E_0, cfg.w_B, cfg.xi,
                       cfg.rho, cfg.eta, cfg.rho_alpha, cfg.delta_alpha,
                       cfg.theta, cfg.alpha_target)
    code = out[0]
    if code == _BANKRUPT:
        raise BankruptcyError("bank equity is not positive")
    if code == _DEGENERATE:
        raise DegenerateMarketError("price-update denominator is degenerate")
    if code == _UNSTABLE:
        raise DegenerateMarketError("state magnitude exceeded the stability limit")
    _, p, p_prev, sigma2, liab, n, w_n, alpha, q, lam, delta_b = out
    return (VarEquityState(p=p, p_prev=p_prev, sigma2=sigma2, liabilities=liab,
                           n=n, w_N=w_n, alpha=alpha, q=q), lam, delta_b)


def initial_state(cfg: VarEquityConfig) -> VarEquityState:
    """State implied by lambda_0, E_0, w_B, n_0: p(0) = lambda_0 E_0 w_B / n_0.

    Unless overridden, the initial perceived variance is chosen so the opening
    leverage target equals lambda_0; an inconsistent estimate fires a large
    balance-sheet adjustment into the very first price update.
    """
    p0 = cfg.lambda_0 * cfg.E_0 * cfg.w_B / cfg.n_0
    assets = cfg.n_0 * p0 / cfg.w_B
    return VarEquityState(p=p0, p_prev=p0, sigma2=_initial_sigma2(cfg),
                          liabilities=assets - cfg.E_0, n=cfg.n_0, w_N=0.5,
                          alpha=cfg.alpha_target, q=0.0)


def _initial_sigma2(cfg: VarEquityConfig) -> float:
    if cfg.sigma2_init is not None:
        return cfg.sigma2_init
    if cfg.b == 0.0:
        return 1e-4
    sig2 = (cfg.lambda_0 / cfg.alpha_target) ** (1.0 / cfg.b) - cfg.sigma_0
    return max(sig2, VAR_FLOOR)


@dataclass
class VarRunResult:
    p: np.ndarray
    leverage: np.ndarray          # target leverage lambda_bar(t)
    assets: np.ndarray
    liabilities: np.ndarray
    n: np.ndarray
    w_N: np.ndarray
    alpha: np.ndarray
    q: np.ndarray
    equity_bank: np.ndarray
    status: str = "ok"            # ok | bankrupt | unstable
    reason: str = ""
    fail_time: int | None = None
    max_leverage: float = 0.0

    @property
    def n_rows(self) -> int:
        return self.p.shape[0]

    def columns(self) -> list[str]:
        return ["t", "p", "leverage", "assets", "liabilities", "n", "w_N",
                "alpha", "q", "equity_bank"]

    def rows(self):
        for t in range(self.n_rows):
            yield [t, self.p[t], self.leverage[t], self.assets[t],
                   self.liabilities[t], self.n[t], self.w_N[t], self.alpha[t],
                   self.q[t], self.equity_bank[t]]


def run_var_equity(cfg: VarEquityConfig, record: str = "full") -> VarRunResult:
    """Simulate T periods; row t is the state at time t.

    ``record='price'`` keeps only the price path (plus status and the maximum
    target leverage), which is what grid sweeps consume.
    """
    state = initial_state(cfg)
    shocks = None
    if cfg.mode == "stochastic":
        shocks = make_rng(cfg.seed).standard_normal(cfg.T)

    full = record == "full"
    n_rows = cfg.T + 1
    ps = np.empty(n_rows)
    if full:
        levs = np.empty(n_rows); assets_a = np.empty(n_rows)
        liabs = np.empty(n_rows); ns = np.empty(n_rows); wns = np.empty(n_rows)
        alphas = np.empty(n_rows); qs = np.empty(n_rows); eqs = np.empty(n_rows)

    delta, b, sigma_0 = cfg.delta, cfg.b, cfg.sigma_0
    e_0, w_b, xi = cfg.E_0, cfg.w_B, cfg.xi
    rho, eta = cfg.rho, cfg.eta
    rho_alpha, delta_alpha, theta = cfg.rho_alpha, cfg.delta_alpha, cfg.theta
    alpha_target = cfg.alpha_target

    p, p_prev = state.p, state.p_prev
    sigma2, liab, n, w_n = state.sigma2, state.liabilities, state.n, state.w_N
    alpha, q = state.alpha, state.q

    status, reason, fail_time = "ok", "", None
    max_lev = 0.0
    rows = 0
    for t in range(n_rows):
        lam_t = target_leverage_scalar(sigma2, alpha, b, sigma_0)
        if lam_t > max_lev:
            max_lev = lam_t
        ps[t] = p
        if full:
            a_t = n * p / w_b
            levs[t] = lam_t; assets_a[t] = a_t; liabs[t] = liab; ns[t] = n
            wns[t] = w_n; alphas[t] = alpha; qs[t] = q; eqs[t] = a_t - liab
        rows = t + 1
        if t == cfg.T:
            break
        shock = float(shocks[t]) if shocks is not None else None
        out = _step_kernel(p, p_prev, sigma2, liab, n, w_n, alpha, q, shock,
                           delta, b, sigma_0, e_0, w_b, xi, rho, eta,
                           rho_alpha, delta_alpha, theta, alpha_target)
        code = out[0]
        if code != _OK:
            if code == _BANKRUPT:
                status, reason, fail_time = "bankrupt", "equity not positive", t
            elif code == _DEGENERATE:
                status, reason, fail_time = "unstable", "degenerate price update", t + 1
            else:
                status, reason, fail_time = "unstable", "magnitude limit", t + 1
            break
        _, p, p_prev, sigma2, liab, n, w_n, alpha, q, _, _ = out

    if full:
        return VarRunResult(p=ps[:rows], leverage=levs[:rows],
                            assets=assets_a[:rows], liabilities=liabs[:rows],
                            n=ns[:rows], w_N=wns[:rows], alpha=alphas[:rows],
                            q=qs[:rows], equity_bank=eqs[:rows], status=status,
                            reason=reason, fail_time=fail_time,
                            max_leverage=max_lev)
    empty = np.empty(0)
    return VarRunResult(p=ps[:rows], leverage=empty, assets=empty,
                        liabilities=empty, n=empty, w_N=empty, alpha=empty,
                        q=empty, equity_bank=empty, status=status,
                        reason=reason, fail_time=fail_time, max_leverage=max_lev)
