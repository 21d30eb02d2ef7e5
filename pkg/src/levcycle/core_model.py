"""Multi-asset financial system: leveraged banks, a noise trader, linear clearing.

Banks estimate dividend-price ratios and a return covariance by exponential
moving averages, allocate across stocks by a softmax over Sharpe ratios, and
manage leverage against a Value-at-Risk style target
``lambda_bar = alpha * (sigma_P^2 + sigma_0)^b``. The balance-sheet adjustment
``dB = lambda_bar * E - A`` is committed before clearing; prices then solve the
implicit demand system ``p = W (N p + c + dB)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .config import (
    COND_LIMIT,
    INSTABILITY_LIMIT,
    TINY_FLOOR,
    VAR_FLOOR,
    FullModelConfig,
)
from .errors import BankruptcyError, ClearingError, DegenerateMarketError, EstimationError


@dataclass
class LeveragePolicy:
    """Target-leverage rule parameters."""

    alpha: float
    b: float = -0.5
    sigma_0: float = 0.0
    var_floor: float = VAR_FLOOR


@dataclass
class BankState:
    cash: float
    holdings: np.ndarray          # share fractions per stock
    liabilities: float
    div_price_est: np.ndarray     # expected dividend-price ratios
    mean_est: np.ndarray          # expected log returns
    cov_est: np.ndarray           # return covariance estimate
    active: bool = True           # False: never trades on the leverage target

    def assets(self, prices: np.ndarray) -> float:
        return self.cash + float(self.holdings @ prices)

    def equity(self, prices: np.ndarray) -> float:
        return self.assets(prices) - self.liabilities


@dataclass
class NoiseTraderState:
    cash: float
    holdings: np.ndarray
    v: np.ndarray                 # raw weight states, positive

    def assets(self, prices: np.ndarray) -> float:
        return self.cash + float(self.holdings @ prices)


@dataclass
class MarketState:
    prices: np.ndarray
    prev_prices: np.ndarray
    dividends: np.ndarray


@dataclass
class SimState:
    banks: list
    noise_trader: NoiseTraderState
    market: MarketState
    t: int = 0


@dataclass
class StepInfo:
    """Per-step quantities that are not part of the carried state."""

    sigma_p2: float = 0.0         # bank 0 perceived portfolio variance
    lev_target: float = 0.0
    delta_b: float = 0.0
    weights: np.ndarray | None = None
    residual: float = 0.0         # relative clearing residual
    bankrupt: bool = False
    unstable: bool = False


def update_dividends(dividends: np.ndarray, mu: float, phi: float,
                     rng: np.random.Generator) -> np.ndarray:
    """Geometric random walk with drift; floored so dividends stay positive."""
    shocks = rng.standard_normal(dividends.shape[0])
    return np.maximum(dividends * (1.0 + mu + phi * shocks), TINY_FLOOR)


def update_div_price_estimate(rhat: np.ndarray, dividends: np.ndarray,
                              prices: np.ndarray, gamma: float) -> np.ndarray:
    """EMA of dividend-price ratios: rhat' = (1 - gamma) rhat + gamma * pi/p."""
    if np.any(prices <= 0.0):
        raise EstimationError("dividend-price update needs positive prices")
    return (1.0 - gamma) * rhat + gamma * dividends / prices


def update_mean_estimate(mean_est: np.ndarray, x: np.ndarray,
                         delta: float) -> np.ndarray:
    return delta * x + (1.0 - delta) * mean_est


def update_covariance(cov: np.ndarray, x: np.ndarray, mean_est: np.ndarray,
                      delta: float) -> np.ndarray:
    """EWMA covariance; the mean estimate must already be updated for this step."""
    d = x - mean_est
    return delta * np.outer(d, d) + (1.0 - delta) * cov


def portfolio_weights_softmax(rhat: np.ndarray, cov: np.ndarray, beta: float,
                              w_cash: float,
                              var_floor: float = VAR_FLOOR) -> np.ndarray:
    """Softmax over Sharpe ratios s_i = rhat_i / sigma_i, scaled to sum 1 - w_cash."""
    sigma = np.sqrt(np.maximum(np.diag(cov), var_floor))
    s = beta * (rhat / sigma)
    e = np.exp(s - s.max())
    return (1.0 - w_cash) * e / e.sum()


def portfolio_variance(weights: np.ndarray, cov: np.ndarray) -> float:
    if weights.shape[0] != cov.shape[0]:
        raise ValueError("weights and covariance dimensions disagree")
    return float(weights @ cov @ weights)


def target_leverage(sigma_p2: float, policy: LeveragePolicy) -> float:
    """lambda_bar = alpha * (sigma_P^2 + sigma_0)^b, floored against sigma -> 0."""
    base = sigma_p2 + policy.sigma_0
    if policy.b < 0.0 and base < policy.var_floor:
        base = policy.var_floor
    return policy.alpha * base ** policy.b


def balance_sheet_delta(lev_target: float, assets: float, liabilities: float,
                        active: bool = True) -> float:
    """Desired balance-sheet change dB = lambda_bar * E - A; zero in passive mode."""
    equity = assets - liabilities
    if equity <= 0.0:
        raise BankruptcyError(f"nonpositive equity {equity}")
    if not active:
        return 0.0
    return lev_target * equity - assets


def update_noise_trader_v(v: np.ndarray, rhat: np.ndarray, rho: float,
                          zeta: float, eta: float,
                          rng: np.random.Generator) -> np.ndarray:
    """Mean-reverting, weakly fundamentalist raw-weight process, floored positive."""
    n_f = v.shape[0]
    shocks = rng.standard_normal(n_f)
    growth = rho * (1.0 / n_f - v) + zeta * (rhat - rhat.mean()) + eta * shocks
    return np.maximum(v * (1.0 + growth), TINY_FLOOR)


def noise_trader_weights(v: np.ndarray, w_cash: float) -> np.ndarray:
    return (1.0 - w_cash) * v / v.sum()


def clear_market(weights: np.ndarray, ownership: np.ndarray, cash: np.ndarray,
                 delta_b: np.ndarray, cond_limit: float = COND_LIMIT) -> np.ndarray:
    """Solve p = W (N p + c + dB) for the market-clearing price vector.

    ``weights`` is N_f x n_inv (one column per investor), ``ownership`` is
    n_inv x N_f. Requires someone to hold cash and U = 1 - W N to be well
    conditioned; nonpositive prices mean the market is degenerate.
    """
    if not np.any(cash + delta_b > 0.0):
        raise ClearingError("no investor brings positive cash to the market")
    n_f = weights.shape[0]
    U = np.eye(n_f) - weights @ ownership
    if np.linalg.cond(U) > cond_limit:
        raise ClearingError("clearing matrix is numerically singular")
    prices = np.linalg.solve(U, weights @ (cash + delta_b))
    if np.any(prices <= 0.0) or not np.all(np.isfinite(prices)):
        raise DegenerateMarketError("clearing produced nonpositive prices")
    return prices


def clearing_residual(prices, weights, ownership, cash, delta_b) -> float:
    rhs = weights @ (ownership @ prices + cash + delta_b)
    return float(np.max(np.abs(prices - rhs)) / np.max(np.abs(prices)))


def settle(state: SimState, new_prices: np.ndarray, all_weights: np.ndarray,
           delta_b: np.ndarray) -> SimState:
    """Post-clearing settlement: wealth marked at new prices, reallocated by weights.

    For each investor, A' = c + n'p' + dB, new holdings n'_i = w_i A' / p'_i,
    cash is the non-stock remainder and liabilities grow by dB.
    """
    banks = []
    for j, bank in enumerate(state.banks):
        a_post = bank.cash + float(bank.holdings @ new_prices) + delta_b[j]
        w = all_weights[:, j]
        banks.append(BankState(
            cash=a_post - float(w.sum()) * a_post,
            holdings=w * a_post / new_prices,
            liabilities=bank.liabilities + delta_b[j],
            div_price_est=bank.div_price_est,
            mean_est=bank.mean_est,
            cov_est=bank.cov_est,
            active=bank.active,
        ))
    nt = state.noise_trader
    a_nt = nt.cash + float(nt.holdings @ new_prices)
    w_nt = all_weights[:, -1]
    noise_trader = NoiseTraderState(
        cash=a_nt - float(w_nt.sum()) * a_nt,
        holdings=w_nt * a_nt / new_prices,
        v=nt.v,
    )
    market = MarketState(prices=new_prices, prev_prices=state.market.prices,
                         dividends=state.market.dividends)
    return SimState(banks=banks, noise_trader=noise_trader, market=market,
                    t=state.t + 1)


WeightsFn = Callable[[np.ndarray, np.ndarray, FullModelConfig, float], np.ndarray]


def softmax_allocator(rhat: np.ndarray, cov: np.ndarray, cfg: FullModelConfig,
                      equity: float) -> np.ndarray:
    return portfolio_weights_softmax(rhat, cov, cfg.beta, cfg.w_c)


def step(state: SimState, cfg: FullModelConfig, rng: np.random.Generator,
         weights_fn: WeightsFn = softmax_allocator) -> tuple[SimState, StepInfo]:
    """Advance one period in the fixed event order.

    dividends -> log returns -> estimators (mean, covariance, dividend-price)
    -> portfolio weights (banks, then noise trader) -> leverage target and dB
    -> clearing -> settlement and bankruptcy check.
    """
    market = state.market
    dividends = update_dividends(market.dividends, cfg.mu, cfg.phi, rng)
    x = np.log(market.prices / market.prev_prices)

    policy = LeveragePolicy(alpha=cfg.alpha, b=cfg.b, sigma_0=cfg.sigma_0)
    n_inv = len(state.banks) + 1
    all_weights = np.empty((cfg.N_S, n_inv))
    delta_b = np.zeros(n_inv)
    info = StepInfo()

    banks = []
    for j, bank in enumerate(state.banks):
        mean_est = update_mean_estimate(bank.mean_est, x, cfg.delta)
        cov = update_covariance(bank.cov_est, x, mean_est, cfg.delta)
        rhat = update_div_price_estimate(bank.div_price_est, dividends,
                                         market.prices, cfg.gamma)
        assets = bank.assets(market.prices)
        equity = assets - bank.liabilities
        w = weights_fn(rhat, cov, cfg, equity)
        sigma_p2 = portfolio_variance(w, cov)
        lev = target_leverage(sigma_p2, policy)
        delta_b[j] = balance_sheet_delta(lev, assets, bank.liabilities,
                                         active=bank.active and cfg.active)
        all_weights[:, j] = w
        banks.append(BankState(cash=bank.cash, holdings=bank.holdings,
                               liabilities=bank.liabilities, div_price_est=rhat,
                               mean_est=mean_est, cov_est=cov, active=bank.active))
        if j == 0:
            info.sigma_p2 = sigma_p2
            info.lev_target = lev
            info.delta_b = delta_b[j]
            info.weights = w

    nt = state.noise_trader
    v = update_noise_trader_v(nt.v, banks[0].div_price_est, cfg.rho, cfg.zeta,
                              cfg.eta, rng)
    all_weights[:, -1] = noise_trader_weights(v, cfg.w_c)

    pre = SimState(banks=banks,
                   noise_trader=NoiseTraderState(cash=nt.cash, holdings=nt.holdings, v=v),
                   market=MarketState(prices=market.prices,
                                      prev_prices=market.prev_prices,
                                      dividends=dividends),
                   t=state.t)
    ownership = ownership_matrix(pre)
    cash = np.array([b.cash for b in banks] + [nt.cash])
    new_prices = clear_market(all_weights, ownership, cash, delta_b)
    info.residual = clearing_residual(new_prices, all_weights, ownership, cash,
                                      delta_b)

    if (np.any(new_prices > INSTABILITY_LIMIT) or info.lev_target > INSTABILITY_LIMIT
            or np.max(np.abs(delta_b)) > INSTABILITY_LIMIT):
        info.unstable = True

    new_state = settle(pre, new_prices, all_weights, delta_b)
    if any(b.equity(new_prices) < 0.0 for b in new_state.banks):
        info.bankrupt = True
    return new_state, info


def ownership_matrix(state: SimState) -> np.ndarray:
    rows = [b.holdings for b in state.banks] + [state.noise_trader.holdings]
    return np.vstack(rows)


def initial_state(cfg: FullModelConfig) -> SimState:
    """Bootstrap: all-cash investors, uniform weights, one clearing round.

    Bank sizing follows lambda_0 = (A - c)/E with cash pinned at w_c A, so
    A_0 = lambda_0 E_0 / (1 - w_c). The initial covariance is calibrated so the
    leverage target matches the initial balance sheet; an inconsistent estimate
    would fire a large leverage adjustment into the first clearing round.
    """
    n_f = cfg.N_S
    uniform = np.full(n_f, (1.0 - cfg.w_c) / n_f)
    e_bank = cfg.E_0 / cfg.N_b
    a_bank = cfg.lambda_0 * e_bank / (1.0 - cfg.w_c)

    banks = []
    for _ in range(cfg.N_b):
        banks.append(BankState(cash=a_bank, holdings=np.zeros(n_f),
                               liabilities=a_bank - e_bank,
                               div_price_est=np.zeros(n_f),
                               mean_est=np.zeros(n_f),
                               cov_est=np.zeros((n_f, n_f)), active=True))
    nt = NoiseTraderState(cash=cfg.A_N_0, holdings=np.zeros(n_f),
                          v=np.full(n_f, 1.0 / n_f))
    market = MarketState(prices=np.ones(n_f), prev_prices=np.ones(n_f),
                         dividends=np.full(n_f, cfg.pi_0))
    state = SimState(banks=banks, noise_trader=nt, market=market, t=-1)

    all_weights = np.column_stack([uniform] * (cfg.N_b + 1))
    prices = clear_market(all_weights, ownership_matrix(state),
                          np.array([a_bank] * cfg.N_b + [cfg.A_N_0]),
                          np.zeros(cfg.N_b + 1))
    state.market = MarketState(prices=np.ones(n_f), prev_prices=np.ones(n_f),
                               dividends=np.full(n_f, cfg.pi_0))
    state = settle(state, prices, all_weights, np.zeros(cfg.N_b + 1))
    state.market = MarketState(prices=prices, prev_prices=prices.copy(),
                               dividends=np.full(n_f, cfg.pi_0))
    state.t = 0

    # estimator initialization consistent with the opening balance sheet
    sig2_p0 = _consistent_sigma_p2(cfg, a_bank, e_bank)
    scale = sig2_p0 / float(uniform @ uniform)
    for bank in state.banks:
        bank.div_price_est = np.full(n_f, cfg.pi_0) / prices
        bank.mean_est = np.zeros(n_f)
        bank.cov_est = np.eye(n_f) * scale
    return state


def _consistent_sigma_p2(cfg: FullModelConfig, assets: float, equity: float) -> float:
    if cfg.b == 0.0:
        return cfg.phi ** 2
    target = assets / (cfg.alpha * equity)
    sig2 = target ** (1.0 / cfg.b) - cfg.sigma_0
    return max(sig2, VAR_FLOOR)


@dataclass
class FullRunResult:
    """Recorded trajectory of one full-model run."""

    prices: np.ndarray            # (n_rows, N_f)
    dividends: np.ndarray
    rhat: np.ndarray
    weights: np.ndarray
    leverage: np.ndarray          # bank 0 realized (A - c)/E
    sigma_p2: np.ndarray
    equity_bank: np.ndarray
    equity_nt: np.ndarray
    status: str = "ok"            # ok | bankrupt | unstable
    reason: str = ""
    fail_time: int | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_rows(self) -> int:
        return self.prices.shape[0]

    def columns(self) -> list[str]:
        n_f = self.prices.shape[1]
        cols = ["t"]
        cols += [f"p_{i + 1}" for i in range(n_f)]
        cols += [f"pi_{i + 1}" for i in range(n_f)]
        cols += [f"rhat_{i + 1}" for i in range(n_f)]
        cols += [f"w_{i + 1}" for i in range(n_f)]
        cols += ["leverage", "sigmaP2", "equity_bank", "equity_nt"]
        return cols

    def rows(self):
        for t in range(self.n_rows):
            yield ([t] + list(self.prices[t]) + list(self.dividends[t])
                   + list(self.rhat[t]) + list(self.weights[t])
                   + [self.leverage[t], self.sigma_p2[t], self.equity_bank[t],
                      self.equity_nt[t]])


def run_full(cfg: FullModelConfig, weights_fn: WeightsFn | None = None,
             collect_diagnostics: bool = True) -> FullRunResult:
    """Simulate T periods, recording the seven panel series per step.

    The run stops early on bankruptcy (the completed crash step is kept: its
    prices cleared and settlement happened) or on instability/clearing failure.
    """
    from .seeding import make_rng

    if weights_fn is None:
        weights_fn = _allocator_for(cfg)
    rng = make_rng(cfg.seed)
    state = initial_state(cfg)
    n_f = cfg.N_S
    n_rows = cfg.T + 1
    out = FullRunResult(
        prices=np.empty((n_rows, n_f)), dividends=np.empty((n_rows, n_f)),
        rhat=np.empty((n_rows, n_f)), weights=np.empty((n_rows, n_f)),
        leverage=np.empty(n_rows), sigma_p2=np.empty(n_rows),
        equity_bank=np.empty(n_rows), equity_nt=np.empty(n_rows),
    )
    diag = {"max_residual": 0.0, "max_share_error": 0.0,
            "max_identity_error": 0.0, "max_weight_error": 0.0,
            "min_cov_eigenvalue": np.inf}

    bank0 = state.banks[0]
    uniform = np.full(n_f, (1.0 - cfg.w_c) / n_f)
    _record(out, 0, state, bank0.div_price_est, uniform,
            portfolio_variance(uniform, bank0.cov_est))

    rows = 1
    for t in range(cfg.T):
        try:
            state, info = step(state, cfg, rng, weights_fn)
        except (ClearingError, DegenerateMarketError) as exc:
            out.status, out.reason, out.fail_time = "unstable", str(exc), t + 1
            break
        except BankruptcyError as exc:
            out.status, out.reason, out.fail_time = "bankrupt", str(exc), t + 1
            break
        _record(out, rows, state, state.banks[0].div_price_est, info.weights,
                info.sigma_p2)
        rows += 1
        if collect_diagnostics:
            _collect(diag, state, info, cfg)
        if info.bankrupt:
            out.status, out.reason, out.fail_time = "bankrupt", "equity below zero", t + 1
            break
        if info.unstable:
            out.status, out.reason, out.fail_time = "unstable", "magnitude limit", t + 1
            break

    for name in ("prices", "dividends", "rhat", "weights"):
        setattr(out, name, getattr(out, name)[:rows])
    for name in ("leverage", "sigma_p2", "equity_bank", "equity_nt"):
        setattr(out, name, getattr(out, name)[:rows])
    out.diagnostics = diag if collect_diagnostics else {}
    return out


def _allocator_for(cfg: FullModelConfig) -> WeightsFn:
    if cfg.allocator == "optimizer":
        from .portfolio_opt import optimizing_allocator
        return optimizing_allocator
    return softmax_allocator


def _record(out: FullRunResult, row: int, state: SimState, rhat, weights,
            sigma_p2: float) -> None:
    bank = state.banks[0]
    prices = state.market.prices
    assets = bank.assets(prices)
    equity = assets - bank.liabilities
    out.prices[row] = prices
    out.dividends[row] = state.market.dividends
    out.rhat[row] = rhat
    out.weights[row] = weights
    out.leverage[row] = (assets - bank.cash) / equity if equity != 0.0 else np.inf
    out.sigma_p2[row] = sigma_p2
    out.equity_bank[row] = equity
    out.equity_nt[row] = state.noise_trader.assets(prices)


def _collect(diag: dict, state: SimState, info: StepInfo,
             cfg: FullModelConfig) -> None:
    prices = state.market.prices
    shares = ownership_matrix(state).sum(axis=0)
    diag["max_share_error"] = max(diag["max_share_error"],
                                  float(np.max(np.abs(shares - 1.0))))
    diag["max_residual"] = max(diag["max_residual"], info.residual)
    for bank in state.banks:
        identity = bank.assets(prices) - bank.liabilities - bank.equity(prices)
        diag["max_identity_error"] = max(diag["max_identity_error"], abs(identity))
        eig = float(np.linalg.eigvalsh(bank.cov_est)[0])
        diag["min_cov_eigenvalue"] = min(diag["min_cov_eigenvalue"], eig)
    target = 1.0 - cfg.w_c
    nt_w = noise_trader_weights(state.noise_trader.v, cfg.w_c)
    diag["max_weight_error"] = max(
        diag["max_weight_error"],
        abs(float(np.sum(info.weights)) - target),
        abs(float(np.sum(nt_w)) - target))
