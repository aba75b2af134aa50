"""
Closed-form profitability analytics for block-withholding ("selfish") mining.

Every quantity here is a pure function of a NetworkParams point: cycle
expectations of the attack, revenue ratios before and after a difficulty
adjustment, the attacker's apparent hashrate, the expected difficulty
factor, the break-even time and the pool-formation conditions.

The (q, gamma) helpers prefixed with an underscore use plain arithmetic so
they also evaluate exactly on ``fractions.Fraction`` inputs.
"""

import math
import logging
from typing import Dict, Any, List, Optional, Sequence, Tuple
from dataclasses import dataclass, asdict

import numpy as np
from scipy.optimize import minimize_scalar

from model import NetworkParams, DEFAULT_N0

logger = logging.getLogger(__name__)

SECONDS_PER_WEEK = 7 * 86400
DEFAULT_FD_STEP = 1e-4
SIGN_TOLERANCE = 1e-12


def _cycle_factor(q):
    """((1+pq)(p-q)+pq)/(p-q): expected attack-cycle length in units of tau0."""
    p = 1 - q
    return ((1 + p * q) * (p - q) + p * q) / (p - q)


def _q_prime_ratio(q, gamma):
    """q'/q in divided form; equals gamma at q = 0."""
    p = 1 - q
    numerator = ((1 + p * q) * (p - q) + p * q) - (1 - gamma) * p * p * (p - q)
    return numerator / (p * p * q + p - q)


def _q_prime(q, gamma):
    p = 1 - q
    numerator = ((1 + p * q) * (p - q) + p * q) * q - (1 - gamma) * p * p * q * (p - q)
    return numerator / (p * p * q + p - q)


def _q_prime_rearranged(q, gamma):
    numerator = q * (1 - q) ** 2 * (4 * q + gamma * (1 - 2 * q)) - q ** 3
    return numerator / (1 - q * (1 + q * (2 - q)))


def _expected_delta(q):
    p = 1 - q
    return (p - q + p * q * (p - q) + p * q) / (p * p * q + p - q)


def _sign(value: float, tolerance: float = SIGN_TOLERANCE) -> int:
    if abs(value) <= tolerance:
        return 0
    return 1 if value > 0 else -1


def honest_revenue_ratio(params: NetworkParams) -> float:
    """Revenue per second of the honest strategy, q*b/tau0."""
    return params.q * params.b / params.tau0


def stability_bound(params: NetworkParams) -> float:
    """Upper bound alpha'*b on the revenue ratio of any strategy without adjustment.

    No integrable strategy earns more per unit of time than the attacker's own
    block rate times the reward, so honest mining is optimal as long as the
    difficulty stays put.
    """
    return params.alpha_prime * params.b


def selfish_cycle_expectations(params: NetworkParams) -> Tuple[float, float]:
    """Expected duration (seconds) and revenue of one selfish-mining cycle.

    Returns:
        (E[duration], E[revenue])
    """
    q, p = params.q, params.p
    factor = _cycle_factor(q)
    expected_duration = factor * params.tau0
    expected_revenue = factor * q * params.b - (1 - params.gamma) * p * p * q * params.b
    return expected_duration, expected_revenue


def selfish_revenue_ratio(params: NetworkParams) -> float:
    """Revenue per second of selfish mining before any difficulty adjustment."""
    duration, revenue = selfish_cycle_expectations(params)
    return revenue / duration


def expected_official_per_cycle(params: NetworkParams) -> float:
    """Official blocks appended per attack cycle, 1 + p^2 q/(p-q)."""
    p, q = params.p, params.q
    return 1 + p * p * q / (p - q)


def expected_cycles_per_epoch(params: NetworkParams, n0: int = DEFAULT_N0) -> float:
    return n0 / expected_official_per_cycle(params)


def apparent_hashrate(params: NetworkParams) -> float:
    """Long-run share q' of official-chain blocks that belong to the attacker."""
    return _q_prime(params.q, params.gamma)


def apparent_hashrate_rearranged(params: NetworkParams) -> float:
    """Same quantity as apparent_hashrate, in the rearranged relative-revenue form."""
    return _q_prime_rearranged(params.q, params.gamma)


def apparent_hashrate_ratio(q: float, gamma: float) -> float:
    return _q_prime_ratio(q, gamma)


def relative_revenue(params: NetworkParams) -> float:
    """Attacker share of all revenue paid per cycle, E[R_S]/(E[R_S]+E[R_N])."""
    _, revenue = selfish_cycle_expectations(params)
    return revenue / (expected_official_per_cycle(params) * params.b)


def expected_delta(params: NetworkParams) -> float:
    """Expected rate multiplier applied at the first legacy adjustment; gamma-free."""
    return _expected_delta(params.q)


def post_adjustment_revenue_ratio(params: NetworkParams) -> float:
    """Attacker revenue per second once the difficulty has adjusted, q'*b/tau0."""
    return apparent_hashrate(params) * params.b / params.tau0


def honest_network_revenue_ratio(params: NetworkParams, adjusted: bool = False) -> float:
    """Revenue per second of the honest remainder of the network under attack."""
    if adjusted:
        return (1 - apparent_hashrate(params)) * params.b / params.tau0
    duration, revenue = selfish_cycle_expectations(params)
    honest_blocks = expected_official_per_cycle(params) - revenue / params.b
    return honest_blocks * params.b / duration


def cost_ratio(params: NetworkParams) -> float:
    """E[C]/E[T]; the same for every strategy since the machines never idle."""
    return params.cost_rate


def pnl_rate(revenue_ratio: float, params: NetworkParams) -> float:
    """Long-run profit and loss per second of a repeated strategy."""
    return revenue_ratio - cost_ratio(params)


def compare_strategies(ratio_a: float, ratio_b: float) -> int:
    """Sign of PnL(a) - PnL(b) for two strategies sharing a cost ratio."""
    return _sign(ratio_a - ratio_b)


def profitability_thresholds(params: NetworkParams) -> Tuple[float, float]:
    """Connectivity and hashrate above which the attack beats honest mining after adjustment.

    Returns:
        (gamma_min, q_min) with gamma_min = max(0, (1-3q)/(1-2q)) and
        q_min = (1-gamma)/(3-2gamma)
    """
    q, gamma = params.q, params.gamma
    gamma_min = max(0.0, (1 - 3 * q) / (1 - 2 * q))
    q_min = (1 - gamma) / (3 - 2 * gamma)
    return gamma_min, q_min


def threshold_signs(params: NetworkParams, tolerance: float = SIGN_TOLERANCE) -> Tuple[int, int, int]:
    """Signs of q'-q, gamma-(1-3q)/(1-2q) and q-q_min; boundary maps to 0."""
    q, gamma = params.q, params.gamma
    _, q_min = profitability_thresholds(params)
    return (
        _sign(apparent_hashrate(params) - q, tolerance),
        _sign(gamma - (1 - 3 * q) / (1 - 2 * q), tolerance),
        _sign(q - q_min, tolerance),
    )


def breakeven_time(params: NetworkParams, n0: int = DEFAULT_N0) -> float:
    """Expected time (seconds) until the attack has paid as much as honest mining.

    Counted from the start of the attack, right after an adjustment, so it
    includes the first epoch. Returns ``math.inf`` when q' <= q: the attack
    never breaks even.
    """
    q_prime = apparent_hashrate(params)
    if q_prime <= params.q:
        return math.inf
    delta = expected_delta(params)
    return q_prime * (delta - 1) / (q_prime - params.q) * n0 * params.tau0


def breakeven_minimizer(gamma: float, q_low: Optional[float] = None, q_high: float = 0.5 - 1e-6,
                        n0: int = DEFAULT_N0, tau0: float = 600.0) -> Tuple[float, float]:
    """Attacker hashrate that reaches break-even soonest at a given connectivity.

    Args:
        gamma: connectivity
        q_low: lower search bound; defaults to just above the profitability threshold
        q_high: upper search bound (below 1/2)

    Returns:
        (q at the minimum, E[T0] there in seconds)
    """
    if q_low is None:
        q_low = (1 - gamma) / (3 - 2 * gamma) + 1e-6
    if not 0 <= q_low < q_high < 0.5:
        raise ValueError(f"search bounds must satisfy 0 <= q_low < q_high < 1/2, got ({q_low}, {q_high})")

    def objective(q):
        return breakeven_time(NetworkParams(q=q, gamma=gamma, tau0=tau0), n0) / (n0 * tau0)

    result = minimize_scalar(objective, bounds=(q_low, q_high), method='bounded',
                             options={'xatol': 1e-8})
    q_best = float(result.x)
    return q_best, breakeven_time(NetworkParams(q=q_best, gamma=gamma, tau0=tau0), n0)


def pool_attractiveness(params: NetworkParams) -> Optional[bool]:
    """Whether a marginal honest miner gains by joining the selfish pool (limit form).

    Returns None when q = 0: there is no pool to join.
    """
    if params.q == 0:
        return None
    q_prime = apparent_hashrate(params)
    return q_prime / params.q > (1 - q_prime) / (1 - params.q)


def pool_acceptance(params: NetworkParams, step: float = DEFAULT_FD_STEP) -> bool:
    """Whether pool members gain by admitting a marginal miner: d(q'/q)/dq > 0.

    Uses a centered finite difference of q'/q at q.
    """
    q = params.q
    if not step > 0 or q - step <= 0 or q + step >= 0.5:
        raise ValueError(f"finite-difference stencil [q-step, q+step] must lie in (0, 1/2), "
                         f"got q={q}, step={step}")
    slope = (_q_prime_ratio(q + step, params.gamma) - _q_prime_ratio(q - step, params.gamma)) / (2 * step)
    return slope > 0


def pool_attractiveness_finite(params: NetworkParams, epsilon: float) -> bool:
    """Pre-limit joining condition for a miner of relative hashrate epsilon."""
    q, gamma = params.q, params.gamma
    if not epsilon > 0 or q + epsilon >= 0.5:
        raise ValueError(f"epsilon must be positive with q+epsilon < 1/2, got q={q}, epsilon={epsilon}")
    joined = _q_prime(q + epsilon, gamma) / (q + epsilon)
    return joined > (1 - _q_prime(q, gamma)) / (1 - q)


def pool_acceptance_finite(params: NetworkParams, epsilon: float) -> bool:
    """Pre-limit admission condition: ((q+eps)' - q')/eps > q'/q."""
    q, gamma = params.q, params.gamma
    if q == 0 or not epsilon > 0 or q + epsilon >= 0.5:
        raise ValueError(f"need q > 0, epsilon > 0 and q+epsilon < 1/2, got q={q}, epsilon={epsilon}")
    increment = (_q_prime(q + epsilon, gamma) - _q_prime(q, gamma)) / epsilon
    return increment > _q_prime(q, gamma) / q


@dataclass
class AnalyticsReport:
    """All closed-form quantities for one parameter point (rates in reward/second)."""
    q: float
    gamma: float
    tau0: float
    b: float
    gamma_h: float
    gamma_sm_pre: float
    expected_cycle_duration: float
    expected_cycle_revenue: float
    expected_official_per_cycle: float
    apparent_hashrate: float
    apparent_hashrate_ratio: float
    expected_delta: float
    gamma_sm_post: float
    breakeven_time: float
    gamma_threshold: float
    q_threshold: float
    cost_ratio: float
    pnl_rate_pre: float
    pnl_rate_post: float
    pnl_rate_honest: float
    honest_network_ratio_pre: float
    honest_network_ratio_post: float
    pool_attractive: Optional[bool]
    pool_accepting: Optional[bool]

    @property
    def never_profitable(self) -> bool:
        return math.isinf(self.breakeven_time)

    @property
    def breakeven_weeks(self) -> float:
        return self.breakeven_time / SECONDS_PER_WEEK

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['never_profitable'] = self.never_profitable
        data['breakeven_weeks'] = self.breakeven_weeks
        return data


def build_report(params: NetworkParams, n0: int = DEFAULT_N0,
                 step: float = DEFAULT_FD_STEP) -> AnalyticsReport:
    """Evaluate every closed form at one parameter point."""
    duration, revenue = selfish_cycle_expectations(params)
    gamma_h = honest_revenue_ratio(params)
    gamma_pre = revenue / duration
    gamma_post = post_adjustment_revenue_ratio(params)
    gamma_min, q_min = profitability_thresholds(params)
    try:
        accepting = pool_acceptance(params, step)
    except ValueError:
        accepting = None

    return AnalyticsReport(
        q=params.q,
        gamma=params.gamma,
        tau0=params.tau0,
        b=params.b,
        gamma_h=gamma_h,
        gamma_sm_pre=gamma_pre,
        expected_cycle_duration=duration,
        expected_cycle_revenue=revenue,
        expected_official_per_cycle=expected_official_per_cycle(params),
        apparent_hashrate=apparent_hashrate(params),
        apparent_hashrate_ratio=apparent_hashrate_ratio(params.q, params.gamma),
        expected_delta=expected_delta(params),
        gamma_sm_post=gamma_post,
        breakeven_time=breakeven_time(params, n0),
        gamma_threshold=gamma_min,
        q_threshold=q_min,
        cost_ratio=cost_ratio(params),
        pnl_rate_pre=pnl_rate(gamma_pre, params),
        pnl_rate_post=pnl_rate(gamma_post, params),
        pnl_rate_honest=pnl_rate(gamma_h, params),
        honest_network_ratio_pre=honest_network_revenue_ratio(params),
        honest_network_ratio_post=honest_network_revenue_ratio(params, adjusted=True),
        pool_attractive=pool_attractiveness(params),
        pool_accepting=accepting,
    )


def sweep_grid(q_range: Tuple[float, float], resolution: int) -> np.ndarray:
    q_low, q_high = q_range
    if resolution < 1:
        raise ValueError(f"resolution must be at least 1, got {resolution}")
    if not 0 <= q_low <= q_high < 0.5:
        raise ValueError(f"q range must lie in [0, 1/2), got ({q_low}, {q_high})")
    if resolution == 1:
        return np.array([q_low])
    return np.linspace(q_low, q_high, resolution)


def figure_sweep(q_range: Tuple[float, float], gamma_list: Sequence[float], resolution: int,
                 tau0: float = 600.0, b: float = 1.0, cost_rate: float = 0.0,
                 n0: int = DEFAULT_N0) -> List[AnalyticsReport]:
    """One report per (gamma, q) grid point, ordered by gamma then q.

    Args:
        q_range: (low, high) inclusive, inside [0, 1/2)
        gamma_list: connectivities to sweep
        resolution: number of q points

    Returns:
        List of AnalyticsReport rows
    """
    if not gamma_list:
        raise ValueError("gamma list must not be empty")
    grid = sweep_grid(q_range, resolution)
    rows = []
    for gamma in sorted(gamma_list):
        for q in grid:
            params = NetworkParams(q=float(q), gamma=float(gamma), tau0=tau0, b=b, cost_rate=cost_rate)
            rows.append(build_report(params, n0))
    logger.debug(f"Swept {len(rows)} grid points over q in {q_range}, gamma in {list(gamma_list)}")
    return rows
