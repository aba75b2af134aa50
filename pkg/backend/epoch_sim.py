"""
Multi-epoch simulation of difficulty adjustments under a selfish-mining attack.

Attack cycles from cycle_sim are strung together into epochs of n0 official
blocks. At the end of each epoch both block rates are multiplied by the
factor of the adjustment policy:

  legacy        delta = S / (n0 * tau0)
  orphan-aware  delta = S / ((n0 + n') * tau0)

where S is the time the epoch took, n' the orphan blocks mined during it and
tau0 the target interblock time. Rates are multiplied by delta, so the
difficulty is multiplied by 1/delta. No clamp is applied.

An epoch closes at the first cycle boundary where its official count reaches
n0; the overshoot is carried into the next epoch's count.
"""

import math
import logging
from enum import Enum
from typing import Dict, Any, List, Optional, Tuple
from dataclasses import dataclass, asdict, field

from model import NetworkParams, CycleOutcome, RandomStream, DEFAULT_N0, resolve_workers
from cycle_sim import run_selfish_cycle, with_rates_scaled
from analytics import apparent_hashrate, honest_revenue_ratio, breakeven_time
from stats import EstimateWithCI, RunningCovariance, accumulate
from utils import run_parallel

logger = logging.getLogger(__name__)

CENSORING_LIMIT = 0.01
# Default horizon in multiples of the expected break-even time
HORIZON_MULTIPLE = 25
MIN_HORIZON_EPOCHS = 10
MAX_HORIZON_EPOCHS = 500


class AdjustmentPolicy(Enum):
    LEGACY = "legacy"
    ORPHAN_AWARE = "orphan-aware"


@dataclass(frozen=True)
class EpochOutcome:
    """One difficulty epoch of n0 official blocks."""
    epoch_index: int
    start_time: float
    elapsed_time: float
    official_blocks: int
    orphan_blocks: int
    selfish_orphans: int
    honest_orphans: int
    rate_multiplier: float
    block_interval: float
    delta_applied: float
    selfish_revenue: float
    honest_revenue: float
    cumulative_selfish_revenue: float
    counterfactual_honest_revenue: float

    @property
    def end_time(self) -> float:
        return self.start_time + self.elapsed_time

    @property
    def selfish_revenue_ratio(self) -> float:
        return self.selfish_revenue / self.elapsed_time

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


class EpochSimulator:
    """Runs attack cycles at the current difficulty and applies adjustments.

    Holds the serial difficulty state of one replication; call ``step`` for
    one cycle at a time or ``run`` for whole epochs.
    """

    def __init__(self, params: NetworkParams, policy: AdjustmentPolicy, stream: RandomStream,
                 n0: int = DEFAULT_N0):
        if n0 < 1:
            raise ValueError(f"n0 must be at least 1, got {n0}")
        self.setup_logging()
        self.params = params
        self.policy = policy
        self.stream = stream
        self.n0 = n0

        self.rate_multiplier = 1.0
        self.time = 0.0
        self.cumulative_revenue = 0.0
        self.carry = 0
        self.epoch_index = 1
        self._current = params
        self._start_epoch()

    def setup_logging(self):
        self.logger = logging.getLogger(__name__)

    def _start_epoch(self):
        self._epoch_start = self.time
        self._official = self.carry
        self._selfish_orphans = 0
        self._honest_orphans = 0
        self._selfish_revenue = 0.0
        self._honest_revenue = 0.0

    def counterfactual_revenue(self, t: float) -> float:
        """What the attacker would have earned mining honestly until time t."""
        return honest_revenue_ratio(self.params) * t

    def step(self) -> Tuple[CycleOutcome, Optional[EpochOutcome]]:
        """Run one attack cycle; return it and the epoch it closed, if any."""
        outcome = run_selfish_cycle(self._current, self.stream)
        self.time += outcome.duration
        self.cumulative_revenue += outcome.selfish_revenue
        self._official += outcome.official_blocks
        self._selfish_orphans += outcome.selfish_orphans
        self._honest_orphans += outcome.honest_orphans
        self._selfish_revenue += outcome.selfish_revenue
        self._honest_revenue += outcome.honest_official * self.params.b
        if self._official < self.n0:
            return outcome, None
        return outcome, self._close_epoch()

    def _adjustment_factor(self, elapsed: float, orphans: int) -> float:
        if self.policy is AdjustmentPolicy.LEGACY:
            return elapsed / (self.n0 * self.params.tau0)
        return elapsed / ((self.n0 + orphans) * self.params.tau0)

    def _close_epoch(self) -> EpochOutcome:
        elapsed = self.time - self._epoch_start
        orphans = self._selfish_orphans + self._honest_orphans
        delta = self._adjustment_factor(elapsed, orphans)
        epoch = EpochOutcome(
            epoch_index=self.epoch_index,
            start_time=self._epoch_start,
            elapsed_time=elapsed,
            official_blocks=self.n0,
            orphan_blocks=orphans,
            selfish_orphans=self._selfish_orphans,
            honest_orphans=self._honest_orphans,
            rate_multiplier=self.rate_multiplier,
            block_interval=self._current.tau0,
            delta_applied=delta,
            selfish_revenue=self._selfish_revenue,
            honest_revenue=self._honest_revenue,
            cumulative_selfish_revenue=self.cumulative_revenue,
            counterfactual_honest_revenue=self.counterfactual_revenue(self.time),
        )
        self.logger.debug(f"Epoch {self.epoch_index} closed after {elapsed:.0f}s with "
                          f"{orphans} orphans, delta={delta:.6f}")
        self.carry = self._official - self.n0
        self.rate_multiplier *= delta
        self._current = with_rates_scaled(self.params, self.rate_multiplier)
        self.epoch_index += 1
        self._start_epoch()
        return epoch

    def run(self, n_epochs: int) -> List[EpochOutcome]:
        epochs = []
        while len(epochs) < n_epochs:
            _, closed = self.step()
            if closed is not None:
                epochs.append(closed)
        return epochs


def run_epochs(params: NetworkParams, policy: AdjustmentPolicy, n_epochs: int, seed: int,
               n0: int = DEFAULT_N0) -> List[EpochOutcome]:
    """Simulate n_epochs consecutive epochs of one replication.

    Epoch 1 runs at the base rates; each later epoch runs at the rates left
    by the previous adjustment.
    """
    if n_epochs < 1:
        raise ValueError(f"n_epochs must be at least 1, got {n_epochs}")
    return EpochSimulator(params, policy, RandomStream(seed), n0).run(n_epochs)


def _replication_task(task: Tuple) -> List[EpochOutcome]:
    params, policy, n_epochs, seed, index, n0 = task
    return EpochSimulator(params, policy, RandomStream.for_chunk(seed, index), n0).run(n_epochs)


def run_replications(params: NetworkParams, policy: AdjustmentPolicy, n_epochs: int,
                     n_replications: int, seed: int, n0: int = DEFAULT_N0,
                     workers: Optional[int] = None) -> List[List[EpochOutcome]]:
    """Independent replications; replication i draws from stream (seed, i)."""
    if n_epochs < 1:
        raise ValueError(f"n_epochs must be at least 1, got {n_epochs}")
    if n_replications < 1:
        raise ValueError(f"n_replications must be at least 1, got {n_replications}")
    workers = resolve_workers(workers)
    logger.info(f"Running {n_replications} replications x {n_epochs} epochs ({policy.value}) "
                f"at q={params.q}, gamma={params.gamma}, n0={n0}, seed={seed}")
    tasks = [(params, policy, n_epochs, seed, i, n0) for i in range(n_replications)]
    return run_parallel(_replication_task, tasks, workers)


def orphan_rate(outcomes: List[EpochOutcome]) -> float:
    """Orphan blocks per interblock period, omega = n' * tau / S pooled over epochs."""
    if not outcomes:
        raise ValueError("orphan rate needs at least one epoch")
    weighted_orphans = sum(e.orphan_blocks * e.block_interval for e in outcomes)
    total_time = sum(e.elapsed_time for e in outcomes)
    return weighted_orphans / total_time


def implied_orphans(omega: float, n0: int = DEFAULT_N0) -> float:
    """Orphans expected per epoch at orphan rate omega, n0*omega/(1-omega)."""
    if not 0 <= omega < 1:
        raise ValueError(f"omega must lie in [0, 1), got {omega}")
    return n0 * omega / (1 - omega)


@dataclass
class EpochIndexSummary:
    """Cross-replication statistics of one epoch index."""
    epoch_index: int
    factor: EstimateWithCI
    elapsed_ratio: EstimateWithCI
    ratio_of_means: float
    selfish_revenue_ratio: EstimateWithCI
    orphans: EstimateWithCI

    def to_dict(self) -> Dict[str, Any]:
        return {
            'epoch_index': self.epoch_index,
            'factor': self.factor.to_dict(),
            'elapsed_ratio': self.elapsed_ratio.to_dict(),
            'ratio_of_means': self.ratio_of_means,
            'selfish_revenue_ratio': self.selfish_revenue_ratio.to_dict(),
            'orphans': self.orphans.to_dict(),
        }


@dataclass
class EpochSummary:
    policy: AdjustmentPolicy
    n_replications: int
    per_epoch: List[EpochIndexSummary]
    pooled_factor: EstimateWithCI
    later_factor: Optional[EstimateWithCI]
    later_revenue_ratio: Optional[EstimateWithCI]
    orphan_rate: float
    production_rate: float

    def to_dict(self) -> Dict[str, Any]:
        def _opt(estimate):
            return estimate.to_dict() if estimate is not None else None
        return {
            'policy': self.policy.value,
            'n_replications': self.n_replications,
            'per_epoch': [summary.to_dict() for summary in self.per_epoch],
            'pooled_factor': self.pooled_factor.to_dict(),
            'later_factor': _opt(self.later_factor),
            'later_revenue_ratio': _opt(self.later_revenue_ratio),
            'orphan_rate': self.orphan_rate,
            'production_rate': self.production_rate,
        }


def _revenue_ratio(epochs: List[EpochOutcome]) -> EstimateWithCI:
    pairs = RunningCovariance().push_arrays([e.selfish_revenue for e in epochs],
                                            [e.elapsed_time for e in epochs])
    return pairs.ratio_estimate()


def summarize_epochs(replications: List[List[EpochOutcome]], params: NetworkParams,
                     policy: AdjustmentPolicy, n0: int = DEFAULT_N0) -> EpochSummary:
    """Per-epoch and pooled statistics across replications.

    The difficulty factor is reported both as the mean of per-replication
    factors and as mean elapsed time over n0*tau0 (ratio of means).
    Needs at least two replications.
    """
    if len(replications) < 2:
        raise ValueError(f"need at least 2 replications, got {len(replications)}")
    n_epochs = min(len(epochs) for epochs in replications)
    target = n0 * params.tau0
    per_epoch = []
    for k in range(n_epochs):
        column = [epochs[k] for epochs in replications]
        elapsed = accumulate(e.elapsed_time / target for e in column)
        per_epoch.append(EpochIndexSummary(
            epoch_index=k + 1,
            factor=accumulate(e.delta_applied for e in column),
            elapsed_ratio=elapsed,
            ratio_of_means=elapsed.mean,
            selfish_revenue_ratio=_revenue_ratio(column),
            orphans=accumulate(float(e.orphan_blocks) for e in column),
        ))

    all_epochs = [e for epochs in replications for e in epochs[:n_epochs]]
    later = [e for epochs in replications for e in epochs[1:n_epochs]]
    produced = sum(n0 + e.orphan_blocks for e in all_epochs)
    total_time = sum(e.elapsed_time for e in all_epochs)
    return EpochSummary(
        policy=policy,
        n_replications=len(replications),
        per_epoch=per_epoch,
        pooled_factor=accumulate(e.delta_applied for e in all_epochs),
        later_factor=accumulate(e.delta_applied for e in later) if len(later) >= 2 else None,
        later_revenue_ratio=_revenue_ratio(later) if len(later) >= 2 else None,
        orphan_rate=orphan_rate(all_epochs),
        production_rate=produced / total_time,
    )


@dataclass
class BreakevenEstimate:
    """Empirical break-even time of the attack against honest mining."""
    never_profitable: bool
    estimate: Optional[EstimateWithCI] = None
    n_replications: int = 0
    censored: int = 0
    horizon_epochs: int = 0
    samples: List[float] = field(default_factory=list)

    @property
    def censored_fraction(self) -> float:
        return self.censored / self.n_replications if self.n_replications else 0.0

    @property
    def flagged(self) -> bool:
        return self.censored_fraction > CENSORING_LIMIT

    def to_dict(self) -> Dict[str, Any]:
        return {
            'never_profitable': self.never_profitable,
            'estimate': self.estimate.to_dict() if self.estimate is not None else None,
            'n_replications': self.n_replications,
            'censored': self.censored,
            'censored_fraction': self.censored_fraction,
            'flagged': self.flagged,
            'horizon_epochs': self.horizon_epochs,
        }


def default_horizon(params: NetworkParams, n0: int = DEFAULT_N0) -> int:
    """Epochs to simulate before censoring, sized from the analytic break-even time.

    Crossing times have a long right tail, so the horizon is a generous
    multiple of E[T0] in epochs, kept within [MIN_HORIZON_EPOCHS, MAX_HORIZON_EPOCHS].
    """
    expected_epochs = breakeven_time(params, n0) / (n0 * params.tau0)
    if not math.isfinite(expected_epochs):
        return MIN_HORIZON_EPOCHS
    return min(MAX_HORIZON_EPOCHS, max(MIN_HORIZON_EPOCHS, math.ceil(HORIZON_MULTIPLE * expected_epochs)))


def _first_breakeven(task: Tuple) -> Optional[float]:
    """Break-even instant of one replication, or None if the horizon is reached first."""
    params, policy, horizon_epochs, seed, index, n0 = task
    simulator = EpochSimulator(params, policy, RandomStream.for_chunk(seed, index), n0)
    epochs_done = 0
    # Revenue minus counterfactual at the last cycle boundary after epoch 1
    previous: Optional[Tuple[float, float]] = None
    while epochs_done < horizon_epochs:
        _, closed = simulator.step()
        if closed is not None:
            epochs_done += 1
        if epochs_done == 0:
            continue
        gap = simulator.cumulative_revenue - simulator.counterfactual_revenue(simulator.time)
        if previous is None:
            if gap >= 0:
                return simulator.time
        elif gap >= 0:
            t_prev, gap_prev = previous
            return t_prev + (simulator.time - t_prev) * (-gap_prev) / (gap - gap_prev)
        previous = (simulator.time, gap)
    return None


def empirical_breakeven(params: NetworkParams, n_replications: int, horizon_epochs: int, seed: int,
                        n0: int = DEFAULT_N0, workers: Optional[int] = None,
                        policy: AdjustmentPolicy = AdjustmentPolicy.LEGACY,
                        require_profitable: bool = True) -> BreakevenEstimate:
    """Mean time until cumulative attack revenue first matches honest mining.

    Each replication starts the attack right after an adjustment and looks,
    from the end of epoch 1 on, for the first instant at which the cumulative
    revenue (linearly interpolated between cycle boundaries) reaches
    q*b*t/tau0. Replications still behind after horizon_epochs are censored.

    Args:
        params: parameter point
        n_replications: independent replications
        horizon_epochs: epochs simulated before a replication is censored
        seed: master seed; replication i uses stream (seed, i)
        require_profitable: when True and q' <= q, return the never-profitable
            state without simulating

    Returns:
        BreakevenEstimate; its estimate is None when fewer than two
        replications broke even
    """
    if n_replications < 1:
        raise ValueError(f"n_replications must be at least 1, got {n_replications}")
    if horizon_epochs < 1:
        raise ValueError(f"horizon_epochs must be at least 1, got {horizon_epochs}")
    if require_profitable and apparent_hashrate(params) <= params.q:
        logger.info(f"q'={apparent_hashrate(params):.6f} <= q={params.q}: attack never breaks even")
        return BreakevenEstimate(never_profitable=True, horizon_epochs=horizon_epochs)

    workers = resolve_workers(workers)
    tasks = [(params, policy, horizon_epochs, seed, i, n0) for i in range(n_replications)]
    results = run_parallel(_first_breakeven, tasks, workers)
    samples = [t for t in results if t is not None]
    censored = len(results) - len(samples)
    estimate = accumulate(samples) if len(samples) >= 2 else None
    breakeven = BreakevenEstimate(
        never_profitable=False,
        estimate=estimate,
        n_replications=n_replications,
        censored=censored,
        horizon_epochs=horizon_epochs,
        samples=samples,
    )
    if breakeven.flagged:
        logger.warning(f"{censored}/{n_replications} replications censored at {horizon_epochs} epochs; "
                       f"break-even estimate is biased low")
    return breakeven
