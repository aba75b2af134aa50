"""
Discrete-event Monte Carlo of single mining cycles.

Three cycle kinds are simulated block by block: the honest cycle (one block),
the selfish-mining attack cycle and the generic Poisson race in which one
process must lead the other by a fixed count.

Both sides mine as independent Poisson processes. By memorylessness the
next block of the merged process arrives after an exponential time with the
total rate and belongs to the attacker with probability q, which is how
events are drawn here.

Modelling notes:
- A tie is decided by one Bernoulli(gamma) draw when the deciding honest
  block is found; gamma is constant.
- Releasing parts of the private chain while the lead exceeds 2 changes
  neither revenue nor cycle duration, so it is not simulated: the private
  chain is published in full when the lead falls back to 1.
"""

import logging
from enum import Enum
from typing import Dict, Any, List, Optional, Tuple
from dataclasses import dataclass, field, replace

from model import NetworkParams, CycleOutcome, RandomStream, resolve_workers
from stats import EstimateWithCI, RunningStats, RunningCovariance, ratio_estimate, MIN_BATCHES
from utils import run_parallel, split_counts

logger = logging.getLogger(__name__)

N_CHUNKS = 32

CYCLE_FIELDS = [
    'duration', 'selfish_official', 'honest_official',
    'selfish_orphans', 'honest_orphans', 'selfish_revenue',
]
RACE_FIELDS = ['duration', 'fast_count', 'slow_count']
SELFISH_CASES = [
    'honest_first', 'tie_selfish_wins', 'tie_honest_wins',
    'tie_selfish_extends', 'selfish_lead',
]
TIE_CASES = ('tie_selfish_wins', 'tie_honest_wins', 'tie_selfish_extends')


class CycleKind(Enum):
    HONEST = "honest"
    SELFISH_MINING = "selfish"
    POISSON_RACE = "race"


@dataclass(frozen=True)
class RaceOutcome:
    duration: float
    fast_count: int
    slow_count: int


def _next_block(stream: RandomStream, params: NetworkParams) -> Tuple[float, bool]:
    """Waiting time to the next block of the whole network and whether the attacker found it."""
    return stream.exponential(1.0 / params.tau0), stream.uniform() < params.q


def run_honest_cycle(params: NetworkParams, stream: RandomStream) -> CycleOutcome:
    """Honest cycle: lasts until the first block, whoever finds it."""
    duration, attacker = _next_block(stream, params)
    return CycleOutcome(
        duration=duration,
        selfish_official=1 if attacker else 0,
        honest_official=0 if attacker else 1,
        selfish_orphans=0,
        honest_orphans=0,
        selfish_revenue=params.b if attacker else 0.0,
        case="honest",
    )


def run_selfish_cycle(params: NetworkParams, stream: RandomStream) -> CycleOutcome:
    """One selfish-mining attack cycle, from a shared tip to the next shared tip.

    The cycle ends in one of four ways:
      (a) the honest side finds the first block;
      (b) the attacker finds the first block, the honest side equalizes and the
          honest side also finds the deciding block, on the attacker's branch
          with probability gamma;
      (c) as (b) but the attacker finds the deciding block;
      (d) the attacker reaches a lead of 2; the race then runs until the honest
          count is one below the attacker count and the private chain wins.
    With q = 0 every cycle is case (a).
    """
    b = params.b
    dt, attacker = _next_block(stream, params)
    t = dt
    if not attacker:
        return CycleOutcome(t, 0, 1, 0, 0, 0.0, case="honest_first")

    dt, attacker = _next_block(stream, params)
    t += dt
    if not attacker:
        dt, attacker = _next_block(stream, params)
        t += dt
        if attacker:
            return CycleOutcome(t, 2, 0, 0, 1, 2 * b, case="tie_selfish_extends")
        if stream.uniform() < params.gamma:
            return CycleOutcome(t, 1, 1, 0, 1, b, case="tie_selfish_wins")
        return CycleOutcome(t, 0, 2, 1, 0, 0.0, case="tie_honest_wins")

    selfish, honest = 2, 0
    race_start = t
    while honest != selfish - 1:
        dt, attacker = _next_block(stream, params)
        t += dt
        if attacker:
            selfish += 1
        else:
            honest += 1
    return CycleOutcome(t, selfish, 0, 0, honest, selfish * b,
                        case="selfish_lead", race_duration=t - race_start)


def run_poisson_race(rate_fast: float, rate_slow: float, target_lead: int,
                     stream: RandomStream) -> RaceOutcome:
    """Run two Poisson processes until the fast one leads by target_lead."""
    if not rate_fast > rate_slow >= 0:
        raise ValueError(f"need rate_fast > rate_slow >= 0, got ({rate_fast}, {rate_slow})")
    if target_lead < 1:
        raise ValueError(f"target_lead must be at least 1, got {target_lead}")
    total = rate_fast + rate_slow
    fast_share = rate_fast / total
    fast = slow = 0
    t = 0.0
    while fast - slow != target_lead:
        t += stream.exponential(total)
        if stream.uniform() < fast_share:
            fast += 1
        else:
            slow += 1
    return RaceOutcome(t, fast, slow)


@dataclass
class ChunkResult:
    """Moments gathered from one independently seeded chunk of cycles."""
    index: int
    n: int
    fields: Dict[str, RunningStats]
    revenue_per_time: RunningCovariance
    share: RunningCovariance
    case_counts: Dict[str, int]
    race_durations: RunningStats
    sums: Dict[str, float]


@dataclass
class CycleStatistics:
    """Monte Carlo summary of n cycles of one kind."""
    kind: CycleKind
    n: int
    seed: int
    fields: Dict[str, EstimateWithCI]
    revenue_ratio: Optional[EstimateWithCI] = None
    revenue_ratio_batch: Optional[EstimateWithCI] = None
    apparent_hashrate: Optional[EstimateWithCI] = None
    case_frequencies: Dict[str, EstimateWithCI] = field(default_factory=dict)
    race_duration: Optional[EstimateWithCI] = None

    def to_dict(self) -> Dict[str, Any]:
        def _opt(estimate):
            return estimate.to_dict() if estimate is not None else None
        return {
            'kind': self.kind.value,
            'n': self.n,
            'seed': self.seed,
            'fields': {name: est.to_dict() for name, est in self.fields.items()},
            'revenue_ratio': _opt(self.revenue_ratio),
            'revenue_ratio_batch': _opt(self.revenue_ratio_batch),
            'apparent_hashrate': _opt(self.apparent_hashrate),
            'case_frequencies': {name: est.to_dict() for name, est in self.case_frequencies.items()},
            'race_duration': _opt(self.race_duration),
        }


def _simulate_chunk(task: Tuple) -> ChunkResult:
    kind, params, target_lead, seed, index, count = task
    stream = RandomStream.for_chunk(seed, index)
    race_durations = RunningStats()
    case_counts: Dict[str, int] = {}

    if kind is CycleKind.POISSON_RACE:
        names = RACE_FIELDS
        columns: Dict[str, List[float]] = {name: [] for name in names}
        for _ in range(count):
            race = run_poisson_race(params.alpha, params.alpha_prime, target_lead, stream)
            columns['duration'].append(race.duration)
            columns['fast_count'].append(race.fast_count)
            columns['slow_count'].append(race.slow_count)
        revenue, official, selfish = [], [], []
    else:
        names = CYCLE_FIELDS
        columns = {name: [] for name in names}
        official, selfish = [], []
        simulate = run_honest_cycle if kind is CycleKind.HONEST else run_selfish_cycle
        for _ in range(count):
            outcome = simulate(params, stream)
            for name in names:
                columns[name].append(getattr(outcome, name))
            official.append(outcome.official_blocks)
            selfish.append(outcome.selfish_official)
            case_counts[outcome.case] = case_counts.get(outcome.case, 0) + 1
            if outcome.case == "selfish_lead":
                race_durations.push(outcome.race_duration)
        revenue = columns['selfish_revenue']

    fields = {name: RunningStats().push_array(columns[name]) for name in names}
    durations = columns['duration']
    return ChunkResult(
        index=index,
        n=count,
        fields=fields,
        revenue_per_time=RunningCovariance().push_arrays(revenue, durations[:len(revenue)]),
        share=RunningCovariance().push_arrays(selfish, official),
        case_counts=case_counts,
        race_durations=race_durations,
        sums={'revenue': float(sum(revenue)), 'duration': float(sum(durations))},
    )


def _merge_chunks(kind: CycleKind, n: int, seed: int, chunks: List[ChunkResult]) -> CycleStatistics:
    names = RACE_FIELDS if kind is CycleKind.POISSON_RACE else CYCLE_FIELDS
    merged = {name: RunningStats() for name in names}
    revenue_per_time = RunningCovariance()
    share = RunningCovariance()
    race_durations = RunningStats()
    case_counts: Dict[str, int] = {}
    for chunk in sorted(chunks, key=lambda c: c.index):
        for name in names:
            merged[name].merge(chunk.fields[name])
        revenue_per_time.merge(chunk.revenue_per_time)
        share.merge(chunk.share)
        race_durations.merge(chunk.race_durations)
        for case, hits in chunk.case_counts.items():
            case_counts[case] = case_counts.get(case, 0) + hits

    statistics = CycleStatistics(
        kind=kind, n=n, seed=seed,
        fields={name: stats.estimate() for name, stats in merged.items()},
    )
    if kind is CycleKind.POISSON_RACE:
        return statistics

    statistics.revenue_ratio = revenue_per_time.ratio_estimate()
    statistics.apparent_hashrate = share.ratio_estimate()
    batches = [(c.sums['revenue'], c.sums['duration']) for c in chunks if c.n > 0]
    if len(batches) >= MIN_BATCHES:
        statistics.revenue_ratio_batch = ratio_estimate(
            sum(num for num, _ in batches), sum(den for _, den in batches), batches)

    cases = SELFISH_CASES if kind is CycleKind.SELFISH_MINING else ['honest']
    for case in cases:
        statistics.case_frequencies[case] = RunningStats.from_counts(case_counts.get(case, 0), n).estimate()
    if kind is CycleKind.SELFISH_MINING:
        ties = sum(case_counts.get(case, 0) for case in TIE_CASES)
        statistics.case_frequencies['tie'] = RunningStats.from_counts(ties, n).estimate()
        if race_durations.n >= 2:
            statistics.race_duration = race_durations.estimate()
    return statistics


def estimate_cycle_statistics(params: NetworkParams, kind: CycleKind, n_cycles: int, seed: int,
                              target_lead: int = 1, workers: Optional[int] = None) -> CycleStatistics:
    """Simulate n_cycles cycles and estimate every per-cycle quantity.

    Cycles are split into N_CHUNKS chunks seeded from (seed, chunk index);
    the chunks double as the batches of the batch-means ratio interval. The
    result depends only on (params, kind, n_cycles, seed), never on the
    worker count.

    For POISSON_RACE the honest side is the fast process (rate alpha) and the
    attacker the slow one (rate alpha').

    Args:
        params: parameter point
        kind: cycle kind to simulate
        n_cycles: number of cycles, at least 2
        seed: master seed
        target_lead: lead that ends a Poisson race
        workers: process count; defaults to SMLAB_WORKERS

    Returns:
        CycleStatistics with per-field estimates, ratio estimates and case frequencies
    """
    if n_cycles < 2:
        raise ValueError(f"n_cycles must be at least 2, got {n_cycles}")
    if kind is CycleKind.SELFISH_MINING and params.q == 0:
        raise ValueError("selfish-mining cycles need an attacker: q must be in (0, 1/2)")
    workers = resolve_workers(workers)
    counts = split_counts(n_cycles, N_CHUNKS)
    tasks = [(kind, params, target_lead, seed, i, count) for i, count in enumerate(counts)]
    logger.info(f"Simulating {n_cycles} {kind.value} cycles at q={params.q}, gamma={params.gamma}, "
                f"seed={seed}, workers={workers}")
    chunks = run_parallel(_simulate_chunk, tasks, workers)
    return _merge_chunks(kind, n_cycles, seed, chunks)


def estimate_race_statistics(rate_fast: float, rate_slow: float, target_lead: int, n_races: int,
                             seed: int, workers: Optional[int] = None) -> CycleStatistics:
    """Poisson-race estimator for arbitrary rates (per unit of time)."""
    if not rate_fast > rate_slow >= 0:
        raise ValueError(f"need rate_fast > rate_slow >= 0, got ({rate_fast}, {rate_slow})")
    total = rate_fast + rate_slow
    # Recast the two rates as a parameter point: alpha = fast, alpha' = slow
    params = NetworkParams(q=rate_slow / total, gamma=0.0, tau0=1.0 / total)
    return estimate_cycle_statistics(params, CycleKind.POISSON_RACE, n_races, seed,
                                     target_lead=target_lead, workers=workers)


def with_rates_scaled(params: NetworkParams, factor: float) -> NetworkParams:
    """Parameter point whose block rates are multiplied by factor (p, q, gamma kept)."""
    if not factor > 0:
        raise ValueError(f"rate factor must be positive, got {factor}")
    return replace(params, tau0=params.tau0 / factor)
