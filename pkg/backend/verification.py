"""
Acceptance suite: Monte Carlo estimates checked against the closed forms.

Each criterion produces a CriterionResult holding the statistical verdicts
it ran and the exact facts it checked. The suite passes when every criterion
passes. ``fast`` divides the sample sizes by ten.
"""

import json
import math
import logging
from fractions import Fraction
from typing import List, Dict, Any, Optional, Tuple
from dataclasses import dataclass, field

import numpy as np

from model import NetworkParams, RandomStream, DEFAULT_N0
from analytics import (
    honest_revenue_ratio, selfish_cycle_expectations, selfish_revenue_ratio, stability_bound,
    apparent_hashrate, apparent_hashrate_rearranged, expected_delta,
    post_adjustment_revenue_ratio, breakeven_time, breakeven_minimizer, threshold_signs,
    pool_attractiveness, pool_acceptance,
)
from cycle_sim import CycleKind, CycleStatistics, estimate_cycle_statistics, estimate_race_statistics
from epoch_sim import AdjustmentPolicy, run_replications, summarize_epochs, empirical_breakeven, default_horizon
from stats import ComparisonVerdict, RunningStats, compare, compare_upper, coverage_tolerance, DEFAULT_Z
from utils import split_counts

FULL_CYCLES = 1_000_000
FULL_EPOCH_REPLICATIONS = 200
FULL_BREAKEVEN_REPLICATIONS = 100
FAST_DIVISOR = 10

CYCLE_GRID_Q = (0.1, 0.2, 0.3, 0.4)
CYCLE_GRID_GAMMA = (0.0, 0.5, 1.0)
BREAKEVEN_TOLERANCE = 0.05
BREAKEVEN_POINTS = ((0.1, 0.9), (0.43, 0.5))
MINIMIZER_RANGE = (0.43, 0.44)
COVERAGE_RUNS = 200


@dataclass
class CriterionResult:
    key: str
    title: str
    passed: bool = True
    verdicts: List[ComparisonVerdict] = field(default_factory=list)
    checks: Dict[str, bool] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)

    def add_verdict(self, verdict: ComparisonVerdict):
        self.verdicts.append(verdict)
        self.passed = self.passed and verdict.passed

    def add_check(self, name: str, ok: bool):
        self.checks[name] = bool(ok)
        self.passed = self.passed and bool(ok)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'key': self.key,
            'title': self.title,
            'pass': self.passed,
            'verdicts': [verdict.to_dict() for verdict in self.verdicts],
            'checks': dict(self.checks),
            'notes': list(self.notes),
        }


@dataclass
class SuiteReport:
    fast: bool
    seed: int
    criteria: List[CriterionResult]

    @property
    def passed(self) -> bool:
        return all(criterion.passed for criterion in self.criteria)

    @property
    def verdicts(self) -> List[ComparisonVerdict]:
        return [verdict for criterion in self.criteria for verdict in criterion.verdicts]

    def summary_lines(self) -> List[str]:
        lines = []
        for criterion in self.criteria:
            mark = "PASS" if criterion.passed else "FAIL"
            failed = [v.name for v in criterion.verdicts if not v.passed]
            failed += [name for name, ok in criterion.checks.items() if not ok]
            detail = f" (failed: {', '.join(failed)})" if failed else ""
            lines.append(f"[{mark}] {criterion.key} {criterion.title}{detail}")
        total = len(self.criteria)
        passed = sum(1 for criterion in self.criteria if criterion.passed)
        lines.append(f"{passed}/{total} criteria passed")
        return lines

    def to_dict(self) -> Dict[str, Any]:
        return {
            'fast': self.fast,
            'seed': self.seed,
            'pass': self.passed,
            'criteria': [criterion.to_dict() for criterion in self.criteria],
        }


class AcceptanceSuite:
    """Runs the acceptance criteria and collects their results"""

    def __init__(self, fast: bool = False, seed: int = 1, workers: Optional[int] = None,
                 z: float = DEFAULT_Z):
        self.setup_logging()
        self.fast = fast
        self.seed = seed
        self.workers = workers
        self.z = z
        self._cycle_cache: Dict[Tuple[float, float], CycleStatistics] = {}

        divisor = FAST_DIVISOR if fast else 1
        self.n_cycles = FULL_CYCLES // divisor
        self.epoch_replications = FULL_EPOCH_REPLICATIONS // divisor
        self.orphan_replications = 100 // divisor
        self.breakeven_replications = FULL_BREAKEVEN_REPLICATIONS // divisor

    def setup_logging(self):
        self.logger = logging.getLogger(__name__)

    def _seed(self, offset: int) -> int:
        return (self.seed + offset) % 2**64

    def run(self) -> SuiteReport:
        """
        Run every criterion in order

        Returns:
            SuiteReport with one CriterionResult per criterion
        """
        criteria = [
            self.check_honest_baseline,
            self.check_cycle_expectations,
            self.check_pre_adjustment_dominance,
            self.check_stability_bound,
            self.check_apparent_hashrate,
            self.check_difficulty_factor,
            self.check_post_adjustment_ratio,
            self.check_breakeven,
            self.check_thresholds,
            self.check_pool_conditions,
            self.check_orphan_aware_adjustment,
            self.check_poisson_race,
            self.check_determinism,
        ]
        results = []
        for criterion in criteria:
            result = criterion()
            self.logger.info(f"{result.key} {result.title}: {'pass' if result.passed else 'FAIL'}")
            results.append(result)
        return SuiteReport(fast=self.fast, seed=self.seed, criteria=results)

    def _selfish_statistics(self, q: float, gamma: float) -> CycleStatistics:
        key = (q, gamma)
        if key not in self._cycle_cache:
            index = len(self._cycle_cache)
            self._cycle_cache[key] = estimate_cycle_statistics(
                NetworkParams(q=q, gamma=gamma), CycleKind.SELFISH_MINING, self.n_cycles,
                self._seed(100 + index), workers=self.workers)
        return self._cycle_cache[key]

    def _grid(self):
        for q in CYCLE_GRID_Q:
            for gamma in CYCLE_GRID_GAMMA:
                yield q, gamma

    def check_honest_baseline(self) -> CriterionResult:
        result = CriterionResult("C1", "honest baseline")
        for offset, q in enumerate((0.1, 0.3)):
            params = NetworkParams(q=q, gamma=0.0)
            stats = estimate_cycle_statistics(params, CycleKind.HONEST, self.n_cycles,
                                              self._seed(10 + offset), workers=self.workers)
            result.add_verdict(compare(f"honest duration q={q}", params.tau0,
                                       stats.fields['duration'], self.z))
            result.add_verdict(compare(f"honest win rate q={q}", q,
                                       stats.fields['selfish_official'], self.z))

        # Interval calibration: the duration interval should cover tau0 at its nominal rate
        params = NetworkParams(q=0.1, gamma=0.0)
        per_run = max(200, self.n_cycles // 1000)
        covered = 0
        for index in range(COVERAGE_RUNS):
            stats = estimate_cycle_statistics(params, CycleKind.HONEST, per_run,
                                              self._seed(20_000 + index), workers=1)
            covered += stats.fields['duration'].covers(params.tau0)
        required = coverage_tolerance(COVERAGE_RUNS)
        result.add_check("duration interval coverage", covered >= required)
        result.notes.append(f"duration interval covered tau0 in {covered}/{COVERAGE_RUNS} runs, need {required}")
        return result

    def check_cycle_expectations(self) -> CriterionResult:
        result = CriterionResult("C2", "selfish cycle expectations")
        for q, gamma in self._grid():
            params = NetworkParams(q=q, gamma=gamma)
            duration, revenue = selfish_cycle_expectations(params)
            stats = self._selfish_statistics(q, gamma)
            result.add_verdict(compare(f"duration q={q} gamma={gamma}", duration,
                                       stats.fields['duration'], self.z))
            result.add_verdict(compare(f"revenue q={q} gamma={gamma}", revenue,
                                       stats.fields['selfish_revenue'], self.z))
        return result

    def check_pre_adjustment_dominance(self) -> CriterionResult:
        result = CriterionResult("C3", "no profit before adjustment")
        for q, gamma in self._grid():
            if gamma >= 1:
                continue
            params = NetworkParams(q=q, gamma=gamma)
            honest = honest_revenue_ratio(params)
            result.add_check(f"closed form below honest q={q} gamma={gamma}",
                             selfish_revenue_ratio(params) < honest)
            result.add_verdict(compare_upper(f"simulated ratio q={q} gamma={gamma}", honest,
                                             self._selfish_statistics(q, gamma).revenue_ratio, self.z))
        return result

    def check_stability_bound(self) -> CriterionResult:
        result = CriterionResult("C4", "stability bound")
        for q, gamma in self._grid():
            params = NetworkParams(q=q, gamma=gamma)
            result.add_verdict(compare_upper(f"ratio below alpha'b q={q} gamma={gamma}",
                                             stability_bound(params),
                                             self._selfish_statistics(q, gamma).revenue_ratio, self.z))
        return result

    def check_apparent_hashrate(self) -> CriterionResult:
        result = CriterionResult("C5", "apparent hashrate")
        for q, gamma in self._grid():
            params = NetworkParams(q=q, gamma=gamma)
            result.add_verdict(compare(f"official share q={q} gamma={gamma}", apparent_hashrate(params),
                                       self._selfish_statistics(q, gamma).apparent_hashrate, self.z))

        worst = 0.0
        for q in np.linspace(0.01, 0.49, 100):
            for gamma in np.linspace(0.0, 1.0, 10):
                params = NetworkParams(q=float(q), gamma=float(gamma))
                a, b = apparent_hashrate(params), apparent_hashrate_rearranged(params)
                worst = max(worst, abs(a - b) / max(abs(a), abs(b), 1e-300))
        result.add_check("algebraic forms agree", worst <= 1e-12)
        result.notes.append(f"largest relative difference between the two forms: {worst:.3e}")
        return result

    def check_difficulty_factor(self) -> CriterionResult:
        result = CriterionResult("C6", "first difficulty adjustment")
        targets = [expected_delta(NetworkParams(q=0.3, gamma=gamma)) for gamma in CYCLE_GRID_GAMMA]
        result.add_check("E[delta] independent of gamma",
                         max(targets) - min(targets) <= 1e-12 * targets[0])
        for offset, gamma in enumerate((0.0, 1.0)):
            params = NetworkParams(q=0.3, gamma=gamma)
            replications = run_replications(params, AdjustmentPolicy.LEGACY, 1, self.epoch_replications,
                                            self._seed(200 + offset), DEFAULT_N0, self.workers)
            summary = summarize_epochs(replications, params, AdjustmentPolicy.LEGACY, DEFAULT_N0)
            result.add_verdict(compare(f"epoch-1 elapsed/(n0 tau0) q=0.3 gamma={gamma}",
                                       expected_delta(params), summary.per_epoch[0].elapsed_ratio, self.z))
        return result

    def check_post_adjustment_ratio(self) -> CriterionResult:
        result = CriterionResult("C7", "revenue after adjustment")
        n_epochs = 6
        for offset, (q, gamma) in enumerate(((0.3, 1.0), (0.4, 0.5))):
            params = NetworkParams(q=q, gamma=gamma)
            replications = run_replications(params, AdjustmentPolicy.LEGACY, n_epochs,
                                            max(2, self.epoch_replications // 5),
                                            self._seed(300 + offset), DEFAULT_N0, self.workers)
            summary = summarize_epochs(replications, params, AdjustmentPolicy.LEGACY, DEFAULT_N0)
            result.add_verdict(compare(f"epochs 2+ revenue ratio q={q} gamma={gamma}",
                                       post_adjustment_revenue_ratio(params),
                                       summary.later_revenue_ratio, self.z))
            result.add_verdict(compare(f"epochs 2+ factor q={q} gamma={gamma}", 1.0,
                                       summary.later_factor, self.z))
        return result

    def check_breakeven(self) -> CriterionResult:
        result = CriterionResult("C8", "break-even time")
        n0, tau0 = DEFAULT_N0, 600.0
        unit = n0 * tau0

        low_q = breakeven_time(NetworkParams(q=0.1, gamma=0.9), n0) / unit
        result.add_check("E[T0](0.1, 0.9) close to 5 n0 tau0", abs(low_q - 5.0) <= 0.02 * 5.0)
        q_best, t_best = breakeven_minimizer(0.5, n0=n0, tau0=tau0)
        # The exact minimizer is q=0.4363; "43%" is its truncated percentage
        result.add_check("minimizer at q=43%", MINIMIZER_RANGE[0] <= q_best < MINIMIZER_RANGE[1])
        result.add_check("minimum close to 1.7 n0 tau0", abs(t_best / unit - 1.7) <= 0.02 * 1.7)
        limit = breakeven_time(NetworkParams(q=0.4999, gamma=0.5), n0) / unit
        result.add_check("limit near q=1/2 is 2 n0 tau0", abs(limit - 2.0) <= 0.005 * 2.0)
        result.notes.append(f"E[T0](0.1, 0.9) = {low_q:.4f} n0 tau0; minimum {t_best / unit:.4f} "
                            f"n0 tau0 at q={q_best:.5f}; E[T0](0.4999, 0.5) = {limit:.5f} n0 tau0")

        for offset, (q, gamma) in enumerate(BREAKEVEN_POINTS):
            self._empirical_breakeven(result, NetworkParams(q=q, gamma=gamma), n0, self._seed(400 + offset))

        never = empirical_breakeven(NetworkParams(q=0.2, gamma=0.0), 1, 1, self._seed(410), n0, self.workers)
        result.add_check("q'<q reported as never profitable", never.never_profitable and never.estimate is None)
        return result

    def _empirical_breakeven(self, result: CriterionResult, params: NetworkParams, n0: int, seed: int):
        unit = n0 * params.tau0
        label = f"({params.q}, {params.gamma})"
        target = breakeven_time(params, n0)
        horizon = default_horizon(params, n0)
        estimate = empirical_breakeven(params, self.breakeven_replications, horizon, seed, n0, self.workers)
        result.add_check(f"censoring at {label} below limit", not estimate.flagged)
        if estimate.estimate is None:
            result.add_check(f"empirical break-even estimated at {label}", False)
            return
        relative = abs(estimate.estimate.mean - target) / target
        tolerance = max(BREAKEVEN_TOLERANCE, self.z * estimate.estimate.std_error / target)
        result.add_check(f"empirical break-even within tolerance at {label}", relative <= tolerance)
        result.notes.append(f"empirical E[T0]{label} = {estimate.estimate.mean / unit:.4f} "
                            f"+/- {estimate.estimate.std_error / unit:.4f} n0 tau0 "
                            f"(CI {estimate.estimate.ci_low / unit:.4f} to {estimate.estimate.ci_high / unit:.4f}), "
                            f"analytic {target / unit:.4f}, censored {estimate.censored}/{estimate.n_replications} "
                            f"at {horizon} epochs")

    def check_thresholds(self) -> CriterionResult:
        result = CriterionResult("C9", "profitability thresholds")
        consistent = True
        for q in np.linspace(0.01, 0.49, 20):
            for gamma in np.linspace(0.0, 1.0, 10):
                signs = threshold_signs(NetworkParams(q=float(q), gamma=float(gamma)))
                consistent = consistent and signs[0] == signs[1] == signs[2]
        result.add_check("sign(q'-q) matches both thresholds on the grid", consistent)
        exact = apparent_hashrate(NetworkParams(q=Fraction(1, 3), gamma=Fraction(0)))
        result.add_check("q' = 1/3 exactly at q=1/3, gamma=0", exact == Fraction(1, 3))
        result.add_check("boundary signs are zero",
                         threshold_signs(NetworkParams(q=1 / 3, gamma=0.0)) == (0, 0, 0))
        return result

    def check_pool_conditions(self) -> CriterionResult:
        result = CriterionResult("C10", "pool formation")
        attract_ok, accept_ok = True, True
        for gamma in CYCLE_GRID_GAMMA:
            for q in np.linspace(0.05, 0.45, 41):
                params = NetworkParams(q=float(q), gamma=gamma)
                attract_ok = attract_ok and pool_attractiveness(params) == (apparent_hashrate(params) > params.q)
                accept_ok = accept_ok and pool_acceptance(params)
        result.add_check("joining condition equivalent to q' > q", attract_ok)
        result.add_check("q'/q increasing on [0.05, 0.45]", accept_ok)
        return result

    def check_orphan_aware_adjustment(self) -> CriterionResult:
        result = CriterionResult("C11", "orphan-aware adjustment")
        n_epochs = 20
        for offset, gamma in enumerate((0.0, 1.0)):
            params = NetworkParams(q=0.3, gamma=gamma)
            replications = run_replications(params, AdjustmentPolicy.ORPHAN_AWARE, n_epochs,
                                            self.orphan_replications, self._seed(500 + offset),
                                            DEFAULT_N0, self.workers)
            summary = summarize_epochs(replications, params, AdjustmentPolicy.ORPHAN_AWARE, DEFAULT_N0)
            result.add_verdict(compare(f"mean factor gamma={gamma}", 1.0, summary.pooled_factor, self.z))
            honest = honest_revenue_ratio(params)
            for epoch in summary.per_epoch:
                result.add_verdict(compare_upper(f"epoch {epoch.epoch_index} ratio gamma={gamma}", honest,
                                                 epoch.selfish_revenue_ratio, self.z))
        return result

    def check_poisson_race(self) -> CriterionResult:
        result = CriterionResult("C12", "Poisson race")
        fast, slow = 2.0, 1.0
        stats = estimate_race_statistics(fast, slow, 1, self.n_cycles, self._seed(600), self.workers)
        result.add_verdict(compare("hitting time", 1 / (fast - slow), stats.fields['duration'], self.z))
        result.add_verdict(compare("fast count", fast / (fast - slow), stats.fields['fast_count'], self.z))
        result.add_verdict(compare("slow count", slow / (fast - slow), stats.fields['slow_count'], self.z))
        return result

    def check_determinism(self) -> CriterionResult:
        result = CriterionResult("C13", "determinism and merging")
        params = NetworkParams(q=0.3, gamma=0.5)
        n = max(1000, self.n_cycles // 50)
        first = estimate_cycle_statistics(params, CycleKind.SELFISH_MINING, n, self._seed(700), workers=1)
        second = estimate_cycle_statistics(params, CycleKind.SELFISH_MINING, n, self._seed(700), workers=1)
        pooled = estimate_cycle_statistics(params, CycleKind.SELFISH_MINING, n, self._seed(700), workers=4)
        result.add_check("same seed gives identical statistics", _dump(first) == _dump(second))
        result.add_check("worker count does not change statistics", _dump(first) == _dump(pooled))

        stream = RandomStream(self._seed(701))
        values = [stream.exponential(1.0) for _ in range(10_000)]
        serial = RunningStats()
        serial.extend(values)
        merged = RunningStats()
        start = 0
        for count in split_counts(len(values), 7):
            merged.merge(RunningStats().push_array(values[start:start + count]))
            start += count
        result.add_check("partitioned mean matches serial",
                         math.isclose(serial.mean, merged.mean, rel_tol=1e-12))
        result.add_check("partitioned variance matches serial",
                         math.isclose(serial.variance, merged.variance, rel_tol=1e-10))
        return result


def _dump(statistics: CycleStatistics) -> str:
    return json.dumps(statistics.to_dict(), sort_keys=True)


def run_suite(fast: bool = False, seed: int = 1, workers: Optional[int] = None,
              z: float = DEFAULT_Z) -> SuiteReport:
    """Run every acceptance criterion and return the report."""
    return create_acceptance_suite(fast, seed, workers, z).run()


def create_acceptance_suite(fast: bool = False, seed: int = 1, workers: Optional[int] = None,
                            z: float = DEFAULT_Z) -> AcceptanceSuite:
    """Create acceptance suite instance"""
    return AcceptanceSuite(fast=fast, seed=seed, workers=workers, z=z)
