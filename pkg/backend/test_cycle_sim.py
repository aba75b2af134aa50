import json

import pytest

from model import NetworkParams, RandomStream
from analytics import selfish_cycle_expectations, selfish_revenue_ratio, apparent_hashrate
from cycle_sim import (
    CycleKind, SELFISH_CASES, run_selfish_cycle, run_honest_cycle, run_poisson_race,
    estimate_cycle_statistics, estimate_race_statistics, with_rates_scaled,
)
from stats import compare

# Wider than the reporting band so fixed-seed checks stay clear of the edge
Z = 4.0


def test_selfish_cycle_bookkeeping():
    params = NetworkParams(q=0.35, gamma=0.5)
    stream = RandomStream(11)
    seen = set()
    for _ in range(5000):
        outcome = run_selfish_cycle(params, stream)
        seen.add(outcome.case)
        assert outcome.case in SELFISH_CASES
        assert outcome.duration > 0
        assert outcome.selfish_revenue == outcome.selfish_official * params.b
        assert outcome.official_blocks >= 1
        if outcome.case == "honest_first":
            assert (outcome.honest_official, outcome.all_blocks) == (1, 1)
        elif outcome.case == "selfish_lead":
            assert outcome.honest_official == 0
            assert outcome.honest_orphans == outcome.selfish_official - 1
            assert 0 < outcome.race_duration < outcome.duration
        else:
            assert outcome.official_blocks == 2
            assert outcome.orphan_blocks == 1
    assert seen == set(SELFISH_CASES)


def test_no_attacker_means_honest_first():
    params = NetworkParams(q=0.0, gamma=0.5)
    stream = RandomStream(2)
    cases = {run_selfish_cycle(params, stream).case for _ in range(500)}
    assert cases == {"honest_first"}


def test_full_connectivity_never_orphans_attacker():
    params = NetworkParams(q=0.3, gamma=1.0)
    stream = RandomStream(4)
    assert all(run_selfish_cycle(params, stream).selfish_orphans == 0 for _ in range(3000))


def test_honest_cycle_single_block():
    params = NetworkParams(q=0.3, gamma=0.0)
    outcome = run_honest_cycle(params, RandomStream(1))
    assert outcome.official_blocks == 1
    assert outcome.orphan_blocks == 0
    assert outcome.case == "honest"


@pytest.mark.parametrize("q, gamma", [(0.3, 0.0), (0.2, 1.0), (0.4, 0.5)])
def test_cycle_estimates_match_closed_forms(q, gamma):
    params = NetworkParams(q=q, gamma=gamma)
    statistics = estimate_cycle_statistics(params, CycleKind.SELFISH_MINING, 40000, seed=17)
    duration, revenue = selfish_cycle_expectations(params)
    assert compare("duration", duration, statistics.fields['duration'], Z).passed
    assert compare("revenue", revenue, statistics.fields['selfish_revenue'], Z).passed
    assert compare("ratio", selfish_revenue_ratio(params), statistics.revenue_ratio, Z).passed
    assert compare("share", apparent_hashrate(params), statistics.apparent_hashrate, Z).passed
    assert compare("ratio (batches)", selfish_revenue_ratio(params), statistics.revenue_ratio_batch, Z).passed


def test_case_frequencies_and_continuation():
    params = NetworkParams(q=0.3, gamma=0.5)
    statistics = estimate_cycle_statistics(params, CycleKind.SELFISH_MINING, 40000, seed=23)
    assert compare("honest first", params.p, statistics.case_frequencies['honest_first'], Z).passed
    assert compare("tie", params.p * params.q, statistics.case_frequencies['tie'], Z).passed
    assert compare("lead", params.q ** 2, statistics.case_frequencies['selfish_lead'], Z).passed
    assert compare("continuation", params.tau0 / (params.p - params.q), statistics.race_duration, Z).passed


def test_honest_cycle_estimates():
    params = NetworkParams(q=0.1, gamma=0.0)
    statistics = estimate_cycle_statistics(params, CycleKind.HONEST, 40000, seed=5)
    assert compare("duration", params.tau0, statistics.fields['duration'], Z).passed
    assert compare("win rate", params.q, statistics.fields['selfish_official'], Z).passed
    assert statistics.case_frequencies['honest'].mean == 1.0


def test_poisson_race_estimates():
    statistics = estimate_race_statistics(2.0, 1.0, 1, 40000, seed=8)
    assert compare("hitting time", 1.0, statistics.fields['duration'], Z).passed
    assert compare("fast count", 2.0, statistics.fields['fast_count'], Z).passed
    assert compare("slow count", 1.0, statistics.fields['slow_count'], Z).passed
    assert statistics.revenue_ratio is None

    longer = estimate_race_statistics(2.0, 1.0, 2, 20000, seed=9)
    assert compare("hitting time lead 2", 2.0, longer.fields['duration'], Z).passed


def test_poisson_race_degenerate_slow_rate():
    race = run_poisson_race(3.0, 0.0, 2, RandomStream(1))
    assert (race.fast_count, race.slow_count) == (2, 0)


def test_interval_shrinks_with_sample_size():
    params = NetworkParams(q=0.3, gamma=0.5)
    small = estimate_cycle_statistics(params, CycleKind.SELFISH_MINING, 16000, seed=31)
    large = estimate_cycle_statistics(params, CycleKind.SELFISH_MINING, 32000, seed=32)
    ratio = large.revenue_ratio.ci_width / small.revenue_ratio.ci_width
    assert 0.566 <= ratio <= 0.849


def test_same_seed_same_statistics():
    params = NetworkParams(q=0.25, gamma=0.5)
    first = estimate_cycle_statistics(params, CycleKind.SELFISH_MINING, 3000, seed=99)
    second = estimate_cycle_statistics(params, CycleKind.SELFISH_MINING, 3000, seed=99)
    other = estimate_cycle_statistics(params, CycleKind.SELFISH_MINING, 3000, seed=100)
    dump = json.dumps(first.to_dict(), sort_keys=True)
    assert dump == json.dumps(second.to_dict(), sort_keys=True)
    assert dump != json.dumps(other.to_dict(), sort_keys=True)


def test_worker_count_does_not_change_statistics():
    params = NetworkParams(q=0.25, gamma=0.5)
    serial = estimate_cycle_statistics(params, CycleKind.SELFISH_MINING, 3000, seed=99, workers=1)
    pooled = estimate_cycle_statistics(params, CycleKind.SELFISH_MINING, 3000, seed=99, workers=2)
    assert json.dumps(serial.to_dict(), sort_keys=True) == json.dumps(pooled.to_dict(), sort_keys=True)


def test_contract_violations():
    with pytest.raises(ValueError):
        estimate_cycle_statistics(NetworkParams(q=0.3, gamma=0.0), CycleKind.SELFISH_MINING, 1, seed=1)
    with pytest.raises(ValueError, match="attacker"):
        estimate_cycle_statistics(NetworkParams(q=0.0, gamma=0.0), CycleKind.SELFISH_MINING, 100, seed=1)
    with pytest.raises(ValueError):
        run_poisson_race(1.0, 1.0, 1, RandomStream(1))
    with pytest.raises(ValueError):
        run_poisson_race(2.0, 1.0, 0, RandomStream(1))
    with pytest.raises(ValueError):
        estimate_race_statistics(1.0, 2.0, 1, 100, seed=1)


def test_rate_scaling_keeps_shares():
    params = NetworkParams(q=0.3, gamma=0.5)
    faster = with_rates_scaled(params, 2.0)
    assert faster.tau0 == 300.0
    assert (faster.q, faster.gamma) == (params.q, params.gamma)
    assert faster.alpha == pytest.approx(2 * params.alpha)
    with pytest.raises(ValueError):
        with_rates_scaled(params, 0.0)
