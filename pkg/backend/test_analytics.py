import math
from fractions import Fraction

import pytest

from model import NetworkParams
from analytics import (
    honest_revenue_ratio, stability_bound, selfish_cycle_expectations, selfish_revenue_ratio,
    expected_official_per_cycle, expected_cycles_per_epoch, apparent_hashrate, apparent_hashrate_rearranged,
    apparent_hashrate_ratio, relative_revenue, expected_delta, post_adjustment_revenue_ratio,
    honest_network_revenue_ratio, cost_ratio, pnl_rate, compare_strategies, profitability_thresholds,
    threshold_signs, breakeven_time, breakeven_minimizer, pool_attractiveness, pool_acceptance,
    pool_attractiveness_finite, pool_acceptance_finite, build_report, figure_sweep, sweep_grid,
)

UNIT = 2016 * 600.0


def test_cycle_expectations_at_q_03():
    params = NetworkParams(q=0.3, gamma=0.0)
    duration, revenue = selfish_cycle_expectations(params)
    assert duration / params.tau0 == pytest.approx(1.735)
    assert revenue == pytest.approx(0.3735)
    assert selfish_revenue_ratio(params) * params.tau0 == pytest.approx(0.215274, abs=1e-6)
    assert selfish_revenue_ratio(params) < honest_revenue_ratio(params)


def test_gamma_one_matches_honest_before_adjustment():
    params = NetworkParams(q=0.3, gamma=1.0)
    assert selfish_revenue_ratio(params) == pytest.approx(honest_revenue_ratio(params))


def test_stability_bound_dominates():
    for q in (0.1, 0.25, 0.45):
        for gamma in (0.0, 0.5, 1.0):
            params = NetworkParams(q=q, gamma=gamma)
            assert selfish_revenue_ratio(params) <= stability_bound(params) + 1e-15


def test_expected_delta():
    assert expected_delta(NetworkParams(q=0.3, gamma=0.0)) == pytest.approx(1.26874, abs=1e-5)
    assert expected_delta(NetworkParams(q=0.0, gamma=0.5)) == 1.0
    values = [expected_delta(NetworkParams(q=0.3, gamma=g)) for g in (0.0, 0.5, 1.0)]
    assert max(values) - min(values) == 0.0


def test_apparent_hashrate_values():
    assert apparent_hashrate(NetworkParams(q=0.1, gamma=0.0)) == pytest.approx(0.03564, abs=1e-5)
    params = NetworkParams(q=0.43, gamma=0.5)
    assert apparent_hashrate(params) == pytest.approx(0.60981, abs=1e-4)
    assert expected_delta(params) == pytest.approx(1.49947, abs=1e-4)


def test_apparent_hashrate_forms_agree():
    for q in (0.01, 0.1, 0.2, 1 / 3, 0.4, 0.49):
        for gamma in (0.0, 0.3, 0.7, 1.0):
            params = NetworkParams(q=q, gamma=gamma)
            assert apparent_hashrate_rearranged(params) == pytest.approx(apparent_hashrate(params), rel=1e-12)
            assert relative_revenue(params) == pytest.approx(apparent_hashrate(params), rel=1e-12)


def test_apparent_hashrate_exact_on_boundary():
    params = NetworkParams(q=Fraction(1, 3), gamma=Fraction(0))
    assert apparent_hashrate(params) == Fraction(1, 3)


def test_ratio_limit_at_zero_is_gamma():
    assert apparent_hashrate_ratio(0.0, 0.7) == pytest.approx(0.7)
    assert apparent_hashrate(NetworkParams(q=0.0, gamma=0.7)) == 0.0


def test_official_blocks_per_cycle():
    params = NetworkParams(q=0.3, gamma=0.0)
    assert expected_official_per_cycle(params) == pytest.approx(1 + 0.49 * 0.3 / 0.4)
    assert expected_cycles_per_epoch(params, 2016) == pytest.approx(2016 / 1.3675)


def test_post_adjustment_and_honest_network():
    params = NetworkParams(q=0.3, gamma=1.0)
    assert post_adjustment_revenue_ratio(params) == pytest.approx(apparent_hashrate(params) / params.tau0)
    duration, revenue = selfish_cycle_expectations(params)
    total = honest_network_revenue_ratio(params) + selfish_revenue_ratio(params)
    assert total == pytest.approx(expected_official_per_cycle(params) / duration)
    assert honest_network_revenue_ratio(params, adjusted=True) == \
        pytest.approx((1 - apparent_hashrate(params)) / params.tau0)


def test_costs_and_strategy_comparison():
    params = NetworkParams(q=0.2, gamma=0.5, cost_rate=1e-4)
    assert cost_ratio(params) == 1e-4
    assert pnl_rate(0.5, params) == pytest.approx(0.5 - 1e-4)
    assert compare_strategies(honest_revenue_ratio(params), selfish_revenue_ratio(params)) == 1
    assert compare_strategies(0.1, 0.1) == 0


def test_profitability_thresholds():
    gamma_min, q_min = profitability_thresholds(NetworkParams(q=0.2, gamma=0.0))
    assert gamma_min == pytest.approx(2 / 3)
    assert q_min == pytest.approx(1 / 3)
    gamma_min, q_min = profitability_thresholds(NetworkParams(q=0.4, gamma=1.0))
    assert gamma_min == 0.0
    assert q_min == 0.0


def test_threshold_signs_agree():
    assert threshold_signs(NetworkParams(q=1 / 3, gamma=0.0)) == (0, 0, 0)
    assert threshold_signs(NetworkParams(q=0.1, gamma=0.9)) == (1, 1, 1)
    assert threshold_signs(NetworkParams(q=0.2, gamma=0.0)) == (-1, -1, -1)


def test_breakeven_time():
    assert breakeven_time(NetworkParams(q=0.1, gamma=0.9)) / UNIT == pytest.approx(5.09, abs=0.01)
    assert breakeven_time(NetworkParams(q=0.43, gamma=0.5)) / UNIT == pytest.approx(1.6939, abs=1e-3)
    assert breakeven_time(NetworkParams(q=0.4999, gamma=0.5)) / UNIT == pytest.approx(2.0, rel=5e-3)
    assert math.isinf(breakeven_time(NetworkParams(q=0.2, gamma=0.0)))


def test_breakeven_minimizer():
    q_best, t_best = breakeven_minimizer(0.5)
    # 43% truncated; the exact minimizer sits a little above
    assert 0.43 <= q_best < 0.44
    assert q_best == pytest.approx(0.4363, abs=1e-3)
    assert t_best / UNIT == pytest.approx(1.7, rel=0.02)
    with pytest.raises(ValueError):
        breakeven_minimizer(0.5, q_low=0.4, q_high=0.3)


def test_pool_conditions():
    assert pool_attractiveness(NetworkParams(q=0.0, gamma=0.5)) is None
    for q in (0.1, 0.2, 0.4):
        for gamma in (0.0, 0.5, 1.0):
            params = NetworkParams(q=q, gamma=gamma)
            assert pool_attractiveness(params) == (apparent_hashrate(params) > q)
            assert pool_acceptance(params)
    with pytest.raises(ValueError):
        pool_acceptance(NetworkParams(q=0.00001, gamma=0.5))


def test_finite_pool_conditions_approach_limit():
    params = NetworkParams(q=0.3, gamma=0.5)
    assert pool_attractiveness_finite(params, 1e-6) == pool_attractiveness(params)
    assert pool_acceptance_finite(params, 1e-6) == pool_acceptance(params)
    with pytest.raises(ValueError):
        pool_attractiveness_finite(params, 0.3)


def test_report_fields():
    report = build_report(NetworkParams(q=0.0, gamma=0.5))
    assert report.gamma_sm_pre == 0.0
    assert report.expected_delta == 1.0
    assert report.never_profitable
    assert report.pool_attractive is None
    assert report.pool_accepting is None
    data = report.to_dict()
    assert data['never_profitable'] is True
    assert math.isinf(data['breakeven_weeks'])


def test_report_weeks():
    report = build_report(NetworkParams(q=0.1, gamma=0.9))
    assert report.breakeven_weeks == pytest.approx(10.18, abs=0.05)
    assert not report.never_profitable


def test_sweep_order_and_endpoints():
    rows = figure_sweep((0.0, 0.49), [1.0, 0.0], 5)
    assert len(rows) == 10
    assert [row.gamma for row in rows] == [0.0] * 5 + [1.0] * 5
    assert [row.q for row in rows[:5]] == sorted(row.q for row in rows[:5])
    assert rows[0].expected_delta == 1.0
    assert 1.8 < rows[4].expected_delta < 2.0
    for low, high in zip(rows[:5], rows[5:]):
        assert high.apparent_hashrate_ratio >= low.apparent_hashrate_ratio


def test_sweep_rejects_bad_grid():
    with pytest.raises(ValueError):
        figure_sweep((0.0, 0.4), [], 5)
    with pytest.raises(ValueError):
        sweep_grid((0.3, 0.2), 5)
    with pytest.raises(ValueError):
        sweep_grid((0.0, 0.5), 5)
    assert list(sweep_grid((0.1, 0.1), 1)) == [0.1]
