import pytest

from model import NetworkParams, RandomStream
from analytics import expected_delta, post_adjustment_revenue_ratio, honest_revenue_ratio, breakeven_time
from epoch_sim import (
    AdjustmentPolicy, EpochSimulator, run_epochs, run_replications, summarize_epochs, orphan_rate,
    implied_orphans, empirical_breakeven, default_horizon, MIN_HORIZON_EPOCHS, MAX_HORIZON_EPOCHS,
)
from stats import compare, compare_upper

Z = 4.0


def test_epoch_bookkeeping_legacy():
    params = NetworkParams(q=0.3, gamma=0.5)
    epochs = run_epochs(params, AdjustmentPolicy.LEGACY, 4, seed=3, n0=300)
    multiplier = 1.0
    start = 0.0
    for index, epoch in enumerate(epochs, 1):
        assert epoch.epoch_index == index
        assert epoch.official_blocks == 300
        assert epoch.start_time == pytest.approx(start)
        assert epoch.rate_multiplier == pytest.approx(multiplier)
        assert epoch.block_interval == pytest.approx(params.tau0 / multiplier)
        assert epoch.delta_applied == pytest.approx(epoch.elapsed_time / (300 * params.tau0))
        assert epoch.orphan_blocks == epoch.selfish_orphans + epoch.honest_orphans
        assert epoch.counterfactual_honest_revenue == pytest.approx(
            honest_revenue_ratio(params) * epoch.end_time)
        multiplier *= epoch.delta_applied
        start = epoch.end_time
    assert epochs[-1].cumulative_selfish_revenue == pytest.approx(sum(e.selfish_revenue for e in epochs))


def test_orphan_aware_factor_counts_orphans():
    params = NetworkParams(q=0.3, gamma=0.0)
    epochs = run_epochs(params, AdjustmentPolicy.ORPHAN_AWARE, 3, seed=4, n0=300)
    for epoch in epochs:
        assert epoch.orphan_blocks > 0
        assert epoch.delta_applied == pytest.approx(
            epoch.elapsed_time / ((300 + epoch.orphan_blocks) * params.tau0))


def test_overshoot_is_carried():
    params = NetworkParams(q=0.4, gamma=0.5)
    simulator = EpochSimulator(params, AdjustmentPolicy.LEGACY, RandomStream(6), n0=50)
    official = 0
    closed = []
    while len(closed) < 5:
        outcome, epoch = simulator.step()
        official += outcome.official_blocks
        if epoch is not None:
            closed.append(epoch)
    assert official == 5 * 50 + simulator.carry
    assert 0 <= simulator.carry


def test_no_attacker_keeps_difficulty():
    params = NetworkParams(q=0.0, gamma=0.5)
    replications = run_replications(params, AdjustmentPolicy.LEGACY, 3, 20, seed=5, n0=200)
    summary = summarize_epochs(replications, params, AdjustmentPolicy.LEGACY, n0=200)
    assert compare("factor", 1.0, summary.pooled_factor, Z).passed
    assert summary.orphan_rate == 0.0
    for epochs in replications:
        assert all(epoch.orphan_blocks == 0 for epoch in epochs)


def test_first_legacy_adjustment_matches_expected_delta():
    params = NetworkParams(q=0.3, gamma=0.0)
    replications = run_replications(params, AdjustmentPolicy.LEGACY, 1, 200, seed=13)
    summary = summarize_epochs(replications, params, AdjustmentPolicy.LEGACY)
    first = summary.per_epoch[0]
    assert compare("E[delta]", expected_delta(params), first.elapsed_ratio, Z).passed
    # Legacy factor is linear in elapsed time, so both readings coincide
    assert first.factor.mean == pytest.approx(first.ratio_of_means)


def test_legacy_later_epochs_return_to_target():
    params = NetworkParams(q=0.3, gamma=1.0)
    replications = run_replications(params, AdjustmentPolicy.LEGACY, 6, 20, seed=21, n0=500)
    summary = summarize_epochs(replications, params, AdjustmentPolicy.LEGACY, n0=500)
    assert compare("later factor", 1.0, summary.later_factor, Z).passed
    assert compare("later ratio", post_adjustment_revenue_ratio(params), summary.later_revenue_ratio, Z).passed


def test_orphan_aware_keeps_attack_unprofitable():
    params = NetworkParams(q=0.3, gamma=0.0)
    replications = run_replications(params, AdjustmentPolicy.ORPHAN_AWARE, 10, 20, seed=8, n0=200)
    summary = summarize_epochs(replications, params, AdjustmentPolicy.ORPHAN_AWARE, n0=200)
    assert compare("factor", 1.0, summary.pooled_factor, Z).passed
    for epoch in summary.per_epoch:
        assert compare_upper("ratio", honest_revenue_ratio(params), epoch.selfish_revenue_ratio, Z).passed
    # Total block production stays at one block per tau0
    assert summary.production_rate * params.tau0 == pytest.approx(1.0, abs=0.03)


def test_orphan_rate_identity():
    params = NetworkParams(q=0.3, gamma=0.0)
    replications = run_replications(params, AdjustmentPolicy.LEGACY, 1, 100, seed=12, n0=500)
    first_epochs = [epochs[0] for epochs in replications]
    omega = orphan_rate(first_epochs)
    assert omega == pytest.approx(1 - 1 / expected_delta(params), abs=0.015)
    mean_orphans = sum(e.orphan_blocks for e in first_epochs) / len(first_epochs)
    assert implied_orphans(omega, 500) == pytest.approx(mean_orphans, rel=0.05)


def test_implied_orphans_and_errors():
    assert implied_orphans(0.0) == 0.0
    assert implied_orphans(0.5, 100) == pytest.approx(100.0)
    with pytest.raises(ValueError):
        implied_orphans(1.0)
    with pytest.raises(ValueError):
        orphan_rate([])
    with pytest.raises(ValueError):
        run_epochs(NetworkParams(q=0.3, gamma=0.0), AdjustmentPolicy.LEGACY, 0, seed=1)
    with pytest.raises(ValueError):
        summarize_epochs([[]], NetworkParams(q=0.3, gamma=0.0), AdjustmentPolicy.LEGACY)


def test_never_profitable_skips_simulation():
    estimate = empirical_breakeven(NetworkParams(q=0.2, gamma=0.0), 50, 5, seed=1)
    assert estimate.never_profitable
    assert estimate.estimate is None
    assert estimate.to_dict()['never_profitable'] is True


def test_zero_drift_boundary_is_censored():
    params = NetworkParams(q=1 / 3, gamma=0.0)
    estimate = empirical_breakeven(params, 20, 2, seed=2, n0=200, require_profitable=False)
    assert not estimate.never_profitable
    assert estimate.censored > 0
    assert estimate.flagged


def test_empirical_breakeven_near_analytic():
    params = NetworkParams(q=0.43, gamma=0.5)
    n0 = 500
    estimate = empirical_breakeven(params, 40, 8, seed=5, n0=n0)
    assert estimate.censored == 0
    assert not estimate.flagged
    target = breakeven_time(params, n0)
    assert estimate.estimate.mean == pytest.approx(target, rel=0.2)
    assert all(t >= 0 for t in estimate.samples)


def test_default_horizon_follows_expected_breakeven():
    assert default_horizon(NetworkParams(q=0.1, gamma=0.9)) == 128
    assert default_horizon(NetworkParams(q=0.43, gamma=0.5)) == 43
    # Horizon is in epochs, so it does not depend on the epoch length
    assert default_horizon(NetworkParams(q=0.1, gamma=0.9), n0=200) == 128
    assert default_horizon(NetworkParams(q=0.2, gamma=0.0)) == MIN_HORIZON_EPOCHS
    assert default_horizon(NetworkParams(q=0.335, gamma=0.0)) == MAX_HORIZON_EPOCHS


def test_empirical_breakeven_small_attacker():
    params = NetworkParams(q=0.1, gamma=0.9)
    horizon = default_horizon(params)
    estimate = empirical_breakeven(params, 30, horizon, seed=11)
    assert estimate.censored <= 1
    target = breakeven_time(params)
    assert compare("break-even (0.1, 0.9)", target, estimate.estimate, Z).passed
