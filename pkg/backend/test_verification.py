import pytest

from model import NetworkParams
from stats import EstimateWithCI, compare
from verification import CriterionResult, SuiteReport, create_acceptance_suite, FULL_CYCLES


def test_criterion_result_tracks_failures():
    result = CriterionResult("C0", "example")
    result.add_verdict(compare("good", 1.0, EstimateWithCI(1.0, 0.1, 10)))
    result.add_check("fact", True)
    assert result.passed
    result.add_verdict(compare("bad", 5.0, EstimateWithCI(1.0, 0.1, 10)))
    assert not result.passed
    data = result.to_dict()
    assert data['pass'] is False
    assert data['checks'] == {'fact': True}


def test_suite_report_summary():
    good = CriterionResult("C1", "good")
    bad = CriterionResult("C2", "bad")
    bad.add_check("broken", False)
    report = SuiteReport(fast=True, seed=1, criteria=[good, bad])
    assert not report.passed
    lines = report.summary_lines()
    assert lines[0].startswith("[PASS] C1")
    assert "broken" in lines[1]
    assert lines[-1] == "1/2 criteria passed"


def test_fast_mode_divides_sample_sizes():
    fast = create_acceptance_suite(fast=True)
    full = create_acceptance_suite(fast=False)
    assert full.n_cycles == FULL_CYCLES
    assert fast.n_cycles == FULL_CYCLES // 10
    assert fast.epoch_replications * 10 == full.epoch_replications


def test_run_collects_every_criterion(monkeypatch):
    suite = create_acceptance_suite(fast=True)
    names = [name for name in dir(suite) if name.startswith('check_')]
    for name in names:
        monkeypatch.setattr(suite, name, lambda name=name: CriterionResult(name, name))
    report = suite.run()
    assert len(report.criteria) == 13
    assert report.passed
    assert report.to_dict()['pass'] is True


@pytest.mark.parametrize("check", ["check_thresholds", "check_pool_conditions"])
def test_closed_form_criteria_pass(check):
    suite = create_acceptance_suite(fast=True)
    result = getattr(suite, check)()
    assert result.passed, result.to_dict()


def test_determinism_criterion_passes():
    result = create_acceptance_suite(fast=True, seed=3).check_determinism()
    assert result.passed, result.to_dict()


def test_mutated_formula_is_caught(monkeypatch):
    import verification
    monkeypatch.setattr(verification, "apparent_hashrate",
                        lambda params: params.q * (1 + params.gamma) / 2)
    result = create_acceptance_suite(fast=True).check_thresholds()
    assert not result.passed


def test_breakeven_criterion_covers_both_points(monkeypatch):
    import verification
    from analytics import apparent_hashrate, breakeven_time
    from epoch_sim import BreakevenEstimate, default_horizon

    calls = []

    def fake_breakeven(params, n_replications, horizon_epochs, seed, n0, workers):
        calls.append(((params.q, params.gamma), horizon_epochs))
        if apparent_hashrate(params) <= params.q:
            return BreakevenEstimate(never_profitable=True, horizon_epochs=horizon_epochs)
        target = breakeven_time(params, n0)
        return BreakevenEstimate(never_profitable=False, estimate=EstimateWithCI(target * 1.01, target * 0.02, 100),
                                 n_replications=n_replications, censored=0, horizon_epochs=horizon_epochs)

    monkeypatch.setattr(verification, "empirical_breakeven", fake_breakeven)
    result = create_acceptance_suite(fast=True).check_breakeven()
    assert result.passed, result.to_dict()
    simulated = dict(calls)
    assert simulated[(0.1, 0.9)] == default_horizon(NetworkParams(q=0.1, gamma=0.9)) >= 60
    assert (0.43, 0.5) in simulated
    assert any("(0.1, 0.9)" in note and "censored 0/" in note for note in result.notes)


def test_breakeven_criterion_flags_censoring(monkeypatch):
    import verification
    from epoch_sim import BreakevenEstimate

    def censored_breakeven(params, n_replications, horizon_epochs, seed, n0, workers):
        return BreakevenEstimate(never_profitable=False, estimate=EstimateWithCI(1.0, 0.1, 10),
                                 n_replications=10, censored=5, horizon_epochs=horizon_epochs)

    monkeypatch.setattr(verification, "empirical_breakeven", censored_breakeven)
    result = create_acceptance_suite(fast=True).check_breakeven()
    assert not result.passed
    assert result.checks["censoring at (0.1, 0.9) below limit"] is False
