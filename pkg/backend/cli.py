"""
Command-line surface of the selfish-mining lab.

Subcommands: analytics, sweep, simulate cycles, simulate epochs, breakeven
and verify. Reports go to stdout or --output; log lines go to stderr.
Exit codes: 0 success, 1 a verdict failed, 2 invalid usage or configuration.
"""

import sys
import logging
import argparse
from typing import Optional, List, Dict, Any

from pydantic import BaseModel, ValidationError, field_validator, model_validator

from model import NetworkParams, DEFAULT_N0, DEFAULT_TAU0, DEFAULT_REWARD, SMLAB_LOG_LEVEL, get_runtime_status
from analytics import (
    build_report, figure_sweep, selfish_cycle_expectations, selfish_revenue_ratio,
    apparent_hashrate, expected_delta, post_adjustment_revenue_ratio, honest_revenue_ratio,
    breakeven_time, SECONDS_PER_WEEK,
)
from cycle_sim import CycleKind, estimate_cycle_statistics
from epoch_sim import AdjustmentPolicy, run_replications, summarize_epochs, empirical_breakeven, default_horizon
from stats import ComparisonVerdict, compare, compare_upper, summarize_verdicts, z_for_confidence, DEFAULT_Z
from report_exporter import create_report_exporter
from verification import run_suite
from utils import build_identifier

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

SUBCOMMANDS = ('analytics', 'sweep', 'simulate', 'breakeven', 'verify')
FORMATS = {
    'analytics': ('txt', 'json', 'csv'),
    'sweep': ('csv', 'json'),
    'simulate': ('json',),
    'breakeven': ('json',),
    'verify': ('json',),
}


CONFIDENCE_HELP = "two-sided confidence level of the verdict band (default: 3 standard errors)"


class CliError(Exception):
    """Error carrying the process exit code and a message for stderr."""

    def __init__(self, exit_code: int, detail: str):
        super().__init__(detail)
        self.exit_code = exit_code
        self.detail = detail


class RunConfig(BaseModel):
    subcommand: str
    mode: Optional[str] = None
    q: Optional[float] = None
    gamma: Optional[float] = None
    tau0: float = DEFAULT_TAU0
    b: float = DEFAULT_REWARD
    cost_rate: float = 0.0
    n0: int = DEFAULT_N0
    kind: str = "selfish"
    n_cycles: Optional[int] = None
    n_epochs: Optional[int] = None
    n_replications: Optional[int] = None
    horizon_epochs: Optional[int] = None
    confidence: Optional[float] = None
    policy: str = "legacy"
    q_min: float = 0.0
    q_max: float = 0.49
    resolution: int = 50
    gammas: List[float] = [0.0, 0.5, 1.0]
    seed: Optional[int] = None
    fast: bool = False
    output_format: Optional[str] = None
    output: Optional[str] = None
    workers: Optional[int] = None

    @field_validator('subcommand')
    @classmethod
    def _known_subcommand(cls, value):
        if value not in SUBCOMMANDS:
            raise ValueError(f"unknown subcommand {value!r}")
        return value

    @field_validator('q')
    @classmethod
    def _q_bound(cls, value):
        if value is not None and not 0 <= value < 0.5:
            raise ValueError(f"q must satisfy 0 <= q < 1/2, got {value}")
        return value

    @field_validator('gamma')
    @classmethod
    def _gamma_bound(cls, value):
        if value is not None and not 0 <= value <= 1:
            raise ValueError(f"gamma must satisfy 0 <= gamma <= 1, got {value}")
        return value

    @field_validator('gammas')
    @classmethod
    def _gammas_bound(cls, value):
        if not value:
            raise ValueError("gamma list must not be empty")
        for gamma in value:
            if not 0 <= gamma <= 1:
                raise ValueError(f"gamma must satisfy 0 <= gamma <= 1, got {gamma}")
        return value

    @field_validator('tau0', 'b')
    @classmethod
    def _positive(cls, value):
        if not value > 0:
            raise ValueError(f"must be positive, got {value}")
        return value

    @field_validator('n0', 'horizon_epochs', 'resolution')
    @classmethod
    def _at_least_one(cls, value):
        if value < 1:
            raise ValueError(f"must be at least 1, got {value}")
        return value

    @field_validator('seed')
    @classmethod
    def _seed_range(cls, value):
        if value is not None and not 0 <= value < 2**64:
            raise ValueError(f"seed must satisfy 0 <= seed < 2**64, got {value}")
        return value

    @field_validator('confidence')
    @classmethod
    def _confidence_range(cls, value):
        if value is not None and not 0 < value < 1:
            raise ValueError(f"confidence must satisfy 0 < confidence < 1, got {value}")
        return value

    @field_validator('policy')
    @classmethod
    def _known_policy(cls, value):
        if value not in [policy.value for policy in AdjustmentPolicy]:
            raise ValueError(f"policy must be 'legacy' or 'orphan-aware', got {value!r}")
        return value

    @model_validator(mode='after')
    def _check_subcommand(self):
        if self.subcommand in ('analytics', 'simulate', 'breakeven'):
            if self.q is None or self.gamma is None:
                raise ValueError(f"{self.subcommand} needs --q and --gamma")
        if self.subcommand in ('simulate', 'breakeven') and self.seed is None:
            raise ValueError(f"{self.subcommand} needs --seed")
        if self.subcommand == 'simulate':
            if self.mode == 'cycles' and self.n_cycles is None:
                raise ValueError("simulate cycles needs --n")
            if self.mode == 'epochs' and (self.n_epochs is None or self.n_replications is None):
                raise ValueError("simulate epochs needs --epochs and --replications")
        if self.subcommand == 'sweep' and not 0 <= self.q_min <= self.q_max < 0.5:
            raise ValueError(f"q range must lie in [0, 1/2), got ({self.q_min}, {self.q_max})")
        if self.subcommand == 'breakeven' and self.horizon_epochs is None:
            self.horizon_epochs = default_horizon(self.params(), self.n0)
        if self.output_format is None:
            self.output_format = FORMATS[self.subcommand][0]
        elif self.output_format not in FORMATS[self.subcommand]:
            raise ValueError(f"{self.subcommand} supports formats {list(FORMATS[self.subcommand])}, "
                             f"got {self.output_format!r}")
        return self

    @property
    def z(self) -> float:
        """Band multiplier for verdicts: from --confidence, else DEFAULT_Z."""
        return z_for_confidence(self.confidence) if self.confidence is not None else DEFAULT_Z

    def params(self) -> NetworkParams:
        return NetworkParams(q=self.q, gamma=self.gamma, tau0=self.tau0, b=self.b, cost_rate=self.cost_rate)

    def echo(self) -> Dict[str, Any]:
        """Every setting that affects the numbers in a report."""
        return self.model_dump(exclude={'output', 'workers'})


exporter = create_report_exporter()


def cmd_analytics(config: RunConfig) -> Dict[str, Any]:
    report = build_report(config.params(), config.n0)
    if config.output_format == 'txt':
        return exporter.export_analytics_text(report, config.n0)
    if config.output_format == 'csv':
        return exporter.export_sweep([report], 'csv', title="analytics")
    return exporter.export_json(config.echo(), [report.to_dict()], [], build_identifier(), config.seed,
                                title="analytics")


def cmd_sweep(config: RunConfig) -> Dict[str, Any]:
    reports = figure_sweep((config.q_min, config.q_max), config.gammas, config.resolution,
                           tau0=config.tau0, b=config.b, cost_rate=config.cost_rate, n0=config.n0)
    metadata = {'config': config.echo(), 'build': build_identifier(), 'seed': config.seed}
    return exporter.export_sweep(reports, config.output_format, title="sweep", metadata=metadata)


def _cycle_verdicts(params: NetworkParams, kind: CycleKind, statistics,
                    z: float = DEFAULT_Z) -> List[ComparisonVerdict]:
    if kind is CycleKind.HONEST:
        return [
            compare("duration", params.tau0, statistics.fields['duration'], z),
            compare("attacker win rate", params.q, statistics.fields['selfish_official'], z),
        ]
    duration, revenue = selfish_cycle_expectations(params)
    verdicts = [
        compare("duration", duration, statistics.fields['duration'], z),
        compare("revenue", revenue, statistics.fields['selfish_revenue'], z),
        compare("revenue ratio", selfish_revenue_ratio(params), statistics.revenue_ratio, z),
        compare("apparent hashrate", apparent_hashrate(params), statistics.apparent_hashrate, z),
        compare("tie frequency", params.p * params.q, statistics.case_frequencies['tie'], z),
        compare_upper("stability bound", params.alpha_prime * params.b, statistics.revenue_ratio, z),
    ]
    if statistics.race_duration is not None:
        verdicts.append(compare("lead continuation", params.tau0 / (params.p - params.q),
                                statistics.race_duration, z))
    return verdicts


def cmd_simulate_cycles(config: RunConfig):
    params = config.params()
    kind = CycleKind(config.kind)
    statistics = estimate_cycle_statistics(params, kind, config.n_cycles, config.seed, workers=config.workers)
    return [statistics.to_dict()], _cycle_verdicts(params, kind, statistics, config.z)


def cmd_simulate_epochs(config: RunConfig):
    params = config.params()
    policy = AdjustmentPolicy(config.policy)
    if config.n_replications < 2:
        raise ValueError(f"epoch simulation needs at least 2 replications, got {config.n_replications}")
    replications = run_replications(params, policy, config.n_epochs, config.n_replications, config.seed,
                                    config.n0, config.workers)
    summary = summarize_epochs(replications, params, policy, config.n0)
    verdicts = []
    if policy is AdjustmentPolicy.LEGACY:
        verdicts.append(compare("epoch-1 elapsed/(n0 tau0)", expected_delta(params),
                                summary.per_epoch[0].elapsed_ratio, config.z))
        if summary.later_factor is not None:
            verdicts.append(compare("later mean factor", 1.0, summary.later_factor, config.z))
            verdicts.append(compare("later revenue ratio", post_adjustment_revenue_ratio(params),
                                    summary.later_revenue_ratio, config.z))
    else:
        verdicts.append(compare("mean adjustment factor", 1.0, summary.pooled_factor, config.z))
        honest = honest_revenue_ratio(params)
        for epoch in summary.per_epoch:
            verdicts.append(compare_upper(f"epoch {epoch.epoch_index} revenue ratio", honest,
                                          epoch.selfish_revenue_ratio, config.z))
    return [summary.to_dict()], verdicts


def cmd_simulate(config: RunConfig) -> Dict[str, Any]:
    if config.mode == 'cycles':
        results, verdicts = cmd_simulate_cycles(config)
    else:
        results, verdicts = cmd_simulate_epochs(config)
    exported = exporter.export_json(config.echo(), results, verdicts, build_identifier(), config.seed,
                                    title=f"simulate_{config.mode}")
    exported['passed'] = all(verdict.passed for verdict in verdicts)
    exported['summary'] = summarize_verdicts(verdicts)
    return exported


def cmd_breakeven(config: RunConfig) -> Dict[str, Any]:
    params = config.params()
    n_replications = config.n_replications or 100
    estimate = empirical_breakeven(params, n_replications, config.horizon_epochs, config.seed,
                                   config.n0, config.workers)
    target = breakeven_time(params, config.n0)
    result = estimate.to_dict()
    result['analytic_breakeven_time'] = target
    result['analytic_breakeven_weeks'] = target / SECONDS_PER_WEEK
    if estimate.estimate is not None:
        result['relative_error'] = abs(estimate.estimate.mean - target) / target
    exported = exporter.export_json(config.echo(), [result], [], build_identifier(), config.seed,
                                    title="breakeven")
    exported['passed'] = not estimate.flagged
    return exported


def cmd_verify(config: RunConfig) -> Dict[str, Any]:
    seed = config.seed if config.seed is not None else 1
    report = run_suite(fast=config.fast, seed=seed, workers=config.workers, z=config.z)
    for line in report.summary_lines():
        print(line, file=sys.stderr)
    exported = exporter.export_json(config.echo(), [report.to_dict()], report.verdicts, build_identifier(),
                                    seed, title="verify")
    exported['passed'] = report.passed
    return exported


COMMANDS = {
    'analytics': cmd_analytics,
    'sweep': cmd_sweep,
    'simulate': cmd_simulate,
    'breakeven': cmd_breakeven,
    'verify': cmd_verify,
}


def _common_arguments() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--q', type=float, help="attacker share of the hashrate, 0 <= q < 1/2")
    common.add_argument('--gamma', type=float, help="connectivity, 0 <= gamma <= 1")
    common.add_argument('--tau0', type=float, default=DEFAULT_TAU0, help="target interblock time (s)")
    common.add_argument('--b', type=float, default=DEFAULT_REWARD, help="block reward")
    common.add_argument('--cost-rate', type=float, default=0.0, help="mining cost per second")
    common.add_argument('--n0', type=int, default=DEFAULT_N0, help="official blocks per epoch")
    common.add_argument('--format', dest='output_format', choices=['csv', 'json', 'txt'])
    common.add_argument('--output', help="write the report here instead of stdout")
    common.add_argument('--workers', type=int, help="worker processes (default SMLAB_WORKERS)")
    common.add_argument('--verbose', action='store_true', help="debug logging on stderr")
    return common


def create_parser() -> argparse.ArgumentParser:
    common = _common_arguments()
    parser = argparse.ArgumentParser(prog="smlab", description="Selfish-mining profitability lab")
    subparsers = parser.add_subparsers(dest='subcommand', required=True)

    subparsers.add_parser('analytics', parents=[common], help="closed forms at one parameter point")

    sweep = subparsers.add_parser('sweep', parents=[common], help="closed forms over a (gamma, q) grid")
    sweep.add_argument('--q-min', type=float, default=0.0)
    sweep.add_argument('--q-max', type=float, default=0.49)
    sweep.add_argument('--resolution', type=int, default=50)
    sweep.add_argument('--gammas', type=float, nargs='+', default=[0.0, 0.5, 1.0])

    simulate = subparsers.add_parser('simulate', help="Monte Carlo runs checked against closed forms")
    modes = simulate.add_subparsers(dest='mode', required=True)
    cycles = modes.add_parser('cycles', parents=[common], help="attack or honest cycles")
    cycles.add_argument('--n', dest='n_cycles', type=int)
    cycles.add_argument('--kind', choices=['selfish', 'honest'], default='selfish')
    cycles.add_argument('--seed', type=int)
    cycles.add_argument('--confidence', type=float, help=CONFIDENCE_HELP)
    epochs = modes.add_parser('epochs', parents=[common], help="difficulty epochs")
    epochs.add_argument('--policy', choices=[policy.value for policy in AdjustmentPolicy], default='legacy')
    epochs.add_argument('--epochs', dest='n_epochs', type=int)
    epochs.add_argument('--replications', dest='n_replications', type=int)
    epochs.add_argument('--seed', type=int)
    epochs.add_argument('--confidence', type=float, help=CONFIDENCE_HELP)

    breakeven = subparsers.add_parser('breakeven', parents=[common], help="empirical break-even time")
    breakeven.add_argument('--replications', dest='n_replications', type=int, default=100)
    breakeven.add_argument('--horizon', dest='horizon_epochs', type=int,
                           help="epochs before a replication is censored (default: from the analytic break-even time)")
    breakeven.add_argument('--seed', type=int)

    verify = subparsers.add_parser('verify', parents=[common], help="run the acceptance suite")
    verify.add_argument('--fast', action='store_true', help="divide sample sizes by 10")
    verify.add_argument('--seed', type=int, default=1)
    verify.add_argument('--confidence', type=float, help=CONFIDENCE_HELP)
    return parser


def setup_logging(verbose: bool = False):
    level = logging.DEBUG if verbose else getattr(logging, SMLAB_LOG_LEVEL.upper(), logging.WARNING)
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
        force=True,
    )


def build_config(args: argparse.Namespace) -> RunConfig:
    values = {key: value for key, value in vars(args).items() if key != 'verbose' and value is not None}
    try:
        return RunConfig(**values)
    except ValidationError as e:
        details = "; ".join(error['msg'].removeprefix("Value error, ") for error in e.errors())
        raise CliError(EXIT_USAGE, f"invalid configuration: {details}")


def _emit(exported: Dict[str, Any], output: Optional[str]):
    if output:
        with open(output, 'w', encoding=exported.get('encoding', 'utf-8'), newline='') as f:
            f.write(exported['content'])
        logger.info(f"Wrote {exported['content_type']} report to {output}")
    else:
        sys.stdout.write(exported['content'])
        sys.stdout.flush()


def run(config: RunConfig) -> int:
    try:
        exported = COMMANDS[config.subcommand](config)
    except ValueError as e:
        raise CliError(EXIT_USAGE, str(e))
    _emit(exported, config.output)
    return EXIT_OK if exported.get('passed', True) else EXIT_FAILED


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments, run one subcommand and return the exit code

    Args:
        argv: arguments without the program name; defaults to sys.argv[1:]

    Returns:
        0 on success, 1 when a verdict failed, 2 on invalid usage
    """
    parser = create_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    setup_logging(args.verbose)
    logger.debug(f"Runtime: {get_runtime_status()}")
    try:
        config = build_config(args)
        return run(config)
    except CliError as e:
        print(f"error: {e.detail}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
