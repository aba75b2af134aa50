"""
Report export supporting multiple formats:
- CSV tables for parameter sweeps (one column per plotted axis)
- JSON for simulation and verification reports
- Plain text for reading a single analytics point
"""

import io
import csv
import json
import math
from typing import List, Dict, Any, Optional, Sequence

from analytics import AnalyticsReport
from stats import ComparisonVerdict
from utils import format_duration

SWEEP_COLUMNS = [
    'q', 'gamma', 'q_prime', 'q_prime_over_q', 'expected_delta', 'gamma_sm_pre',
    'gamma_sm_post', 'breakeven_time_weeks', 'gamma_min', 'q_min',
]


def format_number(value: float) -> str:
    """Shortest text that parses back to the same double; infinities as 'inf'."""
    return repr(float(value))


def _json_safe(value: Any) -> Any:
    """Replace non-finite floats by strings so the output is strict JSON."""
    if isinstance(value, float) and not math.isfinite(value):
        return format_number(value)
    if isinstance(value, dict):
        return {key: _json_safe(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(item) for item in value]
    return value


def sweep_row(report: AnalyticsReport) -> Dict[str, float]:
    return {
        'q': report.q,
        'gamma': report.gamma,
        'q_prime': report.apparent_hashrate,
        'q_prime_over_q': report.apparent_hashrate_ratio,
        'expected_delta': report.expected_delta,
        'gamma_sm_pre': report.gamma_sm_pre,
        'gamma_sm_post': report.gamma_sm_post,
        'breakeven_time_weeks': report.breakeven_weeks,
        'gamma_min': report.gamma_threshold,
        'q_min': report.q_threshold,
    }


def parse_csv(content: str) -> List[Dict[str, float]]:
    """Read a numeric CSV table back into rows of floats."""
    reader = csv.DictReader(io.StringIO(content))
    return [{key: float(value) for key, value in row.items()} for row in reader]


class ReportExporter:
    def __init__(self):
        self.supported_formats = ['csv', 'json', 'txt']

    def export_sweep(self, reports: Sequence[AnalyticsReport], format_type: str = 'csv',
                     title: str = "sweep", metadata: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        """
        Export a parameter sweep

        Args:
            reports: AnalyticsReport rows, already in (gamma, q) order
            format_type: 'csv' or 'json'
            title: base name of the suggested file
            metadata: config, build and seed for the JSON envelope

        Returns:
            Dictionary with exported content and metadata
        """
        rows = [sweep_row(report) for report in reports]
        if format_type == 'csv':
            return self.export_csv(rows, SWEEP_COLUMNS, title)
        if format_type == 'json':
            metadata = metadata or {}
            return self.export_json(metadata.get('config', {}), rows, [],
                                    metadata.get('build', ''), metadata.get('seed'), title)
        raise ValueError(f"Unsupported format for sweeps: {format_type}. Supported: ['csv', 'json']")

    def export_csv(self, rows: List[Dict[str, float]], columns: List[str],
                   title: str = "table") -> Dict[str, Any]:
        """Export numeric rows as CSV with a header row."""
        if not rows:
            raise ValueError("nothing to export: table is empty")
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_number(row[column]) for column in columns])

        return {
            'content': buffer.getvalue(),
            'content_type': 'text/csv',
            'filename': f"{title.replace(' ', '_')}.csv",
            'encoding': 'utf-8'
        }

    def export_json(self, config: Dict[str, Any], results: List[Dict[str, Any]],
                    verdicts: List[ComparisonVerdict], build: str, seed: Optional[int],
                    title: str = "report") -> Dict[str, Any]:
        """Export a report as one JSON object {config, results, verdicts, build, seed}.

        Keys are sorted and no timestamps are written, so equal inputs give
        equal bytes.
        """
        report_data = {
            'config': config,
            'results': results,
            'verdicts': [verdict.to_dict() for verdict in verdicts],
            'build': build,
            'seed': seed,
        }
        json_content = json.dumps(_json_safe(report_data), indent=2, sort_keys=True,
                                  ensure_ascii=False, allow_nan=False)

        return {
            'content': json_content + "\n",
            'content_type': 'application/json',
            'filename': f"{title.replace(' ', '_')}.json",
            'encoding': 'utf-8'
        }

    def export_analytics_text(self, report: AnalyticsReport, n0: int) -> Dict[str, Any]:
        """Export one analytics point as a plain text table."""
        lines = []
        lines.append(f"Selfish mining analytics at q={report.q}, gamma={report.gamma}")
        lines.append(f"tau0={report.tau0} s, b={report.b}, n0={n0}")
        lines.append("=" * 60)
        rows = [
            ("Honest revenue ratio", report.gamma_h, "reward/s"),
            ("Selfish revenue ratio (before adjustment)", report.gamma_sm_pre, "reward/s"),
            ("Selfish revenue ratio (after adjustment)", report.gamma_sm_post, "reward/s"),
            ("Expected cycle duration", report.expected_cycle_duration, "s"),
            ("Expected cycle revenue", report.expected_cycle_revenue, "reward"),
            ("Official blocks per cycle", report.expected_official_per_cycle, "blocks"),
            ("Apparent hashrate q'", report.apparent_hashrate, ""),
            ("q'/q", report.apparent_hashrate_ratio, ""),
            ("Expected difficulty factor E[delta]", report.expected_delta, ""),
            ("Honest network ratio (before)", report.honest_network_ratio_pre, "reward/s"),
            ("Honest network ratio (after)", report.honest_network_ratio_post, "reward/s"),
            ("Cost ratio", report.cost_ratio, "reward/s"),
            ("PnL rate honest", report.pnl_rate_honest, "reward/s"),
            ("PnL rate selfish (before)", report.pnl_rate_pre, "reward/s"),
            ("PnL rate selfish (after)", report.pnl_rate_post, "reward/s"),
            ("Connectivity threshold gamma_min", report.gamma_threshold, ""),
            ("Hashrate threshold q_min", report.q_threshold, ""),
        ]
        for label, value, unit in rows:
            lines.append(f"{label:<45} {value:>14.8g} {unit}")

        if report.never_profitable:
            lines.append(f"{'Break-even time':<45} {'never':>14} (q' <= q, attack never profitable)")
        else:
            lines.append(f"{'Break-even time':<45} {report.breakeven_time:>14.8g} s "
                         f"({report.breakeven_time / (n0 * report.tau0):.4f} n0*tau0, "
                         f"{format_duration(report.breakeven_time)})")
        lines.append(f"{'Pool attracts honest miners':<45} {_yes_no(report.pool_attractive):>14}")
        lines.append(f"{'Pool accepts new members':<45} {_yes_no(report.pool_accepting):>14}")
        content = "\n".join(lines) + "\n"

        return {
            'content': content,
            'content_type': 'text/plain',
            'filename': f"analytics_q{report.q}_gamma{report.gamma}.txt",
            'encoding': 'utf-8'
        }


def _yes_no(flag: Optional[bool]) -> str:
    if flag is None:
        return "n/a"
    return "yes" if flag else "no"


# Factory function
def create_report_exporter() -> ReportExporter:
    """Create report exporter instance"""
    return ReportExporter()
