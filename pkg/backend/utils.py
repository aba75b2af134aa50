import os
import logging
import subprocess
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, List, Optional, Sequence, TypeVar

logger = logging.getLogger(__name__)

VERSION = "1.0.0"

T = TypeVar("T")
R = TypeVar("R")


def build_identifier() -> str:
    """git-describe style identifier of the running code, or the package version."""
    repo_dir = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    try:
        result = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=repo_dir, capture_output=True, text=True, timeout=5,
        )
        if result.returncode == 0 and result.stdout.strip():
            return result.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    return f"smlab-{VERSION}"


def run_parallel(fn: Callable[[T], R], tasks: Sequence[T], workers: int = 1) -> List[R]:
    """Apply fn to every task, in a process pool when workers > 1.

    Results come back in task order whatever the worker count, so merged
    statistics do not depend on scheduling.
    """
    if workers <= 1 or len(tasks) <= 1:
        return [fn(task) for task in tasks]
    try:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
            return list(pool.map(fn, tasks))
    except (OSError, NotImplementedError) as e:
        logger.warning(f"Process pool unavailable ({e}); running {len(tasks)} tasks in-process")
        return [fn(task) for task in tasks]


def split_counts(total: int, parts: int) -> List[int]:
    """Split total into `parts` near-equal non-negative counts, larger ones first."""
    if parts < 1:
        raise ValueError(f"parts must be at least 1, got {parts}")
    base, extra = divmod(total, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


def format_duration(seconds: Optional[float]) -> str:
    """Human-readable rendering of a duration in seconds."""
    if seconds is None:
        return "n/a"
    if seconds == float("inf"):
        return "never"
    days = seconds / 86400
    if days >= 14:
        return f"{days / 7:.2f} weeks"
    if days >= 1:
        return f"{days:.2f} days"
    return f"{seconds:.1f} s"
