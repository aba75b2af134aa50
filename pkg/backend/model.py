"""
Domain types shared by the analytics engine and the simulators.

Houses the network parameter bundle, the per-cycle outcome record and the
seeded random stream every simulator draws from.
"""

import os
import math
import logging
from typing import Dict, Optional
from dataclasses import dataclass

import numpy as np
from dotenv import load_dotenv

load_dotenv()

logger = logging.getLogger(__name__)

# Operational knobs only; model parameters always come from the command line
SMLAB_WORKERS = int(os.getenv("SMLAB_WORKERS", "1"))
SMLAB_LOG_LEVEL = os.getenv("SMLAB_LOG_LEVEL", "WARNING")

DEFAULT_TAU0 = 600.0
DEFAULT_REWARD = 1.0
DEFAULT_N0 = 2016

# Refill size of the buffered variate pools in RandomStream
_POOL_SIZE = 4096


@dataclass(frozen=True)
class NetworkParams:
    """Parameter point of the model: attacker hashrate, connectivity and economics.

    q is the attacker's share of the total hashrate, gamma the fraction of honest
    hashrate that mines on the attacker's block during a tie, tau0 the mean
    interblock time of the whole network (seconds), b the block reward and
    cost_rate the expected mining cost per second.
    """
    q: float
    gamma: float
    tau0: float = DEFAULT_TAU0
    b: float = DEFAULT_REWARD
    cost_rate: float = 0.0

    def __post_init__(self):
        if not 0 <= self.q < 0.5:
            raise ValueError(f"q must satisfy 0 <= q < 1/2, got {self.q}")
        if not 0 <= self.gamma <= 1:
            raise ValueError(f"gamma must satisfy 0 <= gamma <= 1, got {self.gamma}")
        if not self.tau0 > 0:
            raise ValueError(f"tau0 must be positive, got {self.tau0}")
        if not self.b > 0:
            raise ValueError(f"b must be positive, got {self.b}")
        if not self.cost_rate >= 0:
            raise ValueError(f"cost_rate must be non-negative, got {self.cost_rate}")

    @property
    def p(self) -> float:
        return 1 - self.q

    @property
    def alpha(self) -> float:
        """Honest block rate (per second)."""
        return self.p / self.tau0

    @property
    def alpha_prime(self) -> float:
        """Attacker block rate (per second)."""
        return self.q / self.tau0

    def to_dict(self) -> Dict[str, float]:
        return {
            'q': self.q,
            'gamma': self.gamma,
            'tau0': self.tau0,
            'b': self.b,
            'cost_rate': self.cost_rate,
        }


def derived_rates(params: NetworkParams):
    """Return (p, alpha, alpha_prime) for a parameter point.

    alpha + alpha_prime is always 1/tau0.
    """
    return params.p, params.alpha, params.alpha_prime


@dataclass(frozen=True)
class CycleOutcome:
    """One attack (or honest) cycle, from a common chain tip to the next one.

    The case label names the branch of the cycle:
      honest              honest-strategy cycle, a single block
      honest_first        the honest side finds the first block
      tie_selfish_wins    tie decided by an honest block on the attacker's branch
      tie_honest_wins     tie decided by an honest block on the honest branch
      tie_selfish_extends tie decided by the attacker's next block
      selfish_lead        the attacker reaches a lead of 2 and is later caught up to 1
    """
    duration: float
    selfish_official: int
    honest_official: int
    selfish_orphans: int
    honest_orphans: int
    selfish_revenue: float
    case: str = "honest"
    race_duration: float = 0.0

    @property
    def official_blocks(self) -> int:
        return self.selfish_official + self.honest_official

    @property
    def orphan_blocks(self) -> int:
        return self.selfish_orphans + self.honest_orphans

    @property
    def all_blocks(self) -> int:
        return self.official_blocks + self.orphan_blocks

    @property
    def honest_revenue_blocks(self) -> int:
        return self.honest_official


class RandomStream:
    """Seeded, single-owner source of variates.

    Wraps a numpy ``Generator`` over PCG64. Variates are drawn in pools of
    ``_POOL_SIZE`` so the per-draw cost stays low inside pure-Python event
    loops; the pooling is part of the sequence, so the same seed always
    reproduces the same draws.

    Streams for parallel work are derived with ``for_chunk``: chunk ``i`` of
    master seed ``s`` is seeded by ``SeedSequence(s, spawn_key=(i,))``, the
    same sequence ``SeedSequence(s).spawn(...)[i]`` would give.
    """

    def __init__(self, seed: int, spawn_key: tuple = ()):
        if seed < 0 or seed >= 2 ** 64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self.spawn_key = tuple(spawn_key)
        sequence = np.random.SeedSequence(seed, spawn_key=self.spawn_key)
        self._generator = np.random.Generator(np.random.PCG64(sequence))
        self._exponentials = np.empty(0)
        self._exp_index = 0
        self._uniforms = np.empty(0)
        self._uni_index = 0

    @classmethod
    def for_chunk(cls, seed: int, index: int) -> "RandomStream":
        return cls(seed, spawn_key=(index,))

    def standard_exponential(self) -> float:
        if self._exp_index >= len(self._exponentials):
            self._exponentials = self._generator.standard_exponential(_POOL_SIZE)
            self._exp_index = 0
        value = self._exponentials[self._exp_index]
        self._exp_index += 1
        return float(value)

    def uniform(self) -> float:
        """Uniform variate on [0, 1)."""
        if self._uni_index >= len(self._uniforms):
            self._uniforms = self._generator.random(_POOL_SIZE)
            self._uni_index = 0
        value = self._uniforms[self._uni_index]
        self._uni_index += 1
        return float(value)

    def exponential(self, rate: float) -> float:
        return self.standard_exponential() / rate

    def bernoulli(self, probability: float) -> bool:
        return self.uniform() < probability


def sample_exponential(stream: RandomStream, rate: float) -> float:
    """Draw one exponential interblock time (seconds) with the given rate."""
    if not rate > 0 or math.isinf(rate):
        raise ValueError(f"rate must be a positive finite number, got {rate}")
    return stream.exponential(rate)


def resolve_workers(workers: Optional[int] = None) -> int:
    """Worker count from an explicit value or the SMLAB_WORKERS setting."""
    value = SMLAB_WORKERS if workers is None else workers
    if value < 1:
        raise ValueError(f"workers must be at least 1, got {value}")
    return value


def get_runtime_status() -> dict:
    """Non-sensitive description of the runtime knobs in force."""
    return {
        "workers": SMLAB_WORKERS,
        "log_level": SMLAB_LOG_LEVEL,
        "numpy": np.__version__,
    }
