#
# Copyright 2025 coreseek.com
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
#
"""Alignability indicators.

DRAQ divides the optimal DTW cost by the mean cost of ``k`` random paths
through the same cost matrix. Random paths start at ``(n, m)`` and walk back
to ``(1, 1)``; at ``(i, j)`` the move ``delta_i = -1`` is drawn with
probability ``i / (i + j)`` and ``delta_j = -1`` independently with
probability ``j / (i + j)``, which biases paths towards the top-left corner.
Moves that would leave the grid are clamped to 0 and a ``(0, 0)`` draw is
resampled.

All indicators are "lower is better". The DTW cost and negative Kendall tau
are kept as baselines.
"""

from __future__ import annotations

import logging
import zlib
from dataclasses import dataclass
from enum import Enum
from typing import List, NamedTuple, Optional, Tuple

import numpy as np

from .align import AlignmentPath, CostMatrix, cost_matrix, dtw
from .context import ContextualizedSequence
from .errors import AvrError, ConfigError, DimensionError

__all__ = [
    'DEGENERATE_EPS',
    'SamplerMode',
    'Indicator',
    'AlignabilityScore',
    'RandomPathConfig',
    'PairScores',
    'pair_rng',
    'sample_random_path',
    'sample_path_costs',
    'random_path_cost',
    'draq',
    'score_pair',
    'kendall_tau_a',
    'kendall_tau_indicator',
    'dtw_cost_indicator',
]

logger = logging.getLogger(__name__)

DEGENERATE_EPS = 1e-12


class SamplerMode(str, Enum):
    """How a random path chooses its moves.

    STEP draws a fresh move at every cell. PERSISTENT keeps a drawn direction
    until it would leave the grid and only then draws again.
    """
    STEP = 'step'
    PERSISTENT = 'persistent'


class Indicator(str, Enum):
    DRAQ = 'draq'
    DTW_COST = 'dtw_cost'
    NEG_KENDALL_TAU = 'neg_tau'


@dataclass(frozen=True)
class AlignabilityScore:
    """A scalar alignability value and the indicator that produced it."""
    value: float
    indicator: Indicator
    degenerate: bool = False

    @property
    def lower_is_better(self) -> bool:
        return True


@dataclass(frozen=True)
class RandomPathConfig:
    """Number of random paths averaged by DRAQ and the sampler seed."""
    num_paths: int = 100
    seed: int = 0
    mode: SamplerMode = SamplerMode.STEP

    def __post_init__(self) -> None:
        if self.num_paths < 1:
            raise ConfigError(f"num_paths must be >= 1, got {self.num_paths}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        object.__setattr__(self, 'mode', SamplerMode(self.mode))

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


class PairScores(NamedTuple):
    """Everything the pipeline needs from one scored pair."""
    path: AlignmentPath
    dtw_cost: float
    random_cost: float
    draq: AlignabilityScore


def pair_rng(seed: int, *keys: str) -> np.random.Generator:
    """An independent generator for one task, derived from seed and string keys."""
    entropy = [int(seed)] + [zlib.crc32(key.encode('utf-8')) for key in keys]
    return np.random.default_rng(entropy)


def _walk(n: int, m: int, k: int, rng: np.random.Generator, mode: SamplerMode,
          values: Optional[np.ndarray] = None,
          record: bool = False) -> Tuple[np.ndarray, Optional[List[List[Tuple[int, int]]]]]:
    """Walk k random paths from (n, m) to (1, 1) at once.

    Returns the path cost sums (zeros when values is None) and, if record is
    set, the visited cells of every path in backward order.
    """
    i = np.full(k, n, dtype=np.int64)
    j = np.full(k, m, dtype=np.int64)
    costs = np.zeros(k, dtype=np.float64)
    if values is not None:
        costs += values[n - 1, m - 1]
    paths = [[(n, m)] for _ in range(k)] if record else None
    dir_i = np.zeros(k, dtype=bool)
    dir_j = np.zeros(k, dtype=bool)
    persistent = mode is SamplerMode.PERSISTENT

    active = np.flatnonzero((i > 1) | (j > 1))
    while active.size:
        ii = i[active]
        jj = j[active]
        total = (ii + jj).astype(np.float64)

        if persistent:
            need = ~(dir_i[active] | dir_j[active])
            u = rng.random((int(need.sum()), 2))
            sel = active[need]
            dir_i[sel] = u[:, 0] < ii[need] / total[need]
            dir_j[sel] = u[:, 1] < jj[need] / total[need]
            step_i = dir_i[active] & (ii > 1)
            step_j = dir_j[active] & (jj > 1)
            stuck = ~(step_i | step_j)
            dir_i[active[stuck]] = False
            dir_j[active[stuck]] = False
        else:
            u = rng.random((active.size, 2))
            step_i = (u[:, 0] < ii / total) & (ii > 1)
            step_j = (u[:, 1] < jj / total) & (jj > 1)

        moved = step_i | step_j
        i[active] = ii - step_i
        j[active] = jj - step_j
        moved_idx = active[moved]
        if values is not None and moved_idx.size:
            costs[moved_idx] += values[i[moved_idx] - 1, j[moved_idx] - 1]
        if paths is not None:
            for t in moved_idx:
                paths[t].append((int(i[t]), int(j[t])))
        active = active[(i[active] > 1) | (j[active] > 1)]

    return costs, paths


def sample_random_path(n: int, m: int, rng: np.random.Generator,
                       mode: SamplerMode = SamplerMode.STEP) -> AlignmentPath:
    """Sample one biased random path through an n x m grid.

    The walk runs from (n, m) to (1, 1); the returned path is in forward order.
    """
    if n < 1 or m < 1:
        raise DimensionError(f"Grid must be at least 1 x 1, got {n} x {m}")
    _, paths = _walk(n, m, 1, rng, SamplerMode(mode), record=True)
    return AlignmentPath(tuple(reversed(paths[0])))


def sample_path_costs(c: CostMatrix, cfg: RandomPathConfig,
                      rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Cost sums of cfg.num_paths random paths through c."""
    rng = rng if rng is not None else cfg.rng()
    costs, _ = _walk(c.n, c.m, cfg.num_paths, rng, cfg.mode, values=c.values)
    return costs


def random_path_cost(c: CostMatrix, cfg: RandomPathConfig,
                     rng: Optional[np.random.Generator] = None) -> float:
    """Mean cost of cfg.num_paths random paths; deterministic for a fixed seed."""
    return float(np.mean(sample_path_costs(c, cfg, rng)))


def _ratio(optimal: float, random_cost: float) -> AlignabilityScore:
    if random_cost < DEGENERATE_EPS:
        logger.warning("Degenerate DRAQ: random path cost %.3g, reporting 1.0", random_cost)
        return AlignabilityScore(1.0, Indicator.DRAQ, degenerate=True)
    return AlignabilityScore(optimal / random_cost, Indicator.DRAQ)


def draq(c: CostMatrix, cfg: RandomPathConfig,
         rng: Optional[np.random.Generator] = None) -> AlignabilityScore:
    """Optimal DTW cost divided by the mean random path cost.

    A (near) zero random cost carries no alignability evidence; the score is
    then 1.0 with the degenerate flag set.
    """
    return score_pair(c, cfg, rng).draq


def score_pair(c: CostMatrix, cfg: RandomPathConfig,
               rng: Optional[np.random.Generator] = None) -> PairScores:
    """Run DTW and the random path sampler once and derive DRAQ."""
    path, optimal = dtw(c)
    random_cost = random_path_cost(c, cfg, rng)
    return PairScores(path, optimal, random_cost, _ratio(optimal, random_cost))


def kendall_tau_a(x: np.ndarray, y: np.ndarray) -> float:
    """Kendall tau-a; tied pairs count as neither concordant nor discordant."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.size
    if n < 2:
        raise AvrError("Kendall tau needs at least two observations")
    upper = np.triu_indices(n, k=1)
    sx = np.sign(x[None, :] - x[:, None])[upper]
    sy = np.sign(y[None, :] - y[:, None])[upper]
    return float(np.sum(sx * sy) / (n * (n - 1) / 2))


def kendall_tau_indicator(a: ContextualizedSequence, b: ContextualizedSequence) -> AlignabilityScore:
    """Negative Kendall tau between frame order and nearest-neighbour order.

    Each frame of a is matched to its nearest frame of b by cosine distance
    (lowest index on ties). If every frame matches the same index the
    correlation is 0.
    """
    if a.width != b.width:
        raise DimensionError(f"Feature widths differ: '{a.id}' has {a.width}, '{b.id}' has {b.width}")
    if a.T < 2:
        raise AvrError(f"Kendall tau indicator needs at least 2 frames in '{a.id}'")
    matches = np.argmin(cost_matrix(a, b).values, axis=1)
    tau = kendall_tau_a(np.arange(a.T), matches)
    return AlignabilityScore(-tau + 0.0, Indicator.NEG_KENDALL_TAU)


def dtw_cost_indicator(c: CostMatrix) -> AlignabilityScore:
    """The optimal DTW cost D(n, m) as an indicator."""
    _, total = dtw(c)
    return AlignabilityScore(total, Indicator.DTW_COST)
