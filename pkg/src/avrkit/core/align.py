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
"""Cost matrices, DTW alignment and label warping.

Paths are sequences of 1-based ``(i, j)`` tuples from ``(1, 1)`` to
``(n, m)`` where ``i`` indexes the first sequence and ``j`` the second.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Iterator, List, Sequence, Tuple

import numpy as np

from .context import ContextualizedSequence
from .errors import DimensionError, LabelError

__all__ = [
    'ZERO_NORM_EPS',
    'MOVES',
    'Side',
    'CostMatrix',
    'AlignmentPath',
    'WarpedLabels',
    'cost_matrix',
    'dtw',
    'path_cost',
    'skip_still_frames',
    'warp_labels',
]

logger = logging.getLogger(__name__)

ZERO_NORM_EPS = 1e-12

# Forward steps allowed between consecutive path tuples.
MOVES = ((1, 1), (1, 0), (0, 1))


class Side(str, Enum):
    """Which sequence of a pair stays unwarped."""
    FIRST = 'first'
    SECOND = 'second'

    @property
    def index(self) -> int:
        return 0 if self is Side.FIRST else 1

    @property
    def other(self) -> 'Side':
        return Side.SECOND if self is Side.FIRST else Side.FIRST


@dataclass(frozen=True, eq=False)
class CostMatrix:
    """Pairwise frame distances of two sequences.

    Construction checks that every entry is finite and non-negative. Matrices
    built by :func:`cost_matrix` additionally lie in [0, 2].
    """
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise DimensionError(f"Cost matrix must be n x m with n, m >= 1, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("Cost matrix contains non-finite entries")
        if np.any(values < 0):
            raise ValueError("Cost matrix contains negative entries")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @property
    def m(self) -> int:
        return int(self.values.shape[1])

    def scaled(self, alpha: float) -> 'CostMatrix':
        """Return the matrix multiplied by a positive factor."""
        if alpha <= 0:
            raise ValueError("Scale factor must be positive")
        return CostMatrix(self.values * alpha)


@dataclass(frozen=True)
class AlignmentPath:
    """Ordered 1-based index tuples through a cost matrix."""
    tuples: Tuple[Tuple[int, int], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, 'tuples', tuple((int(i), int(j)) for i, j in self.tuples))

    def __len__(self) -> int:
        return len(self.tuples)

    def __iter__(self) -> Iterator[Tuple[int, int]]:
        return iter(self.tuples)

    @property
    def end(self) -> Tuple[int, int]:
        return self.tuples[-1]

    def problems(self, n: int, m: int) -> List[str]:
        """List every way this path violates the full-path invariants for an n x m matrix."""
        issues = []
        if not self.tuples:
            return ["path is empty"]
        if self.tuples[0] != (1, 1):
            issues.append(f"starts at {self.tuples[0]}, not (1, 1)")
        if self.tuples[-1] != (n, m):
            issues.append(f"ends at {self.tuples[-1]}, not ({n}, {m})")
        for (i0, j0), (i1, j1) in zip(self.tuples, self.tuples[1:]):
            if (i1 - i0, j1 - j0) not in MOVES:
                issues.append(f"invalid step ({i0}, {j0}) -> ({i1}, {j1})")
        if not max(n, m) <= len(self.tuples) <= n + m:
            issues.append(f"length {len(self.tuples)} outside [{max(n, m)}, {n + m}]")
        return issues

    def is_valid(self, n: int, m: int) -> bool:
        return not self.problems(n, m)

    def to_list(self) -> List[List[int]]:
        return [[i, j] for i, j in self.tuples]


@dataclass(frozen=True)
class WarpedLabels:
    """Labels of the warped sequence resampled onto the unwarped one."""
    reference_length: int
    values: Tuple[Any, ...]


def cost_matrix(a: ContextualizedSequence, b: ContextualizedSequence) -> CostMatrix:
    """Cosine distances ``1 - cos(a_i, b_j)`` between all frame pairs.

    Pairs where either vector has norm below ZERO_NORM_EPS get the neutral
    distance 1.

    Raises:
        DimensionError: If the feature widths differ.
    """
    if a.width != b.width:
        raise DimensionError(f"Feature widths differ: '{a.id}' has {a.width}, '{b.id}' has {b.width}")

    x = a.frames.astype(np.float64)
    y = b.frames.astype(np.float64)
    nx = np.linalg.norm(x, axis=1)
    ny = np.linalg.norm(y, axis=1)
    x_ok = nx >= ZERO_NORM_EPS
    y_ok = ny >= ZERO_NORM_EPS
    x_unit = np.zeros_like(x)
    y_unit = np.zeros_like(y)
    x_unit[x_ok] = x[x_ok] / nx[x_ok, None]
    y_unit[y_ok] = y[y_ok] / ny[y_ok, None]

    values = np.clip(1.0 - x_unit @ y_unit.T, 0.0, 2.0)
    values[~(x_ok[:, None] & y_ok[None, :])] = 1.0
    return CostMatrix(values)


def dtw(c: CostMatrix) -> Tuple[AlignmentPath, float]:
    """Optimal monotonic alignment under the steps (1,1), (1,0), (0,1).

    ``D(1,1) = C(1,1)`` and ``D(i,j) = C(i,j) + min(D(i-1,j-1), D(i-1,j),
    D(i,j-1))``. The backtrace prefers the diagonal, then advancing i, then
    advancing j.

    Returns:
        The optimal path and its total cost ``D(n, m)``.
    """
    n, m = c.n, c.m
    rows = c.values.tolist()
    acc: List[List[float]] = []

    running = 0.0
    first = []
    for value in rows[0]:
        running += value
        first.append(running)
    acc.append(first)

    for i in range(1, n):
        ci = rows[i]
        prev = acc[i - 1]
        cur = [prev[0] + ci[0]]
        for j in range(1, m):
            best = prev[j - 1]
            if prev[j] < best:
                best = prev[j]
            if cur[j - 1] < best:
                best = cur[j - 1]
            cur.append(ci[j] + best)
        acc.append(cur)

    i, j = n - 1, m - 1
    reversed_path = [(n, m)]
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            diag, up, left = acc[i - 1][j - 1], acc[i - 1][j], acc[i][j - 1]
            if diag <= up and diag <= left:
                i, j = i - 1, j - 1
            elif up <= left:
                i -= 1
            else:
                j -= 1
        reversed_path.append((i + 1, j + 1))

    total = acc[n - 1][m - 1]
    logger.debug("DTW on %dx%d matrix: cost %.6f, path length %d", n, m, total, len(reversed_path))
    return AlignmentPath(tuple(reversed(reversed_path))), float(total)


def path_cost(c: CostMatrix, p: AlignmentPath) -> float:
    """Sum of the cost matrix entries along a path."""
    idx = np.asarray(p.tuples, dtype=np.intp) - 1
    return float(c.values[idx[:, 0], idx[:, 1]].sum())


def skip_still_frames(p: AlignmentPath, keep_unwarped: Side) -> AlignmentPath:
    """Drop tuples that repeat an index of the unwarped side.

    The first tuple of each kept-side index is retained, so every kept-side
    index maps to exactly one index of the other side.
    """
    k = Side(keep_unwarped).index
    seen = set()
    kept = []
    for pair in p.tuples:
        if pair[k] in seen:
            continue
        seen.add(pair[k])
        kept.append(pair)
    return AlignmentPath(tuple(kept))


def warp_labels(p: AlignmentPath, source_labels: Sequence[Any], keep_unwarped: Side) -> WarpedLabels:
    """Resample per-frame labels of the warped side onto the unwarped side.

    Args:
        p: A full alignment path.
        source_labels: One label per frame of the warped side.
        keep_unwarped: The side whose timeline the output follows.

    Raises:
        LabelError: If the labels do not cover the warped side.
    """
    keep = Side(keep_unwarped)
    warped = keep.other.index
    warped_length = p.end[warped]
    if len(source_labels) != warped_length:
        raise LabelError(
            f"Got {len(source_labels)} labels for a warped sequence of {warped_length} frames"
        )
    skipped = skip_still_frames(p, keep)
    values = tuple(source_labels[pair[warped] - 1] for pair in skipped.tuples)
    return WarpedLabels(reference_length=len(values), values=values)
