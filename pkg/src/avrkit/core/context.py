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
"""
Contextualized frame features.

Each frame feature is concatenated with the cumulative sum of the features up
to that frame, normalized by the clip length, and the result is zero-centered
per clip::

    row_j = [f_j, (1/T) * sum_{t<=j} f_t] - mean over the clip

The cumulative half tells the aligner where a frame sits in the overall
action, so it is direction-sensitive: reversing a clip changes it.
"""

from dataclasses import dataclass

import numpy as np

from .featureio import FeatureSequence

__all__ = [
    'CENTERING_TOLERANCE',
    'ContextualizedSequence',
    'contextualize',
    'contextualize_optional',
]


CENTERING_TOLERANCE = 1e-5


@dataclass(frozen=True, eq=False)
class ContextualizedSequence:
    """Zero-centered per-frame features of one clip.

    ``frames`` is T x 2d when the cumulative context is included and T x d
    for the centered-raw ablation (``contextual`` is False).
    """
    id: str
    frames: np.ndarray
    source_d: int
    contextual: bool = True

    @property
    def T(self) -> int:
        return int(self.frames.shape[0])

    @property
    def width(self) -> int:
        return int(self.frames.shape[1])


def _center(values: np.ndarray) -> np.ndarray:
    centered = values - values.mean(axis=0, keepdims=True)
    out = centered.astype(np.float32)
    out.setflags(write=False)
    return out


def contextualize(seq: FeatureSequence) -> ContextualizedSequence:
    """Append the length-normalized cumulative sum to every frame and center.

    The cumulative sum is computed in double precision and narrowed to float32
    after centering.
    """
    raw = seq.frames.astype(np.float64)
    cumulative = np.cumsum(raw, axis=0) / seq.T
    return ContextualizedSequence(
        id=seq.id,
        frames=_center(np.concatenate([raw, cumulative], axis=1)),
        source_d=seq.d,
    )


def contextualize_optional(seq: FeatureSequence, enabled: bool) -> ContextualizedSequence:
    """Contextualize, or only zero-center the raw features when disabled."""
    if enabled:
        return contextualize(seq)
    return ContextualizedSequence(
        id=seq.id,
        frames=_center(seq.frames.astype(np.float64)),
        source_d=seq.d,
        contextual=False,
    )
