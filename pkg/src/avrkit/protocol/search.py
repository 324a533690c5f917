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
"""Search and sequence lookup protocol definitions.

The retrieval index and the pipeline are written against these protocols so
an approximate search backend or a different sequence storage can be plugged
in without touching their callers.
"""

from __future__ import annotations

from abc import abstractmethod
from typing import TYPE_CHECKING, Iterable, List, Protocol, Tuple, runtime_checkable

import numpy as np

if TYPE_CHECKING:
    from ..core.featureio import FeatureSequence

__all__ = [
    'SearchBackend',
    'SequenceStore',
]


@runtime_checkable
class SearchBackend(Protocol):
    """Nearest-neighbour search over standardized clip embeddings."""

    @property
    @abstractmethod
    def size(self) -> int:
        """Number of searchable entries."""
        ...

    @abstractmethod
    def search(self, vector: np.ndarray, k: int) -> List[Tuple[str, float]]:
        """Return up to k ``(id, cosine similarity)`` pairs.

        Results are ordered by descending similarity; equal similarities are
        ordered by ascending id.

        Args:
            vector: A standardized query embedding.
            k: Maximum number of results, at least 1.
        """
        ...


@runtime_checkable
class SequenceStore(Protocol):
    """Lookup of frame feature sequences by clip id."""

    @abstractmethod
    def get(self, seq_id: str) -> 'FeatureSequence':
        """Return the sequence for seq_id.

        Raises:
            MissingSequenceError: If the id is unknown.
        """
        ...

    @abstractmethod
    def __contains__(self, seq_id: object) -> bool:
        ...

    @abstractmethod
    def ids(self) -> Iterable[str]:
        """All ids the store can resolve."""
        ...
