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
"""Clip-level retrieval.

Clips are embedded as the temporal mean of their raw frame features,
standardized per dimension with statistics of the indexed dataset, and
searched by exact cosine similarity.

The index file (AVRI) is little-endian::

    magic "AVRI" | version u32 = 1 | dimension u32 | count u32
    mean: dimension float64 | std: dimension float64
    count times: id length u32 | id UTF-8 | vector: dimension float64
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..protocol.search import SearchBackend
from .errors import AvrError, DimensionError, IndexFormatError
from .featureio import DatasetManifest, FeatureSequence, atomic_write_bytes, load_sequence

__all__ = [
    'AVRI_MAGIC',
    'AVRI_VERSION',
    'STD_FLOOR',
    'ClipEmbedding',
    'StandardizationStats',
    'BruteForceBackend',
    'RetrievalIndex',
    'embed_clip',
    'build_index',
    'build_index_from_embeddings',
    'query_topk',
    'naive_topk',
    'unstandardize',
    'save_index',
    'load_index',
]

logger = logging.getLogger(__name__)

AVRI_MAGIC = b'AVRI'
AVRI_VERSION = 1
STD_FLOOR = 1e-12
_HEADER = struct.Struct('<4sIII')
_U32 = struct.Struct('<I')
_F64 = np.dtype('<f8')


@dataclass(frozen=True, eq=False)
class ClipEmbedding:
    """Temporal mean of a clip's frame features."""
    id: str
    vector: np.ndarray

    def __post_init__(self) -> None:
        vector = np.array(self.vector, dtype=np.float64, copy=True).reshape(-1)
        if not np.all(np.isfinite(vector)):
            raise AvrError(f"Embedding of '{self.id}' is not finite")
        vector.setflags(write=False)
        object.__setattr__(self, 'vector', vector)

    @property
    def dimension(self) -> int:
        return int(self.vector.size)


@dataclass(frozen=True, eq=False)
class StandardizationStats:
    """Per-dimension mean and population standard deviation of a dataset."""
    mean: np.ndarray
    std: np.ndarray

    @property
    def flagged(self) -> np.ndarray:
        """Dimensions whose spread is below STD_FLOOR."""
        return self.std < STD_FLOOR

    @property
    def scale(self) -> np.ndarray:
        return np.maximum(self.std, STD_FLOOR)

    def standardize(self, vector: np.ndarray) -> np.ndarray:
        return (np.asarray(vector, dtype=np.float64) - self.mean) / self.scale


class BruteForceBackend(SearchBackend):
    """Exact cosine search by a full scan over unit-normalized vectors."""

    def __init__(self, ids: Sequence[str], vectors: np.ndarray):
        self._ids = list(ids)
        norms = np.linalg.norm(vectors, axis=1)
        ok = norms >= STD_FLOOR
        self._unit = np.zeros_like(vectors, dtype=np.float64)
        self._unit[ok] = vectors[ok] / norms[ok, None]

    @property
    def size(self) -> int:
        return len(self._ids)

    def search(self, vector: np.ndarray, k: int) -> List[Tuple[str, float]]:
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        norm = float(np.linalg.norm(vector))
        if norm < STD_FLOOR:
            sims = np.zeros(self.size)
        else:
            sims = self._unit @ (np.asarray(vector, dtype=np.float64) / norm)
        order = sorted(range(self.size), key=lambda t: (-sims[t], self._ids[t]))
        return [(self._ids[t], float(sims[t])) for t in order[:k]]


@dataclass(frozen=True, eq=False)
class RetrievalIndex:
    """Standardized clip embeddings with the statistics used to produce them."""
    ids: Tuple[str, ...]
    vectors: np.ndarray
    stats: StandardizationStats
    backend: SearchBackend = field(init=False, repr=False)

    def __post_init__(self) -> None:
        ids = tuple(self.ids)
        if len(set(ids)) != len(ids):
            raise AvrError("Retrieval index ids must be unique")
        vectors = np.array(self.vectors, dtype=np.float64, copy=True)
        if vectors.ndim != 2 or vectors.shape[0] != len(ids):
            raise DimensionError(f"Expected {len(ids)} vectors, got array of shape {vectors.shape}")
        vectors.setflags(write=False)
        object.__setattr__(self, 'ids', ids)
        object.__setattr__(self, 'vectors', vectors)
        object.__setattr__(self, 'backend', BruteForceBackend(ids, vectors))

    @property
    def dimension(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, seq_id: object) -> bool:
        return seq_id in self.ids

    def search(self, raw_vector: np.ndarray, k: int) -> List[Tuple[str, float]]:
        """Standardize a raw clip embedding and search the backend."""
        raw_vector = np.asarray(raw_vector, dtype=np.float64)
        if raw_vector.shape != (self.dimension,):
            raise DimensionError(f"Query has dimension {raw_vector.size}, index has {self.dimension}")
        return self.backend.search(self.stats.standardize(raw_vector), k)


def embed_clip(seq: FeatureSequence) -> ClipEmbedding:
    """Column mean of the raw frame features."""
    return ClipEmbedding(id=seq.id, vector=seq.frames.astype(np.float64).mean(axis=0))


def build_index_from_embeddings(embeddings: Iterable[ClipEmbedding]) -> RetrievalIndex:
    """Standardize embeddings with their own mean and population std.

    Raises:
        AvrError: If there are no embeddings.
        DimensionError: If the embeddings differ in dimension.
    """
    embeddings = list(embeddings)
    if not embeddings:
        raise AvrError("Cannot build an index from an empty dataset")
    dims = {e.dimension for e in embeddings}
    if len(dims) != 1:
        raise DimensionError(f"Clip embeddings have mixed dimensions {sorted(dims)}")

    raw = np.stack([e.vector for e in embeddings])
    stats = StandardizationStats(mean=raw.mean(axis=0), std=raw.std(axis=0))
    if stats.flagged.any():
        logger.warning("%d of %d dimensions have zero spread; their std is floored at %g",
                       int(stats.flagged.sum()), raw.shape[1], STD_FLOOR)
    index = RetrievalIndex(ids=tuple(e.id for e in embeddings),
                           vectors=(raw - stats.mean) / stats.scale,
                           stats=stats)
    logger.info("Built index with %d clips of dimension %d", len(index), index.dimension)
    return index


def build_index(manifest: DatasetManifest) -> RetrievalIndex:
    """Embed every clip of a manifest and build the index."""
    return build_index_from_embeddings(
        embed_clip(load_sequence(entry.feature_path, entry.id)) for entry in manifest
    )


def query_topk(index: RetrievalIndex, query: FeatureSequence, k: int) -> List[Tuple[str, float]]:
    """The k most similar clips by cosine similarity of standardized embeddings.

    Returns ``min(k, len(index))`` pairs ordered by descending similarity,
    ties by ascending id.
    """
    return index.search(embed_clip(query).vector, k)


def naive_topk(index: RetrievalIndex, query: FeatureSequence, k: int) -> List[Tuple[str, float]]:
    """Reference full scan computing one cosine per entry."""
    q = index.stats.standardize(embed_clip(query).vector)
    qn = float(np.linalg.norm(q))
    scored = []
    for seq_id, v in zip(index.ids, index.vectors):
        vn = float(np.linalg.norm(v))
        sim = 0.0 if qn < STD_FLOOR or vn < STD_FLOOR else float(np.dot(v / vn, q / qn))
        scored.append((seq_id, sim))
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored[:k]


def unstandardize(index: RetrievalIndex) -> np.ndarray:
    """Recover the raw clip embeddings from the stored vectors."""
    return index.vectors * index.stats.scale + index.stats.mean


def save_index(index: RetrievalIndex, path: Union[str, Path]) -> None:
    """Write the index in the AVRI format."""
    parts = [
        _HEADER.pack(AVRI_MAGIC, AVRI_VERSION, index.dimension, len(index)),
        index.stats.mean.astype(_F64).tobytes(),
        index.stats.std.astype(_F64).tobytes(),
    ]
    for seq_id, vector in zip(index.ids, index.vectors):
        encoded = seq_id.encode('utf-8')
        parts.append(_U32.pack(len(encoded)))
        parts.append(encoded)
        parts.append(vector.astype(_F64).tobytes())
    atomic_write_bytes(path, b''.join(parts))
    logger.info("Saved index with %d clips to %s", len(index), path)


class _Reader:
    """Bounds-checked cursor over an index file."""

    def __init__(self, data: bytes, path: Path):
        self.data = data
        self.path = path
        self.pos = 0

    def take(self, size: int, what: str) -> bytes:
        if self.pos + size > len(self.data):
            raise IndexFormatError(f"Truncated index while reading {what}", self.path, self.pos)
        chunk = self.data[self.pos:self.pos + size]
        self.pos += size
        return chunk

    def floats(self, count: int, what: str) -> np.ndarray:
        return np.frombuffer(self.take(count * _F64.itemsize, what), dtype=_F64).copy()


def load_index(path: Union[str, Path]) -> RetrievalIndex:
    """Read an AVRI index file.

    Raises:
        IndexFormatError: On a magic or version mismatch, truncation,
            trailing bytes or undecodable ids.
    """
    path = Path(path)
    reader = _Reader(path.read_bytes(), path)
    magic, version, dimension, count = _HEADER.unpack(reader.take(_HEADER.size, 'header'))
    if magic != AVRI_MAGIC:
        raise IndexFormatError(f"Bad magic {magic!r}, expected {AVRI_MAGIC!r}", path, 0)
    if version != AVRI_VERSION:
        raise IndexFormatError(
            f"Index version {version} is not supported by this reader (version {AVRI_VERSION})", path, 4
        )
    if dimension < 1:
        raise IndexFormatError("Index dimension must be >= 1", path, 8)

    mean = reader.floats(dimension, 'mean')
    std = reader.floats(dimension, 'std')
    ids = []
    vectors = []
    for _ in range(count):
        (length,) = _U32.unpack(reader.take(_U32.size, 'id length'))
        start = reader.pos
        try:
            ids.append(reader.take(length, 'id').decode('utf-8'))
        except UnicodeDecodeError as e:
            raise IndexFormatError("Corrupt id", path, start) from e
        vectors.append(reader.floats(dimension, 'vector'))
    if reader.pos != len(reader.data):
        raise IndexFormatError("Trailing bytes after the last entry", path, reader.pos)

    try:
        return RetrievalIndex(
            ids=tuple(ids),
            vectors=np.stack(vectors) if vectors else np.zeros((0, dimension)),
            stats=StandardizationStats(mean=mean, std=std),
        )
    except AvrError as e:
        raise IndexFormatError(f"Corrupt index: {e}", path) from e
