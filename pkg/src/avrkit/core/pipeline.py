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
"""End-to-end alignable video retrieval.

A query runs in three stages: retrieve the top-k clips by embedding
similarity, score and re-rank them by alignability, and align the best
candidate whose DRAQ is below the threshold.
"""

from __future__ import annotations

import functools
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from ..protocol.search import SequenceStore
from .align import AlignmentPath, Side, cost_matrix, skip_still_frames
from .context import ContextualizedSequence, contextualize_optional
from .draq import RandomPathConfig, pair_rng, score_pair
from .errors import MissingSequenceError
from .featureio import DatasetManifest, FeatureSequence, load_sequence
from .retrieve import RetrievalIndex, query_topk

__all__ = [
    'DEFAULT_TOPK',
    'DEFAULT_THRESHOLD',
    'RerankMode',
    'DictSequenceStore',
    'ManifestSequenceStore',
    'ScoredCandidate',
    'BestMatch',
    'AvrResult',
    'score_candidate',
    'rerank_candidates',
    'select_best',
    'retrieve_candidates',
    'avr_query',
]

logger = logging.getLogger(__name__)

DEFAULT_TOPK = 10
DEFAULT_THRESHOLD = 0.6


class RerankMode(str, Enum):
    """Ordering applied to retrieved candidates."""
    DRAQ = 'draq'
    DTW = 'dtw'
    NONE = 'none'


class DictSequenceStore(SequenceStore):
    """In-memory sequence lookup."""

    def __init__(self, sequences: Mapping[str, FeatureSequence] | Iterable[FeatureSequence]):
        if isinstance(sequences, Mapping):
            self._sequences = dict(sequences)
        else:
            self._sequences = {seq.id: seq for seq in sequences}

    def get(self, seq_id: str) -> FeatureSequence:
        try:
            return self._sequences[seq_id]
        except KeyError:
            raise MissingSequenceError(seq_id) from None

    def __contains__(self, seq_id: object) -> bool:
        return seq_id in self._sequences

    def ids(self) -> List[str]:
        return list(self._sequences)


class ManifestSequenceStore(SequenceStore):
    """Loads sequences of a manifest on demand and keeps the most recent ones.

    Args:
        manifest: The dataset whose clips can be looked up.
        cache_size: Number of decoded sequences kept in memory.
    """

    def __init__(self, manifest: DatasetManifest, cache_size: int = 64):
        self._manifest = manifest
        self._paths = {entry.id: entry.feature_path for entry in manifest}
        self._load = functools.lru_cache(maxsize=max(cache_size, 0))(self._load_uncached)

    def _load_uncached(self, seq_id: str) -> FeatureSequence:
        logger.debug("Loading sequence %s from %s", seq_id, self._paths[seq_id])
        return load_sequence(self._paths[seq_id], seq_id)

    def get(self, seq_id: str) -> FeatureSequence:
        if seq_id not in self._paths:
            raise MissingSequenceError(seq_id)
        return self._load(seq_id)

    def __contains__(self, seq_id: object) -> bool:
        return seq_id in self._paths

    def ids(self) -> List[str]:
        return list(self._paths)


@dataclass(frozen=True)
class ScoredCandidate:
    """A retrieved clip with its alignability scores."""
    id: str
    retrieval_sim: float
    draq: float
    dtw_cost: float
    degenerate: bool = False
    path: Optional[AlignmentPath] = field(default=None, compare=False, repr=False)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'id': self.id,
            'retrieval_sim': self.retrieval_sim,
            'draq': self.draq,
            'dtw_cost': self.dtw_cost,
            'degenerate': self.degenerate,
        }


@dataclass(frozen=True)
class BestMatch:
    """The selected candidate and its still-frame-free alignment to the query."""
    id: str
    alignment: AlignmentPath
    draq: float


@dataclass(frozen=True)
class AvrResult:
    """Outcome of one alignable video retrieval query."""
    query_id: str
    ranked_candidates: Tuple[ScoredCandidate, ...]
    best: Optional[BestMatch]
    filtered: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            'query_id': self.query_id,
            'ranked_candidates': [c.to_dict() for c in self.ranked_candidates],
            'best': None if self.best is None else {
                'id': self.best.id,
                'alignment': self.best.alignment.to_list(),
                'draq': self.best.draq,
            },
            'filtered': self.filtered,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def score_candidate(query_ctx: ContextualizedSequence, candidate: FeatureSequence,
                    retrieval_sim: float, cfg: RandomPathConfig,
                    context: bool = True) -> ScoredCandidate:
    """Align one candidate to the query and compute its DRAQ and DTW cost.

    The sampler stream is derived from the seed and both ids, so the score
    does not depend on which other candidates are scored or in which order.
    """
    cand_ctx = contextualize_optional(candidate, context)
    rng = pair_rng(cfg.seed, query_ctx.id, candidate.id)
    scores = score_pair(cost_matrix(query_ctx, cand_ctx), cfg, rng)
    logger.debug("Candidate %s: draq=%.4f dtw=%.4f", candidate.id, scores.draq.value, scores.dtw_cost)
    return ScoredCandidate(
        id=candidate.id,
        retrieval_sim=retrieval_sim,
        draq=scores.draq.value,
        dtw_cost=scores.dtw_cost,
        degenerate=scores.draq.degenerate,
        path=scores.path,
    )


def rerank_candidates(query: FeatureSequence, candidates: Sequence[Tuple[str, float]],
                      sequences: SequenceStore, cfg: RandomPathConfig,
                      rerank: RerankMode = RerankMode.DRAQ, context: bool = True,
                      workers: int = 1) -> List[ScoredCandidate]:
    """Score candidates and order them.

    Args:
        query: The query sequence (first side of every alignment).
        candidates: ``(id, retrieval similarity)`` pairs in retrieval order.
        sequences: Lookup of candidate frame sequences.
        cfg: Random path configuration for DRAQ.
        rerank: DRAQ and DTW sort ascending by that score, ties by id;
            NONE keeps the retrieval order.
        context: Use contextualized features (False for the centered-raw ablation).
        workers: Number of threads scoring candidates.

    Raises:
        MissingSequenceError: If a candidate id cannot be resolved.
    """
    rerank = RerankMode(rerank)
    query_ctx = contextualize_optional(query, context)
    resolved = [(sequences.get(cand_id), sim) for cand_id, sim in candidates]

    def score(item: Tuple[FeatureSequence, float]) -> ScoredCandidate:
        return score_candidate(query_ctx, item[0], item[1], cfg, context)

    if workers > 1 and len(resolved) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scored = list(pool.map(score, resolved))
    else:
        scored = [score(item) for item in resolved]

    if rerank is RerankMode.DRAQ:
        scored.sort(key=lambda c: (c.draq, c.id))
    elif rerank is RerankMode.DTW:
        scored.sort(key=lambda c: (c.dtw_cost, c.id))
    return scored


def select_best(ranked: Sequence[ScoredCandidate], draq_threshold: float) -> Optional[BestMatch]:
    """First ranked candidate with DRAQ below the threshold, aligned with the match unwarped."""
    for candidate in ranked:
        if candidate.draq < draq_threshold and candidate.path is not None:
            return BestMatch(
                id=candidate.id,
                alignment=skip_still_frames(candidate.path, Side.SECOND),
                draq=candidate.draq,
            )
    return None


def retrieve_candidates(index: RetrievalIndex, query: FeatureSequence, topk: int) -> List[Tuple[str, float]]:
    """Top-k retrieval that leaves out the query's own id."""
    if len(index) == 0:
        return []
    request = topk + 1 if query.id in index else topk
    hits = [hit for hit in query_topk(index, query, request) if hit[0] != query.id]
    return hits[:topk]


def avr_query(index: RetrievalIndex, sequences: SequenceStore, query: FeatureSequence,
              topk: int = DEFAULT_TOPK, cfg: Optional[RandomPathConfig] = None,
              draq_threshold: float = DEFAULT_THRESHOLD,
              rerank: RerankMode = RerankMode.DRAQ, context: bool = True,
              workers: int = 1) -> AvrResult:
    """Retrieve, re-rank, filter and align candidates for one query.

    Args:
        index: Retrieval index over the candidate clips.
        sequences: Frame sequences of the indexed clips.
        query: The query sequence. An index entry with the same id is skipped.
        topk: Number of retrieved candidates.
        cfg: Random path configuration; defaults to 100 paths, seed 0.
        draq_threshold: Candidates need a DRAQ strictly below this value to
            be selected; ``float('inf')`` disables filtering.
        rerank: Candidate ordering.
        context: Use contextualized frame features.
        workers: Threads used for candidate scoring.

    Returns:
        The ranked candidates and the best alignable match, if any.
    """
    if topk < 1:
        raise ValueError(f"topk must be >= 1, got {topk}")
    cfg = cfg or RandomPathConfig()

    candidates = retrieve_candidates(index, query, topk)
    ranked = rerank_candidates(query, candidates, sequences, cfg, rerank, context, workers)
    best = select_best(ranked, draq_threshold)
    if best is None:
        logger.warning("Query %s: no candidate below DRAQ threshold %g", query.id, draq_threshold)
    else:
        logger.info("Query %s: best match %s (draq %.4f)", query.id, best.id, best.draq)
    return AvrResult(query_id=query.id, ranked_candidates=tuple(ranked), best=best, filtered=best is None)
