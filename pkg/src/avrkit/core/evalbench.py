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
"""Evaluation protocols for alignment and alignable retrieval.

- Aligned phase agreement (APA): fraction of aligned frame pairs whose phase
  labels agree.
- Cycle consistency: query labels are warped onto the match (match kept
  unwarped) and back onto the query (query kept unwarped). Frame positions
  give the frame position error (FPE, mean squared error in frames) and
  phase labels the cycle phase error (CPE).
- Indicator sweeps: mean APA of the pairs whose indicator value is at or
  below a percentile of that indicator, plus ROC-AUC of each indicator for
  separating alignable from non-alignable pairs.
- Recall@k of retrieval before and after DRAQ re-ranking.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import rankdata

from ..protocol.search import SequenceStore
from .align import AlignmentPath, Side, cost_matrix, dtw, warp_labels
from .context import contextualize_optional
from .draq import Indicator, RandomPathConfig, kendall_tau_indicator, pair_rng, score_pair
from .errors import AvrError, FormatError, LabelError
from .featureio import FeatureSequence, SequenceLabels, load_dataset, load_manifest
from .pipeline import (
    DEFAULT_THRESHOLD,
    DEFAULT_TOPK,
    DictSequenceStore,
    RerankMode,
    ScoredCandidate,
    rerank_candidates,
    retrieve_candidates,
    select_best,
)
from .retrieve import RetrievalIndex

__all__ = [
    'ApaMode',
    'CpeMode',
    'DEFAULT_PERCENTILES',
    'CycleEntry',
    'CycleReport',
    'LabeledPair',
    'PairEvaluation',
    'SweepRow',
    'SweepReport',
    'RecallTable',
    'apa',
    'cycle_consistency',
    'cycle_report',
    'oracle_candidates',
    'evaluate_pair',
    'indicator_auc',
    'sweep_indicators',
    'context_ablation',
    'rerank_recall',
    'topk_apa',
    'load_labeled_pairs',
]

logger = logging.getLogger(__name__)

DEFAULT_PERCENTILES = tuple(range(5, 101, 5))


class ApaMode(str, Enum):
    """TUPLES averages over path tuples, FRAMES over frames of the second sequence."""
    TUPLES = 'tuples'
    FRAMES = 'frames'


class CpeMode(str, Enum):
    """ABSOLUTE is the mean absolute phase index difference, MISMATCH the mismatch rate."""
    ABSOLUTE = 'absolute'
    MISMATCH = 'mismatch'


def _check_cover(labels: Sequence[Any], length: int, what: str) -> None:
    if len(labels) != length:
        raise LabelError(f"{what} has {len(labels)} labels for {length} frames")


def apa(a_labels: Sequence[int], b_labels: Sequence[int], p: AlignmentPath,
        mode: ApaMode = ApaMode.TUPLES) -> float:
    """Aligned phase agreement of a path, in [0, 1].

    Raises:
        LabelError: If the labels do not cover the path's sequences.
    """
    n, m = p.end
    _check_cover(a_labels, n, "First sequence")
    _check_cover(b_labels, m, "Second sequence")
    if ApaMode(mode) is ApaMode.FRAMES:
        warped = warp_labels(p, a_labels, Side.SECOND).values
        return float(np.mean([x == y for x, y in zip(warped, b_labels)]))
    return float(np.mean([a_labels[i - 1] == b_labels[j - 1] for i, j in p.tuples]))


@dataclass(frozen=True)
class CycleEntry:
    """Cycle errors of one query and its match; cpe is None without phases."""
    query_id: str
    match_id: str
    fpe: float
    cpe: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {'query_id': self.query_id, 'match_id': self.match_id, 'fpe': self.fpe, 'cpe': self.cpe}


@dataclass(frozen=True)
class CycleReport:
    """Per-query cycle errors in query id order and their means."""
    entries: Tuple[CycleEntry, ...]
    filtered: Tuple[str, ...] = ()

    @property
    def mean_fpe(self) -> Optional[float]:
        if not self.entries:
            return None
        return float(np.mean([e.fpe for e in self.entries]))

    @property
    def mean_cpe(self) -> Optional[float]:
        cpes = [e.cpe for e in self.entries if e.cpe is not None]
        return float(np.mean(cpes)) if cpes else None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'entries': [e.to_dict() for e in self.entries],
            'filtered': list(self.filtered),
            'mean_fpe': self.mean_fpe,
            'mean_cpe': self.mean_cpe,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def cycle_consistency(query: FeatureSequence, match: FeatureSequence,
                      phases: Optional[Sequence[int]] = None, *,
                      path: Optional[AlignmentPath] = None, context: bool = True,
                      cpe_mode: CpeMode = CpeMode.ABSOLUTE,
                      require_phases: bool = False) -> CycleEntry:
    """Warp query labels onto the match and back, and measure what changed.

    Both warps use the same DTW path between query (first) and match
    (second): the first keeps the match unwarped, the second the query, so
    the cycle-warped labels have the query's length.

    Args:
        query: The query sequence.
        match: The matched sequence.
        phases: Query phase labels; CPE is only computed when given.
        path: A precomputed query-to-match DTW path.
        context: Use contextualized features when computing the path.
        cpe_mode: Absolute phase index error or mismatch rate.
        require_phases: Raise instead of skipping CPE when phases are missing.

    Raises:
        LabelError: If phases are required but missing, or do not cover the query.
    """
    if path is None:
        path, _ = dtw(cost_matrix(contextualize_optional(query, context),
                                  contextualize_optional(match, context)))

    def cycle(labels: Sequence[Any]) -> Tuple[Any, ...]:
        on_match = warp_labels(path, labels, Side.SECOND).values
        return warp_labels(path, on_match, Side.FIRST).values

    positions = np.arange(1, query.T + 1, dtype=np.float64)
    back = np.asarray(cycle(list(positions)), dtype=np.float64)
    fpe = float(np.mean((positions - back) ** 2))

    cpe = None
    if phases is None:
        if require_phases:
            raise LabelError(f"Query '{query.id}' has no phase labels for CPE")
    else:
        _check_cover(phases, query.T, f"Query '{query.id}'")
        original = np.asarray(phases)
        cycled = np.asarray(cycle(list(phases)))
        if CpeMode(cpe_mode) is CpeMode.MISMATCH:
            cpe = float(np.mean(original != cycled))
        else:
            cpe = float(np.mean(np.abs(original - cycled)))
    return CycleEntry(query_id=query.id, match_id=match.id, fpe=fpe, cpe=cpe)


def oracle_candidates(actions: Mapping[str, Optional[str]], query_id: str,
                      query_action: Optional[str], topk: int,
                      rng: np.random.Generator) -> List[str]:
    """Sample up to topk clips of the query's action, without replacement.

    Returns an empty list when no other clip has that action.
    """
    if query_action is None:
        return []
    pool = sorted(seq_id for seq_id, action in actions.items()
                  if action == query_action and seq_id != query_id)
    if not pool:
        return []
    chosen = rng.choice(len(pool), size=min(topk, len(pool)), replace=False)
    return [pool[t] for t in chosen]


def cycle_report(queries: Sequence[Tuple[FeatureSequence, Optional[SequenceLabels]]],
                 sequences: SequenceStore, cfg: RandomPathConfig, *,
                 index: Optional[RetrievalIndex] = None,
                 oracle_actions: Optional[Mapping[str, Optional[str]]] = None,
                 topk: int = DEFAULT_TOPK, draq_threshold: float = DEFAULT_THRESHOLD,
                 rerank: RerankMode = RerankMode.DRAQ, context: bool = True,
                 cpe_mode: CpeMode = CpeMode.ABSOLUTE, workers: int = 1) -> CycleReport:
    """Cycle consistency of the AVR pipeline over a set of queries.

    Candidates come from the retrieval index, or, when oracle_actions is
    given, from :func:`oracle_candidates` (they carry a retrieval similarity
    of 0.0). Queries without a match below the threshold are listed as
    filtered.
    """
    if index is None and oracle_actions is None:
        raise AvrError("cycle_report needs a retrieval index or oracle actions")

    entries = []
    filtered = []
    for query, labels in sorted(queries, key=lambda item: item[0].id):
        if oracle_actions is not None:
            rng = pair_rng(cfg.seed, 'oracle', query.id)
            action = labels.action if labels is not None else None
            candidates = [(cand_id, 0.0) for cand_id in
                          oracle_candidates(oracle_actions, query.id, action, topk, rng)]
        else:
            candidates = retrieve_candidates(index, query, topk)

        ranked = rerank_candidates(query, candidates, sequences, cfg, rerank, context, workers)
        best = select_best(ranked, draq_threshold)
        if best is None:
            filtered.append(query.id)
            continue
        chosen = next(c for c in ranked if c.id == best.id)
        entry = cycle_consistency(
            query, sequences.get(best.id),
            labels.phases if labels is not None else None,
            path=chosen.path, context=context, cpe_mode=cpe_mode,
        )
        logger.debug("Cycle %s -> %s: fpe=%.4f cpe=%s", query.id, best.id, entry.fpe, entry.cpe)
        entries.append(entry)

    report = CycleReport(entries=tuple(entries), filtered=tuple(filtered))
    logger.info("Cycle report: %d queries evaluated, %d filtered", len(entries), len(filtered))
    return report


@dataclass(frozen=True)
class LabeledPair:
    """Two sequences with phase labels; alignable is None when unknown."""
    a: FeatureSequence
    b: FeatureSequence
    phases_a: Sequence[int]
    phases_b: Sequence[int]
    alignable: Optional[bool] = None


@dataclass(frozen=True)
class PairEvaluation:
    """APA and indicator values of one pair."""
    a_id: str
    b_id: str
    apa: float
    values: Mapping[Indicator, float]
    alignable: Optional[bool] = None


def evaluate_pair(pair: LabeledPair, cfg: RandomPathConfig, context: bool = True,
                  apa_mode: ApaMode = ApaMode.TUPLES) -> PairEvaluation:
    """Align a pair with DTW and compute its APA and indicators.

    The Kendall tau indicator is left out when the first clip has a single
    frame.
    """
    a_ctx = contextualize_optional(pair.a, context)
    b_ctx = contextualize_optional(pair.b, context)
    scores = score_pair(cost_matrix(a_ctx, b_ctx), cfg, pair_rng(cfg.seed, pair.a.id, pair.b.id))
    values = {
        Indicator.DRAQ: scores.draq.value,
        Indicator.DTW_COST: scores.dtw_cost,
    }
    if a_ctx.T >= 2:
        values[Indicator.NEG_KENDALL_TAU] = kendall_tau_indicator(a_ctx, b_ctx).value
    return PairEvaluation(
        a_id=pair.a.id,
        b_id=pair.b.id,
        apa=apa(pair.phases_a, pair.phases_b, scores.path, apa_mode),
        values=values,
        alignable=pair.alignable,
    )


def indicator_auc(values: Sequence[float], alignable: Sequence[bool]) -> Optional[float]:
    """ROC-AUC of a lower-is-better indicator for finding alignable pairs.

    Ties count one half. Returns None unless both classes are present.
    """
    values = np.asarray(values, dtype=np.float64)
    positive = np.asarray(alignable, dtype=bool)
    n_pos = int(positive.sum())
    n_neg = int((~positive).sum())
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = rankdata(values)
    return float((ranks[~positive].sum() - n_neg * (n_neg + 1) / 2) / (n_pos * n_neg))


@dataclass(frozen=True)
class SweepRow:
    indicator: Indicator
    percentile: float
    mean_apa: Optional[float]
    n_pairs: int


@dataclass(frozen=True)
class SweepReport:
    """Mean APA below indicator percentiles, and per-indicator ROC-AUC."""
    rows: Tuple[SweepRow, ...]
    auc: Mapping[Indicator, Optional[float]] = field(default_factory=dict)
    evaluations: Tuple[PairEvaluation, ...] = ()

    def curve(self, indicator: Indicator) -> List[Tuple[float, Optional[float]]]:
        return [(r.percentile, r.mean_apa) for r in self.rows if r.indicator is Indicator(indicator)]

    def to_csv(self) -> str:
        """CSV with columns indicator, percentile, mean_apa, n_pairs; absent entries are empty."""
        out = io.StringIO()
        writer = csv.writer(out, lineterminator='\n')
        writer.writerow(['indicator', 'percentile', 'mean_apa', 'n_pairs'])
        for row in self.rows:
            writer.writerow([
                row.indicator.value,
                f"{row.percentile:g}",
                '' if row.mean_apa is None else repr(row.mean_apa),
                row.n_pairs,
            ])
        return out.getvalue()


def sweep_indicators(pairs: Sequence[LabeledPair],
                     indicators: Sequence[Indicator] = tuple(Indicator),
                     percentiles: Sequence[float] = DEFAULT_PERCENTILES,
                     cfg: Optional[RandomPathConfig] = None, context: bool = True,
                     apa_mode: ApaMode = ApaMode.TUPLES) -> SweepReport:
    """Mean APA of the pairs at or below each percentile of each indicator.

    Pair sets grow with the percentile, so they are nested. A percentile
    without pairs yields an absent (None) mean. Pairs without a value for an
    indicator are left out of its rows and its AUC.
    """
    cfg = cfg or RandomPathConfig()
    for p in percentiles:
        if not 0 <= p <= 100:
            raise AvrError(f"Percentile {p} outside [0, 100]")
    evaluations = tuple(evaluate_pair(pair, cfg, context, apa_mode) for pair in pairs)
    apas = np.array([e.apa for e in evaluations], dtype=np.float64)

    rows = []
    auc: Dict[Indicator, Optional[float]] = {}
    for indicator in map(Indicator, indicators):
        scored = [t for t, e in enumerate(evaluations) if indicator in e.values]
        values = np.array([evaluations[t].values[indicator] for t in scored], dtype=np.float64)
        ind_apas = apas[scored]
        for p in percentiles:
            if values.size == 0:
                rows.append(SweepRow(indicator, float(p), None, 0))
                continue
            selected = values <= np.percentile(values, p)
            count = int(selected.sum())
            rows.append(SweepRow(indicator, float(p), float(ind_apas[selected].mean()) if count else None, count))
        labels = [evaluations[t].alignable for t in scored]
        auc[indicator] = indicator_auc(values, [bool(lab) for lab in labels]) \
            if labels and all(lab is not None for lab in labels) else None
    return SweepReport(rows=tuple(rows), auc=auc, evaluations=evaluations)


def context_ablation(pairs: Sequence[LabeledPair], apa_mode: ApaMode = ApaMode.TUPLES) -> Tuple[float, float]:
    """Mean APA of DTW alignments with and without the cumulative context."""
    if not pairs:
        raise AvrError("context_ablation needs at least one pair")
    results = []
    for enabled in (True, False):
        scores = []
        for pair in pairs:
            path, _ = dtw(cost_matrix(contextualize_optional(pair.a, enabled),
                                      contextualize_optional(pair.b, enabled)))
            scores.append(apa(pair.phases_a, pair.phases_b, path, apa_mode))
        results.append(float(np.mean(scores)))
    return results[0], results[1]


@dataclass(frozen=True)
class RecallTable:
    """Recall@k of the retrieval order and of the DRAQ re-ranked order."""
    ks: Tuple[int, ...]
    before: Mapping[int, float]
    after: Mapping[int, float]
    num_queries: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            'num_queries': self.num_queries,
            'recall': [{'k': k, 'retrieval': self.before[k], 'draq_rerank': self.after[k]} for k in self.ks],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def rerank_recall(index: RetrievalIndex, sequences: SequenceStore,
                  queries: Sequence[Tuple[FeatureSequence, Optional[str]]],
                  actions: Mapping[str, Optional[str]], topk_rerank: int = 25,
                  ks: Sequence[int] = (1, 10), cfg: Optional[RandomPathConfig] = None,
                  context: bool = True, workers: int = 1) -> RecallTable:
    """Recall@k before and after DRAQ re-ranking of the top retrievals.

    A query counts as a hit at k when one of its first k results has the
    query's action. Re-ranking permutes the top topk_rerank results and
    leaves the rest of the max(ks) retrievals in place, so recall at
    k >= topk_rerank is unchanged.
    """
    cfg = cfg or RandomPathConfig()
    ks = tuple(sorted(set(int(k) for k in ks)))
    if not ks or ks[0] < 1 or topk_rerank < 1:
        raise AvrError("ks and topk_rerank must be >= 1")
    depth = max(ks[-1], topk_rerank)
    hits_before = {k: 0 for k in ks}
    hits_after = {k: 0 for k in ks}
    for query, action in queries:
        retrieved = retrieve_candidates(index, query, depth)
        before = [cand_id for cand_id, _ in retrieved]
        after = [c.id for c in rerank_candidates(query, retrieved[:topk_rerank], sequences, cfg,
                                                 RerankMode.DRAQ, context, workers)]
        after += before[topk_rerank:]
        for k in ks:
            if action is not None:
                hits_before[k] += any(actions.get(c) == action for c in before[:k])
                hits_after[k] += any(actions.get(c) == action for c in after[:k])

    total = len(queries)
    return RecallTable(
        ks=ks,
        before={k: hits_before[k] / total if total else 0.0 for k in ks},
        after={k: hits_after[k] / total if total else 0.0 for k in ks},
        num_queries=total,
    )


def topk_apa(queries: Sequence[Tuple[FeatureSequence, SequenceLabels]], index: RetrievalIndex,
             sequences: SequenceStore, phases: Mapping[str, Sequence[int]],
             topk: int = DEFAULT_TOPK, cfg: Optional[RandomPathConfig] = None,
             context: bool = True) -> Tuple[float, float]:
    """Average APA over all top-k candidates, and APA of the lowest-DRAQ candidate.

    Candidates without phase labels are skipped.
    """
    cfg = cfg or RandomPathConfig()
    all_scores: List[float] = []
    top_scores: List[float] = []
    for query, labels in queries:
        if labels.phases is None:
            raise LabelError(f"Query '{query.id}' has no phase labels")
        ranked: List[ScoredCandidate] = rerank_candidates(
            query, retrieve_candidates(index, query, topk), sequences, cfg, RerankMode.DRAQ, context)
        scored = [apa(labels.phases, phases[c.id], c.path) for c in ranked if c.id in phases]
        if scored:
            all_scores.extend(scored)
            top_scores.append(scored[0])
    if not all_scores:
        raise AvrError("No labelled candidates to evaluate")
    return float(np.mean(all_scores)), float(np.mean(top_scores))


def load_labeled_pairs(path: Union[str, Path]) -> List[LabeledPair]:
    """Read a pairs file and resolve its pairs against the referenced manifest.

    A pair is alignable when both clips carry the same action; it is left
    unknown when either action is missing.

    Raises:
        FormatError: If the pairs file is malformed.
        MissingSequenceError: If a pair names an id outside the manifest.
        LabelError: If a clip of a pair has no phase labels.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding='utf-8'))
    except json.JSONDecodeError as e:
        raise FormatError(f"Malformed JSON: {e.msg}", path, e.pos) from e
    if not isinstance(data, dict) or not isinstance(data.get('manifest'), str) \
            or not isinstance(data.get('pairs'), list):
        raise FormatError("Pairs file needs a 'manifest' string and a 'pairs' list", path)

    sequences, labels = load_dataset(load_manifest(path.parent / data['manifest']))
    store = DictSequenceStore(sequences)

    def phases_of(seq_id: str) -> Sequence[int]:
        seq_labels = labels.get(seq_id)
        if seq_labels is None or seq_labels.phases is None:
            raise LabelError(f"Clip '{seq_id}' has no phase labels")
        return seq_labels.phases

    pairs = []
    for raw in data['pairs']:
        if not isinstance(raw, list) or len(raw) != 2 or not all(isinstance(x, str) for x in raw):
            raise FormatError("Each pair must be a list of two ids", path)
        a_id, b_id = raw
        a_action = labels[a_id].action if a_id in labels else None
        b_action = labels[b_id].action if b_id in labels else None
        pairs.append(LabeledPair(
            a=store.get(a_id),
            b=store.get(b_id),
            phases_a=phases_of(a_id),
            phases_b=phases_of(b_id),
            alignable=None if a_action is None or b_action is None else a_action == b_action,
        ))
    logger.debug("Loaded %d pairs from %s", len(pairs), path)
    return pairs
