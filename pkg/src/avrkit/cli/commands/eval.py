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
"""Evaluation command group implementation."""

import json
from pathlib import Path
from typing import List, Optional

import click

from avrkit.cli.utils import debug_echo, emit, fail, parse_float_list, parse_int_list
from avrkit.core.draq import Indicator
from avrkit.core.errors import AvrError
from avrkit.core.evalbench import (
    DEFAULT_PERCENTILES,
    ApaMode,
    CpeMode,
    context_ablation,
    cycle_report,
    load_labeled_pairs,
    rerank_recall,
    sweep_indicators,
    topk_apa,
)
from avrkit.core.featureio import load_dataset, load_manifest
from avrkit.core.pipeline import ManifestSequenceStore, RerankMode
from avrkit.core.retrieve import load_index

_existing_file = click.Path(exists=True, dir_okay=False, path_type=Path)
_output_file = click.Path(dir_okay=False, path_type=Path)


def _parse_indicators(ctx: click.Context, param: click.Parameter, value: Optional[str]) -> Optional[List[Indicator]]:
    if value is None:
        return None
    try:
        return [Indicator(item.strip()) for item in value.split(',') if item.strip()]
    except ValueError as e:
        raise click.BadParameter(str(e)) from None


@click.group('eval')
def eval_group():
    """Evaluate alignment and alignable retrieval."""


@eval_group.command('cycle')
@click.option('--index', 'index_path', type=_existing_file, help='Index file (not needed with --oracle)')
@click.option('--manifest', 'manifest_path', required=True, type=_existing_file,
              help='Manifest of the candidate clips')
@click.option('--queries', 'queries_path', required=True, type=_existing_file,
              help='Manifest of the query clips, with label sidecars')
@click.option('--oracle', is_flag=True, help='Sample same-action candidates instead of retrieving them')
@click.option('--topk', type=int, help='Number of candidates per query')
@click.option('--threshold', type=float, help='DRAQ threshold')
@click.option('--cpe-mode', type=click.Choice([m.value for m in CpeMode]), help='Cycle phase error variant')
@click.option('--seed', type=int, help='Random path and oracle seed')
@click.option('--out', type=_output_file, help='Output JSON report (default: stdout)')
@click.pass_context
def cycle(ctx: click.Context, manifest_path: Path, queries_path: Path, index_path: Optional[Path] = None,
          oracle: bool = False, topk: Optional[int] = None, threshold: Optional[float] = None,
          cpe_mode: Optional[str] = None, seed: Optional[int] = None, out: Optional[Path] = None):
    """Frame position and cycle phase errors of the AVR pipeline."""
    if index_path is None and not oracle:
        fail(ctx, click.UsageError("--index is required unless --oracle is given"))
    try:
        cfg = ctx.obj['config'].update(topk=topk, threshold=threshold, cpe_mode=cpe_mode, seed=seed)
        manifest = load_manifest(manifest_path)
        store = ManifestSequenceStore(manifest, cfg.cache_size)
        sequences, labels = load_dataset(load_manifest(queries_path))
        queries = [(seq, labels.get(seq_id)) for seq_id, seq in sequences.items()]
        actions = None
        if oracle:
            actions = {seq_id: lab.action for seq_id, lab in manifest.load_labels().items()}
            debug_echo(ctx, f"Oracle candidates from {len(actions)} labelled clips")
        report = cycle_report(
            queries, store, cfg.path_config(),
            index=None if oracle else load_index(index_path),
            oracle_actions=actions, topk=cfg.topk, draq_threshold=cfg.threshold,
            rerank=RerankMode(cfg.rerank), context=cfg.context,
            cpe_mode=CpeMode(cfg.cpe_mode), workers=cfg.workers,
        )
        debug_echo(ctx, f"{len(report.entries)} queries evaluated, {len(report.filtered)} filtered")
        emit(report.to_json(), out)
    except (AvrError, OSError) as e:
        fail(ctx, e)


@eval_group.command('sweep')
@click.option('--pairs', 'pairs_path', required=True, type=_existing_file, help='Pairs file (pairs.json)')
@click.option('--percentiles', callback=parse_float_list, help='Comma separated percentiles (default: 5,10,...,100)')
@click.option('--indicators', callback=_parse_indicators,
              help=f"Comma separated indicators from {', '.join(i.value for i in Indicator)}")
@click.option('--apa-mode', type=click.Choice([m.value for m in ApaMode]), help='APA averaging')
@click.option('--auc-out', type=_output_file, help='Also write per-indicator ROC-AUC as JSON')
@click.option('--out', type=_output_file, help='Output CSV (default: stdout)')
@click.pass_context
def sweep(ctx: click.Context, pairs_path: Path, percentiles: Optional[List[float]] = None,
          indicators: Optional[List[Indicator]] = None, apa_mode: Optional[str] = None,
          auc_out: Optional[Path] = None, out: Optional[Path] = None):
    """Mean APA of the pairs below each indicator percentile."""
    try:
        cfg = ctx.obj['config'].update(apa_mode=apa_mode)
        pairs = load_labeled_pairs(pairs_path)
        debug_echo(ctx, f"Evaluating {len(pairs)} pairs")
        report = sweep_indicators(
            pairs,
            indicators=indicators or list(Indicator),
            percentiles=percentiles or DEFAULT_PERCENTILES,
            cfg=cfg.path_config(), context=cfg.context, apa_mode=ApaMode(cfg.apa_mode),
        )
        emit(report.to_csv(), out)
        if auc_out is not None:
            emit(json.dumps({ind.value: auc for ind, auc in report.auc.items()}, indent=2), auc_out)
    except (AvrError, OSError) as e:
        fail(ctx, e)


@eval_group.command('recall')
@click.option('--index', 'index_path', required=True, type=_existing_file, help='Index file')
@click.option('--manifest', 'manifest_path', required=True, type=_existing_file,
              help='Manifest of the indexed clips, with label sidecars')
@click.option('--queries', 'queries_path', type=_existing_file,
              help='Manifest of the query clips (default: every indexed clip)')
@click.option('--topk-rerank', type=int, default=25, show_default=True, help='Retrievals re-ranked by DRAQ')
@click.option('--ks', callback=parse_int_list, help='Comma separated k values (default: 1,10)')
@click.option('--out', type=_output_file, help='Output JSON report (default: stdout)')
@click.pass_context
def recall(ctx: click.Context, index_path: Path, manifest_path: Path, queries_path: Optional[Path] = None,
           topk_rerank: int = 25, ks: Optional[List[int]] = None, out: Optional[Path] = None):
    """Recall@k of retrieval with and without DRAQ re-ranking."""
    try:
        cfg = ctx.obj['config']
        manifest = load_manifest(manifest_path)
        actions = {seq_id: lab.action for seq_id, lab in manifest.load_labels().items()}
        sequences, labels = load_dataset(load_manifest(queries_path) if queries_path else manifest)
        queries = [(seq, labels[seq_id].action if seq_id in labels else None) for seq_id, seq in sequences.items()]
        table = rerank_recall(
            load_index(index_path), ManifestSequenceStore(manifest, cfg.cache_size), queries, actions,
            topk_rerank=topk_rerank, ks=ks or (1, 10), cfg=cfg.path_config(),
            context=cfg.context, workers=cfg.workers,
        )
        emit(table.to_json(), out)
    except (AvrError, OSError) as e:
        fail(ctx, e)


@eval_group.command('ablation')
@click.option('--pairs', 'pairs_path', required=True, type=_existing_file, help='Pairs file (pairs.json)')
@click.option('--all-pairs', is_flag=True, help='Include pairs of different actions')
@click.option('--out', type=_output_file, help='Output JSON report (default: stdout)')
@click.pass_context
def ablation(ctx: click.Context, pairs_path: Path, all_pairs: bool = False, out: Optional[Path] = None):
    """Mean APA of DTW alignments with and without contextualization."""
    try:
        cfg = ctx.obj['config']
        pairs = load_labeled_pairs(pairs_path)
        if not all_pairs:
            pairs = [p for p in pairs if p.alignable]
        with_context, without_context = context_ablation(pairs, ApaMode(cfg.apa_mode))
        emit(json.dumps({
            'num_pairs': len(pairs),
            'apa_context': with_context,
            'apa_centered_raw': without_context,
        }, indent=2), out)
    except (AvrError, OSError) as e:
        fail(ctx, e)


@eval_group.command('topk-apa')
@click.option('--index', 'index_path', required=True, type=_existing_file, help='Index file')
@click.option('--manifest', 'manifest_path', required=True, type=_existing_file,
              help='Manifest of the indexed clips, with label sidecars')
@click.option('--queries', 'queries_path', required=True, type=_existing_file,
              help='Manifest of the query clips, with label sidecars')
@click.option('--topk', type=int, help='Number of retrieved candidates per query')
@click.option('--out', type=_output_file, help='Output JSON report (default: stdout)')
@click.pass_context
def topk_apa_command(ctx: click.Context, index_path: Path, manifest_path: Path, queries_path: Path,
                     topk: Optional[int] = None, out: Optional[Path] = None):
    """Mean APA over the top-k candidates against the APA of the lowest-DRAQ one."""
    try:
        cfg = ctx.obj['config'].update(topk=topk)
        manifest = load_manifest(manifest_path)
        phases = {seq_id: lab.phases for seq_id, lab in manifest.load_labels().items() if lab.phases is not None}
        sequences, labels = load_dataset(load_manifest(queries_path))
        queries = [(seq, labels[seq_id]) for seq_id, seq in sequences.items() if seq_id in labels]
        average, top = topk_apa(
            queries, load_index(index_path), ManifestSequenceStore(manifest, cfg.cache_size), phases,
            topk=cfg.topk, cfg=cfg.path_config(), context=cfg.context,
        )
        emit(json.dumps({'num_queries': len(queries), 'topk': cfg.topk,
                         'apa_average': average, 'apa_top_draq': top}, indent=2), out)
    except (AvrError, OSError) as e:
        fail(ctx, e)
