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
"""AVR command implementation."""

from pathlib import Path
from typing import Optional

import click

from avrkit.cli.utils import debug_echo, emit, fail
from avrkit.core.errors import AvrError
from avrkit.core.featureio import load_manifest, load_sequence
from avrkit.core.pipeline import ManifestSequenceStore, RerankMode, avr_query
from avrkit.core.retrieve import load_index


@click.command()
@click.option('--index', 'index_path', required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path), help='Index file')
@click.option('--manifest', 'manifest_path', required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help='Manifest of the indexed clips')
@click.option('--query', 'query_path', required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path), help='Query feature file (.avrf)')
@click.option('--topk', type=int, help='Number of retrieved candidates')
@click.option('--threshold', type=float, help='DRAQ threshold; "inf" disables filtering')
@click.option('--rerank', type=click.Choice([m.value for m in RerankMode]), help='Candidate ordering')
@click.option('--k', 'num_paths', type=int, help='Number of random paths')
@click.option('--seed', type=int, help='Random path seed')
@click.option('--workers', type=int, help='Threads scoring candidates')
@click.option('--context/--no-context', default=None, help='Use contextualized features')
@click.option('--out', type=click.Path(dir_okay=False, path_type=Path), help='Output JSON file (default: stdout)')
@click.pass_context
def avr(ctx: click.Context, index_path: Path, manifest_path: Path, query_path: Path,
        topk: Optional[int] = None, threshold: Optional[float] = None, rerank: Optional[str] = None,
        num_paths: Optional[int] = None, seed: Optional[int] = None, workers: Optional[int] = None,
        context: Optional[bool] = None, out: Optional[Path] = None):
    """Retrieve, re-rank and align clips for one query.

    Example usage:
      avrkit avr --index index.avri --manifest manifest.json --query q.avrf --out result.json
    """
    try:
        cfg = ctx.obj['config'].update(topk=topk, threshold=threshold, rerank=rerank, num_paths=num_paths,
                                       seed=seed, workers=workers, context=context)
        query = load_sequence(query_path)
        store = ManifestSequenceStore(load_manifest(manifest_path), cfg.cache_size)
        result = avr_query(
            load_index(index_path), store, query,
            topk=cfg.topk, cfg=cfg.path_config(), draq_threshold=cfg.threshold,
            rerank=RerankMode(cfg.rerank), context=cfg.context, workers=cfg.workers,
        )
        if result.best is None:
            debug_echo(ctx, f"No candidate below threshold {cfg.threshold}")
        else:
            debug_echo(ctx, f"Best match {result.best.id} with DRAQ {result.best.draq:.4f}")
        emit(result.to_json(), out)
    except (AvrError, OSError) as e:
        fail(ctx, e)
