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
"""Index command group implementation."""

import json
from pathlib import Path
from typing import Optional

import click

from avrkit.cli.utils import debug_echo, emit, fail
from avrkit.core.errors import AvrError
from avrkit.core.featureio import load_manifest, load_sequence
from avrkit.core.retrieve import build_index, load_index, query_topk, save_index


@click.group()
def index():
    """Build and query clip retrieval indexes."""


@index.command('build')
@click.option('--manifest', 'manifest_path', required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path), help='Dataset manifest')
@click.option('--out', required=True, type=click.Path(dir_okay=False, path_type=Path), help='Index file to write')
@click.pass_context
def build(ctx: click.Context, manifest_path: Path, out: Path):
    """Embed every clip of a manifest and write an index.

    Example usage:
      avrkit index build --manifest data/manifest.json --out data/index.avri
    """
    try:
        manifest = load_manifest(manifest_path)
        debug_echo(ctx, f"Embedding {len(manifest)} clips")
        built = build_index(manifest)
        save_index(built, out)
        flagged = int(built.stats.flagged.sum())
        if flagged:
            debug_echo(ctx, f"{flagged} dimensions have zero spread")
        click.echo(f"Indexed {len(built)} clips of dimension {built.dimension} into {out}")
    except (AvrError, OSError) as e:
        fail(ctx, e)


@index.command('query')
@click.option('--index', 'index_path', required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path), help='Index file')
@click.option('--query', 'query_path', required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path), help='Query feature file (.avrf)')
@click.option('--topk', type=int, help='Number of results')
@click.option('--out', type=click.Path(dir_okay=False, path_type=Path), help='Output JSON file (default: stdout)')
@click.pass_context
def query(ctx: click.Context, index_path: Path, query_path: Path, topk: Optional[int] = None,
          out: Optional[Path] = None):
    """Print the most similar indexed clips as [{"id", "similarity"}, ...]."""
    try:
        cfg = ctx.obj['config'].update(topk=topk)
        hits = query_topk(load_index(index_path), load_sequence(query_path), cfg.topk)
        emit(json.dumps([{'id': seq_id, 'similarity': sim} for seq_id, sim in hits], indent=2), out)
    except (AvrError, OSError) as e:
        fail(ctx, e)
