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
"""Align command implementation."""

import json
from pathlib import Path
from typing import Optional

import click

from avrkit.cli.utils import debug_echo, emit, fail
from avrkit.core.align import Side, cost_matrix, dtw, skip_still_frames
from avrkit.core.context import contextualize_optional
from avrkit.core.errors import AvrError
from avrkit.core.featureio import load_sequence

_SIDES = {'query': Side.FIRST, 'target': Side.SECOND}


@click.command()
@click.option('--query', 'query_path', required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help='Query feature file (.avrf)')
@click.option('--target', 'target_path', required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help='Target feature file (.avrf)')
@click.option('--keep-unwarped', type=click.Choice(sorted(_SIDES)),
              help='Skip still frames so this sequence is kept unwarped')
@click.option('--context/--no-context', default=None, help='Use contextualized features')
@click.option('--out', type=click.Path(dir_okay=False, path_type=Path), help='Output JSON file (default: stdout)')
@click.pass_context
def align(ctx: click.Context, query_path: Path, target_path: Path, keep_unwarped: Optional[str] = None,
          context: Optional[bool] = None, out: Optional[Path] = None):
    """Align two feature sequences with DTW.

    Prints {"path": [[i, j], ...], "cost": float}. Indices are 1-based,
    i into the query and j into the target.

    Example usage:
      avrkit align --query q.avrf --target t.avrf --keep-unwarped target
    """
    cfg = ctx.obj['config']
    context = cfg.context if context is None else context
    try:
        query = load_sequence(query_path)
        target = load_sequence(target_path)
        debug_echo(ctx, f"Aligning {query.id} ({query.T} frames) to {target.id} ({target.T} frames)")
        path, cost = dtw(cost_matrix(contextualize_optional(query, context),
                                     contextualize_optional(target, context)))
        if keep_unwarped is not None:
            path = skip_still_frames(path, _SIDES[keep_unwarped])
        emit(json.dumps({'path': path.to_list(), 'cost': cost}), out)
    except (AvrError, OSError) as e:
        fail(ctx, e)
