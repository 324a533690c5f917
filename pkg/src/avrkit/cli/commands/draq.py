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
"""DRAQ command implementation."""

import json
from pathlib import Path
from typing import Optional

import click

from avrkit.cli.utils import debug_echo, emit, fail
from avrkit.core.align import cost_matrix
from avrkit.core.context import contextualize_optional
from avrkit.core.draq import SamplerMode, kendall_tau_indicator, pair_rng, score_pair
from avrkit.core.errors import AvrError
from avrkit.core.featureio import load_sequence


@click.command()
@click.option('--query', 'query_path', required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help='Query feature file (.avrf)')
@click.option('--target', 'target_path', required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help='Target feature file (.avrf)')
@click.option('--k', 'num_paths', type=int, help='Number of random paths (default: 100)')
@click.option('--seed', type=int, help='Random path seed')
@click.option('--sampler', type=click.Choice([m.value for m in SamplerMode]), help='Random path sampler')
@click.option('--context/--no-context', default=None, help='Use contextualized features')
@click.option('--out', type=click.Path(dir_okay=False, path_type=Path), help='Output JSON file (default: stdout)')
@click.pass_context
def draq(ctx: click.Context, query_path: Path, target_path: Path, num_paths: Optional[int] = None,
         seed: Optional[int] = None, sampler: Optional[str] = None, context: Optional[bool] = None,
         out: Optional[Path] = None):
    """Score how well two feature sequences align.

    Prints the DRAQ value with the DTW cost and negated Kendall tau
    indicators. Lower is more alignable for all three. neg_tau is null
    for a single-frame query.
    """
    try:
        cfg = ctx.obj['config'].update(num_paths=num_paths, seed=seed, sampler_mode=sampler, context=context)
        query = load_sequence(query_path)
        target = load_sequence(target_path)
        a = contextualize_optional(query, cfg.context)
        b = contextualize_optional(target, cfg.context)
        path_cfg = cfg.path_config()
        scores = score_pair(cost_matrix(a, b), path_cfg, pair_rng(path_cfg.seed, query.id, target.id))
        debug_echo(ctx, f"Mean random path cost {scores.random_cost:.6f} over {path_cfg.num_paths} paths")
        emit(json.dumps({
            'draq': scores.draq.value,
            'dtw_cost': scores.dtw_cost,
            'neg_tau': kendall_tau_indicator(a, b).value if a.T >= 2 else None,
            'degenerate': scores.draq.degenerate,
        }), out)
    except (AvrError, OSError) as e:
        fail(ctx, e)
