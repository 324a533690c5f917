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
"""Synthetic corpus command implementation."""

from dataclasses import replace
from pathlib import Path
from typing import Optional

import click

from avrkit.cli.utils import debug_echo, fail
from avrkit.core.errors import AvrError
from avrkit.core.synth import SyntheticSpec, generate_synthetic, load_synthetic_spec


@click.group()
def synth():
    """Generate synthetic alignable corpora."""


@synth.command('generate')
@click.option('--spec', 'spec_path', type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help='Corpus spec in JSON or YAML (default: built-in defaults)')
@click.option('--seed', type=int, help='Override the spec seed')
@click.option('--out', required=True, type=click.Path(file_okay=False, path_type=Path), help='Output directory')
@click.pass_context
def generate(ctx: click.Context, out: Path, spec_path: Optional[Path] = None, seed: Optional[int] = None):
    """Write clips, labels, manifests, pairs and ground-truth warps.

    Example usage:
      avrkit synth generate --spec spec.yml --out data/
    """
    try:
        spec = load_synthetic_spec(spec_path) if spec_path is not None else SyntheticSpec()
        if seed is not None:
            spec = replace(spec, seed=seed)
        debug_echo(ctx, f"Synthetic spec: {spec}")
        manifest = generate_synthetic(spec, out)
        click.echo(f"Generated {len(manifest)} indexable clips in {out}")
    except (AvrError, OSError) as e:
        fail(ctx, e)
