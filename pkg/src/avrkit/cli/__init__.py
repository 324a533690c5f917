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
"""CLI interface for avrkit."""

import logging
from pathlib import Path
from typing import Optional

import click

from ..core.config import AvrConfig
from ..core.errors import ConfigError

# Import all command modules
from .commands.align import align
from .commands.avr import avr
from .commands.config import config
from .commands.draq import draq
from .commands.eval import eval_group
from .commands.index import index
from .commands.synth import synth


@click.group()
@click.option('--config', '-c', 'config_path', type=click.Path(dir_okay=False, path_type=Path),
              help='Settings file (defaults to .avrkit.yml in the current directory)')
@click.option('--verbose', '-v', is_flag=True, help='Enable verbose output')
@click.pass_context
def cli(ctx: click.Context, config_path: Optional[Path] = None, verbose: bool = False):
    """avrkit - alignable video retrieval.

    Retrieve clips by embedding similarity, re-rank them by how well they
    align with the query, and align the best match frame by frame.
    """
    ctx.ensure_object(dict)
    ctx.obj['verbose'] = verbose

    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format='%(levelname)s %(name)s: %(message)s',
        force=True,
    )

    if ctx.invoked_subcommand == 'config':
        # config init must work even when the current file is broken
        ctx.obj['config_path'] = config_path
        return

    try:
        ctx.obj['config'] = AvrConfig.load(config_path)
    except ConfigError as e:
        click.echo(f"Error loading configuration: {e}", err=True)
        ctx.exit(1)


cli.add_command(align)
cli.add_command(draq)
cli.add_command(index)
cli.add_command(avr)
cli.add_command(eval_group)
cli.add_command(synth)
cli.add_command(config)


def main():
    """Entry point for the CLI."""
    cli(obj={})
