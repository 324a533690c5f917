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
"""Config command group implementation."""

from pathlib import Path

import click
import yaml

from avrkit.cli.utils import fail
from avrkit.core.config import CONFIG_FILENAME, AvrConfig
from avrkit.core.errors import ConfigError


@click.group()
def config():
    """Show or create the settings file."""


@config.command('init')
@click.option('--force', is_flag=True, help='Overwrite an existing settings file')
@click.pass_context
def init(ctx: click.Context, force: bool = False):
    """Write the default settings to the settings file."""
    path = ctx.obj.get('config_path') or Path.cwd() / CONFIG_FILENAME
    if path.exists() and not force:
        click.echo(f"Error: {path} already exists (use --force to overwrite)", err=True)
        ctx.exit(1)
    try:
        AvrConfig().save(path)
    except OSError as e:
        fail(ctx, e)
    click.echo(f"Wrote default settings to {path}")


@config.command('show')
@click.pass_context
def show(ctx: click.Context):
    """Print the effective settings."""
    try:
        cfg = AvrConfig.load(ctx.obj.get('config_path'))
    except ConfigError as e:
        fail(ctx, e)
    else:
        click.echo(yaml.safe_dump({'settings': cfg.settings()}, default_flow_style=False), nl=False)
