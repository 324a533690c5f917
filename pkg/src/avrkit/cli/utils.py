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
"""Utility functions for CLI commands."""

from pathlib import Path
from typing import List, Optional

import click

from ..core.featureio import atomic_write_bytes


def debug_echo(ctx: click.Context, message: str) -> None:
    """Echo a debug message only if verbose mode is enabled.

    Args:
        ctx: The Click context object.
        message: The message to echo.
    """
    if ctx.obj.get('verbose', False):
        click.echo(f"Debug: {message}", err=True)


def fail(ctx: click.Context, error: Exception) -> None:
    """Report an error on stderr and exit with status 1."""
    click.echo(f"Error: {error}", err=True)
    ctx.exit(1)


def emit(text: str, out: Optional[Path]) -> None:
    """Write a report to a file, or to stdout when no file is given."""
    if out is None:
        click.echo(text)
    else:
        if not text.endswith('\n'):
            text += '\n'
        atomic_write_bytes(out, text.encode('utf-8'))


def _parse_list(value: str, convert, what: str) -> list:
    items = [item.strip() for item in value.split(',') if item.strip()]
    if not items:
        raise click.BadParameter(f"expected a comma separated list of {what}")
    try:
        return [convert(item) for item in items]
    except ValueError:
        raise click.BadParameter(f"'{value}' is not a comma separated list of {what}") from None


def parse_int_list(ctx: click.Context, param: click.Parameter, value: Optional[str]) -> Optional[List[int]]:
    """Click callback for options like `--ks 1,10`."""
    if value is None:
        return None
    return _parse_list(value, int, 'integers')


def parse_float_list(ctx: click.Context, param: click.Parameter, value: Optional[str]) -> Optional[List[float]]:
    """Click callback for options like `--percentiles 5,10,50`."""
    if value is None:
        return None
    return _parse_list(value, float, 'numbers')
