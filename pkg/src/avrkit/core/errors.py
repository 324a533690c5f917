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
"""
Error types raised by avrkit.

Every error derives from AvrError, so callers (the CLI in particular) can
catch one type and report the message.
"""

from pathlib import Path
from typing import Optional, Union

__all__ = [
    'AvrError',
    'FormatError',
    'IndexFormatError',
    'ManifestError',
    'DimensionError',
    'LabelError',
    'ConfigError',
    'MissingSequenceError',
]


class AvrError(ValueError):
    """Base class for all avrkit errors."""


class FormatError(AvrError):
    """A file does not conform to its documented format.

    Args:
        message: Human readable description of the problem.
        path: The offending file, if known.
        offset: Byte offset where decoding failed, if known.
    """

    def __init__(self, message: str, path: Optional[Union[str, Path]] = None,
                 offset: Optional[int] = None):
        self.path = Path(path) if path is not None else None
        self.offset = offset
        where = []
        if self.path is not None:
            where.append(str(self.path))
        if offset is not None:
            where.append(f"byte offset {offset}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class IndexFormatError(FormatError):
    """A retrieval index file is truncated, corrupt or of the wrong version."""


class ManifestError(AvrError):
    """A dataset manifest is inconsistent (duplicate id, missing file)."""


class DimensionError(AvrError):
    """Feature widths or embedding dimensions do not match."""


class LabelError(AvrError):
    """Labels are missing or do not cover the sequence they belong to."""


class ConfigError(AvrError):
    """Invalid configuration key or value."""


class MissingSequenceError(AvrError):
    """A candidate id cannot be resolved to its frame sequence."""

    def __init__(self, seq_id: str):
        self.seq_id = seq_id
        super().__init__(f"No feature sequence for id '{seq_id}'")
