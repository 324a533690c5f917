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
"""Feature sequences, label sidecars and dataset manifests.

Frame features are stored in the AVRF binary format::

    magic "AVRF" | version u32 = 1 | T u32 | d u32 | T*d float32 (LE, row-major)

All integers are little-endian. Labels live in a JSON sidecar
``{"id": str, "action": str|null, "phases": [int]|null}`` and datasets are
described by a JSON manifest ``{"entries": [{"id", "feature_path",
"label_path"}]}`` whose paths are relative to the manifest file.

Frame indices are 1-based in paths and documentation; arrays are 0-based,
so frame ``j`` of a sequence is ``frames[j - 1]``.
"""

from __future__ import annotations

import json
import logging
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Tuple, Union

import numpy as np

from .errors import FormatError, LabelError, ManifestError

__all__ = [
    'AVRF_MAGIC',
    'AVRF_VERSION',
    'FeatureSequence',
    'SequenceLabels',
    'ManifestEntry',
    'DatasetManifest',
    'load_sequence',
    'save_sequence',
    'load_labels',
    'save_labels',
    'load_manifest',
    'save_manifest',
    'atomic_write_bytes',
    'load_dataset',
]

logger = logging.getLogger(__name__)

AVRF_MAGIC = b'AVRF'
AVRF_VERSION = 1
_HEADER = struct.Struct('<4sIII')
_FLOAT = np.dtype('<f4')

PathLike = Union[str, Path]


@dataclass(frozen=True, eq=False)
class FeatureSequence:
    """A T x d matrix of per-frame features.

    The frame matrix is stored as read-only float32 so a loaded sequence can
    be shared between threads.
    """
    id: str
    frames: np.ndarray

    def __post_init__(self) -> None:
        frames = np.array(self.frames, dtype=np.float32, order='C', copy=True)
        if frames.ndim != 2:
            raise FormatError(f"Sequence '{self.id}' must be a T x d matrix, got shape {frames.shape}")
        if frames.shape[0] < 1 or frames.shape[1] < 1:
            raise FormatError(f"Sequence '{self.id}' needs T >= 1 and d >= 1, got shape {frames.shape}")
        if not np.all(np.isfinite(frames)):
            raise FormatError(f"Sequence '{self.id}' contains a non-finite value")
        frames.setflags(write=False)
        object.__setattr__(self, 'frames', frames)

    @property
    def T(self) -> int:
        """Number of frames."""
        return int(self.frames.shape[0])

    @property
    def d(self) -> int:
        """Feature dimension."""
        return int(self.frames.shape[1])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FeatureSequence):
            return NotImplemented
        return (self.id == other.id
                and self.frames.shape == other.frames.shape
                and self.frames.tobytes() == other.frames.tobytes())

    def __hash__(self) -> int:
        return hash((self.id, self.frames.shape, self.frames.tobytes()))


@dataclass(frozen=True)
class SequenceLabels:
    """Optional action class and per-frame phase indices of a sequence."""
    id: str
    action: Optional[str] = None
    phases: Optional[Tuple[int, ...]] = None

    def __post_init__(self) -> None:
        if self.phases is not None:
            phases = tuple(int(p) for p in self.phases)
            if any(p < 0 for p in phases):
                raise LabelError(f"Phase indices of '{self.id}' must be >= 0")
            object.__setattr__(self, 'phases', phases)

    def check_covers(self, seq: FeatureSequence) -> None:
        """Raise LabelError unless the phases (if any) cover every frame of seq."""
        if self.phases is not None and len(self.phases) != seq.T:
            raise LabelError(
                f"Labels of '{self.id}' have {len(self.phases)} phases, sequence has {seq.T} frames"
            )

    def to_dict(self) -> Dict[str, Any]:
        return {
            'id': self.id,
            'action': self.action,
            'phases': list(self.phases) if self.phases is not None else None,
        }


@dataclass(frozen=True)
class ManifestEntry:
    """One clip of a dataset: its features and optional label sidecar."""
    id: str
    feature_path: Path
    label_path: Optional[Path] = None


@dataclass(frozen=True)
class DatasetManifest:
    """An ordered collection of clips with unique ids."""
    entries: Tuple[ManifestEntry, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        seen = set()
        for entry in self.entries:
            if entry.id in seen:
                raise ManifestError(f"Manifest has duplicate id '{entry.id}'")
            seen.add(entry.id)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[ManifestEntry]:
        return iter(self.entries)

    @property
    def ids(self) -> List[str]:
        return [entry.id for entry in self.entries]

    def get(self, seq_id: str) -> Optional[ManifestEntry]:
        for entry in self.entries:
            if entry.id == seq_id:
                return entry
        return None

    def load_labels(self) -> Dict[str, SequenceLabels]:
        """Load every label sidecar referenced by the manifest."""
        return {
            entry.id: load_labels(entry.label_path)
            for entry in self.entries if entry.label_path is not None
        }


def atomic_write_bytes(path: PathLike, data: bytes) -> None:
    """Write data to path through a temporary file and an atomic rename."""
    path = Path(path)
    temp_path = path.with_name(path.name + '.tmp')
    try:
        with open(temp_path, 'wb') as f:
            f.write(data)
        os.replace(temp_path, path)
    except Exception:
        if temp_path.exists():
            temp_path.unlink()
        raise


def load_sequence(path: PathLike, seq_id: Optional[str] = None) -> FeatureSequence:
    """Load an AVRF feature file.

    Args:
        path: The file to read.
        seq_id: Id of the returned sequence. Defaults to the file stem.

    Returns:
        The decoded sequence with exactly T*d values.

    Raises:
        FormatError: On a malformed header, a size mismatch or a non-finite
            value. The error carries the byte offset of the problem.
    """
    path = Path(path)
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise FormatError("Truncated header", path, len(data))

    magic, version, t, d = _HEADER.unpack_from(data, 0)
    if magic != AVRF_MAGIC:
        raise FormatError(f"Bad magic {magic!r}, expected {AVRF_MAGIC!r}", path, 0)
    if version != AVRF_VERSION:
        raise FormatError(f"Unsupported version {version}", path, 4)
    if t < 1:
        raise FormatError("Frame count T must be >= 1", path, 8)
    if d < 1:
        raise FormatError("Feature dimension d must be >= 1", path, 12)

    expected = _HEADER.size + t * d * _FLOAT.itemsize
    if len(data) != expected:
        raise FormatError(
            f"Size mismatch: header T={t}, d={d} needs {expected} bytes, file has {len(data)}",
            path, min(len(data), expected),
        )

    values = np.frombuffer(data, dtype=_FLOAT, count=t * d, offset=_HEADER.size)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise FormatError("Non-finite value", path, _HEADER.size + int(bad[0]) * _FLOAT.itemsize)

    return FeatureSequence(id=seq_id if seq_id is not None else path.stem,
                           frames=values.reshape(t, d))


def save_sequence(seq: FeatureSequence, path: PathLike) -> None:
    """Write a sequence as an AVRF file.

    The round trip ``load_sequence(path, seq.id)`` reproduces seq bit-exactly.

    Raises:
        OSError: If the path cannot be written.
    """
    header = _HEADER.pack(AVRF_MAGIC, AVRF_VERSION, seq.T, seq.d)
    atomic_write_bytes(path, header + seq.frames.astype(_FLOAT, copy=False).tobytes(order='C'))


def _read_json(path: Path) -> Any:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise FormatError(f"Malformed JSON: {e.msg}", path, e.pos) from e


def load_labels(path: PathLike) -> SequenceLabels:
    """Load a label sidecar."""
    path = Path(path)
    data = _read_json(path)
    if not isinstance(data, dict) or not isinstance(data.get('id'), str):
        raise FormatError("Label sidecar needs an 'id' string", path)
    action = data.get('action')
    phases = data.get('phases')
    if action is not None and not isinstance(action, str):
        raise FormatError("'action' must be a string or null", path)
    if phases is not None:
        if not isinstance(phases, list) or not all(isinstance(p, int) and not isinstance(p, bool) for p in phases):
            raise FormatError("'phases' must be a list of integers or null", path)
    return SequenceLabels(id=data['id'], action=action,
                          phases=tuple(phases) if phases is not None else None)


def save_labels(labels: SequenceLabels, path: PathLike) -> None:
    """Write a label sidecar."""
    atomic_write_bytes(path, json.dumps(labels.to_dict(), indent=2).encode('utf-8'))


def load_manifest(path: PathLike) -> DatasetManifest:
    """Load and validate a dataset manifest.

    Relative feature and label paths are resolved against the manifest's
    directory.

    Raises:
        FormatError: If the file is not valid manifest JSON.
        ManifestError: On a duplicate id or a referenced file that does not exist.
    """
    path = Path(path)
    data = _read_json(path)
    if not isinstance(data, dict) or not isinstance(data.get('entries'), list):
        raise FormatError("Manifest needs an 'entries' list", path)

    base = path.parent
    entries = []
    for raw in data['entries']:
        if not isinstance(raw, dict) or not isinstance(raw.get('id'), str) \
                or not isinstance(raw.get('feature_path'), str):
            raise FormatError("Manifest entries need 'id' and 'feature_path' strings", path)
        if not isinstance(raw.get('label_path'), (str, type(None))):
            raise FormatError(f"Manifest entry '{raw['id']}' has a non-string 'label_path'", path)
        feature_path = base / raw['feature_path']
        label_path = base / raw['label_path'] if raw.get('label_path') else None
        for referenced in (feature_path, label_path):
            if referenced is not None and not referenced.is_file():
                raise ManifestError(f"Manifest entry '{raw['id']}' references missing file {referenced}")
        entries.append(ManifestEntry(id=raw['id'], feature_path=feature_path, label_path=label_path))

    manifest = DatasetManifest(entries=tuple(entries))
    logger.debug("Loaded manifest %s with %d entries", path, len(manifest))
    return manifest


def save_manifest(manifest: DatasetManifest, path: PathLike) -> None:
    """Write a manifest with paths relative to its own directory."""
    path = Path(path)
    base = path.parent.resolve()

    def rel(p: Path) -> str:
        return os.path.relpath(Path(p).resolve(), base).replace('\\', '/')

    data = {
        'entries': [
            {
                'id': entry.id,
                'feature_path': rel(entry.feature_path),
                'label_path': rel(entry.label_path) if entry.label_path is not None else None,
            }
            for entry in manifest.entries
        ]
    }
    atomic_write_bytes(path, json.dumps(data, indent=2).encode('utf-8'))


def load_dataset(manifest: DatasetManifest) -> Tuple[Dict[str, FeatureSequence], Dict[str, SequenceLabels]]:
    """Load every sequence of a manifest together with its labels.

    Raises:
        LabelError: If a label sidecar does not cover its sequence.
    """
    sequences = {entry.id: load_sequence(entry.feature_path, entry.id) for entry in manifest}
    labels = manifest.load_labels()
    for seq_id, seq_labels in labels.items():
        seq_labels.check_covers(sequences[seq_id])
    return sequences, labels
