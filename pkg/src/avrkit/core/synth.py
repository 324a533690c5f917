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
"""Seeded synthetic corpora of alignable feature sequences.

Every prototype ("action") is a latent curve over canonical time [0, 1],
split into equal phases. Inside a phase the curve is a phase-specific center
plus a sum of 3-5 sinusoids. A clip resamples its prototype under a random
strictly increasing piecewise-linear warp and adds Gaussian noise, so the
ground-truth phase of every frame and the canonical time it shows are known.

Phase ids are global (``prototype * phases_per_prototype + phase``), so clips
of different prototypes never share a phase label.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, fields
from itertools import combinations
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np
import yaml

from .errors import ConfigError
from .featureio import (
    DatasetManifest,
    FeatureSequence,
    ManifestEntry,
    SequenceLabels,
    atomic_write_bytes,
    save_labels,
    save_manifest,
    save_sequence,
)

__all__ = [
    'SyntheticSpec',
    'Prototype',
    'SyntheticCorpus',
    'make_prototype',
    'make_warp',
    'render_clip',
    'synthesize',
    'balanced_pairs',
    'generate_synthetic',
    'load_synthetic_spec',
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of a synthetic corpus.

    ``warp_strength`` in [0, 1) scales the random slope changes of the
    piecewise-linear warp; 0 gives the identity warp.
    """
    num_prototypes: int = 5
    clips_per_prototype: int = 6
    queries_per_prototype: int = 1
    phases_per_prototype: int = 4
    frames_min: int = 24
    frames_max: int = 64
    warp_segments: int = 4
    warp_strength: float = 0.5
    noise_sigma: float = 0.1
    offset_scale: float = 0.0
    dimension: int = 16
    num_pairs: int = 100
    seed: int = 0

    def __post_init__(self) -> None:
        checks = [
            (self.num_prototypes >= 1, "num_prototypes must be >= 1"),
            (self.clips_per_prototype >= 1, "clips_per_prototype must be >= 1"),
            (self.queries_per_prototype >= 0, "queries_per_prototype must be >= 0"),
            (self.phases_per_prototype >= 1, "phases_per_prototype must be >= 1"),
            (1 <= self.frames_min <= self.frames_max, "need 1 <= frames_min <= frames_max"),
            (self.warp_segments >= 1, "warp_segments must be >= 1"),
            (0.0 <= self.warp_strength < 1.0, "warp_strength must be in [0, 1)"),
            (self.noise_sigma >= 0.0, "noise_sigma must be >= 0"),
            (self.offset_scale >= 0.0, "offset_scale must be >= 0"),
            (self.dimension >= 1, "dimension must be >= 1"),
            (self.num_pairs >= 0, "num_pairs must be >= 0"),
            (self.seed >= 0, "seed must be >= 0"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> 'SyntheticSpec':
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"Unknown synthetic spec keys: {sorted(unknown)}")
        return cls(**dict(data))


@dataclass(frozen=True, eq=False)
class Prototype:
    """Latent curve of one action: phase centers plus sinusoid terms."""
    index: int
    centers: np.ndarray                      # phases x d
    terms: Tuple[Tuple[np.ndarray, np.ndarray, np.ndarray], ...]   # per phase: amp (K x d), freq (K,), shift (K,)
    offset: np.ndarray

    @property
    def num_phases(self) -> int:
        return int(self.centers.shape[0])

    def phase_of(self, u: np.ndarray) -> np.ndarray:
        """Local phase index of canonical times u."""
        return np.minimum((np.asarray(u) * self.num_phases).astype(np.int64), self.num_phases - 1)

    def evaluate(self, u: np.ndarray) -> np.ndarray:
        """Latent features at canonical times u (len(u) x d)."""
        u = np.asarray(u, dtype=np.float64)
        phase = self.phase_of(u)
        local = u * self.num_phases - phase
        out = self.centers[phase] + self.offset
        for s, (amp, freq, shift) in enumerate(self.terms):
            rows = phase == s
            if not rows.any():
                continue
            waves = np.sin(2 * np.pi * freq[None, :] * local[rows, None] + shift[None, :])
            out[rows] += waves @ amp
        return out


@dataclass
class SyntheticCorpus:
    """An in-memory synthetic corpus."""
    spec: SyntheticSpec
    sequences: Dict[str, FeatureSequence] = field(default_factory=dict)
    labels: Dict[str, SequenceLabels] = field(default_factory=dict)
    warps: Dict[str, np.ndarray] = field(default_factory=dict)
    query_ids: List[str] = field(default_factory=list)
    pairs: List[Tuple[str, str, bool]] = field(default_factory=list)

    @property
    def index_ids(self) -> List[str]:
        queries = set(self.query_ids)
        return [seq_id for seq_id in self.sequences if seq_id not in queries]


def make_prototype(index: int, spec: SyntheticSpec, rng: np.random.Generator) -> Prototype:
    d = spec.dimension
    centers = rng.normal(0.0, 1.0, size=(spec.phases_per_prototype, d))
    terms = []
    for _ in range(spec.phases_per_prototype):
        k = int(rng.integers(3, 6))
        terms.append((
            rng.normal(0.0, 0.5, size=(k, d)),
            rng.uniform(0.5, 2.0, size=k),
            rng.uniform(0.0, 2 * np.pi, size=k),
        ))
    offset = rng.normal(0.0, spec.offset_scale, size=d) if spec.offset_scale > 0 else np.zeros(d)
    return Prototype(index=index, centers=centers, terms=tuple(terms), offset=offset)


def make_warp(num_frames: int, spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    """Canonical time shown by each frame under a random monotonic warp."""
    clip_time = np.linspace(0.0, 1.0, num_frames) if num_frames > 1 else np.zeros(1)
    increments = 1.0 + spec.warp_strength * rng.uniform(-1.0, 1.0, size=spec.warp_segments)
    knots_u = np.concatenate([[0.0], np.cumsum(increments)])
    knots_u /= knots_u[-1]
    knots_s = np.linspace(0.0, 1.0, spec.warp_segments + 1)
    return np.interp(clip_time, knots_s, knots_u)


def render_clip(clip_id: str, proto: Prototype, canonical: np.ndarray, spec: SyntheticSpec,
                rng: np.random.Generator) -> Tuple[FeatureSequence, SequenceLabels]:
    """Sample a prototype at the given canonical times and add noise."""
    frames = proto.evaluate(canonical)
    if spec.noise_sigma > 0:
        frames = frames + rng.normal(0.0, spec.noise_sigma, size=frames.shape)
    phases = proto.phase_of(canonical) + proto.index * spec.phases_per_prototype
    seq = FeatureSequence(id=clip_id, frames=frames)
    labels = SequenceLabels(id=clip_id, action=f"proto{proto.index:02d}", phases=tuple(int(p) for p in phases))
    return seq, labels


def balanced_pairs(actions: Mapping[str, Optional[str]], n_pairs: int,
                   rng: np.random.Generator) -> List[Tuple[str, str, bool]]:
    """Equal numbers of same-action and cross-action pairs.

    Returns ``(id_a, id_b, alignable)`` triples; each half is drawn without
    replacement and holds ``n_pairs // 2`` pairs or all available pairs if
    fewer exist.
    """
    ids = sorted(seq_id for seq_id, action in actions.items() if action is not None)
    same, cross = [], []
    for a, b in combinations(ids, 2):
        (same if actions[a] == actions[b] else cross).append((a, b))
    half = n_pairs // 2
    chosen: List[Tuple[str, str, bool]] = []
    for pool, alignable in ((same, True), (cross, False)):
        take = min(half, len(pool))
        for t in (sorted(rng.choice(len(pool), size=take, replace=False)) if take else []):
            chosen.append((pool[t][0], pool[t][1], alignable))
    return chosen


def synthesize(spec: SyntheticSpec) -> SyntheticCorpus:
    """Generate a corpus in memory; identical specs give identical corpora."""
    rng = np.random.default_rng(spec.seed)
    corpus = SyntheticCorpus(spec=spec)
    for p in range(spec.num_prototypes):
        proto = make_prototype(p, spec, rng)
        clip_ids = [f"p{p:02d}_c{c:03d}" for c in range(spec.clips_per_prototype)]
        query_ids = [f"p{p:02d}_q{c:03d}" for c in range(spec.queries_per_prototype)]
        for clip_id in clip_ids + query_ids:
            num_frames = int(rng.integers(spec.frames_min, spec.frames_max + 1))
            canonical = make_warp(num_frames, spec, rng)
            seq, labels = render_clip(clip_id, proto, canonical, spec, rng)
            corpus.sequences[clip_id] = seq
            corpus.labels[clip_id] = labels
            corpus.warps[clip_id] = canonical
        corpus.query_ids.extend(query_ids)

    index_actions = {seq_id: corpus.labels[seq_id].action for seq_id in corpus.index_ids}
    corpus.pairs = balanced_pairs(index_actions, spec.num_pairs, rng)
    logger.info("Synthesized %d clips (%d queries) and %d pairs",
                len(corpus.sequences), len(corpus.query_ids), len(corpus.pairs))
    return corpus


def _write_json(path: Path, data: Any) -> None:
    atomic_write_bytes(path, json.dumps(data, indent=2).encode('utf-8'))


def generate_synthetic(spec: SyntheticSpec, out_dir: Union[str, Path]) -> DatasetManifest:
    """Write a synthetic corpus to out_dir.

    Layout::

        features/<id>.avrf   labels/<id>.json
        manifest.json        clips available for indexing
        queries.json         held-out query clips
        pairs.json           balanced pairs over manifest.json
        warps.json           canonical time of every frame
        spec.json            the spec that produced the corpus

    Returns:
        The manifest of the indexable clips.
    """
    out_dir = Path(out_dir)
    (out_dir / 'features').mkdir(parents=True, exist_ok=True)
    (out_dir / 'labels').mkdir(parents=True, exist_ok=True)
    corpus = synthesize(spec)

    entries = {}
    for seq_id, seq in corpus.sequences.items():
        feature_path = out_dir / 'features' / f"{seq_id}.avrf"
        label_path = out_dir / 'labels' / f"{seq_id}.json"
        save_sequence(seq, feature_path)
        save_labels(corpus.labels[seq_id], label_path)
        entries[seq_id] = ManifestEntry(id=seq_id, feature_path=feature_path, label_path=label_path)

    manifest = DatasetManifest(tuple(entries[seq_id] for seq_id in corpus.index_ids))
    save_manifest(manifest, out_dir / 'manifest.json')
    save_manifest(DatasetManifest(tuple(entries[q] for q in corpus.query_ids)), out_dir / 'queries.json')
    _write_json(out_dir / 'pairs.json', {
        'manifest': 'manifest.json',
        'pairs': [[a, b] for a, b, _ in corpus.pairs],
    })
    _write_json(out_dir / 'warps.json', {seq_id: [float(u) for u in w] for seq_id, w in corpus.warps.items()})
    _write_json(out_dir / 'spec.json', asdict(spec))
    logger.info("Wrote synthetic corpus to %s", out_dir)
    return manifest


def load_synthetic_spec(path: Union[str, Path]) -> SyntheticSpec:
    """Read a synthetic spec from a JSON or YAML file."""
    with open(path, 'r', encoding='utf-8') as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"Synthetic spec {path} must be a mapping")
    return SyntheticSpec.from_mapping(data)
