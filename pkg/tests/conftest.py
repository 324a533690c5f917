"""Shared fixtures for the avrkit test suite."""

from pathlib import Path
from typing import Callable

import numpy as np
import pytest
from click.testing import CliRunner

from avrkit.core.featureio import FeatureSequence
from avrkit.core.synth import SyntheticSpec, generate_synthetic

SMALL_SPEC = SyntheticSpec(
    num_prototypes=3,
    clips_per_prototype=4,
    queries_per_prototype=1,
    phases_per_prototype=3,
    frames_min=16,
    frames_max=24,
    dimension=8,
    num_pairs=12,
    seed=7,
)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def make_seq() -> Callable[..., FeatureSequence]:
    """Build a FeatureSequence from a nested list or array."""

    def make(seq_id: str, frames) -> FeatureSequence:
        frames = np.asarray(frames, dtype=np.float64)
        if frames.ndim == 1:
            frames = frames[:, None]
        return FeatureSequence(id=seq_id, frames=frames)

    return make


@pytest.fixture
def small_corpus(tmp_path: Path) -> Path:
    """A small synthetic corpus on disk; returns its directory."""
    out = tmp_path / 'corpus'
    generate_synthetic(SMALL_SPEC, out)
    return out


@pytest.fixture
def runner(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> CliRunner:
    """A CLI runner inside an empty working directory."""
    work = tmp_path / 'work'
    work.mkdir()
    monkeypatch.chdir(work)
    return CliRunner()


def trajectory(num_frames: int) -> np.ndarray:
    """A smooth trajectory that differs from its own time reversal."""
    t = np.linspace(0.0, 1.0, num_frames)
    return np.stack([t, t ** 2, np.sin(3 * t) + 0.5, np.cos(5 * t)], axis=1)


@pytest.fixture
def sibling_case(rng):
    """A query whose nearest clip by mean embedding is a reversed decoy.

    Returns ``(query, sequences, actions)``. The decoy (action B) has the
    query's mean embedding but plays backwards. The sibling (action A) is the
    query with its first frames held and its features doubled, so it aligns
    well but has a different mean. Fillers (action C) are noise.
    """
    frames = trajectory(20)
    query = FeatureSequence(id='query', frames=frames)
    held = np.concatenate([np.repeat(frames[:5], 2, axis=0), frames[5:]])
    sequences = {
        'decoy': FeatureSequence(id='decoy', frames=frames[::-1]),
        'sibling': FeatureSequence(id='sibling', frames=2.0 * held),
    }
    actions = {'query': 'A', 'decoy': 'B', 'sibling': 'A'}
    for t in range(6):
        seq_id = f"filler{t}"
        sequences[seq_id] = FeatureSequence(id=seq_id, frames=rng.normal(size=(20, 4)))
        actions[seq_id] = 'C'
    return query, sequences, actions
