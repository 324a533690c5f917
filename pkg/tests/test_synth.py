"""Tests for the synthetic corpus generator."""

import json

import numpy as np
import pytest

from avrkit.core.align import Side, cost_matrix, dtw, skip_still_frames
from avrkit.core.context import contextualize, contextualize_optional
from avrkit.core.errors import ConfigError
from avrkit.core.evalbench import apa
from avrkit.core.featureio import load_manifest
from avrkit.core.synth import (
    SyntheticSpec,
    balanced_pairs,
    generate_synthetic,
    load_synthetic_spec,
    make_warp,
    synthesize,
)


def test_identity_warp_without_noise_aligns_on_the_diagonal():
    spec = SyntheticSpec(num_prototypes=1, clips_per_prototype=2, queries_per_prototype=0,
                         frames_min=30, frames_max=30, warp_strength=0.0, noise_sigma=0.0, num_pairs=0)
    corpus = synthesize(spec)
    a, b = corpus.sequences['p00_c000'], corpus.sequences['p00_c001']
    path, _ = dtw(cost_matrix(contextualize(a), contextualize(b)))
    assert path.tuples == tuple((i, i) for i in range(1, 31))
    assert apa(corpus.labels[a.id].phases, corpus.labels[b.id].phases, path) == 1.0


def test_dtw_follows_the_ground_truth_warp():
    spec = SyntheticSpec(num_prototypes=2, clips_per_prototype=4, queries_per_prototype=0,
                         noise_sigma=0.0, num_pairs=0, seed=11)
    corpus = synthesize(spec)
    errors = []
    for p in range(2):
        first = f"p{p:02d}_c000"
        for c in range(1, 4):
            other = f"p{p:02d}_c{c:03d}"
            a, b = corpus.sequences[first], corpus.sequences[other]
            path, _ = dtw(cost_matrix(contextualize_optional(a, False), contextualize_optional(b, False)))
            # Frame of b showing the canonical time of each frame of a
            truth = np.interp(corpus.warps[first], corpus.warps[other], np.arange(1, b.T + 1))
            found = np.array([j for _, j in skip_still_frames(path, Side.FIRST)])
            errors.append(np.mean(np.abs(found - truth)))
    assert np.mean(errors) <= 2.0


def test_warps_are_strictly_increasing():
    spec = SyntheticSpec(warp_strength=0.9, warp_segments=6)
    rng = np.random.default_rng(0)
    for num_frames in (2, 10, 64):
        w = make_warp(num_frames, spec, rng)
        assert w[0] == 0.0
        assert w[-1] == pytest.approx(1.0)
        assert np.all(np.diff(w) > 0)


def test_labels_and_phases():
    spec = SyntheticSpec(num_prototypes=2, clips_per_prototype=2, phases_per_prototype=3, num_pairs=0)
    corpus = synthesize(spec)
    for seq_id, seq in corpus.sequences.items():
        labels = corpus.labels[seq_id]
        labels.check_covers(seq)
        proto = int(seq_id[1:3])
        assert labels.action == f"proto{proto:02d}"
        assert set(labels.phases) <= set(range(3 * proto, 3 * proto + 3))
        assert spec.frames_min <= seq.T <= spec.frames_max
        assert seq.d == spec.dimension
    assert corpus.query_ids == ['p00_q000', 'p01_q000']
    assert 'p00_q000' not in corpus.index_ids


def test_balanced_pairs():
    actions = {f"{a}{t}": a for a in 'AB' for t in range(3)}
    pairs = balanced_pairs(actions, 6, np.random.default_rng(1))
    assert sum(alignable for _, _, alignable in pairs) == 3
    for a, b, alignable in pairs:
        assert (actions[a] == actions[b]) == alignable
    assert len(set((a, b) for a, b, _ in pairs)) == 6

    few = balanced_pairs({'A0': 'A', 'A1': 'A', 'B0': 'B'}, 10, np.random.default_rng(1))
    assert len([p for p in few if p[2]]) == 1
    assert len([p for p in few if not p[2]]) == 2


def test_generation_is_byte_identical(tmp_path):
    spec = SyntheticSpec(num_prototypes=2, clips_per_prototype=3, frames_min=8, frames_max=12,
                         dimension=4, num_pairs=4, seed=5)
    generate_synthetic(spec, tmp_path / 'one')
    generate_synthetic(spec, tmp_path / 'two')
    files = sorted(p.relative_to(tmp_path / 'one') for p in (tmp_path / 'one').rglob('*') if p.is_file())
    assert files
    for rel in files:
        assert (tmp_path / 'one' / rel).read_bytes() == (tmp_path / 'two' / rel).read_bytes()


def test_generated_layout(small_corpus):
    manifest = load_manifest(small_corpus / 'manifest.json')
    queries = load_manifest(small_corpus / 'queries.json')
    assert len(manifest) == 12
    assert len(queries) == 3
    pairs = json.loads((small_corpus / 'pairs.json').read_text(encoding='utf-8'))
    assert pairs['manifest'] == 'manifest.json'
    assert len(pairs['pairs']) == 12
    warps = json.loads((small_corpus / 'warps.json').read_text(encoding='utf-8'))
    assert set(warps) == set(manifest.ids) | set(queries.ids)
    spec = json.loads((small_corpus / 'spec.json').read_text(encoding='utf-8'))
    assert spec['seed'] == 7


def test_spec_validation(tmp_path):
    with pytest.raises(ConfigError):
        SyntheticSpec(frames_min=10, frames_max=5)
    with pytest.raises(ConfigError):
        SyntheticSpec(warp_strength=1.0)
    with pytest.raises(ConfigError, match='colour'):
        SyntheticSpec.from_mapping({'colour': 'red'})

    path = tmp_path / 'spec.yml'
    path.write_text('num_prototypes: 2\nnoise_sigma: 0.0\n', encoding='utf-8')
    spec = load_synthetic_spec(path)
    assert spec.num_prototypes == 2
    assert spec.noise_sigma == 0.0
