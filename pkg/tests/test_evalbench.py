"""Tests for APA, cycle consistency, indicator sweeps and recall."""

import numpy as np
import pytest

from avrkit.core.align import AlignmentPath
from avrkit.core.draq import Indicator, RandomPathConfig
from avrkit.core.errors import AvrError, LabelError
from avrkit.core.evalbench import (
    ApaMode,
    CpeMode,
    LabeledPair,
    apa,
    context_ablation,
    cycle_consistency,
    cycle_report,
    indicator_auc,
    load_labeled_pairs,
    oracle_candidates,
    rerank_recall,
    sweep_indicators,
    topk_apa,
)
from avrkit.core.featureio import FeatureSequence, load_dataset, load_manifest
from avrkit.core.pipeline import DictSequenceStore, ManifestSequenceStore
from avrkit.core.retrieve import build_index, build_index_from_embeddings, embed_clip
from avrkit.core.synth import SyntheticSpec, generate_synthetic, synthesize

DIAGONAL3 = AlignmentPath(((1, 1), (2, 2), (3, 3)))


def apa_of(a, b, path=DIAGONAL3, mode=ApaMode.TUPLES):
    return apa(a, b, path, mode)


def copy_pair(rng, seq_id, num_frames=10):
    frames = rng.normal(size=(num_frames, 3))
    phases = list(np.repeat(np.arange(5), 2)[:num_frames])
    return LabeledPair(
        a=FeatureSequence(id=f"{seq_id}a", frames=frames),
        b=FeatureSequence(id=f"{seq_id}b", frames=frames),
        phases_a=phases,
        phases_b=phases,
        alignable=True,
    )


def test_apa_examples():
    assert apa_of([0, 1, 2], [0, 1, 2]) == 1.0
    assert apa_of([0, 0, 1], [5, 6, 7]) == 0.0
    assert apa_of([1, 1, 2], [1, 2, 2]) == pytest.approx(2 / 3)


def test_apa_modes_differ_on_still_frames():
    path = AlignmentPath(((1, 1), (2, 1), (3, 2)))
    assert apa_of([0, 1, 2], [0, 2], path) == pytest.approx(2 / 3)
    assert apa_of([0, 1, 2], [0, 2], path, ApaMode.FRAMES) == 1.0


def test_apa_length_mismatch():
    with pytest.raises(LabelError):
        apa_of([0, 1], [0, 1, 2])


def test_cycle_exact_copy_is_zero(rng):
    frames = rng.normal(size=(15, 4))
    query = FeatureSequence(id='q', frames=frames)
    entry = cycle_consistency(query, FeatureSequence(id='m', frames=frames), phases=[t // 5 for t in range(15)])
    assert entry.fpe == 0.0
    assert entry.cpe == 0.0


def test_cycle_duplicated_frames_stays_within_a_frame(rng):
    frames = rng.normal(size=(12, 4))
    query = FeatureSequence(id='q', frames=frames)
    doubled = FeatureSequence(id='m', frames=np.repeat(frames, 2, axis=0))
    entry = cycle_consistency(query, doubled)
    assert entry.fpe <= 1.0
    assert entry.cpe is None


def test_cycle_cpe_modes(rng):
    query = FeatureSequence(id='q', frames=rng.normal(size=(8, 3)))
    match = FeatureSequence(id='m', frames=rng.normal(size=(6, 3)))
    phases = [0, 0, 1, 1, 2, 2, 3, 3]
    absolute = cycle_consistency(query, match, phases)
    mismatch = cycle_consistency(query, match, phases, cpe_mode=CpeMode.MISMATCH)
    assert absolute.fpe == mismatch.fpe
    assert 0.0 <= mismatch.cpe <= 1.0
    assert absolute.cpe >= mismatch.cpe


def test_cycle_phase_requirements(rng):
    query = FeatureSequence(id='q', frames=rng.normal(size=(4, 2)))
    with pytest.raises(LabelError):
        cycle_consistency(query, query, require_phases=True)
    with pytest.raises(LabelError):
        cycle_consistency(query, query, phases=[0, 1])


def test_cross_prototype_cycle_error_exceeds_siblings():
    corpus = synthesize(SyntheticSpec(num_prototypes=3, clips_per_prototype=4, frames_min=20,
                                      frames_max=40, num_pairs=0, seed=3))
    query = corpus.sequences['p00_q000']
    siblings = [corpus.sequences[f"p00_c{c:03d}"] for c in range(4)]
    others = [corpus.sequences[f"p{p:02d}_c{c:03d}"] for p in (1, 2) for c in range(4)]
    sibling_fpe = np.mean([cycle_consistency(query, s).fpe for s in siblings])
    other_fpe = np.mean([cycle_consistency(query, s).fpe for s in others])
    assert other_fpe > sibling_fpe


def test_oracle_candidates():
    actions = {'q': 'A', 'a1': 'A', 'a2': 'A', 'a3': 'A', 'b1': 'B', 'n': None}
    chosen = oracle_candidates(actions, 'q', 'A', 3, np.random.default_rng(0))
    assert sorted(chosen) == ['a1', 'a2', 'a3']
    assert len(oracle_candidates(actions, 'q', 'A', 2, np.random.default_rng(0))) == 2
    assert oracle_candidates(actions, 'b1', 'B', 3, np.random.default_rng(0)) == []
    assert oracle_candidates(actions, 'q', None, 3, np.random.default_rng(0)) == []
    assert oracle_candidates(actions, 'q', 'A', 2, np.random.default_rng(5)) == \
        oracle_candidates(actions, 'q', 'A', 2, np.random.default_rng(5))


def test_sweep_on_identical_pairs(rng):
    pairs = [copy_pair(rng, f"p{t}") for t in range(4)]
    report = sweep_indicators(pairs, percentiles=[10, 50, 100])
    assert len(report.rows) == 3 * len(Indicator)
    for row in report.rows:
        assert row.mean_apa == pytest.approx(1.0)
    assert all(auc is None for auc in report.auc.values())


def test_sweep_single_pair(rng):
    pair = copy_pair(rng, 'x')
    pair = LabeledPair(pair.a, pair.b, pair.phases_a, list(reversed(pair.phases_b)))
    report = sweep_indicators([pair], percentiles=[50])
    expected = report.evaluations[0].apa
    for indicator in Indicator:
        assert report.curve(indicator) == [(50.0, pytest.approx(expected))]


def test_sweep_sets_are_nested(small_corpus):
    pairs = load_labeled_pairs(small_corpus / 'pairs.json')
    report = sweep_indicators(pairs, percentiles=[0, 10, 25, 50, 75, 100], cfg=RandomPathConfig(num_paths=20))
    for indicator in Indicator:
        counts = [r.n_pairs for r in report.rows if r.indicator is indicator]
        assert counts == sorted(counts)
        assert counts[-1] == len(pairs)
    for auc in report.auc.values():
        assert 0.0 <= auc <= 1.0

    csv_text = report.to_csv()
    lines = csv_text.splitlines()
    assert lines[0] == 'indicator,percentile,mean_apa,n_pairs'
    assert len(lines) == 1 + 6 * len(Indicator)


def test_sweep_validation_and_absent_rows(rng):
    with pytest.raises(AvrError):
        sweep_indicators([copy_pair(rng, 'x')], percentiles=[101])
    report = sweep_indicators([], percentiles=[50])
    assert all(row.mean_apa is None and row.n_pairs == 0 for row in report.rows)
    assert ',,0' in report.to_csv()


@pytest.mark.parametrize('values, alignable, expected', [
    ([0.1, 0.2, 0.8, 0.9], [True, True, False, False], 1.0),
    ([0.1, 0.2, 0.8, 0.9], [False, False, True, True], 0.0),
    ([0.5, 0.5, 0.5, 0.5], [True, False, True, False], 0.5),
    ([0.1, 0.3, 0.2, 0.9], [True, False, True, False], 1.0),
    ([0.1, 0.3, 0.4, 0.2], [True, True, False, False], 0.75),
])
def test_indicator_auc(values, alignable, expected):
    assert indicator_auc(values, alignable) == pytest.approx(expected)


def test_indicator_auc_needs_both_classes():
    assert indicator_auc([0.1, 0.2], [True, True]) is None


def test_rerank_recall_improves_on_sibling_case(sibling_case):
    query, sequences, actions = sibling_case
    index = build_index_from_embeddings(embed_clip(s) for s in sequences.values())
    table = rerank_recall(index, DictSequenceStore(sequences), [(query, 'A')], actions,
                          topk_rerank=8, ks=(1, 8))
    assert table.before[1] == 0.0
    assert table.after[1] == 1.0
    assert table.before[8] == table.after[8] == 1.0


def test_rerank_recall_singleton_classes(rng):
    sequences = {f"s{t}": FeatureSequence(id=f"s{t}", frames=rng.normal(size=(6, 2))) for t in range(6)}
    actions = {seq_id: seq_id for seq_id in sequences}
    index = build_index_from_embeddings(embed_clip(s) for s in sequences.values())
    queries = [(s, actions[s.id]) for s in sequences.values()]
    table = rerank_recall(index, DictSequenceStore(sequences), queries, actions, topk_rerank=5, ks=(1, 5))
    assert table.before == {1: 0.0, 5: 0.0}
    assert table.after == {1: 0.0, 5: 0.0}


def test_rerank_recall_is_unchanged_at_the_rerank_depth(small_corpus):
    manifest = load_manifest(small_corpus / 'manifest.json')
    sequences, labels = load_dataset(load_manifest(small_corpus / 'queries.json'))
    actions = {seq_id: lab.action for seq_id, lab in manifest.load_labels().items()}
    queries = [(seq, labels[seq_id].action) for seq_id, seq in sequences.items()]
    table = rerank_recall(build_index(manifest), ManifestSequenceStore(manifest), queries, actions,
                          topk_rerank=5, ks=(1, 5), cfg=RandomPathConfig(num_paths=20))
    assert table.before[5] == table.after[5]
    assert table.num_queries == len(queries)
    assert table.to_dict()['recall'][0]['k'] == 1


def test_rerank_recall_counts_retrievals_below_the_rerank_depth(rng):
    centre = np.array([1.0, 2.0, -1.0, 0.5])
    sequences = {
        f"near{t}": FeatureSequence(id=f"near{t}", frames=centre + rng.normal(0.0, 0.3, size=(6, 4)))
        for t in range(10)
    }
    # Opposite mean, so it is retrieved last
    sequences['far'] = FeatureSequence(id='far', frames=-centre + rng.normal(0.0, 0.3, size=(6, 4)))
    actions = {seq_id: 'B' for seq_id in sequences}
    actions['far'] = 'A'
    index = build_index_from_embeddings(embed_clip(s) for s in sequences.values())
    query = FeatureSequence(id='query', frames=np.tile(centre, (6, 1)))
    table = rerank_recall(index, DictSequenceStore(sequences), [(query, 'A')], actions,
                          topk_rerank=3, ks=(1, 3, 11), cfg=RandomPathConfig(num_paths=20))
    assert table.before == {1: 0.0, 3: 0.0, 11: 1.0}
    assert table.after == {1: 0.0, 3: 0.0, 11: 1.0}


def test_rerank_recall_rejects_empty_ks(sibling_case):
    query, sequences, actions = sibling_case
    index = build_index_from_embeddings(embed_clip(s) for s in sequences.values())
    with pytest.raises(AvrError):
        rerank_recall(index, DictSequenceStore(sequences), [(query, 'A')], actions, ks=())


def test_sweep_skips_kendall_tau_for_single_frame_clips(rng):
    single = LabeledPair(
        a=FeatureSequence(id='one_a', frames=rng.normal(size=(1, 3))),
        b=FeatureSequence(id='one_b', frames=rng.normal(size=(4, 3))),
        phases_a=[0],
        phases_b=[0, 0, 1, 1],
        alignable=False,
    )
    pairs = [copy_pair(rng, 'x'), copy_pair(rng, 'y'), single]
    report = sweep_indicators(pairs, percentiles=[100], cfg=RandomPathConfig(num_paths=20))
    assert Indicator.NEG_KENDALL_TAU not in report.evaluations[2].values
    assert Indicator.DRAQ in report.evaluations[2].values
    counts = {row.indicator: row.n_pairs for row in report.rows}
    assert counts[Indicator.DRAQ] == 3
    assert counts[Indicator.DTW_COST] == 3
    assert counts[Indicator.NEG_KENDALL_TAU] == 2
    # Only alignable pairs carry a tau value
    assert report.auc[Indicator.NEG_KENDALL_TAU] is None
    assert report.auc[Indicator.DRAQ] is not None


def _corpus_queries(corpus_dir):
    sequences, labels = load_dataset(load_manifest(corpus_dir / 'queries.json'))
    return [(seq, labels[seq_id]) for seq_id, seq in sequences.items()]


def test_cycle_report_with_retrieval(small_corpus):
    manifest = load_manifest(small_corpus / 'manifest.json')
    queries = _corpus_queries(small_corpus)
    report = cycle_report(queries, ManifestSequenceStore(manifest), RandomPathConfig(num_paths=20),
                          index=build_index(manifest), topk=4, draq_threshold=float('inf'))
    ids = [e.query_id for e in report.entries]
    assert ids == sorted(q.id for q, _ in queries)
    assert report.filtered == ()
    assert report.mean_fpe >= 0.0
    assert report.mean_cpe >= 0.0


def test_cycle_report_with_oracle(small_corpus):
    manifest = load_manifest(small_corpus / 'manifest.json')
    actions = {seq_id: lab.action for seq_id, lab in manifest.load_labels().items()}
    queries = _corpus_queries(small_corpus)
    report = cycle_report(queries, ManifestSequenceStore(manifest), RandomPathConfig(num_paths=20),
                          oracle_actions=actions, topk=3, draq_threshold=float('inf'))
    for entry in report.entries:
        assert entry.match_id[:3] == entry.query_id[:3]

    filtered = cycle_report(queries, ManifestSequenceStore(manifest), RandomPathConfig(num_paths=20),
                            oracle_actions=actions, topk=3, draq_threshold=0.0)
    assert filtered.entries == ()
    assert len(filtered.filtered) == len(queries)
    assert filtered.mean_fpe is None


def test_cycle_report_needs_candidates():
    with pytest.raises(AvrError):
        cycle_report([], DictSequenceStore({}), RandomPathConfig())


def test_load_labeled_pairs(small_corpus):
    pairs = load_labeled_pairs(small_corpus / 'pairs.json')
    assert len(pairs) == 12
    assert sum(p.alignable for p in pairs) == 6
    for pair in pairs:
        assert len(pair.phases_a) == pair.a.T


def test_context_ablation(rng):
    pairs = [copy_pair(rng, f"p{t}") for t in range(3)]
    assert context_ablation(pairs) == (1.0, 1.0)
    with pytest.raises(AvrError):
        context_ablation([])


def test_topk_apa(small_corpus):
    manifest = load_manifest(small_corpus / 'manifest.json')
    phases = {seq_id: lab.phases for seq_id, lab in manifest.load_labels().items()}
    average, top = topk_apa(_corpus_queries(small_corpus), build_index(manifest),
                            ManifestSequenceStore(manifest), phases, topk=4,
                            cfg=RandomPathConfig(num_paths=20))
    assert 0.0 <= average <= 1.0
    assert 0.0 <= top <= 1.0


@pytest.fixture(scope='module')
def default_pairs(tmp_path_factory):
    out = tmp_path_factory.mktemp('default')
    generate_synthetic(SyntheticSpec(), out)
    return load_labeled_pairs(out / 'pairs.json')


@pytest.fixture(scope='module')
def default_report(default_pairs):
    return sweep_indicators(default_pairs, percentiles=[10, 20, 30, 40, 50, 100])


@pytest.mark.slow
class TestDefaultCorpus:
    """Directional checks on the default seeded synthetic corpus."""

    def test_corpus_is_balanced(self, default_pairs):
        pairs = default_pairs
        assert len(pairs) == 100
        assert sum(p.alignable for p in pairs) == 50

    def test_draq_separates_best(self, default_report):
        report = default_report
        assert report.auc[Indicator.DRAQ] >= report.auc[Indicator.DTW_COST]
        assert report.auc[Indicator.DRAQ] >= report.auc[Indicator.NEG_KENDALL_TAU]

    def test_lowest_decile_apa(self, default_report):
        report = default_report
        draq_apa = dict(report.curve(Indicator.DRAQ))[10.0]
        dtw_apa = dict(report.curve(Indicator.DTW_COST))[10.0]
        assert draq_apa >= dtw_apa

    def test_context_helps_alignment(self, default_pairs):
        alignable = [p for p in default_pairs if p.alignable]
        assert len(alignable) == 50
        with_context, without_context = context_ablation(alignable)
        assert with_context >= without_context
