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
"""Core functionality for avrkit."""

from .align import AlignmentPath, CostMatrix, Side, cost_matrix, dtw, skip_still_frames, warp_labels
from .config import AvrConfig
from .context import ContextualizedSequence, contextualize, contextualize_optional
from .draq import (
    AlignabilityScore,
    Indicator,
    RandomPathConfig,
    SamplerMode,
    draq,
    dtw_cost_indicator,
    kendall_tau_indicator,
    random_path_cost,
    sample_random_path,
)
from .errors import (
    AvrError,
    ConfigError,
    DimensionError,
    FormatError,
    IndexFormatError,
    LabelError,
    ManifestError,
    MissingSequenceError,
)
from .evalbench import (
    apa,
    context_ablation,
    cycle_consistency,
    cycle_report,
    oracle_candidates,
    rerank_recall,
    sweep_indicators,
)
from .featureio import (
    DatasetManifest,
    FeatureSequence,
    SequenceLabels,
    load_dataset,
    load_manifest,
    load_sequence,
    save_sequence,
)
from .pipeline import AvrResult, DictSequenceStore, ManifestSequenceStore, RerankMode, avr_query
from .retrieve import RetrievalIndex, build_index, load_index, query_topk, save_index
from .synth import SyntheticSpec, generate_synthetic
from ..protocol import SearchBackend, SequenceStore

__all__ = [
    # Data and formats
    'FeatureSequence',
    'SequenceLabels',
    'DatasetManifest',
    'load_sequence',
    'save_sequence',
    'load_manifest',
    'load_dataset',

    # Alignment and alignability
    'ContextualizedSequence',
    'contextualize',
    'contextualize_optional',
    'CostMatrix',
    'AlignmentPath',
    'Side',
    'cost_matrix',
    'dtw',
    'skip_still_frames',
    'warp_labels',
    'AlignabilityScore',
    'Indicator',
    'RandomPathConfig',
    'SamplerMode',
    'draq',
    'dtw_cost_indicator',
    'kendall_tau_indicator',
    'random_path_cost',
    'sample_random_path',

    # Retrieval and pipeline
    'RetrievalIndex',
    'build_index',
    'query_topk',
    'save_index',
    'load_index',
    'AvrResult',
    'RerankMode',
    'DictSequenceStore',
    'ManifestSequenceStore',
    'avr_query',

    # Evaluation
    'apa',
    'cycle_consistency',
    'cycle_report',
    'oracle_candidates',
    'sweep_indicators',
    'context_ablation',
    'rerank_recall',
    'SyntheticSpec',
    'generate_synthetic',

    # Configuration and errors
    'AvrConfig',
    'AvrError',
    'ConfigError',
    'DimensionError',
    'FormatError',
    'IndexFormatError',
    'LabelError',
    'ManifestError',
    'MissingSequenceError',

    # Re-exported from protocol for convenience
    'SearchBackend',
    'SequenceStore',
]
