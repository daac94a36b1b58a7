"""
Батарея измерений: патчинг, пробы, внимание, разложение представлений.
"""

from .attention import (
    AttentionGraph,
    HeadScoreTable,
    attention_graph,
    default_score_length,
    parity_head_scores,
    parity_head_scores_from_attention,
)
from .decomposition import (
    Decomposition,
    cluster_label,
    decompose_state_means,
    pca_decomposition,
)
from .patching import (
    GridMode,
    Metric,
    PatchingExperiment,
    PatchPair,
    SignatureGrid,
    make_patch_pairs,
    nld,
    prefix_patch_grid,
    suffix_patch_grid,
    window_patch_grid,
)
from .probes import (
    Probe,
    ProbeCurves,
    ProbeData,
    collect_layer_features,
    collect_probe_data,
    embed_registers,
    probe_by_length,
    probe_curves,
    probe_length_matrix,
    split_by_document,
    train_probe,
)

__all__ = [
    "AttentionGraph",
    "HeadScoreTable",
    "attention_graph",
    "default_score_length",
    "parity_head_scores",
    "parity_head_scores_from_attention",
    "Decomposition",
    "cluster_label",
    "decompose_state_means",
    "pca_decomposition",
    "GridMode",
    "Metric",
    "PatchingExperiment",
    "PatchPair",
    "SignatureGrid",
    "make_patch_pairs",
    "nld",
    "prefix_patch_grid",
    "suffix_patch_grid",
    "window_patch_grid",
    "Probe",
    "ProbeCurves",
    "ProbeData",
    "collect_layer_features",
    "collect_probe_data",
    "embed_registers",
    "probe_by_length",
    "probe_curves",
    "probe_length_matrix",
    "split_by_document",
    "train_probe",
]
