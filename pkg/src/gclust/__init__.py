"""Clustering a time series of interaction graphs.

Workflow: parse timestamped interaction records, bin them into a sequence
of weighted graphs, vectorize into a non-negative matrix, denoise by
iterated singular value thresholding, factorize non-negatively, and choose
the number of graph clusters with an AICc criterion. Diagnostics quantify
vertex-contraction quality, and the evaluation module benchmarks the
pipeline against medoid- and mixture-based baselines on simulated data.
"""

from .ingest import (
    ContractionMap,
    DataMatrix,
    EventLog,
    GraphSequence,
    ParseError,
    TemporalPartition,
    contract_vertices,
    devectorize,
    load_data_matrix,
    parse_events,
    read_contraction_map,
    read_event_file,
    save_data_matrix,
    temporal_bin,
    vectorize,
)
from .spectral import (
    SvdTriple,
    SvtResult,
    ase,
    clip,
    isvt,
    singular_values,
    stfp_dim,
    svt,
    truncated_svd,
    usvt,
    usvt_rank,
)
from .nmf import (
    Factorization,
    FixedPointError,
    best_of_restarts,
    compare_solvers,
    fixed_point_residuals,
    nmf_kl,
    nmf_ls,
)
from .model_selection import (
    GclustResult,
    ModelDimResult,
    ModelScore,
    aicc,
    extract_labels,
    gclust,
    get_gclust_model_dim,
)
from .diagnostics import (
    GaussianBaseline,
    ResidualMatrix,
    contraction_mse,
    gaussian_singular_baseline,
    residual_matrix,
    selection_matrix,
    sketch,
    svt_mse,
)
from .evaluation import (
    BlockModelSpec,
    ExperimentReport,
    MonteCarloConfig,
    adjusted_rand_index,
    community_pair,
    default_block_patterns,
    generate_swimmer,
    gmm_pca_cluster,
    pairwise_frobenius,
    pamk,
    run_monte_carlo,
    simulate_block_poisson,
    two_pattern_exact_factors,
    two_pattern_matrix,
    zhu_ghodsi_elbow,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
