"""Factor-model biclustering of matrix-valued time series."""

from .bicluster import (
    KMeansConfig,
    bicluster_from_loadings,
    bicluster_pipeline,
    cluster_count_upper_bound,
    kmeans_rows,
    misclustering_rate,
    similarity_matrix,
)
from .core import (
    BiclusterResult,
    FactorNumbers,
    LoadingSet,
    MatrixSeries,
    RatioDiagnostics,
    space_distance,
    sym_eig_top,
)
from .estimate import (
    eigen_ratios,
    estimate_cluster_loadings,
    estimate_factor_numbers,
    estimate_global_loadings,
    two_largest_local_maxima,
)
from .estimators import MatrixBiclustering, MatrixFactorModel
from .evaluate import (
    ReplicationReport,
    RollingReport,
    baseline_loadings,
    reconstruct,
    rolling_validation,
    run_replications,
)
from .exceptions import *  # noqa: F401,F403
from .io import RunConfig, load_tensor_csv, preprocess, save_tensor_csv
from .simulate import ScenarioSpec, generate, make_scenario_preset
from .spectral import (
    aggregate_M0,
    aggregate_M_projected,
    aggregate_Mstar0,
    aggregate_Mstar_projected,
    lag_cross_cov,
    residual_series,
)

__version__ = "0.1.0"
