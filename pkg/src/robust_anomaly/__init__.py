"""Robust statistics for anomaly detection.

Univariate robust location and scale, MCD/MRCD scatter, Stahel-Donoho
outlyingness, LTS regression, robust PCA, robust discriminant analysis,
trimmed k-means and cellwise outlier maps.
"""

__version__ = "0.1.0"

from .cellwise import (
    CellFlags,
    CellMapGrid,
    block_aggregate,
    contaminate_cells,
    flag_cells,
    rowmap,
    rowwise_flags,
)
from .covariance import (
    DistanceReport,
    LocationScatter,
    MinCovDet,
    OutlyingnessReport,
    RegularizedMinCovDet,
    c_step,
    classical_moments,
    dd_plot_data,
    exhaustive_mcd,
    fast_mcd,
    mahalanobis_distances,
    make_target,
    mrcd,
    mrcd_c_step,
    projection_outlyingness,
    sample_directions,
    stahel_donoho,
    subset_determinant,
    tolerance_ellipse,
)
from .distributions import chi2_cdf, chi2_cutoff, chi2_ppf
from .exceptions import (
    DegenerateScaleError,
    ExactFitError,
    InputError,
    NonConvergenceWarning,
    RobustError,
    SingularMatrixError,
)
from .models import (
    Classification,
    ClusterResult,
    DiscriminantModel,
    RobustDiscriminantAnalysis,
    TrimmedKMeans,
    classify,
    concentration_step,
    lda_scores,
    qda_scores,
    train_discriminant,
    trimmed_kmeans,
    trimmed_objective,
)
from .pca import (
    PCAModel,
    PCAOutlierMap,
    RobustPCA,
    classical_pca,
    pca_distances,
    principal_angle,
    robust_pca,
    spatial_median,
    spherical_pca,
)
from .regression import (
    LTSRegression,
    RegressionFit,
    RegressionOutlierMap,
    exhaustive_lts,
    fast_lts,
    ls_fit,
    lts_c_step,
    lts_objective,
    lts_scale,
    regression_outlier_map,
    reweighted_ls,
)
from .univariate import (
    PsiSpec,
    RobustStandardizer,
    UnivariateReport,
    boxplot_fences,
    iqr_normalized,
    kth_pairwise_difference,
    m_location,
    mad,
    median,
    qn,
    quartiles,
    robust_scores,
    z_scores,
)
