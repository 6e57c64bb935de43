"""Deep restricted kernel machine stacks for unsupervised representation learning.

The package trains stacks of kernel PCA layers whose latent codes are tied
together by one orthogonality constraint, using a quadratic penalty method
with warm starts.  On top of the trained codes it provides out-of-sample
encoding, RBF pre-image denoising, a classical kernel PCA denoising
baseline, disentanglement metrics, synthetic 2-D datasets, and a CLI that
drives the bundled experiments.

Data conventions: data matrices are numpy float64 arrays with one point
per row; latent matrices H store one latent dimension per row and one
training point per column.
"""

from .config import ExperimentConfig, canonical_json, load_config, parse_config
from .datasets import (
    FactorDataset,
    ShapeSpec,
    add_noise,
    generate_factor_toy,
    generate_shape,
    half_circle,
    load_csv,
    ring,
    save_csv,
    spiral,
    square,
    square_and_spiral,
    two_squares_spiral_ring,
)
from .encoder import (
    PreimageSettings,
    TrainedModel,
    drkm_denoise,
    drkm_denoise_batch,
    encode,
    encode_batch,
    kpca_denoise_batch,
    reconstruction_error,
)
from .errors import (
    ConfigError,
    DegenerateSplit,
    DivergenceError,
    DrkmError,
    InfeasibleConstraint,
    InvalidArgument,
    InvalidMatrix,
    ParseError,
    PreimageCollapse,
)
from .kernels import KernelSpec, center_cross_kernel, center_kernel_matrix, kernel_matrix
from .linalg import sym_eig_topk
from .metrics import (
    MetricReport,
    MetricSettings,
    equal_frequency_codes,
    evaluate_metrics,
    irs,
    mig,
    mutual_information,
    sap,
)
from .model import LayerConfig, ModelConfig, ModelState, replace_bandwidth
from .optimizer import (
    PenaltySchedule,
    RoundRecord,
    TrainReport,
    init_layerwise_kpca,
    init_random,
    train,
)

__version__ = "0.1.0"
