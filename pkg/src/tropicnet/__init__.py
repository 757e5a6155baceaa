"""Max-plus / min-plus neural networks trained by sparse subgradient descent.

The package keeps every max/min reduction of the forward pass inside
tournament trees so that the worst-sample loss, its argmax sample and the
entire forward state of a dataset can be repaired in logarithmic time per
touched weight instead of being recomputed.
"""

from .sct import MaxTree, MinTree, build
from .model import (
    ForwardTrace,
    MinMaxModel,
    NumericalError,
    ZeroHiddenModel,
    forward_trace,
    forward_zero_hidden,
    logsumexp,
    morph_perceptron,
    signed_features,
)
from .subgrad import (
    ActiveSet,
    GradEntry,
    Layer,
    SparseGrad,
    active_set,
    active_set_zero_hidden,
    subgrad_min_max,
    subgrad_zero_hidden,
)
from .initializers import (
    InitSpec,
    gaussian_init,
    glorot_uniform_init,
    structured_init,
    uniform_init,
)
from .forest import ConsistencyError, TraceForest
from .trainer import (
    DenseEngine,
    SgdEngine,
    TrainConfig,
    TrainState,
    benchmark,
    constant_step,
    init_state,
    polyak_step,
    train,
    train_avg_sgd,
    train_max,
)
from .approx import (
    PyramidBank,
    build_bank,
    build_classifier_bank,
    covering_radius,
    eval_h,
    eval_pyramid,
)
from .data import Dataset, ParseError, load_idx, load_iris_csv, normalize, split
from .metrics import EvalReport, evaluate, gamma, sparsity_study
from .checkpoint import load_model, save_model

__version__ = "0.1.0"
