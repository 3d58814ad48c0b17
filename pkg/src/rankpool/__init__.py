"""Fixed-length sequence descriptors from rank pooling, with gradients.

The functional core lives in the submodules (pooling, hierarchy, implicit,
training, ...); the estimators module wraps it in scikit-learn compatible
transformers and classifiers.
"""

from .errors import (DataFormatError, DegenerateLabels, DegenerateUpdate, InvalidSequence,
                     NotConverged, PrefixTooShort, RankPoolError, SingularMatrix,
                     SolverDidNotConverge)
from .estimators import (AveragePooling, DiscriminativeRankPooling, EncodingClassifier,
                         FrameMap, HierarchicalRankPooling, MaxPooling, RankPooling,
                         RecursiveRankPooling, TemporalPyramid)
from .hierarchy import (HierarchyConfig, LayerOutput, hrp_encode, rank_pool_layer,
                        recursive_encode, recursive_rank_pool)
from .implicit import (ActiveSet, HessianFactor, active_set, grad_wrt_scalar_param,
                       grad_wrt_w, hessian, vjp_inputs)
from .maps import MapKind, apply_map, l2_normalize, map_forward, relu, ser, ssr, tvm_smooth
from .pooling import avg_pool, max_pool, rank_pool, temporal_pyramid
from .solver import SvrConfig
from .synth import (SynthSpec, direct_inverse, fd_gradient, fd_tangent, gen_latent_ramp,
                    gen_noise, gen_order_classes, generate, oracle_svr_1d)
from .training import (AffineMap, FrozenIdentity, LossKind, Model, SgdConfig, TrainResult,
                       lr_at, sgd_step, softmax_prob, train_discriminative_rp,
                       train_end_to_end, train_linear_classifier)
from .types import (Dataset, Encoding, FrameSequence, RankPoolSolution, Violation,
                    validate_dataset)

__version__ = "0.1.0"

__all__ = [
    "ActiveSet", "AffineMap", "AveragePooling", "DataFormatError", "Dataset",
    "DegenerateLabels", "DegenerateUpdate", "DiscriminativeRankPooling", "Encoding",
    "EncodingClassifier", "FrameMap", "FrameSequence", "FrozenIdentity",
    "HessianFactor", "HierarchicalRankPooling", "HierarchyConfig", "InvalidSequence",
    "LayerOutput", "LossKind", "MapKind", "MaxPooling", "Model", "NotConverged",
    "PrefixTooShort", "RankPoolError", "RankPoolSolution", "RankPooling",
    "RecursiveRankPooling", "SgdConfig", "SingularMatrix", "SolverDidNotConverge",
    "SvrConfig", "SynthSpec", "TemporalPyramid", "TrainResult", "Violation",
    "active_set", "apply_map", "avg_pool", "direct_inverse", "fd_gradient",
    "fd_tangent", "gen_latent_ramp", "gen_noise", "gen_order_classes", "generate",
    "grad_wrt_scalar_param", "grad_wrt_w", "hessian", "hrp_encode", "l2_normalize",
    "lr_at", "map_forward", "max_pool", "oracle_svr_1d", "rank_pool",
    "rank_pool_layer", "recursive_encode", "recursive_rank_pool", "relu", "ser",
    "sgd_step", "softmax_prob", "ssr", "temporal_pyramid", "train_discriminative_rp",
    "train_end_to_end", "train_linear_classifier", "tvm_smooth", "validate_dataset",
]
