from .kernels import (
    Constant,
    Kernel,
    KernelSpec,
    Linear,
    Periodic,
    Product,
    SquaredExponential,
    Sum,
    kernel_eval,
    kernel_from_dict,
    kernel_to_dict,
    perturb_kernel,
)
from .model import (
    GprModel,
    Preprocess,
    fit,
    fit_arrays,
    log_marginal_likelihood,
    model_from_dict,
    model_to_dict,
    predict,
    predict_batch,
)
from .tuning import (
    CandidateConfig,
    refit_with_structure,
    rolling_origin_splits,
    tune_base_model,
)

__all__ = [
    "Constant", "Kernel", "KernelSpec", "Linear", "Periodic", "Product",
    "SquaredExponential", "Sum", "kernel_eval", "kernel_from_dict",
    "kernel_to_dict", "perturb_kernel", "GprModel", "Preprocess", "fit",
    "fit_arrays", "log_marginal_likelihood", "model_from_dict",
    "model_to_dict", "predict", "predict_batch", "CandidateConfig",
    "refit_with_structure", "rolling_origin_splits", "tune_base_model",
]
