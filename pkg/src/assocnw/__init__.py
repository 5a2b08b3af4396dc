"""Online kernel density models, Nadaraya-Watson completion and a learned speed controller."""
__version__ = "0.1.0"

from .associate import (AssociateResult, LocalLinearFit, PlausibilityReference, associate,
                        classify, detect_corrupt, local_linear_fit, nw_estimate, plausibility)
from .density import (EmptyModelError, Kernel, MixtureModel, ModelFormatError, deserialize,
                      kernel_eval, log_kernel_eval, serialize)
from .kernels import BACKEND

__all__ = [
    "AssociateResult", "BACKEND", "EmptyModelError", "Kernel", "LocalLinearFit", "MixtureModel",
    "ModelFormatError", "PlausibilityReference", "associate", "classify", "detect_corrupt",
    "deserialize", "kernel_eval", "local_linear_fit", "log_kernel_eval", "nw_estimate",
    "plausibility", "serialize",
]
