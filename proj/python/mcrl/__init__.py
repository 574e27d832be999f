"""Python access to the mcrl domain-adaptation core."""

from ._core import (
    ContractViolation,
    InvalidArgument,
    __version__,
    generate,
    macro_f1,
    median_bandwidth,
    mmd2,
    run,
    topk_accuracy,
)

__all__ = [
    "ContractViolation",
    "InvalidArgument",
    "__version__",
    "generate",
    "macro_f1",
    "median_bandwidth",
    "mmd2",
    "run",
    "topk_accuracy",
]
