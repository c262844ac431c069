"""Kaczmarz-based hard thresholding solvers for sparse recovery.

Submodules
----------
core        hard thresholding, supports, relative error, random signals
sensing     subsampled Hadamard, Bernoulli and fixed-norm Gaussian operators
schedules   per-epoch row orders (reshuffle, cyclic, with replacement)
solvers     KZ, IHT, KZIHT and KZPT
analysis    numerical checks of the multi-step identity, cross terms, RIP
harness     seeded multi-trial experiments with CSV output
cli         command line front end
"""

__version__ = "0.1.0"
# bumped whenever CSV/JSON/CLI formats change
FORMAT_VERSION = "1"

from .errors import ConfigError, InfeasibleParameters, InvalidArgument, SizeGuardError

__all__ = [
    "__version__",
    "FORMAT_VERSION",
    "ConfigError",
    "InfeasibleParameters",
    "InvalidArgument",
    "SizeGuardError",
]
