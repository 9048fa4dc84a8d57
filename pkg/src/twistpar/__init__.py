"""Numerical toolkit for twisted bilinear multipliers and their paraproduct decompositions.

Submodules
----------
grid
    Periodic grids, transforms, Sobolev norms and test-function generators.
cutoffs
    Smooth cutoffs, dyadic partitions and Schwartz profiles.
operators
    Twisted multipliers, spatial symbols and twisted paraproducts.
decompose
    Dyadic slicing of symbols into sums of paraproducts.
harness
    Configuration, experiments and the ``twistpar`` command line.
"""

from .cutoffs import *  # noqa: F401,F403
from .decompose import *  # noqa: F401,F403
from .grid import *  # noqa: F401,F403
from .operators import *  # noqa: F401,F403

# keep the submodule reachable as ``twistpar.decompose``; the function lives inside it
del decompose  # noqa: F821
from . import decompose  # noqa: E402

__version__ = "0.1.0"
