"""subkernel: subordinate random walks on discrete metric measure spaces.

Modules
-------
bernstein    Bernstein functions, subordinator weights and their laws
scaling      weak lower/upper scaling certificates
space        lattice windows, gaskets, edge-list graphs, volume certificates
markov       base chains, n-step kernels, exit/hitting dynamic programming
subordinate  subordinate kernels, jump kernels, Poissonization, Green functions
estimates    target estimates and comparability reports
cli          the ``subkernel`` command
"""

from . import bernstein, estimates, markov, scaling, space, subordinate
from .bernstein import BernsteinFunction, SubordinatorWeights, weights
from .kernels import BACKEND
from .markov import Kernel
from .space import DiscreteSpace, build_gasket, build_lattice
from .subordinate import SubordinateKernel, subordinate as subordinate_kernel

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BernsteinFunction", "DiscreteSpace", "Kernel", "SubordinateKernel", "SubordinatorWeights",
    "bernstein", "build_gasket", "build_lattice", "estimates", "markov", "scaling", "space",
    "subordinate", "subordinate_kernel", "weights",
]
