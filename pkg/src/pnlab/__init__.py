"""Numerics on the space of positive definite matrices: Iwasawa
coordinates, reduction, Selberg power and spherical functions, invariant
operators, Eisenstein series, volumes and real tori."""

from .core import (FullIwasawa, PartialIwasawa, distance, full_iwasawa, geodesic,
                   laplace_beltrami_oracle, partial_iwasawa)
from .eisenstein import (eisenstein_series, grenier_operator, k_bessel_rank1,
                         stable_chain_check)
from .errors import Inconclusive, InputError, NumericalError, PnlabError
from .operators import apply_Dk, eigenvalue_lambda, laplacian_paper
from .reduction import (grenier_membership, grenier_reduce, is_minkowski_reduced,
                        minkowski_reduce, sandwich_probe)
from .selberg import power_function, spherical_function
from .tori import hg_equivalent, polarizability_check, tori_isomorphic
from .volume import siegel_volume, volume_mc

__version__ = "0.1.0"
