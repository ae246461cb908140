"""Certified lower bounds for functions on finite abelian groups.

The pipeline: pick a character support from an approximate square root of
the function, assemble the Gram-matrix SDP on that support, solve it with a
first-order splitting method, sharpen with subgradient descent on the
eigenvalue-penalized residual objective, and emit a self-contained JSON
certificate that third parties can re-verify.
"""

from .abelian import (DualIndex, GroupElement, GroupSpec, char_eval,
                      dual_combine, dual_inverse, fft, ifft)
from .cnf import (Clause, CnfFormula, characteristic_function, count_falsified,
                  parse_dimacs)
from .errors import (CertificateError, DenseCapExceeded, DimacsError,
                     DimensionMismatch, FsosError, RoundingError, SolverError,
                     SparsityCapExceeded)
from .gfunc import GroupFunction, brute_force_min
from .support import (SqrtPoly, SupportSet, compose_poly, minimax_sqrt_poly,
                      select_support, sqrt_coeff_error_check)

__version__ = "0.1.0"
