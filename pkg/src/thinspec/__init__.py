"""Spectral asymptotics of the Dirichlet Laplacian on thin domains."""
from .direct_solver import (
    DirectSolveResult,
    GridSpec,
    MappedOperatorCoefficients,
    assemble_mapped_operator,
    smallest_eigenvalues,
    solve_masked_2d,
    solve_thin_domain,
)
from .errors import ThinSpecError
from .estimators import DirectEigenSolver, ThinDomainAsymptotics
from .expansion import (
    ExpansionResult,
    Psi1Corrector,
    SplittingMatrix,
    build_psi1,
    degenerate_c3_matrix,
    ellipsoid_expansion,
    evaluate_expansion,
    first_eigenvalue_coeffs,
    joseph_ellipse_eccentricity,
)
from .moments import MonomialPolynomial, gaussian_moment, hermite_inner, polynomial_inner
from .oscillator import (
    HermiteEigenfunction,
    OscillatorSpectrum,
    hermite_eigenfunction,
    oscillator_spectrum,
    schrodinger_solve_numeric,
)
from .width_models import (
    TaylorWidthData,
    WidthModel,
    ellipsoid,
    ellipsoid_taylor,
    eval_width,
    extract_taylor,
    lemniscate,
    locate_max,
    make_model,
    rectangle,
)

__version__ = "0.1.0"
