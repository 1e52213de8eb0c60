"""Numerical functional calculus for Fuchs-type (cone) differential operators.

Indicial-root analysis of conormal symbols, keyhole-contour complex powers,
resolvent-decay and imaginary-power scans, weighted-Sobolev discretization
on log-radial grids, and parabolic solvers on model cones.
"""

from .calculus import (
    CalculusReport,
    PowerRequest,
    bip_scan,
    dunford_power,
    dunford_powers,
    hardy_check,
    imaginary_power,
    matrix_p_norm,
    power_oracle,
    resolvent_apply,
    resolvent_norm_scan,
    spectral_projection_e0,
    spectrum,
)
from .discretize import (
    DiscreteOperator,
    LogGrid,
    WeightedNormSpec,
    assemble,
    kappa_apply,
    weighted_norm,
)
from .errors import (
    ConecalcError,
    ConfigError,
    ContourError,
    GridError,
    OracleError,
    ResolventError,
    SolverError,
    StripBoundaryError,
    SymbolError,
)
from .geometry import (
    ContourQuadrature,
    KeyholeRegion,
    Sector,
    contour_nodes,
    in_sector,
    lambda_power,
)
from .pde import (
    CauchyProblem,
    Grid2d,
    QuasilinearProblem,
    assemble_ftilde,
    max_reg_diagnostic,
    solve_heat,
    solve_quasilinear,
)
from .symbols import (
    CrossSectionSpectrum,
    FuchsOperator,
    IndicialRoot,
    SingularFunction,
    WeightData,
    check_ellipticity,
    check_pq_condition,
    conormal_symbol,
    domain_gap_dimension,
    indicial_roots,
    make_cone_laplacian,
    singular_functions,
    symbol_eval,
    weight_line_invertible,
)

__version__ = "0.1.0"
