"""Exact and approximate analysis of spatially dependent Parrondo games."""
from .chains import (
    GameParams,
    LumpabilityError,
    SignedMatrix,
    StochasticMatrix,
    build_dihedral,
    build_full,
    build_full_A,
    build_full_Aprime,
    build_full_B,
    build_li,
    build_li_Aprime,
    build_li_B,
    mix,
    reduce_averaged,
    reduce_lumped,
    signed,
)
from .lumpability import LumpabilityReport, check_lumpable, check_symmetry_condition
from .solver import (
    MultipleRecurrentClasses,
    NumericalFailure,
    ProfitReport,
    StationaryResult,
    mean_profit,
    mu_closed_form_N4,
    mu_exact,
    mu_li,
    stationary,
    stationary_birth_death,
)
from .state_space import (
    DihedralGroup,
    Partition,
    PlayerState,
    apply_permutation,
    count_partition,
    dihedral_partition,
    flip,
    neighbor_winners,
    transfer,
)

__version__ = "0.1.0"
