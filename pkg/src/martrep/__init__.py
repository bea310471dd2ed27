"""Exact finite-space martingale calculus, progressive enlargement and
representation, with a Monte Carlo engine for a mixed Brownian/jump model."""
from .errors import (
    AssumptionError,
    ContractError,
    DegenerateCellError,
    InternalConsistencyError,
    MartrepError,
    StructuralError,
    UnsupportedModelError,
)
from .finite_space import (
    FiniteFilteredSpace,
    Filtration,
    MeasureVector,
    ProcessTable,
    RandomTimeTable,
    cond_exp,
    join_filtrations,
    natural_filtration_of_occurrence,
)
from .enlargement import JointModel
from .laws import DENSITY, MixedModel, RandomTimeLaw

__version__ = "0.1.0"
