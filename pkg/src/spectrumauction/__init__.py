"""Truthful secondary-spectrum auctions with spatial and temporal reuse."""

from .distributions import (
    BidDistribution,
    DomainError,
    RangeError,
    TruncatedExponential,
    TruncatedGaussian,
    UniformUnit,
    inverse_virtual_bid,
    virtual_bid,
)
from .exact import BudgetExceededError, ExactAllocation, solve_ip_exact
from .greedy import mgca_allocate, mgca_critical_values
from .lp import LinearProgram, LpSolution, LpStatus, solve_lp
from .mechanisms import (
    Allocator,
    AuctionOutcome,
    CATE_ALPHA,
    CateDecomposition,
    ConfigurationError,
    DecompositionError,
    MechanismConfig,
    Objective,
    UndefinedPaymentError,
    cate_decompose,
    cate_payment,
    cate_run,
    mdca_critical_payment,
    run_framework,
    vcg_payments,
)
from .model import (
    AuctionInstance,
    Channel,
    ConflictStructure,
    Disk,
    GeometryMode,
    Request,
    build_conflict_structure,
    build_conflict_tensor,
    build_location_matrix,
    check_allocation,
    instance_from_dict,
    instance_to_dict,
    segment_timeline,
    validate_instance,
)
from .relaxation import (
    FractionalAllocation,
    IntegralAllocation,
    Lp2System,
    allocation_probability,
    build_lp2,
    conditional_expected_weight,
    conditional_probability,
    dca_allocate,
    expected_weight,
    mdca_allocate,
    randomized_round,
    solve_lp2,
)
from .sim import (
    MechanismSetting,
    MetricsRow,
    MetricsTable,
    ScenarioConfig,
    evaluate,
    generate_scenario,
    reference_optimum,
    run_experiment,
)

__version__ = "0.1.0"
