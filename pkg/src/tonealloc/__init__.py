"""Distributed tone pricing for uplink OFDM power and tone allocation.

A numpy library plus a deterministic message-passing simulator: users answer
tone prices with water-filling best responses under self-noise and SNR caps,
the base station runs reduced projected-subgradient price updates, and
centralized oracles (a high-iteration dual solve and an exhaustive grid
search) certify the recovered allocations.
"""

__version__ = "0.1.0"

from .basestation import (
    Allocation,
    PriceState,
    allocation_objective,
    check_converged,
    kkt_residual,
    price_update,
    recover_allocation,
    reduced_update_set,
)
from .errors import (
    NumericalError,
    SizeError,
    ToneAllocError,
    UnboundedProblemError,
    ValidationError,
)
from .messages import Bid, PriceAnnounce
from .model import (
    Scenario,
    cap_power,
    cap_reachable,
    capped_rate,
    effective_sinr,
    rate_derivative,
)
from .oracle import (
    ExhaustiveResult,
    OracleResult,
    dual_oracle_solve,
    dual_upper_bound,
    exhaustive_grid_solve,
)
from .protocol import (
    DeterministicNetwork,
    NetworkModel,
    RunConfig,
    RunResult,
    Simulation,
    deliver,
    run_until_converged,
)
from .scenario_io import (
    ScenarioRanges,
    generate_random_scenario,
    load_scenario,
    save_scenario,
)
from .trace import TraceRecord, read_trace, write_trace
from .user import (
    BestResponse,
    BidSolution,
    UserState,
    build_bid,
    per_tone_best_response,
    power_price_bisection,
    solve_price_responses,
)

__all__ = [
    "__version__",
    "Scenario", "effective_sinr", "capped_rate", "rate_derivative",
    "cap_power", "cap_reachable",
    "BestResponse", "UserState", "BidSolution", "per_tone_best_response",
    "power_price_bisection", "solve_price_responses", "build_bid",
    "PriceState", "Allocation", "price_update", "reduced_update_set",
    "kkt_residual", "check_converged", "recover_allocation",
    "allocation_objective",
    "PriceAnnounce", "Bid",
    "NetworkModel", "RunConfig", "RunResult", "Simulation",
    "DeterministicNetwork", "deliver", "run_until_converged",
    "OracleResult", "ExhaustiveResult", "dual_oracle_solve",
    "dual_upper_bound", "exhaustive_grid_solve",
    "ScenarioRanges", "load_scenario", "save_scenario",
    "generate_random_scenario",
    "TraceRecord", "write_trace", "read_trace",
    "ToneAllocError", "ValidationError", "SizeError",
    "UnboundedProblemError", "NumericalError",
]
