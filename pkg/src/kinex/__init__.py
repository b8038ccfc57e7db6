"""kinex: Monte Carlo and kinetic-equation toolkit for money-exchange models.

Agents trade money under configurable pairwise rules and boundary/debt
policies; the toolkit runs the dynamics (compiled kernel with a pure-Python
fallback), fits the resulting distributions, checks small systems against
exact oracles, and integrates the matching mean-field kinetic equation.
"""

from .boundaries import (
    BankState,
    DebtCap,
    InterestRates,
    NoDebt,
    ReserveRatioBank,
    TransferStatus,
    TwoSided,
    Unlimited,
    UpperBound,
)
from .engine import (
    EngineUnavailableError,
    RunResult,
    active_engine,
    available_engines,
    run_simulation,
    set_engine,
)
from .histogram import MoneyHistogram, histogram_from_balances, histogram_ks, pool_histograms
from .ledger import (
    AgentLedger,
    ConfigError,
    SimConfig,
    TransferOutcome,
    attempt_transfer,
    conservation_report,
    init_ledger,
    validate_config,
)
from .rules import (
    FixedAmount,
    Multiplicative,
    RandomSavingPropensity,
    SavingPropensity,
    UniformRandomFraction,
)
from .experiment import (
    ConfigFileError,
    ExperimentSpec,
    load_document,
    oracle_check,
    run_experiment,
    run_sweep,
    spec_from_document,
)
from .kinetic import (
    KineticGrid,
    TransitionKernel,
    detailed_balance_residual,
    kernel_symmetry_check,
    stationary_solve,
    step_master_equation,
)

__version__ = "0.1.0"

__all__ = [
    "AgentLedger",
    "BankState",
    "ConfigError",
    "ConfigFileError",
    "DebtCap",
    "EngineUnavailableError",
    "ExperimentSpec",
    "FixedAmount",
    "InterestRates",
    "KineticGrid",
    "MoneyHistogram",
    "Multiplicative",
    "NoDebt",
    "RandomSavingPropensity",
    "ReserveRatioBank",
    "RunResult",
    "SavingPropensity",
    "SimConfig",
    "TransferOutcome",
    "TransferStatus",
    "TransitionKernel",
    "TwoSided",
    "UniformRandomFraction",
    "Unlimited",
    "UpperBound",
    "active_engine",
    "attempt_transfer",
    "available_engines",
    "conservation_report",
    "detailed_balance_residual",
    "histogram_from_balances",
    "histogram_ks",
    "init_ledger",
    "kernel_symmetry_check",
    "load_document",
    "oracle_check",
    "pool_histograms",
    "run_experiment",
    "run_simulation",
    "run_sweep",
    "set_engine",
    "spec_from_document",
    "stationary_solve",
    "step_master_equation",
    "validate_config",
    "__version__",
]
