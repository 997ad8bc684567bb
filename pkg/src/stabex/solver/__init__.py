"""Delta-complete satisfiability kernel."""

from .kernel import (
    Box,
    CounterExample,
    DeltaSat,
    SatResult,
    SolverConfig,
    Unknown,
    Unsat,
    Valid,
    ValidResult,
    check_sat,
    check_valid,
    enclose,
    exclude_region,
)
