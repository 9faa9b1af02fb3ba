"""Exact and approximation solvers for hard-capacitated k-facility location."""

from caploc.model import (
    Client,
    CostBreakdown,
    Facility,
    InfeasibleError,
    Instance,
    IntegralSolution,
    ParseError,
    UnboundedError,
    check_feasible,
    evaluate,
    gen_figure1,
    gen_random,
    gen_subset_sum,
    parse_instance,
    serialize_instance,
    validate_instance,
)

__all__ = [
    "Client",
    "CostBreakdown",
    "Facility",
    "InfeasibleError",
    "Instance",
    "IntegralSolution",
    "ParseError",
    "UnboundedError",
    "check_feasible",
    "evaluate",
    "gen_figure1",
    "gen_random",
    "gen_subset_sum",
    "parse_instance",
    "serialize_instance",
    "validate_instance",
]
