"""Exploration modes over a spec and a model."""

from .instance import (
    ExploreError,
    GearInstance,
    SearchOutcome,
    build_instance,
    find_stable,
    interface_consistent,
    model_consistent,
)
from .modes import ModeReport, certify, query, synthesize, verify
from .optimize import OptimizationResult, Scaling, ThresholdState, optimize, optsyn
