"""Stability-aware exploration of machine-learning models.

Certification, querying, verification, synthesis and optimization of
models under knob perturbations, decided with an interval
branch-and-prune satisfiability kernel.
"""

__version__ = "0.1.0"
