from .kernel import (
  StateSpace, MarkovKernel, FiniteMeasure, Observable, apply_to_observable, apply_to_measure, compose, power, is_deterministic, identity, from_point_map,
  lift_observable, stationary_distribution
)

__all__ = [
  "StateSpace", "MarkovKernel", "FiniteMeasure", "Observable", "apply_to_observable", "apply_to_measure", "compose", "power", "is_deterministic", "identity",
  "from_point_map", "lift_observable", "stationary_distribution"
]
