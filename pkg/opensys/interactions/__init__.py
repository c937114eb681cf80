from .chain import (
  InteractionChain, Trajectory, MonteCarloEstimate, chain_of, reduce_n_exact, reduce_n_monte_carlo, sample_trajectory, transition_counts
)

__all__ = [
  "InteractionChain", "Trajectory", "MonteCarloEstimate", "chain_of", "reduce_n_exact", "reduce_n_monte_carlo", "sample_trajectory", "transition_counts"
]
