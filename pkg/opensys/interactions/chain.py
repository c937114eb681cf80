from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from opensys.errors import ContractViolation, EnvironmentTooLarge
from opensys.helpers import DEBUG, MAX_EXACT_TUPLES, block_generator, map_blocks, progress
from opensys.markov.kernel import FiniteMeasure, State, StateSpace
from opensys.dilation.system import ProductDynamicalSystem

# stream ids under a shared seed
MONTE_CARLO_STREAM = 0
TRAJECTORY_STREAM = 1


@dataclass(frozen=True)
class InteractionChain:
  """
  Ŝ(x, y) = (X(x, y₁), Θ(y)) on E × F^ℕ*: one interaction with a fresh copy of the environment per step.
  Only the first `horizon` copies are ever materialized.
  """
  base: ProductDynamicalSystem
  horizon: int

  def __post_init__(self):
    if self.horizon < 1:
      raise ContractViolation(f"Horizon must be at least 1, got {self.horizon}")

  @property
  def space(self) -> StateSpace:
    return self.base.system_space

  def check_steps(self, n: int, allow_zero: bool = False):
    if n < (0 if allow_zero else 1):
      raise ContractViolation(f"Step count must be {'nonnegative' if allow_zero else 'positive'}, got {n}")
    if n > self.horizon:
      raise ContractViolation(f"Step count {n} exceeds the chain horizon {self.horizon}")


def chain_of(sys: ProductDynamicalSystem, horizon: int) -> InteractionChain:
  return InteractionChain(sys, horizon)


@dataclass(frozen=True)
class Trajectory:
  space: StateSpace
  states: Tuple[int, ...]
  env_draws: Tuple[int, ...]

  def __post_init__(self):
    if len(self.states) != len(self.env_draws) + 1:
      raise ContractViolation(f"A trajectory of {len(self.env_draws)} steps needs {len(self.env_draws) + 1} states, got {len(self.states)}")

  @property
  def steps(self) -> int:
    return len(self.env_draws)

  def labels(self) -> Tuple[str, ...]:
    return tuple(self.space.label(x) for x in self.states)

  def to_dict(self) -> dict:
    return {"states": list(self.labels()), "env_draws": list(self.env_draws)}


@dataclass(frozen=True, eq=False)
class MonteCarloEstimate:
  distribution: FiniteMeasure
  stderr: np.ndarray
  counts: np.ndarray
  samples: int

  def to_dict(self) -> dict:
    return {
      "distribution": self.distribution.weights.tolist(),
      "stderr": self.stderr.tolist(),
      "counts": self.counts.tolist(),
      "samples": self.samples,
    }


def reduce_n_exact(chain: InteractionChain, x: State, n: int, max_tuples: Optional[int] = None) -> FiniteMeasure:
  """
  Exact law of the E-component after n steps, summing ∏ μ(y_k) over every tuple (y_1, ..., y_n) ∈ Fⁿ.
  Tuples are propagated as one array per step, so memory grows like |F|ⁿ.
  """
  chain.check_steps(n)
  sys = chain.base
  m = sys.env.size
  cap = MAX_EXACT_TUPLES if max_tuples is None else max_tuples
  if m**n > cap:
    raise EnvironmentTooLarge("iterate", m**n, cap, "Use Monte Carlo (--mode mc) for this many steps")

  x = chain.space.index_of(x)
  states = np.array([x], dtype=np.int64)
  weights = np.array([1.0])
  for _ in progress(range(n), total=n, desc="exact interactions"):
    # tuple (t, y) is flattened to t*m + y, keeping lexicographic tuple order
    states = sys.x_map[states[:, None], np.arange(m)[None, :]].reshape(-1)
    weights = np.outer(weights, sys.env.weights).reshape(-1)
  if DEBUG >= 2: print(f"Enumerated {weights.size} environment tuples for x={chain.space.label(x)}, n={n}")
  return FiniteMeasure(chain.space, np.bincount(states, weights=weights, minlength=chain.space.size))


def _endpoints(sys: ProductDynamicalSystem, x: int, n: int, draws: np.ndarray) -> np.ndarray:
  states = np.full(draws.shape[0], x, dtype=np.int64)
  for k in range(n):
    states = sys.x_map[states, draws[:, k]]
  return states


def reduce_n_monte_carlo(chain: InteractionChain, x: State, n: int, samples: int, seed: int, threads: Optional[int] = None) -> MonteCarloEstimate:
  """Empirical law of x_n over i.i.d. μ environment draws. Depends only on (seed, samples), not on `threads`."""
  chain.check_steps(n)
  if samples < 1:
    raise ContractViolation(f"Sample count must be positive, got {samples}")
  sys = chain.base
  x = chain.space.index_of(x)

  def run_block(block: int, size: int) -> np.ndarray:
    rng = block_generator(seed, MONTE_CARLO_STREAM, block)
    draws = rng.choice(sys.env.size, size=(size, n), p=sys.env.weights)
    if DEBUG >= 3: print(f"Block {block}: {size} paths")
    return np.bincount(_endpoints(sys, x, n, draws), minlength=chain.space.size)

  counts = np.sum(map_blocks(run_block, samples, threads), axis=0)
  p = counts/samples
  stderr = np.sqrt(p*(1 - p)/samples)
  if DEBUG >= 1: print(f"Monte Carlo x={chain.space.label(x)} n={n} samples={samples} seed={seed}: {p}")
  return MonteCarloEstimate(FiniteMeasure(chain.space, p), stderr, counts, samples)


def sample_trajectory(chain: InteractionChain, x: State, n: int, seed: int) -> Trajectory:
  chain.check_steps(n, allow_zero=True)
  sys = chain.base
  x = chain.space.index_of(x)
  rng = block_generator(seed, TRAJECTORY_STREAM, 0)
  draws = rng.choice(sys.env.size, size=n, p=sys.env.weights)
  states = [x]
  for y in draws:
    states.append(int(sys.x_map[states[-1], y]))
  return Trajectory(chain.space, tuple(states), tuple(int(y) for y in draws))


def transition_counts(trajectory: Trajectory) -> np.ndarray:
  """counts[i, j] = number of steps x_k = i → x_{k+1} = j."""
  n = trajectory.space.size
  states = np.array(trajectory.states, dtype=np.int64)
  counts = np.zeros((n, n), dtype=np.int64)
  np.add.at(counts, (states[:-1], states[1:]), 1)
  return counts
