from dataclasses import dataclass
from typing import Optional

import numpy as np

from opensys.errors import ContractViolation
from opensys.helpers import DEBUG, block_generator

NOISE_STREAM = 10


@dataclass(frozen=True, eq=False)
class NoisePath:
  """
  Brownian increments on a uniform grid: increments[k] = W_{(k+1)dt} - W_{k dt}, W_0 = 0.
  `offset` counts the steps dropped by shifts since the path was sampled.
  """
  dt: float
  increments: np.ndarray
  seed: Optional[int] = None
  offset: int = 0

  def __post_init__(self):
    if not self.dt > 0:
      raise ContractViolation(f"Time step must be positive, got {self.dt}")
    increments = np.array(self.increments, dtype=np.float64)
    if increments.ndim != 2:
      raise ContractViolation(f"Increments must be a steps × d array, got shape {increments.shape}")
    increments.setflags(write=False)
    object.__setattr__(self, "increments", increments)

  @property
  def steps(self) -> int:
    return self.increments.shape[0]

  @property
  def d(self) -> int:
    return self.increments.shape[1]


def sample_path(d: int, dt: float, steps: int, seed: int, index: int = 0) -> NoisePath:
  """Path number `index` under `seed`; N(0, dt) entries from the ziggurat sampler."""
  if d < 1:
    raise ContractViolation(f"Noise dimension must be positive, got {d}")
  if not dt > 0:
    raise ContractViolation(f"Time step must be positive, got {dt}")
  if steps < 1:
    raise ContractViolation(f"Step count must be positive, got {steps}")
  rng = block_generator(seed, NOISE_STREAM, index)
  if DEBUG >= 3: print(f"Sampling noise path {index} (seed {seed}): {steps} steps of {dt} in {d} dimensions")
  return NoisePath(dt, rng.standard_normal((steps, d))*np.sqrt(dt), seed)


def shift_path(w: NoisePath, k: int) -> NoisePath:
  """θ_s with s = k dt: (θ_s ω)(t) = ω(t + s) - ω(s), i.e. drop the first k increments."""
  if not 0 <= k <= w.steps:
    raise ContractViolation(f"Shift of {k} steps out of range for a path of {w.steps} steps")
  return NoisePath(w.dt, w.increments[k:], w.seed, w.offset + k)


def path_values(w: NoisePath) -> np.ndarray:
  """(steps + 1) × d array of W_{k dt}, starting at 0."""
  return np.vstack([np.zeros((1, w.d)), np.cumsum(w.increments, axis=0)])
