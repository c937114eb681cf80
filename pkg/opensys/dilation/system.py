from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from opensys.errors import ContractViolation
from opensys.helpers import DEBUG, STOCHASTIC_TOL, clip_round_off
from opensys.markov.kernel import MarkovKernel, Observable, StateSpace, lift_observable


def _frozen_int(values) -> np.ndarray:
  values = np.array(values, dtype=np.int64)
  values.setflags(write=False)
  return values


@dataclass(frozen=True, eq=False)
class EnvironmentSpace:
  """
  A finite probability space (F, μ). Environments built by dilation also keep, per point,
  the function y: E → E it stands for (`functions[k]` is the index vector of point k).
  """
  ids: Tuple[str, ...]
  weights: np.ndarray
  functions: Optional[np.ndarray] = None

  def __post_init__(self):
    ids = tuple(str(i) for i in self.ids)
    object.__setattr__(self, "ids", ids)
    weights = np.array(self.weights, dtype=np.float64)
    weights.setflags(write=False)
    object.__setattr__(self, "weights", weights)
    if len(set(ids)) != len(ids):
      raise ContractViolation("Environment point identifiers must be distinct")
    if weights.shape != (len(ids),):
      raise ContractViolation(f"Environment has {len(ids)} points but {weights.shape} weights")
    if not np.all(np.isfinite(weights)) or np.any(weights < -STOCHASTIC_TOL):
      raise ContractViolation("Environment weights must be finite and nonnegative")
    if abs(weights.sum() - 1.0) > STOCHASTIC_TOL:
      raise ContractViolation(f"Environment weights sum to {weights.sum()!r}, expected 1")
    weights = clip_round_off(weights)
    weights.setflags(write=False)
    object.__setattr__(self, "weights", weights)
    if self.functions is not None:
      functions = _frozen_int(self.functions)
      if functions.ndim != 2 or functions.shape[0] != len(ids):
        raise ContractViolation(f"Expected one function per environment point, got shape {functions.shape}")
      object.__setattr__(self, "functions", functions)

  @property
  def size(self) -> int:
    return len(self.ids)


@dataclass(frozen=True, eq=False)
class ProductDynamicalSystem:
  """T̃(x, y) = (X(x, y), Y(x, y)) on E × F, tabulated by state and environment index."""
  system_space: StateSpace
  env: EnvironmentSpace
  x_map: np.ndarray
  y_map: np.ndarray

  def __post_init__(self):
    x_map, y_map = _frozen_int(self.x_map), _frozen_int(self.y_map)
    object.__setattr__(self, "x_map", x_map)
    object.__setattr__(self, "y_map", y_map)
    shape = (self.system_space.size, self.env.size)
    if x_map.shape != shape or y_map.shape != shape:
      raise ContractViolation(f"x_map {x_map.shape} and y_map {y_map.shape} must both be total on E × F, shape {shape}")
    if x_map.size and (x_map.min() < 0 or x_map.max() >= shape[0]):
      raise ContractViolation("x_map values must index the system space E")
    if y_map.size and (y_map.min() < 0 or y_map.max() >= shape[1]):
      raise ContractViolation("y_map values must index the environment F")

  def step(self, x: int, y: int) -> Tuple[int, int]:
    return int(self.x_map[x, y]), int(self.y_map[x, y])

  def with_y_map(self, y_map: np.ndarray) -> "ProductDynamicalSystem":
    return ProductDynamicalSystem(self.system_space, self.env, self.x_map, y_map)


def point_map_system(space: StateSpace, env: EnvironmentSpace, step: Callable[[int, int], Tuple[int, int]]) -> ProductDynamicalSystem:
  """Tabulates a point transformation given on (state index, environment index) pairs."""
  x_map = np.zeros((space.size, env.size), dtype=np.int64)
  y_map = np.zeros((space.size, env.size), dtype=np.int64)
  for x in range(space.size):
    for y in range(env.size):
      x_map[x, y], y_map[x, y] = step(x, y)
  return ProductDynamicalSystem(space, env, x_map, y_map)


def reduce(sys: ProductDynamicalSystem) -> MarkovKernel:
  """
  The Markov kernel seen on E when the environment is averaged out:
  P(i, j) = μ({y ∈ F; X(i, y) = j}). The Y component plays no role.
  """
  n = sys.system_space.size
  rows = np.stack([np.bincount(sys.x_map[i], weights=sys.env.weights, minlength=n) for i in range(n)])
  if DEBUG >= 2: print(f"Reduced system on {sys.system_space} with {sys.env.size} environment points")
  return MarkovKernel(sys.system_space, rows)


def environment_average(sys: ProductDynamicalSystem, f: Observable) -> Observable:
  """Lf(x) = ∫_F T(f⊗𝟙)(x, y) dμ(y), evaluated literally on the product space."""
  if f.space != sys.system_space:
    raise ContractViolation(f"Dimension mismatch: observable on {f.space}, system on {sys.system_space}")
  lifted = lift_observable(f, sys.env.size)
  # T(f⊗𝟙)(x, y) = (f⊗𝟙)(T̃(x, y))
  evolved = lifted[sys.x_map, sys.y_map]
  return Observable(f.space, evolved @ sys.env.weights)


def iterate(sys: ProductDynamicalSystem, m: int) -> ProductDynamicalSystem:
  """The m-fold composition T̃^m over the same spaces."""
  if m < 1:
    raise ContractViolation(f"Iteration count must be positive, got {m}")
  x_m, y_m = sys.x_map, sys.y_map
  for _ in range(m - 1):
    x_m, y_m = sys.x_map[x_m, y_m], sys.y_map[x_m, y_m]
  return ProductDynamicalSystem(sys.system_space, sys.env, x_m, y_m)


def is_bijective(sys: ProductDynamicalSystem) -> bool:
  images = sys.x_map*sys.env.size + sys.y_map
  return np.unique(images).size == images.size


def inverse(sys: ProductDynamicalSystem) -> ProductDynamicalSystem:
  if not is_bijective(sys):
    raise ContractViolation("Only bijective systems have an inverse")
  x_inv = np.empty_like(sys.x_map)
  y_inv = np.empty_like(sys.y_map)
  xs, ys = np.indices(sys.x_map.shape)
  x_inv[sys.x_map, sys.y_map] = xs
  y_inv[sys.x_map, sys.y_map] = ys
  return ProductDynamicalSystem(sys.system_space, sys.env, x_inv, y_inv)
