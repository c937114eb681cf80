from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from opensys.errors import ContractViolation
from opensys.helpers import DEBUG, EXACT_TOL, STOCHASTIC_TOL, clip_round_off

State = Union[int, str]


def _frozen(values: np.ndarray) -> np.ndarray:
  values = np.array(values, dtype=np.float64)
  values.setflags(write=False)
  return values


@dataclass(frozen=True)
class StateSpace:
  labels: Tuple[str, ...]

  def __post_init__(self):
    labels = tuple(str(label) for label in self.labels)
    object.__setattr__(self, "labels", labels)
    if len(labels) < 1:
      raise ContractViolation("A state space needs at least one state")
    if len(set(labels)) != len(labels):
      duplicates = sorted({label for label in labels if labels.count(label) > 1})
      raise ContractViolation(f"State labels must be distinct, duplicated: {duplicates}")

  @property
  def size(self) -> int:
    return len(self.labels)

  def index_of(self, state: State) -> int:
    if isinstance(state, (int, np.integer)) and not isinstance(state, bool):
      if not 0 <= state < self.size:
        raise ContractViolation(f"State index {state} out of range for {self.size} states")
      return int(state)
    if state in self.labels:
      return self.labels.index(state)
    raise ContractViolation(f"Unknown state {state!r}, expected one of {list(self.labels)}")

  def label(self, index: int) -> str:
    return self.labels[index]

  def to_dict(self) -> dict:
    return {"states": list(self.labels)}

  @classmethod
  def of_size(cls, n: int) -> "StateSpace":
    return cls(tuple(str(i + 1) for i in range(n)))

  def __str__(self):
    return "{" + ", ".join(self.labels) + "}"


def _check_same_space(*spaces: StateSpace):
  first = spaces[0]
  for other in spaces[1:]:
    if other != first:
      raise ContractViolation(f"Dimension mismatch: state spaces {first} and {other} differ")


@dataclass(frozen=True, eq=False)
class FiniteMeasure:
  space: StateSpace
  weights: np.ndarray

  def __post_init__(self):
    weights = _frozen(self.weights)
    object.__setattr__(self, "weights", weights)
    if weights.shape != (self.space.size,):
      raise ContractViolation(f"Measure has {weights.shape} weights for {self.space.size} states")
    if not np.all(np.isfinite(weights)):
      raise ContractViolation("Measure weights must be finite")
    negative = np.flatnonzero(weights < -STOCHASTIC_TOL)
    if negative.size:
      raise ContractViolation(f"Measure weight {negative[0]} is negative ({weights[negative[0]]})")
    if abs(weights.sum() - 1.0) > STOCHASTIC_TOL:
      raise ContractViolation(f"Measure weights sum to {weights.sum()!r}, expected 1")
    object.__setattr__(self, "weights", _frozen(clip_round_off(weights)))

  @classmethod
  def dirac(cls, space: StateSpace, state: State) -> "FiniteMeasure":
    weights = np.zeros(space.size)
    weights[space.index_of(state)] = 1.0
    return cls(space, weights)

  @classmethod
  def uniform(cls, space: StateSpace) -> "FiniteMeasure":
    return cls(space, np.full(space.size, 1.0/space.size))

  def to_dict(self) -> dict:
    return {"states": list(self.space.labels), "weights": self.weights.tolist()}


@dataclass(frozen=True, eq=False)
class Observable:
  space: StateSpace
  values: np.ndarray

  def __post_init__(self):
    values = _frozen(self.values)
    object.__setattr__(self, "values", values)
    if values.shape != (self.space.size,):
      raise ContractViolation(f"Observable has {values.shape} values for {self.space.size} states")
    if not np.all(np.isfinite(values)):
      raise ContractViolation("Observable values must be finite (no NaN or infinity)")

  @classmethod
  def constant(cls, space: StateSpace, value: float = 1.0) -> "Observable":
    return cls(space, np.full(space.size, float(value)))

  @classmethod
  def indicator(cls, space: StateSpace, states: Sequence[State]) -> "Observable":
    values = np.zeros(space.size)
    for state in states:
      values[space.index_of(state)] = 1.0
    return cls(space, values)

  def to_dict(self) -> dict:
    return {"states": list(self.space.labels), "values": self.values.tolist()}


@dataclass(frozen=True, eq=False)
class MarkovKernel:
  space: StateSpace
  rows: np.ndarray

  def __post_init__(self):
    rows = _frozen(self.rows)
    object.__setattr__(self, "rows", rows)
    n = self.space.size
    if rows.shape != (n, n):
      raise ContractViolation(f"Kernel matrix has shape {rows.shape}, expected ({n}, {n})")
    for i, row in enumerate(rows):
      for j, p in enumerate(row):
        if not np.isfinite(p) or p < -STOCHASTIC_TOL or p > 1 + STOCHASTIC_TOL:
          raise ContractViolation(f"row {i} entry {j}: probability {p!r} outside [0, 1]")
      if abs(row.sum() - 1.0) > STOCHASTIC_TOL:
        raise ContractViolation(f"row {i}: probabilities sum to {row.sum()!r}, expected 1")
    object.__setattr__(self, "rows", _frozen(clip_round_off(rows)))

  @property
  def size(self) -> int:
    return self.space.size

  def row(self, state: State) -> FiniteMeasure:
    return FiniteMeasure(self.space, self.rows[self.space.index_of(state)])

  def allclose(self, other: "MarkovKernel", atol: float = EXACT_TOL) -> bool:
    return self.space == other.space and bool(np.allclose(self.rows, other.rows, rtol=0.0, atol=atol))

  def to_dict(self) -> dict:
    return {"states": list(self.space.labels), "rows": self.rows.tolist()}

  @classmethod
  def from_dict(cls, data: dict) -> "MarkovKernel":
    return cls(StateSpace(tuple(data["states"])), np.array(data["rows"], dtype=np.float64))

  def __str__(self):
    rows = "; ".join(" ".join(f"{p:.6g}" for p in row) for row in self.rows)
    return f"MarkovKernel(states={list(self.space.labels)}, rows=[{rows}])"


def identity(space: StateSpace) -> MarkovKernel:
  return MarkovKernel(space, np.eye(space.size))


def from_point_map(space: StateSpace, point_map: Union[Sequence[State], Callable[[int], int]]) -> MarkovKernel:
  """Deterministic kernel ν(x, dy) = δ_{T̃(x)}(dy) of a point transformation T̃."""
  n = space.size
  if callable(point_map):
    images = [point_map(i) for i in range(n)]
  else:
    if len(point_map) != n:
      raise ContractViolation(f"Point map has {len(point_map)} images for {n} states")
    images = list(point_map)
  rows = np.zeros((n, n))
  for i, image in enumerate(images):
    rows[i, space.index_of(image)] = 1.0
  return MarkovKernel(space, rows)


def apply_to_observable(k: MarkovKernel, f: Observable) -> Observable:
  """Lf(x) = Σ_y P(x, y) f(y)."""
  _check_same_space(k.space, f.space)
  return Observable(k.space, k.rows @ f.values)


def apply_to_measure(k: MarkovKernel, p: FiniteMeasure) -> FiniteMeasure:
  """(ℙ∘ν)(y) = Σ_x ℙ(x) P(x, y)."""
  _check_same_space(k.space, p.space)
  return FiniteMeasure(k.space, p.weights @ k.rows)


def compose(k1: MarkovKernel, k2: MarkovKernel) -> MarkovKernel:
  """One step of k1 followed by one step of k2."""
  _check_same_space(k1.space, k2.space)
  rows = k1.rows @ k2.rows
  assert rows.min() >= 0 and np.all(np.abs(rows.sum(axis=1) - k1.rows @ k2.rows.sum(axis=1)) <= EXACT_TOL), f"composition lost mass: {rows.sum(axis=1)}"
  return MarkovKernel(k1.space, rows)


def power(k: MarkovKernel, m: int) -> MarkovKernel:
  if m < 0:
    raise ContractViolation(f"Kernel power must be nonnegative, got {m}")
  result = identity(k.space)
  for _ in range(m):
    result = compose(result, k)
  return result


def is_deterministic(k: MarkovKernel, tol: float = STOCHASTIC_TOL) -> Tuple[bool, Optional[List[int]]]:
  """
  True iff every row is a Dirac mass (one entry within tol of 1).
  The point map x ↦ T̃(x) is returned as state indices when it is.
  """
  if tol < 0:
    raise ContractViolation(f"Tolerance must be nonnegative, got {tol}")
  images = []
  for row in k.rows:
    hits = np.flatnonzero(np.abs(row - 1.0) <= tol)
    if hits.size != 1:
      return False, None
    images.append(int(hits[0]))
  return True, images


def lift_observable(f: Observable, env_size: int) -> np.ndarray:
  """Table of (f⊗𝟙)(x, y) = f(x) on E × F."""
  return np.repeat(f.values[:, None], env_size, axis=1)


STATIONARY_SWEEPS = 10_000


def stationary_distribution(k: MarkovKernel, tol: float = 1e-14) -> FiniteMeasure:
  """
  An invariant law π = πP by power iteration on the measure action, started from the uniform law.
  Iterating the lazy kernel (I + P)/2 keeps periodic chains from oscillating; it has the same
  invariant laws.
  """
  pi = np.full(k.size, 1.0/k.size)
  lazy = 0.5*(np.eye(k.size) + k.rows)
  for sweep in range(STATIONARY_SWEEPS):
    nxt = pi @ lazy
    nxt /= nxt.sum()
    if np.max(np.abs(nxt - pi)) <= tol:
      pi = nxt
      break
    pi = nxt
  if DEBUG >= 2: print(f"Stationary distribution of {k.space} after {sweep + 1} sweeps: {pi}")
  return FiniteMeasure(k.space, pi)


def random_kernel(space: StateSpace, rng: np.random.Generator, alpha: float = 1.0) -> MarkovKernel:
  """Rows drawn independently from a symmetric Dirichlet(alpha) law."""
  return MarkovKernel(space, rng.dirichlet(np.full(space.size, alpha), size=space.size))


def random_deterministic_kernel(space: StateSpace, rng: np.random.Generator) -> MarkovKernel:
  return from_point_map(space, [int(i) for i in rng.integers(0, space.size, size=space.size)])
