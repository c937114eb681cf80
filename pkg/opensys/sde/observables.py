from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ValidationError, model_validator

from opensys.errors import ConfigError, ContractViolation, MissingDerivative


@dataclass(frozen=True)
class TestFunction:
  """
  A named observable h: ℝⁿ → ℝ. `value` is batched over (..., n); gradient and hessian take a single
  point and may be absent.
  """
  name: str
  n: int
  value: Callable[[np.ndarray], np.ndarray] = field(repr=False)
  gradient: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)
  hessian: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)

  __test__ = False

  def __call__(self, x: np.ndarray) -> np.ndarray:
    return self.value(np.asarray(x, dtype=np.float64))

  def derivatives(self, x: np.ndarray):
    if self.gradient is None or self.hessian is None:
      raise MissingDerivative(self.name)
    x = np.asarray(x, dtype=np.float64)
    return self.gradient(x), self.hessian(x)


class CoordParams(BaseModel):
  i: int = 0


class FourierParams(BaseModel):
  theta: List[float]


class BoxParams(BaseModel):
  lower: List[float]
  upper: List[float]

  @model_validator(mode="after")
  def check_bounds(self):
    if len(self.lower) != len(self.upper):
      raise ValueError("lower and upper must have the same length")
    if any(a > b for a, b in zip(self.lower, self.upper)):
      raise ValueError("lower must not exceed upper")
    return self


def _unit(n: int, i: int) -> np.ndarray:
  e = np.zeros(n)
  e[i] = 1.0
  return e


def _coord(params: CoordParams, n: int) -> TestFunction:
  i = params.i
  return TestFunction(f"coord[{i}]", n, lambda x: x[..., i], lambda x: _unit(n, i), lambda x: np.zeros((n, n)))


def _square(params: CoordParams, n: int) -> TestFunction:
  i = params.i
  hess = 2.0*np.outer(_unit(n, i), _unit(n, i))
  return TestFunction(f"square[{i}]", n, lambda x: x[..., i]**2, lambda x: 2.0*x[i]*_unit(n, i), lambda x: hess)


def _cos(params: FourierParams, n: int) -> TestFunction:
  theta = np.array(params.theta)
  return TestFunction(
    "cos", n, lambda x: np.cos(x @ theta), lambda x: -np.sin(x @ theta)*theta, lambda x: -np.cos(x @ theta)*np.outer(theta, theta)
  )


def _sin(params: FourierParams, n: int) -> TestFunction:
  theta = np.array(params.theta)
  return TestFunction(
    "sin", n, lambda x: np.sin(x @ theta), lambda x: np.cos(x @ theta)*theta, lambda x: -np.sin(x @ theta)*np.outer(theta, theta)
  )


def _box(params: BoxParams, n: int) -> TestFunction:
  lower, upper = np.array(params.lower), np.array(params.upper)
  return TestFunction("box", n, lambda x: np.all((x >= lower) & (x <= upper), axis=-1).astype(np.float64))


OBSERVABLES: Dict[str, tuple] = {
  "coord": (CoordParams, _coord),
  "square": (CoordParams, _square),
  "cos": (FourierParams, _cos),
  "sin": (FourierParams, _sin),
  "box": (BoxParams, _box),
}


def make_observable(name: str, n: int, params: Optional[dict] = None) -> TestFunction:
  """
  coord (x_i), square (x_i²), cos / sin (real and imaginary parts of exp(iθ·x)) and box (indicator,
  no derivatives). Fourier and box parameters default to θ = 1 and [-1, 1]ⁿ.
  """
  if name not in OBSERVABLES:
    raise ConfigError(f"Unknown observable {name!r}, expected one of {sorted(OBSERVABLES)}")
  params = dict(params or {})
  if name in ("cos", "sin"): params.setdefault("theta", [1.0]*n)
  if name == "box":
    params.setdefault("lower", [-1.0]*n)
    params.setdefault("upper", [1.0]*n)
  model, build = OBSERVABLES[name]
  try:
    validated = model.model_validate(params)
  except ValidationError as e:
    raise ConfigError(f"Error validating {name} observable parameters: {e}") from e
  if isinstance(validated, CoordParams) and not 0 <= validated.i < n:
    raise ContractViolation(f"Coordinate {validated.i} out of range for n={n}")
  if isinstance(validated, FourierParams) and len(validated.theta) != n:
    raise ContractViolation(f"theta has {len(validated.theta)} entries for n={n}")
  if isinstance(validated, BoxParams) and len(validated.lower) != n:
    raise ContractViolation(f"Box has {len(validated.lower)} bounds for n={n}")
  return build(validated, n)
