import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from opensys.errors import ConfigError
from opensys.helpers import DEBUG
from opensys.markov.kernel_io import read_document, unwrap_report

Drift = Callable[[np.ndarray], np.ndarray]
Diffusion = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SdeSpec:
  """
  dX = f(X) dt + g(X) dW with X in ℝⁿ and W a d-dimensional Brownian motion.
  `drift` maps (..., n) to (..., n) and `diffusion` maps (..., n) to (..., n, d).
  """
  model: str
  n: int
  d: int
  drift: Drift = field(repr=False)
  diffusion: Diffusion = field(repr=False)
  params: Dict[str, Any] = field(default_factory=dict)

  def to_dict(self) -> dict:
    return {"model": self.model, "params": self.params}


def _constant_diffusion(matrix: np.ndarray) -> Diffusion:
  matrix = np.array(matrix, dtype=np.float64)
  matrix.setflags(write=False)
  return lambda x: np.broadcast_to(matrix, x.shape[:-1] + matrix.shape)


class OuParams(BaseModel):
  """f(x) = -Λx with Λ = diag(lambda), g = sigma (n × d)."""
  model_config = ConfigDict(populate_by_name=True)

  lambda_: List[float] = Field(alias="lambda", min_length=1)
  sigma: List[List[float]]

  @model_validator(mode="after")
  def check_shapes(self):
    if len(self.sigma) != len(self.lambda_) or len({len(row) for row in self.sigma}) != 1 or not self.sigma[0]:
      raise ValueError(f"sigma must be a {len(self.lambda_)} × d matrix")
    return self

  def build(self) -> SdeSpec:
    lam = np.array(self.lambda_)
    sigma = np.array(self.sigma)
    return SdeSpec("ou", lam.size, sigma.shape[1], lambda x: x*(-lam), _constant_diffusion(sigma), self.model_dump(by_alias=True))


class LinearParams(BaseModel):
  """f(x) = Ax + b, g = C constant."""
  A: List[List[float]]
  b: List[float]
  C: List[List[float]]

  @model_validator(mode="after")
  def check_shapes(self):
    n = len(self.b)
    if n < 1 or len(self.A) != n or any(len(row) != n for row in self.A):
      raise ValueError(f"A must be a {n} × {n} matrix")
    if len(self.C) != n or len({len(row) for row in self.C}) != 1 or not self.C[0]:
      raise ValueError(f"C must be a {n} × d matrix")
    return self

  def build(self) -> SdeSpec:
    A, b, C = np.array(self.A), np.array(self.b), np.array(self.C)
    return SdeSpec("linear", b.size, C.shape[1], lambda x: x @ A.T + b, _constant_diffusion(C), self.model_dump())


class GbmParams(BaseModel):
  """f(x) = ax, g(x) = bx in one dimension."""
  a: float
  b: float

  def build(self) -> SdeSpec:
    a, b = self.a, self.b
    return SdeSpec("gbm-1d", 1, 1, lambda x: a*x, lambda x: (b*x)[..., None], self.model_dump())


class DoubleWellParams(BaseModel):
  """f(x) = x - x³, g = sigma in one dimension."""
  sigma: float

  def build(self) -> SdeSpec:
    return SdeSpec("double-well-1d", 1, 1, lambda x: x - x**3, _constant_diffusion([[self.sigma]]), self.model_dump())


MODELS: Dict[str, type] = {
  "ou": OuParams,
  "linear": LinearParams,
  "gbm-1d": GbmParams,
  "double-well-1d": DoubleWellParams,
}


def build_spec(model: str, params: dict) -> SdeSpec:
  if model not in MODELS:
    raise ConfigError(f"Unknown SDE model {model!r}, expected one of {sorted(MODELS)}")
  try:
    spec = MODELS[model].model_validate(params).build()
  except ValidationError as e:
    raise ConfigError(f"Error validating {model} parameters: {e}") from e
  if DEBUG >= 2: print(f"Built SDE {spec.model} with n={spec.n}, d={spec.d}")
  return spec


def custom_spec(drift: Drift, diffusion: Diffusion, n: int, d: int, name: str = "custom") -> SdeSpec:
  """Caller-supplied coefficients; both must accept batched (..., n) states."""
  return SdeSpec(name, n, d, drift, diffusion)


class ModelDocument(BaseModel):
  model: str
  params: Dict[str, Any]


def parse_model_json(text: str, source: str = "<string>") -> SdeSpec:
  try:
    document = ModelDocument.model_validate(unwrap_report(json.loads(text), "model"))
  except json.JSONDecodeError as e:
    raise ConfigError(f"Error validating model from {source}: invalid JSON: {e}") from e
  except ValidationError as e:
    raise ConfigError(f"Error validating model from {source}: {e}") from e
  return build_spec(document.model, document.params)


def load_model(path: Union[str, Path]) -> SdeSpec:
  return parse_model_json(read_document(path, "model"), str(path))
