import json
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
from pydantic import BaseModel, ValidationError

from opensys.errors import ConfigError, ContractViolation
from opensys.markov.kernel import StateSpace
from opensys.markov.kernel_io import read_document, unwrap_report
from opensys.dilation.system import EnvironmentSpace, ProductDynamicalSystem


class EnvironmentDocument(BaseModel):
  weights: List[float]
  ids: Optional[List[str]] = None
  functions: Optional[List[List[int]]] = None


class SystemDocument(BaseModel):
  """
  `{"states": [...], "env": {"weights": [...], "functions": [[...], ...]}, "x_map": [[...]], "y_map": [[...]]}`.
  x_map / y_map hold 0-based indices into the states and the environment points.
  """

  states: List[str]
  env: EnvironmentDocument
  x_map: List[List[int]]
  y_map: List[List[int]]

  def to_system(self) -> ProductDynamicalSystem:
    ids = self.env.ids if self.env.ids is not None else [str(i + 1) for i in range(len(self.env.weights))]
    for name, table in (("x_map", self.x_map), ("y_map", self.y_map)):
      if len(table) != len(self.states):
        raise ContractViolation(f"{name} has {len(table)} rows for {len(self.states)} states")
      for i, row in enumerate(table):
        if len(row) != len(ids):
          raise ContractViolation(f"{name} row {i} has {len(row)} entries for {len(ids)} environment points")
    env = EnvironmentSpace(tuple(ids), np.array(self.env.weights), None if self.env.functions is None else np.array(self.env.functions))
    return ProductDynamicalSystem(StateSpace(tuple(self.states)), env, np.array(self.x_map), np.array(self.y_map))

  @classmethod
  def from_system(cls, sys: ProductDynamicalSystem) -> "SystemDocument":
    env = EnvironmentDocument(
      weights=sys.env.weights.tolist(), ids=list(sys.env.ids), functions=None if sys.env.functions is None else sys.env.functions.tolist()
    )
    return cls(states=list(sys.system_space.labels), env=env, x_map=sys.x_map.tolist(), y_map=sys.y_map.tolist())


def system_to_dict(sys: ProductDynamicalSystem) -> dict:
  return SystemDocument.from_system(sys).model_dump(exclude_none=True)


def parse_system_json(text: str, source: str = "<string>") -> ProductDynamicalSystem:
  try:
    return SystemDocument.model_validate(unwrap_report(json.loads(text), "system")).to_system()
  except json.JSONDecodeError as e:
    raise ConfigError(f"Error validating system from {source}: invalid JSON: {e}") from e
  except (ValidationError, ContractViolation) as e:
    raise ConfigError(f"Error validating system from {source}: {e}") from e


def load_system(path: Union[str, Path]) -> ProductDynamicalSystem:
  return parse_system_json(read_document(path, "system"), str(path))


def save_system(sys: ProductDynamicalSystem, path: Union[str, Path]):
  with open(path, "w") as f:
    json.dump(system_to_dict(sys), f)
