from dataclasses import dataclass, field
from typing import Any, Dict, Literal

import numpy as np

Status = Literal["pass", "fail", "inconclusive"]


def to_jsonable(value: Any) -> Any:
  """numpy values and nested containers as plain JSON types, floats kept at full precision."""
  if isinstance(value, np.ndarray): return value.tolist()
  if isinstance(value, np.generic): return value.item()
  if isinstance(value, dict): return {str(k): to_jsonable(v) for k, v in value.items()}
  if isinstance(value, (list, tuple)): return [to_jsonable(v) for v in value]
  if hasattr(value, "to_dict"): return to_jsonable(value.to_dict())
  return value


@dataclass(frozen=True)
class CheckReport:
  name: str
  status: Status
  details: Dict[str, Any] = field(default_factory=dict)
  message: str = ""

  @property
  def passed(self) -> bool:
    return self.status == "pass"

  def to_dict(self) -> dict:
    return {"check": self.name, "status": self.status, "message": self.message, "details": to_jsonable(self.details)}
