import csv
import io
import json
from pathlib import Path
from typing import List, Union

import numpy as np
from pydantic import BaseModel, ValidationError

from opensys.errors import ConfigError, ContractViolation
from opensys.helpers import DEBUG
from opensys.markov.kernel import MarkovKernel, StateSpace

PRESETS_DIR = Path(__file__).resolve().parent.parent/"presets"


class KernelDocument(BaseModel):
  """A finite Markov kernel as stored on disk: `{"states": [...], "rows": [[...], ...]}`."""

  states: List[str]
  rows: List[List[float]]

  def to_kernel(self) -> MarkovKernel:
    for i, row in enumerate(self.rows):
      if len(row) != len(self.states):
        raise ContractViolation(f"row {i} has {len(row)} entries, expected {len(self.states)}")
    if len(self.rows) != len(self.states):
      raise ContractViolation(f"{len(self.rows)} rows for {len(self.states)} states")
    return MarkovKernel(StateSpace(tuple(self.states)), np.array(self.rows, dtype=np.float64))

  @classmethod
  def from_kernel(cls, k: MarkovKernel) -> "KernelDocument":
    return cls(states=list(k.space.labels), rows=k.rows.tolist())


def resolve_path(path: Union[str, Path]) -> Path:
  """`preset:<name>` points at the bundled inputs, anything else is a file path."""
  path = str(path)
  if path.startswith("preset:"):
    name = path[len("preset:"):]
    candidates = sorted(PRESETS_DIR.glob(f"{name}.*"))
    if not candidates:
      raise FileNotFoundError(f"Preset not found: {name}")
    return candidates[0]
  return Path(path)


def read_document(path: Union[str, Path], kind: str) -> str:
  resolved = resolve_path(path)
  try:
    with open(resolved, "r") as f:
      return f.read()
  except FileNotFoundError as e:
    raise FileNotFoundError(f"{kind.capitalize()} file not found at {path}") from e


def unwrap_report(data: dict, key: str) -> dict:
  """Reports written by the CLI carry their payload under outputs.<key>; raw documents pass through."""
  if isinstance(data, dict) and "outputs" in data and isinstance(data["outputs"], dict) and key in data["outputs"]:
    return data["outputs"][key]
  return data


def parse_kernel_json(text: str, source: str = "<string>") -> MarkovKernel:
  try:
    data = unwrap_report(json.loads(text), "kernel")
    return KernelDocument.model_validate(data).to_kernel()
  except json.JSONDecodeError as e:
    raise ConfigError(f"Error validating kernel from {source}: invalid JSON: {e}") from e
  except (ValidationError, ContractViolation) as e:
    raise ConfigError(f"Error validating kernel from {source}: {e}") from e


def parse_kernel_csv(text: str, source: str = "<string>") -> MarkovKernel:
  """Header row of labels, then one row of probabilities per state."""
  lines = [row for row in csv.reader(io.StringIO(text)) if any(cell.strip() for cell in row)]
  if not lines:
    raise ConfigError(f"Error validating kernel from {source}: empty CSV")
  states = [cell.strip() for cell in lines[0]]
  rows = []
  for i, line in enumerate(lines[1:]):
    try:
      rows.append([float(cell) for cell in line])
    except ValueError as e:
      raise ConfigError(f"Error validating kernel from {source}: row {i}: {e}") from e
  try:
    return KernelDocument(states=states, rows=rows).to_kernel()
  except ContractViolation as e:
    raise ConfigError(f"Error validating kernel from {source}: {e}") from e


def load_kernel(path: Union[str, Path]) -> MarkovKernel:
  text = read_document(path, "kernel")
  if DEBUG >= 2: print(f"Loading kernel from {path}")
  if str(resolve_path(path)).endswith(".csv"):
    return parse_kernel_csv(text, str(path))
  return parse_kernel_json(text, str(path))


def kernel_to_json(k: MarkovKernel) -> str:
  return KernelDocument.from_kernel(k).model_dump_json(indent=2)


def kernel_to_csv(k: MarkovKernel) -> str:
  out = io.StringIO()
  writer = csv.writer(out, lineterminator="\n")
  writer.writerow(k.space.labels)
  for row in k.rows:
    writer.writerow([repr(float(p)) for p in row])
  return out.getvalue()


def save_kernel(k: MarkovKernel, path: Union[str, Path]):
  with open(path, "w") as f:
    f.write(kernel_to_csv(k) if str(path).endswith(".csv") else kernel_to_json(k))
