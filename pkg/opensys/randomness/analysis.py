from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from opensys.errors import ContractViolation
from opensys.helpers import DEBUG, MAX_DEFECT_STATES, STOCHASTIC_TOL, progress
from opensys.markov.kernel import MarkovKernel, Observable, is_deterministic

SIGN_CHUNK = 1 << 16
# strict improvement needed to move the witness, so ties keep the first (x, f)
TIE_TOL = 1e-12

Classification = Literal["deterministic-invertible", "deterministic-noninvertible", "random"]


@dataclass(frozen=True, eq=False)
class DefectReport:
  defect: float
  witness_f: Observable
  witness_x: int

  def to_dict(self) -> dict:
    return {
      "defect": self.defect,
      "witness_f": self.witness_f.values.tolist(),
      "witness_x": self.witness_f.space.label(self.witness_x),
    }


@dataclass(frozen=True, eq=False)
class InvertibilityReport:
  invertible: bool
  inverse: Optional[MarkovKernel]
  # the plain matrix inverse, kept when it is not a kernel; None for singular input
  matrix_inverse: Optional[np.ndarray]

  def to_dict(self) -> dict:
    return {
      "invertible": self.invertible,
      "inverse": None if self.inverse is None else self.inverse.to_dict(),
      "matrix_inverse": None if self.matrix_inverse is None else self.matrix_inverse.tolist(),
    }


def sign_vectors(n: int, start: int, stop: int) -> np.ndarray:
  """
  Sign vectors number start..stop-1 of {+1, -1}^n, ordered with +1 before -1 and the
  first coordinate most significant: (1, 1), (1, -1), (-1, 1), (-1, -1) for n = 2.
  """
  index = np.arange(start, stop, dtype=np.int64)[:, None]
  bits = (index >> np.arange(n - 1, -1, -1, dtype=np.int64)[None, :]) & 1
  return 1.0 - 2.0*bits


def homomorphism_defect(k: MarkovKernel) -> DefectReport:
  """
  max over x and sign vectors f of L(f²)(x) - (Lf)(x)², the largest one-step conditional
  variance of a ±1 observable. Zero exactly for deterministic kernels.
  """
  n = k.size
  if n > MAX_DEFECT_STATES:
    raise ContractViolation(f"homomorphism_defect: {n} states exceeds the exhaustive cap of {MAX_DEFECT_STATES} (2^{n} sign vectors)")

  total = 1 << n
  best = np.full(n, -np.inf)
  best_f = np.zeros(n, dtype=np.int64)
  chunks = range(0, total, SIGN_CHUNK)
  for start in progress(chunks, total=len(chunks), desc="sign vectors"):
    stop = min(start + SIGN_CHUNK, total)
    f = sign_vectors(n, start, stop)
    # rows: states x, columns: sign vectors
    variance = k.rows @ (f**2).T - (k.rows @ f.T)**2
    chunk_best = variance.argmax(axis=1)
    values = variance[np.arange(n), chunk_best]
    improved = values > best + TIE_TOL
    best = np.where(improved, values, best)
    best_f = np.where(improved, start + chunk_best, best_f)

  witness_x = 0
  for x in range(1, n):
    if best[x] > best[witness_x] + TIE_TOL:
      witness_x = x
  witness = Observable(k.space, sign_vectors(n, int(best_f[witness_x]), int(best_f[witness_x]) + 1)[0])
  row = k.rows[witness_x]
  defect = float(row @ witness.values**2 - (row @ witness.values)**2)
  if DEBUG >= 1: print(f"Homomorphism defect of {k.space}: {defect} at x={k.space.label(witness_x)}, f={witness.values}")
  return DefectReport(defect, witness, witness_x)


def is_deterministic_via_homomorphism(k: MarkovKernel, tol: float = STOCHASTIC_TOL) -> bool:
  """
  A row whose largest entry is 1 - δ has defect 4δ(1 - δ), increasing for δ < 1/2, so the
  Dirac-row tolerance tol becomes the defect threshold 4·tol·(1 - tol).
  """
  if not 0 <= tol < 0.5:
    raise ContractViolation(f"Tolerance must lie in [0, 1/2), got {tol}")
  return homomorphism_defect(k).defect <= 4*tol*(1 - tol)


def is_permutation(k: MarkovKernel, tol: float = STOCHASTIC_TOL) -> bool:
  deterministic, images = is_deterministic(k, tol)
  return deterministic and len(set(images)) == k.size


def is_markov_invertible(k: MarkovKernel, tol: float = STOCHASTIC_TOL) -> InvertibilityReport:
  """
  Invertible in the category of Markov kernels: the matrix inverse exists and is itself
  row-stochastic within tol. Only permutations pass.
  """
  if tol < 0:
    raise ContractViolation(f"Tolerance must be nonnegative, got {tol}")
  if np.linalg.matrix_rank(k.rows) < k.size:
    if DEBUG >= 2: print(f"Kernel on {k.space} is singular")
    return InvertibilityReport(False, None, None)

  matrix_inverse = np.linalg.inv(k.rows)
  stochastic = bool(np.all(matrix_inverse >= -tol) and np.all(matrix_inverse <= 1 + tol)
                    and np.all(np.abs(matrix_inverse.sum(axis=1) - 1.0) <= tol))
  if not stochastic:
    if DEBUG >= 2: print(f"Matrix inverse of kernel on {k.space} is not stochastic, min entry {matrix_inverse.min()}")
    return InvertibilityReport(False, None, matrix_inverse)

  assert is_permutation(k, tol), f"Markov-invertible kernel that is not a permutation: {k}"
  inverse = np.clip(matrix_inverse, 0.0, 1.0)
  return InvertibilityReport(True, MarkovKernel(k.space, inverse/inverse.sum(axis=1, keepdims=True)), matrix_inverse)


def classify(k: MarkovKernel, tol: float = STOCHASTIC_TOL) -> Classification:
  deterministic, images = is_deterministic(k, tol)
  if not deterministic:
    return "random"
  if len(set(images)) == k.size:
    return "deterministic-invertible"
  return "deterministic-noninvertible"
