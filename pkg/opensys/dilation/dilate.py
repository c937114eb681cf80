import itertools
from typing import Optional

import numpy as np

from opensys.errors import EnvironmentTooLarge
from opensys.helpers import DEBUG, MAX_ENV_POINTS, EXACT_TOL
from opensys.markov.kernel import MarkovKernel, State
from opensys.dilation.system import EnvironmentSpace, ProductDynamicalSystem


def enumerate_functions(n: int) -> np.ndarray:
  """All n^n maps E → E as index vectors, lexicographic in (y(x_1), ..., y(x_n))."""
  return np.array(list(itertools.product(range(n), repeat=n)), dtype=np.int64).reshape(n**n, n)


def function_id(labels, function) -> str:
  return "(" + ",".join(labels[i] for i in function) + ")"


def function_environment(k: MarkovKernel, max_env: Optional[int] = None) -> EnvironmentSpace:
  """
  F = E^E with the product measure μ(y) = ∏_x P(x, y(x)). Rows whose sum is off by more than
  EXACT_TOL (still within the validation tolerance) are rescaled first so that μ has mass 1.
  """
  n = k.size
  cap = MAX_ENV_POINTS if max_env is None else max_env
  if n**n > cap:
    raise EnvironmentTooLarge("dilate", n**n, cap, "Raise the cap with --max-env or reduce the state space")
  rows = k.rows
  sums = rows.sum(axis=1)
  loose = np.abs(sums - 1.0) > EXACT_TOL
  if np.any(loose):
    rows = np.where(loose[:, None], rows/sums[:, None], rows)
  functions = enumerate_functions(n)
  weights = np.prod(rows[np.arange(n)[None, :], functions], axis=1)
  total = weights.sum()
  # Σ_y ∏_x P(x, y(x)) = ∏_x Σ_z P(x, z)
  assert abs(total - np.prod(rows.sum(axis=1))) <= EXACT_TOL*max(1, n**n)**0.5 + EXACT_TOL, f"product measure has mass {total}"
  if DEBUG >= 2: print(f"Function environment of {k.space}: {n**n} points, mass {total!r}")
  ids = tuple(function_id(k.space.labels, y) for y in functions)
  return EnvironmentSpace(ids, weights, functions)


def dilate(k: MarkovKernel, max_env: Optional[int] = None) -> ProductDynamicalSystem:
  """
  Deterministic dilation T̃(x, y) = (y(x), y) of a finite Markov kernel on E × E^E.
  reduce(dilate(k)) gives back k.
  """
  env = function_environment(k, max_env)
  n = k.size
  x_map = env.functions.T
  y_map = np.tile(np.arange(env.size, dtype=np.int64), (n, 1))
  return ProductDynamicalSystem(k.space, env, x_map, y_map)


def dilate_invertible(k: MarkovKernel, x0: State, max_env: Optional[int] = None) -> ProductDynamicalSystem:
  """
  Invertible dilation on E × F' with F' = E × E^E and measure δ_{x0} ⊗ μ:

    T̃'(x, (x0, y))   = (y(x), (x, y))
    T̃'(x, (y(x), y)) = (x0,   (x, y))
    T̃'(x, (z, y))    = (z,    (x, y))   otherwise

  The first case wins when y(x) = x0; both prescriptions then give (x0, (x, y)).
  """
  n = k.size
  cap = MAX_ENV_POINTS if max_env is None else max_env
  if n*n**n > cap:
    raise EnvironmentTooLarge("dilate-invertible", n*n**n, cap, "Raise the cap with --max-env or reduce the state space")
  base = function_environment(k, max_env)
  x0 = k.space.index_of(x0)
  m = base.size

  # environment index of (z, y) is z*m + y
  z = np.repeat(np.arange(n), m)
  y = np.tile(np.arange(m), n)
  weights = np.where(z == x0, base.weights[y], 0.0)
  ids = tuple(f"{k.space.labels[zi]}:{base.ids[yi]}" for zi, yi in zip(z, y))
  env = EnvironmentSpace(ids, weights, base.functions[y])

  x = np.arange(n)[:, None]
  y_of_x = base.functions[y[None, :], x]
  x_map = np.where(z[None, :] == x0, y_of_x, np.where(z[None, :] == y_of_x, x0, z[None, :]))
  y_map = x*m + y[None, :]
  if DEBUG >= 2: print(f"Invertible dilation of {k.space} with x0={k.space.labels[x0]}: {env.size} environment points")
  return ProductDynamicalSystem(k.space, env, x_map, np.broadcast_to(y_map, x_map.shape))
