import csv
import io
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from opensys.errors import ContractViolation, FlowExplosion
from opensys.helpers import DEBUG
from opensys.reports import CheckReport
from opensys.sde.noise import NoisePath, path_values, shift_path
from opensys.sde.registry import SdeSpec


def euler_step(spec: SdeSpec, x: np.ndarray, dw: np.ndarray, dt: float) -> np.ndarray:
  """
  X + f(X) dt + g(X) dW, batched over leading axes. The only Euler step in the package: split and
  unsplit runs execute the same arithmetic in the same order.
  """
  return x + spec.drift(x)*dt + (spec.diffusion(x)*dw[..., None, :]).sum(axis=-1)


@dataclass(frozen=True, eq=False)
class FlowResult:
  times: np.ndarray
  states: np.ndarray

  @property
  def terminal(self) -> np.ndarray:
    return self.states[-1]

  def to_dict(self) -> dict:
    return {"times": self.times.tolist(), "states": self.states.tolist(), "terminal": self.terminal.tolist()}

  def to_csv(self) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["time"] + [f"x{i + 1}" for i in range(self.states.shape[1])])
    for t, x in zip(self.times, self.states):
      writer.writerow([repr(float(t))] + [repr(float(v)) for v in x])
    return out.getvalue()


def check_point(spec: SdeSpec, x) -> np.ndarray:
  x = np.array(x, dtype=np.float64).reshape(-1)
  if x.shape != (spec.n,):
    raise ContractViolation(f"Initial state has {x.size} coordinates, {spec.model} needs {spec.n}")
  return x


def euler_flow(spec: SdeSpec, x, w: NoisePath, steps: Optional[int] = None) -> FlowResult:
  """X_{(k+1)dt} = X_{k dt} + f(X_{k dt}) dt + g(X_{k dt}) ΔW_k along one noise path."""
  x = check_point(spec, x)
  steps = w.steps if steps is None else steps
  if not 0 <= steps <= w.steps:
    raise ContractViolation(f"Cannot run {steps} steps on a path of {w.steps}")
  if w.d != spec.d:
    raise ContractViolation(f"Noise has {w.d} components, {spec.model} needs {spec.d}")

  states = np.empty((steps + 1, spec.n))
  states[0] = x
  with np.errstate(over="ignore", invalid="ignore"):
    for k in range(steps):
      x = euler_step(spec, x, w.increments[k], w.dt)
      if not np.all(np.isfinite(x)):
        raise FlowExplosion(k + 1)
      states[k + 1] = x
  if DEBUG >= 3: print(f"Euler flow of {spec.model}: {steps} steps, terminal {x}")
  return FlowResult(np.arange(steps + 1)*w.dt, states)


def flow_map(spec: SdeSpec, x, w: NoisePath, k: int) -> Tuple[np.ndarray, NoisePath]:
  """T̃_t(x, ω) = (X^x_t(ω), θ_t ω) with t = k dt."""
  return euler_flow(spec, x, w, k).terminal, shift_path(w, k)


def cocycle_check(spec: SdeSpec, x, w: NoisePath, k_s: int, k_t: int) -> CheckReport:
  """
  X^{X^x_s(ω)}_t(θ_s ω) = X^x_{s+t}(ω), bitwise on the grid, plus T̃_t∘T̃_s = T̃_s∘T̃_t = T̃_{s+t}
  including the shifted paths.
  """
  if k_s < 0 or k_t < 0 or k_s + k_t > w.steps:
    raise ContractViolation(f"Split {k_s} + {k_t} does not fit a path of {w.steps} steps")
  unsplit, w_st = flow_map(spec, x, w, k_s + k_t)
  x_s, w_s = flow_map(spec, x, w, k_s)
  split, w_s_then_t = flow_map(spec, x_s, w_s, k_t)
  x_t, w_t = flow_map(spec, x, w, k_t)
  swapped, w_t_then_s = flow_map(spec, x_t, w_t, k_s)

  same_state = np.array_equal(unsplit, split) and np.array_equal(unsplit, swapped)
  same_path = np.array_equal(w_st.increments, w_s_then_t.increments) and np.array_equal(w_st.increments, w_t_then_s.increments)
  details = {
    "k_s": k_s,
    "k_t": k_t,
    "unsplit": unsplit,
    "split": split,
    "swapped": swapped,
    "max_abs_diff": float(max(np.max(np.abs(unsplit - split)), np.max(np.abs(unsplit - swapped)))),
    "bitwise_equal": bool(same_state),
    "shifted_paths_equal": bool(same_path),
  }
  if same_state and same_path:
    return CheckReport("cocycle", "pass", details)
  return CheckReport("cocycle", "fail", details, "split and unsplit runs differ")


Integrand = Callable[[int, np.ndarray], np.ndarray]


def constant_integrand(d: int) -> Integrand:
  return lambda j, values: np.ones(d)


def brownian_integrand() -> Integrand:
  """H_u = W_u, read at the left endpoint."""
  return lambda j, values: values[j]


def elementary_integrand(breakpoints, coefficients) -> Integrand:
  """
  Step process H = Σ c_i W_{t_i} 1_[t_i, t_{i+1}): each coefficient is frozen at its left breakpoint,
  so H is predictable. Before the first breakpoint H = 0.
  """
  breakpoints = np.array(breakpoints, dtype=np.int64)
  coefficients = np.array(coefficients, dtype=np.float64)
  if breakpoints.size != coefficients.size or np.any(np.diff(breakpoints) <= 0) or (breakpoints.size and breakpoints[0] < 0):
    raise ContractViolation("Breakpoints must be increasing step indices, one coefficient each")

  def integrand(j: int, values: np.ndarray) -> np.ndarray:
    i = np.searchsorted(breakpoints, j, side="right") - 1
    if i < 0: return np.zeros(values.shape[1])
    return coefficients[i]*values[breakpoints[i]]

  return integrand


def discrete_integral(h: Integrand, w: NoisePath, steps: int, start: int = 0, integrand_path: Optional[NoisePath] = None) -> float:
  """
  Left-Riemann sum Σ_{u=start}^{start+steps-1} H_{u-start} · ΔW_u. The integrand reads its values from
  `integrand_path` (default: w itself).
  """
  values = path_values(w if integrand_path is None else integrand_path)
  total = 0.0
  for j in range(steps):
    total = total + float(np.dot(h(j, values), w.increments[start + j]))
  return total


def shifted_integral_check(h: Integrand, w: NoisePath, k_s: int, k_t: Optional[int] = None) -> CheckReport:
  """
  Θ_s(∫_0^t H dW) = ∫_s^{s+t} Θ_s(H_{u-s}) dW, with zero tolerance: the left side integrates against θ_s ω,
  the right side against ω over [s, s+t] with the integrand evaluated on θ_s ω.
  """
  if not 0 <= k_s <= w.steps:
    raise ContractViolation(f"Shift of {k_s} steps out of range for a path of {w.steps} steps")
  k_t = w.steps - k_s if k_t is None else k_t
  if k_t < 0 or k_s + k_t > w.steps:
    raise ContractViolation(f"Interval [{k_s}, {k_s + k_t}] does not fit a path of {w.steps} steps")
  shifted = shift_path(w, k_s)
  lhs = discrete_integral(h, shifted, k_t)
  rhs = discrete_integral(h, w, k_t, start=k_s, integrand_path=shifted)
  details = {"k_s": k_s, "k_t": k_t, "shifted_integral": lhs, "reindexed_integral": rhs, "difference": lhs - rhs}
  if lhs == rhs:
    return CheckReport("shifted-integral", "pass", details)
  return CheckReport("shifted-integral", "fail", details, "reindexed sums differ")
