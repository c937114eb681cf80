from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from opensys.errors import ContractViolation, FlowExplosion
from opensys.helpers import BLOCK_SIZE, DEBUG, block_generator, map_blocks, progress
from opensys.reports import CheckReport
from opensys.sde.flow import check_point, euler_step
from opensys.sde.observables import TestFunction
from opensys.sde.registry import SdeSpec

SEMIGROUP_STREAM = 20
NESTED_OUTER_STREAM = 21
NESTED_INNER_STREAM = 22
STRONG_ERROR_STREAM = 23
GRID_TOL = 1e-9
# room for the O(t²) part of the gap between the fitted horizons and the smallest one
CURVATURE_MARGIN = 1.5


@dataclass(frozen=True)
class SemigroupEstimate:
  mean: float
  stderr: float
  samples: int
  exploded: int = 0

  def to_dict(self) -> dict:
    return {"mean": self.mean, "stderr": self.stderr, "samples": self.samples, "exploded": self.exploded}


def grid_steps(t: float, dt: float) -> int:
  if not dt > 0:
    raise ContractViolation(f"Time step must be positive, got {dt}")
  if t < 0:
    raise ContractViolation(f"Time must be nonnegative, got {t}")
  steps = int(round(t/dt))
  if abs(steps*dt - t) > GRID_TOL*max(1.0, t):
    raise ContractViolation(f"t={t} is not a whole number of steps dt={dt}")
  return steps


def simulate_endpoints(
  spec: SdeSpec, starts: np.ndarray, steps: int, dt: float, seed: int, stream: int, threads: Optional[int] = None, allow_explosions: bool = False
) -> np.ndarray:
  """
  Terminal Euler states for a batch of independent paths, one starting point per row of `starts`.
  Rows that blew up come back as NaN when `allow_explosions`, otherwise FlowExplosion is raised.
  """
  samples = starts.shape[0]
  sqrt_dt = np.sqrt(dt)

  def run_block(block: int, size: int) -> np.ndarray:
    rng = block_generator(seed, stream, block)
    first = block*BLOCK_SIZE
    x = np.array(starts[first:first + size], dtype=np.float64)
    alive = np.ones(size, dtype=bool)
    with np.errstate(over="ignore", invalid="ignore"):
      for k in range(steps):
        dw = rng.standard_normal((size, spec.d))*sqrt_dt
        x = euler_step(spec, x, dw, dt)
        finite = np.all(np.isfinite(x), axis=-1)
        if not np.all(finite[alive]):
          blown = np.flatnonzero(alive & ~finite)
          if not allow_explosions:
            raise FlowExplosion(k + 1, first + int(blown[0]))
          if DEBUG >= 2: print(f"Block {block}: {blown.size} paths exploded at step {k + 1}")
          alive &= finite
    x[~alive] = np.nan
    return x

  return np.concatenate(map_blocks(run_block, samples, threads), axis=0)


def _mean_and_stderr(values: np.ndarray):
  if values.size < 2:
    return float(values.mean()) if values.size else float("nan"), float("nan")
  return float(values.mean()), float(values.std(ddof=1)/np.sqrt(values.size))


def estimate_semigroup(
  spec: SdeSpec, h: TestFunction, x, t: float, dt: float, samples: int, seed: int, threads: Optional[int] = None, allow_explosions: bool = False,
  stream: int = SEMIGROUP_STREAM
) -> SemigroupEstimate:
  """P_t h(x) = E[h(X^x_t)] by Monte Carlo over independent Euler paths."""
  x = check_point(spec, x)
  steps = grid_steps(t, dt)
  if samples < 2:
    raise ContractViolation(f"Need at least 2 samples for a standard error, got {samples}")
  if steps == 0:
    return SemigroupEstimate(float(h(x)), 0.0, samples)

  ends = simulate_endpoints(spec, np.broadcast_to(x, (samples, spec.n)), steps, dt, seed, stream, threads, allow_explosions)
  finite = np.all(np.isfinite(ends), axis=-1)
  mean, stderr = _mean_and_stderr(h(ends[finite]))
  if DEBUG >= 1: print(f"P_{t} {h.name}({x}) ≈ {mean} ± {stderr} ({samples} paths, {int((~finite).sum())} exploded)")
  return SemigroupEstimate(mean, stderr, int(finite.sum()), int((~finite).sum()))


def chapman_kolmogorov_check(
  spec: SdeSpec, h: TestFunction, x, s: float, t: float, dt: float, outer: int, inner: int, seed: int, threads: Optional[int] = None
) -> CheckReport:
  """
  P_t(P_s h)(x) against P_{s+t} h(x). The nested estimator runs `outer` paths to time t, then `inner`
  fresh paths to time s from each endpoint; the direct one runs outer × inner paths to s + t.
  """
  x = check_point(spec, x)
  steps_t, steps_s = grid_steps(t, dt), grid_steps(s, dt)
  if outer < 2 or inner < 1:
    raise ContractViolation(f"Need outer >= 2 and inner >= 1, got {outer} and {inner}")

  mids = simulate_endpoints(spec, np.broadcast_to(x, (outer, spec.n)), steps_t, dt, seed, NESTED_OUTER_STREAM, threads)
  ends = simulate_endpoints(spec, np.repeat(mids, inner, axis=0), steps_s, dt, seed, NESTED_INNER_STREAM, threads)
  inner_means = h(ends).reshape(outer, inner).mean(axis=1)
  nested_mean, nested_stderr = _mean_and_stderr(inner_means)
  direct = estimate_semigroup(spec, h, x, s + t, dt, outer*inner, seed, threads)

  bound = 4*np.hypot(nested_stderr, direct.stderr)
  gap = abs(nested_mean - direct.mean)
  details = {
    "s": s,
    "t": t,
    "nested": {"mean": nested_mean, "stderr": nested_stderr, "samples": outer*inner},
    "direct": direct.to_dict(),
    "gap": gap,
    "bound": bound,
  }
  if gap <= bound + GRID_TOL:
    return CheckReport("chapman-kolmogorov", "pass", details)
  return CheckReport("chapman-kolmogorov", "fail", details, f"nested and direct estimates differ by {gap:.3g} > {bound:.3g}")


def apply_generator(spec: SdeSpec, h: TestFunction, x) -> float:
  """A h(x) = Σ f_i ∂_i h + ½ Σ_{i,j} (g gᵀ)_{ij} ∂_i ∂_j h."""
  x = check_point(spec, x)
  grad, hess = h.derivatives(x)
  g = spec.diffusion(x)
  return float(spec.drift(x) @ grad + 0.5*np.sum((g @ g.T)*hess))


def generator_consistency_check(
  spec: SdeSpec, h: TestFunction, x, dt: float, samples: int, seed: int, horizons: Sequence[float] = (0.2, 0.1, 0.05), threads: Optional[int] = None
) -> CheckReport:
  """
  Difference quotients D(t) = (P_t h(x) - h(x))/t against A h(x). The constant C in |gap| <= C t is fitted as
  the envelope of |gap|/t over all but the smallest horizon; the smallest must then sit within
  4σ + CURVATURE_MARGIN·C·t of the generator. A gap that does not shrink with t fails.
  """
  horizons = [float(t) for t in horizons]
  if not horizons or any(t <= 0 for t in horizons) or any(a <= b for a, b in zip(horizons, horizons[1:])):
    raise ContractViolation(f"Horizons must be positive and decreasing, got {horizons}")
  x = check_point(spec, x)
  target = apply_generator(spec, h, x)
  h0 = float(h(x))

  quotients, sigmas = [], []
  for t in progress(horizons, total=len(horizons), desc="horizons"):
    estimate = estimate_semigroup(spec, h, x, t, dt, samples, seed, threads)
    quotients.append((estimate.mean - h0)/t)
    sigmas.append(estimate.stderr/t)
  ts, gaps, sigmas = np.array(horizons), np.array(quotients) - target, np.array(sigmas)

  C = float(np.max(np.abs(gaps[:-1])/ts[:-1])) if ts.size > 1 else 0.0

  final_gap, final_sigma, t_min = float(gaps[-1]), float(sigmas[-1]), float(ts[-1])
  bound = 4*final_sigma + CURVATURE_MARGIN*C*t_min
  details = {
    "generator": target,
    "horizons": ts,
    "quotients": np.array(quotients),
    "stderr": sigmas,
    "fitted_C": C,
    "final_gap": final_gap,
    "bound": bound,
    "trend_toward_generator": bool(np.all(np.diff(np.abs(gaps)) <= 4*(sigmas[1:] + sigmas[:-1]))),
  }
  if abs(final_gap) > bound + GRID_TOL:
    return CheckReport("generator", "fail", details, f"difference quotient misses A h(x) by {abs(final_gap):.3g} > {bound:.3g}")
  if final_sigma > GRID_TOL and 4*final_sigma >= abs(target):
    return CheckReport("generator", "inconclusive", details, "Monte-Carlo error dominates the generator value; raise --samples")
  return CheckReport("generator", "pass", details)


def strong_error(spec: SdeSpec, x, t: float, dts: Sequence[float], samples: int, seed: int, exact: Callable[[np.ndarray, float, np.ndarray], np.ndarray]) -> List[float]:
  """
  RMS error |X_t - exact(x, t, W_t)| for each dt, all runs driven by the same Brownian paths: the
  finest grid is sampled and coarser grids sum its increments.
  """
  x = check_point(spec, x)
  fine = min(dts)
  fine_steps = grid_steps(t, fine)
  factors = []
  for dt in dts:
    factor = int(round(dt/fine))
    if abs(factor*fine - dt) > GRID_TOL*dt:
      raise ContractViolation(f"dt={dt} is not a multiple of the finest step {fine}")
    if fine_steps % factor != 0:
      raise ContractViolation(f"dt={dt} does not divide t={t} on the grid of step {fine}")
    factors.append(factor)

  def run_block(block: int, size: int) -> np.ndarray:
    rng = block_generator(seed, STRONG_ERROR_STREAM, block)
    increments = rng.standard_normal((size, fine_steps, spec.d))*np.sqrt(fine)
    w_t = increments.sum(axis=1)
    oracle = exact(np.broadcast_to(x, (size, spec.n)), t, w_t)
    errors = []
    for dt, factor in zip(dts, factors):
      coarse = increments.reshape(size, fine_steps//factor, factor, spec.d).sum(axis=2)
      state = np.array(np.broadcast_to(x, (size, spec.n)))
      for k in range(coarse.shape[1]):
        state = euler_step(spec, state, coarse[:, k], dt)
      errors.append(np.sum((state - oracle)**2, axis=-1))
    return np.stack(errors, axis=1)

  squared = np.concatenate(map_blocks(run_block, samples), axis=0)
  rms = np.sqrt(squared.mean(axis=0))
  if DEBUG >= 1: print(f"Strong error of {spec.model} at t={t}: " + ", ".join(f"dt={dt}: {e:.3g}" for dt, e in zip(dts, rms)))
  return [float(e) for e in rms]


def closed_form_moment(spec: SdeSpec, h: TestFunction, x, t: float) -> Optional[float]:
  """Exact P_t h(x) where one is known: 1-D OU for x and x², GBM for x. None otherwise."""
  x = check_point(spec, x)
  if spec.model == "ou" and spec.n == 1:
    lam, sigma2 = spec.params["lambda"][0], float(np.sum(np.square(spec.params["sigma"][0])))
    decay = np.exp(-lam*t)
    if h.name == "coord[0]": return float(x[0]*decay)
    if h.name == "square[0]":
      variance = sigma2*t if lam == 0 else sigma2*(1 - decay**2)/(2*lam)
      return float(x[0]**2*decay**2 + variance)
  if spec.model == "gbm-1d" and h.name == "coord[0]":
    return float(x[0]*np.exp(spec.params["a"]*t))
  return None
