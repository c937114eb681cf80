import argparse
import json
import sys
import traceback
from datetime import datetime, timezone
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from opensys.errors import ConfigError, ContractViolation, EnvironmentTooLarge, FlowExplosion, MissingDerivative
from opensys.helpers import DEBUG, DEFAULT_SEED, EXACT_TOL, STOCHASTIC_TOL, VERSION, format_vector
from opensys.reports import CheckReport, to_jsonable
from opensys.markov.kernel import MarkovKernel, power
from opensys.markov.kernel_io import load_kernel, kernel_to_csv
from opensys.dilation.system import ProductDynamicalSystem, reduce
from opensys.dilation.dilate import dilate, dilate_invertible
from opensys.dilation.system_io import load_system, system_to_dict
from opensys.interactions.chain import chain_of, reduce_n_exact, reduce_n_monte_carlo
from opensys.randomness.analysis import classify, homomorphism_defect, is_markov_invertible, is_deterministic_via_homomorphism
from opensys.sde.registry import SdeSpec, build_spec, load_model
from opensys.sde.noise import sample_path
from opensys.sde.observables import make_observable
from opensys.sde.flow import brownian_integrand, cocycle_check, euler_flow, shifted_integral_check
from opensys.sde.semigroup import (
  apply_generator, chapman_kolmogorov_check, closed_form_moment, estimate_semigroup, generator_consistency_check, grid_steps
)

EXIT_CODES = {"pass": 0, "fail": 1, "usage": 2, "inconclusive": 3}
SDE_CHECKS = ["cocycle", "integral", "semigroup", "generator", "chapman"]


class UsageError(Exception):
  pass


class RunConfig(BaseModel):
  command: str
  params: Dict[str, Any] = Field(default_factory=dict)
  seed: int = Field(default=DEFAULT_SEED, ge=0, lt=2**64)
  format: Literal["json", "csv"] = "json"
  out: Optional[str] = None
  threads: Optional[int] = Field(default=None, ge=1)
  pretty: bool = False
  timestamp: bool = True
  max_env: Optional[int] = Field(default=None, ge=1)
  max_tuples: Optional[int] = Field(default=None, ge=1)
  tol: float = Field(default=STOCHASTIC_TOL, ge=0)

  @classmethod
  def from_namespace(cls, args: argparse.Namespace) -> "RunConfig":
    shared = {"seed", "format", "out", "threads", "pretty", "no_timestamp", "max_env", "max_tuples", "tol", "command"}
    params = {k: v for k, v in vars(args).items() if k not in shared and v is not None}
    try:
      return cls(
        command=args.command, params=params, seed=args.seed, format=args.format, out=args.out, threads=args.threads, pretty=args.pretty,
        timestamp=not args.no_timestamp, max_env=args.max_env, max_tuples=args.max_tuples, tol=args.tol
      )
    except ValidationError as e:
      raise ConfigError(f"Error validating run configuration: {e}") from e


def build_parser() -> argparse.ArgumentParser:
  common = argparse.ArgumentParser(add_help=False)
  common.add_argument("--seed", type=int, default=DEFAULT_SEED, help="Master seed for every random stream")
  common.add_argument("--format", choices=["json", "csv"], default="json", help="Output format")
  common.add_argument("--out", type=str, default=None, help="Write the report here instead of stdout")
  common.add_argument("--threads", type=int, default=None, help="Worker threads (default: OPENSYS_THREADS or min(8, cpus))")
  common.add_argument("--pretty", action="store_true", help="Print a summary table on stderr")
  common.add_argument("--no-timestamp", action="store_true", help="Leave the timestamp out of the report")
  common.add_argument("--max-env", type=int, default=None, help="Cap on environment points for dilations")
  common.add_argument("--max-tuples", type=int, default=None, help="Cap on environment tuples for exact iteration")
  common.add_argument("--tol", type=float, default=STOCHASTIC_TOL, help="Tolerance for determinism and invertibility")

  parser = argparse.ArgumentParser(prog="opensys", description="Dilations of Markov kernels and stochastic flows")
  sub = parser.add_subparsers(dest="command", required=True)

  p = sub.add_parser("reduce", parents=[common], help="Reduce a product system to its Markov kernel")
  p.add_argument("--system", required=True, help="System JSON (path or preset:<name>)")

  p = sub.add_parser("dilate", parents=[common], help="Deterministic dilation of a kernel")
  p.add_argument("--kernel", required=True, help="Kernel JSON/CSV (path or preset:<name>)")

  p = sub.add_parser("dilate-invertible", parents=[common], help="Invertible dilation of a kernel")
  p.add_argument("--kernel", required=True)
  p.add_argument("--x0", required=True, help="Distinguished state (label or 0-based index)")

  p = sub.add_parser("iterate", parents=[common], help="n-step environment average of repeated interactions")
  source = p.add_mutually_exclusive_group(required=True)
  source.add_argument("--kernel", help="Kernel to dilate")
  source.add_argument("--system", help="Product system to chain")
  p.add_argument("--x", required=True, help="Initial state (label or 0-based index)")
  p.add_argument("--n", type=int, required=True, help="Number of interactions")
  p.add_argument("--mode", choices=["exact", "mc"], default="exact")
  p.add_argument("--samples", type=int, default=10**5)

  for name, help_text in (("defect", "Homomorphism defect"), ("classify", "Deterministic / random classification"), ("invertible", "Markov invertibility")):
    p = sub.add_parser(name, parents=[common], help=help_text)
    p.add_argument("--kernel", required=True)

  for name, help_text in (("sde-flow", "Euler-Maruyama flow of an SDE"), ("sde-semigroup", "Monte-Carlo semigroup estimate"), ("sde-check", "SDE checks")):
    p = sub.add_parser(name, parents=[common], help=help_text)
    model = p.add_mutually_exclusive_group(required=True)
    model.add_argument("--model", choices=["ou", "linear", "gbm-1d", "double-well-1d"], help="Registry model (with --params)")
    model.add_argument("--config", help="Model document {\"model\": ..., \"params\": ...} (path or preset:<name>)")
    p.add_argument("--params", type=str, default=None, help="Model parameters as JSON")
    p.add_argument("--x", type=str, required=True, help="Initial state, e.g. 1.0 or 1.0,2.0")
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--s", type=float, default=None, help="Split time for cocycle / Chapman-Kolmogorov checks (default t/2)")
    p.add_argument("--observable", type=str, default="coord", help="coord, square, cos, sin or box")
    p.add_argument("--obs-params", type=str, default=None, help="Observable parameters as JSON")
    p.add_argument("--samples", type=int, default=10**4)
    p.add_argument("--outer", type=int, default=10**4)
    p.add_argument("--inner", type=int, default=10)
    p.add_argument("--horizons", type=str, default="0.2,0.1,0.05", help="Decreasing horizons for the generator check")
    p.add_argument("--allow-explosions", action="store_true", help="Drop exploded paths instead of aborting")
    if name != "sde-semigroup":
      p.add_argument("--check", choices=SDE_CHECKS, required=name == "sde-check", default=None)
  return parser


def parse_state(space, value: str):
  """A label when one matches, otherwise a 0-based index."""
  if value in space.labels: return value
  try:
    return int(value)
  except ValueError:
    return value


def parse_vector(value: str) -> List[float]:
  try:
    parsed = json.loads(value) if value.strip().startswith("[") else [float(v) for v in value.split(",")]
  except ValueError as e:
    raise ConfigError(f"Cannot parse state vector {value!r}: {e}") from e
  return [float(v) for v in parsed]


def parse_json_option(value: Optional[str], what: str) -> dict:
  if value is None: return {}
  try:
    return json.loads(value)
  except json.JSONDecodeError as e:
    raise ConfigError(f"Invalid JSON for {what}: {e}") from e


def load_sde(config: RunConfig) -> SdeSpec:
  if "config" in config.params:
    return load_model(config.params["config"])
  return build_spec(config.params["model"], parse_json_option(config.params.get("params"), "--params"))


def handle_reduce(config: RunConfig) -> Tuple[str, dict, Any]:
  k = reduce(load_system(config.params["system"]))
  return "pass", {"kernel": k.to_dict()}, k


def handle_dilate(config: RunConfig) -> Tuple[str, dict, Any]:
  k = load_kernel(config.params["kernel"])
  if config.command == "dilate":
    sys_ = dilate(k, config.max_env)
  else:
    sys_ = dilate_invertible(k, parse_state(k.space, config.params["x0"]), config.max_env)
  reduced = reduce(sys_)
  # loose rows are rescaled before dilating, so compare with the normalised kernel
  normalised = k.rows/k.rows.sum(axis=1, keepdims=True)
  matches = bool(np.allclose(reduced.rows, normalised, rtol=0.0, atol=EXACT_TOL))
  outputs = {"system": system_to_dict(sys_), "env_size": sys_.env.size, "reduces_to_kernel": matches}
  return ("pass" if outputs["reduces_to_kernel"] else "fail"), outputs, None


def handle_iterate(config: RunConfig) -> Tuple[str, dict, Any]:
  params = config.params
  n = params["n"]
  if "kernel" in params:
    k = load_kernel(params["kernel"])
    base: ProductDynamicalSystem = dilate(k, config.max_env)
    # the dilation runs on rows rescaled to mass 1
    k = MarkovKernel(k.space, k.rows/k.rows.sum(axis=1, keepdims=True))
  else:
    base = load_system(params["system"])
    k = reduce(base)
  chain = chain_of(base, max(n, 1))
  x = parse_state(k.space, params["x"])
  reference = power(k, n).row(x).weights
  if params["mode"] == "exact":
    distribution = reduce_n_exact(chain, x, n, config.max_tuples).weights
    outputs = {"distribution": distribution, "reference": reference}
    match = bool(np.allclose(distribution, reference, rtol=0.0, atol=EXACT_TOL))
  else:
    estimate = reduce_n_monte_carlo(chain, x, n, params["samples"], config.seed, config.threads)
    distribution = estimate.distribution.weights
    outputs = {**estimate.to_dict(), "reference": reference}
    sigma = np.sqrt(np.clip(reference*(1 - reference), 0.0, None)/params["samples"])
    match = bool(np.all(np.abs(distribution - reference) <= 4*sigma + EXACT_TOL))
  outputs = {"states": list(k.space.labels), **outputs, "matches_reference": match}
  return ("pass" if match else "fail"), outputs, outputs


def handle_kernel_analysis(config: RunConfig) -> Tuple[str, dict, Any]:
  k = load_kernel(config.params["kernel"])
  if config.command == "defect":
    report = homomorphism_defect(k)
    return "pass", {**report.to_dict(), "deterministic": is_deterministic_via_homomorphism(k, config.tol)}, None
  if config.command == "classify":
    return "pass", {"label": classify(k, config.tol)}, None
  report = is_markov_invertible(k, config.tol)
  return "pass", report.to_dict(), None


def handle_sde(config: RunConfig) -> Tuple[str, dict, Any]:
  params = config.params
  spec = load_sde(config)
  x = parse_vector(params["x"])
  t, dt = params["t"], params["dt"]
  check = "semigroup" if config.command == "sde-semigroup" else params.get("check")
  h = make_observable(params["observable"], spec.n, parse_json_option(params.get("obs_params"), "--obs-params"))
  s = params.get("s", t/2)
  outputs: Dict[str, Any] = {"model": spec.to_dict()}

  if check is None:
    steps = grid_steps(t, dt)
    if steps == 0:
      raise ContractViolation("sde-flow needs t > 0")
    flow = euler_flow(spec, x, sample_path(spec.d, dt, steps, config.seed))
    outputs["flow"] = flow.to_dict()
    return "pass", outputs, flow

  if check in ("cocycle", "integral"):
    steps = grid_steps(t, dt)
    if steps == 0:
      raise ContractViolation(f"{check} check needs t > 0")
    w = sample_path(spec.d, dt, steps, config.seed)
    k_s = grid_steps(s, dt)
    report = cocycle_check(spec, x, w, k_s, steps - k_s) if check == "cocycle" else shifted_integral_check(brownian_integrand(), w, k_s)
  elif check == "semigroup":
    estimate = estimate_semigroup(spec, h, x, t, dt, params["samples"], config.seed, config.threads, params.get("allow_explosions", False))
    oracle = closed_form_moment(spec, h, x, t)
    details = {"estimate": estimate.to_dict(), "oracle": oracle}
    if oracle is None:
      report = CheckReport("semigroup", "pass", details, "no closed form for this model and observable")
    else:
      bound = 4*estimate.stderr + 5*dt
      details["bound"] = bound
      report = CheckReport("semigroup", "pass" if abs(estimate.mean - oracle) <= bound else "fail", details)
  elif check == "chapman":
    report = chapman_kolmogorov_check(spec, h, x, s, t - s, dt, params["outer"], params["inner"], config.seed, config.threads)
  else:
    horizons = parse_vector(params["horizons"])
    report = generator_consistency_check(spec, h, x, dt, params["samples"], config.seed, horizons, config.threads)
    report.details["apply_generator"] = apply_generator(spec, h, x)
  outputs["check"] = report.to_dict()
  return report.status, outputs, None


HANDLERS = {
  "reduce": handle_reduce,
  "dilate": handle_dilate,
  "dilate-invertible": handle_dilate,
  "iterate": handle_iterate,
  "defect": handle_kernel_analysis,
  "classify": handle_kernel_analysis,
  "invertible": handle_kernel_analysis,
  "sde-flow": handle_sde,
  "sde-semigroup": handle_sde,
  "sde-check": handle_sde,
}


def to_csv(config: RunConfig, csv_payload: Any) -> str:
  if isinstance(csv_payload, MarkovKernel):
    return kernel_to_csv(csv_payload)
  if isinstance(csv_payload, dict) and "distribution" in csv_payload:
    lines = ["state,probability" + (",stderr" if "stderr" in csv_payload else "")]
    for i, state in enumerate(csv_payload["states"]):
      row = [state, repr(float(csv_payload["distribution"][i]))]
      if "stderr" in csv_payload: row.append(repr(float(csv_payload["stderr"][i])))
      lines.append(",".join(row))
    return "\n".join(lines) + "\n"
  if hasattr(csv_payload, "to_csv"):
    return csv_payload.to_csv()
  raise UsageError(f"--format csv is not available for {config.command}")


def build_report(config: RunConfig, status: str, outputs: dict) -> dict:
  provenance = {"seed": config.seed, "version": VERSION}
  if config.timestamp:
    provenance["timestamp"] = datetime.now(timezone.utc).isoformat()
  return {"command": config.command, "status": status, "inputs": to_jsonable(config.params), "outputs": to_jsonable(outputs), "provenance": provenance}


def print_summary(report: dict):
  from rich.console import Console
  from rich.table import Table

  table = Table(title=f"opensys {report['command']}", show_header=False)
  colour = {"pass": "green", "fail": "red", "inconclusive": "yellow"}[report["status"]]
  table.add_row("status", f"[{colour}]{report['status']}[/{colour}]")
  for key, value in report["outputs"].items():
    if isinstance(value, list) and value and all(isinstance(v, (int, float)) for v in value):
      value = format_vector(value)
    elif isinstance(value, (dict, list)):
      value = json.dumps(value)[:80]
    table.add_row(key, str(value))
  table.add_row("seed", str(report["provenance"]["seed"]))
  Console(stderr=True).print(table)


def write_output(config: RunConfig, text: str):
  if config.out is None:
    sys.stdout.write(text)
    return
  with open(config.out, "w") as f:
    f.write(text)


def print_error(message: str):
  from rich.console import Console
  from rich.markup import escape
  Console(stderr=True).print(f"[red]Error:[/red] {escape(message)}")


def run(argv: Optional[List[str]] = None) -> int:
  parser = build_parser()
  try:
    args = parser.parse_args(argv)
  except SystemExit as e:
    return EXIT_CODES["usage"] if e.code else 0

  try:
    config = RunConfig.from_namespace(args)
    if DEBUG >= 1: print(f"Running {config.command} with seed {config.seed}", file=sys.stderr)
    status, outputs, csv_payload = HANDLERS[config.command](config)
    report = build_report(config, status, outputs)
    text = to_csv(config, csv_payload) if config.format == "csv" else json.dumps(report, indent=2) + "\n"
    write_output(config, text)
    if config.pretty: print_summary(report)
    return EXIT_CODES[status]
  except FlowExplosion as e:
    print_error(str(e))
    if DEBUG >= 1: traceback.print_exc()
    return EXIT_CODES["fail"]
  except (ContractViolation, ConfigError, EnvironmentTooLarge, MissingDerivative, FileNotFoundError, UsageError) as e:
    print_error(str(e))
    if DEBUG >= 1: traceback.print_exc()
    return EXIT_CODES["usage"]


if __name__ == "__main__":
  sys.exit(run())
