from .registry import SdeSpec, build_spec, custom_spec, load_model, parse_model_json
from .noise import NoisePath, sample_path, shift_path, path_values
from .observables import TestFunction, make_observable
from .flow import FlowResult, euler_step, euler_flow, flow_map, cocycle_check, shifted_integral_check
from .semigroup import (
  SemigroupEstimate, estimate_semigroup, chapman_kolmogorov_check, apply_generator, generator_consistency_check, strong_error, closed_form_moment
)

__all__ = [
  "SdeSpec", "build_spec", "custom_spec", "load_model", "parse_model_json", "NoisePath", "sample_path", "shift_path", "path_values", "TestFunction",
  "make_observable", "FlowResult", "euler_step", "euler_flow", "flow_map", "cocycle_check", "shifted_integral_check", "SemigroupEstimate",
  "estimate_semigroup", "chapman_kolmogorov_check", "apply_generator", "generator_consistency_check", "strong_error", "closed_form_moment"
]
