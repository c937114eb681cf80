from .analysis import (
  DefectReport, InvertibilityReport, homomorphism_defect, is_deterministic_via_homomorphism, is_markov_invertible, is_permutation, classify
)

__all__ = [
  "DefectReport", "InvertibilityReport", "homomorphism_defect", "is_deterministic_via_homomorphism", "is_markov_invertible", "is_permutation", "classify"
]
