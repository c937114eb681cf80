from .system import EnvironmentSpace, ProductDynamicalSystem, reduce, iterate, environment_average, is_bijective, inverse, point_map_system
from .dilate import dilate, dilate_invertible

__all__ = [
  "EnvironmentSpace", "ProductDynamicalSystem", "reduce", "iterate", "environment_average", "is_bijective", "inverse", "point_map_system", "dilate",
  "dilate_invertible"
]
