import json
import unittest
from pathlib import Path
from tempfile import TemporaryDirectory

import numpy as np
import pytest

from opensys.errors import ConfigError, ContractViolation, EnvironmentTooLarge
from opensys.markov.kernel import StateSpace, MarkovKernel, Observable, identity, power, apply_to_observable, random_kernel, random_deterministic_kernel
from opensys.dilation.system import (
  EnvironmentSpace, ProductDynamicalSystem, reduce, iterate, environment_average, is_bijective, inverse, point_map_system
)
from opensys.dilation.dilate import dilate, dilate_invertible, enumerate_functions
from opensys.dilation.system_io import load_system, parse_system_json, save_system, system_to_dict

root_path = Path(__file__).parent/"test_data"

TWO = StateSpace(("1", "2"))
L = MarkovKernel(TWO, np.array([[0.75, 0.25], [0.75, 0.25]]))


def rotation() -> ProductDynamicalSystem:
  # anticlockwise rotation (1,1) -> (2,1) -> (2,2) -> (1,2) -> (1,1)
  env = EnvironmentSpace(("1", "2"), np.array([0.25, 0.75]))
  images = {(0, 0): (1, 0), (1, 0): (1, 1), (1, 1): (0, 1), (0, 1): (0, 0)}
  return point_map_system(TWO, env, lambda x, y: images[(x, y)])


class TestCounterExample(unittest.TestCase):
  def test_rotation_reduces_to_L(self):
    np.testing.assert_allclose(reduce(rotation()).rows, [[0.75, 0.25], [0.75, 0.25]], atol=1e-12, rtol=0)

  def test_preset_matches_constructed_rotation(self):
    preset = load_system("preset:rotation")
    np.testing.assert_array_equal(preset.x_map, rotation().x_map)
    np.testing.assert_array_equal(preset.y_map, rotation().y_map)

  def test_square_of_rotation(self):
    squared = iterate(rotation(), 2)
    # X2(1,1)=2, X2(2,1)=1, X2(2,2)=1, X2(1,2)=2
    self.assertEqual(squared.x_map[0, 0], 1)
    self.assertEqual(squared.x_map[1, 0], 0)
    self.assertEqual(squared.x_map[1, 1], 0)
    self.assertEqual(squared.x_map[0, 1], 1)
    np.testing.assert_allclose(reduce(squared).rows, [[0.0, 1.0], [1.0, 0.0]], atol=1e-12, rtol=0)
    preset = load_system("preset:rotation_squared")
    np.testing.assert_array_equal(squared.x_map, preset.x_map)
    np.testing.assert_array_equal(squared.y_map, preset.y_map)

  def test_iterates_do_not_dilate_powers(self):
    L_reduced = reduce(rotation())
    self.assertTrue(power(L_reduced, 2).allclose(L_reduced))
    self.assertFalse(reduce(iterate(rotation(), 2)).allclose(power(L_reduced, 2)))

  def test_iterate_once_is_identity_operation(self):
    once = iterate(rotation(), 1)
    np.testing.assert_array_equal(once.x_map, rotation().x_map)
    np.testing.assert_array_equal(once.y_map, rotation().y_map)

  def test_iterate_requires_positive_count(self):
    with self.assertRaises(ContractViolation):
      iterate(rotation(), 0)


class TestReduce(unittest.TestCase):
  def test_constant_x_map_gives_identity(self):
    env = EnvironmentSpace(("a", "b", "c"), np.array([0.2, 0.3, 0.5]))
    sys = point_map_system(TWO, env, lambda x, y: (x, (y + 1) % 3))
    np.testing.assert_array_equal(reduce(sys).rows, np.eye(2))

  def test_y_map_is_irrelevant(self):
    rng = np.random.default_rng(5)
    sys = dilate(random_kernel(StateSpace.of_size(3), rng))
    for _ in range(10):
      scrambled = sys.with_y_map(rng.integers(0, sys.env.size, size=sys.y_map.shape))
      np.testing.assert_array_equal(reduce(scrambled).rows, reduce(sys).rows)

  def test_environment_average_matches_kernel_action(self):
    rng = np.random.default_rng(8)
    sys = dilate(random_kernel(StateSpace.of_size(3), rng))
    f = Observable(sys.system_space, rng.normal(size=3))
    np.testing.assert_allclose(environment_average(sys, f).values, apply_to_observable(reduce(sys), f).values, atol=1e-12, rtol=0)


class TestDilate(unittest.TestCase):
  def test_identity_kernel(self):
    sys = dilate(identity(TWO))
    self.assertEqual(sys.env.size, 4)
    np.testing.assert_array_equal(sys.env.weights, [0.0, 1.0, 0.0, 0.0])
    self.assertEqual(sys.env.ids[1], "(1,2)")

  def test_uniform_kernel(self):
    uniform = MarkovKernel(TWO, np.full((2, 2), 0.5))
    sys = dilate(uniform)
    np.testing.assert_allclose(sys.env.weights, np.full(4, 0.25), atol=1e-15)
    self.assertTrue(reduce(sys).allclose(uniform))

  def test_L_product_measure(self):
    sys = dilate(L)
    np.testing.assert_array_equal(sys.env.functions, [[0, 0], [0, 1], [1, 0], [1, 1]])
    np.testing.assert_allclose(sys.env.weights, [9/16, 3/16, 3/16, 1/16], atol=1e-15)
    self.assertTrue(reduce(sys).allclose(L))

  def test_dilation_map(self):
    sys = dilate(L)
    for x in range(2):
      for y in range(4):
        self.assertEqual(sys.step(x, y), (sys.env.functions[y, x], y))

  def test_environment_cap(self):
    with self.assertRaises(EnvironmentTooLarge) as e:
      dilate(identity(StateSpace.of_size(4)), max_env=100)
    self.assertIn("environment too large", str(e.exception))

  def test_rows_off_by_round_off_still_dilate(self):
    k = MarkovKernel(StateSpace.of_size(3), np.full((3, 3), (1 + 9e-10)/3))
    sys = dilate(k)
    self.assertAlmostEqual(sys.env.weights.sum(), 1.0, delta=1e-12)
    np.testing.assert_allclose(reduce(sys).rows, np.full((3, 3), 1/3), rtol=0.0, atol=1e-12)
    self.assertTrue(reduce(dilate_invertible(k, 0)).allclose(reduce(sys)))

  def test_environment_weights_clip_round_off(self):
    env = EnvironmentSpace(("a", "b", "c"), [0.5 + 5e-10, -5e-10, 0.5])
    self.assertGreaterEqual(env.weights.min(), 0.0)
    self.assertEqual(env.weights[1], 0.0)
    self.assertAlmostEqual(env.weights.sum(), 1.0, delta=1e-15)

  def test_enumeration_order(self):
    np.testing.assert_array_equal(enumerate_functions(2), [[0, 0], [0, 1], [1, 0], [1, 1]])
    self.assertEqual(enumerate_functions(3).shape, (27, 3))

  def test_iterates_of_deterministic_dilation_match_powers(self):
    rng = np.random.default_rng(21)
    for _ in range(10):
      k = random_deterministic_kernel(StateSpace.of_size(3), rng)
      sys = dilate(k)
      for m in range(1, 5):
        np.testing.assert_allclose(reduce(iterate(sys, m)).rows, power(k, m).rows, atol=1e-12, rtol=0)

  def test_single_iterate_reduces_to_kernel(self):
    k = random_kernel(StateSpace.of_size(3), np.random.default_rng(2))
    self.assertTrue(reduce(iterate(dilate(k), 1)).allclose(k))


class TestDilateInvertible(unittest.TestCase):
  def test_reduces_to_L(self):
    sys = dilate_invertible(L, "1")
    self.assertEqual(sys.env.size, 8)
    self.assertTrue(reduce(sys).allclose(L))
    self.assertTrue(is_bijective(sys))

  def test_bijective_for_two_state_kernels(self):
    rng = np.random.default_rng(0)
    for x0 in (0, 1):
      for k in [L, identity(TWO), MarkovKernel(TWO, np.array([[0.0, 1.0], [1.0, 0.0]]))] + [random_kernel(TWO, rng) for _ in range(5)]:
        sys = dilate_invertible(k, x0)
        self.assertTrue(is_bijective(sys))
        images = {sys.step(x, y) for x in range(2) for y in range(sys.env.size)}
        self.assertEqual(len(images), 2*sys.env.size)

  def test_first_case_wins_on_overlap(self):
    sys = dilate_invertible(L, "1")
    m = 4
    for x in range(2):
      for y in range(m):
        if sys.env.functions[y, x] == 0:
          # z = x0 = y(x): case 1 gives (y(x), (x, y)) = (x0, (x, y))
          self.assertEqual(sys.step(x, 0*m + y), (0, x*m + y))

  def test_inverse_undoes_the_map(self):
    sys = dilate_invertible(random_kernel(StateSpace.of_size(3), np.random.default_rng(4)), 2)
    back = inverse(sys)
    for x in range(3):
      for y in range(sys.env.size):
        self.assertEqual(back.step(*sys.step(x, y)), (x, y))

  def test_measure_lives_on_x0(self):
    sys = dilate_invertible(L, "2")
    np.testing.assert_array_equal(sys.env.weights[:4], 0.0)
    np.testing.assert_allclose(sys.env.weights[4:], [9/16, 3/16, 3/16, 1/16], atol=1e-15)
    self.assertEqual(sys.env.ids[4], "2:(1,1)")

  def test_cap(self):
    with self.assertRaises(EnvironmentTooLarge):
      dilate_invertible(identity(StateSpace.of_size(3)), 0, max_env=80)

  def test_inverse_of_non_bijective(self):
    with self.assertRaises(ContractViolation):
      inverse(dilate(L))


class TestSystemIO(unittest.TestCase):
  def test_round_trip(self):
    sys = dilate_invertible(L, 0)
    back = parse_system_json(json.dumps(system_to_dict(sys)))
    np.testing.assert_array_equal(back.x_map, sys.x_map)
    np.testing.assert_array_equal(back.y_map, sys.y_map)
    np.testing.assert_array_equal(back.env.weights, sys.env.weights)
    np.testing.assert_array_equal(back.env.functions, sys.env.functions)
    self.assertEqual(back.env.ids, sys.env.ids)

  def test_save_and_load(self):
    with TemporaryDirectory() as tmp:
      path = Path(tmp)/"rotation.json"
      save_system(rotation(), path)
      self.assertTrue(reduce(load_system(path)).allclose(L))

  def test_x_map_out_of_range(self):
    with self.assertRaises(ConfigError) as e:
      load_system(root_path/"bad_x_map.json")
    self.assertIn("x_map values must index", str(e.exception))

  def test_ragged_map(self):
    with self.assertRaises(ConfigError) as e:
      load_system(root_path/"ragged.json")
    self.assertIn("x_map row 1", str(e.exception))

  def test_missing_file(self):
    with self.assertRaises(FileNotFoundError) as e:
      load_system("nowhere.json")
    self.assertEqual(str(e.exception), "System file not found at nowhere.json")


@pytest.mark.slow
def test_round_trip_on_random_kernels():
  rng = np.random.default_rng(2024)
  for i in range(500):
    n = (2, 3, 4)[i % 3]
    k = random_kernel(StateSpace.of_size(n), rng)
    sys = dilate(k)
    assert abs(sys.env.weights.sum() - 1.0) <= 1e-12
    np.testing.assert_allclose(reduce(sys).rows, k.rows, atol=1e-12, rtol=0)


@pytest.mark.slow
def test_invertible_dilation_on_random_kernels():
  rng = np.random.default_rng(77)
  for i in range(100):
    n = 2 if i % 2 == 0 else 3
    k = random_kernel(StateSpace.of_size(n), rng)
    sys = dilate_invertible(k, int(rng.integers(0, n)))
    assert is_bijective(sys)
    np.testing.assert_allclose(reduce(sys).rows, k.rows, atol=1e-12, rtol=0)


if __name__ == "__main__":
  unittest.main()
