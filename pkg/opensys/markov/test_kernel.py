import unittest

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from opensys.errors import ContractViolation
from opensys.markov.kernel import (
  StateSpace, MarkovKernel, FiniteMeasure, Observable, apply_to_observable, apply_to_measure, compose, power, is_deterministic, identity, from_point_map,
  lift_observable, stationary_distribution, random_kernel, random_deterministic_kernel
)

TWO = StateSpace(("1", "2"))
L = MarkovKernel(TWO, np.array([[0.75, 0.25], [0.75, 0.25]]))
SWAP = MarkovKernel(TWO, np.array([[0.0, 1.0], [1.0, 0.0]]))
UNIFORM = MarkovKernel(TWO, np.full((2, 2), 0.5))


@st.composite
def kernels(draw, max_states=5):
  n = draw(st.integers(min_value=1, max_value=max_states))
  seed = draw(st.integers(min_value=0, max_value=2**32 - 1))
  return random_kernel(StateSpace.of_size(n), np.random.default_rng(seed))


class TestStateSpace(unittest.TestCase):
  def test_labels_must_be_distinct(self):
    with self.assertRaises(ContractViolation) as e:
      StateSpace(("a", "b", "a"))
    self.assertIn("duplicated: ['a']", str(e.exception))

  def test_empty_space_rejected(self):
    with self.assertRaises(ContractViolation):
      StateSpace(())

  def test_index_of_accepts_labels_and_indices(self):
    space = StateSpace(("x", "y", "z"))
    self.assertEqual(space.index_of("z"), 2)
    self.assertEqual(space.index_of(1), 1)
    with self.assertRaises(ContractViolation):
      space.index_of(3)
    with self.assertRaises(ContractViolation):
      space.index_of("w")


class TestMarkovKernel(unittest.TestCase):
  def test_rejects_negative_entry_naming_row(self):
    with self.assertRaises(ContractViolation) as e:
      MarkovKernel(TWO, np.array([[1.0, 0.0], [1.1, -0.1]]))
    self.assertIn("row 1 entry 0", str(e.exception))

  def test_rejects_bad_row_sum(self):
    with self.assertRaises(ContractViolation) as e:
      MarkovKernel(TWO, np.array([[0.5, 0.5], [0.3, 0.3]]))
    self.assertIn("row 1", str(e.exception))

  def test_rejects_wrong_shape(self):
    with self.assertRaises(ContractViolation):
      MarkovKernel(TWO, np.eye(3))

  def test_round_off_negatives_are_clipped(self):
    k = MarkovKernel(TWO, np.array([[1 + 5e-10, -5e-10], [0.5, 0.5]]))
    np.testing.assert_array_equal(k.rows, [[1.0, 0.0], [0.5, 0.5]])
    self.assertGreaterEqual(k.rows.min(), 0.0)
    p = FiniteMeasure(TWO, [-5e-10, 1 + 5e-10])
    np.testing.assert_array_equal(p.weights, [0.0, 1.0])

  def test_rows_without_negatives_are_stored_as_given(self):
    rows = np.array([[0.1, 0.2, 0.7], [1 + 4e-10, 0.0, 0.0], [0.3, 0.3, 0.4]])
    np.testing.assert_array_equal(MarkovKernel(StateSpace.of_size(3), rows).rows, rows)

  def test_tolerates_tiny_rounding(self):
    k = MarkovKernel(TWO, np.array([[0.5 + 1e-11, 0.5], [0.0, 1.0]]))
    self.assertEqual(k.size, 2)

  def test_rows_are_read_only(self):
    with self.assertRaises(ValueError):
      L.rows[0, 0] = 0.0


class TestActions(unittest.TestCase):
  def test_identity_on_observable(self):
    f = Observable(TWO, np.array([3.0, -7.0]))
    np.testing.assert_array_equal(apply_to_observable(identity(TWO), f).values, f.values)

  def test_L_on_sign_observable(self):
    f = Observable(TWO, np.array([1.0, -1.0]))
    np.testing.assert_allclose(apply_to_observable(L, f).values, [0.5, 0.5], atol=1e-15)

  def test_uniform_on_sign_observable(self):
    f = Observable(TWO, np.array([1.0, -1.0]))
    np.testing.assert_allclose(apply_to_observable(UNIFORM, f).values, [0.0, 0.0], atol=1e-15)

  def test_L_on_dirac(self):
    p = apply_to_measure(L, FiniteMeasure.dirac(TWO, "1"))
    np.testing.assert_allclose(p.weights, [0.75, 0.25], atol=1e-15)

  def test_identity_on_measure(self):
    p = FiniteMeasure(TWO, np.array([0.3, 0.7]))
    np.testing.assert_array_equal(apply_to_measure(identity(TWO), p).weights, p.weights)

  def test_uniform_measure_fixed_by_doubly_stochastic(self):
    space = StateSpace.of_size(3)
    k = MarkovKernel(space, np.array([[0.2, 0.3, 0.5], [0.5, 0.2, 0.3], [0.3, 0.5, 0.2]]))
    np.testing.assert_allclose(apply_to_measure(k, FiniteMeasure.uniform(space)).weights, np.full(3, 1/3), atol=1e-15)

  def test_dimension_mismatch(self):
    with self.assertRaises(ContractViolation) as e:
      apply_to_observable(L, Observable.constant(StateSpace.of_size(3)))
    self.assertIn("Dimension mismatch", str(e.exception))
    with self.assertRaises(ContractViolation):
      compose(L, identity(StateSpace(("a", "b"))))


class TestComposition(unittest.TestCase):
  def test_L_is_idempotent(self):
    self.assertTrue(compose(L, L).allclose(L))
    self.assertTrue(power(L, 2).allclose(L))

  def test_identity_is_neutral(self):
    self.assertTrue(compose(identity(TWO), L).allclose(L))

  def test_deterministic_composition(self):
    space = StateSpace.of_size(3)
    first = from_point_map(space, [1, 2, 2])
    second = from_point_map(space, [0, 0, 1])
    composed = compose(first, second)
    ok, images = is_deterministic(composed)
    self.assertTrue(ok)
    self.assertEqual(images, [0, 1, 1])

  def test_power_zero_is_identity(self):
    np.testing.assert_array_equal(power(L, 0).rows, np.eye(2))

  def test_involution_squares_to_identity(self):
    np.testing.assert_array_equal(power(SWAP, 2).rows, np.eye(2))

  def test_power_of_loose_kernel_keeps_mass(self):
    loose = MarkovKernel(TWO, np.array([[0.6 + 5e-10, 0.4], [0.2, 0.8 - 5e-10]]))
    for m in range(1, 6):
      expected = np.linalg.matrix_power(loose.rows, m).sum(axis=1)
      np.testing.assert_allclose(power(loose, m).rows.sum(axis=1), expected, rtol=0.0, atol=1e-12)

  def test_negative_power(self):
    with self.assertRaises(ContractViolation):
      power(L, -1)


class TestDeterminism(unittest.TestCase):
  def test_identity(self):
    self.assertEqual(is_deterministic(identity(TWO)), (True, [0, 1]))

  def test_L_is_random(self):
    self.assertEqual(is_deterministic(L), (False, None))

  def test_swap(self):
    self.assertEqual(is_deterministic(SWAP), (True, [1, 0]))

  def test_negative_tolerance(self):
    with self.assertRaises(ContractViolation):
      is_deterministic(L, tol=-1.0)


class TestHelpers(unittest.TestCase):
  def test_lift_observable(self):
    lifted = lift_observable(Observable(TWO, np.array([2.0, 5.0])), 3)
    np.testing.assert_array_equal(lifted, [[2.0, 2.0, 2.0], [5.0, 5.0, 5.0]])

  def test_stationary_distribution_of_L(self):
    np.testing.assert_allclose(stationary_distribution(L).weights, [0.75, 0.25], atol=1e-12)

  def test_stationary_distribution_by_iteration(self):
    slow = MarkovKernel(TWO, np.array([[0.9, 0.1], [0.3, 0.7]]))
    np.testing.assert_allclose(stationary_distribution(slow).weights, [0.75, 0.25], atol=1e-12)
    np.testing.assert_allclose(stationary_distribution(SWAP).weights, [0.5, 0.5], atol=1e-12)
    cycle = from_point_map(StateSpace.of_size(3), [1, 2, 0])
    pi = stationary_distribution(cycle)
    np.testing.assert_allclose(apply_to_measure(cycle, pi).weights, pi.weights, atol=1e-12)

  def test_random_deterministic_kernel(self):
    k = random_deterministic_kernel(StateSpace.of_size(4), np.random.default_rng(3))
    self.assertTrue(is_deterministic(k)[0])


@settings(max_examples=100, deadline=None)
@given(kernels())
def test_constant_observable_is_fixed(k):
  np.testing.assert_allclose(apply_to_observable(k, Observable.constant(k.space)).values, 1.0, atol=1e-9)


@settings(max_examples=100, deadline=None)
@given(kernels(), st.integers(min_value=0, max_value=2**32 - 1))
def test_duality(k, seed):
  rng = np.random.default_rng(seed)
  p = FiniteMeasure(k.space, rng.dirichlet(np.ones(k.size)))
  f = Observable(k.space, rng.normal(size=k.size))
  left = apply_to_measure(k, p).weights @ f.values
  right = p.weights @ apply_to_observable(k, f).values
  assert abs(left - right) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(kernels(), st.integers(min_value=0, max_value=2**32 - 1))
def test_positivity(k, seed):
  f = Observable(k.space, np.abs(np.random.default_rng(seed).normal(size=k.size)))
  assert np.all(apply_to_observable(k, f).values >= 0)


@settings(max_examples=50, deadline=None)
@given(kernels(max_states=4), st.integers(min_value=0, max_value=4), st.integers(min_value=0, max_value=4))
def test_power_is_a_semigroup(k, a, b):
  np.testing.assert_allclose(power(k, a + b).rows, compose(power(k, a), power(k, b)).rows, atol=1e-12, rtol=0)


@pytest.mark.parametrize("n", [1, 2, 5])
def test_compose_preserves_stochasticity(n):
  rng = np.random.default_rng(n)
  space = StateSpace.of_size(n)
  k = compose(random_kernel(space, rng), random_kernel(space, rng))
  np.testing.assert_allclose(k.rows.sum(axis=1), 1.0, atol=1e-12)


if __name__ == "__main__":
  unittest.main()
