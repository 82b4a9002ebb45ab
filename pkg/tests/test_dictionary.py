import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

import kooplift as kl
from kooplift.dictionary import exclusions_from_labels, total_count, variable_names


def test_v2_ordering_and_count():
    d = kl.monomial_dictionary(2, 2)
    assert d.size == 6
    assert d.labels == ("1", "x", "v", "x^2", "x*v", "v^2")
    assert d.coordinate_indices == (1, 2)


def test_degree_one_evaluates_to_coordinates():
    d = kl.monomial_dictionary(1, 2)
    assert_allclose(d.evaluate([2.0, 3.0]), [1.0, 2.0, 3.0])


def test_lorenz_dictionary_excludes_x():
    d = kl.monomial_dictionary(4, 3, exclude=[(1, 0, 0)])
    assert d.size == 35 - 1
    assert d.coordinate_indices is None
    assert "x" not in d.labels
    j = d.labels.index("x*z")
    assert d.evaluate([2.0, 1.0, 10.0])[j] == pytest.approx(20.0)


def test_count_matches_binomial():
    for n, d in [(1, 1), (2, 2), (3, 2), (4, 3), (5, 2), (3, 4)]:
        assert kl.monomial_dictionary(n, d).size == total_count(n, d) == math.comb(n + d, d)


def test_excluding_missing_monomial_raises():
    with pytest.raises(ValueError, match="cannot exclude"):
        kl.monomial_dictionary(2, 2, exclude=[(3, 0)])


def test_exclusions_from_labels():
    assert exclusions_from_labels(2, 2, ["1", "x*v", "v^2"]) == ((0, 0), (1, 1), (0, 2))
    with pytest.raises(ValueError, match="unknown monomial label"):
        exclusions_from_labels(2, 2, ["x^3"])


def test_coordinate_indices_dropped_when_excluded():
    d = kl.monomial_dictionary(2, 2, exclude=[(1, 0)])
    assert d.coordinate_indices is None


def test_evaluate_at_origin():
    d = kl.monomial_dictionary(2, 2)
    assert_allclose(d.evaluate([0.0, 0.0]), [1, 0, 0, 0, 0, 0])


def test_evaluate_batch_matches_single(rng):
    d = kl.monomial_dictionary(4, 3, exclude=[(1, 0, 0)])
    pts = rng.uniform(-2, 2, size=(40, 3))
    batch = d.evaluate_batch(pts)
    for j in range(40):
        assert_allclose(batch[j], d.evaluate(pts[j]), rtol=0, atol=0)


def test_observables_property_matches_evaluate(rng):
    d = kl.monomial_dictionary(3, 2)
    x = rng.uniform(-1, 1, 2)
    vals = np.array([obs(x) for obs in d.observables])
    assert_allclose(vals, d.evaluate(x))


def test_jacobian_hand_values():
    d = kl.monomial_dictionary(2, 2)
    jac = d.jacobian([1.0, 2.0])
    assert_allclose(jac[d.labels.index("x^2")], [2.0, 0.0])
    assert_allclose(jac[d.labels.index("x*v")], [2.0, 1.0])
    d1 = kl.monomial_dictionary(1, 2)
    assert_allclose(d1.jacobian([0.3, -0.7]), [[0, 0], [1, 0], [0, 1]])


@pytest.mark.parametrize("n,dim,lo,hi", [(2, 2, -np.pi, np.pi), (3, 2, -2, 2),
                                         (4, 3, -5, 5)])
def test_jacobian_matches_finite_differences(n, dim, lo, hi, rng):
    d = kl.monomial_dictionary(n, dim)
    h = 1e-6
    for _ in range(100):
        x = rng.uniform(lo, hi, dim)
        jac = d.jacobian(x)
        fd = np.empty_like(jac)
        for k in range(dim):
            e = np.zeros(dim)
            e[k] = h
            fd[:, k] = (d.evaluate(x + e) - d.evaluate(x - e)) / (2 * h)
        assert np.linalg.norm(fd - jac) <= 1e-6 * max(1.0, np.linalg.norm(jac))


def test_first_order_consistency(rng):
    # evaluate(x + delta) - evaluate(x) tracks jacobian(x) @ delta
    d = kl.monomial_dictionary(3, 2)
    for _ in range(50):
        x = rng.uniform(-1, 1, 2)
        delta = rng.normal(size=2)
        delta *= 1e-5 / np.linalg.norm(delta)
        lhs = d.evaluate(x + delta) - d.evaluate(x) - d.jacobian(x) @ delta
        assert np.linalg.norm(lhs) <= 1e-8 * d.size


def test_coordinate_readout_is_exact(rng):
    d = kl.monomial_dictionary(3, 2)
    idx = np.asarray(d.coordinate_indices)
    for _ in range(20):
        x = rng.uniform(-2, 2, 2)
        assert np.array_equal(d.evaluate(x)[idx], x)


def test_variable_names():
    assert variable_names(2) == ("x", "v")
    assert variable_names(3) == ("x", "y", "z")
    assert variable_names(4) == ("x1", "x2", "x3", "x4")


def test_grlex_order_d3():
    d = kl.monomial_dictionary(2, 3)
    assert d.labels == ("1", "x", "y", "z", "x^2", "x*y", "x*z", "y^2", "y*z", "z^2")
