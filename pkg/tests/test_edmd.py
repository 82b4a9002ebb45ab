import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.linalg import expm

import kooplift as kl


def zero_field(d=2):
    return kl.DynamicalSystem(f"zero{d}d", d, lambda s: np.zeros_like(np.asarray(s, float)),
                              kl.Box([-1.0] * d, [1.0] * d))


def gram_matrices(snapshots, dictionary):
    psi_x = dictionary.evaluate_batch(snapshots.x_points).T
    psi_y = dictionary.evaluate_batch(snapshots.y_points).T
    m = snapshots.m
    return psi_x @ psi_x.T / m, psi_y @ psi_x.T / m


class TestSampleUniform:
    def test_containment(self):
        box = kl.Box([0.0, 0.0], [1.0, 1.0])
        pts = kl.sample_uniform(box, 4, seed=7)
        assert pts.shape == (4, 2)
        assert box.contains_mask(pts).all()

    def test_determinism(self):
        box = kl.Box([0.0, 0.0], [1.0, 1.0])
        assert np.array_equal(kl.sample_uniform(box, 100, seed=7),
                              kl.sample_uniform(box, 100, seed=7))

    def test_sample_means(self):
        # componentwise means within 4 standard errors of the box center
        box = kl.Box([-2.0, -2.0], [2.0, 2.0])
        pts = kl.sample_uniform(box, 10_000, seed=3)
        stderr = (4 / np.sqrt(12)) / np.sqrt(10_000)
        assert np.all(np.abs(pts.mean(axis=0)) <= 4 * stderr)


class TestBuildSnapshots:
    def test_zero_field_identity(self, rng):
        system = zero_field()
        pts = rng.uniform(-1, 1, (50, 2))
        snaps = kl.build_snapshots(system, pts, 0.1)
        assert_allclose(snaps.y_points, snaps.x_points, atol=1e-12)

    def test_equilibrium_point(self):
        duf = kl.get_system("duffing")
        snaps = kl.build_snapshots(duf, [[1.0, 0.0]], 0.01)
        assert_allclose(snaps.y_points[0], [1.0, 0.0], atol=1e-12)

    def test_pendulum_second_order_taylor(self):
        # x(dt) ~ x + dt f + dt^2/2 Df f = (pi/2 - 5e-5, -0.01) at this point
        pend = kl.get_system("pendulum")
        snaps = kl.build_snapshots(pend, [[np.pi / 2, 0.0]], 0.01, tol=1e-12)
        assert_allclose(snaps.y_points[0], [np.pi / 2 - 5e-5, -0.01], atol=1e-7)

    def test_drop_fraction_warns_and_strict_raises(self):
        # exponential growth pushes ~13% of these points out of the inflated box
        ex1 = kl.get_system("example1")
        pts = kl.sample_uniform(ex1.domain, 400, seed=0)
        with pytest.warns(UserWarning, match="left the inflated domain"):
            snaps = kl.build_snapshots(ex1, pts, 1.0)
        assert snaps.m < 400
        with pytest.raises(kl.FitError):
            kl.build_snapshots(ex1, pts, 1.0, strict=True)

    def test_rejects_nonpositive_dt(self):
        with pytest.raises(ValueError):
            kl.build_snapshots(zero_field(), [[0.0, 0.0]], 0.0)


class TestFit:
    def test_zero_field_gives_identity(self, rng):
        system = zero_field()
        dictionary = kl.monomial_dictionary(3, 2)
        pts = rng.uniform(-1, 1, (200, 2))
        snaps = kl.build_snapshots(system, pts, 0.1)
        model = kl.fit(snaps, dictionary)
        assert np.linalg.norm(model.matrix - np.eye(dictionary.size)) <= 1e-10
        assert model.residual_rms <= 1e-10

    def test_invariant_dictionary_matches_exponential(self, invariant_setup):
        # the lifted dynamics of this system are exactly linear on the span
        # of (x, v, x^2), generated by [[1,0,0],[0,l,-l],[0,0,2]]
        _, _, _, model = invariant_setup
        gen = np.array([[1.0, 0, 0], [0, 1.0, -1.0], [0, 0, 2.0]])
        err = np.linalg.norm(model.matrix - expm(0.1 * gen))
        assert err <= 1e-6

    def test_normal_equation_stationarity(self, pendulum_v3_model, pendulum_snapshots, v3):
        gram, cross = gram_matrices(pendulum_snapshots, v3)
        resid = pendulum_v3_model.matrix @ gram - cross
        scale = np.linalg.norm(pendulum_v3_model.matrix) * np.linalg.norm(gram)
        assert np.linalg.norm(resid) <= 1e-8 * scale

    def test_weighted_optimality_residual(self, pendulum_v3_model, pendulum_snapshots, v3, rng):
        gram, cross = gram_matrices(pendulum_snapshots, v3)
        resid = pendulum_v3_model.matrix @ gram - cross
        for _ in range(20):
            a = rng.normal(size=(v3.size, v3.size))
            w = a.T @ a
            bound = 1e-8 * np.linalg.norm(w) * np.linalg.norm(gram)
            assert np.linalg.norm(w @ resid) <= bound

    def test_weighted_cost_first_order_optimality(self, pendulum_v3_model,
                                                  pendulum_snapshots, v3, rng):
        # the unweighted minimizer also minimizes every W-weighted empirical
        # cost: perturbing K in any direction cannot decrease it
        psi_x = v3.evaluate_batch(pendulum_snapshots.x_points).T
        psi_y = v3.evaluate_batch(pendulum_snapshots.y_points).T
        s_xx = psi_x @ psi_x.T
        s_yy = psi_y @ psi_y.T
        s_yx = psi_y @ psi_x.T
        k0 = pendulum_v3_model.matrix

        def cost(k, w):
            return float(np.trace(w @ (s_yy - k @ s_yx.T - s_yx @ k.T + k @ s_xx @ k.T)))

        eps = 1e-3
        for _ in range(20):
            a = rng.normal(size=(v3.size, v3.size))
            w = a.T @ a
            w /= np.linalg.norm(w)
            base = cost(k0, w)
            for _ in range(50):
                delta = rng.normal(size=k0.shape)
                delta /= np.linalg.norm(delta)
                assert cost(k0 + eps * delta, w) >= base - 1e-9 * abs(base)

    def test_determinism_bit_identical(self, pendulum, v3):
        pts = kl.sample_uniform(pendulum.domain, 500, seed=5)
        a = kl.fit(kl.build_snapshots(pendulum, pts, 0.01), v3)
        b = kl.fit(kl.build_snapshots(pendulum, pts, 0.01), v3)
        assert np.array_equal(a.matrix, b.matrix)

    def test_m_below_n_warns(self, pendulum, v3):
        pts = kl.sample_uniform(pendulum.domain, 6, seed=5)
        snaps = kl.build_snapshots(pendulum, pts, 0.01)
        with pytest.warns(UserWarning, match="rank deficient"):
            with pytest.raises(kl.FitError, match="singular"):
                kl.fit(snaps, v3)

    def test_singular_gram_with_ridge_recovers(self, pendulum, v3):
        pts = kl.sample_uniform(pendulum.domain, 6, seed=5)
        snaps = kl.build_snapshots(pendulum, pts, 0.01)
        with pytest.warns(UserWarning, match="rank deficient"):
            model = kl.fit(snaps, v3, ridge=1e-8)
        assert np.all(np.isfinite(model.matrix))

    def test_ridge_solves_regularized_problem(self, pendulum_snapshots, v3):
        ridge = 1e-6
        model = kl.fit(pendulum_snapshots, v3, ridge=ridge)
        gram, cross = gram_matrices(pendulum_snapshots, v3)
        reg = gram + ridge * np.eye(v3.size)
        resid = model.matrix @ reg - cross
        assert np.linalg.norm(resid) <= 1e-8 * np.linalg.norm(model.matrix) * np.linalg.norm(reg)

    def test_condition_number_at_least_one(self, pendulum_v3_model):
        assert pendulum_v3_model.condition_number >= 1.0

    def test_residual_rms_nonnegative_and_small_for_small_dt(self, pendulum_v3_model):
        assert 0 <= pendulum_v3_model.residual_rms < 1.0
