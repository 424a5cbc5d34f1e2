import numpy as np
import pytest

from minimaxclf.losses import (
    VARIANTS,
    batch_loss,
    batch_loss_gradient,
    deferred_reweighting_weights,
    gml_batch_loss,
    gml_batch_loss_gradient,
    spec_from_variant,
    tla_offsets,
)
from minimaxclf.priors import Prior


def _prior(*values):
    return Prior(np.array(values, dtype=np.float64))


def _fd_gradient(fun, logits, h=1e-6):
    grad = np.zeros_like(logits)
    for idx in np.ndindex(*logits.shape):
        bump = logits.copy()
        bump[idx] += h
        up = fun(bump)
        bump[idx] -= 2 * h
        down = fun(bump)
        grad[idx] = (up - down) / (2 * h)
    return grad


def _make_spec(variant, k=4, seed=0):
    rng = np.random.default_rng(seed)
    counts = rng.integers(5, 200, size=k)
    pi_train = Prior.from_counts(counts)
    pi_target = Prior(rng.dirichlet(np.ones(k)))
    return spec_from_variant(variant, pi_train, pi_target, counts=counts, tau=1.3, gamma=0.2)


class TestTlaOffsets:
    def test_equal_priors_zero(self):
        pi = _prior(0.3, 0.7)
        assert np.array_equal(tla_offsets(pi, pi, 2.0), np.zeros(2))

    def test_frozen_values(self):
        # ln(0.9/0.5), ln(0.1/0.5) at 40-digit precision
        ell = tla_offsets(_prior(0.9, 0.1), _prior(0.5, 0.5), 1.0)
        np.testing.assert_allclose(ell, [0.587786664902, -1.609437912434], atol=1e-10)

    def test_linear_in_tau(self):
        a = tla_offsets(_prior(0.9, 0.1), _prior(0.2, 0.8), 1.0)
        b = tla_offsets(_prior(0.9, 0.1), _prior(0.2, 0.8), 2.0)
        np.testing.assert_allclose(b, 2.0 * a)

    def test_zero_target_coordinate_rejected(self):
        with pytest.raises(ValueError, match="target prior"):
            tla_offsets(_prior(0.9, 0.1), _prior(1.0, 0.0), 1.0)

    def test_zero_train_coordinate_rejected(self):
        with pytest.raises(ValueError, match="training prior"):
            tla_offsets(_prior(1.0, 0.0), _prior(0.5, 0.5), 1.0)


class TestSpecFromVariant:
    def test_tla_at_train_prior_is_ce(self):
        pi = _prior(0.6, 0.3, 0.1)
        tla = spec_from_variant("TLA", pi, pi, tau=2.25)
        ce = spec_from_variant("CE", pi)
        assert np.array_equal(tla.weights, ce.weights)
        assert np.array_equal(tla.delta, ce.delta)
        assert np.array_equal(tla.ell, ce.ell)

    def test_twce_at_train_prior_is_unit_weights(self):
        pi = _prior(0.6, 0.3, 0.1)
        twce = spec_from_variant("TWCE", pi, pi)
        np.testing.assert_array_equal(twce.weights, np.ones(3))

    def test_vs_delta(self):
        counts = np.array([5000, 500, 50])
        spec = spec_from_variant("VS", Prior.from_counts(counts), counts=counts, gamma=0.15)
        np.testing.assert_allclose(spec.delta, (counts / 5000) ** 0.15)
        # 0.01^0.15 frozen from high-precision evaluation
        np.testing.assert_allclose(spec.delta[2], 0.501187233627, atol=1e-10)

    def test_ldam_margin_normalization(self):
        counts = np.array([10000, 100, 10])
        spec = spec_from_variant("LDAM", Prior.from_counts(counts), counts=counts)
        assert np.max(np.abs(spec.true_class_offsets)) == pytest.approx(0.5)
        assert np.all(spec.true_class_offsets < 0)

    def test_wce_weights(self):
        counts = np.array([10, 40])
        spec = spec_from_variant("WCE", Prior.from_counts(counts), counts=counts)
        np.testing.assert_allclose(spec.weights, [0.1, 0.025])

    def test_unknown_variant(self):
        with pytest.raises(ValueError, match="unknown loss variant"):
            spec_from_variant("XENT", _prior(0.5, 0.5))

    def test_bad_tau(self):
        with pytest.raises(ValueError, match="tau"):
            spec_from_variant("LA", _prior(0.5, 0.5), tau=-1.0)

    def test_missing_counts(self):
        with pytest.raises(ValueError, match="counts"):
            spec_from_variant("WCE", _prior(0.5, 0.5))

    def test_drw_weights(self):
        w = deferred_reweighting_weights([1, 10**6], beta=0.9999)
        assert w[0] == pytest.approx(1.0)
        assert w[1] == pytest.approx(1e-4, rel=1e-3)


class TestBatchLoss:
    def test_ce_uniform_logits(self):
        spec = spec_from_variant("CE", _prior(0.5, 0.5))
        loss = batch_loss(spec, np.array([[0.0, 0.0]]), np.array([0]))
        assert loss == pytest.approx(np.log(2.0), abs=1e-12)

    def test_shift_invariance_unit_delta(self):
        rng = np.random.default_rng(0)
        logits = rng.normal(size=(8, 3))
        labels = rng.integers(0, 3, size=8)
        for variant in ("CE", "WCE", "Focal", "FocalAlpha", "LDAM", "LA", "TWCE", "TLA"):
            spec = _make_spec(variant, k=3)
            a = batch_loss(spec, logits, labels)
            b = batch_loss(spec, logits + 5.0, labels)
            assert a == pytest.approx(b, rel=1e-12), variant

    def test_tla_equals_ce_on_shifted_logits(self):
        pi_train = _prior(0.7, 0.2, 0.1)
        pi_target = _prior(0.2, 0.5, 0.3)
        tla = spec_from_variant("TLA", pi_train, pi_target, tau=1.0)
        ce = spec_from_variant("CE", pi_train)
        rng = np.random.default_rng(1)
        logits = rng.normal(size=(16, 3))
        labels = rng.integers(0, 3, size=16)
        a = batch_loss(tla, logits, labels)
        b = batch_loss(ce, logits + tla.ell, labels)
        assert a == pytest.approx(b, rel=1e-12)

    def test_nonnegative_all_variants(self):
        rng = np.random.default_rng(2)
        logits = rng.normal(scale=3.0, size=(32, 4))
        labels = rng.integers(0, 4, size=32)
        for variant in VARIANTS:
            spec = _make_spec(variant)
            assert batch_loss(spec, logits, labels) >= 0.0, variant

    def test_zero_only_in_saturated_limit(self):
        spec = spec_from_variant("CE", _prior(0.5, 0.5))
        big = np.array([[50.0, -50.0]])
        assert batch_loss(spec, big, np.array([0])) == pytest.approx(0.0, abs=1e-12)
        assert batch_loss(spec, np.array([[1.0, -1.0]]), np.array([0])) > 0.0

    def test_stability_with_large_offsets(self):
        # tau ln(rho) offsets reach magnitude ~10; must not overflow
        pi_train = _prior(0.989, 0.01, 0.001)
        pi_target = _prior(0.001, 0.01, 0.989)
        spec = spec_from_variant("TLA", pi_train, pi_target, tau=2.25)
        loss = batch_loss(spec, np.full((4, 3), 100.0), np.array([0, 1, 2, 0]))
        assert np.isfinite(loss)

    def test_rejects_non_finite(self):
        spec = spec_from_variant("CE", _prior(0.5, 0.5))
        with pytest.raises(ValueError, match="non-finite"):
            batch_loss(spec, np.array([[np.inf, 0.0]]), np.array([0]))

    def test_rejects_empty_batch(self):
        spec = spec_from_variant("CE", _prior(0.5, 0.5))
        with pytest.raises(ValueError, match="empty"):
            batch_loss(spec, np.empty((0, 2)), np.empty(0, dtype=int))


class TestGradients:
    @pytest.mark.parametrize("variant", VARIANTS)
    def test_matches_finite_differences(self, variant):
        rng = np.random.default_rng(hash(variant) % 2**32)
        logits = rng.normal(scale=0.8, size=(6, 4))
        labels = rng.integers(0, 4, size=6)
        spec = _make_spec(variant)
        analytic = batch_loss_gradient(spec, logits, labels)
        numeric = _fd_gradient(lambda f: batch_loss(spec, f, labels), logits, h=1e-4)
        err = np.abs(analytic - numeric).max() / max(np.abs(numeric).max(), 1e-12)
        assert err < 1e-5, f"{variant}: rel err {err}"

    def test_hundred_random_draws(self):
        rng = np.random.default_rng(99)
        for _ in range(100):
            variant = VARIANTS[rng.integers(len(VARIANTS))]
            spec = _make_spec(variant, seed=int(rng.integers(2**31)))
            logits = rng.normal(size=(3, 4))
            labels = rng.integers(0, 4, size=3)
            analytic = batch_loss_gradient(spec, logits, labels)
            numeric = _fd_gradient(lambda f: batch_loss(spec, f, labels), logits, h=1e-4)
            err = np.abs(analytic - numeric).max() / max(np.abs(numeric).max(), 1e-12)
            assert err < 1e-5, variant

    def test_saturated_ce_gradient_vanishes(self):
        spec = spec_from_variant("CE", _prior(0.5, 0.5))
        g = batch_loss_gradient(spec, np.array([[60.0, -60.0]]), np.array([0]))
        np.testing.assert_allclose(g, 0.0, atol=1e-20)

    def test_row_sums_zero_for_equal_delta(self):
        rng = np.random.default_rng(5)
        logits = rng.normal(size=(10, 4))
        labels = rng.integers(0, 4, size=10)
        for variant in ("CE", "WCE", "LDAM", "LA", "TWCE", "TLA"):
            spec = _make_spec(variant)
            g = batch_loss_gradient(spec, logits, labels)
            np.testing.assert_allclose(g.sum(axis=1), 0.0, atol=1e-14)


class TestGml:
    def test_single_class_batch_zero_loss(self):
        logits = np.array([[1.7], [0.3]])
        loss = gml_batch_loss(logits, np.array([0, 0]), np.array([2]))
        assert loss == pytest.approx(0.0, abs=1e-12)

    def test_uniform_balanced_batch(self):
        k, per = 5, 3
        logits = np.zeros((k * per, k))
        labels = np.repeat(np.arange(k), per)
        loss = gml_batch_loss(logits, labels, np.full(k, per))
        assert loss == pytest.approx(np.log(k), rel=1e-12)

    def test_absent_class_skipped(self):
        logits = np.zeros((4, 3))
        labels = np.array([0, 0, 1, 1])
        counts = np.array([2, 2, 0])
        loss = gml_batch_loss(logits, labels, counts)
        assert np.isfinite(loss)

    def test_gradient_matches_fd(self):
        rng = np.random.default_rng(7)
        logits = rng.normal(size=(8, 3))
        labels = rng.integers(0, 3, size=8)
        counts = np.bincount(labels, minlength=3)
        analytic = gml_batch_loss_gradient(logits, labels, counts)
        numeric = _fd_gradient(lambda f: gml_batch_loss(f, labels, counts), logits, h=1e-5)
        err = np.abs(analytic - numeric).max() / np.abs(numeric).max()
        assert err < 1e-5

    def test_empty_batch(self):
        with pytest.raises(ValueError, match="empty"):
            gml_batch_loss(np.empty((0, 2)), np.empty(0, dtype=int), np.zeros(2))
