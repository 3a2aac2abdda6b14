"""Channel estimation: pilot construction, observation model, estimators."""

import math

import numpy as np
import pytest

from onebit_mimo import chanest, pga
from onebit_mimo.chanest import (
    ChannelEstimate,
    estimate_ml,
    estimate_zf,
    make_unitary_training,
    mse,
    nmse,
    observe_training,
    training_real_rows,
)
from onebit_mimo.detectors import NmlConfig, SingularChannelError
from onebit_mimo.numerics import RngStream, draw_std_complex_gaussian


def _block(seed=0, k=4, t=20):
    return make_unitary_training(k, t, RngStream(seed, 0))


def _channel(seed, k):
    g = draw_std_complex_gaussian(RngStream(seed, 77), k)
    return np.concatenate([g.real, g.imag])


class TestTraining:
    def test_rows_orthogonal_with_norm_t(self):
        for k, t in [(2, 5), (4, 20), (8, 40)]:
            block = make_unitary_training(k, t, RngStream(3, k))
            gram = block.x_train @ block.x_train.conj().T
            np.testing.assert_allclose(
                gram, t * np.eye(k), rtol=0.0, atol=1e-10
            )

    def test_requires_more_pilots_than_users(self):
        with pytest.raises(ValueError):
            make_unitary_training(4, 4, RngStream(4, 0))
        with pytest.raises(ValueError):
            make_unitary_training(4, 3, RngStream(4, 0))

    def test_deterministic_per_stream(self):
        a = make_unitary_training(4, 20, RngStream(5, 9))
        b = make_unitary_training(4, 20, RngStream(5, 9))
        np.testing.assert_array_equal(a.x_train, b.x_train)

    def test_length_carried(self):
        block = make_unitary_training(2, 8, RngStream(6, 0), length=100)
        assert block.length == 100
        assert block.T == 8


class TestRealRows:
    def test_reproduces_complex_training_map(self):
        """Row i of the real expansion against [Re g; Im g] equals the
        i-th entry of [Re(X^H g); Im(X^H g)]: the observation at pilot
        time i is the conjugate inner product of pilot column i with the
        channel."""
        block = _block(seed=7)
        rows = training_real_rows(block)
        assert rows.shape == (2 * block.T, 2 * 4)
        g = draw_std_complex_gaussian(RngStream(7, 1), 4)
        want = block.x_train.conj().T @ g
        got = rows @ np.concatenate([g.real, g.imag])
        np.testing.assert_allclose(got[: block.T], want.real, atol=1e-12)
        np.testing.assert_allclose(got[block.T:], want.imag, atol=1e-12)

    def test_block_layout(self):
        block = _block(seed=8, k=2, t=5)
        rows = training_real_rows(block)
        x = block.x_train
        np.testing.assert_array_equal(rows[:5, :2], x.real.T)
        np.testing.assert_array_equal(rows[:5, 2:], x.imag.T)
        np.testing.assert_array_equal(rows[5:, :2], -x.imag.T)
        np.testing.assert_array_equal(rows[5:, 2:], x.real.T)


class TestObservation:
    def test_noise_free_signs(self):
        block = _block(seed=9)
        g = _channel(9, 4)
        rows = training_real_rows(block)
        signs = observe_training(g, block, 100.0, noise=np.zeros(2 * block.T))
        np.testing.assert_array_equal(signs, np.where(rows @ g >= 0, 1.0, -1.0))

    def test_rng_reproducible(self):
        block = _block(seed=10)
        g = _channel(10, 4)
        a = observe_training(g, block, 10.0, rng=RngStream(11, 3))
        b = observe_training(g, block, 10.0, rng=RngStream(11, 3))
        np.testing.assert_array_equal(a, b)

    def test_validation(self):
        block = _block(seed=12)
        g = _channel(12, 4)
        with pytest.raises(ValueError):
            observe_training(g[:-1], block, 10.0, rng=RngStream(12, 0))
        with pytest.raises(ValueError):
            observe_training(g, block, 0.0, rng=RngStream(12, 0))
        with pytest.raises(ValueError):
            observe_training(g, block, 10.0)
        with pytest.raises(ValueError):
            observe_training(g, block, 10.0, noise=np.zeros(3))


class TestMlEstimator:
    def test_reuses_detection_engine(self, monkeypatch):
        """The estimator is the detector's gradient ascent applied to the
        sign-refined training rows with ball bound K; verified by
        intercepting the solver call."""
        block = _block(seed=13)
        g = _channel(13, 4)
        signs = observe_training(g, block, 10.0, rng=RngStream(13, 5))
        seen = {}
        real_solve = pga.solve

        def spy(rows, **kwargs):
            seen["rows"] = rows
            seen.update(kwargs)
            return real_solve(rows, **kwargs)

        monkeypatch.setattr(pga, "solve", spy)
        est = estimate_ml(block, signs, 10.0)
        expect = training_real_rows(block) * signs[:, None]
        np.testing.assert_array_equal(seen["rows"], expect)
        assert seen["norm_bound"] == 4.0
        assert seen["sqrt2rho"] == pytest.approx(math.sqrt(20.0))
        assert est.method == "ML"
        assert est.iterations == seen["max_iterations"] or est.iterations >= 0

    def test_estimate_not_renormalized(self):
        """Unlike symbol detection, the estimate keeps its converged
        norm; at high SNR with many pilots it sits near the ball edge
        but is not pushed onto it."""
        block = make_unitary_training(2, 40, RngStream(14, 0))
        g = _channel(14, 2)
        g *= math.sqrt(2.0) / np.linalg.norm(g) * 0.6  # well inside the ball
        signs = observe_training(g, block, 0.5, rng=RngStream(14, 1))
        est = estimate_ml(block, signs, 0.5)
        assert est.g_hat @ est.g_hat < 2.0 - 1e-6

    def test_unconstrained_overestimates_norm(self):
        block = make_unitary_training(4, 40, RngStream(15, 0))
        lifted = 0.0
        true = 0.0
        for d in range(20):
            g = _channel(150 + d, 4)
            signs = observe_training(g, block, 10.0, rng=RngStream(15, d))
            est = estimate_ml(block, signs, 10.0, norm_bound=1e6 * 4)
            lifted += np.linalg.norm(est.g_hat)
            true += np.linalg.norm(g)
        assert lifted / 20 > true / 20

    def test_sign_validation(self):
        block = _block(seed=16)
        with pytest.raises(ValueError):
            estimate_ml(block, np.zeros(2 * block.T), 10.0)
        with pytest.raises(ValueError):
            estimate_ml(block, np.ones(3), 10.0)
        with pytest.raises(ValueError):
            estimate_ml(block, np.ones(2 * block.T), 0.0)


class TestZfEstimator:
    def test_norm_exactly_k(self):
        block = _block(seed=17)
        g = _channel(17, 4)
        signs = observe_training(g, block, 10.0, rng=RngStream(17, 2))
        est = estimate_zf(block, signs)
        assert est.method == "ZF"
        assert est.g_hat @ est.g_hat == pytest.approx(4.0, rel=1e-12)

    def test_matches_manual_least_squares(self):
        block = _block(seed=18, k=3, t=9)
        g = _channel(18, 3)
        signs = observe_training(g, block, 5.0, rng=RngStream(18, 2))
        rows = training_real_rows(block)
        sol = np.linalg.pinv(rows) @ signs
        want = math.sqrt(3) * sol / np.linalg.norm(sol)
        np.testing.assert_allclose(
            estimate_zf(block, signs).g_hat, want, rtol=1e-10, atol=1e-12
        )

    def test_rank_deficient_rejected(self):
        block = _block(seed=19, k=2, t=5)
        broken = chanest.TrainingBlock(
            x_train=np.zeros_like(block.x_train), T=block.T
        )
        with pytest.raises(SingularChannelError):
            estimate_zf(broken, np.ones(2 * block.T))


class TestErrorMetrics:
    def test_mse_formula(self):
        g = np.array([1.0, 2.0, 0.0, -1.0])
        est = ChannelEstimate(g_hat=np.array([0.0, 2.0, 1.0, -1.0]),
                              method="ZF")
        assert mse(g, est) == pytest.approx((1.0 + 1.0) / 2)

    def test_nmse_scale_invariant(self):
        g = _channel(20, 4)
        est = ChannelEstimate(g_hat=2.5 * g, method="ML")
        assert nmse(g, est) == pytest.approx(0.0, abs=1e-15)
        est2 = ChannelEstimate(g_hat=_channel(21, 4), method="ML")
        a = nmse(g, est2)
        b = nmse(3.0 * g, ChannelEstimate(g_hat=0.2 * est2.g_hat,
                                          method="ML"))
        assert a == pytest.approx(b, rel=1e-12)
        assert 0.0 <= a <= 4.0 / 4  # at most ||u - v||^2 = 4 over K

    def test_nmse_rejects_zero(self):
        g = _channel(22, 4)
        with pytest.raises(ValueError):
            nmse(np.zeros(8), ChannelEstimate(g_hat=g, method="ML"))
        with pytest.raises(ValueError):
            nmse(g, ChannelEstimate(g_hat=np.zeros(8), method="ML"))

    def test_ml_beats_zf_in_mse(self):
        """Small smoke version of the estimator comparison: with norm
        information available to ML but structurally absent from ZF, ML
        has lower average MSE."""
        block = make_unitary_training(4, 24, RngStream(23, 0))
        tot_ml = tot_zf = 0.0
        for d in range(40):
            g = _channel(230 + d, 4)
            signs = observe_training(g, block, 10.0, rng=RngStream(23, d))
            tot_ml += mse(g, estimate_ml(block, signs, 10.0))
            tot_zf += mse(g, estimate_zf(block, signs))
        assert tot_ml < tot_zf
