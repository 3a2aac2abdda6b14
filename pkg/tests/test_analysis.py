"""Collision probability, sign-agreement law, and norm-saturation checks.

Closed-form anchors are frozen from independent evaluation of
``((2/pi) arctan sqrt(((K-1)P + sigma^2)/P))^(2 N_r)``; the K=1, P=1,
sigma^2=1, N_r=1 case is exactly 1/4 because arctan(1) = pi/4.
"""

import math

import numpy as np
import pytest

from onebit_mimo.analysis import (
    COLLISION_BLOCK,
    CollisionSpec,
    collision_probability_closed_form,
    collision_probability_monte_carlo,
    lemma1_norm_check,
    sign_agreement_monte_carlo,
    sign_agreement_probability,
)
from onebit_mimo.numerics import RngStream

ANCHORS = {
    (1, 1, 1.0, 1.0): 0.25,
    (2, 2, 1.0, 1.0): 0.1368074733223845,
    (2, 4, 1.0, 1.0): 0.018716284756854946,
    (4, 2, 1.0, 0.5): 0.2233966272657934,
}


def _spec(key):
    k, n_r, p, sigma2 = key
    return CollisionSpec(k=k, n_r=n_r, p=p, sigma2=sigma2)


class TestClosedForm:
    def test_anchors(self):
        for key, want in ANCHORS.items():
            got = collision_probability_closed_form(_spec(key))
            assert got == pytest.approx(want, rel=1e-14), key

    def test_single_user_exact_quarter(self):
        assert collision_probability_closed_form(
            _spec((1, 1, 1.0, 1.0))
        ) == 0.25

    def test_noise_free_single_user_vanishes(self):
        p = collision_probability_closed_form(
            CollisionSpec(k=1, n_r=1, p=1.0, sigma2=1e-12)
        )
        assert p < 1e-4

    def test_monotone_in_antennas(self):
        vals = [
            collision_probability_closed_form(
                CollisionSpec(k=2, n_r=n, p=1.0, sigma2=1.0)
            )
            for n in (1, 2, 4, 8, 16)
        ]
        assert all(a > b for a, b in zip(vals, vals[1:]))
        assert vals[-1] < 1e-3

    def test_monotone_in_interference_and_noise(self):
        base = collision_probability_closed_form(_spec((2, 2, 1.0, 1.0)))
        more_users = collision_probability_closed_form(
            CollisionSpec(k=4, n_r=2, p=1.0, sigma2=1.0)
        )
        more_noise = collision_probability_closed_form(
            CollisionSpec(k=2, n_r=2, p=1.0, sigma2=4.0)
        )
        assert more_users > base
        assert more_noise > base

    def test_validation(self):
        with pytest.raises(ValueError):
            CollisionSpec(k=0, n_r=1, p=1.0, sigma2=1.0)
        with pytest.raises(ValueError):
            CollisionSpec(k=1, n_r=0, p=1.0, sigma2=1.0)
        with pytest.raises(ValueError):
            CollisionSpec(k=1, n_r=1, p=0.0, sigma2=1.0)
        with pytest.raises(ValueError):
            CollisionSpec(k=1, n_r=1, p=1.0, sigma2=-1.0)


class TestCollisionMonteCarlo:
    def test_tracks_closed_form(self):
        trials = 200_000
        for key in ANCHORS:
            want = ANCHORS[key]
            got, se = collision_probability_monte_carlo(
                _spec(key), trials, RngStream(271, 0)
            )
            assert abs(got - want) < 5.0 * se, key
            assert se == pytest.approx(
                math.sqrt(got * (1.0 - got) / trials)
            )

    def test_deterministic(self):
        spec = _spec((2, 2, 1.0, 1.0))
        a = collision_probability_monte_carlo(spec, 30_000, RngStream(272, 5))
        b = collision_probability_monte_carlo(spec, 30_000, RngStream(272, 5))
        assert a == b

    def test_multiple_blocks_exercised(self):
        # crossing a block boundary must not break the estimate
        spec = _spec((1, 1, 1.0, 1.0))
        trials = COLLISION_BLOCK + 4096
        got, se = collision_probability_monte_carlo(
            spec, trials, RngStream(273, 0)
        )
        assert abs(got - 0.25) < 5.0 * se

    def test_validation(self):
        with pytest.raises(ValueError):
            collision_probability_monte_carlo(
                _spec((1, 1, 1.0, 1.0)), 0, RngStream(274, 0)
            )


class TestSignAgreement:
    def test_exact_anchors(self):
        assert sign_agreement_probability(1.0, 1.0) == pytest.approx(0.5)
        assert sign_agreement_probability(
            math.sqrt(3.0), 1.0
        ) == pytest.approx(2.0 / 3.0)
        assert sign_agreement_probability(
            1.0, math.sqrt(3.0)
        ) == pytest.approx(1.0 / 3.0)

    def test_complementary(self):
        # swapping the two scales mirrors the probability around 1/2
        for r in (0.3, 1.7, 5.0):
            a = sign_agreement_probability(r, 1.0)
            b = sign_agreement_probability(1.0, r)
            assert a + b == pytest.approx(1.0, abs=1e-12)

    def test_monte_carlo_tracks_law(self):
        for su, sv in [(1.0, 1.0), (math.sqrt(3.0), 1.0), (2.0, 1.0)]:
            want = sign_agreement_probability(su, sv)
            got, se = sign_agreement_monte_carlo(
                su, sv, 200_000, RngStream(275, 0)
            )
            assert abs(got - want) < 5.0 * se

    def test_validation(self):
        with pytest.raises(ValueError):
            sign_agreement_probability(0.0, 1.0)
        with pytest.raises(ValueError):
            sign_agreement_monte_carlo(1.0, -1.0, 10, RngStream(276, 0))
        with pytest.raises(ValueError):
            sign_agreement_monte_carlo(1.0, 1.0, 0, RngStream(276, 0))


class TestNormSaturation:
    def test_high_snr_saturates_ball(self):
        out = lemma1_norm_check(2, 16, [1e4], 30, RngStream(277, 0))
        assert out.shape == (1,)
        assert out[0] >= 0.99

    def test_interior_at_moderate_snr(self):
        """The ball constraint is genuinely inactive for a visible share
        of moderate-SNR instances (the relaxed optimum can sit strictly
        inside), so the saturated fraction is below one there and rises
        to one once the noise stops flipping signs."""
        out = lemma1_norm_check(
            2, 8, [1.0, 1e4], 100, RngStream(278, 0)
        )
        assert out[0] == pytest.approx(0.88, abs=1e-12)
        assert out[1] == 1.0
        assert np.all(out >= 0.0)
        assert np.all(out <= 1.0)

    def test_validation(self):
        with pytest.raises(ValueError):
            lemma1_norm_check(0, 4, [1.0], 10, RngStream(279, 0))
        with pytest.raises(ValueError):
            lemma1_norm_check(2, 4, [1.0], 0, RngStream(279, 0))
        with pytest.raises(ValueError):
            lemma1_norm_check(2, 4, [-1.0], 10, RngStream(279, 0))
