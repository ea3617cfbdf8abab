import time

import numpy as np
import pytest

from comptrack.kalman import KalmanError, KalmanState, MotionModel


def oracle_matrices(h, wp=1 / 20, wv=1 / 160):
    F = np.array([
        [1, 0, 0, 0, 1, 0, 0, 0],
        [0, 1, 0, 0, 0, 1, 0, 0],
        [0, 0, 1, 0, 0, 0, 1, 0],
        [0, 0, 0, 1, 0, 0, 0, 1],
        [0, 0, 0, 0, 1, 0, 0, 0],
        [0, 0, 0, 0, 0, 1, 0, 0],
        [0, 0, 0, 0, 0, 0, 1, 0],
        [0, 0, 0, 0, 0, 0, 0, 1],
    ], dtype=float)
    H = np.hstack([np.eye(4), np.zeros((4, 4))])
    Q = np.diag([(wp * h) ** 2, (wp * h) ** 2, 1e-4, (wp * h) ** 2,
                 (wv * h) ** 2, (wv * h) ** 2, 1e-10, (wv * h) ** 2])
    R = np.diag([(wp * h) ** 2, (wp * h) ** 2, 1e-2, (wp * h) ** 2])
    return F, H, Q, R


def oracle_predict(mean, P):
    F, _, Q, _ = oracle_matrices(mean[3])
    return F.dot(mean), F.dot(P).dot(F.T) + Q


def oracle_update(mean, P, z):
    _, H, _, R = oracle_matrices(mean[3])
    S = H.dot(P).dot(H.T) + R
    K = P.dot(H.T).dot(np.linalg.inv(S))
    return mean + K.dot(z - H.dot(mean)), (np.eye(8) - K.dot(H)).dot(P)


def test_initiate():
    m = MotionModel()
    s = m.initiate([5, 5, 1, 10])
    np.testing.assert_array_equal(s.mean[:4], [5, 5, 1, 10])
    np.testing.assert_array_equal(s.mean[4:], 0)
    assert np.count_nonzero(s.cova - np.diag(np.diag(s.cova))) == 0
    s2 = m.initiate([5, 5, 1, 10])
    np.testing.assert_array_equal(s.mean, s2.mean)
    np.testing.assert_array_equal(s.cova, s2.cova)


@pytest.mark.parametrize("z", [[0, 0, 0, 10], [0, 0, 1, -1], [0, 0, 1], [np.nan, 0, 1, 1]])
def test_initiate_rejects_invalid(z):
    with pytest.raises(ValueError):
        MotionModel().initiate(z)


def test_predict_moves_by_velocity():
    m = MotionModel()
    s = KalmanState(np.array([10, 0, 1, 10, 2, 0, 0, 0], float), np.eye(8))
    assert m.predict(s).mean[0] == 12


def test_predict_zero_velocity_grows_uncertainty():
    m = MotionModel()
    s = m.initiate([50, 60, 0.5, 100])
    p = m.predict(s)
    np.testing.assert_array_equal(p.mean[:4], s.mean[:4])
    assert np.trace(p.cova) > np.trace(s.cova)


def test_update_zero_innovation_keeps_mean():
    m = MotionModel()
    p = m.predict(m.initiate([50, 60, 0.5, 100]))
    u = m.update(p, p.mean[:4])
    np.testing.assert_allclose(u.mean, p.mean, atol=1e-12)
    assert np.all(np.diag(u.cova)[:4] <= np.diag(p.cova)[:4])


def test_update_huge_measurement_noise_keeps_prior():
    m = MotionModel(measurement_scale=1e9)
    p = m.predict(m.initiate([50, 60, 0.5, 100]))
    u = m.update(p, [80, 20, 0.6, 120])
    np.testing.assert_allclose(u.mean, p.mean, atol=1e-3)
    np.testing.assert_allclose(u.cova, p.cova, atol=1e-3)


def test_singular_innovation_reported():
    m = MotionModel(R=np.zeros((4, 4)))
    s = KalmanState(np.array([0, 0, 1, 10, 0, 0, 0, 0], float), np.zeros((8, 8)))
    m.Q = np.zeros((8, 8))
    with pytest.raises(KalmanError):
        m.update(m.predict(s), [1, 1, 1, 10])


def random_cycles(rng, n):
    m = MotionModel()
    state = m.initiate([rng.uniform(0, 600), rng.uniform(0, 400), rng.uniform(0.3, 0.7), rng.uniform(40, 200)])
    oracle = (state.mean.copy(), state.cova.copy())
    for _ in range(n):
        pred = m.predict(state)
        om, oP = oracle_predict(*oracle)
        z = pred.mean[:4] + rng.normal(0, 1, 4) * [3, 3, 0.01, 3]
        z[3] = abs(z[3])
        state = m.update(pred, z)
        oracle = oracle_update(om, oP, z)
        yield pred, (om, oP), state, oracle


def test_oracle_equivalence_short(rng):
    for pred, (om, oP), state, (um, uP) in random_cycles(rng, 100):
        np.testing.assert_allclose(pred.mean, om, rtol=0, atol=1e-9)
        np.testing.assert_allclose(pred.cova, oP, rtol=0, atol=1e-9)
        np.testing.assert_allclose(state.mean, um, rtol=0, atol=1e-9)
        np.testing.assert_allclose(state.cova, uP, rtol=0, atol=1e-9)


def test_covariance_stays_symmetric_psd(rng):
    for _, _, state, _ in random_cycles(rng, 1000):
        assert np.max(np.abs(state.cova - state.cova.T)) < 1e-9
        assert np.min(np.linalg.eigvalsh(state.cova)) >= -1e-8
        assert np.all(np.diag(state.cova) >= 0)
        assert state.mean[3] > 0


def test_posterior_position_variance_not_above_prior(rng):
    m = MotionModel()
    s = m.initiate([100, 100, 0.5, 80])
    for _ in range(50):
        p = m.predict(s)
        s = m.update(p, p.mean[:4] + rng.normal(0, 2, 4) * [1, 1, 0.001, 1])
        assert np.all(np.diag(s.cova)[:4] <= np.diag(p.cova)[:4] + 1e-12)


def constant_velocity_errors(model, frames):
    s = model.initiate([100, 100, 0.5, 80])
    pre, post = [], []
    for k in range(1, frames + 1):
        truth = np.array([100 + 2.0 * k, 100 + 1.0 * k, 0.5, 80])
        p = model.predict(s)
        pre.append(np.abs(p.mean[:2] - truth[:2]).max())
        s = model.update(p, truth)
        post.append(np.abs(s.mean[:2] - truth[:2]).max())
    return np.array(pre), np.array(post)


def test_noiseless_constant_velocity_converges_fast_with_matched_noise():
    # noiseless truth: tiny process noise, near-zero observation noise
    pre, post = constant_velocity_errors(MotionModel(Q=np.eye(8) * 1e-3, R=np.eye(4) * 1e-12), 40)
    assert np.all(pre[20:] < 1e-6)
    assert np.all(post[20:] < 1e-6)


def test_noiseless_constant_velocity_converges_with_default_noise():
    pre, post = constant_velocity_errors(MotionModel(), 200)
    assert np.all(np.diff(post[20:]) <= 0)
    assert post[-1] < 1e-6
