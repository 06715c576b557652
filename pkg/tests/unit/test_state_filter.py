#!/usr/bin/env python3
"""
Unit tests for the position/velocity state filter.
"""

import os
import sys
import unittest

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

# Add src directory to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "..", "src"))

from mav_nav.core.errors import FilterInputError  # noqa: E402
from mav_nav.core.estimation.state_filter import (  # noqa: E402
    GRAVITY,
    FilterState,
    ImuSample,
    PoseMeasurement,
    StateFilter,
    predict,
    process_noise,
    update_position,
    world_accel,
)
from mav_nav.io.schema import FilterConfig  # noqa: E402

IDENTITY = np.array([0.0, 0.0, 0.0, 1.0])
HOVER = np.array([0.0, 0.0, GRAVITY])


def _state(p=(0, 0, 0), v=(0, 0, 0), std=1.0) -> FilterState:
    return FilterState(
        p=np.asarray(p, dtype=float), v=np.asarray(v, dtype=float), P=np.eye(6) * std**2
    )


@pytest.mark.unit
class TestWorldAccel(unittest.TestCase):
    def test_hover_is_zero(self):
        np.testing.assert_allclose(world_accel(ImuSample(IDENTITY, HOVER)), 0.0, atol=1e-12)

    def test_rotated_body_frame(self):
        yaw = Rotation.from_euler("z", 90, degrees=True).as_quat()
        accel = world_accel(ImuSample(yaw, (1.0, 0.0, GRAVITY)))
        np.testing.assert_allclose(accel, [0.0, 1.0, 0.0], atol=1e-12)

    def test_pitched_ninety_degrees(self):
        # the thrust axis points along +x, so gravity is no longer cancelled
        pitch = Rotation.from_euler("y", 90, degrees=True).as_quat()
        accel = world_accel(ImuSample(pitch, HOVER))
        np.testing.assert_allclose(accel, [GRAVITY, 0.0, -GRAVITY], atol=1e-9)
        nose_up = Rotation.from_euler("y", -90, degrees=True).as_quat()
        accel = world_accel(ImuSample(nose_up, HOVER))
        np.testing.assert_allclose(accel, [-GRAVITY, 0.0, -GRAVITY], atol=1e-9)

    def test_non_unit_quaternion_rejected(self):
        with self.assertRaises(FilterInputError):
            world_accel(ImuSample((0.0, 0.0, 0.0, 2.0), HOVER))


@pytest.mark.unit
class TestKalmanSteps(unittest.TestCase):
    def test_predict_integrates_known_acceleration(self):
        state = predict(_state(p=(1, 0, 0), v=(1, 0, 0)), (2.0, 0.0, 0.0), 0.5)
        np.testing.assert_allclose(state.p, [1.75, 0.0, 0.0])
        np.testing.assert_allclose(state.v, [2.0, 0.0, 0.0])
        self.assertAlmostEqual(state.stamp, 0.5)

    def test_predict_grows_uncertainty(self):
        before = _state(std=0.1)
        after = predict(before, np.zeros(3), 0.1, process_noise(0.1, 1.0, 0.05))
        self.assertGreater(np.trace(after.P), np.trace(before.P))
        np.testing.assert_allclose(after.P, after.P.T)

    def test_non_positive_step_rejected(self):
        with self.assertRaises(FilterInputError):
            predict(_state(), np.zeros(3), 0.0)

    def test_process_noise_blocks(self):
        q = process_noise(0.02, 1.0, 0.0)
        self.assertAlmostEqual(q[0, 0], 0.02**5 / 20.0)
        self.assertAlmostEqual(q[0, 3], 0.02**4 / 8.0)
        self.assertEqual(q[0, 1], 0.0)

    def test_update_pulls_toward_measurement(self):
        state = _state(std=1.0)
        z = PoseMeasurement((1.0, -1.0, 0.5), noise=np.eye(3) * 1.0)
        posterior = update_position(state, z)
        np.testing.assert_allclose(posterior.p, [0.5, -0.5, 0.25])
        self.assertLess(np.trace(posterior.P), np.trace(state.P))
        self.assertTrue(np.all(np.linalg.eigvalsh(posterior.P) >= 0.0))


@pytest.mark.unit
class TestStateFilter(unittest.TestCase):
    """Simulator-facing wrapper fed in time order."""

    def setUp(self):
        self.config = FilterConfig()

    def test_out_of_order_inputs_rejected(self):
        filt = StateFilter(self.config, (0, 0, 0), stamp=1.0)
        with self.assertRaises(FilterInputError):
            filt.predict(ImuSample(IDENTITY, HOVER, stamp=0.5))
        with self.assertRaises(FilterInputError):
            filt.update((0, 0, 0), stamp=0.9)

    def test_same_stamp_only_updates_orientation(self):
        filt = StateFilter(self.config, (1, 2, 3))
        yaw = Rotation.from_euler("z", 30, degrees=True).as_quat()
        filt.predict(ImuSample(yaw, HOVER, stamp=0.0))
        np.testing.assert_allclose(filt.orientation, yaw)
        np.testing.assert_allclose(filt.position, [1, 2, 3])

    def _run(self, rng=None, seconds=4.0, config=None):
        """Constant 1 m/s along x; IMU at 50 Hz, positions at 10 Hz."""
        config = config or self.config
        filt = StateFilter(config, (0, 0, 0))
        errors = []
        for k in range(1, int(seconds / 0.02) + 1):
            t = k * 0.02
            filt.predict(ImuSample(IDENTITY, HOVER, stamp=t))
            if k % 5 == 0:
                measured = np.array([t, 0.0, 0.0])
                if rng is not None:
                    measured = measured + rng.normal(0.0, config.sigma_position, 3)
                filt.update(measured, t)
            errors.append((t, float(np.linalg.norm(filt.velocity - [1.0, 0.0, 0.0]))))
        return np.array(errors)

    def test_noiseless_velocity_converges(self):
        errors = self._run(config=FilterConfig(initial_velocity_std=1.0))
        late = errors[errors[:, 0] >= 2.0, 1]
        self.assertLessEqual(float(np.sqrt(np.mean(late**2))), 0.01)

    def test_noisy_velocity_converges(self):
        for seed in range(10):
            errors = self._run(np.random.default_rng(seed))
            late = errors[errors[:, 0] >= 2.0, 1]
            with self.subTest(seed=seed):
                self.assertLessEqual(float(np.sqrt(np.mean(late**2))), 0.05)


if __name__ == "__main__":
    unittest.main()
