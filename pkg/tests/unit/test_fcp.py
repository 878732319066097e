"""Tests for forward convolutive prediction filters."""

import numpy as np
import pytest
import torch
from scipy.sparse.linalg import lsqr

from pulseforge.align import (
    FcpFilter,
    apply_fcp,
    estimate_fcp_filter,
    fcp_taps_tensor,
    stack_taps,
)
from pulseforge.config import FcpTapGeometry
from pulseforge.dsp import Spectrogram
from pulseforge.errors import RankDeficientError, ShapeMismatchError


def _complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def _spec(data):
    return Spectrogram(data)


def _objective(est, target, taps, geometry, eps):
    windows = stack_taps(_spec(est), geometry)
    out = np.einsum("tfi,fi->tf", windows, taps.conj())
    return float(np.sum(np.abs(target - out) ** 2) + eps * np.sum(np.abs(taps) ** 2))


def _residual(est, target, geometry, ridge=0.0):
    filt = estimate_fcp_filter(_spec(est), _spec(target), geometry, ridge=ridge)
    return float(np.sum(np.abs(apply_fcp(_spec(est), filt).data - target) ** 2))


class TestStackTaps:
    def test_single_tap_is_the_frame(self, rng):
        """A one-tap window is the spectrogram itself."""
        data = _complex(rng, (5, 257))
        windows = stack_taps(_spec(data), FcpTapGeometry())

        assert windows.shape == (5, 257, 1)
        np.testing.assert_array_equal(windows[..., 0], data)

    def test_past_tap_zero_before_start(self, rng):
        """Past taps read zeros before the first frame."""
        data = _complex(rng, (3, 257))
        windows = stack_taps(_spec(data), FcpTapGeometry(past_taps=2))

        assert np.all(windows[0, :, 0] == 0)
        np.testing.assert_array_equal(windows[1, :, 0], data[0])
        np.testing.assert_array_equal(windows[..., 1], data)

    def test_future_tap(self, rng):
        """Future taps read the next frame and zeros after the last."""
        data = _complex(rng, (4, 257))
        windows = stack_taps(_spec(data), FcpTapGeometry(past_taps=2, future_taps=1))

        np.testing.assert_array_equal(windows[..., 1], data)
        np.testing.assert_array_equal(windows[:3, :, 2], data[1:])
        assert np.all(windows[3, :, 2] == 0)


class TestEstimate:
    def test_identical_signals_give_unit_tap(self, rng):
        """Projecting a signal onto itself gives a unit tap."""
        data = _complex(rng, (20, 257))
        filt = estimate_fcp_filter(_spec(data), _spec(data), FcpTapGeometry())

        np.testing.assert_allclose(filt.taps, 1.0, atol=1e-5)

    def test_scaled_target(self, rng):
        """A scaled target is matched by a scaled tap."""
        data = _complex(rng, (20, 257))
        filt = estimate_fcp_filter(_spec(data), _spec(2 * data), FcpTapGeometry())

        np.testing.assert_allclose(filt.taps, 2.0, atol=1e-5)

    def test_silent_frequency_gets_zero_filter(self, rng):
        """A bin without estimate energy gets a zero filter."""
        data = _complex(rng, (20, 257))
        data[:, 10] = 0
        filt = estimate_fcp_filter(_spec(data), _spec(_complex(rng, (20, 257))), FcpTapGeometry())

        assert np.all(filt.taps[10] == 0)

    def test_matches_least_squares_oracle(self, rng):
        """The closed-form taps match an iterative least-squares solve."""
        geometry = FcpTapGeometry(past_taps=2, future_taps=1)
        eps = 1e-6
        for _ in range(50):
            est, target = _complex(rng, (8, 16)), _complex(rng, (8, 16))
            filt = estimate_fcp_filter(_spec(est), _spec(target), geometry, ridge=eps)
            windows = stack_taps(_spec(est), geometry)

            oracle = np.zeros_like(filt.taps)
            for f in range(16):
                rows = windows[:, f, :]
                stacked = np.block([[rows.real, -rows.imag], [rows.imag, rows.real]])
                rhs = np.concatenate([target[:, f].real, target[:, f].imag])
                solution = lsqr(stacked, rhs, damp=np.sqrt(eps), atol=1e-15, btol=1e-15,
                                iter_lim=10000)[0]
                oracle[f] = np.conj(solution[:3] + 1j * solution[3:])

            ours = _objective(est, target, filt.taps, geometry, eps)
            best = _objective(est, target, oracle, geometry, eps)
            assert ours <= best * (1 + 1e-6)

            gram = np.einsum("tfi,tfj->fij", windows, windows.conj()) + eps * np.eye(3)
            rhs = np.einsum("tfi,tf->fi", windows, target.conj())
            gradient = np.einsum("fij,fj->fi", gram, filt.taps) - rhs
            assert np.max(np.abs(gradient)) <= 1e-8

    def test_perturbation_increases_residual(self, rng):
        """Nudging the solved taps never lowers the objective."""
        geometry = FcpTapGeometry(past_taps=2)
        est, target = _complex(rng, (32, 9)), _complex(rng, (32, 9))
        filt = estimate_fcp_filter(_spec(est), _spec(target), geometry, ridge=0.0)
        best = _objective(est, target, filt.taps, geometry, 0.0)

        for _ in range(10):
            nudged = filt.taps + 1e-3 * _complex(rng, filt.taps.shape)
            assert _objective(est, target, nudged, geometry, 0.0) > best

    def test_more_taps_never_hurt(self, rng):
        """Adding a tap cannot raise the residual."""
        est, target = _complex(rng, (32, 9)), _complex(rng, (32, 9))

        one = _residual(est, target, FcpTapGeometry(past_taps=1))
        two = _residual(est, target, FcpTapGeometry(past_taps=2))

        assert two <= one + 1e-9

    def test_scale_equivariance(self, rng):
        """Scaling the inputs scales the projection by the target factor."""
        geometry = FcpTapGeometry(past_taps=2, future_taps=1)
        est, target = _complex(rng, (24, 9)), _complex(rng, (24, 9))
        alpha, beta = 0.3 - 1.2j, 2.0 + 0.5j

        base = apply_fcp(_spec(est), estimate_fcp_filter(_spec(est), _spec(target), geometry))
        scaled_filter = estimate_fcp_filter(_spec(alpha * est), _spec(beta * target), geometry)
        scaled = apply_fcp(_spec(alpha * est), scaled_filter)

        np.testing.assert_allclose(scaled.data, beta * base.data, atol=1e-9)

    def test_frequency_permutation(self, rng):
        """Bins are solved independently of their order."""
        geometry = FcpTapGeometry(past_taps=2)
        est, target = _complex(rng, (16, 9)), _complex(rng, (16, 9))
        order = rng.permutation(9)

        taps = estimate_fcp_filter(_spec(est), _spec(target), geometry).taps
        permuted = estimate_fcp_filter(
            _spec(est[:, order]), _spec(target[:, order]), geometry
        ).taps

        np.testing.assert_allclose(permuted, taps[order], atol=1e-12)

    def test_singular_without_ridge(self, rng):
        """Too few frames with no ridge is rank-deficient."""
        est = torch.from_numpy(_complex(rng, (1, 9)))
        with pytest.raises(RankDeficientError):
            fcp_taps_tensor(est, est, FcpTapGeometry(past_taps=2), ridge=0.0)

    def test_shape_mismatch(self, rng):
        """Estimate and target must share a shape."""
        with pytest.raises(ShapeMismatchError):
            estimate_fcp_filter(
                _spec(_complex(rng, (8, 9))), _spec(_complex(rng, (9, 9))), FcpTapGeometry()
            )


class TestApply:
    def test_identity_filter(self, rng):
        """The identity filter passes the spectrogram through."""
        data = _complex(rng, (10, 257))
        geometry = FcpTapGeometry(past_taps=2, future_taps=1)

        out = apply_fcp(_spec(data), FcpFilter.identity(257, geometry))

        np.testing.assert_array_equal(out.data, data)

    def test_zero_filter(self, rng):
        """A zero filter outputs silence."""
        data = _complex(rng, (10, 257))
        zero = FcpFilter(np.zeros((257, 1)), FcpTapGeometry())

        assert np.all(apply_fcp(_spec(data), zero).data == 0)

    def test_bin_mismatch(self, rng):
        """A filter for another bin count is rejected."""
        with pytest.raises(ShapeMismatchError):
            apply_fcp(_spec(_complex(rng, (10, 257))), FcpFilter(np.ones((9, 1)), FcpTapGeometry()))
