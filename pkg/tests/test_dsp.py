import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ssboost.core import Band, ChannelSet, TrialMatrix
from ssboost.dsp import bandpass, bandpass_array, covariance_normalized, detrend, project_channels

FS = 256.0
T = np.arange(1024)


def _trial(cols):
    return TrialMatrix(np.column_stack(cols), 1)


def test_detrend_constant_and_ramp():
    out = detrend(_trial([np.full(1024, 5.0), 0.01 * T]))
    assert np.max(np.abs(out.samples)) < 1e-9


def test_detrend_removes_added_ramp_exactly():
    # a sinusoid has its own small projection on the line (about 2% here), so
    # the exact statement is that adding a ramp does not change the output
    sig = np.sin(2 * np.pi * 10 * T / FS)
    a = detrend(_trial([sig + 0.01 * T + 3.0])).samples[:, 0]
    b = detrend(_trial([sig])).samples[:, 0]
    assert np.linalg.norm(a - b) / np.linalg.norm(sig) < 1e-9
    # independent least-squares fit
    A = np.stack([T, np.ones_like(T)], 1).astype(float)
    x = sig + 0.01 * T + 3.0
    ref = x - A @ np.linalg.lstsq(A, x, rcond=None)[0]
    assert np.linalg.norm(a - ref) / np.linalg.norm(sig) < 1e-9


def test_bandpass_passes_in_band_tone():
    x = np.sin(2 * np.pi * 10 * T / FS)
    out = bandpass(_trial([x]), (8, 12), FS).samples[:, 0]
    assert out @ out >= 0.99 * (x @ x)


def test_bandpass_rejects_out_of_band_tone():
    x = np.sin(2 * np.pi * 10 * T / FS)
    out = bandpass(_trial([x]), Band(20, 30), FS).samples[:, 0]
    assert out @ out <= 1e-6 * (x @ x)


def test_bandpass_idempotent_on_noise(rng):
    t = TrialMatrix(rng.standard_normal((1024, 3)), 1)
    once = bandpass(t, Band(5, 40), FS)
    twice = bandpass(once, Band(5, 40), FS)
    assert np.max(np.abs(once.samples - twice.samples)) < 1e-9


def test_bandpass_above_nyquist_and_non_finite():
    with pytest.raises(ValueError, match="Nyquist"):
        bandpass(_trial([np.ones(64)]), Band(5, 40), 64.0)
    x = np.ones((64, 1))
    x[3] = np.inf
    with pytest.raises(ValueError, match="non-finite"):
        bandpass(TrialMatrix(x, 1), Band(5, 40), 256.0)


@given(arrays(np.float64, (128, 2), elements=st.floats(-100, 100)),
       arrays(np.float64, (128, 2), elements=st.floats(-100, 100)),
       st.floats(-5, 5))
def test_bandpass_is_linear(x, y, a):
    b = Band(10, 30)
    lhs = bandpass_array(a * x + y, b, FS, axis=0)
    rhs = a * bandpass_array(x, b, FS, axis=0) + bandpass_array(y, b, FS, axis=0)
    assert np.allclose(lhs, rhs, atol=1e-8 * (1 + np.abs(x).max() + np.abs(y).max()))


def test_project_channels():
    x = np.arange(40.0).reshape(10, 4)
    t = TrialMatrix(x, -1)
    assert project_channels(t, ChannelSet.full(4)) == t
    sub = ChannelSet([False, True, False, True], min_channels=1)
    out = project_channels(t, sub)
    assert np.array_equal(out.samples, x[:, [1, 3]])
    assert project_channels(out, ChannelSet.full(2)) == out
    with pytest.raises(ValueError, match="empty channel set"):
        project_channels(t, np.zeros(4, dtype=bool))


def test_covariance_normalized_examples(rng):
    c = covariance_normalized(TrialMatrix(rng.standard_normal((1024, 2)), 1))
    assert np.allclose(c, np.diag([0.5, 0.5]), atol=0.05)
    x = np.zeros((100, 3))
    x[:, 1] = rng.standard_normal(100)
    c = covariance_normalized(TrialMatrix(x, 1))
    expect = np.zeros((3, 3))
    expect[1, 1] = 1
    assert np.allclose(c, expect, atol=1e-12)
    with pytest.raises(ValueError, match="degenerate trial"):
        covariance_normalized(TrialMatrix(np.zeros((100, 3)), 1))


@given(arrays(np.float64, (64, 3), elements=st.floats(-1e3, 1e3)))
def test_covariance_trace_one(x):
    x = x + np.arange(64)[:, None] % 3  # avoid all-constant input
    if np.allclose(x - x.mean(0), 0):
        return
    c = covariance_normalized(TrialMatrix(x, 1))
    assert abs(np.trace(c) - 1) < 1e-8
    assert np.allclose(c, c.T)
