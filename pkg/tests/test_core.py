import numpy as np
import pytest

from ssboost.core import (DEFAULT_CHANNELS, GLOBAL_BAND, AdditiveModel, Band, BoostConfig,
                          ChannelSet, Precondition, SessionDataset, TrialMatrix, sign_label,
                          validate_dataset)


def _dataset(n_trials=120, n_samples=1024, n_channels=12, seed=0):
    rng = np.random.default_rng(seed)
    data = rng.standard_normal((n_trials, n_samples, n_channels))
    labels = np.tile([1, -1], n_trials // 2)
    return SessionDataset.from_arrays(data, labels, 256.0)


def test_valid_dataset_has_empty_report():
    assert validate_dataset(_dataset()) == []


def test_channel_count_mismatch_reported():
    d = _dataset(n_trials=4, n_samples=64)
    trials = list(d.trials)
    trials[1] = TrialMatrix(np.zeros((64, 11)) + 1.0, trials[1].label)
    bad = SessionDataset(trials, 256.0, d.channel_names)
    assert "channel count mismatch" in validate_dataset(bad)


def test_single_class_reported():
    d = _dataset(n_trials=4, n_samples=64)
    bad = SessionDataset([TrialMatrix(t.samples, 1) for t in d.trials], 256.0, d.channel_names)
    assert "single-class dataset" in validate_dataset(bad)


def test_other_violations_reported():
    d = _dataset(n_trials=4, n_samples=64)
    assert "empty dataset" in validate_dataset(SessionDataset((), 256.0, d.channel_names))
    trials = list(d.trials)
    trials[0] = TrialMatrix(np.zeros((32, 12)), 1)
    assert "sample count mismatch" in validate_dataset(SessionDataset(trials, 256.0, d.channel_names))
    names = ("a",) * 12
    assert "duplicate channel names" in validate_dataset(SessionDataset(d.trials, 256.0, names))
    x = d.trials[0].samples.copy()
    x[3, 2] = np.nan
    trials = [TrialMatrix(x, 1), *d.trials[1:]]
    assert "non-finite samples" in validate_dataset(SessionDataset(trials, 256.0, d.channel_names))


def test_validate_does_not_mutate():
    d = _dataset(n_trials=4, n_samples=64)
    before = d.data.copy()
    validate_dataset(d)
    assert np.array_equal(before, d.data)


def test_trial_matrix_rejects_bad_label_and_shape():
    with pytest.raises(ValueError):
        TrialMatrix(np.zeros((10, 2)), 0)
    with pytest.raises(ValueError):
        TrialMatrix(np.zeros(10), 1)


def test_sign_label_zero_maps_to_plus_one():
    assert sign_label(0.0) == 1
    assert sign_label(-1e-12) == -1
    assert sign_label(np.array([0.0, -2.0, 3.0])).tolist() == [1, -1, 1]


def test_channel_set_min_size_and_key():
    with pytest.raises(ValueError):
        ChannelSet.from_key(0b111, 12)
    s = ChannelSet.from_names(["C5", "C6", "FC3", "FC4"], DEFAULT_CHANNELS)
    assert s.key == 0b1111
    assert ChannelSet.from_key(s.key, 12) == s
    assert ChannelSet.full(12).is_full
    assert ChannelSet.from_dict(s.to_dict()) == s


def test_band_validation():
    assert GLOBAL_BAND == Band(5, 40)
    for lo, hi in [(4, 10), (10, 41), (10, 10), (10, 12), (20, 15)]:
        with pytest.raises(ValueError):
            Band(lo, hi)
    b = Band(10, 15)
    assert b.covers_unit(10) and b.covers_unit(14) and not b.covers_unit(15)
    assert b.center == 12.5


def test_precondition_mode_invariants():
    full = ChannelSet.full(12)
    sub = ChannelSet.from_key(0b1111, 12)
    with pytest.raises(ValueError):
        Precondition(sub, GLOBAL_BAND, "FB")
    with pytest.raises(ValueError):
        Precondition(full, Band(5, 10), "SB")
    with pytest.raises(ValueError):
        Precondition(sub, Band(5, 10), "PLAIN")
    p = Precondition(sub, Band(5, 10), "SFB")
    assert Precondition.from_dict(p.to_dict()) == p
    assert Precondition.plain(12).is_default


def test_additive_model_invariants():
    with pytest.raises(ValueError):
        AdditiveModel(0.0, (), selected_k=1)
    with pytest.raises(ValueError):
        AdditiveModel(float("nan"))
    assert AdditiveModel(0.5).active_terms == ()


def test_boost_config_defaults_and_round_trip():
    c = BoostConfig()
    assert (c.k_max, c.subset_fraction, c.epsilon, c.pool_cap_multiple, c.candidate_sample_size,
            c.csp_dim, c.svm_cost, c.validation_fraction) == (60, 0.7, 0.01, 20, 256, 4, 1.0, 0.1)
    assert BoostConfig.from_dict(c.to_dict()) == c
    with pytest.raises(ValueError):
        BoostConfig.from_dict({"bogus": 1})
    with pytest.raises(ValueError):
        BoostConfig(csp_dim=10)
    with pytest.raises(ValueError):
        BoostConfig(csp_dim=3)
