import numpy as np
import pytest

import spikesift


def test_generate_sort_evaluate():
    rec, truth = spikesift.generate(neurons=4, seconds=12.0, seed=5)
    assert rec.num_channels == 16
    assert rec.num_samples == 240000
    assert len(truth.neurons) == 4
    result = spikesift.sort(rec)
    assert result.num_samples == rec.num_samples
    for unit in result.units:
        assert np.all(np.diff(unit.spike_times) > 0)
    summary = spikesift.evaluate(result, truth)
    assert sum(summary.values()) == len(result.units)


def test_sort_is_deterministic():
    rec, _ = spikesift.generate(neurons=3, seconds=6.0, seed=2)
    assert spikesift.sort(rec) == spikesift.sort(rec)


def test_recording_from_numpy_round_trips():
    probe = spikesift.ProbeGeometry.two_column(4)
    data = np.arange(4 * 100, dtype=np.int16).reshape(4, 100)
    rec = spikesift.Recording(data, 20000.0, probe)
    assert np.array_equal(rec.samples, data)
    with pytest.raises(spikesift.Error):
        spikesift.Recording(data[:3], 20000.0, probe)


def test_filter_removes_dc():
    out = spikesift.dog_filter(np.full(400, 5.0))
    assert abs(out[200]) < 1e-9


def test_config_rejects_unknown_keys():
    config = spikesift.Config()
    config.set("kappa", "12")
    assert config.kappa == 12.0
    with pytest.raises(spikesift.Error):
        config.set("kapa", "3")


def test_results_round_trip(tmp_path):
    rec, _ = spikesift.generate(neurons=3, seconds=6.0, seed=3)
    result = spikesift.sort(rec)
    spikesift.write_results(result, tmp_path)
    back = spikesift.read_results(tmp_path)
    assert [u.id for u in back.units] == [u.id for u in result.units]
