import json
import os

import pytest

import xnorbin as xb

DATA = os.path.join(os.path.dirname(__file__), "..", "..", "data")


def test_dot16_and_encoding():
    assert xb.dot16(0xFFFF, 0xFFFF) == 16
    assert xb.dot16(0x00FF, 0x0F0F) == 0
    assert xb.encode_bipolar([1 if i % 2 == 0 else -1 for i in range(16)]) == 0x5555
    assert xb.decode_bipolar(0x0001) == [1] + [-1] * 15
    with pytest.raises(xb.XnorbinError, match="InvalidBipolar"):
        xb.encode_bipolar([0] * 16)


def test_fold():
    assert xb.fold_bn_threshold(2, 1, 3, 2) == ("GE", 2, 0)
    assert xb.fold_bn_threshold(-1, 0, 0, 1) == ("LE", 0, 0)


def test_simulator_matches_reference(tmp_path):
    for seed in range(1, 11):
        m = xb.gen_random_model(seed, 1 + seed % 4)
        x = xb.gen_random_input(seed, m.input_shape)
        out, stats = xb.simulate(xb.compile(m), x)
        assert out == xb.forward_ref(m, x)
        assert out.to_bytes() == xb.forward_ref(m, x).to_bytes()
        assert stats["total"] == xb.stats_closed_form(m)["total"]
        assert stats["total"]["cycles"] == xb.analytic_cycles(m)


def test_round_trips(tmp_path):
    m = xb.gen_random_model(3, 3)
    p = str(tmp_path / "m.json")
    xb.save_model(m, p)
    assert xb.load_model(p) == m
    cs = xb.compile(m)
    assert xb.ControlStream.from_json(cs.to_json()).to_json() == cs.to_json()
    x = xb.gen_random_input(3, (5, 4, 20))
    assert xb.FeatureMap.from_bytes(x.to_bytes()) == x


def test_capacity_errors():
    assert xb.compile(xb.alexnet_shaped_model()).num_layers == 7
    with pytest.raises(xb.XnorbinError, match="FeatureMapOverflow"):
        xb.compile(xb.alexnet_shaped_model(conv2_pool=False))


def test_energy_report():
    stats = xb.stats_closed_form(xb.alexnet_shaped_model())
    report = xb.estimate(stats, os.path.join(DATA, "default_coeffs.json"), 100e6)
    assert abs(report["components"]["memory"]["percent"] - 69.0) < 10
    assert report["ops"] == 32 * stats["total"]["xnor_word_ops"]
    assert xb.peak_throughput(7, 7, 1.0) == 1568
