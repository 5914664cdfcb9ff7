import numpy as np
import pytest

import ultdoa
from conftest import HALL


def test_config_and_simulation():
    cfg = ultdoa.parse_config(HALL, "hall.yaml")
    assert cfg.antenna_count == 8
    assert cfg.antennas[4] == (1, 0)
    ds = ultdoa.simulate(cfg)
    assert len(ds) % 8 == 0
    assert ds.n_fft == 4096
    assert ds.deployment_hash == cfg.deployment_hash
    again = ultdoa.decode_dataset(ds.to_bytes())
    assert again.to_bytes() == ds.to_bytes()
    assert ds.true_position(0) == pytest.approx((2.0, 2.0, 1.5))


def test_config_error_carries_line():
    with pytest.raises(ultdoa.UltdoaError) as info:
        ultdoa.parse_config("deployment:\n  rus:\n    - antennas: [[0, 0]]\n", "bad.yaml")
    assert info.value.code == "ConfigError"
    assert "bad.yaml:3:" in str(info.value)


def test_estimate_toa_picks_first_maximum():
    h = np.zeros(64, complex)
    h[10] = 1j
    h[20] = -1
    peak, toa = ultdoa.estimate_toa(h, 1e-9)
    assert peak == 10
    assert toa == pytest.approx(10e-9)


def test_solve_noise_free():
    cfg = ultdoa.parse_config(HALL)
    ds = ultdoa.simulate(cfg)
    out = ultdoa.solve(ds, cfg, toa_source="truth")
    assert out["report"]["mae"] <= 0.05
    assert out["estimates"].shape == (len(ds) // 8, 2)
    assert set(out["status"]) == {"ok"}


def test_fingerprint_self_consistency():
    cfg = ultdoa.parse_config(HALL)
    ds = ultdoa.simulate(cfg)
    out = ultdoa.fingerprint(ds, ds)
    assert out["report"]["mae"] == 0.0
    masked = ultdoa.fingerprint(ds, ds, gamma=1.1)
    assert masked["all_masked"] == len(ds) // 8


def test_preprocess_shape_and_mask():
    rng = np.random.default_rng(3)
    frames = []
    for ru in range(2):
        for ant in range(8):
            h = rng.uniform(0, 0.05, 512).astype(complex)
            h[100 + 3 * ant] = 1.0 if ant % 2 == 0 else 0.3
            frames.append((ru, ant, h, 1e-9))
    x, mask, rows = ultdoa.preprocess(frames, alpha=1.0)
    assert x.shape == (16, 100)
    assert list(mask) == [1, 0] * 8
    assert rows[0] == (0, 0) and rows[-1] == (1, 7)
    assert np.all(x[mask == 0] == 0)
    assert x[0, 0] == 1.0  # aligned to the RU's earliest peak


def test_metrics():
    assert ultdoa.mae([1, 1, 1]) == 1.0
    assert ultdoa.ce90(list(range(1, 11))) == pytest.approx(9.1)
    cdf = ultdoa.error_cdf([3.0, 1.0, 2.0])
    assert cdf == [(1.0, 0.0), (2.0, 0.5), (3.0, 1.0)]
    with pytest.raises(ultdoa.UltdoaError):
        ultdoa.ce90([])


@pytest.mark.parametrize("base64", [False, True])
def test_stream_codec(base64):
    payload = np.arange(16) * (1 - 2j)
    raw = ultdoa.encode_message("hall", 7, 1, 2, payload, 1e-9, sequence=42, base64=base64)
    msg = ultdoa.decode_message(raw)
    assert (msg["deployment"], msg["timestamp"], msg["ru"], msg["antenna"], msg["sequence"]) == ("hall", 7, 1, 2, 42)
    assert msg["base64"] is base64
    np.testing.assert_array_equal(msg["payload"], payload)
    with pytest.raises(ultdoa.UltdoaError):
        ultdoa.decode_message(raw[:-3])
    assert ultdoa.cir_topic("hall", "gnb0") == "cir/hall/gnb0"
