import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import brute_dft, brute_dft2, brute_idft
from spsl.exceptions import InvalidInputError
from spsl.io import read_spectrum_csv, write_spectrum_csv
from spsl.spectral import (
    dft1,
    dft2,
    from_polar,
    idft1,
    idft2,
    luminance,
    make_rgbp,
    make_rgbp_batch,
    phase_only_image,
    to_polar,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def signals(max_len=64):
    return arrays(np.float64, st.integers(1, max_len), elements=finite)


# ---------------------------------------------------------------- dft1 / idft1


def test_dft1_constant_is_dc_only():
    np.testing.assert_allclose(dft1([1, 1, 1, 1]), [1, 0, 0, 0], atol=1e-15)


def test_dft1_impulse_is_flat():
    np.testing.assert_allclose(dft1([1, 0, 0, 0]), [0.25] * 4, atol=1e-15)


def test_dft1_matches_brute_force():
    x = np.random.default_rng(1).normal(size=16)
    np.testing.assert_allclose(dft1(x), brute_dft(x), rtol=0, atol=1e-12)


def test_dft1_rejects_empty():
    with pytest.raises(InvalidInputError):
        dft1([])


def test_dft1_rejects_nan():
    with pytest.raises(InvalidInputError):
        dft1([1.0, np.nan])


def test_idft1_examples():
    np.testing.assert_allclose(idft1([1, 0, 0, 0]), [1, 1, 1, 1], atol=1e-15)
    np.testing.assert_allclose(idft1([1, 1, 1, 1]), [4, 0, 0, 0], atol=1e-14)


def test_idft1_matches_brute_force():
    X = np.random.default_rng(2).normal(size=12) + 1j * np.random.default_rng(3).normal(size=12)
    np.testing.assert_allclose(idft1(X), brute_idft(X), atol=1e-12)


def test_round_trip_length_32():
    x = np.random.default_rng(4).normal(size=32)
    back = idft1(dft1(x))
    assert np.max(np.abs(back.imag)) < 1e-9
    np.testing.assert_allclose(back.real, x, atol=1e-9)


@given(signals())
def test_round_trip_property(x):
    back = idft1(dft1(x))
    assert np.max(np.abs(back - x)) <= 1e-9 * max(1.0, np.max(np.abs(x)))


@given(signals())
def test_parseval(x):
    lhs = np.sum(np.abs(x) ** 2)
    rhs = len(x) * np.sum(np.abs(dft1(x)) ** 2)
    assert abs(lhs - rhs) <= 1e-9 * max(lhs, 1e-300)


@given(st.integers(1, 64), st.floats(-10, 10), st.floats(-10, 10), st.integers(0, 2**32 - 1))
def test_linearity(n, a, b, seed):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=n), rng.normal(size=n)
    assert np.max(np.abs(dft1(a * x + b * y) - (a * dft1(x) + b * dft1(y)))) < 1e-12


# ---------------------------------------------------------------- dft2


def test_dft2_constant_image():
    X = dft2(np.full((5, 7), 0.3))
    assert abs(X[0, 0] - 0.3) < 1e-15
    rest = X.copy()
    rest[0, 0] = 0
    assert np.max(np.abs(rest)) < 1e-15


def test_dft2_impulse_is_flat():
    img = np.zeros((6, 4))
    img[0, 0] = 1
    np.testing.assert_allclose(np.abs(dft2(img)), 1 / 24, atol=1e-15)


def test_dft2_matches_brute_force_8x8():
    img = np.random.default_rng(5).random((8, 8))
    np.testing.assert_allclose(dft2(img), brute_dft2(img), rtol=0, atol=1e-10)


def test_dft2_rejects_multichannel():
    with pytest.raises(InvalidInputError):
        dft2(np.zeros((4, 4, 3)))


@settings(max_examples=40)
@given(st.integers(1, 64), st.integers(1, 64), st.integers(0, 2**32 - 1))
def test_dft2_round_trip(h, w, seed):
    img = np.random.default_rng(seed).random((h, w))
    back = idft2(dft2(img))
    assert np.max(np.abs(back - img)) < 1e-9


# ---------------------------------------------------------------- polar


def test_to_polar_examples():
    amp, ph = to_polar(np.array([[0 + 1j, -2 + 0j]]))
    np.testing.assert_allclose(amp, [[1, 2]])
    np.testing.assert_allclose(ph, [[np.pi / 2, np.pi]])


def test_negative_real_with_negative_zero_imag_maps_to_pi():
    _, ph = to_polar(np.array([complex(-1.0, -0.0)]))
    assert ph[0] == np.pi


def test_zero_coefficient_has_zero_phase():
    _, ph = to_polar(np.array([[0j, 1 + 1j], [1e-30 - 1e-30j, 2j]]))
    assert ph[0, 0] == 0.0 and ph[1, 0] == 0.0


@given(st.integers(1, 16), st.integers(1, 16), st.integers(0, 2**32 - 1))
def test_polar_round_trip_and_range(h, w, seed):
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(h, w)) + 1j * rng.normal(size=(h, w))
    amp, ph = to_polar(g)
    assert np.all(amp >= 0)
    assert np.all(ph > -np.pi) and np.all(ph <= np.pi)
    assert np.max(np.abs(from_polar(amp, ph) - g)) < 1e-9


# ---------------------------------------------------------------- phase-only / RGBP


def test_phase_only_of_impulse_is_impulse():
    img = np.zeros((8, 8))
    img[0, 0] = 1.0
    out = phase_only_image(img, "unit-amplitude", normalize=False)
    expected = np.zeros((8, 8))
    expected[0, 0] = 64.0
    np.testing.assert_allclose(out, expected, atol=1e-10)


def test_phase_only_of_constant_is_impulse_at_origin():
    out = phase_only_image(np.full((8, 8), 0.4), "unit-amplitude", normalize=False)
    assert out[0, 0] == pytest.approx(64.0)
    rest = out.copy()
    rest[0, 0] = 0
    assert np.max(np.abs(rest)) < 1e-10


def test_phase_only_constant_abs_phase_normalizes_to_zero():
    out = phase_only_image(np.full((8, 8), 0.4), "abs-phase")
    assert np.all(out == 0.0)


@pytest.mark.parametrize("mode", ["unit-amplitude", "abs-phase"])
def test_phase_only_spectrum_modulus(mode):
    img = np.random.default_rng(6).random((16, 16))
    out = phase_only_image(img, mode, normalize=False)
    got = np.abs(np.fft.fft2(out)) / 256  # independent transform for the check
    _, phase = to_polar(np.fft.fft2(img))
    expected = np.ones((16, 16)) if mode == "unit-amplitude" else np.abs(phase)
    np.testing.assert_allclose(got, expected, atol=1e-8)


def test_phase_only_normalized_range():
    out = phase_only_image(np.random.default_rng(7).random((32, 32, 3)))
    assert out.min() == 0.0 and out.max() == 1.0


def test_phase_only_rejects_unknown_mode():
    with pytest.raises(InvalidInputError):
        phase_only_image(np.zeros((4, 4)), "magnitude")


def test_luminance_weights():
    img = np.zeros((1, 1, 3))
    img[0, 0] = [1.0, 0.0, 0.0]
    assert luminance(img)[0, 0] == pytest.approx(0.299)


def test_make_rgbp_shape_and_rgb_untouched():
    img = np.random.default_rng(8).random((64, 64, 3))
    before = img.copy()
    out = make_rgbp(img)
    assert out.shape == (64, 64, 4)
    assert np.array_equal(out[..., :3], img)
    assert np.array_equal(img, before)
    assert out[..., 3].min() >= 0 and out[..., 3].max() <= 1


def test_make_rgbp_ignores_constant_luminance_offset():
    img = np.random.default_rng(9).uniform(0.1, 0.7, (32, 32, 3))
    np.testing.assert_allclose(make_rgbp(img)[..., 3], make_rgbp(img + 0.2)[..., 3], atol=1e-9)


def test_make_rgbp_deterministic():
    img = np.random.default_rng(10).random((16, 16, 3))
    assert np.array_equal(make_rgbp(img), make_rgbp(img))


def test_make_rgbp_rejects_gray():
    with pytest.raises(InvalidInputError):
        make_rgbp(np.zeros((8, 8)))
    with pytest.raises(InvalidInputError):
        make_rgbp(np.zeros((8, 8, 4)))


def test_batch_matches_single():
    imgs = np.random.default_rng(11).random((3, 16, 16, 3))
    batch = make_rgbp_batch(imgs)
    for i in range(3):
        np.testing.assert_allclose(batch[i], make_rgbp(imgs[i]), atol=1e-12)


def test_p_channel_separates_resampled_from_pristine():
    """Resampling moves the P channel more than swapping to another crop of the same texture."""
    from spsl.synth import TextureSpec, gen_texture
    from spsl.upsample import ResampleChain

    chain = ResampleChain.decoder("bilinear", 2, 1)
    forged_gap, pristine_gap = [], []
    for seed in range(20):
        big = gen_texture(TextureSpec("fractal", 128, seed, 1.0))
        a, b = big[:64, :64], big[64:, 64:]
        pa, pb = make_rgbp(a)[..., 3], make_rgbp(b)[..., 3]
        forged_gap.append(np.abs(make_rgbp(chain(a))[..., 3] - pa).mean())
        pristine_gap.append(np.abs(pb - pa).mean())
    assert np.mean(forged_gap) > np.mean(pristine_gap)


def test_spectrum_csv_round_trip(tmp_path):
    g = dft2(np.random.default_rng(12).random((4, 5)))
    write_spectrum_csv(tmp_path / "s.csv", g)
    assert np.array_equal(read_spectrum_csv(tmp_path / "s.csv"), g)
