import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import brute_dft
from spsl.exceptions import InvalidInputError
from spsl.spectral import dft1, idft1
from spsl.synth import TEXTURE_KINDS, TextureSpec, gen_texture
from spsl.upsample import (
    ComponentCountModel,
    ResampleChain,
    ResampleOp,
    check_distributive,
    coefficient_supports,
    component_signal,
    convolve_circular,
    count_significant,
    fig1_sweep,
    phase_only_signal,
    predicted_counts,
    resample_matrix,
    upsample_zero_insert,
    verify_duplication,
)


def test_zero_insert_examples():
    np.testing.assert_array_equal(upsample_zero_insert([1, 2]), [1, 0, 2, 0])
    np.testing.assert_array_equal(upsample_zero_insert([0, 0, 0]), np.zeros(6))


def test_zero_insert_factor_three():
    np.testing.assert_array_equal(upsample_zero_insert([1, 2], 3), [1, 0, 0, 2, 0, 0])


@given(st.integers(1, 64), st.integers(0, 2**32 - 1))
def test_zero_insert_keeps_even_subsequence(n, seed):
    x = np.random.default_rng(seed).normal(size=n)
    up = upsample_zero_insert(x)
    assert np.array_equal(up[::2], x) and not np.any(up[1::2])


def test_duplication_law_against_brute_force():
    rng = np.random.default_rng(0)
    for n in (1, 3, 8, 13):
        x = rng.normal(size=n)
        Xup = brute_dft(upsample_zero_insert(x))
        X = brute_dft(x)
        np.testing.assert_allclose(Xup, 0.5 * X[np.arange(2 * n) % n], atol=1e-10)


def test_verify_duplication_trivial_cases():
    assert verify_duplication([1, 1, 1, 1]) < 1e-12
    assert verify_duplication([1, 0, 0, 0]) < 1e-12


@given(st.integers(1, 64), st.integers(0, 2**32 - 1))
def test_verify_duplication_property(n, seed):
    assert verify_duplication(np.random.default_rng(seed).normal(size=n)) < 1e-9


# ---------------------------------------------------------------- component counts


def test_count_significant_examples():
    assert count_significant(dft1(np.ones(8))) == 1
    imp = np.zeros(8)
    imp[0] = 1
    assert count_significant(dft1(imp)) == 8
    assert count_significant(np.zeros(5)) == 0


def test_count_significant_rejects_bad_epsilon():
    with pytest.raises(InvalidInputError):
        count_significant([1, 2], 0)


def test_decaying_signal_is_sparse_but_phase_only_is_full():
    n = 256
    rng = np.random.default_rng(1)
    f = np.minimum(np.arange(n), n - np.arange(n)).astype(float)
    amp = np.where(f > 0, 1 / np.maximum(f, 1) ** 2, 4.0)
    X = amp * np.exp(1j * rng.uniform(-np.pi, np.pi, n))
    X[0] = X[0].real
    X[n // 2] = X[n // 2].real
    X[n // 2 + 1 :] = np.conj(X[1 : n // 2][::-1])
    x = idft1(X).real
    assert count_significant(dft1(x), 1e-3) < n // 4
    assert count_significant(dft1(phase_only_signal(x)), 1e-3) == n


def test_predicted_counts_n8_k0():
    c = predicted_counts(ComponentCountModel(8, 0))
    assert (c.X_A, c.X_P, c.Y_A, c.Y_AP, c.Y_AP_up) == (1, 8, 8, 15, 23)


def test_predicted_counts_single_sample():
    c = predicted_counts(ComponentCountModel(1, 0))
    assert c.X_A == c.X_P == 1


def test_y_a_up_readings():
    m = ComponentCountModel(16, 3)
    assert predicted_counts(m, "labeled").Y_A_up == 32
    assert predicted_counts(m, "indexed").Y_A_up == 35
    with pytest.raises(InvalidInputError):
        predicted_counts(m, "other")


def test_invalid_k_rejected():
    with pytest.raises(InvalidInputError):
        ComponentCountModel(4, 4)


@given(st.integers(1, 64).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, n - 1))))
def test_phase_path_adds_n_minus_1_minus_k(nk):
    n, k = nk
    c = predicted_counts(ComponentCountModel(n, k))
    assert c.Y_AP - c.Y_A == n - 1 - k


def test_constructive_counts_n16_k3():
    m = ComponentCountModel(16, 3)
    rng = np.random.default_rng(2)
    assert coefficient_supports(m, rng) == predicted_counts(m, "indexed")
    x = component_signal(16, 3, rng)
    assert count_significant(dft1(x)) == 4
    c = rng.normal(size=16)
    # the circular product cannot create components the signal lacks
    assert count_significant(dft1(convolve_circular(x, c))) <= 4
    up = upsample_zero_insert(x)
    assert count_significant(dft1(up)) == predicted_counts(m).X_A_up
    assert count_significant(dft1(phase_only_signal(up))) == predicted_counts(m).X_P_up


@pytest.mark.parametrize("n", [8, 16, 32])
@pytest.mark.parametrize("k", [0, 1, 3, 7])
def test_component_signal_exact_support(n, k):
    x = component_signal(n, k, np.random.default_rng(n * 100 + k))
    assert np.isrealobj(x)
    assert count_significant(dft1(x)) == k + 1


# ---------------------------------------------------------------- convolution


def test_identity_kernel():
    x = np.random.default_rng(3).normal(size=10)
    np.testing.assert_allclose(convolve_circular(x, [1.0]), x)


def test_shifted_impulse_rolls():
    x = np.arange(6.0)
    np.testing.assert_allclose(convolve_circular(x, [0, 0, 1]), np.roll(x, 2))


def test_convolution_theorem():
    rng = np.random.default_rng(4)
    x, c = rng.normal(size=32), rng.normal(size=32)
    lhs = dft1(convolve_circular(x, c))
    np.testing.assert_allclose(lhs, 32 * dft1(x) * dft1(c), atol=1e-10)


def test_convolution_errors():
    with pytest.raises(InvalidInputError):
        convolve_circular([1, 2], [])
    with pytest.raises(InvalidInputError):
        convolve_circular([1, 2], [1, 2, 3])


def test_distributive_trivial():
    rng = np.random.default_rng(5)
    f, h = rng.normal(size=8), rng.normal(size=3)
    assert np.max(np.abs(convolve_circular(f + -f, h))) == 0
    assert check_distributive(f, -f, h) < 1e-12
    assert check_distributive(f, np.zeros(8), h) == 0.0


@given(st.integers(0, 2**32 - 1))
def test_distributive_property(seed):
    rng = np.random.default_rng(seed)
    assert check_distributive(*rng.normal(size=(3, 64))) < 1e-10


# ---------------------------------------------------------------- 2D resampling


def test_resample_matrix_rows_sum_to_one():
    for kind in ("nearest", "bilinear", "bicubic"):
        m = resample_matrix(kind, 2, 9)
        np.testing.assert_allclose(m.sum(axis=1), 1.0, atol=1e-12)


def test_zero_insert_then_decimate_is_identity():
    img = np.random.default_rng(6).random((8, 8, 3))
    chain = ResampleChain.round_trip("zero-insert")
    np.testing.assert_array_equal(chain(img), img)


def test_bilinear_up_preserves_constants():
    out = ResampleOp("bilinear")(np.full((4, 6), 0.3))
    assert out.shape == (8, 12)
    np.testing.assert_allclose(out, 0.3)


def test_bicubic_interpolates_linear_ramp_interior():
    ramp = np.tile(np.arange(16.0), (4, 1))
    up = ResampleOp("bicubic")(ramp)
    # half-pixel alignment: output column o samples source position (o + 0.5)/2 - 0.5
    src = (np.arange(32) + 0.5) / 2 - 0.5
    np.testing.assert_allclose(up[0, 4:-4], src[4:-4], atol=1e-12)


def test_resample_batch_matches_single():
    imgs = np.random.default_rng(7).random((3, 8, 8, 3))
    op = ResampleOp("bicubic")
    np.testing.assert_allclose(op(imgs)[1], op(imgs[1]))


def test_bad_ops_rejected():
    with pytest.raises(InvalidInputError):
        ResampleOp("lanczos")
    with pytest.raises(InvalidInputError):
        ResampleOp("bilinear", 1)


def test_empty_chain_is_identity():
    img = np.random.default_rng(8).random((4, 4))
    assert np.array_equal(ResampleChain()(img), img)


# ---------------------------------------------------------------- sweep


@pytest.fixture(scope="module")
def small_corpus():
    return np.stack(
        [gen_texture(TextureSpec(TEXTURE_KINDS[i % 3], 32, i, 1.0)) for i in range(40)]
    )


def test_sweep_starts_at_zero_and_grows(small_corpus):
    rep = fig1_sweep(small_corpus, "bilinear", 3)
    assert rep.rows()[0] == (0, 0.0, 0.0, 0.0, 0.0)
    assert rep.phase_mean[1] > 0 and rep.phase_mean[3] > rep.phase_mean[1]


def test_sweep_is_deterministic(small_corpus):
    a = fig1_sweep(small_corpus, "bicubic", 2).to_csv()
    b = fig1_sweep(small_corpus, "bicubic", 2).to_csv()
    assert a == b


def test_sweep_csv_columns(small_corpus, tmp_path):
    text = fig1_sweep(small_corpus[:5], "bilinear", 1, domain="spectrum").to_csv(tmp_path / "f.csv")
    assert text.splitlines()[0] == "t,phase_mean,phase_var,amp_mean,amp_var"
    assert (tmp_path / "f.csv").read_text() == text


def test_sweep_rejects_empty():
    with pytest.raises(InvalidInputError):
        fig1_sweep([], "bilinear", 2)
