from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hexmpo.tensortrain import (
    CompiledLayer,
    CompressionOptions,
    FidelityLog,
    TensorTrain,
    TensorTrainError,
    apply_layer,
    canonicalize,
    compress_two_site,
    entanglement_entropy,
    entropy_profile,
    is_canonical,
    load_checkpoint,
    max_oee,
    normalized,
    overlap,
    save_checkpoint,
    schmidt_spectra,
    schmidt_values,
    truncate_svd,
    truncated_svd,
)


def unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def rand_train(seed: int, n: int = 6, d: int = 2, chi: int = 8) -> TensorTrain:
    return TensorTrain.random(n, d, chi, np.random.default_rng(seed))


def test_shape_validation():
    with pytest.raises(TensorTrainError):
        TensorTrain([])
    with pytest.raises(TensorTrainError):
        TensorTrain([np.ones((2, 2, 1))])
    with pytest.raises(TensorTrainError):
        TensorTrain([np.ones((1, 2, 3)), np.ones((2, 2, 1))])


def test_product_train_dense():
    tt = TensorTrain.product([np.array([1, 0]), np.array([0, 1]), np.array([1, 1])])
    expect = np.kron(np.kron([1, 0], [0, 1]), [1, 1])
    np.testing.assert_allclose(tt.to_dense(), expect)
    assert tt.max_bond == 1


@given(seed=st.integers(0, 10_000), center=st.integers(0, 5))
@settings(max_examples=30, deadline=None)
def test_canonicalize_preserves_vector(seed, center):
    tt = rand_train(seed)
    c = canonicalize(tt, center)
    np.testing.assert_allclose(c.to_dense(), tt.to_dense(), rtol=1e-10, atol=1e-12)
    assert is_canonical(c, center)
    assert np.linalg.norm(c.tensors[center]) == pytest.approx(1.0)
    assert c.norm() == pytest.approx(np.linalg.norm(tt.to_dense()), rel=1e-10)


def test_canonicalize_bad_center():
    with pytest.raises(TensorTrainError):
        canonicalize(rand_train(0), 6)


def test_overlap_matches_dense():
    a, b = rand_train(1), rand_train(2)
    assert overlap(a, b) == pytest.approx(np.vdot(a.to_dense(), b.to_dense()), rel=1e-10)


def test_truncated_svd_caps_and_floor():
    m = np.diag([3.0, 2.0, 1.0, 1e-16])
    u, s, vh, info = truncated_svd(m, 10)
    assert info.kept == 3
    np.testing.assert_allclose(s, [3, 2, 1])
    u, s, vh, info = truncated_svd(m, 2)
    assert info.kept == 2
    assert info.discarded_weight == pytest.approx(1.0)
    assert not info.split_multiplet


def test_truncated_svd_degenerate_ties_are_deterministic():
    m = np.diag([1.0, 1.0, 1.0, 0.5])
    first = truncated_svd(m, 2)
    second = truncated_svd(m.copy(), 2)
    assert first[3].split_multiplet
    np.testing.assert_array_equal(first[0], second[0])
    np.testing.assert_array_equal(first[2], second[2])


def test_compress_exact_when_chi_is_large():
    tt = rand_train(3, chi=4)
    c, eps, f = compress_two_site(tt, 4)
    assert f == pytest.approx(1.0, abs=1e-12)
    assert eps == pytest.approx(0.0, abs=1e-6)
    np.testing.assert_allclose(c.to_dense(), tt.to_dense(), rtol=1e-10, atol=1e-12)


def test_compress_drops_zero_ranks():
    # a product state written with a padded bond dimension
    t0 = np.zeros((1, 2, 3), dtype=complex)
    t0[0, :, 0] = [1, 0]
    t1 = np.zeros((3, 2, 1), dtype=complex)
    t1[0, :, 0] = [0, 1]
    c, eps, f = compress_two_site(TensorTrain([t0, t1]), 8)
    assert c.max_bond == 1
    assert f == 1.0


@given(seed=st.integers(0, 10_000), chi=st.integers(1, 6), d=st.sampled_from([2, 4]))
@settings(max_examples=40, deadline=None)
def test_compression_identities(seed, chi, d):
    tt = TensorTrain.random(5, d, 12, np.random.default_rng(seed))
    c, eps, f = compress_two_site(tt, chi)
    assert c.max_bond <= chi
    ov = overlap(normalized(c), normalized(tt))
    assert abs(ov) ** 2 == pytest.approx(f, abs=1e-10)
    assert eps**2 == pytest.approx(2 * (1 - ov.real), abs=1e-10)


@given(seed=st.integers(0, 10_000), chi=st.integers(1, 3))
@settings(max_examples=30, deadline=None)
def test_two_site_train_is_optimal(seed, chi):
    # for two sites the best rank-chi approximation is the truncated SVD of the matrix
    tt = TensorTrain.random(2, 4, 4, np.random.default_rng(seed))
    s = np.linalg.svd(tt.to_dense().reshape(4, 4), compute_uv=False)
    best = np.sum(s[:chi] ** 2) / np.sum(s**2)
    _, _, f = compress_two_site(tt, chi)
    assert f == pytest.approx(best, rel=1e-10)


@given(seed=st.integers(0, 10_000))
@settings(max_examples=20, deadline=None)
def test_variational_beats_plain_svd(seed):
    tt = TensorTrain.random(7, 2, 8, np.random.default_rng(seed))
    _, f_svd = truncate_svd(tt, 3)
    _, _, f_var = compress_two_site(tt, 3)
    assert f_var >= f_svd - 1e-12


def test_gram_path_matches_svd_path():
    tt = TensorTrain.random(10, 4, 48, np.random.default_rng(7))
    _, e1, f1 = compress_two_site(tt, 12, options=CompressionOptions(gram=False))
    _, e2, f2 = compress_two_site(tt, 12, options=CompressionOptions(gram=True, gram_min_dim=8))
    assert f1 == pytest.approx(f2, rel=1e-10)
    assert e1 == pytest.approx(e2, rel=1e-8)


def test_compress_rejects_bad_chi():
    with pytest.raises(TensorTrainError):
        compress_two_site(rand_train(0), 0)


def test_compress_with_initial_guess():
    tt = rand_train(4, n=6, chi=8)
    guess, _, _ = compress_two_site(tt, 3)
    c, eps, f = compress_two_site(guess, 3, reference=tt)
    _, _, f_ref = compress_two_site(tt, 3)
    assert f == pytest.approx(f_ref, rel=1e-8)


@given(seed=st.integers(0, 10_000), cut=st.integers(1, 5))
@settings(max_examples=30, deadline=None)
def test_schmidt_values_match_dense(seed, cut):
    tt = rand_train(seed)
    v = unit(tt.to_dense())
    s = np.linalg.svd(v.reshape(2**cut, -1), compute_uv=False)
    ours = schmidt_values(tt, cut)
    np.testing.assert_allclose(ours, s[: ours.size], atol=1e-10)
    np.testing.assert_allclose(schmidt_spectra(tt)[cut - 1][: ours.size], ours, atol=1e-10)
    p = s[s > 1e-14] ** 2
    assert entanglement_entropy(tt, cut) == pytest.approx(-np.sum(p * np.log(p)), abs=1e-9)


def test_entropy_of_bell_pair():
    t0 = np.zeros((1, 2, 2), dtype=complex)
    t0[0, 0, 0] = t0[0, 1, 1] = 1
    t1 = np.zeros((2, 2, 1), dtype=complex)
    t1[0, 0, 0] = t1[1, 1, 0] = 1
    assert entropy_profile(TensorTrain([t0, t1])) == [pytest.approx(math.log(2))]


def test_max_oee_requires_operator_trains():
    with pytest.raises(TensorTrainError):
        max_oee(rand_train(0))
    assert max_oee(TensorTrain.random(4, 4, 1, np.random.default_rng(0))) == pytest.approx(0.0, abs=1e-12)


def test_apply_layer_matches_dense():
    rng = np.random.default_rng(5)
    n, d = 4, 2
    tt = TensorTrain.random(n, d, 4, rng)
    bonds = [1, 2, 3, 2, 1]
    tensors = tuple(
        rng.normal(size=(bonds[k], d, d, bonds[k + 1])) + 0j for k in range(n)
    )
    layer = CompiledLayer(tensors, d)
    out = apply_layer(tt, layer)
    np.testing.assert_allclose(out.to_dense(), layer.to_dense() @ tt.to_dense(), rtol=1e-10, atol=1e-10)
    ident = CompiledLayer((None,) * n, d)
    np.testing.assert_allclose(apply_layer(tt, ident).to_dense(), tt.to_dense())


def test_fidelity_log(tmp_path):
    log = FidelityLog()
    for f in (1.0, 0.99, 0.95):
        log.record(math.sqrt(2 * (1 - math.sqrt(f))), f, 16)
    assert log.cumulative == pytest.approx(0.99 * 0.95, abs=1e-15)
    assert log.cumulative_series()[-1] == log.cumulative
    path = tmp_path / "fid.csv"
    log.to_csv(path)
    back = FidelityLog.from_csv(path)
    assert [e.f for e in back.entries] == [e.f for e in log.entries]
    assert back.cumulative == log.cumulative
    s = log.summary()
    assert s["steps"] == 3 and s["truncated_steps"] == 2
    assert FidelityLog().cumulative == 1.0


@pytest.mark.parametrize("dtype,tol", [("complex128", 0.0), ("complex64", 1e-6)])
def test_checkpoint_roundtrip(tmp_path, dtype, tol):
    tt = canonicalize(rand_train(9, d=4, chi=5), 2)
    path = tmp_path / "x.tt"
    save_checkpoint(tt, path, dtype)
    back = load_checkpoint(path)
    assert back.center == 2 and back.log_norm == tt.log_norm
    for a, b in zip(back.tensors, tt.tensors):
        np.testing.assert_allclose(a, b, atol=tol)


def test_checkpoint_errors(tmp_path):
    bad = tmp_path / "bad.tt"
    bad.write_bytes(b"not a checkpoint")
    with pytest.raises(TensorTrainError):
        load_checkpoint(bad)
    with pytest.raises(TensorTrainError):
        save_checkpoint(rand_train(0), tmp_path / "y.tt", "float32")
