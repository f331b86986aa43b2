"""Smoke tests for the Python bindings."""

import math

import numpy as np
import pytest

ngmvlvm = pytest.importorskip("ngmvlvm")


def make_params():
    return ngmvlvm.SpectralMixtureParams(
        alpha=np.array([0.7, 1.3]),
        mu1=np.array([[0.5, -0.2], [1.0, 0.3]]),
        mu2=np.array([[0.1, 0.4], [-0.6, 0.2]]),
        sigma1_sq=np.array([[0.8, 1.2], [0.5, 0.9]]),
        sigma2_sq=np.array([[1.1, 0.7], [1.4, 0.6]]),
        rho=np.array([0.3, -0.5]),
    )


def test_kernel_zero_input_identity():
    p = make_params()
    z = np.zeros(2)
    value = ngmvlvm.ngsm_kernel(z, z, p)
    assert math.isclose(value, 2.0, rel_tol=1e-12)  # alpha sum


def test_gram_is_symmetric_psd():
    p = make_params()
    rng = np.random.default_rng(0)
    x = rng.normal(size=(12, 2))
    k = ngmvlvm.ngsm_gram(x, p)
    assert np.array_equal(k, k.T)
    assert np.linalg.eigvalsh(k).min() >= -1e-8 * np.trace(k)


def test_feature_products_approximate_the_kernel():
    p = make_params()
    rng = np.random.default_rng(1)
    x = rng.normal(size=(8, 2))
    k = ngmvlvm.ngsm_gram(x, p)
    approx = np.zeros_like(k)
    reps = 200
    for seed in range(reps):
        f = ngmvlvm.feature_matrix(x, p, 256, seed)
        approx += f @ f.T
    approx /= reps
    assert np.abs(approx - k).max() < 0.1


def test_train_reconstruct_roundtrip(tmp_path):
    views, latents = ngmvlvm.sample_two_view_s_curve(n=40, m=5, seed=3)
    model = ngmvlvm.train(views, max_iters=150, l=16, seed=3, conv_tol=0.0)
    assert model.trained
    assert len(model.elbo_history) == 150
    assert all(math.isfinite(v) for v in model.elbo_history)
    assert model.elbo_history[-1] > model.elbo_history[0]

    codes = model.latent_mean
    assert codes.shape == (40, 2)
    assert ngmvlvm.r2_alignment(latents, latents) == pytest.approx(1.0)

    recon = ngmvlvm.reconstruct(model, views, 8)
    assert all(r.shape == v.shape for r, v in zip(recon, views))

    path = tmp_path / "model.json"
    model.save(str(path))
    loaded = ngmvlvm.ModelState.load(str(path))
    assert np.array_equal(loaded.latent_mean, codes)


def test_knn_on_separable_blobs():
    rng = np.random.default_rng(5)
    x = rng.normal(scale=0.05, size=(60, 2))
    labels = [int(i % 3) for i in range(60)]
    x += np.array([[5.0 * l, -3.0 * l] for l in labels])
    mean, std, folds = ngmvlvm.knn_cv_accuracy(x, labels, k=1, folds=5, seed=0)
    assert mean == 1.0
    assert len(folds) == 5
