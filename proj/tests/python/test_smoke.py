import math
import os
import subprocess

import numpy as np
import pytest

import pmap


def test_cycle_and_lattice():
    out = pmap.cycle_adjacency_apply(5, np.arange(1.0, 6.0))
    np.testing.assert_array_equal(out, [7, 4, 6, 8, 5])
    np.testing.assert_array_equal(pmap.lattice_apply([3, 3], np.ones(9)), 4 * np.ones(9))
    np.testing.assert_array_equal(pmap.lattice_apply([3, 4], np.ones(12), laplacian=True), np.zeros(12))


def test_kernel_matvec_matches_numpy():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(20, 5))
    v = rng.normal(size=20)
    sigma = 2.0
    d2 = ((x[:, None, :] - x[None, :, :]) ** 2).sum(-1)
    b = np.eye(20) - d2 / (2 * sigma**2)
    got = pmap.kernel_matvec(x, v, sigma=sigma, order=2, norm_terms=True)
    np.testing.assert_allclose(got, b @ (b @ v), rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(pmap.dense_kernel(x, sigma=sigma, order=2, norm_terms=True) @ v, got, rtol=1e-12)


def test_convolved_matvec_identity_window():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(12, 3))
    v = rng.normal(size=12)
    np.testing.assert_allclose(
        pmap.convolved_kernel_matvec(x, v, np.eye(1)), pmap.kernel_matvec(x, v), rtol=1e-14
    )


def test_eigsh_against_numpy():
    rng = np.random.default_rng(2)
    g = rng.normal(size=(80, 40))
    a = g @ g.T / 80
    values, vectors, converged = pmap.eigsh(lambda v: a @ v, 80, k=4)
    assert converged
    np.testing.assert_allclose(values, np.linalg.eigvalsh(a)[-4:], rtol=1e-8)
    assert vectors.shape == (80, 4)
    assert pmap.krylov_budget(1024, 3) == 31


def test_embed_recovers_circle():
    icon = pmap.generate_icon(32, 0)
    assert icon.shape == (32, 32)
    data, angles = pmap.generate_rotated_dataset(icon, 2048, 1)
    run = pmap.embed(data)
    assert run["converged"]
    assert run["embedding"].shape == (2048, 3)
    assert run["eigenvalues"][0] == pytest.approx(1.0, abs=1e-10)
    cv, corr = pmap.circle_metrics(run["embedding"], angles)
    assert cv < 0.05
    assert corr > 0.99


def test_dataset_round_trip(tmp_path):
    x = np.arange(6.0).reshape(2, 3)
    path = str(tmp_path / "x.pmap")
    pmap.save_dataset(path, x)
    np.testing.assert_array_equal(pmap.load_dataset(path), x)
    assert os.path.getsize(path) == 16 + 8 * 6
    with open(path, "r+b") as f:
        f.truncate(20)
    with pytest.raises(pmap.FormatError):
        pmap.load_dataset(path)


def test_errors_map_to_python_types():
    with pytest.raises(ValueError):
        pmap.generate_icon(2)
    with pytest.raises(pmap.DegenerateInput):
        pmap.normalize_rows(np.zeros((2, 2)))
    assert issubclass(pmap.DisconnectedError, pmap.Error)


def test_rotate_half_turn():
    img = np.zeros((3, 3))
    img[0, 1] = 1.0
    out = pmap.rotate_image(img, math.pi)
    assert out[2, 1] == pytest.approx(1.0)


def test_verify_suites():
    result = pmap.verify("lattice")
    assert result == {"lattice": True}


@pytest.mark.skipif("PMAP_CLI" not in os.environ, reason="CLI path not provided")
def test_cli_verify():
    out = subprocess.run([os.environ["PMAP_CLI"], "verify"], capture_output=True, text=True)
    assert out.returncode == 0
    assert "5/5 suites pass" in out.stdout
