import os
import subprocess
import sys

import numpy as np
import pytest

from kpzcubic import _kernels_py, kernels

compiled = pytest.importorskip("kpzcubic._kernels") if kernels.BACKEND == "cython" else None


def sample(n=40, r=3, seed=1):
    rng = np.random.default_rng(seed)
    nodes = rng.normal(size=n) + 1j * rng.normal(size=n)
    w = rng.normal(size=n) + 1j * rng.normal(size=n)
    f = rng.normal(size=(n, r)) + 1j * rng.normal(size=(n, r))
    g = rng.normal(size=(n, r)) + 1j * rng.normal(size=(n, r))
    return nodes, w, f, g


def test_weighted_kernel_reference():
    nodes, w, f, g = sample(6)
    mat = kernels.weighted_kernel(nodes, w, f, g)
    for a in range(6):
        for b in range(6):
            want = 0 if a == b else f[a] @ g[b] / (nodes[a] - nodes[b]) * w[b]
            assert abs(mat[a, b] - want) < 1e-12 * (1 + abs(want))


@pytest.mark.skipif(compiled is None, reason="compiled extension not built")
def test_backends_agree():
    nodes, w, f, g = sample()
    np.testing.assert_allclose(compiled.weighted_kernel(nodes, w, f, g),
                               _kernels_py.weighted_kernel(nodes, w, f, g), rtol=1e-13, atol=1e-13)
    z = np.array([0.3 + 0.1j, -1.0 + 2.0j, 2.5 - 0.7j])
    y = np.linspace(-5, 5, 301)
    vals = np.exp(-y ** 2)
    np.testing.assert_allclose(compiled.cauchy_sum(z, y, vals), _kernels_py.cauchy_sum(z, y, vals),
                               rtol=1e-13)


def test_cauchy_sum_loop():
    z = np.array([[0.5 + 0.2j, 1.0 - 1.0j]])
    y = np.array([-1.0, 0.0, 2.0])
    vals = np.array([1.0, 2.0j, -0.5])
    got = kernels.cauchy_sum(z, y, vals)
    want = [[sum(v / (1j * yk - zz) for v, yk in zip(vals, y)) for zz in row] for row in z]
    assert got.shape == z.shape
    np.testing.assert_allclose(got, want, rtol=1e-14)


def test_backend_env_override():
    env = dict(os.environ, KPZCUBIC_BACKEND="python")
    res = subprocess.run([sys.executable, "-c", "from kpzcubic import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert res.stdout.strip() == "python"
    assert kernels.BACKEND in ("python", "cython")
