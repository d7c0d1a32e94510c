import cmath

import numpy as np
import pytest

from kpzcubic import geometry as geo


def test_m1_has_two_mirror_contours():
    ns = geo.build_kpz_contours(1, spacing=0.5, T=5.0, N=101)
    assert len(ns.meta["specs"]) == 2
    left = np.sort_complex(ns.nodes[ns.side == geo.LEFT])
    right = np.sort_complex(ns.nodes[ns.side == geo.RIGHT])
    np.testing.assert_allclose(np.sort_complex(-left.conj()), right, atol=1e-14)


def test_m3_layout_has_ten_contours_in_order():
    ns = geo.build_kpz_contours(3, spacing=0.5, T=4.0, N=41)
    specs = ns.meta["specs"]
    assert len(specs) == 10
    left = [(c.j, c.branch) for c in specs if c.side == geo.LEFT]
    assert left == [(3, 1), (2, 1), (1, 0), (2, -1), (3, -1)]
    # offsets grow outward from the imaginary axis
    offs = [c.offset for c in specs if c.side == geo.LEFT]
    assert offs == sorted(offs)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_reflection_reverses_orientation(m):
    ns = geo.build_kpz_contours(m, spacing=0.5, T=4.0, N=41)
    cid = ns.meta["contour_id"]
    n = 2 * m - 1
    for k in range(n):
        zl = ns.nodes[cid == k]
        wl = ns.weights[cid == k]
        zr = ns.nodes[cid == k + n]
        wr = ns.weights[cid == k + n]
        # reflection z -> -conj(z) keeps the parameter order (bottom to top)
        np.testing.assert_allclose(-zl.conj(), zr, atol=1e-14)
        # as a map of the contour it reverses orientation: dz -> -conj(dz)
        np.testing.assert_allclose(-wl.conj(), wr, atol=1e-14)


def test_weights_reproduce_airy_integral():
    # Ai(x) = (1/2 pi i) int exp(z^3/3 - x z) dz along an upward right contour
    from scipy.special import airy

    c = geo.ContourSpec(j=1, side=geo.RIGHT, offset=0.2, T=8.0, N=801)
    z, w = c.discretize()
    for x in (-1.0, 0.0, 1.5):
        val = np.sum(np.exp(z**3 / 3 - x * z) * w) / (2j * np.pi)
        assert abs(val - airy(x)[0]) < 1e-10


def test_closed_contour_residue():
    # outer minus inner right contour encloses z = 1.5 counterclockwise
    inner = geo.ContourSpec(j=1, side=geo.RIGHT, offset=0.0, T=8.0, N=801)
    outer = geo.ContourSpec(j=1, side=geo.RIGHT, offset=1.0, T=8.0, N=801)
    f = lambda z: np.exp(z**3 / 3) / (z - 1.5)
    zi, wi = inner.discretize()
    zo, wo = outer.discretize()
    val = np.sum(f(zo) * wo) - np.sum(f(zi) * wi)
    assert abs(val - 2j * np.pi * np.exp(1.5**3 / 3)) < 1e-10


def test_intersecting_contours_rejected():
    with pytest.raises(geo.GeometryError):
        geo.build_kpz_contours(2, spacing=0.0, T=4.0, N=41)


def test_crossing_imaginary_axis_rejected():
    specs = geo.kpz_contour_specs(1, T=4.0, N=41)
    specs[0] = geo.ContourSpec(j=1, side=geo.LEFT, offset=-3.0, T=4.0, N=41)
    with pytest.raises(geo.GeometryError):
        geo.build_kpz_contours(1, specs=specs)


def test_bethe_roots_unit():
    left, right = geo.solve_bethe_roots(np.exp(-0.5), 0)
    np.testing.assert_allclose(right, [1.0], atol=1e-15)
    np.testing.assert_allclose(left, [-1.0], atol=1e-15)


def test_bethe_roots_conjugate_closed_for_real_zeta():
    _, right = geo.solve_bethe_roots(0.4, 6)
    np.testing.assert_allclose(np.sort_complex(right), np.sort_complex(right.conj()), atol=1e-13)


def test_bethe_residual_k1():
    s = cmath.sqrt(1 - 4j * np.pi)
    assert abs(cmath.exp(-s * s / 2) - np.exp(-0.5)) < 1e-12
    _, right = geo.solve_bethe_roots(np.exp(-0.5), 1)
    assert np.min(np.abs(right - s)) < 1e-14


def test_bethe_residual_uniform():
    left, right = geo.solve_bethe_roots(0.3 + 0.2j, 30)
    roots = np.concatenate([left, right])
    assert np.all(right.real > 0) and np.all(left.real < 0)
    assert np.abs(np.exp(-roots**2 / 2) - (0.3 + 0.2j)).max() < 1e-12


@pytest.mark.parametrize("zeta", [0.0, 1.0, 1.5])
def test_bethe_rejects_bad_modulus(zeta):
    with pytest.raises(geo.GeometryError):
        geo.solve_bethe_roots(zeta, 2)


def test_bethe_rejects_root_on_axis():
    # zeta = 1 * exp(0) makes s = 0 for k = 0; pick |zeta| just under 1 on the real axis
    with pytest.raises(geo.GeometryError):
        geo.solve_bethe_roots(1 - 1e-18, 0)


def test_periodic_m1_k0():
    ns = geo.build_periodic_sets([np.exp(-0.5)], 0)
    order = np.argsort(ns.nodes.real)
    np.testing.assert_allclose(ns.nodes[order], [-1, 1], atol=1e-15)
    assert list(ns.ell[order]) == [1, 2]
    np.testing.assert_array_equal(ns.weights, 1)


@pytest.mark.parametrize("m,K", [(1, 0), (1, 3), (2, 2), (3, 4)])
def test_periodic_node_count(m, K):
    zetas = np.linspace(0.2, 0.7, m)
    ns = geo.build_periodic_sets(zetas, K)
    assert len(ns) == 2 * m * (2 * K + 1)


def test_periodic_m2_omega12_on_right():
    ns = geo.build_periodic_sets([0.3, 0.6], 2)
    assert np.all(ns.nodes[ns.component(1, 2)].real > 0)
    assert np.all(ns.nodes[ns.component(1, 1)].real < 0)


def test_periodic_requires_increasing_moduli():
    with pytest.raises(geo.GeometryError):
        geo.build_periodic_sets([0.6, 0.3], 2)
    with pytest.raises(geo.GeometryError):
        geo.build_periodic_sets([0.5, -0.5], 2)


def test_node_csv_roundtrip():
    ns = geo.build_kpz_contours(2, spacing=0.5, T=3.0, N=11)
    back = geo.NodeSystem.from_csv(ns.to_csv(), ns.model, ns.m)
    np.testing.assert_array_equal(back.nodes, ns.nodes)
    np.testing.assert_array_equal(back.weights, ns.weights)
    np.testing.assert_array_equal(back.ell, ns.ell)
