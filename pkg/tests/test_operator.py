import numpy as np
import pytest
from scipy.integrate import quad

from kpzcubic import geometry as geo
from kpzcubic import operator as opm
from kpzcubic.fredholm import det_id_minus, khat_det, moments
from kpzcubic.operator import Discretization, OperatorError, OperatorSpec, build_operator


def kpz2(**kw):
    return OperatorSpec.from_physical(geo.KPZ, (-0.5, 0.3), (0.0, 0.3), (1.0, 2.0), **kw)


def per2(**kw):
    return OperatorSpec.from_physical(geo.PERIODIC, (-1.0, 1.5), (0.0, 0.3), (1.0, 2.0),
                                      zeta=(0.3, 0.6), **kw)


# ---------------------------------------------------------------- Lambda

def test_lambda_m1():
    l1, l2 = opm.lambda_matrices(1)
    assert l1.tolist() == [[1]] and l2.tolist() == [[1]]


def test_lambda_m2():
    l1, l2 = opm.lambda_matrices(2)
    assert l1.tolist() == [[1, 1], [0, 0]]
    assert l2.tolist() == [[1, 0], [0, 1]]


def test_lambda_m3():
    U = [[1, 1], [0, 0]]
    l1, l2 = opm.lambda_matrices(3)
    np.testing.assert_array_equal(l1, [[U[0][0], U[0][1], 0], [U[1][0], U[1][1], 0], [0, 0, 1]])
    np.testing.assert_array_equal(l2, [[1, 0, 0], [0, U[0][0], U[0][1]], [0, U[1][0], U[1][1]]])


# ------------------------------------------------------------- spec checks

def test_from_physical_maps():
    s = kpz2()
    assert s.t == (-1 / 3, -2 / 3) and s.y == (0.0, 0.3) and s.zeta == (0.5,)
    p = per2()
    assert p.y == (0.0, 0.15) and len(p.zeta) == 2
    assert p.physical()["gamma"] == [0.0, 0.3]


@pytest.mark.parametrize("kw", [
    dict(h=(0, 0), gamma=(0, 0), tau=(2.0, 1.0)),
    dict(h=(0, 0), gamma=(0.3, 0.0), tau=(1.0, 1.0)),
    dict(h=(0, 0), gamma=(0, 0), tau=(0.0, 1.0)),
    dict(h=(0, 0), gamma=(0,), tau=(1.0, 2.0)),
])
def test_invalid_kpz_specs(kw):
    with pytest.raises(OperatorError):
        OperatorSpec.from_physical(geo.KPZ, kw["h"], kw["gamma"], kw["tau"])


def test_kpz_zeta_count_and_modulus():
    with pytest.raises(OperatorError):
        kpz2(zeta=(0.5, 0.2))
    with pytest.raises(OperatorError):
        kpz2(zeta=(1.0,))


def test_periodic_equal_time_needs_increasing_h():
    with pytest.raises(OperatorError):
        OperatorSpec.from_physical(geo.PERIODIC, (1.0, 0.0), (0, 0), (1.0, 1.0), zeta=(0.3, 0.6))


# ------------------------------------------------------------------ A, B

def test_kpz_Q_odd_first():
    assert opm.kpz_Q(1, 1, (0.5,), 2) == pytest.approx(-0.5)


def test_kpz_P_minus_branch():
    assert opm.kpz_P(2, -1, (0.5,)) == pytest.approx(-1 / (2j * np.pi))
    assert opm.kpz_P(2, 1, (0.5,)) == pytest.approx(1 / (2j * np.pi * 0.5))


def test_kpz_Q_last_uses_zero_convention():
    assert opm.kpz_Q(2, 2, (0.5,), 2) == pytest.approx(1.0)


def test_kpz_AB_product():
    A, B = opm.kpz_AB(1, 1, 0, (0.5,), 2)
    assert A == 1
    assert B == pytest.approx(-0.5 / (2j * np.pi))


def test_kpz_P_rejects_zeta_one():
    with pytest.raises(OperatorError):
        opm.kpz_P(2, 1, (1.0,))


# --------------------------------------------------------------- H factor

def test_H_factor_trivial_zeta():
    z = np.array([0.5 + 1j, -2.0])
    np.testing.assert_array_equal(opm.periodic_H_factor(z, 0.0), 1)


def test_H_factor_even():
    z = np.array([0.7 + 0.4j, 1.3 - 2.0j, 3.0 + 0.1j])
    a = opm.periodic_H_factor(z, 0.6)
    b = opm.periodic_H_factor(-z, 0.6)
    assert np.abs(a - b).max() < 1e-10


def test_H_factor_against_adaptive_quadrature():
    zeta = 0.6 - 0.2j
    for z in (-0.7 + 0.4j, -1.5 - 2.0j):
        def part(y, k):
            v = np.log(1 - zeta * np.exp(-y * y / 2)) / (1j * y - z)
            return v.real if k == 0 else v.imag
        s = quad(part, -np.inf, np.inf, args=(0,), epsabs=1e-14)[0] \
            + 1j * quad(part, -np.inf, np.inf, args=(1,), epsabs=1e-14)[0]
        ref = np.exp(-1j * s)
        assert abs(opm.periodic_H_factor(np.array([z]), zeta)[0] - ref) < 1e-10


def test_H_factor_decay():
    # |H - 1| ~ |C| / |z| with C = int log(1 - zeta exp(-y^2/2)) dy
    for zeta in (0.6, 0.1, 0.01):
        C = quad(lambda y: np.log(1 - zeta * np.exp(-y * y / 2)), -np.inf, np.inf)[0]
        radii = np.array([5.0, 10.0, 20.0, 50.0, 200.0])
        vals = np.abs(opm.periodic_H_factor(radii * np.exp(0.3j), zeta) - 1)
        assert np.all(np.diff(vals) < 0)
        assert abs(vals[-1] * radii[-1] / abs(C) - 1) < 1e-2
    # the 1e-3 level at |z| = 50 is reached once |zeta| is small
    assert abs(opm.periodic_H_factor(np.array([50j + 1.0]), 0.01)[0] - 1) < 1e-3


def test_H_factor_rejects_axis():
    with pytest.raises(OperatorError):
        opm.periodic_H_factor(np.array([1e-9 + 1j]), 0.5)


# --------------------------------------------------------------- f and g

@pytest.mark.parametrize("spec", [kpz2(), per2()], ids=["kpz", "periodic"])
def test_fg_orthogonal_exactly(spec):
    op = build_operator(spec)
    assert np.all(np.einsum("ik,ik->i", op.f, op.g) == 0)


def test_ray_shift_is_a_scalar_factor():
    spec = kpz2()
    ns = opm.build_nodes(spec)
    xi = 0.4
    f0, g0 = opm.assemble_fg(ns, spec)
    f1, g1 = opm.assemble_fg(ns, spec.shifted(dx=(xi, 2 * xi)))
    rf = np.sum(f1, axis=1) / np.sum(f0, axis=1)
    rg = np.sum(g1, axis=1) / np.sum(g0, axis=1)
    np.testing.assert_allclose(rf, rg, rtol=1e-12)
    # the factor is exp(+-xi z / 2) with the sign fixed by the component
    z = ns.nodes
    ok = np.isclose(rf, np.exp(xi * z / 2), rtol=1e-12) | np.isclose(rf, np.exp(-xi * z / 2), rtol=1e-12)
    assert ok.all()
    np.testing.assert_allclose(f1 * g1.sum(1)[:, None], f0 * g0.sum(1)[:, None] * rf[:, None] ** 2,
                               rtol=1e-10, atol=1e-300)


def test_zero_parameters_give_bare_structure():
    spec = OperatorSpec(model=geo.KPZ, x=(0.0,), y=(0.0,), t=(0.0,))
    ns = geo.build_kpz_contours(1, spacing=0.5, T=2.0, N=5)
    f, g = opm.assemble_fg(ns, spec)
    A, B = opm.node_AB(spec, ns)
    left = ns.ell == 1
    np.testing.assert_array_equal(f[left], np.column_stack([A[left], 0 * A[left]]))
    np.testing.assert_array_equal(g[left], np.column_stack([0 * B[left], B[left]]))
    np.testing.assert_array_equal(f[~left], np.column_stack([0 * A[~left], A[~left]]))
    np.testing.assert_array_equal(g[~left], np.column_stack([B[~left], 0 * B[~left]]))


def test_exponent_overflow_names_node():
    spec = kpz2(disc=Discretization(exp_bound=0.5))
    with pytest.raises(OperatorError, match="node"):
        build_operator(spec)


@pytest.mark.parametrize("spec", [
    OperatorSpec.from_physical(geo.KPZ, (0.2,), (0.3,), (1.0,)),
    # the raw form is ill-conditioned on long contours; truncate for m = 2
    kpz2(disc=Discretization(T=2.0)),
    OperatorSpec.from_physical(geo.PERIODIC, (0.2,), (0.3,), (1.0,)),
], ids=["kpz1", "kpz2", "periodic1"])
def test_raw_and_balanced_agree(spec):
    a = moments(build_operator(spec, balanced=True))
    ns = build_operator(spec).ns
    b = moments(build_operator(spec, ns=ns, balanced=False))
    assert abs(a.det - b.det) < 1e-10
    for za, zb in ((a.Z1, b.Z1), (a.Z2, b.Z2), (a.Z3, b.Z3)):
        assert np.abs(za - zb).max() < 1e-10 * max(1.0, np.abs(za).max())


# ---------------------------------------------------------- kernel matrix

def test_kernel_numerator_recomputed():
    op = build_operator(kpz2())
    K = op.kernel()
    u = op.nodes
    rng = np.random.default_rng(1)
    for a, b in rng.integers(0, len(u), size=(50, 2)):
        if a == b:
            assert K[a, b] == 0
            continue
        num = sum(op.f[a, k] * op.g[b, k] for k in range(op.f.shape[1]))
        assert abs(K[a, b] * (u[a] - u[b]) - num) <= 1e-14 * max(abs(num), 1e-300) + 1e-300


@pytest.mark.parametrize("spec", [kpz2(), per2()], ids=["kpz", "periodic"])
def test_same_omega_blocks_vanish(spec):
    op = build_operator(spec)
    for ell in (1, 2):
        idx = np.where(op.ns.ell == ell)[0]
        assert np.all(op.matrix[np.ix_(idx, idx)] == 0)


def test_single_node_kernel():
    ns = geo.NodeSystem(np.array([1.0 + 0j]), np.array([1.0 + 0j]), np.array([1]), np.array([1]),
                        np.array([1]), np.array([0]), geo.KPZ, 1)
    mat = opm.kernel_matrix(np.ones((1, 2)), np.ones((1, 2)), ns)
    assert mat.shape == (1, 1) and mat[0, 0] == 0


def test_duplicate_nodes_rejected():
    z = np.array([1.0 + 0j, 1.0 + 0j])
    ns = geo.NodeSystem(z, np.ones(2, complex), np.array([1, 2]), np.array([1, 1]),
                        np.array([1, 1]), np.zeros(2, int), geo.KPZ, 1)
    with pytest.raises(OperatorError):
        opm.kernel_matrix(np.ones((2, 2)), np.ones((2, 2)), ns)


# ----------------------------------------------------------------- K-hat

def test_khat_m1_selector_is_diagonal_family():
    spec = OperatorSpec.from_physical(geo.KPZ, (0.2,), (0.3,), (1.0,))
    op = build_operator(spec)
    K1, K2, idx1, idx2 = opm.khat_kernels(spec, op.ns)
    assert K1.shape == (len(idx1), len(idx2)) and K2.shape == (len(idx2), len(idx1))
    assert set(op.ns.ell[idx1]) == {1} and set(op.ns.ell[idx2]) == {2}


@pytest.mark.parametrize("spec", [kpz2(), per2()], ids=["kpz", "periodic"])
def test_khat_matches_H(spec):
    op = build_operator(spec)
    K1, K2, _, _ = opm.khat_kernels(spec, op.ns)
    assert abs(khat_det(K1, K2) - det_id_minus(op)) < 1e-8


def test_dump_contains_kernel():
    op = build_operator(kpz2())
    d = op.dump()
    assert set(d) == {"nodes", "weights", "f", "g", "kernel"}
    np.testing.assert_allclose(d["kernel"] * d["weights"][None, :], op.matrix)
