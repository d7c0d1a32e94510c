import logging
from dataclasses import replace

import numpy as np
import pytest

from kpzcubic import distributions as ds
from kpzcubic import geometry as geo
from kpzcubic.fredholm import SingularOperatorError, det_id_minus, khat_det, moments
from kpzcubic.operator import Discretization, OperatorSpec, build_operator, khat_kernels
from kpzcubic.painleve import tw_argument, tw_gue

COARSE = ds.ZetaQuadrature((0.5,), 16)


# -------------------------------------------------------- zeta quadrature

def test_zeta_quadrature_validation():
    with pytest.raises(ds.DistributionError):
        ds.ZetaQuadrature((1.0,))
    with pytest.raises(ds.DistributionError):
        ds.ZetaQuadrature((0.5,), nodes=4)
    with pytest.raises(ds.DistributionError):
        ds.ZetaQuadrature((0.5, 0.5), periodic=True)
    assert ds.ZetaQuadrature.default(3).radii == (0.5, 0.5)


def test_zeta_points_product_grid():
    zq = ds.ZetaQuadrature((0.3, 0.6), 8)
    pts = list(zq.points())
    assert len(pts) == 64
    assert {round(abs(p[0]), 12) for p in pts} == {0.3}


def test_radius_count_must_match():
    with pytest.raises(ds.DistributionError):
        ds.kpz_multipoint((0.0, 1.0), (0.0, 0.0), (1.0, 2.0), ds.ZetaQuadrature((0.5, 0.4)))


# --------------------------------------------------------------- multipoint

@pytest.mark.parametrize("h,g,tau", [(-1.0, 0.0, 1.0), (0.5, 0.5, 2.0)])
def test_one_point_is_tracy_widom(h, g, tau):
    r = ds.kpz_multipoint((h,), (g,), (tau,))
    assert abs(r.value - tw_gue(tw_argument(h, g, tau))) < 1e-6
    assert r.evaluations == 1


def test_two_point_in_unit_interval_and_monotone():
    hs = (-1.0, 0.0, 1.0)
    vals = np.array([[ds.kpz_multipoint((a, b), (0.0, 0.3), (1.0, 2.0), COARSE).value for b in hs]
                     for a in hs])
    assert np.all((vals >= 0) & (vals <= 1))
    assert np.all(np.diff(vals, axis=0) >= -1e-8)
    assert np.all(np.diff(vals, axis=1) >= -1e-8)


def test_two_point_bounded_by_marginals():
    h, g, tau = (-0.5, 0.5), (0.0, 0.3), (1.0, 2.0)
    joint = ds.kpz_multipoint(h, g, tau).value
    marg = [tw_gue(tw_argument(*a)) for a in zip(h, g, tau)]
    assert joint <= min(marg) + 1e-8
    assert joint >= sum(marg) - 1 - 1e-8


def test_large_second_height_gives_marginal():
    r = ds.kpz_multipoint((-0.5, 8.0), (0.0, 0.3), (1.0, 2.0))
    assert abs(r.value - tw_gue(tw_argument(-0.5, 0.0, 1.0))) < 1e-6


def test_large_heights_give_one():
    assert abs(ds.kpz_multipoint((7.0, 8.0), (0.0, 0.3), (1.0, 2.0)).value - 1) < 1e-6


def test_imaginary_part_small():
    r = ds.kpz_multipoint((-0.5, 0.5), (0.0, 0.3), (1.0, 2.0))
    assert r.imag < 1e-6


def test_thread_pool_is_deterministic():
    args = ((-0.5, 0.5), (0.0, 0.3), (1.0, 2.0), COARSE)
    a = ds.kpz_multipoint(*args, workers=1)
    b = ds.kpz_multipoint(*args, workers=3)
    assert a.value == b.value and a.imag == b.imag


def test_singular_node_gives_rerun_advice(monkeypatch):
    def boom(op, check=True):
        raise SingularOperatorError("singular")

    monkeypatch.setattr(ds, "det_id_minus", boom)
    with pytest.raises(ds.DistributionError, match="perturbed radius"):
        ds.kpz_multipoint((0.0, 1.0), (0.0, 0.0), (1.0, 2.0), COARSE)


# ---------------------------------------------------------------- periodic

def test_periodic_cutoff_plateau():
    h, g, tau, z = (-1.0, 1.5), (0.0, 0.3), (1.0, 2.0), (0.3, 0.6)
    spec = ds.periodic_spec(h, g, tau, z)
    op = build_operator(spec)
    K = op.ns.meta["K"]
    d2 = ds.periodic_D(h, g, tau, z, disc=Discretization(K=2 * K))
    assert abs(det_id_minus(op) - d2) < 1e-8


def test_periodic_plateau_warning(caplog):
    with caplog.at_level(logging.WARNING, logger="kpzcubic.distributions"):
        ds.periodic_D((-1.0, 1.5), (0.0, 0.3), (1.0, 2.0), (0.3, 0.6), disc=Discretization(K=0),
                      check_plateau=True)
    assert "plateau" in caplog.text


def test_periodic_equals_khat():
    spec = ds.periodic_spec((-1.0, 1.5), (0.0, 0.3), (1.0, 2.0), (0.3, 0.6))
    op = build_operator(spec)
    K1, K2, _, _ = khat_kernels(spec, op.ns)
    d = ds.periodic_D((-1.0, 1.5), (0.0, 0.3), (1.0, 2.0), (0.3, 0.6))
    assert abs(khat_det(K1, K2) - d) < 1e-8


def test_periodic_decay_along_ray():
    spec = ds.periodic_spec((-1.0, 1.5), (0.0, 0.3), (1.0, 2.0), (0.3, 0.6))
    sc = ds.decay_scan(spec, np.arange(0.0, 5.0))
    assert sc.slope < -0.1
    assert np.all(np.diff(sc.abs_D_minus_1) < 0)


# ------------------------------------------------------------ tail integral

def kpz1():
    return OperatorSpec.from_physical(geo.KPZ, (0.2,), (0.3,), (1.0,))


def kpz2():
    return OperatorSpec.from_physical(geo.KPZ, (-0.5, 0.3), (0.0, 0.3), (1.0, 2.0))


@pytest.mark.parametrize("spec", [kpz1(), kpz2()], ids=["m1", "m2"])
def test_tail_integral_matches_logdet(spec):
    ti = ds.tail_integral_logdet(spec)
    assert abs(ti.q_form - ti.direct) < 1e-4
    assert abs(ti.s_form - ti.direct) < 1e-4
    assert ti.tail_bound < 1e-12
    assert ti.error == max(abs(ti.q_form - ti.direct), abs(ti.s_form - ti.direct))


def test_tail_integral_shift_invariance():
    spec = kpz2()
    xi0 = 0.7
    shifted = spec.shifted(dx=xi0 * ds.ray_direction(2))
    ti = ds.tail_integral_logdet(shifted)
    assert abs(ti.q_form - moments(build_operator(shifted)).logdet) < 1e-4


def test_trace_forms_are_opposite():
    tq, ts = ds.ray_traces(kpz2(), 0.3)
    assert abs(tq + ts) < 1e-8


def test_zero_on_ray_is_rejected(monkeypatch):
    def boom(spec, xi):
        raise SingularOperatorError("singular")

    monkeypatch.setattr(ds, "ray_traces", boom)
    with pytest.raises(ds.DistributionError, match="ray"):
        ds.tail_integral_logdet(kpz1())


# ------------------------------------------------------------- decay scans

@pytest.mark.parametrize("spec", [
    kpz1(),
    kpz2(),
    OperatorSpec.from_physical(geo.PERIODIC, (0.2,), (0.3,), (1.0,)),
], ids=["kpz1", "kpz2", "periodic1"])
def test_decay_slope_negative(spec):
    sc = ds.decay_scan(spec, np.arange(0.0, 5.0))
    assert sc.slope < -0.1
    assert len(list(sc.rows())) == 5


def test_decay_scan_needs_two_samples():
    with pytest.raises(ds.DistributionError):
        ds.decay_scan(kpz1(), [0.0])
