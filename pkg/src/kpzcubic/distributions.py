"""Probability quantities assembled from the Fredholm determinants.

* kpz_multipoint: the KPZ multi-point distribution by trapezoid
  quadrature over circles in the zeta variables.
* periodic_D: the periodic determinant at fixed zeta.
* tail_integral_logdet: log det recovered from the trace of Z_1 blocks
  integrated along the ray x + xi*(1, ..., m).
* decay_scan: |D - 1| along the same ray with a log-linear fit.
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import geometry as geo
from .fredholm import SingularOperatorError, block_decompose, det_id_minus, moments
from .operator import OperatorSpec, build_operator

log = logging.getLogger(__name__)

IMAG_TOL = 1e-6
PLATEAU_TOL = 1e-8
MIN_NODES = 8


class DistributionError(ValueError):
    """Invalid quadrature data or a determinant zero on the integration path."""


@dataclass(frozen=True)
class ZetaQuadrature:
    """Circles |zeta_i| = radii[i] with `nodes` equispaced phases each."""

    radii: tuple = (0.5,)
    nodes: int = 32
    periodic: bool = False

    def __post_init__(self):
        if any(not 0 < r < 1 for r in self.radii):
            raise DistributionError("zeta radii must lie in (0, 1)")
        if self.nodes < MIN_NODES:
            raise DistributionError(f"need at least {MIN_NODES} phase nodes")
        if self.periodic and any(b <= a for a, b in zip(self.radii, self.radii[1:])):
            raise DistributionError("periodic radii must be strictly increasing")

    @classmethod
    def default(cls, m: int, radius: float = 0.5, nodes: int = 32) -> "ZetaQuadrature":
        return cls(radii=(radius,) * max(m - 1, 0), nodes=nodes)

    def points(self):
        """Yield zeta tuples over the product grid of phase nodes."""
        theta = 2 * np.pi * np.arange(self.nodes) / self.nodes
        circles = [r * np.exp(1j * theta) for r in self.radii]
        yield from itertools.product(*circles)


@dataclass(frozen=True)
class MultipointResult:
    value: float
    imag: float
    evaluations: int

    def __float__(self) -> float:
        return self.value


def kpz_multipoint(h, gamma, tau, zq: ZetaQuadrature | None = None, disc=None,
                   workers: int = 1) -> MultipointResult:
    """KPZ fixed point P(H(gamma_i, tau_i) <= h_i for all i), step initial data.

    The contour integral over each circle becomes an average over the
    phase nodes because dzeta/(2 pi i zeta) = dtheta/(2 pi).  With
    workers > 1 the zeta nodes are evaluated in a thread pool; results are
    summed in node order, so the value does not depend on the pool size.
    """
    m = len(h)
    if m < 1:
        raise DistributionError("need at least one point")
    zq = zq or ZetaQuadrature.default(m)
    if len(zq.radii) != m - 1:
        raise DistributionError(f"need {m - 1} zeta radii for m = {m}")
    kw = {} if disc is None else {"disc": disc}
    if m == 1:
        spec = OperatorSpec.from_physical(geo.KPZ, h, gamma, tau, zeta=(), **kw)
        d = det_id_minus(build_operator(spec))
        return MultipointResult(d.real, abs(d.imag), 1)

    def integrand(zeta):
        spec = OperatorSpec.from_physical(geo.KPZ, h, gamma, tau, zeta=zeta, **kw)
        try:
            d = det_id_minus(build_operator(spec))
        except SingularOperatorError as exc:
            raise DistributionError(
                f"I - H is singular at zeta = {zeta}; rerun with a slightly perturbed radius") from exc
        return d / np.prod([1 - z for z in zeta])

    points = list(zq.points())
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(integrand, points))
    else:
        values = [integrand(z) for z in points]
    total = 0j
    for v in values:
        total += v
    count = len(values)
    val = total / count
    if abs(val.imag) > IMAG_TOL:
        log.warning("imaginary part %.2e of the distribution exceeds %.0e", abs(val.imag), IMAG_TOL)
    return MultipointResult(val.real, abs(val.imag), count)


def periodic_spec(h, gamma, tau, zeta, disc=None) -> OperatorSpec:
    kw = {} if disc is None else {"disc": disc}
    return OperatorSpec.from_physical(geo.PERIODIC, h, gamma, tau, zeta=tuple(zeta), **kw)


def periodic_D(h, gamma, tau, zeta, disc=None, check_plateau: bool = False) -> complex:
    """det(I - H^per) on the truncated Bethe system.

    With check_plateau the cutoff is doubled and a warning is logged when
    the value moves by more than 1e-8.
    """
    spec = periodic_spec(h, gamma, tau, zeta, disc)
    op = build_operator(spec)
    d = det_id_minus(op)
    if check_plateau:
        K = op.ns.meta["K"]
        spec2 = replace(spec, disc=replace(spec.disc, K=max(2 * K, K + 1)))
        d2 = det_id_minus(build_operator(spec2))
        if abs(d2 - d) > PLATEAU_TOL:
            log.warning("Bethe cutoff plateau not reached: |D(2K) - D(K)| = %.2e", abs(d2 - d))
    return d


# ------------------------------------------------------------ tail integral

def ray_direction(m: int) -> np.ndarray:
    return np.arange(1, m + 1, dtype=float)


def _ray_spec(spec: OperatorSpec, xi: float) -> OperatorSpec:
    return spec.shifted(dx=xi * ray_direction(spec.m))


def ray_traces(spec: OperatorSpec, xi: float) -> tuple[complex, complex]:
    """(sum_i Tr q_i, sum_i Tr s_i) at x + xi*a with S_i = {i, ..., m}."""
    Z1 = moments(build_operator(_ray_spec(spec, xi))).Z1
    m = spec.m
    tq = ts = 0j
    for i in range(1, m + 1):
        b = block_decompose(Z1, range(i, m + 1))
        tq += np.trace(b.q)
        ts += np.trace(b.s)
    return complex(tq), complex(ts)


@dataclass(frozen=True)
class TailIntegral:
    q_form: complex
    s_form: complex
    direct: complex
    xi_max: float
    tail_bound: float
    evaluations: int

    @property
    def error(self) -> float:
        return max(abs(self.q_form - self.direct), abs(self.s_form - self.direct))


def tail_integral_logdet(spec: OperatorSpec, panel: float = 1.0, order: int = 16,
                         tol: float = 1e-12, xi_cap: float = 60.0) -> TailIntegral:
    """log det from traces integrated along the ray x + xi*(1, ..., m).

    Since d/dx_k log det = -Z_1[k, k], integrating along the ray gives
    log D = int_0^inf sum_k k Z_1[k, k] dxi, which is the q-form with the
    index sets {i, ..., m}; the s-form carries the opposite sign.
    Composite Gauss-Legendre panels are added until the integrand at the
    panel end is below tol.
    """
    gx, gw = np.polynomial.legendre.leggauss(order)
    q_int = s_int = 0j
    a = 0.0
    evals = 0
    last = math.inf
    while True:
        nodes = a + panel * (gx + 1) / 2
        for xi, w in zip(nodes, gw * panel / 2):
            try:
                tq, ts = ray_traces(spec, float(xi))
            except SingularOperatorError as exc:
                raise DistributionError(f"determinant vanishes near xi = {xi:.3f} on the ray") from exc
            q_int += w * tq
            s_int += w * ts
            evals += 1
        a += panel
        tq_end, _ = ray_traces(spec, a)
        last = abs(tq_end)
        if last < tol or a >= xi_cap:
            break
    if last >= tol:
        log.warning("tail integrand %.2e at xi = %.1f is above tolerance", last, a)
    direct = moments(build_operator(spec)).logdet
    return TailIntegral(q_int, -s_int, direct, a, last, evals)


# -------------------------------------------------------------- decay scan

@dataclass(frozen=True)
class DecayScan:
    xi: np.ndarray
    abs_D_minus_1: np.ndarray
    max_Z1: np.ndarray
    slope: float
    intercept: float

    def rows(self):
        return zip(self.xi, self.abs_D_minus_1, self.max_Z1)


def decay_scan(spec: OperatorSpec, xis) -> DecayScan:
    """|D - 1| and max |Z_1| along x + xi*a with a least-squares slope of log|D - 1|."""
    xis = np.asarray(xis, dtype=float)
    dm1, zmax = [], []
    for xi in xis:
        mo = moments(build_operator(_ray_spec(spec, float(xi))))
        dm1.append(abs(mo.det - 1))
        zmax.append(float(np.abs(mo.Z1).max()))
    dm1 = np.array(dm1)
    ok = dm1 > 0
    if ok.sum() < 2:
        raise DistributionError("need at least two nonzero |D - 1| samples for the fit")
    slope, intercept = np.polyfit(xis[ok], np.log(dm1[ok]), 1)
    return DecayScan(xis, dm1, np.array(zmax), float(slope), float(intercept))
