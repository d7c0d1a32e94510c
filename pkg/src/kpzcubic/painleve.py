"""Independent oracles: Airy function, Tracy-Widom GUE, Hastings-McLeod.

The Tracy-Widom determinant here uses the Airy kernel on (s, inf) with
a double-exponential change of variables.  It shares no code with the
contour operators, so it can serve as an oracle for them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg as la
from scipy.special import gamma as gamma_fn

AI0 = 3 ** (-2 / 3) / gamma_fn(2 / 3)
AIP0 = -(3 ** (-1 / 3)) / gamma_fn(1 / 3)

SERIES_RADIUS = 2.5
ASYMPTOTIC_X = 9.0


class OracleError(ArithmeticError):
    """Oracle accuracy could not be guaranteed."""


# ------------------------------------------------------------------ Airy

def _airy_series(z):
    """Maclaurin series for (Ai, Ai'); accurate for |z| <= SERIES_RADIUS."""
    z = np.asarray(z, dtype=complex)
    z3 = z**3
    # f = sum 3^k (1/3)_k z^{3k}/(3k)!, g = sum 3^k (2/3)_k z^{3k+1}/(3k+1)!
    f = np.ones_like(z)
    g = z.copy()
    fp = np.zeros_like(z)
    gp = np.ones_like(z)
    tf = np.ones_like(z)
    tg = z.copy()
    for k in range(1, 60):
        tf = tf * z3 / ((3 * k - 1) * (3 * k))
        tg = tg * z3 / ((3 * k) * (3 * k + 1))
        f = f + tf
        g = g + tg
        fp = fp + tf * (3 * k) / np.where(z == 0, 1, z)
        gp = gp + tg * (3 * k + 1) / np.where(z == 0, 1, z)
        if np.all(np.abs(tf) + np.abs(tg) < 1e-18 * (np.abs(f) + np.abs(g))):
            break
    ai = AI0 * f + AIP0 * g
    aip = AI0 * fp + AIP0 * gp
    return ai, aip


def _airy_contour(x, n=401):
    """(Ai, Ai') for real x from a steepest-descent contour integral.

    Ai(x) = (1/2 pi i) int exp(t^3/3 - x t) dt along a hyperbola with
    asymptotes at angles +-pi/3 and vertex at the saddle sqrt(x) (x > 0)
    or at 0 (x <= 0).  The integrand decays doubly exponentially in the
    hyperbola parameter, so the trapezoid rule converges geometrically.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    ai = np.empty(x.shape, dtype=complex)
    aip = np.empty(x.shape, dtype=complex)
    for k, xv in enumerate(x):
        a = math.sqrt(xv) if xv > 0 else 0.0
        r = max(1.0, math.sqrt(abs(xv)))
        big = 60.0 + abs(xv) ** 1.5
        U = math.asinh(2 * (3 * big) ** (1 / 3) / r) + 1.0
        u = np.linspace(-U, U, n)
        h = u[1] - u[0]
        t = a + 0.5 * r * (np.cosh(u) - 1) + 1j * (math.sqrt(3) / 2) * r * np.sinh(u)
        dt = 0.5 * r * np.sinh(u) + 1j * (math.sqrt(3) / 2) * r * np.cosh(u)
        e = np.exp(t**3 / 3 - xv * t) * dt * h / (2j * np.pi)
        ai[k] = e.sum()
        aip[k] = (-t * e).sum()
    return ai.real, aip.real


def _airy_asymptotic(x):
    """Large positive x expansion of (Ai, Ai')."""
    x = np.asarray(x, dtype=float)
    zeta = 2 / 3 * x**1.5
    su = np.zeros_like(x)
    sv = np.zeros_like(x)
    uk, vk = 1.0, 1.0
    for k in range(0, 30):
        if k > 0:
            uk = uk * (6 * k - 5) * (6 * k - 3) * (6 * k - 1) / ((2 * k - 1) * 216 * k)
            vk = -uk * (6 * k + 1) / (6 * k - 1)
        term = (-1) ** k / zeta**k
        su = su + uk * term
        sv = sv + vk * term
    pre = np.exp(-zeta) / (2 * math.sqrt(math.pi))
    return pre * x ** (-0.25) * su, -pre * x**0.25 * sv


def airy(z, derivative: bool = False):
    """Ai(z) (or (Ai, Ai') when derivative=True).

    Series for |z| <= 2.5; for real z outside that disc a contour
    quadrature, switching to the asymptotic expansion for x >= 9.
    Complex arguments are supported inside the series disc only.
    """
    z = np.asarray(z)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    if np.iscomplexobj(z) and np.any(np.abs(z.imag) > 0):
        if np.any(np.abs(z) > SERIES_RADIUS):
            raise ValueError("complex Airy arguments are supported only for |z| <= 2.5")
        ai, aip = _airy_series(z)
    else:
        x = z.real.astype(float)
        ai = np.empty(x.shape)
        aip = np.empty(x.shape)
        small = np.abs(x) <= SERIES_RADIUS
        asym = x >= ASYMPTOTIC_X
        mid = ~small & ~asym
        if np.any(small):
            s_ai, s_aip = _airy_series(x[small])
            ai[small], aip[small] = s_ai.real, s_aip.real
        if np.any(mid):
            ai[mid], aip[mid] = _airy_contour(x[mid])
        if np.any(asym):
            ai[asym], aip[asym] = _airy_asymptotic(x[asym])
    if scalar:
        ai, aip = ai[0], aip[0]
    return (ai, aip) if derivative else ai


# ---------------------------------------------------------- Tracy-Widom

@dataclass(frozen=True)
class AiryNystrom:
    """Airy-kernel Nystrom data on (s, inf) with x = s + exp(pi/2 sinh v)."""

    s: float
    x: np.ndarray
    w: np.ndarray
    ai: np.ndarray
    aip: np.ndarray
    kernel: np.ndarray


def airy_kernel(x, y, ai_x, aip_x, ai_y, aip_y):
    X, Y = np.meshgrid(x, y, indexing="ij")
    num = np.outer(ai_x, aip_y) - np.outer(aip_x, ai_y)
    with np.errstate(divide="ignore", invalid="ignore"):
        K = num / (X - Y)
    close = np.isclose(X, Y, rtol=0, atol=1e-13)
    if np.any(close):
        diag = np.broadcast_to((aip_x**2 - x * ai_x**2)[:, None], K.shape)
        K = np.where(close, diag, K)
    return K


@lru_cache(maxsize=512)
def _nystrom(s: float, h: float = 0.05) -> AiryNystrom:
    # v range: lower end where x - s < 1e-40, upper end where x - s > 16 - s
    vlo = -math.asinh(2 / math.pi * 92)
    vhi = math.asinh(2 / math.pi * math.log(max(16.0 - s, 2.0)))
    n = int(math.ceil((vhi - vlo) / h))
    v = np.linspace(vlo, vhi, n + 1)
    hv = v[1] - v[0]
    e = np.exp(math.pi / 2 * np.sinh(v))
    x = s + e
    w = hv * math.pi / 2 * np.cosh(v) * e
    ai, aip = airy(x, derivative=True)
    K = airy_kernel(x, x, ai, aip, ai, aip)
    return AiryNystrom(s, x, w, ai, aip, K)


def tw_gue(s: float) -> float:
    """F_2(s) = det(I - K_Airy) on L^2(s, inf)."""
    if not -12 <= s <= 16:
        raise OracleError("tw_gue supports s in [-12, 16]")
    if s >= 16:
        return 1.0
    d = _nystrom(float(s))
    sw = np.sqrt(d.w)
    A = np.eye(len(d.x)) - sw[:, None] * d.kernel * sw[None, :]
    sign, logdet = np.linalg.slogdet(A)
    return float(sign * math.exp(logdet))


def _resolvent_parts(s: float):
    d = _nystrom(float(s))
    sw = np.sqrt(d.w)
    A = np.eye(len(d.x)) - sw[:, None] * d.kernel * sw[None, :]
    lu = la.lu_factor(A)
    ai_s, aip_s = airy(np.array([float(s)]), derivative=True)
    Ks = airy_kernel(np.array([float(s)]), d.x, ai_s, aip_s, d.ai, d.aip)[0]
    return d, sw, lu, ai_s[0], aip_s[0], Ks


def hastings_mcleod(xi: float) -> float:
    """u(xi) = ((I - K_xi)^{-1} Ai)(xi) on L^2(xi, inf), Nystrom interpolated."""
    if not -8 <= xi <= 8:
        raise OracleError("hastings_mcleod supports xi in [-8, 8]")
    d, sw, lu, ai_s, _, Ks = _resolvent_parts(xi)
    q = la.lu_solve(lu, sw * d.ai) / sw
    return float(ai_s + (Ks * d.w) @ q)


def log_tw_derivative(s: float) -> float:
    """(log F_2)'(s) = R(s, s), the resolvent kernel on the diagonal."""
    d, sw, lu, ai_s, aip_s, Ks = _resolvent_parts(s)
    Kss = aip_s**2 - s * ai_s**2
    rho = la.lu_solve(lu, sw * Ks) / sw
    return float(Kss + (Ks * d.w) @ rho)


def hastings_mcleod_fd(xi: float, step: float = 0.01) -> float:
    """u(xi) = sqrt(-(log F_2)''(xi)) by central differences; a cross-check."""
    lf = [math.log(tw_gue(xi + k * step)) for k in (-2, -1, 0, 1, 2)]
    d2 = (-lf[0] + 16 * lf[1] - 30 * lf[2] + 16 * lf[3] - lf[4]) / (12 * step**2)
    if d2 > 1e-9:
        raise OracleError(f"negative radicand {-d2:.2e} in Hastings-McLeod FD")
    return math.sqrt(max(-d2, 0.0))


@dataclass(frozen=True)
class OracleTable:
    xi: np.ndarray
    F2: np.ndarray
    u: np.ndarray
    dlogF2: np.ndarray

    def rows(self):
        return zip(self.xi, self.F2, self.u, self.dlogF2)


def oracle_table(xi) -> OracleTable:
    xi = np.asarray(xi, dtype=float)
    return OracleTable(
        xi=xi,
        F2=np.array([tw_gue(v) for v in xi]),
        u=np.array([hastings_mcleod(v) for v in xi]),
        dlogF2=np.array([log_tw_derivative(v) for v in xi]),
    )


def selfsimilar_reference(t: float, y: float, x: float) -> tuple[float, float]:
    """(pr, q) for m = 1 from the Hastings-McLeod function.

    pr = -(-3t)^(-2/3) u(xi)^2 and q = -(-3t)^(-1/3) (log F_2)'(xi) with
    xi = x (-3t)^(-1/3) + y^2 (-3t)^(-4/3).
    """
    if t >= 0:
        raise OracleError("self-similar reference needs t < 0")
    T = -3 * t
    xi = x * T ** (-1 / 3) + y**2 * T ** (-4 / 3)
    u = hastings_mcleod(xi)
    return -(T ** (-2 / 3)) * u**2, -(T ** (-1 / 3)) * log_tw_derivative(xi)


def tw_argument(h: float, gamma: float, tau: float) -> float:
    """Argument of F_2 for the one-point KPZ law."""
    return h * tau ** (-1 / 3) + gamma**2 * tau ** (-4 / 3)
