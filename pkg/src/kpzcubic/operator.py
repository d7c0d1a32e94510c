"""Vector functions f, g and kernel matrices of the cubic integrable operators.

Index conventions (1-based, as in the math):

* o(j) = j for odd j, j-1 for even j
* e(j) = j for even j, j-1 for odd j, where e(1) = 0 stands for the
  extra (m+1)-th slot whose cubic exponent is identically zero.

In 0-based storage the slot for index k >= 1 is k-1 and slot 0 maps to m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import geometry as geo
from .kernels import cauchy_sum, weighted_kernel

EXP_BOUND = 700.0
TAIL_TOL = 1e-14


class OperatorError(ValueError):
    """Invalid operator parameters (ordering, zeta range, overflow, ...)."""


# ---------------------------------------------------------------- indices

def o_index(j: int) -> int:
    return j if j % 2 == 1 else j - 1


def e_index(j: int) -> int:
    return j if j % 2 == 0 else j - 1


def slot(k: int, m: int) -> int:
    """0-based column of the 1-based index k, with k = 0 meaning slot m+1."""
    return m if k == 0 else k - 1


def lambda_matrices(m: int) -> tuple[np.ndarray, np.ndarray]:
    """The 0/1 matrices Lambda_1, Lambda_2.

    Column j of Lambda_1 is e_{o(j)}; column j of Lambda_2 is e_{e(j)}
    except for j = 1, whose image lives in the extra slot.
    """
    if m < 1:
        raise OperatorError("m must be >= 1")
    l1 = np.zeros((m, m), dtype=int)
    l2 = np.zeros((m, m), dtype=int)
    for j in range(1, m + 1):
        l1[o_index(j) - 1, j - 1] = 1
        if j > 1:
            l2[e_index(j) - 1, j - 1] = 1
    l2[0, 0] = 1
    return l1, l2


def unit_diag(i: int, m: int) -> np.ndarray:
    """E_i: (m+1)x(m+1) matrix with a single 1 at (i, i), 1-based."""
    e = np.zeros((m + 1, m + 1))
    e[i - 1, i - 1] = 1.0
    return e


def indicator(S, m: int) -> np.ndarray:
    """Diagonal projector sum_{i in S} E_i."""
    e = np.zeros((m + 1, m + 1))
    for i in S:
        e[i - 1, i - 1] = 1.0
    return e


def pi_matrix(S, m: int) -> np.ndarray:
    """Permutation putting S first (ascending), then the rest, fixing m+1."""
    S = sorted(set(int(s) for s in S))
    if not S:
        raise OperatorError("index subset must be nonempty")
    if S[0] < 1 or S[-1] > m:
        raise OperatorError(f"subset {S} outside 1..{m}")
    order = S + [i for i in range(1, m + 1) if i not in S] + [m + 1]
    P = np.zeros((m + 1, m + 1))
    for row, col in enumerate(order):
        P[row, col - 1] = 1.0
    return P


# ----------------------------------------------------------------- spec

@dataclass(frozen=True)
class Discretization:
    """Numerical controls shared by both models.

    T, N and K left as None are chosen automatically from the decay of
    the balanced exponential factors.
    """

    p: float = 1.0
    scale: float = 1.0
    spacing: float = 0.5
    slope_left: float = 1.0
    slope_right: float = 1.0
    T: float | None = None
    N: int | None = None
    step: float = 0.1
    K: int | None = None
    tail_tol: float = TAIL_TOL
    h_step: float = 0.05
    balanced: bool = True
    exp_bound: float = EXP_BOUND

    def refined(self, factor: int = 2) -> "Discretization":
        """Same controls with the node density and range multiplied."""
        return replace(self, step=self.step / factor, tail_tol=self.tail_tol / 1e4,
                       h_step=self.h_step / factor,
                       T=None if self.T is None else self.T * factor,
                       N=None if self.N is None else (self.N - 1) * factor * factor + 1,
                       K=None if self.K is None else self.K * factor)


@dataclass(frozen=True)
class OperatorSpec:
    """Parameters of one cubic integrable operator."""

    model: str
    x: tuple
    y: tuple
    t: tuple
    zeta: tuple = ()
    disc: Discretization = field(default_factory=Discretization)

    @property
    def m(self) -> int:
        return len(self.x)

    @classmethod
    def from_physical(cls, model, h, gamma, tau, zeta=None, disc=None, validate=True):
        """Map (h, gamma, tau) to (x, y, t); y = gamma/2 for the periodic model."""
        h = tuple(float(v) for v in np.atleast_1d(h))
        gamma = tuple(float(v) for v in np.atleast_1d(gamma))
        tau = tuple(float(v) for v in np.atleast_1d(tau))
        if not len(h) == len(gamma) == len(tau):
            raise OperatorError("h, gamma, tau must have equal length")
        m = len(h)
        if zeta is None:
            zeta = default_zeta(model, m)
        yfac = 0.5 if model == geo.PERIODIC else 1.0
        spec = cls(
            model=model,
            x=h,
            y=tuple(yfac * g for g in gamma),
            t=tuple(-v / 3 for v in tau),
            zeta=tuple(complex(z) for z in np.atleast_1d(zeta)) if m > 1 or model == geo.PERIODIC else (),
            disc=disc or Discretization(),
        )
        if validate:
            spec.validate()
        return spec

    def physical(self) -> dict:
        yfac = 2.0 if self.model == geo.PERIODIC else 1.0
        return {
            "h": list(self.x),
            "gamma": [yfac * v for v in self.y],
            "tau": [-3 * v for v in self.t],
        }

    def with_params(self, x=None, y=None, t=None) -> "OperatorSpec":
        return replace(
            self,
            x=self.x if x is None else tuple(float(v) for v in x),
            y=self.y if y is None else tuple(float(v) for v in y),
            t=self.t if t is None else tuple(float(v) for v in t),
        )

    def shifted(self, dx=None, dy=None, dt=None) -> "OperatorSpec":
        def add(a, d):
            return a if d is None else tuple(float(u + v) for u, v in zip(a, d))

        return replace(self, x=add(self.x, dx), y=add(self.y, dy), t=add(self.t, dt))

    def equal_times(self) -> bool:
        return any(math.isclose(a, b) for a, b in zip(self.t, self.t[1:]))

    def validate(self) -> None:
        m = self.m
        if m < 1:
            raise OperatorError("m must be >= 1")
        if not (len(self.y) == len(self.t) == m):
            raise OperatorError("x, y, t must have length m")
        if self.model not in (geo.KPZ, geo.PERIODIC):
            raise OperatorError(f"unknown model {self.model!r}")
        tau = [-3 * v for v in self.t]
        if any(v <= 0 for v in tau):
            raise OperatorError("times must be positive (t < 0)")
        for i in range(m - 1):
            if tau[i] > tau[i + 1] + 1e-15:
                raise OperatorError(f"tau must be nondecreasing (tau_{i + 1} > tau_{i + 2})")
            if math.isclose(tau[i], tau[i + 1]):
                if self.model == geo.KPZ and not self.y[i] < self.y[i + 1]:
                    raise OperatorError(f"equal times need gamma_{i + 1} < gamma_{i + 2}")
                if self.model == geo.PERIODIC and not self.x[i] < self.x[i + 1]:
                    raise OperatorError(f"equal times need h_{i + 1} < h_{i + 2}")
        z = [complex(v) for v in self.zeta]
        if self.model == geo.KPZ:
            if len(z) != m - 1:
                raise OperatorError(f"KPZ needs {m - 1} zeta values, got {len(z)}")
            for v in z:
                if not 0 < abs(v) < 1:
                    raise OperatorError("KPZ zeta values need 0 < |zeta| < 1")
        else:
            if len(z) != m:
                raise OperatorError(f"periodic model needs {m} zeta values, got {len(z)}")
            mods = [abs(v) for v in z]
            if not all(0 < v < 1 for v in mods):
                raise OperatorError("periodic zeta values need 0 < |zeta| < 1")
            if any(b <= a for a, b in zip(mods, mods[1:])):
                raise OperatorError("periodic |zeta_i| must be strictly increasing")


def default_zeta(model: str, m: int) -> tuple:
    if model == geo.KPZ:
        return tuple([0.5] * (m - 1))
    if m == 1:
        return (0.5,)
    return tuple(np.linspace(0.3, 0.6, m))


# ------------------------------------------------------------ exponents

def phi(spec: OperatorSpec, k: int, z):
    """Cubic exponent t_k z^3 + y_k z^2 + x_k z, with phi_0 = 0."""
    if k == 0:
        return np.zeros_like(np.asarray(z, dtype=complex))
    i = k - 1
    return spec.t[i] * z**3 + spec.y[i] * z**2 + spec.x[i] * z


def delta_diag(spec: OperatorSpec, z: complex) -> np.ndarray:
    """Diagonal of Delta(z): exp(phi_1..phi_m) and 1."""
    return np.array([np.exp(phi(spec, k, z)) for k in range(1, spec.m + 1)] + [1.0 + 0j])


def log_balance(spec: OperatorSpec, j: int, z):
    """log S_j(z) = (phi_{o(j)} - phi_{e(j)}) / 2."""
    return 0.5 * (phi(spec, o_index(j), z) - phi(spec, e_index(j), z))


def node_log_amplitude(spec: OperatorSpec, ns: geo.NodeSystem) -> np.ndarray:
    """Complex log of the balanced factor carried by f and g at each node."""
    out = np.empty(len(ns), dtype=complex)
    for j in range(1, spec.m + 1):
        for ell, sgn in ((1, 1.0), (2, -1.0)):
            mask = ns.component(ell, j)
            out[mask] = sgn * log_balance(spec, j, ns.nodes[mask])
    return out


# -------------------------------------------------------------- KPZ A, B

def kpz_Q(ell: int, j: int, zeta, m: int) -> complex:
    def zf(k):
        if k == 0:
            return math.inf
        if k == m:
            return 0.0
        return complex(zeta[k - 1])

    zj, zjm = zf(j), zf(j - 1)
    inv = 1.0 if zjm == math.inf else 1 - 1 / zjm
    if j % 2 == 1:
        return -(1 - zj) if ell == 1 else inv
    return -inv if ell == 1 else (1 - zj)


def kpz_P(j: int, branch: int, zeta) -> complex:
    if j == 1:
        return 1 / (2j * np.pi)
    zjm = complex(zeta[j - 2])
    if zjm == 1:
        raise OperatorError("zeta = 1 makes the P weights singular")
    if branch == 1:
        return 1 / (2j * np.pi * (1 - zjm))
    if branch == -1:
        return -zjm / (2j * np.pi * (1 - zjm))
    raise OperatorError(f"family {j} contour needs a +/- branch")


def kpz_AB(ell: int, j: int, branch: int, zeta, m: int) -> tuple[complex, complex]:
    """(A_j, B_j) for a node of Omega_{ell, j} on the given branch."""
    return 1.0 + 0j, kpz_Q(ell, j, zeta, m) * kpz_P(j, branch, zeta)


# --------------------------------------------------------- periodic A, B

def periodic_Q(ell: int, i: int, zeta) -> complex:
    m = len(zeta)

    def zf(k):
        return 0.0 if k in (0, m + 1) else complex(zeta[k - 1])

    sgn = (-1) ** i
    other = i - sgn if ell == 1 else i + sgn
    return 1 - zf(other) / zf(i)


def periodic_H_factor(z, zeta_i: complex, h_step: float = 0.05, tol: float = 1e-17):
    """H_i(z) by trapezoid quadrature of the Cauchy integral over the imaginary axis.

    H_i is even in z; the formula for Re z < 0 is evaluated at -|Re z|.
    """
    z = np.asarray(z, dtype=complex)
    zeta_i = complex(zeta_i)
    if zeta_i == 0:
        return np.ones_like(z)
    if not abs(zeta_i) < 1:
        raise OperatorError("H factor needs |zeta| < 1")
    sep = np.abs(z.real).min() if z.size else 1.0
    if sep < 1e-6:
        raise OperatorError("node too close to the imaginary axis for the H factor")
    Y = math.sqrt(max(2 * math.log(abs(zeta_i) / tol), 1.0))
    h = min(h_step, sep / 6)
    n = int(math.ceil(Y / h))
    y = np.linspace(-n * h, n * h, 2 * n + 1)
    vals = np.log1p(-zeta_i * np.exp(-(y**2) / 2))
    zl = np.where(z.real < 0, z, -z)
    s = cauchy_sum(zl, y, vals) * h
    return np.exp(-1j * s)


def periodic_AB(spec: OperatorSpec, ns: geo.NodeSystem) -> tuple[np.ndarray, np.ndarray]:
    m = spec.m
    zeta = spec.zeta
    z = ns.nodes
    Hcache = {0: np.ones(len(z), dtype=complex), m + 1: np.ones(len(z), dtype=complex)}
    for i in range(1, m + 1):
        Hcache[i] = periodic_H_factor(z, zeta[i - 1], h_step=spec.disc.h_step)
    A = np.empty(len(z), dtype=complex)
    B = np.empty(len(z), dtype=complex)
    for a in range(len(z)):
        j, ell, side = int(ns.j[a]), int(ns.ell[a]), int(ns.side[a])
        nb = j + 1 if side == geo.LEFT else j - 1
        A[a] = Hcache[nb][a] / (z[a] * Hcache[j][a])
        B[a] = periodic_Q(ell, j, zeta) * Hcache[nb][a]
    return A, B


def node_AB(spec: OperatorSpec, ns: geo.NodeSystem) -> tuple[np.ndarray, np.ndarray]:
    if spec.model == geo.PERIODIC:
        return periodic_AB(spec, ns)
    A = np.empty(len(ns), dtype=complex)
    B = np.empty(len(ns), dtype=complex)
    for a in range(len(ns)):
        A[a], B[a] = kpz_AB(int(ns.ell[a]), int(ns.j[a]), int(ns.branch[a]), spec.zeta, spec.m)
    return A, B


# ------------------------------------------------------------- f and g

def assemble_fg(ns: geo.NodeSystem, spec: OperatorSpec, balanced: bool | None = None,
                AB=None) -> tuple[np.ndarray, np.ndarray]:
    """Per-node (m+1)-vectors f, g.

    The balanced form splits exp(phi_o - phi_e) evenly between f and g;
    the raw form puts exp(phi) on f and exp(-phi) on g (conjugating
    scalar c = 1).
    """
    if balanced is None:
        balanced = spec.disc.balanced
    m = spec.m
    A, B = node_AB(spec, ns) if AB is None else AB
    z = ns.nodes
    f = np.zeros((len(z), m + 1), dtype=complex)
    g = np.zeros((len(z), m + 1), dtype=complex)
    bound = spec.disc.exp_bound
    for j in range(1, m + 1):
        o, e = o_index(j), e_index(j)
        so, se = slot(o, m), slot(e, m)
        for ell in (1, 2):
            mask = ns.component(ell, j)
            zz = z[mask]
            if balanced:
                lf = lg = (1 if ell == 1 else -1) * log_balance(spec, j, zz)
            elif ell == 1:
                lf, lg = phi(spec, o, zz), -phi(spec, e, zz)
            else:
                lf, lg = phi(spec, e, zz), -phi(spec, o, zz)
            # large negative exponents underflow harmlessly to zero
            worst = max(np.real(lf).max(), np.real(lg).max())
            if worst > bound:
                k = int(np.argmax(np.maximum(np.real(lf), np.real(lg))))
                raise OperatorError(
                    f"exponent overflow {worst:.1f} at node {zz[k]:.4g} of component ({ell},{j})")
            cf, cg = (so, se) if ell == 1 else (se, so)
            f[mask, cf] = A[mask] * np.exp(lf)
            g[mask, cg] = B[mask] * np.exp(lg)
    return f, g


# ------------------------------------------------------ discrete operator

@dataclass
class DiscreteOperator:
    """Sampled f, g and the weighted kernel matrix [H(u_a, u_b) w_b]."""

    spec: OperatorSpec
    ns: geo.NodeSystem
    f: np.ndarray
    g: np.ndarray
    A: np.ndarray
    B: np.ndarray
    matrix: np.ndarray

    @property
    def nodes(self) -> np.ndarray:
        return self.ns.nodes

    @property
    def weights(self) -> np.ndarray:
        return self.ns.weights

    def kernel(self) -> np.ndarray:
        """Unweighted kernel H(u_a, u_b)."""
        w = self.weights
        return self.matrix / w[None, :]

    def dump(self) -> dict:
        return {"nodes": self.nodes, "weights": self.weights, "f": self.f, "g": self.g,
                "kernel": self.kernel()}


def kernel_matrix(f, g, ns: geo.NodeSystem) -> np.ndarray:
    """Weighted Nystrom matrix with H(u, u) := 0."""
    if len(np.unique(ns.nodes)) != len(ns.nodes):
        raise OperatorError("duplicate nodes")
    return weighted_kernel(ns.nodes, ns.weights, f, g)


def contour_scale(spec: OperatorSpec) -> float:
    """Contour scale shrunk by tau_max^(-1/3) for long times.

    The cubic phase varies on the length scale tau^(-1/3), so for
    tau_max > 1 the contours are contracted to keep the node density per
    oscillation fixed; for m = 1 this makes every time look like tau = 1.
    """
    tau_max = -3 * min(spec.t)
    return spec.disc.scale * min(1.0, tau_max ** (-1 / 3))


def auto_contour_T(spec: OperatorSpec, tmax: float = 40.0) -> float:
    """Smallest T at which every balanced factor is below tail_tol of its peak."""
    d = spec.disc
    specs = geo.kpz_contour_specs(spec.m, spacing=d.spacing, p=d.p, scale=contour_scale(spec),
                                  T=tmax, N=4001, slope_left=d.slope_left,
                                  slope_right=d.slope_right)
    T = 2.0
    for c in specs:
        t = c.params()
        z = c.point(t)
        ell = geo.kpz_ell(c.j, c.side)
        la = (1 if ell == 1 else -1) * log_balance(spec, c.j, z).real
        la = la - la.max()
        ok = la < math.log(d.tail_tol)
        # last index from either end that still violates the bound
        bad = np.where(~ok)[0]
        if len(bad) == 0:
            continue
        T = max(T, abs(t[bad[0]]), abs(t[bad[-1]]))
    if T >= tmax * 0.999:
        raise OperatorError("contour factors do not decay; check time ordering or slopes")
    return float(np.ceil(T * 2) / 2 + 0.5)


def auto_bethe_K(spec: OperatorSpec, kmax: int = 400) -> int:
    d = spec.disc
    K = 1
    for j, zeta in enumerate(spec.zeta, start=1):
        left, right = geo.solve_bethe_roots(zeta, kmax, check=False)
        for side, roots in ((geo.LEFT, left), (geo.RIGHT, right)):
            ell = geo.periodic_ell(j, side)
            la = (1 if ell == 1 else -1) * log_balance(spec, j, roots).real - np.log(np.abs(roots))
            la = la - la.max()
            bad = np.where(la >= math.log(d.tail_tol))[0]
            if len(bad) == 0:
                continue
            k = np.arange(-kmax, kmax + 1)[bad]
            if np.abs(k).max() >= kmax:
                raise OperatorError("Bethe factors do not decay within the root cap")
            K = max(K, int(np.abs(k).max()) + 1)
    return K


def build_nodes(spec: OperatorSpec) -> geo.NodeSystem:
    d = spec.disc
    if spec.model == geo.KPZ:
        T = d.T if d.T is not None else auto_contour_T(spec)
        N = d.N if d.N is not None else 2 * int(math.ceil(T / d.step)) + 1
        ns = geo.build_kpz_contours(spec.m, spacing=d.spacing, p=d.p, scale=contour_scale(spec), T=T, N=N,
                                    slope_left=d.slope_left, slope_right=d.slope_right)
        ns.meta.update(T=T, N=N)
        return ns
    K = d.K if d.K is not None else auto_bethe_K(spec)
    return geo.build_periodic_sets(spec.zeta, K)


def build_operator(spec: OperatorSpec, ns: geo.NodeSystem | None = None,
                   balanced: bool | None = None, validate: bool = True) -> DiscreteOperator:
    """Nodes, f, g and the weighted kernel matrix for one parameter point."""
    if validate:
        spec.validate()
    if ns is None:
        ns = build_nodes(spec)
    A, B = node_AB(spec, ns)
    f, g = assemble_fg(ns, spec, balanced=balanced, AB=(A, B))
    return DiscreteOperator(spec, ns, f, g, A, B, kernel_matrix(f, g, ns))


# ------------------------------------------------------------- K-hat oracle

def khat_kernels(spec: OperatorSpec, ns: geo.NodeSystem, AB=None):
    """Weighted matrices of K-hat_1 (Omega_2 -> Omega_1) and K-hat_2 (Omega_1 -> Omega_2).

    Built from M_i = m_{o(i)} / m_{e(i)} directly, without the square-root
    balancing used for H.  Returns (K1, K2, idx1, idx2) where idx_l are
    node indices of Omega_l.
    """
    A, B = node_AB(spec, ns) if AB is None else AB
    z, w = ns.nodes, ns.weights
    idx1 = np.where(ns.ell == 1)[0]
    idx2 = np.where(ns.ell == 2)[0]
    logM = np.empty(len(z), dtype=complex)
    for j in range(1, spec.m + 1):
        mask = ns.j == j
        logM[mask] = phi(spec, o_index(j), z[mask]) - phi(spec, e_index(j), z[mask])

    def block(rows, cols, sgnM, step):
        fi = ns.j[rows][:, None]
        fj = ns.j[cols][None, :]
        sel = (fi == fj) | (fj == fi - step * (-1) ** fi)
        u = z[rows][:, None]
        v = z[cols][None, :]
        left = np.exp(sgnM * logM[rows]) * A[rows]
        return sel * left[:, None] * B[cols][None, :] / (u - v) * w[cols][None, :]

    K1 = block(idx1, idx2, 1.0, 1)
    K2 = block(idx2, idx1, -1.0, -1)
    return K1, K2, idx1, idx2
