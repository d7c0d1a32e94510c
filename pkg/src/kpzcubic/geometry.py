"""Discretized domains for the cubic integrable operators.

Two kinds of domain are supported:

* KPZ contours: 2(2m-1) hyperbola-like curves, half on each side of the
  imaginary axis, discretized by the composite trapezoid rule in the
  curve parameter.
* Periodic Bethe sets: roots of exp(-s^2/2) = zeta for each family,
  with unit (counting measure) weights.

Every node carries a component tag (ell, j) with ell in {1, 2} and
j in {1..m}, plus a side (-1 left, +1 right) and, for contours, a
branch (+1, -1, or 0 for the central contour of family 1).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

KPZ = "kpz"
PERIODIC = "periodic"
LEFT = -1
RIGHT = 1

BETHE_RESIDUAL_TOL = 1e-12
MIN_REAL_SEPARATION = 1e-8


class GeometryError(ValueError):
    """Raised for invalid or degenerate domain parameters."""


@dataclass(frozen=True)
class ContourSpec:
    """One contour z(t) = side*(offset + slope*scale*(1+t^2)^(p/2)) + i*scale*t.

    The parameter t runs over [-T, T] with N equispaced nodes, so the
    orientation is bottom-to-top for scale > 0.
    """

    j: int
    side: int
    branch: int = 0
    offset: float = 0.0
    p: float = 1.0
    scale: float = 1.0
    slope: float = 1.0
    T: float = 6.0
    N: int = 121

    def params(self) -> np.ndarray:
        return np.linspace(-self.T, self.T, self.N)

    def point(self, t):
        t = np.asarray(t, dtype=float)
        re = self.offset + self.slope * self.scale * (1.0 + t**2) ** (self.p / 2)
        return self.side * re + 1j * self.scale * t

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        dre = self.slope * self.scale * self.p * t * (1.0 + t**2) ** (self.p / 2 - 1)
        return self.side * dre + 1j * self.scale

    def discretize(self) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and trapezoid weights z'(t_k) * dt (half weight at the ends)."""
        if self.N < 2:
            raise GeometryError("contour needs at least two nodes")
        t = self.params()
        dt = t[1] - t[0]
        w = self.derivative(t) * dt
        w[0] *= 0.5
        w[-1] *= 0.5
        return self.point(t), w


@dataclass
class NodeSystem:
    """Quadrature nodes with complex weights and component tags."""

    nodes: np.ndarray
    weights: np.ndarray
    ell: np.ndarray
    j: np.ndarray
    side: np.ndarray
    branch: np.ndarray
    model: str
    m: int
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.nodes)

    def component(self, ell: int, j: int) -> np.ndarray:
        """Boolean mask of the nodes in Omega_{ell, j}."""
        return (self.ell == ell) & (self.j == j)

    def validate(self) -> None:
        for ell in (1, 2):
            for j in range(1, self.m + 1):
                if not np.any(self.component(ell, j)):
                    raise GeometryError(f"component ({ell},{j}) is empty")
        if len(np.unique(self.nodes)) != len(self.nodes):
            raise GeometryError("duplicate nodes in node system")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["re", "im", "weight_re", "weight_im", "ell", "j"])
        for z, wt, ell, j in zip(self.nodes, self.weights, self.ell, self.j):
            w.writerow([repr(float(z.real)), repr(float(z.imag)), repr(float(wt.real)), repr(float(wt.imag)),
                        int(ell), int(j)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, model: str, m: int) -> "NodeSystem":
        rows = list(csv.DictReader(io.StringIO(text)))
        z = np.array([float(r["re"]) + 1j * float(r["im"]) for r in rows])
        w = np.array([float(r["weight_re"]) + 1j * float(r["weight_im"]) for r in rows])
        ell = np.array([int(r["ell"]) for r in rows])
        j = np.array([int(r["j"]) for r in rows])
        side = np.where(z.real < 0, LEFT, RIGHT)
        return cls(z, w, ell, j, side, np.zeros_like(j), model, m)


def kpz_layout(m: int) -> list[tuple[int, int]]:
    """(j, branch) pairs from the imaginary axis outward on one side.

    Order is m+, ..., 2+, 1, 2-, ..., m-.
    """
    if m < 1:
        raise GeometryError("m must be >= 1")
    return (
        [(j, 1) for j in range(m, 1, -1)]
        + [(1, 0)]
        + [(j, -1) for j in range(2, m + 1)]
    )


def kpz_ell(j: int, side: int) -> int:
    """Omega_{1,j} is the left contour for odd j and the right one for even j."""
    odd = j % 2 == 1
    if side == LEFT:
        return 1 if odd else 2
    return 2 if odd else 1


def kpz_contour_specs(
    m: int,
    spacing: float = 2.0,
    p: float = 1.0,
    scale: float = 1.0,
    T: float = 6.0,
    N: int = 121,
    slope_left: float = 1.0,
    slope_right: float = 1.0,
) -> list[ContourSpec]:
    specs = []
    for side, slope in ((LEFT, slope_left), (RIGHT, slope_right)):
        for pos, (j, br) in enumerate(kpz_layout(m)):
            specs.append(
                ContourSpec(j=j, side=side, branch=br, offset=spacing * pos,
                            p=p, scale=scale, slope=slope, T=T, N=N)
            )
    return specs


def build_kpz_contours(m: int, specs: list[ContourSpec] | None = None, **kw) -> NodeSystem:
    """Discretize the KPZ contour system into one NodeSystem.

    Extra keyword arguments are forwarded to kpz_contour_specs when no
    explicit spec list is given.
    """
    if specs is None:
        specs = kpz_contour_specs(m, **kw)
    if len(specs) != 2 * (2 * m - 1):
        raise GeometryError(f"expected {2 * (2 * m - 1)} contours, got {len(specs)}")
    zs, ws, ells, js, sides, brs, cid = [], [], [], [], [], [], []
    for k, c in enumerate(specs):
        z, w = c.discretize()
        if c.side == LEFT and np.any(z.real >= 0):
            raise GeometryError(f"left contour {k} crosses the imaginary axis")
        if c.side == RIGHT and np.any(z.real <= 0):
            raise GeometryError(f"right contour {k} crosses the imaginary axis")
        zs.append(z)
        ws.append(w)
        n = len(z)
        ells.append(np.full(n, kpz_ell(c.j, c.side)))
        js.append(np.full(n, c.j))
        sides.append(np.full(n, c.side))
        brs.append(np.full(n, c.branch))
        cid.append(np.full(n, k))
    _check_disjoint(zs)
    ns = NodeSystem(
        nodes=np.concatenate(zs),
        weights=np.concatenate(ws),
        ell=np.concatenate(ells),
        j=np.concatenate(js),
        side=np.concatenate(sides),
        branch=np.concatenate(brs),
        model=KPZ,
        m=m,
        meta={"contour_id": np.concatenate(cid), "specs": specs},
    )
    ns.validate()
    return ns


def _check_disjoint(sets: list[np.ndarray], tol: float = 1e-9) -> None:
    # Contours on the same side are horizontal translates of each other,
    # so comparing the real parts at equal node index is enough when the
    # parametrizations agree; the brute-force check below is general.
    for a in range(len(sets)):
        for b in range(a + 1, len(sets)):
            d = np.abs(sets[a][:, None] - sets[b][None, :]).min()
            if d <= tol:
                raise GeometryError(f"contours {a} and {b} intersect (distance {d:.2e})")


def solve_bethe_roots(zeta: complex, K: int, check: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Roots of exp(-s^2/2) = zeta for |k| <= K, split into (left, right).

    Each side is ordered by k = -K..K.  The residual check can be turned
    off for scans over very large k, where rounding in s^2 alone exceeds
    the bound.
    """
    zeta = complex(zeta)
    if not 0 < abs(zeta) < 1:
        raise GeometryError("Bethe roots need 0 < |zeta| < 1")
    if K < 0:
        raise GeometryError("cutoff K must be >= 0")
    k = np.arange(-K, K + 1)
    right = np.sqrt(-2 * np.log(zeta) - 4j * np.pi * k)
    if np.any(np.abs(right.real) < MIN_REAL_SEPARATION):
        bad = right[np.abs(right.real) < MIN_REAL_SEPARATION]
        raise GeometryError(f"Bethe root too close to the imaginary axis: {bad}")
    # principal sqrt puts every root in the open right half-plane
    left = -right
    res = np.abs(np.exp(-np.concatenate([left, right]) ** 2 / 2) - zeta)
    if check and res.max() > BETHE_RESIDUAL_TOL:
        raise GeometryError(f"Bethe residual {res.max():.2e} exceeds tolerance")
    return left, right


def periodic_ell(j: int, side: int) -> int:
    return kpz_ell(j, side)


def build_periodic_sets(zetas, K: int) -> NodeSystem:
    """Union of the 2m Bethe root families with unit weights."""
    zetas = [complex(z) for z in zetas]
    m = len(zetas)
    if m < 1:
        raise GeometryError("need at least one zeta")
    mods = [abs(z) for z in zetas]
    if any(b <= a for a, b in zip(mods, mods[1:])):
        raise GeometryError("|zeta_i| must be strictly increasing")
    zs, ells, js, sides = [], [], [], []
    for jj, zeta in enumerate(zetas, start=1):
        left, right = solve_bethe_roots(zeta, K)
        for side, roots in ((LEFT, left), (RIGHT, right)):
            zs.append(roots)
            n = len(roots)
            ells.append(np.full(n, periodic_ell(jj, side)))
            js.append(np.full(n, jj))
            sides.append(np.full(n, side))
    z = np.concatenate(zs)
    ns = NodeSystem(
        nodes=z,
        weights=np.ones(len(z), dtype=complex),
        ell=np.concatenate(ells),
        j=np.concatenate(js),
        side=np.concatenate(sides),
        branch=np.zeros(len(z), dtype=int),
        model=PERIODIC,
        m=m,
        meta={"K": K, "zeta": tuple(zetas)},
    )
    ns.validate()
    return ns
