"""Fredholm determinants, resolvent moments and log-determinant gradients."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .operator import DiscreteOperator, pi_matrix, unit_diag

RCOND_MIN = 1e-12


class SingularOperatorError(ArithmeticError):
    """I - H is singular to working precision at these parameters."""


@dataclass(frozen=True)
class LUResult:
    lu: np.ndarray
    piv: np.ndarray
    logdet: complex
    rcond: float


def _wrap(logdet: complex) -> complex:
    # principal branch (-pi, pi]
    im = np.pi - (np.pi - logdet.imag) % (2 * np.pi)
    return complex(logdet.real, im)


def factor(matrix: np.ndarray, check: bool = True) -> LUResult:
    """Pivoted LU of I - matrix with log-determinant and 1-norm rcond estimate."""
    n = matrix.shape[0]
    a = np.eye(n, dtype=complex) - matrix
    if n == 0:
        return LUResult(a, np.zeros(0, dtype=np.int32), 0j, 1.0)
    anorm = np.abs(a).sum(axis=0).max()
    with warnings.catch_warnings():
        # zero pivots are reported below with a specific diagnostic
        warnings.simplefilter("ignore", la.LinAlgWarning)
        lu, piv = la.lu_factor(a, check_finite=True)
    d = np.diag(lu)
    if np.any(d == 0):
        if check:
            raise SingularOperatorError("I - H is exactly singular (zero pivot)")
        return LUResult(lu, piv, complex(-np.inf), 0.0)
    swaps = int(np.count_nonzero(piv != np.arange(n)))
    logdet = np.log(d).sum() + (1j * np.pi if swaps % 2 else 0)
    gecon = la.get_lapack_funcs("gecon", (lu,))
    rcond, info = gecon(lu, anorm, norm="1")
    if check and rcond < RCOND_MIN:
        raise SingularOperatorError(
            f"I - H is numerically singular (rcond {rcond:.2e}); the operator is at or near "
            "a point where invertibility fails")
    return LUResult(lu, piv, _wrap(complex(logdet)), float(rcond))


def det_id_minus(op_or_matrix, check: bool = True) -> complex:
    """det(I - HW) for a DiscreteOperator or a raw weighted matrix."""
    mat = op_or_matrix.matrix if isinstance(op_or_matrix, DiscreteOperator) else op_or_matrix
    res = factor(np.asarray(mat, dtype=complex), check=check)
    return complex(np.exp(res.logdet))


def logdet_id_minus(op_or_matrix, check: bool = True) -> complex:
    mat = op_or_matrix.matrix if isinstance(op_or_matrix, DiscreteOperator) else op_or_matrix
    return factor(np.asarray(mat, dtype=complex), check=check).logdet


def khat_det(K1: np.ndarray, K2: np.ndarray) -> complex:
    """det(I - K1 K2) for the weighted K-hat blocks."""
    return det_id_minus(K1 @ K2, check=False)


@dataclass(frozen=True)
class Moments:
    """Z_1, Z_2, Z_3 and the log-determinant at one parameter point."""

    Z1: np.ndarray
    Z2: np.ndarray
    Z3: np.ndarray
    logdet: complex
    rcond: float

    @property
    def det(self) -> complex:
        return complex(np.exp(self.logdet))

    @property
    def m(self) -> int:
        return self.Z1.shape[0] - 1


def moments(op: DiscreteOperator, check: bool = True) -> Moments:
    """Solve (I - HW) F = f and form Z_n = sum_k u_k^(n-1) F(u_k) g(u_k)^T w_k."""
    res = factor(op.matrix, check=check)
    F = la.lu_solve((res.lu, res.piv), op.f)
    u, w = op.nodes, op.weights
    Gw = op.g * w[:, None]
    Z = []
    for n in range(3):
        Z.append((F * (u**n)[:, None]).T @ Gw)
    return Moments(Z[0], Z[1], Z[2], res.logdet, res.rcond)


def logdet_gradients(mo: Moments) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Analytic (d/dx_i, d/dy_i, d/dt_i) of log det(I - H), i = 1..m."""
    Z1, Z2, Z3 = mo.Z1, mo.Z2, mo.Z3
    dy_mat = Z1 @ Z1 - 2 * Z2
    dt_mat = -Z1 @ Z1 @ Z1 + 2 * Z1 @ Z2 + Z2 @ Z1 - 3 * Z3
    m = mo.m
    gx = np.array([-Z1[i, i] for i in range(m)])
    gy = np.array([dy_mat[i, i] for i in range(m)])
    gt = np.array([dt_mat[i, i] for i in range(m)])
    return gx, gy, gt


@dataclass(frozen=True)
class Blocks:
    q: np.ndarray
    p: np.ndarray
    r: np.ndarray
    s: np.ndarray


def block_decompose(Z1: np.ndarray, S) -> Blocks:
    """Blocks of Pi^S Z1 (Pi^S)^T with the S indices first."""
    m = Z1.shape[0] - 1
    P = pi_matrix(S, m)
    W = P @ Z1 @ P.T
    k = len(set(S))
    return Blocks(W[:k, :k], W[:k, k:], W[k:, :k], W[k:, k:])


def trace_Z1_E(Z1: np.ndarray, i: int) -> complex:
    return complex(np.trace(Z1 @ unit_diag(i, Z1.shape[0] - 1)))
