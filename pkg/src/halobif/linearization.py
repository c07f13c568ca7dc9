"""Diagonalization of the quadratic Hamiltonian at a collinear point.

The real symplectic basis is chosen compatible with the time-reversal
symmetry ``(x, y, z, px, py, pz, t) -> (x, -y, z, -px, py, -pz, -t)``.  The
position-like direction of the vertical pair is ``z`` (reversor-even) and that
of the planar pair is reversor-odd, as in the classical construction where the
planar position coordinate runs along ``y``.  This fixes the angle origins, so
the resonant normal form on the center manifold comes out with pure cosine
dependence on ``theta_y - theta_z``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .poly_algebra import NDOF, NVARS, Polynomial, symplectic_form

DETUNING_RATIO_LIMIT = 0.25
DEGENERACY_LIMIT = 1e-10
REVERSOR = np.diag([1.0, -1.0, 1.0, -1.0, 1.0, -1.0])


class DegenerateLinearizationError(ValueError):
    """The hyperbolic exponent collapses (L3 with vanishing mass ratio)."""


@dataclass(frozen=True)
class QuadraticData:
    c2: float
    eta1: float
    eta2: float
    omega_y: float
    omega_z: float
    lambda_x: float
    delta: float


@dataclass(frozen=True)
class DiagonalizingMap:
    """``forward`` maps diagonal complex coordinates to local ones: xi = C Y."""

    forward: np.ndarray
    inverse: np.ndarray
    real_basis: np.ndarray


def quadratic_data(c2: float) -> QuadraticData:
    if not c2 > 1.0:
        raise ValueError(f"c2 must exceed 1, got {c2}")
    disc = math.sqrt(9 * c2 * c2 - 8 * c2)
    eta1 = (c2 - 2 - disc) / 2
    # eta1*eta2 = 1 + c2 - 2 c2^2 avoids cancellation as c2 -> 1
    eta2 = (1 + c2 - 2 * c2 * c2) / eta1
    omega_y = math.sqrt(-eta1)
    omega_z = math.sqrt(c2)
    lambda_x = math.sqrt(eta2) if eta2 > 0 else 0.0
    delta = omega_y - omega_z
    if not (eta1 < 0 < eta2):
        raise DegenerateLinearizationError(f"not saddle x center x center (eta1={eta1}, eta2={eta2})")
    if abs(delta / omega_z) >= DETUNING_RATIO_LIMIT:
        raise ValueError(f"detuning ratio {delta / omega_z} outside the near-resonant regime")
    return QuadraticData(c2, eta1, eta2, omega_y, omega_z, lambda_x, delta)


def quadratic_hamiltonian(c2: float, chart: str = "original") -> Polynomial:
    return Polynomial.from_terms({
        (0, 0, 0, 2, 0, 0): 0.5, (0, 0, 0, 0, 2, 0): 0.5, (0, 0, 0, 0, 0, 2): 0.5,
        (0, 1, 0, 1, 0, 0): 1.0, (1, 0, 0, 0, 1, 0): -1.0,
        (2, 0, 0, 0, 0, 0): -c2, (0, 2, 0, 0, 0, 0): c2 / 2, (0, 0, 2, 0, 0, 0): c2 / 2,
    }, chart)


def hamiltonian_matrix(c2: float) -> np.ndarray:
    """``A`` with ``xi' = A xi`` for the quadratic Hamiltonian, xi = (x,y,z,px,py,pz)."""
    hess = np.zeros((NVARS, NVARS))
    hess[0, 0] = -2 * c2
    hess[1, 1] = c2
    hess[2, 2] = c2
    hess[3, 3] = hess[4, 4] = hess[5, 5] = 1.0
    hess[1, 3] = hess[3, 1] = 1.0
    hess[0, 4] = hess[4, 0] = -1.0
    return symplectic_form() @ hess


def _null_vector(B: np.ndarray) -> np.ndarray:
    _, _, vh = np.linalg.svd(B)
    return vh[-1].conj()


def build_diagonalizing_map(qd: QuadraticData) -> DiagonalizingMap:
    """Symplectic map to coordinates where ``H2 = lx q1 p1 + i wy q2 p2 + i wz q3 p3``."""
    if qd.eta2 < DEGENERACY_LIMIT:
        raise DegenerateLinearizationError(
            "hyperbolic exponent vanishes; the quasi-Kepler limit of L3 is a singular perturbation")
    A = hamiltonian_matrix(qd.c2)
    J = symplectic_form()
    R = REVERSOR
    eye = np.eye(NVARS)
    cols = np.zeros((NVARS, NVARS))

    # hyperbolic pair: u for +lambda, v = R u for -lambda
    u = _null_vector(A - qd.lambda_x * eye).real
    v = R @ u
    k = u @ J @ v
    if abs(k) < 1e-14:
        raise DegenerateLinearizationError("hyperbolic eigenvectors are not symplectically paired")
    u = u / math.sqrt(abs(k))
    v = math.copysign(1.0, k) * v / math.sqrt(abs(k))
    cols[:, 0], cols[:, NDOF] = u, v

    # elliptic pairs: A a = -w b, A b = w a, with R a = a and a^T J b = 1
    for j, w in ((1, qd.omega_y), (2, qd.omega_z)):
        ev = _null_vector(A - 1j * w * eye)
        even = (ev + R @ ev) / 2
        if np.linalg.norm(even) < 1e-8 * np.linalg.norm(ev):
            ev = 1j * ev
            even = (ev + R @ ev) / 2
        ev = ev / even[np.argmax(np.abs(even))]
        a, b = ev.real, ev.imag
        k = a @ J @ b
        if k < 0:
            b = -b
            k = -k
        s = math.sqrt(k)
        if j == 1:
            # quarter turn: planar position along the reversor-odd direction
            a, b = -b, a
        cols[:, j], cols[:, j + NDOF] = a / s, b / s

    # real normal coordinates from complex ones: x_j = (q_j + i p_j)/sqrt2, p_j = (i q_j + p_j)/sqrt2
    T = np.eye(NVARS, dtype=complex)
    r = 1 / math.sqrt(2)
    for j in (1, 2):
        T[j, j], T[j, j + NDOF] = r, 1j * r
        T[j + NDOF, j], T[j + NDOF, j + NDOF] = 1j * r, r
    C = cols @ T
    return DiagonalizingMap(C, np.linalg.inv(C), cols)


def symplecticity_residual(C: np.ndarray) -> float:
    J = symplectic_form()
    return float(np.abs(C.T @ J @ C - J).max())


def diagonal_quadratic(qd: QuadraticData, chart: str = "diagonal", resonant: bool = False) -> Polynomial:
    """``lx q1p1 + i wy q2p2 + i wz q3p3`` (``wy -> wz`` when ``resonant``)."""
    wy = qd.omega_z if resonant else qd.omega_y
    return Polynomial.from_terms({
        (1, 0, 0, 1, 0, 0): qd.lambda_x,
        (0, 1, 0, 0, 1, 0): 1j * wy,
        (0, 0, 1, 0, 0, 1): 1j * qd.omega_z,
    }, chart)
