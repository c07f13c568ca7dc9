"""Collinear-point geometry and the local polynomial Hamiltonian of the CR3BP.

Synodic frame: the larger primary sits at ``(mu, 0, 0)`` and the smaller one at
``(mu - 1, 0, 0)``.  Around a collinear point the coordinates are shifted and
rescaled by the distance ``gamma`` to the closest primary,

    X = s*gamma*x + mu + a,  Y = s*gamma*y,  Z = gamma*z,

with ``s = -1`` for L1/L2 and ``s = +1`` for L3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import eval_legendre

from .poly_algebra import NVARS, Polynomial

POINTS = ("L1", "L2", "L3")
MU_EARTH_MOON = 0.01215058
MU_SUN_BARYCENTER = 3.0404326e-6

QUINTIC_TOL = 1e-13
COLLISION_RADIUS = 1e-10


class ConvergenceError(RuntimeError):
    """An iterative solver failed to converge."""


class CollisionError(ValueError):
    """The state lies (numerically) on top of a primary."""


@dataclass(frozen=True)
class ProblemSpec:
    mu: float
    point: str
    expansion_degree: int = 14

    def __post_init__(self):
        if not (0.0 < self.mu <= 0.5):
            raise ValueError(f"mass ratio must lie in (0, 1/2], got {self.mu}")
        if self.point not in POINTS:
            raise ValueError(f"point must be one of {POINTS}, got {self.point!r}")
        if self.expansion_degree < 2:
            raise ValueError("expansion degree must be >= 2")


@dataclass(frozen=True)
class EquilibriumGeometry:
    gamma: float
    a_offset: float
    sign: int  # -1 for L1/L2 (upper signs), +1 for L3

    def local_to_synodic_position(self, x, y, z, mu):
        return (self.sign * self.gamma * x + mu + self.a_offset,
                self.sign * self.gamma * y,
                self.gamma * z)


@dataclass(frozen=True)
class ModelCoefficients:
    c: dict  # n -> c_n(mu), n = 2..D

    @property
    def c2(self) -> float:
        return self.c[2]


@dataclass(frozen=True)
class SynodicState:
    X: float
    Y: float
    Z: float
    PX: float
    PY: float
    PZ: float

    def as_array(self) -> np.ndarray:
        return np.array([self.X, self.Y, self.Z, self.PX, self.PY, self.PZ])

    @classmethod
    def from_array(cls, v) -> "SynodicState":
        return cls(*(float(t) for t in v))

    @classmethod
    def from_velocity(cls, X, Y, Z, Xdot, Ydot, Zdot) -> "SynodicState":
        return cls(X, Y, Z, Xdot - Y, Ydot + X, Zdot)

    def velocity(self) -> np.ndarray:
        return np.array([self.PX + self.Y, self.PY - self.X, self.PZ])


@dataclass(frozen=True)
class LocalState:
    x: float
    y: float
    z: float
    px: float
    py: float
    pz: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.px, self.py, self.pz])


# -- equilibrium ---------------------------------------------------------------

def quintic_coefficients(point: str, mu: float) -> np.ndarray:
    """Euler quintic coefficients, highest power first."""
    if point == "L1":
        return np.array([1.0, -(3 - mu), 3 - 2 * mu, -mu, 2 * mu, -mu])
    if point == "L2":
        return np.array([1.0, 3 - mu, 3 - 2 * mu, -mu, -2 * mu, -mu])
    if point == "L3":
        return np.array([1.0, 2 + mu, 1 + 2 * mu, -(1 - mu), -2 * (1 - mu), -(1 - mu)])
    raise ValueError(point)


def quintic_residual(point: str, mu: float, gamma: float) -> float:
    return float(np.polyval(quintic_coefficients(point, mu), gamma))


def gamma_series(point: str, mu: float) -> float:
    """Small-mass expansion of gamma, used to seed Newton's method."""
    if point == "L3":
        return 1.0 - 7.0 * mu / 12.0 + 7.0 * mu**2 / 12.0 - 1127.0 * mu**3 / 20736.0
    r = mu / (1.0 - mu)
    sgn = -1.0 if point == "L1" else 1.0
    return (r / 3.0) ** (1 / 3) + sgn * (r / 3.0) ** (2 / 3) / 3.0 + sgn * r / 27.0


def _bracket(point: str) -> tuple[float, float]:
    return (0.0, 2.0) if point == "L3" else (0.0, 1.0)


def solve_gamma(spec: ProblemSpec, max_iter: int = 100) -> EquilibriumGeometry:
    """Distance of the collinear point from its closest primary."""
    coeffs = quintic_coefficients(spec.point, spec.mu)
    dcoeffs = np.polyder(coeffs)
    lo, hi = _bracket(spec.point)
    g = min(max(gamma_series(spec.point, spec.mu), lo + 1e-12), hi)
    gamma = None
    for _ in range(max_iter):
        f = np.polyval(coeffs, g)
        step = f / np.polyval(dcoeffs, g)
        g_new = g - step
        if not (lo < g_new < hi):
            break
        g = g_new
        if abs(step) <= 4e-16 * max(1.0, abs(g)):
            gamma = g
            break
    if gamma is None or abs(np.polyval(coeffs, gamma)) > QUINTIC_TOL:
        try:
            gamma = brentq(lambda t: np.polyval(coeffs, t), lo, hi, xtol=1e-16, rtol=4e-16, maxiter=500)
        except (ValueError, RuntimeError) as exc:
            raise ConvergenceError(f"Euler quintic did not converge for {spec}") from exc
    if abs(np.polyval(coeffs, gamma)) > QUINTIC_TOL:
        raise ConvergenceError(f"quintic residual too large for {spec}")
    if spec.point == "L1":
        a, sign = -1.0 + gamma, -1
    elif spec.point == "L2":
        a, sign = -1.0 - gamma, -1
    else:
        a, sign = gamma, +1
    return EquilibriumGeometry(float(gamma), a, sign)


def model_coefficients(spec: ProblemSpec, geometry: EquilibriumGeometry) -> ModelCoefficients:
    g, mu = geometry.gamma, spec.mu
    c = {}
    for n in range(2, spec.expansion_degree + 1):
        sgn = (-1.0) ** n
        if spec.point == "L1":
            c[n] = (mu + sgn * (1 - mu) * g ** (n + 1) / (1 - g) ** (n + 1)) / g**3
        elif spec.point == "L2":
            c[n] = sgn * (mu + (1 - mu) * g ** (n + 1) / (1 + g) ** (n + 1)) / g**3
        else:
            c[n] = sgn * (1 - mu + mu * g ** (n + 1) / (1 + g) ** (n + 1)) / g**3
    return ModelCoefficients(c)


# -- Legendre terms --------------------------------------------------------------

def legendre_term(n: int, state) -> float:
    """``rho^n P_n(x/rho)`` through the three-term recursion."""
    if n < 0:
        raise ValueError("n must be non-negative")
    x, y, z = (state.x, state.y, state.z) if isinstance(state, LocalState) else state[:3]
    rho2 = x * x + y * y + z * z
    t_prev, t = 1.0, x
    if n == 0:
        return t_prev
    for k in range(2, n + 1):
        t_prev, t = t, ((2 * k - 1) * x * t - (k - 1) * rho2 * t_prev) / k
    return t


def legendre_term_direct(n: int, x: float, y: float, z: float) -> float:
    rho = math.sqrt(x * x + y * y + z * z)
    if rho == 0.0:
        return 1.0 if n == 0 else 0.0
    return rho**n * float(eval_legendre(n, x / rho))


def legendre_polynomials(x: Polynomial, y: Polynomial, z: Polynomial, max_n: int) -> list[Polynomial]:
    """``[T_0, ..., T_max_n]`` with x, y, z given as (linear) polynomials."""
    rho2 = x * x + y * y + z * z
    T = [Polynomial.constant(1.0, x.chart), x]
    for n in range(2, max_n + 1):
        T.append(x * T[n - 1] * ((2 * n - 1) / n) - rho2 * T[n - 2] * ((n - 1) / n))
    return T[: max_n + 1]


def build_hamiltonian(spec: ProblemSpec, linear_map=None, chart: str = "original",
                      coefficients: ModelCoefficients | None = None) -> Polynomial:
    """Local Hamiltonian ``H = |p|^2/2 + y px - x py - sum_n c_n T_n`` to degree D.

    With ``linear_map`` the Hamiltonian is returned directly composed with that
    map (columns express the old variables in the new ones); the Legendre
    recursion then runs on the transformed linear forms.
    """
    if coefficients is None:
        coefficients = model_coefficients(spec, solve_gamma(spec))
    c = coefficients.c
    M = np.eye(NVARS) if linear_map is None else np.asarray(linear_map)
    x, y, z, px, py, pz = (Polynomial.linear_form(M[i], chart) for i in range(NVARS))
    H = (px * px + py * py + pz * pz) * 0.5 + y * px - x * py
    if linear_map is None:
        # exact structural quadratic part
        H = Polynomial.from_terms({
            (0, 0, 0, 2, 0, 0): 0.5, (0, 0, 0, 0, 2, 0): 0.5, (0, 0, 0, 0, 0, 2): 0.5,
            (0, 1, 0, 1, 0, 0): 1.0, (1, 0, 0, 0, 1, 0): -1.0,
        }, chart)
    T = legendre_polynomials(x, y, z, spec.expansion_degree)
    for n in range(2, spec.expansion_degree + 1):
        H = H - T[n] * c[n]
    return H


# -- physical frame ------------------------------------------------------------

def energy_offset(spec: ProblemSpec, geometry: EquilibriumGeometry) -> float:
    """Synodic energy of the equilibrium itself."""
    g, mu = geometry.gamma, spec.mu
    if spec.point == "L1":
        return -0.5 * (1 - g - mu) ** 2 - mu / g - (1 - mu) / (1 - g)
    if spec.point == "L2":
        return -0.5 * (1 + g - mu) ** 2 - mu / g - (1 - mu) / (1 + g)
    return -0.5 * (g + mu) ** 2 - (1 - mu) / g - mu / (1 + g)


def to_physical_energy(E_local: float, spec: ProblemSpec, geometry: EquilibriumGeometry) -> float:
    return E_local * geometry.gamma**2 + energy_offset(spec, geometry)


def to_local_energy(E_phys: float, spec: ProblemSpec, geometry: EquilibriumGeometry) -> float:
    return (E_phys - energy_offset(spec, geometry)) / geometry.gamma**2


def local_to_synodic(state, spec: ProblemSpec, geometry: EquilibriumGeometry) -> SynodicState:
    x, y, z, px, py, pz = state.as_array() if isinstance(state, LocalState) else np.asarray(state)
    s, g = geometry.sign, geometry.gamma
    X, Y, Z = geometry.local_to_synodic_position(x, y, z, spec.mu)
    return SynodicState(X, Y, Z, s * g * px, s * g * py + spec.mu + geometry.a_offset, g * pz)


def synodic_to_local(state: SynodicState, spec: ProblemSpec, geometry: EquilibriumGeometry) -> LocalState:
    s, g = geometry.sign, geometry.gamma
    x = (state.X - spec.mu - geometry.a_offset) / (s * g)
    return LocalState(x, state.Y / (s * g), state.Z / g, state.PX / (s * g),
                      (state.PY - spec.mu - geometry.a_offset) / (s * g), state.PZ / g)


def synodic_hamiltonian(state, mu: float) -> float:
    X, Y, Z, PX, PY, PZ = state.as_array() if isinstance(state, SynodicState) else state
    r1 = math.sqrt((X - mu) ** 2 + Y**2 + Z**2)
    r2 = math.sqrt((X - mu + 1) ** 2 + Y**2 + Z**2)
    return 0.5 * (PX**2 + PY**2 + PZ**2) + Y * PX - X * PY - (1 - mu) / r1 - mu / r2


def synodic_vector_field(state, mu: float) -> np.ndarray:
    """Hamilton's equations for the synodic Hamiltonian, ``(dX, dY, dZ, dPX, dPY, dPZ)``."""
    X, Y, Z, PX, PY, PZ = state.as_array() if isinstance(state, SynodicState) else state
    dx1, dx2 = X - mu, X - mu + 1
    r1s = dx1 * dx1 + Y * Y + Z * Z
    r2s = dx2 * dx2 + Y * Y + Z * Z
    if r1s < COLLISION_RADIUS**2 or r2s < COLLISION_RADIUS**2:
        raise CollisionError("state coincides with a primary")
    k1 = (1 - mu) / r1s**1.5
    k2 = mu / r2s**1.5
    return np.array([
        PX + Y,
        PY - X,
        PZ,
        PY - k1 * dx1 - k2 * dx2,
        -PX - (k1 + k2) * Y,
        -(k1 + k2) * Z,
    ])


def equilibrium_state(spec: ProblemSpec, geometry: EquilibriumGeometry | None = None) -> SynodicState:
    geometry = geometry or solve_gamma(spec)
    return local_to_synodic(np.zeros(6), spec, geometry)
