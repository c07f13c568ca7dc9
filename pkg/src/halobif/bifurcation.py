"""Bifurcation thresholds from the reduced one-degree-of-freedom system.

With ``E = I_y + I_z`` (conserved), ``R = I_y`` and ``psi = theta_y - theta_z``
the center-manifold Hamiltonian depends on ``(R, psi)`` only.  A branch of
periodic orbits in general position leaves a normal mode when its equilibrium
hits the boundary ``R = E`` (planar mode) or ``R = 0`` (vertical mode).  The
boundary condition is a power series in ``E``; it is inverted as a formal
series in the detuning ``delta`` by Newton iteration on truncated series.

Four branches are distinguished.  ``halo_y`` (loops leaving the planar mode,
``cos 2psi = -1``), ``antihalo_y`` (inclined orbits, ``cos 2psi = +1``),
``halo_z`` and ``antihalo_z`` (the same at the vertical mode).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .cr3bp_model import (EquilibriumGeometry, ProblemSpec, SynodicState, local_to_synodic,
                          to_physical_energy)
from .normal_form import CmCoefficients, ResonantNormalForm, center_manifold_reduce
from .poly_algebra import NDOF, NVARS, Polynomial, lie_transform

KINDS = ("halo_y", "antihalo_y", "halo_z", "antihalo_z")
DEGENERACY_TOL = 1e-12
SCHEMA_VERSION = "halobif.threshold/1"


class DegenerateThresholdError(ArithmeticError):
    """The first-order denominator of a threshold vanishes."""


# -- truncated power series in delta -------------------------------------------------
# arrays c[0..N] stand for sum c_k delta^k

def _series_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.convolve(a, b)[:len(a)]


def _series_inv(a: np.ndarray) -> np.ndarray:
    if a[0] == 0:
        raise ZeroDivisionError("series has no constant term")
    out = np.zeros_like(a)
    out[0] = 1 / a[0]
    for k in range(1, len(a)):
        out[k] = -np.dot(a[1:k + 1], out[k - 1::-1][:k]) / a[0]
    return out


def _series_compose(coeffs, x: np.ndarray) -> np.ndarray:
    """``sum_n coeffs[n] x^n`` for a series ``x`` without constant term.

    Powers are summed in increasing order: ``x^n`` vanishes exactly below
    degree ``n``, so the low coefficients do not depend on the truncation.
    """
    out = np.zeros_like(x)
    power = np.zeros_like(x)
    power[0] = 1.0
    for n, c in enumerate(coeffs):
        if n:
            power = _series_mul(power, x)
        out = out + c * power
    return out


def solve_series(f: list[float], N: int, rhs: float = 1.0) -> np.ndarray:
    """Solve ``sum_{n>=1} f[n] E^n = rhs * delta`` for ``E = sum_k C_k delta^k``.

    Returns ``[0, C_1, ..., C_N]``.  ``f[0]`` is ignored.
    """
    f = [0.0] + list(f[1:])
    if abs(f[1]) < DEGENERACY_TOL:
        raise DegenerateThresholdError(f"first-order coefficient {f[1]:.3e} vanishes")
    df = [n * f[n] for n in range(1, len(f))] + [0.0]
    target = np.zeros(N + 1)
    if N >= 1:
        target[1] = rhs
    E = np.zeros(N + 1)
    # each Newton step doubles the number of correct coefficients; those already
    # correct are frozen so that lower orders do not depend on N
    known = 0
    while known < N:
        residual = _series_compose(f, E) - target
        residual[:known + 1] = 0.0  # vanishes by construction; drop its roundoff
        slope = _series_compose(df, E)
        step = E - _series_mul(residual, _series_inv(slope))
        upto = min(N, max(1, 2 * known))
        E[known + 1:upto + 1] = step[known + 1:upto + 1]
        known = upto
    return E


# -- reduced coefficients ------------------------------------------------------------

@dataclass(frozen=True)
class ReducedCoeffs:
    """Constants of the first-order reduced Hamiltonian
    ``w_z E + delta R + a R^2 + b E^2 + c E R + d (R^2 - E R) cos 2psi``.
    """

    a: float
    b: float
    c: float
    d: float
    source: CmCoefficients

    @classmethod
    def from_cm(cls, cm: CmCoefficients) -> "ReducedCoeffs":
        return cls(cm.alpha + cm.beta - cm.sigma, cm.beta, cm.sigma - 2 * cm.beta, -2 * cm.tau, cm)

    def hamiltonian(self, E, R, psi):
        cm = self.source
        return (cm.omega_z * E + cm.delta * R + self.a * R**2 + self.b * E**2 + self.c * E * R
                + self.d * (R**2 - E * R) * np.cos(2 * psi))

    def vector_field(self, E, R, psi):
        """``(dR/dt, dpsi/dt)`` of the reduced flow."""
        cm = self.source
        Rdot = 2 * self.d * R * (R - E) * np.sin(2 * psi)
        psidot = cm.delta + 2 * self.a * R + self.c * E + self.d * (2 * R - E) * np.cos(2 * psi)
        return Rdot, psidot

    def loop_equilibrium(self, E: float) -> float:
        """``R`` of the loop equilibrium at ``psi = +-pi/2``."""
        cm = self.source
        return -(cm.delta + (self.c + self.d) * E) / (2 * (self.a - self.d))

    def inclined_equilibrium(self, E: float) -> float:
        """``R`` of the inclined equilibrium at ``psi = 0, pi``."""
        cm = self.source
        return -(cm.delta + (self.c - self.d) * E) / (2 * (self.a + self.d))


# -- thresholds ----------------------------------------------------------------------

def boundary_coefficients(cm: CmCoefficients, kind: str, N: int) -> tuple[list[float], float]:
    """Power-series form ``sum_n f_n E^n = rhs * delta`` of the branch condition."""
    a = cm.get
    if kind in ("halo_y", "antihalo_y"):
        sign = -1.0 if kind == "halo_y" else 1.0
        f = [0.0] + [a(n, 1, 0) - (n + 1) * a(n + 1, 0, 0) + sign * a(n, 1, 1)
                     for n in range(1, N + 1)]
        return f, 1.0
    if kind in ("halo_z", "antihalo_z"):
        sign = -1.0 if kind == "halo_z" else 1.0
        f = [0.0] + [a(1, n, 0) - (n + 1) * a(0, n + 1, 0) + sign * a(1, n, 1)
                     for n in range(1, N + 1)]
        return f, -1.0
    raise ValueError(f"unknown threshold kind {kind!r}")


def mode_energy_coefficients(cm: CmCoefficients, kind: str, N: int) -> list[float]:
    """``a_n`` of ``E = sum a_n E_cal^n`` on the relevant normal mode."""
    if kind.endswith("_y"):
        return [0.0, cm.omega_z + cm.delta] + [cm.get(n, 0, 0) for n in range(2, N + 1)]
    return [0.0, cm.omega_z] + [cm.get(0, n, 0) for n in range(2, N + 1)]


@dataclass
class ThresholdSeries:
    kind: str
    order: int
    delta: float
    C: np.ndarray
    a_n: list
    C_hat: np.ndarray
    E_phys: float | None = None

    @property
    def E_cal(self) -> float:
        return float(np.polyval(self.C[::-1], self.delta))

    @property
    def E_local(self) -> float:
        return float(np.polyval(self.C_hat[::-1], abs(self.delta)))

    def truncated(self, order: int) -> "ThresholdSeries":
        return ThresholdSeries(self.kind, order, self.delta, self.C[:order + 1].copy(),
                               self.a_n[:order + 1], self.C_hat[:order + 1].copy())


def threshold_series(cm: CmCoefficients, N: int, kind: str = "halo_y",
                     spec: ProblemSpec | None = None,
                     geometry: EquilibriumGeometry | None = None) -> ThresholdSeries:
    """Threshold ``E_cal = sum C_k delta^k`` and energy ``E = sum C_hat_n delta^n``.

    Both series are truncated at order ``N``.  When ``spec`` and ``geometry``
    are given the local energy is also converted to the synodic frame.
    """
    if N < 1:
        raise ValueError("order must be >= 1")
    if N > cm.order:
        raise ValueError(f"coefficients only reach order {cm.order}")
    f, rhs = boundary_coefficients(cm, kind, N)
    # the series is in |delta|; the sign of delta is carried by rhs
    if cm.delta <= 0:
        raise DegenerateThresholdError(f"detuning must be positive, got {cm.delta}")
    C = solve_series(f, N, rhs)
    a_n = mode_energy_coefficients(cm, kind, N)
    # a_1 contains delta itself: split it so C_hat is a pure delta series
    C_hat = _series_compose([0.0, cm.omega_z] + a_n[2:], C)
    if kind.endswith("_y"):
        C_hat[1:] += C[:-1]  # delta * E_cal
    out = ThresholdSeries(kind, N, cm.delta, C, a_n, C_hat)
    if spec is not None and geometry is not None:
        out.E_phys = to_physical_energy(out.E_local, spec, geometry)
    return out


def first_order_thresholds(cm: CmCoefficients) -> dict[str, float]:
    """Closed-form first-order thresholds of the four branches."""
    al, be, si, ta, de = cm.alpha, cm.beta, cm.sigma, cm.tau, cm.delta
    dens = {"halo_y": si - 2 * (al + ta), "antihalo_y": si - 2 * (al - ta),
            "halo_z": 2 * (be + ta) - si, "antihalo_z": 2 * (be - ta) - si}
    out = {}
    for k, d in dens.items():
        if abs(d) < DEGENERACY_TOL:
            raise DegenerateThresholdError(f"{k}: denominator {d:.3e} vanishes")
        out[k] = de / d
    return out


def first_order_energy(cm: CmCoefficients) -> float:
    return cm.omega_z * first_order_thresholds(cm)["halo_y"]


def energy_on_mode(cm: CmCoefficients, E_cal: float, N: int, mode: str = "y") -> float:
    coeffs = mode_energy_coefficients(cm, "halo_" + mode, N)
    return float(sum(c * E_cal**n for n, c in enumerate(coeffs)))


# -- Floquet route -------------------------------------------------------------------

@dataclass
class FloquetData:
    floquet_matrix: np.ndarray
    eigenvalue: complex
    kappa: float
    monodromy_trace: complex


def floquet_matrix(cm: CmCoefficients, E_cal: float, mode: str = "y") -> np.ndarray:
    if mode == "y":
        u = cm.delta + (2 * cm.alpha - cm.sigma) * E_cal
        v = 2 * cm.tau * E_cal
        return -1j * np.array([[u, v], [-v, -u]])
    u = cm.delta - (2 * cm.beta - cm.sigma) * E_cal
    v = 2 * cm.tau * E_cal
    return 1j * np.array([[u, -v], [v, -u]])


def floquet_data(cm: CmCoefficients, E_cal: float, mode: str = "y") -> FloquetData:
    F = floquet_matrix(cm, E_cal, mode)
    lam = cmath.sqrt(-np.linalg.det(F))
    kappa = cm.omega_y + 2 * cm.alpha * E_cal if mode == "y" else cm.omega_z + 2 * cm.beta * E_cal
    return FloquetData(F, lam, kappa, 2 * cmath.cos(2 * math.pi * lam / kappa))


def floquet_thresholds(cm: CmCoefficients) -> dict[str, float]:
    """Thresholds as the zeros of the Floquet exponent.

    ``lambda^2 = -det F`` is quadratic in ``E_cal``; it is sampled, its roots
    found and polished, and each root is labelled by which off-diagonal sign
    balances the diagonal there.
    """
    out = {}
    for mode in ("y", "z"):
        def lam2(E):
            return (-np.linalg.det(floquet_matrix(cm, E, mode))).real

        s = np.array([lam2(-1.0), lam2(0.0), lam2(1.0)])
        coeffs = [(s[0] + s[2]) / 2 - s[1], (s[2] - s[0]) / 2, s[1]]
        for r in np.roots(coeffs):
            E = float(r.real)
            for _ in range(3):
                h = 1e-6 * max(1.0, abs(E))
                slope = (lam2(E + h) - lam2(E - h)) / (2 * h)
                if slope != 0:
                    E -= lam2(E) / slope
            F = floquet_matrix(cm, E, mode)
            diag, off = F[0, 0], F[0, 1]
            # halo (cos 2psi = -1): the diagonal cancels the off-diagonal entry
            halo = abs(diag + off) < abs(diag - off)
            out[("halo_" if halo else "antihalo_") + mode] = E
    return out


# -- variational frequency -----------------------------------------------------------

@dataclass
class VariationalInfo:
    kappa_y_hnm: complex
    kappa_y: float
    rho: complex


def variational_info(cm: CmCoefficients, E_cal: float) -> VariationalInfo:
    th = first_order_thresholds(cm)
    prod = (th["antihalo_y"] - E_cal) * (th["halo_y"] - E_cal)
    scale = (2 * cm.alpha - cm.sigma) ** 2 - 4 * cm.tau**2
    kappa = cmath.sqrt(prod) * cmath.sqrt(scale)
    if scale < 0 and prod < 0:
        kappa = -kappa  # keep the principal branch of the product
    ky = cm.omega_y + 2 * cm.alpha * E_cal
    return VariationalInfo(kappa, ky, kappa / ky)


# -- initial conditions --------------------------------------------------------------

def coordinate_functions(nf: ResonantNormalForm, max_degree: int | None = None) -> list[Polynomial]:
    """Diagonal coordinates as polynomials in the normalized ones."""
    D = max_degree if max_degree is not None else nf.max_degree - 1
    funcs = []
    for i in range(NVARS):
        f = Polynomial.variable(i, "normalized")
        for n in sorted(nf.generators):
            f = lie_transform(f, nf.generators[n], D)
        funcs.append(f)
    return funcs


def normalized_point(Iy: float, theta_y: float, Iz: float = 0.0, theta_z: float = 0.0) -> np.ndarray:
    y = np.zeros(NVARS, dtype=complex)
    y[1] = -1j * math.sqrt(Iy) * cmath.exp(1j * theta_y)
    y[1 + NDOF] = math.sqrt(Iy) * cmath.exp(-1j * theta_y)
    y[2] = -1j * math.sqrt(Iz) * cmath.exp(1j * theta_z)
    y[2 + NDOF] = math.sqrt(Iz) * cmath.exp(-1j * theta_z)
    return y


def normalized_to_local(nf: ResonantNormalForm, y: np.ndarray, funcs=None) -> np.ndarray:
    funcs = funcs or coordinate_functions(nf)
    xd = np.array([f(y) for f in funcs])
    loc = nf.diag_map.forward @ xd
    if np.abs(loc.imag).max() > 1e-9 * max(1.0, np.abs(loc).max()):
        raise ValueError("local state is not real; transform is inconsistent")
    return loc.real


@dataclass
class HaloSeed:
    X0: float
    Ydot0: float
    state: SynodicState
    E_cal: float
    theta_y: float


def halo_initial_conditions(nf: ResonantNormalForm, order: int | None = None,
                            cm: CmCoefficients | None = None) -> HaloSeed:
    """Planar Lyapunov orbit at the halo threshold, at a perpendicular ``y = 0`` crossing.

    Of the two crossings the one with positive local ``x`` is returned.  In
    the normalized chart the planar position coordinate is ``sqrt(2 I_y)
    sin theta_y``, so the crossings sit at ``theta_y = 0, pi``.
    """
    cm = cm or center_manifold_reduce(nf)
    N = order or nf.order
    E_cal = threshold_series(cm, N).E_cal
    funcs = coordinate_functions(nf)
    best = None
    for theta in (0.0, math.pi):
        loc = normalized_to_local(nf, normalized_point(E_cal, theta), funcs)
        if best is None or loc[0] > best[1][0]:
            best = (theta, loc)
    theta, loc = best
    state = local_to_synodic(loc, nf.spec, nf.geometry)
    return HaloSeed(state.X, float(state.velocity()[1]), state, E_cal, theta)


# -- closed-form small mass ratio series ---------------------------------------------

_E1_SERIES = {
    "L1": ((0.0, 0.337333), (1 / 3, -0.121141), (2 / 3, -0.0187564), (1.0, -0.115146)),
    "L2": ((0.0, 0.337333), (1 / 3, 0.121141), (2 / 3, -0.0187564), (1.0, -0.0605633)),
    "L3": ((0.0, 0.321839), (1.0, 1.18875), (2.0, -5.9889), (3.0, -108.784)),
}


def small_mu_threshold_series(point: str, mu: float) -> float:
    """First-order local threshold energy from its small mass ratio expansion."""
    if not 0 < mu <= 0.5:
        raise ValueError("mu must lie in (0, 1/2]")
    return sum(c * mu**p for p, c in _E1_SERIES[point])


# -- records -------------------------------------------------------------------------

@dataclass
class ThresholdRecord:
    point: str
    mu: float
    order: int
    E_cal: float
    E_local: float
    E_phys: float
    thresholds: dict = field(default_factory=dict)
    method: str = "DM"

    def to_dict(self) -> dict:
        return {"schema": SCHEMA_VERSION, "point": self.point, "mu": self.mu, "order": self.order,
                "method": self.method, "E_cal": self.E_cal, "E_local": self.E_local,
                "E_phys": self.E_phys,
                "thresholds": {"ly": self.thresholds["halo_y"], "iy": self.thresholds["antihalo_y"],
                               "lz": self.thresholds["halo_z"], "iz": self.thresholds["antihalo_z"]}}


def threshold_record(nf: ResonantNormalForm, cm: CmCoefficients, order: int) -> ThresholdRecord:
    ts = threshold_series(cm, order, "halo_y", nf.spec, nf.geometry)
    return ThresholdRecord(nf.spec.point, nf.spec.mu, order, ts.E_cal, ts.E_local, ts.E_phys,
                           first_order_thresholds(cm))
