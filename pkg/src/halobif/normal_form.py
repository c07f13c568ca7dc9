"""Resonant Birkhoff normalization and the center-manifold reduction.

The kernel of the homological operator is that of the exactly resonant
quadratic part ``lx Q1P1 + i wz (Q2P2 + Q3P3)``: a monomial
``Q^k P^l`` is resonant when ``k1 == l1`` and ``k2 + k3 == l2 + l3``.  The
detuning monomial ``i delta Q2P2`` sits in that kernel and is never removed.

Two ways of solving the homological equation are offered.  ``"detuned"``
(default) divides by the eigenvalues of the true quadratic part, so that the
transformed quadratic part stays exactly ``H2``.  ``"resonant"`` strips the
detuning first and divides by the resonant eigenvalues, then adds the
detuning back; the transformation then leaves ``{delta Q2P2, chi}`` terms
that are absorbed only at the next degree, and the quartic coefficients differ
from the detuned ones at first order in ``delta``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .linearization import (DegenerateLinearizationError, DiagonalizingMap, QuadraticData,
                            build_diagonalizing_map, diagonal_quadratic, quadratic_data)
from . import _appendix
from .cr3bp_model import (EquilibriumGeometry, ProblemSpec, build_hamiltonian, model_coefficients,
                    solve_gamma)
from .poly_algebra import (DEFAULT_PRUNE, NDOF, Polynomial, lie_transform, poisson_bracket,
                   polynomial_norm)

SMALL_DIVISOR = 1e-9
IMAG_TOL = 1e-10
SCHEMA_VERSION = "halobif.normal_form/2"
SCHEMES = ("detuned", "resonant")
DEFAULT_SCHEME = "detuned"


class SmallDivisorError(ArithmeticError):
    """A non-resonant monomial met a divisor below the cutoff."""


class NonRealCoefficientError(ValueError):
    """A center-manifold coefficient kept a sizeable imaginary part."""


def kernel_mask(exps: np.ndarray) -> np.ndarray:
    k, l = exps[:, :NDOF], exps[:, NDOF:]
    return (k[:, 0] == l[:, 0]) & (k[:, 1] + k[:, 2] == l[:, 1] + l[:, 2])


def divisors(exps: np.ndarray, qd: QuadraticData, scheme: str = DEFAULT_SCHEME) -> np.ndarray:
    """Eigenvalue of ``{., H2}`` on each monomial (``d`` with {H2, m} = -d m)."""
    k, l = exps[:, :NDOF], exps[:, NDOF:]
    dk = k - l
    wy = qd.omega_z if scheme == "resonant" else qd.omega_y
    return qd.lambda_x * dk[:, 0] + 1j * (wy * dk[:, 1] + qd.omega_z * dk[:, 2])


def split_kernel(p: Polynomial) -> tuple[Polynomial, Polynomial]:
    ker = p.select(kernel_mask)
    return ker, p - ker


def solve_homological(h: Polynomial, qd: QuadraticData, scheme: str = DEFAULT_SCHEME,
                      cutoff: float = SMALL_DIVISOR) -> tuple[Polynomial, Polynomial]:
    """Return ``(chi, kernel)`` with ``h + {H2, chi} = kernel``."""

    def gen(n, exps, a):
        d = divisors(exps, qd, scheme)
        res = kernel_mask(exps)
        active = (~res) & (a != 0)
        if np.any(np.abs(d[active]) < cutoff):
            raise SmallDivisorError(
                f"divisor below {cutoff:g} at degree {n}; the hyperbolic exponent is nearly zero "
                "(L3 at small mass ratio is a singular perturbation problem)")
        out = np.zeros_like(a)
        out[active] = a[active] / d[active]
        return out

    return h.map_parts(gen), h.select(kernel_mask)


@dataclass
class ResonantNormalForm:
    spec: ProblemSpec
    geometry: EquilibriumGeometry
    quadratic: QuadraticData
    diag_map: DiagonalizingMap
    order: int
    max_degree: int
    K: Polynomial
    generators: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)
    scheme: str = DEFAULT_SCHEME
    input_norms: dict = field(default_factory=dict)

    def term(self, n: int) -> Polynomial:
        return self.K.homogeneous(n)

    def center_manifold_part(self, n: int | None = None) -> Polynomial:
        p = self.K if n is None else self.K.homogeneous(n)
        return p.select(lambda e: (e[:, 0] == 0) & (e[:, NDOF] == 0))

    def to_dict(self) -> dict:
        def poly(p):
            return [[list(e), [c.real, c.imag]] for e, c in p.terms()]
        return {
            "schema": SCHEMA_VERSION,
            "point": self.spec.point,
            "mu": self.spec.mu,
            "expansion_degree": self.spec.expansion_degree,
            "order": self.order,
            "scheme": self.scheme,
            "gamma": self.geometry.gamma,
            "quadratic": vars(self.quadratic),
            "diag_map": {"re": self.diag_map.forward.real.tolist(),
                         "im": self.diag_map.forward.imag.tolist(),
                         "real_basis": self.diag_map.real_basis.tolist()},
            "K": poly(self.K),
            "generators": {str(n): poly(g) for n, g in self.generators.items()},
            "residuals": {str(n): r for n, r in self.residuals.items()},
            "input_norms": {str(n): r for n, r in self.input_norms.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ResonantNormalForm":
        if d.get("schema") != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema {d.get('schema')!r}")

        def poly(items, chart):
            return Polynomial.from_terms([(tuple(e), complex(*c)) for e, c in items], chart)

        spec = ProblemSpec(d["mu"], d["point"], d["expansion_degree"])
        C = np.array(d["diag_map"]["re"]) + 1j * np.array(d["diag_map"]["im"])
        dmap = DiagonalizingMap(C, np.linalg.inv(C), np.array(d["diag_map"]["real_basis"]))
        geometry = solve_gamma(spec)
        return cls(spec, geometry, QuadraticData(**d["quadratic"]), dmap, d["order"],
                   d["expansion_degree"], poly(d["K"], "normalized"),
                   {int(n): poly(g, "normalized") for n, g in d["generators"].items()},
                   {int(n): r for n, r in d["residuals"].items()}, d.get("scheme", DEFAULT_SCHEME),
                   {int(n): r for n, r in d.get("input_norms", {}).items()})

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ResonantNormalForm":
        return cls.from_dict(json.loads(text))


def diagonal_hamiltonian(spec: ProblemSpec):
    """Return ``(geometry, qd, map, H_diag)`` for a problem."""
    geometry = solve_gamma(spec)
    coeffs = model_coefficients(spec, geometry)
    qd = quadratic_data(coeffs.c2)
    dmap = build_diagonalizing_map(qd)
    H = build_hamiltonian(spec, dmap.forward, chart="diagonal", coefficients=coeffs)
    return geometry, qd, dmap, H


def normalize(H_diag: Polynomial, qd: QuadraticData, N: int, max_degree: int | None = None,
              scheme: str = DEFAULT_SCHEME, prune: float = DEFAULT_PRUNE):
    """Normalize ``H_diag`` through degree ``2N + 2``.

    Returns ``(K, generators, residuals, input_norms)`` where ``K`` is in normal form with
    respect to the resonant quadratic part, generators maps degree to the Lie
    generator applied at that step, and residuals holds the norm of
    ``{H2_res, K_n}`` before the kernel projection, relative to the norm of the
    degree-``n`` input to the homological solve.  ``input_norms`` holds that
    input norm, which sets the roundoff floor of the degree-``n`` terms.

    ``scheme="resonant"`` normalizes the exactly resonant Hamiltonian and adds
    the detuning monomial back at the end; ``"detuned"`` keeps the detuning in
    the quadratic part and divides by the true frequencies instead.
    """
    if scheme not in SCHEMES:
        raise ValueError(scheme)
    if N < 1:
        raise ValueError("order must be >= 1")
    D = 2 * N + 2 if max_degree is None else max_degree
    detuning = Polynomial.from_terms({(0, 1, 0, 0, 1, 0): 1j * qd.delta}, H_diag.chart)
    H = H_diag.truncate(D).prune(prune)
    H2 = H.homogeneous(2)
    H2_exact = diagonal_quadratic(qd, H_diag.chart)
    off = (H2 - H2_exact).max_abs()
    if off > 1e-9 * max(1.0, H2_exact.max_abs()):
        raise DegenerateLinearizationError(f"quadratic part is not diagonal (residual {off:.2e})")
    H = H - H2 + H2_exact
    if scheme == "resonant":
        H = H - detuning
    generators = {}
    residuals = {}
    input_norms = {}
    H2r = diagonal_quadratic(qd, H_diag.chart, resonant=True)
    for n in range(3, D + 1):
        hn = H.homogeneous(n)
        input_norms[n] = polynomial_norm(hn)
        chi, _ = solve_homological(hn, qd, scheme)
        chi = chi.prune(prune)
        if not chi.is_zero():
            generators[n] = chi.with_chart("normalized")
            H = lie_transform(H, chi, D).prune(prune)
        Kn = H.homogeneous(n)
        ref = max(polynomial_norm(hn), polynomial_norm(Kn), 1.0)
        residuals[n] = polynomial_norm(poisson_bracket(H2r, Kn)) / ref
        # what survives outside the kernel is roundoff of the homological solve
        H = H - Kn + Kn.select(kernel_mask)
    if scheme == "resonant":
        H = H + detuning
    return H.with_chart("normalized"), generators, residuals, input_norms


def compute_normal_form(spec: ProblemSpec, N: int, scheme: str = DEFAULT_SCHEME,
                        max_degree: int | None = None) -> ResonantNormalForm:
    """Normal form of order ``N``, by default through degree ``2N + 2``."""
    D = 2 * N + 2 if max_degree is None else max_degree
    if D < 2 * N + 2:
        raise ValueError(f"order {N} needs degree >= {2 * N + 2}")
    if spec.expansion_degree < D:
        spec = ProblemSpec(spec.mu, spec.point, D)
    geometry, qd, dmap, H = diagonal_hamiltonian(spec)
    K, gens, res, norms = normalize(H, qd, N, max_degree=D, scheme=scheme)
    return ResonantNormalForm(spec, geometry, qd, dmap, N, D, K, gens, res, scheme, norms)


# -- center manifold ---------------------------------------------------------------

@dataclass
class CmCoefficients:
    """Real coefficients of the reduced Hamiltonian on the center manifold.

    ``table[(j, k, m)]`` multiplies ``I_y^j I_z^k cos(2 m (theta_y - theta_z))``.
    """

    omega_y: float
    omega_z: float
    delta: float
    lambda_x: float
    table: dict
    max_action_degree: int

    def get(self, j: int, k: int, m: int = 0) -> float:
        return self.table.get((j, k, m), 0.0)

    @property
    def alpha(self) -> float:
        return self.get(2, 0)

    @property
    def beta(self) -> float:
        return self.get(0, 2)

    @property
    def sigma(self) -> float:
        return self.get(1, 1)

    @property
    def tau(self) -> float:
        return self.get(1, 1, 1) / 2

    @property
    def alpha3300(self) -> float:
        return self.get(3, 0)

    @property
    def alpha0033(self) -> float:
        return self.get(0, 3)

    @property
    def alpha2211(self) -> float:
        return self.get(2, 1)

    @property
    def alpha1122(self) -> float:
        return self.get(1, 2)

    @property
    def alpha3102(self) -> float:
        return self.get(2, 1, 1) / 2

    @property
    def alpha2013(self) -> float:
        return self.get(1, 2, 1) / 2

    @property
    def order(self) -> int:
        return self.max_action_degree - 1

    def evaluate(self, Iy, Iz, phi):
        """Reduced Hamiltonian at actions and resonant angle ``phi``."""
        total = self.omega_y * Iy + self.omega_z * Iz
        for (j, k, m), c in self.table.items():
            if j + k >= 2:
                total = total + c * Iy**j * Iz**k * np.cos(2 * m * phi)
        return total

    def truncated(self, order: int) -> "CmCoefficients":
        table = {key: c for key, c in self.table.items() if key[0] + key[1] <= order + 1}
        return CmCoefficients(self.omega_y, self.omega_z, self.delta, self.lambda_x, table,
                              min(order + 1, self.max_action_degree))

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "omega_y": self.omega_y, "omega_z": self.omega_z,
            "delta": self.delta, "lambda_x": self.lambda_x,
            "alpha": self.alpha, "beta": self.beta, "sigma": self.sigma, "tau": self.tau,
            "alpha3300": self.alpha3300, "alpha0033": self.alpha0033,
            "alpha2211": self.alpha2211, "alpha1122": self.alpha1122,
            "alpha2013": self.alpha2013, "alpha3102": self.alpha3102,
            "max_action_degree": self.max_action_degree,
            "table": [[j, k, m, c] for (j, k, m), c in sorted(self.table.items())],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CmCoefficients":
        table = {(int(j), int(k), int(m)): float(c) for j, k, m, c in d["table"]}
        return cls(d["omega_y"], d["omega_z"], d["delta"], d["lambda_x"], table,
                   d["max_action_degree"])


def center_manifold_reduce(nf: ResonantNormalForm, imag_tol: float = IMAG_TOL) -> CmCoefficients:
    """Set ``Q1 = P1 = 0`` and rewrite the rest in action-angle variables.

    With ``Q = -i sqrt(I) e^{i theta}`` and ``P = sqrt(I) e^{-i theta}`` the
    monomial ``Q2^k2 Q3^k3 P2^l2 P3^l3`` becomes
    ``(-i)^(k2+k3) I_y^((k2+l2)/2) I_z^((k3+l3)/2) e^{i (k2-l2)(theta_y-theta_z)}``.
    """
    cm = nf.center_manifold_part()
    raw: dict[tuple[int, int, int], complex] = {}
    for e, c in cm.terms():
        k2, k3, l2, l3 = e[1], e[2], e[4], e[5]
        if k2 + k3 != l2 + l3:
            raise NonRealCoefficientError(f"non-resonant monomial {e} survived normalization")
        j = k2 - l2
        if (k2 + l2) % 2 or (k3 + l3) % 2:
            if abs(c) > max(imag_tol, np.finfo(float).eps * nf.input_norms.get(sum(e), 0.0)):
                raise NonRealCoefficientError(f"odd harmonic {e} with coefficient {c}")
            continue
        key = ((k2 + l2) // 2, (k3 + l3) // 2, j)
        raw[key] = raw.get(key, 0j) + c * (-1j) ** (k2 + k3)
    # roundoff grows with the coefficients of each action degree and with the
    # size of the terms cancelled by the homological solve (large for L3)
    degree_scale: dict[int, float] = {}
    for (a, b, _), c in raw.items():
        degree_scale[a + b] = max(degree_scale.get(a + b, 1.0), abs(c))
    eps = np.finfo(float).eps
    for d in degree_scale:
        floor = eps * nf.input_norms.get(2 * d, 0.0) / imag_tol
        degree_scale[d] = max(degree_scale[d], floor)
    table: dict[tuple[int, int, int], float] = {}
    for (a, b, j), c in raw.items():
        if j < 0:
            continue
        if j == 0:
            val, sin_part = c, 0.0
        else:
            partner = raw.get((a, b, -j), 0j)
            val, sin_part = c + partner, 1j * (c - partner)
        scale = degree_scale[a + b]
        if abs(val.imag) > imag_tol * scale or abs(sin_part) > imag_tol * scale:
            raise NonRealCoefficientError(
                f"I_y^{a} I_z^{b} harmonic {j}: value {val}, sine part {sin_part}")
        if j % 2:
            if abs(val) > imag_tol * scale:
                raise NonRealCoefficientError(f"odd harmonic in resonant angle at {(a, b, j)}")
            continue
        if val.real != 0.0:
            table[(a, b, j // 2)] = float(val.real)
    for (a, b, j), c in raw.items():
        if j < 0 and (a, b, -j) not in raw and abs(c) > imag_tol * degree_scale[a + b]:
            raise NonRealCoefficientError(f"unpaired harmonic at {(a, b, j)}")
    qd = nf.quadratic
    wy = table.pop((1, 0, 0), qd.omega_y)
    wz = table.pop((0, 1, 0), qd.omega_z)
    return CmCoefficients(wy, wz, wy - wz, qd.lambda_x, table, nf.max_degree // 2)


def cm_coefficients(spec: ProblemSpec, N: int, scheme: str = DEFAULT_SCHEME) -> CmCoefficients:
    return center_manifold_reduce(compute_normal_form(spec, N, scheme))


# -- closed-form small mass ratio expansions -------------------------------------------

APPENDIX_QUANTITIES = ("alpha", "beta", "sigma", "tau", "delta", "omega_z")


def appendix_coefficients(point: str, which: str) -> tuple[float, ...]:
    """Expansion coefficients ``(c0, c1, c2, c3)`` of a first-order quantity."""
    if point not in _appendix.COEFFICIENTS:
        raise ValueError(f"unknown point {point!r}")
    if which not in APPENDIX_QUANTITIES:
        raise ValueError(f"unknown quantity {which!r}")
    return _appendix.COEFFICIENTS[point][which]


def appendix_series(point: str, which: str, mu: float) -> float:
    """Truncated small mass ratio series of a first-order coefficient.

    Powers of ``mu^(1/3)`` for L1/L2 and of ``mu`` for L3.
    """
    if not 0.0 < mu <= 0.5:
        raise ValueError(f"mass ratio must lie in (0, 1/2], got {mu}")
    coeffs = appendix_coefficients(point, which)
    t = mu if point == "L3" else mu ** (1 / 3)
    return float(sum(c * t**j for j, c in enumerate(coeffs)))
