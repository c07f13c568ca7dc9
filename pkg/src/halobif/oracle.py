"""Numerical periodic-orbit oracle in the full synodic equations of motion.

Planar Lyapunov orbits are represented by their perpendicular crossing
``(X0, 0, 0, 0, Ydot0, 0)`` (positions and velocities).  The family is
continued by pseudo-arclength in ``(X0, Ydot0)``; its halo bifurcation is
where the trace of the out-of-plane monodromy block passes through +2.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .cr3bp_model import (ConvergenceError, ProblemSpec, SynodicState, local_to_synodic, solve_gamma,
                          synodic_hamiltonian, synodic_vector_field)
from .linearization import build_diagonalizing_map, quadratic_data
from .cr3bp_model import model_coefficients
from .poly_algebra import NVARS, symplectic_form

CLOSURE_TOL = 1e-9
NEWTON_TOL = 1e-11


class NoCrossingError(RuntimeError):
    """The stability index never reached +2 along the continued family."""


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-12
    atol: float = 1e-12
    max_step: float = np.inf
    method: str = "DOP853"

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("tolerances must be positive")

    def halved(self) -> "IntegratorConfig":
        return IntegratorConfig(self.rtol / 2, self.atol / 2, self.max_step, self.method)


@dataclass
class Trajectory:
    t: float
    state: np.ndarray
    stm: np.ndarray | None = None
    event_time: float | None = None


def _hessian_potential(state: np.ndarray, mu: float) -> np.ndarray:
    """Hessian of ``-(1-mu)/r1 - mu/r2`` in ``(X, Y, Z)``."""
    X, Y, Z = state[:3]
    out = np.zeros((3, 3))
    for m, xc in ((1 - mu, mu), (mu, mu - 1)):
        d = np.array([X - xc, Y, Z])
        r2 = d @ d
        r = math.sqrt(r2)
        out += m * (np.eye(3) / r**3 - 3 * np.outer(d, d) / r**5)
    return out


def variational_matrix(state: np.ndarray, mu: float) -> np.ndarray:
    """Jacobian of the synodic vector field."""
    A = np.zeros((NVARS, NVARS))
    A[0, 3] = A[1, 4] = A[2, 5] = 1.0
    A[0, 1], A[1, 0] = 1.0, -1.0
    A[3, 4], A[4, 3] = 1.0, -1.0
    A[3:, :3] = -_hessian_potential(state, mu)
    return A


def _rhs(mu: float, with_stm: bool):
    def f(t, y):
        x = y[:NVARS]
        dx = synodic_vector_field(x, mu)
        if not with_stm:
            return dx
        phi = y[NVARS:].reshape(NVARS, NVARS)
        return np.concatenate([dx, (variational_matrix(x, mu) @ phi).ravel()])
    return f


def integrate(state, t: float, mu: float, cfg: IntegratorConfig = IntegratorConfig(),
              with_stm: bool = False, stop_at_y_crossing: bool = False,
              min_time: float = 0.0) -> Trajectory:
    """Integrate for time ``t`` (optionally stopping at the first ``Y = 0`` crossing after ``min_time``)."""
    x0 = state.as_array() if isinstance(state, SynodicState) else np.asarray(state, dtype=float)
    y0 = np.concatenate([x0, np.eye(NVARS).ravel()]) if with_stm else x0
    f = _rhs(mu, with_stm)
    opts = dict(method=cfg.method, rtol=cfg.rtol, atol=cfg.atol, max_step=cfg.max_step)
    t0 = 0.0
    events = None
    if stop_at_y_crossing:
        # no event test before min_time: the start itself sits on Y = 0
        if min_time > 0:
            first = solve_ivp(f, (0.0, min_time), y0, **opts)
            if first.status == -1:
                raise ConvergenceError(f"integration failed: {first.message}")
            y0, t0 = first.y[:, -1], min_time

        def crossing(tt, y):
            return y[1]
        crossing.terminal = True
        events = crossing
    sol = solve_ivp(f, (t0, t), y0, events=events, **opts)
    if sol.status == -1:
        raise ConvergenceError(f"integration failed: {sol.message}")
    y = sol.y[:, -1]
    te = None
    if stop_at_y_crossing:
        if not len(sol.t_events[0]):
            raise ConvergenceError("no Y = 0 crossing within the integration window")
        te = float(sol.t_events[0][0])
        y = sol.y_events[0][0]
    stm = y[NVARS:].reshape(NVARS, NVARS) if with_stm else None
    return Trajectory(te if te is not None else float(sol.t[-1]), y[:NVARS].copy(), stm, te)


def monodromy_checks(M: np.ndarray) -> dict:
    J = symplectic_form()
    return {"symplectic": float(np.abs(M.T @ J @ M - J).max()),
            "det": float(np.linalg.det(M))}


# -- planar Lyapunov family ----------------------------------------------------------

def crossing_state(X0: float, Ydot0: float) -> np.ndarray:
    return SynodicState.from_velocity(X0, 0.0, 0.0, 0.0, Ydot0, 0.0).as_array()


@dataclass
class LyapunovFamilyPoint:
    X0: float
    Ydot0: float
    period: float
    energy: float
    stability_index: float
    closure: float
    drift: float = math.nan
    monodromy: np.ndarray = field(repr=False, default=None)


def _half_period_residual(X0, Ydot0, t_guess, mu, cfg):
    """``(Y, Xdot)`` at the next crossing and its derivatives w.r.t. ``(X0, Ydot0, t)``."""
    tr = integrate(crossing_state(X0, Ydot0), 2.5 * t_guess, mu, cfg, with_stm=True,
                   stop_at_y_crossing=True, min_time=0.5 * t_guess)
    x, phi = tr.state, tr.stm
    f = synodic_vector_field(x, mu)
    # Xdot = PX + Y
    dxdot = phi[3] + phi[1]
    ds_dx0 = np.zeros(NVARS)
    ds_dx0[0] = ds_dx0[4] = 1.0
    ds_dv0 = np.zeros(NVARS)
    ds_dv0[4] = 1.0
    xdot = x[3] + x[1]
    jac = np.array([
        [phi[1] @ ds_dx0, phi[1] @ ds_dv0, f[1]],
        [dxdot @ ds_dx0, dxdot @ ds_dv0, f[3] + f[1]],
    ])
    return np.array([x[1], xdot]), jac, tr.t


def _crossing_gradient(jac: np.ndarray) -> np.ndarray:
    """Derivative of ``Xdot`` at the crossing w.r.t. ``(X0, Ydot0)`` with the time moved onto ``Y = 0``."""
    return jac[1, :2] - jac[1, 2] * jac[0, :2] / jac[0, 2]


def full_orbit(X0: float, Ydot0: float, half_period: float, mu: float,
               cfg: IntegratorConfig) -> LyapunovFamilyPoint:
    """Monodromy over the full period.

    ``closure`` is the perpendicularity defect at the half-period crossing, which
    by reversibility makes the orbit exactly periodic; ``drift`` is the raw
    full-period mismatch, inflated by the orbit's instability.
    """
    s0 = crossing_state(X0, Ydot0)
    half = integrate(s0, half_period, mu, cfg)
    closure = float(max(abs(half.state[1]), abs(half.state[3] + half.state[1])))
    tr = integrate(s0, 2 * half_period, mu, cfg, with_stm=True)
    M = tr.stm
    drift = float(np.abs(tr.state - s0).max())
    index = float(M[2, 2] + M[5, 5])
    return LyapunovFamilyPoint(X0, Ydot0, 2 * half_period, synodic_hamiltonian(s0, mu), index,
                               closure, drift, M)


def correct_lyapunov(seed: tuple[float, float], spec: ProblemSpec, cfg: IntegratorConfig = IntegratorConfig(),
                     half_period: float | None = None, fix: str = "X0",
                     max_iter: int = 25) -> LyapunovFamilyPoint:
    """Newton on ``Xdot = 0`` at the half-period ``Y = 0`` return, holding ``fix`` constant."""
    X0, V0 = seed
    if half_period is None:
        qd = quadratic_data(model_coefficients(spec, solve_gamma(spec)).c2)
        half_period = math.pi / qd.omega_y
    t = half_period
    for _ in range(max_iter):
        res, jac, t = _half_period_residual(X0, V0, t, spec.mu, cfg)
        if abs(res[1]) < NEWTON_TOL:
            break
        col = 1 if fix == "X0" else 0
        step = -res[1] / _crossing_gradient(jac)[col]
        if fix == "X0":
            V0 += step
        else:
            X0 += step
    else:
        raise ConvergenceError("differential correction did not converge")
    return full_orbit(X0, V0, t, spec.mu, cfg)


def linear_seed(spec: ProblemSpec, amplitude: float = 1e-3) -> tuple[float, float]:
    """Perpendicular crossing of the linear planar Lyapunov orbit; ``amplitude`` in units of gamma."""
    geometry = solve_gamma(spec)
    qd = quadratic_data(model_coefficients(spec, geometry).c2)
    basis = build_diagonalizing_map(qd).real_basis
    # the reversor-even direction of the planar pair: y = px = 0 at the crossing
    v = basis[:, 4]
    loc = amplitude * v / abs(v[0])
    s = local_to_synodic(loc, spec, geometry)
    return s.X, float(s.velocity()[1])


@dataclass
class ContinuationResult:
    points: list[LyapunovFamilyPoint]

    def to_csv(self, digits: int = 9) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["E_phys", "T", "X0", "Ydot0", "stability_index"])
        fmt = f"{{:.{digits}g}}"
        for p in self.points:
            w.writerow([fmt.format(v) for v in (p.energy, p.period, p.X0, p.Ydot0, p.stability_index)])
        return buf.getvalue()


def continue_family(spec: ProblemSpec, cfg: IntegratorConfig = IntegratorConfig(),
                    amplitude: float = 1e-3, ds: float | None = None, max_steps: int = 400,
                    stop=None) -> ContinuationResult:
    """Pseudo-arclength continuation of the planar Lyapunov family in ``(X0, Ydot0)``.

    The half-period is not a continuation unknown: the crossing event fixes it.
    ``stop(prev, cur)`` ends the run when it returns true.
    """
    geometry = solve_gamma(spec)
    first = correct_lyapunov(linear_seed(spec, amplitude), spec, cfg)
    points = [first]
    u = np.array([first.X0, first.Ydot0])
    half = first.period / 2
    x_eq = local_to_synodic(np.zeros(NVARS), spec, geometry).X
    # initial tangent: away from the equilibrium along the seed direction
    direction = np.array([first.X0 - x_eq, first.Ydot0])
    ds = ds if ds is not None else 5 * geometry.gamma * amplitude
    ds_max = 0.05 * geometry.gamma
    _, jac, _ = _half_period_residual(u[0], u[1], half, spec.mu, cfg)
    tangent = _null_direction(_crossing_gradient(jac), direction)
    for _ in range(max_steps):
        for _attempt in range(8):
            try:
                v, half_v = _arclength_newton(u + ds * tangent, half, u, tangent, ds, spec.mu, cfg)
                break
            except ConvergenceError:
                ds /= 2
        else:
            raise ConvergenceError("continuation step could not be corrected")
        p = full_orbit(v[0], v[1], half_v, spec.mu, cfg)
        if p.energy <= points[-1].energy:
            raise ConvergenceError("family energy is not increasing along the continuation")
        points.append(p)
        _, jac, _ = _half_period_residual(v[0], v[1], half_v, spec.mu, cfg)
        tangent = _null_direction(_crossing_gradient(jac), v - u)
        u, half = v, half_v
        if stop is not None and stop(points[-2], points[-1]):
            break
        ds = min(1.5 * ds, ds_max)
    return ContinuationResult(points)


def _null_direction(grad: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Unit vector orthogonal to ``grad``, oriented along ``reference``."""
    t = np.array([-grad[1], grad[0]])
    t = t / np.linalg.norm(t)
    return t if t @ reference >= 0 else -t


def _arclength_newton(u, half, u_prev, tangent, ds, mu, cfg, max_iter: int = 12):
    u = u.copy()
    for _ in range(max_iter):
        res, jac, half = _half_period_residual(u[0], u[1], half, mu, cfg)
        g = (u - u_prev) @ tangent - ds
        if abs(res[1]) < NEWTON_TOL and abs(g) < 1e-12:
            return u, half
        A = np.array([_crossing_gradient(jac), tangent])
        rhs = -np.array([res[1], g])
        try:
            du = np.linalg.solve(A, rhs)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError("singular arclength system") from exc
        u += du
    raise ConvergenceError("arclength corrector did not converge")


def numerical_threshold(spec: ProblemSpec, cfg: IntegratorConfig = IntegratorConfig(),
                        amplitude: float = 1e-3, max_steps: int = 400,
                        return_family: bool = False):
    """Energy where the out-of-plane stability index of the planar family reaches +2."""
    def crossed(prev, cur):
        return (prev.stability_index - 2) * (cur.stability_index - 2) <= 0

    fam = continue_family(spec, cfg, amplitude, max_steps=max_steps, stop=crossed)
    if len(fam.points) < 2 or not crossed(fam.points[-2], fam.points[-1]):
        raise NoCrossingError(f"no stability change found for {spec.point}, mu={spec.mu}")
    a, b = fam.points[-2], fam.points[-1]
    cache = {}

    def index_minus_two(X0):
        frac = (X0 - a.X0) / (b.X0 - a.X0)
        v_guess = a.Ydot0 + frac * (b.Ydot0 - a.Ydot0)
        t_guess = (a.period + frac * (b.period - a.period)) / 2
        p = correct_lyapunov((X0, v_guess), spec, cfg, t_guess, fix="X0")
        cache[X0] = p
        return p.stability_index - 2

    X = brentq(index_minus_two, a.X0, b.X0, xtol=1e-13, rtol=1e-14)
    p = cache.get(X) or correct_lyapunov((X, a.Ydot0), spec, cfg, a.period / 2)
    return (p.energy, p, fam) if return_family else p.energy
