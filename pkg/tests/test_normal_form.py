import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from halobif.bifurcation import coordinate_functions
from halobif.cr3bp_model import MU_EARTH_MOON, ProblemSpec
from halobif.linearization import diagonal_quadratic, quadratic_data
from halobif.normal_form import (APPENDIX_QUANTITIES, CmCoefficients, NonRealCoefficientError,
                                 ResonantNormalForm, SmallDivisorError, appendix_coefficients,
                                 appendix_series, center_manifold_reduce, cm_coefficients,
                                 compute_normal_form, diagonal_hamiltonian, kernel_mask,
                                 solve_homological)
from halobif.poly_algebra import NDOF, Polynomial, basis, poisson_bracket, polynomial_norm

from conftest import cached_cm, cached_normal_form


def quantity(cm, name):
    return getattr(cm, name)


@pytest.mark.parametrize("point", ["L1", "L2", "L3"])
def test_odd_degrees_vanish(point):
    nf = cached_normal_form(point, MU_EARTH_MOON, 3)
    for n in (3, 5, 7):
        assert nf.term(n).max_abs() <= 1e-12 * max(1.0, nf.term(n - 1).max_abs())


@pytest.mark.parametrize("point", ["L1", "L2", "L3"])
def test_kernel_and_residuals(point):
    nf = cached_normal_form(point, MU_EARTH_MOON, 3)
    for e, c in nf.K.terms():
        k, l = e[:NDOF], e[NDOF:]
        assert k[0] == l[0] and k[1] + k[2] == l[1] + l[2]
    H2r = diagonal_quadratic(nf.quadratic, "normalized", resonant=True)
    for n in range(3, nf.max_degree + 1):
        Kn = nf.term(n)
        assert polynomial_norm(poisson_bracket(H2r, Kn)) <= 1e-10 * max(polynomial_norm(Kn), 1.0)
        assert nf.residuals[n] <= 1e-10


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["detuned", "resonant"]), st.integers(3, 6))
def test_homological_equation(seed, scheme, degree):
    qd = quadratic_data(3.3)
    rng = np.random.default_rng(seed)
    m = len(basis(degree))
    h = Polynomial({degree: rng.normal(size=m) + 1j * rng.normal(size=m)}, "diagonal")
    chi, ker = solve_homological(h, qd, scheme)
    H2 = diagonal_quadratic(qd, "diagonal", resonant=(scheme == "resonant"))
    residual = h + poisson_bracket(H2, chi) - ker
    assert residual.max_abs() <= 1e-10 * h.max_abs()
    assert np.all(kernel_mask(basis(degree).exps)[np.flatnonzero(ker.part(degree))])


def test_small_divisor_error():
    qd = dataclasses.replace(quadratic_data(3.3), lambda_x=1e-12)
    # q1 q2 p2 has divisor lambda_x
    h = Polynomial.from_terms({(1, 1, 0, 0, 1, 0): 1.0}, "diagonal")
    with pytest.raises(SmallDivisorError):
        solve_homological(h, qd)


def test_first_order_constants_hill_limit():
    # q(mu) = q0 + q1 t + q2 t^2 + ... with t = mu^(1/3); at mu = 1e-9 the q1 t term
    # alone is ~2e-4, so the constants are read off by Richardson extrapolation in t
    mu = 1e-9
    a = cached_cm("L1", mu, 1)
    b = cached_cm("L1", mu / 8, 1)
    expect = {"alpha": -0.0956176, "beta": -0.0775862, "sigma": 0.0306614, "tau": -0.101288}
    for name, v in expect.items():
        q0 = 2 * quantity(b, name) - quantity(a, name)
        assert q0 == pytest.approx(v, abs=1e-5)
        assert quantity(a, name) == pytest.approx(appendix_series("L1", name, mu), abs=1e-5)


def test_l3_sigma_has_no_linear_term():
    mu = 1e-4
    cm = cm_coefficients(ProblemSpec(mu, "L3"), 1)
    assert abs(cm.sigma) <= 2 * 1.53125 * mu**2


def test_quartic_structure():
    nf = cached_normal_form("L1", MU_EARTH_MOON, 2)
    K4 = nf.center_manifold_part(4)
    allowed = {(0, 2, 0, 0, 2, 0), (0, 0, 2, 0, 0, 2), (0, 1, 1, 0, 1, 1),
               (0, 2, 0, 0, 0, 2), (0, 0, 2, 0, 2, 0)}
    present = {e for e, c in K4.terms() if abs(c) > 1e-12}
    assert present == allowed


def test_reduced_hamiltonian_patterns():
    cm = cached_cm("L2", MU_EARTH_MOON, 2)
    quartic = {k for k in cm.table if k[0] + k[1] == 2}
    sextic = {k for k in cm.table if k[0] + k[1] == 3}
    assert quartic == {(2, 0, 0), (0, 2, 0), (1, 1, 0), (1, 1, 1)}
    assert sextic == {(3, 0, 0), (0, 3, 0), (2, 1, 0), (1, 2, 0), (2, 1, 1), (1, 2, 1)}
    assert all(m <= (j + k) // 2 for j, k, m in cm.table)


def test_reduced_hamiltonian_matches_normal_form():
    nf = cached_normal_form("L1", MU_EARTH_MOON, 3)
    cm = cached_cm("L1", MU_EARTH_MOON, 3)
    from halobif.bifurcation import normalized_point
    for Iy, Iz, ty, tz in [(0.01, 0.02, 0.3, 1.1), (0.03, 0.005, -0.7, 2.0)]:
        y = normalized_point(Iy, ty, Iz, tz)
        val = nf.center_manifold_part()(y)
        assert abs(val.imag) <= 1e-12
        assert val.real == pytest.approx(cm.evaluate(Iy, Iz, ty - tz), abs=1e-12)


def test_energy_consistency_through_transform():
    nf = cached_normal_form("L2", MU_EARTH_MOON, 2)
    _, _, _, H = diagonal_hamiltonian(ProblemSpec(MU_EARTH_MOON, "L2", nf.max_degree))
    funcs = coordinate_functions(nf)
    rng = np.random.default_rng(4)
    for _ in range(4):
        y = (rng.normal(size=6) + 1j * rng.normal(size=6)) * 1e-3 / math.sqrt(12)
        x = np.array([f(y) for f in funcs])
        assert H.with_chart("normalized")(x) == pytest.approx(nf.K(y), abs=1e-16)


def test_schemes_agree_on_structure():
    spec = ProblemSpec(0.1, "L1")
    a = cm_coefficients(spec, 1, "detuned")
    b = cm_coefficients(spec, 1, "resonant")
    # both yield the same frequencies and agree to first order in delta
    assert a.delta == b.delta
    for name in ("alpha", "beta", "sigma", "tau"):
        assert quantity(a, name) == pytest.approx(quantity(b, name), rel=0.1, abs=1e-3)


def test_non_real_detection():
    nf = cached_normal_form("L1", MU_EARTH_MOON, 1)
    bad = nf.K + Polynomial.from_terms({(0, 2, 0, 0, 2, 0): 1e-6j}, "normalized")
    with pytest.raises(NonRealCoefficientError):
        center_manifold_reduce(dataclasses.replace(nf, K=bad))


def test_json_round_trips():
    nf = cached_normal_form("L3", MU_EARTH_MOON, 1)
    nf2 = ResonantNormalForm.from_json(nf.to_json())
    assert (nf2.K - nf.K).max_abs() == 0
    assert set(nf2.generators) == set(nf.generators)
    cm = center_manifold_reduce(nf)
    cm2 = CmCoefficients.from_dict(cm.to_dict())
    assert cm2.table == cm.table and cm2.delta == cm.delta


def test_appendix_examples():
    a0 = appendix_coefficients("L1", "alpha")[0]
    assert a0 == pytest.approx((430 - 1561 * math.sqrt(7)) / 38696, rel=1e-15)
    assert a0 == pytest.approx(-0.0956176, abs=1e-7)
    assert appendix_coefficients("L3", "delta")[1:3] == (7 / 16, -2485 / 1536)
    assert appendix_coefficients("L2", "tau")[0] == appendix_coefficients("L1", "tau")[0]
    mu = 1e-3
    assert appendix_series("L3", "delta", mu) == pytest.approx(
        sum(c * mu**j for j, c in enumerate(appendix_coefficients("L3", "delta"))))
    with pytest.raises(ValueError):
        appendix_series("L1", "alpha", 0.0)


@pytest.mark.parametrize("point", ["L1", "L2"])
@pytest.mark.parametrize("name", APPENDIX_QUANTITIES)
def test_appendix_remainder_slope(point, name):
    mus = np.geomspace(1e-8, 1e-4, 5)
    errs = []
    for mu in mus:
        cm = cm_coefficients(ProblemSpec(float(mu), point), 1)
        errs.append(abs(quantity(cm, name) - appendix_series(point, name, float(mu))))
    slope = np.polyfit(np.log(mus), np.log(errs), 1)[0]
    assert slope >= 1.25


def test_l3_first_order_corrections():
    mu = 1e-5
    a = cm_coefficients(ProblemSpec(mu, "L3"), 1)
    b = cm_coefficients(ProblemSpec(mu / 2, "L3"), 1)
    # Richardson: q/mu = q1 + q2 mu + ..., so 2 q(mu/2)/(mu/2) - q(mu)/mu = q1 + O(mu^2)
    for name, ref in (("alpha", -0.523438), ("tau", -0.15625), ("delta", 0.4375)):
        slope = 2 * quantity(b, name) / (mu / 2) - quantity(a, name) / mu
        assert slope == pytest.approx(ref, rel=1e-4)


@pytest.mark.parametrize("point", ["L1", "L2"])
def test_appendix_remainder_scaled_bounded(point):
    # remainder / mu^(4/3) stays bounded as mu -> 0, the direct statement of O(mu^(4/3))
    mus = np.geomspace(1e-9, 1e-5, 5)
    cms = [cm_coefficients(ProblemSpec(float(mu), point), 1) for mu in mus]
    for name in APPENDIX_QUANTITIES:
        scaled = [abs(quantity(cm, name) - appendix_series(point, name, float(mu))) / mu ** (4 / 3)
                  for cm, mu in zip(cms, mus)]
        assert max(scaled) <= 1.0
        assert max(scaled) <= 2 * min(scaled) + 1e-3
