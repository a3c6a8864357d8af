import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from blab.space import (
    DiskQuadrature,
    DomainError,
    MonomialCoeffs,
    SpaceParams,
    analytic_basis_norm,
    build_quadrature,
    gram_residual,
    inner,
    monomial_integral,
    project,
    quadrature_for_cap,
    quadrature_residual,
    reproducing_kernel,
)

ALPHAS = [0.0, 0.5, 1.0, 2.5]


@pytest.mark.parametrize("alpha", ALPHAS)
def test_closed_form_moments_match_adaptive_oracle(alpha):
    for j in range(0, 21, 4):
        ref = oracles.moment_adaptive(j, j, alpha)
        assert abs(monomial_integral(j, j, alpha) - ref) <= 1e-12
    assert monomial_integral(3, 2, alpha) == 0


def test_closed_form_small_cases():
    # alpha = 0: ||z^k||^2 = 1/(k+1)
    for k in range(6):
        assert math.isclose(analytic_basis_norm(k, 0.0) ** 2, 1 / (k + 1), rel_tol=1e-14)
    # alpha = 1: 2 k! / (k+2)!
    for k in range(6):
        assert math.isclose(analytic_basis_norm(k, 1.0) ** 2, 2 / ((k + 1) * (k + 2)), rel_tol=1e-14)


def test_log_space_norms_survive_large_degree():
    v = analytic_basis_norm(np.array([0, 500, 5000]), 2.5)
    assert np.all(np.isfinite(v)) and np.all(v > 0)
    assert v[2] < v[1] < v[0] == 1.0


@pytest.mark.parametrize("alpha", ALPHAS)
def test_rule_exact_up_to_degree_40(alpha):
    q = build_quadrature(SpaceParams(alpha, 10, 10, 5), target_degree=40)
    assert quadrature_residual(q, 40) <= 1e-12
    assert abs(q.w.sum() - 1) <= 1e-13
    assert q.angular_count % 2 == 0


@pytest.mark.parametrize("alpha", ALPHAS)
def test_gram_residual_n30(alpha):
    q = build_quadrature(SpaceParams(alpha, 30, 60, 30))
    assert gram_residual(q, 30) <= 1e-10


def test_quadrature_for_cap_orthonormal():
    q = quadrature_for_cap(0.5, 40)
    assert q.max_cap >= 40
    assert gram_residual(q, 40) <= 1e-10


def test_rule_json_round_trip():
    q = build_quadrature(SpaceParams(0.5, 4, 4, 2))
    q2 = DiskQuadrature.from_json(q.to_json())
    assert q2 == q


def test_domain_errors():
    with pytest.raises(DomainError):
        SpaceParams(-1.5, 4, 4, 2)
    with pytest.raises(DomainError):
        SpaceParams(0.0, 0, 4, 2)
    with pytest.raises(DomainError):
        reproducing_kernel(1.0, 0.2, 0.0)
    with pytest.raises(DomainError):
        analytic_basis_norm(2, -1.0)


def test_kernel_formula_and_symmetry():
    z, w = 0.3 + 0.4j, -0.5 + 0.1j
    assert abs(reproducing_kernel(z, w, 0.5) - oracles.kernel(z, w, 0.5)) < 1e-15
    assert abs(reproducing_kernel(z, w, 0.5) - np.conj(reproducing_kernel(w, z, 0.5))) < 1e-14


def test_kernel_series_matches_basis_expansion():
    # K(z, w) = sum_k e_k(z) conj(e_k(w))
    z, w, alpha = 0.5 + 0.2j, 0.1 - 0.4j, 1.0
    k = np.arange(400)
    series = np.sum((z * np.conj(w)) ** k / analytic_basis_norm(k, alpha) ** 2)
    assert abs(series - reproducing_kernel(z, w, alpha)) < 1e-12


def test_synthesize_and_coefficients_invert():
    q = build_quadrature(SpaceParams(0.5, 12, 24, 12))
    c = np.arange(1, 9) * (1 - 0.5j)
    vals = q.synthesize(c)
    assert np.allclose(q.analytic_coefficients(vals, 8), c, atol=1e-12)
    assert q.norm(q.analytic_residual(vals)) < 1e-12


# -- projection properties ---------------------------------------------------

monomials = st.lists(
    st.tuples(st.integers(0, 5), st.integers(0, 5), st.floats(-2, 2), st.floats(-2, 2)),
    min_size=1,
    max_size=6,
)


def _poly(terms):
    out = MonomialCoeffs()
    for p, q, a, b in terms:
        out = out + MonomialCoeffs.monomial(p, q, complex(a, b))
    return out


PARAMS = SpaceParams(0.5, 12, 12, 6)


@settings(max_examples=40, deadline=None)
@given(monomials)
def test_projection_idempotent(terms):
    u = _poly(terms)
    once = project(u, PARAMS)
    twice = project(once, PARAMS)
    keys = set(once.entries) | set(twice.entries)
    assert all(abs(once.entries.get(k, 0) - twice.entries.get(k, 0)) <= 1e-13 for k in keys)


@settings(max_examples=40, deadline=None)
@given(monomials, monomials)
def test_projection_self_adjoint(a, b):
    u, v = _poly(a), _poly(b)
    lhs = inner(project(u, PARAMS), v, PARAMS.alpha)
    rhs = inner(u, project(v, PARAMS), PARAMS.alpha)
    assert abs(lhs - rhs) <= 1e-11


@settings(max_examples=30, deadline=None)
@given(monomials)
def test_projection_matches_grid_projection(terms):
    u = _poly(terms)
    q = build_quadrature(PARAMS, target_degree=24)
    grid = q.analytic_coefficients(u(q.points), 10)
    closed = project(u, PARAMS)
    ref = np.array([closed.entries.get((k, 0), 0) * analytic_basis_norm(k, 0.5) for k in range(10)])
    assert np.allclose(grid, ref, atol=1e-11)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 0.85), st.floats(0, 2 * math.pi), st.integers(0, 2**32))
def test_reproducing_property_random_point(rad, ang, seed):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=6) + 1j * rng.normal(size=6)
    q = build_quadrature(SpaceParams(0.0, 10, 10, 5), target_degree=260)
    z = rad * np.exp(1j * ang)
    pts = q.points
    val = q.integrate(np.polynomial.polynomial.polyval(pts, c) * reproducing_kernel(z, pts, 0.0))
    assert abs(val - np.polynomial.polynomial.polyval(z, c)) <= 1e-9
