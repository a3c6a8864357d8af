import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blab.approx import nine_point_laplacian
from blab.space import DomainError, MonomialCoeffs, SpaceParams, build_quadrature
from blab.symbols import (
    MollifierAccuracyWarning,
    MollifierSpec,
    Symbol,
    boundary_vanishing_check,
    combine,
    constant,
    dilate,
    mollify,
    parse_symbol,
    truncate,
)

ONE = constant(1.0)


def test_library_spot_values(lib):
    assert lib["sector"](0.5j) == 1
    assert lib["sector"](-0.5j) == 0
    assert lib["sector"](0.5) == 0  # edge convention
    assert lib["harmonic-arg"](0.0) == 0
    assert lib["one-minus-abs2"](np.exp(0.3j)) == 0
    assert abs(lib["harmonic-arg"](0.3 + 0.4j)) <= 1
    for name, f in lib.items():
        pts = 0.999 * np.exp(1j * np.linspace(0, 2 * np.pi, 97))
        assert np.max(np.abs(f(pts))) <= f.sup_bound + 1e-12, name


def test_sup_bound_enforced():
    with pytest.raises(ValueError):
        Symbol(func=lambda z: 2 * np.ones_like(z), sup_bound=1.0)


def test_truncate_examples():
    f = truncate(ONE, 0.5)
    assert f(0.25) == 1 and f(0.75) == 0 and f(0.5) == 0
    assert f.vanishes_beyond == 0.5 and f.sup_bound <= ONE.sup_bound
    with pytest.raises(DomainError):
        truncate(ONE, 1.0)


def test_truncate_annulus_norm():
    # ||1 - 1_r||^2 = 1 - r^2 at alpha = 0
    q = build_quadrature(SpaceParams(0.0, 8, 16, 8), oversample=8.0)
    f = truncate(ONE, 0.9)
    val = q.norm(ONE.on_grid(q) - f.on_grid(q))
    assert abs(val - math.sqrt(0.19)) < 2e-3


def test_mollifier_unit_mass():
    spec = MollifierSpec(0.3)
    # brute-force polar integral of the profile in normalized area measure
    s = np.linspace(0, 1, 200001)
    prof = spec.profile(s.astype(complex))
    mass = np.trapezoid(prof * 2 * s, s)
    assert abs(mass - 1.0) <= 1e-10
    _, w, raw = spec.local_rule(12, 24)
    assert abs(w.sum() - 1) < 1e-15
    assert abs(raw - 1) < 1e-3


def test_mollify_examples():
    f = mollify(truncate(ONE, 0.5), MollifierSpec(0.1))
    assert abs(f(0.0) - 1) < 1e-14
    assert f(0.7) == 0 and f(0.6) == 0
    assert f.vanishes_beyond == pytest.approx(0.6)
    g = mollify(parse_symbol("re-z"), MollifierSpec(0.05))
    assert abs(g(0.3) - 0.3) <= 1e-8
    assert g.sup_bound <= 1.0


def test_mollify_re_z_matches_bruteforce():
    eps, z0 = 0.05, 0.3 + 0.2j
    g = mollify(parse_symbol("re-z"), MollifierSpec(eps))
    # tensor trapezoid on the eps-disk, mass normalized separately
    s = np.linspace(0, 1, 4001)
    th = np.linspace(0, 2 * np.pi, 721)[:-1]
    S, TH = np.meshgrid(s, th, indexing="ij")
    w = eps * S * np.exp(1j * TH)
    kern = MollifierSpec(eps).profile(S.astype(complex)) * S
    val = np.trapezoid((kern * (z0 + w).real).mean(axis=1), s) / np.trapezoid(kern.mean(axis=1), s)
    assert abs(g(z0) - val) < 1e-10


def test_mollify_accuracy_warning_on_rough_symbol(lib):
    with pytest.warns(MollifierAccuracyWarning):
        mollify(lib["sector"], MollifierSpec(0.2), resolution=(4, 6))


def test_mollify_pointwise_claim():
    f = parse_symbol("harmonic-arg")
    eps = 0.1
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MollifierAccuracyWarning)
        full = mollify(f, MollifierSpec(eps))
        near = mollify(truncate(f, 1 - 1e-6), MollifierSpec(eps))
    z = 0.5 * np.exp(1j * np.linspace(0, 2 * np.pi, 16, endpoint=False))
    assert np.array_equal(full(z), near(z))


def test_mollify_l2_lipschitz_bound():
    f = parse_symbol("re-z")
    q = build_quadrature(SpaceParams(0.0, 8, 16, 8), oversample=4.0)
    g = mollify(f, MollifierSpec(0.02))
    err = q.norm(f.on_grid(q) - g.on_grid(q))
    assert err <= 0.02, f"L2 error {err:.4f} > Lip * eps = 0.02"


def test_mollify_l2_error_is_a_boundary_layer():
    # linear f is reproduced wherever the window stays in D; the zero extension
    # leaves a layer of width eps, so the L2 error scales like sqrt(eps)
    f = parse_symbol("re-z")
    q = build_quadrature(SpaceParams(0.0, 8, 16, 8), oversample=4.0)
    ratios = []
    for eps in (0.02, 0.01, 0.005):
        d = f.on_grid(q) - mollify(f, MollifierSpec(eps)).on_grid(q)
        inside = np.abs(q.points) < 1 - eps
        assert np.max(np.abs(d[inside])) < 1e-12
        ratios.append(q.norm(d) / math.sqrt(eps))
    assert max(ratios) - min(ratios) < 0.01 * max(ratios)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.1, 0.8), st.floats(0.01, 0.15))
def test_support_arithmetic(rho, eps):
    if rho + eps >= 1:
        return
    f = mollify(truncate(ONE, rho), MollifierSpec(eps))
    th = np.linspace(0, 2 * np.pi, 360, endpoint=False)
    for ring in (rho + eps, rho + eps + 1e-9, (rho + eps + 1) / 2):
        assert np.all(f(ring * np.exp(1j * th)) == 0)


def test_dilate_examples(lib):
    g = dilate(lib["conj-z"], 0.5)
    assert abs(g(0.4) - 0.2) < 1e-15
    c = dilate(ONE, 0.3)
    assert c(0.7 + 0.1j) == 1
    assert g.harmonic and g.sup_bound == lib["conj-z"].sup_bound


def test_dilate_laplacian_residual():
    # Re 1/(1 - z) is unbounded on D; the sup bound only has to hold on the spot grid
    u = Symbol(func=lambda z: (1.0 / (1.0 - np.asarray(z))).real, sup_bound=1e6, harmonic=True, provenance="re-cauchy")
    g = dilate(u, 0.9)
    rs = np.linspace(0, 0.8, 9)
    th = np.linspace(0, 2 * np.pi, 12, endpoint=False)
    z = (rs[:, None] * np.exp(1j * th)).ravel()
    assert np.max(np.abs(nine_point_laplacian(g, z, 1e-3))) <= 1e-6


def test_boundary_vanishing_examples(lib):
    f = mollify(truncate(ONE, 0.8), MollifierSpec(0.1))
    assert boundary_vanishing_check(f, 0.95) == (True, 0.0)
    ok, peak = boundary_vanishing_check(ONE, 1.0, 1e-9)
    assert not ok and peak == 1.0
    assert boundary_vanishing_check(lib["one-minus-abs2"], 1.0, 1e-12)[0]


def test_combination_uses_member_caches():
    q = build_quadrature(SpaceParams(0.0, 4, 8, 4))
    a, b = parse_symbol("z"), parse_symbol("conj-z")
    c = combine([a, b], [0.25, 0.75])
    assert np.allclose(c.on_grid(q), 0.25 * a.on_grid(q) + 0.75 * b.on_grid(q))
    assert c.poly is not None
    assert c.sup_bound == pytest.approx(1.0)


def test_grid_record_round_trip():
    q = build_quadrature(SpaceParams(0.0, 4, 8, 4))
    f = parse_symbol("sector")
    rec = f.grid_record(q)
    g = parse_symbol("sector")
    g.load_grid_record(q, rec)
    assert np.array_equal(g.on_grid(q), f.on_grid(q))


def test_parse_symbol_chain():
    f = parse_symbol("mollify:eps=0.05/truncate:r=0.9/sector")
    assert f.vanishes_beyond == pytest.approx(0.95)
    assert "truncate:r=0.9" in f.provenance
    assert parse_symbol("const:c=0.5")(0.3) == 0.5
    with pytest.raises(ValueError):
        parse_symbol("nosuch")
    with pytest.raises(ValueError):
        parse_symbol("blur:eps=0.1/sector")


def test_poly_symbol_evaluates_monomials():
    p = MonomialCoeffs.monomial(2, 1, 1 + 1j)
    z = 0.3 - 0.2j
    assert abs(p(z) - (1 + 1j) * z**2 * np.conj(z)) < 1e-16
