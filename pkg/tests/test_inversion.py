import numpy as np
import pytest

from helpers import philox, rand_with_sigma
from qkalman.block_encoding import decode, encode_svd_dilation
from qkalman.errors import (
    ApproximationError,
    DimensionError,
    ParityError,
    SigmaRangeError,
)
from qkalman.inversion import (
    ChebPoly,
    PhaseFactors,
    be_invert,
    eval_cheb,
    format_angles,
    inverse_poly,
    inverse_poly_at_degree,
    qsp_response,
    qsvt_apply,
    smoothing_order,
    solve_phase_factors,
    to_reflection,
)


def small_target_poly(seed=42, degree=7):
    """Random odd polynomial safely inside the solvable band."""
    rng = philox(seed)
    coeffs = rng.standard_normal((degree + 1) // 2)
    probe = ChebPoly(coeffs, degree, 2.0, 1.0, 0.0)
    grid = np.linspace(-1, 1, 2001)
    coeffs = 0.9 * coeffs / np.max(np.abs(eval_cheb(probe, grid)))
    return ChebPoly(coeffs, degree, 2.0, 1.0, 0.0)


# ---------------------------------------------------------------------------
# polynomial construction
# ---------------------------------------------------------------------------

def test_smoothing_order_demo_value():
    assert smoothing_order(3.5, 0.01) == 72


def test_inverse_poly_demo_construction():
    poly = inverse_poly(3.5, 0.01)
    assert poly.degree == 57
    # scale within 10% of the reference construction's 5.40127692
    assert poly.scale == pytest.approx(5.40127692, rel=0.10)
    # achieved (unscaled) error within the requested tolerance
    assert poly.eps_prime * poly.scale <= 0.01
    xs = np.linspace(1 / 3.5, 1.0, 400)
    err = np.max(np.abs(poly.scale * np.asarray(eval_cheb(poly, xs)) - 1 / xs))
    assert err <= 0.01


def test_inverse_poly_rejects_bad_parameters():
    with pytest.raises(ApproximationError):
        inverse_poly(0.9, 0.01)
    with pytest.raises(ApproximationError):
        inverse_poly(3.5, 1.5)
    with pytest.raises(ApproximationError):
        inverse_poly(30.0, 1e-4, degree_cap=51)


def test_untruncated_series_matches_smoothed_reciprocal():
    # with every term kept, scale*p(x) must equal (1 - (1-x^2)^b)/x exactly
    kappa, eps = 1.5, 0.3
    b = smoothing_order(kappa, eps)
    poly = inverse_poly_at_degree(kappa, eps, 2 * b - 1)
    xs = np.linspace(-1, 1, 501)[1:-1]
    xs = xs[np.abs(xs) > 1e-3]
    want = (1 - (1 - xs**2) ** b) / xs
    got = poly.scale * np.asarray(eval_cheb(poly, xs))
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_truncation_error_decreases_with_degree():
    errs = []
    for d in (21, 41, 57):
        poly = inverse_poly_at_degree(3.5, 0.01, d)
        errs.append(poly.eps_prime * poly.scale)
    assert errs[0] > errs[1] > errs[2]


def test_eval_cheb_matches_reference_clenshaw():
    rng = philox(13)
    coeffs = rng.standard_normal(5)
    poly = ChebPoly(coeffs, 9, 2.0, 1.0, 0.0)
    xs = np.linspace(-1, 1, 101)
    want = np.polynomial.chebyshev.chebval(xs, poly.full_coeffs)
    np.testing.assert_allclose(np.asarray(eval_cheb(poly, xs)), want, atol=1e-12)


def test_eval_cheb_rejects_out_of_domain():
    poly = ChebPoly([1.0], 1, 2.0, 1.0, 0.0)
    with pytest.raises(SigmaRangeError):
        eval_cheb(poly, 1.5)


def test_chebpoly_validation():
    with pytest.raises(ParityError):
        ChebPoly([1.0], 2, 2.0, 1.0, 0.0)
    with pytest.raises(DimensionError):
        ChebPoly([1.0, 0.0], 1, 2.0, 1.0, 0.0)
    with pytest.raises(ParityError):
        inverse_poly_at_degree(3.5, 0.01, 10)


# ---------------------------------------------------------------------------
# phases and responses
# ---------------------------------------------------------------------------

def test_known_degree_one_phases_give_identity_polynomial():
    phi = PhaseFactors([np.pi / 4, -np.pi / 4])
    xs = np.linspace(-1, 1, 41)
    resp = np.array([qsp_response(phi, x) for x in xs])
    np.testing.assert_allclose(resp.real, xs, atol=1e-12)
    np.testing.assert_allclose(resp.imag, 0.0, atol=1e-12)


def test_solver_reproduces_small_target():
    poly = small_target_poly()
    phi = solve_phase_factors(poly)
    assert phi.convention == "wx"
    assert phi.degree == poly.degree
    assert phi.residual <= 1e-6
    xs = np.linspace(-1, 1, 301)
    resp = np.array([qsp_response(phi, x) for x in xs])
    np.testing.assert_allclose(resp.real, np.asarray(eval_cheb(poly, xs)),
                               atol=1e-7)


def test_solver_cache_returns_same_object():
    poly = small_target_poly()
    assert solve_phase_factors(poly) is solve_phase_factors(poly)


def test_solver_rescales_oversized_targets():
    # |p| exceeds 1, so the solver clamps it just under the bound
    poly = ChebPoly([1.2], 1, 2.0, 1.0, 0.0)
    phi = solve_phase_factors(poly)
    resp = qsp_response(phi, 0.5)
    assert resp.real == pytest.approx(0.5, abs=1e-7)


def test_response_parity_and_boundedness():
    phi = solve_phase_factors(small_target_poly())
    rng = philox(14)
    xs = rng.uniform(-1, 1, 100)
    for x in xs:
        plus = qsp_response(phi, x)
        minus = qsp_response(phi, -x)
        assert abs(minus + plus) < 1e-10  # odd degree: p(-x) = -p(x)
    grid = np.linspace(-1, 1, 1001)
    mags = np.abs(np.array([qsp_response(phi, x) for x in grid]))
    assert np.max(mags) <= 1 + 1e-10


def test_reflection_convention_matches_wx():
    phi = solve_phase_factors(small_target_poly())
    refl = to_reflection(phi)
    assert refl.convention == "reflection"
    xs = np.linspace(-1, 1, 101)
    for x in xs[::10]:
        assert qsp_response(refl, x) == pytest.approx(qsp_response(phi, x),
                                                      abs=1e-10)
    # converting twice is a no-op
    assert to_reflection(refl) is refl


def test_format_angles_round_trip():
    phi = solve_phase_factors(small_target_poly())
    text = format_angles(phi)
    values = [float(line) for line in text.strip().splitlines()]
    np.testing.assert_allclose(values, phi.angles, atol=1e-15)


# ---------------------------------------------------------------------------
# the transform circuit
# ---------------------------------------------------------------------------

def test_qsvt_identity_polynomial_reproduces_block():
    # p(x) = x has a real response, exercising the idle-ancilla branch
    rng = philox(15)
    m = rand_with_sigma(rng, [0.9, 0.4])
    be = encode_svd_dilation(m)
    out = qsvt_apply(be, PhaseFactors([np.pi / 4, -np.pi / 4]))
    assert out.ancillas == be.ancillas + 1
    assert out.alpha == pytest.approx(1.0)
    np.testing.assert_allclose(decode(out), m, atol=1e-10)


def test_qsvt_transforms_singular_values():
    # oracle: decoded block must equal U p(Sigma) V^T from the input SVD
    poly = small_target_poly()
    phi = solve_phase_factors(poly)
    rng = philox(16)
    count = 0
    for trial in range(50):
        dim = [2, 4, 8][trial % 3]
        sigma = rng.uniform(0.15, 0.95, size=dim)
        m = rand_with_sigma(rng, sigma)
        u, s, vt = np.linalg.svd(m)
        be = encode_svd_dilation(m)
        out = qsvt_apply(be, phi)
        want = u @ np.diag(np.asarray(eval_cheb(poly, s))) @ vt
        np.testing.assert_allclose(decode(out), want, atol=1e-6)
        count += 1
    assert count == 50


def test_qsvt_rejects_bad_inputs():
    m = np.diag([0.5, 0.25])
    be = encode_svd_dilation(m)
    with pytest.raises(ParityError):
        qsvt_apply(be, PhaseFactors([0.1, 0.2, 0.3]))  # degree 2
    fuzzy = type(be)(be.op, be.alpha, be.ancillas, be.system_qubits, 0.01)
    with pytest.raises(ApproximationError):
        qsvt_apply(fuzzy, PhaseFactors([np.pi / 4, -np.pi / 4]))
    from qkalman.tensor_ops import Dense
    stretched = type(be)(Dense(np.eye(4) * 1.2), 1.0, 1, 1)  # block norm 1.2
    with pytest.raises(SigmaRangeError):
        qsvt_apply(stretched, PhaseFactors([np.pi / 4, -np.pi / 4]))


def test_be_invert_random_matrices():
    kappa, eps = 2.5, 0.01
    poly = inverse_poly(kappa, eps)
    phi = solve_phase_factors(poly)
    rng = philox(17)
    for trial in range(20):
        dim = 2 if trial % 2 == 0 else 4
        sigma = rng.uniform(1 / kappa + 0.02, 0.98, size=dim)
        m_scaled = rand_with_sigma(rng, sigma)
        alpha = rng.uniform(0.5, 20.0)
        be = encode_svd_dilation(m_scaled, alpha=alpha)
        inv = be_invert(be, kappa, eps, poly=poly, phi=phi)
        assert inv.alpha == pytest.approx(poly.scale / alpha, rel=1e-12)
        assert inv.eps == pytest.approx(poly.eps_prime * inv.alpha, rel=1e-12)
        target = np.linalg.inv(alpha * m_scaled)
        gap = np.linalg.norm(decode(inv) - target, 2)
        assert gap <= inv.eps + 1e-9


def test_be_invert_rejects_out_of_range_sigma():
    kappa = 2.5
    be = encode_svd_dilation(np.diag([0.9, 0.1]))  # 0.1 < 1/2.5
    with pytest.raises(SigmaRangeError):
        be_invert(be, kappa, 0.01)
