import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import FWHM_PER_SIGMA
from ghostmoments import (
    ConversionMatrix,
    Grid,
    MomentVector,
    ProfileSpec,
    conversion_matrix,
    crb_constrained,
    crb_report,
    crb_unconstrained,
    deconvolve_moments,
    effective_influence,
    estimate_moments_from_counts,
    generate,
    identity_kernel,
    influence_function,
    invert_lower_triangular,
    kernel_grid,
    linear_combination,
    normalize,
)
from ghostmoments.crb import reproduce, unit_weights
from ghostmoments.errors import InputError
from ghostmoments.profiles import counts_from_density

MU, SIGMA = 0.5, 0.05


@pytest.fixture(scope="module")
def gauss_density():
    """N * unit gaussian (mean 0.5, std 0.05) as a density, plus N."""
    N = 1e4
    g = Grid(0.0, 1.0, 2001)
    return generate(ProfileSpec("gaussian", MU, SIGMA * FWHM_PER_SIGMA, amplitude_mass=N), g), N


def _identity_inverse(K):
    return invert_lower_triangular(ConversionMatrix(np.eye(K + 1)))


def test_linear_combination_examples():
    M = MomentVector([1.0, 0.4, 0.2])
    assert linear_combination([0, 1, 0], M) == 0.4
    assert linear_combination([0, 1, 1], M) == pytest.approx(0.6, rel=1e-15)
    with pytest.raises(InputError):
        linear_combination([0, 1], M)


def test_two_forms_of_beta_agree(fig2):
    _, H, fc = fig2
    m, _ = estimate_moments_from_counts(fc, 4)
    Cinv = invert_lower_triangular(conversion_matrix(H, 4))
    mu = np.array([0.0, 1.0, -2.0, 0.5, 3.0])
    beta_from_M = linear_combination(mu, deconvolve_moments(m, Cinv))
    beta_from_row = float((mu @ Cinv.entries) @ m.values)
    assert beta_from_M == pytest.approx(beta_from_row, rel=1e-10)


def test_influence_identity_kernel():
    I = influence_function(unit_weights(1, 3), _identity_inverse(3), 100.0)
    x = np.linspace(0, 1, 7)
    np.testing.assert_allclose(I(x), x / 100, rtol=1e-15)


def test_influence_point_kernel_row():
    H = generate(ProfileSpec("delta_bin", 0.5), kernel_grid(0.001, 1.0))
    I = influence_function(unit_weights(2, 2), invert_lower_triangular(conversion_matrix(H, 2)), 10.0)
    np.testing.assert_allclose(I.coeffs, [0.25, -1.0, 1.0], rtol=1e-12)
    x = np.linspace(-1, 2, 11)
    np.testing.assert_allclose(I(x), (x - 0.5) ** 2 / 10, rtol=1e-12, atol=1e-15)


def test_influence_point_kernel_reproduces_beta():
    # object gaussian(0.3, 0.05); kernel = unit point at 0.5, so f is the object moved by 0.5
    g = Grid(0.0, 1.5, 3001)
    N = 500.0
    f = generate(ProfileSpec("gaussian", 0.8, 0.05 * FWHM_PER_SIGMA, amplitude_mass=N), g)
    H = generate(ProfileSpec("delta_bin", 0.5), kernel_grid(g.step, 1.0))
    I = influence_function(unit_weights(2, 2), invert_lower_triangular(conversion_matrix(H, 2)), N)
    assert reproduce(I, f) == pytest.approx(0.3**2 + 0.05**2, rel=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=5, max_size=5).filter(lambda v: any(abs(a) > 1e-3 for a in v)))
def test_reproducing_property(fig2, mu):
    _, H, fc = fig2
    m, N = estimate_moments_from_counts(fc, 4)
    Cinv = invert_lower_triangular(conversion_matrix(H, 4))
    beta = linear_combination(mu, deconvolve_moments(m, Cinv))
    I = influence_function(mu, Cinv, N)
    assert reproduce(I, fc) == pytest.approx(beta, rel=1e-8, abs=1e-12 * np.abs(mu).sum())


def test_crb_unconstrained_gaussian(gauss_density):
    f, N = gauss_density
    I = influence_function(unit_weights(1, 2), _identity_inverse(2), N)
    assert crb_unconstrained(I, f) == pytest.approx((SIGMA**2 + MU**2) / N, rel=1e-6)


def test_crb_zero_influence(gauss_density):
    f, N = gauss_density
    I = influence_function(np.zeros(3), _identity_inverse(2), N)
    assert crb_unconstrained(I, f) == 0.0


def test_crb_scales_inverse_with_N(gauss_density):
    f, N = gauss_density
    Cinv = _identity_inverse(3)
    mu = [0.0, 1.0, 0.5, -0.2]
    a = crb_unconstrained(influence_function(mu, Cinv, N), f)
    b = crb_unconstrained(influence_function(mu, Cinv, 2 * N), f.scaled(2.0))
    assert b == pytest.approx(a / 2, rel=1e-10)


def test_crb_requires_normalized_intensity(gauss_density):
    f, N = gauss_density
    I = influence_function(unit_weights(1, 2), _identity_inverse(2), N * 1.01)
    with pytest.raises(InputError, match="tau\\*N"):
        crb_unconstrained(I, f)


def test_effective_influence_examples():
    I = influence_function(unit_weights(1, 2), _identity_inverse(2), 100.0)
    same = effective_influence(I, 0.0, 100.0, 1.0)
    np.testing.assert_array_equal(same.coeffs, I.coeffs)
    shifted = effective_influence(I, 0.4, 100.0, 1.0)
    x = np.linspace(0, 1, 5)
    np.testing.assert_allclose(shifted(x) - I(x), -0.004, rtol=1e-12)
    np.testing.assert_array_equal(shifted.coeffs[1:], I.coeffs[1:])
    with pytest.raises(InputError):
        effective_influence(I, 0.4, 100.0, 0.0)
    with pytest.raises(InputError):
        effective_influence(I, 0.4, -1.0, 1.0)


def test_effective_influence_tau_offset():
    I = influence_function(unit_weights(1, 2), _identity_inverse(2), 50.0, tau=0.5)
    e = effective_influence(I, 0.3)
    assert e(0.0) - I(0.0) == pytest.approx(-0.3 / (0.5 * 50.0), rel=1e-12)


def test_crb_constrained_gaussian(gauss_density):
    f, N = gauss_density
    I = influence_function(unit_weights(1, 2), _identity_inverse(2), N)
    beta = reproduce(I, f)
    assert crb_constrained(I, f, beta) == pytest.approx(SIGMA**2 / N, rel=1e-6)
    assert crb_constrained(I, f, 0.0) == crb_unconstrained(I, f)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=5, max_size=5), st.floats(0.3, 3.0))
def test_constraint_lowering_identity(fig2, mu, tau):
    _, H, fc = fig2
    H = normalize(H, tau)
    m, n_detected = estimate_moments_from_counts(fc, 4)
    N = n_detected / tau
    Cinv = invert_lower_triangular(conversion_matrix(H, 4))
    I = influence_function(mu, Cinv, N, tau)
    beta = reproduce(I, fc)
    U = crb_unconstrained(I, fc)
    Cc = crb_constrained(I, fc, beta)
    assert Cc <= U
    assert U - Cc == pytest.approx(beta**2 / (tau * N), rel=1e-10, abs=1e-12 * U)


def test_report_identity_kernel_gaussian_counts():
    g = Grid(0.0, 1.0, 2001)
    f = generate(ProfileSpec("gaussian", MU, SIGMA * FWHM_PER_SIGMA), g)
    fc = counts_from_density(f, 1e5)
    report = crb_report(fc, identity_kernel(g.step), 4)
    assert report.row(1).crb_constrained == pytest.approx(SIGMA**2 / 1e5, rel=1e-6)
    assert report.metadata["beta_source"] == "plug-in"


def test_report_empty_for_K0(fig2):
    _, H, fc = fig2
    assert crb_report(fc, H, 0).rows == ()


def test_report_rows_satisfy_lowering_identity(fig2):
    _, H, fc = fig2
    report = crb_report(fc, H, 4)
    assert [r.order for r in report.rows] == [1, 2, 3, 4]
    for r in report.rows:
        lowering = r.crb_unconstrained - r.crb_constrained
        assert lowering == pytest.approx(r.beta_hat**2 / r.N, rel=1e-10)
        assert r.crb_constrained >= 0 and r.crb_unconstrained >= 0


def test_report_scales_inverse_with_N(fig2):
    _, H, fc = fig2
    a = crb_report(fc, H, 4)
    b = crb_report(fc.scaled(3.0), H, 4)
    for ra, rb in zip(a.rows, b.rows):
        assert rb.crb_unconstrained == pytest.approx(ra.crb_unconstrained / 3, rel=1e-10)
        assert rb.crb_constrained == pytest.approx(ra.crb_constrained / 3, rel=1e-10)


def test_constraint_matters_most_for_low_orders(fig2):
    _, H, fc = fig2
    report = crb_report(fc, H, 4)
    lowering = [r.crb_unconstrained - r.crb_constrained for r in report.rows]
    assert min(lowering[:2]) > max(lowering[2:])
    betas = [r.beta_hat for r in report.rows]
    assert betas == sorted(betas, reverse=True)


def test_report_with_true_moments(fig2):
    F, H, fc = fig2
    from ghostmoments import raw_moments

    truth = raw_moments(F, 4)
    report = crb_report(fc, H, 4, beta_truth=truth)
    assert report.metadata["beta_source"] == "truth"
    for r in report.rows:
        assert r.beta_used == truth.values[r.order]
        assert r.beta_hat == pytest.approx(r.beta_used, rel=1e-6)


def test_report_tau_rescales_kernel(fig2):
    _, H, fc = fig2
    report = crb_report(fc, H, 4, tau=0.5)
    base = crb_report(fc, H, 4)
    for r, b in zip(report.rows, base.rows):
        assert r.tau == pytest.approx(0.5)
        assert r.beta_hat == pytest.approx(b.beta_hat, rel=1e-12)
        assert r.crb_constrained == pytest.approx(b.crb_constrained, rel=1e-10)
