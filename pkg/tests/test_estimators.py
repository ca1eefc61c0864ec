import math

import numpy as np
import pytest

from corrupt_sense.datagen import (
    AdditiveNoise,
    Clean,
    DesignSpec,
    IVSpec,
    gen_design,
    gen_instance,
    gen_iv,
)
from corrupt_sense.estimators import (
    EstimatorKind,
    StrongConvexityViolation,
    build_clean_ls,
    build_iv,
    build_known_sigma_w,
    build_known_sigma_x,
    build_missing,
    build_upper_bound_sigma_w,
    correction_mask,
    error_bound,
    solve_corrected,
)


def test_known_sigma_w_zero_noise_reduces_to_clean_moments():
    z = np.eye(2)
    est = build_known_sigma_w(z, np.array([1.0, 2.0]), np.zeros((2, 2)))
    assert np.array_equal(est.sigma_hat, np.eye(2))
    assert np.array_equal(est.gamma_hat, np.array([1.0, 2.0]))
    assert est.kind is EstimatorKind.KNOWN_SIGMA_W


def test_known_sigma_w_direct_arithmetic():
    est = build_known_sigma_w(np.array([[2.0]]), np.array([6.0]), np.array([[1.0]]))
    assert np.array_equal(est.sigma_hat, np.array([[3.0]]))
    assert np.array_equal(est.gamma_hat, np.array([12.0]))


def test_known_sigma_w_dimension_mismatch():
    with pytest.raises(ValueError):
        build_known_sigma_w(np.eye(3), np.ones(3), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        build_known_sigma_w(np.eye(3), np.ones(4), np.zeros((3, 3)))


def test_clean_pipeline_recovers_exactly():
    for seed in range(3):
        inst = gen_instance(200, 7, 7, DesignSpec.identity(7), AdditiveNoise(0.0), seed)
        est = build_known_sigma_w(inst.z, inst.y, np.zeros((7, 7)))
        beta = solve_corrected(est)
        assert np.linalg.norm(beta - inst.beta_star) <= 1e-8


def test_upper_bound_equal_to_truth_is_identical():
    rng = np.random.default_rng(0)
    z = rng.standard_normal((20, 3))
    y = rng.standard_normal(20)
    sw = 0.4**2 * np.eye(3)
    a = build_known_sigma_w(z, y, sw)
    b = build_upper_bound_sigma_w(z, y, sw)
    assert np.array_equal(a.sigma_hat, b.sigma_hat)
    assert np.array_equal(a.gamma_hat, b.gamma_hat)
    assert b.kind is EstimatorKind.UPPER_BOUND_SIGMA_W


def test_upper_bound_shift_is_linear():
    # Integer data keeps the arithmetic exact, so the shift is exact too.
    z = np.array([[2.0, 0.0], [0.0, 3.0]])
    y = np.array([4.0, 9.0])
    sw = np.eye(2)
    a = build_known_sigma_w(z, y, sw)
    b = build_upper_bound_sigma_w(z, y, sw + np.eye(2))
    assert np.array_equal(a.sigma_hat - b.sigma_hat, np.eye(2))


def test_upper_bound_monte_carlo_biased_but_bounded():
    # Over-subtracting the noise covariance inflates the fit; the error should
    # exceed the correctly-specified one but stay near the predicted bias.
    n, k, sw = 4000, 5, 0.5
    errs_known, errs_upper = [], []
    for seed in range(30):
        inst = gen_instance(n, k, k, DesignSpec.identity(k), AdditiveNoise(sw), seed)
        truth = sw**2 * np.eye(k)
        e1 = solve_corrected(build_known_sigma_w(inst.z, inst.y, truth))
        e2 = solve_corrected(build_upper_bound_sigma_w(inst.z, inst.y, 2 * truth))
        errs_known.append(np.linalg.norm(e1 - inst.beta_star))
        errs_upper.append(np.linalg.norm(e2 - inst.beta_star))
    beta_norm = np.sqrt(k)
    assert np.mean(errs_upper) > np.mean(errs_known)
    assert np.mean(errs_upper) < 0.6 * beta_norm


def test_known_sigma_x_trivial_and_ignores_observations():
    est = build_known_sigma_x(np.eye(2), np.array([1.0, 2.0]), np.eye(2))
    assert np.array_equal(est.sigma_hat, np.eye(2))
    assert np.array_equal(est.gamma_hat, np.array([1.0, 2.0]))

    rng = np.random.default_rng(1)
    sx = np.eye(3)
    a = build_known_sigma_x(rng.standard_normal((10, 3)), rng.standard_normal(10), sx)
    b = build_known_sigma_x(rng.standard_normal((10, 3)), rng.standard_normal(10), sx)
    assert np.array_equal(a.sigma_hat, b.sigma_hat)


def test_error_growth_linear_for_sigma_x_quadratic_for_sigma_w():
    n, k = 20_000, 2
    means = {"sigma_w": {}, "sigma_x": {}}
    for sw in (1.0, 2.0):
        ew, ex = [], []
        for seed in range(40):
            inst = gen_instance(n, k, k, DesignSpec.identity(k), AdditiveNoise(sw), seed)
            bw = solve_corrected(build_known_sigma_w(inst.z, inst.y, sw**2 * np.eye(k)))
            bx = solve_corrected(build_known_sigma_x(inst.z, inst.y, np.eye(k)))
            ew.append(np.linalg.norm(bw - inst.beta_star))
            ex.append(np.linalg.norm(bx - inst.beta_star))
        means["sigma_w"][sw] = np.mean(ew)
        means["sigma_x"][sw] = np.mean(ex)
    ratio_w = means["sigma_w"][2.0] / means["sigma_w"][1.0]
    ratio_x = means["sigma_x"][2.0] / means["sigma_x"][1.0]
    assert ratio_x < 2.0 < ratio_w


def test_iv_direct_arithmetic():
    z = np.array([[1.0], [1.0]])
    u = np.array([[1.0], [1.0]])
    est = build_iv(z, np.array([2.0, 2.0]), IVSpec(u=u, m=1))
    assert np.array_equal(est.sigma_hat, np.array([[4.0]]))
    assert np.array_equal(est.gamma_hat, np.array([8.0]))
    assert np.isclose(solve_corrected(est)[0], 2.0)


def test_iv_orthonormal_instruments_preserve_clean_solution():
    rng = np.random.default_rng(2)
    z = rng.standard_normal((20, 3))
    beta = np.array([1.0, -2.0, 0.5])
    y = z @ beta
    u, _ = np.linalg.qr(z)
    est = build_iv(z, y, IVSpec(u=u, m=3))
    assert np.linalg.norm(solve_corrected(est) - beta) <= 1e-8


def test_iv_rejects_underdetermined():
    z = np.zeros((10, 3))
    with pytest.raises(ValueError):
        build_iv(z, np.zeros(10), IVSpec(u=np.zeros((10, 2)), m=2))


def test_iv_gram_is_psd():
    rng = np.random.default_rng(3)
    for seed in range(5):
        z = rng.standard_normal((15, 4))
        u = rng.standard_normal((15, 6))
        est = build_iv(z, rng.standard_normal(15), IVSpec(u=u, m=6))
        assert est.lambda_min >= -1e-10


def test_correction_mask_values():
    m = correction_mask(3, 0.5)
    assert np.all(np.diag(m) == 2.0)
    off = m[~np.eye(3, dtype=bool)]
    assert np.all(off == 4.0)
    with pytest.raises(ValueError):
        correction_mask(2, 1.0)


def test_missing_zero_erasure_equals_clean_moments():
    rng = np.random.default_rng(4)
    z = rng.standard_normal((12, 3))
    y = rng.standard_normal(12)
    a = build_missing(z, y, 0.0)
    b = build_clean_ls(z, y)
    assert np.array_equal(a.sigma_hat, b.sigma_hat)
    assert np.array_equal(a.gamma_hat, b.gamma_hat)


def test_missing_mask_arithmetic():
    z = np.array([[1.0, 1.0], [0.0, 1.0]])  # z'z = [[1, 1], [1, 2]]
    est = build_missing(z, np.zeros(2), 0.5)
    assert np.array_equal(est.sigma_hat, np.array([[2.0, 4.0], [4.0, 4.0]]))


def test_missing_correction_unbiased_monte_carlo():
    x = gen_design(10_000, 5, DesignSpec.identity(5), seed=8)
    rng = np.random.default_rng(8)
    mask = (rng.random(x.shape) < 0.7).astype(float)
    est = build_missing(x * mask, np.zeros(10_000), 0.3)
    assert np.linalg.norm(est.sigma_hat - np.eye(5), 2) <= 0.1


def test_missing_rejects_bad_rho():
    with pytest.raises(ValueError):
        build_missing(np.eye(2), np.ones(2), 1.0)


def test_solve_diagonal():
    est = build_known_sigma_x(np.eye(2), np.array([2.0, 4.0]), 2 * np.eye(2))
    assert np.allclose(solve_corrected(est), [1.0, 2.0])


def test_solve_rejects_indefinite_and_repair_recovers():
    # sigma_hat = -sigma_w here: eigenvalues (-0.1, 1.0)
    z = np.zeros((4, 2))
    est = build_known_sigma_w(z, np.zeros(4), np.diag([0.1, -1.0]))
    assert np.isclose(est.lambda_min, -0.1)
    with pytest.raises(StrongConvexityViolation) as exc:
        solve_corrected(est, lambda_floor=1e-8)
    assert np.isclose(exc.value.lambda_min, -0.1)
    repaired = solve_corrected(est, lambda_floor=1e-8, repair=True)
    assert np.all(np.isfinite(repaired))


def test_builders_return_exactly_symmetric_gram():
    rng = np.random.default_rng(5)
    z = rng.standard_normal((30, 6))
    y = rng.standard_normal(30)
    u = rng.standard_normal((30, 8))
    for est in (
        build_known_sigma_w(z, y, 0.2 * np.eye(6)),
        build_upper_bound_sigma_w(z, y, 0.3 * np.eye(6)),
        build_known_sigma_x(z, y, np.eye(6)),
        build_iv(z, y, IVSpec(u=u, m=8)),
        build_missing(z, y, 0.2),
        build_clean_ls(z, y),
    ):
        assert np.array_equal(est.sigma_hat, est.sigma_hat.T)
        assert est.dim == 6


def test_zero_noise_and_zero_erasure_builders_coincide():
    rng = np.random.default_rng(6)
    z = rng.standard_normal((15, 4))
    y = rng.standard_normal(15)
    a = build_known_sigma_w(z, y, np.zeros((4, 4)))
    b = build_missing(z, y, 0.0)
    assert np.array_equal(a.sigma_hat, b.sigma_hat)
    assert np.array_equal(a.gamma_hat, b.gamma_hat)


def test_clean_data_reduction_full_rank():
    rng = np.random.default_rng(7)
    x = rng.standard_normal((40, 6))
    beta = rng.standard_normal(6)
    est = build_known_sigma_w(x, x @ beta, np.zeros((6, 6)))
    assert np.linalg.norm(solve_corrected(est) - beta) <= 1e-8


@pytest.mark.parametrize("c", [0.5, 3.0])
def test_scale_equivariance_in_response(c):
    rng = np.random.default_rng(9)
    z = rng.standard_normal((25, 4))
    y = rng.standard_normal(25)
    u = rng.standard_normal((25, 5))
    builders = [
        lambda zz, yy: build_known_sigma_w(zz, yy, 0.1 * np.eye(4)),
        lambda zz, yy: build_known_sigma_x(zz, yy, np.eye(4)),
        lambda zz, yy: build_iv(zz, yy, IVSpec(u=u, m=5)),
        lambda zz, yy: build_missing(zz, yy, 0.25),
        lambda zz, yy: build_clean_ls(zz, yy),
    ]
    for make in builders:
        base = make(z, y)
        scaled = make(z, c * y)
        assert np.array_equal(base.sigma_hat, scaled.sigma_hat)
        assert np.allclose(scaled.gamma_hat, c * base.gamma_hat, rtol=1e-12)
        # repair mode keeps the solve defined for every builder on this
        # arbitrary data; the solution map stays linear in gamma_hat either way
        assert np.allclose(
            solve_corrected(scaled, repair=True),
            c * solve_corrected(base, repair=True),
            rtol=1e-9,
        )


def test_error_bound_clean_case_is_zero():
    val = error_bound(
        EstimatorKind.KNOWN_SIGMA_W, k=3, n=100, p=10, beta_norm=2.0,
        sigma_w=0.0, sigma_e=0.0,
    )
    assert val == 0.0


def test_error_bound_sigma_x_formula():
    k, n, p = 4, 250, 30
    val = error_bound(
        EstimatorKind.KNOWN_SIGMA_X, k=k, n=n, p=p, beta_norm=math.sqrt(k),
        sigma_w=1.0, sigma_e=0.0,
    )
    assert np.isclose(val, 2 * k * math.sqrt(math.log(p) / n))


def test_error_bound_missing_formula():
    k, n, p = 5, 400, 20
    val = error_bound(
        EstimatorKind.MISSING_DATA, k=k, n=n, p=p, beta_norm=1.7, rho=0.0, sigma_e=0.0,
    )
    assert np.isclose(val, 1.7 * math.sqrt(k * math.log(p) / n))


def test_error_bound_monotone_on_grid():
    base = dict(k=4, n=500, p=40, beta_norm=2.0)
    for kind in (
        EstimatorKind.KNOWN_SIGMA_W,
        EstimatorKind.KNOWN_SIGMA_X,
        EstimatorKind.CLEAN_LS,
    ):
        prev = -1.0
        for se in np.linspace(0, 2, 5):
            val = error_bound(kind, sigma_w=0.5, sigma_e=se, **base)
            assert val >= prev
            prev = val
    for kind in (EstimatorKind.KNOWN_SIGMA_W, EstimatorKind.KNOWN_SIGMA_X):
        prev = -1.0
        for sw in np.linspace(0, 2, 5):
            val = error_bound(kind, sigma_w=sw, sigma_e=0.3, **base)
            assert val >= prev
            prev = val
    prev = -1.0
    for rho in np.linspace(0, 0.8, 5):
        val = error_bound(EstimatorKind.MISSING_DATA, rho=rho, sigma_e=0.3, **base)
        assert val >= prev
        prev = val
    prev = -1.0
    for bn in np.linspace(0.5, 4, 5):
        val = error_bound(
            EstimatorKind.KNOWN_SIGMA_W, sigma_w=0.5, sigma_e=0.3,
            k=4, n=500, p=40, beta_norm=bn,
        )
        assert val >= prev
        prev = val


def test_error_bound_upper_variant_inflation_and_blowup():
    base = dict(k=3, n=300, p=20, beta_norm=1.5, sigma_w=0.5, sigma_e=0.1)
    plain = error_bound(EstimatorKind.KNOWN_SIGMA_W, **base)
    inflated = error_bound(
        EstimatorKind.UPPER_BOUND_SIGMA_W, delta_upper_max=0.3, **base
    )
    assert inflated > plain
    assert error_bound(
        EstimatorKind.UPPER_BOUND_SIGMA_W, delta_upper_max=1.0, **base
    ) == math.inf


def test_error_bound_missing_parameters_rejected():
    with pytest.raises(ValueError):
        error_bound(EstimatorKind.UPPER_BOUND_SIGMA_W, k=2, n=10, p=5, beta_norm=1.0)
    with pytest.raises(ValueError):
        error_bound(EstimatorKind.INSTRUMENTAL_VARIABLE, k=2, n=10, p=5, beta_norm=1.0)


def test_error_bound_iv_uses_spectral_extremes():
    val = error_bound(
        EstimatorKind.INSTRUMENTAL_VARIABLE,
        k=4, n=400, p=30, beta_norm=2.0, sigma_w=0.5, sigma_e=0.0,
        sigma_1=3.0, sigma_k=2.0, sigma_u=2.0, m=8,
    )
    expected = (
        math.sqrt(0.25 * 4.0) * 3.0 * 2.0 / (4.0 * math.sqrt(0.5))
        * math.sqrt(4 * math.log(30) / 400)
    )
    assert np.isclose(val, expected)
