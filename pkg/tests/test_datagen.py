import numpy as np
import pytest

from corrupt_sense.datagen import (
    AdditiveNoise,
    Clean,
    DesignSpec,
    Missing,
    corrupt,
    gen_design,
    gen_instance,
    gen_iv,
)


def test_gen_design_deterministic_for_seed():
    spec = DesignSpec.identity(2)
    a = gen_design(4, 2, spec, seed=7)
    b = gen_design(4, 2, spec, seed=7)
    assert a.shape == (4, 2)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, gen_design(4, 2, spec, seed=8))


def test_gen_design_second_moment_identity():
    # Rows rescaled by sqrt(n) should have second moment close to sigma_x.
    x = gen_design(10_000, 2, DesignSpec.identity(2), seed=11)
    gram = x.T @ x
    assert np.linalg.norm(gram - np.eye(2), 2) <= 0.05


def test_gen_design_second_moment_correlated():
    spec = DesignSpec.constant_offdiag(4, 0.3)
    x = gen_design(10_000, 4, spec, seed=12)
    gram = x.T @ x
    rel = np.linalg.norm(gram - spec.sigma_x, 2) / np.linalg.norm(spec.sigma_x, 2)
    assert rel <= 0.05


def test_gen_design_rejects_singular_covariance():
    with pytest.raises(ValueError):
        gen_design(1, 1, DesignSpec(np.array([[0.0]])), seed=0)


def test_gen_design_rejects_indefinite_covariance():
    with pytest.raises(ValueError):
        gen_design(5, 2, DesignSpec(np.array([[1.0, 2.0], [2.0, 1.0]])), seed=0)


def test_design_spec_rejects_asymmetric():
    with pytest.raises(ValueError):
        DesignSpec(np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_corrupt_clean_is_identity():
    x = gen_design(20, 5, DesignSpec.identity(5), seed=3)
    z, w = corrupt(x, Clean(), seed=1)
    assert np.array_equal(z, x)
    assert np.array_equal(w, np.zeros_like(x))


def test_corrupt_zero_noise_is_identity():
    x = gen_design(20, 5, DesignSpec.identity(5), seed=3)
    z, w = corrupt(x, AdditiveNoise(sigma_w=0.0), seed=1)
    assert np.array_equal(z, x)
    assert np.array_equal(w, np.zeros_like(x))


def test_corrupt_zero_erasure_is_identity():
    x = gen_design(20, 5, DesignSpec.identity(5), seed=3)
    z, mask = corrupt(x, Missing(rho=0.0), seed=1)
    assert np.array_equal(z, x)
    assert np.array_equal(mask, np.ones_like(x))


def test_corrupt_additive_relation():
    x = gen_design(30, 4, DesignSpec.identity(4), seed=5)
    z, w = corrupt(x, AdditiveNoise(sigma_w=0.7), seed=9)
    assert np.array_equal(z, x + w)


def test_corrupt_missing_relation_and_fraction():
    rho = 0.3
    erased = 0
    total = 0
    for seed in range(30):
        x = gen_design(100, 50, DesignSpec.identity(50), seed=seed)
        z, mask = corrupt(x, Missing(rho=rho), seed=seed)
        assert np.array_equal(z, x * mask)
        erased += int((mask == 0).sum())
        total += mask.size
    assert abs(erased / total - rho) <= 0.02


def test_mask_entries_bernoulli_chi_square():
    # Goodness of fit at significance 0.01 (1 dof critical value 6.635).
    rho = 0.25
    x = gen_design(200, 100, DesignSpec.identity(100), seed=21)
    _, mask = corrupt(x, Missing(rho=rho), seed=21)
    n_cells = mask.size
    observed = np.array([(mask == 0).sum(), (mask == 1).sum()], dtype=float)
    expected = np.array([rho * n_cells, (1 - rho) * n_cells])
    chi2 = float(((observed - expected) ** 2 / expected).sum())
    assert chi2 < 6.635


def test_missing_spec_rejects_bad_rho():
    with pytest.raises(ValueError):
        Missing(rho=1.0)
    with pytest.raises(ValueError):
        Missing(rho=-0.1)


def test_additive_spec_rejects_negative_scale():
    with pytest.raises(ValueError):
        AdditiveNoise(sigma_w=-1.0)


def test_gen_instance_full_support_signs():
    inst = gen_instance(8, 5, 5, DesignSpec.identity(5), Clean(), seed=2)
    assert np.all(np.abs(inst.beta_star) == 1.0)
    assert np.isclose(np.linalg.norm(inst.beta_star), np.sqrt(5))


def test_gen_instance_noiseless_response_exact():
    inst = gen_instance(50, 10, 3, DesignSpec.identity(10, sigma_e=0.0), Clean(), seed=4)
    assert np.array_equal(inst.y, inst.x @ inst.beta_star)
    assert np.array_equal(inst.e, np.zeros(50))


def test_gen_instance_deterministic():
    spec = DesignSpec.identity(20, sigma_e=0.5)
    a = gen_instance(100, 20, 3, spec, AdditiveNoise(sigma_w=0.4), seed=99)
    b = gen_instance(100, 20, 3, spec, AdditiveNoise(sigma_w=0.4), seed=99)
    for field in ("x", "z", "w", "e", "beta_star", "y"):
        assert np.array_equal(getattr(a, field), getattr(b, field)), field


def test_gen_instance_invariants():
    spec = DesignSpec.identity(12, sigma_e=0.3)
    inst = gen_instance(40, 12, 4, spec, AdditiveNoise(sigma_w=0.6), seed=13)
    assert np.array_equal(inst.y, inst.x @ inst.beta_star + inst.e)
    assert np.array_equal(inst.z, inst.x + inst.w)
    assert len(inst.support) == 4
    nz = inst.beta_star[np.flatnonzero(inst.beta_star)]
    assert np.all(np.isin(nz, (-1.0, 1.0)))

    inst_m = gen_instance(40, 12, 4, spec, Missing(rho=0.4), seed=13)
    assert np.array_equal(inst_m.z, inst_m.x * inst_m.mask)
    assert inst_m.w is None


def test_gen_instance_rejects_k_above_p():
    with pytest.raises(ValueError):
        gen_instance(10, 5, 6, DesignSpec.identity(5), Clean(), seed=0)


def test_gen_iv_pure_noise_when_design_zero():
    n = 2000
    x = np.zeros((n, 3))
    iv = gen_iv(x, m=2, seed=1)
    assert iv.u.shape == (n, 2)
    # u = fresh noise only; entries scaled to row variance 1/n
    assert abs(np.std(np.sqrt(n) * iv.u) - 1.0) < 0.05


def test_gen_iv_mixing_relation():
    x = gen_design(500, 4, DesignSpec.identity(4), seed=6)
    iv = gen_iv(x, m=8, seed=6)
    noise = iv.u - x @ iv.gamma
    assert abs(np.std(np.sqrt(500) * noise) - 1.0) < 0.05
    assert iv.m == 8 and iv.gamma.shape == (4, 8)


def test_gen_iv_cross_moment_matches_mixing_matrix():
    # With identity design covariance, E[u'x] is the transposed mixing matrix.
    x = gen_design(10_000, 2, DesignSpec.identity(2), seed=17)
    iv = gen_iv(x, m=4, seed=17)
    assert np.linalg.norm(iv.u.T @ x - iv.gamma.T, 2) <= 0.1


def test_gen_iv_protocol_instrument_count():
    k = 5
    x = gen_design(50, k, DesignSpec.identity(k), seed=0)
    assert gen_iv(x, m=2 * k, seed=0).m == 2 * k


def test_gen_iv_rejects_bad_m():
    x = np.zeros((10, 2))
    with pytest.raises(ValueError):
        gen_iv(x, m=0, seed=0)
