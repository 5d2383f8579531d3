import numpy as np
import pytest

from lrgl.model import (
    DomainError,
    KernelSpec,
    MobilitySpec,
    PotentialSpec,
    bem_model,
    eval_alpha,
    eval_mobility,
    eval_potential,
    gaussian_additive_model,
    kernel_table,
    kernel_value,
    power_law_real,
)


def test_quadratic_potential_values():
    spec = PotentialSpec("quadratic", c=0.5)
    u, up = eval_potential(spec, 2.0)
    assert u == pytest.approx(2.0)
    assert up == pytest.approx(2.0)


def test_bem_log_potential_values():
    spec = PotentialSpec("bem_log")
    u, up = eval_potential(spec, 4.0)
    assert u == pytest.approx(0.5 * np.log(4.0))
    assert up == pytest.approx(1.0 / 8.0)


def test_bem_log_domain_error():
    spec = PotentialSpec("bem_log")
    with pytest.raises(DomainError):
        eval_potential(spec, -1.0)


def test_custom_polynomial_matches_numpy_polyval():
    coeffs = (0.3, -0.2, 0.7, 0.0, 0.05)
    spec = PotentialSpec("custom-polynomial", coefficients=coeffs)
    xs = np.linspace(-2, 2, 11)
    u, up = eval_potential(spec, xs)
    assert np.allclose(u, np.polyval(coeffs[::-1], xs))
    # derivative against centered finite differences, 1e-6 relative
    eps = 1e-6
    fd = (eval_potential(spec, xs + eps)[0] - eval_potential(spec, xs - eps)[0]) / (2 * eps)
    assert np.allclose(up, fd, rtol=1e-6, atol=1e-8)


def test_potential_derivative_matches_finite_differences():
    for spec in [
        PotentialSpec("quadratic", c=0.7),
        PotentialSpec("quartic", c4=0.3, c2=-0.4),
        PotentialSpec("bem_log"),
    ]:
        xs = np.array([0.5, 1.3, 2.9]) if spec.domain == "positive-half-line" else np.array([-1.2, 0.4, 2.0])
        eps = 1e-6
        _, up = eval_potential(spec, xs)
        fd = (eval_potential(spec, xs + eps)[0] - eval_potential(spec, xs - eps)[0]) / (2 * eps)
        assert np.allclose(up, fd, rtol=1e-6, atol=1e-8)


def test_constant_mobility():
    spec = MobilitySpec("constant", b0=1.0)
    assert eval_mobility(spec, 0.3, -2.0) == (1.0, 0.0, 0.0)


def test_product_mobility_values_and_symmetry():
    spec = MobilitySpec("product", c=4.0)
    b, d1, d2 = eval_mobility(spec, 2.0, 3.0)
    assert (b, d1, d2) == (24.0, 12.0, 8.0)
    b2, _, _ = eval_mobility(spec, 3.0, 2.0)
    assert b2 == b


def test_mobility_partials_match_finite_differences():
    spec = MobilitySpec("product", c=2.5)
    eps = 1e-6
    for a, b in [(0.5, 1.5), (2.0, 0.25)]:
        _, d1, d2 = eval_mobility(spec, a, b)
        fd1 = (eval_mobility(spec, a + eps, b)[0] - eval_mobility(spec, a - eps, b)[0]) / (2 * eps)
        fd2 = (eval_mobility(spec, a, b + eps)[0] - eval_mobility(spec, a, b - eps)[0]) / (2 * eps)
        assert d1 == pytest.approx(fd1, rel=1e-6)
        assert d2 == pytest.approx(fd2, rel=1e-6)


def test_mobility_positivity_error():
    spec = MobilitySpec("product", c=4.0)
    from lrgl.model import PositivityError

    with pytest.raises(PositivityError):
        eval_mobility(spec, -1.0, 2.0)


def test_smooth_custom_mobility_requires_consistent_derivatives():
    with pytest.raises(ValueError):
        MobilitySpec(
            "smooth-custom",
            beta_fn=lambda a, b: 1.0 + a * a + b * b,
            d1_fn=lambda a, b: 0.0,  # wrong on purpose
            d2_fn=lambda a, b: 2.0 * b,
        )
    ok = MobilitySpec(
        "smooth-custom",
        beta_fn=lambda a, b: 1.0 + a * a + b * b,
        d1_fn=lambda a, b: 2.0 * a,
        d2_fn=lambda a, b: 2.0 * b,
    )
    b, d1, d2 = eval_mobility(ok, 1.0, 2.0)
    assert b == pytest.approx(6.0)
    assert (d1, d2) == (2.0, 4.0)


def test_alpha_additive_case():
    m = gaussian_additive_model()
    assert eval_alpha(m, 1.0, 3.0) == pytest.approx(2.0)


def test_alpha_vanishes_on_diagonal():
    for m in [gaussian_additive_model(), bem_model()]:
        x = 1.7
        assert eval_alpha(m, x, x) == 0.0


def test_alpha_bem_closed_form():
    m = bem_model()
    assert eval_alpha(m, 1.0, 3.0) == pytest.approx(4.0)
    # general: alpha = 2 (phi' - phi)
    rng = np.random.default_rng(0)
    for _ in range(20):
        a, b = rng.uniform(0.1, 4.0, 2)
        assert eval_alpha(m, a, b) == pytest.approx(2.0 * (b - a), rel=1e-12)


def test_alpha_exact_antisymmetry():
    rng = np.random.default_rng(1)
    for m in [gaussian_additive_model(), bem_model(), gaussian_additive_model(gamma=0.5)]:
        lo = 0.1 if m.domain == "positive-half-line" else -3.0
        for _ in range(50):
            a, b = rng.uniform(lo, 4.0, 2)
            fwd, bwd = eval_alpha(m, a, b), eval_alpha(m, b, a)
            if m.mobility.family == "constant":
                assert fwd + bwd == 0.0  # bit-exact for constant mobility
            else:
                assert abs(fwd + bwd) <= 4e-15 * (1.0 + abs(fwd))


def test_alpha_gradient_identity():
    # alpha = exp(U(a)+U(b)) * (d/da - d/db) [exp(-U(a)-U(b)) beta(a,b)],
    # checked by centered finite differences to 1e-5 relative.
    def lhs(model, a, b):
        return eval_alpha(model, a, b)

    def rhs(model, a, b, eps=1e-6):
        def g(x, y):
            ua, _ = eval_potential(model.potential, x)
            ub, _ = eval_potential(model.potential, y)
            beta, _, _ = eval_mobility(model.mobility, x, y)
            return np.exp(-ua - ub) * beta

        ua, _ = eval_potential(model.potential, a)
        ub, _ = eval_potential(model.potential, b)
        da = (g(a + eps, b) - g(a - eps, b)) / (2 * eps)
        db = (g(a, b + eps) - g(a, b - eps)) / (2 * eps)
        return np.exp(ua + ub) * (da - db)

    rng = np.random.default_rng(2)
    for m in [gaussian_additive_model(), bem_model()]:
        lo = 0.3 if m.domain == "positive-half-line" else -2.0
        for _ in range(10):
            a, b = rng.uniform(lo, 3.0, 2)
            assert lhs(m, a, b) == pytest.approx(rhs(m, a, b), rel=1e-5, abs=1e-8)


def test_kernel_power_law_values():
    k = KernelSpec("power-law", gamma=0.5)
    assert kernel_value(k, 2) == pytest.approx(2.0 ** (-1.5))
    assert kernel_value(k, 0) == 0.0
    assert kernel_value(k, -2) == kernel_value(k, 2)


def test_kernel_mixed_value():
    k = KernelSpec("mixed", gamma=1.5, a=1.0)
    assert kernel_value(k, 1, n=16) == pytest.approx(16.0**0.5 + 1.0)


def test_kernel_gamma_validation():
    with pytest.raises(ValueError):
        KernelSpec("power-law", gamma=2.5)
    with pytest.raises(ValueError):
        KernelSpec("power-law", gamma=1.0)
    KernelSpec("power-law", gamma=1.0, allow_pathological=True)


def test_kernel_homogeneity():
    # K(z) = n^-(1+gamma) K_real(z/n) for the pure power law
    gamma = 0.7
    k = KernelSpec("power-law", gamma=gamma)
    n = 37
    for z in [1, 2, 5, 16]:
        lhs = kernel_value(k, z, n)
        rhs = n ** (-(1.0 + gamma)) * power_law_real(gamma, np.array([z / n]))[0]
        assert lhs == pytest.approx(rhs, rel=1e-13)


def test_kernel_table_matches_pointwise():
    k = KernelSpec("mixed", gamma=1.2, a=0.5)
    tab = kernel_table(k, 9)
    for d in range(9):
        assert tab[d] == kernel_value(k, d, 9)
