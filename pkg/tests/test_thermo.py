import numpy as np
import pytest
from scipy import integrate

from lrgl.model import (
    MobilitySpec,
    ModelSpec,
    PotentialSpec,
    KernelSpec,
    bem_model,
    gaussian_additive_model,
    quartic_model,
)
from lrgl.thermo import (
    QuadratureSpec,
    RangeError,
    build_thermo,
    coarse_A,
    coarse_B,
    einstein_residual,
)


@pytest.fixture(scope="module")
def gauss_thermo():
    return build_thermo(gaussian_additive_model())


@pytest.fixture(scope="module")
def bem_thermo():
    return build_thermo(bem_model())


@pytest.fixture(scope="module")
def quartic_thermo():
    return build_thermo(quartic_model())


def test_gaussian_closed_forms(gauss_thermo):
    # U = phi^2/2: Z = sqrt(2 pi) e^{lambda^2/2}, F = -log(2 pi)/2 - lambda^2/2
    t = gauss_thermo
    for lam in [-1.5, 0.0, 2.0]:
        assert t.F(lam) == pytest.approx(-0.5 * np.log(2 * np.pi) - 0.5 * lam**2, abs=1e-12)
    for Phi in [-2.0, 0.3, 1.0]:
        assert t.lambda_of(Phi) == pytest.approx(-Phi, abs=1e-10)
        assert t.S(Phi) == pytest.approx(0.5 * Phi**2 - 0.5 * np.log(2 * np.pi), abs=1e-10)
        assert t.sigma(Phi) == pytest.approx(1.0, abs=1e-10)


def test_bem_closed_forms(bem_thermo):
    t = bem_thermo
    for lam in [0.5, 1.0, 2.0]:
        assert t.F(lam) == pytest.approx(-0.5 * np.log(np.pi) + 0.5 * np.log(lam), abs=1e-11)
    for Phi in [0.5, 1.0, 2.0]:
        assert t.lambda_of(Phi) == pytest.approx(1.0 / (2 * Phi), rel=1e-10)
        expect_S = -(1 + np.log(2) + np.log(np.pi)) / 2 - 0.5 * np.log(Phi)
        assert t.S(Phi) == pytest.approx(expect_S, abs=1e-10)
        assert t.sigma(Phi) == pytest.approx(2 * Phi**2, rel=1e-9)


def test_duality_on_grid(gauss_thermo, bem_thermo, quartic_thermo):
    for t in (gauss_thermo, bem_thermo, quartic_thermo):
        lo, hi = t.phi_range
        pad = 0.1 * (hi - lo)
        for Phi in np.linspace(lo + pad, hi - pad, 7):
            assert t.lambda_of(Phi) + t.Sp(Phi) == 0.0  # same quantity by construction
            # round trip Phi(lambda(Phi)) = Phi
            assert t.mean_at_lambda(t.lambda_of(Phi)) == pytest.approx(Phi, abs=1e-8)


def test_quartic_against_scipy_quad(quartic_thermo):
    # independent oracle: raw scipy.integrate.quad of the untransformed integrand
    t = quartic_thermo
    pot = t.model.potential
    for lam in [-1.0, 0.5]:
        Z, _ = integrate.quad(
            lambda x: np.exp(-(pot.c4 * x**4 + pot.c2 * x**2) - lam * x), -np.inf, np.inf
        )
        m1, _ = integrate.quad(
            lambda x: x * np.exp(-(pot.c4 * x**4 + pot.c2 * x**2) - lam * x), -np.inf, np.inf
        )
        assert t.F(lam) == pytest.approx(-np.log(Z), abs=1e-10)
        assert t.mean_at_lambda(lam) == pytest.approx(m1 / Z, abs=1e-10)


def test_variance_matches_numeric_Fpp(quartic_thermo):
    # -F''(lambda(Phi)) equals the quadrature variance to 1e-7
    t = quartic_thermo
    for Phi in [-0.5, 0.0, 0.8]:
        lam = t.lambda_of(Phi)
        h = 1e-4
        fpp = (t.F(lam + h) - 2 * t.F(lam) + t.F(lam - h)) / h**2
        assert -fpp == pytest.approx(t.sigma(Phi), abs=1e-7)


def test_range_error(gauss_thermo):
    with pytest.raises(RangeError):
        gauss_thermo.lambda_of(1e9)


def test_coarse_A_additive(gauss_thermo):
    t = gauss_thermo
    m = t.model
    for p, q in [(0.0, 1.0), (-0.7, 0.3)]:
        assert coarse_A(m, t, p, q) == pytest.approx(q - p, abs=1e-10)
        assert coarse_A(m, t, p, p) == pytest.approx(0.0, abs=1e-12)


def test_coarse_A_antisymmetry(quartic_thermo):
    t = quartic_thermo
    m = t.model
    a = coarse_A(m, t, -0.4, 0.9)
    b = coarse_A(m, t, 0.9, -0.4)
    assert a == pytest.approx(-b, rel=1e-12)


def test_coarse_A_bem(bem_thermo):
    # closed form <2(phi'-phi)> = 2(Phi'-Phi)
    t = bem_thermo
    m = t.model
    assert coarse_A(m, t, 1.0, 3.0) == pytest.approx(4.0, rel=1e-9)


def test_coarse_B_constant(gauss_thermo):
    t = gauss_thermo
    assert coarse_B(t.model, t, 0.2, 0.9) == pytest.approx(1.0, abs=1e-12)


def test_coarse_B_bem_product(bem_thermo):
    t = bem_thermo
    assert coarse_B(t.model, t, 1.0, 2.0) == pytest.approx(8.0, rel=1e-10)
    # symmetry on random pairs
    rng = np.random.default_rng(3)
    for _ in range(5):
        p, q = rng.uniform(0.5, 3.0, 2)
        assert coarse_B(t.model, t, p, q) == pytest.approx(coarse_B(t.model, t, q, p), rel=1e-12)


def test_einstein_residual_gaussian(gauss_thermo):
    assert einstein_residual(gauss_thermo.model, gauss_thermo, [-1.0, 0.0, 0.5, 1.0]) <= 1e-10


def test_einstein_residual_bem(bem_thermo):
    assert einstein_residual(bem_thermo.model, bem_thermo, [0.5, 1.0, 2.0]) <= 1e-7


def test_einstein_residual_diagonal(quartic_thermo):
    t = quartic_thermo
    m = t.model
    for p in [-0.5, 0.3]:
        A = coarse_A(m, t, p, p)
        assert abs(A) <= 1e-12


def test_custom_polynomial_halfline_table():
    m = ModelSpec(
        potential=PotentialSpec("custom-polynomial", coefficients=(0.0, 0.0, 0.5), domain="positive-half-line"),
        mobility=MobilitySpec("constant", b0=1.0),
        kernel=KernelSpec("power-law", gamma=1.5),
    )
    t = build_thermo(m)
    lo, hi = t.phi_range
    Phi = 0.5 * (lo + hi)
    assert t.Spp(Phi) > 0
    # oracle: quad on the half-line
    lam = t.lambda_of(Phi)
    Z, _ = integrate.quad(lambda x: np.exp(-0.5 * x**2 - lam * x), 0, np.inf)
    m1, _ = integrate.quad(lambda x: x * np.exp(-0.5 * x**2 - lam * x), 0, np.inf)
    assert m1 / Z == pytest.approx(Phi, abs=1e-9)


def test_export_csv(tmp_path, gauss_thermo):
    p = tmp_path / "thermo.csv"
    gauss_thermo.export_csv(p, [0.0, 0.5, 1.0], cfg_hash="deadbeef")
    lines = p.read_text().splitlines()
    assert lines[0].startswith("# config_hash=deadbeef")
    assert lines[1] == "Phi,lambda,S,Sp,Spp,sigma"
    assert len(lines) == 5
