"""Single-site Gibbs thermodynamics and coarse-grained transport coefficients.

For the tilted one-site measure nu_Phi(dphi) ~ exp(-U(phi) - lambda*phi) dphi:

    F(lambda) = -log Z(lambda),    S(Phi) = sup_lambda { F(lambda) - lambda*Phi },
    lambda(Phi) = -S'(Phi),        Phi = F'(lambda(Phi)),
    sigma(Phi) = Var_{nu_Phi}(phi) = 1/S''(Phi) = -F''(lambda(Phi)).

All integrals are composite Gauss-Legendre on a truncated domain chosen from the
growth of U + lambda*phi (tail exponent >= EXP_CUT below the minimum, so the
discarded mass is far under the quadrature tolerance).  The bem_log half-line
density has a phi^(-1/2) singularity at 0; the substitution phi = y^2 turns it
into a plain Gaussian-type integrand, and the same y-grid drives sampling.

Coarse coefficients are double (tensor-product) quadratures of alpha and beta:

    A(Phi, Phi') = <alpha>_{nu_Phi x nu_Phi'},  B(Phi, Phi') = <beta>_{...} > 0,

linked by the Einstein relation A = (S'(Phi') - S'(Phi)) * B.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import (
    HALF_LINE,
    REAL_LINE,
    ModelSpec,
    PotentialSpec,
    eval_alpha,
    eval_mobility,
    eval_potential,
)
from . import io

__all__ = [
    "QuadratureSpec",
    "ThermoTable",
    "ThermoError",
    "RangeError",
    "build_thermo",
    "coarse_A",
    "coarse_B",
    "einstein_residual",
]

EXP_CUT = 46.0  # e^-46 ~ 1e-20: tail exponent depth for domain truncation


class ThermoError(RuntimeError):
    pass


class RangeError(ValueError):
    """Phi (or lambda) outside the achievable/admissible range."""


@dataclass(frozen=True)
class QuadratureSpec:
    n_panels: int = 24
    nodes_per_panel: int = 32
    abs_tol: float = 1e-10
    lo: Optional[float] = None  # explicit truncation overrides the automatic one
    hi: Optional[float] = None


def _default_lambda_interval(pot: PotentialSpec) -> tuple:
    if pot.family == "bem_log":
        return (1e-3, 1e3)
    if pot.domain == HALF_LINE:
        cs = pot.coefficients
        if pot.family == "custom-polynomial" and (len(cs) <= 2 or cs[-1] <= 0):
            return (1e-3, 1e3)
        return (-10.0, 1e3)
    return (-30.0, 30.0)


def _exponent_and_mode(pot: PotentialSpec, lam: float):
    """Callable E(phi) = U(phi) + lam*phi plus its minimiser over the domain."""

    def E(x):
        u, _ = eval_potential(pot, x)
        return u + lam * x

    # Polynomial families: stationary points are roots of U' + lam.
    if pot.family == "quadratic":
        mode = -lam / (2.0 * pot.c)
    elif pot.family == "quartic":
        roots = np.roots([4.0 * pot.c4, 0.0, 2.0 * pot.c2, lam])
        real = roots[np.abs(roots.imag) < 1e-9].real
        mode = real[np.argmin([E(r) for r in real])]
    elif pot.family == "bem_log":
        mode = 0.5 / lam if lam > 0 else None
    else:
        cs = pot.coefficients
        dcoef = [k * cs[k] for k in range(len(cs) - 1, 0, -1)]
        dcoef[-1] += lam
        roots = np.roots(dcoef)
        real = roots[np.abs(roots.imag) < 1e-9].real
        if pot.domain == HALF_LINE:
            real = real[real > 0]
        if len(real) == 0:
            mode = 1.0 if pot.domain == HALF_LINE else 0.0
        else:
            mode = real[np.argmin([E(r) for r in real])]
    return E, mode


def _truncation(pot: PotentialSpec, lam: float, quad: QuadratureSpec):
    if quad.lo is not None and quad.hi is not None:
        return float(quad.lo), float(quad.hi)
    E, mode = _exponent_and_mode(pot, lam)
    e0 = E(mode)

    def expand(direction):
        step = 1.0
        x = mode
        for _ in range(200):
            xn = x + direction * step
            if pot.domain == HALF_LINE and xn <= 0:
                return 0.0
            if E(xn) - e0 >= EXP_CUT:
                return xn
            x = xn
            step *= 1.4
        raise ThermoError(
            f"cannot truncate the Gibbs integrand: U + {lam}*phi grows too slowly"
        )

    return expand(-1.0) if pot.domain == REAL_LINE else 0.0, expand(+1.0)


class _Marginal:
    """Quadrature representation of nu_Phi: phi-nodes, normalized weights, logZ."""

    __slots__ = ("x", "w", "logZ", "lam", "y_nodes")

    def __init__(self, pot: PotentialSpec, lam: float, quad: QuadratureSpec):
        gl_x, gl_w = np.polynomial.legendre.leggauss(quad.nodes_per_panel)
        self.lam = lam
        self.y_nodes = None
        if pot.family == "bem_log":
            if lam <= 0:
                raise RangeError("bem_log needs lambda > 0")
            # phi = y^2: integrand becomes 2 exp(-lam y^2) on (0, ymax)
            ymax = np.sqrt(EXP_CUT / lam)
            edges = np.linspace(0.0, ymax, quad.n_panels + 1)
            ys, ws = _composite(edges, gl_x, gl_w)
            vals = 2.0 * np.exp(-lam * ys**2)
            x = ys**2
            raw = ws * vals
            self.y_nodes = ys
            logshift = 0.0
        else:
            lo, hi = _truncation(pot, lam, quad)
            edges = np.linspace(lo, hi, quad.n_panels + 1)
            xs, ws = _composite(edges, gl_x, gl_w)
            u, _ = eval_potential(pot, xs)
            expo = u + lam * xs
            e0 = float(np.min(expo))
            vals = np.exp(-(expo - e0))
            x = xs
            raw = ws * vals
            logshift = -e0
        Z = float(np.sum(raw))
        if not np.isfinite(Z) or Z <= 0:
            raise ThermoError(f"quadrature failed at lambda={lam}")
        self.x = x
        self.w = raw / Z
        self.logZ = np.log(Z) + logshift

    def moment(self, k: int) -> float:
        return float(np.sum(self.w * self.x**k))

    @property
    def mean(self) -> float:
        return self.moment(1)

    @property
    def var(self) -> float:
        m = self.mean
        return float(np.sum(self.w * (self.x - m) ** 2))


def _composite(edges, gl_x, gl_w):
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    xs = (mid[:, None] + half[:, None] * gl_x[None, :]).ravel()
    ws = (half[:, None] * gl_w[None, :]).ravel()
    return xs, ws


class ThermoTable:
    """Immutable thermodynamics of one model; all queries are read-only."""

    def __init__(self, model: ModelSpec, quad: QuadratureSpec = QuadratureSpec(),
                 lambda_interval: Optional[tuple] = None):
        self.model = model
        self.quad = quad
        pot = model.potential
        lo, hi = lambda_interval or _default_lambda_interval(pot)
        # Validate the declared interval by quadrature at (slightly inset) endpoints.
        try:
            m_lo = _Marginal(pot, lo, quad)
            m_hi = _Marginal(pot, hi, quad)
        except (ThermoError, OverflowError) as exc:
            raise ThermoError(f"admissible lambda interval invalid: {exc}") from exc
        self.lambda_interval = (lo, hi)
        # F' = <phi> is strictly decreasing in lambda, so the achievable mean
        # range is (mean(hi), mean(lo)).
        self.phi_range = (m_hi.mean, m_lo.mean)
        self._marginals = {}
        self._lam_cache = {}
        self._check_invariants()

    # -- lambda-side quantities ------------------------------------------------

    def _marginal_at_lambda(self, lam: float) -> _Marginal:
        key = float(lam)
        m = self._marginals.get(key)
        if m is None:
            m = _Marginal(self.model.potential, key, self.quad)
            if len(self._marginals) > 4096:
                self._marginals.clear()
            self._marginals[key] = m
        return m

    def F(self, lam: float) -> float:
        """Free energy F(lambda) = -log Z(lambda)."""
        return -self._marginal_at_lambda(lam).logZ

    def logZ(self, lam: float) -> float:
        return self._marginal_at_lambda(lam).logZ

    def mean_at_lambda(self, lam: float) -> float:
        return self._marginal_at_lambda(lam).mean

    def var_at_lambda(self, lam: float) -> float:
        return self._marginal_at_lambda(lam).var

    # -- Phi-side quantities ---------------------------------------------------

    def lambda_of(self, Phi: float) -> float:
        """Safeguarded Newton for F'(lambda) = Phi (F' strictly decreasing)."""
        Phi = float(Phi)
        hit = self._lam_cache.get(Phi)
        if hit is not None:
            return hit
        lo, hi = self.lambda_interval
        pmin, pmax = self.phi_range
        if not (pmin <= Phi <= pmax):
            raise RangeError(
                f"Phi={Phi} outside achievable mean range ({pmin:.6g}, {pmax:.6g})"
            )
        a, b = lo, hi  # mean(a) >= Phi >= mean(b)
        lam = 0.5 * (a + b) if self.model.potential.family != "bem_log" else 0.5 / max(Phi, 1e-12)
        lam = min(max(lam, a), b)
        for _ in range(100):
            m = self._marginal_at_lambda(lam)
            g = m.mean - Phi
            if abs(g) < 1e-13 * max(1.0, abs(Phi)):
                break
            if g > 0:
                a = lam
            else:
                b = lam
            step = g / m.var  # Newton: d<phi>/dlambda = -var
            lam_new = lam + step
            if not (a < lam_new < b):
                lam_new = 0.5 * (a + b)
            lam = lam_new
        self._lam_cache[Phi] = lam
        return lam

    def S(self, Phi: float) -> float:
        lam = self.lambda_of(Phi)
        return self.F(lam) - lam * Phi

    def Sp(self, Phi: float) -> float:
        """S'(Phi) = -lambda(Phi)."""
        return -self.lambda_of(Phi)

    def Spp(self, Phi: float) -> float:
        """S''(Phi) = 1/Var(nu_Phi) > 0."""
        return 1.0 / self.var_at_lambda(self.lambda_of(Phi))

    def sigma(self, Phi: float) -> float:
        """Static variance sigma(Phi) = 1/S''(Phi)."""
        return self.var_at_lambda(self.lambda_of(Phi))

    def Sp_grid(self, Phis) -> np.ndarray:
        return np.array([self.Sp(p) for p in np.asarray(Phis, dtype=float)])

    def marginal(self, Phi: float) -> _Marginal:
        """Quadrature representation of nu_Phi."""
        return self._marginal_at_lambda(self.lambda_of(Phi))

    # -- checks and export -------------------------------------------------------

    def _check_invariants(self):
        pmin, pmax = self.phi_range
        pad = 0.05 * (pmax - pmin)
        phis = np.linspace(pmin + pad, pmax - pad, 7)
        lams = np.array([self.lambda_of(p) for p in phis])
        # Legendre duality round trip and strict convexity of S
        for p, lam in zip(phis, lams):
            if abs(self.mean_at_lambda(lam) - p) > 1e-8 * max(1.0, abs(p)):
                raise ThermoError("Newton inversion round trip failed")
            if self.Spp(p) <= 0:
                raise ThermoError("entropy not strictly convex")
        # F concavity along a lambda grid (second differences <= tol)
        lg = np.linspace(min(lams), max(lams), 9)
        if lg[0] < lg[-1]:
            Fv = np.array([self.F(l) for l in lg])
            d2 = Fv[:-2] - 2 * Fv[1:-1] + Fv[2:]
            if np.any(d2 > 1e-8 * max(1.0, np.max(np.abs(Fv)))):
                raise ThermoError("free energy is not concave on the sampled grid")

    def export_csv(self, path, Phis, cfg_hash=""):
        rows = []
        for p in np.asarray(Phis, dtype=float):
            rows.append([p, self.lambda_of(p), self.S(p), self.Sp(p), self.Spp(p), self.sigma(p)])
        io.write_csv(path, ["Phi", "lambda", "S", "Sp", "Spp", "sigma"], rows, cfg_hash)


def build_thermo(model: ModelSpec, quad: QuadratureSpec = QuadratureSpec(),
                 lambda_interval: Optional[tuple] = None) -> ThermoTable:
    return ThermoTable(model, quad, lambda_interval)


def coarse_A(model: ModelSpec, thermo: ThermoTable, Phi: float, Phip: float) -> float:
    """A(Phi, Phi') = <alpha>_{nu_Phi x nu_Phi'}; antisymmetric."""
    ma, mb = thermo.marginal(Phi), thermo.marginal(Phip)
    xa, xb = np.meshgrid(ma.x, mb.x, indexing="ij")
    al = eval_alpha(model, xa, xb)
    return float(ma.w @ al @ mb.w)


def coarse_B(model: ModelSpec, thermo: ThermoTable, Phi: float, Phip: float) -> float:
    """B(Phi, Phi') = <beta>_{nu_Phi x nu_Phi'} > 0; symmetric."""
    ma, mb = thermo.marginal(Phi), thermo.marginal(Phip)
    xa, xb = np.meshgrid(ma.x, mb.x, indexing="ij")
    beta, _, _ = eval_mobility(model.mobility, xa, xb)
    return float(ma.w @ np.asarray(beta) @ mb.w)


def einstein_residual(model: ModelSpec, thermo: ThermoTable, Phis) -> float:
    """max over the grid of |A(Phi,Phi') - (S'(Phi') - S'(Phi)) B(Phi,Phi')|."""
    Phis = np.asarray(Phis, dtype=float)
    worst = 0.0
    for p in Phis:
        for q in Phis:
            A = coarse_A(model, thermo, p, q)
            B = coarse_B(model, thermo, p, q)
            res = abs(A - (thermo.Sp(q) - thermo.Sp(p)) * B)
            worst = max(worst, res)
    return worst
