"""Microscopic model definitions: one-site potentials, pair mobilities, couplings.

A model is the triple (U, beta, K) plus boundary bath values.  The drift of the
pair exchange between sites x and y is K(y-x) * alpha(phi(x), phi(y)) with

    alpha(a, b) = -beta(a, b) * (U'(a) - U'(b)) + d1_beta(a, b) - d2_beta(a, b),

which is exactly antisymmetric under (a, b) -> (b, a) whenever beta is symmetric.
That antisymmetry is what makes the total volume sum(phi) a conserved quantity,
so derivatives of the built-in mobility families are analytic, never numeric.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "DomainError",
    "PositivityError",
    "PotentialSpec",
    "MobilitySpec",
    "KernelSpec",
    "ModelSpec",
    "eval_potential",
    "eval_mobility",
    "eval_alpha",
    "kernel_value",
    "kernel_table",
    "gaussian_additive_model",
    "quartic_model",
    "bem_model",
]


class DomainError(ValueError):
    """Input outside the declared field domain (e.g. phi <= 0 on the half-line)."""


class PositivityError(ValueError):
    """Mobility evaluated to a non-positive value."""


REAL_LINE = "real-line"
HALF_LINE = "positive-half-line"


@dataclass(frozen=True)
class PotentialSpec:
    """One-site potential U.

    family:
      "quadratic": U = c * phi^2                      (real line)
      "quartic":   U = c4 * phi^4 + c2 * phi^2        (real line, c4 > 0)
      "bem_log":   U = 0.5 * log(phi)                 (half line only)
      "custom-polynomial": U = sum(coeffs[k] * phi^k) (either domain)
    """

    family: str
    c: float = 0.5
    c4: float = 1.0
    c2: float = 0.0
    coefficients: tuple = ()
    domain: str = REAL_LINE

    def __post_init__(self):
        if self.family not in ("quadratic", "quartic", "bem_log", "custom-polynomial"):
            raise ValueError(f"unknown potential family {self.family!r}")
        if self.family == "bem_log" and self.domain != HALF_LINE:
            object.__setattr__(self, "domain", HALF_LINE)
        if self.family == "quartic" and self.c4 <= 0:
            raise ValueError("quartic potential needs c4 > 0 for integrability")
        if self.domain not in (REAL_LINE, HALF_LINE):
            raise ValueError(f"unknown domain {self.domain!r}")
        if self.family == "custom-polynomial":
            object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
            if not self.coefficients:
                raise ValueError("custom-polynomial needs coefficients")

    def in_domain(self, phi) -> bool:
        phi = np.asarray(phi, dtype=float)
        if self.domain == HALF_LINE:
            return bool(np.all(phi > 0.0))
        return bool(np.all(np.isfinite(phi)))


@dataclass(frozen=True)
class MobilitySpec:
    """Symmetric positive pair mobility beta(phi, phi').

    family:
      "constant": beta = b0
      "product":  beta = c * phi * phi'   (BEM-type; positive only on the half-line)
      "smooth-custom": user callables (beta, d1, d2); derivatives are mandatory
         and finite-difference checked at construction.
    lower_bound: declared uniform lower bound for non-BEM runs (0.0 disables).
    """

    family: str
    b0: float = 1.0
    c: float = 1.0
    beta_fn: Optional[Callable[[float, float], float]] = None
    d1_fn: Optional[Callable[[float, float], float]] = None
    d2_fn: Optional[Callable[[float, float], float]] = None
    lower_bound: float = 0.0

    def __post_init__(self):
        if self.family not in ("constant", "product", "smooth-custom"):
            raise ValueError(f"unknown mobility family {self.family!r}")
        if self.family == "constant" and self.b0 <= 0:
            raise ValueError("constant mobility must be positive")
        if self.family == "product" and self.c <= 0:
            raise ValueError("product mobility must have c > 0")
        if self.family == "smooth-custom":
            if self.beta_fn is None or self.d1_fn is None or self.d2_fn is None:
                raise ValueError("smooth-custom mobility must supply beta and both partials")
            self._self_check()

    def _self_check(self, points=((0.3, 0.7), (1.1, 2.4), (-0.5, 0.9))):
        eps = 1e-6
        for a, b in points:
            try:
                d1 = (self.beta_fn(a + eps, b) - self.beta_fn(a - eps, b)) / (2 * eps)
                d2 = (self.beta_fn(a, b + eps) - self.beta_fn(a, b - eps)) / (2 * eps)
            except Exception:
                continue  # point may be outside the user's domain
            if abs(d1 - self.d1_fn(a, b)) > 1e-4 * (1 + abs(d1)):
                raise ValueError("smooth-custom d1 disagrees with finite differences")
            if abs(d2 - self.d2_fn(a, b)) > 1e-4 * (1 + abs(d2)):
                raise ValueError("smooth-custom d2 disagrees with finite differences")


@dataclass(frozen=True)
class KernelSpec:
    """Pair coupling K(z), symmetric with K(0) = 0.

    kind:
      "power-law":        K(z) = |z|^-(1+gamma), z != 0
      "nearest-neighbor": K(z) = 1{|z| = 1}
      "mixed":            K(z) = a * n^(2-gamma) * 1{|z|=1} + |z|^-(1+gamma) 1{z!=0}
    gamma is restricted to (0, 2); gamma = 1 is rejected unless
    allow_pathological=True (gamma = 2 is never allowed).
    """

    kind: str = "power-law"
    gamma: float = 1.5
    a: float = 1.0
    allow_pathological: bool = False

    def __post_init__(self):
        if self.kind not in ("power-law", "nearest-neighbor", "mixed"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind in ("power-law", "mixed"):
            if not (0.0 < self.gamma < 2.0):
                raise ValueError(f"gamma={self.gamma} outside the open interval (0, 2)")
            if self.gamma == 1.0 and not self.allow_pathological:
                raise ValueError("gamma = 1 is pathological; pass allow_pathological=True to force it")
        if self.kind == "mixed" and self.a <= 0:
            raise ValueError("mixed kernel needs a > 0")


@dataclass(frozen=True)
class ModelSpec:
    potential: PotentialSpec
    mobility: MobilitySpec
    kernel: KernelSpec
    bath_left: float = 0.0
    bath_right: float = 0.0

    @property
    def domain(self) -> str:
        return self.potential.domain


def eval_potential(spec: PotentialSpec, phi):
    """Return (U(phi), U'(phi)); phi may be a scalar or an ndarray."""
    arr = np.asarray(phi, dtype=float)
    if not spec.in_domain(arr):
        raise DomainError(f"phi={phi!r} outside domain {spec.domain} of {spec.family}")
    if spec.family == "quadratic":
        u = spec.c * arr**2
        up = 2.0 * spec.c * arr
    elif spec.family == "quartic":
        u = spec.c4 * arr**4 + spec.c2 * arr**2
        up = 4.0 * spec.c4 * arr**3 + 2.0 * spec.c2 * arr
    elif spec.family == "bem_log":
        u = 0.5 * np.log(arr)
        up = 0.5 / arr
    else:
        cs = spec.coefficients
        u = np.zeros_like(arr)
        for k in range(len(cs) - 1, -1, -1):  # Horner
            u = u * arr + cs[k]
        up = np.zeros_like(arr)
        for k in range(len(cs) - 1, 0, -1):
            up = up * arr + k * cs[k]
    if np.ndim(phi) == 0:
        return float(u), float(up)
    return u, up


def eval_mobility(spec: MobilitySpec, phi, phip):
    """Return (beta, d1_beta, d2_beta) at (phi, phi'). Raises on beta <= 0."""
    a = np.asarray(phi, dtype=float)
    b = np.asarray(phip, dtype=float)
    if spec.family == "constant":
        beta = np.broadcast_to(np.float64(spec.b0), np.broadcast_shapes(a.shape, b.shape)).copy()
        d1 = np.zeros_like(beta)
        d2 = np.zeros_like(beta)
    elif spec.family == "product":
        beta = spec.c * a * b
        d1 = spec.c * b + np.zeros_like(beta)
        d2 = spec.c * a + np.zeros_like(beta)
    else:
        beta = np.vectorize(spec.beta_fn)(a, b).astype(float)
        d1 = np.vectorize(spec.d1_fn)(a, b).astype(float)
        d2 = np.vectorize(spec.d2_fn)(a, b).astype(float)
    if np.any(beta <= 0.0):
        raise PositivityError("mobility is non-positive at the requested point")
    if spec.lower_bound > 0.0 and np.any(beta < spec.lower_bound):
        raise PositivityError(
            f"mobility below its declared lower bound {spec.lower_bound}"
        )
    if np.ndim(phi) == 0 and np.ndim(phip) == 0:
        return float(beta), float(d1), float(d2)
    return beta, d1, d2


def eval_alpha(spec: ModelSpec, phi, phip):
    """Antisymmetric pair drift alpha(phi, phi')."""
    _, up_a = eval_potential(spec.potential, phi)
    _, up_b = eval_potential(spec.potential, phip)
    beta, d1, d2 = eval_mobility(spec.mobility, phi, phip)
    return -beta * (up_a - up_b) + d1 - d2


def kernel_value(spec: KernelSpec, z: int, n: int = 2) -> float:
    """K(z) on the lattice of n sites. n only matters for the mixed kernel."""
    if n < 2:
        raise ValueError("lattice size n must be >= 2")
    z = int(z)
    if z == 0:
        return 0.0
    az = abs(z)
    if spec.kind == "nearest-neighbor":
        return 1.0 if az == 1 else 0.0
    val = az ** (-(1.0 + spec.gamma))
    if spec.kind == "mixed" and az == 1:
        val += spec.a * n ** (2.0 - spec.gamma)
    return val


def kernel_table(spec: KernelSpec, n: int) -> np.ndarray:
    """K(d) for d = 0..n-1, as used by the O(n^2) pair loops."""
    tab = np.zeros(n)
    for d in range(1, n):
        tab[d] = kernel_value(spec, d, n)
    return tab


def power_law_real(gamma: float, z) -> np.ndarray:
    """Real-argument power-law kernel |z|^-(1+gamma) with K(0)=0 (Dynkin rescaling form)."""
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    nz = z != 0.0
    out[nz] = np.abs(z[nz]) ** (-(1.0 + gamma))
    return out


# Built-in model shortcuts used across the test-suite, demos, and experiments.

def gaussian_additive_model(gamma=1.5, bath_left=0.0, bath_right=1.0, kind="power-law", a=1.0):
    """beta = 1, U = phi^2/2: additive noise, S'(Phi) = Phi."""
    return ModelSpec(
        potential=PotentialSpec("quadratic", c=0.5),
        mobility=MobilitySpec("constant", b0=1.0),
        kernel=KernelSpec(kind, gamma=gamma, a=a),
        bath_left=bath_left,
        bath_right=bath_right,
    )


def quartic_model(gamma=1.5, c4=0.25, c2=0.5, bath_left=0.0, bath_right=1.0):
    return ModelSpec(
        potential=PotentialSpec("quartic", c4=c4, c2=c2),
        mobility=MobilitySpec("constant", b0=1.0),
        kernel=KernelSpec("power-law", gamma=gamma),
        bath_left=bath_left,
        bath_right=bath_right,
    )


def bem_model(gamma=1.5, bath_left=1.0, bath_right=2.0):
    """Energy field of the Brownian energy model: U = log(phi)/2, beta = 4 phi phi'."""
    return ModelSpec(
        potential=PotentialSpec("bem_log", domain=HALF_LINE),
        mobility=MobilitySpec("product", c=4.0),
        kernel=KernelSpec("power-law", gamma=gamma),
        bath_left=bath_left,
        bath_right=bath_right,
    )
