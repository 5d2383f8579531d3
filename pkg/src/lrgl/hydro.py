"""Weak-form discretization of the nonlinear fractional hydrodynamics.

The primitive object is the bilinear form

    B_Phi(f, g) = 1/2 * dblint K(v-u) * B(Phi(u),Phi(v)) * (f(v)-f(u)) * (g(v)-g(u))

which is finite for gamma < 2 even though the strong integral of the operator
diverges.  On the uniform grid u_j = j/M it is represented as a pairwise
difference form  sum_{j<k} w_jk * B_jk * (f_k-f_j) * (g_k-g_j)  built from
closed-form antiderivatives of the power-law kernel:

  * far cell pairs (distance >= 2 cells) use the exact cell-pair integral of K
    ("cell-averaged kernel"), with the nodal difference anchored symmetrically
    half to the left-node pair and half to the right-node pair;
  * same-cell and adjacent-cell regions, which dominate as gamma -> 2-, are
    integrated exactly for the piecewise-linear interpolant (the kernel is
    contracted against difference quotients, i.e. K(z) z^2 pieces), including
    the cross term that couples next-to-nearest nodes.

Operators, all tested against interior hat functions and normalized by cell
mass h:

    apply_A(Phi)     ~ the nonlinear fractional operator, via the Einstein form
                       A = B * (S'(Phi_k) - S'(Phi_j)), so the singular diagonal
                       never appears;
    apply_B(Phi, H)  ~ the linear mobility operator acting on H (H(0)=H(1)=0);
    <-B_Phi H, H>    = sum of squares >= 0 with kernel = constants.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .model import KernelSpec
from .thermo import RangeError, ThermoTable

__all__ = [
    "Grid",
    "GridProfile",
    "WeakFormAssembly",
    "InstabilityError",
    "NonConvergenceError",
    "assemble_weights",
    "apply_A",
    "apply_B",
    "evolve",
    "solve_stationary",
    "macroscopic_current",
    "diffusive_limit_form",
    "diffusion_coefficient",
    "stable_dt",
    "transport_coeffs",
    "stiffness",
]


class InstabilityError(RuntimeError):
    def __init__(self, msg, step=None, time=None):
        super().__init__(msg)
        self.step = step
        self.time = time


class NonConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class Grid:
    """Uniform grid of M cells on [0,1]; nodes u_j = j/M, j = 0..M."""

    M: int

    def __post_init__(self):
        if self.M < 8:
            raise ValueError("grid needs M >= 8 cells")

    @property
    def h(self) -> float:
        return 1.0 / self.M

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.M + 1)


@dataclass
class GridProfile:
    grid: Grid
    values: np.ndarray  # nodal values, shape (M+1,)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).copy()
        if self.values.shape != (self.grid.M + 1,):
            raise ValueError("profile values must have one entry per node")

    @property
    def phi_left(self) -> float:
        return float(self.values[0])

    @property
    def phi_right(self) -> float:
        return float(self.values[-1])

    def copy(self) -> "GridProfile":
        return GridProfile(self.grid, self.values)


# ---------------------------------------------------------------------------
# Closed-form kernel integrals (pure power law)
# ---------------------------------------------------------------------------


def _P2(z, gamma):
    """Second antiderivative of z^-(1+gamma) (z > 0)."""
    z = np.asarray(z, dtype=float)
    if gamma == 1.0:
        return -np.log(z)
    return z ** (1.0 - gamma) / (gamma * (gamma - 1.0))


def _Q2(z, gamma):
    """Second antiderivative of z^(1-gamma) (z > 0); Q2(0) = 0 for gamma < 2."""
    z = np.asarray(z, dtype=float)
    return z ** (3.0 - gamma) / ((2.0 - gamma) * (3.0 - gamma))


def cell_pair_integral(gamma, x0, x1, y0, y1):
    """Exact double integral of |v-u|^-(1+gamma) over [x0,x1] x [y0,y1], y0 >= x1."""
    if y0 < x1:
        raise ValueError("cells must be disjoint (y0 >= x1)")
    return float(_P2(y1 - x0, gamma) + _P2(y0 - x1, gamma)
                 - _P2(y1 - x1, gamma) - _P2(y0 - x0, gamma))


def _I2_same(gamma, h):
    """Integral of |v-u|^(1-gamma) over one cell squared."""
    return 2.0 * float(_Q2(h, gamma))


def _I2_adjacent(gamma, h):
    """Integral of (a+b)^(1-gamma) over [0,h]^2 (adjacent cells sharing a node)."""
    return float(_Q2(2 * h, gamma) - 2.0 * _Q2(h, gamma))


def _J_side(gamma, h):
    """Integral of (a+b)^-(1+gamma) * b^2 over [0,h]^2 (= the a^2 version by symmetry)."""
    if gamma == 1.0:
        # R = int_h^{2h} (w-h)^2 / w^gamma dw at gamma=1: h^2 ln w term
        R = ((2 * h) ** 2 / 2 - 2 * h * (2 * h) + h**2 * np.log(2 * h)) \
            - (h**2 / 2 - 2 * h * h + h**2 * np.log(h))
    else:
        def primitive(w):
            return (w ** (3 - gamma) / (3 - gamma)
                    - 2 * h * w ** (2 - gamma) / (2 - gamma)
                    + h**2 * w ** (1 - gamma) / (1 - gamma))

        R = primitive(2 * h) - primitive(h)
    return (h ** (3 - gamma) / (3 - gamma) - R) / gamma


@dataclass
class WeakFormAssembly:
    """Pairwise difference weights on the node grid, plus the raw cell-averaged
    kernel matrix (the spec's W: exact far-pair integrals, difference-quotient
    contracted values on the near band, zero diagonal)."""

    grid: Grid
    kernel: KernelSpec
    pair_weights: np.ndarray = field(repr=False)  # (M+1, M+1), symmetric, >= 0, zero diag
    cell_kernel: np.ndarray = field(repr=False)   # (M, M)

    @property
    def h(self) -> float:
        return self.grid.h

    def interior(self):
        return slice(1, self.grid.M)

    def cache_key(self) -> str:
        k = self.kernel
        raw = f"M={self.grid.M};kind={k.kind};gamma={k.gamma!r};a={k.a!r}"
        return hashlib.sha256(raw.encode()).hexdigest()[:16]

    def save(self, directory) -> str:
        os.makedirs(directory, exist_ok=True)
        path = os.path.join(directory, f"weights_{self.cache_key()}.npz")
        np.savez_compressed(path, pair_weights=self.pair_weights, cell_kernel=self.cell_kernel)
        return path


def assemble_weights(grid: Grid, kernel: KernelSpec, cache_dir: Optional[str] = None) -> WeakFormAssembly:
    """Build the pairwise difference weights of the weak bilinear form."""
    M, h = grid.M, grid.h
    w = np.zeros((M + 1, M + 1))
    cellK = np.zeros((M, M))

    if kernel.kind in ("power-law", "mixed"):
        g = kernel.gamma
        if not (0.0 < g < 2.0):
            raise ValueError("gamma outside (0,2)")
        i2s = _I2_same(g, h)
        js = _J_side(g, h)
        jc = 0.5 * (_I2_adjacent(g, h) - 2.0 * js)
        idx = np.arange(M)
        # same-cell regions -> the cell's own node pair
        w[idx, idx + 1] += i2s / (2 * h * h)
        # shared-node regions: side terms + cross term onto the (j-1, j+1) pair
        for j in range(1, M):
            w[j - 1, j] += (js - jc) / (h * h)
            w[j, j + 1] += (js - jc) / (h * h)
            w[j - 1, j + 1] += jc / (h * h)
        # far field: exact integral per cell distance, symmetric nodal anchoring
        for d in range(2, M):
            i0 = cell_pair_integral(g, 0.0, h, d * h, (d + 1) * h)
            a0 = np.arange(0, M - d)
            w[a0, a0 + d] += 0.5 * i0
            w[a0 + 1, a0 + d + 1] += 0.5 * i0
            cellK[a0, a0 + d] = i0
            cellK[a0 + d, a0] = i0
        adj = np.arange(M - 1)
        cellK[adj, adj + 1] = _I2_adjacent(g, h) / (h * h)
        cellK[adj + 1, adj] = cellK[adj, adj + 1]

    if kernel.kind in ("nearest-neighbor", "mixed"):
        amp = kernel.a if kernel.kind == "mixed" else 1.0
        idx = np.arange(M)
        w[idx, idx + 1] += amp / h

    w = w + w.T
    if np.any(w < 0):
        raise AssertionError("negative pair weight; assembly invariant broken")
    asm = WeakFormAssembly(grid=grid, kernel=kernel, pair_weights=w, cell_kernel=cellK)
    if cache_dir:
        asm.save(cache_dir)
    return asm


# ---------------------------------------------------------------------------
# Transport coefficients: fast vectorized S', S'', B over a working window
# ---------------------------------------------------------------------------


class TransportCoeffs:
    """Vectorized S', S'' (splines over the working window) and B(Phi, Phi').

    Constant and product mobilities have exact closed forms under the product
    measure (B = b0, B = c*Phi*Phi'); custom mobilities get a bivariate table.
    """

    def __init__(self, thermo: ThermoTable, lo: float, hi: float, npts: int = 801):
        pmin, pmax = thermo.phi_range
        lo = max(lo, pmin + 1e-9 * (pmax - pmin))
        hi = min(hi, pmax - 1e-9 * (pmax - pmin))
        if not lo < hi:
            raise RangeError("empty working window inside the achievable range")
        self.lo, self.hi = lo, hi
        self.thermo = thermo
        xs = np.linspace(lo, hi, npts)
        sp = np.array([thermo.Sp(x) for x in xs])
        spp = np.array([thermo.Spp(x) for x in xs])
        self._sp = CubicSpline(xs, sp)
        self._spp = CubicSpline(xs, spp)
        mob = thermo.model.mobility
        if mob.family == "constant":
            self.B = lambda p, q: np.broadcast_to(
                np.float64(mob.b0), np.broadcast_shapes(np.shape(p), np.shape(q))
            )
            self.constant_B = True
        elif mob.family == "product":
            self.B = lambda p, q: mob.c * np.asarray(p) * np.asarray(q)
            self.constant_B = False
        else:
            from scipy.interpolate import RectBivariateSpline
            from .thermo import coarse_B

            gs = np.linspace(lo, hi, 33)
            tab = np.array([[coarse_B(thermo.model, thermo, p, q) for q in gs] for p in gs])
            spl = RectBivariateSpline(gs, gs, tab, kx=3, ky=3)
            self.B = lambda p, q: spl.ev(np.asarray(p), np.asarray(q))
            self.constant_B = False

    def check(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < self.lo - 1e-12) or np.any(x > self.hi + 1e-12):
            raise RangeError("profile leaves the transport-coefficient window")

    def Sp(self, x):
        return self._sp(np.asarray(x, dtype=float))

    def Spp(self, x):
        return self._spp(np.asarray(x, dtype=float))


_COEFF_CACHE: dict = {}


def transport_coeffs(thermo: ThermoTable, lo: float, hi: float) -> TransportCoeffs:
    pmin, pmax = thermo.phi_range
    span = max(hi - lo, 1e-6 * (pmax - pmin))
    lo2, hi2 = lo - 0.25 * span, hi + 0.25 * span
    key = id(thermo)
    hit = _COEFF_CACHE.get(key)
    if hit is not None and hit.lo <= max(lo, pmin + 1e-9) and hit.hi >= min(hi, pmax - 1e-9):
        return hit
    if hit is not None:
        lo2, hi2 = min(lo2, hit.lo), max(hi2, hit.hi)
    coeffs = TransportCoeffs(thermo, lo2, hi2)
    _COEFF_CACHE[key] = coeffs
    return coeffs


def _coeffs_for(thermo: ThermoTable, values: np.ndarray) -> TransportCoeffs:
    return transport_coeffs(thermo, float(np.min(values)), float(np.max(values)))


def stiffness(weights: WeakFormAssembly, thermo: ThermoTable, values: np.ndarray) -> np.ndarray:
    """L = diag(rowsum) - w*B, so that <(-B_Phi)H, G> = G^T L H on nodal vectors."""
    co = _coeffs_for(thermo, values)
    co.check(values)
    wb = weights.pair_weights * np.asarray(co.B(values[:, None], values[None, :]))
    return np.diag(wb.sum(axis=1)) - wb


def node_masses(grid: Grid) -> np.ndarray:
    mass = np.full(grid.M + 1, grid.h)
    mass[0] *= 0.5
    mass[-1] *= 0.5
    return mass


def _stencil_apply(weights, thermo, values, f):
    """Nodal weak application -(L f)/m on all nodes."""
    L = stiffness(weights, thermo, values)
    return -(L @ np.asarray(f, dtype=float)) / node_masses(weights.grid)


def apply_A(weights: WeakFormAssembly, thermo: ThermoTable, profile: GridProfile) -> np.ndarray:
    """Weak nodal values of the fractional operator on interior nodes (Einstein form)."""
    co = _coeffs_for(thermo, profile.values)
    sp = co.Sp(profile.values)
    return _stencil_apply(weights, thermo, profile.values, sp)[weights.interior()]


def apply_B(weights: WeakFormAssembly, thermo: ThermoTable, profile: GridProfile, H) -> np.ndarray:
    """Weak nodal values of the mobility operator applied to H (H0 = HM = 0)."""
    H = np.asarray(H, dtype=float)
    if H[0] != 0.0 or H[-1] != 0.0:
        raise ValueError("H must vanish at the boundary nodes")
    return _stencil_apply(weights, thermo, profile.values, H)[weights.interior()]


def _apply_A_full(weights, thermo, values):
    co = _coeffs_for(thermo, values)
    return _stencil_apply(weights, thermo, values, co.Sp(values))


def stable_dt(weights: WeakFormAssembly, thermo: ThermoTable, profile: GridProfile,
              safety: float = 0.25) -> float:
    """Explicit-step bound: safety * 2/lambda_max, lambda_max from Gershgorin rows
    of L*S''/h (the rows scale like h^-gamma; the parabolic-CFL analogue)."""
    values = profile.values
    co = _coeffs_for(thermo, values)
    co.check(values)
    wb = weights.pair_weights * np.asarray(co.B(values[:, None], values[None, :]))
    row = float(wb.sum(axis=1).max())
    spp = float(np.max(co.Spp(values)))
    lam_max = 2.0 * row * spp / weights.h
    return safety * 2.0 / lam_max


@dataclass
class HydroTrajectory:
    grid: Grid
    times: np.ndarray
    profiles: np.ndarray  # (nt, M+1)

    def profile(self, i) -> GridProfile:
        return GridProfile(self.grid, self.profiles[i])

    def final(self) -> GridProfile:
        return GridProfile(self.grid, self.profiles[-1])


def evolve(weights: WeakFormAssembly, thermo: ThermoTable, phi0: GridProfile,
           T: float, dt: float, drive: Optional[Callable] = None,
           method: str = "euler", record_every: int = 1) -> HydroTrajectory:
    """March d(Phi)/dt = A(Phi) - B_Phi H_t with Dirichlet rows frozen.

    drive: callable t -> nodal array (zero at the ends), or None.
    method: "euler" (default) or "rk4"; both explicit, same stability bound.
    """
    bound = stable_dt(weights, thermo, phi0)
    if dt > bound * (1 + 1e-12):
        raise InstabilityError(f"dt={dt} above the stability bound {bound:.3e}")
    M = weights.grid.M
    interior = weights.interior()
    values = phi0.values.copy()

    def rhs(v, t):
        out = np.zeros(M + 1)
        out[interior] = _apply_A_full(weights, thermo, v)[interior]
        if drive is not None:
            H = np.asarray(drive(t), dtype=float)
            out[interior] -= _stencil_apply(weights, thermo, v, H)[interior]
        return out

    nsteps = int(round(T / dt))
    times = [0.0]
    profs = [values.copy()]
    t = 0.0
    for step in range(nsteps):
        if method == "euler":
            values = values + dt * rhs(values, t)
        elif method == "rk4":
            k1 = rhs(values, t)
            k2 = rhs(values + 0.5 * dt * k1, t + 0.5 * dt)
            k3 = rhs(values + 0.5 * dt * k2, t + 0.5 * dt)
            k4 = rhs(values + dt * k3, t + dt)
            values = values + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        else:
            raise ValueError(f"unknown method {method!r}")
        t += dt
        if not np.all(np.isfinite(values)) or np.max(np.abs(values)) > 1e8:
            raise InstabilityError("norm blow-up detected", step=step, time=t)
        if (step + 1) % record_every == 0 or step == nsteps - 1:
            times.append(t)
            profs.append(values.copy())
    return HydroTrajectory(weights.grid, np.array(times), np.array(profs))


def solve_stationary(weights: WeakFormAssembly, thermo: ThermoTable,
                     phi_left: float, phi_right: float,
                     tol: float = 1e-11, max_iter: int = 60) -> GridProfile:
    """Damped Newton on the interior weak residual of A(Phi_ss) = 0.

    The Jacobian freezes B at the current iterate (exact for constant
    mobility); pseudo-time evolution is the fallback when Newton stalls.
    """
    grid = weights.grid
    M, h = grid.M, grid.h
    interior = weights.interior()
    values = phi_left + (phi_right - phi_left) * grid.nodes  # affine initial guess
    co = _coeffs_for(thermo, values)

    def residual(v):
        return _apply_A_full(weights, thermo, v)[interior]

    def res_norm(v):
        return float(np.max(np.abs(residual(v))))

    for attempt in range(2):
        cur = res_norm(values)
        for _ in range(max_iter):
            if cur <= tol:
                break
            L = stiffness(weights, thermo, values)
            spp = np.asarray(co.Spp(values))
            J = (L * spp[None, :])[1:M, 1:M] / h  # = -dA/dPhi with B frozen
            r = residual(values)
            try:
                delta = np.linalg.solve(J, r)
            except np.linalg.LinAlgError:
                break
            step = np.zeros(M + 1)
            step[interior] = delta
            lam, improved = 1.0, False
            for _ in range(40):
                trial = values + lam * step
                try:
                    co.check(trial)
                    new = res_norm(trial)
                except RangeError:
                    new = np.inf
                if new < cur:
                    values, cur, improved = trial, new, True
                    break
                lam *= 0.5
            if not improved:
                break
        if cur <= tol:
            return GridProfile(grid, values)
        prof = GridProfile(grid, values)
        dtb = stable_dt(weights, thermo, prof)
        traj = evolve(weights, thermo, prof, T=200 * dtb, dt=dtb, record_every=10**9)
        values = traj.profiles[-1]
    raise NonConvergenceError(f"stationary solve stalled at residual {res_norm(values):.3e}")


def macroscopic_current(weights: WeakFormAssembly, thermo: ThermoTable,
                        profile: GridProfile, u: float) -> float:
    """J(u) = -int_0^u A(Phi)(w) dw, accumulated over the weak nodal masses.

    The boundary rows carry the bath flux, which is exactly what makes J a
    nonzero constant across the interior for the stationary profile.
    """
    if not (0.0 <= u <= 1.0):
        raise ValueError("u must lie in [0, 1]")
    a_nodal = _apply_A_full(weights, thermo, profile.values)
    nodes = weights.grid.nodes
    mass = node_masses(weights.grid)
    cum = 0.0
    for j in range(weights.grid.M + 1):
        left = max(nodes[j] - 0.5 * weights.h, 0.0)
        right = min(nodes[j] + 0.5 * weights.h, 1.0)
        if u >= right:
            cum += a_nodal[j] * mass[j]
        elif u > left:
            cum += a_nodal[j] * mass[j] * (u - left) / (right - left)
    return -cum


def diffusive_limit_form(weights: WeakFormAssembly, G, H) -> float:
    """((2-gamma)/2) * dblint K (G(v)-G(u))(H(v)-H(u)); -> int G'H' as gamma->2-."""
    if weights.kernel.kind != "power-law":
        raise ValueError("diffusive limit form is defined for the pure power law")
    G = np.asarray(G, dtype=float)
    H = np.asarray(H, dtype=float)
    dG = G[None, :] - G[:, None]
    dH = H[None, :] - H[:, None]
    form = float(np.sum(weights.pair_weights * dG * dH))  # = dblint K dG dH
    return 0.5 * (2.0 - weights.kernel.gamma) * form


def diffusion_coefficient(thermo: ThermoTable, Phi: float) -> float:
    """D(Phi) = S''(Phi) * B(Phi, Phi) > 0 (the gamma -> 2- diffusive coefficient)."""
    from .thermo import coarse_B

    return thermo.Spp(Phi) * coarse_B(thermo.model, thermo, Phi, Phi)
