"""Conserved quantities and the norm zoo used by the probes.

All spectral sums follow the grid convention: integral |u|^2 dx dy equals
sum |coeffs|^2 / (Lx*Ly).  The anisotropic Sobolev scale carries separate
orders (s1, s2) in xi and eta; the energy space carries the weight
1 + |xi|^{alpha/2} + |eta|/|xi| natural to the Hamiltonian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import grid as _grid
from .grid import dealiased_product, require_zero_x_mean, to_physical


@dataclass(frozen=True)
class AnisoIndex:
    s1: float
    s2: float = 0.0


@dataclass(frozen=True)
class MixedNormSpec:
    """Space-time exponents L^q_t L^r_{xy}; math.inf marks a sup norm."""

    q: float
    r: float

    def __post_init__(self):
        if not self.q > 2.0:
            raise ValueError(f"q must exceed 2, got {self.q}")
        if not (2.0 <= self.r):
            raise ValueError(f"r must be at least 2, got {self.r}")

    @property
    def strichartz_admissible(self):
        inv_q = 0.0 if math.isinf(self.q) else 1.0 / self.q
        inv_r = 0.0 if math.isinf(self.r) else 1.0 / self.r
        return abs(inv_q + inv_r - 0.5) <= 1e-12

    def gamma_weight(self, alpha):
        """Smoothing order gamma(r) = (1 - 2/r)(1/2 - alpha/4)."""
        inv_r = 0.0 if math.isinf(self.r) else 1.0 / self.r
        return (1.0 - 2.0 * inv_r) * (0.5 - alpha / 4.0)


def _vol(grid):
    return grid.length_x * grid.length_y


def mass(field):
    """L^2 mass integral |u|^2 via physical quadrature."""
    u = to_physical(field)
    return float(np.sum(np.abs(u) ** 2) * field.grid.cell_area)


def mass_spectral(field):
    return float(np.sum(np.abs(field.coeffs) ** 2) / _vol(field.grid))


def _check_eta_column(field, what):
    # modes (xi=0, eta!=0) make 1/xi weights meaningless
    col = np.abs(field.coeffs[0, :]).copy()
    col[0] = 0.0
    scale = max(1.0, float(np.max(np.abs(field.coeffs))))
    if np.max(col) > _grid.ZERO_X_MEAN_RTOL * scale:
        raise ValueError(
            f"{what} undefined: field carries eta-dependent content on the xi=0 plane"
        )


def energy_alpha(params, field):
    """Hamiltonian: 1/2 |D_x^{a/2} u|^2 + 1/2 |dx^{-1} dy u|^2 + 1/6 int u^3.

    Quadratic terms are exact spectral sums; the cubic term is a dealiased
    physical quadrature (exact whenever u is band-limited to the retained
    modes, as evolved fields are).
    """
    _check_eta_column(field, "energy_alpha")
    grid = field.grid
    alpha = params.alpha
    xi, eta = grid.xi_grid, grid.eta_grid
    c2 = np.abs(field.coeffs) ** 2
    quad_x = 0.5 * float(np.sum(np.abs(xi) ** alpha * c2)) / _vol(grid)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(xi != 0.0, (eta / np.where(xi != 0.0, xi, 1.0)) ** 2, 0.0)
    quad_y = 0.5 * float(np.sum(w * c2)) / _vol(grid)
    u_deal = to_physical(field.with_coeffs(field.coeffs * grid.dealias_mask))
    cubic = float(np.sum(u_deal ** 3) * grid.cell_area) / 6.0
    return quad_x + quad_y + cubic


def quadratic_energy(params, field):
    """The two quadratic pieces of energy_alpha (no cubic term)."""
    _check_eta_column(field, "quadratic_energy")
    grid = field.grid
    xi, eta = grid.xi_grid, grid.eta_grid
    c2 = np.abs(field.coeffs) ** 2
    quad_x = 0.5 * float(np.sum(np.abs(xi) ** params.alpha * c2)) / _vol(grid)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(xi != 0.0, (eta / np.where(xi != 0.0, xi, 1.0)) ** 2, 0.0)
    quad_y = 0.5 * float(np.sum(w * c2)) / _vol(grid)
    return quad_x + quad_y


def sobolev_aniso(field, idx, homogeneous=False):
    """Anisotropic Sobolev norm with weight (1+xi^2)^{s1/2} (1+eta^2)^{s2/2},
    or |xi|^{s1} |eta|^{s2} in the homogeneous variant."""
    grid = field.grid
    xi, eta = grid.xi_grid, grid.eta_grid
    c2 = np.abs(field.coeffs) ** 2
    if not homogeneous:
        w2 = (1.0 + xi * xi) ** idx.s1 * (1.0 + eta * eta) ** idx.s2
        return math.sqrt(float(np.sum(w2 * c2)) / _vol(grid))
    if idx.s1 < 0:
        require_zero_x_mean(field, f"homogeneous norm with s1={idx.s1}")
    if idx.s2 < 0:
        res = float(np.max(np.abs(field.coeffs[:, 0])))
        scale = max(1.0, float(np.max(np.abs(field.coeffs))))
        if res > _grid.ZERO_X_MEAN_RTOL * scale:
            raise ValueError(
                f"homogeneous norm with s2={idx.s2} requires zero content at eta=0"
            )
    with np.errstate(divide="ignore"):
        wx = np.where(xi != 0.0, np.abs(xi) ** idx.s1, 0.0 if idx.s1 != 0 else 1.0)
        wy = np.where(eta != 0.0, np.abs(eta) ** idx.s2, 0.0 if idx.s2 != 0 else 1.0)
    return math.sqrt(float(np.sum((wx * wy) ** 2 * c2)) / _vol(grid))


def energy_space_norm(params, field):
    """Norm with multiplier p = 1 + |xi|^{alpha/2} + |eta|/|xi|."""
    _check_eta_column(field, "energy_space_norm")
    grid = field.grid
    xi, eta = grid.xi_grid, grid.eta_grid
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(xi != 0.0, np.abs(eta) / np.where(xi != 0.0, np.abs(xi), 1.0), 0.0)
    p = 1.0 + np.abs(xi) ** (params.alpha / 2.0) + ratio
    c2 = np.abs(field.coeffs) ** 2
    return math.sqrt(float(np.sum(p * p * c2)) / _vol(grid))


def _lr_norm(field, r):
    u = to_physical(field)
    if math.isinf(r):
        return float(np.max(np.abs(u)))
    return float((np.sum(np.abs(u) ** r) * field.grid.cell_area) ** (1.0 / r))


def spacetime_norm(trajectory, spec):
    """L^q_t L^r_xy norm of a sampled trajectory [(t_i, field_i), ...].

    Time integration is trapezoidal on the (uniform) snapshot times;
    q = inf or r = inf fall back to the max over the sampled set.
    """
    snaps = list(trajectory)
    if len(snaps) < 2:
        raise ValueError("spacetime_norm needs at least two snapshots")
    times = np.array([t for t, _ in snaps], dtype=float)
    dts = np.diff(times)
    if np.any(dts <= 0.0):
        raise ValueError("snapshot times must be strictly increasing")
    if np.max(np.abs(dts - dts[0])) > 1e-9 * max(abs(times[-1]), 1.0):
        raise ValueError("snapshot times must be uniformly spaced")
    vals = np.array([_lr_norm(f, spec.r) for _, f in snaps])
    if math.isinf(spec.q):
        return float(np.max(vals))
    w = np.full(len(snaps), dts[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    return float(np.sum(w * vals ** spec.q) ** (1.0 / spec.q))
