"""Inverse scattering through the layer-stripping integral equations.

A reflection coefficient r on a real grid yields the kernel F = (inverse
transform of r); the matrix integral equation

    Gamma(x,s) + Omega(x+s) + int Gamma(x,t) Omega(x+t+s) dt = 0

is solved per x by Nystrom discretization with trapezoid weights on a lattice
commensurate with the x grid (so every kernel argument is a lattice node and
no interpolation enters).  The 2x2 structure Gamma_11 = conj(Gamma_22),
Gamma_21 = conj(Gamma_12) reduces the block system to a scalar one:
eliminating Gamma_11 leaves (I - Cbar C) Gamma_12 = -rhs with one dense
solve per x.  The potential is the kernel trace q(x) = Gamma-_12(x, 0)
= -Gamma+_12(x, 0).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack, lu_factor, lu_solve

from .errors import ClassError, DataError, ParameterError, TruncationWarning
from .fourier import (SpectralGrid, dual_s_grid, hilbert_exp,
                      inverse_transform_refined, support_hull)
from .potential import Potential
from .jost import TransitionCoefficients, reflection_grids

KERNEL_DECAY = 1e-6
COND_LIMIT = 1e12


@dataclass(frozen=True)
class ReflectionData:
    """One reflection coefficient on a real grid plus its kernel window.

    For class data from a compact-hull potential the kernel F = r-hat is
    supported in [0, gamma] (left) or [-gamma, 0] (right) up to the decaying
    factor from 1/a; `fronts` are the jump locations used for the analytic
    window-tail correction of the kernel transform.
    """

    side: str
    grid: SpectralGrid
    gamma: float | None = None
    support: tuple = field(default=None)
    truncation_bound: float = 0.0

    def __post_init__(self):
        if self.side not in ("left", "right"):
            raise ParameterError("side must be 'left' or 'right'")
        mod = np.abs(self.grid.values)
        if mod.max() >= 1.0:
            raise ClassError(
                f"|r| reaches {mod.max():.6g} >= 1; not a reflection "
                "coefficient of a scattering data set")
        if self.support is None:
            s, vals = None, None
            sg = dual_s_grid(self.grid.k)
            vals = self._kernel_plain(sg)
            mag = np.abs(vals)
            peak = mag.max()
            if peak == 0.0:
                object.__setattr__(self, "support", (0.0, 0.0))
                return
            idx = np.nonzero(mag > KERNEL_DECAY * peak)[0]
            object.__setattr__(self, "support",
                               (float(sg[idx[0]]), float(sg[idx[-1]])))
            edge = max(mag[0], mag[-1])
            object.__setattr__(self, "truncation_bound", float(edge))

    def _fronts(self):
        if self.gamma is None:
            return None
        return (0.0, self.gamma) if self.side == "left" else (-self.gamma, 0.0)

    def _kernel_plain(self, s_nodes):
        from .fourier import oscillatory_sum
        return oscillatory_sum(self.grid.values, float(self.grid.k[0]),
                               self.grid.dk, s_nodes, -1) / np.pi

    def kernel_on(self, s_nodes: np.ndarray) -> np.ndarray:
        """F = r-hat evaluated on arbitrary uniform s nodes, with Richardson
        refinement and (when gamma is known) front-tail correction."""
        return inverse_transform_refined(self.grid, s_nodes,
                                         fronts=self._fronts())


def reflection_from_jost(tc: TransitionCoefficients, side: str) -> ReflectionData:
    r_plus, r_minus = reflection_grids(tc)
    grid = r_minus if side == "left" else r_plus
    return ReflectionData(side=side, grid=grid, gamma=tc.gamma)


@dataclass(frozen=True)
class OmegaKernel:
    """Off-diagonal matrix kernel of the layer-stripping equation.

    omega(s) is the scalar profile: F_+(-s) on the right, F_-(s) on the
    left; the matrix is [[0, omega],[conj omega, 0]] (right) or
    [[0, conj omega],[omega, 0]] (left).
    """

    side: str
    reflection: ReflectionData

    def omega_on(self, s_nodes: np.ndarray) -> np.ndarray:
        s_nodes = np.asarray(s_nodes, dtype=float)
        if self.side == "right":
            return self.reflection.kernel_on(-s_nodes[::-1])[::-1]
        return self.reflection.kernel_on(s_nodes)

    def matrix_on(self, s_nodes: np.ndarray) -> np.ndarray:
        om = self.omega_on(s_nodes)
        out = np.zeros(om.shape + (2, 2), dtype=complex)
        if self.side == "right":
            out[..., 0, 1] = om
            out[..., 1, 0] = np.conj(om)
        else:
            out[..., 0, 1] = np.conj(om)
            out[..., 1, 0] = om
        return out


def glm_kernel(r: ReflectionData) -> OmegaKernel:
    return OmegaKernel(side=r.side, reflection=r)


@dataclass(frozen=True)
class TransformationKernel:
    x: float
    s_grid: np.ndarray
    gamma_matrix: np.ndarray  # (ns, 2, 2); rows obey the conjugate structure


@dataclass(frozen=True)
class GlmSolution:
    x: np.ndarray
    q: np.ndarray
    side: str
    max_condition: float
    kernels: tuple = ()


def _scalar_kernel(omega: OmegaKernel, h: float, m_lo: int, m_hi: int):
    """Kernel samples on the lattice m*h for m in [m_lo, m_hi]."""
    s = h * np.arange(m_lo, m_hi + 1)
    return omega.omega_on(s)


def solve_glm(omega: OmegaKernel, x_grid: np.ndarray, s_max=None,
              keep_kernels: bool = False,
              endpoint_extrapolation: bool = False) -> GlmSolution:
    """Solve the layer-stripping equation at each x and read off q.

    x_grid must be uniform; the s quadrature shares its spacing.  For
    right-side data the window is [0, W - x] with W the kernel extent; for
    left-side data it is [-(x - W_lo), 0].  s_max caps the window for
    slowly decaying (non-compact) kernels.

    With endpoint_extrapolation the first and last x samples are replaced by
    one-sided extrapolation: at a support-edge jump the kernel trace
    converges to the half-jump midpoint, which would otherwise bias exactly
    the two boundary samples.
    """
    x_grid = np.asarray(x_grid, dtype=float)
    h = x_grid[1] - x_grid[0]
    if np.max(np.abs(np.diff(x_grid) - h)) > 1e-9 * h:
        raise ParameterError("solve_glm needs a uniform x grid")
    side = omega.side
    r = omega.reflection
    sup = r.support
    cap = np.inf if s_max is None else float(s_max)
    if side == "right":
        # omega(s) = F_+(-s) lives on s <= W (W = gamma for class data)
        w_hi = -sup[0] if r.gamma is None else min(-sup[0], r.gamma * (1 + 1e-9))
        spans = np.clip(np.minimum(w_hi - x_grid, cap), 0.0, None)
        lo_arg, hi_arg = min(x_grid[0], 0.0), np.max(x_grid + 2 * spans)
    else:
        w_lo = 0.0 if r.gamma is not None else min(sup[0], 0.0)
        spans = np.clip(np.minimum(x_grid - w_lo, cap), 0.0, None)
        lo_arg, hi_arg = np.min(x_grid - 2 * spans), x_grid[-1]
    n_lo = int(np.floor(lo_arg / h)) - 1
    n_hi = int(np.ceil(hi_arg / h)) + 1
    kern = _scalar_kernel(omega, h, n_lo, n_hi)

    def kern_at(idx):
        idx = np.asarray(idx)
        out = np.zeros(idx.shape, dtype=complex)
        ok = (idx >= n_lo) & (idx <= n_hi)
        out[ok] = kern[idx[ok] - n_lo]
        return out

    q = np.zeros(x_grid.size, dtype=complex)
    kernels = []
    max_cond = 1.0
    for ix, xv in enumerate(x_grid):
        jx = int(round(xv / h))
        n = int(np.floor(spans[ix] / h + 1e-9))
        if n <= 0:
            # empty quadrature window: Gamma_12(x, 0) = -Omega_12(x)
            if side == "right":
                q[ix] = kern_at(np.array([jx]))[0]       # q = -Gamma+_12
            else:
                q[ix] = -np.conj(kern_at(np.array([jx]))[0])
            continue
        idx = np.arange(n + 1)
        w = np.full(n + 1, h, dtype=float)
        w[0] = w[-1] = h / 2
        if side == "right":
            # s_i = i h, t_j = j h; kernel arg x + s + t -> jx + i + j
            kmat = kern_at(jx + idx[:, None] + idx[None, :])
            rhs = -kern_at(jx + idx)
            c = kmat * w[None, :]
            m = np.eye(n + 1, dtype=complex) - c @ (np.conj(kmat) * w[None, :])
            s_nodes = h * idx
            g12_index = 0
        else:
            # s_i = (i - n) h, t_j likewise; arg x + s + t -> jx + i + j - 2n
            kmat = kern_at(jx + idx[:, None] + idx[None, :] - 2 * n)
            rhs = -np.conj(kern_at(jx + idx - n))
            cbar = np.conj(kmat) * w[None, :]
            m = np.eye(n + 1, dtype=complex) - cbar @ (kmat * w[None, :])
            s_nodes = h * (idx - n)
            g12_index = n
        lu, piv = lu_factor(m, check_finite=False)
        anorm = np.linalg.norm(m, 1)
        rcond = lapack.zgecon(lu, anorm)[0]
        if rcond > 0:
            max_cond = max(max_cond, 1.0 / rcond)
        if rcond <= 1.0 / COND_LIMIT:
            raise DataError(
                f"layer-stripping system at x = {xv:.6g} has condition "
                f"estimate above {COND_LIMIT:.0e}; data are inconsistent "
                "with |r| < 1")
        g12 = lu_solve((lu, piv), rhs, check_finite=False)
        q[ix] = -g12[g12_index] if side == "right" else g12[g12_index]
        if keep_kernels:
            if side == "right":
                g11 = -(np.conj(kmat) * w[None, :]) @ g12
            else:
                g11 = -(kmat * w[None, :]) @ g12
            gm = np.zeros((n + 1, 2, 2), dtype=complex)
            gm[:, 0, 0] = g11
            gm[:, 0, 1] = g12
            gm[:, 1, 0] = np.conj(g12)
            gm[:, 1, 1] = np.conj(g11)
            kernels.append(TransformationKernel(xv, s_nodes, gm))
    if endpoint_extrapolation and x_grid.size >= 4:
        q[0] = 3 * q[1] - 3 * q[2] + q[3]
        q[-1] = 3 * q[-2] - 3 * q[-3] + q[-4]
    return GlmSolution(x=x_grid, q=q, side=side, max_condition=max_cond,
                       kernels=tuple(kernels))


def left_right(r: ReflectionData) -> ReflectionData:
    """The opposite reflection coefficient: r_other = -conj(r) conj(a)/a with
    a the outer solution of 1 - |r|^2 = 1/|a|^2.  Involutive."""
    mod2 = np.abs(r.grid.values) ** 2
    u = -np.log1p(-mod2)
    a_vals = hilbert_exp(u, r.grid.k)
    other = -np.conj(r.grid.values) * np.conj(a_vals) / a_vals
    side = "left" if r.side == "right" else "right"
    return ReflectionData(side=side, grid=SpectralGrid(r.grid.k, other),
                          gamma=r.gamma)


def _dual_side_windows(n: int, gamma: float):
    x = np.linspace(0.0, gamma, n)
    split = n // 2
    return x, split


def invert_reflection(r: ReflectionData, n: int = 512,
                      gamma: float | None = None) -> Potential:
    """Potential from one reflection coefficient.

    Each x is solved from the side whose window is shorter (the two kernel
    traces agree up to sign), which costs an eighth of a single-side solve;
    the other side's data comes from the involution.
    """
    if gamma is None:
        gamma = r.gamma
    if gamma is None:
        sup = r.support
        gamma = sup[1] - sup[0]
        r = ReflectionData(r.side, r.grid, gamma=gamma)
    other = left_right(r)
    left = r if r.side == "left" else other
    right = other if r.side == "left" else r
    x, split = _dual_side_windows(n, gamma)
    sol_l = solve_glm(glm_kernel(left), x[:split])
    sol_r = solve_glm(glm_kernel(right), x[split:])
    q = np.concatenate([sol_l.q, sol_r.q])
    q[0] = 3 * q[1] - 3 * q[2] + q[3]
    q[-1] = 3 * q[-2] - 3 * q[-3] + q[-4]
    return Potential(gamma, q)


def invert_b(b_grid: SpectralGrid, n: int = 512,
             gamma: float | None = None) -> Potential:
    """Potential from the transition coefficient b.

    a is rebuilt from |b| as the outer function, then r_- = b/a and
    r_+ = -conj(b)/a feed the dual-side inversion.  When b-hat is supported
    in [0, gamma] the output is class-compact with that hull.
    """
    hull = support_hull(b_grid)
    if gamma is None:
        gamma = hull.sup_supp
    cell = gamma / max(n - 1, 1)
    if hull.inf_supp < -max(cell, gamma * 1e-3) or \
            hull.sup_supp > gamma * (1 + 1e-3) + cell:
        raise ClassError(
            f"b-hat support [{hull.inf_supp:.6g}, {hull.sup_supp:.6g}] "
            f"escapes [0, {gamma:.6g}]")
    u = np.log1p(np.abs(b_grid.values) ** 2)
    a_vals = hilbert_exp(u, b_grid.k)
    r_minus = SpectralGrid(b_grid.k, b_grid.values / a_vals)
    r_plus = SpectralGrid(b_grid.k, -np.conj(b_grid.values) / a_vals)
    left = ReflectionData("left", r_minus, gamma=gamma)
    right = ReflectionData("right", r_plus, gamma=gamma)
    x, split = _dual_side_windows(n, gamma)
    sol_l = solve_glm(glm_kernel(left), x[:split])
    sol_r = solve_glm(glm_kernel(right), x[split:])
    q = np.concatenate([sol_l.q, sol_r.q])
    q[0] = 3 * q[1] - 3 * q[2] + q[3]
    q[-1] = 3 * q[-2] - 3 * q[-3] + q[-4]
    return Potential(gamma, q)
