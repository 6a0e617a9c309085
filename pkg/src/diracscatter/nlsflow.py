"""Action-angle variables of the defocusing cubic flow and its evolution.

The flow never touches the potential directly: a is invariant and b picks up
the phase e^{4itk^2}, so evolving means multiplying the left reflection
coefficient by that phase and inverting on an enlarged window.  The action
is (1/pi) log|a| (nonnegative since |a| >= 1 on the axis) and the angle is
arg b plus the 4k^2 t drift; both have series forms over resonances and
zeros of b.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, TruncationWarning
from .fourier import SpectralGrid
from .glm import ReflectionData, glm_kernel, reflection_from_jost, solve_glm
from .jost import TransitionCoefficients, transition_coefficients
from .potential import Potential
from .resonances import ZeroSet
from .factor import REALNESS_TOL, XiSequence

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class ActionProfile:
    k: np.ndarray
    direct: np.ndarray | None
    series: np.ndarray | None
    tail_estimate: float = float("nan")


def action(k_grid, a_eval=None, resonances: ZeroSet | None = None,
           log_a0: float | None = None, gamma: float | None = None,
           tail_correction: bool = True) -> ActionProfile:
    """Action density (1/pi) log|a(k)|, directly and/or as the resonance
    series log|a(0)| + sum log|1 - k/k_n|.

    The truncated series omits the far resonances; with tail_correction the
    pair-summed leading term -k^2 sum 1/|k_n|^2 of the omitted zeros is
    restored using the Levinson density (one resonance per pi/gamma of
    modulus per half-plane).  The tail estimate compares the R and R/2
    truncations.
    """
    k_grid = np.asarray(k_grid, dtype=float)
    direct = series = None
    tail = float("nan")
    if a_eval is not None:
        direct = np.log(np.abs(np.asarray(a_eval(k_grid.astype(complex)),
                                          dtype=complex))) / np.pi
    if resonances is not None:
        if log_a0 is None:
            raise ParameterError("series mode needs log|a(0)|")
        locs = resonances.expanded()
        if locs.size == 0:
            series = np.full(k_grid.size, log_a0) / np.pi
            tail = 0.0
        else:
            radius = np.abs(locs).max()
            if np.abs(k_grid).max() > 0.5 * radius:
                warnings.warn(
                    "action series evaluated beyond half the resonance "
                    "radius; truncation error grows quadratically in k",
                    TruncationWarning)

            def partial(rcut):
                sel = locs[np.abs(locs) <= rcut]
                out = np.full(k_grid.size, log_a0)
                for z in sel:
                    out = out + np.log(np.abs(1.0 - k_grid / z))
                if tail_correction and gamma is not None:
                    out = out - k_grid ** 2 * 2.0 * gamma / (np.pi * rcut)
                return out / np.pi

            series = partial(radius)
            half = partial(radius / 2)
            tail = float(np.max(np.abs(series - half)))
    return ActionProfile(k_grid, direct, series, tail)


@dataclass(frozen=True)
class AngleProfile:
    k: np.ndarray
    angle: np.ndarray          # NaN at excluded nodes (real zeros of b)
    t: float
    jump_locations: np.ndarray


def _real_zero_list(zeros: ZeroSet, realness_tol: float):
    out = []
    for z in zeros.zeros:
        if abs(z.location.imag) <= realness_tol and abs(z.location) > 1e-12:
            out.append((float(z.location.real), z.multiplicity))
    out.sort()
    return out


def angle(k_grid, zeros: ZeroSet, xi: XiSequence, gamma: float,
          t: float = 0.0, realness_tol: float = REALNESS_TOL) -> AngleProfile:
    """Angle variable 4 k^2 t + arg b(k) from zero data.

    arg b(k) = arg xi0 + gamma k - pi I(k) + integral of the weight
    w(s) = sum_n xi_n |Im z_n| / |z_n - s|^2, with I(k) counting real zeros
    between 0 and k; the integral has the closed form sum of arctangents.
    Nodes sitting on a real zero are excluded (NaN).
    """
    if xi.undefined:
        raise ParameterError("angle is undefined for b identically zero")
    k_grid = np.asarray(k_grid, dtype=float)
    real_zeros = _real_zero_list(zeros, realness_tol)
    base = np.angle(xi.xi0) + gamma * k_grid
    # signed count of real zeros passed between 0 and k: the -pi jump per
    # zero happens walking towards +infinity, so zeros left of the origin
    # contribute with the opposite sign
    icount = np.zeros(k_grid.size)
    for z, m in real_zeros:
        if z > 0:
            icount += m * (k_grid > z)
        else:
            icount -= m * (k_grid < z)
    w_int = np.zeros(k_grid.size)
    for z in zeros.expanded():
        if abs(z.imag) <= realness_tol or abs(z) <= 1e-12:
            continue
        sgn = 1.0 if z.imag > 0 else -1.0
        u, v = z.real, abs(z.imag)
        w_int += sgn * (np.arctan((k_grid - u) / v) + np.arctan(u / v))
    out = base - np.pi * icount + w_int + 4.0 * k_grid ** 2 * t
    for z, m in real_zeros:
        out[np.abs(k_grid - z) < 1e-9 * (1.0 + abs(z))] = np.nan
    return AngleProfile(k_grid, out,
                        t, np.array([z for z, _ in real_zeros]))


def unwrapped_arg_b(b_eval, k_grid, zeros: ZeroSet,
                    realness_tol: float = REALNESS_TOL) -> np.ndarray:
    """Directly unwrapped arg b on a fine grid, anchored at the principal
    value near k = 0 and carrying the -pi * multiplicity jump across each
    real zero.  Independent cross-check of the angle formula."""
    k_grid = np.asarray(k_grid, dtype=float)
    vals = np.asarray(b_eval(k_grid.astype(complex)), dtype=complex)
    phases = np.angle(vals)
    real_zeros = _real_zero_list(zeros, realness_tol)
    cuts = [z for z, _ in real_zeros]
    seg_id = np.searchsorted(cuts, k_grid)
    out = np.full(k_grid.size, np.nan)
    anchor_idx = int(np.argmin(np.abs(k_grid)))
    anchor_seg = seg_id[anchor_idx]
    segments = {}
    for sid in np.unique(seg_id):
        mask = seg_id == sid
        seg = np.unwrap(phases[mask])
        segments[sid] = (mask, seg)
    # anchor the segment containing 0 at its principal value
    mask0, seg0 = segments[anchor_seg]
    pos_in_seg = np.flatnonzero(mask0 == True)  # noqa: E712
    local_anchor = np.searchsorted(pos_in_seg, anchor_idx)
    seg0 = seg0 - seg0[local_anchor] + phases[anchor_idx]
    segments[anchor_seg] = (mask0, seg0)
    # chain segments outward with the -pi*m jump rule
    order_up = [s for s in sorted(segments) if s > anchor_seg]
    order_dn = [s for s in sorted(segments, reverse=True) if s < anchor_seg]
    mults = {i: m for i, (z, m) in enumerate(real_zeros)}
    for sid in order_up:
        pm, prev = segments[sid - 1]
        mask, seg = segments[sid]
        target = prev[-1] - np.pi * mults[sid - 1]
        # prev[-1] approximates the limit from the left; match the right
        # limit continuation of the jump rule
        seg = seg - seg[0] + target
        segments[sid] = (mask, seg)
    for sid in order_dn:
        pm, nxt = segments[sid + 1]
        mask, seg = segments[sid]
        target = nxt[0] + np.pi * mults[sid]
        seg = seg - seg[-1] + target
        segments[sid] = (mask, seg)
    for sid, (mask, seg) in segments.items():
        out[mask] = seg
    return out


@dataclass(frozen=True)
class EvolveResult:
    profile: Potential
    t: float
    report: dict


def evolve(q: Potential, t: float, kmax: float | None = None,
           nk: int | None = None, x_margin: float | None = None,
           n_per_unit: int = 192, s_cap: float | None = None,
           taper: float = 0.15, tol: float = 1e-10) -> EvolveResult:
    """Evolve a windowed profile by time t of the defocusing cubic flow.

    Pipeline: forward scattering, r_- -> e^{4itk^2} r_-, kernel rebuild,
    layer-stripping inversion on an enlarged window.  The result is a
    windowed representative of the (no longer compactly supported) profile;
    the report carries the window data and edge magnitudes.  A cosine taper
    over the outer fraction of the window softens the cut so that the
    result can be re-scattered without an artificial edge impulse.
    """
    gamma = q.gamma
    if kmax is None:
        kmax = 256.0 / gamma
    spread = 4.0 * abs(t) * kmax
    if nk is None:
        dk_max = np.pi / (2.0 * (1.5 * gamma + spread + 4.0 * gamma))
        nk = 2 * int(np.ceil(kmax / dk_max)) + 1
    k_grid = np.linspace(-kmax, kmax, nk)
    tc = transition_coefficients(q, k_grid=k_grid, tol=tol)
    r_minus = reflection_from_jost(tc, "left")
    phase = np.exp(4j * t * k_grid.astype(complex) ** 2)
    evolved = SpectralGrid(k_grid, phase * r_minus.grid.values)
    data = ReflectionData("left", evolved, gamma=None)
    if x_margin is None:
        x_margin = 1.5 * gamma + 28.0 * abs(t) / gamma
    h = 1.0 / n_per_unit * gamma
    x_lo = -x_margin + q.x0
    x_hi = q.x0 + gamma + x_margin
    j_lo = int(np.floor(x_lo / h))
    j_hi = int(np.ceil(x_hi / h))
    x_grid = h * np.arange(j_lo, j_hi + 1)
    if s_cap is None:
        s_cap = 3.0 * gamma + 36.0 * abs(t) / gamma
    sol = solve_glm(glm_kernel(data), x_grid, s_max=s_cap)
    samples = sol.q.copy()
    if taper > 0:
        width = int(np.ceil(taper * samples.size))
        ramp = 0.5 * (1.0 - np.cos(np.pi * np.arange(width) / width))
        samples[:width] *= ramp
        samples[-width:] *= ramp[::-1]
    window = float(x_grid[-1] - x_grid[0])
    profile = Potential(gamma=window, samples=samples, x0=float(x_grid[0]))
    report = {
        "t": t,
        "kmax": kmax,
        "nk": nk,
        "x_window": (float(x_grid[0]), float(x_grid[-1])),
        "s_cap": s_cap,
        "kernel_truncation": data.truncation_bound,
        "edge_magnitude": float(max(np.abs(sol.q[0]), np.abs(sol.q[-1]))),
        "max_condition": sol.max_condition,
    }
    return EvolveResult(profile=profile, t=t, report=report)


def nls_energy(q: Potential) -> float:
    """Hamiltonian functional int (|q'|^2 + |q|^4) dx (diagnostic only)."""
    dq = np.gradient(q.samples, q.x)
    return float(np.trapezoid(np.abs(dq) ** 2 + np.abs(q.samples) ** 4,
                              q.x))
