"""Factorization constructions linking a, b, and zero data.

The modulus |a| on the real axis determines a as an outer function
(a = exp(C+ log(1+|b|^2))); the pair (a, xi) determines b through a Hadamard
product over the zeros of B = a a* - 1 in the closed upper half-plane, with
zeros reflected to the lower half-plane where xi says so.  Finite Blaschke
factors flip zeros without changing |b| on the real axis (isoresonance) and
rational factors move or remove individual zeros.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import polygamma

from .errors import ClassError, DataError, NumericsError, ParameterError, TruncationWarning
from .fourier import (SpectralGrid, default_k_grid, hilbert_exp,
                      inverse_transform_refined, oscillatory_sum)
from .resonances import CLUSTER_TOL, Rect, ZeroSet, find_zeros, winding_count

REALNESS_TOL = 1e-6
# B = a a* - 1 suffers catastrophic cancellation near its real zeros, which
# therefore cannot be located better than ~1e-5; zeros of B within this band
# of the axis are classified as real
B_REALNESS_BAND = 5e-5


def taylor_coefficients(f, z0: complex, order: int, radius: float,
                        npts: int = 64) -> np.ndarray:
    """Taylor coefficients c_0..c_order of f at z0 by a circular contour.

    Exact for entire f up to the geometric tail of the series at the chosen
    radius; npts must exceed order comfortably.
    """
    theta = 2 * np.pi * np.arange(npts) / npts
    vals = np.asarray(f(z0 + radius * np.exp(1j * theta)), dtype=complex)
    coeffs = np.fft.fft(vals) / npts
    j = np.arange(order + 1)
    return coeffs[: order + 1] / radius ** j


@dataclass(frozen=True)
class XiSequence:
    """Sign data making (a, xi) a complete parametrization.

    xi0 is the unit-modulus leading coefficient phase of b at the origin
    (None when b vanishes identically), p the multiplicity of the zero of b
    at k = 0, and signs the per-zero values of sign(Im z_n) over the
    modulus-sorted zeros away from the origin, multiplicity expanded.
    """

    xi0: complex | None
    p: int
    signs: tuple
    realness_tol: float = REALNESS_TOL

    @property
    def undefined(self) -> bool:
        return self.xi0 is None


def xi_of(b_eval, zeros: ZeroSet, realness_tol: float = REALNESS_TOL,
          contour_radius: float = 0.1) -> XiSequence:
    """Extract xi = (xi0; sign Im z_1, sign Im z_2, ...) from b and its zeros."""
    probe = np.asarray(b_eval(np.array([0.31 + 0j, 1.7 + 0j, 4.3 + 0.2j])),
                       dtype=complex)
    if np.max(np.abs(probe)) < 1e-14:
        return XiSequence(None, 0, (), realness_tol)
    p = 0
    for z in zeros.zeros:
        if abs(z.location) <= CLUSTER_TOL:
            p = z.multiplicity
    coeffs = taylor_coefficients(b_eval, 0.0 + 0.0j, p, contour_radius)
    cp = coeffs[p]
    if abs(cp) == 0.0:
        raise NumericsError("leading Taylor coefficient of b at 0 vanished; "
                            "zero multiplicity at the origin is inconsistent")
    signs = []
    for z in zeros.expanded():
        if abs(z) <= CLUSTER_TOL:
            continue
        if abs(z.imag) <= realness_tol:
            signs.append(0)
        else:
            signs.append(1 if z.imag > 0 else -1)
    return XiSequence(cp / abs(cp), p, tuple(signs), realness_tol)


# ----------------------------------------------------------------------
# a from b: outer function from the boundary modulus


@dataclass(frozen=True)
class OuterCoefficient:
    """Boundary values of a on a real grid plus an entire evaluator.

    The evaluator reconstructs a(k) = 1 + int_0^gamma h(s) e^{2iks} ds from
    the compactly supported profile h recovered off the wide internal grid,
    which is valid at every complex k.
    """

    grid: SpectralGrid
    h_s: np.ndarray
    h_vals: np.ndarray

    def __call__(self, k):
        k = np.asarray(k, dtype=complex)
        flat = k.ravel()
        vals = 1.0 + oscillatory_sum(self.h_vals, self.h_s[0],
                                     self.h_s[1] - self.h_s[0], flat, +1)
        # oscillatory_sum treats uniform *real* output nodes; fall back to
        # direct summation when k is genuinely complex
        if np.iscomplexobj(k) and np.any(np.abs(flat.imag) > 0):
            ds = self.h_s[1] - self.h_s[0]
            w = np.full(self.h_s.size, ds)
            w[0] = w[-1] = ds / 2
            ph = np.exp(2j * np.multiply.outer(flat, self.h_s))
            vals = 1.0 + ph @ (w * self.h_vals)
        return vals.reshape(k.shape) if k.shape else vals[0]


def a_from_b(b_eval, gamma: float, k_grid=None, internal_kmax: float | None = None,
             internal_nk: int = 4096, tail_tol: float = 1e-8) -> OuterCoefficient:
    """Unique a with |a|^2 = 1 + |b|^2 on the real axis, zero-free in the
    upper half-plane, a -> 1 at infinity.

    Boundary values come from exp of the Hardy projection of log(1+|b|^2) on
    a wide internal grid; the entire continuation is rebuilt from the
    recovered profile h with a = 1 + F h.
    """
    if internal_kmax is None:
        internal_kmax = 256.0 / gamma
    if internal_nk % 2 == 0:
        internal_nk += 1
    ki = np.linspace(-internal_kmax, internal_kmax, internal_nk)
    b_vals = np.asarray(b_eval(ki.astype(complex)), dtype=complex)
    u = np.log1p(np.abs(b_vals) ** 2)
    umax = u.max()
    edge = max(u[0], u[-1])
    if umax > 0 and edge > 1e-3 * umax:
        raise NumericsError(
            "log-modulus tail mass too large at the spectral window edge; "
            f"extend internal_kmax beyond {internal_kmax:.3g}")
    if umax > 0 and edge > tail_tol * umax:
        # |b| ~ C/k makes u ~ 1/k^2: the edge ratio cannot reach 1e-8 at any
        # practical window; the Hilbert-transform error it induces is of the
        # order of the edge ratio itself, so report it and continue
        warnings.warn(
            f"log-modulus window edge ratio {edge / umax:.2e} above "
            f"{tail_tol:.0e}; outer-function error of that order",
            TruncationWarning)
    a_vals = hilbert_exp(u, ki)
    # profile h with a = 1 + F h, recovered exactly on [0, gamma] so that
    # the jumps of h sit at the window ends; the spectral-window tail of
    # a - 1 is removed with the analytic front model, and the two boundary
    # samples (which an inverse transform returns as half-jump midpoints)
    # are replaced by one-sided extrapolation
    ns = max(1025, internal_nk // 4)
    s = np.linspace(0.0, gamma, ns)
    h_vals = inverse_transform_refined(
        SpectralGrid(ki, a_vals - 1.0), s, fronts=(0.0, gamma))
    h_vals[0] = 3 * h_vals[1] - 3 * h_vals[2] + h_vals[3]
    h_vals[-1] = 3 * h_vals[-2] - 3 * h_vals[-3] + h_vals[-4]
    outer = OuterCoefficient(SpectralGrid(ki, a_vals), s, h_vals)
    if k_grid is not None:
        k_grid = np.asarray(k_grid, dtype=float)
        vals = outer(k_grid.astype(complex))
        outer = OuterCoefficient(SpectralGrid(k_grid, vals), s, h_vals)
    return outer


def outer_from_log_modulus(u: np.ndarray, k: np.ndarray) -> np.ndarray:
    """exp(C+ u): boundary outer function with |.| = e^{u/2} (u real)."""
    return hilbert_exp(u, k)


# ----------------------------------------------------------------------
# b from (a, xi): Hadamard product over the zeros of B = a a* - 1


def zeros_within_radius(zeros: ZeroSet, radius: float) -> ZeroSet:
    """Restrict a zero set to |z| <= radius (the modulus convention shared
    by xi indexing and the Hadamard truncation)."""
    kept = tuple(z for z in zeros.zeros if abs(z.location) <= radius)
    return ZeroSet(kept, zeros.region, zeros.residual_bound)


def _b_zero_data(a_eval, gamma: float, radius: float, im_top: float | None,
                 origin_radius: float = 0.1,
                 realness_tol: float = B_REALNESS_BAND):
    """Zeros of B = a a* - 1 in the closed upper half-plane within |k| <=
    radius: real zeros at half multiplicity plus genuinely complex ones.

    The search region is symmetric about the real axis, which keeps the
    contours away from the axis where the zeros accumulate; the conjugate
    pairing of B's zeros is then used as a consistency check.

    Returns (p, abs_C, entries) with B ~ C k^{2p} near 0 and entries the
    modulus-sorted upper zeros, multiplicity expanded.
    """
    def B(k):
        k = np.asarray(k, dtype=complex)
        return a_eval(k) * np.conj(a_eval(np.conj(k))) - 1.0

    if im_top is None:
        im_top = 12.0 / gamma
    # multiplicity 2p at the origin and the constant |C| = B^(2p)(0)/(2p)!
    p2 = winding_count(B, Rect(-origin_radius, origin_radius,
                               -origin_radius, origin_radius),
                       phase_scale=4.0 * gamma + 2.0)
    if p2 % 2:
        raise NumericsError("odd multiplicity for B at the origin")
    p = p2 // 2
    coeffs = taylor_coefficients(B, 0.0 + 0.0j, 2 * p, origin_radius)
    c2p = coeffs[2 * p]
    if abs(c2p.imag) > 1e-6 * abs(c2p) or c2p.real <= 0:
        raise NumericsError(f"leading coefficient of B not positive: {c2p}")
    abs_c = c2p.real

    pad = 0.2345 / gamma  # keep the side edges off near-|k|=radius zeros
    region = Rect(-radius - pad, radius + pad, -im_top, im_top)
    found = find_zeros(B, region, phase_scale=4.0 * gamma + 2.0,
                       cluster_tol=2e-5)
    # B* = B, so the zero multiset is conjugation-symmetric: real zeros have
    # even multiplicity and complex ones come in (z, conj z) pairs.  B is
    # evaluated as a a* - 1 and cancels catastrophically near its real
    # zeros, so locations there carry an |z|-dependent fuzz.  Folding every
    # zero into the closed upper half-plane and clustering therefore leaves
    # groups of even total multiplicity; halving them yields the upper
    # representatives in both cases at once.
    expanded = []
    for z in found.zeros:
        if origin_radius < abs(z.location) <= radius:
            expanded.extend([z.location] * z.multiplicity)
    folded = [z if z.imag >= 0 else np.conj(z) for z in expanded]
    folded.sort(key=lambda z: (abs(z), np.angle(z)))
    clusters: list[list] = []
    for z in folded:
        tol = 1e-4 * (1.0 + 0.02 * abs(z))
        for grp in clusters:
            if abs(grp[0] - z) < tol:
                grp.append(z)
                break
        else:
            clusters.append([z])
    entries = []
    for grp in clusters:
        if len(grp) % 2:
            raise NumericsError(
                f"zero group near {grp[0]:.6g} of B has odd folded "
                f"multiplicity {len(grp)}; conjugation symmetry violated")
        loc = np.mean(grp)
        if abs(loc.imag) <= max(realness_tol, 1e-4 * (1.0 + 0.02 * abs(loc))):
            loc = complex(loc.real)
        entries.extend([loc] * (len(grp) // 2))
    entries.sort(key=lambda z: (abs(z), np.angle(z)))
    return p, abs_c, np.array(entries, dtype=complex)


def _pair_for_stability(entries: np.ndarray):
    """Group zeros into (zeta, partner) pairs with nearly opposite real
    parts; the pairwise products keep the conditionally convergent Hadamard
    product stable under truncation."""
    remaining = list(range(len(entries)))
    groups = []
    while remaining:
        i = remaining.pop(0)
        if not remaining:
            groups.append((i, None))
            break
        target = -entries[i].real
        jbest = min(remaining, key=lambda j: abs(entries[j].real - target))
        remaining.remove(jbest)
        groups.append((i, jbest))
    return groups


def _lattice_tail(k, gamma: float, n_from: int, n_to_exact: int = 0):
    """prod_{n > n_from} (1 - (gamma k / (n pi))^2), evaluated as an explicit
    product up to M plus a polygamma-controlled remainder."""
    k = np.asarray(k, dtype=complex)
    m_cut = max(4 * n_from + 8, n_from + 256)
    n = np.arange(n_from + 1, m_cut + 1)
    factors = 1.0 - (gamma * k[..., None] / (n * np.pi)) ** 2
    prod = np.prod(factors, axis=-1)
    x = (gamma * k / np.pi) ** 2
    log_tail = -x * polygamma(1, m_cut + 1) - 0.5 * x ** 2 * polygamma(3, m_cut + 1) / 6.0
    return prod * np.exp(log_tail)


@dataclass(frozen=True)
class HadamardProduct:
    """b rebuilt from (a, xi): truncated zero product with a free-lattice
    tail factor; convergence_estimate compares the R and R/2 truncations."""

    xi0: complex
    p: int
    scale: float            # |C|^{1/2}
    gamma: float
    zeros: np.ndarray       # selected zeta_n, multiplicity expanded
    groups: tuple
    lattice_from: int
    convergence_estimate: float = float("nan")

    def __call__(self, k):
        k = np.asarray(k, dtype=complex)
        out = self.xi0 * self.scale * k ** self.p * np.exp(1j * self.gamma * k)
        for i, j in self.groups:
            fac = 1.0 - k / self.zeros[i]
            if j is not None:
                fac = fac * (1.0 - k / self.zeros[j])
            out = out * fac
        return out * _lattice_tail(k, self.gamma, self.lattice_from)


def b_from_a_xi(a_eval, xi: XiSequence, gamma: float,
                truncation_radius: float = 60.0,
                im_top: float | None = None,
                estimate_grid=None,
                tail_warn: float = 1e-2) -> HadamardProduct:
    """Unique b with a a* - b b* = 1 and xi(b) = xi, as a Hadamard product.

    Zeros of B = a a* - 1 in the closed upper half-plane are computed within
    the truncation radius; xi decides which member of each conjugate pair is
    a zero of b.  Stability comes from pairing factors with opposite real
    parts; the omitted far zeros are modeled by the free lattice +-n pi/gamma
    whose product has a closed form.
    """
    if xi.undefined:
        raise DataError("xi is undefined (b identically zero); nothing to build")
    p, abs_c, entries = _b_zero_data(a_eval, gamma, truncation_radius, im_top)
    if len(xi.signs) != len(entries):
        raise DataError(
            f"xi carries {len(xi.signs)} signs but {len(entries)} zeros of B "
            f"lie within radius {truncation_radius}")
    zetas = np.array([z if s >= 0 else np.conj(z)
                      for z, s in zip(entries, xi.signs)], dtype=complex)
    # consistency: a sign claiming a non-real zero must refer to one
    for z, s in zip(entries, xi.signs):
        if s != 0 and abs(z.imag) <= B_REALNESS_BAND:
            raise DataError("xi flags a real zero of B as non-real")

    def build(zsel):
        groups = tuple(_pair_for_stability(zsel))
        n_lat = int(round(len(zsel) / 2))
        return HadamardProduct(xi.xi0, p, np.sqrt(abs_c), gamma,
                               zsel, groups, n_lat)

    full = build(zetas)
    half = build(zetas[np.abs(zetas) <= truncation_radius / 2])
    if estimate_grid is None:
        estimate_grid = np.linspace(-10.0 / gamma, 10.0 / gamma, 257)
    est_f = full(estimate_grid.astype(complex))
    est_h = half(estimate_grid.astype(complex))
    scale = np.max(np.abs(est_f)) + 1e-300
    estimate = float(np.max(np.abs(est_f - est_h)) / scale)
    if estimate > tail_warn:
        warnings.warn(f"Hadamard truncation estimate {estimate:.2e} exceeds "
                      f"{tail_warn:.0e}; increase the truncation radius",
                      TruncationWarning)
    return HadamardProduct(full.xi0, full.p, full.scale, full.gamma,
                           full.zeros, full.groups, full.lattice_from,
                           convergence_estimate=estimate)


# ----------------------------------------------------------------------
# Blaschke flips, zero shifts, resonance shifts


def _taylor_series_eval(f, center: complex, k):
    """f(k)/(k - center) close to center, by series division."""
    radius = 5e-3 * (1.0 + abs(center))
    coeffs = taylor_coefficients(f, center, 8, radius)
    dk = np.asarray(k, dtype=complex) - center
    out = np.zeros_like(dk)
    for j in range(len(coeffs) - 1, 0, -1):
        out = out * dk + coeffs[j]
    return out


def iso_factor(b_eval, zeros: ZeroSet, flip_indices, alpha: float = 0.0,
               realness_tol: float = REALNESS_TOL):
    """b' = b * e^{i alpha} prod_G (1 - k/conj(z_n)) (1 - k/z_n)^{-1}.

    flip_indices select entries of zeros.expanded(); only non-real zeros may
    be flipped.  |b'| = |b| on the real axis exactly.
    """
    expanded = zeros.expanded()
    flip_indices = tuple(int(i) for i in flip_indices)
    for i in flip_indices:
        if not 0 <= i < expanded.size:
            raise ParameterError(f"flip index {i} out of range")
        if abs(expanded[i].imag) <= realness_tol:
            raise ParameterError(
                f"zero {expanded[i]:.6g} is real within tolerance; flipping "
                "it would make the Blaschke factor singular")
    flips = expanded[list(flip_indices)]
    phase = np.exp(1j * float(alpha))

    def b_prime(k):
        k = np.asarray(k, dtype=complex)
        scalar = k.ndim == 0
        k = np.atleast_1d(k)
        out = np.asarray(b_eval(k), dtype=complex) * phase
        for z in flips:
            near = np.abs(k - z) < 1e-6 * (1.0 + abs(z))
            ratio = np.empty_like(out)
            far = ~near
            ratio[far] = (1.0 - k[far] / np.conj(z)) / (1.0 - k[far] / z)
            out[far] = out[far] * ratio[far]
            if near.any():
                ks = k[near]
                out[near] = (_taylor_series_eval(b_eval, z, ks)
                             * (-z) * (1.0 - ks / np.conj(z)) * phase)
        return out[0] if scalar else out

    return b_prime


def shift_zero(b_eval, zeros: ZeroSet, z_from: complex, z_to=None,
               match_tol: float = 1e-4):
    """b' = b (k - z_to)/(k - z_from), or b/(k - z_from) when z_to is None.

    z_from must coincide with a computed zero of b; the removable singularity
    is evaluated by local Taylor division.
    """
    locs = zeros.locations()
    if locs.size == 0 or np.min(np.abs(locs - z_from)) > match_tol:
        raise ParameterError(f"{z_from} is not a zero of b (within {match_tol})")
    z_from = complex(locs[np.argmin(np.abs(locs - z_from))])
    patch_radius = 1e-3 * (1.0 + abs(z_from))

    def b_prime(k):
        k = np.asarray(k, dtype=complex)
        scalar = k.ndim == 0
        k = np.atleast_1d(k)
        near = np.abs(k - z_from) < patch_radius
        out = np.empty(k.shape, dtype=complex)
        far = ~near
        if far.any():
            out[far] = np.asarray(b_eval(k[far]), dtype=complex) / (k[far] - z_from)
        if near.any():
            out[near] = _taylor_series_eval(b_eval, z_from, k[near])
        if z_to is not None:
            out = out * (k - z_to)
        return out[0] if scalar else out

    return b_prime


def shift_resonance(a_eval, k_from: complex, k_to: complex, check_grid,
                    symmetry_tol: float = 1e-8):
    """a' = a (k-k_to)(k+conj k_to) / ((k-k_from)(k+conj k_from)) for a in
    the symmetric class a(k) = a*(-k).

    Admissibility (|k_to| >= |k_from| and Re k_to^2 <= Re k_from^2) keeps
    |a'| >= 1 on the real axis; both the symmetry of a and the modulus bound
    of a' are verified on check_grid.
    """
    k_from = complex(k_from)
    k_to = complex(k_to)
    if not (k_from.imag < 0 and k_to.imag < 0):
        raise ParameterError("resonances must lie in the open lower half-plane")
    if abs(k_to) < abs(k_from) * (1 - 1e-12):
        raise ParameterError(
            f"inadmissible shift: |k_to| = {abs(k_to):.6g} < |k_from| = "
            f"{abs(k_from):.6g}")
    if (k_to ** 2).real > (k_from ** 2).real + 1e-12 * max(1.0, abs(k_from) ** 2):
        raise ParameterError(
            f"inadmissible shift: Re k_to^2 = {(k_to**2).real:.6g} > "
            f"Re k_from^2 = {(k_from**2).real:.6g}")
    check_grid = np.asarray(check_grid, dtype=complex)
    a_vals = np.asarray(a_eval(check_grid), dtype=complex)
    a_refl = np.conj(np.asarray(a_eval(-np.conj(check_grid)), dtype=complex))
    scale = np.max(np.abs(a_vals))
    if np.max(np.abs(a_vals - a_refl)) > symmetry_tol * scale:
        raise ClassError("a is not symmetric: a(k) != a*(-k) on the check grid")
    probe = np.asarray(a_eval(np.array([k_from])), dtype=complex)[0]
    circle = np.asarray(
        a_eval(k_from + 0.5 * np.exp(2j * np.pi * np.arange(8) / 8)),
        dtype=complex)
    if abs(probe) > 1e-6 * max(1.0, np.max(np.abs(circle))):
        raise ParameterError(f"{k_from} is not a resonance of a")
    mirror = -np.conj(k_from)
    twin = abs(mirror - k_from) > 1e-12 * max(1.0, abs(k_from))

    def a_prime(k):
        k = np.asarray(k, dtype=complex)
        scalar = k.ndim == 0
        k = np.atleast_1d(k)
        out = np.empty(k.shape, dtype=complex)
        near1 = np.abs(k - k_from) < 1e-3 * (1.0 + abs(k_from))
        near2 = twin & (np.abs(k - mirror) < 1e-3 * (1.0 + abs(mirror)))
        far = ~(near1 | near2)
        if far.any():
            kf = k[far]
            out[far] = (np.asarray(a_eval(kf), dtype=complex)
                        / ((kf - k_from) * (kf + np.conj(k_from))))
        if near1.any():
            ks = k[near1]
            out[near1] = _taylor_series_eval(a_eval, k_from, ks) / (ks + np.conj(k_from))
        if np.any(near2):
            ks = k[near2]
            out[near2] = _taylor_series_eval(a_eval, mirror, ks) / (ks - k_from)
        out = out * (k - k_to) * (k + np.conj(k_to))
        return out[0] if scalar else out

    real_k = check_grid.real.astype(complex)
    mod = np.abs(np.asarray(a_prime(real_k), dtype=complex))
    if np.min(mod) < 1.0 - 1e-8:
        warnings.warn(f"|a'| dips to {np.min(mod):.12g} on the check grid",
                      TruncationWarning)
    return a_prime
