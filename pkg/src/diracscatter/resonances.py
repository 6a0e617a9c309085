"""Zero location for entire functions by argument-principle subdivision.

Resonances are the zeros of a in the open lower half-plane; the zeros of b
parametrize the inverse problem.  Both are found the same way: adaptive
winding counts over rectangle boundaries, quadtree subdivision until a cell
isolates one zero cluster, then Newton refinement using the cell's winding
number as the multiplicity.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericsError, ParameterError

CLUSTER_TOL = 1e-6


@dataclass(frozen=True)
class Rect:
    re_lo: float
    re_hi: float
    im_lo: float
    im_hi: float

    def __post_init__(self):
        if not (self.re_lo < self.re_hi and self.im_lo < self.im_hi):
            raise ParameterError("empty rectangle")

    @property
    def width(self) -> float:
        return self.re_hi - self.re_lo

    @property
    def height(self) -> float:
        return self.im_hi - self.im_lo

    @property
    def center(self) -> complex:
        return complex(0.5 * (self.re_lo + self.re_hi),
                       0.5 * (self.im_lo + self.im_hi))

    def contains(self, z: complex, margin: float = 0.0) -> bool:
        return (self.re_lo - margin <= z.real <= self.re_hi + margin
                and self.im_lo - margin <= z.imag <= self.im_hi + margin)

    def boundary_points(self, n_per_edge: int) -> np.ndarray:
        """Counterclockwise closed boundary, n_per_edge points per edge."""
        t = np.linspace(0.0, 1.0, n_per_edge, endpoint=False)
        bot = self.re_lo + t * self.width + 1j * self.im_lo
        rgt = self.re_hi + 1j * (self.im_lo + t * self.height)
        top = self.re_hi - t * self.width + 1j * self.im_hi
        lft = self.re_lo + 1j * (self.im_hi - t * self.height)
        return np.concatenate([bot, rgt, top, lft, bot[:1]])


@dataclass(frozen=True)
class Zero:
    location: complex
    multiplicity: int
    cluster: bool = False


@dataclass(frozen=True)
class ZeroSet:
    zeros: tuple
    region: Rect
    residual_bound: float

    def locations(self) -> np.ndarray:
        return np.array([z.location for z in self.zeros], dtype=complex)

    def multiplicities(self) -> np.ndarray:
        return np.array([z.multiplicity for z in self.zeros], dtype=int)

    @property
    def total_multiplicity(self) -> int:
        return int(sum(z.multiplicity for z in self.zeros))

    def expanded(self) -> np.ndarray:
        """Locations repeated per multiplicity, modulus-then-argument order."""
        out = []
        for z in self.zeros:
            out.extend([z.location] * z.multiplicity)
        return np.array(out, dtype=complex)


def winding_count(f, rect: Rect, max_refine: int = 26,
                  boundary_tol: float = 1e-9, n_start: int = 16,
                  phase_scale: float = 2.0) -> int:
    """Number of zeros (with multiplicity) inside rect, by accumulating the
    argument of f along an adaptively refined boundary so each step changes
    arg f by less than pi/2.

    phase_scale bounds |d arg f / dk| along the boundary away from zeros
    (the exponential type of f); the initial sampling resolves that baseline
    rate so steady phase accumulation cannot alias across 2 pi.
    """
    edge = max(rect.width, rect.height)
    n0 = max(n_start, int(np.ceil(edge * phase_scale)) + 4)
    pts = rect.boundary_points(n0)
    vals = np.asarray(f(pts), dtype=complex)
    for attempt in range(max_refine + 1):
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = vals[1:] / vals[:-1]
            dphi = np.angle(ratio)
            dmag = np.abs(np.log(np.abs(ratio)))
        # Refinement criteria.  A zero near (or across) the contour is
        # invisible to the endpoint phase difference when the sampling
        # straddles it symmetrically, so besides the step criteria on the
        # phase and on the magnitude ratio, any V-shaped dip of |f| at a
        # node forces both adjacent segments to refine until the passage
        # is resolved.
        bad = (np.abs(dphi) >= np.pi / 2) | (dmag >= 0.7)
        absv = np.abs(vals)
        neighbors = np.minimum(np.roll(absv, 1), np.roll(absv, -1))
        dip = 2.5 * absv < neighbors
        if dip.any():
            idx = np.flatnonzero(dip)
            bad[np.clip(idx - 1, 0, bad.size - 1)] = True
            bad[np.clip(idx, 0, bad.size - 1)] = True
        if not bad.any():
            total = dphi.sum() / (2 * np.pi)
            count = int(np.round(total))
            if abs(total - count) > 0.25:
                raise NumericsError("winding did not settle to an integer")
            return count
        if attempt == max_refine or pts.size > 200_000:
            scale = np.median(np.abs(vals))
            dip = np.abs(vals).min()
            idx = int(np.argmin(np.abs(vals)))
            raise NumericsError(
                "winding refinement exhausted; boundary point "
                f"{pts[idx]:.6g} has |f| = {dip:.3g} (scale {scale:.3g}); "
                "nudge the boundary away from the nearest zero")
        mids = 0.5 * (pts[np.flatnonzero(bad)] + pts[np.flatnonzero(bad) + 1])
        mid_vals = np.asarray(f(mids), dtype=complex)
        order = np.argsort(np.concatenate(
            [np.arange(pts.size, dtype=float),
             np.flatnonzero(bad) + 0.5]))
        pts = np.concatenate([pts, mids])[order]
        vals = np.concatenate([vals, mid_vals])[order]
    raise NumericsError("unreachable")


_SPLIT_FRACTIONS = (0.5, 0.5625, 0.4375, 0.59375, 0.40625, 0.53125, 0.46875)


def _split(rect: Rect, f, phase_scale: float) -> tuple:
    """Split the longer side at a fraction whose line stays clear of zeros.

    Candidate lines are screened first by the dip of |f| along them (a line
    through or near a zero would make the child windings unreliable), then
    tried in order of cleanliness.
    """
    vertical = rect.width >= rect.height
    span = rect.height if vertical else rect.width
    nline = max(17, int(np.ceil(span * phase_scale)) + 4)
    t = np.linspace(0.0, 1.0, nline)
    cands = []
    for frac in _SPLIT_FRACTIONS:
        if vertical:
            mid = rect.re_lo + frac * rect.width
            line = mid + 1j * (rect.im_lo + t * rect.height)
        else:
            mid = rect.im_lo + frac * rect.height
            line = rect.re_lo + t * rect.width + 1j * mid
        vals = np.abs(np.asarray(f(line), dtype=complex))
        score = vals.min() / (np.median(vals) + 1e-300)
        cands.append((score, frac))
    cands.sort(reverse=True)
    last_err = None
    for score, frac in cands:
        if vertical:
            mid = rect.re_lo + frac * rect.width
            r1 = Rect(rect.re_lo, mid, rect.im_lo, rect.im_hi)
            r2 = Rect(mid, rect.re_hi, rect.im_lo, rect.im_hi)
        else:
            mid = rect.im_lo + frac * rect.height
            r1 = Rect(rect.re_lo, rect.re_hi, rect.im_lo, mid)
            r2 = Rect(rect.re_lo, rect.re_hi, mid, rect.im_hi)
        try:
            return ((r1, winding_count(f, r1, phase_scale=phase_scale)),
                    (r2, winding_count(f, r2, phase_scale=phase_scale)))
        except NumericsError as err:
            last_err = err
            continue
    raise NumericsError(f"could not place a zero-free split line: {last_err}")


def _newton(f, z0: complex, mult: int, fprime=None, tol: float = 1e-12,
            max_iter: int = 50):
    """Multiplicity-aware Newton; returns refined location or None.

    Stalls at the rounding floor of f are accepted: once the residual stops
    improving the best iterate seen is returned (relevant for even-order
    zeros of cancellation-prone functions, where |f| bottoms out around
    1e-16 of its natural scale).
    """
    z = complex(z0)
    step_scale = max(1.0, abs(z0))
    best_z, best_res = None, np.inf
    stale = 0
    for _ in range(max_iter):
        if fprime is None:
            delta = 1e-7 * step_scale
            fz, fp, fm = np.asarray(f(np.array([z, z + delta, z - delta])),
                                    dtype=complex)
            dfz = (fp - fm) / (2 * delta)
        else:
            fz = complex(np.asarray(f(np.array([z])))[0])
            dfz = complex(np.asarray(fprime(np.array([z])))[0])
        if abs(fz) < best_res:
            best_z, best_res = z, abs(fz)
            stale = 0
        else:
            stale += 1
            if stale >= 3:
                return best_z
        if dfz == 0:
            return best_z
        step = mult * fz / dfz
        z = z - step
        if abs(step) < tol * step_scale:
            return z
    return best_z


def find_zeros(f, region: Rect, tol: float = 1e-9, fprime=None,
               cluster_tol: float = CLUSTER_TOL,
               newton_size: float = 0.5,
               phase_scale: float = 2.0) -> ZeroSet:
    """All zeros of an entire function inside region, with multiplicities.

    Quadtree subdivision by winding count isolates zero clusters; Newton
    (with the winding number as multiplicity) polishes each.  Cells that
    refuse to converge are reported as clusters at their centroid.
    """
    total = winding_count(f, region, phase_scale=phase_scale)
    found: list[Zero] = []
    stack = [(region, total)]
    while stack:
        rect, count = stack.pop()
        if count == 0:
            continue
        diam = max(rect.width, rect.height)
        if diam <= newton_size:
            z = _newton(f, rect.center, count, fprime=fprime, tol=tol)
            if z is not None and rect.contains(z, margin=0.05 * diam):
                ok = True
                if count > 1 and diam > 4 * cluster_tol:
                    # confirm the full multiplicity sits at the refined point
                    r = max(10 * cluster_tol, 1e-3 * diam)
                    box = Rect(z.real - r, z.real + r, z.imag - r, z.imag + r)
                    try:
                        ok = winding_count(f, box, phase_scale=phase_scale) == count
                    except NumericsError:
                        ok = False
                if ok:
                    found.append(Zero(z, count))
                    continue
            if diam <= cluster_tol:
                found.append(Zero(rect.center, count, cluster=True))
                continue
        try:
            (r1, c1), (r2, c2) = _split(rect, f, phase_scale)
        except NumericsError:
            if diam <= max(1e3 * cluster_tol, 1e-6 * (1.0 + abs(rect.center))):
                # splitting is hopeless this close to the rounding floor of
                # f; the zeros are localized to this cell anyway
                found.append(Zero(rect.center, count, cluster=True))
                continue
            raise
        if c1 + c2 != count:
            raise NumericsError(
                f"winding additivity violated: {count} != {c1} + {c2}")
        stack.append((r1, c1))
        stack.append((r2, c2))
    merged = _merge_clusters(found, cluster_tol)
    merged.sort(key=lambda z: (abs(z.location), np.angle(z.location)))
    residual = 0.0
    if merged:
        locs = np.array([z.location for z in merged])
        residual = float(np.max(np.abs(np.asarray(f(locs), dtype=complex))))
    return ZeroSet(tuple(merged), region, residual)


def _merge_clusters(zeros: list, cluster_tol: float) -> list:
    merged: list[Zero] = []
    for z in sorted(zeros, key=lambda z: (abs(z.location), np.angle(z.location))):
        for i, m in enumerate(merged):
            if abs(m.location - z.location) < cluster_tol:
                mt = m.multiplicity + z.multiplicity
                loc = (m.location * m.multiplicity
                       + z.location * z.multiplicity) / mt
                merged[i] = Zero(loc, mt, cluster=m.cluster or z.cluster)
                break
        else:
            merged.append(z)
    return merged


@dataclass(frozen=True)
class CountingReport:
    radii: np.ndarray
    counts_plus: np.ndarray
    counts_minus: np.ndarray
    fitted_slope: float
    delta: float


def counting_function(zeros: ZeroSet, radii, delta: float) -> CountingReport:
    """N_+-(r, delta): zeros with |k| <= r, +-Re k >= 0, and (for delta > 0)
    delta < |arg k| < pi - delta.  The least-squares slope of (N+ + N-)/2
    against r estimates the zero density per half-plane."""
    radii = np.asarray(radii, dtype=float)
    if not (0.0 <= delta <= np.pi / 2):
        raise ParameterError("delta must lie in [0, pi/2]")
    r_max = radii.max()
    reg = zeros.region
    if (reg.re_lo > -r_max or reg.re_hi < r_max or reg.im_lo > -r_max
            or reg.im_hi < r_max):
        raise NumericsError(
            f"zero search region does not cover the disk of radius {r_max}")
    locs = zeros.expanded()
    if locs.size:
        args = np.abs(np.angle(locs))
        if delta > 0:
            keep = (args > delta) & (args < np.pi - delta)
        else:
            keep = np.ones(locs.size, dtype=bool)
        mods = np.abs(locs)
        nplus = np.array([np.sum(keep & (mods <= r) & (locs.real >= 0))
                          for r in radii])
        nminus = np.array([np.sum(keep & (mods <= r) & (locs.real <= 0))
                           for r in radii])
    else:
        nplus = np.zeros(radii.size, dtype=int)
        nminus = np.zeros(radii.size, dtype=int)
    avg = 0.5 * (nplus + nminus)
    if radii.size >= 2 and np.ptp(radii) > 0:
        slope = float(np.polyfit(radii, avg, 1)[0])
    else:
        slope = 0.0
    return CountingReport(radii, nplus, nminus, slope, delta)


@dataclass(frozen=True)
class ForbiddenDomainFit:
    epsilon: float
    C: float
    violations: tuple = ()
    strip_counts: dict = field(default_factory=dict)


def forbidden_fit(resonances: ZeroSet, gamma: float, epsilon: float,
                  strip_depths=(0.05, 0.5, 1.0, 2.0)) -> ForbiddenDomainFit:
    """Smallest C >= 0 with 2 gamma Im k_n <= ln(eps + C/|k_n|) for every
    resonance, plus per-depth counts of resonances above Im k = -A."""
    locs = resonances.locations()
    if locs.size == 0:
        raise ParameterError("forbidden_fit needs at least one resonance")
    if np.any(locs.imag >= 0):
        raise ParameterError("resonances must lie in the open lower half-plane")
    needed = np.abs(locs) * (np.exp(2 * gamma * locs.imag) - epsilon)
    C = float(max(0.0, needed.max()))
    lhs = 2 * gamma * locs.imag
    rhs = np.log(epsilon + C / np.abs(locs))
    violations = tuple(int(i) for i in np.nonzero(lhs > rhs + 1e-12)[0])
    mult = resonances.multiplicities()
    strips = {float(a): int(mult[locs.imag > -a].sum()) for a in strip_depths}
    return ForbiddenDomainFit(epsilon, C, violations, strips)
