"""Fourier conventions, Hardy-space projection, and support diagnostics.

Every transform in the package goes through this module.  The kernel carries
a factor 2 in the exponent:

    forward:  (F g)(k) = int g(s) e^{2iks} ds
    inverse:  g(s) = (1/pi) int f(k) e^{-2iks} dk

Quadrature is Filon-type: exact for piecewise-linear integrands against the
oscillatory kernel at every frequency, accelerated with the chirp-z transform
on uniform output grids.  Plancherel for this convention reads
||F g||^2_{L2(dk)} = pi ||g||^2_{L2(ds)}.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.signal import czt

from .errors import ClassError, NumericsError, ParameterError, TruncationWarning

SUPPORT_THRESHOLD = 1e-6


@dataclass(frozen=True)
class SpectralGrid:
    """Complex values on a strictly increasing uniform real grid."""

    k: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.k, dtype=float)
        values = np.asarray(self.values, dtype=complex)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "values", values)
        if k.ndim != 1 or k.size < 2 or values.shape != k.shape:
            raise ParameterError("k and values must be matching 1-d arrays")
        dk = np.diff(k)
        if np.any(dk <= 0):
            raise ParameterError("k must be strictly increasing")
        if np.max(np.abs(dk - dk[0])) > 1e-12 * abs(dk[0]) * k.size:
            raise ParameterError("k must be uniformly spaced")
        if not (np.all(np.isfinite(values)) and np.all(np.isfinite(k))):
            raise ParameterError("grid data must be finite")

    @property
    def dk(self) -> float:
        return float(self.k[1] - self.k[0])

    @property
    def nk(self) -> int:
        return self.k.size


@dataclass(frozen=True)
class SupportEstimate:
    inf_supp: float
    sup_supp: float
    tau_plus: float | None = None
    tau_minus: float | None = None


def default_k_grid(gamma: float, kmax: float | None = None,
                   nk: int | None = None) -> np.ndarray:
    """Symmetric spectral grid: |k| <= 64/gamma at spacing pi/(8 gamma).

    The transition coefficients are band-limited with bandwidth 2*gamma under
    this kernel, so pi/(2 gamma) is the Nyquist edge; the default oversamples
    4x.  Explicit kmax/nk override both.
    """
    if kmax is None:
        kmax = 64.0 / gamma
    if nk is None:
        dk = np.pi / (8.0 * gamma)
        nk = 2 * int(np.ceil(kmax / dk)) + 1
    return np.linspace(-kmax, kmax, nk)


def _phase_ratio_series(z):
    """E0 = int_0^1 e^{zv} dv and E1 = int_0^1 v e^{zv} dv, stable near 0."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-4
    zs = np.where(small, 1.0, z)
    e0 = (np.exp(zs) - 1.0) / zs
    e1 = (np.exp(zs) * (zs - 1.0) + 1.0) / zs ** 2
    e0s = 1.0 + z / 2 + z ** 2 / 6 + z ** 3 / 24 + z ** 4 / 120
    e1s = 0.5 + z / 3 + z ** 2 / 8 + z ** 3 / 30 + z ** 4 / 144
    return np.where(small, e0s, e0), np.where(small, e1s, e1)


def oscillatory_sum(y: np.ndarray, x0: float, dx: float,
                    out_nodes: np.ndarray, sign: int) -> np.ndarray:
    """int y(x) e^{sign*2i*w*x} dx over y's grid, for each w in out_nodes.

    y is treated as piecewise linear between its samples; the rule is exact
    for such integrands at every w.  out_nodes must be uniform (or a single
    point); evaluation uses one chirp-z transform.
    """
    y = np.asarray(y, dtype=complex)
    out = np.atleast_1d(np.asarray(out_nodes, dtype=float))
    n = y.size
    nout = out.size
    x_last = x0 + dx * (n - 1)
    z = sign * 2j * out * dx
    e0, e1 = _phase_ratio_series(z)
    phi = e0 - e1
    psi = e1
    if nout > 1:
        do = out[1] - out[0]
        yw = y * np.exp(sign * 2j * out[0] * (x0 + dx * np.arange(n)))
        ratio = np.exp(sign * 2j * do * dx)
        s = czt(yw, nout, w=ratio, a=1.0 + 0j)
        s = s * np.exp(sign * 2j * do * x0 * np.arange(nout))
    else:
        s = np.array([np.sum(y * np.exp(sign * 2j * out[0] * (x0 + dx * np.arange(n))))])
    em = np.exp(-z)
    res = (phi + psi * em) * s \
        - phi * y[-1] * np.exp(sign * 2j * out * x_last) \
        - psi * em * y[0] * np.exp(sign * 2j * out * x0)
    return dx * res


def nyquist_guard(window_length: float, dk: float) -> None:
    if dk > np.pi / (2.0 * window_length) * (1.0 + 1e-12):
        raise ParameterError(
            f"aliasing: dk={dk:.6g} exceeds Nyquist bound "
            f"pi/(2*{window_length:.6g}) = {np.pi/(2*window_length):.6g}")


def forward_transform(s_nodes: np.ndarray, g: np.ndarray,
                      k_nodes: np.ndarray) -> SpectralGrid:
    """(F g)(k) = int g(s) e^{2iks} ds on the requested k grid."""
    s_nodes = np.asarray(s_nodes, dtype=float)
    k_nodes = np.asarray(k_nodes, dtype=float)
    ds = s_nodes[1] - s_nodes[0]
    if np.max(np.abs(np.diff(s_nodes) - ds)) > 1e-10 * abs(ds):
        raise ParameterError("forward_transform needs a uniform s grid")
    window = s_nodes[-1] - s_nodes[0]
    if k_nodes.size > 1:
        nyquist_guard(window, k_nodes[1] - k_nodes[0])
    vals = oscillatory_sum(g, s_nodes[0], ds, k_nodes, +1)
    return SpectralGrid(k_nodes, vals)


def dual_s_grid(grid_k: np.ndarray, offset: bool = False) -> np.ndarray:
    """s grid matched to a uniform k grid: n nodes, spacing pi/(n dk),
    centred on 0.  With offset=True the nodes straddle 0 half a cell off,
    which keeps the half-line indicator unambiguous."""
    grid_k = np.asarray(grid_k, dtype=float)
    n = grid_k.size
    dk = grid_k[1] - grid_k[0]
    hs = np.pi / (n * dk)
    base = np.arange(n) - n // 2
    return (base + 0.5) * hs if offset else base * hs


def inverse_transform(f: SpectralGrid, s_nodes: np.ndarray | None = None,
                      tail_tol: float = 1e-6):
    """g(s) = (1/pi) int f(k) e^{-2iks} dk on s_nodes (default: dual grid).

    Warns when |f| at the window edges exceeds tail_tol * max|f|; the warning
    carries a crude bound on the truncated tail mass.
    """
    peak = np.abs(f.values).max()
    if peak > 0:
        edge = max(abs(f.values[0]), abs(f.values[-1]))
        if edge > tail_tol * peak:
            bound = edge * abs(f.k[-1]) / np.pi
            warnings.warn(
                f"spectral window truncation: edge magnitude {edge:.3g} "
                f"(bound ~{bound:.3g} on the kernel)", TruncationWarning)
    if s_nodes is None:
        s_nodes = dual_s_grid(f.k)
    vals = oscillatory_sum(f.values, f.k[0], f.dk, s_nodes, -1) / np.pi
    return np.asarray(s_nodes, dtype=float), vals


def inverse_transform_tail_corrected(f: SpectralGrid, s_nodes: np.ndarray,
                                     fronts) -> np.ndarray:
    """Inverse transform with the |k| > K tail modeled analytically.

    Profiles with jump discontinuities at known locations (the "fronts")
    give spectra decaying like 1/k; a hard window then rings near the
    fronts.  Fit f(k) ~ sum_j c_j e^{2ik s_j} / (2ik) on the outer tenth of
    the window and add the closed-form transform of the modeled tail:
    (1/pi) int_{|k|>K} e^{2ik d}/(2ik) dk = sign(d) (1/2 - Si(2K|d|)/pi).
    """
    from scipy.special import sici

    s_nodes = np.asarray(s_nodes, dtype=float)
    out = oscillatory_sum(f.values, float(f.k[0]), f.dk, s_nodes, -1) / np.pi
    fronts = np.atleast_1d(np.asarray(fronts, dtype=float))
    kmax = float(np.abs(f.k).max())
    mask = np.abs(f.k) > 0.9 * kmax
    if mask.sum() >= 2 * fronts.size + 2:
        basis = np.exp(2j * np.outer(f.k[mask], fronts))
        target = f.values[mask] * 2j * f.k[mask]
        coef, *_ = np.linalg.lstsq(basis, target, rcond=None)
        for cj, sj in zip(coef, fronts):
            d = sj - s_nodes
            si, _ = sici(2.0 * kmax * np.abs(d))
            out = out + cj * np.sign(d) * (0.5 - si / np.pi)
    return out


def inverse_transform_refined(f: SpectralGrid, s_nodes: np.ndarray,
                              fronts=None) -> np.ndarray:
    """Inverse transform with Richardson extrapolation of the Filon-linear
    model error (quadratic in dk) and, optionally, the analytic front-tail
    correction.  Needs an odd number of samples so the 2x-decimated grid
    keeps both endpoints."""
    s_nodes = np.asarray(s_nodes, dtype=float)
    vals, k = f.values, f.k
    if k.size % 2 == 0:
        vals, k = vals[:-1], k[:-1]
    fine = oscillatory_sum(vals, float(k[0]), k[1] - k[0], s_nodes, -1) / np.pi
    coarse = oscillatory_sum(vals[::2], float(k[0]), 2 * (k[1] - k[0]),
                             s_nodes, -1) / np.pi
    out = (4.0 * fine - coarse) / 3.0
    if fronts is not None:
        corrected = inverse_transform_tail_corrected(
            SpectralGrid(k, vals), s_nodes, fronts)
        out = out + (corrected - fine)
    return out


def _unitary_pair(values: np.ndarray, k0: float, dk: float):
    """Exactly invertible discrete transform pair between the k grid and its
    offset dual s grid (plain Riemann weights, chirp-z evaluation)."""
    n = values.size
    hs = np.pi / (n * dk)
    sg = (np.arange(n) - n // 2 + 0.5) * hs

    def to_s(vals):
        yw = vals * np.exp(-2j * sg[0] * (k0 + dk * np.arange(n)))
        s = czt(yw, n, w=np.exp(-2j * hs * dk), a=1.0 + 0j)
        return s * np.exp(-2j * hs * k0 * np.arange(n)) * (dk / np.pi)

    def to_k(gvals):
        yw = gvals * np.exp(2j * k0 * (sg[0] + hs * np.arange(n)))
        s = czt(yw, n, w=np.exp(2j * dk * hs), a=1.0 + 0j)
        return s * np.exp(2j * dk * sg[0] * np.arange(n)) * hs

    return sg, to_s, to_k


def hardy_project(f: SpectralGrid) -> SpectralGrid:
    """Riesz projection onto the Hardy space of the upper half-plane:
    transform to s, keep s > 0, transform back.

    The discrete pair is exactly unitary on the grid, so the projection is
    exactly linear, idempotent, and norm-nonincreasing.
    """
    sg, to_s, to_k = _unitary_pair(f.values, float(f.k[0]), f.dk)
    g = to_s(f.values)
    g[sg < 0] = 0.0
    return SpectralGrid(f.k, to_k(g))


def hilbert_exp(u: np.ndarray, k: np.ndarray, pad_factor: float = 1.5) -> np.ndarray:
    """exp(C+ u) for real u on a uniform grid: boundary values of the outer
    function with modulus e^{u/2}.

    The discrete (circular) Hardy projection loses the open-line 1/k tail of
    the conjugate function, an error growing linearly towards the window
    edges; u is therefore extended by its 1/t^2 asymptotic model onto a
    wider grid and the projection sliced back to the data window.
    """
    k = np.asarray(k, dtype=float)
    u = np.asarray(u, dtype=float)
    if pad_factor > 0:
        dk = k[1] - k[0]
        kmax = max(abs(k[0]), abs(k[-1]))
        npad = int(np.ceil(pad_factor * k.size))
        steps = np.arange(1, npad + 1)
        t_r = k[-1] + dk * steps
        t_l = k[0] - dk * steps
        u_r = u[-1] * kmax ** 2 / np.maximum(np.abs(t_r), kmax) ** 2
        u_l = u[0] * kmax ** 2 / np.maximum(np.abs(t_l), kmax) ** 2
        u_ext = np.concatenate([u_l[::-1], u, u_r])
        k_ext = np.concatenate([t_l[::-1], k, t_r])
        grid = SpectralGrid(k_ext, u_ext.astype(complex))
        proj = hardy_project(grid).values[npad:npad + k.size]
    else:
        proj = hardy_project(SpectralGrid(k, u.astype(complex))).values
    return np.exp(proj)


def support_hull(f: SpectralGrid, threshold: float = SUPPORT_THRESHOLD,
                 off_axis=None) -> SupportEstimate:
    """Support of the inverse transform: the hull of {s : |g(s)| > thr*max}.

    With an off-axis evaluator, the exponential types along +-i(infinity) are
    estimated by a log-linear fit of |f(+-iy)| over y in [2, 6]/gamma-scale.
    """
    s, g = inverse_transform(f, tail_tol=np.inf)
    mag = np.abs(g)
    peak = mag.max()
    if peak == 0.0:
        raise ClassError("support_hull: profile is identically zero")
    idx = np.nonzero(mag > threshold * peak)[0]
    if idx.size == 0:
        raise ClassError("support_hull: no samples above threshold")
    tau_plus = tau_minus = None
    if off_axis is not None:
        span = max(abs(s[idx[0]]), abs(s[idx[-1]]), 1.0 / abs(f.k[-1]))
        y = np.linspace(2.0 / span, 6.0 / span, 9)
        for sgn, name in ((+1, "plus"), (-1, "minus")):
            vals = np.abs(off_axis(1j * sgn * y))
            good = vals > 0
            if good.sum() >= 2:
                slope = np.polyfit(y[good], np.log(vals[good]), 1)[0]
                slope = max(slope, 0.0)
                if name == "plus":
                    tau_plus = float(slope)
                else:
                    tau_minus = float(slope)
    return SupportEstimate(float(s[idx[0]]), float(s[idx[-1]]),
                           tau_plus, tau_minus)


def write_scattering(path, grid_a: SpectralGrid, grid_b: SpectralGrid) -> None:
    if grid_a.nk != grid_b.nk or np.max(np.abs(grid_a.k - grid_b.k)) > 1e-12:
        raise ParameterError("a and b grids must coincide")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# dirac-scattering v1 nk={grid_a.nk}\n")
        for kv, av, bv in zip(grid_a.k, grid_a.values, grid_b.values):
            fh.write(f"{kv:.17g} {av.real:.17g} {av.imag:.17g} "
                     f"{bv.real:.17g} {bv.imag:.17g}\n")


def read_scattering(path):
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("# dirac-scattering v1"):
            raise ClassError(f"{path}: not a dirac-scattering v1 file")
        nk = int(dict(tok.split("=") for tok in header.split()[3:])["nk"])
        rows = np.loadtxt(fh, dtype=float, ndmin=2)
    if rows.shape != (nk, 5):
        raise ClassError(f"{path}: expected {nk} rows of 'k re_a im_a re_b im_b'")
    k = rows[:, 0]
    return (SpectralGrid(k, rows[:, 1] + 1j * rows[:, 2]),
            SpectralGrid(k, rows[:, 3] + 1j * rows[:, 4]))
