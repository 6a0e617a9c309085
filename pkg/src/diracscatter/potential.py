"""Compactly supported potentials: representation, generators, symmetry
transforms, and classification.

A potential is stored as complex samples on a uniform inclusive grid over its
support hull [x0, x0 + gamma].  The canonical class has x0 = 0; shifts and
reflections re-anchor the hull instead of resampling, so transform/inverse
round trips are exact.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ClassError, ParameterError

# relative threshold deciding whether a sample counts as nonzero when the
# support hull is checked; must match the fourier module's support threshold
HULL_TOLERANCE = 1e-6


@dataclass(frozen=True)
class Potential:
    """Complex-valued profile on the uniform grid x_j = x0 + j*gamma/(n-1)."""

    gamma: float
    samples: np.ndarray
    x0: float = 0.0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=complex)
        object.__setattr__(self, "samples", samples)
        if not self.gamma > 0:
            raise ParameterError(f"gamma must be positive, got {self.gamma}")
        if samples.ndim != 1 or samples.size < 2:
            raise ParameterError("need at least 2 samples on a 1-d grid")
        if not np.all(np.isfinite(samples)):
            raise ParameterError("samples must be finite")

    @property
    def n(self) -> int:
        return self.samples.size

    @property
    def x(self) -> np.ndarray:
        return self.x0 + np.linspace(0.0, self.gamma, self.n)

    @property
    def dx(self) -> float:
        return self.gamma / (self.n - 1)

    def l2_norm(self) -> float:
        """Trapezoid L2 norm over the hull."""
        return float(np.sqrt(np.trapezoid(np.abs(self.samples) ** 2, dx=self.dx)))

    def __call__(self, x):
        """Piecewise-linear evaluation; zero outside the hull."""
        x = np.asarray(x, dtype=float)
        re = np.interp(x, self.x, self.samples.real, left=0.0, right=0.0)
        im = np.interp(x, self.x, self.samples.imag, left=0.0, right=0.0)
        return re + 1j * im

    def hull_indices(self, tol: float = HULL_TOLERANCE):
        """Indices of the first and last sample above tol*max|q|."""
        mag = np.abs(self.samples)
        peak = mag.max()
        if peak == 0.0:
            return None
        nz = np.nonzero(mag > tol * peak)[0]
        return int(nz[0]), int(nz[-1])

    def in_canonical_class(self, tol: float = HULL_TOLERANCE) -> bool:
        """True when the support hull is [x0, x0+gamma] within one grid cell
        (and the profile is not identically zero)."""
        idx = self.hull_indices(tol)
        if idx is None:
            return False
        first, last = idx
        return first <= 1 and last >= self.n - 2

    def conjugated(self) -> "Potential":
        return replace(self, samples=np.conj(self.samples))


@dataclass(frozen=True)
class SymmetryFlags:
    even: bool
    odd: bool
    real: bool
    tolerance: float = field(default=1e-8)


def generate(kind: str, gamma: float, n: int, params: dict | None = None,
             seed: int | None = None) -> Potential:
    """Deterministic test-family generator.

    kinds: zero | constant (params: c) | bump (params: amplitude, power)
    | random_bandlimited (params: bands, norm; requires seed).
    """
    if n < 2:
        raise ParameterError(f"n must be >= 2, got {n}")
    if not gamma > 0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    params = dict(params or {})
    x = np.linspace(0.0, gamma, n)
    if kind == "zero":
        samples = np.zeros(n, dtype=complex)
    elif kind == "constant":
        if "c" not in params:
            raise ParameterError("constant generator needs parameter 'c'")
        samples = np.full(n, complex(params["c"]))
    elif kind == "bump":
        amp = complex(params.get("amplitude", 1.0))
        power = int(params.get("power", 2))
        samples = amp * np.sin(np.pi * x / gamma) ** power
    elif kind == "random_bandlimited":
        if seed is None:
            raise ParameterError("random_bandlimited generator needs a seed")
        bands = int(params.get("bands", 6))
        norm = float(params.get("norm", 1.0))
        rng = np.random.default_rng(seed)
        coef = (rng.standard_normal(bands) + 1j * rng.standard_normal(bands))
        coef /= np.arange(1, bands + 1)
        samples = np.zeros(n, dtype=complex)
        for j, cj in enumerate(coef, start=1):
            samples += cj * np.sin(np.pi * j * x / gamma)
        q = Potential(gamma, samples)
        scale = q.l2_norm()
        samples = samples * (norm / scale) if scale > 0 else samples
    else:
        raise ParameterError(f"unknown generator kind {kind!r}")
    return Potential(gamma, samples)


def transform(q: Potential, kind: str, param: float | None = None) -> Potential:
    """Apply one of the five structure-preserving transforms.

    reflect: p(x) = q(-x); conjugate: p = conj(q); phase: p = e^{i a} q;
    shift: p(x) = q(x + s); modulate: p(x) = e^{2 i s x} q(x).
    Shift and reflect re-anchor the hull; samples are never resampled.
    """
    if kind == "reflect":
        return Potential(q.gamma, q.samples[::-1].copy(), x0=-(q.x0 + q.gamma))
    if kind == "conjugate":
        return q.conjugated()
    if kind == "phase":
        if param is None:
            raise ParameterError("phase transform needs a real parameter")
        return replace(q, samples=np.exp(1j * float(param)) * q.samples)
    if kind == "shift":
        if param is None:
            raise ParameterError("shift transform needs a real parameter")
        return replace(q, x0=q.x0 - float(param))
    if kind == "modulate":
        if param is None:
            raise ParameterError("modulate transform needs a real parameter")
        return replace(q, samples=np.exp(2j * float(param) * q.x) * q.samples)
    raise ParameterError(f"unknown transform kind {kind!r}")


def classify_symmetry(q: Potential, tol: float = 1e-8) -> SymmetryFlags:
    """Classify even/odd symmetry about the hull midpoint and realness."""
    peak = np.abs(q.samples).max()
    if peak == 0.0:
        return SymmetryFlags(even=True, odd=False, real=True, tolerance=tol)
    mirrored = q.samples[::-1]
    even = np.max(np.abs(q.samples - mirrored)) <= tol * peak
    odd = np.max(np.abs(q.samples + mirrored)) <= tol * peak
    real = np.max(np.abs(q.samples.imag)) <= tol * peak
    return SymmetryFlags(even=even, odd=odd, real=real, tolerance=tol)


def rho_p(q1: Potential, q2: Potential) -> float:
    """L2 metric between two potentials sampled on the same grid."""
    if q1.n != q2.n or abs(q1.gamma - q2.gamma) > 1e-12 * q1.gamma:
        raise ParameterError("rho_p needs potentials on matching grids")
    if abs(q1.x0 - q2.x0) > 1e-12 * (1.0 + abs(q1.x0)):
        raise ParameterError("rho_p needs potentials with matching hull anchors")
    return float(np.sqrt(np.trapezoid(np.abs(q1.samples - q2.samples) ** 2, dx=q1.dx)))


def write_potential(path, q: Potential) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# dirac-potential v1 gamma={q.gamma:.17g} n={q.n}\n")
        for xv, qv in zip(q.x, q.samples):
            fh.write(f"{xv:.17g} {qv.real:.17g} {qv.imag:.17g}\n")


def read_potential(path) -> Potential:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("# dirac-potential v1"):
            raise ClassError(f"{path}: not a dirac-potential v1 file")
        fields = dict(tok.split("=") for tok in header.split()[3:])
        gamma = float(fields["gamma"])
        n = int(fields["n"])
        rows = np.loadtxt(fh, dtype=float, ndmin=2)
    if rows.shape != (n, 3):
        raise ClassError(f"{path}: expected {n} rows of 'x re im'")
    samples = rows[:, 1] + 1j * rows[:, 2]
    return Potential(gamma, samples, x0=float(rows[0, 0]))
