"""Canonical systems J y' = k h y and their Dirac correspondence.

A potential maps to the Hamiltonian h = r^T r where r solves the k = 0
system J r' + V r = 0, r(0) = I, with the real symmetric V built from
q = -q2 + i q1.  That h has det = 1 and h(0) = I; the inverse direction
differentiates the entries and integrates a rotation angle.  A general
positive Hamiltonian factors uniquely as rho * C^T (h0 o theta) C with
rho = sqrt(det h), theta the rho-clock, and C the Cholesky factor of
h(0)/sqrt(det h(0)); only h0 carries scattering content.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import ClassError, ParameterError
from .fourier import default_k_grid
from .jost import transition_coefficients, reflection_grids
from .potential import Potential

_J = np.array([[0.0, 1.0], [-1.0, 0.0]])


@dataclass(frozen=True)
class Hamiltonian:
    x: np.ndarray
    entries: np.ndarray          # (n, 2, 2) real symmetric positive definite
    normalized: bool = False

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        e = np.asarray(self.entries, dtype=float)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "entries", e)
        if e.shape != (x.size, 2, 2):
            raise ParameterError("entries must have shape (n, 2, 2)")
        if np.max(np.abs(e[:, 0, 1] - e[:, 1, 0])) > 1e-10 * (1 + np.abs(e).max()):
            raise ClassError("Hamiltonian entries must be symmetric")
        dets = e[:, 0, 0] * e[:, 1, 1] - e[:, 0, 1] * e[:, 1, 0]
        if np.any(dets <= 0) or np.any(e[:, 0, 0] <= 0):
            raise ClassError("Hamiltonian must be positive definite at "
                             "every node")
        if self.normalized:
            if np.max(np.abs(dets - 1.0)) > 1e-8:
                raise ClassError("normalized Hamiltonian needs det == 1")
            if np.max(np.abs(e[0] - np.eye(2))) > 1e-10:
                raise ClassError("normalized Hamiltonian needs h(0) == I")

    @property
    def det(self) -> np.ndarray:
        e = self.entries
        return e[:, 0, 0] * e[:, 1, 1] - e[:, 0, 1] * e[:, 1, 0]

    @property
    def p(self) -> np.ndarray:
        return self.entries[:, 0, 0]

    @property
    def q(self) -> np.ndarray:
        return self.entries[:, 0, 1]


@dataclass(frozen=True)
class NormalizationData:
    rho: np.ndarray        # sqrt(det h) on the input grid
    theta: np.ndarray      # rho-clock on the input grid, theta[0] = 0
    cholesky: np.ndarray   # upper triangular, positive diagonal, det 1


def _expm_traceless(omega):
    """exp of a real traceless 2x2 matrix via mu^2 = -det, series form
    (valid for either sign of mu^2 at the small steps used here)."""
    mu2 = omega[0, 0] ** 2 + omega[0, 1] * omega[1, 0]
    if abs(mu2) < 0.25:
        ch = 1.0 + mu2 * (1 / 2 + mu2 * (1 / 24 + mu2 * (1 / 720 + mu2 / 40320)))
        sh = 1.0 + mu2 * (1 / 6 + mu2 * (1 / 120 + mu2 * (1 / 5040 + mu2 / 362880)))
    elif mu2 >= 0:
        mu = np.sqrt(mu2)
        ch, sh = np.cosh(mu), np.sinh(mu) / mu
    else:
        mu = np.sqrt(-mu2)
        ch, sh = np.cos(mu), np.sin(mu) / mu
    return ch * np.eye(2) + sh * omega


def _gauge_matrix(qv: complex) -> np.ndarray:
    """J V_q for q = -q2 + i q1: [[q2, -q1], [-q1, -q2]] (traceless)."""
    q1, q2 = qv.imag, -qv.real
    return np.array([[q2, -q1], [-q1, -q2]])


def hamiltonian_of(q: Potential) -> Hamiltonian:
    """h_q = r^T r with r the k = 0 fundamental solution of the rotated
    Dirac system; det h_q = 1 and h_q(0) = I by construction, and h_q is
    constant outside the support hull.

    The cell integrator is 4th-order Magnus: Omega = h A(mid) +
    (h^3/12) [A', A(mid)] with the exact traceless exponential, substepped
    when |q| h is large.
    """
    x = q.x
    vals = q.samples
    r = np.eye(2)
    entries = np.empty((q.n, 2, 2))
    entries[0] = np.eye(2)
    qmax = float(np.abs(vals).max())
    for i in range(q.n - 1):
        h_cell = x[i + 1] - x[i]
        nsub = max(1, int(np.ceil(qmax * h_cell / 0.01)))
        hs = h_cell / nsub
        slope = (vals[i + 1] - vals[i]) / h_cell
        a1 = _gauge_matrix(slope) - _gauge_matrix(0)
        for j in range(nsub):
            qmid = vals[i] + slope * ((j + 0.5) * hs)
            a0 = _gauge_matrix(qmid)
            omega = hs * a0 + (hs ** 3 / 12.0) * (a1 @ a0 - a0 @ a1)
            r = _expm_traceless(omega) @ r
        entries[i + 1] = r.T @ r
    return Hamiltonian(x=x, entries=entries, normalized=True)


def potential_of(h: Hamiltonian) -> Potential:
    """Inverse of hamiltonian_of for normalized Hamiltonians.

    nu = p'/p and mu = (p q' - p' q)/p by central differences (entries of
    class Hamiltonians are once differentiable, so spectral differentiation
    would ring at the support edges), theta accumulated by compensated
    trapezoid, then q1 = -(mu cos + nu sin)/2, q2 = (nu cos - mu sin)/2.
    """
    if not h.normalized:
        raise ClassError("potential_of needs a normalized Hamiltonian; "
                         "apply normalize first")
    p, qq, x = h.p, h.q, h.x
    if np.any(p <= 0):
        raise ClassError("entry p must stay positive")
    dp = _central_diff(p, x)
    dq = _central_diff(qq, x)
    nu = dp / p
    mu = (p * dq - dp * qq) / p
    theta = _compensated_cumtrapz(mu, x)
    ct, st = np.cos(theta), np.sin(theta)
    q1 = -0.5 * (mu * ct + nu * st)
    q2 = 0.5 * (nu * ct - mu * st)
    samples = -q2 + 1j * q1
    return Potential(gamma=float(x[-1] - x[0]), samples=samples, x0=float(x[0]))


def _central_diff(f: np.ndarray, x: np.ndarray) -> np.ndarray:
    out = np.empty_like(f, dtype=float)
    out[1:-1] = (f[2:] - f[:-2]) / (x[2:] - x[:-2])
    h0 = x[1] - x[0]
    out[0] = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * h0)
    h1 = x[-1] - x[-2]
    out[-1] = (3 * f[-1] - 4 * f[-2] + f[-3]) / (2 * h1)
    return out


def _compensated_cumtrapz(f: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Trapezoid antiderivative with Kahan-compensated accumulation; the
    result feeds cos/sin, so drift would rotate the recovered potential."""
    out = np.empty_like(f, dtype=float)
    out[0] = 0.0
    total, comp = 0.0, 0.0
    for i in range(1, f.size):
        inc = 0.5 * (f[i] + f[i - 1]) * (x[i] - x[i - 1]) - comp
        t = total + inc
        comp = (t - total) - inc
        total = t
        out[i] = total
    return out


def _cholesky_upper(a: np.ndarray) -> np.ndarray:
    """Upper-triangular C with positive diagonal and C^T C = a (2x2 spd)."""
    c11 = np.sqrt(a[0, 0])
    c12 = a[0, 1] / c11
    c22 = np.sqrt(a[1, 1] - c12 ** 2)
    return np.array([[c11, c12], [0.0, c22]])


def normalize(h: Hamiltonian, n: int | None = None):
    """Factor h = rho * C^T (h0 o theta) C.

    rho = sqrt(det h); theta is strictly increasing (checked); h0 is
    returned on a uniform theta grid via monotone cubic resampling, with
    det 1 and h0(0) = I.
    """
    rho = np.sqrt(h.det)
    theta = _compensated_cumtrapz(rho, h.x)
    if np.any(np.diff(theta) <= 0):
        raise ClassError("rho-clock is not strictly increasing on the grid")
    c = _cholesky_upper(h.entries[0] / rho[0])
    c_inv = np.linalg.inv(c)
    h1 = h.entries / rho[:, None, None]
    if n is None:
        n = h.x.size
    tgrid = np.linspace(0.0, theta[-1], n)
    resampled = np.empty((n, 2, 2))
    for i in range(2):
        for j in range(2):
            resampled[:, i, j] = PchipInterpolator(theta, h1[:, i, j])(tgrid)
    h0 = np.einsum("in,snm,mj->sij", c_inv.T, resampled, c_inv)
    h0 = 0.5 * (h0 + np.transpose(h0, (0, 2, 1)))
    dets = h0[:, 0, 0] * h0[:, 1, 1] - h0[:, 0, 1] ** 2
    h0 /= np.sqrt(np.abs(dets))[:, None, None]   # undo resampling det drift
    h0[0] = np.eye(2)
    return (Hamiltonian(x=tgrid, entries=h0, normalized=True),
            NormalizationData(rho=rho, theta=theta, cholesky=c))


def reassemble(h0: Hamiltonian, data: NormalizationData,
               x: np.ndarray) -> np.ndarray:
    """rho(x) C^T h0(theta(x)) C on the original grid (factorization check)."""
    x = np.asarray(x, dtype=float)
    theta_x = np.interp(x, x, data.theta)
    out = np.empty((x.size, 2, 2))
    interp = [[PchipInterpolator(h0.x, h0.entries[:, i, j]) for j in range(2)]
              for i in range(2)]
    c = data.cholesky
    for s, tv in enumerate(theta_x):
        hmat = np.array([[interp[i][j](tv) for j in range(2)] for i in range(2)])
        out[s] = data.rho[s] * c.T @ hmat @ c
    return out


def scattering_of_hamiltonian(h: Hamiltonian, k_grid=None, tol: float = 1e-10):
    """Scattering data of the canonical system through the equivalence:
    normalize, recover the potential of the normalized part, run the
    forward problem.  Returns the complete invariant triple
    (h(0), det profile, scattering grids)."""
    if h.normalized:
        h0, data = h, NormalizationData(
            rho=np.ones(h.x.size), theta=h.x - h.x[0], cholesky=np.eye(2))
    else:
        h0, data = normalize(h)
    q = potential_of(h0)
    if k_grid is None:
        k_grid = default_k_grid(max(q.gamma, 1e-6))
    tc = transition_coefficients(q, k_grid=k_grid, tol=tol)
    r_plus, r_minus = reflection_grids(tc)
    return {
        "h0_at_origin": h.entries[0].copy(),
        "det_profile": h.det,
        "potential": q,
        "transition": tc,
        "r_plus": r_plus,
        "r_minus": r_minus,
    }


def write_hamiltonian(path, h: Hamiltonian) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# canonical-hamiltonian v1 n={h.x.size}\n")
        if h.normalized:
            for xv, e in zip(h.x, h.entries):
                fh.write(f"{xv:.17g} {e[0, 0]:.17g} {e[0, 1]:.17g}\n")
        else:
            for xv, e in zip(h.x, h.entries):
                fh.write(f"{xv:.17g} {e[0, 0]:.17g} {e[0, 1]:.17g} "
                         f"{e[1, 1]:.17g}\n")


def read_hamiltonian(path) -> Hamiltonian:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("# canonical-hamiltonian v1"):
            raise ClassError(f"{path}: not a canonical-hamiltonian v1 file")
        n = int(dict(tok.split("=") for tok in header.split()[3:])["n"])
        rows = np.loadtxt(fh, dtype=float, ndmin=2)
    if rows.shape[0] != n or rows.shape[1] not in (3, 4):
        raise ClassError(f"{path}: expected {n} rows of 3 or 4 columns")
    x = rows[:, 0]
    entries = np.empty((n, 2, 2))
    entries[:, 0, 0] = rows[:, 1]
    entries[:, 0, 1] = entries[:, 1, 0] = rows[:, 2]
    if rows.shape[1] == 3:
        entries[:, 1, 1] = (1.0 + rows[:, 2] ** 2) / rows[:, 1]
        return Hamiltonian(x=x, entries=entries, normalized=True)
    entries[:, 1, 1] = rows[:, 3]
    return Hamiltonian(x=x, entries=entries, normalized=False)
