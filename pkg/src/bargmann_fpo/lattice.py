"""
Tight-binding box with one semi-infinite lead.

Sites r_i = i a, i = 1..N, carry the potential U_i = V_cut(r_i); site 0 is
absent (Dirichlet wall).  Eliminating the lead sites N+1, N+2, ... leaves
the energy-dependent, complex-symmetric matrix

    H_eff(E) = tridiag(-t, U_i + 2t, -t) - t e^{i k(E) a} |N><N|

with t = 1/a^2 and E = 2t (1 - cos ka).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg

from .continuum import THRESHOLD_K, TruncatedPotential
from .errors import DefectiveSpectrumWarning, MisalignedRadius, SingularSystem

ALIGN_TOLERANCE = 1e-6
BIORTHOGONALITY_TOLERANCE = 1e-8


@dataclass(frozen=True, eq=False)
class LatticeModel:
    a: float
    U: np.ndarray
    R_cut: float

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("lattice constant must be positive")
        U = np.asarray(self.U, dtype=float)
        if U.ndim != 1 or U.size == 0:
            raise ValueError("U must be a non-empty 1-D array")
        U.setflags(write=False)
        object.__setattr__(self, "U", U)
        if self.N * self.a < self.R_cut * (1 - ALIGN_TOLERANCE):
            raise ValueError("the lead must attach at or beyond R_cut")

    @property
    def N(self) -> int:
        return self.U.size

    @property
    def t(self) -> float:
        return 1.0 / self.a**2

    @property
    def R(self) -> float:
        return self.N * self.a

    @property
    def r(self) -> np.ndarray:
        return self.a * np.arange(1, self.N + 1)

    @property
    def band_top(self) -> float:
        return 4.0 * self.t


def discretize(tp: TruncatedPotential, a: float, R: Optional[float] = None) -> LatticeModel:
    """Sample ``tp`` on the lattice r_i = i a, i = 1..round(R/a)."""
    R = tp.R_cut if R is None else float(R)
    if not a > 0:
        raise ValueError("lattice constant must be positive")
    if R < tp.R_cut:
        raise ValueError("R must be at least R_cut")
    n = R / a
    N = int(round(n))
    if N < 1 or abs(n - N) > ALIGN_TOLERANCE * max(1.0, n):
        raise MisalignedRadius(f"R = {R} is not a multiple of a = {a}")
    r = a * np.arange(1, N + 1)
    inside = r < tp.R_cut * (1 - 1e-12)
    U = np.zeros(N)
    if inside.any() and not tp.potential.is_free:
        U[inside] = tp.potential(r[inside])
    return LatticeModel(a, U, tp.R_cut)


def dispersion_k(E, model: LatticeModel):
    """Lattice momentum with E = 2t(1 - cos ka).

    Real and in (0, pi/a) inside the band; Im k <= 0 for Im E <= 0.
    """
    E = np.asarray(E, dtype=complex)
    k = np.arccos(1 - E * model.a**2 / 2) / model.a
    # real E outside the band is the edge of the lower half-plane
    flip = (E.imag == 0) & (k.imag > 0)
    k = np.where(flip, np.conj(k), k)
    return complex(k) if k.ndim == 0 else k


def corner_term(E, model: LatticeModel):
    """Lead self-energy on site N: -t e^{ika}."""
    return -model.t * np.exp(1j * dispersion_k(E, model) * model.a)


@dataclass(frozen=True)
class EffectiveHamiltonianView:
    diagonal: np.ndarray
    off_diagonal: float
    E: complex

    def dense(self) -> np.ndarray:
        n = self.diagonal.size
        H = np.diag(self.diagonal.astype(complex))
        idx = np.arange(n - 1)
        H[idx, idx + 1] = H[idx + 1, idx] = self.off_diagonal
        return H

    def banded(self, E: complex) -> np.ndarray:
        """(E - H_eff) in the (1, 1) banded layout used by scipy."""
        n = self.diagonal.size
        ab = np.zeros((3, n), dtype=complex)
        ab[0, 1:] = -self.off_diagonal
        ab[1] = E - self.diagonal
        ab[2, :-1] = -self.off_diagonal
        return ab


def effective_hamiltonian(model: LatticeModel, E: complex) -> EffectiveHamiltonianView:
    d = (model.U + 2 * model.t).astype(complex)
    d[-1] += corner_term(E, model)
    return EffectiveHamiltonianView(d, -model.t, complex(E))


@dataclass(frozen=True)
class ScatteringResult:
    k: float
    E: float
    S: complex
    delta: float


def _check_band(E, model):
    E = np.asarray(E, dtype=float)
    if np.any((E <= 0) | (E >= model.band_top)):
        raise ValueError("energy must lie strictly inside the band (0, 4t)")
    return E


def solve_scattering(model: LatticeModel, E: float) -> ScatteringResult:
    """Drive the box from the lead at real in-band E and read off S at site N.

    ``delta`` here is the principal value arg(S)/2 in (-pi/2, pi/2];
    use :func:`phase_shift_sweep` for a continuous curve.
    """
    E = float(_check_band(E, model))
    k = float(dispersion_k(E, model).real)
    a, t, rN = model.a, model.t, model.R
    view = effective_hamiltonian(model, E)
    b = np.zeros(model.N, dtype=complex)
    b[-1] = 2j * t * np.exp(-1j * k * rN) * np.sin(k * a)
    try:
        psi = linalg.solve_banded((1, 1), view.banded(E), b, check_finite=False)
    except linalg.LinAlgError as exc:
        raise SingularSystem(f"E - H_eff is singular at E = {E}") from exc
    if not np.all(np.isfinite(psi)):
        raise SingularSystem(f"E - H_eff is singular at E = {E}")
    S = (np.exp(-1j * k * rN) - psi[-1]) * np.exp(-1j * k * rN)
    return ScatteringResult(k, E, complex(S), float(np.angle(S) / 2))


def _regular_tail(model: LatticeModel, E: np.ndarray):
    """psi_N, psi_{N+1} of the solution with psi_0 = 0, psi_1 = 1, and the
    number of sign changes along psi_1..psi_{N+1}."""
    t = model.t
    prev = np.zeros_like(E)
    cur = np.ones_like(E)
    nodes = np.zeros(E.shape, dtype=int)
    for u in model.U:
        nxt = ((u + 2 * t - E) / t) * cur - prev
        nodes += (nxt > 0) != (cur > 0)
        scale = np.maximum(np.abs(nxt), np.abs(cur))
        prev, cur = cur / scale, nxt / scale
    return prev, cur, nodes


def phase_shift_sweep(model: LatticeModel, E) -> np.ndarray:
    """Continuous lattice phase shift at real in-band energies, delta(0+) = 0.

    The regular solution is propagated site by site; its sign changes fix the
    multiple of pi and the lead form psi_i ~ sin(k r_i + delta) fixes the rest,
    so the result is independent of how densely ``E`` is sampled.
    """
    scalar = np.ndim(E) == 0
    E = _check_band(np.atleast_1d(E), model).ravel()
    E_ref = THRESHOLD_K**2
    grid = np.append(E, E_ref)
    k = dispersion_k(grid, model).real
    ka = k * model.a
    psi_n, psi_n1, nodes = _regular_tail(model, grid)
    s = np.sign(psi_n1)
    frac = np.arctan2(s * np.sin(ka) * psi_n1, s * (np.cos(ka) * psi_n1 - psi_n))
    theta = nodes * np.pi + frac
    delta = theta - k * (model.R + model.a)
    delta = delta[:-1] - np.pi * np.round(delta[-1] / np.pi)
    return float(delta[0]) if scalar else delta


def log_determinant(model: LatticeModel, E):
    """(log|Det[E - H_eff(E)]|, arg Det) by the rescaled three-term recurrence."""
    E = np.asarray(E, dtype=complex)
    D, _, log_mag = _determinant(model, E, derivative=False)
    # Det == 0 only by cancellation; log|Det| = -inf marks it unresolved
    with np.errstate(divide="ignore"):
        return log_mag + np.log(np.abs(D)), np.angle(D)


def normalized_determinant(model: LatticeModel, E):
    """Det / |Det|: the phase of the determinant as a complex field."""
    D, _, _ = _determinant(model, np.asarray(E, dtype=complex), derivative=False)
    with np.errstate(invalid="ignore"):
        return D / np.abs(D)


def determinant_newton_step(model: LatticeModel, E):
    """Det/Det' with the exact E-derivative, including that of the lead term."""
    D, dD, _ = _determinant(model, np.asarray(E, dtype=complex), derivative=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        return D / dD


def _determinant(model: LatticeModel, E: np.ndarray, *, derivative: bool):
    t2 = model.t**2
    k = dispersion_k(E, model)
    lead = np.exp(1j * k * model.a)
    D_prev = np.zeros_like(E)
    D_cur = np.ones_like(E)
    P_prev = np.zeros_like(E)
    P_cur = np.zeros_like(E)
    log_mag = np.zeros(E.shape)
    last = model.N - 1
    for i, u in enumerate(model.U):
        d = u + 2 * model.t
        if i == last:
            d = d - model.t * lead
        D_next = (E - d) * D_cur - t2 * D_prev
        if derivative:
            dd = 0.0
            if i == last:
                dk = 1.0 / (2 * model.t * model.a * np.sin(k * model.a))
                dd = -model.t * 1j * model.a * dk * lead
            P_next = (1 - dd) * D_cur + (E - d) * P_cur - t2 * P_prev
        scale = np.maximum(np.abs(D_next), np.abs(D_cur))
        scale = np.where(scale > 0, scale, 1.0)
        log_mag += np.log(scale)
        D_prev, D_cur = D_cur / scale, D_next / scale
        if derivative:
            P_prev, P_cur = P_cur / scale, P_next / scale
    return D_cur, P_cur, log_mag


@dataclass(frozen=True)
class EigenpairSet:
    """Spectrum of H_eff(E) at real E.

    Columns of ``eigenvectors`` satisfy v^T v = 1 (no conjugation).
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    evaluated_at_E: float
    defective: bool = False

    @property
    def widths(self) -> np.ndarray:
        return -2.0 * self.eigenvalues.imag


def bilinear_normalize(v: np.ndarray) -> np.ndarray:
    norm = np.sqrt(np.sum(v * v, axis=0))
    return v / norm


def eigenvalues_at(model: LatticeModel, E: float) -> EigenpairSet:
    E = float(_check_band(E, model))
    H = effective_hamiltonian(model, E).dense()
    w, v = linalg.eig(H, check_finite=False)
    v = bilinear_normalize(v)
    gram = v.T @ v
    off = np.max(np.abs(gram - np.eye(w.size)))
    defective = bool(off > BIORTHOGONALITY_TOLERANCE)
    if defective:
        warnings.warn(f"eigenvectors at E = {E} violate biorthogonality by {off:.2e}; "
                      "close to an exceptional point", DefectiveSpectrumWarning, stacklevel=2)
    order = np.argsort(w.real)
    return EigenpairSet(w[order], v[:, order], E, defective)


def _tridiag_matvec(view: EffectiveHamiltonianView, v: np.ndarray) -> np.ndarray:
    out = view.diagonal * v
    out[:-1] += view.off_diagonal * v[1:]
    out[1:] += view.off_diagonal * v[:-1]
    return out


def eigenpair_near(model: LatticeModel, E: float, shift: complex, v0: Optional[np.ndarray] = None,
                   *, max_iter: int = 50, tol: float = 1e-13):
    """Eigenpair of H_eff(E) nearest ``shift`` by shifted inverse iteration
    followed by (bilinear) Rayleigh-quotient iteration.

    Returns (z, v) with v^T v = 1, or None without convergence.
    """
    view = effective_hamiltonian(model, E)
    n = model.N
    v = np.ones(n, dtype=complex) if v0 is None else np.array(v0, dtype=complex)
    scale = 4 * model.t + np.max(np.abs(model.U))
    sigma = complex(shift)
    for it in range(max_iter):
        try:
            w = linalg.solve_banded((1, 1), view.banded(sigma), v, check_finite=False)
        except linalg.LinAlgError:
            # shift is an eigenvalue to working precision
            sigma += 1e-12 * scale
            continue
        v = w / np.linalg.norm(w)
        Hv = _tridiag_matvec(view, v)
        z = (v @ Hv) / (v @ v)
        if np.linalg.norm(Hv - z * v) < tol * scale:
            return complex(z), v / np.sqrt(v @ v)
        # hold the shift for the first steps so the target eigenvalue is kept
        if it >= 3:
            sigma = z
    return None
