"""
Continuum scattering on a truncated potential.

Inside the matching radius the regular solution is integrated outward,
psi'' = (V - k^2) psi, from a small offset with the Dirichlet seed
psi = r.  Outside, V = 0 and the solution is a combination of plane waves,
so everything is fixed by the logarithmic derivative gamma = psi'/psi at
R_cut:

    tan(delta_cut) = (k cos kR - gamma sin kR) / (k sin kR + gamma cos kR)
    S_cut          = exp(-2ikR) (gamma + i k) / (gamma - i k) = exp(2i delta_cut)

S_cut is the ratio in psi ~ exp(-ikr) - S exp(ikr), so S_cut = 1 for V = 0.

The S-matrix poles are the roots of gamma = i k.  Root finding works on
g(k) = psi'(R) - i k psi(R), which has the same zeros but no poles where
psi(R) has a node.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp

from .contours import dedupe, zero_crossing_seeds
from .errors import EmptyRegion, IntegratorFailure, NodeAtMatching
from .susy import AnalyticPotential

log = logging.getLogger(__name__)

ORIGIN_OFFSET = 1e-6
RTOL = 1e-10
ATOL = 1e-14
# reference momentum fixing the multiple of pi in delta_cut
THRESHOLD_K = 1e-4
# |psi| max(k, 1) / |psi'| below this counts as a node at R_cut
NODE_TOLERANCE = 1e-8
CANCELLATION_FLOOR = 1e-10
# (Re E min, Re E max, Im E min, Im E max)
DEFAULT_REGION = (-10.0, 100.0, -40.0, 0.0)


@dataclass(frozen=True)
class TruncatedPotential:
    potential: AnalyticPotential
    R_cut: float

    def __post_init__(self):
        if not self.R_cut > ORIGIN_OFFSET:
            raise ValueError("R_cut must be positive")

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = np.where(r < self.R_cut, self.potential(np.minimum(r, self.R_cut)), 0.0)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class LogDerivative:
    gamma: complex
    k: complex
    R_cut: float


@dataclass
class PoleEstimate:
    """A complex-energy pole.

    For fixed-point solutions ``energy`` is ``E_lambda + i Im z_lambda``, so
    ``width`` gives the fixed-point width.
    """

    energy: complex
    method: str
    residual: float
    momentum: Optional[complex] = None
    classification: str = "unclassified"

    @property
    def width(self) -> float:
        return -2.0 * self.energy.imag


def resonance_sheet_momentum(E):
    """k = sqrt(E) with Re k >= 0 and Im k <= 0 for Im E <= 0."""
    E = np.asarray(E, dtype=complex)
    k = np.sqrt(E)
    # the negative real E axis belongs to the lower half-plane here
    flip = (E.imag == 0) & (k.imag > 0)
    k = np.where(flip, np.conj(k), k)
    return k


def _integrate(tp: TruncatedPotential, k, *, sensitivity: bool = False, rtol: float = RTOL):
    """Regular solution at R_cut for every momentum in ``k`` at once.

    Returns psi(R), psi'(R) and, with ``sensitivity``, their k-derivatives.
    """
    k = np.atleast_1d(np.asarray(k, dtype=complex))
    m = k.size
    k2 = k * k
    pot = tp.potential
    free = pot.is_free
    n_blocks = 4 if sensitivity else 2
    y0 = np.zeros(n_blocks * m, dtype=complex)
    y0[:m] = ORIGIN_OFFSET
    y0[m:2 * m] = 1.0

    def rhs(r, y):
        q = (0.0 if free else pot(r)) - k2
        psi, dpsi = y[:m], y[m:2 * m]
        if not sensitivity:
            return np.concatenate([dpsi, q * psi])
        pk, dpk = y[2 * m:3 * m], y[3 * m:]
        return np.concatenate([dpsi, q * psi, dpk, q * pk - 2 * k * psi])

    # V_cut equals the untruncated V on the open interval, so integrate the
    # latter; stages landing exactly on R_cut must not see the cut
    sol = solve_ivp(rhs, (ORIGIN_OFFSET, tp.R_cut), y0, method="DOP853",
                    rtol=rtol, atol=ATOL)
    if not sol.success:
        raise IntegratorFailure(sol.message)
    y = sol.y[:, -1]
    return tuple(y[b * m:(b + 1) * m] for b in range(n_blocks))


def _unpack(k, *arrays):
    if np.ndim(k) == 0:
        return tuple(complex(a[0]) for a in arrays)
    shape = np.shape(k)
    return tuple(a.reshape(shape) for a in arrays)


def integrate_log_derivative(tp: TruncatedPotential, k, *, rtol: float = RTOL) -> LogDerivative:
    """gamma = psi'(R_cut)/psi(R_cut); ``k`` may be complex and/or an array."""
    if np.any(np.asarray(k) == 0):
        raise ValueError("k must be nonzero")
    psi, dpsi = _integrate(tp, np.ravel(k), rtol=rtol)
    kk = np.abs(np.ravel(k))
    if np.any(np.abs(psi) * np.maximum(kk, 1.0) < NODE_TOLERANCE * np.abs(dpsi)):
        raise NodeAtMatching("psi(R_cut) vanishes; perturb k")
    gamma, = _unpack(k, dpsi / psi)
    return LogDerivative(gamma, k if np.ndim(k) else complex(k), tp.R_cut)


def _phase_ratio(tp, k):
    k = np.atleast_1d(np.asarray(k, dtype=float))
    if np.any(k <= 0):
        raise ValueError("k must be positive")
    psi, dpsi = _integrate(tp, k)
    return k, psi, dpsi


def _pruefer_angle(tp, k, rtol):
    """theta(R_cut) with psi = A sin(theta)/k, psi' = A cos(theta), continuous in r."""
    pot = tp.potential

    def rhs(r, th):
        v = 0.0 if pot.is_free else pot(r)
        return k - (v / k) * np.sin(th) ** 2

    sol = solve_ivp(rhs, (ORIGIN_OFFSET, tp.R_cut), k * ORIGIN_OFFSET, method="DOP853",
                    rtol=rtol, atol=ATOL)
    if not sol.success:
        raise IntegratorFailure(sol.message)
    return sol.y[:, -1]


def cutoff_phase_shift(tp: TruncatedPotential, k, *, rtol: float = RTOL):
    """delta_cut(k) = theta(R_cut) - k R_cut, with theta the Pruefer angle.

    Outside R_cut, psi is proportional to sin(kr + delta_cut), so the angle
    accumulated from the origin is continuous in k without any sampling.
    The multiple of pi is pinned so that delta_cut(0+) = 0.
    """
    scalar = np.ndim(k) == 0
    ks = np.atleast_1d(np.asarray(k, dtype=float))
    if np.any(ks <= 0):
        raise ValueError("k must be positive")
    flat = np.append(ks.ravel(), THRESHOLD_K)
    delta = _pruefer_angle(tp, flat, rtol) - flat * tp.R_cut
    delta = delta[:-1] - np.pi * np.round(delta[-1] / np.pi)
    return float(delta[0]) if scalar else delta.reshape(ks.shape)


def s_matrix_cut(tp: TruncatedPotential, k, *, rtol: float = RTOL):
    """S_cut = exp(-2ikR) (gamma + ik)/(gamma - ik), written node-free."""
    scalar = np.ndim(k) == 0
    ks, psi, dpsi = _phase_ratio(tp, np.ravel(k))
    s = np.exp(-2j * ks * tp.R_cut) * (dpsi + 1j * ks * psi) / (dpsi - 1j * ks * psi)
    return complex(s[0]) if scalar else s.reshape(np.shape(k))


def matching_function(tp: TruncatedPotential, k, *, rtol: float = RTOL):
    """g(k) = psi'(R) - i k psi(R) for the regular solution seeded with psi = r."""
    psi, dpsi = _integrate(tp, np.ravel(k), rtol=rtol)
    kk = np.ravel(np.asarray(k, dtype=complex))
    g, = _unpack(k, dpsi - 1j * kk * psi)
    return g


def _newton(tp, k0, *, tol, max_iter=60, rtol=RTOL, step_tol=1e-9, k_max=np.inf):
    """Damped Newton on g for a batch of starting momenta.

    Converged means |gamma - ik| < tol and a Newton step below
    step_tol * max(1, |k|); deep in the lower half-plane |gamma - ik| alone
    is small everywhere.  Iterates with |k| > k_max, or where g is lost to
    cancellation, are abandoned.
    Returns (k, |gamma - ik|, converged mask).
    """
    k = np.array(k0, dtype=complex)

    def evaluate(kv):
        psi, dpsi, pk, dpk = _integrate(tp, kv, sensitivity=True, rtol=rtol)
        g = dpsi - 1j * kv * psi
        dg = dpk - 1j * psi - 1j * kv * pk
        res = np.abs(g) / np.abs(psi)
        # g is cancellation noise once dg sinks to roundoff of its terms
        scale = np.abs(dpk) + np.abs(psi) + np.abs(kv * pk)
        res[np.abs(dg) < CANCELLATION_FLOOR * scale] = np.nan
        return g, dg, res

    g, dg, res = evaluate(k)
    converged = np.zeros(k.size, dtype=bool)
    for _ in range(max_iter):
        todo = np.flatnonzero(~converged & np.isfinite(res))
        if todo.size == 0:
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            step = g[todo] / dg[todo]
        settled = (np.abs(step) < step_tol * np.maximum(1.0, np.abs(k[todo]))) & (res[todo] < tol)
        converged[todo[settled]] = True
        lost = ~settled & ~np.isfinite(step)
        res[todo[lost]] = np.nan
        keep = ~settled & ~lost
        todo, step = todo[keep], step[keep]
        lam = np.ones(todo.size)
        pending = np.arange(todo.size)
        # halve the step where |g| fails to decrease or |k| exceeds k_max
        for halving in range(12):
            idx = todo[pending]
            kt = k[idx] - lam[pending] * step[pending]
            inside = np.flatnonzero(np.abs(kt) <= k_max)
            ok = np.zeros(idx.size, dtype=bool)
            if inside.size:
                gt, dgt, rt = evaluate(kt[inside])
                better = (np.abs(gt) < np.abs(g[idx[inside]])) | (halving == 11)
                sel = inside[better]
                k[idx[sel]], g[idx[sel]], dg[idx[sel]], res[idx[sel]] = (
                    kt[sel], gt[better], dgt[better], rt[better])
                ok[sel] = True
            if halving == 11:
                res[idx[~ok]] = np.nan
            pending = pending[~ok]
            lam[pending] *= 0.5
            if pending.size == 0:
                break
    return k, res, converged


def refine_transcendental_root(tp: TruncatedPotential, k0: complex, *, tol: float = 1e-8,
                               rtol: float = RTOL) -> Optional[PoleEstimate]:
    """Newton-refine one root of gamma = ik in the k-plane (any quadrant)."""
    k, res, ok = _newton(tp, np.array([k0]), tol=tol, rtol=rtol)
    if not ok[0]:
        log.info("transcendental Newton did not converge from k=%s", k0)
        return None
    return PoleEstimate(complex(k[0] ** 2), "transcendental", float(res[0]), complex(k[0]))


def validate_region(region) -> tuple[float, float, float, float]:
    re_min, re_max, im_min, im_max = map(float, region)
    if not (re_max > re_min and im_max > im_min):
        raise EmptyRegion(f"region {region} has no interior")
    if im_max > 0:
        raise EmptyRegion("search region must lie in the lower half E-plane (Im E <= 0)")
    return re_min, re_max, im_min, im_max


def in_region(E, region, slack: float = 0.0) -> bool:
    re_min, re_max, im_min, im_max = region
    return (re_min - slack <= E.real <= re_max + slack) and (im_min - slack <= E.imag <= im_max + slack)


def find_transcendental_poles(tp: TruncatedPotential, region=DEFAULT_REGION, grid=(221, 81), *,
                              tol: float = 1e-8, dedupe_tol: float = 1e-6,
                              rtol: float = RTOL) -> list[PoleEstimate]:
    """Roots of gamma(k) = ik inside a rectangle of the lower-half E-plane."""
    region = validate_region(region)
    re_min, re_max, im_min, im_max = region
    n_re, n_im = grid
    x = np.linspace(re_min, re_max, n_re)
    y = np.linspace(im_min, im_max, n_im)
    E = x[None, :] + 1j * y[:, None]
    k = resonance_sheet_momentum(E)
    psi, dpsi = _integrate(tp, k.ravel(), rtol=rtol)
    g = (dpsi - 1j * k.ravel() * psi).reshape(E.shape)
    seeds = zero_crossing_seeds(x, y, g)
    if seeds.size == 0:
        return []
    k_max = 1.5 * np.max(np.abs(k))
    kr, res, ok = _newton(tp, resonance_sheet_momentum(seeds), tol=tol, rtol=rtol, k_max=k_max)
    for s in seeds[~ok]:
        log.info("transcendental seed E=%s dropped: no convergence", s)
    poles = [
        PoleEstimate(complex(kk * kk), "transcendental", float(rr), complex(kk))
        for kk, rr in zip(kr[ok], res[ok])
        if kk.real > 0 and in_region(kk * kk, region)
    ]
    keep = dedupe([p.energy for p in poles], dedupe_tol)
    return sorted((poles[i] for i in keep), key=lambda p: p.energy.real)
