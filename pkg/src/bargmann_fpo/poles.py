"""Pole search on the lattice: determinant zeros, eigenvalue fixed points,
and continuation of pole families across a sweep of cutoff radii."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import linalg

from .continuum import DEFAULT_REGION, PoleEstimate, in_region, validate_region
from .contours import dedupe, zero_crossing_seeds
from .errors import (BranchLoss, GridTooCoarse, NoConvergence, WindowUncovered)
from .lattice import (LatticeModel, bilinear_normalize, determinant_newton_step,
                      effective_hamiltonian, eigenpair_near, log_determinant,
                      normalized_determinant)

log = logging.getLogger(__name__)

DET_TOL = 1e-9
DEDUPE_TOL = 1e-6
OVERLAP_MIN = 0.5
PHYSICAL_THRESHOLD = 0.05
PHYSICAL_RATIO = 0.1
STABILITY_WINDOW = (5.0, 7.0)


def refine_det_roots(model: LatticeModel, seeds, *, tol: float = DET_TOL, max_iter: int = 60):
    """Damped Newton on Det[E - H_eff(E)] for a batch of seeds.

    Returns (E, converged mask).  A step is halved until log|Det| decreases.
    Seeds where Det or its step is lost to cancellation are dropped.
    """
    E = np.array(seeds, dtype=complex)
    logmag, _ = log_determinant(model, E)
    done = np.zeros(E.size, dtype=bool)
    for _ in range(max_iter):
        todo = np.flatnonzero(~done & np.isfinite(logmag))
        if todo.size == 0:
            break
        step = determinant_newton_step(model, E[todo])
        lost = ~np.isfinite(step)
        logmag[todo[lost]] = np.nan
        todo, step = todo[~lost], step[~lost]
        small = np.abs(step) < tol * np.maximum(1.0, np.abs(E[todo]))
        lam = np.ones(todo.size)
        pending = np.arange(todo.size)
        for halving in range(12):
            idx = todo[pending]
            trial = E[idx] - lam[pending] * step[pending]
            lt, _ = log_determinant(model, trial)
            ok = (lt < logmag[idx]) | small[pending] | (halving == 11)
            E[idx[ok]], logmag[idx[ok]] = trial[ok], lt[ok]
            pending = pending[~ok]
            lam[pending] *= 0.5
            if pending.size == 0:
                break
        done[todo[small]] = True
    return E, done


def det_poles(model_builder: Callable[[float], LatticeModel], R_cut: float,
              region=DEFAULT_REGION, grid=(221, 81), *, validate_grid: bool = False,
              extra_seeds: Sequence[complex] = (), tol: float = DET_TOL) -> list[PoleEstimate]:
    """Zeros of Det[E - H_eff(E)] inside ``region`` of the lower-half E-plane.

    ``validate_grid`` repeats the search on a doubled grid and raises
    GridTooCoarse if the pole set changes.
    """
    region = validate_region(region)
    model = model_builder(R_cut)
    poles = _det_poles_on_grid(model, region, grid, extra_seeds, tol)
    if validate_grid:
        fine = _det_poles_on_grid(model, region, (2 * grid[0] - 1, 2 * grid[1] - 1), extra_seeds, tol)
        if len(fine) != len(poles) or any(
                min(abs(p.energy - q.energy) for q in fine) > DEDUPE_TOL * max(1.0, abs(p.energy))
                for p in poles):
            raise GridTooCoarse(f"{len(poles)} poles on grid {grid}, {len(fine)} on the doubled grid")
    return poles


def _det_poles_on_grid(model, region, grid, extra_seeds, tol):
    re_min, re_max, im_min, im_max = region
    n_re, n_im = grid
    x = np.linspace(re_min, re_max, n_re)
    y = np.linspace(im_min, im_max, n_im)
    field_ = normalized_determinant(model, x[None, :] + 1j * y[:, None])
    seeds = np.concatenate([zero_crossing_seeds(x, y, field_), np.asarray(extra_seeds, dtype=complex)])
    if seeds.size == 0:
        return []
    E, ok = refine_det_roots(model, seeds, tol=tol)
    for s in seeds[~ok]:
        log.info("determinant seed E=%s dropped: no convergence", s)
    # poles on the upper rim are artefacts of the lead cut along the real axis
    cand = [e for e in E[ok] if in_region(e, region) and e.imag < 0]
    keep = dedupe(cand, DEDUPE_TOL)
    poles = []
    for i in keep:
        e = complex(cand[i])
        residual = float(abs(determinant_newton_step(model, e)))
        poles.append(PoleEstimate(e, "determinant", residual))
    return sorted(poles, key=lambda p: p.energy.real)


def _overlap(u: np.ndarray, v: np.ndarray) -> float:
    return float(abs(u @ v))


def fixed_point_solve(model: LatticeModel, seed_E: float, target: Optional[complex] = None, *,
                      omega: float = 0.5, tol: float = 1e-9, max_iter: int = 200) -> PoleEstimate:
    """Solve E = Re z(E) for one eigenvalue branch z of H_eff(E).

    The branch starts at the eigenvalue nearest ``target`` if given, else at
    the one whose real part is nearest ``seed_E``, and is followed by the
    unconjugated overlap of eigenvectors.  The damped update is
    E <- E + omega (Re z(E) - E).  The result carries E + i Im z, so
    ``width`` is -2 Im z.
    """
    if not 0 < omega <= 1:
        raise ValueError("omega must lie in (0, 1]")
    E = float(seed_E)
    if not 0 < E < model.band_top:
        raise ValueError("seed energy must lie inside the band")
    if target is None:
        H = effective_hamiltonian(model, E).dense()
        w, v = linalg.eig(H, check_finite=False)
        j = int(np.argmin(np.abs(w.real - E)))
        z, vec = complex(w[j]), bilinear_normalize(v[:, j])
    else:
        found = eigenpair_near(model, E, target)
        if found is None:
            raise NoConvergence(f"no eigenvalue found near {target}")
        z, vec = found
    for it in range(max_iter):
        E_next = E + omega * (z.real - E)
        if not 0 < E_next < model.band_top:
            raise NoConvergence(f"fixed-point iteration left the band at step {it}")
        if abs(E_next - E) < tol * max(1.0, abs(E)):
            return PoleEstimate(complex(E, z.imag), "fixed_point", abs(E_next - E))
        E = E_next
        z, vec = _follow_branch(model, E, z, vec)
    raise NoConvergence(f"fixed-point iteration did not settle in {max_iter} steps (E = {E})")


def _follow_branch(model, E, z, vec):
    found = eigenpair_near(model, E, z, vec)
    if found is not None and _overlap(found[1], vec) >= OVERLAP_MIN:
        return found
    H = effective_hamiltonian(model, E).dense()
    w, v = linalg.eig(H, check_finite=False)
    v = bilinear_normalize(v)
    ov = np.abs(vec @ v)
    j = int(np.argmax(ov))
    if ov[j] < OVERLAP_MIN:
        raise BranchLoss(f"best eigenvector overlap {ov[j]:.3f} at E = {E}")
    return complex(w[j]), v[:, j]


@dataclass
class Family:
    """One continuation path: pole positions at consecutive sweep radii."""

    R: list[float] = field(default_factory=list)
    E: list[complex] = field(default_factory=list)
    classification: str = "unclassified"
    broken_at: Optional[float] = None

    def append(self, R: float, E: complex) -> None:
        self.R.append(R)
        self.E.append(E)

    @property
    def last_step(self) -> Optional[float]:
        return abs(self.E[-1] - self.E[-2]) if len(self.E) > 1 else None

    def path_length(self, lo: float, hi: float) -> float:
        R, E = np.asarray(self.R), np.asarray(self.E)
        sel = (R >= lo - 1e-9) & (R <= hi + 1e-9)
        return float(np.sum(np.abs(np.diff(E[sel]))))

    def spans(self, lo: float, hi: float) -> bool:
        return bool(self.R) and self.R[0] <= lo + 1e-9 and self.R[-1] >= hi - 1e-9


@dataclass(frozen=True)
class LinkBreak:
    family: int
    R: float
    last_E: complex


@dataclass
class TrajectorySet:
    sweep: list[tuple[float, list[PoleEstimate]]]
    families: list[Family]
    breaks: list[LinkBreak]
    method: str

    def physical(self) -> list[Family]:
        return [f for f in self.families if f.classification == "physical"]


def link_families(sweep: list[tuple[float, list[PoleEstimate]]], *,
                  floor: float = 1e-3, factor: float = 3.0) -> tuple[list[Family], list[LinkBreak]]:
    """Greedy nearest-neighbour continuation between consecutive sweep steps.

    A family may move by at most ``factor`` times its previous step (never
    less than ``floor``).  A family with a single point may move by at most
    half the distance to its nearest neighbour at that step.
    """
    families: list[Family] = []
    breaks: list[LinkBreak] = []
    active: list[int] = []
    for R, poles in sweep:
        energies = [p.energy for p in poles]
        limits = []
        for fi in active:
            fam = families[fi]
            step = fam.last_step
            if step is None:
                others = [abs(fam.E[-1] - families[g].E[-1]) for g in active if g != fi]
                limits.append(0.5 * min(others) if others else np.inf)
            else:
                limits.append(max(factor * step, floor))
        pairs = sorted(
            (abs(families[fi].E[-1] - e), n, m)
            for n, fi in enumerate(active) for m, e in enumerate(energies)
        )
        used_f, used_p = set(), set()
        for dist, n, m in pairs:
            if n in used_f or m in used_p or dist > limits[n]:
                continue
            used_f.add(n)
            used_p.add(m)
            families[active[n]].append(R, energies[m])
        next_active = []
        for n, fi in enumerate(active):
            if n in used_f:
                next_active.append(fi)
            else:
                families[fi].broken_at = R
                breaks.append(LinkBreak(fi, R, families[fi].E[-1]))
        for m, e in enumerate(energies):
            if m not in used_p:
                families.append(Family([R], [e]))
                next_active.append(len(families) - 1)
        active = next_active
    return families, breaks


def trace_trajectories(model_builder: Callable[[float], LatticeModel], R_values: Sequence[float], *,
                       method: str = "determinant", region=DEFAULT_REGION, grid=(221, 81),
                       narrow_width: float = 2.0) -> TrajectorySet:
    """Pole sets along a sweep of cutoff radii, linked into families.

    With ``method='fixed_point'`` each determinant pole with width below
    ``narrow_width`` seeds a fixed-point solve; failures are logged and skipped.
    """
    if method not in ("determinant", "fixed_point"):
        raise ValueError(f"unsupported method {method!r}")
    R_values = [float(R) for R in R_values]
    if not R_values:
        raise ValueError("empty sweep")
    sweep = []
    previous: list[complex] = []
    for R in R_values:
        model = model_builder(R)
        poles = det_poles(lambda _r: model, R, region, grid, extra_seeds=previous)
        previous = [p.energy for p in poles]
        if method == "fixed_point":
            poles = _fixed_points_from(model, poles, narrow_width)
        log.info("R_cut=%.4f: %d poles", R, len(poles))
        sweep.append((R, poles))
    families, breaks = link_families(sweep)
    return TrajectorySet(sweep, families, breaks, method)


def _fixed_points_from(model, poles, narrow_width):
    out = []
    for p in poles:
        if p.width >= narrow_width or not 0 < p.energy.real < model.band_top:
            continue
        try:
            out.append(fixed_point_solve(model, p.energy.real, target=p.energy))
        except NoConvergence as exc:
            log.info("fixed point from %s: %s", p.energy, exc)
    keep = dedupe([p.energy for p in out], DEDUPE_TOL)
    return [out[i] for i in keep]


def classify_poles(ts: TrajectorySet, stability_window=STABILITY_WINDOW, *,
                   threshold: float = PHYSICAL_THRESHOLD, ratio: float = PHYSICAL_RATIO) -> TrajectorySet:
    """Label each family physical, cutoff or unclassified in place.

    A family spanning the window is physical when its path length across the
    window is below ``threshold`` and below ``ratio`` times the median path
    length of all spanning families.
    """
    lo, hi = stability_window
    Rs = [R for R, _ in ts.sweep]
    if not Rs or min(Rs) > lo + 1e-9 or max(Rs) < hi - 1e-9:
        raise WindowUncovered(f"sweep {min(Rs, default=None)}..{max(Rs, default=None)} "
                              f"does not cover {stability_window}")
    spanning = [f for f in ts.families if f.spans(lo, hi)]
    lengths = [f.path_length(lo, hi) for f in spanning]
    median = float(np.median(lengths)) if lengths else 0.0
    for f in ts.families:
        f.classification = "unclassified"
    for f, length in zip(spanning, lengths):
        stable = length < threshold and length < ratio * median
        f.classification = "physical" if stable else "cutoff"
    return ts
