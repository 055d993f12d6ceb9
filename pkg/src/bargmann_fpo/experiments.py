"""Named experiments, INI configuration and artifact emission."""

from __future__ import annotations

import configparser
import csv
import json
import logging
import platform
import time
from dataclasses import asdict, dataclass, field, replace
from importlib import metadata
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import __version__, continuum, lattice, poles
from .continuum import PoleEstimate, TruncatedPotential
from .errors import BargmannFPOError, ConfigError, NoConvergence
from .susy import DarbouxChainSpec, exact_phase_shift, potential_from_spec

log = logging.getLogger(__name__)

TASKS = ("potential", "phase_shift", "poles", "fixed_point", "trajectories", "compare")
METHODS = ("transcendental", "determinant", "fixed_point")

ONE_RES = {"a1": -0.1, "a2": -2.0, "b1": 1.0, "b2": 2.0}
TWO_RES = {"a1": -0.1, "a2": -2.0, "a3": -0.08, "a4": -3.0,
           "b1": 0.2, "b2": 0.1, "b3": 0.08, "b4": 0.05}
# (Re E min, Re E max, Im E min, Im E max) wide enough for the whole cutoff chain
COMPARE_REGION = (-10.0, 110.0, -40.0, 0.0)


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    task: str
    params: dict
    R_cut: float = 5.0
    a: float = 0.01
    region: tuple = COMPARE_REGION
    grid: tuple = (221, 81)
    methods: tuple = METHODS
    sweep: tuple = (0.5, 7.0, 0.01)
    trajectory_method: str = "determinant"
    energy_max: str = "band"
    n_energies: int = 4001
    out_dir: str = "out"

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}; choose from {', '.join(TASKS)}")
        try:
            self.spec
        except BargmannFPOError as exc:
            raise ConfigError(f"invalid potential parameters: {exc}") from exc
        if not self.a > 0:
            raise ConfigError("lattice constant a must be positive")
        if not self.R_cut > 0:
            raise ConfigError("R_cut must be positive")
        if abs(self.R_cut / self.a - round(self.R_cut / self.a)) > 1e-6 * self.R_cut / self.a:
            raise ConfigError(f"R_cut = {self.R_cut} is not a multiple of a = {self.a}")
        try:
            continuum.validate_region(self.region)
        except BargmannFPOError as exc:
            raise ConfigError(str(exc)) from exc
        if len(self.grid) != 2 or min(self.grid) < 2:
            raise ConfigError(f"grid must be two integers >= 2, got {self.grid}")
        unknown = set(self.methods) - set(METHODS)
        if unknown or not self.methods:
            raise ConfigError(f"unknown methods {sorted(unknown)}; choose from {', '.join(METHODS)}")
        start, stop, step = self.sweep
        if not (0 < start <= stop and step > 0):
            raise ConfigError(f"sweep must satisfy 0 < start <= stop and step > 0, got {self.sweep}")
        if self.trajectory_method not in ("determinant", "fixed_point"):
            raise ConfigError("trajectory method must be determinant or fixed_point")
        if self.energy_max not in ("band", "mid_band"):
            try:
                float(self.energy_max)
            except ValueError:
                raise ConfigError("energy_max must be 'band', 'mid_band' or a number") from None
        if self.n_energies < 2:
            raise ConfigError("n_energies must be at least 2")

    @property
    def spec(self) -> DarbouxChainSpec:
        return DarbouxChainSpec.from_mapping(self.params)

    @property
    def R_values(self) -> np.ndarray:
        start, stop, step = self.sweep
        n = int(round((stop - start) / step))
        return np.round(start + step * np.arange(n + 1), 10)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw) if kw else self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["region"], d["grid"], d["sweep"] = list(self.region), list(self.grid), list(self.sweep)
        d["methods"] = list(self.methods)
        return d


PRESETS = {
    "fig2": ExperimentConfig("fig2", "phase_shift", ONE_RES),
    "fig3": ExperimentConfig("fig3", "poles", ONE_RES),
    "fig4": ExperimentConfig("fig4", "trajectories", ONE_RES, trajectory_method="fixed_point"),
    "fig5": ExperimentConfig("fig5", "trajectories", {**ONE_RES, "a1": -0.2},
                             trajectory_method="fixed_point"),
    "fig6": ExperimentConfig("fig6", "trajectories", ONE_RES),
    "fig7": ExperimentConfig("fig7", "poles", TWO_RES),
    "fig8": ExperimentConfig("fig8", "trajectories", TWO_RES, trajectory_method="fixed_point"),
    "fig9": ExperimentConfig("fig9", "trajectories", {**TWO_RES, "b2": 0.14}),
}


def _floats(text: str, n: int, key: str) -> tuple:
    try:
        vals = tuple(float(x) for x in text.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"{key}: expected {n} numbers, got {text!r}") from None
    if len(vals) != n:
        raise ConfigError(f"{key}: expected {n} numbers, got {len(vals)}")
    return vals


def load_config(path) -> ExperimentConfig:
    """Read an INI file.

    Sections: [experiment] name, task, preset; [potential] a1.., b1..;
    [continuum] r_cut; [lattice] a; [search] region, grid, methods;
    [sweep] start, stop, step, method; [phase_shift] energy_max, n;
    [output] dir.  Keys absent from the file come from ``preset`` if given.
    """
    parser = configparser.ConfigParser()
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_parser(parser)


def config_from_text(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    return config_from_parser(parser)


def config_from_parser(parser: configparser.ConfigParser) -> ExperimentConfig:
    get = lambda sec, key: parser.get(sec, key, fallback=None)
    preset = get("experiment", "preset")
    if preset is not None and preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
    base = PRESETS.get(preset)
    params = dict(base.params) if base else {}
    if parser.has_section("potential"):
        try:
            params = {k: float(v) for k, v in parser.items("potential")}
        except ValueError as exc:
            raise ConfigError(f"[potential]: {exc}") from exc
    if not params:
        raise ConfigError("no [potential] section and no preset")
    kw = {}
    for key, sec, opt, conv in [
        ("R_cut", "continuum", "r_cut", float),
        ("a", "lattice", "a", float),
        ("trajectory_method", "sweep", "method", str),
        ("energy_max", "phase_shift", "energy_max", str),
        ("n_energies", "phase_shift", "n", int),
        ("out_dir", "output", "dir", str),
    ]:
        val = get(sec, opt)
        if val is not None:
            try:
                kw[key] = conv(val)
            except ValueError:
                raise ConfigError(f"[{sec}] {opt}: cannot parse {val!r}") from None
    if get("search", "region") is not None:
        kw["region"] = _floats(get("search", "region"), 4, "region")
    if get("search", "grid") is not None:
        grid = _floats(get("search", "grid"), 2, "grid")
        if any(v != int(v) for v in grid):
            raise ConfigError(f"grid: expected integers, got {get('search', 'grid')!r}")
        kw["grid"] = tuple(int(v) for v in grid)
    if get("search", "methods") is not None:
        kw["methods"] = tuple(m.strip() for m in get("search", "methods").split(",") if m.strip())
    if parser.has_section("sweep"):
        cur = base.sweep if base else ExperimentConfig.sweep
        text = " ".join(get("sweep", k) or str(v) for k, v in zip(("start", "stop", "step"), cur))
        kw["sweep"] = _floats(text, 3, "sweep")
    name = get("experiment", "name") or (base.name if base else "custom")
    task = get("experiment", "task") or (base.task if base else None)
    if task is None:
        raise ConfigError("[experiment] task is required without a preset")
    fields = {**(base.to_dict() if base else {}), **kw, "name": name, "task": task, "params": params}
    fields = {k: tuple(v) if isinstance(v, list) else v for k, v in fields.items()}
    return ExperimentConfig(**fields)


@dataclass(frozen=True)
class PairComparison:
    method_a: str
    method_b: str
    energy_a: complex
    energy_b: complex

    @property
    def relative(self) -> float:
        return abs(self.energy_a - self.energy_b) / abs(self.energy_a)

    @property
    def position_relative(self) -> float:
        return abs(self.energy_a.real - self.energy_b.real) / abs(self.energy_a.real)

    @property
    def width_relative(self) -> float:
        wa = -2 * self.energy_a.imag
        return abs(wa + 2 * self.energy_b.imag) / abs(wa)


@dataclass
class CompareReport:
    pairs: list[PairComparison] = field(default_factory=list)
    unmatched: list[tuple[str, complex]] = field(default_factory=list)

    def max_relative(self, method_b: Optional[str] = None) -> float:
        vals = [p.relative for p in self.pairs if method_b in (None, p.method_b)]
        return max(vals, default=0.0)

    def rows(self):
        for p in self.pairs:
            yield [p.method_a, p.method_b, p.energy_a.real, p.energy_a.imag, p.energy_b.real,
                   p.energy_b.imag, p.relative, p.position_relative, p.width_relative]
        for method, e in self.unmatched:
            yield [method, "", e.real, e.imag, "", "", "", "", ""]


REPORT_HEADER = ["method_a", "method_b", "re_a", "im_a", "re_b", "im_b",
                 "relative", "position_relative", "width_relative"]


def compare_report(pole_sets: Sequence[tuple[str, Sequence[PoleEstimate]]], *,
                   gate: float = 0.25) -> CompareReport:
    """Match every method against the first one, one-to-one.

    Matching minimises the total E-plane distance (the Re E distance for
    ``fixed_point``); pairs farther apart than ``gate`` (relative) are
    reported as unmatched on both sides.
    """
    if len(pole_sets) < 2:
        raise ValueError("need at least two methods to compare")
    ref_name, ref = pole_sets[0]
    ref_E = np.array([p.energy for p in ref], dtype=complex)
    report = CompareReport()
    seen_ref = set()
    for name, other in pole_sets[1:]:
        oth_E = np.array([p.energy for p in other], dtype=complex)
        matched_o = set()
        if ref_E.size and oth_E.size:
            delta = ref_E[:, None] - oth_E[None, :]
            # fixed points carry no reliable width, so they are matched on Re E
            cost = np.abs(delta.real) if name == "fixed_point" else np.abs(delta)
            scale = np.abs(ref_E.real) if name == "fixed_point" else np.abs(ref_E)
            rows, cols = linear_sum_assignment(cost)
            for i, j in zip(rows, cols):
                if cost[i, j] <= gate * max(scale[i], 1e-300):
                    report.pairs.append(PairComparison(ref_name, name, complex(ref_E[i]), complex(oth_E[j])))
                    matched_o.add(j)
                    seen_ref.add(i)
        report.unmatched += [(name, complex(e)) for j, e in enumerate(oth_E) if j not in matched_o]
    if len(pole_sets) == 2:
        report.unmatched += [(ref_name, complex(e)) for i, e in enumerate(ref_E) if i not in seen_ref]
    return report


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    return format(float(x), ".15g")


def write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _versions() -> dict:
    out = {"python": platform.python_version(), "bargmann_fpo": __version__}
    for pkg in ("numpy", "scipy", "mpmath"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


class Runner:
    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.potential = potential_from_spec(config.spec)
        self.out = Path(config.out_dir)
        self.summary: dict = {}
        self.artifacts: list[str] = []

    def model(self, R_cut: float) -> lattice.LatticeModel:
        return lattice.discretize(TruncatedPotential(self.potential, R_cut), self.config.a)

    def _csv(self, name, header, rows):
        write_csv(self.out / name, header, rows)
        self.artifacts.append(name)

    def potential_task(self):
        r = np.linspace(self.config.a, self.config.R_cut, int(round(self.config.R_cut / self.config.a)))
        self._csv("potential.csv", ["r", "V"], zip(r, self.potential(r)))

    def energies(self, model):
        cfg = self.config
        top = {"band": model.band_top, "mid_band": model.band_top / 2}.get(cfg.energy_max)
        top = float(cfg.energy_max) if top is None else top
        top = min(top, model.band_top * (1 - 1e-9))
        E = np.linspace(top / cfg.n_energies, top, cfg.n_energies)
        # log spacing resolves the threshold region the uniform grid steps over
        low = np.geomspace(1e-3, top, cfg.n_energies)
        dense = [np.linspace(max(e.real - 5 * abs(e.imag), 1e-3), e.real + 5 * abs(e.imag), 801)
                 for e in self.potential.resonance_energies if 0 < e.real < top]
        return np.unique(np.concatenate([E, low, *dense]))

    def phase_shift_task(self):
        model = self.model(self.config.R_cut)
        E = self.energies(model)
        fpo = lattice.phase_shift_sweep(model, E)
        exact = exact_phase_shift(self.config.spec, np.sqrt(E))
        diff = exact - fpo
        self._csv("phase_shift.csv", ["E", "delta_fpo", "delta_exact", "difference"],
                  zip(E, fpo, exact, diff))
        i = int(np.argmax(np.abs(diff)))
        self.summary["max_abs_difference"] = float(abs(diff[i]))
        self.summary["max_difference_at_E"] = float(E[i])

    def pole_sets(self, methods=None):
        cfg = self.config
        methods = methods or cfg.methods
        sets = []
        det = None
        if "determinant" in methods or "fixed_point" in methods:
            det = poles.det_poles(self.model, cfg.R_cut, cfg.region, cfg.grid)
        if "transcendental" in methods:
            tp = TruncatedPotential(self.potential, cfg.R_cut)
            sets.append(("transcendental", continuum.find_transcendental_poles(tp, cfg.region, cfg.grid)))
        if "determinant" in methods:
            sets.append(("determinant", det))
        if "fixed_point" in methods:
            sets.append(("fixed_point", self.fixed_points(det)))
        return sets

    def fixed_points(self, det):
        model = self.model(self.config.R_cut)
        out = []
        for p in det:
            if not 0 < p.energy.real < model.band_top:
                continue
            try:
                out.append(poles.fixed_point_solve(model, p.energy.real, target=p.energy))
            except NoConvergence as exc:
                log.info("no fixed point from determinant pole %s: %s", p.energy, exc)
        keep = continuum.dedupe([p.energy for p in out], poles.DEDUPE_TOL)
        return sorted((out[i] for i in keep), key=lambda p: p.energy.real)

    def _write_poles(self, sets):
        rows = [(name, p.energy.real, p.energy.imag, p.width, p.residual)
                for name, ps in sets for p in ps]
        self._csv("poles.csv", ["method", "re_E", "im_E", "width", "residual"], rows)
        self.summary["pole_counts"] = {name: len(ps) for name, ps in sets}

    def poles_task(self):
        sets = self.pole_sets()
        self._write_poles(sets)
        if len(sets) >= 2:
            self._write_report(sets)

    def fixed_point_task(self):
        sets = self.pole_sets(("determinant", "fixed_point"))
        self._write_poles(sets)

    def compare_task(self):
        methods = self.config.methods if len(self.config.methods) >= 2 else METHODS
        sets = self.pole_sets(methods)
        self._write_poles(sets)
        self._write_report(sets)

    def _write_report(self, sets):
        ordered = sorted(sets, key=lambda s: s[0] != "determinant")
        report = compare_report(ordered)
        self._csv("comparison.csv", REPORT_HEADER, report.rows())
        self.summary["max_relative"] = {
            name: report.max_relative(name) for name, _ in ordered[1:]}
        self.summary["unmatched"] = len(report.unmatched)

    def trajectories_task(self):
        cfg = self.config
        ts = poles.trace_trajectories(self.model, cfg.R_values, method=cfg.trajectory_method,
                                      region=cfg.region, grid=cfg.grid)
        lo, hi = poles.STABILITY_WINDOW
        if cfg.R_values[0] <= lo and cfg.R_values[-1] >= hi:
            poles.classify_poles(ts)
        rows = [(n, R, e.real, e.imag, ts.method, f.classification)
                for n, f in enumerate(ts.families) for R, e in zip(f.R, f.E)]
        self._csv("trajectories.csv", ["family", "R_cut", "re_E", "im_E", "method", "classification"], rows)
        self.summary["families"] = len(ts.families)
        self.summary["link_breaks"] = len(ts.breaks)
        self.summary["physical"] = [
            {"family": ts.families.index(f), "re_E": f.E[-1].real, "im_E": f.E[-1].imag,
             "window_path_length": f.path_length(lo, hi)}
            for f in ts.physical()]
        with open(self.out / "trajectory_summary.json", "w") as fh:
            json.dump(self.summary, fh, indent=2, sort_keys=True)
        self.artifacts.append("trajectory_summary.json")


def run_experiment(config: ExperimentConfig, task: Optional[str] = None) -> dict:
    """Run ``task`` (default: the config's own) and write CSVs plus manifest.json.

    Returns the manifest.
    """
    task = task or config.task
    if task not in TASKS:
        raise ConfigError(f"unknown task {task!r}")
    runner = Runner(config)
    runner.out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    getattr(runner, f"{task}_task")()
    manifest = {
        "experiment": config.name,
        "task": task,
        "config": config.to_dict(),
        "versions": _versions(),
        "timings": {"total_s": time.perf_counter() - t0},
        "artifacts": runner.artifacts,
        "summary": runner.summary,
    }
    with open(runner.out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return manifest
