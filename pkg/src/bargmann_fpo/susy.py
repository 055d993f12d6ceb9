"""
Bargmann-type potentials with prescribed resonances.

The potentials are generated from the free particle (V0 = 0) by a chain of
Darboux transformations whose transformation functions are

    u = exp((a_odd +/- i a_even) r)   (irregular, complex-conjugate pair)
    v = sinh(b r)                     (regular at the origin)

with units hbar = 2m = 1, so that E = k**2.  Each pair (a_odd, a_even) puts
a zero of the Jost function at k = -a_even + i a_odd (the resonance) and at
its mirror k = a_even + i a_odd; each rate b puts a pole at k = -i b.

Three evaluation routes are provided:

* a closed form for one resonance (second-order Wronskian of shifted sinh),
* a closed form for two resonances (fourth-order Wronskian of shifted sinh),
* a generic route that takes numeric determinants of the full derivative
  matrix of all transformation functions.  It is slow and serves as the
  oracle for the closed forms.

The generic route and the two-resonance closed form run in mpmath
arithmetic.  For small rates the Wronskians cancel by more than twelve
decimal digits near the origin, which double precision cannot resolve.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import mpmath as mp
import numpy as np

from .errors import DegenerateRates, ParameterOrdering, PoleOfJost, SingularWronskian

RATE_TOLERANCE = 1e-10
DEFAULT_DPS = 40


@dataclass(frozen=True)
class DarbouxChainSpec:
    """Parameters of the transformation chain.

    ``resonance_params`` holds one ``(a_odd, a_even)`` pair per resonance,
    i.e. ``(a1, a2)`` and, for a second resonance, ``(a3, a4)``.  The
    irregular transformation functions are ``exp((a_odd +/- i a_even) r)``.
    ``regularizer_rates`` holds the ``b_j`` of the regular functions
    ``sinh(b_j r)``; two per resonance.
    """

    resonance_params: tuple[tuple[float, float], ...] = ()
    regularizer_rates: tuple[float, ...] = ()

    def __post_init__(self):
        pairs = tuple((float(p[0]), float(p[1])) for p in self.resonance_params)
        rates = tuple(float(b) for b in self.regularizer_rates)
        object.__setattr__(self, "resonance_params", pairs)
        object.__setattr__(self, "regularizer_rates", rates)

        for n, (a_odd, a_even) in enumerate(pairs):
            i_odd, i_even = 2 * n + 1, 2 * n + 2
            if not (a_even < a_odd < 0):
                raise ParameterOrdering(
                    f"resonance {n + 1}: need a{i_even} < a{i_odd} < 0, "
                    f"got a{i_odd}={a_odd:g}, a{i_even}={a_even:g}"
                )
        if len(rates) != 2 * len(pairs):
            raise ParameterOrdering(
                f"need two regularizer rates per resonance: {len(pairs)} "
                f"resonance(s) but {len(rates)} rate(s)"
            )
        for j, b in enumerate(rates):
            if not (b > 0 and math.isfinite(b)):
                raise ParameterOrdering(f"b{j + 1} must be positive, got {b:g}")
        for i, j in itertools.combinations(range(len(rates)), 2):
            if abs(rates[i] - rates[j]) < RATE_TOLERANCE:
                raise DegenerateRates(
                    f"b{i + 1} and b{j + 1} coincide ({rates[i]:g}); the "
                    "Wronskian of equal-rate sinh functions vanishes"
                )

    @property
    def n_resonances(self) -> int:
        return len(self.resonance_params)

    @property
    def exponents(self) -> np.ndarray:
        """Complex exponents c of the irregular functions u = exp(c r)."""
        out = []
        for a_odd, a_even in self.resonance_params:
            out += [complex(a_odd, a_even), complex(a_odd, -a_even)]
        return np.array(out, dtype=complex)

    @property
    def alphas(self) -> np.ndarray:
        """Jost-function zeros: alpha = i c, i.e. -a_even + i a_odd and mirror."""
        return 1j * self.exponents

    @property
    def resonance_momenta(self) -> np.ndarray:
        return np.array([complex(-ae, ao) for ao, ae in self.resonance_params])

    @property
    def resonance_energies(self) -> np.ndarray:
        return self.resonance_momenta**2

    def to_text(self) -> str:
        lines = []
        for n, (a_odd, a_even) in enumerate(self.resonance_params):
            lines.append(f"a{2 * n + 1}={a_odd!r}")
            lines.append(f"a{2 * n + 2}={a_even!r}")
        lines += [f"b{j + 1}={b!r}" for j, b in enumerate(self.regularizer_rates)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_mapping(cls, values: dict) -> "DarbouxChainSpec":
        a = _indexed(values, "a")
        b = _indexed(values, "b")
        if len(a) % 2:
            raise ParameterOrdering(f"resonance parameters come in pairs, got {len(a)}")
        pairs = tuple((a[i], a[i + 1]) for i in range(0, len(a), 2))
        return cls(pairs, tuple(b))

    @classmethod
    def from_text(cls, text: str) -> "DarbouxChainSpec":
        """Parse ``a1=..., a2=..., b1=...`` (newline or comma separated)."""
        values = {}
        for item in text.replace(",", "\n").splitlines():
            item = item.split("#", 1)[0].strip()
            if not item:
                continue
            key, sep, val = item.partition("=")
            if not sep:
                raise ValueError(f"expected key=value, got {item!r}")
            values[key.strip()] = float(val)
        return cls.from_mapping(values)


def _indexed(values: dict, prefix: str) -> list[float]:
    keys = sorted(
        (int(k[len(prefix):]), k)
        for k in values
        if k.startswith(prefix) and k[len(prefix):].isdigit()
    )
    if [i for i, _ in keys] != list(range(1, len(keys) + 1)):
        raise ParameterOrdering(f"{prefix}-parameters must be numbered 1..n without gaps")
    return [float(values[k]) for _, k in keys]


def zeta_shift(a_odd: float, a_even: float, b) -> np.ndarray:
    """Argument shift picked up by sinh(b r) under the two exponential steps.

    tanh(zeta) = 2 a_odd b / (b**2 + a_odd**2 + a_even**2)
    """
    b = np.asarray(b, dtype=float)
    return np.arctanh(2 * a_odd * b / (b * b + a_odd * a_odd + a_even * a_even))


# --------------------------------------------------------------------------
# Potentials


@dataclass(frozen=True, eq=False)
class AnalyticPotential:
    """Callable V(r) for a chain; ``shift_constants`` are zeta_i or eta_i."""

    spec: DarbouxChainSpec
    kind: str
    shift_constants: tuple[float, ...] = ()
    dps: int = DEFAULT_DPS
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        if self.kind not in ("one_resonance", "two_resonance", "generic_wronskian"):
            raise ValueError(f"unknown potential kind {self.kind!r}")

    @property
    def resonance_energies(self) -> np.ndarray:
        return self.spec.resonance_energies

    @property
    def is_free(self) -> bool:
        return not self.spec.regularizer_rates

    def __call__(self, r):
        scalar = np.ndim(r) == 0
        r = np.asarray(r, dtype=float)
        if self.kind == "one_resonance":
            out = self._one_resonance(r)
        elif self.is_free:
            out = np.zeros_like(r)
        else:
            flat = [self._point(float(x)) for x in r.ravel()]
            out = np.array(flat, dtype=float).reshape(r.shape)
        return float(out) if scalar else out

    def _point(self, r: float) -> float:
        try:
            return self._cache[r]
        except KeyError:
            pass
        if self.kind == "two_resonance":
            with mp.workdps(self.dps):
                w, w1, w2 = self.wronskian_terms(r)
                value = float(-2 * (w2 / w - (w1 / w) ** 2))
        else:
            value = generic_wronskian_potential(self.spec, r, dps=self.dps)
        if len(self._cache) > 200_000:
            self._cache.clear()
        self._cache[r] = value
        return value

    def _one_resonance(self, r: np.ndarray) -> np.ndarray:
        (b1, b2), (z1, z2) = self.spec.regularizer_rates, self.shift_constants
        x1, x2 = b1 * r - z1, b2 * r - z2
        # V_1res divided through by cosh^2 xi_1 cosh^2 xi_2 so it cannot overflow
        t1, t2 = np.tanh(x1), np.tanh(x2)
        s1, s2 = 1.0 / np.cosh(x1), 1.0 / np.cosh(x2)
        num = b2**2 * (t1 * s2) ** 2 - b1**2 * (t2 * s1) ** 2
        den = (b2 * t1 - b1 * t2) ** 2
        return 2.0 * (b1**2 - b2**2) * num / den

    def wronskian_terms(self, r):
        """(W, W', W'') of the shifted sinh functions, as mpmath numbers.

        Only defined for the closed-form kinds.
        """
        if self.kind == "generic_wronskian":
            raise TypeError("closed-form Wronskian only exists for one/two resonances")
        b = [mp.mpf(x) for x in self.spec.regularizer_rates]
        # shifts recomputed at working precision; float64 shifts are amplified
        # by the cancellation inside W
        shifts = [
            mp.fsum(_mp_zeta(a_odd, a_even, bi) for a_odd, a_even in self.spec.resonance_params)
            for bi in b
        ]
        return _shifted_sinh_wronskian(b, shifts, mp.mpf(r))

    def to_csv(self, path, r: Sequence[float]) -> None:
        r = np.asarray(r, dtype=float)
        v = self(r)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "V"])
            for x, y in zip(r, v):
                w.writerow([f"{x:.12e}", f"{y:.12e}"])


def _mp_zeta(a_odd, a_even, b):
    a_odd, a_even = mp.mpf(a_odd), mp.mpf(a_even)
    return mp.atanh(2 * a_odd * b / (b * b + a_odd**2 + a_even**2))


def _shifted_sinh_wronskian(b, shifts, r):
    """Closed-form W, W', W'' for sinh(b_i r - shift_i), i = 1..2 or 1..4."""
    xi = [bi * r - si for bi, si in zip(b, shifts)]
    C = [mp.cosh(x) for x in xi]
    S = [mp.sinh(x) for x in xi]
    n = len(b)
    if n == 2:
        # each term: (coef, indices carrying cosh, indices carrying sinh)
        terms = [(b[1], (1,), (0,)), (-b[0], (0,), (1,))]
    elif n == 4:
        terms = []
        for i, j in itertools.combinations(range(4), 2):
            k, l = sorted(set(range(4)) - {i, j}, reverse=True)
            coef = (-1) ** (i + j) * b[i] * b[j] * (b[j] ** 2 - b[i] ** 2) * (b[k] ** 2 - b[l] ** 2)
            terms.append((coef, (i, j), (k, l)))
    else:
        raise ValueError("closed form implemented for 2 or 4 functions")

    sum_b2 = sum(x * x for x in b)
    w = w1 = cross = mp.mpf(0)
    for coef, cosh_idx, sinh_idx in terms:
        f = {m: C[m] for m in cosh_idx} | {m: S[m] for m in sinh_idx}
        df = {m: b[m] * S[m] for m in cosh_idx} | {m: b[m] * C[m] for m in sinh_idx}
        w += coef * mp.fprod(f.values())
        for m in f:
            w1 += coef * df[m] * mp.fprod(f[q] for q in f if q != m)
        for m, q in itertools.combinations(f, 2):
            cross += coef * df[m] * df[q] * mp.fprod(f[s] for s in f if s not in (m, q))
    # second derivative of each factor is b^2 times itself
    w2 = sum_b2 * w + 2 * cross
    return w, w1, w2


def build_one_resonance(a1: float, a2: float, b1: float, b2: float) -> AnalyticPotential:
    spec = DarbouxChainSpec(((a1, a2),), (b1, b2))
    shifts = tuple(float(z) for z in zeta_shift(a1, a2, [b1, b2]))
    return AnalyticPotential(spec, "one_resonance", shifts)


def build_two_resonance(a1, a2, a3, a4, b1, b2, b3, b4, *, dps: int = DEFAULT_DPS) -> AnalyticPotential:
    spec = DarbouxChainSpec(((a1, a2), (a3, a4)), (b1, b2, b3, b4))
    b = np.array(spec.regularizer_rates)
    eta = zeta_shift(a1, a2, b) + zeta_shift(a3, a4, b)
    return AnalyticPotential(spec, "two_resonance", tuple(float(x) for x in eta), dps=dps)


def free_potential() -> AnalyticPotential:
    return AnalyticPotential(DarbouxChainSpec(), "generic_wronskian")


def potential_from_spec(spec: DarbouxChainSpec, dps: int = DEFAULT_DPS) -> AnalyticPotential:
    """Pick the closed form matching the chain, else the generic evaluator."""
    if spec.n_resonances == 1:
        (a1, a2), = spec.resonance_params
        return build_one_resonance(a1, a2, *spec.regularizer_rates)
    if spec.n_resonances == 2:
        (a1, a2), (a3, a4) = spec.resonance_params
        return build_two_resonance(a1, a2, a3, a4, *spec.regularizer_rates, dps=dps)
    return AnalyticPotential(spec, "generic_wronskian", dps=dps)


# --------------------------------------------------------------------------
# Generic Wronskian route


def _chain_columns(spec: DarbouxChainSpec, r, n_rows: int, extra_k=None):
    """Derivative columns [f, f', ..., f^(n_rows-1)] of every chain function."""
    cols = []
    for c in spec.exponents:
        c = mp.mpc(c.real, c.imag)
        e = mp.exp(c * r)
        cols.append([c**p * e for p in range(n_rows)])
    for b in spec.regularizer_rates:
        b = mp.mpf(b)
        s, ch = mp.sinh(b * r), mp.cosh(b * r)
        cols.append([b**p * (s if p % 2 == 0 else ch) for p in range(n_rows)])
    if extra_k is not None:
        k = mp.mpc(extra_k)
        s, c = mp.sin(k * r), mp.cos(k * r)
        # d^p/dr^p sin(kr) cycles through sin, cos, -sin, -cos
        cycle = [s, c, -s, -c]
        cols.append([k**p * cycle[p % 4] for p in range(n_rows)])
    return cols


def _wronskian_derivs(cols, dps: int):
    """W, W', W'' of the functions whose derivative columns are ``cols``.

    Each column is scaled by its largest entry first; this leaves the ratios
    W'/W and W''/W unchanged.
    """
    m = len(cols)
    scaled = []
    for col in cols:
        s = max(abs(x) for x in col[: m + 2])
        scaled.append([x / s for x in col])

    def det(rows):
        return mp.det(mp.matrix([[scaled[j][p] for j in range(m)] for p in rows]))

    base = list(range(m - 1))
    w = det(base + [m - 1])
    hadamard = mp.fprod(mp.sqrt(mp.fsum(abs(x) ** 2 for x in col[:m])) for col in scaled)
    if abs(w) <= mp.mpf(10) ** (-(dps - 10)) * hadamard:
        raise SingularWronskian(f"Wronskian of {m} functions vanishes to working precision")
    w1 = det(base + [m])
    w2 = det(base + [m + 1])
    if m >= 2:
        w2 += det(list(range(m - 2)) + [m - 1, m])
    return w, w1, w2


def generic_wronskian_potential(spec: DarbouxChainSpec, r: float, *, dps: int = DEFAULT_DPS) -> float:
    """V(r) = -2 (ln W)'' from numeric determinants of the derivative matrix."""
    if r <= 0:
        raise ValueError("r must be positive")
    if not spec.regularizer_rates and not spec.resonance_params:
        return 0.0
    with mp.workdps(dps):
        r = mp.mpf(r)
        m = 2 * spec.n_resonances + len(spec.regularizer_rates)
        w, w1, w2 = _wronskian_derivs(_chain_columns(spec, r, m + 2), dps)
        return float(mp.re(-2 * (w2 / w - (w1 / w) ** 2)))


def _wavefunction_and_derivative(spec: DarbouxChainSpec, k, r, dps: int):
    m = 2 * spec.n_resonances + len(spec.regularizer_rates)
    r = mp.mpf(r)
    if m == 0:
        k = mp.mpc(k)
        return mp.sin(k * r), k * mp.cos(k * r)
    w, w1, _ = _wronskian_derivs(_chain_columns(spec, r, m + 2), dps)
    # same per-column scaling as inside _wronskian_derivs, so it cancels in the ratios
    cols = _chain_columns(spec, r, m + 3, extra_k=k)
    scales = [max(abs(x) for x in col[: m + 2]) for col in cols[:m]]
    ext = [[x / s for x in col] for col, s in zip(cols[:m], scales)] + [cols[m]]

    def det(rows):
        return mp.det(mp.matrix([[ext[j][p] for j in range(m + 1)] for p in rows]))

    we = det(list(range(m + 1)))
    we1 = det(list(range(m)) + [m + 1])
    psi = we / w
    dpsi = we1 / w - we * w1 / w**2
    return psi, dpsi


def analytic_wavefunction(spec: DarbouxChainSpec, k: complex, r: float, *, dps: int = DEFAULT_DPS) -> complex:
    """psi_n(r, k) = W(u_1..u_2n, sin kr) / W(u_1..u_2n): the regular solution."""
    _check_not_alpha(spec, k)
    if r <= 0:
        raise ValueError("r must be positive")
    with mp.workdps(dps):
        psi, _ = _wavefunction_and_derivative(spec, k, r, dps)
        return complex(psi)


def analytic_log_derivative(spec: DarbouxChainSpec, k: complex, r: float, *, dps: int = DEFAULT_DPS) -> complex:
    """psi'/psi of the regular transformed solution at radius r."""
    _check_not_alpha(spec, k)
    with mp.workdps(dps):
        psi, dpsi = _wavefunction_and_derivative(spec, k, r, dps)
        return complex(dpsi / psi)


def _check_not_alpha(spec, k):
    k = complex(k)
    if np.any(np.abs(spec.alphas - k) < 1e-14 * max(1.0, abs(k))):
        raise ValueError("k coincides with a factorization momentum alpha_j")


# --------------------------------------------------------------------------
# Jost function and phase shift


@dataclass(frozen=True)
class JostValue:
    value: complex
    k: complex


def jost_function(spec: DarbouxChainSpec, k) -> JostValue:
    """F(k) = prod_j (k - alpha_j) / (k + i b_j), starting from F_0 = 1."""
    k = np.asarray(k, dtype=complex)
    b = np.array(spec.regularizer_rates)
    if b.size and np.any(np.abs(k[..., None] + 1j * b) < 1e-14 * np.maximum(1.0, np.abs(k))[..., None]):
        raise PoleOfJost("k coincides with a Jost pole -i b_j")
    value = np.ones_like(k)
    for alpha in spec.alphas:
        value = value * (k - alpha)
    for bj in b:
        value = value / (k + 1j * bj)
    if value.ndim == 0:
        return JostValue(complex(value), complex(k))
    return JostValue(value, k)


def exact_phase_shift(spec: DarbouxChainSpec, k):
    """Continuous phase shift of the untruncated potential, delta(0) = 0.

    Each conjugate pair of arctan(k / (-i alpha)) terms is combined into one
    two-argument arctangent; its imaginary argument 2 a_odd k never changes
    sign for k > 0, so no branch jumps occur.
    """
    k = np.asarray(k, dtype=float)
    if np.any(k < 0):
        raise ValueError("k must be non-negative")
    delta = np.zeros_like(k)
    for a_odd, a_even in spec.resonance_params:
        delta -= np.arctan2(2 * a_odd * k, a_odd**2 + a_even**2 - k * k)
    for b in spec.regularizer_rates:
        delta -= np.arctan(k / b)
    return float(delta) if delta.ndim == 0 else delta


def one_resonance_phase_shift(a1: float, a2: float, b1: float, b2: float, k) -> np.ndarray:
    """Single-argument arctan form for one resonance, unwrapped along sorted k.

    Kept separate from exact_phase_shift as an independent cross-check.
    """
    k = np.atleast_1d(np.asarray(k, dtype=float))
    # unwrap along a dense path from 0 so sparse requests cannot skip a branch
    path = np.union1d(np.linspace(0.0, k.max(initial=0.0), 20001), k)
    with np.errstate(divide="ignore"):
        raw = -np.arctan(2 * a1 * path / (a1**2 + a2**2 - path**2)) - np.arctan(
            path * (b1 + b2) / (b1 * b2 - path**2)
        )
    unwrapped = np.unwrap(raw, period=np.pi)
    return unwrapped[np.searchsorted(path, k)]
