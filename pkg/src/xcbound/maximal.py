"""Maximal function built on the ``chi`` profile and its L2 norm constants."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import minimize_scalar
from scipy.signal import fftconvolve
from scipy.special import erfcx

from .kernel import R_STAR, chi, chi_prime, critical_points
from .quadrature import DEFAULT_RTOL, gauss_legendre, integrate_1d, ordered_map

LEMMA_SLACK = 0.01
_SQRT_PI = math.sqrt(math.pi)


# -- the two norm constants ------------------------------------------------------


def hl_constant_simple(chi_derivative=None, rtol=DEFAULT_RTOL):
    """Constant from the ball maximal function: ``8 pi sqrt(3) int s^3 |chi'|``."""
    s_star = critical_points().s_star
    deriv = chi_prime if chi_derivative is None else chi_derivative
    inner, _ = integrate_1d(lambda s: s**3 * abs(deriv(s)), s_star, 1.0, rtol=rtol, atol=1e-15)
    return 8.0 * math.pi * math.sqrt(3.0) * inner


def log_gaussian_tail(x):
    """``log int_x^inf exp(-s^2) ds`` without underflow for large ``x``."""
    x = np.asarray(x, dtype=float)
    # int_x^inf e^{-s^2} = (sqrt(pi)/2) erfc(x) = (sqrt(pi)/2) erfcx(x) e^{-x^2}
    return np.log(0.5 * _SQRT_PI * erfcx(x)) - x * x


def _log_k_ratio(r, T):
    with np.errstate(divide="ignore"):
        return np.log(r * chi(r)) - log_gaussian_tail(r / (2.0 * math.sqrt(T)))


def k_of_t(T, samples=10_000):
    """``K(T)``: the heat-kernel domination constant of ``chi`` at time ``T``."""
    if not T > 0:
        raise ValueError("T must be positive")
    r = np.linspace(R_STAR, 1.0, samples)
    vals = _log_k_ratio(r, T)
    i = int(np.argmax(vals))
    lo, hi = r[max(i - 1, 0)], r[min(i + 1, samples - 1)]
    best = vals[i]
    if hi > lo:
        res = minimize_scalar(lambda x: -_log_k_ratio(x, T), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-13})
        best = max(best, -float(res.fun))
    log_k = math.log(2.0 * math.pi**1.5 * T) + best
    return math.exp(log_k) if log_k < 700 else math.inf


@dataclass(frozen=True)
class KCurve:
    T: np.ndarray
    K_of_T: np.ndarray

    def tail(self, r):
        """Gaussian tail integral ``int_{r / 2 sqrt(T)}^inf e^{-s^2} ds`` per T."""
        return np.exp(log_gaussian_tail(np.asarray(r) / (2.0 * np.sqrt(self.T))))


def k_curve(T_values):
    T_values = np.asarray(T_values, dtype=float)
    return KCurve(T_values, np.array([k_of_t(t) for t in T_values]))


def minimize_k(bracket=(1e-3, 10.0)):
    """``(T*, min K)`` by bounded minimisation in ``log T``."""
    res = minimize_scalar(lambda u: k_of_t(math.exp(u)), bounds=tuple(map(math.log, bracket)),
                          method="bounded", options={"xatol": 1e-10})
    if not res.success:
        raise ArithmeticError("minimisation of K(T) failed")
    return math.exp(res.x), float(res.fun)


def hl_constant_heat():
    """Constant from the time-averaged heat kernel: ``2 sqrt(2) min_T K(T)``."""
    return 2.0 * math.sqrt(2.0) * minimize_k()[1]


def heat_domination_gap(T, samples=1000):
    """Smallest value of ``K(T) tail / (2 pi^1.5 r T) - chi(r)`` on ``[r_star, 1]``."""
    K = k_of_t(T)
    r = np.linspace(R_STAR, 1.0, samples)
    rhs = K * np.exp(log_gaussian_tail(r / (2.0 * math.sqrt(T)))) / (2.0 * math.pi**1.5 * r * T)
    return float(np.min(rhs - chi(r)))


# -- the maximal operator on radial functions -------------------------------------


@dataclass(frozen=True)
class RadialTestFunction:
    """Radial function ``f(|x|)`` treated as zero beyond ``extent``."""

    name: str
    func: object
    extent: float
    breakpoints: tuple = ()


@dataclass(frozen=True)
class MaximalEvaluationGrid:
    """Dilations scanned for the supremum, plus the ``chi`` quadrature order."""

    radii: np.ndarray = field(default_factory=lambda: np.geomspace(1e-3, 1e3, 241))
    nodes: int = 64

    def __post_init__(self):
        radii = np.asarray(self.radii, dtype=float)
        if radii.ndim != 1 or np.any(radii <= 0) or np.any(np.diff(radii) <= 0):
            raise ValueError("radii must be strictly increasing and positive")
        object.__setattr__(self, "radii", radii)


class RadialMaximal:
    """``M^chi_f`` for a radial ``f``; depends on the evaluation point only via ``|z|``."""

    def __init__(self, f, grid=None, samples=200_001):
        self.f = f
        self.grid = grid or MaximalEvaluationGrid()
        knots = sorted({0.0, f.extent, *[b for b in f.breakpoints if 0 < b < f.extent]})
        pieces = []
        for a, b in zip(knots[:-1], knots[1:]):
            n = max(16, int(samples * (b - a) / f.extent))
            pieces.append(np.linspace(a, b, n)[:-1] if b != knots[-1] else np.linspace(a, b, n))
        s = np.concatenate(pieces)
        vals = np.abs(np.asarray(f.func(s), dtype=float))
        self._s = s
        self._g = cumulative_trapezoid(vals * s, s, initial=0.0)
        self._fabs = vals
        self._t, w = gauss_legendre(self.grid.nodes, R_STAR, 1.0)
        self._w = 4.0 * math.pi * w * self._t**2 * chi(self._t)

    def shell_mean(self, a, s):
        """Average of ``|f|`` over the sphere of radius ``s`` centred at distance ``a``."""
        s = np.asarray(s, dtype=float)
        # the difference quotient cancels catastrophically for tiny offsets
        if a < 1e-9 * self.f.extent:
            return np.interp(s, self._s, self._fabs, right=0.0)
        hi = np.interp(a + s, self._s, self._g, right=self._g[-1])
        lo = np.interp(np.abs(a - s), self._s, self._g, right=self._g[-1])
        with np.errstate(invalid="ignore", divide="ignore"):
            out = (hi - lo) / (2.0 * a * s)
        return np.where(s > 0, out, np.interp(a, self._s, self._fabs, right=0.0))

    def averages(self, a, radii):
        """``r^-3 int chi(|u|/r) |f(z + u)| du`` for each dilation ``r``."""
        radii = np.atleast_1d(np.asarray(radii, dtype=float))
        m = self.shell_mean(a, radii[:, None] * self._t[None, :])
        return m @ self._w

    def at(self, a, refine=True):
        """Supremum over the dilation grid with a Brent refinement at the argmax."""
        radii = self.grid.radii
        vals = self.averages(a, radii)
        i = int(np.argmax(vals))
        best = float(vals[i])
        if refine and best > 0 and 0 < i < len(radii) - 1:
            lo, hi = math.log(radii[i - 1]), math.log(radii[i + 1])
            res = minimize_scalar(lambda u: -float(self.averages(a, [math.exp(u)])[0]),
                                  bounds=(lo, hi), method="bounded", options={"xatol": 1e-9})
            best = max(best, -float(res.fun))
        return best

    def profile(self, a_values, refine=True):
        return np.array([self.at(float(a), refine) for a in a_values])


def maximal_chi(f, z=0.0, grid=None):
    """``M^chi_f(z)`` for a radial test function; ``z`` is a 3-vector or a distance."""
    a = float(np.linalg.norm(z)) if np.ndim(z) else float(abs(z))
    l2 = radial_l2_norm(f)
    if not np.isfinite(l2):
        raise ValueError("f is not square integrable")
    if l2 == 0:
        return 0.0
    return RadialMaximal(f, grid).at(a)


def radial_l2_norm(f):
    pts = [b for b in f.breakpoints if 0 < b < f.extent]
    val, _ = integrate_1d(lambda s: 4.0 * math.pi * s * s * f.func(s) ** 2, 0.0, f.extent,
                          rtol=1e-10, atol=1e-300, points=pts or None)
    return math.sqrt(val)


def radial_maximal_l2_norm(f, grid=None, n_points=240, far_factor=40.0):
    """``||M^chi_f||_2`` from a radial profile of ``M`` plus an ``a^-3`` tail."""
    op = RadialMaximal(f, grid)
    a_max = far_factor * f.extent
    a = np.unique(np.concatenate([
        np.linspace(0.0, 1.5 * f.extent, n_points // 2),
        np.geomspace(1.5 * f.extent, a_max, n_points // 2),
    ]))
    m = op.profile(a)
    integrand = 4.0 * math.pi * a**2 * m**2
    body = float(np.trapezoid(integrand, a))
    coeff = m[-1] * a_max**3
    tail = 4.0 * math.pi * coeff**2 / (3.0 * a_max**3)
    return math.sqrt(body + tail)


# -- grid version -------------------------------------------------------------------


def maximal_chi_grid(values, spacing, radii=None):
    """``M^chi_f`` on a uniform Cartesian grid by FFT convolution per dilation."""
    f = np.abs(np.asarray(values, dtype=float))
    if f.ndim != 3:
        raise ValueError("values must be a 3D array")
    h = float(spacing)
    if radii is None:
        radii = np.geomspace(2.0 * h, 0.5 * h * min(f.shape), 24)
    out = np.zeros_like(f)
    for r in radii:
        n = int(math.ceil(r / h))
        ax = np.arange(-n, n + 1) * h
        X, Y, Z = np.meshgrid(ax, ax, ax, indexing="ij")
        kern = chi(np.sqrt(X**2 + Y**2 + Z**2) / r) * h**3 / r**3
        conv = fftconvolve(f, kern, mode="same")
        np.maximum(out, conv, out=out)
    return np.maximum(out, 0.0)


# -- lemma verification -------------------------------------------------------------


def gaussian_test_function(width, name=None):
    return RadialTestFunction(name or f"gaussian_w{width:g}", lambda s: np.exp(-math.pi * (s / width) ** 2),
                              extent=7.0 * width)


def ball_test_function(radius, name=None):
    return RadialTestFunction(name or f"ball_R{radius:g}", lambda s: np.where(s <= radius, 1.0, 0.0),
                              extent=1.5 * radius, breakpoints=(radius,))


def exponential_test_function(length, name=None):
    return RadialTestFunction(name or f"exponential_l{length:g}", lambda s: np.exp(-s / length),
                              extent=40.0 * length)


def shell_test_function(inner, outer, name=None):
    return RadialTestFunction(name or f"shell_{inner:g}_{outer:g}",
                              lambda s: np.where((s >= inner) & (s <= outer), 1.0, 0.0),
                              extent=1.5 * outer, breakpoints=(inner, outer))


def zero_test_function():
    return RadialTestFunction("zero", lambda s: np.zeros_like(np.asarray(s, dtype=float)), extent=1.0)


def default_corpus():
    return [
        gaussian_test_function(0.5),
        gaussian_test_function(1.0),
        gaussian_test_function(2.0),
        ball_test_function(1.0),
        ball_test_function(3.0),
        exponential_test_function(1.0),
        shell_test_function(1.0, 2.0),
    ]


@dataclass(frozen=True)
class LemmaRow:
    function_id: str
    l2_norm: float
    maximal_l2_norm: float
    ratio: float


@dataclass
class LemmaReport:
    rows: list
    constant: float
    slack: float = LEMMA_SLACK

    @property
    def max_ratio(self):
        return max((r.ratio for r in self.rows), default=0.0)

    @property
    def witness(self):
        return max(self.rows, key=lambda r: r.ratio).function_id if self.rows else None

    @property
    def passed(self):
        return all(r.ratio <= self.constant * (1.0 + self.slack) for r in self.rows)

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["function_id", "l2_norm", "maximal_l2_norm", "ratio"])
        for r in self.rows:
            writer.writerow([r.function_id, repr(r.l2_norm), repr(r.maximal_l2_norm), repr(r.ratio)])
        return buf.getvalue()


def _lemma_row(f):
    l2 = radial_l2_norm(f)
    if l2 == 0:
        return LemmaRow(f.name, 0.0, 0.0, 0.0)
    ml2 = radial_maximal_l2_norm(f)
    return LemmaRow(f.name, l2, ml2, ml2 / l2)


def verify_lemma(corpus=None, constant=None, threads=None):
    """Ratio ``||M^chi_f|| / ||f||`` for each test function against the lemma constant."""
    corpus = default_corpus() if corpus is None else list(corpus)
    if not corpus:
        raise ValueError("corpus must not be empty")
    if constant is None:
        constant = hl_constant_heat()
    rows = ordered_map(_lemma_row, corpus, threads)
    return LemmaReport(rows, constant)


def ball_plateau_constant(rtol=DEFAULT_RTOL):
    """``4 pi int_{r_star}^1 s^2 chi(s) ds``: the maximal function of a ball indicator at its centre."""
    val, _ = integrate_1d(lambda s: 4.0 * math.pi * s * s * chi(s), R_STAR, 1.0, rtol=rtol, atol=1e-15)
    return val
