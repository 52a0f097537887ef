"""Screened-ball kernel functions and the scalar constants built from them.

All radii are dimensionless (measured in units of the screening radius).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .quadrature import DEFAULT_RTOL, QuadratureError, integrate_1d

R_STAR = (math.sqrt(5.0) - 1.0) / 2.0
# radius constant relating R(x) to rho(x)^(-1/3)
C_RADIUS = (3.0 / (4.0 * math.pi)) ** (1.0 / 3.0)

CLASSIC_LO = 1.68
CHAN_HANDY = 1.64


def _check_radius(r):
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(np.isnan(r)):
        raise ValueError("radius must be non-negative")
    return r


def _scalar_or_array(r, out):
    return float(out) if np.ndim(r) == 0 else out


def _psi_poly(r):
    # r^4 (r^2/2 + 1/r - 3/2) expanded to avoid 1/r at the origin
    return 0.5 * r**6 - 1.5 * r**4 + r**3


def psi(r):
    """Screened-ball profile, zero at ``r = 0`` and for ``r > 1``."""
    r_arr = _check_radius(r)
    out = np.where(r_arr <= 1.0, _psi_poly(r_arr), 0.0)
    return _scalar_or_array(r, out)


def psi_prime(r):
    """Derivative ``3 r^2 (r - 1)(r^2 + r - 1)`` on ``[0, 1]``, zero beyond."""
    r_arr = _check_radius(r)
    out = np.where(r_arr <= 1.0, 3.0 * r_arr**2 * (r_arr - 1.0) * (r_arr**2 + r_arr - 1.0), 0.0)
    return _scalar_or_array(r, out)


PSI_STAR = float(_psi_poly(R_STAR))


def psi_split(r):
    """Increasing parts ``(psi1, psi2)`` with ``psi1 - psi2 = psi``."""
    r_arr = _check_radius(r)
    psi1 = np.where(r_arr <= R_STAR, _psi_poly(np.minimum(r_arr, R_STAR)), PSI_STAR)
    psi2 = np.where(
        r_arr <= R_STAR,
        0.0,
        np.where(r_arr <= 1.0, PSI_STAR - _psi_poly(np.clip(r_arr, R_STAR, 1.0)), PSI_STAR),
    )
    if np.ndim(r) == 0:
        return float(psi1), float(psi2)
    return psi1, psi2


def chi(r):
    """``-psi'(r) / r`` restricted to ``[r_star, 1]``."""
    r_arr = _check_radius(r)
    inside = (r_arr >= R_STAR) & (r_arr <= 1.0)
    out = np.where(inside, 3.0 * r_arr * (1.0 - r_arr) * (r_arr**2 + r_arr - 1.0), 0.0)
    return _scalar_or_array(r, np.maximum(out, 0.0))


def chi_prime(r):
    r_arr = _check_radius(r)
    inside = (r_arr >= R_STAR) & (r_arr <= 1.0)
    out = np.where(inside, 3.0 * (-4.0 * r_arr**3 + 4.0 * r_arr - 1.0), 0.0)
    return _scalar_or_array(r, out)


@dataclass(frozen=True)
class RadialProfile:
    """Real function of the radius with a declared support."""

    func: object
    support: tuple = (0.0, math.inf)
    label: str = ""

    def __call__(self, r):
        r_arr = np.asarray(r, dtype=float)
        lo, hi = self.support
        inside = (r_arr >= lo) & (r_arr <= hi)
        out = np.where(inside, self.func(np.clip(r_arr, lo, hi if np.isfinite(hi) else None)), 0.0)
        return _scalar_or_array(r, out)


PSI = RadialProfile(psi, (0.0, 1.0), "psi")
PSI1 = RadialProfile(lambda r: psi_split(r)[0], (0.0, math.inf), "psi1")
PSI2 = RadialProfile(lambda r: psi_split(r)[1], (0.0, math.inf), "psi2")
CHI = RadialProfile(chi, (R_STAR, 1.0), "chi")


@dataclass(frozen=True)
class CriticalPoints:
    r_star: float
    s_star: float
    psi_at_r_star: float


def critical_points(tol=1e-10):
    """Maximiser of ``psi`` and the interior maximiser of ``chi``."""
    # chi' = 3(-4 s^3 + 4 s - 1) changes sign once in [r_star, 1]
    s_star = brentq(lambda s: -4.0 * s**3 + 4.0 * s - 1.0, R_STAR, 1.0, xtol=tol)
    return CriticalPoints(R_STAR, float(s_star), PSI_STAR)


def derive_corr1_coefficient():
    """``3 psi(r_star) / c``: the product of alpha and the split parameter."""
    return 3.0 * PSI_STAR / C_RADIUS


def alpha_max():
    """Largest alpha for which the split parameter exceeds ``r_star``."""
    return derive_corr1_coefficient() / R_STAR


def psi2_over_t_integral(integrand=None, rtol=DEFAULT_RTOL):
    """``int_{r_star}^1 psi2'(t) / t dt`` (``psi2' = -psi'`` there)."""
    if integrand is None:
        def integrand(t):
            return -psi_prime(t) / t
    value, _ = integrate_1d(integrand, R_STAR, 1.0, rtol=rtol, atol=1e-15)
    return value


def derive_grad_l1_coefficient(integrand=None, rtol=DEFAULT_RTOL):
    """Coefficient of ``alpha^-3 int |grad rho|`` in the first gradient bound."""
    inner = psi2_over_t_integral(integrand, rtol)
    return 18.0 * math.pi * PSI_STAR**3 / R_STAR**3 * inner


def derive_grad13_l2_coefficient(maximal_constant):
    """Coefficient of ``alpha^-2 int |grad rho^(1/3)|^2`` given the maximal-function norm."""
    if not maximal_constant > 0:
        raise ValueError("maximal_constant must be positive")
    return 27.0 * PSI_STAR**2 * C_RADIUS**2 / (2.0 * R_STAR**2) * maximal_constant


@dataclass(frozen=True)
class AlphaOptimum:
    alpha_opt: float
    bound_correction: float
    prefactor: float


def alpha_prefactor(coefficient, power):
    """Density-independent constant of the optimised correction term."""
    if power == 3:
        return 4.0 / 3.0 * (3.0 * coefficient) ** 0.25
    if power == 2:
        return 3.0 * 2.0 ** (-2.0 / 3.0) * coefficient ** (1.0 / 3.0)
    raise ValueError("power must be 2 or 3")


def optimize_alpha(coefficient, power, f_rho43, f_grad):
    """Minimise ``alpha * f_rho43 + coefficient * alpha^-power * f_grad`` over alpha > 0.

    With ``f_grad = 0`` the minimum sits at ``alpha -> 0`` and the correction
    vanishes. ``f_rho43 = 0`` with a positive gradient term is rejected.
    """
    if power not in (2, 3):
        raise ValueError("power must be 2 or 3")
    if not coefficient > 0:
        raise ValueError("coefficient must be positive")
    if not (np.isfinite(f_rho43) and np.isfinite(f_grad)) or f_rho43 < 0 or f_grad < 0:
        raise ValueError("functional values must be finite and non-negative")
    prefactor = alpha_prefactor(coefficient, power)
    if f_grad == 0:
        return AlphaOptimum(0.0, 0.0, prefactor)
    if f_rho43 == 0:
        raise ValueError("zero rho^(4/3) integral with non-zero gradient is not a valid density")
    alpha = (power * coefficient * f_grad / f_rho43) ** (1.0 / (power + 1))
    correction = prefactor * f_grad ** (1.0 / (power + 1)) * f_rho43 ** (power / (power + 1.0))
    return AlphaOptimum(alpha, correction, prefactor)


def derive_chain_constants(prefactor_l1=None, prefactor_l2=None):
    """Constants of the two derived bounds with gradient powers 1/8 and 1/4."""
    if prefactor_l1 is None:
        prefactor_l1 = alpha_prefactor(derive_grad_l1_coefficient(), 3)
    if prefactor_l2 is None:
        from .maximal import hl_constant_heat

        prefactor_l2 = alpha_prefactor(derive_grad13_l2_coefficient(hl_constant_heat()), 2)
    # |grad rho| = 3 rho^(2/3) |grad rho^(1/3)|, then Cauchy-Schwarz
    c_eighth = prefactor_l1 * 3.0**0.25
    c_quarter = prefactor_l2**0.6 * c_eighth**0.4
    return c_eighth, c_quarter


def _onsager_energy(c):
    # magnitude of -2 pi c^2 / 5 - 3 / (5 c)
    return 2.0 * math.pi * c * c / 5.0 + 3.0 / (5.0 * c)


def derive_lda_constant(return_radius=False):
    """Optimal screened-ball constant ``(3/5)(9 pi / 2)^(1/3)``."""
    res = minimize_scalar(_onsager_energy, bounds=(0.05, 5.0), method="bounded",
                          options={"xatol": 1e-10})
    if not res.success:
        raise QuadratureError("optimisation of the screening radius failed")
    # polish on the stationarity condition, which is well conditioned
    def slope(c):
        return 4.0 * math.pi * c / 5.0 - 3.0 / (5.0 * c * c)

    lo, hi = res.x * 0.9, res.x * 1.1
    c_opt = brentq(slope, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    value = _onsager_energy(c_opt)
    if return_radius:
        return value, c_opt
    return value


def unit_ball_self_energy(rtol=1e-12):
    """``D(mu, mu)`` for the normalised unit ball via the nested radial integral."""
    ball = 4.0 * math.pi / 3.0
    # int_0^1 r dr int_0^r s^2 ds, inner done by quadrature as well
    def inner(r):
        return integrate_1d(lambda s: s * s, 0.0, r, rtol=rtol, atol=1e-16)[0] if r > 0 else 0.0

    outer, _ = integrate_1d(lambda r: r * inner(r), 0.0, 1.0, rtol=rtol, atol=1e-16)
    return ball**-2 * (4.0 * math.pi) ** 2 * outer


@dataclass(frozen=True)
class ConstantEntry:
    name: str
    value: float
    paper_location: str
    derivation: str  # closed_form | quadrature | optimization


@dataclass
class ConstantTable:
    entries: dict = field(default_factory=dict)

    def add(self, name, value, location, derivation):
        if derivation not in ("closed_form", "quadrature", "optimization"):
            raise ValueError(f"unknown derivation {derivation!r}")
        self.entries[name] = ConstantEntry(name, float(value), location, derivation)

    def __getitem__(self, name):
        return self.entries[name].value

    def __iter__(self):
        return iter(self.entries.values())

    def __len__(self):
        return len(self.entries)

    def rows(self):
        return [
            {"name": e.name, "value": e.value, "paper_location": e.paper_location,
             "derivation_method": e.derivation}
            for e in self
        ]

    def to_csv(self):
        import csv
        import io

        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=["name", "value", "paper_location", "derivation_method"],
                                lineterminator="\n")
        writer.writeheader()
        for row in self.rows():
            writer.writerow({**row, "value": repr(row["value"])})
        return buf.getvalue()

    def to_json(self):
        import json

        return json.dumps({"schema": "xcbound.constants/1", "constants": self.rows()}, indent=2)


def kernel_constants():
    """Constants that depend only on the screened kernel and the ball."""
    table = ConstantTable()
    lda, c_opt = derive_lda_constant(return_radius=True)
    table.add("psi_r_star", PSI_STAR, "maximum of the screened profile at r_star", "closed_form")
    table.add("lda_constant", lda, "screened-ball energy minimised over the radius", "optimization")
    table.add("lda_radius", c_opt, "minimiser of the screened-ball energy", "optimization")
    table.add("ball_self_energy", unit_ball_self_energy(), "self-energy of the normalised unit ball", "quadrature")
    table.add("corr1_coefficient", derive_corr1_coefficient(), "product of alpha and the split parameter", "closed_form")
    table.add("alpha_max", alpha_max(), "largest admissible alpha", "closed_form")
    table.add("grad_l1_coefficient", derive_grad_l1_coefficient(), "coefficient of the int |grad rho| correction", "quadrature")
    return table
