"""Density functionals, lower-bound assembly and the numerical correction-term certificate."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from . import kernel
from .density import DensityError, DensityField
from .quadrature import QuadratureError, gauss_legendre, integrate_1d, ordered_map, pairwise_sum

GRAD13_FLOOR = 1e-14
VARIANTS = ("classic_168", "classic_164", "grad_l1", "grad13_l2", "chain_l18", "chain_l14")
DEFAULT_ALPHAS = (0.05, 0.1, 0.2, 0.3)
CORR_PANELS = 24
CORR_ORDER = 8


class DivergentFunctional(ArithmeticError):
    """The requested functional is infinite for this density."""


# -- local functionals ----------------------------------------------------------------


def _grid_gradient(field_, values):
    """Cartesian gradient on a (possibly skew) grid, shape ``values.shape + (3,)``."""
    if field_.periodic:
        d = [0.5 * (np.roll(values, -1, axis=k) - np.roll(values, 1, axis=k)) for k in range(3)]
    else:
        if min(values.shape) < 2:
            raise DensityError("gradients need at least two grid points per axis")
        # second order where the axis allows it, first order on two-point axes
        d = [np.gradient(values, axis=k, edge_order=2 if values.shape[k] > 2 else 1) for k in range(3)]
    d = np.stack(d, axis=-1)
    # rows of axes are step vectors: d_k = axes[k] . grad
    return d @ np.linalg.inv(field_.axes).T


def f_rho43(field_):
    """``int rho^(4/3)``."""
    if field_.is_radial:
        return field_.integrate_radial(lambda r: field_.rho(r) ** (4.0 / 3.0))[0]
    return pairwise_sum((field_.values ** (4.0 / 3.0)).ravel()) * field_.cell_volume


def f_grad_l1(field_):
    """``int |grad rho|``; a hard edge of height ``h`` at radius ``R`` adds ``4 pi R^2 h``."""
    if field_.is_radial:
        smooth = field_.integrate_radial(lambda r: np.abs(field_.drho(r)))[0]
        return smooth + sum(4.0 * math.pi * r * r * abs(h) for r, h in field_.jumps)
    g = _grid_gradient(field_, field_.values)
    return pairwise_sum(np.linalg.norm(g, axis=-1).ravel()) * field_.cell_volume


def _grad13_radial_integrand(field_):
    def integrand(r):
        rho = np.asarray(field_.rho(r), dtype=float)
        drho = np.asarray(field_.drho(r), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.where(rho > 0, drho * drho / (9.0 * np.cbrt(rho) ** 4), 0.0)
        return val

    return integrand


def f_grad13_l2(field_, floor=GRAD13_FLOOR):
    """``int |grad rho^(1/3)|^2``.

    Hard edges make it infinite and raise :class:`DivergentFunctional`. On
    grids, cells with ``rho < floor * max(rho)`` are dropped.
    """
    if field_.is_radial:
        if field_.jumps:
            raise DivergentFunctional(f"{field_.label}: hard edge makes int |grad rho^(1/3)|^2 infinite")
        return field_.integrate_radial(_grad13_radial_integrand(field_))[0]
    vals = field_.values
    g = _grid_gradient(field_, np.cbrt(vals))
    keep = vals >= floor * vals.max()
    return pairwise_sum(np.where(keep, np.sum(g * g, axis=-1), 0.0).ravel()) * field_.cell_volume


def grad13_refinement_ratio(field_, floor=GRAD13_FLOOR):
    """Ratio of the grid ``grad rho^(1/3)`` integral at spacing h to that at 2h.

    A ratio well above 1 signals a divergent functional (step edges grow
    like ``1/h``); smooth densities give a ratio near 1.
    """
    if field_.is_radial:
        raise DensityError("refinement ratio is defined for grid fields")
    coarse = DensityField("cartesian_grid", field_.particle_number, values=field_.values[::2, ::2, ::2],
                          axes=2.0 * field_.axes, origin=field_.origin, periodic=field_.periodic)
    fine = f_grad13_l2(field_, floor)
    base = f_grad13_l2(coarse, floor)
    return fine / base if base > 0 else math.inf


def direct_coulomb(field_, rtol=1e-10):
    """``D(rho, rho) = 1/2 iint rho rho / |x - y|`` for radial densities (shell theorem)."""
    if not field_.is_radial:
        raise NotImplementedError("direct Coulomb energy is only implemented for radial densities")
    knots = sorted({0.0, field_.extent, *field_.radial_points()})

    def enclosed(r):
        # int_0^r rho(s) s^2 ds
        total = 0.0
        lo = 0.0
        for k in knots[1:]:
            hi = min(k, r)
            if hi > lo:
                total += integrate_1d(lambda s: field_.rho(s) * s * s, lo, hi, rtol=rtol, atol=1e-300)[0]
            lo = k
            if k >= r:
                break
        return total

    # D = (4 pi)^2 int rho(r) r Q(r) dr with Q the enclosed radial mass
    total = 0.0
    for a, b in zip(knots[:-1], knots[1:]):
        total += integrate_1d(lambda r: field_.rho(r) * r * enclosed(r), a, b, rtol=rtol, atol=1e-300)[0]
    value = (4.0 * math.pi) ** 2 * total
    if value < 0:
        raise QuadratureError("negative Coulomb self-energy", 0.0)
    return value


def radial_fourier_transform(field_, k):
    """``rho_hat(k) = int rho(x) exp(-i k.x) dx`` for a radial density."""
    k = float(k)
    if k == 0:
        return field_.particle_number
    return field_.integrate_radial(lambda r: field_.rho(r) * np.sinc(k * np.asarray(r) / math.pi))[0]


def direct_coulomb_fourier(field_, k_max=None):
    """Spectral route ``D = (1/pi) int_0^inf |rho_hat(k)|^2 dk``."""
    if not field_.is_radial:
        raise NotImplementedError("spectral Coulomb energy is only implemented for radial densities")
    if k_max is None:
        k_max = 60.0 / max(field_.extent / 12.0, 1e-12)
    val, _ = integrate_1d(lambda k: radial_fourier_transform(field_, k) ** 2, 0.0, k_max, rtol=1e-9,
                          atol=1e-14, limit=400)
    return val / math.pi


# -- bounds ---------------------------------------------------------------------------


@lru_cache(maxsize=1)
def bound_constants():
    """Re-derived constants used by the bound evaluators."""
    from .maximal import hl_constant_heat

    lda = kernel.derive_lda_constant()
    grad_l1 = kernel.derive_grad_l1_coefficient()
    grad13 = kernel.derive_grad13_l2_coefficient(hl_constant_heat())
    pref_l1 = kernel.alpha_prefactor(grad_l1, 3)
    pref_l2 = kernel.alpha_prefactor(grad13, 2)
    c_eighth, c_quarter = kernel.derive_chain_constants(pref_l1, pref_l2)
    return {
        "lda": lda,
        "alpha_max": kernel.alpha_max(),
        "grad_l1": grad_l1,
        "grad13_l2": grad13,
        "prefactor_l1": pref_l1,
        "prefactor_l2": pref_l2,
        "chain_l18": c_eighth,
        "chain_l14": c_quarter,
    }


@dataclass(frozen=True)
class FunctionalValues:
    f_rho43: float
    f_grad_l1: float
    f_grad13_l2: float  # inf when divergent

    @classmethod
    def of(cls, field_):
        try:
            g13 = f_grad13_l2(field_)
        except DivergentFunctional:
            g13 = math.inf
        return cls(f_rho43(field_), f_grad_l1(field_), g13)


@dataclass(frozen=True)
class BoundReport:
    f_rho43: float
    f_grad_l1: float
    f_grad13_l2: float
    variant: str
    alpha: float | None
    constant_used: float
    bound_value: float
    clamped: bool
    unclamped_value: float = math.nan
    provenance: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        for key in ("f_grad13_l2", "bound_value", "unclamped_value"):
            if not math.isfinite(d[key]):
                d[key] = None
        return d

    def to_json(self):
        return json.dumps({"schema": "xcbound.bound/1", **self.to_dict()}, indent=2)


def evaluate_bound(values, variant, alpha=None, label=""):
    """Assemble a lower bound on the indirect energy.

    ``values`` is a :class:`FunctionalValues` or a density field. The
    gradient variants use the given ``alpha`` or the optimal one; an alpha
    above the validity cap falls back to the 1.68 bound with ``clamped``
    set, keeping the formula value in ``unclamped_value``. Chain variants
    are the optimised forms and take no alpha.
    """
    if isinstance(values, DensityField):
        label = label or values.label
        values = FunctionalValues.of(values)
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {', '.join(VARIANTS)}")
    if alpha is not None and not alpha > 0:
        raise ValueError("alpha must be positive")
    consts = bound_constants()
    f43, fl1, f13 = values.f_rho43, values.f_grad_l1, values.f_grad13_l2
    prov = {"density": label, "lda_constant": consts["lda"], "alpha_max": consts["alpha_max"]}

    def report(alpha_, constant, bound, clamped=False, unclamped=None):
        unclamped = bound if unclamped is None else unclamped
        return BoundReport(f43, fl1, f13, variant, alpha_, constant, bound, clamped, unclamped, prov)

    def classic():
        return -kernel.CLASSIC_LO * f43

    if variant in ("classic_168", "classic_164"):
        if alpha is not None:
            raise ValueError("classic variants take no alpha")
        c = kernel.CLASSIC_LO if variant == "classic_168" else kernel.CHAN_HANDY
        return report(None, c, -c * f43)

    if variant in ("grad_l1", "grad13_l2"):
        power = 3 if variant == "grad_l1" else 2
        coeff = consts[variant]
        fg = fl1 if variant == "grad_l1" else f13
        if not math.isfinite(fg):
            return report(alpha, coeff, -math.inf)
        if alpha is None:
            opt = kernel.optimize_alpha(coeff, power, f43, fg)
            if opt.alpha_opt == 0.0:
                return report(None, coeff, -consts["lda"] * f43)
            alpha = opt.alpha_opt
        bound = -(consts["lda"] + alpha) * f43 - coeff * alpha ** (-power) * fg
        if alpha > consts["alpha_max"]:
            return report(alpha, kernel.CLASSIC_LO, classic(), clamped=True, unclamped=bound)
        return report(alpha, coeff, bound)

    if alpha is not None:
        raise ValueError("chain variants are already optimised over alpha")
    c = consts[variant]
    if not math.isfinite(f13):
        return report(None, c, -math.inf)
    if f13 == 0:
        return report(None, c, -consts["lda"] * f43)
    # alpha implied by the underlying gradient bounds, for the validity cap
    l1_proxy = 3.0 * math.sqrt(f43 * f13)
    a_eighth = kernel.optimize_alpha(consts["grad_l1"], 3, f43, l1_proxy).alpha_opt
    if variant == "chain_l18":
        a_eff = a_eighth
        corr = c * f13 ** 0.125 * f43 ** 0.875
    else:
        a_third = kernel.optimize_alpha(consts["grad13_l2"], 2, f43, f13).alpha_opt
        a_eff = a_third**0.6 * a_eighth**0.4
        corr = c * f13**0.25 * f43**0.75
    bound = -consts["lda"] * f43 - corr
    if a_eff > consts["alpha_max"]:
        return report(a_eff, kernel.CLASSIC_LO, classic(), clamped=True, unclamped=bound)
    return report(a_eff, c, bound)


def evaluate_all(field_):
    values = FunctionalValues.of(field_)
    return values, [evaluate_bound(values, v, label=field_.label) for v in VARIANTS]


# -- correction term ------------------------------------------------------------------


def _kappa(rho):
    # inverse screening radius 1/R with (4 pi / 3) R^3 rho = 1
    return np.cbrt(4.0 * math.pi / 3.0 * np.asarray(rho, dtype=float))


def _psi_antiderivative(d, kappa):
    """``int_0^d Psi(t kappa) t^-3 dt`` with the kernel cut at ``t = 1/kappa``."""
    dk = np.minimum(d * kappa, 1.0)
    # substitute t = d kappa: kappa^2 (t^4 / 8 - 3 t^2 / 4 + t)
    return kappa * kappa * (dk**4 / 8.0 - 0.75 * dk * dk + dk)


def _corr_kernel(r, s, rho_r, rho_s, k_r, k_s):
    a = np.abs(r - s)
    b = r + s
    j = (_psi_antiderivative(b, k_r) - _psi_antiderivative(a, k_r)) - (
        _psi_antiderivative(b, k_s) - _psi_antiderivative(a, k_s)
    )
    return r * s * (rho_r - rho_s) * j


def _panel_rule(knots, panels, order):
    x0, w0 = gauss_legendre(order)
    xs, ws = [], []
    for a, b in zip(knots[:-1], knots[1:]):
        edges = np.linspace(a, b, panels + 1)
        for lo, hi in zip(edges[:-1], edges[1:]):
            xs.append(lo + (hi - lo) * x0)
            ws.append((hi - lo) * w0)
    return np.concatenate(xs), np.concatenate(ws)


def _corr_sum(field_, panels, order, threads):
    knots = np.array(sorted({0.0, field_.extent, *field_.radial_points()}))
    r_nodes, r_weights = _panel_rule(knots, panels, order)
    rho_r_all = np.asarray(field_.rho(r_nodes), dtype=float)
    k_r_all = _kappa(rho_r_all)

    def row(i):
        r = r_nodes[i]
        inner = knots[knots < r]
        s, ws = _panel_rule(np.append(inner, r), panels, order)
        rho_s = np.asarray(field_.rho(s), dtype=float)
        vals = _corr_kernel(r, s, rho_r_all[i], rho_s, k_r_all[i], _kappa(rho_s))
        return pairwise_sum(vals * ws) * r_weights[i]

    rows = ordered_map(row, range(len(r_nodes)), threads)
    # symmetric integrand: twice the s < r triangle
    return 2.0 * 3.0 * math.pi * pairwise_sum(rows)


@dataclass(frozen=True)
class CorrResult:
    value: float
    error: float
    panels: int
    order: int


def corr_exact(field_, panels=CORR_PANELS, order=CORR_ORDER, threads=None):
    """Correction term ``(3/4pi) iint (rho(x)-rho(y)) Psi(|x-y|/R(x)) |x-y|^-4`` for radial densities.

    The angular integral is done in closed form, leaving a symmetrised
    double radial integral that vanishes on the diagonal. The error is the
    difference against a run with half as many panels.
    """
    if not field_.is_radial:
        raise DensityError("corr_exact needs an analytic radial density")
    fine = _corr_sum(field_, panels, order, threads)
    coarse = _corr_sum(field_, max(1, panels // 2), order, threads)
    err = abs(fine - coarse)
    if not math.isfinite(fine):
        raise QuadratureError("correction term did not evaluate to a finite number", err)
    return CorrResult(fine, err, panels, order)


def corr_periodic(field_, max_offsets=200_000):
    """Correction term per periodic cell of a grid density, by direct lattice sums.

    The double integral becomes a sum over grid offsets ``u`` inside the
    largest screening radius; for constant density every term vanishes.
    """
    if field_.is_radial or not field_.periodic:
        raise DensityError("corr_periodic needs a periodic grid field")
    vals = field_.values
    with np.errstate(divide="ignore"):
        kappa = _kappa(vals)
    if np.all(kappa > 0):
        r_max = 1.0 / kappa.min()
    else:
        r_max = math.inf
    span = np.linalg.norm(field_.axes, axis=1)
    shape = np.array(vals.shape)
    reach = np.minimum(np.ceil(r_max / span), shape // 2).astype(int)
    if np.prod(2 * reach + 1) > max_offsets:
        raise DensityError("screening radius spans too many grid offsets")
    dv = field_.cell_volume
    total = []
    for idx in np.ndindex(*(2 * reach + 1)):
        n = np.array(idx) - reach
        if not n.any():
            continue
        u = n @ field_.axes
        d = float(np.linalg.norm(u))
        shifted = np.roll(vals, shift=tuple(-n), axis=(0, 1, 2))
        psi = kernel.psi(np.minimum(d * kappa, 2.0))
        total.append(pairwise_sum(((vals - shifted) * psi).ravel()) / d**4)
    return 3.0 / (4.0 * math.pi) * dv * dv * pairwise_sum(total)


# -- certificates ---------------------------------------------------------------------


@dataclass(frozen=True)
class ChainRow:
    density: str
    inequality: str  # grad_l1 | grad13_l2
    alpha: float
    corr: float
    corr_error: float
    rhs: float
    margin: float
    status: str  # holds | fails | skipped
    reason: str = ""


@dataclass(frozen=True)
class ChainReport:
    rows: tuple

    @property
    def passed(self):
        return all(r.status != "fails" for r in self.rows)

    @property
    def min_margin(self):
        m = [r.margin for r in self.rows if r.status == "holds"]
        return min(m) if m else math.nan

    def to_csv(self):
        import csv
        import io

        buf = io.StringIO()
        cols = list(ChainRow.__dataclass_fields__)
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in asdict(r).items()})
        return buf.getvalue()


def verify_chain(field_, alphas=DEFAULT_ALPHAS, corr=None):
    """Check ``Corr >= -alpha f_rho43 - c alpha^-p f_grad`` for both gradient terms.

    An inequality holds when it survives the quadrature error of ``Corr``.
    A divergent gradient functional makes the right side ``-inf``; such rows
    are reported as skipped with the reason.
    """
    cap = kernel.alpha_max()
    for a in alphas:
        if not 0 < a <= cap:
            raise ValueError(f"alpha {a} outside (0, {cap:.4f}]")
    consts = bound_constants()
    if corr is None:
        corr = corr_exact(field_)
    vals = FunctionalValues.of(field_)
    rows = []
    for name, power, fg in (("grad_l1", 3, vals.f_grad_l1), ("grad13_l2", 2, vals.f_grad13_l2)):
        for a in alphas:
            if not math.isfinite(fg):
                rows.append(ChainRow(field_.label, name, a, corr.value, corr.error, -math.inf, math.inf,
                                     "skipped", "gradient functional diverges at a hard edge"))
                continue
            rhs = -a * vals.f_rho43 - consts[name] * a ** (-power) * fg
            margin = corr.value - rhs
            status = "holds" if margin >= corr.error else "fails"
            rows.append(ChainRow(field_.label, name, a, corr.value, corr.error, rhs, margin, status))
    return ChainReport(tuple(rows))


def default_chain_corpus():
    from . import density as dn

    return [
        dn.gaussian(1.0, 1.0),
        dn.gaussian(4.0, 0.7),
        dn.gaussian(0.5, 2.0),
        dn.exponential(1.0, 1.0),
        dn.exponential(10.0, 0.5),
        dn.smoothed_ball(2.0, 2.0, 0.3),
        dn.uniform_ball(1.0, 1.0),
    ]


@dataclass(frozen=True)
class ScalingReport:
    Z: tuple
    values: dict  # functional -> tuple over Z
    slopes: dict
    expected: dict
    discretization: dict = field(default_factory=dict)

    def max_deviation(self):
        return max(abs(self.slopes[k] - self.expected[k]) for k in self.slopes)


SCALING_EXPONENTS = {"f_rho43": 5.0 / 3.0, "f_grad_l1": 4.0 / 3.0, "f_grad13_l2": 1.0}


def tf_scaling_check(field_, Z_values=(1, 2, 4, 8)):
    """Log-log slopes of the local functionals under ``Z^2 rho(Z^(1/3) x)``.

    For grid fields the discretisation error is the relative change of each
    functional between spacing h and 2h.
    """
    Z_values = tuple(float(z) for z in Z_values)
    funcs = {"f_rho43": f_rho43, "f_grad_l1": f_grad_l1, "f_grad13_l2": f_grad13_l2}
    values = {k: [] for k in funcs}
    for z in Z_values:
        scaled = field_.scaled(z)
        for k, f in funcs.items():
            values[k].append(f(scaled))
    logz = np.log(Z_values)
    slopes = {}
    for k in funcs:
        if len(set(Z_values)) < 2:
            slopes[k] = SCALING_EXPONENTS[k]
        else:
            slopes[k] = float(np.polyfit(logz, np.log(values[k]), 1)[0])
    disc = {}
    if not field_.is_radial:
        coarse = DensityField("cartesian_grid", field_.particle_number, values=field_.values[::2, ::2, ::2],
                              axes=2.0 * field_.axes, origin=field_.origin, periodic=field_.periodic)
        for k, f in funcs.items():
            fine = f(field_)
            disc[k] = abs(fine - f(coarse)) / fine
    return ScalingReport(Z_values, {k: tuple(v) for k, v in values.items()}, slopes,
                         dict(SCALING_EXPONENTS), disc)
