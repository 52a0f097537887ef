"""Classical Jellium on unit-density lattices and the indirect-energy shift.

Energies are per particle, in Coulomb units at density one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .lattice import (
    BravaisLattice,
    build_ws_cell,
    cell_moments,
    polyhedron_potential,
    polyhedron_potential_quadrature,
    quadrupole_free,
)
from .quadrature import ordered_map, pairwise_sum, tetra_quadratic_rule, tetra_rule

DEFAULT_SHELL_CUTOFF = 25
MAX_FINITE_N = 1000
TAIL_TOLERANCE = 1e-3  # half the 2e-3 budget on lattice energies
_CHUNK = 8192


@dataclass(frozen=True)
class LatticeSumResult:
    value: float
    shell_cutoff: int
    tail_estimate: float
    converged: bool
    radius: float
    n_points: int


@lru_cache(maxsize=32)
def _cell_cached(kind, basis_bytes):
    basis = np.frombuffer(basis_bytes).reshape(3, 3)
    return build_ws_cell(BravaisLattice(basis, kind=kind))


def ws_cell(lattice):
    """Wigner-Seitz cell of ``lattice`` (cached per basis)."""
    return _cell_cached(lattice.kind, np.ascontiguousarray(lattice.basis).tobytes())


def _as_lattice(lattice):
    if isinstance(lattice, str):
        return BravaisLattice.named(lattice)
    return lattice


def _require_symmetric(cell):
    if not quadrupole_free(cell):
        raise ValueError(
            "cell has a dipole or anisotropic quadrupole; the shift formula does not apply"
        )


def cell_second_moment(cell):
    """``(2 pi / 3) int_Q |x|^2 dx``, exact per-tetrahedron quadrature."""
    total = 0.0
    for t in cell.tetrahedra:
        x, w = tetra_quadratic_rule(t)
        total += float(w @ np.sum(x * x, axis=1))
    return 2.0 * math.pi / 3.0 * total


def ball_moment_lower_bound():
    """Same moment on the unit-volume ball: ``(3/10)(4 pi / 3)^(1/3)``."""
    return 0.3 * (4.0 * math.pi / 3.0) ** (1.0 / 3.0)


def cell_self_potential(cell, method="analytic", order=10):
    """``int_Q dy / |y|`` for a cell containing the origin."""
    if not cell.contains(np.zeros((1, 3)))[0]:
        raise ValueError("origin must lie inside the cell")
    if method == "analytic":
        return float(polyhedron_potential(cell, np.zeros((1, 3)))[0])
    if method == "quadrature":
        # the origin fan puts the singularity on every collapsed apex
        total = 0.0
        for t in cell.tetrahedra:
            q, w = tetra_rule(t, order)
            total += float(w @ (1.0 / np.linalg.norm(q, axis=1)))
        return total
    raise ValueError(f"unknown method {method!r}")


def screened_potential(lattice, x, method="analytic", order=8, levels=1):
    """``W(x) = 1/|x| - int_Q dy / |x - y|`` at one or many points ``x != 0``."""
    cell = ws_cell(_as_lattice(lattice))
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    r = np.linalg.norm(pts, axis=1)
    if np.any(r < 1e-14):
        raise ValueError("W is singular at x = 0; use cell_self_potential")
    if method == "analytic":
        w = 1.0 / r - polyhedron_potential(cell, pts)
    elif method == "quadrature":
        w = np.array(
            [1.0 / ri - polyhedron_potential_quadrature(cell, p, order, levels) for p, ri in zip(pts, r)]
        )
    else:
        raise ValueError(f"unknown method {method!r}")
    return float(w[0]) if single else w


def _w_chunked(cell, pts):
    chunks = [pts[i:i + _CHUNK] for i in range(0, len(pts), _CHUNK)]

    def work(chunk):
        return 1.0 / np.linalg.norm(chunk, axis=1) - polyhedron_potential(cell, chunk)

    parts = ordered_map(work, chunks)
    return np.concatenate(parts) if parts else np.zeros(0)


def jellium_energy(lattice, shell_cutoff=DEFAULT_SHELL_CUTOFF):
    """Jellium energy per particle by a direct shell sum of ``W``.

    The sum runs over lattice points within ``shell_cutoff`` nearest-neighbour
    distances. ``tail_estimate`` bounds the omitted part assuming the
    envelope ``|W(x)| <= C |x|^-4`` fitted on the outer half of the sum.
    """
    lattice = _as_lattice(lattice)
    if shell_cutoff < 5:
        raise ValueError("shell_cutoff must be at least 5")
    cell = ws_cell(lattice)
    _require_symmetric(cell)
    radius = shell_cutoff * lattice.nearest_neighbour_distance()
    pts = lattice.points_within(radius)
    r = np.linalg.norm(pts, axis=1)
    w = _w_chunked(cell, pts)
    lattice_sum = pairwise_sum(w)
    outer = r >= 0.5 * radius
    envelope = float(np.max(np.abs(w[outer]) * r[outer] ** 4))
    tail = 0.5 * 4.0 * math.pi * envelope / radius
    value = 0.5 * lattice_sum - 0.5 * cell_self_potential(cell) - 0.5 * cell_second_moment(cell)
    return LatticeSumResult(
        value=value,
        shell_cutoff=int(shell_cutoff),
        tail_estimate=tail,
        converged=bool(tail <= TAIL_TOLERANCE),
        radius=float(radius),
        n_points=int(len(pts)),
    )


def indirect_energy(lattice, shell_cutoff=DEFAULT_SHELL_CUTOFF):
    """Indirect energy per particle of the shifted-lattice trial state."""
    lattice = _as_lattice(lattice)
    return jellium_energy(lattice, shell_cutoff).value + cell_second_moment(ws_cell(lattice))


# -- Fourier-side checks -------------------------------------------------------

DEFAULT_K_VALUES = (0.32, 0.16, 0.08, 0.04)
DIRECTIONS = ((1.0, 0.0, 0.0), (1.0, 1.0, 0.0), (1.0, 1.0, 1.0))


@lru_cache(maxsize=8)
def _cell_rule(kind, basis_bytes, order):
    cell = _cell_cached(kind, basis_bytes)
    pts, wts = [], []
    for t in cell.tetrahedra:
        q, w = tetra_rule(t, order)
        pts.append(q)
        wts.append(w)
    return np.vstack(pts), np.concatenate(wts)


def cell_rule(lattice, order=6):
    """Quadrature nodes and weights covering the Wigner-Seitz cell."""
    return _cell_rule(lattice.kind, np.ascontiguousarray(lattice.basis).tobytes(), order)


def one_minus_form_factor(lattice, k):
    """``1 - int_Q exp(-i k.x) dx`` for a real wavevector, computed cancellation-free."""
    q, w = cell_rule(lattice, 8)
    phase = q @ np.asarray(k, dtype=float)
    # Q is inversion symmetric, so the sine part vanishes; 1 - cos = 2 sin^2
    return float(w @ (2.0 * np.sin(0.5 * phase) ** 2)) + (1.0 - float(w.sum()))


def fourier_shift_curve(lattice, k_values=DEFAULT_K_VALUES, direction=(1.0, 0.0, 0.0), nu=0.0):
    """``4 pi (nu^2 + k^2)^-1 (1 - int_Q e^{-ik.x})`` along one direction."""
    lattice = _as_lattice(lattice)
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    ks = np.asarray(k_values, dtype=float)
    vals = np.array(
        [4.0 * math.pi / (nu * nu + k * k) * one_minus_form_factor(lattice, k * d) for k in ks]
    )
    return ks, vals


def _extrapolate_k2(ks, vals):
    # a + b k^2 + c k^4 when enough samples, else a + b k^2
    deg = 2 if len(ks) >= 4 else 1
    A = np.vander(ks**2, deg + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(A, vals, rcond=None)
    return float(coef[0])


def shift_fourier_check(lattice, k_values=DEFAULT_K_VALUES, directions=DIRECTIONS, per_direction=False):
    """Extrapolate the small-``k`` Fourier expression of ``int W`` to ``k -> 0``."""
    lattice = _as_lattice(lattice)
    ks = sorted(k_values, reverse=True)
    if any(k <= 0 for k in ks):
        raise ValueError("k values must be positive")
    limits = []
    for d in directions:
        k, v = fourier_shift_curve(lattice, ks, d)
        limits.append(_extrapolate_k2(k, v))
    if per_direction:
        return limits
    return float(np.mean(limits))


def yukawa_shift(lattice, nu, k_values=None, directions=DIRECTIONS):
    """Same extrapolation with ``|k|^-2`` replaced by ``(nu^2 + |k|^2)^-1``; vanishes.

    The Yukawa expression is a function of ``k / nu``, so the default samples
    are scaled by ``min(nu, 1)`` to stay in the small-``k`` regime.
    """
    if nu <= 0:
        raise ValueError("nu must be positive")
    lattice = _as_lattice(lattice)
    if k_values is None:
        k_values = [min(nu, 1.0) * f for f in (0.08, 0.04, 0.02, 0.01)]
    limits = []
    for d in directions:
        k, v = fourier_shift_curve(lattice, sorted(k_values, reverse=True), d, nu=nu)
        limits.append(_extrapolate_k2(k, v))
    return float(np.mean(limits))


# -- finite samples --------------------------------------------------------------


def carve_points(lattice, n, domain="cube"):
    """The ``n`` lattice points closest to the origin in the cube or ball metric."""
    lattice = _as_lattice(lattice)
    if n < 1:
        raise ValueError("need at least one point")
    if n > MAX_FINITE_N:
        raise ValueError(f"finite samples are limited to N <= {MAX_FINITE_N}")
    radius = 1.0
    while True:
        pts = lattice.points_within(radius, include_origin=True)
        if domain == "cube":
            metric = np.max(np.abs(pts), axis=1)
        elif domain == "ball":
            metric = np.linalg.norm(pts, axis=1)
        else:
            raise ValueError(f"unknown domain {domain!r}")
        inner = metric <= radius / math.sqrt(3.0) if domain == "cube" else metric <= radius
        if inner.sum() >= n:
            break
        radius *= 1.5
    key = np.round(metric, 9)
    order = np.lexsort((pts[:, 2], pts[:, 1], pts[:, 0], np.round(np.linalg.norm(pts, axis=1), 9), key))
    return pts[order[:n]]


@dataclass(frozen=True)
class FiniteSample:
    n: int
    domain: str
    coulomb: float  # U = sum_{i != j} 1/|x_i - x_j|
    interaction: float  # I = sum_i int_Omega dy / |x_i - y|
    direct: float  # D = int int_{Omega x Omega} dx dy / |x - y|
    jellium_w_form: float  # E_Jel from the screened-potential decomposition

    @property
    def jellium(self):
        return 0.5 * self.coulomb - self.interaction + 0.5 * self.direct

    @property
    def indirect(self):
        return 0.5 * self.coulomb - 0.5 * self.direct


def _pair_table(pts, lattice):
    n_int = np.rint(pts @ np.linalg.inv(lattice.basis)).astype(np.int64)
    diff = (n_int[:, None, :] - n_int[None, :, :]).reshape(-1, 3)
    uniq, counts = np.unique(diff, axis=0, return_counts=True)
    nonzero = np.any(uniq != 0, axis=1)
    return uniq[nonzero] @ lattice.basis, counts[nonzero].astype(float)


def _cell_convolved_w(cell, lattice, d, nn):
    """``int_Q W(d + q) dq`` with accuracy tiers by distance."""
    r = np.linalg.norm(d, axis=1)
    out = np.empty(len(d))
    tiers = ((r <= 1.6 * nn, 6), ((r > 1.6 * nn) & (r <= 3.0 * nn), 3), ((r > 3.0 * nn) & (r <= 5.0 * nn), 2))
    far = r > 5.0 * nn
    for mask, order in tiers:
        if not mask.any():
            continue
        q, w = cell_rule(lattice, order)
        idx = np.flatnonzero(mask)
        per_block = max(1, 65536 // len(q))
        blocks = [idx[i:i + per_block] for i in range(0, len(idx), per_block)]

        def work(block, q=q, w=w):
            z = (d[block][:, None, :] + q[None, :, :]).reshape(-1, 3)
            vals = 1.0 / np.linalg.norm(z, axis=1) - polyhedron_potential(cell, z)
            return vals.reshape(len(block), len(q)) @ w

        out[idx] = np.concatenate(ordered_map(work, blocks))
    if far.any():
        # W is harmonic away from Q and the cell has isotropic second moments,
        # so the cell average equals W(d) up to fourth-order terms
        out[far] = 1.0 / r[far] - polyhedron_potential(cell, d[far])
    return out


def cell_cell_self(lattice, order=6):
    """``int int_{Q x Q} dx dy / |x - y|`` by quadrature of the exact cell potential."""
    lattice = _as_lattice(lattice)
    cell = ws_cell(lattice)
    q, w = cell_rule(lattice, order)
    return float(w @ polyhedron_potential(cell, q))


def finite_sample(lattice, n, domain="cube"):
    """Coulomb, interaction and direct terms for ``n`` points and their cells."""
    lattice = _as_lattice(lattice)
    cell = ws_cell(lattice)
    pts = carve_points(lattice, n, domain)
    nn = lattice.nearest_neighbour_distance()
    d, counts = _pair_table(pts, lattice)
    r = np.linalg.norm(d, axis=1)
    v_self = cell_self_potential(cell)
    c_self = cell_cell_self(lattice)
    w = 1.0 / r - polyhedron_potential(cell, d) if len(d) else np.zeros(0)
    wq = _cell_convolved_w(cell, lattice, d, nn) if len(d) else np.zeros(0)

    coulomb = pairwise_sum(counts / r)
    interaction = n * v_self + pairwise_sum(counts * (1.0 / r - w))
    # C(d) = int_Q V_Q(d + q) dq = 1/|d| - W(d) - (W * 1_Q)(d)
    direct = n * c_self + pairwise_sum(counts * (1.0 / r - w - wq))
    w_form = (
        0.5 * pairwise_sum(counts * w)
        - 0.5 * n * v_self
        - 0.5 * (pairwise_sum(counts * wq) + n * (v_self - c_self))
    )
    return FiniteSample(n, domain, coulomb, interaction, direct, w_form)


def finite_n_indirect(lattice, n, domain="cube"):
    """Total indirect energy of ``n`` points on the lattice with their cells as background."""
    return finite_sample(lattice, n, domain).indirect


def fit_surface_law(ns, per_particle):
    """Least-squares fit ``e(N) = a + b N^(-1/3)``; returns ``(a, b)``."""
    x = np.asarray(ns, dtype=float) ** (-1.0 / 3.0)
    A = np.vstack([np.ones_like(x), x]).T
    (a, b), *_ = np.linalg.lstsq(A, np.asarray(per_particle, dtype=float), rcond=None)
    return float(a), float(b)


def decomposition_check(lattice, n, domain="cube", shell_cutoff=DEFAULT_SHELL_CUTOFF):
    """U, I, D split for ``n`` points compared with the infinite-lattice limits."""
    lattice = _as_lattice(lattice)
    s = finite_sample(lattice, n, domain)
    shift = cell_second_moment(ws_cell(lattice))
    e_jel = jellium_energy(lattice, shell_cutoff).value
    u_minus_i = (s.coulomb - s.interaction) / (2 * n)
    i_minus_d = (s.interaction - s.direct) / (2 * n)
    return {
        "lattice": lattice.kind,
        "n": n,
        "domain": domain,
        "U": s.coulomb,
        "I": s.interaction,
        "D": s.direct,
        "u_minus_i_per_2n": u_minus_i,
        "i_minus_d_per_2n": i_minus_d,
        "u_minus_i_limit": e_jel + 0.5 * shift,
        "i_minus_d_limit": 0.5 * shift,
        "indirect_per_particle": s.indirect / n,
        "jellium_per_particle": s.jellium / n,
        "jellium_w_form_per_particle": s.jellium_w_form / n,
        # algebra: indirect = (U - I)/2 + (I - D)/2, jellium = (U - I)/2 - (I - D)/2
        "identity_indirect": u_minus_i + i_minus_d - s.indirect / n,
        "identity_jellium": u_minus_i - i_minus_d - s.jellium / n,
        "identity_w_form": (s.jellium - s.jellium_w_form) / n,
    }


def lattice_report(lattice, shell_cutoff=DEFAULT_SHELL_CUTOFF):
    lattice = _as_lattice(lattice)
    res = jellium_energy(lattice, shell_cutoff)
    shift = cell_second_moment(ws_cell(lattice))
    return {
        "lattice": lattice.kind,
        "e_jel": res.value,
        "shift": shift,
        "indirect": res.value + shift,
        "shell_cutoff": res.shell_cutoff,
        "tail_estimate": res.tail_estimate,
        "converged": res.converged,
    }
