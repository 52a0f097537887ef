"""Electron densities: analytic radial profiles and Cartesian grids (cube files)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .quadrature import integrate_1d


class DensityError(ValueError):
    """Invalid density or malformed density file."""


ANALYTIC_TYPES = ("gaussian", "exponential", "uniform_ball", "smoothed_ball")
NUMBER_RTOL = 1e-6


@dataclass(frozen=True)
class DensityField:
    """Non-negative density on 3-space.

    ``kind`` is ``"analytic_radial"`` (``rho``/``drho`` callables of the
    radius, integrals cut at ``extent``, hard edges listed in ``jumps`` as
    ``(radius, drop)``) or ``"cartesian_grid"`` (``values`` with row step
    vectors ``axes`` and ``origin``).
    """

    kind: str
    particle_number: float
    rho: object = None
    drho: object = None
    extent: float = math.inf
    breakpoints: tuple = ()
    jumps: tuple = ()
    values: np.ndarray = None
    axes: np.ndarray = None
    origin: np.ndarray = None
    periodic: bool = False
    label: str = ""
    spec: dict = field(default=None, compare=False)

    @property
    def is_radial(self):
        return self.kind == "analytic_radial"

    @property
    def cell_volume(self):
        return abs(float(np.linalg.det(self.axes)))

    def radial_points(self):
        return tuple(b for b in (*self.breakpoints, *(j[0] for j in self.jumps)) if 0 < b < self.extent)

    def integrate_radial(self, func, rtol=1e-10):
        """``4 pi int r^2 func(r) dr`` over the support, split at breakpoints."""
        knots = sorted({0.0, self.extent, *self.radial_points()})
        total = 0.0
        err = 0.0
        for a, b in zip(knots[:-1], knots[1:]):
            v, e = integrate_1d(lambda r: 4.0 * math.pi * r * r * func(r), a, b, rtol=rtol,
                                atol=1e-14, limit=400)
            total += v
            err += e
        return total, err

    def scaled(self, Z):
        """Thomas-Fermi scaling ``Z^2 rho(Z^(1/3) x)``."""
        if Z <= 0:
            raise DensityError("Z must be positive")
        k = Z ** (1.0 / 3.0)
        if self.is_radial:
            rho, drho = self.rho, self.drho
            return replace(
                self,
                particle_number=self.particle_number * Z,
                rho=lambda r: Z**2 * rho(k * np.asarray(r)),
                drho=lambda r: Z**2 * k * drho(k * np.asarray(r)),
                extent=self.extent / k,
                breakpoints=tuple(b / k for b in self.breakpoints),
                jumps=tuple((r / k, Z**2 * d) for r, d in self.jumps),
                label=f"{self.label}*Z{Z:g}",
            )
        return replace(self, particle_number=self.particle_number * Z, values=self.values * Z**2,
                       axes=self.axes / k, origin=self.origin / k, label=f"{self.label}*Z{Z:g}")

    def dilated(self, lam):
        """Mass-preserving dilation ``lam^3 rho(lam x)``."""
        if lam <= 0:
            raise DensityError("dilation must be positive")
        if self.is_radial:
            rho, drho = self.rho, self.drho
            return replace(
                self,
                rho=lambda r: lam**3 * rho(lam * np.asarray(r)),
                drho=lambda r: lam**4 * drho(lam * np.asarray(r)),
                extent=self.extent / lam,
                breakpoints=tuple(b / lam for b in self.breakpoints),
                jumps=tuple((r / lam, lam**3 * d) for r, d in self.jumps),
                label=f"{self.label}@{lam:g}",
            )
        return replace(self, values=self.values * lam**3, axes=self.axes / lam, origin=self.origin / lam)

    def times(self, c):
        """Multiply the density by a positive constant."""
        if c <= 0:
            raise DensityError("factor must be positive")
        if self.is_radial:
            rho, drho = self.rho, self.drho
            return replace(self, particle_number=self.particle_number * c,
                           rho=lambda r: c * rho(r), drho=lambda r: c * drho(r),
                           jumps=tuple((r, c * d) for r, d in self.jumps))
        return replace(self, particle_number=self.particle_number * c, values=self.values * c)


def _checked_radial(field_, declared):
    n, _ = field_.integrate_radial(field_.rho)
    if declared is not None and abs(n - declared) > NUMBER_RTOL * max(1.0, abs(declared)):
        raise DensityError(f"density integrates to {n!r}, declared N = {declared!r}")
    return replace(field_, particle_number=n)


def gaussian(N=1.0, width=1.0):
    """``N width^-3 exp(-pi r^2 / width^2)``."""
    if width <= 0 or N <= 0:
        raise DensityError("width and N must be positive")
    a = math.pi / width**2
    amp = N / width**3

    def rho(r):
        return amp * np.exp(-a * np.asarray(r) ** 2)

    def drho(r):
        r = np.asarray(r)
        return -2.0 * a * r * rho(r)

    f = DensityField("analytic_radial", N, rho, drho, extent=12.0 * width,
                     breakpoints=(width, 2.0 * width, 4.0 * width), label=f"gaussian(N={N:g},w={width:g})",
                     spec={"type": "gaussian", "parameters": {"width": width}, "N": N})
    return _checked_radial(f, N)


def exponential(N=1.0, length=1.0):
    """``N exp(-r / length) / (8 pi length^3)``."""
    if length <= 0 or N <= 0:
        raise DensityError("length and N must be positive")
    amp = N / (8.0 * math.pi * length**3)

    def rho(r):
        return amp * np.exp(-np.asarray(r) / length)

    def drho(r):
        return -rho(r) / length

    f = DensityField("analytic_radial", N, rho, drho, extent=80.0 * length,
                     breakpoints=(length, 5.0 * length, 20.0 * length),
                     label=f"exponential(N={N:g},l={length:g})",
                     spec={"type": "exponential", "parameters": {"length": length}, "N": N})
    return _checked_radial(f, N)


def uniform_ball(N=1.0, radius=1.0):
    """Constant density on a ball; the edge is a jump of the full height."""
    if radius <= 0 or N <= 0:
        raise DensityError("radius and N must be positive")
    height = 3.0 * N / (4.0 * math.pi * radius**3)

    def rho(r):
        return np.where(np.asarray(r) <= radius, height, 0.0)

    def drho(r):
        return np.zeros_like(np.asarray(r, dtype=float))

    f = DensityField("analytic_radial", N, rho, drho, extent=1.5 * radius, jumps=((radius, height),),
                     label=f"uniform_ball(N={N:g},R={radius:g})",
                     spec={"type": "uniform_ball", "parameters": {"radius": radius}, "N": N})
    return _checked_radial(f, N)


def smoothed_ball(N=1.0, radius=2.0, width=0.3):
    """Fermi-function ball ``A / (1 + exp((r - radius) / width))`` normalised to ``N``."""
    if radius <= 0 or width <= 0 or N <= 0:
        raise DensityError("radius, width and N must be positive")
    extent = radius + 40.0 * width

    def shape(r):
        return 0.5 * (1.0 - np.tanh(0.5 * (np.asarray(r) - radius) / width))

    norm, _ = integrate_1d(lambda r: 4.0 * math.pi * r * r * shape(r), 0.0, extent, rtol=1e-12,
                           points=[radius])
    amp = N / norm

    def rho(r):
        return amp * shape(r)

    def drho(r):
        s = shape(r)
        return -amp * s * (1.0 - s) / width

    f = DensityField("analytic_radial", N, rho, drho, extent=extent,
                     breakpoints=(max(radius - 5 * width, 1e-3), radius, radius + 5 * width),
                     label=f"smoothed_ball(N={N:g},R={radius:g},w={width:g})",
                     spec={"type": "smoothed_ball", "parameters": {"radius": radius, "width": width}, "N": N})
    return _checked_radial(f, N)


_BUILDERS = {
    "gaussian": gaussian,
    "exponential": exponential,
    "uniform_ball": uniform_ball,
    "smoothed_ball": smoothed_ball,
}


def from_spec(spec):
    """Build an analytic density from ``{type, parameters, N}``."""
    if not isinstance(spec, dict) or "type" not in spec:
        raise DensityError("density spec needs a 'type' field")
    kind = spec["type"]
    if kind not in _BUILDERS:
        raise DensityError(f"unknown density type {kind!r}; expected one of {', '.join(ANALYTIC_TYPES)}")
    params = dict(spec.get("parameters") or {})
    try:
        return _BUILDERS[kind](N=float(spec.get("N", 1.0)), **{k: float(v) for k, v in params.items()})
    except TypeError as exc:
        raise DensityError(f"bad parameters for {kind}: {exc}") from exc


def load_spec(path):
    """Read a density spec from a JSON or YAML file."""
    import json

    with open(path) as fh:
        text = fh.read()
    try:
        spec = json.loads(text)
    except json.JSONDecodeError:
        import yaml

        spec = yaml.safe_load(text)
    return from_spec(spec)


def grid_field(values, spacing, origin=None, periodic=False, label="grid"):
    """Density sampled on a Cartesian grid; ``spacing`` is a scalar, 3-vector or 3x3 step matrix."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 3:
        raise DensityError("grid values must be a 3D array")
    if np.any(values < 0) or not np.all(np.isfinite(values)):
        raise DensityError("grid density must be finite and non-negative")
    spacing = np.asarray(spacing, dtype=float)
    if spacing.ndim == 0:
        axes = np.eye(3) * float(spacing)
    elif spacing.shape == (3,):
        axes = np.diag(spacing)
    else:
        axes = spacing.reshape(3, 3)
    if abs(np.linalg.det(axes)) < 1e-300:
        raise DensityError("degenerate grid axes")
    origin = np.zeros(3) if origin is None else np.asarray(origin, dtype=float)
    n = float(np.sum(values)) * abs(float(np.linalg.det(axes)))
    return DensityField("cartesian_grid", n, values=values, axes=axes, origin=origin,
                        periodic=periodic, label=label)


def sample_on_grid(field_, n, half_width, periodic=False):
    """Sample a radial field at the nodes of a centred ``n^3`` grid."""
    h = 2.0 * half_width / n
    ax = -half_width + h * (np.arange(n) + 0.5)
    X, Y, Z = np.meshgrid(ax, ax, ax, indexing="ij")
    vals = field_.rho(np.sqrt(X**2 + Y**2 + Z**2))
    return grid_field(vals, h, origin=np.full(3, ax[0]), periodic=periodic, label=f"{field_.label}@grid{n}")


# -- Gaussian cube format ------------------------------------------------------------


@dataclass(frozen=True)
class CubeVolume:
    comments: tuple
    origin: np.ndarray
    counts: tuple
    axes: np.ndarray
    atoms: tuple  # (Z, charge, x, y, z)
    values: np.ndarray


def read_cube(path):
    """Parse a cube file. Lengths are Bohr; values are stored z-fastest."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if len(lines) < 6:
        raise DensityError(f"{path}: truncated header ({len(lines)} lines)")
    comments = (lines[0], lines[1])

    def fields(lineno, n, kinds):
        parts = lines[lineno].split()
        if len(parts) < n:
            raise DensityError(f"{path}:{lineno + 1}: expected {n} fields, got {len(parts)}")
        try:
            return [k(p) for k, p in zip(kinds, parts[:n])]
        except ValueError as exc:
            raise DensityError(f"{path}:{lineno + 1}: {exc}") from exc

    natoms, ox, oy, oz = fields(2, 4, (int, float, float, float))
    if natoms < 0:
        raise DensityError(
            f"{path}:3: negative atom count marks an orbital cube file; only density cubes are supported"
        )
    counts = []
    axes = []
    for k in range(3):
        n, sx, sy, sz = fields(3 + k, 4, (int, float, float, float))
        if n <= 0:
            raise DensityError(
                f"{path}:{4 + k}: axis count must be positive (negative counts flag Angstrom units, unsupported)"
            )
        counts.append(n)
        axes.append((sx, sy, sz))
    atoms = []
    for i in range(natoms):
        lineno = 6 + i
        if lineno >= len(lines):
            raise DensityError(f"{path}:{lineno + 1}: missing atom record")
        z, q, x, y, w = fields(lineno, 5, (int, float, float, float, float))
        atoms.append((z, q, x, y, w))
    start = 6 + natoms
    tokens = []
    for lineno in range(start, len(lines)):
        tokens.extend(lines[lineno].split())
    expected = counts[0] * counts[1] * counts[2]
    if len(tokens) != expected:
        raise DensityError(
            f"{path}:{start + 1}: value stream has {len(tokens)} entries, header declares "
            f"{counts[0]}x{counts[1]}x{counts[2]} = {expected}"
        )
    try:
        values = np.array([float(t) for t in tokens]).reshape(counts)
    except ValueError as exc:
        raise DensityError(f"{path}: bad value in data block: {exc}") from exc
    return CubeVolume(comments, np.array([ox, oy, oz]), tuple(counts), np.array(axes), tuple(atoms), values)


def write_cube(path, values, axes, origin=(0.0, 0.0, 0.0), comments=("xcbound", "density"), atoms=()):
    values = np.asarray(values, dtype=float)
    axes = np.asarray(axes, dtype=float)
    with open(path, "w") as fh:
        fh.write(f"{comments[0]}\n{comments[1]}\n")
        fh.write(f"{len(atoms):5d} {origin[0]: .12e} {origin[1]: .12e} {origin[2]: .12e}\n")
        for n, a in zip(values.shape, axes):
            fh.write(f"{n:5d} {a[0]: .12e} {a[1]: .12e} {a[2]: .12e}\n")
        for z, q, x, y, w in atoms:
            fh.write(f"{int(z):5d} {q: .12e} {x: .12e} {y: .12e} {w: .12e}\n")
        flat = values.reshape(values.shape[0] * values.shape[1], values.shape[2])
        for row in flat:
            for i in range(0, len(row), 6):
                fh.write(" ".join(f"{v: .16e}" for v in row[i:i + 6]) + "\n")


@dataclass(frozen=True)
class CubeIngest:
    field: DensityField
    clamped: int


def parse_cube(path, clamp_negative=False):
    """Read a density cube into a grid field.

    Negative voxels are an error unless ``clamp_negative`` is set, in which
    case they are set to zero and counted.
    """
    cube = read_cube(path)
    values = cube.values.copy()
    negative = int(np.count_nonzero(values < 0))
    if negative and not clamp_negative:
        idx = np.argwhere(values < 0)[0]
        raise DensityError(f"{path}: {negative} negative density values (first at index {tuple(idx)})")
    values[values < 0] = 0.0
    field_ = grid_field(values, cube.axes, origin=cube.origin, label=str(path))
    return CubeIngest(field_, negative)
