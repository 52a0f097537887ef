"""Quadrature rules, adaptive 1D integration and deterministic reductions."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import roots_legendre

# Relative tolerance used for every one-dimensional constant integral.
DEFAULT_RTOL = 1e-8

THREADS_ENV = "XCBOUND_THREADS"


class QuadratureError(ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


def integrate_1d(func, a, b, rtol=DEFAULT_RTOL, atol=0.0, points=None, limit=200):
    """Adaptive Gauss-Kronrod integral of ``func`` over ``[a, b]``.

    Returns ``(value, abserr)``. Raises :class:`QuadratureError` when the
    error estimate exceeds ``max(atol, rtol * |value|)``.
    """
    kwargs = {"epsrel": rtol, "epsabs": atol, "limit": limit, "full_output": 1}
    if points is not None and np.isfinite(a) and np.isfinite(b):
        kwargs["points"] = [p for p in points if a < p < b]
    out = integrate.quad(func, a, b, **kwargs)
    value, err = out[0], out[1]
    target = max(atol, rtol * abs(value))
    # quad's estimate is conservative; allow a factor 10 before failing
    if not np.isfinite(value) or err > 10 * target and err > 1e-14:
        raise QuadratureError(
            f"quadrature on [{a}, {b}] did not converge: estimate {value!r}, "
            f"error {err:.3e} > target {target:.3e}",
            achieved=err,
        )
    return value, err


@lru_cache(maxsize=None)
def gauss_legendre(n, a=0.0, b=1.0):
    """Gauss-Legendre nodes and weights mapped onto ``[a, b]``."""
    x, w = roots_legendre(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


@lru_cache(maxsize=None)
def _apex_rule(n):
    # reference map: X = t * (e1 + u (e2 - e1) + u v (e3 - e2)), jacobian t^2 u
    t, wt = gauss_legendre(n)
    u, wu = gauss_legendre(n)
    v, wv = gauss_legendre(n)
    T, U, V = np.meshgrid(t, u, v, indexing="ij")
    W = (wt[:, None, None] * wu[None, :, None] * wv[None, None, :]) * T**2 * U
    # barycentric coordinates on the opposite face (e1, e2, e3)
    b1 = 1.0 - U
    b2 = U * (1.0 - V)
    b3 = U * V
    lam = np.stack([1.0 - T, T * b1, T * b2, T * b3], axis=-1).reshape(-1, 4)
    # reference tetra volume is 1/6 and the map has determinant 1
    return lam, W.reshape(-1)


def tetra_rule(vertices, n=6):
    """Conical product rule on a tetrahedron with the collapse at vertex 0.

    ``vertices`` has shape ``(4, 3)``. The radial direction from vertex 0 is
    integrated with Gauss-Legendre in ``t`` against the ``t**2`` Jacobian,
    which makes integrands with a ``1/|x - v0|`` singularity smooth
    (Duffy-type transform). Returns ``(points, weights)``.
    """
    vertices = np.asarray(vertices, dtype=float)
    lam, w = _apex_rule(n)
    det = abs(np.linalg.det((vertices[1:] - vertices[0]).T))
    points = lam @ vertices
    return points, w * det


def tetra_volume(vertices):
    vertices = np.asarray(vertices, dtype=float)
    return abs(np.linalg.det((vertices[1:] - vertices[0]).T)) / 6.0


def tetra_quadratic_rule(vertices):
    """Four-point rule, exact for polynomials of degree two."""
    vertices = np.asarray(vertices, dtype=float)
    a = 0.5854101966249685
    b = 0.1381966011250105
    bary = np.full((4, 4), b)
    np.fill_diagonal(bary, a)
    vol = tetra_volume(vertices)
    return bary @ vertices, np.full(4, vol / 4.0)


def subdivide_tetra(vertices):
    """Split a tetrahedron into eight children of equal volume."""
    v = np.asarray(vertices, dtype=float)
    m = {(i, j): 0.5 * (v[i] + v[j]) for i in range(4) for j in range(i + 1, 4)}
    m01, m02, m03, m12, m13, m23 = (m[k] for k in sorted(m))
    return [
        np.array([v[0], m01, m02, m03]),
        np.array([m01, v[1], m12, m13]),
        np.array([m02, m12, v[2], m23]),
        np.array([m03, m13, m23, v[3]]),
        np.array([m01, m02, m03, m13]),
        np.array([m01, m02, m12, m13]),
        np.array([m02, m03, m13, m23]),
        np.array([m02, m12, m13, m23]),
    ]


def pairwise_sum(values, block=1024):
    """Sum with a fixed block layout so the result never depends on threads."""
    values = np.asarray(values, dtype=float).ravel()
    if values.size <= block:
        return float(np.sum(values))
    partial = [float(np.sum(values[i:i + block])) for i in range(0, values.size, block)]
    return math.fsum(partial)


def thread_count():
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return max(1, min(8, os.cpu_count() or 1))


def ordered_map(func, items, threads=None):
    """Map over ``items`` in a thread pool; results keep input order."""
    items = list(items)
    threads = thread_count() if threads is None else threads
    if threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))
