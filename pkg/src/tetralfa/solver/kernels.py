"""Stencil kernels on a 3D index box with a one-point Dirichlet halo.

Two interchangeable backends are provided: compiled loops (numba) and
vectorised numpy.  ``TETRA_LFA_BACKEND=numba|numpy`` selects one at import
time; numba is used when it is installed and nothing is requested.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = ["BACKEND", "available_backends", "get_backend", "Kernels"]

try:
    import numba
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None


def available_backends() -> list[str]:
    return ["numpy"] + (["numba"] if numba is not None else [])


def _interior(a: np.ndarray, k=(0, 0, 0)) -> np.ndarray:
    """View of ``a`` shifted by ``k`` over the interior index range."""
    n1, n2, n3 = a.shape
    return a[1 + k[0]:n1 - 1 + k[0], 1 + k[1]:n2 - 1 + k[1], 1 + k[2]:n3 - 1 + k[2]]


# -- numpy backend -----------------------------------------------------------

def _np_residual(u, f, center, offs, coeffs, out):
    r = _interior(out)
    np.multiply(_interior(u), -center, out=r)
    for k, s in zip(offs, coeffs):
        r -= s * _interior(u, k)
    r += _interior(f)
    return out


def _np_jacobi(u, f, center, offs, coeffs, omega, work):
    _np_residual(u, f, center, offs, coeffs, work)
    _interior(u)[...] += (omega / center) * _interior(work)


def _np_color_step(u, f, center, offs, coeffs, omega, color, work):
    _np_residual(u, f, center, offs, coeffs, work)
    i, j, k = np.indices(u.shape, sparse=True)
    mask = _interior((i + j + k) % 4 == color)
    _interior(u)[mask] += (omega / center) * _interior(work)[mask]


def _np_gs_lex(u, f, center, offs, coeffs, omega, work):
    # Every offset preceding the origin in (k3, k2, k1) order has k1+k2+k3 < 0
    # and every following one > 0, so the wavefronts k1+k2+k3 = t can be
    # relaxed one after another with identical results.
    n1, n2, n3 = u.shape
    idx = np.indices((n1 - 2, n2 - 2, n3 - 2)).reshape(3, -1) + 1
    level = idx.sum(axis=0)
    order = np.argsort(level, kind="stable")
    idx, level = idx[:, order], level[order]
    bounds = np.flatnonzero(np.diff(level)) + 1
    for sl in np.split(np.arange(level.size), bounds):
        i, j, k = idx[0, sl], idx[1, sl], idx[2, sl]
        acc = f[i, j, k] - center * u[i, j, k]
        for (a, b, c), s in zip(offs, coeffs):
            acc -= s * u[i + a, j + b, k + c]
        u[i, j, k] += (omega / center) * acc


# -- numba backend -------------------------------------------------------------

if numba is not None:

    @numba.njit(cache=True)
    def _nb_residual(u, f, center, offs, coeffs, out):
        n1, n2, n3 = u.shape
        m = offs.shape[0]
        for i in range(1, n1 - 1):
            for j in range(1, n2 - 1):
                for k in range(1, n3 - 1):
                    acc = f[i, j, k] - center * u[i, j, k]
                    for q in range(m):
                        acc -= coeffs[q] * u[i + offs[q, 0], j + offs[q, 1], k + offs[q, 2]]
                    out[i, j, k] = acc
        return out

    @numba.njit(cache=True)
    def _nb_jacobi(u, f, center, offs, coeffs, omega, work):
        _nb_residual(u, f, center, offs, coeffs, work)
        n1, n2, n3 = u.shape
        scale = omega / center
        for i in range(1, n1 - 1):
            for j in range(1, n2 - 1):
                for k in range(1, n3 - 1):
                    u[i, j, k] += scale * work[i, j, k]

    @numba.njit(cache=True)
    def _nb_color_step(u, f, center, offs, coeffs, omega, color, work):
        # Points of one colour are not coupled, so updating in place is a
        # simultaneous (Jacobi-type) update of the colour class.
        n1, n2, n3 = u.shape
        m = offs.shape[0]
        scale = omega / center
        for i in range(1, n1 - 1):
            for j in range(1, n2 - 1):
                k0 = 1 + (color - i - j - 1) % 4
                for k in range(k0, n3 - 1, 4):
                    acc = f[i, j, k] - center * u[i, j, k]
                    for q in range(m):
                        acc -= coeffs[q] * u[i + offs[q, 0], j + offs[q, 1], k + offs[q, 2]]
                    u[i, j, k] += scale * acc

    @numba.njit(cache=True)
    def _nb_gs_lex(u, f, center, offs, coeffs, omega, work):
        n1, n2, n3 = u.shape
        m = offs.shape[0]
        scale = omega / center
        for k in range(1, n3 - 1):
            for j in range(1, n2 - 1):
                for i in range(1, n1 - 1):
                    acc = f[i, j, k] - center * u[i, j, k]
                    for q in range(m):
                        acc -= coeffs[q] * u[i + offs[q, 0], j + offs[q, 1], k + offs[q, 2]]
                    u[i, j, k] += scale * acc


class Kernels:
    """Bundle of kernels for one backend; all work in place on float64 arrays."""

    def __init__(self, name: str):
        if name not in available_backends():
            raise ValueError(f"backend {name!r} unavailable; have {available_backends()}")
        self.name = name
        if name == "numba":
            self.residual = _nb_residual
            self.jacobi = _nb_jacobi
            self.color_step = _nb_color_step
            self.gs_lex = _nb_gs_lex
        else:
            self.residual = _np_residual
            self.jacobi = _np_jacobi
            self.color_step = _np_color_step
            self.gs_lex = _np_gs_lex

    def __repr__(self):
        return f"Kernels({self.name!r})"


def get_backend(name: str | None = None) -> Kernels:
    if name is None:
        name = os.environ.get("TETRA_LFA_BACKEND", "").strip().lower() or (
            "numba" if numba is not None else "numpy")
    return Kernels(name)


BACKEND = get_backend()
