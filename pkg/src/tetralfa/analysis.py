"""Smoothing and two-grid factors sampled over discrete frequency lattices."""

from __future__ import annotations

import itertools
import json
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize

from .stencil import Stencil15
from .symbols import (
    SCALAR_KINDS,
    SmootherConfig,
    cgc_symbol_8,
    cgc_symbol_16,
    four_color_symbol,
    harmonic_16,
    harmonic_octet,
    harmonic_quad,
    is_low,
    scalar_smoother_symbol,
    smoother_symbol_8,
    smoother_symbol_16,
)

__all__ = [
    "REGIONS",
    "SampleGrid",
    "FactorReport",
    "NumericalError",
    "spectral_radius",
    "smoothing_factor",
    "two_grid_factor",
    "optimize_damping",
    "default_threads",
]

_PI = np.pi

#: Frequency regions, as (low, high] bounds per axis in units of pi.
REGIONS = {
    "Theta_h": ((-1, 1), (-1, 1), (-1, 1)),
    "Theta_H": ((-0.5, 0.5), (-0.5, 0.5), (-0.5, 0.5)),
    "Lambda_h": ((-1, 1), (-1, 1), (-0.5, 0)),
    "Lambda_H": ((-0.5, 0.5), (-0.5, 0.5), (-0.5, 0)),
}


class NumericalError(RuntimeError):
    """No usable frequency samples, or the factor is not finite."""


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("TETRA_LFA_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class SampleGrid:
    """Uniform lattice ``lo + k pi/resolution``, ``k = 1..n``, on a half-open box.

    ``resolution`` counts samples per length ``pi`` along each axis.
    """

    region: str = "Theta_H"
    resolution: int = 32
    exclusion_tol: float = 1e-10

    def __post_init__(self):
        if self.region not in REGIONS:
            raise ValueError(f"unknown region {self.region!r}")
        if self.resolution < 4 or self.resolution % 2:
            raise ValueError("resolution must be an even integer >= 4")

    def axes(self) -> list[np.ndarray]:
        out = []
        for lo, hi in REGIONS[self.region]:
            n = int(round((hi - lo) * self.resolution))
            out.append(_PI * (lo + np.arange(1, n + 1) / self.resolution))
        return out

    def points(self) -> np.ndarray:
        grids = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack(grids, axis=-1).reshape(-1, 3)

    def with_region(self, region: str) -> "SampleGrid":
        return SampleGrid(region, self.resolution, self.exclusion_tol)


@dataclass
class FactorReport:
    """Result of a sampled factor.

    ``factor`` is per sweep for smoothing (``mu``, so the contraction of ``nu``
    sweeps is ``factor ** nu``) and per cycle for the two-grid factor.
    """

    kind: str
    factor: float
    argmax: list[float]
    samples_used: int
    samples_excluded: int
    nu1: int
    nu2: int
    resolution: int
    smoother: dict = field(default_factory=dict)

    @property
    def total(self) -> float:
        """Contraction of the full cycle (``mu ** (nu1 + nu2)`` for smoothing)."""
        if self.kind == "smoothing":
            return self.factor ** (self.nu1 + self.nu2)
        return self.factor

    @property
    def per_sweep(self) -> bool:
        return self.kind == "smoothing"

    def to_dict(self) -> dict:
        out = asdict(self)
        out["used"] = out.pop("samples_used")
        out["excluded"] = out.pop("samples_excluded")
        out["per_sweep"] = self.per_sweep
        out["total"] = self.total
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def spectral_radius(m: np.ndarray) -> np.ndarray:
    """Largest eigenvalue modulus of each matrix in a ``(..., n, n)`` batch.

    Matrices whose eigen-solver fails, or that contain non-finite entries,
    give ``nan``.
    """
    m = np.asarray(m)
    flat = m.reshape((-1,) + m.shape[-2:])
    out = np.full(flat.shape[0], np.nan)
    finite = np.all(np.isfinite(flat), axis=(-2, -1))
    if finite.any():
        try:
            out[finite] = np.abs(np.linalg.eigvals(flat[finite])).max(axis=-1)
        except np.linalg.LinAlgError:
            for i in np.flatnonzero(finite):
                try:
                    out[i] = np.abs(np.linalg.eigvals(flat[i])).max()
                except np.linalg.LinAlgError:
                    pass
    return out.reshape(m.shape[:-2])


def _power(S: np.ndarray, nu: int) -> np.ndarray:
    if nu == 0:
        return np.broadcast_to(np.eye(S.shape[-1], dtype=S.dtype), S.shape)
    return np.linalg.matrix_power(S, nu)


def _chunked(func, points: np.ndarray, threads: int, chunk: int = 4096) -> np.ndarray:
    pieces = [points[i:i + chunk] for i in range(0, len(points), chunk)]
    if threads <= 1 or len(pieces) == 1:
        return np.concatenate([func(p) for p in pieces])
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return np.concatenate(list(pool.map(func, pieces)))


def _finish(kind, values, points, nu1, nu2, grid, smoother) -> FactorReport:
    ok = np.isfinite(values)
    if not ok.any():
        raise NumericalError("every frequency sample was excluded")
    i = int(np.argmax(np.where(ok, values, -np.inf)))
    return FactorReport(
        kind=kind,
        factor=float(values[i]),
        argmax=[float(x) for x in points[i]],
        samples_used=int(ok.sum()),
        samples_excluded=int((~ok).sum()),
        nu1=nu1,
        nu2=nu2,
        resolution=grid.resolution,
        smoother=smoother.describe(),
    )


def smoothing_factor(st: Stencil15, smoother: SmootherConfig, nu: int = 1,
                     grid: SampleGrid | None = None, threads: int | None = None) -> FactorReport:
    """``mu = sup_high rho(Q S^nu)^(1/nu)``, ``Q`` removing low-frequency harmonics.

    For point smoothers this is ``sup |S(xi)|`` over ``Theta_h \\ Theta_H``.
    Pattern smoothers are sampled on their coupled harmonic spaces: quads
    based on ``Lambda_h`` for four-colour, 2h-octets on ``Theta_H`` for zebra.
    """
    if nu < 1:
        raise ValueError("nu must be >= 1")
    grid = grid or SampleGrid(resolution=32)
    threads = default_threads() if threads is None else threads

    if smoother.kind in SCALAR_KINDS:
        pts = grid.with_region("Theta_h").points()
        pts = pts[~is_low(pts)]

        def kernel(x):
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.abs(scalar_smoother_symbol(st, x, smoother))
    elif smoother.is_four_color:
        pts = grid.with_region("Lambda_h").points()

        def kernel(x):
            quad = harmonic_quad(x)
            S = four_color_symbol(st, quad, smoother.omega, smoother.order)
            Q = (~is_low(quad)).astype(float)
            with np.errstate(invalid="ignore"):
                return spectral_radius(Q[..., :, None] * _power(S, nu)) ** (1.0 / nu)
    else:
        pts = grid.with_region("Theta_H").points()

        def kernel(x):
            octet = harmonic_octet(x)
            with np.errstate(divide="ignore", invalid="ignore"):
                S = smoother_symbol_8(st, octet, smoother)
            Q = (~is_low(octet)).astype(float)
            return spectral_radius(Q[..., :, None] * _power(S, nu)) ** (1.0 / nu)

    values = _chunked(kernel, pts, threads)
    return _finish("smoothing", values, pts, nu, 0, grid, smoother)


def two_grid_factor(st_fine: Stencil15, st_coarse: Stencil15, smoother: SmootherConfig,
                    nu1: int = 1, nu2: int = 1, grid: SampleGrid | None = None,
                    threads: int | None = None) -> FactorReport:
    """``rho = sup rho(S^nu2 K S^nu1)`` over low base frequencies.

    Frequencies where ``|L_h|`` at any coupled harmonic, or ``|L_H|`` at the
    coarse alias, falls below ``exclusion_tol`` times the stencil's absolute
    sum are dropped and counted in ``samples_excluded``.
    """
    if nu1 < 0 or nu2 < 0 or nu1 + nu2 == 0:
        raise ValueError("need nu1, nu2 >= 0 with nu1 + nu2 >= 1")
    grid = grid or SampleGrid(resolution=32)
    threads = default_threads() if threads is None else threads
    tol_f = grid.exclusion_tol * st_fine.abs_sum
    tol_c = grid.exclusion_tol * st_coarse.abs_sum

    if smoother.is_four_color:
        pts = grid.with_region("Lambda_H").points()

        def kernel(x):
            h = harmonic_16(x)
            S = smoother_symbol_16(st_fine, h, smoother)
            K = cgc_symbol_16(st_fine, st_coarse, h)
            bad = (np.abs(st_fine.symbol(h)).min(axis=-1) < tol_f) | (
                np.abs(st_coarse.symbol(2.0 * h[:, :2])).min(axis=-1) < tol_c)
            return _radius(S, K, nu1, nu2, bad)
    else:
        pts = grid.with_region("Theta_H").points()

        def kernel(x):
            octet = harmonic_octet(x)
            with np.errstate(divide="ignore", invalid="ignore"):
                S = smoother_symbol_8(st_fine, octet, smoother)
            K = cgc_symbol_8(st_fine, st_coarse, octet)
            bad = (np.abs(st_fine.symbol(octet)).min(axis=-1) < tol_f) | (
                np.abs(st_coarse.symbol(2.0 * x)) < tol_c)
            return _radius(S, K, nu1, nu2, bad)

    values = _chunked(kernel, pts, threads)
    return _finish("two_grid", values, pts, nu1, nu2, grid, smoother)


def _radius(S, K, nu1, nu2, bad):
    keep = ~bad
    out = np.full(len(bad), np.nan)
    if keep.any():
        S, K = S[keep], K[keep]
        with np.errstate(invalid="ignore", over="ignore"):
            M = _power(S, nu2) @ K @ _power(S, nu1)
        out[keep] = spectral_radius(M)
    return out


def _with_omega(smoother: SmootherConfig, omega) -> SmootherConfig:
    omega = tuple(float(w) for w in np.atleast_1d(omega))
    if smoother.kind == "alternating":
        parts = tuple(SmootherConfig(p.kind, omega, p.axis, p.color) for p in smoother.parts)
        return SmootherConfig("alternating", omega, parts=parts)
    return SmootherConfig(smoother.kind, omega, smoother.axis, smoother.color,
                          order=smoother.order)


def _nelder_mead(f, start, lo: float, hi: float) -> np.ndarray:
    """Downhill simplex from ``start`` with steps of 0.2 towards the interior.

    Stops once every vertex lies within 5e-4 of the best one (diameter below
    about 1e-3).
    """
    start = np.clip(np.asarray(start, dtype=float), lo, hi)
    dim = start.size
    simplex = [start]
    for i in range(dim):
        vertex = start.copy()
        vertex[i] += -0.2 if vertex[i] > 0.5 * (lo + hi) else 0.2
        simplex.append(vertex)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = minimize(f, start, method="Nelder-Mead",
                       options={"initial_simplex": np.array(simplex), "xatol": 5e-4,
                                "fatol": np.inf, "maxiter": 400 * dim})
    return np.clip(res.x, lo, hi)


def optimize_damping(st_fine: Stencil15, st_coarse: Stencil15, smoother: SmootherConfig,
                     nu1: int = 1, nu2: int = 1, method: str = "simplex",
                     resolution: int = 32, search_resolution: int = 16,
                     step: float = 0.05, bounds: tuple[float, float] = (0.05, 2.0),
                     objective: str = "two_grid", threads: int | None = None):
    """Damping parameters minimising the two-grid (or smoothing) factor.

    The search evaluates the objective on a ``search_resolution`` lattice and
    re-scores the result on ``resolution``.  ``method="grid"`` scans multiples
    of ``step`` inside ``bounds`` (one value per damping parameter);
    ``method="simplex"`` runs Nelder-Mead until the simplex shrinks below 1e-3.

    Returns ``(omega, report)``.
    """
    if method not in ("grid", "simplex"):
        raise ValueError(f"unknown method {method!r}")
    lo, hi = bounds
    if not 0.0 < lo < hi <= 2.0:
        raise ValueError("bounds must satisfy 0 < lo < hi <= 2")
    dim = len(smoother.omega) if smoother.kind != "alternating" else 1

    def evaluate(omega, res):
        cfg = _with_omega(smoother, omega)
        grid = SampleGrid(resolution=res)
        if objective == "smoothing":
            return smoothing_factor(st_fine, cfg, nu1 + nu2, grid, threads)
        return two_grid_factor(st_fine, st_coarse, cfg, nu1, nu2, grid, threads)

    cache = {}

    def f(omega):
        omega = np.atleast_1d(omega)
        if np.any(omega < lo) or np.any(omega > hi):
            return 10.0 + float(np.abs(np.clip(omega, lo, hi) - omega).sum())
        key = tuple(np.round(omega, 12))
        if key not in cache:
            try:
                cache[key] = evaluate(omega, search_resolution).total
            except NumericalError:
                cache[key] = np.inf
        return cache[key]

    if method == "grid":
        values = lo + step * np.arange(int(np.floor((hi - lo) / step + 1e-9)) + 1)
        candidates = [np.array(c) for c in itertools.product(values, repeat=dim)]
        scores = np.array([f(c) for c in candidates])
        top = [candidates[i] for i in np.argsort(scores)[:5]]
        rescored = [(evaluate(c, resolution), c) for c in top]
        report, best = min(rescored, key=lambda rc: rc[0].total)
    else:
        start = np.asarray(smoother.omega[:dim], dtype=float)
        best = _nelder_mead(f, start, lo, hi)
        report = evaluate(best, resolution)
    return tuple(float(w) for w in best), report
