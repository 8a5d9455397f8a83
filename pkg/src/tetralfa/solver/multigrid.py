"""Geometric multigrid on a Dirichlet index box, used to measure convergence rates."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ..analysis import SampleGrid, two_grid_factor
from ..geometry import LatticeBasis
from ..stencil import DIRECTIONS, OFFSETS, Stencil15, assemble_stencil
from ..symbols import SmootherConfig
from .kernels import Kernels, get_backend

__all__ = [
    "SolverError",
    "DivergenceError",
    "GridLevel",
    "CycleConfig",
    "CycleResult",
    "Hierarchy",
    "apply_operator",
    "residual",
    "relax",
    "prolong",
    "restrict",
    "run_cycles",
    "measure_vs_prediction",
]


class SolverError(RuntimeError):
    pass


class DivergenceError(SolverError):
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


@dataclass
class GridLevel:
    """One grid of ``n**3`` points (``n = 2**l + 1``); the outer layer is the Dirichlet boundary."""

    n: int
    stencil: Stencil15
    index: int = 0
    values: np.ndarray | None = None

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("a grid needs at least one interior point")
        if self.values is None:
            self.values = np.zeros((self.n,) * 3)
        self._offs = np.ascontiguousarray(OFFSETS)
        self._coeffs = np.ascontiguousarray(self.stencil.coeffs)
        self._work = np.zeros((self.n,) * 3)

    def zeros(self) -> np.ndarray:
        return np.zeros((self.n,) * 3)


def _kernels(backend) -> Kernels:
    if isinstance(backend, Kernels):
        return backend
    return get_backend(backend)


def residual(level: GridLevel, u, f, backend=None) -> np.ndarray:
    """``f - L u`` on the interior, zero on the boundary."""
    out = np.zeros_like(u)
    _kernels(backend).residual(u, f, level.stencil.center, level._offs, level._coeffs, out)
    return out


def apply_operator(level: GridLevel, u, backend=None) -> np.ndarray:
    return -residual(level, u, np.zeros_like(u), backend)


# -- transfers ---------------------------------------------------------------

def prolong(coarse: np.ndarray) -> np.ndarray:
    """Linear interpolation on the Kuhn triangulation (weight 1/2 along each edge direction)."""
    nc = coarse.shape[0]
    fine = np.zeros((2 * nc - 1,) * 3)
    fine[::2, ::2, ::2] = coarse
    for e in DIRECTIONS:
        a, b, c = e
        fine[a::2, b::2, c::2] = 0.5 * (coarse[:nc - a, :nc - b, :nc - c] + coarse[a:, b:, c:])
    return fine


def _prolong_transpose(fine: np.ndarray) -> np.ndarray:
    nc = (fine.shape[0] + 1) // 2
    out = fine[::2, ::2, ::2].copy()
    for e in DIRECTIONS:
        a, b, c = e
        half = 0.5 * fine[a::2, b::2, c::2]
        out[:nc - a, :nc - b, :nc - c] += half
        out[a:, b:, c:] += half
    out[[0, -1], :, :] = 0.0
    out[:, [0, -1], :] = 0.0
    out[:, :, [0, -1]] = 0.0
    return out


def restrict(fine: np.ndarray) -> np.ndarray:
    """Full weighting ``P^T / 8`` (boundary values of the result are zero)."""
    return _prolong_transpose(fine) / 8.0


# -- block solvers -------------------------------------------------------------

def _thomas(diag: float, off: float, rhs: np.ndarray) -> np.ndarray:
    """Solve the symmetric constant tridiagonal systems along the last axis."""
    m = rhs.shape[-1]
    cp = np.empty(m)
    dp = np.empty_like(rhs)
    cp[0] = off / diag
    dp[..., 0] = rhs[..., 0] / diag
    for i in range(1, m):
        denom = diag - off * cp[i - 1]
        cp[i] = off / denom
        dp[..., i] = (rhs[..., i] - off * dp[..., i - 1]) / denom
    x = np.empty_like(rhs)
    x[..., -1] = dp[..., -1]
    for i in range(m - 2, -1, -1):
        x[..., i] = dp[..., i] - cp[i] * x[..., i + 1]
    return x


def _apply_2d(center, offs2, coeffs2, x):
    """In-plane operator on a batch ``(P, m1, m2)`` with zero Dirichlet halo."""
    pad = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    m1, m2 = x.shape[1:]
    y = center * x
    for (a, b), s in zip(offs2, coeffs2):
        y += s * pad[:, 1 + a:1 + a + m1, 1 + b:1 + b + m2]
    return y


def _cg_planes(center, offs2, coeffs2, rhs, tol=1e-8, maxiter=None, plane_ids=None):
    """Batched conjugate gradients, one independent SPD system per plane."""
    maxiter = maxiter or 10 * max(rhs.shape[1:]) + 50
    x = np.zeros_like(rhs)
    r = rhs.copy()
    p = r.copy()
    rr = np.einsum("pij,pij->p", r, r)
    target = tol**2 * rr
    for _ in range(maxiter):
        active = rr > target
        if not active.any():
            return x
        Ap = _apply_2d(center, offs2, coeffs2, p)
        pAp = np.einsum("pij,pij->p", p, Ap)
        alpha = np.where(active, rr / np.where(active, pAp, 1.0), 0.0)
        x += alpha[:, None, None] * p
        r -= alpha[:, None, None] * Ap
        rr_new = np.einsum("pij,pij->p", r, r)
        beta = np.where(active, rr_new / np.where(active, rr, 1.0), 0.0)
        p = r + beta[:, None, None] * p
        rr = rr_new
    bad = np.flatnonzero(rr > target)
    if bad.size:
        ids = bad if plane_ids is None else np.asarray(plane_ids)[bad]
        raise SolverError(f"CG did not reach relative residual {tol:g} on plane(s) {ids.tolist()}")
    return x


def _plane_operator(st: Stencil15, axis: int):
    others = [d for d in range(3) if d != axis]
    sel = OFFSETS[:, axis] == 0
    return st.center, OFFSETS[sel][:, others], st.coeffs[sel]


def _zebra_line(level, u, f, cfg, kern):
    d = cfg.axis
    st = level.stencil
    off = st.coefficient(np.eye(3, dtype=int)[d])
    a = cfg.color_vector[[x for x in range(3) if x != d]]
    n = level.n
    p, q = np.indices((n, n))
    interior = (p > 0) & (p < n - 1) & (q > 0) & (q < n - 1)
    for j in (0, 1):
        lines = interior & ((a[0] * p + a[1] * q) % 2 == j)
        r = residual(level, u, f, kern)
        rl = np.moveaxis(r, d, -1)[..., 1:-1]
        delta = _thomas(st.center, off, rl[lines])
        np.moveaxis(u, d, -1)[..., 1:-1][lines] += cfg.omega[0] * delta
    return u


def _zebra_plane(level, u, f, cfg, kern):
    d = cfg.axis
    center, offs2, coeffs2 = _plane_operator(level.stencil, d)
    for j in (0, 1):
        r = residual(level, u, f, kern)
        planes = np.array([p for p in range(1, level.n - 1) if p % 2 == j])
        if planes.size == 0:
            continue
        rhs = np.take(r, planes, axis=d)
        rhs = np.moveaxis(rhs, d, 0)[:, 1:-1, 1:-1]
        delta = _cg_planes(center, offs2, coeffs2, np.ascontiguousarray(rhs), plane_ids=planes)
        view = np.moveaxis(u, d, 0)
        view[planes, 1:-1, 1:-1] += cfg.omega[0] * delta
    return u


def _plane_lex(level, u, f, cfg, kern):
    d = cfg.axis
    st = level.stencil
    center, offs2, coeffs2 = _plane_operator(st, d)
    uv = np.moveaxis(u, d, 0)
    fv = np.moveaxis(f, d, 0)
    offs = OFFSETS[:, [d] + [x for x in range(3) if x != d]]
    n = level.n
    for p in range(1, n - 1):
        r = fv[p, 1:-1, 1:-1] - center * uv[p, 1:-1, 1:-1]
        for (a, b, c), s in zip(offs, st.coeffs):
            r = r - s * uv[p + a, 1 + b:n - 1 + b, 1 + c:n - 1 + c]
        delta = _cg_planes(center, offs2, coeffs2, r[None], plane_ids=[p])[0]
        uv[p, 1:-1, 1:-1] += cfg.omega[0] * delta
    return u


def relax(level: GridLevel, u: np.ndarray, f: np.ndarray, smoother: SmootherConfig,
          sweeps: int = 1, backend=None) -> np.ndarray:
    """Apply ``sweeps`` smoothing steps to ``u`` in place and return it."""
    kern = _kernels(backend)
    st = level.stencil
    for _ in range(sweeps):
        kind = smoother.kind
        if kind == "jacobi":
            kern.jacobi(u, f, st.center, level._offs, level._coeffs, smoother.omega[0], level._work)
        elif kind == "gs_lex":
            kern.gs_lex(u, f, st.center, level._offs, level._coeffs, smoother.omega[0], level._work)
        elif kind == "four_color":
            for c in smoother.order:
                kern.color_step(u, f, st.center, level._offs, level._coeffs,
                                smoother.omega[c], c, level._work)
        elif kind == "zebra_line":
            _zebra_line(level, u, f, smoother, kern)
        elif kind == "zebra_plane":
            _zebra_plane(level, u, f, smoother, kern)
        elif kind == "plane_lex":
            _plane_lex(level, u, f, smoother, kern)
        elif kind == "alternating":
            for part in smoother.parts:
                relax(level, u, f, part, 1, kern)
        else:  # pragma: no cover - SmootherConfig validates kinds
            raise ValueError(kind)
    return u


# -- cycles --------------------------------------------------------------------

@dataclass(frozen=True)
class CycleConfig:
    smoother: SmootherConfig
    nu1: int = 1
    nu2: int = 1
    kind: str = "W"
    levels: int | None = None
    coarse_solver: str = "exact_dense"
    seed: int = 42

    def __post_init__(self):
        if self.kind not in ("V", "W"):
            raise ValueError("cycle kind must be 'V' or 'W'")
        if self.nu1 < 0 or self.nu2 < 0 or self.nu1 + self.nu2 == 0:
            raise ValueError("need nu1, nu2 >= 0 with nu1 + nu2 >= 1")
        if self.coarse_solver not in ("exact_dense", "many_sweeps"):
            raise ValueError(f"unknown coarse solver {self.coarse_solver!r}")

    @property
    def gamma(self) -> int:
        return 2 if self.kind == "W" else 1

    def describe(self) -> dict:
        return {"smoother": self.smoother.describe(), "nu1": self.nu1, "nu2": self.nu2,
                "cycle": self.kind, "levels": self.levels,
                "coarse_solver": self.coarse_solver, "seed": self.seed}


class Hierarchy:
    """Grid levels ``n, (n+1)/2, ..., 5`` with rediscretised stencils."""

    def __init__(self, basis: LatticeBasis, n: int, levels: int | None = None,
                 backend=None):
        ell = int(round(np.log2(n - 1)))
        if n < 5 or 2**ell + 1 != n:
            raise ValueError(f"n must be 2**l + 1 >= 5, got {n}")
        max_levels = ell - 1
        levels = max_levels if levels is None else levels
        if not 1 <= levels <= max_levels:
            raise ValueError(f"levels must be in 1..{max_levels} for n={n}")
        self.kernels = _kernels(backend)
        self.levels = []
        for i in range(levels):
            b = LatticeBasis.from_vectors(2**i * basis.vectors, basis.label)
            self.levels.append(GridLevel((n - 1) // 2**i + 1, assemble_stencil(b), i))
        self._chol = None

    @property
    def coarsest(self) -> GridLevel:
        return self.levels[-1]

    def _coarse_factor(self):
        if self._chol is None:
            lvl = self.coarsest
            m = lvl.n - 2
            A = np.empty((m**3, m**3))
            for col in range(m**3):
                e = lvl.zeros()
                e[1:-1, 1:-1, 1:-1].flat[col] = 1.0
                A[:, col] = apply_operator(lvl, e, self.kernels)[1:-1, 1:-1, 1:-1].ravel()
            self._chol = cho_factor(A)
        return self._chol

    def coarse_solve(self, f, method="exact_dense"):
        lvl = self.coarsest
        u = lvl.zeros()
        if method == "exact_dense":
            x = cho_solve(self._coarse_factor(), f[1:-1, 1:-1, 1:-1].ravel())
            u[1:-1, 1:-1, 1:-1] = x.reshape((lvl.n - 2,) * 3)
        else:
            relax(lvl, u, f, SmootherConfig("gs_lex"), 50, self.kernels)
        return u

    def cycle(self, u, f, cfg: CycleConfig, index: int = 0):
        """One V/W cycle on level ``index`` (in place)."""
        if index == len(self.levels) - 1:
            u[...] = self.coarse_solve(f, cfg.coarse_solver)
            return u
        lvl = self.levels[index]
        relax(lvl, u, f, cfg.smoother, cfg.nu1, self.kernels)
        fc = _prolong_transpose(residual(lvl, u, f, self.kernels))
        uc = self.levels[index + 1].zeros()
        # A second visit to the exactly solved coarsest grid would change nothing.
        for _ in range(cfg.gamma if index + 1 < len(self.levels) - 1 else 1):
            self.cycle(uc, fc, cfg, index + 1)
        u += prolong(uc)
        relax(lvl, u, f, cfg.smoother, cfg.nu2, self.kernels)
        return u


@dataclass
class CycleResult:
    errors: list[float] = field(default_factory=list)
    rates: list[float] = field(default_factory=list)
    window: int = 10

    @property
    def asymptotic_rate(self) -> float:
        if not self.rates:
            return float("nan")
        tail = np.asarray(self.rates[-self.window:])
        return float(np.exp(np.mean(np.log(tail))))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["cycle", "error_l2", "rate"])
        for k, (e, r) in enumerate(zip(self.errors[1:], self.rates), start=1):
            w.writerow([k, f"{e:.17g}", f"{r:.17g}"])
        return buf.getvalue()


def run_cycles(basis: LatticeBasis, config: CycleConfig, n: int = 65, cycles: int = 50,
               window: int = 10, backend=None, hierarchy: Hierarchy | None = None) -> CycleResult:
    """Iterate on ``L u = 0`` from a seeded random start and record error reductions.

    ``errors[k]`` is the discrete L2 norm before renormalisation, relative to
    the unit-norm iterate entering cycle ``k``; ``rates[k-1] = errors[k]``.
    """
    if cycles < 0:
        raise ValueError("cycles must be >= 0")
    hier = hierarchy or Hierarchy(basis, n, config.levels, backend)
    fine = hier.levels[0]
    rng = np.random.default_rng(config.seed)
    u = fine.zeros()
    u[1:-1, 1:-1, 1:-1] = rng.uniform(-1.0, 1.0, (fine.n - 2,) * 3)
    f = fine.zeros()

    def norm(x):
        return float(np.sqrt(np.mean(x[1:-1, 1:-1, 1:-1] ** 2)))

    result = CycleResult(window=window)
    e0 = norm(u)
    result.errors.append(e0)
    u /= e0
    streak = 0
    for k in range(1, cycles + 1):
        hier.cycle(u, f, config)
        rate = norm(u)
        result.rates.append(rate)
        result.errors.append(result.errors[-1] * rate)
        if not np.isfinite(rate):
            raise DivergenceError(f"non-finite error in cycle {k}", result)
        streak = streak + 1 if rate > 1.5 else 0
        if streak >= 3:
            raise DivergenceError(f"error grew by more than 1.5x in cycles {k - 2}..{k}", result)
        if rate == 0.0:
            break
        u /= rate
    return result


def measure_vs_prediction(basis: LatticeBasis, config: CycleConfig, n: int = 65,
                          cycles: int = 50, resolution: int = 32, backend=None) -> dict:
    """Compare the measured asymptotic rate with the LFA two-grid factor."""
    fine = assemble_stencil(basis)
    coarse = assemble_stencil(LatticeBasis.from_vectors(2.0 * basis.vectors))
    report = two_grid_factor(fine, coarse, config.smoother, config.nu1, config.nu2,
                             SampleGrid(resolution=resolution))
    result = run_cycles(basis, config, n, cycles, backend=backend)
    measured = result.asymptotic_rate
    return {
        "predicted_rho": report.factor,
        "measured_rho": measured,
        "gap": abs(measured - report.factor),
        "config": dict(config.describe(), n=n, cycles=cycles, resolution=resolution),
        "rates": result.rates,
    }


def summary_json(record: dict) -> str:
    return json.dumps({k: v for k, v in record.items() if k != "rates"}, indent=2)
