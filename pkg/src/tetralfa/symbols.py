"""Fourier symbols of the grid operators on their invariant harmonic subspaces.

All frequencies are scaled, ``xi_i = theta_i h_i``, so the fine frequency box
is ``(-pi, pi]^3`` and the low frequencies are ``(-pi/2, pi/2]^3`` whatever
the geometry.  Every function is vectorised over leading axes: frequencies
have shape ``(..., 3)``, harmonic sets ``(..., m, 3)`` and symbol matrices
``(..., m, m)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .stencil import DIRECTIONS, OFFSETS, Stencil15

__all__ = [
    "SMOOTHER_KINDS",
    "SCALAR_KINDS",
    "SmootherConfig",
    "wrap_frequency",
    "is_low",
    "harmonic_quad",
    "harmonic_octet",
    "harmonic_16",
    "ALPHAS",
    "QUAD_SHIFTS",
    "symbol_L",
    "jacobi_symbol",
    "gs_lex_symbol",
    "plane_lex_symbol",
    "block_symbol",
    "coupling_strength",
    "strongest_axes",
    "pattern_partial_symbol",
    "four_color_symbol",
    "zebra_symbol",
    "scalar_smoother_symbol",
    "smoother_symbol_8",
    "smoother_symbol_16",
    "prolongation_symbol",
    "restriction_symbol",
    "cgc_symbol_8",
    "cgc_symbol_16",
]

_EPS = 1e-9

SMOOTHER_KINDS = (
    "jacobi", "gs_lex", "four_color", "zebra_line", "zebra_plane", "plane_lex", "alternating",
)
_AXIS_KINDS = ("zebra_line", "zebra_plane", "plane_lex")
SCALAR_KINDS = ("jacobi", "gs_lex", "plane_lex")

#: (alpha_1, alpha_2, alpha_3) for the eight 2h-harmonics, index = 4*a1 + 2*a2 + a3.
ALPHAS = np.array(list(itertools.product((0, 1), repeat=3)), dtype=np.int64)
ALPHAS.setflags(write=False)

#: Base frequencies of the four quads spanning a 16-dimensional space.
QUAD_SHIFTS = np.array([(0, 0, 0), (1, 1, 0), (1, 0, 0), (0, 1, 0)], dtype=np.int64)
QUAD_SHIFTS.setflags(write=False)


@dataclass(frozen=True)
class SmootherConfig:
    """Relaxation method and its parameters.

    ``axis`` (0-based) is the line direction for ``zebra_line`` and the plane
    normal for ``zebra_plane``/``plane_lex``.  ``color`` overrides the zebra
    colouring vector ``a`` (points are coloured by ``a . k mod 2``).
    ``alternating`` applies each of ``parts`` once per sweep.
    """

    kind: str
    omega: tuple[float, ...] = (1.0,)
    axis: int | None = None
    color: tuple[int, int, int] | None = None
    parts: tuple["SmootherConfig", ...] = field(default=())
    order: tuple[int, ...] = (0, 1, 2, 3)

    def __post_init__(self):
        if self.kind not in SMOOTHER_KINDS:
            raise ValueError(f"unknown smoother {self.kind!r}; choose from {SMOOTHER_KINDS}")
        omega = tuple(float(w) for w in np.atleast_1d(self.omega))
        if self.kind == "four_color" and len(omega) == 1:
            omega = omega * 4
        expected = 4 if self.kind == "four_color" else 1
        if self.kind != "alternating" and len(omega) != expected:
            raise ValueError(f"{self.kind} takes {expected} damping value(s), got {len(omega)}")
        if any(not 0.0 <= w <= 2.0 for w in omega):
            raise ValueError(f"damping values must lie in [0, 2], got {omega}")
        object.__setattr__(self, "omega", omega)
        if self.kind in _AXIS_KINDS:
            if self.axis not in (0, 1, 2):
                raise ValueError(f"{self.kind} needs axis in {{0, 1, 2}}, got {self.axis}")
            if self.color is not None:
                color = tuple(int(c) % 2 for c in self.color)
                in_block = [self.axis] if self.kind == "zebra_line" else \
                    [d for d in range(3) if d != self.axis]
                if color == (0, 0, 0) or any(color[d] for d in in_block):
                    raise ValueError(f"invalid zebra colouring vector {self.color}")
                object.__setattr__(self, "color", color)
        if self.kind == "four_color" and sorted(self.order) != [0, 1, 2, 3]:
            raise ValueError(f"colour order must be a permutation of 0..3, got {self.order}")
        if self.kind == "alternating":
            if not self.parts or any(p.kind not in ("zebra_line", "zebra_plane") for p in self.parts):
                raise ValueError("alternating smoothers combine zebra_line/zebra_plane parts")

    @property
    def color_vector(self) -> np.ndarray:
        """Zebra colouring vector (default: next cyclic index for lines, the normal for planes)."""
        if self.color is not None:
            return np.array(self.color, dtype=np.int64)
        a = np.zeros(3, dtype=np.int64)
        a[(self.axis + 1) % 3 if self.kind == "zebra_line" else self.axis] = 1
        return a

    @property
    def is_four_color(self) -> bool:
        return self.kind == "four_color"

    def describe(self) -> dict:
        out = {"kind": self.kind, "omega": list(self.omega)}
        if self.axis is not None:
            out["axis"] = self.axis
        if self.kind in ("zebra_line", "zebra_plane"):
            out["color"] = self.color_vector.tolist()
        if self.kind == "four_color":
            out["order"] = list(self.order)
        if self.parts:
            out["parts"] = [p.describe() for p in self.parts]
        return out


# -- frequencies -----------------------------------------------------------

def wrap_frequency(xi):
    """Reduce modulo ``2 pi`` into ``(-pi, pi]``."""
    xi = np.asarray(xi, dtype=float)
    out = np.pi - np.mod(np.pi - xi, 2.0 * np.pi)
    # Snap rounding noise so that boundary points land on a definite side.
    return np.where(np.abs(out + np.pi) < _EPS, np.pi, out)


def is_low(xi) -> np.ndarray:
    """Membership in the low-frequency box ``(-pi/2, pi/2]^3``."""
    xi = np.asarray(xi, dtype=float)
    return np.all((xi > -np.pi / 2 + _EPS) & (xi <= np.pi / 2 + _EPS), axis=-1)


def harmonic_quad(xi0) -> np.ndarray:
    """The four frequencies ``xi0 + sigma (pi/2)(1,1,1)``, sigma = 0..3."""
    xi0 = np.asarray(xi0, dtype=float)
    shifts = (np.pi / 2) * np.arange(4)[:, None] * np.ones(3)
    return wrap_frequency(xi0[..., None, :] + shifts)


def _sign(x):
    return np.where(x >= 0.0, 1.0, -1.0)


def harmonic_octet(xi000) -> np.ndarray:
    """The 2h-harmonics ``xi000 - alpha * sign(xi000) * pi`` in ``ALPHAS`` order."""
    xi000 = np.asarray(xi000, dtype=float)
    shift = np.pi * ALPHAS * _sign(xi000)[..., None, :]
    return wrap_frequency(xi000[..., None, :] - shift)


def harmonic_16(xi000) -> np.ndarray:
    """Sixteen coupled frequencies: the quads of xi^000, xi^110, xi^100, xi^010.

    Index ``4 q + sigma``; members with even ``sigma`` alias to ``2 xi000`` on the
    coarse grid, odd ones to ``2 (xi000 + (pi/2)(1,1,1))``.
    """
    xi000 = np.asarray(xi000, dtype=float)
    bases = wrap_frequency(xi000[..., None, :] - np.pi * QUAD_SHIFTS * _sign(xi000)[..., None, :])
    quads = harmonic_quad(bases)
    return quads.reshape(quads.shape[:-3] + (16, 3))


# -- scalar symbols ---------------------------------------------------------

def symbol_L(st: Stencil15, xi) -> np.ndarray:
    return st.symbol(xi)


def jacobi_symbol(st: Stencil15, xi, omega: float) -> np.ndarray:
    return 1.0 - omega * st.symbol(xi) / st.center


_LEX_PRECEDING = np.array(
    [(k[2], k[1], k[0]) < (0, 0, 0) for k in OFFSETS.tolist()], dtype=bool)


def _sor_symbol(st: Stencil15, xi, omega: float, block, preceding) -> np.ndarray:
    """``1 - L / (L_block / omega + L_preceding)``: successive over-relaxation.

    ``block`` masks the offsets solved for together with the centre and
    ``preceding`` the offsets already updated when the block is visited.
    """
    xi = np.asarray(xi, dtype=float)
    if omega == 0.0:
        return np.ones(xi.shape[:-1], dtype=complex)
    L_block = st.symbol(xi, mask=block)
    L_prev = st.symbol(xi, mask=preceding) - st.center
    return 1.0 - st.symbol(xi) / (L_block / omega + L_prev)


def gs_lex_symbol(st: Stencil15, xi, omega: float) -> np.ndarray:
    """Lexicographic Gauss-Seidel/SOR, ``k3`` slowest and ``k1`` fastest.

    At ``omega = 1`` this is ``1 - L / L_+`` with ``L_+`` the centre plus the
    offsets preceding the origin.
    """
    return _sor_symbol(st, xi, omega, np.zeros(len(OFFSETS), dtype=bool), _LEX_PRECEDING)


def _line_mask(axis: int) -> np.ndarray:
    others = [d for d in range(3) if d != axis]
    return np.all(OFFSETS[:, others] == 0, axis=1)


def _plane_mask(axis: int) -> np.ndarray:
    return OFFSETS[:, axis] == 0


def coupling_strength(st: Stencil15, kind: str) -> np.ndarray:
    """Per-axis coupling collected by a line (along the axis) or plane (normal to it) block."""
    if kind == "zebra_line":
        return np.array([np.abs(st.coeffs[_line_mask(d)]).sum() for d in range(3)])
    return np.array([np.abs(st.coeffs[_plane_mask(d)]).sum() for d in range(3)])


def strongest_axes(st: Stencil15, kind: str, count: int = 1) -> tuple[int, ...]:
    """Axes whose line/plane blocks hold the strongest couplings, strongest first."""
    order = np.argsort(-coupling_strength(st, kind), kind="stable")
    return tuple(int(d) for d in order[:count])


def plane_lex_symbol(st: Stencil15, xi, axis: int, omega: float) -> np.ndarray:
    """Plane SOR sweeping the planes ``k_axis = const`` in increasing order."""
    return _sor_symbol(st, xi, omega, _plane_mask(axis), OFFSETS[:, axis] < 0)


def block_symbol(st: Stencil15, xi, kind: str, axis: int, omega: float) -> np.ndarray:
    """Block-Jacobi symbol ``1 - omega L / L_block`` for line or plane blocks."""
    mask = _line_mask(axis) if kind == "zebra_line" else _plane_mask(axis)
    return 1.0 - omega * st.symbol(xi) / st.symbol(xi, mask=mask)


# -- pattern relaxations ----------------------------------------------------

def _phase_matrix(j: int, m: int) -> np.ndarray:
    sigma = np.arange(m)
    return np.exp(2j * np.pi * j * (sigma[None, :] - sigma[:, None]) / m) / m


def pattern_partial_symbol(lambdas, j: int, m: int) -> np.ndarray:
    """Partial step on colour ``j`` of an ``m``-colour pattern relaxation.

    ``lambdas[..., sigma]`` is the relaxation symbol at harmonic ``sigma``;
    entry ``(s', s)`` is ``delta + (lambda_s - 1) exp(2 pi i j (s - s') / m) / m``.
    """
    lam = np.asarray(lambdas, dtype=complex)
    if lam.shape[-1] != m:
        raise ValueError(f"expected {m} symbols, got {lam.shape[-1]}")
    return np.eye(m) + (lam - 1.0)[..., None, :] * _phase_matrix(j, m)


def four_color_symbol(st: Stencil15, quad, omega, order=(0, 1, 2, 3)) -> np.ndarray:
    """4x4 symbol of a full four-colour sweep on ``F^4`` (colours in ``order``)."""
    L = st.symbol(quad) / st.center
    S = np.broadcast_to(np.eye(4, dtype=complex), L.shape[:-1] + (4, 4))
    for j in order:
        S = pattern_partial_symbol(1.0 - omega[j] * L, j, 4) @ S
    return S


def _zebra_partner_matrix(a) -> np.ndarray:
    partner = np.bitwise_xor(ALPHAS, np.asarray(a)) @ np.array([4, 2, 1])
    pair = np.zeros((8, 8))
    pair[partner, np.arange(8)] = 1.0
    return pair


def zebra_symbol(st: Stencil15, octet, kind: str, axis: int, omega: float, color=None) -> np.ndarray:
    """8x8 symbol of a zebra line/plane sweep on the 2h-harmonics.

    Each half step couples ``xi`` with ``xi + pi a`` (``a`` the colouring
    vector); the matrix is block diagonal over these four pairs.
    """
    if color is None:
        color = SmootherConfig(kind, (omega,), axis).color_vector
    lam = block_symbol(st, octet, kind, axis, omega)
    pair = _zebra_partner_matrix(color)
    S = np.broadcast_to(np.eye(8, dtype=complex), lam.shape[:-1] + (8, 8))
    for j in (0, 1):
        phase = 0.5 * (np.eye(8) + (-1) ** j * pair)
        S = (np.eye(8) + (lam - 1.0)[..., None, :] * phase) @ S
    return S


def scalar_smoother_symbol(st: Stencil15, xi, cfg: SmootherConfig) -> np.ndarray:
    """Symbol of a smoother that keeps each Fourier mode invariant."""
    w = cfg.omega[0]
    if cfg.kind == "jacobi":
        return jacobi_symbol(st, xi, w)
    if cfg.kind == "gs_lex":
        return gs_lex_symbol(st, xi, w)
    if cfg.kind == "plane_lex":
        return plane_lex_symbol(st, xi, cfg.axis, w)
    raise ValueError(f"{cfg.kind} couples several harmonics")


def smoother_symbol_8(st: Stencil15, octet, cfg: SmootherConfig) -> np.ndarray:
    """Smoother on the 2h-harmonic space (every kind except four_color)."""
    octet = np.asarray(octet, dtype=float)
    w = cfg.omega[0] if cfg.omega else 1.0
    if cfg.kind in SCALAR_KINDS:
        return scalar_smoother_symbol(st, octet, cfg)[..., :, None] * np.eye(8)
    if cfg.kind in ("zebra_line", "zebra_plane"):
        return zebra_symbol(st, octet, cfg.kind, cfg.axis, w, cfg.color_vector)
    if cfg.kind == "alternating":
        S = np.broadcast_to(np.eye(8, dtype=complex), octet.shape[:-2] + (8, 8))
        for part in cfg.parts:
            S = smoother_symbol_8(st, octet, part) @ S
        return S
    raise ValueError(f"{cfg.kind} does not leave the 2h-harmonics invariant")


def smoother_symbol_16(st: Stencil15, h16, cfg: SmootherConfig) -> np.ndarray:
    """Block-diagonal four-colour symbol on the 16-dimensional space."""
    if not cfg.is_four_color:
        raise ValueError("the 16-dimensional space is used for four_color only")
    h16 = np.asarray(h16, dtype=float)
    quads = h16.reshape(h16.shape[:-2] + (4, 4, 3))
    blocks = four_color_symbol(st, quads, cfg.omega, cfg.order)
    S = np.zeros(h16.shape[:-2] + (16, 16), dtype=complex)
    for q in range(4):
        S[..., 4 * q:4 * q + 4, 4 * q:4 * q + 4] = blocks[..., q, :, :]
    return S


# -- transfers and coarse-grid correction -----------------------------------

def prolongation_symbol(xi) -> np.ndarray:
    """``sum_k p_k exp(i xi . k)`` of linear interpolation (weight 1 at 0, 1/2 at +-d)."""
    xi = np.asarray(xi, dtype=float)
    return 1.0 + np.cos(xi @ DIRECTIONS.T.astype(float)).sum(axis=-1)


def restriction_symbol(xi) -> np.ndarray:
    """Full weighting, ``R = P^T / 8``."""
    return np.conj(prolongation_symbol(xi)) / 8.0


def cgc_symbol_8(st_fine: Stencil15, st_coarse: Stencil15, octet) -> np.ndarray:
    """``I - P L_H(2 xi)^-1 R L_h`` on the 2h-harmonics of ``octet[..., 0, :]``."""
    octet = np.asarray(octet, dtype=float)
    L = st_fine.symbol(octet)
    LH = st_coarse.symbol(2.0 * octet[..., 0, :])
    P = prolongation_symbol(octet)
    R = restriction_symbol(octet)
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = P[..., :, None] * (R * L / LH[..., None])[..., None, :]
    return np.eye(8) - corr


def cgc_symbol_16(st_fine: Stencil15, st_coarse: Stencil15, h16) -> np.ndarray:
    """Coarse-grid correction on the 16-dimensional space (two coarse frequencies)."""
    h16 = np.asarray(h16, dtype=float)
    L = st_fine.symbol(h16)
    P = prolongation_symbol(h16)
    R = restriction_symbol(h16)
    parity = np.tile(np.arange(4) % 2, 4)
    LH = st_coarse.symbol(2.0 * h16[..., :2, :])  # sigma=0 and sigma=1 of the first quad
    K = np.broadcast_to(np.eye(16, dtype=complex), h16.shape[:-2] + (16, 16)).copy()
    with np.errstate(divide="ignore", invalid="ignore"):
        for c in (0, 1):
            sel = parity == c
            Pc = np.where(sel, P, 0.0)
            Rc = np.where(sel, R * L, 0.0) / LH[..., c, None]
            K -= Pc[..., :, None] * Rc[..., None, :]
    return K
