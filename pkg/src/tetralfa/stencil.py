"""15-point P1 Laplacian stencil on the Kuhn-triangulated lattice."""

from __future__ import annotations

import io
import itertools
from dataclasses import dataclass

import numpy as np

from .geometry import GeometryError, LatticeBasis

__all__ = [
    "OFFSETS",
    "DIRECTIONS",
    "KUHN_SIMPLICES",
    "StencilError",
    "Stencil15",
    "p1_element_stiffness",
    "assemble_stencil",
    "coarse_stencil",
]

# Non-centre offsets in the order they are usually listed for this grid.
OFFSETS = np.array([
    (1, 0, 0), (1, 1, 0), (0, 1, 0), (-1, 0, 0), (-1, -1, 0), (0, -1, 0),
    (-1, 0, -1), (0, 0, -1), (-1, -1, -1), (0, -1, -1),
    (0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1),
], dtype=np.int64)
OFFSETS.setflags(write=False)

# The seven edge directions of the Kuhn triangulation (one per +/- pair).
DIRECTIONS = np.array([
    (1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 0), (0, 1, 1), (1, 0, 1), (1, 1, 1),
], dtype=np.int64)
DIRECTIONS.setflags(write=False)


def _kuhn_simplices() -> np.ndarray:
    out = []
    for perm in itertools.permutations(range(3)):
        path = [np.zeros(3, dtype=np.int64)]
        for axis in perm:
            step = path[-1].copy()
            step[axis] += 1
            path.append(step)
        out.append(path)
    return np.array(out)


#: (6, 4, 3) lattice vertices of the six tetrahedra sharing the main diagonal.
KUHN_SIMPLICES = _kuhn_simplices()
KUHN_SIMPLICES.setflags(write=False)

_OFFSET_INDEX = {tuple(int(x) for x in k): i for i, k in enumerate(OFFSETS)}
_NEGATE = np.array([_OFFSET_INDEX[tuple(int(x) for x in -k)] for k in OFFSETS])


class StencilError(ValueError):
    pass


@dataclass(frozen=True)
class Stencil15:
    """Constant-coefficient stencil ``center * u(x) + sum_k coeffs[k] u(x + OFFSETS[k])``."""

    center: float
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.shape != (len(OFFSETS),):
            raise StencilError(f"expected {len(OFFSETS)} coefficients, got {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "center", float(self.center))

    @classmethod
    def from_dict(cls, center: float, coeffs: dict) -> "Stencil15":
        extra = set(map(tuple, coeffs)) - set(_OFFSET_INDEX)
        if extra:
            raise StencilError(f"offsets outside the 15-point support: {sorted(extra)}")
        c = np.zeros(len(OFFSETS))
        for k, v in coeffs.items():
            c[_OFFSET_INDEX[tuple(k)]] = v
        return cls(center, c)

    def as_dict(self) -> dict[tuple[int, int, int], float]:
        return {tuple(k): float(v) for k, v in zip(OFFSETS.tolist(), self.coeffs)}

    def coefficient(self, k) -> float:
        k = tuple(int(x) for x in k)
        if k == (0, 0, 0):
            return self.center
        return float(self.coeffs[_OFFSET_INDEX[k]])

    @property
    def abs_sum(self) -> float:
        return abs(self.center) + float(np.abs(self.coeffs).sum())

    def row_sum(self) -> float:
        return self.center + float(self.coeffs.sum())

    def asymmetry(self) -> float:
        return float(np.abs(self.coeffs - self.coeffs[_NEGATE]).max())

    def validate(self, rtol: float = 1e-12) -> None:
        scale = self.abs_sum
        if self.center <= 0:
            raise StencilError(f"non-positive centre {self.center}")
        if abs(self.row_sum()) > rtol * scale * 10:
            raise StencilError(f"row sum {self.row_sum():.3e} is not zero")
        if self.asymmetry() > rtol * scale:
            raise StencilError("stencil is not point symmetric")

    def scaled(self, c: float) -> "Stencil15":
        return Stencil15(c * self.center, c * self.coeffs)

    def symbol(self, xi, mask=None) -> np.ndarray:
        """``center + sum_k s_k exp(i xi . k)`` for ``xi`` of shape ``(..., 3)``.

        ``mask`` selects a subset of the 14 offsets (the centre is always kept).
        """
        xi = np.asarray(xi, dtype=float)
        coeffs = self.coeffs if mask is None else np.where(mask, self.coeffs, 0.0)
        phase = np.exp(1j * (xi @ OFFSETS.T.astype(float)))
        return self.center + phase @ coeffs

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("k1,k2,k3,coefficient\n")
        buf.write(f"0,0,0,{self.center:.17g}\n")
        for k, v in zip(OFFSETS.tolist(), self.coeffs):
            buf.write(f"{k[0]},{k[1]},{k[2]},{v:.17g}\n")
        return buf.getvalue()


def p1_element_stiffness(vertices) -> np.ndarray:
    """Exact P1 stiffness matrix ``K_ij = |T| grad(phi_i) . grad(phi_j)`` of one tetrahedron."""
    v = np.asarray(vertices, dtype=float)
    edges = (v[1:] - v[0]).T
    det = np.linalg.det(edges)
    scale = max(np.linalg.norm(v[i] - v[j]) for i, j in itertools.combinations(range(4), 2))
    if abs(det) <= 1e-12 * scale**3:
        raise GeometryError("zero-volume element")
    inv = np.linalg.inv(edges)
    grads = np.vstack([-inv.sum(axis=0), inv])
    return abs(det) / 6.0 * grads @ grads.T


def assemble_stencil(basis: LatticeBasis) -> Stencil15:
    """Row of the assembled P1 stiffness matrix belonging to one lattice node.

    Sums the element couplings of the 24 tetrahedra of the Kuhn triangulation
    that contain the node.
    """
    vectors = basis.vectors
    center = 0.0
    coeffs = np.zeros(len(OFFSETS))
    for simplex in KUHN_SIMPLICES:
        K = p1_element_stiffness(simplex @ vectors)
        for a in range(4):
            center += K[a, a]
            for b in range(4):
                if a != b:
                    coeffs[_OFFSET_INDEX[tuple(simplex[b] - simplex[a])]] += K[a, b]
    st = Stencil15(center, coeffs)
    st.validate(rtol=1e-10)
    return st


def coarse_stencil(basis: LatticeBasis) -> Stencil15:
    """Rediscretisation on the doubled lattice (same shape, spacing ``2h``)."""
    coarse = LatticeBasis.from_vectors(2.0 * basis.vectors, label=basis.label)
    return assemble_stencil(coarse)
