"""Tetrahedron shapes and the oblique lattice they induce.

A coarse tetrahedron ``v0, v1, v2, v3`` is refined regularly (Bey's
refinement).  The refined nodes form the lattice ``x = sum_i k_i h_i e_i``
with the *edge path* basis

    h_1 e_1 = v1 - v0,   h_2 e_2 = v2 - v1,   h_3 e_3 = v3 - v2,

in which the coarse tetrahedron is the Kuhn simplex with lattice vertices
``(0,0,0), (1,0,0), (1,1,0), (1,1,1)``.  Every vertex then carries a
different colour ``(k_1 + k_2 + k_3) mod 4`` and the refined mesh is the
Kuhn/Freudenthal triangulation of the lattice.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

__all__ = [
    "GeometryError",
    "TetGeometry",
    "LatticeBasis",
    "basis_from_tet",
    "shape_catalog",
    "catalog_names",
    "load_geometry",
    "tet_metrics",
]

_DEGENERACY_TOL = 1e-12


class GeometryError(ValueError):
    """Raised for degenerate or malformed geometry input."""


@dataclass(frozen=True)
class TetGeometry:
    vertices: np.ndarray
    label: str = ""

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.shape != (4, 3):
            raise GeometryError(f"expected 4 vertices in 3D, got shape {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    def signed_volume(self) -> float:
        v = self.vertices
        return float(np.linalg.det(np.stack([v[1] - v[0], v[2] - v[0], v[3] - v[0]]))) / 6.0

    def edge_lengths(self) -> dict[tuple[int, int], float]:
        v = self.vertices
        return {(i, j): float(np.linalg.norm(v[j] - v[i]))
                for i, j in itertools.combinations(range(4), 2)}

    def is_degenerate(self) -> bool:
        lmax = max(self.edge_lengths().values())
        return abs(6.0 * self.signed_volume()) <= _DEGENERACY_TOL * lmax**3

    def scaled(self, c: float) -> "TetGeometry":
        return TetGeometry(c * self.vertices, self.label)


@dataclass(frozen=True)
class LatticeBasis:
    """Unit edge directions ``e``, spacings ``h`` and the reciprocal basis ``ep``.

    Rows of ``e`` and ``ep`` are the vectors; ``e[i] @ ep[j] == delta_ij``.
    """

    e: np.ndarray
    h: np.ndarray
    ep: np.ndarray = field(repr=False)
    label: str = ""

    @classmethod
    def from_vectors(cls, vectors, label: str = "") -> "LatticeBasis":
        """Build from the three (unnormalised) lattice step vectors ``h_i e_i``."""
        a = np.array(vectors, dtype=float)
        if a.shape != (3, 3):
            raise GeometryError(f"expected three 3-vectors, got shape {a.shape}")
        h = np.linalg.norm(a, axis=1)
        if np.any(h == 0.0):
            raise GeometryError("zero-length lattice vector")
        det = np.linalg.det(a)
        if abs(det) <= _DEGENERACY_TOL * h.max() ** 3:
            raise GeometryError(f"degenerate lattice basis (det={det:.3e})")
        if det < 0:
            # A reflection leaves every inner product, hence the stencil, unchanged.
            a = a * np.array([-1.0, 1.0, 1.0])
        e = a / h[:, None]
        ep = np.linalg.inv(e).T
        for arr in (e, h, ep):
            arr.setflags(write=False)
        return cls(e=e, h=h, ep=ep, label=label)

    @property
    def vectors(self) -> np.ndarray:
        """Lattice step vectors ``h_i e_i`` as rows."""
        return self.e * self.h[:, None]

    def point(self, k) -> np.ndarray:
        """Physical position of lattice index ``k`` (``(..., 3)`` integer array)."""
        return np.asarray(k, dtype=float) @ self.vectors

    def gram(self) -> np.ndarray:
        a = self.vectors
        return a @ a.T


def basis_from_tet(geom: TetGeometry) -> LatticeBasis:
    """Lattice basis of the regular refinement of ``geom`` (edge path v0-v1-v2-v3)."""
    if geom.is_degenerate():
        raise GeometryError(
            f"degenerate tetrahedron {geom.label!r}: volume {geom.signed_volume():.3e}")
    v = geom.vertices
    return LatticeBasis.from_vectors([v[1] - v[0], v[2] - v[1], v[3] - v[2]], label=geom.label)


def tet_metrics(geom: TetGeometry) -> dict[str, float]:
    """Edge ratio and the smallest/largest angle between two edges of a face (degrees)."""
    v = geom.vertices
    lengths = list(geom.edge_lengths().values())
    angles = []
    for face in itertools.combinations(range(4), 3):
        for a, b, c in itertools.permutations(face):
            if b > c:
                continue
            u, w = v[b] - v[a], v[c] - v[a]
            cosang = u @ w / (np.linalg.norm(u) * np.linalg.norm(w))
            angles.append(np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0))))
    return {
        "edge_ratio": max(lengths) / min(lengths),
        "min_angle": min(angles),
        "max_angle": max(angles),
    }


def catalog_names() -> list[str]:
    root = resources.files("tetralfa") / "shapes"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def shape_catalog(name: str) -> TetGeometry:
    """Named tetrahedron: regular, optimized, needle, wedge, spindle, spade, sliver, cap."""
    path = resources.files("tetralfa") / "shapes" / f"{name}.json"
    if not path.is_file():
        raise GeometryError(f"unknown shape {name!r}; known: {', '.join(catalog_names())}")
    geom = _geometry_from_json(json.loads(path.read_text()), default_label=name)
    if isinstance(geom, LatticeBasis):
        raise GeometryError(f"catalog entry {name!r} must list vertices")
    return geom


def _geometry_from_json(data: dict, default_label: str = ""):
    label = data.get("label", default_label)
    if "vertices" in data:
        return TetGeometry(np.array(data["vertices"], dtype=float), label)
    if "basis" in data:
        b = data["basis"]
        try:
            e = np.array([b["e1"], b["e2"], b["e3"]], dtype=float)
            h = np.broadcast_to(np.array(b.get("h", 1.0), dtype=float), (3,))
        except KeyError as exc:
            raise GeometryError(f"basis entry missing {exc}") from None
        e = e / np.linalg.norm(e, axis=1)[:, None]
        return LatticeBasis.from_vectors(e * h[:, None], label=label)
    raise GeometryError('geometry JSON needs "vertices" or "basis"')


def load_geometry(source: str) -> LatticeBasis:
    """Resolve ``catalog:<name>`` or a JSON file path to a lattice basis."""
    if source.startswith("catalog:"):
        return basis_from_tet(shape_catalog(source.split(":", 1)[1]))
    path = Path(source)
    if not path.is_file():
        raise GeometryError(f"geometry file not found: {source}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise GeometryError(f"{source}: {exc}") from None
    geom = _geometry_from_json(data, default_label=path.stem)
    return geom if isinstance(geom, LatticeBasis) else basis_from_tet(geom)
