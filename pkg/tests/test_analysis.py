import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles as orc
from tetralfa import assemble_stencil, basis_from_tet, coarse_stencil, shape_catalog
from tetralfa.analysis import (
    NumericalError,
    SampleGrid,
    _nelder_mead,
    optimize_damping,
    smoothing_factor,
    spectral_radius,
    two_grid_factor,
)
from tetralfa.symbols import SmootherConfig, harmonic_16, is_low, smoother_symbol_16

JACOBI = SmootherConfig("jacobi", (0.8,))
GS = SmootherConfig("gs_lex", (1.0,))
FOUR = SmootherConfig("four_color", (1.0,))
NUS = [(1, 0), (1, 1), (2, 1), (2, 2)]


def test_spectral_radius_trivial():
    assert spectral_radius(np.eye(4)) == pytest.approx(1.0)
    assert spectral_radius(np.diag([0.3, -0.7, 0.1j, 0])) == pytest.approx(0.7)
    batch = np.stack([np.eye(3), 2 * np.eye(3), np.full((3, 3), np.nan)])
    out = spectral_radius(batch)
    assert out[:2] == pytest.approx([1.0, 2.0]) and np.isnan(out[2])


@pytest.mark.parametrize("n,seed", [(8, 0), (8, 1), (16, 2), (16, 3)])
def test_spectral_radius_matches_companion_oracle(n, seed):
    rng = np.random.default_rng(seed)
    M = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) / np.sqrt(n)
    assert spectral_radius(M) == pytest.approx(orc.spectral_radius_oracle(M), abs=1e-8)


def test_sample_grid_is_half_open():
    g = SampleGrid("Lambda_H", 8)
    ax = g.axes()
    assert ax[0][0] == pytest.approx(-np.pi / 2 + np.pi / 8)
    assert ax[0][-1] == pytest.approx(np.pi / 2)
    assert ax[2][-1] == pytest.approx(0.0, abs=1e-15)
    assert len(g.points()) == 8 * 8 * 4
    with pytest.raises(ValueError):
        SampleGrid(resolution=3)
    with pytest.raises(ValueError):
        SampleGrid("Omega")


def test_published_smoothing_examples(regular):
    _, fine, _ = regular
    assert smoothing_factor(fine, GS).factor == pytest.approx(0.521, abs=0.005)
    assert smoothing_factor(fine, JACOBI, 2).total == pytest.approx(0.550, abs=0.005)
    assert smoothing_factor(fine, SmootherConfig("jacobi", (0.0,))).factor == 1.0


def test_report_serialization(regular):
    _, fine, coarse = regular
    rep = two_grid_factor(fine, coarse, FOUR, 1, 1, SampleGrid(resolution=8))
    d = json.loads(rep.to_json())
    assert {"factor", "argmax", "used", "excluded", "smoother"} <= set(d)
    assert d["used"] + d["excluded"] == 8 * 8 * 4
    assert d["excluded"] >= 1  # the zero frequency
    assert d["per_sweep"] is False and d["total"] == d["factor"]
    mu = smoothing_factor(fine, FOUR, 2, SampleGrid(resolution=8))
    assert mu.per_sweep and mu.total == pytest.approx(mu.factor**2)


def test_regular_shape_orderings(regular):
    _, fine, coarse = regular
    grid = SampleGrid(resolution=16)
    for sm in (JACOBI, GS, FOUR):
        mus = [smoothing_factor(fine, sm, a + b, grid).total for a, b in NUS]
        rhos = [two_grid_factor(fine, coarse, sm, a, b, grid).factor for a, b in NUS]
        assert all(x >= y - 0.005 for x, y in zip(mus, mus[1:]))
        assert all(x >= y - 0.005 for x, y in zip(rhos, rhos[1:]))
    for a, b in NUS:
        j, g, f = (two_grid_factor(fine, coarse, sm, a, b, grid).factor
                   for sm in (JACOBI, GS, FOUR))
        assert j > g > f


def test_needle_line_and_plane_smoothers(stencils):
    _, fine, coarse = stencils("needle")
    grid = SampleGrid(resolution=16)
    four = two_grid_factor(fine, coarse, FOUR, 1, 1, grid).factor
    zebra = two_grid_factor(fine, coarse, SmootherConfig("zebra_plane", (1.0,), 2), 1, 0, grid)
    lex = two_grid_factor(fine, coarse, SmootherConfig("plane_lex", (1.0,), 2), 1, 0, grid)
    assert four == pytest.approx(0.982, abs=0.02)
    assert zebra.factor == pytest.approx(0.121, abs=0.02)
    assert lex.factor == pytest.approx(0.330, abs=0.02)


@pytest.mark.parametrize("shape", ["regular", "optimized", "needle", "wedge", "spindle",
                                   "spade", "sliver", "cap"])
def test_exclusion_tolerance_robustness(stencils, shape):
    _, fine, coarse = stencils(shape)
    a = two_grid_factor(fine, coarse, FOUR, 1, 1, SampleGrid("Theta_H", 16, 1e-10)).factor
    b = two_grid_factor(fine, coarse, FOUR, 1, 1, SampleGrid("Theta_H", 16, 5e-11)).factor
    assert abs(a - b) < 1e-3


@pytest.mark.parametrize("shape,sm,nu", [
    ("regular", JACOBI, (1, 1)), ("regular", GS, (2, 1)), ("regular", FOUR, (1, 0)),
    ("optimized", FOUR, (1, 1)),
])
def test_resolution_convergence(stencils, shape, sm, nu):
    _, fine, coarse = stencils(shape)
    r32 = two_grid_factor(fine, coarse, sm, *nu, SampleGrid(resolution=32)).factor
    r64 = two_grid_factor(fine, coarse, sm, *nu, SampleGrid(resolution=64)).factor
    m32 = smoothing_factor(fine, sm, sum(nu), SampleGrid(resolution=32)).total
    m64 = smoothing_factor(fine, sm, sum(nu), SampleGrid(resolution=64)).total
    assert abs(r32 - r64) < 0.005 and abs(m32 - m64) < 0.005


@given(st.integers(-4, 4), st.floats(0.1, 10.0))
@settings(max_examples=8, deadline=None)
def test_factors_invariant_under_scaling(k, c):
    geom = shape_catalog("spade")
    grid = SampleGrid(resolution=8)

    def factors(g):
        b = basis_from_tet(g)
        f, cs = assemble_stencil(b), coarse_stencil(b)
        return (two_grid_factor(f, cs, FOUR, 1, 1, grid).factor,
                smoothing_factor(f, GS, 1, grid).factor)

    base = factors(geom)
    assert factors(geom.scaled(2.0**k)) == pytest.approx(base, abs=1e-12)
    assert factors(geom.scaled(c)) == pytest.approx(base, abs=1e-12)


def test_sixteen_dim_projector_reproduces_four_color_smoothing(regular):
    _, fine, _ = regular
    res, nu = 16, 2
    cfg = SmootherConfig("four_color", (1.1,))
    pts = SampleGrid("Lambda_H", res).points()
    h = harmonic_16(pts)
    S = np.linalg.matrix_power(smoother_symbol_16(fine, h, cfg), nu)
    Q = (~is_low(h)).astype(float)
    cross = (spectral_radius(Q[..., :, None] * S) ** (1 / nu)).max()
    mu = smoothing_factor(fine, cfg, nu, SampleGrid(resolution=res)).factor
    assert cross == pytest.approx(mu, abs=1e-10)


def test_threads_do_not_change_results(stencils):
    _, fine, coarse = stencils("wedge")
    grid = SampleGrid(resolution=32)
    a = two_grid_factor(fine, coarse, FOUR, 2, 1, grid, threads=1)
    b = two_grid_factor(fine, coarse, FOUR, 2, 1, grid, threads=4)
    assert abs(a.factor - b.factor) <= 1e-12 and a.argmax == b.argmax


def test_all_excluded_raises(regular):
    _, fine, coarse = regular
    with pytest.raises(NumericalError):
        two_grid_factor(fine, coarse, FOUR, 1, 1, SampleGrid("Theta_H", 4, exclusion_tol=1e3))


def test_nelder_mead_on_quadratic_surrogate():
    for target in (0.37, 1.234, 1.9):
        x = _nelder_mead(lambda w: float((w[0] - target) ** 2), [1.0], 0.05, 2.0)
        assert abs(x[0] - target) < 1e-3
    x = _nelder_mead(lambda w: float(((w - [0.6, 1.4]) ** 2).sum()), [1.0, 1.0], 0.05, 2.0)
    assert np.allclose(x, [0.6, 1.4], atol=1e-3)


def test_jacobi_optimal_damping(regular):
    _, fine, coarse = regular
    w_grid, rep_grid = optimize_damping(fine, coarse, JACOBI, 1, 0, method="grid")
    assert w_grid[0] == pytest.approx(0.8, abs=0.051)
    w_s, rep_s = optimize_damping(fine, coarse, SmootherConfig("jacobi", (1.0,)), 1, 0)
    assert rep_s.factor <= rep_grid.factor + 0.01


def test_gs_damping_curve(regular):
    _, fine, coarse = regular
    rho = two_grid_factor(fine, coarse, SmootherConfig("gs_lex", (1.2,)), 2, 1).factor
    assert rho == pytest.approx(0.141, abs=0.02)
    w, rep = optimize_damping(fine, coarse, GS, 2, 1, method="grid", step=0.05,
                              bounds=(0.8, 1.5))
    assert rep.factor <= rho + 1e-9


@pytest.mark.slow
def test_four_color_simplex_not_worse_than_restricted_grid(regular):
    _, fine, coarse = regular
    kw = dict(resolution=8, search_resolution=8, bounds=(1.0, 1.5))
    _, grid_rep = optimize_damping(fine, coarse, FOUR, 1, 1, method="grid", step=0.1, **kw)
    _, simplex_rep = optimize_damping(fine, coarse, FOUR, 1, 1, method="simplex", **kw)
    assert simplex_rep.factor <= grid_rep.factor + 0.01


def test_optimizer_argument_checks(regular):
    _, fine, coarse = regular
    with pytest.raises(ValueError):
        optimize_damping(fine, coarse, JACOBI, method="anneal")
    with pytest.raises(ValueError):
        optimize_damping(fine, coarse, JACOBI, bounds=(0.0, 2.0))
