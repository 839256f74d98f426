import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from polaronlab.grid import CARTESIAN, SPHERICAL_M0, GridSpec, ResourceError, align_to_z, build_grid, min_mode_norm
from polaronlab.model import ModelParams

P0 = ModelParams(g=1.0)


def test_single_cell():
    g = build_grid(GridSpec(CARTESIAN, 1.0, 1, exclude_origin=False), P0)
    assert g.M == 1
    assert np.all(g.k == 0.0)
    assert g.w[0] == 8.0
    assert g.coupling[0] == 0.0


def test_two_per_axis():
    g = build_grid(GridSpec(CARTESIAN, 1.0, 2), P0)
    assert g.M == 8
    assert np.all(np.abs(g.k) == 0.5)
    assert np.all(g.w == 1.0)
    assert min_mode_norm(g) == pytest.approx(math.sqrt(3) / 2)


def test_total_weight_n5():
    g = build_grid(GridSpec(CARTESIAN, 2.0, 5, exclude_origin=False), P0)
    assert g.w.sum() == pytest.approx(64.0, rel=1e-12)


def test_exclude_origin_default_for_odd_n():
    spec = GridSpec(CARTESIAN, 2.0, 5)
    assert spec.exclude_origin
    g = build_grid(spec, P0)
    assert g.M == 124
    assert min_mode_norm(g) > 0.0
    # weight matches the covered volume: the cube minus one cell
    assert g.w.sum() == pytest.approx(g.volume, rel=1e-12)
    assert g.volume == pytest.approx(64.0 - 0.8**3, rel=1e-12)
    assert not GridSpec(CARTESIAN, 2.0, 4).exclude_origin


@given(st.integers(1, 9), st.floats(0.1, 5.0), st.booleans())
def test_cartesian_invariants(n, kmax, excl):
    g = build_grid(GridSpec(CARTESIAN, kmax, n, exclude_origin=excl), ModelParams(g=0.7, c=1.0, xi=1.3))
    assert g.w.sum() == pytest.approx(g.volume, rel=1e-12)
    # k -> -k maps modes onto modes exactly
    pos = {tuple(k): w for k, w in zip(g.k, g.w)}
    for k, w in zip(g.k, g.w):
        assert pos[tuple(-k)] == w
    # xi >= 1 so v <= g and hence g_j <= g sqrt(w_j)
    assert np.all(g.coupling <= 0.7 * np.sqrt(g.w) * (1 + 1e-14))


@given(st.integers(1, 5), st.floats(0.2, 3.0))
def test_doubling_refines_cells(n, kmax):
    a = build_grid(GridSpec(CARTESIAN, kmax, n, exclude_origin=False), P0)
    b = build_grid(GridSpec(CARTESIAN, kmax, 2 * n, exclude_origin=False), P0)
    assert b.M == 8 * a.M
    assert b.w.sum() == pytest.approx(a.w.sum(), rel=1e-12)
    assert b.w[0] == pytest.approx(a.w[0] / 8, rel=1e-14)


def test_deterministic_and_digest():
    spec = GridSpec(CARTESIAN, 2.0, 4)
    a, b = build_grid(spec, P0), build_grid(spec, P0)
    assert np.array_equal(a.k, b.k) and a.digest == b.digest
    assert build_grid(spec, P0.replace(g=2.0)).digest != a.digest


def test_spherical_grid():
    spec = GridSpec(SPHERICAL_M0, 1.5, (6, 4))
    g = build_grid(spec, P0)
    assert g.M == 24 and g.azimuthal_average
    assert g.w.sum() == pytest.approx(4 / 3 * math.pi * 1.5**3, rel=1e-12)
    assert np.all(g.k[:, 1] == 0.0)
    xr, _ = np.polynomial.legendre.leggauss(6)
    assert min_mode_norm(g) == pytest.approx(0.75 * (xr[0] + 1.0), rel=1e-14)


def test_spherical_weights_integrate_polynomials():
    g = build_grid(GridSpec(SPHERICAL_M0, 1.0, (5, 5)), P0)
    # int_ball |k|^2 d^3k = 4 pi / 5; int_ball k_z^2 d^3k = 4 pi / 15
    assert np.sum(g.w * g.kabs**2) == pytest.approx(4 * math.pi / 5, rel=1e-12)
    assert np.sum(g.w * g.k[:, 2] ** 2) == pytest.approx(4 * math.pi / 15, rel=1e-12)


def test_budget():
    with pytest.raises(ResourceError, match="1000000"):
        build_grid(GridSpec(CARTESIAN, 1.0, 100), P0)
    with pytest.raises(ValueError):
        GridSpec(CARTESIAN, -1.0, 2)
    with pytest.raises(ValueError):
        GridSpec("hexagonal", 1.0, 2)


def test_csv_dump(tmp_path):
    g = build_grid(GridSpec(CARTESIAN, 1.0, 2), P0)
    path = tmp_path / "grid.csv"
    g.to_csv(path)
    data = np.genfromtxt(path, delimiter=",", names=True)
    assert list(data.dtype.names) == ["j", "kx", "ky", "kz", "w", "coupling"]
    assert np.array_equal(data["coupling"], g.coupling)
    assert np.array_equal(data["kz"], g.k[:, 2])


def test_align_to_z():
    assert align_to_z([3.0, 0.0, 4.0]) == (0.0, 0.0, 5.0)
