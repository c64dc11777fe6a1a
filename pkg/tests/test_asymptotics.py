import math

import numpy as np
import pytest

from sregular import asymptotics as asy
from sregular import geometry as geo
from sregular.errors import DomainError, PreconditionError

LOG2, LOG3 = math.log(2), math.log(3)


@pytest.fixture(scope="module")
def cantor_cloud():
    return geo.sample_attractor(geo.cantor_ifs(), 3.0**-10 / 20)


@pytest.fixture(scope="module")
def nonlattice_cloud():
    return geo.sample_attractor(geo.cantor_ifs(0.5, 1 / 3), 3.0**-10 / 20)


class TestGrid:
    def test_geometric_grid_shape(self):
        g = asy.geometric_grid(1.0, 0.01, 40)
        assert g[0] == 1.0
        assert g[-1] >= 0.01
        steps = np.diff(np.log10(g))
        assert np.allclose(steps, -1 / 40)

    def test_bad_grid(self):
        with pytest.raises(DomainError):
            asy.geometric_grid(0.01, 1.0, 40)


class TestCountingCurve:
    def test_single_point_constant_curve(self):
        cloud = geo.PointCloud(np.array([[0.25]]), 1e-9)
        curve = asy.counting_curve(cloud, "separated", 1.0, 1e-2, 10)
        assert np.all(curve.values == 1.0)

    def test_cantor_cell_counts_at_powers(self, cantor_cloud):
        curve = asy.counting_curve(
            cantor_cloud, "separated", 3.0**-1, 3.0**-8, 40
        )
        # at eps = 3^-k the greedy picks at least one point per level-k cell
        for k in (2, 3, 4, 5):
            idx = int(np.argmin(np.abs(curve.eps - 3.0**-k)))
            assert 2.0**k <= curve.values[idx] <= 2.0 ** (k + 1)

    def test_adequacy_floor_enforced(self):
        cloud = geo.PointCloud(np.linspace(0, 1, 11)[:, None], 0.1)
        with pytest.raises(PreconditionError):
            asy.counting_curve(cloud, "separated", 1.0, 0.2, 10)

    def test_monotone(self, nonlattice_cloud):
        curve = asy.counting_curve(
            nonlattice_cloud, "separated", 3.0**-1, 3.0**-8, 40
        )
        diffs = np.diff(curve.values)
        assert (diffs >= -0.01 * curve.values[:-1]).all()


class TestDimensionFit:
    def test_synthetic_power_law_recovery(self):
        grid = asy.geometric_grid(1.0, 1e-3, 25)
        curve = asy.CountingCurve("separated", grid, 3.7 * grid**-0.61)
        fit = asy.dimension_fit(curve)
        assert abs(fit.s_hat - 0.61) < 1e-10

    def test_segment_dimension(self):
        cloud = geo.PointCloud(np.linspace(0, 1, 200001)[:, None], 5e-6)
        curve = asy.counting_curve(cloud, "separated", 0.1, 1e-4, 20)
        fit = asy.dimension_fit(curve)
        assert fit.s_hat == pytest.approx(1.0, abs=0.02)

    def test_cantor_dimension(self, cantor_cloud):
        curve = asy.counting_curve(cantor_cloud, "separated", 3.0**-1, 3.0**-9, 40)
        fit = asy.dimension_fit(curve)
        assert fit.s_hat == pytest.approx(LOG2 / LOG3, abs=0.02)

    def test_insufficient_span(self):
        grid = asy.geometric_grid(1.0, 0.5, 40)
        curve = asy.CountingCurve("separated", grid, grid**-1.0)
        with pytest.raises(PreconditionError):
            asy.dimension_fit(curve)


class TestLimitDiagnostic:
    def test_constant_curve_converges(self):
        grid = asy.geometric_grid(1.0, 1e-3, 30)
        curve = asy.CountingCurve("separated", grid, np.full(grid.size, 7.0))
        diag = asy.limit_diagnostic(curve, 0.0)
        assert diag.verdict == "converging"
        assert diag.amplitude == pytest.approx(0.0, abs=1e-12)

    def test_synthetic_log_periodic_oscillation(self):
        grid = asy.geometric_grid(1.0, 1e-3, 40)
        x = np.log(1 / grid)
        period = LOG3
        values = grid**-0.7 * (1 + 0.2 * np.sin(2 * math.pi * x / period))
        curve = asy.CountingCurve("separated", grid, values)
        diag = asy.limit_diagnostic(curve, 0.7)
        assert diag.verdict == "oscillating"
        assert diag.period == pytest.approx(period, rel=0.08)

    def test_amplitude_invariant_under_value_scaling(self, cantor_cloud):
        curve = asy.counting_curve(cantor_cloud, "separated", 3.0**-1, 3.0**-8, 40)
        d1 = asy.limit_diagnostic(curve, LOG2 / LOG3)
        scaled = asy.CountingCurve(curve.kind, curve.eps, 17.0 * curve.values)
        d2 = asy.limit_diagnostic(scaled, LOG2 / LOG3)
        assert d2.amplitude == pytest.approx(d1.amplitude, rel=1e-9)
        assert d2.verdict == d1.verdict

    def test_verdict_invariant_under_eps_rescaling(self, cantor_cloud):
        curve = asy.counting_curve(cantor_cloud, "separated", 3.0**-1, 3.0**-8, 40)
        d1 = asy.limit_diagnostic(curve, LOG2 / LOG3)
        lam = 2.0
        shifted = asy.CountingCurve(curve.kind, lam * curve.eps, curve.values)
        d2 = asy.limit_diagnostic(shifted, LOG2 / LOG3)
        assert d2.verdict == d1.verdict
        assert d2.period == pytest.approx(d1.period, rel=0.05)

    def test_short_curve_rejected(self):
        grid = asy.geometric_grid(1.0, 0.1, 40)
        curve = asy.CountingCurve("separated", grid, grid**-1.0)
        with pytest.raises(PreconditionError):
            asy.limit_diagnostic(curve, 1.0)

    def test_lattice_cantor_oscillates_with_log3_period(self, cantor_cloud):
        curve = asy.counting_curve(cantor_cloud, "separated", 3.0**-1, 3.0**-10, 40)
        diag = asy.limit_diagnostic(curve, LOG2 / LOG3)
        assert diag.verdict == "oscillating"
        assert diag.amplitude > 0.05
        assert diag.period == pytest.approx(LOG3, rel=0.10)

    def test_nonlattice_amplitude_below_lattice(self, cantor_cloud, nonlattice_cloud):
        c_lat = asy.counting_curve(cantor_cloud, "separated", 3.0**-1, 3.0**-10, 40)
        c_nl = asy.counting_curve(
            nonlattice_cloud, "separated", 3.0**-1, 3.0**-10, 40
        )
        d_lat = asy.limit_diagnostic(c_lat, LOG2 / LOG3)
        d_nl = asy.limit_diagnostic(c_nl, geo.moran_dimension([0.5, 1 / 3]))
        assert d_nl.amplitude < 0.05 < d_lat.amplitude


class TestImageExperiments:
    def test_identity_map_identical_curves(self):
        ifs = geo.cantor_ifs(0.5, 1 / 3)
        ident = geo.ConformalMap("affine", scale=1.0, translation=[0.0])
        pair = asy.image_invariance_experiment(
            ifs, ident, "separated", 3.0**-1, 3.0**-7, 20
        )
        assert pair.base.amplitude == pytest.approx(pair.image.amplitude)
        assert pair.base_fit.s_hat == pytest.approx(pair.image_fit.s_hat)

    def test_homothety_reparametrizes_curve_exactly(self):
        # for x -> lam x with lam a power of two the arithmetic is exact:
        # the greedy picks the same points, so N_image(lam * eps) = N(eps)
        lam = 2.0
        cloud = geo.sample_attractor(geo.cantor_ifs(0.5, 1 / 3), 1e-4)
        scaled = geo.PointCloud(lam * cloud.points, lam * cloud.resolution)
        grid = asy.geometric_grid(3.0**-1, 3.0**-5, 20)
        from sregular import counting as cnt

        for e in grid:
            n_base = cnt.separated_greedy(cloud, float(e))[0]
            n_image = cnt.separated_greedy(scaled, float(lam * e))[0]
            assert n_base == n_image

    def test_inversion_image_converges_and_fits_agree(self):
        ifs = geo.cantor_ifs(0.5, 1 / 3)
        inv = geo.ConformalMap("inversion", center=[2.5], radius=1.0)
        pair = asy.image_invariance_experiment(
            ifs, inv, "separated", 1 / 3, 3.0**-10, 20
        )
        assert pair.image.verdict == "converging"
        assert pair.fits_agree

    def test_minkowski_measurability_segment(self):
        cloud = geo.PointCloud(np.linspace(0, 1, 50001)[:, None], 2e-5)
        diag = asy.minkowski_measurability_experiment(cloud, 1.0, 0.3, 1e-3, 15)
        assert diag.verdict == "converging"
        # eps * (1/eps + 2) -> 1
        assert diag.mean == pytest.approx(1.0, rel=0.05)
