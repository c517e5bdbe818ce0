import math

import numpy as np
import pytest

from imcflab.errors import AsymptoticFlatnessError, DomainError, MetricError
from imcflab.metrics import TabulatedMetric
from imcflab.models import GluedMetricSpec, MetricConfig


def test_euclidean_sphere(geometry_service, euclidean):
    sphere = geometry_service.sphere_geometry(euclidean, 2.0)
    assert sphere.area == pytest.approx(16.0 * math.pi, rel=1e-14)
    assert sphere.mean_curvature == pytest.approx(1.0, rel=1e-14)
    assert sphere.hawking_mass == pytest.approx(0.0, abs=1e-14)
    assert sphere.enclosed_volume == pytest.approx(32.0 * math.pi / 3.0, rel=1e-10)


@pytest.mark.parametrize("m", [0.5, 1.0, 2.0])
def test_schwarzschild_hawking_mass_is_constant(geometry_service, m):
    metric = geometry_service.make_preset("schwarzschild", {"m": m})
    s = np.geomspace(2.0 * m, 100.0 * m, 200)
    np.testing.assert_allclose(geometry_service.hawking_mass(metric, s), m, rtol=0, atol=1e-8)


def test_scalar_curvature_vanishes_for_vacuum_presets(geometry_service, euclidean, schwarzschild):
    for metric in (euclidean, schwarzschild):
        s = np.geomspace(metric.s_min + 0.1, 1e3, 64)
        values = geometry_service.scalar_curvature_profile(metric, s)
        assert np.max(np.abs(values)) <= 1e-8


def test_cored_scalar_curvature_matches_conformal_formula(geometry_service, cored):
    s = np.array([0.05, 0.5, 1.0, 2.0, 10.0])
    expected = -8.0 * cored.phi(s)**-5 * cored.laplacian_phi(s)
    np.testing.assert_allclose(geometry_service.scalar_curvature_profile(cored, s), expected,
                               rtol=1e-8)
    assert geometry_service.min_scalar_curvature(cored, 0.0, 100.0) > 0.0


def test_scalar_curvature_needs_interior_point(geometry_service, schwarzschild):
    with pytest.raises(DomainError):
        geometry_service.scalar_curvature(schwarzschild, schwarzschild.s_min)


def test_unknown_preset_and_bad_parameters(geometry_service):
    with pytest.raises(MetricError, match="unknown preset"):
        geometry_service.make_preset("kerr")
    with pytest.raises(MetricError, match="positive"):
        geometry_service.make_preset("schwarzschild-areal", {"m": -1.0})
    with pytest.raises(MetricError, match="requires parameter"):
        geometry_service.make_preset("cored-schwarzschild", {"m": 1.0})


def test_metric_from_tabulated_config(geometry_service):
    s = np.linspace(0.0, 10.0, 64)
    config = MetricConfig(tabulated={"s": s.tolist(), "A": [1.0] * 64, "R": s.tolist()})
    metric = geometry_service.metric_from_config(config)
    assert isinstance(metric, TabulatedMetric)
    assert geometry_service.hawking_mass(metric, 5.0) == pytest.approx(0.0, abs=1e-12)
    assert metric.has_center


def test_tabulated_rejects_unsorted_samples():
    with pytest.raises(MetricError):
        TabulatedMetric([0, 2, 1, 3, 4, 5, 6, 7], [1.0] * 8, [0, 2, 1, 3, 4, 5, 6, 7])


def test_af_decay(geometry_service, euclidean, schwarzschild, cored):
    flat = geometry_service.af_decay_check(euclidean, 1.0)
    assert flat.passes
    assert flat.witnessed_constant == 0.0
    for metric in (schwarzschild, cored):
        report = geometry_service.af_decay_check(metric, 10.0)
        assert report.passes
        assert report.witnessed_constant is not None


def test_sphere_cap_is_not_asymptotically_flat(geometry_service):
    cap = geometry_service.make_preset("round-3-sphere-cap", {"lambda": 10.0})
    report = geometry_service.af_decay_check(cap, 1.0)
    assert not report.passes
    assert report.witnessed_constant is None
    with pytest.raises(AsymptoticFlatnessError):
        geometry_service.af_decay_check(cap, 5.0)


def test_adm_mass(geometry_service, schwarzschild, cored, euclidean):
    assert geometry_service.adm_mass(schwarzschild) == pytest.approx(1.0, abs=1e-8)
    assert geometry_service.adm_mass(cored) == pytest.approx(1.0, abs=1e-6)
    assert geometry_service.adm_mass(euclidean) == pytest.approx(0.0, abs=1e-12)


def test_glued_cap_curvature(geometry_service, euclidean):
    glued = geometry_service.build_glued_metric(
        GluedMetricSpec(inner_metric=euclidean, transition_radius=4.0, cap_scale=10.0))
    inside = np.linspace(0.5, 8.9, 32)
    outside = np.linspace(10.1, 60.0, 32)
    np.testing.assert_allclose(geometry_service.scalar_curvature_profile(glued, inside), 0.0,
                               atol=1e-10)
    np.testing.assert_allclose(geometry_service.scalar_curvature_profile(glued, outside), 0.24,
                               rtol=1e-8)


def test_glued_cap_flattens_for_large_scale(geometry_service, euclidean):
    glued = geometry_service.build_glued_metric(
        GluedMetricSpec(inner_metric=euclidean, transition_radius=4.0, cap_scale=1e6))
    s = np.concatenate((np.linspace(0.5, 8.9, 32), np.linspace(10.1, 50.0, 32)))
    assert np.max(np.abs(geometry_service.scalar_curvature_profile(glued, s))) < 1e-9


def test_exterior_region(geometry_service, schwarzschild, euclidean):
    region = geometry_service.exterior_region(schwarzschild)
    assert region.has_minimal_sphere
    assert region.s_ext == pytest.approx(2.0, abs=1e-12)
    assert region.violations == 0
    flat = geometry_service.exterior_region(euclidean)
    assert not flat.has_minimal_sphere
    assert flat.s_ext == 0.0


def test_schwarzschild_sphere_at_four(geometry_service, schwarzschild):
    sphere = geometry_service.sphere_geometry(schwarzschild, 4.0)
    assert sphere.area == pytest.approx(64.0 * math.pi, rel=1e-14)
    assert sphere.mean_curvature == pytest.approx(0.3535533906, abs=1e-10)
    assert sphere.hawking_mass == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("metric_name", ["euclidean", "schwarzschild", "cored", "neck"])
def test_hawking_mass_is_capped_by_area(request, geometry_service, metric_name):
    metric = request.getfixturevalue(metric_name)
    s = np.linspace(metric.s_min, min(metric.s_max, 40.0), 2001)[1:]
    area = np.asarray(metric.area(s))
    h = np.asarray(metric.mean_curvature(s))
    cap = np.sqrt(area / (16.0 * math.pi))
    mass = np.asarray(geometry_service.hawking_mass(metric, s))
    assert np.all(mass <= cap * (1.0 + 1e-12))
    strict = h * h * area > 1e-8 * 16.0 * math.pi
    assert np.all(mass[strict] < cap[strict])


def test_hawking_mass_equals_cap_on_the_horizon(geometry_service, schwarzschild):
    sphere = geometry_service.sphere_geometry(schwarzschild, 2.0)
    assert sphere.mean_curvature == 0.0
    assert sphere.hawking_mass == pytest.approx(math.sqrt(sphere.area / (16.0 * math.pi)),
                                                rel=1e-14)


@pytest.mark.parametrize("metric_name", ["euclidean", "schwarzschild", "cored", "neck"])
def test_enclosed_volume_is_strictly_increasing(request, geometry_service, metric_name):
    metric = request.getfixturevalue(metric_name)
    s = np.linspace(metric.s_min + 0.05, min(metric.s_max, 40.0), 48)
    volumes = [geometry_service.sphere_geometry(metric, x).enclosed_volume for x in s]
    assert np.all(np.diff(volumes) > 0.0)


def test_cored_scalar_curvature_against_difference_laplacian(geometry_service, cored):
    s = np.array([0.25, 0.5, 1.0, 2.0, 3.0, 5.0])
    h = 1e-3
    phi, up, down = cored.phi(s), cored.phi(s + h), cored.phi(s - h)
    # flat radial Laplacian: phi'' + 2 phi' / r
    laplacian = (up - 2.0 * phi + down) / h**2 + (up - down) / (h * s)
    expected = -8.0 * phi**-5 * laplacian
    np.testing.assert_allclose(geometry_service.scalar_curvature_profile(cored, s), expected,
                               rtol=1e-5)
    assert geometry_service.scalar_curvature(cored, 1e-4) == pytest.approx(12.0 / 1.5**5,
                                                                           rel=1e-6)


def test_tabulated_round_trip_keeps_derivatives(cored):
    tabulated = TabulatedMetric.from_metric(cored, 4096, s_min=0.0, s_max=50.0)
    s = np.linspace(0.5, 49.5, 2000)
    for name in ("dA", "dR", "d2R"):
        exact = np.asarray(getattr(cored, name)(s))
        approx = np.asarray(getattr(tabulated, name)(s))
        assert np.max(np.abs(approx - exact)) <= 1e-6 * np.max(np.abs(exact)), name
    np.testing.assert_allclose(tabulated.dR(s), cored.dR(s), rtol=1e-6)
    np.testing.assert_allclose(tabulated.R(s), cored.R(s), rtol=1e-10)


def test_raw_samples_fall_back_to_monotone_cubics(cored):
    s = np.linspace(0.0, 50.0, 512)
    raw = TabulatedMetric(s, cored.A(s), cored.R(s))
    assert raw.derivative_samples is None
    assert raw.derivative_noise(10.0) > 0.0
    carried = TabulatedMetric.from_metric(cored, 512, s_min=0.0, s_max=50.0)
    assert carried.derivative_noise(10.0) < 1e-3 * raw.derivative_noise(10.0)


def test_partial_derivative_samples_are_rejected():
    s = np.linspace(0.0, 10.0, 16)
    with pytest.raises(MetricError, match="derivative samples"):
        TabulatedMetric(s, np.ones_like(s), s, derivatives={"dR": np.ones_like(s)})
    with pytest.raises(ValueError, match="derivative samples"):
        MetricConfig(tabulated={"s": s.tolist(), "A": [1.0] * 16, "R": s.tolist(),
                                "dR": [1.0] * 16})


@pytest.mark.parametrize("metric_name", ["euclidean", "schwarzschild", "cored", "neck"])
def test_metric_config_round_trip(request, geometry_service, metric_name):
    metric = request.getfixturevalue(metric_name)
    rebuilt = geometry_service.metric_from_config(MetricConfig.model_validate(metric.to_config()))
    assert (rebuilt.s_min, rebuilt.s_max) == (metric.s_min, metric.s_max)
    s = np.linspace(metric.s_min, min(metric.s_max, 40.0), 64)[1:]
    np.testing.assert_allclose(rebuilt.area(s), metric.area(s), rtol=1e-14)


def test_tabulated_and_glued_config_round_trip(geometry_service, cored, schwarzschild):
    tabulated = TabulatedMetric.from_metric(cored, 256, s_min=0.0, s_max=20.0)
    document = tabulated.to_config()
    assert set(document["tabulated"]) == {"s", "A", "R", "dA", "d2A", "dR", "d2R"}
    rebuilt = geometry_service.metric_from_config(MetricConfig.model_validate(document))
    s = np.linspace(0.1, 19.9, 50)
    np.testing.assert_allclose(rebuilt.d2R(s), tabulated.d2R(s), rtol=0, atol=1e-14)

    glued = geometry_service.build_glued_metric(
        GluedMetricSpec(inner_metric=schwarzschild, transition_radius=10.0, cap_scale=100.0))
    config = MetricConfig.model_validate(glued.to_config())
    assert config.glued.inner.preset == "schwarzschild-areal"
    again = geometry_service.metric_from_config(config)
    s = np.linspace(3.0, 200.0, 64)
    np.testing.assert_allclose(geometry_service.scalar_curvature_profile(again, s),
                               geometry_service.scalar_curvature_profile(glued, s), rtol=1e-12,
                               atol=1e-14)


def test_af_decay_constant_bounds_every_sample(geometry_service, schwarzschild, cored):
    for metric in (schwarzschild, cored):
        report = geometry_service.af_decay_check(metric, 10.0)
        assert report.bound_violations == 0
        c = report.witnessed_constant
        for sample in report.samples:
            for value in (sample.sigma, sample.r_dsigma, sample.r2_ddsigma):
                assert value <= c / sample.r * (1.0 + 1e-12)


def test_af_decay_rejects_slow_decay(geometry_service):
    # |A - 1| ~ r^-0.92 fits the slope slack but outgrows any constant over r
    s = np.geomspace(1.0, 1000.0, 2000)
    derivatives = {"dA": -0.92 * s**-1.92, "d2A": 0.92 * 1.92 * s**-2.92,
                   "dR": np.ones_like(s), "d2R": np.zeros_like(s)}
    slow = TabulatedMetric(s, 1.0 + s**-0.92, s, derivatives=derivatives)
    report = geometry_service.af_decay_check(slow, 10.0)
    assert report.decay_slope <= 0.1
    assert report.bound_violations > 0
    assert not report.passes
    assert report.witnessed_constant is None
