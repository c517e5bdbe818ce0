import math
from dataclasses import replace

import numpy as np
import pytest

from config.settings import Settings
from imcflab.app.factories.build_services import build_core_services
from imcflab.errors import FlowError, OracleError
from imcflab.models import MeeksYauParams
from imcflab.services.isoperimetry_service import classical_area

VOLUMES = np.geomspace(0.1, 100.0, 32)


@pytest.fixture(scope="module")
def flat_flow(flow_service, euclidean):
    return flow_service.exact_flow(euclidean, 1e-3, 18.0, 512)


@pytest.fixture(scope="module")
def cored_flow(flow_service, cored):
    return flow_service.exact_flow(cored, 1e-3, 24.0, 512)


@pytest.fixture(scope="module")
def cored_iso(isoperimetry_service, cored):
    return isoperimetry_service.build_iso_profile(cored, VOLUMES)


@pytest.mark.parametrize("v", [0.1, 1.0, 10.0, 100.0])
def test_flat_bound_is_the_classical_inequality(isoperimetry_service, flat_flow, v):
    classical = float(classical_area(v))
    assert isoperimetry_service.theorem1_rhs(flat_flow, v) == pytest.approx(classical, rel=1e-6)
    assert flat_flow.locate(v).B == pytest.approx(classical, rel=1e-6)


def test_flat_bound_is_sharp(isoperimetry_service, flat_flow):
    reports = isoperimetry_service.check_bound(flat_flow, [0.1, 1.0, 10.0, 100.0])
    for report in reports:
        assert report.verdict == "pass"
        assert abs(report.slack) <= 1e-6
        assert abs(report.improvement) <= 1e-6


def test_cored_bound_improves_on_mass_free_estimate(isoperimetry_service, cored_flow):
    reports = isoperimetry_service.check_bound(cored_flow, np.geomspace(0.1, 500.0, 24))
    assert all(r.verdict == "pass" for r in reports)
    assert all(r.improvement > 0.0 for r in reports)
    assert all(r.B <= r.rhs * (1.0 + 1e-8) for r in reports)


def test_schwarzschild_bound_from_horizon(isoperimetry_service, flow_service, schwarzschild):
    profile = flow_service.exact_flow(schwarzschild, 2.0, 8.0, 256)
    reports = isoperimetry_service.check_bound(profile, np.geomspace(0.1, 100.0, 16))
    assert all(r.verdict == "pass" for r in reports)
    assert profile.B0 == pytest.approx(16.0 * math.pi, rel=1e-12)


def test_point_bound_rejects_finite_start(isoperimetry_service, flow_service, schwarzschild):
    profile = flow_service.exact_flow(schwarzschild, 2.0, 4.0, 64)
    with pytest.raises(FlowError):
        isoperimetry_service.theorem1_rhs(profile, 1.0)


def test_mass_integral_beyond_flow_range(isoperimetry_service, flat_flow):
    with pytest.raises(FlowError):
        isoperimetry_service.mass_integral(flat_flow, 2.0 * flat_flow.v_max)
    assert isoperimetry_service.mass_integral(flat_flow, 0.0) == (0.0, 0.0)


@pytest.mark.parametrize("metric_name", ["euclidean", "schwarzschild", "cored"])
def test_exterior_profile_is_monotone(request, isoperimetry_service, metric_name):
    metric = request.getfixturevalue(metric_name)
    iso = isoperimetry_service.build_iso_profile(metric, VOLUMES)
    report = isoperimetry_service.monotonicity_check(iso)
    assert report.passed
    assert report.first_failure is None
    assert np.all(iso.A <= iso.A_ext * (1.0 + 1e-12))


def test_corrupted_profile_fails_monotonicity(isoperimetry_service, cored_iso):
    broken = replace(cored_iso, A_ext=cored_iso.A_ext[::-1].copy())
    report = isoperimetry_service.monotonicity_check(broken)
    assert not report.passed
    assert report.first_failure == 1
    assert report.worst_decrement > 0.0


def test_monotonicity_needs_enough_volumes(isoperimetry_service, euclidean):
    iso = isoperimetry_service.build_iso_profile(euclidean, np.geomspace(0.1, 1.0, 8))
    with pytest.raises(OracleError):
        isoperimetry_service.monotonicity_check(iso)


def test_oracle_on_flat_space_picks_balls(isoperimetry_service, euclidean):
    result = isoperimetry_service.oracle_A(euclidean, 10.0)
    assert result.candidate.kind == "ball"
    assert result.area == pytest.approx(float(classical_area(10.0)), rel=1e-8)
    with pytest.raises(OracleError):
        isoperimetry_service.oracle_A(euclidean, 10.0, mode="interior")
    with pytest.raises(OracleError):
        isoperimetry_service.oracle_A(euclidean, -1.0)


def test_flat_rigidity(isoperimetry_service, euclidean, flat_flow):
    iso = isoperimetry_service.build_iso_profile(euclidean, VOLUMES)
    report = isoperimetry_service.rigidity_probe(euclidean, flat_flow, iso)
    assert report.equality_found
    assert report.flat
    assert report.consistent
    assert report.max_abs_scalar_curvature <= 1e-10
    assert abs(report.adm_mass) <= 1e-10


def test_cored_has_no_equality(isoperimetry_service, cored, cored_flow):
    iso = isoperimetry_service.build_iso_profile(cored, np.geomspace(1.0, 100.0, 16))
    report = isoperimetry_service.rigidity_probe(cored, cored_flow, iso)
    assert not report.equality_found
    assert report.consistent
    assert report.min_relative_gap > 1e-4


def test_schwarzschild_has_no_equality(isoperimetry_service, schwarzschild):
    iso = isoperimetry_service.build_iso_profile(schwarzschild, np.geomspace(1.0, 100.0, 16))
    report = isoperimetry_service.rigidity_probe(schwarzschild, None, iso)
    assert not report.equality_found
    assert report.min_relative_gap > 1e-4


def test_meeks_yau_small_curvature_limit(isoperimetry_service):
    assert isoperimetry_service.meeks_yau_integral(1e-6, 1.0) == pytest.approx(math.pi, rel=1e-6)
    assert isoperimetry_service.meeks_yau_integral(1.0, 0.0) == 0.0


def test_meeks_yau_matches_closed_form(isoperimetry_service):
    value = isoperimetry_service.meeks_yau_integral(1.0, math.pi / 2.0)
    assert value == pytest.approx(isoperimetry_service.meeks_yau_closed_form(1.0, math.pi / 2.0),
                                  rel=1e-9)
    assert value == pytest.approx(5.1782, abs=1e-4)


def test_meeks_yau_monotonicity(isoperimetry_service):
    in_k = [isoperimetry_service.meeks_yau_integral(k, 1.0) for k in (0.5, 1.0, 2.0, 4.0)]
    in_r = [isoperimetry_service.meeks_yau_integral(1.0, r) for r in (0.25, 0.5, 1.0, 2.0)]
    assert all(b < a for a, b in zip(in_k, in_k[1:]))
    assert all(b > a for a, b in zip(in_r, in_r[1:]))


def test_meeks_yau_radius(isoperimetry_service):
    params = MeeksYauParams(K=1.0, d=2.0, iota=1.0)
    assert params.r == 0.5
    assert MeeksYauParams(K=1.0, d=8.0, iota=1.0).r == 1.0
    assert isoperimetry_service.meeks_yau_bound(params) == pytest.approx(
        isoperimetry_service.meeks_yau_closed_form(1.0, 0.5), rel=1e-9)


def test_bound_decreases_with_mass(isoperimetry_service, flow_service, geometry_service):
    profiles = []
    for mass in (2.0, 0.5, 1.0):
        metric = geometry_service.make_preset("cored-schwarzschild", {"m": mass, "b": 1.0})
        profiles.append((mass, flow_service.exact_flow(metric, 1e-3, 20.0, 256)))
    report = isoperimetry_service.mass_comparison(profiles, 10.0)
    assert [e.mass for e in report.entries] == [0.5, 1.0, 2.0]
    assert report.decreasing


def test_chain_of_inequalities(isoperimetry_service, cored_flow, cored_iso):
    report = isoperimetry_service.chain_check(cored_flow, cored_iso)
    assert report.passed
    assert report.checked == VOLUMES.size
    assert report.violations == []


def test_exterior_oracle_on_schwarzschild_shell(isoperimetry_service, geometry_service,
                                                schwarzschild):
    v = geometry_service.sphere_geometry(schwarzschild, 4.0).enclosed_volume
    result = isoperimetry_service.oracle_A(schwarzschild, v, "exterior")
    # the horizon is the boundary of M and adds no area
    assert result.area == pytest.approx(64.0 * math.pi, rel=1e-8)
    assert result.candidate.inner == pytest.approx(2.0, abs=1e-12)
    assert result.candidate.outer == pytest.approx(4.0, rel=1e-9)


def test_exterior_oracle_counts_an_interior_throat(isoperimetry_service, geometry_service, neck):
    s_ext = geometry_service.exterior_region(neck).s_ext
    assert s_ext > neck.s_min
    result = isoperimetry_service.oracle_A(neck, 1.0, "exterior")
    assert result.candidate.kind == "annulus"
    assert result.candidate.inner == pytest.approx(s_ext, rel=1e-9)
    throat = float(neck.area(s_ext))
    assert result.area == pytest.approx(throat + float(neck.area(result.candidate.outer)),
                                        rel=1e-9)


def test_volume_tables_are_cached_up_to_the_limit(euclidean, schwarzschild, cored):
    settings = Settings(_env_file=None, METRIC_CACHE_SIZE=2, VOLUME_TABLE_SIZE=1024)
    iso_service = build_core_services(settings)["isoperimetry_service"]
    for metric in (euclidean, schwarzschild, cored):
        iso_service.oracle_A(metric, 1.0)
    assert iso_service._tables.cache_info().currsize == 2
    iso_service.oracle_A(cored, 2.0)
    assert iso_service._tables.cache_info().hits == 1
