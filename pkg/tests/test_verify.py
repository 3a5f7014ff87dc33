"""Light-parameter runs of the verification suites (the acceptance module
runs them at full scale)."""

import pytest

from sphereflow.errors import ConfigurationError
from sphereflow.verify import (
    SUITES,
    run_suite,
    verify_bound,
    verify_conservation,
    verify_identities,
    verify_sbm,
    verify_sphere,
    verify_transforms,
)


def checks_by_name(report):
    return {c["check_name"]: c for c in report["checks"]}


class TestSuites:
    def test_identities(self):
        report = verify_identities(ns=(33, 65, 129))
        assert report["passed"]
        cs = checks_by_name(report)
        assert cs["tangency_order"]["estimate"] >= 1.8
        assert cs["damping_negative_control"]["estimate"] >= 10

    def test_conservation_light(self):
        report = verify_conservation(n=129, dt=4e-4, t_end=0.25,
                                     dts=(8e-4, 4e-4), ssme_steps=500)
        cs = checks_by_name(report)
        assert cs["conservation_space_average"]["verdict"] == "pass"
        assert cs["conservation_dist_to_pole"]["verdict"] == "pass"
        assert cs["noise_substep_grad_invariant"]["verdict"] == "pass"
        assert 1.8 <= cs["terminal_field_dt_order"]["estimate"] <= 2.2

    def test_sphere_light(self):
        report = verify_sphere(steps=2000)
        assert report["passed"]

    def test_sbm_light(self):
        report = verify_sbm(m=800, t_end=0.5, dt=2e-3, iso_m=600, iso_t=3.0, iso_dt=1e-2)
        cs = checks_by_name(report)
        # with this few samples only demand the machinery holds together
        assert set(cs) == {"scheme_weak_agreement", "mean_decay", "isotropy_second_moments"}
        assert cs["mean_decay"]["verdict"] in ("pass", "fail")
        assert report["checks"][0]["detail"]["mean_rotation"]

    def test_bound(self):
        report = verify_bound()
        assert report["passed"]
        assert report["bound_report"]["reference_value"] == 0.2298

    def test_transforms_light(self):
        report = verify_transforms(levels=((33, 8e-4), (65, 4e-4)), t_end=0.1,
                                   snap_every=25, circle_n=129)
        cs = checks_by_name(report)
        assert cs["arclength_exact"]["verdict"] == "pass"
        assert cs["bcf_residual_joint_order"]["estimate"] >= 1.8

    def test_unknown_suite(self):
        with pytest.raises(ConfigurationError):
            run_suite("nonsense")

    def test_registry_complete(self):
        assert set(SUITES) == {
            "identities", "conservation", "sphere", "sbm", "bound",
            "transforms", "stationary",
        }
