"""Unit tests for the rod's physical fields, matrices, and wrenches."""

import numpy as np
import pytest

from rodobs.liegroup import exp_pose
from rodobs.rod_model import (
    ExternalLoad,
    MaterialGeometry,
    RodModel,
    TendonRouting,
    actuation_wrench,
    elastic_wrench,
    gravity_wrench,
    proportional_damping,
    reference_strain,
    section_inertia,
    section_stiffness,
    tip_load_wrench,
)

RNG = np.random.default_rng(42)


class TestMaterialGeometry:
    def test_defaults_match_hardware_sheet(self):
        mg = MaterialGeometry()
        assert mg.length == 0.45
        assert mg.radius == 0.0016
        assert mg.density == 20321.0
        assert mg.youngs == 68.9e9
        assert mg.shear == 26.0e9
        assert mg.poisson == 0.325

    def test_derived_section_properties(self):
        mg = MaterialGeometry()
        assert mg.area == pytest.approx(8.0425e-6, rel=1e-4)
        assert mg.second_moment == pytest.approx(5.1472e-12, rel=1e-4)

    def test_rejects_nonpositive(self):
        for kwargs in (
            dict(length=0.0),
            dict(radius=-1.0),
            dict(density=0.0),
            dict(youngs=0.0),
            dict(shear=-2.0),
        ):
            with pytest.raises(ValueError):
                MaterialGeometry(**kwargs)

    def test_rejects_poisson_out_of_range(self):
        with pytest.raises(ValueError):
            MaterialGeometry(poisson=0.5)
        with pytest.raises(ValueError):
            MaterialGeometry(poisson=0.0)


class TestSectionMatrices:
    def test_inertia_at_sheet_density(self):
        # rho pi r^2 = 2700 * 8.0425e-6 = 0.021715 kg/m for the raw material
        j = section_inertia(MaterialGeometry(density=2700.0))
        np.testing.assert_allclose(np.diag(j)[3:], 0.021715, rtol=1e-4)

    def test_inertia_at_calibrated_density(self):
        # Effective density lumps the disk masses: rho pi r^2 = 0.16343 kg/m,
        # rho pi r^4 / 4 = 1.0459e-7 kg m (doubled for the polar entry).
        j = section_inertia(MaterialGeometry())
        np.testing.assert_allclose(
            np.diag(j), [2.0918e-7, 1.0459e-7, 1.0459e-7, 0.16343, 0.16343, 0.16343],
            rtol=1e-4,
        )

    def test_inertia_vanishes_with_radius(self):
        j = section_inertia(MaterialGeometry(radius=1e-9))
        assert np.max(np.abs(j)) < 1e-12

    def test_stiffness_angular_block(self):
        # (2G, E, E) * pi r^4 / 4 with the sheet constants
        k = section_stiffness(MaterialGeometry())
        np.testing.assert_allclose(np.diag(k)[:3], [0.26766, 0.35464, 0.35464], rtol=1e-4)

    def test_stiffness_linear_block(self):
        # (E, G, G) * pi r^2 with the sheet constants
        k = section_stiffness(MaterialGeometry())
        np.testing.assert_allclose(np.diag(k)[3:], [5.5413e5, 2.0910e5, 2.0910e5], rtol=1e-4)

    def test_stiffness_linear_in_youngs(self):
        base = section_stiffness(MaterialGeometry())
        doubled = section_stiffness(MaterialGeometry(youngs=2 * 68.9e9))
        np.testing.assert_allclose(doubled[1, 1], 2 * base[1, 1], rtol=1e-12)
        np.testing.assert_allclose(doubled[2, 2], 2 * base[2, 2], rtol=1e-12)
        np.testing.assert_allclose(doubled[3, 3], 2 * base[3, 3], rtol=1e-12)
        np.testing.assert_allclose(doubled[0, 0], base[0, 0], rtol=1e-12)

    def test_both_symmetric_positive_definite(self):
        mg = MaterialGeometry()
        for m in (section_inertia(mg), section_stiffness(mg)):
            np.testing.assert_array_equal(m, m.T)
            assert np.min(np.linalg.eigvalsh(m)) > 0.0


class TestReferenceStrain:
    def test_value(self):
        np.testing.assert_array_equal(reference_strain(), [0, 0, 0, 1, 0, 0])

    def test_unit_stretch(self):
        assert np.linalg.norm(reference_strain()[3:]) == 1.0


class TestElasticWrench:
    def test_zero_at_reference(self):
        ref = reference_strain()
        k = section_stiffness(MaterialGeometry())
        np.testing.assert_array_equal(elastic_wrench(ref, ref, k), np.zeros(6))

    def test_pure_curvature(self):
        ref = reference_strain()
        k = section_stiffness(MaterialGeometry())
        xi = ref + np.array([0.0, 0.0, 0.1, 0.0, 0.0, 0.0])
        out = elastic_wrench(xi, ref, k)
        np.testing.assert_allclose(out[:3], [0.0, 0.0, 0.1 * k[2, 2]], atol=1e-12)
        np.testing.assert_allclose(out[3:], np.zeros(3), atol=1e-12)

    def test_matches_direct_product(self):
        ref = reference_strain()
        k = section_stiffness(MaterialGeometry())
        xi = ref + RNG.uniform(-0.1, 0.1, 6)
        np.testing.assert_allclose(elastic_wrench(xi, ref, k), k @ (xi - ref), atol=1e-9)

    def test_linearity_about_reference(self):
        ref = reference_strain()
        k = section_stiffness(MaterialGeometry())
        d1 = RNG.uniform(-0.1, 0.1, 6)
        d2 = RNG.uniform(-0.1, 0.1, 6)
        combined = elastic_wrench(ref + 2.0 * d1 + 3.0 * d2, ref, k)
        parts = 2.0 * elastic_wrench(ref + d1, ref, k) + 3.0 * elastic_wrench(ref + d2, ref, k)
        np.testing.assert_allclose(combined, parts, rtol=1e-12, atol=1e-9)


class TestActuationWrench:
    def test_straight_rod_unit_tension(self):
        # Tendon offset +0.025 along y, straight rod: the tendon pulls the
        # section back toward the base (force -x) and bends it toward the
        # tendon side (moment +z = d x f).
        out = actuation_wrench(reference_strain(), (0.0, 0.025, 0.0), 1.0)
        np.testing.assert_allclose(out[:3], [0.0, 0.0, 0.025], atol=1e-15)
        np.testing.assert_allclose(out[3:], [-1.0, 0.0, 0.0], atol=1e-15)

    def test_moment_is_offset_cross_force(self):
        xi = reference_strain() + RNG.uniform(-0.2, 0.2, 6)
        off = np.array([0.0, 0.02, -0.01])
        out = actuation_wrench(xi, off, 3.0)
        np.testing.assert_allclose(out[:3], np.cross(off, out[3:]), atol=1e-12)

    def test_zero_tension(self):
        np.testing.assert_array_equal(
            actuation_wrench(reference_strain(), (0.0, 0.025, 0.0), 0.0), np.zeros(6)
        )

    def test_zero_offset_gives_pure_axial_force(self):
        out = actuation_wrench(reference_strain(), (0.0, 0.0, 0.0), 2.0)
        np.testing.assert_allclose(out[:3], np.zeros(3), atol=1e-15)
        np.testing.assert_allclose(out[3:], [-2.0, 0.0, 0.0], atol=1e-15)

    def test_linear_block_norm_equals_tension(self):
        for _ in range(10):
            xi = reference_strain() + RNG.uniform(-0.3, 0.3, 6)
            tension = float(RNG.uniform(0.0, 10.0))
            out = actuation_wrench(xi, (0.0, 0.025, 0.0), tension)
            assert np.linalg.norm(out[3:]) == pytest.approx(tension, abs=1e-12)

    def test_rejects_negative_tension(self):
        with pytest.raises(ValueError):
            actuation_wrench(reference_strain(), (0.0, 0.025, 0.0), -1.0)

    def test_rejects_degenerate_tangent(self):
        xi = np.zeros(6)  # zero stretch and zero curvature: no tendon path
        with pytest.raises(ValueError):
            actuation_wrench(xi, (0.0, 0.025, 0.0), 1.0)


class TestGravityWrench:
    def test_zero_gravity(self):
        out = gravity_wrench(np.eye(3), MaterialGeometry(), (0.0, 0.0, 0.0))
        np.testing.assert_array_equal(out, np.zeros(6))

    def test_identity_rotation_magnitude(self):
        # rho A |g| = 0.16343 * 9.81 = 1.6033 N/m straight down
        out = gravity_wrench(np.eye(3), MaterialGeometry(), (0.0, -9.81, 0.0))
        np.testing.assert_allclose(out[:3], np.zeros(3), atol=1e-15)
        np.testing.assert_allclose(out[3:], [0.0, -1.6033, 0.0], rtol=1e-4)

    def test_rotation_preserves_norm(self):
        g = np.array([0.0, -9.81, 0.0])
        rot = exp_pose(np.array([0.3, -0.8, 0.5, 0, 0, 0]))[:3, :3]
        out = gravity_wrench(rot, MaterialGeometry(), g)
        ref = gravity_wrench(np.eye(3), MaterialGeometry(), g)
        assert np.linalg.norm(out[3:]) == pytest.approx(np.linalg.norm(ref[3:]), rel=1e-12)

    def test_quarter_turn_rotates_components(self):
        rot = exp_pose(np.array([0.0, 0.0, np.pi / 2, 0, 0, 0]))[:3, :3]
        out = gravity_wrench(rot, MaterialGeometry(), (0.0, -9.81, 0.0))
        # R^T maps world -y into body -x for a +z quarter turn
        np.testing.assert_allclose(out[3:], [-1.6033, 0.0, 0.0], rtol=1e-4, atol=1e-12)


class TestTipLoadWrench:
    def test_zero_force(self):
        np.testing.assert_array_equal(tip_load_wrench(np.eye(3), (0, 0, 0)), np.zeros(6))

    def test_hanging_weight(self):
        # 50 g at 9.81 m/s^2 pulls straight down with 0.4905 N
        out = tip_load_wrench(np.eye(3), (0.0, -0.4905, 0.0))
        np.testing.assert_allclose(out, [0, 0, 0, 0.0, -0.4905, 0.0], atol=1e-15)

    def test_norm_preserved_under_rotation(self):
        f = np.array([0.2, -0.4905, 0.1])
        rot = exp_pose(np.array([-0.4, 0.9, 0.2, 0, 0, 0]))[:3, :3]
        out = tip_load_wrench(rot, f)
        assert np.linalg.norm(out[3:]) == pytest.approx(np.linalg.norm(f), rel=1e-12)
        np.testing.assert_allclose(out[:3], np.zeros(3), atol=1e-15)


class TestDamping:
    def test_proportional_to_stiffness_diagonal(self):
        k = section_stiffness(MaterialGeometry())
        d = proportional_damping(k, 1e-4)
        np.testing.assert_allclose(np.diag(d), 1e-4 * np.diag(k), rtol=1e-12)
        assert np.max(np.abs(d - np.diag(np.diag(d)))) == 0.0

    def test_load_rejects_indefinite_damping(self):
        bad = -np.eye(6)
        with pytest.raises(ValueError):
            ExternalLoad(damping=bad)

    def test_load_accepts_psd_damping(self):
        load = ExternalLoad(damping=np.eye(6) * 0.5)
        np.testing.assert_allclose(load.damping_matrix, 0.5 * np.eye(6))


class TestTendonRouting:
    def test_default_offset(self):
        np.testing.assert_array_equal(TendonRouting().offset_vector, [0.0, 0.025, 0.0])

    def test_rejects_out_of_plane_offset(self):
        with pytest.raises(ValueError):
            TendonRouting(offset=(0.01, 0.025, 0.0))


class TestRodModel:
    def test_build_defaults(self):
        model = RodModel.build()
        np.testing.assert_allclose(model.inertia, section_inertia(model.geometry))
        np.testing.assert_allclose(model.stiffness, section_stiffness(model.geometry))
        np.testing.assert_array_equal(model.strain_ref, reference_strain())
        assert model.linear_density == pytest.approx(0.16343, rel=1e-4)

    def test_density_scale_touches_only_inertia(self):
        base = RodModel.build()
        scaled = RodModel.build(density_scale=1.05)
        np.testing.assert_allclose(scaled.inertia, 1.05 * base.inertia, rtol=1e-12)
        np.testing.assert_allclose(scaled.stiffness, base.stiffness, rtol=1e-12)

    def test_with_load_swaps_load_only(self):
        base = RodModel.build()
        swapped = base.with_load(ExternalLoad(gravity=(0, 0, 0)))
        np.testing.assert_array_equal(swapped.load.gravity_vector, np.zeros(3))
        assert swapped.geometry is base.geometry
        np.testing.assert_array_equal(swapped.inertia, base.inertia)

    def test_no_damping_by_default(self):
        assert not RodModel.build().damping_matrix.any()
