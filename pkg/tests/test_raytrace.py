import io
import math

import numpy as np
import pytest

from raycell.scene import Building, ObstructionBox, Scene, VegBlock, segment_obstacles
from raycell.raytrace import (
    PathContribution,
    RayTracer,
    TraceConfig,
    fresnel_nu,
    fspl,
    knife_edge_loss,
    relative_power,
    trace_paths,
    vegetation_excess_loss,
    write_path_dump,
)

C = 299792458.0


def friis_oracle(freq_ghz, dist_m):
    return 20.0 * math.log10(4.0 * math.pi * dist_m * freq_ghz * 1e9 / C)


class TestFspl:
    def test_60ghz_1m(self):
        assert fspl(60.0, 1.0) == pytest.approx(friis_oracle(60.0, 1.0), abs=1e-12)
        assert fspl(60.0, 1.0) == pytest.approx(68.0, abs=0.05)

    def test_2p4ghz_1m(self):
        assert fspl(2.4, 1.0) == pytest.approx(friis_oracle(2.4, 1.0), abs=1e-12)
        assert fspl(2.4, 1.0) == pytest.approx(40.05, abs=0.05)

    def test_distance_doubling(self):
        for f, d in [(60.0, 3.0), (2.4, 17.0), (28.0, 120.0)]:
            assert fspl(f, 2 * d) - fspl(f, d) == pytest.approx(6.0206, abs=1e-3)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            fspl(0.0, 1.0)
        with pytest.raises(ValueError):
            fspl(60.0, -2.0)


class TestKnifeEdge:
    def test_at_zero(self):
        assert knife_edge_loss(0.0) == pytest.approx(6.03, abs=0.01)

    def test_below_threshold(self):
        assert knife_edge_loss(-1.0) == 0.0

    def test_at_2p4(self):
        # frozen from evaluating the stated approximation directly
        oracle = 6.9 + 20 * math.log10(math.sqrt((2.4 - 0.1) ** 2 + 1) + 2.4 - 0.1)
        assert oracle == pytest.approx(20.539, abs=0.001)
        assert knife_edge_loss(2.4) == pytest.approx(oracle, abs=1e-12)

    def test_seam_continuity(self):
        assert abs(knife_edge_loss(-0.78 + 1e-9) - knife_edge_loss(-0.78)) < 0.5

    def test_monotone_for_positive_nu(self):
        nus = np.linspace(0.0, 10.0, 100)
        losses = knife_edge_loss(nus)
        assert np.all(np.diff(losses) > 0)


def veg_block(x0, x1, height, atten=None):
    fp = np.array([[x0, -5.0], [x1, -5.0], [x1, 5.0], [x0, 5.0]])
    kwargs = {}
    if atten is not None:
        kwargs["specific_attenuation_db_per_m"] = atten
    return VegBlock(footprint=fp, height=height, **kwargs)


class TestVegetationExcessLoss:
    def test_two_meters_through_dominated(self):
        # tall canopy keeps the knife-edge alternative well above 22 dB
        scene = Scene(bounds=(0, 0, 100, 100), vegetation=(veg_block(49, 51, 40.0),))
        a3, b3 = np.array([0, 0, 2.0]), np.array([100, 0, 2.0])
        crossings = segment_obstacles(scene, a3, b3)
        assert vegetation_excess_loss(crossings, a3, b3, 60.0) == pytest.approx(22.0, abs=1e-9)

    def test_min_selection_prefers_cheap_diffraction(self):
        # low canopy just above the path: knife edge far below 55 dB through
        scene = Scene(bounds=(0, 0, 100, 100), vegetation=(veg_block(47.5, 52.5, 2.3),))
        a3, b3 = np.array([0, 0, 2.0]), np.array([100, 0, 2.0])
        crossings = segment_obstacles(scene, a3, b3)
        through = 11.0 * crossings[0].penetration_length
        assert through == pytest.approx(55.0, abs=1e-9)
        loss = vegetation_excess_loss(crossings, a3, b3, 60.0)
        nu = fresnel_nu(2.3 - 2.0, 50.0, 50.0, 60.0)
        assert loss == pytest.approx(knife_edge_loss(nu), abs=1e-9)
        assert loss < through

    def test_additivity_over_obstacles(self):
        scene = Scene(bounds=(0, 0, 100, 100),
                      vegetation=(veg_block(30, 31, 40.0), veg_block(70, 71, 40.0)))
        a3, b3 = np.array([0, 0, 2.0]), np.array([100, 0, 2.0])
        crossings = segment_obstacles(scene, a3, b3)
        both = vegetation_excess_loss(crossings, a3, b3, 60.0)
        singles = sum(vegetation_excess_loss([c], a3, b3, 60.0) for c in crossings)
        assert both == pytest.approx(singles, abs=1e-9)
        assert both == pytest.approx(22.0, abs=1e-9)

    def test_rejects_non_vegetation(self):
        b = Building(footprint=np.array([[40.0, -5], [60, -5], [60, 5], [40, 5]]),
                     height=15.0)
        scene = Scene(bounds=(0, 0, 100, 100), buildings=(b,))
        crossings = segment_obstacles(scene, np.array([0, 0, 2.0]),
                                      np.array([100, 0, 2.0]))
        with pytest.raises(ValueError):
            vegetation_excess_loss(crossings, [0, 0, 2], [100, 0, 2], 60.0)


class TestTracePaths:
    def test_empty_scene_direct_only(self):
        scene = Scene(bounds=(0, 0, 100, 100))
        paths = trace_paths(scene, [10, 50, 7], [40, 50, 2])
        assert len(paths) == 1
        assert paths[0].kind == "direct"
        d = math.dist([10, 50, 7], [40, 50, 2])
        assert paths[0].total_isotropic_loss == pytest.approx(fspl(60.0, d), abs=1e-12)

    def test_single_wall_reflection_geometry(self):
        wall = Building(footprint=np.array([[0.0, 55], [100, 55], [100, 70], [0, 70]]),
                        height=25.0)
        scene = Scene(bounds=(0, 0, 100, 100), buildings=(wall,))
        tx, rx = np.array([30, 50, 5.0]), np.array([70, 50, 5.0])
        paths = trace_paths(scene, tx, rx)
        kinds = [p.kind for p in paths]
        assert kinds.count("direct") == 1
        assert kinds.count("reflection-1") == 1
        refl = next(p for p in paths if p.kind == "reflection-1")
        mirror = np.array([30, 60, 5.0])   # tx mirrored across the y=55 facade
        assert refl.unfolded_length == pytest.approx(np.linalg.norm(mirror - rx), rel=1e-12)

    def test_reciprocity_loss_multiset(self):
        blk = Building(footprint=np.array([[40.0, 40], [60, 40], [60, 60], [40, 60]]),
                       height=12.0)
        veg = VegBlock(footprint=np.array([[20.0, 45], [25, 45], [25, 55], [20, 55]]),
                       height=9.0)
        scene = Scene(bounds=(0, 0, 100, 100), buildings=(blk,), vegetation=(veg,))
        fwd = trace_paths(scene, [10, 50, 7], [90, 52, 2])
        rev = trace_paths(scene, [90, 52, 2], [10, 50, 7])
        a = sorted(p.total_isotropic_loss for p in fwd)
        b = sorted(p.total_isotropic_loss for p in rev)
        assert len(a) == len(b)
        assert np.allclose(a, b, atol=1e-6)
        # AoD and AoA swap
        fwd_sorted = sorted(fwd, key=lambda p: p.total_isotropic_loss)
        rev_sorted = sorted(rev, key=lambda p: p.total_isotropic_loss)
        for f, r in zip(fwd_sorted, rev_sorted):
            assert f.aod_az_deg == pytest.approx(r.aoa_az_deg, abs=1e-6)
            assert f.aoa_az_deg == pytest.approx(r.aod_az_deg, abs=1e-6)

    def test_blocked_direct_replaced_by_over_top(self):
        blk = Building(footprint=np.array([[40.0, 40], [60, 40], [60, 60], [40, 60]]),
                       height=15.0)
        scene = Scene(bounds=(0, 0, 100, 100), buildings=(blk,))
        paths = trace_paths(scene, [10, 50, 7], [90, 50, 2])
        kinds = {p.kind for p in paths}
        assert "direct" not in kinds
        assert "over-top" in kinds
        over = next(p for p in paths if p.kind == "over-top")
        assert over.vertices[1][2] == 15.0   # apex on the roof line
        assert over.unfolded_length > math.dist([10, 50, 7], [90, 50, 2])
        assert over.diffraction_db > 6.0

    def test_path_over_roof_stays_direct(self):
        blk = Building(footprint=np.array([[40.0, 40], [60, 40], [60, 60], [40, 60]]),
                       height=15.0)
        scene = Scene(bounds=(0, 0, 100, 100), buildings=(blk,))
        paths = trace_paths(scene, [10, 50, 20], [90, 50, 20])
        assert paths[0].kind == "direct"
        assert paths[0].vegetation_db == 0.0
        assert paths[0].diffraction_db == 0.0

    def test_specular_law_at_each_bounce(self):
        wall = Building(footprint=np.array([[0.0, 55], [100, 55], [100, 70], [0, 70]]),
                        height=25.0)
        scene = Scene(bounds=(0, 0, 100, 100), buildings=(wall,))
        paths = trace_paths(scene, [30, 50, 5], [70, 48, 3])
        refl = [p for p in paths if p.kind.startswith("reflection")]
        assert refl
        for p in refl:
            verts = p.vertices
            for k in range(1, len(verts) - 1):
                inc = verts[k] - verts[k - 1]
                out = verts[k + 1] - verts[k]
                normal = np.array([0.0, 1.0, 0.0])   # facade along y = 55
                cos_in = abs(np.dot(inc, normal)) / np.linalg.norm(inc)
                cos_out = abs(np.dot(out, normal)) / np.linalg.norm(out)
                assert abs(math.acos(np.clip(cos_in, -1, 1))
                           - math.acos(np.clip(cos_out, -1, 1))) < 1e-9

    def test_corner_diffraction_around_block(self):
        blk = Building(footprint=np.array([[20.0, 20], [80, 20], [80, 80], [20, 80]]),
                       height=15.0)
        scene = Scene(bounds=(0, 0, 100, 100), buildings=(blk,))
        paths = trace_paths(scene, [10, 50, 7], [50, 10, 2])
        corner = [p for p in paths if p.kind == "corner"]
        assert corner
        bend = corner[0].vertices[1]
        assert bend[0] == pytest.approx(20.0) and bend[1] == pytest.approx(20.0)
        assert corner[0].diffraction_db > 6.0

    def test_box_blocks_but_no_corner_paths(self):
        box = ObstructionBox(center=np.array([50.0, 0.0]), length=12, width=2.5,
                             height=3.0)
        scene = Scene(bounds=(-10, -10, 110, 10)).with_box(box)
        paths = trace_paths(scene, [0, 0, 2.5], [100, 0, 2.0])
        kinds = {p.kind for p in paths}
        assert kinds == {"over-top"}

    def test_box_around_ends_flag_enables_corners(self):
        # box across the street; receiver offset so a single bend around the
        # box end reaches it without re-entering the footprint
        rx = [100, -8, 2.0]
        flagged = ObstructionBox(center=np.array([50.0, 0.0]), length=12,
                                 width=2.5, height=3.0, azimuth_deg=90.0,
                                 around_ends=True)
        scene_on = Scene(bounds=(-10, -15, 110, 15)).with_box(flagged)
        paths = trace_paths(scene_on, [0, 0, 2.5], rx)
        assert any(p.kind == "corner" for p in paths)
        plain = ObstructionBox(center=np.array([50.0, 0.0]), length=12,
                               width=2.5, height=3.0, azimuth_deg=90.0)
        scene_off = Scene(bounds=(-10, -15, 110, 15)).with_box(plain)
        paths_off = trace_paths(scene_off, [0, 0, 2.5], rx)
        assert all(p.kind != "corner" for p in paths_off)

    def test_out_of_bounds_endpoint(self):
        scene = Scene(bounds=(0, 0, 100, 100))
        with pytest.raises(ValueError, match="bounds"):
            trace_paths(scene, [10, 50, 7], [200, 50, 2])

    def test_loss_breakdown_sums(self):
        blk = Building(footprint=np.array([[40.0, 40], [60, 40], [60, 60], [40, 60]]),
                       height=15.0)
        veg = VegBlock(footprint=np.array([[20.0, 40], [25, 40], [25, 60], [20, 60]]),
                       height=9.0)
        scene = Scene(bounds=(0, 0, 100, 100), buildings=(blk,), vegetation=(veg,))
        for p in trace_paths(scene, [10, 50, 7], [90, 50, 2]):
            assert p.total_isotropic_loss == pytest.approx(
                p.fspl_db + p.reflection_db + p.diffraction_db + p.vegetation_db,
                abs=1e-12)

    def test_max_paths_and_window(self):
        wall = Building(footprint=np.array([[0.0, 55], [100, 55], [100, 70], [0, 70]]),
                        height=25.0)
        scene = Scene(bounds=(0, 0, 100, 100), buildings=(wall,))
        cfg = TraceConfig(max_paths=1)
        paths = trace_paths(scene, [30, 50, 5], [70, 50, 5], cfg)
        assert len(paths) == 1
        assert paths[0].kind == "direct"
        cfg2 = TraceConfig(min_path_power_rel_db=5.0)
        paths2 = trace_paths(scene, [30, 50, 5], [70, 50, 5], cfg2)
        strongest = paths2[0].total_isotropic_loss
        assert all(p.total_isotropic_loss <= strongest + 5.0 for p in paths2)


class TestTraceConfig:
    def test_diffuse_rejected(self):
        with pytest.raises(ValueError, match="diffuse"):
            TraceConfig(enable_diffuse=True)

    def test_order_above_two_rejected(self):
        with pytest.raises(ValueError, match="not supported"):
            TraceConfig(max_reflection_order=3)

    def test_negative_order_rejected(self):
        with pytest.raises(ValueError):
            TraceConfig(max_reflection_order=-1)


class TestRelativePower:
    def test_reference_point(self):
        scene = Scene(bounds=(0, 0, 10, 10))
        paths = trace_paths(scene, [1, 1, 2], [2, 1, 2])
        assert relative_power(paths, 60.0) == pytest.approx(0.0, abs=1e-12)

    def test_hundred_meters(self):
        scene = Scene(bounds=(0, 0, 200, 10))
        paths = trace_paths(scene, [0, 5, 2], [100, 5, 2])
        assert relative_power(paths, 60.0) == pytest.approx(-40.0, abs=1e-12)

    def test_two_equal_paths_power_double(self):
        scene = Scene(bounds=(0, 0, 10, 10))
        paths = trace_paths(scene, [1, 1, 2], [2, 1, 2])
        single = relative_power(paths, 60.0)
        double = relative_power(paths * 2, 60.0)
        assert double - single == pytest.approx(10 * math.log10(2.0), abs=1e-9)

    def test_empty_is_no_coverage(self):
        assert relative_power([], 60.0) == float("-inf")


class TestCombinedReflectionDiffraction:
    def test_flag_produces_combined_paths(self):
        # pillar blocks both the direct path and the plain wall reflection;
        # reflecting off the wall then bending around the pillar's far top
        # corner is a clear route
        wall = Building(footprint=np.array([[0.0, 60], [100, 60], [100, 75], [0, 75]]),
                        height=20.0)
        pillar = Building(footprint=np.array([[68.0, 40], [76, 40], [76, 55], [68, 55]]),
                          height=20.0)
        scene = Scene(bounds=(0, 0, 100, 100), buildings=(wall, pillar))
        cfg = TraceConfig(combine_reflection_diffraction=True)
        paths = trace_paths(scene, [10, 50, 7], [90, 50, 2], cfg)
        assert all(p.kind != "reflection-1" for p in paths)
        combined = [p for p in paths if "+" in p.kind]
        assert combined
        for p in combined:
            assert len(p.vertices) == 4
            assert p.reflection_db == 10.0
            assert p.diffraction_db > 0

    def test_flag_off_by_default(self):
        cfg = TraceConfig()
        assert not cfg.combine_reflection_diffraction


class TestPathDump:
    def test_csv_columns(self):
        scene = Scene(bounds=(0, 0, 100, 100))
        paths = trace_paths(scene, [10, 50, 7], [40, 50, 2])
        buf = io.StringIO()
        write_path_dump(paths, buf)
        lines = buf.getvalue().strip().splitlines()
        assert lines[0] == ("kind,vertices,unfolded_length,aod_az,aod_el,"
                            "aoa_az,aoa_el,fspl_db,refl_db,diff_db,veg_db,total_db")
        assert len(lines) == 2
        assert lines[1].startswith("direct,2,")
