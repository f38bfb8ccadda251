import numpy as np
import pytest

from conftest import grid_search_oracle, lookat_camera, random_camera, tls_plane_oracle
from trajlab import geom
from trajlab.errors import (
    DegenerateGeometry,
    IllConditioned,
    InvalidCamera,
    InvalidPlane,
    PointAtInfinity,
    RayParallelToPlane,
)
from trajlab.geom import CameraModel, PixelPoint, PlaneModel, WorldPoint


class TestCameraModel:
    def test_rank_deficient_rejected(self):
        with pytest.raises(InvalidCamera):
            CameraModel("bad", [[1, 0, 0, 0], [1, 0, 0, 0], [0, 0, 1, 0]])

    def test_affine_camera_rejected(self):
        # left 3x3 block singular: not a finite camera
        with pytest.raises(InvalidCamera):
            CameraModel("affine", [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1]])

    def test_nonfinite_rejected(self):
        with pytest.raises(InvalidCamera):
            CameraModel("nan", [[1, 0, 0, np.nan], [0, 1, 0, 0], [0, 0, -1, 10]])

    def test_scaling_is_canonicalized(self, down_camera):
        for s in (2.0, -3.5, 1e-4):
            scaled = CameraModel("down", s * np.asarray(down_camera.P))
            assert np.allclose(scaled.P, down_camera.P, atol=1e-12)

    def test_center(self, down_camera):
        assert np.allclose(down_camera.center, [0, 0, 10])


class TestProject:
    def test_down_camera_fixture(self, down_camera):
        p = geom.project(down_camera, (2, 3, 0))
        assert (p.x, p.y) == pytest.approx((0.2, 0.3), abs=1e-12)

    def test_point_at_infinity(self, down_camera):
        # z=10 lies on the principal plane of the down camera
        with pytest.raises(PointAtInfinity):
            geom.project(down_camera, (0, 0, 10))

    def test_oblique_camera_matches_explicit_multiply(self, oblique_camera):
        X = np.array([1.0, 1.0, 0.0, 1.0])
        u = oblique_camera.P @ X
        expected = (u[0] / u[2], u[1] / u[2])
        p = geom.project(oblique_camera, (1, 1, 0))
        assert (p.x, p.y) == pytest.approx(expected, abs=1e-12)

    def test_scale_invariance(self, oblique_camera):
        rng = np.random.default_rng(7)
        for _ in range(20):
            s = rng.uniform(-5, 5)
            if abs(s) < 1e-3:
                continue
            scaled = CameraModel("s", s * np.asarray(oblique_camera.P))
            X = rng.uniform(-5, 5, size=3)
            a = geom.project(oblique_camera, X)
            b = geom.project(scaled, X)
            assert (a.x, a.y) == pytest.approx((b.x, b.y), abs=1e-9)


class TestDltRows:
    def test_rows_annihilate_consistent_point(self, down_camera):
        obs = geom.project(down_camera, (2, 3, 0))
        rows = geom.dlt_rows(down_camera, obs)
        Xh = np.array([2.0, 3.0, 0.0, 1.0])
        assert np.all(np.abs(rows @ Xh) < 1e-9 * np.linalg.norm(Xh))

    def test_shifted_observation_residual(self, down_camera):
        Xh = np.array([2.0, 3.0, 0.0, 1.0])
        obs = geom.project(down_camera, (2, 3, 0))
        shifted = PixelPoint(obs.x + 1.0, obs.y)
        rows = geom.dlt_rows(down_camera, shifted)
        res = rows @ Xh
        p3_dot = float(down_camera.P[2] @ Xh)
        assert res[0] == pytest.approx(0.0, abs=1e-12)
        assert res[1] == pytest.approx(-1.0 * p3_dot, abs=1e-12)

    def test_fuzz_rows_annihilate(self):
        rng = np.random.default_rng(42)
        worst = 0.0
        for k in range(1000):
            cam = random_camera(rng, f"r{k}")
            X = np.array([rng.uniform(-6, 6), rng.uniform(-6, 6), rng.uniform(0, 2)])
            obs = geom.project(cam, X)
            Xh = np.append(X, 1.0)
            residual = np.max(np.abs(geom.dlt_rows(cam, obs) @ Xh))
            worst = max(worst, residual / np.linalg.norm(Xh))
        assert worst < 1e-9


class TestPlaneModel:
    def test_normalization(self):
        plane = PlaneModel([0, 0, 2, -10])
        assert np.allclose(plane.coeffs, [0, 0, 1, -5])

    def test_sign_convention(self):
        plane = PlaneModel([0, 0, -1, 5])
        assert plane.coeffs[2] > 0
        assert np.allclose(plane.coeffs, [0, 0, 1, -5])

    def test_near_vertical_rejected(self):
        with pytest.raises(DegenerateGeometry):
            PlaneModel([1, 0, 0.01, 0])

    def test_zero_normal_rejected(self):
        with pytest.raises(InvalidPlane):
            PlaneModel([0, 0, 0, 1])

    def test_rigid_map_z_translation(self):
        plane = PlaneModel([0, 0, 1, -5])
        out = geom.to_ground_frame(plane, (1, 2, 5))
        assert (out.x, out.y, out.z) == pytest.approx((1, 2, 0), abs=1e-12)

    def test_identity_for_z0(self):
        plane = PlaneModel([0, 0, 1, 0])
        assert np.allclose(plane.rigid_to_z0, np.eye(4))

    def test_random_plane_rigidity_and_flattening(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            normal = rng.normal(size=3)
            normal[2] = abs(normal[2]) + 0.5
            plane = PlaneModel(np.append(normal, rng.uniform(-4, 4)))
            # 100 points on the plane: x + d*n solved for z
            a, b, c = plane.normal
            d = plane.offset
            xy = rng.uniform(-10, 10, size=(100, 2))
            z = -(a * xy[:, 0] + b * xy[:, 1] + d) / c
            pts = np.column_stack([xy, z])
            mapped = geom.to_ground_frame_batch(plane, pts)
            assert np.max(np.abs(mapped[:, 2])) < 1e-9
            # pairwise distance preservation (oracle: explicit distance matrices)
            d_before = np.linalg.norm(pts[:, None] - pts[None, :], axis=2)
            d_after = np.linalg.norm(mapped[:, None] - mapped[None, :], axis=2)
            denom = np.maximum(d_before, 1e-12)
            assert np.max(np.abs(d_after - d_before) / denom) < 1e-9


class TestFitPlaneRansac:
    def test_exact_plane(self):
        pts = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 1, 0)]
        plane, inliers = geom.fit_plane_ransac(pts, seed=0)
        assert np.allclose(plane.coeffs, [0, 0, 1, 0], atol=1e-12)
        assert inliers.all()

    def test_too_few_points(self):
        with pytest.raises(DegenerateGeometry):
            geom.fit_plane_ransac([(0, 0, 0), (1, 1, 1)])

    def test_collinear_points(self):
        pts = [(float(i), 0.0, 0.0) for i in range(10)]
        with pytest.raises(DegenerateGeometry):
            geom.fit_plane_ransac(pts, seed=0)

    def test_noisy_outlier_cloud_matches_tls_oracle(self):
        rng = np.random.default_rng(11)
        n = 1000
        xy = rng.uniform(-10, 10, size=(n, 2))
        z = 0.1 * xy[:, 0] + 0.2 * xy[:, 1] + 3.0 + rng.normal(0, 0.01, size=n)
        pts = np.column_stack([xy, z])
        outliers = rng.random(n) < 0.2
        true_normal = np.array([0.1, 0.2, -1.0])
        true_normal /= np.linalg.norm(true_normal)
        pts[outliers] += 1.0 * true_normal
        plane, _ = geom.fit_plane_ransac(pts, seed=5)
        oracle = tls_plane_oracle(pts[~outliers])
        assert np.max(np.abs(plane.coeffs - oracle)) < 1e-2

    def test_determinism(self):
        rng = np.random.default_rng(1)
        pts = rng.uniform(-5, 5, size=(200, 3))
        pts[:, 2] = 0.05 * pts[:, 0] + rng.normal(0, 0.01, 200)
        p1, m1 = geom.fit_plane_ransac(pts, seed=9)
        p2, m2 = geom.fit_plane_ransac(pts, seed=9)
        assert np.array_equal(p1.coeffs, p2.coeffs)
        assert np.array_equal(m1, m2)


class TestTriangulate:
    def test_noiseless_recovery(self, down_camera, oblique_camera, plane_z0):
        X_true = (2.0, 3.0, 0.0)
        X, report = geom.triangulate_plane_constrained(
            down_camera,
            geom.project(down_camera, X_true),
            oblique_camera,
            geom.project(oblique_camera, X_true),
            plane_z0,
        )
        assert np.allclose(X.as_array(), X_true, atol=1e-9)
        assert report.well_conditioned
        assert not report.same_camera

    def test_invalid_plane(self, down_camera, oblique_camera):
        with pytest.raises(InvalidPlane):
            geom.triangulate_plane_constrained(
                down_camera, (0.2, 0.3), oblique_camera, (900, 700), (0, 0, 0, 0)
            )

    def test_same_camera_flagged(self, oblique_camera, plane_z0):
        obs = geom.project(oblique_camera, (1, 1, 0))
        X, report = geom.triangulate_plane_constrained(
            oblique_camera, obs, oblique_camera, obs, plane_z0
        )
        assert report.same_camera
        # degenerates to the ray-plane intersection
        assert np.allclose(X.as_array(), (1, 1, 0), atol=1e-6)

    def test_noisy_batch_close_to_grid_oracle(self, ring_cameras, plane_z0):
        rng = np.random.default_rng(17)
        cam_a, cam_b = ring_cameras[0], ring_cameras[1]
        sq_svd, sq_grid = [], []
        for _ in range(100):
            X_true = np.array([rng.uniform(-5, 5), rng.uniform(-5, 5), 0.0])
            obs = []
            for cam in (cam_a, cam_b):
                p = geom.project(cam, X_true)
                obs.append(PixelPoint(p.x + rng.normal(0, 1), p.y + rng.normal(0, 1)))
            X, _ = geom.triangulate_plane_constrained(cam_a, obs[0], cam_b, obs[1], plane_z0)
            est = geom.project_onto_plane(plane_z0, X.as_array())[0]
            oracle = grid_search_oracle(
                [(cam_a, obs[0]), (cam_b, obs[1])], plane_z0, X_true, half_m=0.05
            )
            sq_svd.append(np.sum((est - X_true) ** 2))
            sq_grid.append(np.sum((oracle - X_true) ** 2))
        rmse_svd = float(np.sqrt(np.mean(sq_svd)))
        rmse_grid = float(np.sqrt(np.mean(sq_grid)))
        assert rmse_svd <= 1.05 * rmse_grid

    def test_svd_optimality_vs_random_unit_vectors(self, ring_cameras, plane_z0):
        rng = np.random.default_rng(23)
        cam_a, cam_b = ring_cameras[0], ring_cameras[2]
        for _ in range(20):
            X_true = np.array([rng.uniform(-5, 5), rng.uniform(-5, 5), 0.0])
            oa = geom.project(cam_a, X_true)
            ob = geom.project(cam_b, X_true)
            oa = PixelPoint(oa.x + rng.normal(0, 2), oa.y + rng.normal(0, 2))
            ob = PixelPoint(ob.x + rng.normal(0, 2), ob.y + rng.normal(0, 2))
            A = geom.plane_system(cam_a, oa, cam_b, ob, plane_z0)
            X, _ = geom.triangulate_plane_constrained(cam_a, oa, cam_b, ob, plane_z0)
            xh = np.append(X.as_array(), 1.0)
            xh /= np.linalg.norm(xh)
            sol_res = np.linalg.norm(A @ xh)
            samples = rng.normal(size=(1000, 4))
            samples /= np.linalg.norm(samples, axis=1, keepdims=True)
            rand_res = np.linalg.norm(samples @ A.T, axis=1)
            assert np.all(sol_res <= rand_res + 1e-12)

    def test_round_trip_on_plane(self, ring_cameras, plane_z0):
        rng = np.random.default_rng(29)
        cam_a, cam_b = ring_cameras[0], ring_cameras[1]
        for _ in range(50):
            X_true = np.array([rng.uniform(-6, 6), rng.uniform(-6, 6), 0.0])
            X, report = geom.triangulate_plane_constrained(
                cam_a,
                geom.project(cam_a, X_true),
                cam_b,
                geom.project(cam_b, X_true),
                plane_z0,
            )
            assert report.well_conditioned
            assert np.linalg.norm(X.as_array() - X_true) < 1e-6

    def test_scale_invariance_under_noise(self, ring_cameras, plane_z0):
        rng = np.random.default_rng(31)
        cam_a, cam_b = ring_cameras[0], ring_cameras[1]
        obs_a = PixelPoint(1030.0, 760.0)
        obs_b = PixelPoint(1010.0, 790.0)
        base, _ = geom.triangulate_plane_constrained(cam_a, obs_a, cam_b, obs_b, plane_z0)
        for s in (5.0, -2.0, 1e-3):
            scaled = CameraModel(cam_a.id, s * np.asarray(cam_a.P), cam_a.width, cam_a.height)
            X, _ = geom.triangulate_plane_constrained(scaled, obs_a, cam_b, obs_b, plane_z0)
            assert np.allclose(X.as_array(), base.as_array(), atol=1e-9)

    def test_dehomogenization_failure(self, plane_z0):
        # two parallel down-looking cameras and a pixel pair that sends the
        # solution toward infinity cannot occur with exact inputs, so force
        # the guard with a nearly-ideal point at infinity setup instead
        cam = CameraModel("d", [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, -1, 10]])
        cam2 = CameraModel("d2", [[1, 0, 0, 5], [0, 1, 0, 0], [0, 0, -1, 10]])
        # vertical plane is rejected before triangulation, so use raw coeffs
        with pytest.raises((IllConditioned, InvalidPlane)):
            geom.triangulate_plane_constrained(cam, (1.0, 0.0), cam2, (1.0, 0.0), (0, 0, 0, 0))


class TestBackproject:
    def test_inverse_of_projection(self, down_camera, plane_z0):
        X = geom.backproject_to_plane(down_camera, (0.2, 0.3), plane_z0, 0.0)
        assert np.allclose(X.as_array(), (2, 3, 0), atol=1e-12)

    def test_tag_height_offset(self, down_camera, plane_z0):
        obs = geom.project(down_camera, (2, 3, 1.5))
        X = geom.backproject_to_plane(down_camera, obs, plane_z0, 1.5)
        assert np.allclose(X.as_array(), (2, 3, 0), atol=1e-12)

    def test_oblique_seeded_recovery(self, oblique_camera, plane_z0):
        rng = np.random.default_rng(37)
        for _ in range(100):
            X_true = np.array([rng.uniform(-6, 6), rng.uniform(-6, 6), 0.0])
            obs = geom.project(oblique_camera, X_true)
            X = geom.backproject_to_plane(oblique_camera, obs, plane_z0, 0.0)
            assert np.linalg.norm(X.as_array() - X_true) < 1e-6

    def test_ray_parallel(self, plane_z0):
        horizontal = lookat_camera("h", center=(10.0, 0.0, 3.0), target=(0.0, 0.0, 3.0))
        # principal ray is horizontal: parallel to z=0
        with pytest.raises(RayParallelToPlane):
            geom.backproject_to_plane(horizontal, (1024.0, 768.0), plane_z0, 0.0)


class TestReprojectionError:
    def test_exact_zero(self, down_camera, oblique_camera):
        X = (1.0, 2.0, 0.0)
        err = geom.reprojection_error(
            [(down_camera, geom.project(down_camera, X)), (oblique_camera, geom.project(oblique_camera, X))],
            X,
        )
        assert err == pytest.approx(0.0, abs=1e-12)

    def test_one_shifted_observation(self, down_camera, oblique_camera):
        X = (1.0, 2.0, 0.0)
        o1 = geom.project(down_camera, X)
        o2 = geom.project(oblique_camera, X)
        shifted = PixelPoint(o1.x + 2.0, o1.y)
        err = geom.reprojection_error([(down_camera, shifted), (oblique_camera, o2)], X)
        assert err == pytest.approx(1.0, abs=1e-12)

    def test_matches_recomputation(self, ring_cameras):
        rng = np.random.default_rng(41)
        X = np.array([1.5, -2.0, 0.0])
        cams_obs = []
        expected = []
        for cam in ring_cameras:
            p = geom.project(cam, X)
            noisy = PixelPoint(p.x + rng.normal(0, 3), p.y + rng.normal(0, 3))
            cams_obs.append((cam, noisy))
            expected.append(np.hypot(noisy.x - p.x, noisy.y - p.y))
        err = geom.reprojection_error(cams_obs, X)
        assert err == pytest.approx(float(np.mean(expected)), abs=1e-9)

    def test_point_at_infinity_propagates(self, down_camera):
        with pytest.raises(PointAtInfinity):
            geom.reprojection_error([(down_camera, (0.0, 0.0))], (0.0, 0.0, 10.0))
