import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from scipy.optimize import brentq

from .exceptions import BaseMismatch, ChartEscape, NotOrthonormal, OpenLoop, OrthogonalProjection, WrongCausalType
from .helper_functions import wrap_angle, wrap_pi
from .holonomy import loop_holonomy_angle, plane_angle, plane_tilt
from .integrator import Curve, connect_geodesic, shoot_geodesic, sub_geodesic
from .spacetimes import GRID_HEADER, GridSpacetime, Minkowski, ProductSphere, WeakField, christoffel
from .transport import parallel_transport, transport_frame, transport_plane
from .vectors import Frame, Plane, TangentVector, adapted_frame

ORIGIN = np.zeros(4)


def sphere_point(unit):
    """(t, θ, φ, z) coordinates of a unit 3-vector on the product sphere."""
    x, y, z = unit
    return np.array([0.0, math.acos(z), math.atan2(y, x), 0.0])


def great_circle_arc(sphere, a, b, step):
    """Geodesic on the unit sphere from unit vector a to unit vector b, shot from analytic initial data."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    arc = math.acos(np.clip(a @ b, -1.0, 1.0))
    direction = b - (a @ b) * a
    direction /= np.linalg.norm(direction)
    start = sphere_point(a)
    theta = start[1]
    d_theta = -direction[2] / math.sin(theta)
    d_phi = (a[0] * direction[1] - a[1] * direction[0]) / (a[0] ** 2 + a[1] ** 2)
    velocity = TangentVector(start, [0.0, d_theta, d_phi, 0.0])
    return shoot_geodesic(sphere, start, velocity, arc, step)


def triangle_solid_angle(v1, v2, v3):
    numerator = abs(v1 @ np.cross(v2, v3))
    denominator = 1.0 + v1 @ v2 + v2 @ v3 + v3 @ v1
    return 2.0 * math.atan2(numerator, denominator)


def equilateral_vertices(radius):
    center = np.array([1.0, 0.0, 0.0])
    vertices = []
    for k in range(3):
        azimuth = 2.0 * math.pi * k / 3.0
        offset = np.array([0.0, math.cos(azimuth), math.sin(azimuth)])
        vertices.append(math.cos(radius) * center + math.sin(radius) * offset)
    return vertices


def triangle_with_solid_angle(target):
    radius = brentq(lambda r: triangle_solid_angle(*equilateral_vertices(r)) - target, 1e-3, 1.2)
    return equilateral_vertices(radius)


def tangent_plane(sphere, point):
    return Plane(point, [0.0, 1.0 / sphere.radius, 0.0, 0.0],
                 [0.0, 0.0, 1.0 / (sphere.radius * math.sin(point[1])), 0.0])


class ChristoffelTests(SimpleTestCase):

    def test_minkowski_connection_vanishes(self):
        gamma = christoffel(Minkowski(), [0.3, -1.0, 2.0, 5.0])
        self.assertEqual(np.abs(gamma).max(), 0.0)

    def test_sphere_closed_form_matches_central_differences(self):
        sphere = ProductSphere(1.0)
        for theta in (math.pi / 2, 1.0):
            point = np.array([0.0, theta, 0.4, 0.0])
            closed = christoffel(sphere, point)
            numeric = sphere.central_difference_christoffel(point)
            self.assertAlmostEqual(closed[1, 2, 2], -math.sin(theta) * math.cos(theta), places=14)
            self.assertAlmostEqual(closed[2, 1, 2], math.cos(theta) / math.sin(theta), places=14)
            np.testing.assert_allclose(numeric, closed, atol=1e-8)

    def test_weak_field_central_differences_converge(self):
        field = WeakField(0.05, 0.5, center=(1.0, 0.5, 0.0))
        point = np.array([0.0, 0.2, -0.3, 0.4])
        exact = christoffel(field, point)
        coarse = np.abs(field.central_difference_christoffel(point, h=1e-2) - exact).max()
        fine = np.abs(field.central_difference_christoffel(point, h=5e-3) - exact).max()
        self.assertGreater(coarse / fine, 3.5)
        np.testing.assert_allclose(field.central_difference_christoffel(point, h=1e-5),
                                   field.central_difference_christoffel(point, h=1e-6), atol=1e-8)

    def test_lower_index_symmetry(self):
        gamma = christoffel(WeakField(0.05, 0.5), [0.0, 1.0, 1.0, 1.0])
        np.testing.assert_allclose(gamma, gamma.transpose(0, 2, 1), atol=1e-15)

    def test_weak_field_rejects_strong_regime(self):
        with self.assertRaises(ValueError):
            WeakField(0.3, 0.5)


class GridSpacetimeTests(SimpleTestCase):

    def _write_grid(self, directory, header=GRID_HEADER):
        path = Path(directory) / 'grid.csv'
        axis = [-2.0, 0.0, 2.0]
        lines = [','.join(header)]
        for x0 in axis:
            for x1 in axis:
                for x2 in axis:
                    for x3 in axis:
                        g = np.diag([-1.0, 1.0 + 0.01 * x1, 1.0, 1.0]).ravel()
                        lines.append(','.join(str(v) for v in [x0, x1, x2, x3, *g]))
        path.write_text('\n'.join(lines) + '\n')
        return path

    def test_grid_interpolates_metric(self):
        with tempfile.TemporaryDirectory() as directory:
            grid = GridSpacetime.from_csv(self._write_grid(directory))
        g = grid.metric([0.0, 1.0, 0.5, -0.5])
        self.assertAlmostEqual(g[1, 1], 1.01, places=12)
        self.assertEqual(grid.christoffel_mode, 'central-difference')
        gamma = christoffel(grid, [0.0, 1.0, 0.0, 0.0])
        self.assertAlmostEqual(gamma[1, 1, 1], 0.5 * 0.01 / 1.01, places=8)

    def test_grid_rejects_bad_header(self):
        with tempfile.TemporaryDirectory() as directory:
            path = self._write_grid(directory, header=['t', 'x', 'y', 'z'] + GRID_HEADER[4:])
            with self.assertRaises(ValueError):
                GridSpacetime.from_csv(path)

    def test_leaving_the_grid_is_a_chart_escape(self):
        with tempfile.TemporaryDirectory() as directory:
            grid = GridSpacetime.from_csv(self._write_grid(directory))
        with self.assertRaises(ChartEscape):
            shoot_geodesic(grid, ORIGIN, TangentVector(ORIGIN, [1.0, 0.5, 0.0, 0.0]), 5.0, 0.1)


class ShootGeodesicTests(SimpleTestCase):

    def test_flat_timelike_geodesic_is_straight(self):
        curve = shoot_geodesic(Minkowski(), ORIGIN, TangentVector(ORIGIN, [1, 0, 0, 0]), 1.0, 0.1)
        np.testing.assert_allclose(curve.end, [1.0, 0.0, 0.0, 0.0], atol=1e-14)
        self.assertEqual(curve.kind, 'timelike-geodesic')
        self.assertAlmostEqual(curve.proper_length(Minkowski()), 1.0, places=14)

    def test_flat_null_geodesic_stays_null(self):
        k = np.array([1.0, 1.0, 0.0, 0.0]) / math.sqrt(2.0)
        curve = shoot_geodesic(Minkowski(), ORIGIN, TangentVector(ORIGIN, k), 1.0, 0.1)
        self.assertEqual(curve.kind, 'null-geodesic')
        self.assertLess(curve.null_residual(Minkowski()), 1e-15)

    def test_great_circle_closes(self):
        sphere = ProductSphere(1.0)
        start = np.array([0.0, math.pi / 2, 0.0, 0.0])
        curve = shoot_geodesic(sphere, start, TangentVector(start, [0.0, 0.6, 0.8, 0.0]), 2.0 * math.pi, 1e-3)
        self.assertAlmostEqual(curve.end[1], math.pi / 2, delta=1e-6)
        self.assertLess(abs(wrap_pi(curve.end[2])), 1e-6)
        np.testing.assert_allclose(curve.tangents[-1], [0.0, 0.6, 0.8, 0.0], atol=1e-6)

    def test_tangent_norm_is_conserved(self):
        field = WeakField(0.05, 0.5, center=(1.0, 0.0, 0.0))
        u = np.array([1.0, 0.0, 0.3, 0.1])
        u /= math.sqrt(-field.inner(ORIGIN, u, u))
        curve = shoot_geodesic(field, ORIGIN, TangentVector(ORIGIN, u), 10.0, 1e-3)
        self.assertLess(curve.norm_drift(field), 1e-8)

    def test_initial_tangent_must_be_based_at_start(self):
        with self.assertRaises(BaseMismatch):
            shoot_geodesic(Minkowski(), ORIGIN, TangentVector([1, 0, 0, 0], [1, 0, 0, 0]), 1.0)

    def test_chart_bound_is_enforced(self):
        with self.assertRaises(ChartEscape):
            shoot_geodesic(Minkowski(chart_bound=5.0), ORIGIN, TangentVector(ORIGIN, [1, 0, 0, 0]), 10.0, 0.5)


class ConnectGeodesicTests(SimpleTestCase):

    def test_flat_null_connection(self):
        curve = connect_geodesic(Minkowski(), ORIGIN, [1, 1, 0, 0], 'null')
        direction = curve.tangents[0] / curve.tangents[0][0]
        np.testing.assert_allclose(direction, [1, 1, 0, 0], atol=1e-12)

    def test_flat_timelike_connection_has_interval_length(self):
        curve = connect_geodesic(Minkowski(), ORIGIN, [2, 1, 0, 0], 'timelike')
        self.assertAlmostEqual(curve.proper_length(Minkowski()), math.sqrt(3.0), places=12)

    def test_weak_field_connection_hits_target(self):
        field = WeakField(0.05, 0.5, center=(0.0, 0.0, 0.0))
        target = np.array([3.0, 2.5, 0.0, 0.0])
        start = np.array([0.0, 1.0, 0.0, 0.0])
        curve = connect_geodesic(field, start, target, 'timelike', step=1e-3)
        self.assertLess(np.linalg.norm(curve.end - target), 1e-6)
        self.assertLess(curve.geodesic_residual(field), 1e-5)

    def test_wrong_causal_type(self):
        with self.assertRaises(WrongCausalType):
            connect_geodesic(Minkowski(), ORIGIN, [1, 2, 0, 0], 'timelike')

    def test_sub_geodesic_lies_on_parent(self):
        curve = connect_geodesic(Minkowski(), ORIGIN, [2, 1, 0, 0], 'timelike')
        np.testing.assert_allclose(sub_geodesic(Minkowski(), curve, 0.5).end, [1.0, 0.5, 0, 0], atol=1e-14)


class TransportTests(SimpleTestCase):

    def setUp(self):
        self.field = WeakField(0.05, 0.5, center=(1.0, 0.5, 0.0))
        u = np.array([1.0, 0.2, 0.0, 0.3])
        u /= math.sqrt(-self.field.inner(ORIGIN, u, u))
        self.curve = shoot_geodesic(self.field, ORIGIN, TangentVector(ORIGIN, u), 2.0, 0.01)

    def test_flat_transport_is_identity(self):
        curve = connect_geodesic(Minkowski(), ORIGIN, [2, 1, 0.5, 0], 'timelike')
        moved = parallel_transport(Minkowski(), TangentVector(ORIGIN, [0.1, 0.2, 0.3, 0.4]), curve)
        np.testing.assert_allclose(moved.components, [0.1, 0.2, 0.3, 0.4], atol=1e-15)

    def test_transport_is_an_isometry(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            v, w = rng.normal(size=4), rng.normal(size=4)
            before = self.field.inner(ORIGIN, v, w)
            moved_v = parallel_transport(self.field, TangentVector(ORIGIN, v), self.curve)
            moved_w = parallel_transport(self.field, TangentVector(ORIGIN, w), self.curve)
            after = self.field.inner(self.curve.end, moved_v.components, moved_w.components)
            self.assertLess(abs(after - before), 1e-8)

    def test_transport_preserves_angle_with_tangent(self):
        v = np.array([0.0, 1.0, 0.0, 0.0])
        before = self.field.inner(ORIGIN, v, self.curve.tangents[0])
        moved = parallel_transport(self.field, TangentVector(ORIGIN, v), self.curve)
        after = self.field.inner(self.curve.end, moved.components, self.curve.tangents[-1])
        self.assertLess(abs(after - before), 1e-8)

    def test_forward_then_backward_returns_vector(self):
        v = TangentVector(ORIGIN, [0.3, 1.0, -0.5, 0.2])
        there = parallel_transport(self.field, v, self.curve)
        back = parallel_transport(self.field, there, self.curve.reversed(self.field))
        np.testing.assert_allclose(back.components, v.components, atol=1e-8)

    def test_base_mismatch(self):
        with self.assertRaises(BaseMismatch):
            parallel_transport(self.field, TangentVector([1, 0, 0, 0], [0, 1, 0, 0]), self.curve)

    def test_frame_transport_keeps_orthonormality(self):
        frame = adapted_frame(self.field, ORIGIN)
        self.assertLess(frame.orthonormality_defect(self.field), 1e-8)
        moved = transport_frame(self.field, frame, self.curve)
        self.assertLess(moved.orthonormality_defect(self.field), 1e-7)

    def test_flat_frame_transport_is_identity(self):
        frame = adapted_frame(Minkowski(), ORIGIN, rotation=0.3)
        curve = connect_geodesic(Minkowski(), ORIGIN, [2, 0, 1, 0], 'timelike')
        np.testing.assert_allclose(transport_frame(Minkowski(), frame, curve).vectors, frame.vectors, atol=1e-15)

    def test_transporting_a_non_orthonormal_frame_is_refused(self):
        curve = connect_geodesic(Minkowski(), ORIGIN, [2, 0, 1, 0], 'timelike')
        with self.assertRaises(NotOrthonormal):
            transport_frame(Minkowski(), Frame(ORIGIN, 2.0 * np.eye(4)), curve)

    def test_consecutive_transports_compose(self):
        frame = adapted_frame(self.field, ORIGIN)
        first = sub_geodesic(self.field, self.curve, 0.5)
        second = shoot_geodesic(self.field, first.end, first.final_tangent, 1.0, 0.01)
        whole = transport_frame(self.field, frame, self.curve)
        stepped = transport_frame(self.field, transport_frame(self.field, frame, first), second)
        np.testing.assert_allclose(stepped.vectors, whole.vectors, atol=1e-8)

    def test_general_curve_transport_in_flat_space(self):
        curve = connect_geodesic(Minkowski(), ORIGIN, [2, 1, 0, 0], 'timelike')
        general = Curve('general', curve.params, curve.points, curve.tangents, curve.step)
        moved = parallel_transport(Minkowski(), TangentVector(ORIGIN, [0, 1, 2, 3]), general)
        np.testing.assert_allclose(moved.components, [0, 1, 2, 3], atol=1e-14)

    def test_adapted_frame_axis_becomes_e3(self):
        frame = adapted_frame(self.field, ORIGIN, axis=[0.0, 1.0, 0.0, 0.0])
        self.assertLess(frame.orthonormality_defect(self.field), 1e-8)
        self.assertAlmostEqual(abs(frame.vectors[3][1]) * math.sqrt(self.field.metric(ORIGIN)[1, 1]), 1.0, places=12)
        self.assertGreater(np.linalg.det(frame.vectors), 0.0)


class PlaneAngleTests(SimpleTestCase):

    def setUp(self):
        self.plane = Plane(ORIGIN, [0, 1, 0, 0], [0, 0, 1, 0])

    def test_first_vector_is_zero(self):
        self.assertEqual(plane_angle(Minkowski(), self.plane, TangentVector(ORIGIN, [0, 1, 0, 0])), 0.0)

    def test_second_vector_is_quarter_turn(self):
        angle = plane_angle(Minkowski(), self.plane, TangentVector(ORIGIN, [0, 0, 1, 0]))
        self.assertAlmostEqual(angle, math.pi / 2, places=14)

    def test_normal_component_is_discarded(self):
        u = [0.0, math.cos(1.234), math.sin(1.234), 0.5]
        self.assertAlmostEqual(plane_angle(Minkowski(), self.plane, TangentVector(ORIGIN, u)), 1.234, places=10)

    def test_orthogonal_vector_is_rejected(self):
        with self.assertRaises(OrthogonalProjection):
            plane_angle(Minkowski(), self.plane, TangentVector(ORIGIN, [0, 0, 0, 1]))

    def test_reference_frame_is_checked_but_does_not_move_the_angle(self):
        u = TangentVector(ORIGIN, [0.0, math.cos(0.8), math.sin(0.8), 0.0])
        frame = adapted_frame(Minkowski(), ORIGIN)
        self.assertAlmostEqual(plane_angle(Minkowski(), self.plane, u, ref_frame=frame),
                               plane_angle(Minkowski(), self.plane, u), places=15)

    def test_reference_frame_elsewhere_is_rejected(self):
        u = TangentVector(ORIGIN, [0, 1, 0, 0])
        with self.assertRaises(BaseMismatch):
            plane_angle(Minkowski(), self.plane, u, ref_frame=adapted_frame(Minkowski(), [1.0, 0, 0, 0]))
        with self.assertRaises(NotOrthonormal):
            plane_angle(Minkowski(), self.plane, u, ref_frame=Frame(ORIGIN, 2.0 * np.eye(4)))

    def test_identical_planes_have_no_tilt(self):
        self.assertAlmostEqual(plane_tilt(Minkowski(), self.plane, self.plane), 0.0, places=7)
        tilted = Plane(ORIGIN, [0, 1, 0, 0], [0, 0, math.cos(0.3), math.sin(0.3)])
        self.assertAlmostEqual(plane_tilt(Minkowski(), tilted, self.plane), 0.3, places=10)


class LoopHolonomyTests(SimpleTestCase):

    def setUp(self):
        self.sphere = ProductSphere(1.0)

    def _triangle_loop(self, vertices, step):
        v1, v2, v3 = vertices
        return [great_circle_arc(self.sphere, v1, v2, step),
                great_circle_arc(self.sphere, v2, v3, step),
                great_circle_arc(self.sphere, v3, v1, step)]

    def _holonomy(self, loop):
        base = loop[0].start
        plane = tangent_plane(self.sphere, base)
        return loop_holonomy_angle(self.sphere, loop, plane, TangentVector(base, plane.first))

    def test_flat_loop_is_trivial(self):
        flat = Minkowski()
        corners = [ORIGIN, np.array([1.0, 0.5, 0.0, 0.0]), np.array([2.0, 0.0, 0.7, 0.0])]
        loop = [connect_geodesic(flat, corners[i], corners[(i + 1) % 3]) for i in range(3)]
        plane = Plane(ORIGIN, [0, 1, 0, 0], [0, 0, 1, 0])
        angle = loop_holonomy_angle(flat, loop, plane, TangentVector(ORIGIN, [0, 1, 0, 0]))
        self.assertLess(abs(angle), 1e-9)

    def test_triangle_holonomy_is_enclosed_solid_angle(self):
        loop = self._triangle_loop(triangle_with_solid_angle(0.5), 1e-4)
        self.assertAlmostEqual(abs(self._holonomy(loop)), 0.5, delta=1e-5)

    def test_fourth_order_convergence(self):
        vertices = triangle_with_solid_angle(0.5)
        errors = [abs(abs(self._holonomy(self._triangle_loop(vertices, step))) - 0.5) for step in (0.1, 0.05)]
        self.assertGreaterEqual(errors[0] / errors[1], 8.0)

    def test_reversed_loop_negates_angle(self):
        loop = self._triangle_loop(triangle_with_solid_angle(0.5), 1e-3)
        backwards = [curve.reversed(self.sphere) for curve in reversed(loop)]
        self.assertAlmostEqual(self._holonomy(backwards), -self._holonomy(loop), delta=1e-8)

    def test_choice_of_vector_in_the_plane_does_not_matter(self):
        loop = self._triangle_loop(triangle_with_solid_angle(0.3), 1e-3)
        base = loop[0].start
        plane = tangent_plane(self.sphere, base)
        angles = [loop_holonomy_angle(self.sphere, loop, plane, plane.direction(phi)) for phi in (0.0, 1.0, 2.5)]
        self.assertLess(max(angles) - min(angles), 1e-7)

    def test_subloops_add_up(self):
        v1, v2, v3 = triangle_with_solid_angle(0.4)
        midpoint = (v2 + v3) / np.linalg.norm(v2 + v3)
        step = 1e-3
        total = self._holonomy(self._triangle_loop((v1, v2, v3), step))
        first = self._holonomy(self._triangle_loop((v1, v2, midpoint), step))
        second = self._holonomy(self._triangle_loop((v1, midpoint, v3), step))
        self.assertAlmostEqual(total, first + second, delta=1e-6)

    def test_open_loop_is_rejected(self):
        v1, v2, v3 = triangle_with_solid_angle(0.5)
        loop = self._triangle_loop((v1, v2, v3), 1e-2)[:2]
        with self.assertRaises(OpenLoop):
            self._holonomy(loop)

    def test_transported_plane_on_sphere_stays_tangent(self):
        v1, v2, _ = triangle_with_solid_angle(0.5)
        arc = great_circle_arc(self.sphere, v1, v2, 1e-3)
        moved = transport_plane(self.sphere, tangent_plane(self.sphere, arc.start), arc)
        self.assertAlmostEqual(plane_tilt(self.sphere, moved, tangent_plane(self.sphere, arc.end)), 0.0, places=6)


class AngleWrappingTests(SimpleTestCase):

    def test_wrap_ranges(self):
        self.assertAlmostEqual(wrap_angle(-0.5), 2.0 * math.pi - 0.5, places=14)
        self.assertEqual(wrap_angle(2.0 * math.pi), 0.0)
        self.assertAlmostEqual(wrap_pi(3.5 * math.pi), -0.5 * math.pi, places=12)
        self.assertAlmostEqual(wrap_pi(math.pi), math.pi, places=14)
