import math

import numpy as np
import pytest

from fluxlab import geometry as geo

from oracles import ray_circle_closed_form, ray_segment


def test_ray_circle_matches_closed_form_randomized():
    rng = np.random.default_rng(0)
    for _ in range(300):
        origin = rng.uniform(-5, 5, 2)
        angle = rng.uniform(-np.pi, np.pi)
        center = rng.uniform(-5, 5, 2)
        r = rng.uniform(0.1, 2.0)
        dirs = np.array([[math.cos(angle), math.sin(angle)]])
        got = geo.ray_circle(origin, dirs, center, r)[0]
        want = ray_circle_closed_form(origin, angle, center, r)
        if math.isinf(want):
            assert math.isinf(got)
        else:
            assert got == pytest.approx(want, abs=1e-6)


def test_ray_rect_matches_segment_oracle():
    rng = np.random.default_rng(1)
    for _ in range(300):
        origin = rng.uniform(-5, 5, 2)
        angle = rng.uniform(-np.pi, np.pi)
        x0, y0 = rng.uniform(-4, 3, 2)
        w, h = rng.uniform(0.2, 3.0, 2)
        rect = (x0, y0, x0 + w, y0 + h)
        if geo.point_in_rect(origin, rect):
            continue
        dirs = np.array([[math.cos(angle), math.sin(angle)]])
        got = geo.ray_rect(origin, dirs, rect)[0]
        corners = [(x0, y0), (x0 + w, y0), (x0 + w, y0 + h), (x0, y0 + h)]
        want = min(ray_segment(origin, angle, corners[k], corners[(k + 1) % 4])
                   for k in range(4))
        if math.isinf(want):
            assert math.isinf(got)
        else:
            assert got == pytest.approx(want, abs=1e-6)


def test_ray_axis_parallel_edge_cases():
    rect = (1.0, -1.0, 2.0, 1.0)
    dirs = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
    t = geo.ray_rect((0.0, 0.0), dirs, rect)
    assert t[0] == pytest.approx(1.0)
    assert math.isinf(t[1])
    assert math.isinf(t[2])


def test_time_to_collision_head_on():
    # closing at 1 m/s from 1 m apart with combined radius 0.6
    t = geo.time_to_collision(np.array([1.0, 0.0]), np.array([-1.0, 0.0]), 0.6)
    assert t == pytest.approx(0.4)


def test_time_to_collision_overlap_and_miss():
    assert geo.time_to_collision(np.array([0.1, 0.0]), np.array([1.0, 0.0]), 0.6) == 0.0
    assert math.isinf(geo.time_to_collision(np.array([1.0, 1.0]), np.array([1.0, 0.0]), 0.1))


def test_resolve_circle_static_pushes_out():
    p = geo.resolve_circle_static((0.1, 0.0), 0.3, [(0.0, 0.0, 0.5)], [], (-10, -10, 10, 10))
    assert math.hypot(*p) == pytest.approx(0.8, abs=1e-12)
    p = geo.resolve_circle_static((1.0, 0.6), 0.3, [], [(0.0, 0.0, 2.0, 1.0)], (-10, -10, 10, 10))
    # pushed out through the nearest face (top)
    assert p[1] == pytest.approx(1.3, abs=1e-12)


def test_wrap_angle_range():
    a = geo.wrap_angle(np.array([0.0, np.pi, -np.pi, 3 * np.pi, -7.5]))
    assert np.all(a <= np.pi + 1e-12)
    assert np.all(a > -np.pi - 1e-12)
    assert a[0] == 0.0
