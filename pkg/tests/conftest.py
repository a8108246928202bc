import math

import pytest

from stableleaf import Point2, make_map


@pytest.fixture
def linear_map():
    return make_map("linear", lambda_s=0.5, lambda_u=2.0)


@pytest.fixture
def perturbed_map():
    return make_map("perturbed", lambda_s=0.5, lambda_u=2.0, c=0.05)


@pytest.fixture
def henon_map():
    return make_map("henon", a=1.4, b=0.3)


def sweep_min_angle(a11, a12, a21, a22, n_grid=4096):
    """Dense-sweep oracle: angle in [0, pi) minimizing ||M v(theta)||.

    Coarse grid over [0, pi) followed by one parabolic vertex step on the
    bracketing samples. The objective is c + A*cos(2(theta-theta*)), so the
    three-point vertex is accurate to O(grid_step^3); independent of the
    closed-form direction code.
    """
    def norm2(t):
        c, s = math.cos(t), math.sin(t)
        return (a11 * c + a12 * s) ** 2 + (a21 * c + a22 * s) ** 2

    step = math.pi / n_grid
    best_i = min(range(n_grid), key=lambda i: norm2(i * step))
    t0 = best_i * step
    fm, f0, fp = norm2(t0 - step), norm2(t0), norm2(t0 + step)
    denom = fm - 2.0 * f0 + fp
    if denom > 0.0:
        t0 += 0.5 * step * (fm - fp) / denom
    return t0 % math.pi


def orbit_points(m, z, n):
    pts = [Point2(*z)]
    x, y = pts[0]
    for _ in range(n):
        x, y = m.eval_xy(x, y)
        pts.append(Point2(x, y))
    return pts
