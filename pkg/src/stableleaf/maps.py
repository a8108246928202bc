"""Planar map models with first/second derivative access.

A MapModel bundles the map with analytic derivatives where available and
central finite-difference fallbacks where not. Built-in families:

    linear(lambda_s, lambda_u):   (ls*x, lu*y)
    perturbed(lambda_s, lambda_u, c): (ls*x + c*y^2, lu*y + c*x^2)
    henon(a, b):                  (1 - a*x^2 + y, b*x)

Everything is double precision. Models are immutable and all operations are
pure, so they are safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

from .errors import BadParamsError, DomainError, NonFiniteError, UnknownMapError

# Finite-difference steps (relative to max(1, |p|)): first derivatives use a
# central difference at 1e-6, second derivatives at 1e-4.
JAC_STEP = 1e-6
HESS_STEP = 1e-4
GUARD_MARGIN = 1e-8
DEFAULT_BOX = (-5.0, 5.0, -5.0, 5.0)  # xlo, xhi, ylo, yhi


class Point2(NamedTuple):
    x: float
    y: float


class Mat2(NamedTuple):
    """2x2 matrix; a11 = dPhi1/dx, a12 = dPhi1/dy, a21 = dPhi2/dx, a22 = dPhi2/dy."""

    a11: float
    a12: float
    a21: float
    a22: float

    def det(self) -> float:
        return self.a11 * self.a22 - self.a12 * self.a21

    def mul(self, o: "Mat2") -> "Mat2":
        return Mat2(
            self.a11 * o.a11 + self.a12 * o.a21,
            self.a11 * o.a12 + self.a12 * o.a22,
            self.a21 * o.a11 + self.a22 * o.a21,
            self.a21 * o.a12 + self.a22 * o.a22,
        )

    def apply(self, vx: float, vy: float) -> tuple[float, float]:
        return (self.a11 * vx + self.a12 * vy, self.a21 * vx + self.a22 * vy)


IDENTITY = Mat2(1.0, 0.0, 0.0, 1.0)


class SecondDeriv(NamedTuple):
    """All second partials d_j d_l Phi_i, stored once per symmetric pair."""

    t1xx: float
    t1xy: float
    t1yy: float
    t2xx: float
    t2xy: float
    t2yy: float

    def entry(self, i: int, j: int, k: int) -> float:
        """t[i][j][k] with i the component and j,k the differentiation axes (0=x, 1=y)."""
        row = (self.t1xx, self.t1xy, self.t1yy) if i == 0 else (self.t2xx, self.t2xy, self.t2yy)
        return row[j + k]

    def max_abs_entry(self) -> float:
        return max(abs(v) for v in self)

    def norm(self) -> float:
        """Adopted tensor norm: 2 * max |entry| (upper bound of the bilinear operator norm)."""
        return 2.0 * self.max_abs_entry()


def _symmetrize(t1xx, t1xy, t1yx, t1yy, t2xx, t2xy, t2yx, t2yy) -> SecondDeriv:
    return SecondDeriv(t1xx, 0.5 * (t1xy + t1yx), t1yy, t2xx, 0.5 * (t2xy + t2yx), t2yy)


@dataclass(frozen=True)
class MapModel:
    """A planar map with derivative access and optional singular-set guard.

    ``raw_eval`` must be total on the domain box. When ``raw_jac`` / ``raw_hess``
    / ``raw_det_grad`` are absent, central finite differences are used.
    Derivative stencils evaluate the raw map without the domain guard so base
    points near the box edge do not fail spuriously.
    """

    name: str
    params: dict
    raw_eval: Callable[[float, float], tuple[float, float]]
    raw_jac: Optional[Callable[[float, float], tuple[float, float, float, float]]] = None
    raw_hess: Optional[Callable[[float, float], tuple]] = None
    raw_det_grad: Optional[Callable[[float, float], tuple[float, float]]] = None
    singular_guard: Optional[Callable[[float, float], float]] = None
    box: tuple[float, float, float, float] = DEFAULT_BOX
    guard_margin: float = GUARD_MARGIN

    # -- domain ------------------------------------------------------------

    def in_domain(self, x: float, y: float) -> bool:
        xlo, xhi, ylo, yhi = self.box
        if not (xlo <= x <= xhi and ylo <= y <= yhi):
            return False
        if self.singular_guard is not None and self.singular_guard(x, y) <= self.guard_margin:
            return False
        return True

    def _check_domain(self, x: float, y: float) -> None:
        if not (math.isfinite(x) and math.isfinite(y)):
            raise NonFiniteError(f"non-finite point ({x}, {y})")
        if not self.in_domain(x, y):
            raise DomainError(f"({x}, {y}) outside domain of map '{self.name}'")

    # -- evaluation ---------------------------------------------------------

    def eval_xy(self, x: float, y: float) -> tuple[float, float]:
        self._check_domain(x, y)
        fx, fy = self.raw_eval(x, y)
        if not (math.isfinite(fx) and math.isfinite(fy)):
            raise NonFiniteError(f"map '{self.name}' returned non-finite value at ({x}, {y})")
        return fx, fy

    def evaluate(self, p: Point2) -> Point2:
        return Point2(*self.eval_xy(p[0], p[1]))

    # -- first derivative ---------------------------------------------------

    def jac_xy(self, x: float, y: float) -> tuple[float, float, float, float]:
        self._check_domain(x, y)
        if self.raw_jac is not None:
            j = self.raw_jac(x, y)
        else:
            h = JAC_STEP * max(1.0, math.hypot(x, y))
            fxp = self.raw_eval(x + h, y)
            fxm = self.raw_eval(x - h, y)
            fyp = self.raw_eval(x, y + h)
            fym = self.raw_eval(x, y - h)
            inv2h = 0.5 / h
            j = (
                (fxp[0] - fxm[0]) * inv2h,
                (fyp[0] - fym[0]) * inv2h,
                (fxp[1] - fxm[1]) * inv2h,
                (fyp[1] - fym[1]) * inv2h,
            )
        if not all(math.isfinite(v) for v in j):
            raise NonFiniteError(f"Jacobian of '{self.name}' non-finite at ({x}, {y})")
        return j

    def jacobian(self, p: Point2) -> Mat2:
        return Mat2(*self.jac_xy(p[0], p[1]))

    # -- second derivative ----------------------------------------------------

    def second_derivative_data(self, p: Point2) -> tuple[SecondDeriv, Point2]:
        """Second-partial tensor and the spatial gradient of det(Dphi) at p."""
        x, y = p
        self._check_domain(x, y)
        h = HESS_STEP * max(1.0, math.hypot(x, y))
        if self.raw_hess is not None:
            t = SecondDeriv(*self.raw_hess(x, y))
        else:
            f0 = self.raw_eval(x, y)
            fxp = self.raw_eval(x + h, y)
            fxm = self.raw_eval(x - h, y)
            fyp = self.raw_eval(x, y + h)
            fym = self.raw_eval(x, y - h)
            fpp = self.raw_eval(x + h, y + h)
            fpm = self.raw_eval(x + h, y - h)
            fmp = self.raw_eval(x - h, y + h)
            fmm = self.raw_eval(x - h, y - h)
            ih2 = 1.0 / (h * h)
            mixed1 = (fpp[0] - fpm[0] - fmp[0] + fmm[0]) * 0.25 * ih2
            mixed2 = (fpp[1] - fpm[1] - fmp[1] + fmm[1]) * 0.25 * ih2
            t = _symmetrize(
                (fxp[0] - 2 * f0[0] + fxm[0]) * ih2, mixed1, mixed1,
                (fyp[0] - 2 * f0[0] + fym[0]) * ih2,
                (fxp[1] - 2 * f0[1] + fxm[1]) * ih2, mixed2, mixed2,
                (fyp[1] - 2 * f0[1] + fym[1]) * ih2,
            )
        if self.raw_det_grad is not None:
            g = self.raw_det_grad(x, y)
        else:
            def det_at(px, py):
                if self.raw_jac is not None:
                    j = self.raw_jac(px, py)
                    return j[0] * j[3] - j[1] * j[2]
                hj = JAC_STEP * max(1.0, math.hypot(px, py))
                i2 = 0.5 / hj
                a = (self.raw_eval(px + hj, py)[0] - self.raw_eval(px - hj, py)[0]) * i2
                b = (self.raw_eval(px, py + hj)[0] - self.raw_eval(px, py - hj)[0]) * i2
                c = (self.raw_eval(px + hj, py)[1] - self.raw_eval(px - hj, py)[1]) * i2
                d = (self.raw_eval(px, py + hj)[1] - self.raw_eval(px, py - hj)[1]) * i2
                return a * d - b * c

            g = (
                (det_at(x + h, y) - det_at(x - h, y)) * 0.5 / h,
                (det_at(x, y + h) - det_at(x, y - h)) * 0.5 / h,
            )
        if not (all(math.isfinite(v) for v in t) and all(math.isfinite(v) for v in g)):
            raise NonFiniteError(f"second derivative data of '{self.name}' non-finite at ({x}, {y})")
        return t, Point2(*g)

    def hess_norm_xy(self, x: float, y: float) -> float:
        """||D^2 phi|| at (x, y) under the adopted 2*max|entry| norm."""
        t, _ = self.second_derivative_data(Point2(x, y))
        return t.norm()


# -- built-in families -------------------------------------------------------


def _require(params: dict, *names: str) -> list[float]:
    vals = []
    for n in names:
        if n not in params or params[n] is None:
            raise BadParamsError(f"missing parameter '{n}'")
        v = float(params[n])
        if not math.isfinite(v):
            raise BadParamsError(f"parameter '{n}' must be finite, got {params[n]}")
        vals.append(v)
    return vals


def _linear(ls: float, lu: float, box) -> MapModel:
    return MapModel(
        name="linear",
        params={"lambda_s": ls, "lambda_u": lu},
        raw_eval=lambda x, y: (ls * x, lu * y),
        raw_jac=lambda x, y: (ls, 0.0, 0.0, lu),
        raw_hess=lambda x, y: (0.0, 0.0, 0.0, 0.0, 0.0, 0.0),
        raw_det_grad=lambda x, y: (0.0, 0.0),
        box=box,
    )


def _perturbed(ls: float, lu: float, c: float, box) -> MapModel:
    return MapModel(
        name="perturbed",
        params={"lambda_s": ls, "lambda_u": lu, "c": c},
        raw_eval=lambda x, y: (ls * x + c * y * y, lu * y + c * x * x),
        raw_jac=lambda x, y: (ls, 2.0 * c * y, 2.0 * c * x, lu),
        raw_hess=lambda x, y: (0.0, 0.0, 2.0 * c, 2.0 * c, 0.0, 0.0),
        # det = ls*lu - 4 c^2 x y
        raw_det_grad=lambda x, y: (-4.0 * c * c * y, -4.0 * c * c * x),
        box=box,
    )


def _henon(a: float, b: float, box) -> MapModel:
    return MapModel(
        name="henon",
        params={"a": a, "b": b},
        raw_eval=lambda x, y: (1.0 - a * x * x + y, b * x),
        raw_jac=lambda x, y: (-2.0 * a * x, 1.0, b, 0.0),
        raw_hess=lambda x, y: (-2.0 * a, 0.0, 0.0, 0.0, 0.0, 0.0),
        raw_det_grad=lambda x, y: (0.0, 0.0),  # det = -b everywhere
        box=box,
    )


def make_map(name: str, require_hyperbolic: bool = False, box=DEFAULT_BOX, **params) -> MapModel:
    """Build one of the built-in maps; unknown names raise UnknownMapError."""
    if name == "linear":
        ls, lu = _require(params, "lambda_s", "lambda_u")
        if require_hyperbolic and (abs(ls) >= 1.0 or abs(lu) <= 1.0):
            raise BadParamsError(f"linear map not hyperbolic: |lambda_s|={abs(ls)}, |lambda_u|={abs(lu)}")
        if ls == 0.0 or lu == 0.0:
            raise BadParamsError("linear map must be invertible (nonzero eigenvalues)")
        return _linear(ls, lu, box)
    if name == "perturbed":
        ls, lu, c = _require(params, "lambda_s", "lambda_u", "c")
        if require_hyperbolic and (abs(ls) >= 1.0 or abs(lu) <= 1.0):
            raise BadParamsError(f"perturbed map not hyperbolic: |lambda_s|={abs(ls)}, |lambda_u|={abs(lu)}")
        if ls == 0.0 or lu == 0.0:
            raise BadParamsError("perturbed map needs nonzero lambda_s, lambda_u")
        return _perturbed(ls, lu, c, box)
    if name == "henon":
        a, b = _require(params, "a", "b")
        if b == 0.0:
            raise BadParamsError("henon map needs b != 0 to be a diffeomorphism")
        return _henon(a, b, box)
    raise UnknownMapError(f"unknown map '{name}' (built-ins: linear, perturbed, henon)")
