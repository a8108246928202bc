"""Derivative cocycles along orbits and their growth/distortion quantities.

For a 2x2 matrix M = [[A, B], [C, D]] the squared singular values are the
roots of lambda^2 - S*lambda + det^2 with S = A^2+B^2+C^2+D^2. We use the
stable discriminant form R = hypot(B', 2A') where A' = AB + CD and
B' = A^2+C^2-B^2-D^2, which satisfies R = F^2 - E^2 exactly (so no negative
round-off under the square root), and recover E = |det|/F.

Per-step quantities along an orbit z_j = phi^j(z0):

    P_j  = ||Dphi|| at z_j            Q_j  = ||(Dphi)^-1|| at z_j
    Pt_j = ||D^2 phi|| at z_j          Dd_j = |det Dphi| at z_j
    Ddt_j = ||D(det Dphi)|| at z_j

and the k-step growth E_k <= F_k (singular values of Dphi^k), H_k = E_k/F_k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConformalError, OrbitEscapeError, SingularMatrixError, SingularStepError
from .errors import DomainError, NonFiniteError
from .maps import IDENTITY, MapModel, Mat2, Point2

CONFORMAL_TOL = 1e-12  # below this 1 - E/F, the direction equation is round-off


def singular_values(m: Mat2) -> tuple[float, float]:
    """(E, F) = (min, max) singular value; no conformality check."""
    a, b, c, d = m
    s = a * a + b * b + c * c + d * d
    det = a * d - b * c
    r = math.hypot(a * a + c * c - b * b - d * d, 2.0 * (a * b + c * d))
    f2 = 0.5 * (s + r)
    f = math.sqrt(f2)
    if f == 0.0:
        return 0.0, 0.0
    e = abs(det) / f
    return e, f


@dataclass(frozen=True)
class SingularFrame:
    """Singular values and most contracted/expanded directions of a 2x2 matrix.

    quad holds (A', B', C', D') = (AB+CD, A^2+C^2-B^2-D^2, AC+BD, A^2+B^2-C^2-D^2);
    4A'^2 + B'^2 = 4C'^2 + D'^2 = (E^2 - F^2)^2.
    """

    E: float
    F: float
    theta_contract: float
    theta_expand: float
    quad: tuple[float, float, float, float]


def _contract_angle(a: float, b: float, c: float, d: float) -> float:
    """Angle in [0, pi) minimizing ||M v(theta)||; assumes E < F strictly."""
    qa = a * b + c * d
    qb = a * a + c * c - b * b - d * d
    th = 0.5 * math.atan2(2.0 * qa, qb)  # the *expanded* stationary branch
    # resolve the branch pair {th, th + pi/2} by explicit norm evaluation
    ct, st = math.cos(th), math.sin(th)
    n1 = (a * ct + b * st) ** 2 + (c * ct + d * st) ** 2
    n2 = (-a * st + b * ct) ** 2 + (-c * st + d * ct) ** 2
    if n2 < n1:
        th += 0.5 * math.pi
    return th % math.pi


def singular_frame(m: Mat2) -> SingularFrame:
    a, b, c, d = m
    det = a * d - b * c
    if det == 0.0:
        raise SingularMatrixError("matrix is singular; frame undefined")
    e, f = singular_values(m)
    if 1.0 - e / f < CONFORMAL_TOL:
        raise ConformalError(f"matrix is conformal to round-off (1 - E/F = {1.0 - e / f:.2e})")
    th = _contract_angle(a, b, c, d)
    return SingularFrame(
        E=e,
        F=f,
        theta_contract=th,
        theta_expand=(th + 0.5 * math.pi) % math.pi,
        quad=(a * b + c * d, a * a + c * c - b * b - d * d,
              a * c + b * d, a * a + b * b - c * c - d * d),
    )


@dataclass
class OrbitCocycle:
    """Orbit points, step derivatives, partial products, and growth scalars.

    Index conventions: orbit/steps and the per-step arrays run j = 0..kmax
    (steps[j] is Dphi at z_j); products/growth run k = 0..kmax with
    products[0] = I and E_0 = F_0 = H_0 = 1. Immutable after build except the
    idempotent tail-norm memo cache.
    """

    map: MapModel
    z0: Point2
    kmax: int
    orbit: list[Point2]
    steps: list[Mat2]
    products: list[Mat2]
    E: np.ndarray
    F: np.ndarray
    H: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    Pt: np.ndarray
    Dd: np.ndarray
    Ddt: np.ndarray
    _tails: dict = field(default_factory=dict, repr=False)

    def tail_norms(self, k: int) -> list[float]:
        """F_{j,k} = ||Dphi^(k-j-1) at z_{j+1}|| for j = 0..k-1 (F_{k-1,k} = 1)."""
        if k in self._tails:
            return self._tails[k]
        if not 1 <= k <= self.kmax:
            raise IndexError(f"k={k} out of range 1..{self.kmax}")
        out = [0.0] * k
        t = IDENTITY
        out[k - 1] = 1.0
        for j in range(k - 2, -1, -1):
            t = t.mul(self.steps[j + 1])
            out[j] = singular_values(t)[1]
        self._tails[k] = out
        return out


def build_orbit_cocycle(m: MapModel, z0: Point2, kmax: int) -> OrbitCocycle:
    """Walk the orbit kmax steps, collecting derivatives and growth quantities.

    Raises OrbitEscapeError(j) if phi^j(z0) leaves the domain and
    SingularStepError if any one-step derivative is singular.
    """
    if kmax < 1:
        raise IndexError("kmax must be >= 1")
    x, y = float(z0[0]), float(z0[1])
    orbit = [Point2(x, y)]
    steps: list[Mat2] = []
    eval_xy, jac_xy = m.eval_xy, m.jac_xy
    for j in range(kmax + 1):
        try:
            steps.append(Mat2(*jac_xy(x, y)))
        except (DomainError, NonFiniteError):
            raise OrbitEscapeError(j, Point2(x, y))
        if j < kmax:
            try:
                x, y = eval_xy(x, y)
            except (DomainError, NonFiniteError):
                raise OrbitEscapeError(j, Point2(x, y))
            if not m.in_domain(x, y):
                raise OrbitEscapeError(j + 1, Point2(x, y))
            orbit.append(Point2(x, y))

    n = kmax + 1
    E = np.empty(n)
    F = np.empty(n)
    H = np.empty(n)
    P = np.empty(n)
    Q = np.empty(n)
    Pt = np.empty(n)
    Dd = np.empty(n)
    Ddt = np.empty(n)
    E[0] = F[0] = H[0] = 1.0

    prods = [IDENTITY]
    acc = IDENTITY
    for k in range(1, n):
        acc = steps[k - 1].mul(acc)
        prods.append(acc)
        e, f = singular_values(acc)
        E[k], F[k] = e, f
        H[k] = e / f if f > 0 else math.nan

    for j in range(n):
        sj = steps[j]
        e, f = singular_values(sj)
        det = sj.det()
        if det == 0.0 or e == 0.0:
            raise SingularStepError(f"singular one-step derivative at orbit index {j}")
        P[j] = f
        Q[j] = 1.0 / e
        Dd[j] = abs(det)
        t, g = m.second_derivative_data(orbit[j])
        Pt[j] = t.norm()
        Ddt[j] = math.hypot(g[0], g[1])

    return OrbitCocycle(
        map=m, z0=Point2(*z0), kmax=kmax, orbit=orbit, steps=steps, products=prods,
        E=E, F=F, H=H, P=P, Q=Q, Pt=Pt, Dd=Dd, Ddt=Ddt,
    )


def distortion_bounds(c: OrbitCocycle, k: int) -> tuple[float, float]:
    """Right-hand sides of the two distortion inequalities at order k.

        d1_rhs = (E_k / F_k^2) * sum_{j<k} Pt_j * F_{j,k} * F_j^2
        d2_rhs = (E_k / F_k)   * sum_{j<k} Dd_j^-1 * Ddt_j * F_j

    with F_0 = 1 and F_{j,k} the tail-product norms. d1_rhs bounds
    H_k ||D^2 phi^k|| / ||Dphi^k||; d2_rhs bounds ||D(det Dphi^k)|| / ||Dphi^k||^2.
    """
    if not 1 <= k <= c.kmax:
        raise IndexError(f"k={k} out of range 1..{c.kmax}")
    tails = c.tail_norms(k)
    s1 = 0.0
    s2 = 0.0
    for j in range(k):
        fj = c.F[j]
        s1 += c.Pt[j] * tails[j] * fj * fj
        s2 += (c.Ddt[j] / c.Dd[j]) * fj
    ek, fk = c.E[k], c.F[k]
    return (ek / (fk * fk)) * s1, (ek / fk) * s2
