"""Keyhole regions, sectors, and quadrature rules on the keyhole boundary.

The keyhole region with radius ``delta`` and opening angle ``theta`` is the
set of complex numbers with ``|lam| <= delta`` or ``|arg lam| >= theta``
(argument normalized to ``[-pi, pi)``).  Its boundary consists of an
incoming ray at angle ``+theta``, a circular arc of radius ``delta``
crossing the positive real axis, and an outgoing ray at angle ``-theta``.
Resolvent integrals for complex operator powers are taken along this
boundary, oriented so that a scalar pole at ``a > delta`` inside the
complementary wedge picks up residue ``2*pi*1j*a**z``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContourError

__all__ = [
    "Sector",
    "KeyholeRegion",
    "ContourQuadrature",
    "contour_nodes",
    "in_sector",
    "principal_arg",
    "lambda_power",
    "clenshaw_curtis",
]


def principal_arg(lam):
    """Argument of ``lam`` normalized to the half-open interval [-pi, pi)."""
    a = np.angle(lam)
    if np.isscalar(lam) or np.ndim(lam) == 0:
        return -math.pi if a == math.pi else float(a)
    a = np.asarray(a, dtype=float).copy()
    a[a == math.pi] = -math.pi
    return a


def lambda_power(lam, z):
    """Principal power ``lam**z = |lam|**z * exp(1j*z*arg(lam))``.

    Holomorphic off the cut ``(-inf, 0]``; callers keep their points off the
    cut, and points exactly on the negative real axis use ``arg = -pi``.
    """
    lam = np.asarray(lam, dtype=complex)
    if np.any(lam == 0):
        raise ValueError("lambda_power undefined at 0")
    return np.exp(z * (np.log(np.abs(lam)) + 1j * principal_arg(lam)))


@dataclass(frozen=True)
class Sector:
    """Closed sector ``{|arg lam| >= theta} | {0}``, symmetric about the
    negative real axis, with aperture ``2*(pi - theta)``."""

    theta: float

    def __post_init__(self):
        if not 0.0 < self.theta < math.pi:
            raise ValueError(f"sector angle must lie in (0, pi), got {self.theta}")


@dataclass(frozen=True)
class KeyholeRegion:
    """Union of the disk of radius ``delta`` and the sector of angle ``theta``."""

    delta: float
    theta: float

    def __post_init__(self):
        if self.delta <= 0.0:
            raise ValueError(f"keyhole radius must be positive, got {self.delta}")
        if not 0.0 < self.theta < math.pi:
            raise ValueError(f"keyhole angle must lie in (0, pi), got {self.theta}")

    @property
    def sector(self) -> Sector:
        return Sector(self.theta)


def in_sector(lam: complex, sector: Sector) -> bool:
    """True iff ``lam`` lies in the closed sector (zero included)."""
    if lam == 0:
        return True
    return abs(principal_arg(lam)) >= sector.theta


def clenshaw_curtis(n: int):
    """Clenshaw-Curtis nodes and weights on [-1, 1], ``n >= 2`` points.

    Nodes are the Chebyshev-Lobatto points (endpoints included), returned in
    ascending order.  Weights are positive and sum to 2 exactly (the rule
    integrates constants exactly); convergence is spectral for integrands
    analytic in a neighborhood of the interval.
    """
    if n < 2:
        raise ValueError("need at least 2 quadrature points")
    m = n - 1
    theta = np.pi * np.arange(m + 1) / m
    x = np.cos(theta)
    w = np.zeros(m + 1)
    ii = np.arange(1, m)
    v = np.ones(m - 1)
    if m % 2 == 0:
        w[0] = w[m] = 1.0 / (m * m - 1)
        for k in range(1, m // 2):
            v -= 2.0 * np.cos(2.0 * k * theta[ii]) / (4.0 * k * k - 1)
        v -= np.cos(m * theta[ii]) / (m * m - 1)
    else:
        w[0] = w[m] = 1.0 / (m * m)
        for k in range(1, (m - 1) // 2 + 1):
            v -= 2.0 * np.cos(2.0 * k * theta[ii]) / (4.0 * k * k - 1)
    w[ii] = 2.0 * v / m
    # enforce exact reflection symmetry (cos(pi*j/m) is not bit-symmetric)
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    return x[::-1].copy(), w[::-1].copy()


@dataclass(frozen=True)
class ContourQuadrature:
    """Discretized keyhole boundary.

    ``lambdas[k]`` lie exactly on the three boundary segments; ``weights[k]``
    include the complex line element and orientation, so that
    ``sum(weights * f(lambdas))`` approximates the oriented contour integral
    of ``f``.  The rays are truncated at ``|lam| = delta * exp(s_max)``;
    ``tail_bound`` is the closed-form upper bound
    ``2 * delta**re_z * exp(s_max*re_z) / |re_z|``
    for the modulus integral of ``|lam|**(-1+re_z)`` over the two omitted
    ray tails.
    """

    delta: float
    theta: float
    s_max: float
    re_z: float
    lambdas: np.ndarray
    weights: np.ndarray
    segments: np.ndarray
    tail_bound: float

    @property
    def n_nodes(self) -> int:
        return self.lambdas.size

    @property
    def truncation_radius(self) -> float:
        return self.delta * math.exp(self.s_max)

    def segment_nodes(self, tag: str) -> np.ndarray:
        return self.lambdas[self.segments == tag]

    def segment_weights(self, tag: str) -> np.ndarray:
        return self.weights[self.segments == tag]

    def params(self) -> dict:
        return {
            "delta": self.delta,
            "theta": self.theta,
            "s_max": self.s_max,
            "re_z": self.re_z,
            "n_nodes": int(self.n_nodes),
            "tail_bound": self.tail_bound,
        }


def contour_nodes(
    region: KeyholeRegion,
    s_max: float,
    n_ray: int,
    n_arc: int,
    re_z: float,
) -> ContourQuadrature:
    """Quadrature nodes and weights on the truncated keyhole boundary.

    Ray nodes come from the substitution ``lam = delta * exp(s) * exp(+-1j*theta)``
    with ``s`` in ``[0, s_max]`` (the line element is ``lam ds``); arc nodes
    from ``lam = delta * exp(-1j*t)``, ``t`` in ``[-theta, theta]``.  Each
    segment carries a Clenshaw-Curtis rule: the node set contains the segment
    endpoints, is symmetric under complex conjugation, and the weights on the
    arc have moduli summing exactly to the arc length ``2*delta*theta``.
    Convergence is spectral in the node count, which plain trapezoid weights
    cannot deliver here (the integrand is analytic but the parametrization
    has corners where the rays meet the arc).

    ``re_z < 0`` is required: the omitted ray tails are only absolutely
    integrable, and ``tail_bound`` only finite, for powers decaying at
    infinity.
    """
    if s_max <= 0.0:
        raise ContourError(f"s_max must be positive, got {s_max}")
    if re_z >= 0.0:
        raise ContourError(
            f"re_z must be negative (tail integral diverges otherwise), got {re_z}"
        )
    if n_ray < 2 or n_arc < 2:
        raise ContourError("need at least 2 nodes per segment")

    delta, theta = region.delta, region.theta

    xs, ws = clenshaw_curtis(n_ray)
    s = 0.5 * (xs + 1.0) * s_max
    w_s = ws * (s_max / 2.0)

    xa, wa = clenshaw_curtis(n_arc)
    t = xa * theta
    w_t = wa * theta

    # C1: incoming ray at angle +theta, traversed from s_max down to 0.
    lam1 = delta * np.exp(s) * np.exp(1j * theta)
    w1 = -w_s * lam1
    # C2: arc delta*exp(-1j*t), t from -theta to +theta (through the positive
    # real axis); line element -1j*lam dt.
    lam2 = delta * np.exp(-1j * t)
    w2 = -1j * lam2 * w_t
    # C3: outgoing ray at angle -theta, s from 0 to s_max.
    lam3 = delta * np.exp(s) * np.exp(-1j * theta)
    w3 = w_s * lam3

    lambdas = np.concatenate([lam1[::-1], lam2, lam3])
    weights = np.concatenate([w1[::-1], w2, w3])
    segments = np.concatenate(
        [
            np.full(n_ray, "C1"),
            np.full(n_arc, "C2"),
            np.full(n_ray, "C3"),
        ]
    )

    tail_bound = 2.0 * delta**re_z * math.exp(s_max * re_z) / abs(re_z)

    return ContourQuadrature(
        delta=delta,
        theta=theta,
        s_max=s_max,
        re_z=re_z,
        lambdas=lambdas,
        weights=weights,
        segments=segments,
        tail_bound=tail_bound,
    )
