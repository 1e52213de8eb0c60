"""Log-radial grids, the weight isometry, and per-mode matrix assembly.

Everything lives in the line picture obtained from the substitution
``r = -log t`` together with the unitary weight map
``v(r) = exp(-beta*r) * u(exp(-r))``, ``beta = (n+1)/2 - gamma``: weighted
p-norms near the tip become plain p-norms in ``r``, the Euler derivative
``t*d/dt`` becomes ``-(d/dr + beta)``, and the dilation group becomes an
index shift.  Matrices therefore act on vectors of ``v`` samples on an
equispaced r-grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GridError
from .symbols import CrossSectionSpectrum, FuchsOperator, WeightData

__all__ = [
    "LogGrid",
    "ModeMatrix",
    "DiscreteOperator",
    "WeightedNormSpec",
    "assemble",
    "weighted_norm",
    "kappa_apply",
    "central_difference",
]


@dataclass(frozen=True)
class LogGrid:
    """Equispaced grid in ``r = -log t``.

    ``model_cone`` grids straddle the unit radius (``r_min < 0 < r_max``,
    both cone ends truncated); ``truncated_cone`` grids start at ``t = 1``
    (``r_min = 0``), the desk-scale surrogate for the compact body with a
    homogeneous Dirichlet condition at the outer boundary.  All nodes are
    active unknowns; the difference stencils treat the ghost values beyond
    both ends as zero.
    """

    r_min: float
    r_max: float
    N: int
    kind: str = "model_cone"

    def __post_init__(self):
        if self.N < 8:
            raise GridError(f"need at least 8 grid points, got {self.N}")
        if not self.r_min < self.r_max:
            raise GridError("r_min must be below r_max")
        if self.kind == "model_cone":
            if not (self.r_min < 0.0 < self.r_max):
                raise GridError("model_cone grids need r_min < 0 < r_max")
        elif self.kind == "truncated_cone":
            if self.r_min != 0.0:
                raise GridError("truncated_cone grids start at r_min = 0 (t = 1)")
        else:
            raise GridError(f"unknown grid kind {self.kind!r}")

    @property
    def h(self) -> float:
        return (self.r_max - self.r_min) / (self.N - 1)

    @property
    def r(self) -> np.ndarray:
        return self.r_min + self.h * np.arange(self.N)

    @property
    def t(self) -> np.ndarray:
        return np.exp(-self.r)

    def with_points(self, N: int) -> "LogGrid":
        return LogGrid(self.r_min, self.r_max, N, self.kind)


def central_difference(N: int, h: float) -> np.ndarray:
    """Antisymmetric central-difference matrix for d/dr with zero ghosts."""
    D = np.zeros((N, N))
    idx = np.arange(N - 1)
    D[idx, idx + 1] = 0.5 / h
    D[idx + 1, idx] = -0.5 / h
    return D


@dataclass
class ModeMatrix:
    index: int
    nu: float
    mult: int
    matrix: np.ndarray


@dataclass
class DiscreteOperator:
    """Per-mode matrices of a cone operator in the line picture.

    Each matrix discretizes
    ``exp(mu*r/2) * sum_j alpha_j(t; nu) * (D + (beta - mu/2))**j * exp(mu*r/2)``,
    the symmetric split of ``exp(mu*r) * sum_j alpha_j * (D + beta)**j``
    (identical operators in the continuum; the split keeps self-adjoint
    operators exactly symmetric on the grid, which the one-sided product
    cannot do).  ``D`` is the antisymmetric central difference.
    """

    grid: LogGrid
    weight: WeightData
    beta: float
    mu: int
    modes: list
    source: FuchsOperator | None = None
    _eig_cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    def matrices(self) -> list:
        return [m.matrix for m in self.modes]

    @classmethod
    def from_matrices(cls, matrices, grid=None, weight=None, mu=2, nus=None, mults=None):
        """Wrap explicit matrices (synthetic test targets)."""
        matrices = [np.asarray(M) for M in matrices]
        if grid is None:
            N = max(8, matrices[0].shape[0])
            grid = LogGrid(-1.0, 1.0, max(8, N), "model_cone")
        if weight is None:
            weight = WeightData(gamma=0.0, p=2.0, n=1)
        nus = nus if nus is not None else [0.0] * len(matrices)
        mults = mults if mults is not None else [1] * len(matrices)
        modes = [
            ModeMatrix(index=i, nu=float(nus[i]), mult=int(mults[i]), matrix=matrices[i])
            for i in range(len(matrices))
        ]
        return cls(grid=grid, weight=weight, beta=weight.beta, mu=mu, modes=modes)


def assemble(op: FuchsOperator, grid: LogGrid) -> DiscreteOperator:
    """Discretize every retained mode of ``op`` on ``grid``.

    ``model_cone`` grids freeze the coefficients at ``t = 0``;
    ``truncated_cone`` grids evaluate ``alpha_j(exp(-r); nu)`` nodewise.
    Both ends carry homogeneous Dirichlet truncation (zero ghosts).
    """
    if op.cross_section.mode_cutoff < 1:
        raise GridError("operator retains no modes")
    if grid.N < 2 * op.mu + 2:
        raise GridError(
            f"grid too coarse for order-{op.mu} differences: N={grid.N} < {2 * op.mu + 2}"
        )
    N, h = grid.N, grid.h
    r = grid.r
    beta = op.weight.beta
    b0 = beta - op.mu / 2.0
    D = central_difference(N, h)
    base = D + b0 * np.eye(N)
    powers = [np.eye(N)]
    for _ in range(op.mu):
        powers.append(powers[-1] @ base)
    e_half = np.exp(0.5 * op.mu * r)

    modes = []
    for j_mode, (nu, mult) in enumerate(op.cross_section.eigenvalues):
        Q = np.zeros((N, N))
        for j in range(op.mu + 1):
            if grid.kind == "model_cone":
                a = float(op.coeff_at(j, 0.0, nu))
                if a != 0.0:
                    Q += a * powers[j]
            else:
                a = np.asarray(op.coeff_at(j, grid.t, nu), dtype=float)
                if np.any(a != 0.0):
                    Q += a[:, None] * powers[j]
        M = e_half[:, None] * Q * e_half[None, :]
        modes.append(ModeMatrix(index=j_mode, nu=nu, mult=mult, matrix=M))

    return DiscreteOperator(
        grid=grid, weight=op.weight, beta=beta, mu=op.mu, modes=modes, source=op
    )


@dataclass(frozen=True)
class WeightedNormSpec:
    """Sobolev order ``s`` (0, 1, or 2), weight ``gamma``, exponent ``p``."""

    s: int
    gamma: float
    p: float

    def __post_init__(self):
        if self.s not in (0, 1, 2):
            raise ValueError(f"s must be 0, 1, or 2, got {self.s}")
        if not 1.0 < self.p < math.inf:
            raise ValueError(f"p must lie in (1, inf), got {self.p}")


def weighted_norm(
    u,
    spec: WeightedNormSpec,
    grid: LogGrid,
    spectrum: CrossSectionSpectrum,
) -> float:
    """Discrete weighted Sobolev norm of per-mode sample vectors.

    ``u`` holds samples ``u_j(t_i)`` per mode, shape (n_modes, N) or (N,)
    for a single mode.  The order-0 contribution is the plain h-weighted
    grid p-norm of the isometry image ``v = t**beta * u``; each radial
    derivative applies ``-(D + beta)`` to ``v`` (the line image of
    ``t*d/dt``), and each cross-section derivative multiplies mode ``j``
    by ``|nu_j|**(1/2)``.  Mode multiplicities are counted.
    """
    u = np.atleast_2d(np.asarray(u))
    if u.shape[0] != spectrum.mode_cutoff:
        raise ValueError(
            f"expected {spectrum.mode_cutoff} mode rows, got {u.shape[0]}"
        )
    if u.shape[1] != grid.N:
        raise ValueError(f"expected vectors of length {grid.N}, got {u.shape[1]}")
    p = spec.p
    beta = (spectrum.n + 1) / 2.0 - spec.gamma
    v = np.exp(-beta * grid.r)[None, :] * u
    Db = -(central_difference(grid.N, grid.h) + beta * np.eye(grid.N))

    total = 0.0
    for j, (nu, mult) in enumerate(spectrum.eigenvalues):
        radial = [v[j]]
        for _ in range(spec.s):
            radial.append(Db @ radial[-1])
        for k in range(spec.s + 1):
            for a in range(spec.s + 1 - k):
                term = radial[k] * abs(nu) ** (a / 2.0)
                total += mult * grid.h * float(np.sum(np.abs(term) ** p))
    return float(total ** (1.0 / p))


def kappa_apply(u, rho: float, grid: LogGrid, weight: WeightData) -> np.ndarray:
    """Dilation group action ``(kappa_rho u)(t) = rho**((n+1)/2) * u(rho*t)``.

    Only grid-aligned dilations are accepted: ``log(rho)`` must be an integer
    multiple of the grid spacing, so the action is an exact index shift with
    zero fill (no interpolation, keeping algebraic identities exact).
    """
    if rho <= 0.0:
        raise ValueError(f"dilation parameter must be positive, got {rho}")
    u = np.asarray(u)
    if u.shape[-1] != grid.N:
        raise ValueError(f"expected vectors of length {grid.N}")
    m_real = math.log(rho) / grid.h
    m = round(m_real)
    if abs(m_real - m) > 1e-9 * max(1.0, abs(m_real)):
        raise ValueError(
            f"log(rho)/h = {m_real} is not an integer; only grid-aligned "
            "dilations are supported"
        )
    out = np.zeros_like(u)
    factor = rho ** ((weight.n + 1) / 2.0)
    if m == 0:
        return factor * u
    # u(rho * t_i) is the sample at r_i - log rho, i.e. index i - m.
    if m > 0:
        out[..., m:] = u[..., :-m]
    else:
        out[..., :m] = u[..., -m:]
    return factor * out
