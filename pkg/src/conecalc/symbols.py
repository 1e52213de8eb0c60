"""Cone (Fuchs-type) operators in mode-diagonal form and their symbols.

An operator of order ``mu`` acts near the tip as
``t**(-mu) * sum_j alpha_j(t) * (-t*d/dt)**j`` where each coefficient
``alpha_j`` is, on the eigenspace of the cross-section Laplacian with
eigenvalue ``nu``, a polynomial in ``t`` and ``nu``.  Everything this module
computes (conormal polynomials, indicial roots, principal and rescaled
symbols, domain-gap counts) depends only on that spectral data, so the
cross-section itself is represented by its eigenvalue table.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import StripBoundaryError, SymbolError
from .geometry import Sector, in_sector

__all__ = [
    "CrossSectionSpectrum",
    "WeightData",
    "FuchsOperator",
    "IndicialRoot",
    "SingularFunction",
    "WeightLineCheck",
    "EllipticityReport",
    "make_cone_laplacian",
    "conormal_polynomial",
    "conormal_symbol",
    "indicial_roots",
    "all_indicial_roots",
    "weight_line_invertible",
    "symbol_eval",
    "check_ellipticity",
    "domain_gap_dimension",
    "singular_functions",
    "check_pq_condition",
    "gap_strip",
]

_ROOT_TOL = 1e-8          # derivative threshold for zero orders
_LINE_TOL = 1e-9          # distance below which a root counts as "on a line"


@dataclass(frozen=True)
class CrossSectionSpectrum:
    """Eigenvalues of the cross-section Laplacian at the tip.

    ``eigenvalues`` holds pairs ``(nu_j, mult_j)`` with
    ``0 = nu_0 >= nu_1 >= ...`` and positive integer multiplicities.
    ``n`` is the cross-section dimension.
    """

    n: int
    eigenvalues: tuple

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"cross-section dimension must be >= 1, got {self.n}")
        eigs = tuple((float(nu), int(m)) for nu, m in self.eigenvalues)
        if not eigs:
            raise ValueError("need at least one eigenvalue")
        if eigs[0][0] != 0.0:
            raise ValueError("the eigenvalue list must start with 0 (constants)")
        for (nu, m) in eigs:
            if nu > 0.0:
                raise ValueError(f"cross-section Laplacian eigenvalues are <= 0, got {nu}")
            if m < 1:
                raise ValueError(f"multiplicities are positive integers, got {m}")
        if any(eigs[i][0] < eigs[i + 1][0] for i in range(len(eigs) - 1)):
            raise ValueError("eigenvalues must be sorted nonincreasing")
        object.__setattr__(self, "eigenvalues", eigs)

    @classmethod
    def circle(cls, max_mode: int) -> "CrossSectionSpectrum":
        """Unit circle: eigenvalue -k**2, multiplicity 2 for k >= 1."""
        if max_mode < 0:
            raise ValueError("max_mode must be >= 0")
        eigs = [(0.0, 1)] + [(-float(k * k), 2) for k in range(1, max_mode + 1)]
        return cls(n=1, eigenvalues=tuple(eigs))

    @classmethod
    def from_table(cls, n: int, eigenvalues) -> "CrossSectionSpectrum":
        return cls(n=n, eigenvalues=tuple(eigenvalues))

    @property
    def mode_cutoff(self) -> int:
        return len(self.eigenvalues)


@dataclass(frozen=True)
class WeightData:
    """Weight exponent, integrability exponent, and the dimension they refer to.

    ``gamma_p = (n+1) * (1/2 - 1/p)`` is the weight for which the weighted
    space coincides with the plain Lebesgue space of the cone.
    """

    gamma: float
    p: float
    n: int
    gamma_p: float = field(init=False)

    def __post_init__(self):
        if not 1.0 < self.p < math.inf:
            raise ValueError(f"p must lie in (1, inf), got {self.p}")
        object.__setattr__(
            self, "gamma_p", (self.n + 1) * (0.5 - 1.0 / self.p)
        )

    @classmethod
    def lp_identification(cls, n: int, p: float) -> "WeightData":
        """Weight data with ``gamma`` set to ``gamma_p`` itself."""
        gp = (n + 1) * (0.5 - 1.0 / p)
        return cls(gamma=gp, p=p, n=n)

    @property
    def beta(self) -> float:
        """Exponent of the isometry onto the unweighted line picture."""
        return (self.n + 1) / 2.0 - self.gamma


@dataclass(frozen=True)
class FuchsOperator:
    """Mode-diagonal cone operator of order ``mu``.

    ``coeff[j]`` is a 2-d array ``c`` with
    ``alpha_j(t, nu) = sum_{a,b} c[a, b] * t**a * nu**b``.
    ``symbol[j]`` is a 1-d array of coefficients of the principal-symbol
    polynomial ``s_j(nu_hat)`` in the cross-section covariable modulus.
    """

    mu: int
    weight: WeightData
    cross_section: CrossSectionSpectrum
    coeff: tuple
    symbol: tuple

    def __post_init__(self):
        if self.mu < 1:
            raise ValueError(f"order must be >= 1, got {self.mu}")
        if len(self.coeff) != self.mu + 1:
            raise ValueError("need one coefficient table per power 0..mu")
        coeff = tuple(np.atleast_2d(np.asarray(c, dtype=float)) for c in self.coeff)
        object.__setattr__(self, "coeff", coeff)
        if self.symbol is None:
            object.__setattr__(self, "symbol", _default_symbols(self.mu, coeff))
        else:
            if len(self.symbol) != self.mu + 1:
                raise ValueError("need one symbol polynomial per power 0..mu")
            sym = tuple(np.atleast_1d(np.asarray(s, dtype=float)) for s in self.symbol)
            object.__setattr__(self, "symbol", sym)

    @property
    def gamma(self) -> float:
        return self.weight.gamma

    @property
    def p(self) -> float:
        return self.weight.p

    @property
    def n(self) -> int:
        return self.cross_section.n

    def coeff_at(self, j: int, t, nu):
        """Evaluate ``alpha_j`` at (t, nu); vectorized in ``t``."""
        c = self.coeff[j]
        t = np.asarray(t, dtype=float)
        powers_nu = np.array([nu**b for b in range(c.shape[1])])
        c_t = c @ powers_nu  # polynomial in t
        return np.polynomial.polynomial.polyval(t, c_t)

    def mode_eigenvalue(self, j: int) -> float:
        return self.cross_section.eigenvalues[j][0]

    def mode_multiplicity(self, j: int) -> int:
        return self.cross_section.eigenvalues[j][1]


def _default_symbols(mu: int, coeff) -> tuple:
    """Principal-symbol polynomials derived from the coefficient tables.

    On the cross-section, an operator whose eigenvalue action at the tip is
    ``alpha_j(0, nu)`` contributes at principal level the degree-(mu-j)
    homogeneous part of ``alpha_j(0, -nu_hat**2)``.
    """
    out = []
    for j in range(mu + 1):
        c0 = coeff[j][0]  # alpha_j(0, nu) coefficients in nu
        deg = mu - j
        s = np.zeros(deg + 1)
        if deg % 2 == 0:
            b = deg // 2
            if b < c0.size:
                s[deg] = c0[b] * (-1.0) ** b
        out.append(s)
    return tuple(out)


def make_cone_laplacian(
    spectrum: CrossSectionSpectrum,
    c0: float = 0.0,
    weight: WeightData | None = None,
) -> FuchsOperator:
    """The shifted negative cone Laplacian ``c0 - Laplace`` with a
    t-independent cross-section metric.

    Near the tip the Laplacian reads
    ``t**(-2) * ((t d/dt)**2 + (n-1)*(t d/dt) + Laplace_X)``; flipping the
    sign and adding the shift gives, in ``(-t d/dt)`` powers,
    ``alpha_2 = -1``, ``alpha_1 = n - 1``, ``alpha_0 = -nu + c0*t**2``.
    The conormal polynomial of the mode with eigenvalue ``nu`` is therefore
    ``-z**2 + (n-1)*z - nu`` (the shift is invisible at ``t = 0``).
    """
    if c0 < 0.0:
        raise ValueError(f"shift must be >= 0, got {c0}")
    n = spectrum.n
    if weight is None:
        weight = WeightData(gamma=0.0, p=2.0, n=n)
    if weight.n != n:
        raise ValueError("weight dimension disagrees with the cross-section")
    alpha0 = np.zeros((3, 2))
    alpha0[0, 1] = -1.0
    alpha0[2, 0] = c0
    alpha1 = np.array([[n - 1.0]])
    alpha2 = np.array([[-1.0]])
    return FuchsOperator(
        mu=2,
        weight=weight,
        cross_section=spectrum,
        coeff=(alpha0, alpha1, alpha2),
        symbol=None,
    )


def conormal_polynomial(op: FuchsOperator, mode: int) -> np.ndarray:
    """Ascending coefficients of ``z -> sum_j alpha_j(0, nu_mode) * z**j``."""
    nu = op.mode_eigenvalue(mode)
    return np.array([float(op.coeff_at(j, 0.0, nu)) for j in range(op.mu + 1)])


def conormal_symbol(op: FuchsOperator, mode: int, z: complex) -> complex:
    """Value of the conormal polynomial of the given mode at ``z``."""
    c = conormal_polynomial(op, mode)
    return complex(np.polynomial.polynomial.polyval(z, c))


@dataclass(frozen=True)
class IndicialRoot:
    """A zero of a per-mode conormal polynomial with its zero order."""

    z: complex
    mode_index: int
    order: int
    nu: float


def _poly_deriv_value(coeffs: np.ndarray, z: complex, m: int) -> complex:
    c = np.polynomial.polynomial.polyder(coeffs, m) if m else coeffs
    return complex(np.polynomial.polynomial.polyval(z, c))


def _mode_roots(coeffs: np.ndarray, mode: int, nu: float) -> list:
    """Distinct roots with zero orders via companion matrix plus clustering."""
    c = np.asarray(coeffs, dtype=float)
    nz = np.nonzero(np.abs(c) > 0.0)[0]
    if nz.size == 0:
        raise SymbolError(f"conormal polynomial of mode {mode} is identically zero")
    deg = nz[-1]
    if deg == 0:
        return []  # nonzero constant: invertible everywhere
    c = c[: deg + 1]
    roots = np.roots(c[::-1])
    scale_r = 1.0 + float(np.max(np.abs(roots)))
    cluster_tol = 1e-6 * scale_r

    order = np.argsort([(r.real, r.imag) for r in roots], axis=0)[:, 0]
    sorted_roots = roots[order]
    clusters = []
    for r in sorted_roots:
        if clusters and abs(r - clusters[-1][-1]) <= cluster_tol:
            clusters[-1].append(r)
        else:
            clusters.append([r])

    out = []
    for cl in clusters:
        z0 = complex(np.mean(cl))
        m = len(cl)
        z0 = _polish_root(c, z0, m)
        if abs(z0.imag) <= 1e-12 * scale_r:
            z0 = complex(z0.real, 0.0)
        out.append(IndicialRoot(z=z0, mode_index=mode, order=m, nu=nu))
    return out


def _polish_root(coeffs: np.ndarray, z0: complex, m: int) -> complex:
    """Newton polish; a root of order m is simple for the (m-1)th derivative."""
    c = (
        np.polynomial.polynomial.polyder(coeffs, m - 1)
        if m > 1
        else np.asarray(coeffs, dtype=float)
    )
    dc = np.polynomial.polynomial.polyder(c, 1)
    z = z0
    for _ in range(8):
        fz = complex(np.polynomial.polynomial.polyval(z, c))
        dfz = complex(np.polynomial.polynomial.polyval(z, dc))
        if dfz == 0:
            break
        step = fz / dfz
        z -= step
        if abs(step) <= 1e-15 * (1.0 + abs(z)):
            break
    # keep the polish only if it stayed near the cluster
    return z if abs(z - z0) <= 1e-3 * (1.0 + abs(z0)) else z0


def all_indicial_roots(op: FuchsOperator) -> list:
    """Roots of every retained mode's conormal polynomial, deterministic order."""
    out = []
    for j, (nu, _mult) in enumerate(op.cross_section.eigenvalues):
        out.extend(_mode_roots(conormal_polynomial(op, j), j, nu))
    out.sort(key=lambda r: (r.mode_index, r.z.real, r.z.imag))
    return out


def indicial_roots(op: FuchsOperator, strip) -> list:
    """All indicial roots with real part in the open strip ``(lo, hi)``."""
    lo, hi = float(strip[0]), float(strip[1])
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError("strip bounds must be finite")
    if not lo < hi:
        raise ValueError(f"strip must satisfy lo < hi, got ({lo}, {hi})")
    return [r for r in all_indicial_roots(op) if lo < r.z.real < hi]


@dataclass(frozen=True)
class WeightLineCheck:
    invertible: bool
    margin: float
    line: float

    def __bool__(self) -> bool:
        return self.invertible


def weight_line_invertible(op: FuchsOperator, gamma: float) -> WeightLineCheck:
    """Is the conormal family invertible on the line Re z = (n+1)/2 - gamma - mu?

    ``margin`` is the distance from that line to the nearest indicial root's
    real part (infinite when there are no roots at all).
    """
    line = (op.n + 1) / 2.0 - gamma - op.mu
    roots = all_indicial_roots(op)
    if not roots:
        return WeightLineCheck(invertible=True, margin=math.inf, line=line)
    margin = min(abs(r.z.real - line) for r in roots)
    return WeightLineCheck(invertible=margin > _LINE_TOL, margin=margin, line=line)


def symbol_eval(op: FuchsOperator, kind: str, t: float, tau: float, nu_hat: float) -> complex:
    """Principal or rescaled symbol value.

    principal: ``t**(-mu) * sum_j s_j(nu_hat) * (-1j*t*tau)**j`` for ``t > 0``;
    rescaled:  ``sum_j s_j(nu_hat) * (-1j*tau)**j`` (coefficients at ``t=0``).
    """
    if nu_hat < 0.0:
        raise ValueError("nu_hat is a covariable modulus, must be >= 0")
    if tau == 0.0 and nu_hat == 0.0:
        raise ValueError("symbols are defined on the cosphere minus zero")
    if kind == "principal":
        if t <= 0.0:
            raise ValueError("principal symbol needs t > 0")
        acc = 0.0 + 0.0j
        for j in range(op.mu + 1):
            sj = np.polynomial.polynomial.polyval(nu_hat, op.symbol[j])
            acc += sj * (-1j * t * tau) ** j
        return complex(t ** (-op.mu) * acc)
    if kind == "rescaled":
        acc = 0.0 + 0.0j
        for j in range(op.mu + 1):
            sj = np.polynomial.polynomial.polyval(nu_hat, op.symbol[j])
            acc += sj * (-1j * tau) ** j
        return complex(acc)
    raise ValueError(f"unknown symbol kind {kind!r}")


@dataclass
class EllipticityReport:
    sector_theta: float
    gamma: float
    symbol_condition: bool          # principal and rescaled symbol avoid the sector
    symbol_violation: tuple | None  # (kind, t, tau, nu_hat, value) on failure
    model_cone_condition: bool      # discrete model-cone spectrum avoids the sector
    model_cone_spectrum: dict       # per-mode summaries
    weight_line: WeightLineCheck

    @property
    def passed(self) -> bool:
        return bool(
            self.symbol_condition
            and self.model_cone_condition
            and self.weight_line.invertible
        )

    def as_dict(self) -> dict:
        v = self.symbol_violation
        return {
            "sector_theta": self.sector_theta,
            "gamma": self.gamma,
            "symbol_condition": self.symbol_condition,
            "symbol_violation": None
            if v is None
            else {
                "kind": v[0],
                "t": v[1],
                "tau": v[2],
                "nu_hat": v[3],
                "value": [v[4].real, v[4].imag],
            },
            "model_cone_condition": self.model_cone_condition,
            "model_cone_spectrum": self.model_cone_spectrum,
            "weight_line": {
                "invertible": self.weight_line.invertible,
                "margin": self.weight_line.margin,
                "line": self.weight_line.line,
            },
            "passed": self.passed,
        }


def check_ellipticity(
    op: FuchsOperator,
    sector: Sector,
    gamma: float | None = None,
    scan_resolution: int = 64,
    grid=None,
    zero_tol: float | None = None,
) -> EllipticityReport:
    """Numeric ellipticity scan with respect to weight ``gamma + mu``.

    Samples the rescaled symbol on the cosphere and the principal symbol on a
    t-grid times the cosphere; any sample landing in the sector is a failure
    with the offending point recorded.  The model-cone condition is checked
    through the discrete spectrum of the frozen-coefficient operator (the
    shift term ``c0*t**mu`` vanishes at ``t=0`` and rightly does not enter),
    ignoring eigenvalues in a small neighborhood of zero.  The conormal-line
    check at the operator's own weight is reported alongside.
    """
    if scan_resolution < 8:
        raise ValueError("scan_resolution must be >= 8")
    if gamma is None:
        gamma = op.gamma

    phi = np.linspace(0.0, math.pi, scan_resolution)
    taus = np.cos(phi)
    nu_hats = np.abs(np.sin(phi))
    violation = None
    for tau, nh in zip(taus, nu_hats):
        val = symbol_eval(op, "rescaled", 1.0, float(tau), float(nh))
        if in_sector(val, sector):
            violation = ("rescaled", None, float(tau), float(nh), val)
            break
    if violation is None:
        for t in np.geomspace(1e-6, 1.0, scan_resolution):
            for tau, nh in zip(taus, nu_hats):
                val = symbol_eval(op, "principal", float(t), float(tau), float(nh))
                if in_sector(val, sector):
                    violation = ("principal", float(t), float(tau), float(nh), val)
                    break
            if violation is not None:
                break

    # Model-cone condition, delegated to the discretization and eigensolver.
    from . import calculus, discretize

    if grid is None:
        grid = discretize.LogGrid(r_min=-8.0, r_max=8.0, N=128, kind="model_cone")
    target = discretize.assemble(op, grid)
    eigs = calculus.spectrum(target)
    scale = float(np.max(np.abs(eigs))) if eigs.size else 1.0
    if zero_tol is None:
        zero_tol = 1e-8 * max(1.0, scale)
    bad = [
        lam
        for lam in eigs
        if abs(lam) > zero_tol and in_sector(complex(lam), sector)
    ]
    spectrum_summary = {
        "min_real": float(np.min(eigs.real)),
        "max_abs": scale,
        "zero_tol": zero_tol,
        "n_in_sector": len(bad),
        "first_in_sector": None if not bad else [bad[0].real, bad[0].imag],
    }

    return EllipticityReport(
        sector_theta=sector.theta,
        gamma=gamma,
        symbol_condition=violation is None,
        symbol_violation=violation,
        model_cone_condition=not bad,
        model_cone_spectrum=spectrum_summary,
        weight_line=weight_line_invertible(op, gamma),
    )


def gap_strip(op: FuchsOperator, gamma: float) -> tuple:
    """Open strip ``((n+1)/2 - gamma - mu, (n+1)/2 - gamma)`` bounding the
    real parts of domain-gap exponents."""
    hi = (op.n + 1) / 2.0 - gamma
    return (hi - op.mu, hi)


def _strip_roots(op: FuchsOperator, gamma: float, strict_boundary: bool):
    lo, hi = gap_strip(op, gamma)
    btol = _LINE_TOL * max(1.0, abs(lo), abs(hi))
    inside, boundary = [], []
    for r in all_indicial_roots(op):
        x = r.z.real
        if abs(x - lo) <= btol or abs(x - hi) <= btol:
            boundary.append(r)
        elif lo < x < hi:
            inside.append(r)
    if boundary and strict_boundary:
        worst = boundary[0]
        raise StripBoundaryError(
            f"indicial root {worst.z} (mode {worst.mode_index}) lies on a "
            f"boundary of the strip ({lo}, {hi}); shift the weight"
        )
    return inside


def domain_gap_dimension(
    op: FuchsOperator, gamma: float | None = None, strict_boundary: bool = False
) -> int:
    """Dimension of the gap between the minimal and maximal domain.

    Sum of zero orders of all per-mode conormal polynomials over the open
    strip, weighted by mode multiplicity.  Roots exactly on a boundary line
    belong to neither side of the open strip and are excluded; with
    ``strict_boundary=True`` they raise instead (the count is then only
    honest after a weight shift).
    """
    if gamma is None:
        gamma = op.gamma
    inside = _strip_roots(op, gamma, strict_boundary)
    return int(sum(r.order * op.mode_multiplicity(r.mode_index) for r in inside))


@dataclass(frozen=True)
class SingularFunction:
    """One basis function ``omega(t) * t**(-exponent) * log(t)**log_power``
    of the domain gap, tagged with its mode."""

    mode_index: int
    exponent: complex
    log_power: int
    cutoff: str = "omega"

    def render(self) -> str:
        s = f"{self.cutoff}(t)"
        if self.exponent != 0:
            s += f" * t**({-self.exponent})"
        if self.log_power:
            s += f" * log(t)**{self.log_power}"
        return s


def singular_functions(
    op: FuchsOperator, gamma: float | None = None, strict_boundary: bool = False
) -> list:
    """Singular-function basis of the domain gap.

    A root ``p`` of order ``m`` in the strip contributes
    ``t**(-p) * log(t)**k`` for ``k = 0 .. m-1``; one copy per eigenvalue
    multiplicity.  The list length equals ``domain_gap_dimension``.
    """
    if gamma is None:
        gamma = op.gamma
    inside = _strip_roots(op, gamma, strict_boundary)
    out = []
    for r in inside:
        for _copy in range(op.mode_multiplicity(r.mode_index)):
            for k in range(r.order):
                out.append(
                    SingularFunction(mode_index=r.mode_index, exponent=r.z, log_power=k)
                )
    return out


def check_pq_condition(n: int, p: float) -> bool:
    """Dimension condition ``2*max(p, p') - 1 < n`` with ``p' = p/(p-1)``."""
    if not 1.0 < p < math.inf:
        raise ValueError(f"p must lie in (1, inf), got {p}")
    p_dual = p / (p - 1.0)
    return 2.0 * max(p, p_dual) - 1.0 < n
