"""The model module contains the nonlinear ingredients of the coupled
Navier-Stokes / Allen-Cahn system: the potential, the physical constants, the
trilinear forms, the coupling operator and the energies.

"""

from dataclasses import dataclass, field
from functools import cached_property

from numpy import abs as np_abs, asarray, isfinite, ndim
from numpy.polynomial import Polynomial

from .spectral import (
    AREA,
    SolenoidalVector,
    SpectralScalar,
    _from_physical,
    _to_physical,
    apply_A_gamma,
    exact_integral,
    gradient,
    leray_project,
    norm_H1,
    norm_L2,
    pointwise,
)
from .utils import check_positive


def _real_roots(poly):
    if poly.degree() < 1:
        return asarray([])
    roots = poly.roots()
    keep = np_abs(roots.imag) <= 1e-10 * (1.0 + np_abs(roots))
    return roots[keep].real


def _polynomial_min(poly):
    """Global minimum over the real line of a polynomial bounded below."""
    candidates = _real_roots(poly.deriv())
    if candidates.size == 0:
        return float(poly.coef[0])
    return float(poly(candidates).min())


class PotentialSpec:
    """Polynomial nonlinearity :math:`f` of the phase equation.

    Parameters
    ----------
    coefficients: array_like, optional
        coefficients of :math:`f(r)` in increasing powers of r. The default
        ``[0, -1, 0, 1]`` is the double-well :math:`f(r) = r^3 - r`.
    constant: float, optional
        :math:`F(0)`, the constant of the primitive :math:`F(r) = F(0) +
        \\int_0^r f`. The default 1/4 gives :math:`F(r) = (r^2 - 1)^2 / 4`.

    Notes
    -----
    The leading coefficient must be positive and the degree odd, so that
    :math:`f'(r) > 0` for large :math:`|r|` and :math:`F` is bounded below.

    """

    def __init__(self, coefficients=(0.0, -1.0, 0.0, 1.0), constant=0.25):
        coef = asarray(coefficients, dtype=float)
        if coef.ndim != 1 or coef.size == 0 or not isfinite(coef).all():
            raise ValueError(
                f"potential coefficients must be a finite 1D sequence, got "
                f"{coefficients}"
            )
        self.f = Polynomial(coef).trim()
        if self.f.degree() % 2 == 0 or self.f.coef[-1] <= 0:
            raise ValueError(
                f"potential must have odd degree and a positive leading "
                f"coefficient, got degree {self.f.degree()} with leading "
                f"coefficient {self.f.coef[-1]}"
            )
        self.constant = float(constant)
        self.F = self.f.integ(k=[self.constant])
        self.f_prime = self.f.deriv()

    @classmethod
    def double_well(cls):
        return cls()

    @property
    def coefficients(self):
        return self.f.coef.copy()

    @property
    def degree(self):
        return self.f.degree()

    @cached_property
    def min_fprime(self):
        """Infimum of :math:`f'` over the real line."""
        return _polynomial_min(self.f_prime)

    def __repr__(self):
        return (
            f"PotentialSpec(coefficients={self.f.coef.tolist()}, "
            f"constant={self.constant})"
        )


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Physical constants of the model.

    Parameters
    ----------
    nu1: float, optional
        kinematic viscosity :math:`\\nu_1`.
    nu2: float, optional
        interface parameter :math:`\\nu_2`, at most ``alpha``.
    alpha: float, optional
        interaction parameter :math:`\\alpha`.
    capK: float, optional
        capillarity coefficient :math:`\\mathcal{K}`.
    gamma: float, optional
        shift :math:`\\gamma` of the Laplacian.
    potential: PotentialSpec, optional
        the nonlinearity; the double-well by default.
    forcing: SolenoidalVector, optional
        time-constant body force g; None means g = 0.
    c_F_gamma: float, optional
        lower-bound constant :math:`C_{F_\\gamma}`. Computed as
        :math:`-\\min F_\\gamma + 10^{-12}` when not given.

    Notes
    -----
    Construction checks :math:`\\nu_2 \\leq \\alpha`, the slope condition
    :math:`\\min f' \\geq -1/(2\\alpha)` and :math:`F_\\gamma + C_{F_\\gamma}
    \\geq 0`.

    """

    nu1: float = 1.0
    nu2: float = 0.1
    alpha: float = 0.5
    capK: float = 1.0
    gamma: float = 1.0
    potential: PotentialSpec = field(default_factory=PotentialSpec)
    forcing: SolenoidalVector = None
    c_F_gamma: float = None

    def __post_init__(self):
        check_positive(
            nu1=self.nu1,
            nu2=self.nu2,
            alpha=self.alpha,
            capK=self.capK,
            gamma=self.gamma,
        )
        if self.nu2 > self.alpha:
            raise ValueError(
                f"nu2 <= alpha violated: nu2 = {self.nu2:g} > alpha = {self.alpha:g}"
            )
        bound = -1.0 / (2.0 * self.alpha)
        if self.potential.min_fprime < bound:
            raise ValueError(
                f"potential slope condition violated: min f'(r) = "
                f"{self.potential.min_fprime:g} < -1/(2 alpha) = {bound:g}"
            )
        if self.forcing is not None and not isinstance(self.forcing, SolenoidalVector):
            raise TypeError(
                f"forcing must be a SolenoidalVector or None, got "
                f"{type(self.forcing).__name__}"
            )
        floor = -_polynomial_min(self.F_gamma)
        if self.c_F_gamma is None:
            object.__setattr__(self, "c_F_gamma", floor + 1e-12)
        elif self.c_F_gamma < floor:
            raise ValueError(
                f"c_F_gamma = {self.c_F_gamma:g} is too small: F_gamma + c_F_gamma "
                f"must be nonnegative, which requires c_F_gamma >= {floor:g}"
            )

    @cached_property
    def shift(self):
        """:math:`\\nu_2 \\gamma / \\alpha`."""
        return self.nu2 * self.gamma / self.alpha

    @cached_property
    def f_gamma(self):
        """:math:`f_\\gamma(r) = f(r) - \\alpha^{-1} \\nu_2 \\gamma r`."""
        return self.potential.f - Polynomial([0.0, self.shift])

    @cached_property
    def F_gamma(self):
        """:math:`F_\\gamma(r) = F(r) - \\alpha^{-1} \\nu_2 \\gamma r^2 / 2`."""
        return self.potential.F - Polynomial([0.0, 0.0, self.shift / 2.0])

    def forcing_on(self, grid):
        if self.forcing is None:
            return SolenoidalVector.zeros(grid)
        if self.forcing.grid != grid:
            raise ValueError(f"forcing grid {self.forcing.grid} does not match {grid}")
        return self.forcing

    def g_inf(self):
        """:math:`\\|g\\|_\\infty = |g|_{L^2}` for the time-constant forcing."""
        return 0.0 if self.forcing is None else float(norm_L2(self.forcing))


def _potential_of(params):
    if params is None:
        return PotentialSpec()
    if isinstance(params, ModelParams):
        return params.potential
    return params


def _apply_polynomial(poly, phi):
    if isinstance(phi, SpectralScalar):
        return pointwise(poly, phi, max(poly.degree(), 1))
    value = poly(phi)
    return float(value) if ndim(value) == 0 else value


def eval_f(phi, params=None):
    """Evaluate the nonlinearity :math:`f`.

    Parameters
    ----------
    phi: float, numpy.ndarray or SpectralScalar
        argument. Fields are evaluated on a grid fine enough that the
        truncated result is exact.
    params: ModelParams or PotentialSpec, optional
        source of the potential; the double-well when omitted.

    Returns
    -------
    float, numpy.ndarray or SpectralScalar of the same kind as ``phi``.

    Examples
    --------
    >>> eval_f(2.0)
    6.0

    """
    return _apply_polynomial(_potential_of(params).f, phi)


def eval_f_gamma(phi, params):
    """Evaluate :math:`f_\\gamma(r) = f(r) - \\alpha^{-1}\\nu_2\\gamma r`."""
    return _apply_polynomial(params.f_gamma, phi)


def eval_F_gamma(phi, params):
    """Evaluate the primitive :math:`F_\\gamma` pointwise on scalars or arrays."""
    return _apply_polynomial(params.F_gamma, phi)


def F_gamma_integral(phi, params):
    """Exact integral :math:`\\mathcal{F}_\\gamma(\\phi) = \\int_\\Omega
    F_\\gamma(\\phi(x)) dx`.

    Parameters
    ----------
    phi: SpectralScalar
        the phase field.
    params: ModelParams
        model constants.

    Returns
    -------
    float

    """
    poly = params.F_gamma
    return exact_integral(poly, [phi], poly.degree())


def free_energy(phi, params):
    """Free energy :math:`\\int_\\Omega \\frac{\\nu_2}{2} |\\nabla \\phi|^2
    + \\alpha F(\\phi) dx`."""
    poly = params.potential.F
    return 0.5 * params.nu2 * norm_H1(phi) ** 2 + params.alpha * exact_integral(
        poly, [phi], poly.degree()
    )


def chemical_potential(phi, params):
    """Chemical potential
    :math:`\\mu = \\nu_2 A_\\gamma \\phi + \\alpha f_\\gamma(\\phi)`.

    Parameters
    ----------
    phi: SpectralScalar
        the phase field.
    params: ModelParams
        model constants.

    Returns
    -------
    SpectralScalar

    Examples
    --------
    >>> mu = chemical_potential(phi, ModelParams())

    """
    return apply_A_gamma(phi, params.gamma) * params.nu2 + eval_f_gamma(
        phi, params
    ) * params.alpha


def _check_grids(*fields):
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise ValueError(f"grid mismatch: {grid} vs {f.grid}")
    return grid


def _advection_values(u, phi, shape):
    """Grid values of :math:`(u \\cdot \\nabla) \\phi` on a refined grid."""
    grid = phi.grid
    dx, dy = gradient(phi)
    return _to_physical(u.ux.coeffs, grid, shape) * _to_physical(
        dx.coeffs, grid, shape
    ) + _to_physical(u.uy.coeffs, grid, shape) * _to_physical(dy.coeffs, grid, shape)


def b0(u, v, w):
    """Trilinear form :math:`b_0(u, v, w) = \\int_\\Omega [(u \\cdot \\nabla) v]
    \\cdot w \\, dx`, integrated exactly.

    Notes
    -----
    For divergence-free u the form is skew-symmetric in its last two arguments,
    so :math:`b_0(u, v, v) = 0` up to round-off.

    """
    grid = _check_grids(u.ux, v.ux, w.ux)
    shape = grid.exact_shape(3, truncate=False)
    total = 0.0
    for vi, wi in ((v.ux, w.ux), (v.uy, w.uy)):
        values = _advection_values(u, vi, shape) * _to_physical(wi.coeffs, grid, shape)
        total += values.mean()
    return AREA * total


def B0(u, v):
    """Projected advection :math:`B_0(u, v) = P[(u \\cdot \\nabla) v]`."""
    grid = _check_grids(u.ux, v.ux)
    shape = grid.padded_shape
    comps = [
        SpectralScalar._wrap(
            _from_physical(_advection_values(u, vi, shape), grid), grid
        )
        for vi in (v.ux, v.uy)
    ]
    return leray_project(*comps)


def b1(u, phi, psi):
    """Trilinear form :math:`b_1(u, \\phi, \\psi) = \\int_\\Omega [(u \\cdot
    \\nabla) \\phi] \\psi \\, dx`, integrated exactly."""
    grid = _check_grids(u.ux, phi, psi)
    shape = grid.exact_shape(3, truncate=False)
    return AREA * (
        _advection_values(u, phi, shape) * _to_physical(psi.coeffs, grid, shape)
    ).mean()


def B1(u, phi):
    """Advection of the phase field :math:`B_1(u, \\phi) = (u \\cdot \\nabla)
    \\phi`, truncated to the grid."""
    grid = _check_grids(u.ux, phi)
    values = _advection_values(u, phi, grid.padded_shape)
    return SpectralScalar._wrap(_from_physical(values, grid), grid)


def R0(mu, phi):
    """Coupling term :math:`R_0(\\mu, \\phi) = P(\\mu \\nabla \\phi)`.

    Notes
    -----
    For every divergence-free w, :math:`(R_0(\\mu, \\phi), w) = b_1(w, \\phi,
    \\mu)`.

    """
    grid = _check_grids(mu, phi)
    shape = grid.padded_shape
    mu_values = _to_physical(mu.coeffs, grid, shape)
    comps = [
        SpectralScalar._wrap(
            _from_physical(mu_values * _to_physical(d.coeffs, grid, shape), grid),
            grid,
        )
        for d in gradient(phi)
    ]
    return leray_project(*comps)


def b1_potential(u, phi, params):
    """:math:`b_1(u, \\phi, f_\\gamma(\\phi))` with the untruncated
    nonlinearity, integrated exactly.

    Notes
    -----
    :math:`f_\\gamma(\\phi) \\nabla \\phi = \\nabla F_\\gamma(\\phi)` is a
    gradient, so the value vanishes for divergence-free u up to round-off.

    """
    grid = _check_grids(u.ux, phi)
    poly = params.f_gamma
    shape = grid.exact_shape(poly.degree() + 2, truncate=False)
    phi_values = _to_physical(phi.coeffs, grid, shape)
    return AREA * (_advection_values(u, phi, shape) * poly(phi_values)).mean()


def coupling_potential(mu, phi, params, coupling="chemical"):
    """Potential that multiplies :math:`\\nabla \\phi` in the velocity coupling:
    ``mu`` itself for ``"chemical"``, :math:`\\nu_2 A_\\gamma \\phi` for
    ``"capillary"``."""
    if coupling == "chemical":
        return mu
    if coupling == "capillary":
        return apply_A_gamma(phi, params.gamma) * params.nu2
    raise ValueError(f"coupling must be 'chemical' or 'capillary', got {coupling!r}")


def coupling_term(mu, phi, params, coupling="chemical"):
    """Velocity coupling of the scheme.

    ``"chemical"`` uses :math:`R_0(\\mu, \\phi)`; ``"capillary"`` uses
    :math:`R_0(\\nu_2 A_\\gamma \\phi, \\phi)`. The two differ by
    :math:`P(\\alpha f_\\gamma(\\phi) \\nabla \\phi)`, a gradient in the
    continuum.
    """
    return R0(coupling_potential(mu, phi, params, coupling), phi)
