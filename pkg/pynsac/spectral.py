"""The spectral module contains the periodic-box Fourier representation of the
fields and the linear operators, projections, inner products and norms that
every other module consumes.

Fields are stored as truncated Fourier coefficients on the square
:math:`[0, 2\\pi)^2`, using the normalisation

.. math:: f(x) = \\sum_{\\kappa} \\hat{f}(\\kappa) e^{i \\kappa \\cdot x},

in numpy FFT order (axis 0 is :math:`\\kappa_2`, axis 1 is :math:`\\kappa_1`).
Nyquist modes are always zero and the coefficients are exactly Hermitian.

"""

from dataclasses import dataclass
from functools import cached_property
from math import ceil

from numpy import (
    abs as np_abs,
    arange,
    array_equal,
    asarray,
    conj,
    cos,
    ix_,
    meshgrid,
    pi,
    roll,
    sin,
    sqrt,
    vdot,
    where,
    zeros,
)
from numpy.fft import fft2, fftfreq, ifft2
from xarray import DataArray

from .utils import check_positive

DOMAIN_LENGTH = 2 * pi
AREA = DOMAIN_LENGTH**2

# fractional powers of A_gamma that the model and the diagnostics use
A_GAMMA_POWERS = (-1.0, -0.5, 0.5, 1.0, 1.5, 2.0)


@dataclass(frozen=True)
class GridSpec:
    """Mode counts and dealiasing ratio of the periodic square.

    Parameters
    ----------
    nx: int, optional
        even number of modes along x (:math:`\\kappa_1`), at least 4.
    ny: int, optional
        even number of modes along y (:math:`\\kappa_2`), at least 4.
    pad_factor: float, optional
        zero-padding ratio used for products, at least 2 so that products of
        up to three fields are exact after truncation.

    """

    nx: int = 32
    ny: int = 32
    pad_factor: float = 2.0

    def __post_init__(self):
        for name in ("nx", "ny"):
            n = getattr(self, name)
            if int(n) != n or n < 4 or n % 2:
                raise ValueError(f"{name} must be an even integer >= 4, got {n}")
        self.check_arity(3)
        for n in (self.nx, self.ny):
            m = self.pad_factor * n
            if m != int(m) or int(m) % 2:
                raise ValueError(
                    f"pad_factor * n must be an even integer, got "
                    f"{self.pad_factor} * {n}"
                )

    @property
    def shape(self):
        return self.ny, self.nx

    @property
    def padded_shape(self):
        return int(self.pad_factor * self.ny), int(self.pad_factor * self.nx)

    @cached_property
    def kx_1d(self):
        return fftfreq(self.nx, 1.0 / self.nx)

    @cached_property
    def ky_1d(self):
        return fftfreq(self.ny, 1.0 / self.ny)

    @cached_property
    def kx(self):
        return meshgrid(self.kx_1d, self.ky_1d)[0]

    @cached_property
    def ky(self):
        return meshgrid(self.kx_1d, self.ky_1d)[1]

    @cached_property
    def k2(self):
        """Squared wavenumber magnitude :math:`|\\kappa|^2`."""
        return self.kx**2 + self.ky**2

    @cached_property
    def k2_inv(self):
        """:math:`1/|\\kappa|^2`, with 0 on the mean mode."""
        k2 = self.k2.copy()
        k2[0, 0] = 1.0
        inv = 1.0 / k2
        inv[0, 0] = 0.0
        return inv

    @cached_property
    def band(self):
        """Real mask of the retained modes; zero on the Nyquist rows/columns."""
        keep = (np_abs(self.kx) < self.nx // 2) & (np_abs(self.ky) < self.ny // 2)
        return keep.astype(float)

    def nodes(self):
        """Physical grid nodes ``(X, Y)`` with shape ``(ny, nx)``."""
        x = arange(self.nx) * DOMAIN_LENGTH / self.nx
        y = arange(self.ny) * DOMAIN_LENGTH / self.ny
        return meshgrid(x, y)

    def exact_shape(self, degree, truncate=True):
        """Grid shape on which a degree-``degree`` product of fields is exact.

        With ``truncate`` the product is exact after truncation back to the
        retained band; otherwise its integral over the box is exact.
        """
        pad = max(ceil((degree + 1) / 2) if truncate else ceil(degree / 2), 1)
        return pad * self.ny, pad * self.nx

    def check_arity(self, arity):
        if self.pad_factor < (arity + 1) / 2:
            raise ValueError(
                f"pad_factor {self.pad_factor} is too small for exact products of "
                f"{arity} fields, at least {(arity + 1) / 2} is needed"
            )


def _reflect(coeffs):
    """Coefficients reordered so that entry kappa holds the entry at -kappa."""
    return roll(coeffs[::-1, ::-1], 1, axis=(0, 1))


def _hermitize(coeffs):
    return (coeffs + conj(_reflect(coeffs))) / 2


def _to_physical(coeffs, grid, shape=None):
    """Values of a coefficient array on the native or a refined tensor grid."""
    if shape is None or tuple(shape) == grid.shape:
        return (ifft2(coeffs) * (grid.nx * grid.ny)).real
    my, mx = shape
    big = zeros(shape, dtype=complex)
    big[ix_(grid.ky_1d.astype(int) % my, grid.kx_1d.astype(int) % mx)] = coeffs
    return (ifft2(big) * (mx * my)).real


def _from_physical(values, grid):
    """Truncated, Hermitian coefficients of real grid values."""
    my, mx = values.shape
    coeffs = fft2(values) / (mx * my)
    if (my, mx) != grid.shape:
        coeffs = coeffs[ix_(grid.ky_1d.astype(int) % my, grid.kx_1d.astype(int) % mx)]
    return _hermitize(coeffs * grid.band)


class SpectralScalar:
    """Real scalar field stored as truncated Fourier coefficients.

    Parameters
    ----------
    coeffs: numpy.ndarray
        complex coefficients of shape ``grid.shape`` in numpy FFT order.
    grid: GridSpec
        the grid the coefficients live on.

    Notes
    -----
    The coefficient array is copied, Nyquist modes are zeroed and Hermitian
    symmetry is enforced, so every instance represents a real field. Instances
    are immutable.

    """

    __slots__ = ("coeffs", "grid")
    __array_ufunc__ = None

    def __init__(self, coeffs, grid):
        coeffs = asarray(coeffs, dtype=complex)
        if coeffs.shape != grid.shape:
            raise ValueError(
                f"coefficient shape {coeffs.shape} does not match grid {grid.shape}"
            )
        coeffs = _hermitize(coeffs * grid.band)
        coeffs.flags.writeable = False
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "grid", grid)

    @classmethod
    def _wrap(cls, coeffs, grid):
        """Wrap coefficients that are already truncated and Hermitian."""
        obj = cls.__new__(cls)
        coeffs.flags.writeable = False
        object.__setattr__(obj, "coeffs", coeffs)
        object.__setattr__(obj, "grid", grid)
        return obj

    def __setattr__(self, name, value):
        raise AttributeError("SpectralScalar is immutable")

    def __reduce__(self):
        return _rebuild_scalar, (self.coeffs.copy(), self.grid)

    @classmethod
    def zeros(cls, grid):
        return cls._wrap(zeros(grid.shape, dtype=complex), grid)

    @classmethod
    def constant(cls, value, grid):
        coeffs = zeros(grid.shape, dtype=complex)
        coeffs[0, 0] = float(value)
        return cls._wrap(coeffs, grid)

    def _check(self, other):
        if other.grid != self.grid:
            raise ValueError(f"grid mismatch: {self.grid} vs {other.grid}")

    def __add__(self, other):
        self._check(other)
        return SpectralScalar._wrap(self.coeffs + other.coeffs, self.grid)

    def __sub__(self, other):
        self._check(other)
        return SpectralScalar._wrap(self.coeffs - other.coeffs, self.grid)

    def __neg__(self):
        return SpectralScalar._wrap(-self.coeffs, self.grid)

    def __mul__(self, scalar):
        return SpectralScalar._wrap(self.coeffs * float(scalar), self.grid)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return SpectralScalar._wrap(self.coeffs / float(scalar), self.grid)

    def scaled(self, symbol):
        """Multiply every coefficient by a real, even symbol array."""
        return SpectralScalar._wrap(self.coeffs * symbol, self.grid)

    def mean(self):
        return self.coeffs[0, 0].real

    def is_hermitian(self):
        return array_equal(self.coeffs, conj(_reflect(self.coeffs)))

    def __repr__(self):
        return f"SpectralScalar(grid={self.grid}, L2={norm_L2(self):.6g})"


def _rebuild_scalar(coeffs, grid):
    return SpectralScalar._wrap(coeffs, grid)


@dataclass(frozen=True)
class SolenoidalVector:
    """Divergence-free, mean-zero velocity field.

    Parameters
    ----------
    ux: SpectralScalar
        x-component.
    uy: SpectralScalar
        y-component.

    Notes
    -----
    Construction checks :math:`\\max_\\kappa |\\kappa \\cdot \\hat{u}(\\kappa)|
    \\leq 10^{-12} \\|u\\|` and a vanishing mean. Use :func:`leray_project` to
    build one from an arbitrary pair of scalars. Results of the projection and
    of arithmetic between solenoidal fields are not checked again.

    """

    ux: SpectralScalar
    uy: SpectralScalar
    __array_ufunc__ = None

    def __post_init__(self):
        self.ux._check(self.uy)
        scale = sqrt(AREA * (self.grid.k2 * self._energy_density()).sum()) + 1e-300
        if divergence_defect(self) > 1e-12 * scale:
            raise ValueError(
                f"velocity is not divergence-free: max |kappa . u| = "
                f"{divergence_defect(self):.3e}"
            )
        mean = np_abs(self.ux.coeffs[0, 0]) + np_abs(self.uy.coeffs[0, 0])
        if mean > 1e-12 * (sqrt(AREA * self._energy_density().sum()) + 1e-300):
            raise ValueError(f"velocity must have zero mean, got |mean| = {mean:.3e}")

    def _energy_density(self):
        return np_abs(self.ux.coeffs) ** 2 + np_abs(self.uy.coeffs) ** 2

    @property
    def grid(self):
        return self.ux.grid

    @classmethod
    def _wrap(cls, ux, uy):
        """Pair components that are solenoidal by construction, without the check.

        Linear combinations and even symbols keep both invariants mode by mode,
        while the defect of a small difference of large fields is only small
        relative to the operands.
        """
        obj = object.__new__(cls)
        object.__setattr__(obj, "ux", ux)
        object.__setattr__(obj, "uy", uy)
        return obj

    @classmethod
    def zeros(cls, grid):
        return cls._wrap(SpectralScalar.zeros(grid), SpectralScalar.zeros(grid))

    def __add__(self, other):
        return SolenoidalVector._wrap(self.ux + other.ux, self.uy + other.uy)

    def __sub__(self, other):
        return SolenoidalVector._wrap(self.ux - other.ux, self.uy - other.uy)

    def __neg__(self):
        return SolenoidalVector._wrap(-self.ux, -self.uy)

    def __mul__(self, scalar):
        return SolenoidalVector._wrap(self.ux * scalar, self.uy * scalar)

    __rmul__ = __mul__

    def scaled(self, symbol):
        return SolenoidalVector._wrap(self.ux.scaled(symbol), self.uy.scaled(symbol))

    def is_hermitian(self):
        return self.ux.is_hermitian() and self.uy.is_hermitian()


@dataclass(frozen=True)
class State:
    """A point :math:`(u, \\phi)` of the phase space."""

    u: SolenoidalVector
    phi: SpectralScalar
    __array_ufunc__ = None

    def __post_init__(self):
        if self.u.grid != self.phi.grid:
            raise ValueError("u and phi must share the same GridSpec")

    @property
    def grid(self):
        return self.phi.grid

    @classmethod
    def zeros(cls, grid):
        return cls(SolenoidalVector.zeros(grid), SpectralScalar.zeros(grid))

    def __add__(self, other):
        return State(self.u + other.u, self.phi + other.phi)

    def __sub__(self, other):
        return State(self.u - other.u, self.phi - other.phi)

    def __mul__(self, scalar):
        return State(self.u * scalar, self.phi * scalar)

    __rmul__ = __mul__


def divergence_defect(u):
    """Largest :math:`|\\kappa \\cdot \\hat{u}(\\kappa)|` over all modes."""
    grid = u.ux.grid
    return np_abs(grid.kx * u.ux.coeffs + grid.ky * u.uy.coeffs).max()


def to_grid(f, shape=None):
    """Evaluate a scalar field on the grid nodes.

    Parameters
    ----------
    f: SpectralScalar
        the field.
    shape: tuple, optional
        refined ``(my, mx)`` grid; defaults to the native grid.

    Returns
    -------
    xarray.DataArray with dimensions ``("y", "x")`` and node coordinates.

    Examples
    --------
    >>> values = to_grid(phi)

    """
    grid = f.grid
    values = _to_physical(f.coeffs, grid, shape)
    my, mx = values.shape
    return DataArray(
        values,
        coords=[
            ("y", arange(my) * DOMAIN_LENGTH / my),
            ("x", arange(mx) * DOMAIN_LENGTH / mx),
        ],
        name="values",
    )


def from_grid(values, grid):
    """Truncated coefficients of real values given on the native grid nodes.

    Parameters
    ----------
    values: numpy.ndarray or xarray.DataArray
        real values of shape ``grid.shape``.
    grid: GridSpec
        target grid.

    Returns
    -------
    SpectralScalar with Nyquist modes zeroed and exact Hermitian symmetry.

    """
    if isinstance(values, DataArray):
        values = values.values
    values = asarray(values, dtype=float)
    if values.shape != grid.shape:
        raise ValueError(
            f"grid values of shape {values.shape} do not match grid {grid.shape}"
        )
    return SpectralScalar._wrap(_from_physical(values, grid), grid)


def apply_A_gamma(phi, gamma):
    """Shifted Laplacian :math:`A_\\gamma \\phi = -\\Delta \\phi + \\gamma \\phi`.

    Parameters
    ----------
    phi: SpectralScalar
        the field.
    gamma: float
        positive shift.

    Returns
    -------
    SpectralScalar

    Examples
    --------
    >>> a_phi = apply_A_gamma(phi, gamma=1.0)

    """
    check_positive(gamma=gamma)
    return phi.scaled(phi.grid.k2 + gamma)


def apply_A_gamma_pow(phi, gamma, s):
    """Fractional power :math:`A_\\gamma^s \\phi`, multiplier
    :math:`(|\\kappa|^2 + \\gamma)^s`, for ``s`` in -1, -1/2, 1/2, 1, 3/2, 2."""
    check_positive(gamma=gamma)
    if float(s) not in A_GAMMA_POWERS:
        raise ValueError(f"s must be one of {A_GAMMA_POWERS}, got {s}")
    return phi.scaled((phi.grid.k2 + gamma) ** float(s))


def apply_A(u):
    """Stokes operator :math:`Au = -P\\Delta u`; on the periodic box the
    multiplier is :math:`|\\kappa|^2` for each component."""
    return u.scaled(u.grid.k2)


def apply_A_pow(u, s):
    """Power :math:`A^s u` for ``s`` in -1, -1/2, 1/2, 1; the mean mode is zero."""
    grid = u.grid
    if float(s) not in (-1.0, -0.5, 0.5, 1.0):
        raise ValueError(f"s must be one of -1, -0.5, 0.5, 1, got {s}")
    if s < 0:
        return u.scaled(grid.k2_inv ** (-float(s)))
    return u.scaled(grid.k2 ** float(s))


def gradient(phi):
    """Spectral gradient :math:`(\\partial_x \\phi, \\partial_y \\phi)`."""
    grid = phi.grid
    return (
        SpectralScalar._wrap(phi.coeffs * (1j * grid.kx), grid),
        SpectralScalar._wrap(phi.coeffs * (1j * grid.ky), grid),
    )


def divergence(vx, vy):
    """Spectral divergence of a pair of scalar components."""
    vx._check(vy)
    grid = vx.grid
    return SpectralScalar._wrap(
        vx.coeffs * (1j * grid.kx) + vy.coeffs * (1j * grid.ky), grid
    )


def leray_project(vx, vy):
    """Leray projection of a vector field onto divergence-free, mean-zero fields.

    Parameters
    ----------
    vx: SpectralScalar
        x-component.
    vy: SpectralScalar
        y-component.

    Returns
    -------
    SolenoidalVector

    Notes
    -----
    For every :math:`\\kappa \\neq 0`

    .. math:: \\hat{P v}(\\kappa) = \\hat{v}(\\kappa) - \\kappa
        \\frac{\\kappa \\cdot \\hat{v}(\\kappa)}{|\\kappa|^2},

    and the mean mode is set to zero.

    """
    vx._check(vy)
    grid = vx.grid
    dot = (grid.kx * vx.coeffs + grid.ky * vy.coeffs) * grid.k2_inv
    px = vx.coeffs - grid.kx * dot
    py = vy.coeffs - grid.ky * dot
    px[0, 0] = 0.0
    py[0, 0] = 0.0
    return SolenoidalVector._wrap(
        SpectralScalar._wrap(px, grid), SpectralScalar._wrap(py, grid)
    )


def _components(f):
    if isinstance(f, SolenoidalVector):
        return f.ux.coeffs, f.uy.coeffs
    return (f.coeffs,)


def _weighted_sum(f, weight=None):
    total = 0.0
    for c in _components(f):
        density = np_abs(c) ** 2
        if weight is not None:
            density = density * weight
        total += density.sum()
    return AREA * total


def inner_L2(a, b):
    """:math:`L^2` inner product of two scalar or two vector fields, evaluated
    with Parseval's identity."""
    if type(a) is not type(b):
        raise TypeError(f"cannot take the inner product of {type(a)} and {type(b)}")
    if a.grid != b.grid:
        raise ValueError(f"grid mismatch: {a.grid} vs {b.grid}")
    total = 0.0
    for ca, cb in zip(_components(a), _components(b)):
        total += vdot(cb, ca).real
    return AREA * total


def norm_L2(f):
    """:math:`|f|_{L^2}` of a scalar or vector field."""
    return sqrt(_weighted_sum(f))


def norm_H1(f):
    """:math:`\\|f\\| = |\\nabla f|_{L^2}`, the norm of V (a seminorm on scalars)."""
    return sqrt(_weighted_sum(f, f.grid.k2))


def norm_gamma(phi, gamma):
    """:math:`\\|\\phi\\|_\\gamma^2 =
    |\\nabla \\phi|^2_{L^2} + \\gamma |\\phi|^2_{L^2}`."""
    check_positive(gamma=gamma)
    return sqrt(_weighted_sum(phi, phi.grid.k2 + gamma))


def norm_Y(state, params):
    """Phase-space norm

    .. math:: \\|(u, \\phi)\\|_Y^2 = \\mathcal{K}^{-1} |u|^2_{L^2}
        + \\nu_2 \\|\\phi\\|_\\gamma^2.

    Parameters
    ----------
    state: State
        the point.
    params: pynsac.model.ModelParams
        provides ``capK``, ``nu2`` and ``gamma``.

    """
    check_positive(capK=params.capK, nu2=params.nu2, gamma=params.gamma)
    return sqrt(
        _weighted_sum(state.u) / params.capK
        + params.nu2 * _weighted_sum(state.phi, state.grid.k2 + params.gamma)
    )


def norm_V(state, params):
    """Regularity norm
    :math:`\\|(u, \\phi)\\|_V^2 = \\|u\\|^2 + |A_\\gamma \\phi|^2_{L^2}`."""
    check_positive(gamma=params.gamma)
    grid = state.grid
    return sqrt(
        _weighted_sum(state.u, grid.k2)
        + _weighted_sum(state.phi, (grid.k2 + params.gamma) ** 2)
    )


def dual_norm_Vprime(v):
    """:math:`|A^{-1/2} v|_{L^2}`, the norm of V'."""
    return sqrt(_weighted_sum(v, v.grid.k2_inv))


def dual_norm_DAgamma_prime(h, gamma):
    """:math:`|A_\\gamma^{-1} h|_{L^2}`, the norm of the dual of D(A_gamma)."""
    check_positive(gamma=gamma)
    return sqrt(_weighted_sum(h, 1.0 / (h.grid.k2 + gamma) ** 2))


def y_embedding(state, params):
    """Real vector whose Euclidean norm is the Y-norm of ``state``.

    Used to evaluate many pairwise Y-distances at once.
    """
    grid = state.grid
    wu = sqrt(AREA / params.capK)
    wphi = sqrt(AREA * params.nu2 * (grid.k2 + params.gamma))
    parts = [
        state.u.ux.coeffs * wu,
        state.u.uy.coeffs * wu,
        state.phi.coeffs * wphi,
    ]
    flat = zeros(3 * grid.nx * grid.ny, dtype=complex)
    size = grid.nx * grid.ny
    for i, part in enumerate(parts):
        flat[i * size : (i + 1) * size] = part.ravel()
    return flat.view(float)


def dealiased_product(a, b, c=None):
    """Pointwise product of two or three fields, truncated back to the grid.

    Parameters
    ----------
    a, b: SpectralScalar
        factors.
    c: SpectralScalar, optional
        optional third factor; requires ``pad_factor >= 2``.

    Returns
    -------
    SpectralScalar equal (to round-off) to the truncated convolution of the
    factors' coefficients.

    Examples
    --------
    >>> ab = dealiased_product(a, b)

    """
    factors = [f for f in (a, b, c) if f is not None]
    grid = a.grid
    for f in factors[1:]:
        a._check(f)
    grid.check_arity(len(factors))
    shape = grid.padded_shape
    values = _to_physical(factors[0].coeffs, grid, shape)
    for f in factors[1:]:
        values = values * _to_physical(f.coeffs, grid, shape)
    return SpectralScalar._wrap(_from_physical(values, grid), grid)


def pointwise(func, phi, degree):
    """Apply a polynomial ``func`` of ``degree`` pointwise to ``phi`` on a grid
    fine enough for the truncated result to be exact."""
    grid = phi.grid
    values = _to_physical(phi.coeffs, grid, grid.exact_shape(degree))
    return SpectralScalar._wrap(_from_physical(func(values), grid), grid)


def exact_integral(integrand, fields, degree):
    """Exact integral over the box of a polynomial expression of fields.

    Parameters
    ----------
    integrand: callable
        receives the grid values of ``fields`` (same order) and returns the
        integrand values.
    fields: sequence of SpectralScalar
        fields on a common grid.
    degree: int
        total polynomial degree of the integrand in the fields.

    """
    grid = fields[0].grid
    shape = grid.exact_shape(degree, truncate=False)
    values = [_to_physical(f.coeffs, grid, shape) for f in fields]
    return AREA * integrand(*values).mean()


def taylor_green(grid, amplitude=1.0):
    """Taylor-Green vortex :math:`a(\\sin x \\cos y, -\\cos x \\sin y)`."""
    X, Y = grid.nodes()
    return SolenoidalVector(
        from_grid(amplitude * sin(X) * cos(Y), grid),
        from_grid(-amplitude * cos(X) * sin(Y), grid),
    )


def _low_mode_mask(grid, modes):
    return where(grid.k2 <= modes**2, 1.0, 0.0) * grid.band


def random_scalar(grid, rng, modes=4, amplitude=1.0, zero_mean=False):
    """Random real field supported on the modes :math:`|\\kappa| \\leq` ``modes``.

    Parameters
    ----------
    grid: GridSpec
        target grid.
    rng: numpy.random.Generator
        source of randomness.
    modes: float, optional
        spectral radius of the support.
    amplitude: float, optional
        standard deviation of the real and imaginary parts.
    zero_mean: bool, optional
        if True, the mean mode is zero.

    """
    raw = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    coeffs = amplitude * raw * _low_mode_mask(grid, modes)
    if zero_mean:
        coeffs[0, 0] = 0.0
    return SpectralScalar(coeffs, grid)


def random_solenoidal(grid, rng, modes=4, amplitude=1.0):
    """Random low-mode divergence-free, mean-zero velocity field."""
    return leray_project(
        random_scalar(grid, rng, modes, amplitude),
        random_scalar(grid, rng, modes, amplitude),
    )
