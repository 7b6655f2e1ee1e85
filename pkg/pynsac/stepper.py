"""The stepper module contains the fully implicit Euler scheme, its fixed-point
solver, the trajectory runner and the piecewise interpolants of a trajectory.

"""

import logging
from dataclasses import dataclass, field
from math import floor, isfinite, nan

from numpy import arange, stack
from numpy.polynomial.legendre import leggauss
from pandas import DataFrame
from xarray import Dataset

from .model import (
    B0,
    B1,
    R0,
    chemical_potential,
    coupling_potential,
    coupling_term,
    eval_f_gamma,
)
from .spectral import (
    State,
    apply_A,
    apply_A_gamma,
    dual_norm_DAgamma_prime,
    dual_norm_Vprime,
    norm_Y,
    to_grid,
)
from .utils import check_positive

logger = logging.getLogger(__name__)

COUPLINGS = ("chemical", "capillary")


class _StepFailure:
    """Attributes shared by the solver failures."""

    def _init_failure(self, step, iterations, residual, k):
        self.step = step
        self.iterations = iterations
        self.residual = residual
        self.suggested_k = None if k is None else k / 2
        self.log = None


class NonConvergenceError(_StepFailure, RuntimeError):
    """The fixed-point iteration did not reach ``fp_tol`` within ``max_iter``."""

    def __init__(self, message, step=None, iterations=None, residual=None, k=None):
        super().__init__(message)
        self._init_failure(step, iterations, residual, k)


class DivergenceError(_StepFailure, FloatingPointError):
    """The fixed-point iteration produced a non-finite iterate."""

    def __init__(self, message, step=None, iterations=None, residual=None, k=None):
        super().__init__(message)
        self._init_failure(step, iterations, residual, k)


@dataclass(frozen=True)
class StepperConfig:
    """Settings of the implicit Euler step.

    Parameters
    ----------
    k: float
        time step.
    fp_tol: float, optional
        tolerance on the relative Y-norm increment of the fixed-point iteration.
    max_iter: int, optional
        iteration cap.
    relaxation: float, optional
        relaxation factor in (0, 1]; 1 means plain fixed-point iteration.
    coupling: str, optional
        ``"chemical"`` couples the velocity through :math:`R_0(\\mu, \\phi)`,
        ``"capillary"`` through :math:`R_0(\\nu_2 A_\\gamma \\phi, \\phi)`.

    """

    k: float = 0.01
    fp_tol: float = 1e-11
    max_iter: int = 500
    relaxation: float = 1.0
    coupling: str = "chemical"

    def __post_init__(self):
        check_positive(k=self.k, fp_tol=self.fp_tol)
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError(f"max_iter must be an integer >= 1, got {self.max_iter}")
        if not 0 < self.relaxation <= 1:
            raise ValueError(f"relaxation must lie in (0, 1], got {self.relaxation}")
        if self.coupling not in COUPLINGS:
            raise ValueError(
                f"coupling must be one of {COUPLINGS}, got {self.coupling!r}"
            )


@dataclass
class StepReport:
    """Outcome of one implicit step.

    ``energy_identity_residual`` and ``remainder_margin`` stay NaN unless an
    audit hook fills them.
    """

    iterations: int
    residual: float
    mu: object
    energy_identity_residual: float = nan
    remainder_margin: float = nan


@dataclass
class TrajectoryLog:
    """States of a trajectory, index 0 included, and one report per step."""

    states: list
    reports: list
    params: object
    config: StepperConfig
    t0: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.states) != len(self.reports) + 1:
            raise ValueError(
                f"a log of {len(self.reports)} steps needs {len(self.reports) + 1} "
                f"states, got {len(self.states)}"
            )

    def __len__(self):
        return len(self.states)

    @property
    def n_steps(self):
        return len(self.reports)

    @property
    def times(self):
        return self.t0 + self.config.k * arange(len(self.states))

    def append(self, state, report):
        self.states.append(state)
        self.reports.append(report)

    def to_dataset(self):
        """Grid values of every state as an :class:`xarray.Dataset`.

        Returns
        -------
        xarray.Dataset with variables ``ux``, ``uy``, ``phi`` on the dimensions
        ``("time", "y", "x")``.

        """
        first = to_grid(self.states[0].phi)
        coords = {"time": self.times, "y": first["y"].values, "x": first["x"].values}
        data = {}
        for name, get in (
            ("ux", lambda s: s.u.ux),
            ("uy", lambda s: s.u.uy),
            ("phi", lambda s: s.phi),
        ):
            values = stack([to_grid(get(s)).values for s in self.states])
            data[name] = (("time", "y", "x"), values)
        return Dataset(data, coords=coords, attrs={"k": self.config.k})


def _inverse_symbols(grid, params, k):
    inv_u = 1.0 / (1.0 + params.nu1 * k * grid.k2)
    inv_phi = 1.0 / (1.0 + params.nu2 * k * (grid.k2 + params.gamma))
    return inv_u, inv_phi


def _relative(increment, scale):
    return increment / scale if scale > 0 else increment


def implicit_step(prev, params, cfg, step=None):
    """Advance one step of the fully implicit Euler scheme.

    Parameters
    ----------
    prev: State
        state at the previous time level.
    params: ModelParams
        model constants and forcing.
    cfg: StepperConfig
        step size and solver settings.
    step: int, optional
        index of the step, used in log and error messages.

    Returns
    -------
    tuple of the new State and its StepReport.

    Notes
    -----
    The new state solves

    .. math::
        u + \\nu_1 k A u + k B_0(u, u) - \\mathcal{K} k R_0(\\mu, \\phi)
        = \\tilde{u} + k g

        \\phi + k \\mu + k B_1(u, \\phi) = \\tilde{\\phi}, \\quad
        \\mu = \\nu_2 A_\\gamma \\phi + \\alpha f_\\gamma(\\phi)

    by Gauss-Seidel fixed-point iteration: the phase field is updated first,
    then the velocity, each by an exact diagonal solve per mode. The previous
    state is the initial iterate.

    Examples
    --------
    >>> new, report = implicit_step(state, ModelParams(), StepperConfig(k=0.01))

    """
    k = cfg.k
    inv_u, inv_phi = _inverse_symbols(prev.grid, params, k)
    rhs_u = prev.u + params.forcing_on(prev.grid) * k
    omega = cfg.relaxation
    u, phi = prev.u, prev.phi
    residual = nan

    for iteration in range(1, cfg.max_iter + 1):
        phi_new = (
            prev.phi
            - eval_f_gamma(phi, params) * (k * params.alpha)
            - B1(u, phi) * k
        ).scaled(inv_phi)
        if omega != 1.0:
            phi_new = phi_new * omega + phi * (1.0 - omega)
        mu = chemical_potential(phi_new, params)
        u_new = (
            rhs_u
            - B0(u, u) * k
            + coupling_term(mu, phi_new, params, cfg.coupling) * (params.capK * k)
        ).scaled(inv_u)
        if omega != 1.0:
            u_new = u_new * omega + u * (1.0 - omega)

        new = State(u_new, phi_new)
        increment = norm_Y(State(u_new - u, phi_new - phi), params)
        if not isfinite(increment):
            raise DivergenceError(
                f"non-finite iterate at step {step} after {iteration} iterations; "
                f"reduce k below {k:g}",
                step=step,
                iterations=iteration,
                residual=increment,
                k=k,
            )
        residual = _relative(increment, norm_Y(new, params))
        u, phi = u_new, phi_new
        if residual <= cfg.fp_tol:
            report = StepReport(
                iterations=iteration,
                residual=residual,
                mu=chemical_potential(phi, params),
            )
            logger.debug(
                "step %s converged in %d iterations, residual %.3e",
                step,
                iteration,
                residual,
            )
            return new, report

    raise NonConvergenceError(
        f"fixed-point iteration did not converge at step {step}: residual "
        f"{residual:.3e} > fp_tol {cfg.fp_tol:g} after {cfg.max_iter} iterations; "
        f"the step map is a contraction only for small k, try k = {k / 2:g}",
        step=step,
        iterations=cfg.max_iter,
        residual=residual,
        k=k,
    )


def scheme_residual(prev, new, params, cfg):
    """Relative Y-norm defect of a step substituted back into the scheme.

    The defect of each equation is preconditioned by its diagonal solve, i.e.
    the value is :math:`\\|G(x) - x\\|_Y / \\|x\\|_Y` where G is the Jacobi
    version of the fixed-point map and x the new state.
    """
    k = cfg.k
    inv_u, inv_phi = _inverse_symbols(prev.grid, params, k)
    u, phi = new.u, new.phi
    mu = chemical_potential(phi, params)
    phi_map = (
        prev.phi - eval_f_gamma(phi, params) * (k * params.alpha) - B1(u, phi) * k
    ).scaled(inv_phi)
    u_map = (
        prev.u
        + params.forcing_on(prev.grid) * k
        - B0(u, u) * k
        + coupling_term(mu, phi, params, cfg.coupling) * (params.capK * k)
    ).scaled(inv_u)
    defect = norm_Y(State(u_map - u, phi_map - phi), params)
    return _relative(defect, norm_Y(new, params))


def run(initial, n_steps, params, cfg, hook=None):
    """Run the scheme for ``n_steps`` steps.

    Parameters
    ----------
    initial: State
        state at time 0.
    n_steps: int
        number of steps, at least 1.
    params: ModelParams
        model constants.
    cfg: StepperConfig
        solver settings.
    hook: callable, optional
        called as ``hook(n, prev, new, report, params, cfg)`` after each step.

    Returns
    -------
    TrajectoryLog

    Notes
    -----
    A failing step raises with the partial log attached as ``err.log``.

    """
    if int(n_steps) != n_steps or n_steps < 1:
        raise ValueError(f"n_steps must be an integer >= 1, got {n_steps}")
    log = TrajectoryLog([initial], [], params, cfg)
    state = initial
    for n in range(1, int(n_steps) + 1):
        try:
            new, report = implicit_step(state, params, cfg, step=n)
        except (NonConvergenceError, DivergenceError) as err:
            err.log = log
            logger.warning("trajectory stopped at step %d: %s", n, err)
            raise
        if hook is not None:
            hook(n, state, new, report, params, cfg)
        log.append(new, report)
        state = new
    iterations = sum(r.iterations for r in log.reports)
    logger.info(
        "ran %d steps with k = %g, %d fixed-point iterations in total",
        n_steps,
        cfg.k,
        iterations,
    )
    return log


def _locate(log, t, left=False):
    """Interval index n and offset s = (t - nk)/k with s in [-1, 0)."""
    k = log.config.k
    horizon = log.n_steps
    r = (t - log.t0) / k
    m = round(r)
    if abs(r - m) <= 1e-9 * max(1.0, abs(r)):
        r = float(m)
    if left:
        if not 0 < r <= horizon:
            raise ValueError(f"t = {t} outside (0, {horizon * k}]")
        n = int(-floor(-r))
    else:
        if not 0 <= r < horizon:
            raise ValueError(f"t = {t} outside [0, {horizon * k})")
        n = int(floor(r)) + 1
    return n, r - n


def interp_pc(log, t):
    """Piecewise constant interpolant: :math:`\\psi^n` on :math:`[(n-1)k, nk)`."""
    n, _ = _locate(log, t)
    return log.states[n]


def interp_lin(log, t, left=False):
    """Piecewise linear interpolant.

    Parameters
    ----------
    log: TrajectoryLog
        the trajectory.
    t: float
        time in :math:`[0, Nk)`, or :math:`(0, Nk]` with ``left``.
    left: bool, optional
        evaluate the left limit, so that ``t = nk`` gives :math:`\\psi^n`.

    Returns
    -------
    State :math:`\\psi^n + \\frac{t - nk}{k} (\\psi^n - \\psi^{n-1})`.

    """
    n, s = _locate(log, t, left=left)
    current = log.states[n]
    if s == 0.0:
        return current
    return current + (current - log.states[n - 1]) * s


@dataclass
class ConsistencyReport:
    """Per-interval residual records and their time integrals up to T*."""

    intervals: DataFrame
    g_integral: float
    h_integral: float
    T_star: float


def _coupling_potential_of(phi, params, coupling):
    return coupling_potential(chemical_potential(phi, params), phi, params, coupling)


def _residual_fields(prev, current, s, params, coupling):
    """Residuals g_k and h_k at offset s within one interval."""
    du = (current.u - prev.u) * s
    dphi = (current.phi - prev.phi) * s
    u_lin = current.u + du
    phi_lin = current.phi + dphi
    m_cur = _coupling_potential_of(current.phi, params, coupling)
    m_lin = _coupling_potential_of(phi_lin, params, coupling)
    g = (
        apply_A(du) * params.nu1
        + B0(du, u_lin)
        + B0(current.u, du)
        - (R0(m_lin - m_cur, phi_lin) + R0(m_cur, dphi)) * params.capK
    )
    h = (
        B1(du, phi_lin)
        + B1(current.u, dphi)
        + apply_A_gamma(dphi, params.gamma) * params.nu2
        + (eval_f_gamma(phi_lin, params) - eval_f_gamma(current.phi, params))
        * params.alpha
    )
    return g, h


def consistency_residuals(log, params, T_star=None):
    """Consistency residuals of the interpolants of a trajectory.

    Parameters
    ----------
    log: TrajectoryLog
        trajectory with at least one step.
    params: ModelParams
        model constants.
    T_star: float, optional
        end of the integration window; all intervals by default.

    Returns
    -------
    ConsistencyReport

    Notes
    -----
    With :math:`u_k` the piecewise constant and :math:`\\tilde{u}_k` the
    piecewise linear interpolant, and :math:`m(\\phi)` the coupling potential
    of the logged run (:math:`\\nu_2 A_\\gamma \\phi` for ``"capillary"``,
    :math:`\\mu(\\phi)` for ``"chemical"``),

    .. math::
        g_k = \\nu_1 A(\\tilde{u}_k - u_k) + B_0(\\tilde{u}_k - u_k,
        \\tilde{u}_k) + B_0(u_k, \\tilde{u}_k - u_k)
        - \\mathcal{K}[R_0(m(\\tilde{\\phi}_k) - m(\\phi_k),
        \\tilde{\\phi}_k) + R_0(m(\\phi_k), \\tilde{\\phi}_k - \\phi_k)]

        h_k = B_1(\\tilde{u}_k - u_k, \\tilde{\\phi}_k) + B_1(u_k,
        \\tilde{\\phi}_k - \\phi_k) + \\nu_2 A_\\gamma(\\tilde{\\phi}_k -
        \\phi_k) + \\alpha(f_\\gamma(\\tilde{\\phi}_k) - f_\\gamma(\\phi_k))

    The squared dual norms are integrated with 3 Gauss-Legendre points per
    interval. This is exact for the parts quadratic in t; the higher-degree
    nonlinear parts are approximated.

    """
    k = log.config.k
    coupling = log.config.coupling
    if log.n_steps < 1:
        raise ValueError("consistency residuals need a log with at least one step")
    n_max = log.n_steps
    if T_star is not None:
        n_max = min(n_max, int(floor(T_star / k + 1e-9)))
        if n_max < 1:
            raise ValueError(f"T_star = {T_star} is shorter than one step k = {k}")
    nodes, weights = leggauss(3)
    offsets = (nodes - 1.0) / 2.0
    weights = weights * k / 2.0

    rows = []
    for n in range(1, n_max + 1):
        prev, current = log.states[n - 1], log.states[n]
        g_int = h_int = g_max = h_max = 0.0
        for s, w in zip(offsets, weights):
            g, h = _residual_fields(prev, current, s, params, coupling)
            g_norm = dual_norm_Vprime(g)
            h_norm = dual_norm_DAgamma_prime(h, params.gamma)
            g_int += w * g_norm**2
            h_int += w * h_norm**2
            g_max = max(g_max, g_norm)
            h_max = max(h_max, h_norm)
        rows.append(
            {
                "n": n,
                "t": log.t0 + n * k,
                "g_Vprime_max": g_max,
                "h_DAgamma_prime_max": h_max,
                "g_integral": g_int,
                "h_integral": h_int,
            }
        )
    intervals = DataFrame(rows).set_index("n")
    return ConsistencyReport(
        intervals=intervals,
        g_integral=float(intervals["g_integral"].sum()),
        h_integral=float(intervals["h_integral"].sum()),
        T_star=n_max * k,
    )


def advance(state, n_steps, params, cfg, start_step=0):
    """Apply the step map ``n_steps`` times without keeping the trajectory."""
    for n in range(start_step + 1, start_step + int(n_steps) + 1):
        state, _ = implicit_step(state, params, cfg, step=n)
    return state
