"""The diagnostics module contains the discrete energy, the audit of the
per-step energy identity and remainder bound, the closed-form stability
constants and the dissipation and increment sums of a trajectory.

"""

from dataclasses import asdict, dataclass
from math import nan, sqrt

from pandas import DataFrame, Series

from .gronwall import geometric_recursion_bound
from .model import (
    F_gamma_integral,
    b1,
    chemical_potential,
    coupling_potential,
    eval_f_gamma,
    free_energy,
)
from .spectral import (
    AREA,
    apply_A_gamma,
    exact_integral,
    inner_L2,
    norm_gamma,
    norm_H1,
    norm_L2,
    norm_V,
)
from .utils import check_nonnegative, check_positive

CSV_COLUMNS = [
    "n",
    "t",
    "|u|_L2",
    "norm_H1_u",
    "norm_gamma_phi",
    "norm_V",
    "E_total",
    "E_kinetic",
    "E_gamma",
    "E_potential",
    "E_l2",
    "identity_residual",
    "remainder_margin",
    "iterations",
]


@dataclass(frozen=True)
class EnergyBreakdown:
    """Components of the discrete energy.

    ``total = kinetic + gamma_seminorm + potential + l2_phi + floor``.
    """

    kinetic: float
    gamma_seminorm: float
    potential: float
    l2_phi: float
    floor: float
    total: float


@dataclass(frozen=True)
class AuditRecord:
    """Audit of one step n."""

    n: int
    identity_residual: float
    R_gamma: float
    remainder_margin: float
    dissipation_M1: float
    dissipation_M2: float
    increment: float


def energy_E(state, params):
    """Discrete energy of a state.

    Parameters
    ----------
    state: State
        the state :math:`(u^n, \\phi^n)`.
    params: ModelParams
        model constants.

    Returns
    -------
    EnergyBreakdown

    Notes
    -----
    .. math::
        E^n = \\mathcal{K}^{-1} |u^n|^2_{L^2} + \\nu_2 \\|\\phi^n\\|^2_\\gamma
        + 2\\alpha \\mathcal{F}_\\gamma(\\phi^n) + |\\phi^n|^2_{L^2}
        + 2\\alpha C_{F_\\gamma} |\\Omega|

    The choice of :math:`C_{F_\\gamma}` makes the total nonnegative.

    """
    kinetic = norm_L2(state.u) ** 2 / params.capK
    gamma_seminorm = params.nu2 * norm_gamma(state.phi, params.gamma) ** 2
    potential = 2.0 * params.alpha * F_gamma_integral(state.phi, params)
    l2_phi = norm_L2(state.phi) ** 2
    floor = 2.0 * params.alpha * params.c_F_gamma * AREA
    return EnergyBreakdown(
        kinetic=kinetic,
        gamma_seminorm=gamma_seminorm,
        potential=potential,
        l2_phi=l2_phi,
        floor=floor,
        total=kinetic + gamma_seminorm + potential + l2_phi + floor,
    )


def lyapunov_energy(state, params):
    """:math:`\\mathcal{K}^{-1} |u|^2_{L^2} + 2 \\times` free energy.

    Nonincreasing along trajectories without forcing as long as the
    dissipation :math:`2k|\\mu^n|^2` dominates the remainder.
    """
    return norm_L2(state.u) ** 2 / params.capK + 2.0 * free_energy(state.phi, params)


def remainder_density(a, b, params):
    """Pointwise remainder :math:`(b - a) f_\\gamma(b) - F_\\gamma(b) +
    F_\\gamma(a)` for scalars or arrays."""
    return (b - a) * params.f_gamma(b) - params.F_gamma(b) + params.F_gamma(a)


def remainder_R(prev_phi, phi, params):
    """Remainder :math:`R^n_\\gamma = (\\phi^n - \\phi^{n-1},
    f_\\gamma(\\phi^n)) - \\mathcal{F}_\\gamma(\\phi^n) +
    \\mathcal{F}_\\gamma(\\phi^{n-1})`."""
    return (
        inner_L2(phi - prev_phi, eval_f_gamma(phi, params))
        - F_gamma_integral(phi, params)
        + F_gamma_integral(prev_phi, params)
    )


def remainder_bound_check(prev, new, params):
    """Remainder and its lower-bound margin.

    Parameters
    ----------
    prev, new: State
        consecutive states.
    params: ModelParams
        model constants.

    Returns
    -------
    tuple of :math:`R^n_\\gamma` and the margin

    .. math:: 2\\alpha R^n_\\gamma + \\frac{1}{2} |\\phi^n - \\phi^{n-1}|^2_{L^2}
        + \\nu_2 \\gamma |\\phi^n - \\phi^{n-1}|^2_{L^2},

    which is nonnegative up to round-off whenever :math:`f' \\geq
    -1/(2\\alpha)`.

    """
    R = remainder_R(prev.phi, new.phi, params)
    jump = norm_L2(new.phi - prev.phi) ** 2
    margin = 2.0 * params.alpha * R + (0.5 + params.nu2 * params.gamma) * jump
    return R, margin


def energy_identity_residual(prev, new, mu, params, k, coupling="chemical"):
    """Absolute defect of the per-step energy identity.

    Parameters
    ----------
    prev, new: State
        consecutive states of a converged step.
    mu: SpectralScalar
        chemical potential of the new state.
    params: ModelParams
        model constants and forcing.
    k: float
        time step.
    coupling: str, optional
        velocity coupling of the scheme that produced the step.

    Returns
    -------
    float, :math:`|LHS - RHS|` with every term evaluated separately.

    Notes
    -----
    .. math::
        \\mathcal{K}^{-1}[|u^n|^2 - |u^{n-1}|^2 + |u^n - u^{n-1}|^2]
        + \\nu_2(\\|\\phi^n\\|_\\gamma^2 - \\|\\phi^{n-1}\\|_\\gamma^2
        + \\|\\phi^n - \\phi^{n-1}\\|_\\gamma^2)
        + |\\phi^n|^2 - |\\phi^{n-1}|^2 + |\\phi^n - \\phi^{n-1}|^2
        + 2\\alpha(\\mathcal{F}_\\gamma(\\phi^n) - \\mathcal{F}_\\gamma(\\phi^{n-1}))
        + \\frac{2\\nu_1}{\\mathcal{K}} k \\|u^n\\|^2
        + 2k\\nu_2\\|\\phi^n\\|_\\gamma^2 + 2k|\\mu^n|^2
        + 2\\alpha k(f_\\gamma(\\phi^n), \\phi^n) + 2\\alpha R^n_\\gamma
        = \\frac{2}{\\mathcal{K}} k (g, u^n)

    The capillary coupling adds
    :math:`2k[b_1(u^n, \\phi^n, \\mu^n) - b_1(u^n, \\phi^n, \\nu_2 A_\\gamma
    \\phi^n)] = 2\\alpha k\\, b_1(u^n, \\phi^n, P_N f_\\gamma(\\phi^n))` to
    the left side, the part of the advected potential that truncation keeps.

    """
    u, u0 = new.u, prev.u
    phi, phi0 = new.phi, prev.phi
    gamma = params.gamma
    capK = params.capK
    alpha = params.alpha
    nu2 = params.nu2
    f_gamma = params.f_gamma

    lhs = (
        (norm_L2(u) ** 2 - norm_L2(u0) ** 2 + norm_L2(u - u0) ** 2) / capK
        + nu2
        * (
            norm_gamma(phi, gamma) ** 2
            - norm_gamma(phi0, gamma) ** 2
            + norm_gamma(phi - phi0, gamma) ** 2
        )
        + norm_L2(phi) ** 2
        - norm_L2(phi0) ** 2
        + norm_L2(phi - phi0) ** 2
        + 2.0 * alpha * (F_gamma_integral(phi, params) - F_gamma_integral(phi0, params))
        + 2.0 * params.nu1 / capK * k * norm_H1(u) ** 2
        + 2.0 * k * nu2 * norm_gamma(phi, gamma) ** 2
        + 2.0 * k * norm_L2(mu) ** 2
        + 2.0
        * alpha
        * k
        * exact_integral(lambda r: f_gamma(r) * r, [phi], f_gamma.degree() + 1)
        + 2.0 * alpha * remainder_R(phi0, phi, params)
    )
    if coupling != "chemical":
        lhs += 2.0 * k * (
            b1(u, phi, mu) - b1(u, phi, coupling_potential(mu, phi, params, coupling))
        )
    rhs = 2.0 / capK * k * inner_L2(params.forcing_on(u.grid), u)
    return abs(lhs - rhs)


def kappa_candidate(nu1, c_Omega, nu2, gamma, alpha, c_f_prime):
    """Decay rate of the energy recursion.

    .. math:: \\kappa = \\min\\left\\{\\frac{\\nu_1}{2c_\\Omega},
        \\frac{\\nu_2\\gamma}{1 + \\nu_2\\gamma + 2c'_f(\\alpha + \\nu_2)}\\right\\}

    ``c_f_prime`` depends on the potential only and is supplied by the caller.
    """
    check_positive(nu1=nu1, c_Omega=c_Omega, nu2=nu2, gamma=gamma, alpha=alpha)
    check_nonnegative(c_f_prime=c_f_prime)
    return min(
        nu1 / (2.0 * c_Omega),
        nu2 * gamma / (1.0 + nu2 * gamma + 2.0 * c_f_prime * (alpha + nu2)),
    )


def rho0_candidate(kappa, c_Omega, nu1, capK, g_inf, c2=0.0):
    """Absorbing radius :math:`\\rho_0` with

    .. math:: \\rho_0^2 = \\frac{1}{\\kappa}\\left(\\frac{c_\\Omega}{\\nu_1
        \\mathcal{K}} \\|g\\|^2_\\infty + c_2\\right).

    For :math:`k \\leq 1/\\kappa` the ball of radius :math:`\\sqrt{2}\\rho_0`
    in Y is absorbing.
    """
    check_positive(kappa=kappa, c_Omega=c_Omega, nu1=nu1, capK=capK)
    check_nonnegative(g_inf=g_inf, c2=c2)
    return sqrt((c_Omega / (nu1 * capK) * g_inf**2 + c2) / kappa)


def kappa1_step_bound(kappa):
    """Largest step :math:`\\min\\{1/\\kappa, 1\\}` for which the V-bounds hold."""
    check_positive(kappa=kappa)
    return min(1.0 / kappa, 1.0)


def energy_decay_bound(E0, kappa, k, n, g_inf, nu1, capK, c_Omega=1.0, c2=0.0):
    """Geometric bound :math:`(1 + \\kappa k)^{-n} E^0 + \\rho_0^2 [1 - (1 +
    \\kappa k)^{-n}]` on the energy after n steps."""
    check_positive(nu1=nu1, capK=capK, c_Omega=c_Omega)
    zeta_sup = c_Omega / (nu1 * capK) * g_inf**2 + c2
    return geometric_recursion_bound(E0, kappa, k, n, zeta_sup)


def _check_range(log, i, n):
    if not 1 <= i <= n <= log.n_steps:
        raise IndexError(
            f"need 1 <= i <= n <= {log.n_steps}, got i = {i}, n = {n}"
        )


def dissipation_sums(log, i, n):
    """Dissipation sums of a trajectory over the steps i..n.

    Returns
    -------
    tuple of

    .. math:: k\\sum_{j=i}^n \\left(\\frac{\\nu_1}{2\\mathcal{K}}\\|u^j\\|^2
        + 2|\\mu^j|^2_{L^2}\\right), \\quad k\\sum_{j=i}^n
        |A_\\gamma \\phi^j|^2_{L^2}

    """
    _check_range(log, i, n)
    params, k = log.params, log.config.k
    m1 = m2 = 0.0
    for j in range(i, n + 1):
        state = log.states[j]
        m1 += (
            params.nu1 / (2.0 * params.capK) * norm_H1(state.u) ** 2
            + 2.0 * norm_L2(log.reports[j - 1].mu) ** 2
        )
        m2 += norm_L2(apply_A_gamma(state.phi, params.gamma)) ** 2
    return k * m1, k * m2


def increment_sums(log, i, m):
    """:math:`\\sum_{j=i}^m (\\|u^j - u^{j-1}\\|^2 + |A_\\gamma(\\phi^j -
    \\phi^{j-1})|^2_{L^2})`."""
    _check_range(log, i, m)
    gamma = log.params.gamma
    total = 0.0
    for j in range(i, m + 1):
        prev, state = log.states[j - 1], log.states[j]
        total += (
            norm_H1(state.u - prev.u) ** 2
            + norm_L2(apply_A_gamma(state.phi - prev.phi, gamma)) ** 2
        )
    return total


def audit_step(n, prev, new, mu, params, k, coupling="chemical"):
    """Audit one step.

    Returns
    -------
    AuditRecord

    """
    R, margin = remainder_bound_check(prev, new, params)
    return AuditRecord(
        n=n,
        identity_residual=energy_identity_residual(
            prev, new, mu, params, k, coupling
        ),
        R_gamma=R,
        remainder_margin=margin,
        dissipation_M1=k
        * (
            params.nu1 / (2.0 * params.capK) * norm_H1(new.u) ** 2
            + 2.0 * norm_L2(mu) ** 2
        ),
        dissipation_M2=k * norm_L2(apply_A_gamma(new.phi, params.gamma)) ** 2,
        increment=norm_H1(new.u - prev.u) ** 2
        + norm_L2(apply_A_gamma(new.phi - prev.phi, params.gamma)) ** 2,
    )


def audit_hook(n, prev, new, report, params, cfg):
    """Step hook for :func:`pynsac.stepper.run` that fills the audit fields of
    the report."""
    report.energy_identity_residual = energy_identity_residual(
        prev, new, report.mu, params, cfg.k, cfg.coupling
    )
    report.remainder_margin = remainder_bound_check(prev, new, params)[1]


def audit_frame(log):
    """Audit records of every step of a trajectory as a DataFrame indexed by n."""
    params, k = log.params, log.config.k
    coupling = log.config.coupling
    records = [
        asdict(
            audit_step(
                n, log.states[n - 1], log.states[n], r.mu, params, k, coupling
            )
        )
        for n, r in enumerate(log.reports, start=1)
    ]
    return DataFrame(records).set_index("n")


def state_row(n, t, state, params):
    """Norm and energy columns of one state."""
    energy = energy_E(state, params)
    return {
        "n": n,
        "t": t,
        "|u|_L2": norm_L2(state.u),
        "norm_H1_u": norm_H1(state.u),
        "norm_gamma_phi": norm_gamma(state.phi, params.gamma),
        "norm_V": norm_V(state, params),
        "E_total": energy.total,
        "E_kinetic": energy.kinetic,
        "E_gamma": energy.gamma_seminorm,
        "E_potential": energy.potential,
        "E_l2": energy.l2_phi,
    }


def diagnostics_frame(log):
    """Time series of norms, energies and audit residuals of a trajectory.

    Parameters
    ----------
    log: TrajectoryLog
        trajectory; the audit fields of its reports are used when a hook filled
        them and computed otherwise.

    Returns
    -------
    pandas.DataFrame with the columns of :data:`CSV_COLUMNS`, one row per
    state. The row of the initial state has zero residuals and iterations.

    """
    params, k = log.params, log.config.k
    times = log.times
    rows = []
    for n, state in enumerate(log.states):
        row = state_row(n, times[n], state, params)
        if n == 0:
            row.update(identity_residual=0.0, remainder_margin=0.0, iterations=0)
        else:
            report = log.reports[n - 1]
            prev = log.states[n - 1]
            identity = report.energy_identity_residual
            if identity != identity:
                identity = energy_identity_residual(
                    prev, state, report.mu, params, k, log.config.coupling
                )
            margin = report.remainder_margin
            if margin != margin:
                margin = remainder_bound_check(prev, state, params)[1]
            row.update(
                identity_residual=identity,
                remainder_margin=margin,
                iterations=report.iterations,
            )
        rows.append(row)
    return DataFrame(rows, columns=CSV_COLUMNS)


def audit_states(steps, times, states, params, k, coupling="chemical"):
    """Recompute the diagnostics columns from stored states alone.

    Parameters
    ----------
    steps, times: sequence
        step indices and times of the states.
    states: sequence of State
        stored states, in increasing step order.
    params: ModelParams
        model constants.
    k: float
        time step.
    coupling: str, optional
        velocity coupling of the scheme that produced the states.

    Returns
    -------
    pandas.DataFrame with the columns of :data:`CSV_COLUMNS` except
    ``iterations``. Residuals are NaN where the previous step is not stored.

    """
    rows = []
    for i, (n, t, state) in enumerate(zip(steps, times, states)):
        row = state_row(n, t, state, params)
        if n == 0:
            row.update(identity_residual=0.0, remainder_margin=0.0)
        elif i > 0 and steps[i - 1] == n - 1:
            prev = states[i - 1]
            mu = chemical_potential(state.phi, params)
            row.update(
                identity_residual=energy_identity_residual(
                    prev, state, mu, params, k, coupling
                ),
                remainder_margin=remainder_bound_check(prev, state, params)[1],
            )
        else:
            row.update(identity_residual=nan, remainder_margin=nan)
        rows.append(row)
    return DataFrame(rows, columns=CSV_COLUMNS[:-1])


def energy_series(log, params=None):
    """Total discrete energy of every state, indexed by time."""
    params = log.params if params is None else params
    return Series(
        [energy_E(s, params).total for s in log.states],
        index=log.times,
        name="E_total",
    )


def observed_absorbing_radius(logs, params, n_enter):
    """Smallest R with :math:`E^n \\leq R^2` for every trajectory and every
    :math:`n \\geq` ``n_enter``."""
    if n_enter < 0:
        raise ValueError(f"n_enter must be nonnegative, got {n_enter}")
    peak = 0.0
    for log in logs:
        if n_enter >= len(log.states):
            raise ValueError(
                f"n_enter = {n_enter} beyond a trajectory of {len(log.states)} states"
            )
        for state in log.states[n_enter:]:
            peak = max(peak, energy_E(state, params).total)
    return sqrt(peak)
