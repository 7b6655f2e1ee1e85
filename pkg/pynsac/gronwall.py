"""The gronwall module contains the discrete Gronwall bounds used to control
sequences produced by the time stepping.

"""

from dataclasses import dataclass

from numpy import asarray, empty, exp, isfinite
from numpy.lib.stride_tricks import sliding_window_view

from .utils import check_nonnegative, check_positive


@dataclass(frozen=True)
class GronwallInput:
    """Data of a discrete Gronwall recursion

    .. math:: \\xi_n \\leq \\xi_{n-1} (1 + k \\eta_{n-1}) + k \\zeta_n.

    Parameters
    ----------
    k: float
        step size.
    xi0: float
        initial value.
    eta: array_like
        growth rates :math:`\\eta_0, \\eta_1, \\ldots`.
    zeta: array_like
        sources :math:`\\zeta_0, \\zeta_1, \\ldots` (``zeta[0]`` is unused).

    """

    k: float
    xi0: float
    eta: tuple
    zeta: tuple

    def __post_init__(self):
        check_positive(k=self.k)
        check_nonnegative(xi0=self.xi0)
        eta = asarray(self.eta, dtype=float)
        zeta = asarray(self.zeta, dtype=float)
        if eta.ndim != 1 or eta.shape != zeta.shape:
            raise ValueError(
                f"eta and zeta must be 1D sequences of equal length, got shapes "
                f"{eta.shape} and {zeta.shape}"
            )
        if not (isfinite(eta).all() and isfinite(zeta).all()):
            raise ValueError("eta and zeta must be finite")
        if (eta < 0).any() or (zeta < 0).any():
            raise ValueError("eta and zeta must be nonnegative")
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "zeta", zeta)

    def __len__(self):
        return self.eta.size


def gronwall_bound(inp, n):
    """Discrete Gronwall bound.

    Parameters
    ----------
    inp: GronwallInput
        recursion data.
    n: int
        index of the bounded term, ``0 <= n < len(inp)``.

    Returns
    -------
    float

    Notes
    -----
    .. math:: \\xi_n \\leq \\left(\\xi_0 + \\sum_{i=1}^n k \\zeta_i \\right)
        \\exp\\left(\\sum_{i=0}^{n-1} k \\eta_i \\right)

    Examples
    --------
    >>> gronwall_bound(GronwallInput(1.0, 1.0, [0, 0, 0, 0], [1, 1, 1, 1]), 3)
    4.0

    """
    if not 0 <= n < len(inp):
        raise IndexError(f"n = {n} out of range for sequences of length {len(inp)}")
    k = inp.k
    return float(
        (inp.xi0 + k * inp.zeta[1 : n + 1].sum()) * exp(k * inp.eta[:n].sum())
    )


def gronwall_sequence(inp):
    """Extremal sequence: the recursion taken with equality.

    Returns
    -------
    numpy.ndarray with ``xi[0] = xi0``.

    """
    xi = empty(len(inp))
    xi[0] = inp.xi0
    for n in range(1, len(inp)):
        xi[n] = xi[n - 1] * (1.0 + inp.k * inp.eta[n - 1]) + inp.k * inp.zeta[n]
    return xi


def uniform_gronwall_bound(a1, a2, a3, N, k):
    """Uniform discrete Gronwall bound :math:`(a_3 / (Nk) + a_2) e^{a_1}`.

    Parameters
    ----------
    a1, a2, a3: float
        bounds on the windowed sums of :math:`k\\eta_n`, :math:`k\\zeta_n`
        and :math:`k\\xi_n` over every window of ``N + 1`` consecutive indices.
    N: int
        window length, at least 1.
    k: float
        step size.

    Returns
    -------
    float, a bound on :math:`\\xi_n` for every n at least N steps past the
    start of the recursion.

    """
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N}")
    check_positive(k=k)
    check_nonnegative(a1=a1, a2=a2, a3=a3)
    return float((a3 / (N * k) + a2) * exp(a1))


def window_sums(values, N, start=0):
    """Largest sum of ``values`` over the windows ``[k0, k0 + N]``, k0 >= start."""
    values = asarray(values, dtype=float)
    if values.size < start + N + 1:
        raise ValueError(
            f"need at least {start + N + 1} values for windows of length {N + 1}"
        )
    return float(sliding_window_view(values[start:], N + 1).sum(axis=1).max())


def geometric_recursion_bound(E0, kappa, k, n, zeta_sup):
    """Closed form of the geometric recursion :math:`(1 + \\kappa k) E^n \\leq
    E^{n-1} + k \\zeta^n` with :math:`\\zeta^n \\leq \\zeta_{sup}`.

    Parameters
    ----------
    E0: float
        initial value.
    kappa: float
        decay rate.
    k: float
        step size.
    n: int or array_like
        number of steps.
    zeta_sup: float
        bound on the sources.

    Returns
    -------
    float or numpy.ndarray

    Notes
    -----
    .. math:: E^n \\leq \\beta^{-n} E^0 + \\frac{\\zeta_{sup}}{\\kappa}
        (1 - \\beta^{-n}), \\quad \\beta = 1 + \\kappa k

    """
    check_positive(kappa=kappa, k=k)
    check_nonnegative(E0=E0, zeta_sup=zeta_sup)
    decay = (1.0 + kappa * k) ** (-asarray(n, dtype=float))
    bound = decay * E0 + zeta_sup / kappa * (1.0 - decay)
    return float(bound) if bound.ndim == 0 else bound
