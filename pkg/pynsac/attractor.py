"""The attractor module contains the empirical attractor machinery: seeded
random ensembles, attractor sampling, the Hausdorff semidistance in the Y-norm,
absorbing-time estimation and the step-size convergence study.

"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

from numpy import array, isfinite
from numpy.random import SeedSequence, default_rng
from pandas import DataFrame, Series
from scipy.spatial.distance import cdist

from .spectral import (
    State,
    norm_V,
    norm_Y,
    random_scalar,
    random_solenoidal,
    y_embedding,
)
from .stepper import (
    DivergenceError,
    NonConvergenceError,
    StepperConfig,
    TrajectoryLog,
    advance,
    implicit_step,
)
from .utils import check_positive, check_time_grid, steps_for, worker_count

logger = logging.getLogger(__name__)


@dataclass
class StateCloud:
    """Finite sample of states standing in for an attractor.

    Parameters
    ----------
    states: list of State
        the samples, all on one grid.
    meta: dict, optional
        sampling settings (k, burn-in, stride, seeds, failures).

    """

    states: list
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.states:
            raise ValueError("a StateCloud needs at least one state")
        grid = self.states[0].grid
        if any(s.grid != grid for s in self.states):
            raise ValueError("all states of a StateCloud must share one GridSpec")

    def __len__(self):
        return len(self.states)

    @property
    def grid(self):
        return self.states[0].grid

    def radius(self, params):
        """Largest Y-norm over the cloud."""
        return max(norm_Y(s, params) for s in self.states)


@dataclass(frozen=True)
class ConvergenceRow:
    """One row of the step-size convergence study."""

    k: float
    dist_to_ref: float
    finite_time_err: float
    cloud_radius_Y: float


def ensemble_rng(seed, index):
    """Generator of ensemble member ``index``, independent of scheduling."""
    return default_rng(SeedSequence([int(seed), int(index)]))


def random_state(grid, rng, params, modes=4, level=None, amplitude=1.0):
    """Random low-mode state.

    Parameters
    ----------
    grid: GridSpec
        target grid.
    rng: numpy.random.Generator
        source of randomness.
    params: ModelParams
        used for the Y-norm normalisation.
    modes: float, optional
        spectral radius of the support.
    level: float, optional
        Y-norm of the returned state; unnormalised when None.
    amplitude: float, optional
        coefficient standard deviation before normalisation.

    Returns
    -------
    State

    """
    state = State(
        random_solenoidal(grid, rng, modes, amplitude),
        random_scalar(grid, rng, modes, amplitude),
    )
    if level is None:
        return state
    check_positive(level=level)
    return state * (level / norm_Y(state, params))


def _as_states(cloud):
    states = cloud.states if isinstance(cloud, StateCloud) else list(cloud)
    if not states:
        raise ValueError("cannot measure the distance of an empty cloud")
    return states


def hausdorff_semidistance(A, B, params):
    """Hausdorff semidistance in the Y-norm.

    Parameters
    ----------
    A, B: StateCloud or sequence of State
        the clouds.
    params: ModelParams
        defines the Y-norm.

    Returns
    -------
    float, :math:`\\sup_{a \\in A} \\inf_{b \\in B} \\|a - b\\|_Y`.

    Notes
    -----
    The semidistance is not symmetric: it vanishes when A is contained in B.

    """
    a_states, b_states = _as_states(A), _as_states(B)
    if a_states[0].grid != b_states[0].grid:
        raise ValueError(
            f"clouds live on different grids: {a_states[0].grid} vs "
            f"{b_states[0].grid}"
        )
    ea = array([y_embedding(s, params) for s in a_states])
    eb = array([y_embedding(s, params) for s in b_states])
    return float(cdist(ea, eb).min(axis=1).max())


def absorbing_entry_time(log, params, radius, norm="Y"):
    """First step after which a trajectory stays inside a ball.

    Parameters
    ----------
    log: TrajectoryLog or sequence of State
        the trajectory.
    params: ModelParams
        model constants.
    radius: float
        ball radius.
    norm: str, optional
        ``"Y"`` or ``"V"``.

    Returns
    -------
    int or None, the smallest n with every later state inside the ball; None
    when the last state is outside.

    """
    if radius < 0:
        raise ValueError(f"radius must be nonnegative, got {radius}")
    norms = {"Y": norm_Y, "V": norm_V}
    if norm not in norms:
        raise ValueError(f"norm must be 'Y' or 'V', got {norm!r}")
    states = log.states if isinstance(log, TrajectoryLog) else list(log)
    values = [norms[norm](s, params) for s in states]
    outside = [j for j, v in enumerate(values) if not v <= radius]
    if not outside:
        return 0
    last = outside[-1]
    return None if last == len(values) - 1 else last + 1


def _sample_trajectory(task):
    """Burn in one ensemble member and collect its samples."""
    index, seed, grid, params, cfg, burn_in, n_samples, stride, level, modes = task
    rng = ensemble_rng(seed, index)
    state = random_state(grid, rng, params, modes=modes, level=level)
    try:
        state = advance(state, burn_in, params, cfg)
        samples = [state]
        for j in range(1, n_samples):
            start = burn_in + (j - 1) * stride
            state = advance(state, stride, params, cfg, start_step=start)
            samples.append(state)
    except (NonConvergenceError, DivergenceError) as err:
        failure = {
            "index": index,
            "error": type(err).__name__,
            "step": err.step,
            "message": str(err),
        }
        return index, None, failure
    return index, samples, None


def _map_tasks(func, tasks, workers):
    if workers is None:
        workers = worker_count()
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(func, tasks))
    return [func(task) for task in tasks]


def sample_attractor(
    params,
    grid,
    cfg,
    n_init=1,
    seed=0,
    burn_in_steps=100,
    n_samples=1,
    sample_stride=1,
    level=1.0,
    modes=4,
    workers=None,
):
    """Sample the attractor of the step map by ensemble burn-in.

    Parameters
    ----------
    params: ModelParams
        model constants and forcing.
    grid: GridSpec
        grid of the initial states.
    cfg: StepperConfig
        step size and solver settings.
    n_init: int, optional
        ensemble size.
    seed: int, optional
        ensemble seed; member i uses ``SeedSequence([seed, i])``.
    burn_in_steps: int, optional
        steps before the first sample, at least 1.
    n_samples: int, optional
        samples per member.
    sample_stride: int, optional
        steps between samples.
    level: float, optional
        Y-norm of the initial states.
    modes: float, optional
        spectral radius of the initial states.
    workers: int, optional
        worker processes; read from ``PYNSAC_WORKERS`` when None.

    Returns
    -------
    StateCloud with the samples of the surviving members in seed order.

    Notes
    -----
    Members whose step fails are logged, listed in ``meta["failures"]`` and
    dropped. A RuntimeError is raised when every member fails.

    """
    for name, value, low in (
        ("n_init", n_init, 1),
        ("burn_in_steps", burn_in_steps, 1),
        ("n_samples", n_samples, 1),
        ("sample_stride", sample_stride, 1),
    ):
        if int(value) != value or value < low:
            raise ValueError(f"{name} must be an integer >= {low}, got {value}")
    tasks = [
        (
            i,
            seed,
            grid,
            params,
            cfg,
            int(burn_in_steps),
            int(n_samples),
            int(sample_stride),
            level,
            modes,
        )
        for i in range(int(n_init))
    ]
    results = sorted(
        _map_tasks(_sample_trajectory, tasks, workers), key=lambda r: r[0]
    )
    states, failures = [], []
    for index, samples, failure in results:
        if failure is None:
            states.extend(samples)
        else:
            logger.warning(
                "ensemble member %d failed at step %s: %s",
                index,
                failure["step"],
                failure["message"],
            )
            failures.append(failure)
    if not states:
        raise RuntimeError(
            f"all {n_init} ensemble members failed; the first failure was: "
            f"{failures[0]['message']}"
        )
    meta = {
        "k": cfg.k,
        "burn_in_steps": int(burn_in_steps),
        "sample_stride": int(sample_stride),
        "n_samples": int(n_samples),
        "seed": int(seed),
        "n_init": int(n_init),
        "failures": failures,
        "partial": bool(failures),
    }
    logger.info(
        "sampled %d states from %d members with k = %g",
        len(states),
        n_init - len(failures),
        cfg.k,
    )
    return StateCloud(states, meta)


def _with_step(cfg, k):
    return StepperConfig(
        k=k,
        fp_tol=cfg.fp_tol,
        max_iter=cfg.max_iter,
        relaxation=cfg.relaxation,
        coupling=cfg.coupling,
    )


def _finite_time_task(task):
    state, params, cfg, k_ref, n_coarse, ratio = task
    coarse, fine = state, state
    fine_cfg = _with_step(cfg, k_ref)
    errors = [0.0]
    for n in range(1, n_coarse + 1):
        coarse, _ = implicit_step(coarse, params, cfg, step=n)
        fine = advance(fine, ratio, params, fine_cfg, start_step=(n - 1) * ratio)
        errors.append(norm_Y(coarse - fine, params))
    return errors


def finite_time_errors(states, params, cfg, k_ref, T_star, workers=None):
    """Finite-time discrepancy between the step maps with k and k_ref.

    Parameters
    ----------
    states: StateCloud or sequence of State
        starting points.
    params: ModelParams
        model constants.
    cfg: StepperConfig
        settings of the coarse step map; ``cfg.k`` must be a multiple of
        ``k_ref``.
    k_ref: float
        reference step.
    T_star: float
        final time, a multiple of ``cfg.k``.
    workers: int, optional
        worker processes; read from ``PYNSAC_WORKERS`` when None.

    Returns
    -------
    pandas.Series indexed by the common times :math:`nk \\leq T^*` holding the
    largest Y-norm discrepancy over the starting points.

    """
    states = _as_states(states)
    check_positive(k_ref=k_ref, T_star=T_star)
    ratio = check_time_grid(cfg.k, k_ref)
    n_coarse = steps_for(T_star, cfg.k, name="T_star")
    tasks = [(s, params, cfg, k_ref, n_coarse, ratio) for s in states]
    errors = array(_map_tasks(_finite_time_task, tasks, workers))
    if not isfinite(errors).all():
        raise FloatingPointError("non-finite discrepancy in finite_time_errors")
    times = cfg.k * array(range(n_coarse + 1))
    return Series(errors.max(axis=0), index=times, name="finite_time_err")


def convergence_study(
    params,
    grid,
    cfg,
    k_list,
    k_ref,
    T_star,
    n_init=2,
    seed=0,
    burn_in=1.0,
    n_samples=1,
    sample_stride=0.0,
    level=1.0,
    modes=4,
    workers=None,
):
    """Convergence of sampled attractors and finite-time solutions as k -> 0.

    Parameters
    ----------
    params: ModelParams
        model constants and forcing.
    grid: GridSpec
        grid of the ensembles.
    cfg: StepperConfig
        solver settings shared by every step size (``cfg.k`` is ignored).
    k_list: sequence of float
        step sizes to study, each an integer multiple of ``k_ref``.
    k_ref: float
        reference step size.
    T_star: float
        horizon of the finite-time comparison, a multiple of every k.
    n_init, seed, level, modes: optional
        ensemble settings shared by every step size.
    burn_in: float, optional
        burn-in time, a multiple of every k.
    n_samples: int, optional
        samples per member.
    sample_stride: float, optional
        time between samples, a multiple of every k.
    workers: int, optional
        worker processes.

    Returns
    -------
    list of ConvergenceRow, in the order of ``k_list``.

    Notes
    -----
    The continuous semigroup is replaced by the step map with ``k_ref``; the
    finite-time errors start from the points of each sampled cloud.

    """
    check_positive(k_ref=k_ref, T_star=T_star, burn_in=burn_in)
    k_list = [float(k) for k in k_list]
    if not k_list:
        raise ValueError("k_list must not be empty")
    if k_ref > min(k_list):
        raise ValueError(f"k_ref = {k_ref} must not exceed min(k_list) = {min(k_list)}")
    for k in k_list:
        check_time_grid(k, k_ref)

    def cloud_for(k):
        stride = steps_for(sample_stride, k, "sample_stride") if n_samples > 1 else 1
        return sample_attractor(
            params,
            grid,
            _with_step(cfg, k),
            n_init=n_init,
            seed=seed,
            burn_in_steps=steps_for(burn_in, k, "burn_in"),
            n_samples=n_samples,
            sample_stride=stride,
            level=level,
            modes=modes,
            workers=workers,
        )

    reference = cloud_for(k_ref)
    rows = []
    for k in k_list:
        cloud = reference if k == k_ref else cloud_for(k)
        errors = finite_time_errors(
            cloud, params, _with_step(cfg, k), k_ref, T_star, workers=workers
        )
        row = ConvergenceRow(
            k=k,
            dist_to_ref=hausdorff_semidistance(cloud, reference, params),
            finite_time_err=float(errors.max()),
            cloud_radius_Y=cloud.radius(params),
        )
        logger.info(
            "k = %g: dist_to_ref = %.3e, finite_time_err = %.3e",
            k,
            row.dist_to_ref,
            row.finite_time_err,
        )
        rows.append(row)
    return rows


def convergence_frame(rows):
    """Convergence rows as a DataFrame with columns k, dist_to_ref,
    finite_time_err, cloud_radius_Y."""
    return DataFrame(
        [asdict(r) for r in rows], columns=list(ConvergenceRow.__annotations__)
    )
