"""The cli module contains the configuration loader and the command line
workflows ``simulate``, ``audit``, ``converge`` and ``attractor``.

"""

import argparse
import json
import logging
import sys
from copy import deepcopy
from dataclasses import dataclass, field
from pathlib import Path

import yaml
from numpy import array_equal, isnan
from numpy.random import default_rng
from pandas import DataFrame, read_csv

from .attractor import (
    convergence_frame,
    convergence_study,
    ensemble_rng,
    hausdorff_semidistance,
    random_state,
    sample_attractor,
)
from .diagnostics import audit_hook, audit_states, diagnostics_frame
from .io_utils import (
    read_manifest,
    read_snapshot,
    write_cloud,
    write_csv,
    write_manifest,
    write_snapshot,
)
from .model import ModelParams, PotentialSpec
from .spectral import (
    GridSpec,
    SpectralScalar,
    State,
    random_solenoidal,
    taylor_green,
)
from .stepper import DivergenceError, NonConvergenceError, StepperConfig, run
from .utils import setup_logging, steps_for
from .version import __version__

logger = logging.getLogger(__name__)

FIELD_KINDS = ("zero", "random", "taylor_green")

DEFAULTS = {
    "grid": {"nx": 32, "ny": 32, "pad_factor": 2.0},
    "model": {
        "nu1": 1.0,
        "nu2": 0.1,
        "alpha": 0.5,
        "capK": 1.0,
        "gamma": 1.0,
        "potential": [0.0, -1.0, 0.0, 1.0],
        "potential_constant": 0.25,
        "c_F_gamma": None,
        "forcing": {"kind": "zero", "amplitude": 1.0, "modes": 4.0, "seed": 0},
    },
    "stepper": {
        "k": 0.01,
        "fp_tol": 1e-11,
        "max_iter": 500,
        "relaxation": 1.0,
        "coupling": "chemical",
    },
    "initial": {"kind": "random", "amplitude": 1.0, "level": None, "modes": 4.0},
    "run": {
        "n_steps": 100,
        "snapshot_stride": 1,
        "csv": "diagnostics.csv",
        "snapshot_dir": "snapshots",
    },
    "ensemble": {
        "n_init": 2,
        "level": 1.0,
        "modes": 4.0,
        "burn_in": 1.0,
        "samples": 1,
        "stride": 0.0,
    },
    "seed": 0,
}

# Keys whose default is None accept a float or null.
_OPTIONAL_FLOATS = ("model.c_F_gamma", "initial.level")
_RESIDUAL_COLUMNS = ("identity_residual", "remainder_margin")
_HANDLED = (
    OSError,
    KeyError,
    ValueError,
    RuntimeError,
    FloatingPointError,
    yaml.YAMLError,
)


class AuditMismatchError(RuntimeError):
    """Recomputed audit columns differ from the values stored by simulate."""


def _coerce(value, default, path):
    if path in _OPTIONAL_FLOATS:
        return None if value is None else float(value)
    if isinstance(default, int):
        if float(value) != int(float(value)):
            raise ValueError(f"config key '{path}' must be an integer, got {value}")
        return int(float(value))
    if isinstance(default, float):
        return float(value)
    if isinstance(default, list):
        if not isinstance(value, (list, tuple)):
            raise ValueError(f"config key '{path}' must be a list, got {value!r}")
        return [float(v) for v in value]
    return str(value)


def _merge(defaults, user, path=""):
    """Overlay ``user`` on ``defaults``; unknown keys are errors."""
    if not isinstance(user, dict):
        raise ValueError(f"config section '{path or '<root>'}' must be a mapping")
    merged = deepcopy(defaults)
    for key, value in user.items():
        where = f"{path}.{key}" if path else str(key)
        if key not in defaults:
            raise ValueError(f"unknown config key '{where}'")
        if isinstance(defaults[key], dict):
            merged[key] = _merge(defaults[key], value or {}, where)
        else:
            try:
                merged[key] = _coerce(value, defaults[key], where)
            except (TypeError, ValueError) as err:
                raise ValueError(f"invalid value for '{where}': {err}") from None
    return merged


@dataclass
class RunConfig:
    """Validated run configuration.

    Parameters
    ----------
    grid: GridSpec
    params: ModelParams
        constants, potential and the built forcing.
    stepper: StepperConfig
    initial: dict
        initial state settings (kind, amplitude, level, modes).
    run: dict
        n_steps, snapshot_stride, csv, snapshot_dir.
    ensemble: dict
        ensemble settings of ``converge`` and ``attractor``.
    seed: int
        master seed of the initial state and the ensembles.
    raw: dict
        the merged document, written back next to the outputs.

    """

    grid: GridSpec
    params: ModelParams
    stepper: StepperConfig
    initial: dict
    run: dict
    ensemble: dict
    seed: int
    raw: dict = field(default_factory=dict)


def build_forcing(spec, grid):
    """Time-constant body force from the ``model.forcing`` section."""
    kind = spec["kind"]
    if kind == "zero":
        return None
    if kind == "taylor_green":
        return taylor_green(grid, spec["amplitude"])
    if kind == "random":
        rng = default_rng(spec["seed"])
        return random_solenoidal(grid, rng, spec["modes"], spec["amplitude"])
    raise ValueError(f"model.forcing.kind must be one of {FIELD_KINDS}, got {kind!r}")


def build_initial(config):
    """Initial state from the ``initial`` section and the master seed."""
    spec, grid, params = config.initial, config.grid, config.params
    kind = spec["kind"]
    if kind == "zero":
        return State.zeros(grid)
    if kind == "taylor_green":
        return State(taylor_green(grid, spec["amplitude"]), SpectralScalar.zeros(grid))
    if kind == "random":
        return random_state(
            grid,
            ensemble_rng(config.seed, 0),
            params,
            modes=spec["modes"],
            level=spec["level"],
            amplitude=spec["amplitude"],
        )
    raise ValueError(f"initial.kind must be one of {FIELD_KINDS}, got {kind!r}")


def config_from_dict(document):
    """Validate a configuration mapping.

    Parameters
    ----------
    document: dict
        possibly partial configuration; missing keys take the defaults.

    Returns
    -------
    RunConfig

    """
    raw = _merge(DEFAULTS, document or {})
    grid = GridSpec(**raw["grid"])
    model = dict(raw["model"])
    forcing_spec = model.pop("forcing")
    potential = PotentialSpec(model.pop("potential"), model.pop("potential_constant"))
    params = ModelParams(
        potential=potential, forcing=build_forcing(forcing_spec, grid), **model
    )
    stepper = StepperConfig(**raw["stepper"])
    kind = raw["initial"]["kind"]
    if kind not in FIELD_KINDS:
        raise ValueError(f"initial.kind must be one of {FIELD_KINDS}, got {kind!r}")
    for name in ("n_steps", "snapshot_stride"):
        if raw["run"][name] < 1:
            raise ValueError(f"run.{name} must be >= 1, got {raw['run'][name]}")
    return RunConfig(
        grid=grid,
        params=params,
        stepper=stepper,
        initial=raw["initial"],
        run=raw["run"],
        ensemble=raw["ensemble"],
        seed=raw["seed"],
        raw=raw,
    )


def load_config(path):
    """Read and validate a YAML run configuration.

    Parameters
    ----------
    path: str or pathlib.Path
        YAML file.

    Returns
    -------
    RunConfig

    Examples
    --------
    >>> config = load_config("run.yaml")
    >>> config.stepper.k
    0.01

    """
    with open(path) as fo:
        document = yaml.safe_load(fo)
    return config_from_dict(document)


def _write_trajectory(log, config, out):
    run_spec = config.run
    snapshot_dir = out / run_spec["snapshot_dir"]
    snapshot_dir.mkdir(parents=True, exist_ok=True)
    times = log.times
    stride = run_spec["snapshot_stride"]
    files = []
    for n in range(0, len(log.states), stride):
        name = f"step_{n:06d}.pfa"
        state = log.states[n]
        write_snapshot(
            snapshot_dir / name, state, config.params, n, times[n], log.config.k
        )
        files.append(name)
    frame = diagnostics_frame(log)
    write_csv(frame, out / run_spec["csv"])
    return files


def cmd_simulate(config_path, out_dir="."):
    """Run one trajectory and write its snapshots, diagnostics and manifest.

    The outputs of a failing run are written up to the last completed step
    before the error is re-raised.

    """
    config = load_config(config_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(out / "config.yaml", config.raw)
    initial = build_initial(config)
    status, error = "complete", None
    try:
        log = run(
            initial, config.run["n_steps"], config.params, config.stepper, audit_hook
        )
    except (NonConvergenceError, DivergenceError) as err:
        log, status, error = err.log, "failed", err
    files = _write_trajectory(log, config, out)
    write_manifest(
        out / "manifest.yaml",
        {
            "pynsac": __version__,
            "status": status,
            "k": log.config.k,
            "n_steps": log.n_steps,
            "snapshot_dir": config.run["snapshot_dir"],
            "snapshots": files,
            "csv": config.run["csv"],
        },
    )
    if error is not None:
        raise error
    logger.info("simulation written to %s", out)
    return log


def cmd_audit(trajectory_dir):
    """Recompute the audit columns of a simulated trajectory from its snapshots.

    Writes ``audit.csv`` and compares the residual columns with the ones of
    the diagnostics file.

    Raises
    ------
    AuditMismatchError
        when a recomputed value is not bit-equal to the stored one.

    """
    trajectory = Path(trajectory_dir)
    manifest = read_manifest(trajectory / "manifest.yaml")
    config = config_from_dict(read_manifest(trajectory / "config.yaml"))
    snapshot_dir = trajectory / manifest["snapshot_dir"]
    steps, times, states = [], [], []
    for name in manifest["snapshots"]:
        state, header = read_snapshot(snapshot_dir / name, config.grid)
        steps.append(header.step)
        times.append(header.t)
        states.append(state)
    audit = audit_states(
        steps, times, states, config.params, manifest["k"], config.stepper.coupling
    )
    write_csv(audit, trajectory / "audit.csv")

    stored = read_csv(
        trajectory / manifest["csv"], float_precision="round_trip"
    ).set_index("n")
    recomputed = read_csv(
        trajectory / "audit.csv", float_precision="round_trip"
    ).set_index("n")
    for column in _RESIDUAL_COLUMNS:
        values = recomputed[column]
        values = values[~isnan(values.values)]
        expected = stored.loc[values.index, column]
        if not array_equal(values.values, expected.values):
            bad = values.index[values.values != expected.values][0]
            raise AuditMismatchError(
                f"{column} differs at step {bad}: stored {expected[bad]!r}, "
                f"recomputed {values[bad]!r}"
            )
    logger.info("audit of %d snapshots matches the stored diagnostics", len(steps))
    return audit


def cmd_converge(config_path, k_list, k_ref, T_star, out_dir="."):
    """Run the step-size convergence study and write ``convergence.csv``."""
    config = load_config(config_path)
    ens = config.ensemble
    rows = convergence_study(
        config.params,
        config.grid,
        config.stepper,
        k_list,
        k_ref,
        T_star,
        n_init=ens["n_init"],
        seed=config.seed,
        burn_in=ens["burn_in"],
        n_samples=ens["samples"],
        sample_stride=ens["stride"],
        level=ens["level"],
        modes=ens["modes"],
    )
    frame = convergence_frame(rows)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(frame, out / "convergence.csv")
    return frame


def cmd_attractor(
    config_path,
    k_list,
    ensemble=None,
    burn_in=None,
    samples=None,
    stride=None,
    out_dir=".",
):
    """Sample one state cloud per step size and write them with ``attractor.csv``.

    Parameters
    ----------
    config_path: str or pathlib.Path
        YAML configuration.
    k_list: sequence of float
        step sizes.
    ensemble, samples: int, optional
        ensemble size and samples per member; taken from the config when None.
    burn_in, stride: float, optional
        burn-in time and time between samples; taken from the config when None.
    out_dir: str or pathlib.Path, optional
        output directory.

    Returns
    -------
    pandas.DataFrame with columns k, n_states, cloud_radius_Y, dist_to_finest.

    """
    config = load_config(config_path)
    ens = dict(config.ensemble)
    for key, value in (
        ("n_init", ensemble),
        ("burn_in", burn_in),
        ("samples", samples),
        ("stride", stride),
    ):
        if value is not None:
            ens[key] = value
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    clouds = {}
    for i, k in enumerate(float(k) for k in k_list):
        cfg = StepperConfig(
            k=k,
            fp_tol=config.stepper.fp_tol,
            max_iter=config.stepper.max_iter,
            relaxation=config.stepper.relaxation,
            coupling=config.stepper.coupling,
        )
        n_samples = int(ens["samples"])
        stride_steps = steps_for(ens["stride"], k, "stride") if n_samples > 1 else 1
        cloud = sample_attractor(
            config.params,
            config.grid,
            cfg,
            n_init=int(ens["n_init"]),
            seed=config.seed,
            burn_in_steps=steps_for(ens["burn_in"], k, "burn_in"),
            n_samples=n_samples,
            sample_stride=stride_steps,
            level=ens["level"],
            modes=ens["modes"],
        )
        write_cloud(out / f"cloud_{i:02d}", cloud, config.params)
        clouds[k] = cloud
    finest = clouds[min(clouds)]
    frame = DataFrame(
        [
            {
                "k": k,
                "n_states": len(cloud),
                "cloud_radius_Y": cloud.radius(config.params),
                "dist_to_finest": hausdorff_semidistance(
                    cloud, finest, config.params
                ),
            }
            for k, cloud in clouds.items()
        ]
    )
    write_csv(frame, out / "attractor.csv")
    return frame


def _float_list(text):
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers: {text}")
    if not values:
        raise argparse.ArgumentTypeError("expected at least one number")
    return values


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pynsac",
        description="Implicit Euler Navier-Stokes/Allen-Cahn simulator and "
        "verification toolkit",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one trajectory")
    p.add_argument("--config", required=True, help="YAML run configuration")
    p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("audit", help="recompute diagnostics from snapshots")
    p.add_argument("--trajectory", required=True, help="output of simulate")

    p = sub.add_parser("converge", help="step-size convergence study")
    p.add_argument("--config", required=True)
    p.add_argument("--k-list", required=True, type=_float_list)
    p.add_argument("--k-ref", required=True, type=float)
    p.add_argument("--t-star", required=True, type=float)
    p.add_argument("--out", default=".")

    p = sub.add_parser("attractor", help="sample discrete attractors")
    p.add_argument("--config", required=True)
    p.add_argument("--k-list", required=True, type=_float_list)
    p.add_argument("--ensemble", type=int, help="number of initial states")
    p.add_argument("--burn-in", type=float, help="burn-in time")
    p.add_argument("--samples", type=int, help="samples per member")
    p.add_argument("--stride", type=float, help="time between samples")
    p.add_argument("--out", default=".")
    return parser


def _error_line(err):
    return json.dumps(
        {
            "error": type(err).__name__,
            "message": str(err),
            "step": getattr(err, "step", None),
            "suggested_k": getattr(err, "suggested_k", None),
        }
    )


def main(argv=None):
    """Command line entry point; returns the process exit code."""
    args = build_parser().parse_args(argv)
    setup_logging(logging.DEBUG if args.verbose else logging.INFO)
    try:
        if args.command == "simulate":
            cmd_simulate(args.config, args.out)
        elif args.command == "audit":
            cmd_audit(args.trajectory)
        elif args.command == "converge":
            cmd_converge(args.config, args.k_list, args.k_ref, args.t_star, args.out)
        else:
            cmd_attractor(
                args.config,
                args.k_list,
                args.ensemble,
                args.burn_in,
                args.samples,
                args.stride,
                args.out,
            )
    except _HANDLED as err:
        logger.error("%s failed: %s", args.command, err)
        print(_error_line(err), file=sys.stderr)
        return 1
    return 0
