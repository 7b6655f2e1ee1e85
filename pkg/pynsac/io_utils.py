"""The io_utils module contains the binary snapshot format, YAML manifests,
cloud persistence and the CSV writer shared by the command line tools.

Snapshot layout, all little-endian: the magic bytes ``PFA1``, ``nx`` and ``ny``
as uint32, eight float64 values (step, t, k, nu1, nu2, alpha, capK, gamma),
then the coefficient arrays of ux, uy and phi as complex128 (re, im pairs),
row-major in :math:`\\kappa_2` then :math:`\\kappa_1`, each wavenumber running
from :math:`-n/2 + 1` to :math:`n/2`.

"""

from dataclasses import dataclass
from pathlib import Path

import yaml
from numpy import array, dtype, frombuffer, roll

from .attractor import StateCloud
from .spectral import GridSpec, SolenoidalVector, SpectralScalar, State

MAGIC = b"PFA1"
HEADER_FIELDS = ("step", "t", "k", "nu1", "nu2", "alpha", "capK", "gamma")
_U4 = dtype("<u4")
_F8 = dtype("<f8")
_C16 = dtype("<c16")
_HEADER_SIZE = len(MAGIC) + 2 * _U4.itemsize + len(HEADER_FIELDS) * _F8.itemsize


@dataclass(frozen=True)
class SnapshotHeader:
    nx: int
    ny: int
    step: int
    t: float
    k: float
    nu1: float
    nu2: float
    alpha: float
    capK: float
    gamma: float


def _shift(grid):
    return grid.ny // 2 - 1, grid.nx // 2 - 1


def write_snapshot(path, state, params, step, t, k):
    """Write a state to a binary snapshot file.

    Parameters
    ----------
    path: str or pathlib.Path
        target file.
    state: State
        the state.
    params: ModelParams
        constants stored in the header.
    step: int
        step index.
    t: float
        time.
    k: float
        time step.

    """
    grid = state.grid
    values = [step, t, k, params.nu1, params.nu2, params.alpha, params.capK]
    values.append(params.gamma)
    shift = _shift(grid)
    with open(path, "wb") as fo:
        fo.write(MAGIC)
        fo.write(array([grid.nx, grid.ny], dtype=_U4).tobytes())
        fo.write(array(values, dtype=_F8).tobytes())
        for field in (state.u.ux, state.u.uy, state.phi):
            centred = roll(field.coeffs, shift, axis=(0, 1))
            fo.write(centred.astype(_C16).tobytes())


def read_snapshot(path, grid=None):
    """Read a binary snapshot.

    Parameters
    ----------
    path: str or pathlib.Path
        snapshot file.
    grid: GridSpec, optional
        grid to attach; built from the stored mode counts when None.

    Returns
    -------
    tuple of the State and its SnapshotHeader. Coefficients are reproduced
    bit for bit.

    """
    raw = Path(path).read_bytes()
    if raw[: len(MAGIC)] != MAGIC:
        raise ValueError(f"{path} is not a snapshot file: bad magic {raw[:4]!r}")
    if len(raw) < _HEADER_SIZE:
        raise ValueError(f"{path} is truncated")
    nx, ny = frombuffer(raw, dtype=_U4, count=2, offset=len(MAGIC))
    values = frombuffer(
        raw, dtype=_F8, count=len(HEADER_FIELDS), offset=len(MAGIC) + 8
    )
    header = SnapshotHeader(int(nx), int(ny), int(values[0]), *map(float, values[1:]))
    if grid is None:
        grid = GridSpec(int(nx), int(ny))
    elif grid.shape != (ny, nx):
        raise ValueError(
            f"snapshot grid {(int(ny), int(nx))} does not match {grid.shape}"
        )
    size = int(nx) * int(ny)
    expected = _HEADER_SIZE + 3 * size * _C16.itemsize
    if len(raw) != expected:
        raise ValueError(f"{path} has {len(raw)} bytes, expected {expected}")
    shift = _shift(grid)
    fields = []
    for i in range(3):
        flat = frombuffer(
            raw, dtype=_C16, count=size, offset=_HEADER_SIZE + i * size * _C16.itemsize
        )
        coeffs = roll(flat.reshape(grid.shape), (-shift[0], -shift[1]), axis=(0, 1))
        fields.append(SpectralScalar._wrap(coeffs.astype(complex), grid))
    state = State(SolenoidalVector(fields[0], fields[1]), fields[2])
    return state, header


def write_manifest(path, content):
    """Write a mapping as a YAML document."""
    with open(path, "w") as fo:
        yaml.safe_dump(content, fo, sort_keys=False)


def read_manifest(path):
    with open(path) as fo:
        content = yaml.safe_load(fo)
    if not isinstance(content, dict):
        raise ValueError(f"{path} does not contain a YAML mapping")
    return content


def write_csv(frame, path):
    """Write a DataFrame so that every float round-trips exactly."""
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


def _plain(value):
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if hasattr(value, "item"):
        return value.item()
    return value


def write_cloud(directory, cloud, params):
    """Persist a StateCloud as numbered snapshots plus ``manifest.yaml``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    k = float(cloud.meta.get("k", 0.0))
    files = []
    for i, state in enumerate(cloud.states):
        name = f"state_{i:04d}.pfa"
        write_snapshot(directory / name, state, params, i, 0.0, k)
        files.append(name)
    write_manifest(
        directory / "manifest.yaml",
        {"format": MAGIC.decode(), "meta": _plain(cloud.meta), "states": files},
    )


def read_cloud(directory, grid=None):
    """Read a StateCloud written by :func:`write_cloud`."""
    directory = Path(directory)
    manifest = read_manifest(directory / "manifest.yaml")
    states = [read_snapshot(directory / name, grid)[0] for name in manifest["states"]]
    return StateCloud(states, manifest.get("meta") or {})
