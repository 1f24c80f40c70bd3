"""Binary I/O for grid fields and path ensembles.

Grid field layout (little-endian throughout):

========  ====================================================
bytes     content
========  ====================================================
0:8       magic ``b"SCGRID01"``
8:12      flags (uint32); bit 0 set for complex payload
12:16     number of grid axes (uint32)
16:20     tensor rank, i.e. trailing non-grid axes (uint32)
20:24     reserved (uint32, zero)
...       axis node counts, uint64 per grid axis
...       tensor dimensions, uint64 per tensor axis
...       payload: float64 row-major; complex data interleaves
          real and imaginary parts per element
========  ====================================================

A JSON descriptor is written next to the binary file (same path with a
``.json`` suffix appended) recording shapes, dtype, grid extents when
known, and the package version.  Descriptors carry no timestamps so a
rerun with identical inputs produces byte-identical files.

Path ensembles use a similar header (magic ``b"SCPATH01"``) followed by
``paths * (steps + 1) * components`` float64 values, one path after
another.
"""

from __future__ import annotations

import hashlib
import json
import struct

import numpy as np

from . import __version__
from .errors import ValidationError
from .grids import GridSpec

_GRID_MAGIC = b"SCGRID01"
_PATH_MAGIC = b"SCPATH01"


def _descriptor_path(path):
    return str(path) + ".json"


def write_grid(path, values, grid=None, extra=None):
    """Write a grid field and its JSON descriptor.

    Parameters
    ----------
    path : str
        Output file; the descriptor goes to ``path + ".json"``.
    values : ndarray
        Leading axes are grid axes, trailing axes (if any) are tensor
        components.  Complex data is stored interleaved.
    grid : GridSpec, optional
        When given, its extents are recorded in the descriptor so the
        field can be rebuilt with correct spacings.
    extra : dict, optional
        Additional descriptor entries (must be JSON serializable).
    """
    values = np.asarray(values)
    if grid is not None:
        n_axes = grid.n_axes
        if values.shape[:n_axes] != grid.shape:
            raise ValidationError(
                "field shape does not match grid",
                [f"grid shape {grid.shape}, field shape {values.shape}"],
            )
    else:
        n_axes = values.ndim
    grid_shape = values.shape[:n_axes]
    tensor_shape = values.shape[n_axes:]
    is_complex = np.iscomplexobj(values)

    header = bytearray()
    header += _GRID_MAGIC
    header += struct.pack("<IIII", 1 if is_complex else 0, n_axes, len(tensor_shape), 0)
    header += struct.pack(f"<{n_axes}Q", *grid_shape)
    if tensor_shape:
        header += struct.pack(f"<{len(tensor_shape)}Q", *tensor_shape)

    if is_complex:
        payload = np.empty(values.shape + (2,), dtype="<f8")
        payload[..., 0] = values.real
        payload[..., 1] = values.imag
    else:
        payload = np.ascontiguousarray(values, dtype="<f8")

    with open(path, "wb") as fh:
        fh.write(bytes(header))
        fh.write(payload.tobytes())

    descriptor = {
        "format": "semicoop-grid",
        "version": __version__,
        "dtype": "complex128" if is_complex else "float64",
        "grid_shape": list(grid_shape),
        "tensor_shape": list(tensor_shape),
    }
    if grid is not None:
        descriptor["grid"] = grid.to_dict()
    if extra:
        descriptor.update(extra)
    with open(_descriptor_path(path), "w") as fh:
        json.dump(descriptor, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_grid(path):
    """Read a grid field written by :func:`write_grid`.

    Returns
    -------
    (values, grid, descriptor)
        ``grid`` is a :class:`GridSpec` when the descriptor recorded
        extents, otherwise ``None``.
    """
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != _GRID_MAGIC:
            raise ValidationError(f"{path}: not a grid field file")
        flags, n_axes, rank, _ = struct.unpack("<IIII", fh.read(16))
        grid_shape = struct.unpack(f"<{n_axes}Q", fh.read(8 * n_axes))
        tensor_shape = struct.unpack(f"<{rank}Q", fh.read(8 * rank)) if rank else ()
        shape = tuple(grid_shape) + tuple(tensor_shape)
        count = int(np.prod(shape)) if shape else 1
        if flags & 1:
            raw = np.frombuffer(fh.read(16 * count), dtype="<f8").reshape(shape + (2,))
            values = raw[..., 0] + 1j * raw[..., 1]
        else:
            values = np.frombuffer(fh.read(8 * count), dtype="<f8").reshape(shape)
    values = np.array(values)

    descriptor = {}
    grid = None
    try:
        with open(_descriptor_path(path)) as fh:
            descriptor = json.load(fh)
        if "grid" in descriptor:
            grid = GridSpec.from_dict(descriptor["grid"])
    except FileNotFoundError:
        pass
    return values, grid, descriptor


def write_ensemble(path, times, values, seed=None, extra=None):
    """Write a path ensemble: per-path float64 blocks after a small header."""
    values = np.ascontiguousarray(values, dtype="<f8")
    if values.ndim != 3:
        raise ValidationError("ensemble values must have shape (paths, steps+1, components)")
    paths, nsteps, comps = values.shape
    with open(path, "wb") as fh:
        fh.write(_PATH_MAGIC)
        fh.write(struct.pack("<QQI I", paths, nsteps, comps, 0))
        fh.write(np.ascontiguousarray(times, dtype="<f8").tobytes())
        fh.write(values.tobytes())
    descriptor = {
        "format": "semicoop-paths",
        "version": __version__,
        "paths": paths,
        "steps": nsteps - 1,
        "components": comps,
    }
    if seed is not None:
        descriptor["seed"] = int(seed)
    if extra:
        descriptor.update(extra)
    with open(_descriptor_path(path), "w") as fh:
        json.dump(descriptor, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_ensemble(path):
    """Read a path ensemble written by :func:`write_ensemble`."""
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != _PATH_MAGIC:
            raise ValidationError(f"{path}: not a path ensemble file")
        paths, nsteps, comps, _ = struct.unpack("<QQI I", fh.read(24))
        times = np.frombuffer(fh.read(8 * nsteps), dtype="<f8")
        values = np.frombuffer(fh.read(8 * paths * nsteps * comps), dtype="<f8")
    return np.array(times), np.array(values).reshape(paths, nsteps, comps)


def sha256_of(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
