"""Uniform tensor-product grids.

A grid covers a box ``[a_0,b_0] x ... x [a_{d-1},b_{d-1}]`` with a fixed
node count per axis.  By convention the first axis is the evolution (time)
axis when a computation distinguishes one; purely spatial grids simply use
all axes symmetrically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridMismatchError, ValidationError


@dataclass(frozen=True)
class GridSpec:
    """Extents and node counts of a uniform tensor-product grid.

    Parameters
    ----------
    extents : tuple of (float, float)
        Inclusive (start, stop) per axis.
    counts : tuple of int
        Node count per axis, at least 3 (central differences need an
        interior).
    """

    extents: tuple
    counts: tuple

    def __post_init__(self):
        extents = tuple((float(a), float(b)) for a, b in self.extents)
        counts = tuple(int(n) for n in self.counts)
        object.__setattr__(self, "extents", extents)
        object.__setattr__(self, "counts", counts)
        problems = []
        if len(extents) != len(counts):
            problems.append("extents and counts must have the same length")
        if not extents:
            problems.append("grid needs at least one axis")
        for k, (a, b) in enumerate(extents):
            if not (np.isfinite(a) and np.isfinite(b)):
                problems.append(f"axis {k}: extent must be finite")
            elif b <= a:
                problems.append(f"axis {k}: extent must satisfy start < stop")
        for k, n in enumerate(counts):
            if n < 3:
                problems.append(f"axis {k}: need at least 3 nodes, got {n}")
        if problems:
            raise ValidationError("invalid grid specification", problems)

    @classmethod
    def from_axes(cls, *axes):
        """Build from ``(start, stop, count)`` triples, one per axis."""
        return cls(
            extents=tuple((a, b) for a, b, _ in axes),
            counts=tuple(n for _, _, n in axes),
        )

    @property
    def n_axes(self):
        return len(self.counts)

    @property
    def shape(self):
        return self.counts

    @property
    def n_nodes(self):
        return int(np.prod(self.counts))

    def spacing(self, axis):
        a, b = self.extents[axis]
        return (b - a) / (self.counts[axis] - 1)

    @property
    def spacings(self):
        return tuple(self.spacing(k) for k in range(self.n_axes))

    def coordinates(self, axis):
        a, b = self.extents[axis]
        return np.linspace(a, b, self.counts[axis])

    def meshgrid(self):
        """Coordinate arrays of shape ``self.shape``, one per axis."""
        return np.meshgrid(
            *(self.coordinates(k) for k in range(self.n_axes)), indexing="ij"
        )

    def trapezoid_weights(self):
        """Tensor-product trapezoid quadrature weights over the box."""
        w = np.ones(self.shape)
        for k in range(self.n_axes):
            wk = np.full(self.counts[k], self.spacing(k))
            wk[0] *= 0.5
            wk[-1] *= 0.5
            shape = [1] * self.n_axes
            shape[k] = self.counts[k]
            w = w * wk.reshape(shape)
        return w

    @property
    def cell_volume(self):
        return float(np.prod(self.spacings))

    def subgrid(self, axis, start, stop):
        """Restrict one axis to node index range ``[start, stop]`` inclusive."""
        lo = self.coordinates(axis)[start]
        hi = self.coordinates(axis)[stop]
        extents = list(self.extents)
        counts = list(self.counts)
        extents[axis] = (lo, hi)
        counts[axis] = stop - start + 1
        return GridSpec(tuple(extents), tuple(counts))

    def to_dict(self):
        return {"extents": [list(e) for e in self.extents], "counts": list(self.counts)}

    @classmethod
    def from_dict(cls, data):
        return cls(
            extents=tuple(tuple(e) for e in data["extents"]),
            counts=tuple(data["counts"]),
        )


def require_same_grid(*objects):
    """Raise :class:`GridMismatchError` unless all objects share one grid.

    Accepts anything with a ``grid`` attribute or bare :class:`GridSpec`
    instances.
    """
    grids = [obj if isinstance(obj, GridSpec) else obj.grid for obj in objects]
    first = grids[0]
    for g in grids[1:]:
        if g != first:
            raise GridMismatchError(
                "operands live on different grids",
                [f"expected {first.to_dict()}, got {g.to_dict()}"],
            )
    return first
