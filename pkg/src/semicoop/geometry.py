"""Finite-difference differential geometry on tensor-product grids.

Metrics are stored as one symmetric matrix per grid node.  Connection
coefficients use second-order central differences in the interior and
second-order one-sided stencils at grid edges, so boundary rows are less
accurate than interior ones by a constant factor but keep the same order.

All operations are pure functions of immutable inputs.  Each node's
output depends only on its own difference stencil, so results are
independent of any evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import SingularMetricError, ValidationError
from .grids import GridSpec, require_same_grid

PIVOT_THRESHOLD = 1e-12

LORENTZIAN_SIGNATURE = "(-,+,+)"
RIEMANNIAN_SIGNATURE = "(+,+,+)"


# ---------------------------------------------------------------------------
# difference stencils


def first_derivative(values, spacing, axis):
    """Second-order first derivative along one grid axis."""
    return np.gradient(values, spacing, axis=axis, edge_order=2)


def second_derivative(values, spacing, axis):
    """Second-order pure second derivative along one grid axis.

    Interior nodes use the compact three-point stencil; edges use the
    four-point one-sided stencil (three-point when only 3 nodes exist,
    which is still exact on quadratics).
    """
    f = np.moveaxis(np.asarray(values), axis, 0)
    n = f.shape[0]
    out = np.empty_like(f, dtype=np.result_type(f.dtype, np.float64))
    h2 = spacing * spacing
    out[1:-1] = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / h2
    if n >= 4:
        out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h2
        out[-1] = (2.0 * f[-1] - 5.0 * f[-2] + 4.0 * f[-3] - f[-4]) / h2
    else:
        out[0] = (f[0] - 2.0 * f[1] + f[2]) / h2
        out[-1] = out[0]
    return np.moveaxis(out, 0, axis)


def mixed_derivative(values, spacing_a, axis_a, spacing_b, axis_b):
    """Mixed second derivative as a composition of first derivatives."""
    return first_derivative(
        first_derivative(values, spacing_a, axis_a), spacing_b, axis_b
    )


# ---------------------------------------------------------------------------
# per-node linear algebra


def lu_determinants(matrices):
    """Batched determinant and smallest absolute pivot via partial-pivot LU.

    Parameters
    ----------
    matrices : ndarray (..., d, d)

    Returns
    -------
    (det, min_pivot) : ndarrays of shape ``matrices.shape[:-2]``
    """
    a = np.array(matrices, dtype=float, copy=True)
    batch_shape = a.shape[:-2]
    d = a.shape[-1]
    a = a.reshape(-1, d, d)
    m = a.shape[0]
    det = np.ones(m)
    min_pivot = np.full(m, np.inf)
    rows = np.arange(m)
    for k in range(d):
        piv = np.argmax(np.abs(a[:, k:, k]), axis=1) + k
        swapped = piv != k
        det[swapped] = -det[swapped]
        tmp = a[rows, piv].copy()
        a[rows, piv] = a[:, k]
        a[:, k] = tmp
        pk = a[:, k, k]
        min_pivot = np.minimum(min_pivot, np.abs(pk))
        det = det * pk
        if k + 1 < d:
            with np.errstate(divide="ignore", invalid="ignore"):
                mult = a[:, k + 1 :, k] / pk[:, None]
            mult[~np.isfinite(mult)] = 0.0
            a[:, k + 1 :, k:] -= mult[:, :, None] * a[:, None, k, k:]
    return det.reshape(batch_shape), min_pivot.reshape(batch_shape)


def _first_bad_node(mask):
    idx = np.argwhere(mask)
    return tuple(int(i) for i in idx[0])


# ---------------------------------------------------------------------------
# field containers


@dataclass
class MetricField:
    """Symmetric matrix field with inverse and determinant carried alongside.

    Parameters
    ----------
    values : ndarray (*grid.shape, d, d)
        Per-node symmetric matrices.  Input asymmetry beyond ``1e-12``
        (relative to the matrix scale) is rejected; smaller asymmetry is
        removed by explicit symmetrization so index-symmetry of derived
        quantities holds bit for bit.
    grid : GridSpec
    signature : str
        Bookkeeping tag only; all numerics run on whatever matrices are
        supplied.  The Lorentzian tag marks fields whose time-time
        component would flip sign under the physical signature.
    """

    values: np.ndarray
    grid: GridSpec
    signature: str = RIEMANNIAN_SIGNATURE
    inverse: np.ndarray = field(init=False, repr=False)
    determinant: np.ndarray = field(init=False, repr=False)
    max_condition: float = field(init=False, repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim < 2 or values.shape[-1] != values.shape[-2]:
            raise ValidationError("metric values must end in square matrix axes")
        if values.shape[: self.grid.n_axes] != self.grid.shape:
            raise ValidationError(
                "metric shape does not match grid",
                [f"grid {self.grid.shape}, field {values.shape}"],
            )
        scale = np.maximum(np.abs(values).max(), 1.0)
        asym = np.abs(values - np.swapaxes(values, -1, -2)).max()
        if asym > 1e-12 * scale:
            raise ValidationError(
                f"metric is not symmetric: max |h - h^T| = {asym:.3e}"
            )
        values = 0.5 * (values + np.swapaxes(values, -1, -2))
        self.values = values

        det, min_pivot = lu_determinants(values)
        bad = ~(min_pivot > PIVOT_THRESHOLD)
        if np.any(bad):
            node = _first_bad_node(bad)
            raise SingularMetricError(
                node, f"smallest LU pivot {min_pivot[node]:.3e} <= {PIVOT_THRESHOLD}"
            )
        self.determinant = det
        self.inverse = np.linalg.inv(values)
        self.max_condition = float(np.linalg.cond(values).max())

    @property
    def dim(self):
        return self.values.shape[-1]

    def rescaled(self, factor):
        return MetricField(self.values * factor, self.grid, self.signature)


@dataclass
class ChristoffelField:
    """Connection coefficients ``gamma[..., a, b, c]`` symmetric in (b, c)."""

    values: np.ndarray
    grid: GridSpec

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape[: self.grid.n_axes] != self.grid.shape or v.ndim != self.grid.n_axes + 3:
            raise ValidationError("connection field shape does not match grid")
        self.values = v

    @property
    def dim(self):
        return self.values.shape[-1]

    def lower_symmetry_error(self):
        return float(np.abs(self.values - np.swapaxes(self.values, -1, -2)).max())


@dataclass
class CurvatureBundle:
    """Riemann, Ricci, scalar and Einstein tensors of one metric."""

    riemann: np.ndarray
    ricci: np.ndarray
    scalar: np.ndarray
    einstein: np.ndarray
    grid: GridSpec


# ---------------------------------------------------------------------------
# operations


def christoffel(metric, grid=None):
    """Connection coefficients of a metric field.

    Computes ``gamma^a_{bc} = (1/2) h^{ad} (d_b h_{dc} + d_c h_{db}
    - d_d h_{bc})`` with the difference stencils of this module.  The
    lower-index symmetry is exact because the two symmetric derivative
    terms are accumulated commutatively and the metric is stored exactly
    symmetric.

    Parameters
    ----------
    metric : MetricField
        Matrix dimension must equal the number of grid axes.
    grid : GridSpec, optional
        Must equal ``metric.grid`` when given.
    """
    if grid is not None:
        require_same_grid(metric.grid, grid)
    grid = metric.grid
    d = metric.dim
    if d != grid.n_axes:
        raise ValidationError(
            f"metric dimension {d} does not match grid with {grid.n_axes} axes"
        )
    h = metric.values
    dh = [first_derivative(h, grid.spacing(k), axis=k) for k in range(d)]

    t = np.empty(grid.shape + (d, d, d))
    for dd in range(d):
        for b in range(d):
            for c in range(d):
                t[..., dd, b, c] = (
                    dh[b][..., dd, c] + dh[c][..., dd, b] - dh[dd][..., b, c]
                )
    gamma = 0.5 * np.einsum("...ad,...dbc->...abc", metric.inverse, t)
    return ChristoffelField(gamma, grid)


def curvature(metric, chris):
    """Riemann tensor from the connection, with contractions.

    Riemann ``R^a_{bcd} = d_c gamma^a_{db} - d_d gamma^a_{cb}
    + gamma^a_{ce} gamma^e_{db} - gamma^a_{de} gamma^e_{cb}``, Ricci by
    contraction on the first and third slots, scalar by inverse-metric
    contraction, and the Einstein combination assembled from those.
    """
    grid = require_same_grid(metric, chris)
    d = metric.dim
    g = chris.values
    dg = [first_derivative(g, grid.spacing(k), axis=k) for k in range(d)]

    riemann = np.empty(grid.shape + (d, d, d, d))
    gg = np.einsum("...ace,...edb->...abcd", g, g)
    for a in range(d):
        for b in range(d):
            for c in range(d):
                for e in range(d):
                    riemann[..., a, b, c, e] = (
                        dg[c][..., a, e, b] - dg[e][..., a, c, b]
                    )
    riemann += gg - np.swapaxes(gg, -1, -2)

    ricci = np.einsum("...abad->...bd", riemann)
    scalar = np.einsum("...bd,...bd->...", metric.inverse, ricci)
    einstein = ricci - 0.5 * scalar[..., None, None] * metric.values
    return CurvatureBundle(riemann, ricci, scalar, einstein, grid)


def combined_metric(einstein_bundle, flat, stubbornness_field, gamma):
    """Blend a curvature-derived metric into a flat background.

    Per node: ``N = exp(gamma * b) * G + eta`` where ``G`` is the Einstein
    tensor of the curved field, ``eta`` the flat metric and ``b`` the
    stubbornness field.  ``G`` is symmetrized first; finite differences
    leave it asymmetric at discretization level.

    Raises on ``gamma`` outside ``(0, 2]``.
    """
    gamma = float(gamma)
    if not 0.0 < gamma <= 2.0:
        raise ValidationError("gamma must lie in (0,2]")
    grid = require_same_grid(einstein_bundle, flat)
    b = np.asarray(stubbornness_field, dtype=float)
    if b.shape != grid.shape:
        raise ValidationError(
            "stubbornness field shape does not match grid",
            [f"grid {grid.shape}, field {b.shape}"],
        )
    g = einstein_bundle.einstein
    g = 0.5 * (g + np.swapaxes(g, -1, -2))
    factor = np.exp(gamma * b)[..., None, None]
    return MetricField(factor * g + flat.values, grid, flat.signature)


def contracted_christoffel(metric, chris):
    """``h^{ab} gamma^c_{ab}`` per node, one value per coordinate ``c``."""
    require_same_grid(metric, chris)
    return np.einsum("...ab,...cab->...c", metric.inverse, chris.values)


def covariant_laplacian(metric, chris, values):
    """Laplace operator of a scalar field in curved coordinates.

    Returns ``h^{ab} d_a d_b f - (h^{ab} gamma^c_{ab}) d_c f`` using the
    module stencils.  On a flat metric this reduces exactly to the plain
    discrete Laplacian: the inverse metric is the identity, so mixed
    terms carry zero coefficients and the first-order terms vanish.
    """
    grid = require_same_grid(metric, chris)
    d = metric.dim
    f = np.asarray(values)
    if f.shape != grid.shape:
        raise ValidationError("field shape does not match grid")
    hinv = metric.inverse
    out = np.zeros(grid.shape, dtype=np.result_type(f.dtype, np.float64))
    for a in range(d):
        for b in range(d):
            coeff = hinv[..., a, b]
            if a == b:
                out += coeff * second_derivative(f, grid.spacing(a), a)
            else:
                out += coeff * mixed_derivative(
                    f, grid.spacing(a), a, grid.spacing(b), b
                )
    contr = contracted_christoffel(metric, chris)
    for c in range(d):
        out -= contr[..., c] * first_derivative(f, grid.spacing(c), c)
    return out


def plain_laplacian(values, grid):
    """Sum of pure second derivatives, same stencils as the curved path."""
    f = np.asarray(values)
    out = np.zeros(grid.shape, dtype=np.result_type(f.dtype, np.float64))
    for a in range(grid.n_axes):
        out += 1.0 * second_derivative(f, grid.spacing(a), a)
    return out


# ---------------------------------------------------------------------------
# sparse interior operator (shared by the evolution solver)


def _interior_1d_operators(n, spacing):
    """Central first- and compact second-difference matrices on interior
    nodes with zero boundary values."""
    m = n - 2
    h = spacing
    d1 = sp.diags([np.full(m - 1, -0.5 / h), np.full(m - 1, 0.5 / h)], [-1, 1])
    d2 = sp.diags(
        [
            np.full(m - 1, 1.0 / h**2),
            np.full(m, -2.0 / h**2),
            np.full(m - 1, 1.0 / h**2),
        ],
        [-1, 0, 1],
    )
    return sp.csr_matrix(d1), sp.csr_matrix(d2)


def laplace_operator_matrix(metric, chris):
    """Sparse matrix of the covariant Laplacian on interior nodes.

    Boundary values are treated as zero (Dirichlet).  Rows and columns
    are ordered row-major over the interior nodes, with the stencils of
    :func:`covariant_laplacian` in the interior.

    Only implemented for two-axis grids, which is what the evolution
    solver needs.
    """
    grid = require_same_grid(metric, chris)
    if grid.n_axes != 2:
        raise ValidationError("operator assembly expects a two-axis grid")
    n1, n2 = grid.shape
    m1, m2 = n1 - 2, n2 - 2
    d1a, d2a = _interior_1d_operators(n1, grid.spacing(0))
    d1b, d2b = _interior_1d_operators(n2, grid.spacing(1))
    eye1 = sp.identity(m1, format="csr")
    eye2 = sp.identity(m2, format="csr")

    ops = {
        (0, 0): sp.kron(d2a, eye2, format="csr"),
        (1, 1): sp.kron(eye1, d2b, format="csr"),
        (0, 1): sp.kron(d1a, d1b, format="csr"),
    }
    ops[(1, 0)] = ops[(0, 1)]
    grads = {
        0: sp.kron(d1a, eye2, format="csr"),
        1: sp.kron(eye1, d1b, format="csr"),
    }

    hinv = metric.inverse[1:-1, 1:-1]
    contr = contracted_christoffel(metric, chris)[1:-1, 1:-1]

    size = m1 * m2
    matrix = sp.csr_matrix((size, size))
    for (a, b), op in ops.items():
        coeff = hinv[..., a, b].reshape(-1)
        if np.any(coeff):
            matrix = matrix + sp.diags(coeff) @ op
    for c, op in grads.items():
        coeff = contr[..., c].reshape(-1)
        if np.any(coeff):
            matrix = matrix - sp.diags(coeff) @ op
    return sp.csr_matrix(matrix)


# ---------------------------------------------------------------------------
# metric presets


def flat_metric(grid, dim=None, signature=RIEMANNIAN_SIGNATURE):
    """Identity metric on every node."""
    d = grid.n_axes if dim is None else int(dim)
    values = np.zeros(grid.shape + (d, d))
    values[...] = np.eye(d)
    return MetricField(values, grid, signature)


def constant_metric(grid, matrix, signature=RIEMANNIAN_SIGNATURE):
    """One fixed symmetric matrix replicated over the grid."""
    m = np.asarray(matrix, dtype=float)
    values = np.zeros(grid.shape + m.shape)
    values[...] = m
    return MetricField(values, grid, signature)


def sphere_metric(grid, radius=1.0, theta_axis=None):
    """Round-sphere line element ``r^2 (dtheta^2 + sin^2 theta dphi^2)``.

    On a two-axis grid the first axis is the colatitude ``theta``; on a
    three-axis grid the middle axis is ``theta`` and the leading axis is
    a flat product direction.  The grid must keep ``sin(theta)`` bounded
    away from zero, otherwise the metric is singular at the poles.
    """
    d = grid.n_axes
    if theta_axis is None:
        theta_axis = 0 if d == 2 else 1
    theta = grid.meshgrid()[theta_axis]
    values = np.zeros(grid.shape + (d, d))
    for k in range(d):
        values[..., k, k] = 1.0
    phi_axis = theta_axis + 1
    if phi_axis >= d:
        raise ValidationError("sphere preset needs an axis after the colatitude")
    values[..., theta_axis, theta_axis] = radius**2
    values[..., phi_axis, phi_axis] = (radius * np.sin(theta)) ** 2
    return MetricField(values, grid)
