"""Discretized membrane-style action over the strategy world volume.

The world volume is a three-axis grid (time and two strategy axes).  An
embedding field maps each node into the transverse directions of an
11-dimensional background, occupying background index slots 4..11; the
leading three background slots mirror the world-volume directions and
are carried as data only.

The action density per node is

    (1/2) sqrt(h) [ 3 + h^{ab} Npull_{ab} (p*b)^W
                    - (1/3!sqrt(h)) eps^{abc} Hpull_{abc} (p*b)^{1-W}
                    + ghost/(pi*eps)  - Q*R*xbar - lambda * residual ]

where ``Npull`` and ``Hpull`` are the pull-backs of the background
metric and of the antisymmetric coupling, ``p*b`` the profit weighted by
stubbornness, ``W`` the profit freedom exponent, and the residual term
enforces the share dynamics through the multiplier field.  Integration
is by tensor-product trapezoid weights, which makes the action exactly
additive across a partition of the time axis at a grid plane.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError
from .geometry import MetricField, first_derivative
from .grids import require_same_grid

WORLD_DIM = 3
TRANSVERSE_DIM = 8
BACKGROUND_DIM = 11

#: Exact alternating symbol on three indices.
LEVI_CIVITA = np.zeros((3, 3, 3))
LEVI_CIVITA[0, 1, 2] = LEVI_CIVITA[1, 2, 0] = LEVI_CIVITA[2, 0, 1] = 1.0
LEVI_CIVITA[0, 2, 1] = LEVI_CIVITA[2, 1, 0] = LEVI_CIVITA[1, 0, 2] = -1.0


def transverse_pattern_from_world_det(world_metric):
    """Default antisymmetric coupling: the alternating symbol on the
    first three transverse slots scaled by ``-1/det`` of the world
    metric per node.

    Returns ``(scalar_grid, pattern)`` where the full coupling is their
    product; storing the factorization keeps the memory footprint flat.
    """
    scalar = -1.0 / world_metric.determinant
    pattern = np.zeros((TRANSVERSE_DIM,) * 3)
    pattern[:3, :3, :3] = LEVI_CIVITA
    return scalar, pattern


def _check_antisymmetric(pattern):
    for axes in ((0, 1), (0, 2), (1, 2)):
        swapped = np.swapaxes(pattern, *axes)
        if not np.array_equal(swapped, -pattern):
            raise ValidationError(
                "coupling pattern must be antisymmetric in every index pair"
            )


@dataclass
class BraneConfiguration:
    """Embedding, metrics, coupling, ghosts and scalar data of one brane.

    Parameters
    ----------
    embedding : ndarray (*grid.shape, 8)
        Transverse coordinates per node (background slots 4..11).
    world_metric : MetricField
        3x3 field on the same grid.
    background : MetricField or ndarray
        11x11 background metric, either one constant matrix or a field;
        it is only ever contracted, never differentiated.
    coupling_scalar, coupling_pattern :
        Factorized antisymmetric coupling; defaults derive from the
        world-metric determinant.
    ghost_e : ndarray (*grid.shape, 3, 3), optional
    ghost_c : ndarray (*grid.shape, 3), optional
        Gauge-fixing fields; evaluated as ordinary real fields.
    multiplier : ndarray (*grid.shape), optional
        Constraint multiplier field.
    freedom_exponent : float in (0, 1), strictly interior.
    mean_share, stubbornness_measure : floats.
    ricci_scalar : float or ndarray
        Curvature scalar entering the background potential term.
    """

    embedding: np.ndarray
    world_metric: MetricField
    background: object
    coupling_scalar: np.ndarray = None
    coupling_pattern: np.ndarray = None
    ghost_e: np.ndarray = None
    ghost_c: np.ndarray = None
    multiplier: np.ndarray = None
    freedom_exponent: float = 0.5
    mean_share: float = 0.0
    stubbornness_measure: float = 2.0
    ricci_scalar: object = 0.0

    def __post_init__(self):
        grid = self.world_metric.grid
        if grid.n_axes != WORLD_DIM:
            raise ValidationError("world volume must have 3 axes")
        emb = np.asarray(self.embedding, dtype=float)
        if emb.shape != grid.shape + (TRANSVERSE_DIM,):
            raise ValidationError(
                f"embedding must have shape {grid.shape + (TRANSVERSE_DIM,)}"
            )
        self.embedding = emb
        if not 0.0 < self.freedom_exponent < 1.0:
            raise ValidationError("freedom exponent must lie strictly inside (0,1)")

        if self.coupling_scalar is None or self.coupling_pattern is None:
            scalar, pattern = transverse_pattern_from_world_det(self.world_metric)
            self.coupling_scalar = scalar
            self.coupling_pattern = pattern
        else:
            self.coupling_scalar = np.broadcast_to(
                np.asarray(self.coupling_scalar, dtype=float), grid.shape
            ).copy()
            self.coupling_pattern = np.asarray(self.coupling_pattern, dtype=float)
        if self.coupling_pattern.shape != (TRANSVERSE_DIM,) * 3:
            raise ValidationError("coupling pattern must be 8x8x8")
        _check_antisymmetric(self.coupling_pattern)

        if (self.ghost_e is None) != (self.ghost_c is None):
            raise ValidationError("ghost fields come in pairs (e together with c)")
        if self.ghost_e is not None:
            self.ghost_e = np.asarray(self.ghost_e, dtype=float)
            self.ghost_c = np.asarray(self.ghost_c, dtype=float)
            if self.ghost_e.shape != grid.shape + (3, 3):
                raise ValidationError("ghost e field must have shape (*grid, 3, 3)")
            if self.ghost_c.shape != grid.shape + (3,):
                raise ValidationError("ghost c field must have shape (*grid, 3)")
        if self.multiplier is not None:
            self.multiplier = np.broadcast_to(
                np.asarray(self.multiplier, dtype=float), grid.shape
            ).copy()

    @property
    def grid(self):
        return self.world_metric.grid

    def background_transverse(self):
        """The 8x8 background block the pull-back contracts against."""
        values = (
            self.background.values
            if isinstance(self.background, MetricField)
            else np.asarray(self.background, dtype=float)
        )
        if values.shape[-2:] != (BACKGROUND_DIM, BACKGROUND_DIM):
            raise ValidationError("background metric must be 11x11")
        return values[..., WORLD_DIM:, WORLD_DIM:]

    def embedding_jacobian(self):
        """``J[..., a, p] = d embedding_p / d sigma_a`` by the module
        difference stencils."""
        grid = self.grid
        cols = [
            first_derivative(self.embedding, grid.spacing(a), axis=a)
            for a in range(WORLD_DIM)
        ]
        return np.stack(cols, axis=-2)


def pullbacks(config):
    """Pull the background metric and coupling onto the world volume.

    Returns
    -------
    (npull, hpull)
        ``npull`` is the symmetric per-node 3x3 contraction of the
        background block with the embedding Jacobian.  ``hpull`` is the
        fully antisymmetric per-node 3-index tensor; it is reconstructed
        from its single independent component so antisymmetry holds
        exactly, sign flips included.
    """
    jac = config.embedding_jacobian()
    ntrans = config.background_transverse()
    if ntrans.ndim == 2:
        npull = np.einsum("...ap,...bq,pq->...ab", jac, jac, ntrans)
    else:
        require_same_grid(config.grid, config.world_metric.grid)
        npull = np.einsum("...ap,...bq,...pq->...ab", jac, jac, ntrans)
    npull = 0.5 * (npull + np.swapaxes(npull, -1, -2))

    raw = np.einsum(
        "...ap,...bq,...cr,pqr->...abc", jac, jac, jac, config.coupling_pattern
    )
    component = np.einsum("abc,...abc->...", LEVI_CIVITA, raw) / 6.0
    component = component * config.coupling_scalar
    hpull = component[..., None, None, None] * LEVI_CIVITA
    return npull, hpull


def _profit_weight(config, firm, profit):
    """Per-node profit weighted by the firm's stubbornness value."""
    grid = config.grid
    s = grid.meshgrid()[0]
    u_own = firm.strategy
    u_other = firm.alpha_other**firm.coop_other
    values = np.asarray(profit(s, firm.share, u_own, u_other), dtype=float)
    weighted = np.broadcast_to(values, grid.shape) * firm.stubbornness
    return weighted


def _powers(weight, exponent):
    if np.any(weight <= 0.0):
        node = tuple(int(i) for i in np.argwhere(weight <= 0.0)[0])
        raise NumericalError(
            f"profit weight must be positive for fractional exponents; "
            f"value {weight[node]:.6g} at node {node}"
        )
    return weight**exponent, weight ** (1.0 - exponent)


def scalar_action_terms(config, firm, profit, ghost_epsilon=None):
    """Per-node bracket of the action without multiplier or potential
    terms: ``3 + kinetic(world) - kinetic(transverse) [+ ghost]``.

    This is the scalar the effective-scale extraction consumes.
    """
    npull, hpull = pullbacks(config)
    sqrt_h = np.sqrt(config.world_metric.determinant)
    pw = _profit_weight(config, firm, profit)
    pw_w, pw_1mw = _powers(pw, config.freedom_exponent)

    world_term = np.einsum("...ab,...ab->...", config.world_metric.inverse, npull)
    trans_term = np.einsum("abc,...abc->...", LEVI_CIVITA, hpull) / (6.0 * sqrt_h)
    terms = 3.0 + world_term * pw_w - trans_term * pw_1mw
    if ghost_epsilon is not None and config.ghost_e is not None:
        terms = terms + ghost_density(config) / (np.pi * ghost_epsilon)
    return terms


def evaluate_action(config, firm, profit, residuals=None, ghost_epsilon=None):
    """Trapezoid value of the action over the world volume.

    Parameters
    ----------
    residuals : ndarray, optional
        Discrete dynamics residual per node, either scalar or with a
        trailing component axis (summed).  Paths that satisfy the
        discrete share dynamics exactly contribute zero here for any
        multiplier.
    ghost_epsilon : float, optional
        When given and ghost fields are present, the gauge-fixing
        density enters the bracket divided by ``pi * ghost_epsilon``.

    Returns the real action value; phase conventions are applied by the
    transition-kernel layer, not here.
    """
    grid = config.grid
    terms = scalar_action_terms(config, firm, profit, ghost_epsilon)

    potential = (
        config.stubbornness_measure
        * np.broadcast_to(np.asarray(config.ricci_scalar, dtype=float), grid.shape)
        * config.mean_share
    )
    bracket = terms - potential

    if residuals is not None:
        res = np.asarray(residuals, dtype=float)
        if res.shape == grid.shape + (3,):
            res = res.sum(axis=-1)
        elif res.shape != grid.shape:
            raise ValidationError("residual grid shape does not match world volume")
        lam = config.multiplier if config.multiplier is not None else 0.0
        bracket = bracket - lam * res

    sqrt_h = np.sqrt(config.world_metric.determinant)
    density = 0.5 * sqrt_h * bracket
    weights = grid.trapezoid_weights()
    return float(np.sum(weights * density))


def ghost_covariant_derivative(config, chris):
    """Raised covariant derivative of the ghost vector field.

    ``out[..., a, b] = h^{ac} (d_c ghost^b + gamma^b_{cd} ghost^d)``.
    """
    if config.ghost_c is None:
        raise ValidationError("configuration has no ghost fields")
    grid = config.grid
    c_field = config.ghost_c
    dc = np.stack(
        [first_derivative(c_field, grid.spacing(t), axis=t) for t in range(WORLD_DIM)],
        axis=-2,
    )
    cov = dc + np.einsum("...btd,...d->...tb", chris.values, c_field)
    return np.einsum("...ac,...cb->...ab", config.world_metric.inverse, cov)


def ghost_action(config, chris, epsilon_step):
    """Gauge-fixing action ``(1/(2*pi*eps)) int sqrt(h) e : grad(c)``."""
    if config.ghost_e is None or config.ghost_c is None:
        raise ValidationError("ghost action needs both ghost fields")
    if not epsilon_step > 0:
        raise ValidationError("epsilon step must be positive")
    grid = config.grid
    raised = ghost_covariant_derivative(config, chris)
    density = np.einsum("...ab,...ab->...", config.ghost_e, raised)
    sqrt_h = np.sqrt(config.world_metric.determinant)
    weights = grid.trapezoid_weights()
    integral = float(np.sum(weights * sqrt_h * density))
    return integral / (2.0 * np.pi * epsilon_step)


def ghost_density(config):
    """Flat-connection ghost density ``e^{ab} h^{ac} d_c ghost^b``.

    Used inside the action bracket; callers that need the curved
    covariant version integrate :func:`ghost_action` instead.
    """
    grid = config.grid
    dc = np.stack(
        [
            first_derivative(config.ghost_c, grid.spacing(t), axis=t)
            for t in range(WORLD_DIM)
        ],
        axis=-2,
    )
    raised = np.einsum("...ac,...cb->...ab", config.world_metric.inverse, dc)
    return np.einsum("...ab,...ab->...", config.ghost_e, raised)


# ---------------------------------------------------------------------------
# gauge-fixing determinant

_FP_DENSE_LIMIT = 20000


@dataclass(frozen=True)
class FPDeterminant:
    """Sign and log magnitude of the gauge-fixing operator determinant.

    ``singular`` marks a vanishing determinant; ``log_abs_det`` is then
    ``-inf``.
    """

    sign: float
    log_abs_det: float

    @property
    def singular(self):
        return not np.isfinite(self.log_abs_det)


def fp_log_determinant(matrix):
    """Log-determinant of an explicit operator matrix (dense LU)."""
    import scipy.sparse as sp

    if sp.issparse(matrix):
        matrix = matrix.toarray()
    sign, logdet = np.linalg.slogdet(np.asarray(matrix, dtype=float))
    if sign == 0.0:
        return FPDeterminant(0.0, -np.inf)
    return FPDeterminant(float(sign), float(logdet))


def _interior_first_difference(n, spacing):
    import scipy.sparse as sp

    m = n - 2
    return sp.csr_matrix(
        sp.diags([np.full(m - 1, -0.5 / spacing), np.full(m - 1, 0.5 / spacing)], [-1, 1])
    )


def fp_operator_matrix(config, chris):
    """Square pairing matrix between ghost fields on interior nodes.

    The ghost bilinear pairs a rank-2 antighost with the covariant
    derivative of the ghost vector.  Restricted to the diagonal antighost
    pattern (the identity pattern used throughout), the pairing becomes a
    square operator on the ghost vector alone:

        (F c)^b(n) = sqrt(h) h^{bc} ( d_c c^b + gamma^b_{cd} c^d )

    assembled on interior nodes with zero boundary values and central
    differences.  Degrees of freedom are ordered node-major, component
    within node.
    """
    import scipy.sparse as sp

    grid = require_same_grid(config.world_metric, chris)
    shape = grid.shape
    m = tuple(n - 2 for n in shape)
    n_nodes = int(np.prod(m))
    size = WORLD_DIM * n_nodes

    inner = tuple(slice(1, -1) for _ in range(WORLD_DIM))
    hinv = config.world_metric.inverse[inner]
    sqrt_h = np.sqrt(config.world_metric.determinant)[inner]
    gamma = chris.values[inner]

    d1 = [_interior_first_difference(shape[k], grid.spacing(k)) for k in range(WORLD_DIM)]
    eyes = [sp.identity(mk, format="csr") for mk in m]
    node_ops = []
    for c in range(WORLD_DIM):
        op = None
        for k in range(WORLD_DIM):
            block = d1[k] if k == c else eyes[k]
            op = block if op is None else sp.kron(op, block, format="csr")
        node_ops.append(op)

    eye3 = sp.identity(WORLD_DIM, format="csr")
    matrix = sp.csr_matrix((size, size))
    for c in range(WORLD_DIM):
        weights = (sqrt_h[..., None] * hinv[..., :, c]).reshape(-1)
        matrix = matrix + sp.diags(weights) @ sp.kron(node_ops[c], eye3, format="csr")

    local = sqrt_h[..., None, None] * np.einsum("...bc,...bcd->...bd", hinv, gamma)
    local = local.reshape(n_nodes, WORLD_DIM, WORLD_DIM)
    if np.any(local):
        rows = np.repeat(
            np.arange(n_nodes) * WORLD_DIM, WORLD_DIM * WORLD_DIM
        ) + np.tile(np.repeat(np.arange(WORLD_DIM), WORLD_DIM), n_nodes)
        cols = np.repeat(np.arange(n_nodes) * WORLD_DIM, WORLD_DIM * WORLD_DIM) + np.tile(
            np.tile(np.arange(WORLD_DIM), WORLD_DIM), n_nodes
        )
        matrix = matrix + sp.csr_matrix(
            (local.reshape(-1), (rows, cols)), shape=(size, size)
        )
    return matrix


def fp_determinant(config, chris):
    """Determinant of the gauge-fixing operator on interior nodes.

    Returns the determinant of the operator itself (the anticommuting
    Gaussian convention), as sign and log magnitude; a singular operator
    is flagged with ``-inf``.
    """
    matrix = fp_operator_matrix(config, chris)
    if matrix.shape[0] > _FP_DENSE_LIMIT:
        raise ValidationError(
            f"gauge-fixing operator has {matrix.shape[0]} degrees of freedom; "
            f"dense determinant limited to {_FP_DENSE_LIMIT}"
        )
    return fp_log_determinant(matrix)
