"""Gaussian free field sampling and the stubbornness-measure map.

The stubbornness field ``b`` of a governing body is a discrete Gaussian
free field on a square grid with zero (Dirichlet) boundary.  Its
covariance is ``2 * pi`` times the Green's function of the five-point
discrete Laplacian, matching a Dirichlet energy carrying a ``1/(2*pi)``
prefactor.  Sampling goes through the exact eigenbasis of the discrete
operator (a two-dimensional sine transform), so there is no burn-in and
every sample is an exact finite-dimensional Gaussian.

The coupling strength ``gamma`` of the governing body maps to the
measure ``Q = 2/gamma + gamma/2``; rigid bodies sit at the minimum
``Q = 2``, flexible ones send ``Q`` to infinity.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.fft import dstn

from .errors import RangeOverflowError, ValidationError

GFF_ENERGY_SCALE = 2.0 * np.pi

BROWNIAN_SURFACE_GAMMA = np.sqrt(8.0 / 3.0)

_EXP_LIMIT = 700.0


class GFFSampler:
    """Seeded sampler for the Dirichlet Gaussian free field.

    One sampler holds one generator; concurrent use requires one sampler
    per task.  Boundary nodes are exactly zero.

    Parameters
    ----------
    grid_size : int
        Nodes per side including the boundary ring, at least 4.
    seed : int
    domain_length : float
        Side length of the square domain (default 1).
    """

    def __init__(self, grid_size, seed, domain_length=1.0):
        n = int(grid_size)
        if n < 4:
            raise ValidationError("grid size must be at least 4")
        self.grid_size = n
        self.seed = int(seed)
        self.spacing = float(domain_length) / (n - 1)
        m = n - 2
        j = np.arange(1, m + 1)
        lam_1d = (4.0 / self.spacing**2) * np.sin(j * np.pi / (2.0 * (m + 1))) ** 2
        self._eigenvalues = lam_1d[:, None] + lam_1d[None, :]
        self._mode_std = np.sqrt(GFF_ENERGY_SCALE / self._eigenvalues)
        self._rng = np.random.default_rng(np.random.SeedSequence(self.seed))

    @property
    def interior(self):
        return self.grid_size - 2

    def sample(self):
        """One field realization of shape ``(grid_size, grid_size)``."""
        return self.sample_batch(1)[0]

    def sample_batch(self, count):
        """``count`` independent realizations, stacked on axis 0.

        Coefficients on the orthonormal eigenbasis are independent
        Gaussians with variance ``2*pi / eigenvalue``; the sine synthesis
        is exact, so the batch covariance is exactly
        ``2*pi * inverse(discrete Laplacian)`` on interior nodes.
        """
        count = int(count)
        m = self.interior
        coeffs = self._rng.standard_normal((count, m, m)) * self._mode_std
        interior = dstn(coeffs, type=1, axes=(1, 2)) / (2.0 * (m + 1))
        fields = np.zeros((count, self.grid_size, self.grid_size))
        fields[:, 1:-1, 1:-1] = interior
        return fields


def sample_gff(grid_size, seed):
    """Single seeded field draw; identical seeds give identical grids."""
    return GFFSampler(grid_size, seed).sample()


def dirichlet_laplacian(grid_size, domain_length=1.0):
    """Sparse five-point (negative) Laplacian on interior nodes."""
    n = int(grid_size)
    if n < 4:
        raise ValidationError("grid size must be at least 4")
    m = n - 2
    h = float(domain_length) / (n - 1)
    one = sp.diags(
        [np.full(m - 1, -1.0), np.full(m, 2.0), np.full(m - 1, -1.0)], [-1, 0, 1]
    )
    eye = sp.identity(m)
    return (sp.kron(one, eye) + sp.kron(eye, one)).tocsc() / h**2


def green_function_column(grid_size, node, domain_length=1.0):
    """Green's function of the discrete Laplacian for one source node.

    Solves the discrete Poisson problem with a unit right-hand side at
    ``node`` (interior multi-index on the full grid) by sparse LU, i.e.
    the matrix-inverse column.  Returned embedded in the full grid with
    zeros on the boundary.
    """
    n = int(grid_size)
    m = n - 2
    i, j = (int(node[0]), int(node[1]))
    if not (1 <= i <= m and 1 <= j <= m):
        raise ValidationError("source node must be interior")
    lap = dirichlet_laplacian(n, domain_length)
    rhs = np.zeros(m * m)
    rhs[(i - 1) * m + (j - 1)] = 1.0
    col = spla.spsolve(lap, rhs)
    full = np.zeros((n, n))
    full[1:-1, 1:-1] = col.reshape(m, m)
    return full


def covariance_between(grid_size, node_a, node_b, domain_length=1.0):
    """Model covariance ``2*pi * G(a, b)`` of the sampled field."""
    g = green_function_column(grid_size, node_a, domain_length)
    return GFF_ENERGY_SCALE * g[node_b[0], node_b[1]]


def stubbornness_measure(gamma):
    """Measure ``Q = 2/gamma + gamma/2`` for ``gamma`` in ``(0, 2]``.

    Strictly decreasing on the domain with minimum ``Q = 2`` at
    ``gamma = 2``.
    """
    gamma = float(gamma)
    if not 0.0 < gamma <= 2.0:
        raise ValidationError("gamma must lie in (0,2]")
    return 2.0 / gamma + gamma / 2.0


def regime_note(gamma, tolerance=1e-9):
    """Qualitative regime of the coupling strength.

    Near ``sqrt(8/3)`` the random surface behaves like a Brownian
    surface; at the top of the range the surface is rigid apart from
    isolated peaks; small values give a flexible surface.
    """
    gamma = float(gamma)
    if abs(gamma - BROWNIAN_SURFACE_GAMMA) <= tolerance:
        return "brownian-surface"
    if gamma >= 2.0 - tolerance:
        return "rigid-with-peaks"
    if gamma <= 0.25:
        return "flexible"
    return "intermediate"


def conformal_factor(b, gamma):
    """Elementwise ``exp(gamma * b)``, positive everywhere.

    Raises :class:`RangeOverflowError` naming the first node where the
    exponent would overflow double precision.
    """
    gamma = float(gamma)
    if not 0.0 < gamma <= 2.0:
        raise ValidationError("gamma must lie in (0,2]")
    b = np.asarray(b, dtype=float)
    exponent = gamma * b
    over = exponent > _EXP_LIMIT
    if np.any(over):
        node = tuple(int(i) for i in np.argwhere(over)[0])
        raise RangeOverflowError(
            f"conformal exponent {exponent[node]:.3g} exceeds {_EXP_LIMIT} "
            f"at node {node}",
            node=node,
        )
    return np.exp(exponent)
