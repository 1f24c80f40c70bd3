"""Commutators of drift-plus-noise vector fields over 3-D coordinates.

The noise parts are frozen smooth realizations (polynomials or truncated
random Fourier series), not live randomness, so their derivatives exist
and the four-term expansion of the commutator

    [V, U] = [v, u] + [v, w] + [b, u] + [b, w]

is evaluated with central differences term by term.  A nonzero
commutator over a region is the operational test for curvature induced
by a firm's strategy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError
from .grids import GridSpec

DIM = 3
DEFAULT_RELATIVE_SPACING = 1e-4


class PolynomialComponent:
    """Trivariate polynomial ``sum_i c_i * y0^e0 y1^e1 y2^e2``.

    ``terms`` is a sequence of ``(coefficient, (e0, e1, e2))`` pairs.
    """

    def __init__(self, terms):
        self.terms = tuple(
            (float(c), tuple(int(e) for e in exps)) for c, exps in terms
        )
        for _, exps in self.terms:
            if len(exps) != DIM or any(e < 0 for e in exps):
                raise ValidationError("polynomial exponents must be 3 non-negative ints")

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        total = 0.0
        for c, (e0, e1, e2) in self.terms:
            total = total + c * y[0] ** e0 * y[1] ** e1 * y[2] ** e2
        return total

    def to_dict(self):
        return [[c, list(e)] for c, e in self.terms]


class FourierComponent:
    """Truncated random Fourier series, a fixed smooth noise realization.

    Draws ``modes`` terms ``a_m sin(k_m . y + phi_m)`` with seeded
    amplitudes, wavevectors and phases, so the field is reproducible and
    infinitely differentiable.
    """

    def __init__(self, seed, modes=6, amplitude=1.0, max_wavenumber=2.0):
        rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
        self.seed = int(seed)
        self.modes = int(modes)
        self.amplitudes = amplitude * rng.standard_normal(self.modes) / np.sqrt(self.modes)
        self.wavevectors = rng.uniform(-max_wavenumber, max_wavenumber, (self.modes, DIM))
        self.phases = rng.uniform(0.0, 2.0 * np.pi, self.modes)

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        return float(np.sum(self.amplitudes * np.sin(self.wavevectors @ y + self.phases)))


@dataclass(frozen=True)
class VectorField:
    """Drift and frozen-noise components of one gradient field.

    Each entry of ``drift`` and ``noise`` is a callable of a 3-vector.
    """

    drift: tuple
    noise: tuple = None

    def __post_init__(self):
        drift = tuple(self.drift)
        if len(drift) != DIM:
            raise ValidationError("drift must have exactly 3 components")
        noise = self.noise
        if noise is None:
            noise = tuple(lambda y: 0.0 for _ in range(DIM))
        else:
            noise = tuple(noise)
            if len(noise) != DIM:
                raise ValidationError("noise must have exactly 3 components")
        object.__setattr__(self, "drift", drift)
        object.__setattr__(self, "noise", noise)

    @classmethod
    def constant(cls, drift_values, noise_values=None):
        make = lambda v: (lambda y, v=float(v): v)
        noise = None if noise_values is None else tuple(make(v) for v in noise_values)
        return cls(tuple(make(v) for v in drift_values), noise)

    @classmethod
    def from_polynomials(cls, drift_terms, noise_terms=None):
        drift = tuple(PolynomialComponent(t) for t in drift_terms)
        noise = (
            None
            if noise_terms is None
            else tuple(PolynomialComponent(t) for t in noise_terms)
        )
        return cls(drift, noise)

    @classmethod
    def from_fourier_noise(cls, drift_terms, seed, modes=6, amplitude=1.0):
        drift = tuple(PolynomialComponent(t) for t in drift_terms)
        noise = tuple(FourierComponent(seed + i, modes, amplitude) for i in range(DIM))
        return cls(drift, noise)

    def drift_at(self, y):
        return np.array([float(f(y)) for f in self.drift])

    def noise_at(self, y):
        return np.array([float(f(y)) for f in self.noise])

    def probe_bounded(self, points, limit=1e12):
        """Check all components evaluate finite and below ``limit``."""
        for y in points:
            vals = np.concatenate([self.drift_at(y), self.noise_at(y)])
            if np.any(~np.isfinite(vals)) or np.any(np.abs(vals) > limit):
                return False
        return True


def _component_values(field, y):
    return field.drift_at(y), field.noise_at(y)


def _jacobian(component_fns, point, spacing):
    """Central-difference Jacobian ``J[nu, mu] = d f_nu / d y_mu``."""
    jac = np.empty((DIM, DIM))
    for mu in range(DIM):
        forward = np.array(point, dtype=float)
        backward = np.array(point, dtype=float)
        forward[mu] += spacing
        backward[mu] -= spacing
        for nu, fn in enumerate(component_fns):
            jac[nu, mu] = (float(fn(forward)) - float(fn(backward))) / (2.0 * spacing)
    return jac


def default_spacing(point):
    scale = max(1.0, float(np.max(np.abs(point))))
    return DEFAULT_RELATIVE_SPACING * scale


def lie_bracket(field_v, field_u, point, spacing=None):
    """Commutator of two drift-plus-noise fields at one point.

    Returns the 3 components of the four-term expansion, derivatives by
    central differences with the given ``spacing`` (default ``1e-4``
    times the coordinate scale).
    """
    point = np.asarray(point, dtype=float)
    if point.shape != (DIM,):
        raise ValidationError("point must be a 3-vector")
    h = default_spacing(point) if spacing is None else float(spacing)
    if h <= 0:
        raise ValidationError("spacing must be positive")

    v, b = _component_values(field_v, point)
    u, w = _component_values(field_u, point)
    jac_v = _jacobian(field_v.drift, point, h)
    jac_b = _jacobian(field_v.noise, point, h)
    jac_u = _jacobian(field_u.drift, point, h)
    jac_w = _jacobian(field_u.noise, point, h)

    terms = {
        "drift-drift": jac_u @ v - jac_v @ u,
        "drift-noise": jac_w @ v - jac_v @ w,
        "noise-drift": jac_u @ b - jac_b @ u,
        "noise-noise": jac_w @ b - jac_b @ w,
    }
    total = np.zeros(DIM)
    for name, term in terms.items():
        if np.any(~np.isfinite(term)):
            raise NumericalError(f"non-finite commutator term '{name}' at {point.tolist()}")
        total = total + term
    return total


def curvature_present(field_v, field_u, region, tolerance, spacing=None):
    """Scan a region for a non-vanishing commutator.

    Parameters
    ----------
    region : GridSpec or array of points
        A grid is scanned at every node; an ``(n, 3)`` array is scanned
        point by point.
    tolerance : float
        Curvature is reported present when the maximum Euclidean norm of
        the commutator exceeds this.

    Returns
    -------
    (present, max_norm, location)
    """
    if isinstance(region, GridSpec):
        if region.n_axes != DIM:
            raise ValidationError("region grid must have 3 axes")
        mesh = region.meshgrid()
        points = np.stack([m.reshape(-1) for m in mesh], axis=-1)
    else:
        points = np.asarray(region, dtype=float).reshape(-1, DIM)
    if points.shape[0] == 0:
        raise ValidationError("region must contain at least one point")

    best = -1.0
    where = None
    for y in points:
        norm = float(np.linalg.norm(lie_bracket(field_v, field_u, y, spacing)))
        if norm > best:
            best = norm
            where = y.copy()
    return bool(best > tolerance), best, where
