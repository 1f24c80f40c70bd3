"""Market-share dynamics with geometry-derived drift and diffusion.

A firm's share moves as an Ito process whose coefficients may be derived
from a metric field: the drift is the contraction
``mu^a = -1/2 h^{bc} gamma^a_{bc}`` and the diffusion matrix is the
Cholesky factor of the inverse metric, so the reconstruction
``omega omega^T = h^{ab}`` holds at every node and share increments pick
up the inverse-metric covariance.

Simulation is Euler-Maruyama.  Randomness flows from a master seed split
into fixed per-chunk streams keyed by chunk index, so ensembles are
bit-identical for a given seed no matter how many worker threads run the
chunks or in which order they finish.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .errors import NumericalError, SingularMetricError, ValidationError
from .grids import GridSpec
from .polygon import effective_region

STATE_DIM = 3

_SDE_STREAM_TAG = 0x5DE
_CHUNK_SIZE = 4096


@dataclass
class FirmState:
    """One firm's state: share vector, strategy and cooperation data.

    ``share`` is the firm's position in strategy coordinates; the scalar
    market share everyone quotes is its first component.  When
    ``polygon_area`` is known the strategy value must sit inside the
    committed region ``alpha_own**coop_own * polygon_area``.
    """

    share: np.ndarray
    strategy: float
    alpha_own: float
    alpha_other: float
    coop_own: float
    coop_other: float
    stubbornness: float = 1.0
    polygon_area: float = None

    def __post_init__(self):
        share = np.asarray(self.share, dtype=float).reshape(-1)
        if share.shape != (STATE_DIM,):
            raise ValidationError("share must be a 3-vector")
        self.share = share
        problems = []
        for name in ("alpha_own", "alpha_other"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                problems.append(f"{name} must lie in [0,1]")
        for name in ("coop_own", "coop_other"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                problems.append(f"{name} must lie in (0,1]")
        if not np.isfinite(self.strategy):
            problems.append("strategy must be finite")
        if problems:
            raise ValidationError("invalid firm state", problems)
        if self.polygon_area is not None:
            region = effective_region(self.polygon_area, self.alpha_own, self.coop_own)
            if not 0.0 <= self.strategy <= region:
                raise ValidationError(
                    f"strategy {self.strategy} lies outside the committed "
                    f"region [0, {region:.6g}]"
                )

    @property
    def scalar_share(self):
        return float(self.share[0])

    def committed_region(self):
        if self.polygon_area is None:
            raise ValidationError("firm has no polygon area attached")
        return effective_region(self.polygon_area, self.alpha_own, self.coop_own)


@dataclass
class SDECoefficients:
    """Drift and diffusion callables, batched over states.

    ``drift(s, x)`` maps a float time and an ``(n, 3)`` state block to an
    ``(n, 3)`` array; ``diffusion(s, x)`` to ``(n, 3, 3)``.  Geometry
    backed instances also carry the per-node tables they interpolate
    (nearest node) together with the grid.
    """

    drift: object
    diffusion: object
    geometry_derived: bool = False
    grid: GridSpec = None
    drift_table: np.ndarray = field(default=None, repr=False)
    diffusion_table: np.ndarray = field(default=None, repr=False)


def _nearest_node_indices(grid, x):
    idx = []
    for k in range(grid.n_axes):
        a, _ = grid.extents[k]
        j = np.rint((x[:, k] - a) / grid.spacing(k)).astype(int)
        idx.append(np.clip(j, 0, grid.counts[k] - 1))
    return tuple(idx)


def derive_coefficients(metric, chris):
    """Geometry-consistent drift and diffusion tables.

    The metric must be positive definite on its grid (the simulation
    slice is Riemannian); a node where the Cholesky factorization fails
    is reported by index.
    """
    grid = metric.grid
    mu = -0.5 * np.einsum("...bc,...abc->...a", metric.inverse, chris.values)
    try:
        omega = np.linalg.cholesky(metric.inverse)
    except np.linalg.LinAlgError:
        eig = np.linalg.eigvalsh(metric.inverse)
        bad = np.argwhere(eig.min(axis=-1) <= 0.0)
        node = tuple(int(i) for i in bad[0]) if len(bad) else (0,) * grid.n_axes
        raise SingularMetricError(node, "inverse metric is not positive definite")

    def drift(s, x):
        return mu[_nearest_node_indices(grid, np.atleast_2d(x))]

    def diffusion(s, x):
        return omega[_nearest_node_indices(grid, np.atleast_2d(x))]

    return SDECoefficients(
        drift=drift,
        diffusion=diffusion,
        geometry_derived=True,
        grid=grid,
        drift_table=mu,
        diffusion_table=omega,
    )


def constant_coefficients(mu, omega):
    """Fixed drift vector and diffusion matrix as batched callables."""
    mu = np.asarray(mu, dtype=float)
    omega = np.asarray(omega, dtype=float)

    def drift(s, x):
        x = np.atleast_2d(x)
        return np.broadcast_to(mu, x.shape).copy()

    def diffusion(s, x):
        x = np.atleast_2d(x)
        return np.broadcast_to(omega, (x.shape[0],) + omega.shape).copy()

    return SDECoefficients(drift=drift, diffusion=diffusion)


@dataclass
class PathEnsemble:
    """Simulated share paths: ``values[path, step, component]``."""

    times: np.ndarray
    values: np.ndarray
    seed: int = None

    @property
    def n_paths(self):
        return self.values.shape[0]

    def component_variance(self, step=-1):
        return self.values[:, step, :].var(axis=0, ddof=1)

    def component_mean(self, step=-1):
        return self.values[:, step, :].mean(axis=0)

    def summary(self):
        return {
            "paths": int(self.n_paths),
            "steps": int(len(self.times) - 1),
            "horizon": float(self.times[-1]),
            "final_mean": [float(v) for v in self.component_mean()],
            "final_variance": [float(v) for v in self.component_variance()],
        }


def _chunk_increments(seed, chunk_index, n_paths, steps, dt):
    ss = np.random.SeedSequence(int(seed), spawn_key=(_SDE_STREAM_TAG, int(chunk_index)))
    rng = np.random.default_rng(ss)
    return rng.standard_normal((n_paths, steps, STATE_DIM)) * math.sqrt(dt)


def simulate(
    coeffs,
    initial,
    horizon,
    steps,
    paths,
    seed,
    increments=None,
    correlation=None,
    threads=1,
):
    """Euler-Maruyama ensemble of share paths.

    Parameters
    ----------
    coeffs : SDECoefficients
    initial : FirmState or 3-vector
        Starting share; applied exactly at time zero.
    horizon : float
        Final time.
    steps : int
        Time steps, at least 2.
    paths : int
    seed : int
        Master seed; increments for path chunk ``c`` come from the fixed
        stream ``(seed, c)`` regardless of thread count.
    increments : ndarray (paths, steps, 3), optional
        Explicit Brownian increments, overriding the seeded streams
        (used for convergence studies against a common noise).
    correlation : ndarray (3, 3), optional
        Correlation of the driving components; default independent.
    threads : int
        Worker threads over path chunks; affects speed only, never the
        numbers.

    Returns
    -------
    PathEnsemble
    """
    if steps < 2:
        raise ValidationError("step count must be at least 2")
    if paths < 1:
        raise ValidationError("path count must be positive")
    if not horizon > 0:
        raise ValidationError("horizon must be positive")
    x0 = initial.share if isinstance(initial, FirmState) else np.asarray(initial, float)
    if x0.shape != (STATE_DIM,):
        raise ValidationError("initial share must be a 3-vector")

    dt = float(horizon) / steps
    times = np.linspace(0.0, float(horizon), steps + 1)
    mix = None
    if correlation is not None:
        correlation = np.asarray(correlation, dtype=float)
        try:
            mix = np.linalg.cholesky(correlation)
        except np.linalg.LinAlgError:
            raise ValidationError("correlation matrix must be positive definite")

    out = np.empty((paths, steps + 1, STATE_DIM))

    def run_chunk(chunk_index, lo, hi):
        n = hi - lo
        if increments is not None:
            dw = np.asarray(increments[lo:hi], dtype=float)
            if dw.shape != (n, steps, STATE_DIM):
                raise ValidationError(
                    "increments must have shape (paths, steps, 3)"
                )
        else:
            dw = _chunk_increments(seed, chunk_index, n, steps, dt)
        if mix is not None:
            dw = dw @ mix.T
        x = np.broadcast_to(x0, (n, STATE_DIM)).copy()
        out[lo:hi, 0] = x
        for k in range(steps):
            s = times[k]
            try:
                mu = np.asarray(coeffs.drift(s, x), dtype=float)
                om = np.asarray(coeffs.diffusion(s, x), dtype=float)
            except Exception as exc:
                raise NumericalError(
                    f"coefficient evaluation failed at step {k}: {exc}"
                ) from exc
            if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(om))):
                raise NumericalError(f"non-finite coefficients at step {k}")
            x = x + mu * dt + np.einsum("nab,nb->na", om, dw[:, k])
            out[lo:hi, k + 1] = x

    bounds = [
        (c, lo, min(lo + _CHUNK_SIZE, paths))
        for c, lo in enumerate(range(0, paths, _CHUNK_SIZE))
    ]
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            futures = [pool.submit(run_chunk, *b) for b in bounds]
            for f in futures:
                f.result()
    else:
        for b in bounds:
            run_chunk(*b)

    return PathEnsemble(times=times, values=out, seed=int(seed))


@dataclass(frozen=True)
class LipschitzReport:
    """Probe-based coefficient regularity estimates.

    ``lipschitz_*`` are the largest observed ratios
    ``|f(x) - f(y)| / |x - y|``; ``bound_*`` the largest observed norms.
    The squared-form constants of the local regularity assumption are the
    squares of these.  ``passed`` is None when no ceilings were given.
    """

    lipschitz_drift: float
    lipschitz_diffusion: float
    bound_drift: float
    bound_diffusion: float
    passed: bool = None
    ceilings: dict = None


def validate_lipschitz(coeffs, region, probes, seed=0, ceilings=None, time=0.0):
    """Estimate coefficient Lipschitz constants and sup bounds by probing.

    Parameters
    ----------
    region : GridSpec or (low, high) pair of 3-vectors
        Box to draw probe points from.
    probes : int
        Random probe pairs, at least 2.
    ceilings : dict, optional
        Any of ``lipschitz_drift``, ``lipschitz_diffusion``,
        ``bound_drift``, ``bound_diffusion``; estimates are checked
        against these and the report carries an overall pass flag.

    This is a report, not a proof: constants are best observed values.
    """
    if probes < 2:
        raise ValidationError("need at least 2 probe pairs")
    if isinstance(region, GridSpec):
        low = np.array([e[0] for e in region.extents], dtype=float)
        high = np.array([e[1] for e in region.extents], dtype=float)
    else:
        low = np.asarray(region[0], dtype=float)
        high = np.asarray(region[1], dtype=float)
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    xs = rng.uniform(low, high, size=(probes, STATE_DIM))
    ys = rng.uniform(low, high, size=(probes, STATE_DIM))

    mu_x = np.asarray(coeffs.drift(time, xs), dtype=float)
    mu_y = np.asarray(coeffs.drift(time, ys), dtype=float)
    om_x = np.asarray(coeffs.diffusion(time, xs), dtype=float)
    om_y = np.asarray(coeffs.diffusion(time, ys), dtype=float)

    gap = np.linalg.norm(xs - ys, axis=1)
    ok = gap > 1e-12
    lip_mu = float(
        np.max(np.linalg.norm(mu_x - mu_y, axis=1)[ok] / gap[ok], initial=0.0)
    )
    diff_om = np.sqrt(np.sum((om_x - om_y) ** 2, axis=(1, 2)))
    lip_om = float(np.max(diff_om[ok] / gap[ok], initial=0.0))
    bound_mu = float(np.linalg.norm(mu_x, axis=1).max())
    bound_om = float(np.sqrt(np.sum(om_x**2, axis=(1, 2))).max())

    passed = None
    if ceilings:
        estimates = {
            "lipschitz_drift": lip_mu,
            "lipschitz_diffusion": lip_om,
            "bound_drift": bound_mu,
            "bound_diffusion": bound_om,
        }
        passed = all(estimates[k] <= v for k, v in ceilings.items())
    return LipschitzReport(lip_mu, lip_om, bound_mu, bound_om, passed, ceilings)


def path_payoffs(ensemble, profit, stubbornness=1.0, region_weight=1.0):
    """Per-path payoff: time integral of ``profit(s, x) * stubbornness``.

    ``profit`` maps ``(s, x_block)`` with ``x_block`` of shape ``(n, 3)``
    to ``n`` values.  The trapezoid rule discretizes the time integral;
    ``region_weight`` carries the measure of the strategy cross-section.
    """
    times = ensemble.times
    vals = np.empty((ensemble.n_paths, len(times)))
    for k, s in enumerate(times):
        vals[:, k] = np.asarray(profit(s, ensemble.values[:, k, :]), dtype=float)
    integral = np.trapezoid(vals, times, axis=1)
    return integral * float(stubbornness) * float(region_weight)


@dataclass(frozen=True)
class NashCheck:
    holds: bool
    confidence: float
    mean_star: float
    mean_deviation: float


def nash_check(payoff_star, payoff_deviation, horizon_star=None, horizon_deviation=None):
    """Test the equilibrium payoff inequality between two strategy profiles.

    ``holds`` reports whether the candidate-optimal ensemble mean is at
    least the deviation ensemble mean; ``confidence`` is the normal
    approximation of the probability that the ordering is real given the
    sampling noise (0.5 exactly at equality).
    """
    a = np.asarray(payoff_star, dtype=float).reshape(-1)
    b = np.asarray(payoff_deviation, dtype=float).reshape(-1)
    if a.size < 2 or b.size < 2:
        raise ValidationError("payoff ensembles need at least 2 paths each")
    if horizon_star is not None and horizon_deviation is not None:
        if not np.isclose(horizon_star, horizon_deviation):
            raise ValidationError("payoff ensembles have mismatched horizons")
    delta = a.mean() - b.mean()
    se = math.sqrt(a.var(ddof=1) / a.size + b.var(ddof=1) / b.size)
    if se == 0.0:
        confidence = 0.5 if delta == 0.0 else (1.0 if delta > 0 else 0.0)
    else:
        confidence = float(ndtr(delta / se))
    return NashCheck(
        holds=bool(delta >= 0.0),
        confidence=confidence,
        mean_star=float(a.mean()),
        mean_deviation=float(b.mean()),
    )
