"""Sequential Gibbs sampling of pairwise isotropic Gauss-Markov fields.

The model: conditionally on its 8 toroidal neighbors, each site is Gaussian,

    x_i | neighbors  ~  N( mu + beta * sum_j (x_j - mu),  sigma2 )

with a single isotropic interaction coefficient ``beta`` shared by all
neighbors.  The d-dimensional variant replaces ``mu`` by a vector and
``sigma2`` by a d x d covariance ``sigma`` while keeping ``beta`` scalar,
applied componentwise to the centered neighbor sums.

A *sweep* updates every site once in raster (row-major) order, each update
conditioning on the current values of the neighbors -- including those
already refreshed earlier in the same sweep.  Iterating sweeps is a Gibbs
chain whose stationary law is the joint field distribution when the model is
stable; ``|beta| < 1/8`` guarantees a proper joint density on the torus and
is enforced by default (override with ``allow_unstable=True`` at your own
risk -- unstable chains typically overflow within a few dozen sweeps and
raise :class:`~gmrfkl.errors.DivergedSimulation`).

Randomness comes from ``numpy.random.default_rng`` (PCG64).  Per simulation
the stream is consumed in a fixed, documented order: one (H, W[, d]) block
of standard normals for the initial state, then one block per sweep, so the
whole trajectory is reproducible from the seed alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np

from . import _kernels
from .errors import DivergedSimulation, InvalidParams, SingularCovariance
from .lattice import (
    MIN_SIDE,
    SECOND_ORDER,
    LatticeField,
    MultiLatticeField,
    NeighborhoodSpec,
)

#: |beta| below this bound gives a proper joint field law on the torus
#: (the bound is 1 / delta for the 8-neighbor system).
STABILITY_LIMIT = 1.0 / 8.0


def _finite_real(v, name: str) -> float:
    try:
        fv = float(v)
    except (TypeError, ValueError):
        raise InvalidParams(f"{name} must be a finite real, got {v!r}") from None
    if not math.isfinite(fv):
        raise InvalidParams(f"{name} must be a finite real, got {v!r}")
    return fv


@dataclass(frozen=True)
class ModelParams:
    """Scalar-field parameters (mu, sigma2, beta).

    ``sigma2`` is the conditional variance of a site given its neighbors.
    ``beta`` may lie outside the stability region: the bound is enforced
    where dynamics are run (the sampler), not at construction, so the
    closed-form divergence machinery can evaluate arbitrary coefficients.
    """

    mu: float
    sigma2: float
    beta: float

    def __post_init__(self) -> None:
        for name in ("mu", "sigma2", "beta"):
            object.__setattr__(self, name, _finite_real(getattr(self, name), name))
        if self.sigma2 <= 0.0:
            raise InvalidParams(f"sigma2 must be positive, got {self.sigma2}")

    @property
    def sigma_std(self) -> float:
        return math.sqrt(self.sigma2)

    @property
    def dim(self) -> int:
        return 1


@dataclass(frozen=True)
class MultiModelParams:
    """Vector-field parameters (mu, sigma, beta) with scalar interaction.

    ``sigma`` is the d x d conditional covariance; it must be symmetric here
    and positive definite by the time noise is drawn (Cholesky failure raises
    :class:`~gmrfkl.errors.SingularCovariance`).
    """

    mu: np.ndarray
    sigma: np.ndarray
    beta: float

    def __post_init__(self) -> None:
        mu = np.asarray(self.mu, dtype=np.float64).reshape(-1)
        sigma = np.asarray(self.sigma, dtype=np.float64)
        d = mu.shape[0]
        if d < 1:
            raise InvalidParams("mu must have at least one component")
        if sigma.shape != (d, d):
            raise InvalidParams(f"sigma must be {d}x{d}, got {sigma.shape}")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma))):
            raise InvalidParams("mu and sigma must be finite")
        scale = max(float(np.max(np.abs(sigma))), 1.0)
        if float(np.max(np.abs(sigma - sigma.T))) > 1e-12 * scale:
            raise InvalidParams("sigma must be symmetric (1e-12 relative)")
        beta = _finite_real(self.beta, "beta")
        mu = mu.copy()
        sigma = (sigma + sigma.T) / 2.0
        mu.flags.writeable = False
        sigma.flags.writeable = False
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "beta", beta)

    def cholesky(self) -> np.ndarray:
        try:
            return np.linalg.cholesky(self.sigma)
        except np.linalg.LinAlgError as exc:
            raise SingularCovariance(
                "sigma is not positive definite (Cholesky failed)"
            ) from exc

    @property
    def dim(self) -> int:
        return int(self.mu.shape[0])


AnyParams = Union[ModelParams, MultiModelParams]


@dataclass(frozen=True)
class SimConfig:
    """Gibbs run configuration.

    ``burn_in`` sweeps are run first and discarded, then ``sweeps`` further
    sweeps; ``sweeps = 0`` returns the initial i.i.d. state untouched (after
    burn-in, if any).  ``seed`` feeds ``numpy.random.default_rng``.
    """

    height: int
    width: int
    sweeps: int
    burn_in: int = 0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.height < MIN_SIDE or self.width < MIN_SIDE:
            raise InvalidParams(
                f"lattice must be at least {MIN_SIDE}x{MIN_SIDE}, "
                f"got {self.height}x{self.width}"
            )
        if self.sweeps < 0:
            raise InvalidParams(f"sweeps must be >= 0, got {self.sweeps}")
        if self.burn_in < 0:
            raise InvalidParams(f"burn_in must be >= 0, got {self.burn_in}")
        if not (0 <= int(self.seed) < 2 ** 64):
            raise InvalidParams(f"seed must fit in uint64, got {self.seed}")


def check_stability(beta: float, spec: NeighborhoodSpec = SECOND_ORDER,
                    allow_unstable: bool = False) -> None:
    """Raise :class:`InvalidParams` when ``|beta| >= 1/delta`` (unless waived)."""
    limit = 1.0 / spec.delta
    if abs(beta) >= limit and not allow_unstable:
        raise InvalidParams(
            f"|beta| = {abs(beta)} >= {limit} violates the stability bound "
            f"1/{spec.delta}"
        )


def _finite_or_raise(arr: np.ndarray, sweep_index: int) -> None:
    if not np.all(np.isfinite(arr)):
        raise DivergedSimulation(
            f"non-finite site values after sweep {sweep_index}; "
            f"the chain has diverged (unstable beta?)"
        )


def gibbs_sweep_univariate(field: LatticeField, params: ModelParams,
                           spec: NeighborhoodSpec = SECOND_ORDER,
                           rng: Optional[np.random.Generator] = None,
                           *, allow_unstable: bool = False) -> LatticeField:
    """One raster-order sweep over a scalar field; returns a new field.

    Consumes one (H, W) block of standard normals from ``rng``.
    """
    if rng is None:
        rng = np.random.default_rng()
    check_stability(params.beta, spec, allow_unstable)
    x = field.values.copy()
    eps = params.sigma_std * rng.standard_normal(x.shape)
    _kernels.sweep_scalar(x, params.mu, params.beta, eps)
    _finite_or_raise(x, 1)
    return LatticeField(field.height, field.width, x)


def gibbs_sweep_multivariate(field: MultiLatticeField, params: MultiModelParams,
                             spec: NeighborhoodSpec = SECOND_ORDER,
                             rng: Optional[np.random.Generator] = None,
                             *, allow_unstable: bool = False) -> MultiLatticeField:
    """One raster-order sweep over a vector field; returns a new field.

    Consumes one (H, W, d) block of standard normals from ``rng``.
    """
    if rng is None:
        rng = np.random.default_rng()
    if field.dim != params.dim:
        raise InvalidParams(f"field dim {field.dim} != params dim {params.dim}")
    check_stability(params.beta, spec, allow_unstable)
    chol = params.cholesky()
    x = field.values.copy()
    eps = rng.standard_normal(x.shape) @ chol.T
    _kernels.sweep_vector(x, params.mu, params.beta, eps)
    _finite_or_raise(x, 1)
    return MultiLatticeField(field.height, field.width, field.dim, x)


def _simulate_scalar(params: ModelParams, config: SimConfig,
                     snapshot_stride: int):
    rng = np.random.default_rng(config.seed)
    shape = (config.height, config.width)
    x = params.mu + params.sigma_std * rng.standard_normal(shape)
    snapshots: List[np.ndarray] = []
    total = config.burn_in + config.sweeps
    for sweep in range(1, total + 1):
        eps = params.sigma_std * rng.standard_normal(shape)
        _kernels.sweep_scalar(x, params.mu, params.beta, eps)
        _finite_or_raise(x, sweep)
        done = sweep - config.burn_in
        if snapshot_stride > 0 and done > 0 and done % snapshot_stride == 0:
            snapshots.append(x.copy())
    final = LatticeField(config.height, config.width, x)
    fields = [LatticeField(config.height, config.width, s) for s in snapshots]
    return final, fields


def _simulate_vector(params: MultiModelParams, config: SimConfig,
                     snapshot_stride: int):
    rng = np.random.default_rng(config.seed)
    chol = params.cholesky()
    shape = (config.height, config.width, params.dim)
    x = params.mu + rng.standard_normal(shape) @ chol.T
    x = np.ascontiguousarray(x)
    snapshots: List[np.ndarray] = []
    total = config.burn_in + config.sweeps
    for sweep in range(1, total + 1):
        eps = np.ascontiguousarray(rng.standard_normal(shape) @ chol.T)
        _kernels.sweep_vector(x, params.mu, params.beta, eps)
        _finite_or_raise(x, sweep)
        done = sweep - config.burn_in
        if snapshot_stride > 0 and done > 0 and done % snapshot_stride == 0:
            snapshots.append(x.copy())
    final = MultiLatticeField(config.height, config.width, params.dim, x)
    fields = [MultiLatticeField(config.height, config.width, params.dim, s)
              for s in snapshots]
    return final, fields


def simulate(params: AnyParams, config: SimConfig,
             spec: NeighborhoodSpec = SECOND_ORDER, *,
             snapshot_stride: int = 0, allow_unstable: bool = False):
    """Run a Gibbs chain from an i.i.d. start and return the final field.

    The chain starts from i.i.d. draws of the conditional law with no
    neighbor coupling (mean ``mu``, (co)variance ``sigma2`` / ``sigma``),
    runs ``config.burn_in`` discarded sweeps and then ``config.sweeps``
    retained sweeps.

    Args:
        params: :class:`ModelParams` or :class:`MultiModelParams`; the type
            selects the scalar or vector chain.
        config: lattice shape, sweep counts, and seed.
        spec: neighborhood descriptor.
        snapshot_stride: if > 0, also collect a copy of the state after
            every ``snapshot_stride``-th post-burn-in sweep and return
            ``(final, snapshots)`` instead of just ``final``.
        allow_unstable: waive the ``|beta| < 1/8`` stability bound.

    Raises:
        InvalidParams: unstable ``beta`` without the waiver, or bad config.
        DivergedSimulation: non-finite values appeared during the run.
        SingularCovariance: vector noise covariance is not positive definite.
    """
    check_stability(params.beta, spec, allow_unstable)
    if snapshot_stride < 0:
        raise InvalidParams(f"snapshot_stride must be >= 0, got {snapshot_stride}")
    if isinstance(params, ModelParams):
        final, snaps = _simulate_scalar(params, config, snapshot_stride)
    elif isinstance(params, MultiModelParams):
        final, snaps = _simulate_vector(params, config, snapshot_stride)
    else:
        raise InvalidParams(f"unsupported params type {type(params).__name__}")
    if snapshot_stride > 0:
        return final, snaps
    return final
