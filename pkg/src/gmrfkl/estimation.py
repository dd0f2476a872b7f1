"""Closed-form maximum pseudo-likelihood estimation.

The pseudo-likelihood of a field is the product over sites of the local
conditional densities; for this model its log is, up to constants, a
quadratic in the interaction coefficient ``beta``, so the maximizer has the
closed form

    beta_hat = sum_i d_i * S_i  /  sum_i S_i**2,

where ``d_i = x_i - mu`` is the centered site value and ``S_i`` the sum of
its 8 centered neighbors.  Dividing both sums by n shows this is exactly the
moment ratio ``plus_norm(rho) / plus_norm(sigma_minus)`` -- total
center-neighbor covariance over total neighbor-neighbor covariance -- which
is how :func:`estimate_beta_univariate` computes it.  The mean and variance
are estimated by their plug-in sample moments.

For d-dimensional fields the same ratio is formed with identity-weighted
inner products of the centered vectors: numerator ``sum_i <d_i, S_i>``,
denominator ``sum_i |S_i|^2``; equivalently trace-sums of the cross blocks
of the window covariance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import math

import numpy as np

from .errors import DegenerateNeighborhood, InvalidParams
from .lattice import (
    NEIGHBOR_OFFSETS,
    SECOND_ORDER,
    AnyField,
    LatticeField,
    MultiLatticeField,
    NeighborhoodSpec,
)
from .moments import (
    MultiPatchMoments,
    PatchMoments,
    multi_patch_moments,
    patch_moments,
    plus_norm,
)
from .sampler import ModelParams, MultiModelParams


@dataclass(frozen=True)
class EstimationReport:
    """Fitted parameters plus the raw estimator ingredients.

    ``params.beta == numerator / denominator`` always holds; the two sums
    are kept on the pooled-moment (1/n) scale so they are comparable across
    lattice sizes.
    """

    params: Union[ModelParams, MultiModelParams]
    n_sites: int
    numerator: float
    denominator: float


def _neighbor_sum_disc(field: AnyField, mu) -> tuple[np.ndarray, np.ndarray]:
    """Centered values d and centered neighbor sums S, via toroidal rolls."""
    vals = field.values
    if isinstance(field, MultiLatticeField):
        mean = (vals.reshape(-1, field.dim).mean(axis=0) if mu is None
                else np.asarray(mu, dtype=np.float64).reshape(-1))
        if mean.shape[0] != field.dim:
            raise InvalidParams(f"mu has dim {mean.shape[0]}, field has {field.dim}")
    else:
        mean = float(vals.mean()) if mu is None else float(mu)
    d = vals - mean
    s = np.zeros_like(d)
    for dr, dc in NEIGHBOR_OFFSETS:
        s += np.roll(d, shift=(-dr, -dc), axis=(0, 1))
    return d, s


def estimate_beta_univariate(moments: PatchMoments) -> float:
    """Interaction estimate from pooled moments: ``|rho|_+ / |sigma_minus|_+``.

    Raises:
        DegenerateNeighborhood: when the denominator (total
            neighbor-neighbor covariance) is exactly zero.
    """
    num = plus_norm(moments.rho)
    den = plus_norm(moments.sigma_minus)
    if den == 0.0:
        raise DegenerateNeighborhood(
            "total neighbor-neighbor covariance is zero; beta is unidentifiable"
        )
    return num / den


def estimate_beta_univariate_direct(field: LatticeField,
                                    mu: Optional[float] = None,
                                    spec: NeighborhoodSpec = SECOND_ORDER) -> float:
    """Interaction estimate straight from the field (no moment matrix).

    Computes ``sum_i d_i S_i / sum_i S_i^2`` with grand-mean centering unless
    ``mu`` is supplied.  Agrees with :func:`estimate_beta_univariate` on the
    same field's moments to floating-point accuracy (both are the same ratio,
    one formed from raw sums and one from 1/n-scaled sums).
    """
    if not isinstance(field, LatticeField):
        raise InvalidParams("estimate_beta_univariate_direct expects a scalar field")
    d, s = _neighbor_sum_disc(field, mu)
    num = float(np.sum(d * s))
    den = float(np.sum(s * s))
    if den == 0.0:
        raise DegenerateNeighborhood(
            "centered neighbor sums vanish everywhere; beta is unidentifiable"
        )
    return num / den


def estimate_beta_multivariate(source, mu=None,
                               spec: NeighborhoodSpec = SECOND_ORDER) -> float:
    """Identity-weighted interaction estimate for d-dimensional data.

    ``source`` may be a :class:`MultiLatticeField` (direct sums) or a
    :class:`MultiPatchMoments` (trace-sums of the cross blocks); the two
    routes agree to floating-point accuracy.  For d = 1 the value equals the
    scalar estimator exactly.
    """
    if isinstance(source, MultiPatchMoments):
        num = float(np.einsum("jkk->", source.cross_center))
        den = float(np.einsum("jlkk->", source.cross_neighbors))
    elif isinstance(source, MultiLatticeField):
        d, s = _neighbor_sum_disc(source, mu)
        num = float(np.sum(d * s))
        den = float(np.sum(s * s))
    else:
        raise InvalidParams(
            "estimate_beta_multivariate expects a MultiLatticeField or "
            "MultiPatchMoments"
        )
    if den == 0.0:
        raise DegenerateNeighborhood(
            "centered neighbor sums vanish everywhere; beta is unidentifiable"
        )
    return num / den


def estimate_params(field: AnyField,
                    spec: NeighborhoodSpec = SECOND_ORDER) -> EstimationReport:
    """Full plug-in fit of a field: sample mean, sample (co)variance, beta.

    Raises:
        DegenerateField: constant field (no variance to fit).
        DegenerateNeighborhood: zero estimator denominator.
    """
    if isinstance(field, MultiLatticeField):
        moments = multi_patch_moments(field, spec)
        num = float(np.einsum("jkk->", moments.cross_center))
        den = float(np.einsum("jlkk->", moments.cross_neighbors))
        if den == 0.0:
            raise DegenerateNeighborhood(
                "centered neighbor sums vanish everywhere; beta is unidentifiable"
            )
        beta = num / den
        params: Union[ModelParams, MultiModelParams] = MultiModelParams(
            mu=moments.mean, sigma=moments.sigma, beta=beta
        )
    elif isinstance(field, LatticeField):
        moments = patch_moments(field, spec)
        num = plus_norm(moments.rho)
        den = plus_norm(moments.sigma_minus)
        if den == 0.0:
            raise DegenerateNeighborhood(
                "total neighbor-neighbor covariance is zero; beta is unidentifiable"
            )
        beta = num / den
        params = ModelParams(mu=moments.mean, sigma2=moments.var, beta=beta)
    else:
        raise InvalidParams(f"unsupported field type {type(field).__name__}")
    return EstimationReport(params=params, n_sites=field.n_sites,
                            numerator=num, denominator=den)


def log_pseudo_likelihood(field: LatticeField, params: ModelParams,
                          spec: NeighborhoodSpec = SECOND_ORDER) -> float:
    """Log pseudo-likelihood of a scalar field under (mu, sigma2, beta).

    ``sum_i log N(x_i; mu + beta * S_i, sigma2)`` with ``S_i`` the centered
    neighbor sum.  By construction the closed-form ``beta_hat`` (with the
    same ``mu`` plugged in) is the exact maximizer in beta.
    """
    if not isinstance(field, LatticeField):
        raise InvalidParams("log_pseudo_likelihood expects a scalar field")
    d, s = _neighbor_sum_disc(field, params.mu)
    resid = d - params.beta * s
    n = field.n_sites
    return float(-0.5 * n * math.log(2.0 * math.pi * params.sigma2)
                 - 0.5 * float(np.sum(resid * resid)) / params.sigma2)


def log_pseudo_likelihood_multivariate(field: MultiLatticeField,
                                       params: MultiModelParams,
                                       spec: NeighborhoodSpec = SECOND_ORDER) -> float:
    """Log pseudo-likelihood of a vector field under (mu, sigma, beta).

    Note the closed-form multivariate ``beta_hat`` uses identity-weighted
    sums, so it maximizes this objective exactly only when ``sigma`` is a
    multiple of the identity.
    """
    if not isinstance(field, MultiLatticeField):
        raise InvalidParams("expects a vector field")
    if field.dim != params.dim:
        raise InvalidParams(f"field dim {field.dim} != params dim {params.dim}")
    d, s = _neighbor_sum_disc(field, params.mu)
    resid = (d - params.beta * s).reshape(-1, field.dim)
    sign, logdet = np.linalg.slogdet(params.sigma)
    if sign <= 0:
        raise InvalidParams("sigma must be positive definite")
    solve = np.linalg.solve(params.sigma, resid.T)
    quad = float(np.sum(resid.T * solve))
    n = field.n_sites
    return float(-0.5 * n * (field.dim * math.log(2.0 * math.pi) + logdet)
                 - 0.5 * quad)


def format_estimation_report(report: EstimationReport) -> str:
    """Plain ``key=value`` serialization (17 significant digits).

    Scalar fits emit ``mu=, sigma2=, beta=, numerator=, denominator=,
    n_sites=``; vector fits replace ``sigma2`` with ``dim`` and one
    ``sigma_<r>=`` comma-joined row per covariance row.
    """
    p = report.params
    fmt = lambda x: format(float(x), ".17g")  # noqa: E731
    lines = []
    if isinstance(p, MultiModelParams):
        lines.append("mu=" + ",".join(fmt(v) for v in p.mu))
        lines.append(f"dim={p.dim}")
        for r in range(p.dim):
            lines.append(f"sigma_{r}=" + ",".join(fmt(v) for v in p.sigma[r]))
    else:
        lines.append(f"mu={fmt(p.mu)}")
        lines.append(f"sigma2={fmt(p.sigma2)}")
    lines.append(f"beta={fmt(p.beta)}")
    lines.append(f"numerator={fmt(report.numerator)}")
    lines.append(f"denominator={fmt(report.denominator)}")
    lines.append(f"n_sites={report.n_sites}")
    return "\n".join(lines) + "\n"
