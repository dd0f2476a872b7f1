"""Monte Carlo validation of the closed-form divergences.

The closed forms replace expectations of site/neighbor quadratics with
pooled moment sums.  This module estimates the same site-averaged
conditional KL divergence *without* that shortcut: for every snapshot it
evaluates, per site, the analytic KL divergence between the two conditional
Gaussians implied by the snapshot's actual neighbor values,

    KL_i = log(sig2/sig1) + (sig1^2 + (m1_i - m2_i)^2) / (2 sig2^2) - 1/2,
    m_k_i = mu_k + beta_k * sum_j (x_j - mu_k),

averages over sites, and treats each snapshot's average as one Monte Carlo
draw.  The standard error comes from snapshot-level batching, so thinned
snapshots should be weakly dependent (use a stride of a few sweeps).

The closed form being validated is evaluated from the *same* snapshots: the
empirical pooled moments of the snapshot set feed
:func:`gmrfkl.divergence.kl_univariate` (or the d-dimensional version), and
the oracle reports both numbers side by side with their relative error.

Also here: independent dense-algebra references for the classic Gaussian KL
divergence (the beta = 0 reduction target) and explicit-loop moment sums for
cross-checking the rolled implementations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InsufficientSamples, InvalidParams
from .lattice import (
    NEIGHBOR_OFFSETS,
    SECOND_ORDER,
    LatticeField,
    MultiLatticeField,
    NeighborhoodSpec,
)
from .moments import multi_patch_moments_pooled, patch_moments_pooled
from .divergence import (
    MultiKLInputs,
    UniKLInputs,
    kl_multivariate,
    kl_univariate,
)
from .sampler import ModelParams, MultiModelParams


@dataclass(frozen=True)
class OracleReport:
    """Side-by-side Monte Carlo estimate and closed-form value.

    ``relative_error`` is ``|mc - cf| / |cf|``; ``mc_stderr`` is the
    standard error of the snapshot-level averages.
    """

    mc_estimate: float
    mc_stderr: float
    closed_form: float
    relative_error: float
    n_samples: int

    def brackets(self, k: float = 3.0) -> bool:
        """Whether the closed form lies within ``k`` stderr of the MC mean."""
        return abs(self.mc_estimate - self.closed_form) <= k * self.mc_stderr


def _neighbor_sum(values: np.ndarray) -> np.ndarray:
    """Toroidal 8-neighbor sum of a (H, W) or (H, W, d) array."""
    s = np.zeros_like(values)
    for dr, dc in NEIGHBOR_OFFSETS:
        s += np.roll(values, shift=(-dr, -dc), axis=(0, 1))
    return s


def _require_snapshots(snapshots: Sequence) -> None:
    if len(snapshots) == 0:
        raise InsufficientSamples("no snapshots supplied")
    if len(snapshots) < 2:
        raise InsufficientSamples(
            "need at least 2 snapshots for a batched standard error"
        )


def _report(per_snapshot: np.ndarray, closed_form: float) -> OracleReport:
    mc = float(per_snapshot.mean())
    stderr = float(per_snapshot.std(ddof=1) / math.sqrt(per_snapshot.size))
    rel = abs(mc - closed_form) / abs(closed_form) if closed_form != 0.0 else math.inf
    if closed_form == 0.0 and mc == 0.0:
        rel = 0.0
    return OracleReport(mc_estimate=mc, mc_stderr=stderr, closed_form=closed_form,
                        relative_error=rel, n_samples=int(per_snapshot.size))


def mc_kl_univariate(snapshots: Sequence[LatticeField], params_p: ModelParams,
                     params_q: ModelParams,
                     spec: NeighborhoodSpec = SECOND_ORDER) -> OracleReport:
    """Monte Carlo vs closed-form site-averaged conditional KL, scalar case.

    ``snapshots`` must be draws from model p (e.g. thinned Gibbs output).
    Both numbers in the report derive from the same snapshots: the Monte
    Carlo average from per-site conditional KLs, the closed form from the
    snapshots' pooled empirical moments.

    Raises:
        InsufficientSamples: fewer than two snapshots.
    """
    _require_snapshots(snapshots)
    s1, s2 = params_p.sigma2, params_q.sigma2
    log_ratio = 0.5 * math.log(s2 / s1)
    per_snapshot = np.empty(len(snapshots))
    for idx, snap in enumerate(snapshots):
        s = _neighbor_sum(snap.values)
        m1 = params_p.mu + params_p.beta * (s - 8.0 * params_p.mu)
        m2 = params_q.mu + params_q.beta * (s - 8.0 * params_q.mu)
        kl = log_ratio + (s1 + (m1 - m2) ** 2) / (2.0 * s2) - 0.5
        per_snapshot[idx] = kl.mean()

    pooled = patch_moments_pooled(snapshots, spec)
    inputs = UniKLInputs(params_p=params_p, params_q=params_q,
                         moments_p=pooled, moments_q=pooled)
    closed_form = kl_univariate(inputs).d_pq
    return _report(per_snapshot, closed_form)


def mc_kl_multivariate(snapshots: Sequence[MultiLatticeField],
                       params_p: MultiModelParams, params_q: MultiModelParams,
                       spec: NeighborhoodSpec = SECOND_ORDER) -> OracleReport:
    """Monte Carlo vs closed-form site-averaged conditional KL, vector case.

    Per site the two conditional laws share covariances (Sigma_1, Sigma_2)
    across sites, so the trace and log-det pieces are computed once with
    dense inverses (this module deliberately avoids the factorized solves of
    the closed-form path) and only the mean-difference quadratic varies.
    """
    _require_snapshots(snapshots)
    d = params_p.dim
    if params_q.dim != d:
        raise InvalidParams(f"params dims differ: {d} vs {params_q.dim}")
    sig1, sig2 = params_p.sigma, params_q.sigma
    inv2 = np.linalg.inv(sig2)
    sign1, logdet1 = np.linalg.slogdet(sig1)
    sign2, logdet2 = np.linalg.slogdet(sig2)
    if sign1 <= 0 or sign2 <= 0:
        raise InvalidParams("covariances must be positive definite")
    const = 0.5 * (logdet2 - logdet1) + 0.5 * float(np.trace(inv2 @ sig1)) - 0.5 * d

    per_snapshot = np.empty(len(snapshots))
    for idx, snap in enumerate(snapshots):
        x = snap.values
        s = _neighbor_sum(x)
        m1 = params_p.mu + params_p.beta * (s - 8.0 * params_p.mu)
        m2 = params_q.mu + params_q.beta * (s - 8.0 * params_q.mu)
        diff = (m1 - m2).reshape(-1, d)
        quad = np.einsum("ni,ij,nj->n", diff, inv2, diff)
        per_snapshot[idx] = const + 0.5 * quad.mean()

    pooled = multi_patch_moments_pooled(snapshots, spec)
    inputs = MultiKLInputs(params_p=params_p, params_q=params_q,
                           moments_p=pooled, moments_q=pooled)
    closed_form = kl_multivariate(inputs).d_pq
    return _report(per_snapshot, closed_form)


def gaussian_kl_reference(params1: ModelParams, params2: ModelParams) -> float:
    """Classic KL divergence between two scalar Gaussians (betas ignored).

    ``log(sig2/sig1) + (sig1^2 + (mu1 - mu2)^2) / (2 sig2^2) - 1/2``.
    This is the value the closed form must reproduce at beta1 = beta2 = 0.
    """
    s1, s2 = params1.sigma2, params2.sigma2
    dmu = params1.mu - params2.mu
    return 0.5 * math.log(s2 / s1) + (s1 + dmu * dmu) / (2.0 * s2) - 0.5


def gaussian_kl_reference_multivariate(params1: MultiModelParams,
                                       params2: MultiModelParams) -> float:
    """Classic KL divergence between two d-dimensional Gaussians.

    Dense-algebra evaluation (explicit inverse and slogdet), independent of
    the factorized path used by :func:`gmrfkl.divergence.kl_multivariate`.
    """
    d = params1.dim
    if params2.dim != d:
        raise InvalidParams(f"params dims differ: {d} vs {params2.dim}")
    sig1, sig2 = params1.sigma, params2.sigma
    sign1, logdet1 = np.linalg.slogdet(sig1)
    sign2, logdet2 = np.linalg.slogdet(sig2)
    if sign1 <= 0 or sign2 <= 0:
        raise InvalidParams("covariances must be positive definite")
    inv2 = np.linalg.inv(sig2)
    dmu = params1.mu - params2.mu
    return float(0.5 * (logdet2 - logdet1 - d + np.trace(inv2 @ sig1)
                        + dmu @ inv2 @ dmu))


def brute_force_sums(field: LatticeField, mu: Optional[float] = None,
                     spec: NeighborhoodSpec = SECOND_ORDER) -> tuple[float, float]:
    """(R, S) moment sums by explicit per-site loops; the slow reference.

    R is the average over sites of ``d_i * sum_j d_j`` and S the average of
    ``(sum_j d_j)^2`` -- the same totals the rolled/pooled implementation
    reports as ``plus_norm(rho)`` and ``plus_norm(sigma_minus)``, for any
    centering mean (the rolled window columns are permutations of the
    centered field, so the identities are exact).
    """
    vals = field.values
    height, width = field.height, field.width
    mean = float(vals.mean()) if mu is None else float(mu)
    r_total = 0.0
    s_total = 0.0
    for r in range(height):
        for c in range(width):
            d_i = vals[r, c] - mean
            nb = 0.0
            for dr, dc in spec.offsets:
                nb += vals[(r + dr) % height, (c + dc) % width] - mean
            r_total += d_i * nb
            s_total += nb * nb
    n = height * width
    return r_total / n, s_total / n


def format_oracle_report(report: OracleReport) -> str:
    """Plain ``key=value`` serialization (17 significant digits)."""
    fmt = lambda x: format(float(x), ".17g")  # noqa: E731
    lines = [
        f"mc_estimate={fmt(report.mc_estimate)}",
        f"mc_stderr={fmt(report.mc_stderr)}",
        f"closed_form={fmt(report.closed_form)}",
        f"relative_error={fmt(report.relative_error)}",
        f"n_samples={report.n_samples}",
    ]
    return "\n".join(lines) + "\n"
