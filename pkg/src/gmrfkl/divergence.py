"""Closed-form Kullback-Leibler divergences between two field models.

The divergence between two fields is measured through their local
conditional laws: average over sites the KL divergence between the site's
conditional Gaussian under model p = (mu1, sigma1^2, beta1) and under model
q = (mu2, sigma2^2, beta2), with the expectation over site/neighbor values
taken under p.  All those expectations reduce to three pooled moments of p:

    var  -- site variance,
    R    -- total center-neighbor covariance, ``plus_norm(rho)``,
    S    -- total neighbor-neighbor covariance, ``plus_norm(sigma_minus)``,

which gives a per-site closed form with four named pieces::

    d_pq = log(sigma2 / sigma1)                        ( log_ratio )
           - (s1 - 2 b1 R + b1^2 S) / (2 s1)           ( a_term    )
           + (s1 - 2 b2 R + b2^2 S) / (2 s2)           ( b_term    )
           + (mu1 - mu2)^2 (1 - delta b2)^2 / (2 s2)   ( mean_shift)

writing s for sigma^2.  The closed form identifies the model's conditional
variance s1 with the field's second moment about mu1, which is exact when
the moment inputs are built from the same model parameters and is the
standing convention for empirical moments.  The reverse direction swaps the
roles of the two models and uses q's moments.  ``d_sym`` is the average of
the two directions; :func:`kl_symmetrized_closed_form` evaluates the
single-expression form of that average, which is algebraically identical.

The d-dimensional version replaces the three scalars by trace functionals of
the window covariance blocks; see :func:`kl_multivariate`.

Nothing here is clamped: a negative value faithfully reports that the moment
inputs are inconsistent with the parameters (e.g. mismatched empirical
moments), which is diagnostic signal, not an error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .errors import InvalidParams, SingularCovariance
from .moments import MultiPatchMoments, PatchMoments, plus_norm
from .sampler import ModelParams, MultiModelParams

DELTA = 8  # neighbor count of the second-order system


@dataclass(frozen=True)
class UniKLInputs:
    """Everything the scalar closed form consumes.

    ``moments_p`` feeds the p -> q direction, ``moments_q`` the reverse.
    For model-based (non-empirical) evaluation build exact moments; for
    empirical evaluation use :func:`gmrfkl.moments.patch_moments` output.
    """

    params_p: ModelParams
    params_q: ModelParams
    moments_p: PatchMoments
    moments_q: PatchMoments
    delta: int = DELTA

    def __post_init__(self) -> None:
        if self.delta != DELTA:
            raise InvalidParams(f"only delta = {DELTA} is supported, got {self.delta}")


@dataclass(frozen=True)
class MultiKLInputs:
    """d-dimensional analogue of :class:`UniKLInputs`."""

    params_p: MultiModelParams
    params_q: MultiModelParams
    moments_p: MultiPatchMoments
    moments_q: MultiPatchMoments
    delta: int = DELTA

    def __post_init__(self) -> None:
        if self.delta != DELTA:
            raise InvalidParams(f"only delta = {DELTA} is supported, got {self.delta}")
        dims = {self.params_p.dim, self.params_q.dim,
                self.moments_p.dim, self.moments_q.dim}
        if len(dims) != 1:
            raise InvalidParams(f"dimension mismatch across inputs: {sorted(dims)}")


@dataclass(frozen=True)
class KLTerms:
    """The four named pieces of one direction of the closed form."""

    log_ratio: float
    a_term: float
    b_term: float
    mean_shift: float

    @property
    def total(self) -> float:
        return self.log_ratio + self.a_term + self.b_term + self.mean_shift


@dataclass(frozen=True)
class KLReport:
    """Per-site divergences in both directions plus their average.

    All values are per site; multiply by the number of sites (see
    :meth:`field_total`) for whole-field divergences.
    """

    d_pq: float
    d_qp: float
    d_sym: float
    terms_pq: KLTerms
    terms_qp: KLTerms

    def field_total(self, n_sites: int) -> dict:
        """Whole-field divergences: n_sites times the per-site values."""
        if n_sites <= 0:
            raise InvalidParams(f"n_sites must be positive, got {n_sites}")
        return {
            "total_d_pq": n_sites * self.d_pq,
            "total_d_qp": n_sites * self.d_qp,
            "total_d_sym": n_sites * self.d_sym,
        }


def _uni_direction(par1: ModelParams, par2: ModelParams,
                   moments1: PatchMoments, delta: int) -> KLTerms:
    """One direction of the scalar closed form, model 1 -> model 2.

    The bracket (s1 - 2 b R + b^2 S) is evaluated with the *same* grouping
    for both occurrences, so when par1 == par2 the a and b terms cancel
    exactly in floating point and the direction is identically zero.
    """
    s1, s2 = par1.sigma2, par2.sigma2
    r_sum = plus_norm(moments1.rho)
    s_sum = plus_norm(moments1.sigma_minus)

    def bracket(beta: float) -> float:
        return s1 - 2.0 * beta * r_sum + beta * beta * s_sum

    log_ratio = 0.5 * math.log(s2 / s1)
    a_term = -bracket(par1.beta) / (2.0 * s1)
    b_term = bracket(par2.beta) / (2.0 * s2)
    dmu = par1.mu - par2.mu
    shrink = 1.0 - delta * par2.beta
    mean_shift = dmu * dmu * shrink * shrink / (2.0 * s2)
    return KLTerms(log_ratio, a_term, b_term, mean_shift)


def kl_univariate(inputs: UniKLInputs) -> KLReport:
    """Scalar closed-form KL report (both directions and their average).

    The forward direction consumes only p's moments, the reverse only q's.
    With beta1 = beta2 = 0 both directions reduce exactly to the classic
    Gaussian KL divergence.
    """
    terms_pq = _uni_direction(inputs.params_p, inputs.params_q,
                              inputs.moments_p, inputs.delta)
    terms_qp = _uni_direction(inputs.params_q, inputs.params_p,
                              inputs.moments_q, inputs.delta)
    d_pq = terms_pq.total
    d_qp = terms_qp.total
    return KLReport(d_pq=d_pq, d_qp=d_qp, d_sym=0.5 * (d_pq + d_qp),
                    terms_pq=terms_pq, terms_qp=terms_qp)


def kl_univariate_vectorized(inputs: UniKLInputs) -> KLReport:
    """Scalar closed form in its summed-moment (plus-norm) factoring.

    The element-wise sums over the 8 neighbor covariances and the 8 x 8
    neighbor block factor through the grand-sum functional, so this shares
    the arithmetic of :func:`kl_univariate` term for term and returns
    bit-identical values; it exists as the named vectorized entry point.
    """
    return kl_univariate(inputs)


def kl_symmetrized_closed_form(inputs: UniKLInputs) -> float:
    """Single-expression symmetrized divergence.

    Evaluates the combined-fraction form over the common denominator
    ``4 s1 s2`` directly (independent arithmetic path from averaging the two
    directions); agrees with ``kl_univariate(...).d_sym`` to floating-point
    rounding because the two expressions are algebraically identical.
    """
    p1, p2 = inputs.params_p, inputs.params_q
    s1, s2 = p1.sigma2, p2.sigma2
    b1, b2 = p1.beta, p2.beta
    rp = plus_norm(inputs.moments_p.rho)
    sp = plus_norm(inputs.moments_p.sigma_minus)
    rq = plus_norm(inputs.moments_q.rho)
    sq = plus_norm(inputs.moments_q.sigma_minus)
    dmu2 = (p1.mu - p2.mu) ** 2
    shrink_q = (1.0 - inputs.delta * b2) ** 2
    shrink_p = (1.0 - inputs.delta * b1) ** 2
    combined = (
        (s1 - s2) ** 2
        - 2.0 * (b2 * s1 - b1 * s2) * (rp - rq)
        + (b2 * b2 * s1 - b1 * b1 * s2) * (sp - sq)
        + dmu2 * (s1 * shrink_q + s2 * shrink_p)
    )
    return combined / (4.0 * s1 * s2)


def _chol(mat: np.ndarray, what: str, ridge: float):
    if ridge > 0.0:
        mat = mat + ridge * np.eye(mat.shape[0])
    try:
        return cho_factor(mat, lower=True)
    except (LinAlgError, np.linalg.LinAlgError) as exc:
        raise SingularCovariance(f"{what} is not positive definite") from exc


def _logdet(cho) -> float:
    return 2.0 * float(np.sum(np.log(np.diag(cho[0]))))


def _trace_solve(cho, mat: np.ndarray) -> float:
    """Tr(A^{-1} M) via the Cholesky factor of A (no explicit inverse)."""
    return float(np.trace(cho_solve(cho, mat)))


def _multi_direction(par1: MultiModelParams, par2: MultiModelParams,
                     moments1: MultiPatchMoments, delta: int,
                     ridge: float) -> KLTerms:
    """One direction of the d-dimensional closed form, model 1 -> model 2.

    The three scalar moments become trace functionals of model-1 moment
    blocks: Tr(A^{-1} Sigma), Tr(A^{-1} C1) with C1 the summed
    center-neighbor cross blocks, and Tr(A^{-1} C2) with C2 the summed
    neighbor-neighbor blocks, weighted by A = Sigma_1 inside a_term and
    A = Sigma_2 inside b_term.
    """
    d = par1.dim
    cho1 = _chol(par1.sigma, "sigma of the first model", ridge)
    cho2 = _chol(par2.sigma, "sigma of the second model", ridge)
    c1 = moments1.cross_center.sum(axis=0)
    c2 = moments1.cross_neighbors.sum(axis=(0, 1))

    log_ratio = 0.5 * (_logdet(cho2) - _logdet(cho1))
    b1, b2 = par1.beta, par2.beta
    # The leading trace of each bracket identifies the site's second moment
    # with the model-1 covariance (the d-dimensional version of the scalar
    # bracket leading with s1): Tr(S1^{-1} S1) = d in a_term, Tr(S2^{-1} S1)
    # in b_term.  Only the cross blocks come from the supplied moments.
    a_term = -0.5 * (d - 2.0 * b1 * _trace_solve(cho1, c1)
                     + b1 * b1 * _trace_solve(cho1, c2))
    b_term = 0.5 * (_trace_solve(cho2, par1.sigma)
                    - 2.0 * b2 * _trace_solve(cho2, c1)
                    + b2 * b2 * _trace_solve(cho2, c2))
    dmu = par1.mu - par2.mu
    shrink = 1.0 - delta * b2
    quad = float(dmu @ cho_solve(cho2, dmu))
    mean_shift = 0.5 * shrink * shrink * quad
    return KLTerms(log_ratio, a_term, b_term, mean_shift)


def kl_multivariate(inputs: MultiKLInputs, *, ridge: float = 0.0) -> KLReport:
    """d-dimensional closed-form KL report.

    All matrix work goes through Cholesky factorizations and triangular
    solves (no explicit inverses); a non-positive-definite covariance raises
    :class:`SingularCovariance` rather than being silently regularized.
    Pass ``ridge > 0`` to opt in to adding ``ridge * I`` before factorizing.

    For d = 1 every trace collapses to the scalar ratio it generalizes and
    the report matches :func:`kl_univariate` to floating-point accuracy.
    """
    if ridge < 0.0:
        raise InvalidParams(f"ridge must be >= 0, got {ridge}")
    terms_pq = _multi_direction(inputs.params_p, inputs.params_q,
                                inputs.moments_p, inputs.delta, ridge)
    terms_qp = _multi_direction(inputs.params_q, inputs.params_p,
                                inputs.moments_q, inputs.delta, ridge)
    d_pq = terms_pq.total
    d_qp = terms_qp.total
    return KLReport(d_pq=d_pq, d_qp=d_qp, d_sym=0.5 * (d_pq + d_qp),
                    terms_pq=terms_pq, terms_qp=terms_qp)


def format_kl_report(report: KLReport, n_sites: Optional[int] = None) -> str:
    """Plain ``key=value`` serialization (17 significant digits).

    Emits the three per-site divergences, the four named terms of each
    direction, and -- when ``n_sites`` is given -- the whole-field totals,
    labeled ``total_*``.
    """
    fmt = lambda x: format(float(x), ".17g")  # noqa: E731
    lines = [
        f"d_pq={fmt(report.d_pq)}",
        f"d_qp={fmt(report.d_qp)}",
        f"d_sym={fmt(report.d_sym)}",
    ]
    for tag, terms in (("pq", report.terms_pq), ("qp", report.terms_qp)):
        lines.append(f"{tag}_log_ratio={fmt(terms.log_ratio)}")
        lines.append(f"{tag}_a_term={fmt(terms.a_term)}")
        lines.append(f"{tag}_b_term={fmt(terms.b_term)}")
        lines.append(f"{tag}_mean_shift={fmt(terms.mean_shift)}")
    if n_sites is not None:
        totals = report.field_total(n_sites)
        lines.append(f"n_sites={n_sites}")
        for key in ("total_d_pq", "total_d_qp", "total_d_sym"):
            lines.append(f"{key}={fmt(totals[key])}")
    return "\n".join(lines) + "\n"
