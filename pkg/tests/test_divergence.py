"""Closed-form divergences: reductions, exact zeros, equivalences, errors."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gmrfkl import (
    KLReport,
    LatticeField,
    ModelParams,
    MultiKLInputs,
    MultiModelParams,
    MultiPatchMoments,
    PatchMoments,
    UniKLInputs,
    format_kl_report,
    gaussian_kl_reference,
    gaussian_kl_reference_multivariate,
    kl_multivariate,
    kl_symmetrized_closed_form,
    kl_univariate,
    kl_univariate_vectorized,
    patch_moments,
)
from gmrfkl.errors import InvalidParams, SingularCovariance


def field_moments(seed, shape=(9, 8)):
    rng = np.random.default_rng(seed)
    return patch_moments(LatticeField.from_array(rng.normal(size=shape)))


def synthetic_moments(seed):
    """Valid random window moments built as an empirical Gram matrix."""
    rng = np.random.default_rng(seed)
    w = rng.normal(size=(40, 9))
    sigma_p = w.T @ w / 40.0
    sigma_p = (sigma_p + sigma_p.T) / 2.0
    return PatchMoments.from_sigma_p(sigma_p, mean=float(rng.normal()))


def embed_d1(m: PatchMoments) -> MultiPatchMoments:
    return MultiPatchMoments.from_sigma_p(m.sigma_p, [m.mean])


params_strategy = st.builds(
    ModelParams,
    mu=st.floats(-3.0, 3.0, allow_nan=False),
    sigma2=st.floats(0.2, 4.0, allow_nan=False),
    beta=st.floats(-0.124, 0.124, allow_nan=False),
)


# ---------------------------------------------------------------------------
# reduction to the classic Gaussian divergence at beta = 0
# ---------------------------------------------------------------------------

def test_gaussian_reduction_reference_pair():
    p = ModelParams(mu=0.0, sigma2=1.0, beta=0.0)
    q = ModelParams(mu=1.0, sigma2=2.0, beta=0.0)
    m = synthetic_moments(0)
    rep = kl_univariate(UniKLInputs(p, q, m, m))
    # closed form: log(sqrt(2)) + (1 + 1)/4 - 1/2 = 0.3465736...
    assert rep.d_pq == pytest.approx(0.5 * math.log(2.0), abs=1e-12)
    assert round(rep.d_pq, 7) == 0.3465736
    assert rep.d_pq == pytest.approx(gaussian_kl_reference(p, q), abs=1e-12)


@settings(deadline=None, max_examples=50)
@given(p=params_strategy, q=params_strategy, seed=st.integers(0, 1000))
def test_gaussian_reduction_any_params(p, q, seed):
    p0 = ModelParams(p.mu, p.sigma2, 0.0)
    q0 = ModelParams(q.mu, q.sigma2, 0.0)
    m = synthetic_moments(seed)
    rep = kl_univariate(UniKLInputs(p0, q0, m, m))
    assert rep.d_pq == pytest.approx(gaussian_kl_reference(p0, q0), abs=1e-12)
    assert rep.d_qp == pytest.approx(gaussian_kl_reference(q0, p0), abs=1e-12)


def test_multivariate_gaussian_reduction():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(3, 3))
    b = rng.normal(size=(3, 3))
    p = MultiModelParams(rng.normal(size=3), a @ a.T + 3 * np.eye(3), 0.0)
    q = MultiModelParams(rng.normal(size=3), b @ b.T + 3 * np.eye(3), 0.0)
    m = MultiPatchMoments.from_sigma_p(np.eye(27), np.zeros(3))
    rep = kl_multivariate(MultiKLInputs(p, q, m, m))
    assert rep.d_pq == pytest.approx(
        gaussian_kl_reference_multivariate(p, q), abs=1e-10)


def test_multivariate_reference_value_identity_vs_scaled():
    p = MultiModelParams(np.zeros(2), np.eye(2), 0.0)
    q = MultiModelParams(np.zeros(2), 2.0 * np.eye(2), 0.0)
    # (1/2)(2 log 2 - 2 + 1) = log 2 - 1/2 = 0.1931472...
    ref = gaussian_kl_reference_multivariate(p, q)
    assert round(ref, 7) == 0.1931472
    m = MultiPatchMoments.from_sigma_p(np.eye(18), np.zeros(2))
    assert kl_multivariate(MultiKLInputs(p, q, m, m)).d_pq == pytest.approx(
        ref, abs=1e-12)


# ---------------------------------------------------------------------------
# exact zeros and exact identities
# ---------------------------------------------------------------------------

@settings(deadline=None, max_examples=50)
@given(p=params_strategy, seed=st.integers(0, 1000))
def test_self_divergence_exactly_zero(p, seed):
    m = synthetic_moments(seed)
    rep = kl_univariate(UniKLInputs(p, p, m, m))
    assert rep.d_pq == 0.0
    assert rep.d_qp == 0.0
    assert rep.d_sym == 0.0


def test_multivariate_self_divergence_within_1e12():
    rng = np.random.default_rng(4)
    a = rng.normal(size=(2, 2))
    p = MultiModelParams(rng.normal(size=2), a @ a.T + 2 * np.eye(2), 0.07)
    w = rng.normal(size=(60, 18))
    gram = w.T @ w / 60.0
    m = MultiPatchMoments.from_sigma_p((gram + gram.T) / 2.0, rng.normal(size=2))
    rep = kl_multivariate(MultiKLInputs(p, p, m, m))
    assert abs(rep.d_pq) <= 1e-12
    assert abs(rep.d_qp) <= 1e-12
    assert abs(rep.d_sym) <= 1e-12


def test_beta_zero_same_sigma_gives_exact_half_mean_term():
    """mu differs by 1, sigma2 equal, betas zero: d = 1/(2 sigma2) with the
    quadratic evaluated exactly; at sigma2 = 1 the value is exactly 0.5."""
    p = ModelParams(mu=0.0, sigma2=1.0, beta=0.0)
    q = ModelParams(mu=1.0, sigma2=1.0, beta=0.0)
    m = synthetic_moments(5)
    rep = kl_univariate(UniKLInputs(p, q, m, m))
    assert rep.d_pq == 0.5
    assert rep.d_qp == 0.5
    assert rep.d_sym == 0.5


def test_vectorized_route_is_bit_identical():
    p = ModelParams(0.3, 1.2, 0.04)
    q = ModelParams(-0.2, 0.7, 0.11)
    inputs = UniKLInputs(p, q, field_moments(6), field_moments(7))
    a = kl_univariate(inputs)
    b = kl_univariate_vectorized(inputs)
    assert (a.d_pq, a.d_qp, a.d_sym) == (b.d_pq, b.d_qp, b.d_sym)
    assert a.terms_pq == b.terms_pq and a.terms_qp == b.terms_qp


def test_d_sym_is_exactly_the_average():
    inputs = UniKLInputs(ModelParams(0.1, 1.0, 0.02),
                         ModelParams(0.0, 1.3, 0.09),
                         field_moments(8), field_moments(9))
    rep = kl_univariate(inputs)
    assert rep.d_sym == 0.5 * (rep.d_pq + rep.d_qp)


# ---------------------------------------------------------------------------
# the single-expression symmetrized form
# ---------------------------------------------------------------------------

@settings(deadline=None, max_examples=60)
@given(p=params_strategy, q=params_strategy,
       s1=st.integers(0, 1000), s2=st.integers(0, 1000))
def test_symmetrized_closed_form_matches_average(p, q, s1, s2):
    inputs = UniKLInputs(p, q, synthetic_moments(s1), synthetic_moments(s2))
    combined = kl_symmetrized_closed_form(inputs)
    averaged = kl_univariate(inputs).d_sym
    assert combined == pytest.approx(averaged, abs=1e-9)


def test_symmetrized_reference_pair():
    p = ModelParams(0.0, 1.0, 0.0)
    q = ModelParams(1.0, 2.0, 0.0)
    m = synthetic_moments(10)
    inputs = UniKLInputs(p, q, m, m)
    # average of 0.34657... and 0.59657...; both directions share moments
    rep = kl_univariate(inputs)
    assert kl_symmetrized_closed_form(inputs) == pytest.approx(rep.d_sym,
                                                               abs=1e-12)


# ---------------------------------------------------------------------------
# multivariate structure
# ---------------------------------------------------------------------------

def test_multivariate_d1_matches_univariate():
    mu = field_moments(11)
    mq = field_moments(12)
    p1 = ModelParams(0.2, 1.1, 0.03)
    p2 = ModelParams(-0.4, 0.8, 0.09)
    uni = kl_univariate(UniKLInputs(p1, p2, mu, mq))
    multi = kl_multivariate(MultiKLInputs(
        MultiModelParams([p1.mu], [[p1.sigma2]], p1.beta),
        MultiModelParams([p2.mu], [[p2.sigma2]], p2.beta),
        embed_d1(mu), embed_d1(mq)))
    assert multi.d_pq == pytest.approx(uni.d_pq, rel=1e-10, abs=1e-14)
    assert multi.d_qp == pytest.approx(uni.d_qp, rel=1e-10, abs=1e-14)
    assert multi.d_sym == pytest.approx(uni.d_sym, rel=1e-10, abs=1e-14)


def test_trace_terms_match_explicit_inverse():
    """Each Tr(A^{-1} block) the factorized path sums is reproduced by a
    dense explicit-inverse evaluation, block by block."""
    rng = np.random.default_rng(13)
    d = 3
    w = rng.normal(size=(200, 9 * d))
    sp = w.T @ w / 200.0
    m = MultiPatchMoments.from_sigma_p((sp + sp.T) / 2.0, rng.normal(size=d))
    a = rng.normal(size=(d, d))
    sigma = a @ a.T + d * np.eye(d)
    inv = np.linalg.inv(sigma)

    c1 = m.cross_center.sum(axis=0)
    c2 = m.cross_neighbors.sum(axis=(0, 1))
    per_block_c1 = sum(float(np.trace(inv @ m.cross_center[j])) for j in range(8))
    per_block_c2 = sum(float(np.trace(inv @ m.cross_neighbors[j, k]))
                       for j in range(8) for k in range(8))
    assert float(np.trace(np.linalg.solve(sigma, c1))) == pytest.approx(
        per_block_c1, rel=1e-10)
    assert float(np.trace(np.linalg.solve(sigma, c2))) == pytest.approx(
        per_block_c2, rel=1e-10)


def test_singular_covariance_raises_and_ridge_recovers():
    p_good = MultiModelParams([0.0, 0.0], np.eye(2), 0.0)
    p_sing = MultiModelParams([0.0, 0.0], np.array([[1.0, 1.0], [1.0, 1.0]]), 0.0)
    m = MultiPatchMoments.from_sigma_p(np.eye(18), np.zeros(2))
    with pytest.raises(SingularCovariance):
        kl_multivariate(MultiKLInputs(p_sing, p_good, m, m))
    rep = kl_multivariate(MultiKLInputs(p_sing, p_good, m, m), ridge=1e-8)
    assert math.isfinite(rep.d_pq)
    with pytest.raises(InvalidParams):
        kl_multivariate(MultiKLInputs(p_sing, p_good, m, m), ridge=-1.0)


def test_dim_mismatch_rejected():
    p2 = MultiModelParams([0.0, 0.0], np.eye(2), 0.0)
    p3 = MultiModelParams([0.0, 0.0, 0.0], np.eye(3), 0.0)
    m2 = MultiPatchMoments.from_sigma_p(np.eye(18), np.zeros(2))
    m3 = MultiPatchMoments.from_sigma_p(np.eye(27), np.zeros(3))
    with pytest.raises(InvalidParams):
        MultiKLInputs(p2, p3, m2, m3)
    with pytest.raises(InvalidParams):
        MultiKLInputs(p2, p2, m2, m3)


def test_delta_other_than_eight_rejected():
    p = ModelParams(0.0, 1.0, 0.0)
    m = synthetic_moments(14)
    with pytest.raises(InvalidParams):
        UniKLInputs(p, p, m, m, delta=4)


# ---------------------------------------------------------------------------
# no clamping, term breakdown, serialization
# ---------------------------------------------------------------------------

def test_inconsistent_moments_can_go_negative():
    """Same sigma, different betas, moments whose R exceeds the stationary
    relation: the formula reports the (negative) value it computes."""
    sp = np.eye(9) * 2.0
    sp[4, :] = sp[:, 4] = 1.0
    sp[4, 4] = 2.0
    m = PatchMoments.from_sigma_p(sp, 0.0)  # R = 8, S = 16
    p = ModelParams(0.0, 1.0, 0.05)
    q = ModelParams(0.0, 1.0, 0.06)
    rep = kl_univariate(UniKLInputs(p, q, m, m))
    assert rep.d_pq < 0.0


def test_terms_decompose_totals():
    p = ModelParams(0.4, 1.3, 0.02)
    q = ModelParams(-0.1, 0.9, 0.12)
    rep = kl_univariate(UniKLInputs(p, q, field_moments(15), field_moments(16)))
    t = rep.terms_pq
    assert rep.d_pq == t.log_ratio + t.a_term + t.b_term + t.mean_shift
    # beta = 0 in q removes the shrink factor from the mean term
    q0 = ModelParams(-0.1, 0.9, 0.0)
    rep0 = kl_univariate(UniKLInputs(p, q0, field_moments(15), field_moments(16)))
    dmu2 = (p.mu - q0.mu) ** 2
    assert rep0.terms_pq.mean_shift == dmu2 / (2.0 * q0.sigma2)


def test_field_total_scales_by_sites():
    rep = kl_univariate(UniKLInputs(ModelParams(0.0, 1.0, 0.0),
                                    ModelParams(1.0, 2.0, 0.0),
                                    synthetic_moments(17), synthetic_moments(17)))
    totals = rep.field_total(100)
    assert totals["total_d_pq"] == 100 * rep.d_pq
    with pytest.raises(InvalidParams):
        rep.field_total(0)


def test_format_kl_report_keys():
    rep = kl_univariate(UniKLInputs(ModelParams(0.0, 1.0, 0.02),
                                    ModelParams(0.5, 1.5, 0.08),
                                    field_moments(18), field_moments(19)))
    text = format_kl_report(rep, n_sites=64)
    keys = [line.split("=")[0] for line in text.strip().splitlines()]
    assert keys[:3] == ["d_pq", "d_qp", "d_sym"]
    assert "pq_mean_shift" in keys and "qp_log_ratio" in keys
    assert keys[-4:] == ["n_sites", "total_d_pq", "total_d_qp", "total_d_sym"]
    no_totals = format_kl_report(rep)
    assert "n_sites" not in no_totals
