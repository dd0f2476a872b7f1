"""Empirical patch moments of lattice fields.

Everything downstream (estimation, closed-form divergences, the Monte Carlo
oracle) consumes one object: the biased (1/n) sample covariance of the 9-site
toroidal window, pooled over all lattice sites under the stationarity
convention that every site is a draw from the same local law.  Centering uses
the grand sample mean of the field unless the caller supplies a known mean.

Window positions follow the row-major order of :mod:`gmrfkl.lattice`; the
center site is position 4.  Derived views:

* ``rho``          -- covariances between the center and its 8 neighbors,
* ``sigma_minus``  -- the 8x8 neighbor-neighbor covariance block,
* ``var``          -- the center variance (position 4 diagonal entry).

For d-dimensional fields the window matrix has ``9 * d`` columns
(position-major, the d components of each window position contiguous) and the
same blocks become ``d x d`` matrices.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateField, InvalidParams
from .lattice import (
    CENTER_INDEX,
    SECOND_ORDER,
    WINDOW_OFFSETS,
    AnyField,
    LatticeField,
    MultiLatticeField,
    NeighborhoodSpec,
    window_matrix,
)

_NEIGHBOR_COLS = [i for i in range(len(WINDOW_OFFSETS)) if i != CENTER_INDEX]

_SYMMETRY_RTOL = 1e-12


def plus_norm(a: np.ndarray) -> float:
    """Sum of all entries of ``a`` (the grand-sum functional).

    Applied to ``rho`` it gives the total center-neighbor covariance; applied
    to ``sigma_minus`` the total neighbor-neighbor covariance.  Both sums are
    the only way the moment matrices enter the closed-form divergences and
    the interaction estimator.
    """
    return float(np.sum(a))


def _check_symmetric(mat: np.ndarray, what: str) -> None:
    scale = max(float(np.max(np.abs(mat))), 1.0)
    if float(np.max(np.abs(mat - mat.T))) > _SYMMETRY_RTOL * scale:
        raise InvalidParams(f"{what} is not symmetric within {_SYMMETRY_RTOL} relative")


@dataclass(frozen=True)
class PatchMoments:
    """Pooled window moments of a scalar field.

    Attributes:
        mean: the centering value used (grand sample mean unless overridden).
        var: center-site variance, ``sigma_p[4, 4]``.
        rho: shape (8,), center-neighbor covariances in window order.
        sigma_minus: shape (8, 8), neighbor-neighbor covariance block.
        sigma_p: shape (9, 9), the full window covariance; symmetric and
            positive semidefinite up to floating-point tolerance.
        n_sites: number of pooled site windows.
    """

    mean: float
    var: float
    rho: np.ndarray
    sigma_minus: np.ndarray
    sigma_p: np.ndarray
    n_sites: int

    @classmethod
    def from_sigma_p(cls, sigma_p: np.ndarray, mean: float,
                     n_sites: int = 0) -> "PatchMoments":
        """Build the derived views from a full 9x9 window covariance."""
        sigma_p = np.asarray(sigma_p, dtype=np.float64)
        if sigma_p.shape != (9, 9):
            raise InvalidParams(f"sigma_p must be 9x9, got {sigma_p.shape}")
        _check_symmetric(sigma_p, "sigma_p")
        var = float(sigma_p[CENTER_INDEX, CENTER_INDEX])
        if var <= 0.0:
            raise DegenerateField(f"center variance must be positive, got {var}")
        rho = sigma_p[CENTER_INDEX, _NEIGHBOR_COLS].copy()
        sigma_minus = sigma_p[np.ix_(_NEIGHBOR_COLS, _NEIGHBOR_COLS)].copy()
        return cls(mean=float(mean), var=var, rho=rho, sigma_minus=sigma_minus,
                   sigma_p=sigma_p.copy(), n_sites=int(n_sites))

    @property
    def dim(self) -> int:
        return 1


@dataclass(frozen=True)
class MultiPatchMoments:
    """Pooled window moments of a d-dimensional field.

    Attributes:
        mean: shape (d,), the centering vector used.
        sigma: shape (d, d), center-site covariance (block 4,4 of sigma_p).
        cross_center: shape (8, d, d); ``cross_center[j]`` is the d x d
            cross-covariance between the center and neighbor j.
        cross_neighbors: shape (8, 8, d, d); block (j, k) couples neighbors
            j and k.
        sigma_p: shape (9d, 9d) full window covariance, position-major.
        n_sites: number of pooled site windows.
    """

    mean: np.ndarray
    sigma: np.ndarray
    cross_center: np.ndarray
    cross_neighbors: np.ndarray
    sigma_p: np.ndarray
    n_sites: int

    @classmethod
    def from_sigma_p(cls, sigma_p: np.ndarray, mean: np.ndarray,
                     n_sites: int = 0) -> "MultiPatchMoments":
        mean = np.asarray(mean, dtype=np.float64).reshape(-1)
        d = mean.shape[0]
        sigma_p = np.asarray(sigma_p, dtype=np.float64)
        if sigma_p.shape != (9 * d, 9 * d):
            raise InvalidParams(
                f"sigma_p must be {9 * d}x{9 * d} for dim {d}, got {sigma_p.shape}"
            )
        _check_symmetric(sigma_p, "sigma_p")
        blocks = sigma_p.reshape(9, d, 9, d).transpose(0, 2, 1, 3)  # (9, 9, d, d)
        sigma = blocks[CENTER_INDEX, CENTER_INDEX].copy()
        if float(np.trace(sigma)) <= 0.0:
            raise DegenerateField("center covariance has non-positive trace")
        cross_center = blocks[CENTER_INDEX][_NEIGHBOR_COLS].copy()
        cross_neighbors = blocks[np.ix_(_NEIGHBOR_COLS, _NEIGHBOR_COLS)].copy()
        return cls(mean=mean.copy(), sigma=sigma, cross_center=cross_center,
                   cross_neighbors=cross_neighbors, sigma_p=sigma_p.copy(),
                   n_sites=int(n_sites))

    @property
    def dim(self) -> int:
        return int(self.mean.shape[0])


def _centered_window_matrix(field: AnyField, spec: NeighborhoodSpec,
                            mu) -> tuple[np.ndarray, np.ndarray]:
    """Window matrix minus the centering mean; returns (D, mean_used)."""
    mat = window_matrix(field, spec)
    if isinstance(field, MultiLatticeField):
        d = field.dim
        if mu is None:
            mean = field.values.reshape(-1, d).mean(axis=0)
        else:
            mean = np.asarray(mu, dtype=np.float64).reshape(-1)
            if mean.shape[0] != d:
                raise InvalidParams(f"mu has dim {mean.shape[0]}, field has {d}")
        centered = mat - np.tile(mean, len(WINDOW_OFFSETS))
    else:
        mean = float(field.values.mean()) if mu is None else float(mu)
        centered = mat - mean
    return centered, mean


def _pooled_sigma_p(mats: Sequence[np.ndarray]) -> np.ndarray:
    total = np.zeros((mats[0].shape[1], mats[0].shape[1]))
    n = 0
    for d_mat in mats:
        total += d_mat.T @ d_mat
        n += d_mat.shape[0]
    sigma_p = total / n
    # enforce exact symmetry (BLAS products are symmetric only up to rounding)
    return (sigma_p + sigma_p.T) / 2.0


def patch_moments(field: LatticeField, spec: NeighborhoodSpec = SECOND_ORDER,
                  mu: Optional[float] = None) -> PatchMoments:
    """Biased (1/n) pooled window covariance of a scalar field.

    Args:
        field: the lattice field.
        spec: neighborhood descriptor (second-order only).
        mu: centering mean; defaults to the grand sample mean of the field.

    Raises:
        DegenerateField: if the field is constant (zero variance).
    """
    if not isinstance(field, LatticeField):
        raise InvalidParams("patch_moments expects a scalar LatticeField")
    centered, mean = _centered_window_matrix(field, spec, mu)
    sigma_p = _pooled_sigma_p([centered])
    if sigma_p[CENTER_INDEX, CENTER_INDEX] <= 0.0:
        raise DegenerateField("field has zero sample variance")
    return PatchMoments.from_sigma_p(sigma_p, mean, n_sites=field.n_sites)


def multi_patch_moments(field: MultiLatticeField,
                        spec: NeighborhoodSpec = SECOND_ORDER,
                        mu=None) -> MultiPatchMoments:
    """Biased (1/n) pooled window covariance of a d-dimensional field.

    Raises:
        DegenerateField: if every component of the field is constant.
    """
    if not isinstance(field, MultiLatticeField):
        raise InvalidParams("multi_patch_moments expects a MultiLatticeField")
    centered, mean = _centered_window_matrix(field, spec, mu)
    sigma_p = _pooled_sigma_p([centered])
    d = field.dim
    center = sigma_p[CENTER_INDEX * d:(CENTER_INDEX + 1) * d,
                     CENTER_INDEX * d:(CENTER_INDEX + 1) * d]
    if float(np.trace(center)) <= 0.0:
        raise DegenerateField("field has zero sample variance in every component")
    return MultiPatchMoments.from_sigma_p(sigma_p, mean, n_sites=field.n_sites)


def patch_moments_pooled(fields: Sequence[LatticeField],
                         spec: NeighborhoodSpec = SECOND_ORDER,
                         mu: Optional[float] = None) -> PatchMoments:
    """Window moments pooled across several fields (e.g. Gibbs snapshots).

    Sites of every field count equally; the default centering mean is the
    grand mean over *all* fields, matching the single-field convention.
    """
    if not fields:
        raise InvalidParams("need at least one field to pool moments")
    if mu is None:
        mu = float(np.mean([f.values.mean() for f in fields]))
    mats = [_centered_window_matrix(f, spec, mu)[0] for f in fields]
    sigma_p = _pooled_sigma_p(mats)
    if sigma_p[CENTER_INDEX, CENTER_INDEX] <= 0.0:
        raise DegenerateField("pooled fields have zero sample variance")
    n = sum(f.n_sites for f in fields)
    return PatchMoments.from_sigma_p(sigma_p, mu, n_sites=n)


def multi_patch_moments_pooled(fields: Sequence[MultiLatticeField],
                               spec: NeighborhoodSpec = SECOND_ORDER,
                               mu=None) -> MultiPatchMoments:
    """Vector-field analogue of :func:`patch_moments_pooled`."""
    if not fields:
        raise InvalidParams("need at least one field to pool moments")
    d = fields[0].dim
    if mu is None:
        mu = np.mean([f.values.reshape(-1, d).mean(axis=0) for f in fields], axis=0)
    mats = [_centered_window_matrix(f, spec, mu)[0] for f in fields]
    sigma_p = _pooled_sigma_p(mats)
    center = sigma_p[CENTER_INDEX * d:(CENTER_INDEX + 1) * d,
                     CENTER_INDEX * d:(CENTER_INDEX + 1) * d]
    if float(np.trace(center)) <= 0.0:
        raise DegenerateField("pooled fields have zero sample variance")
    n = sum(f.n_sites for f in fields)
    return MultiPatchMoments.from_sigma_p(sigma_p, mu, n_sites=n)


def psd_violation(moments) -> float:
    """Most negative eigenvalue of ``sigma_p`` (0.0 if none are negative).

    The pooled window covariance is positive semidefinite by construction,
    so anything below roughly ``-1e-10`` signals corrupted input.
    """
    eigs = np.linalg.eigvalsh(moments.sigma_p)
    return float(min(eigs.min(), 0.0))


# ---------------------------------------------------------------------------
# Moments file format (GMRFMOM1)
#
#   GMRFMOM1 <dim>
#   <mean: dim reals>
#   <center covariance: dim rows of dim reals>
#   <sigma_p: 9*dim rows of 9*dim reals>
#
# All values use 17 significant digits (lossless float64 round-trip).  The
# center covariance block is stored redundantly for human consumption and is
# cross-checked against sigma_p on read.
# ---------------------------------------------------------------------------

MOMENTS_MAGIC = "GMRFMOM1"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_moments(moments, path) -> None:
    """Serialize moments to ``path`` in the GMRFMOM1 plain-text format."""
    d = moments.dim
    if d == 1:
        mean = np.array([moments.mean])
        center = np.array([[moments.var]])
    else:
        mean = moments.mean
        center = moments.sigma
    lines = [f"{MOMENTS_MAGIC} {d}", " ".join(_fmt(v) for v in mean)]
    for row in center:
        lines.append(" ".join(_fmt(v) for v in row))
    for row in moments.sigma_p:
        lines.append(" ".join(_fmt(v) for v in row))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def read_moments(path):
    """Parse a GMRFMOM1 file.

    Returns a :class:`PatchMoments` when dim == 1, else
    :class:`MultiPatchMoments`.

    Raises:
        InvalidParams: on malformed structure or when the stored center
            block disagrees with ``sigma_p``.
    """
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln for ln in fh.read().split("\n") if ln != ""]
    if not lines:
        raise InvalidParams(f"{path}: empty moments file")
    header = lines[0].split()
    if len(header) != 2 or header[0] != MOMENTS_MAGIC:
        raise InvalidParams(f"{path}: expected '{MOMENTS_MAGIC} dim' header, "
                            f"got {lines[0]!r}")
    try:
        d = int(header[1])
    except ValueError as exc:
        raise InvalidParams(f"{path}: non-integer dim") from exc
    if d < 1:
        raise InvalidParams(f"{path}: dim must be >= 1, got {d}")
    expected = 1 + 1 + d + 9 * d
    if len(lines) != expected:
        raise InvalidParams(f"{path}: expected {expected} lines, got {len(lines)}")

    def parse(line: str, want: int, what: str) -> np.ndarray:
        try:
            row = np.array([float(tok) for tok in line.split()])
        except ValueError as exc:
            raise InvalidParams(f"{path}: unparseable {what}") from exc
        if row.shape[0] != want:
            raise InvalidParams(f"{path}: expected {want} values in {what}")
        return row

    mean = parse(lines[1], d, "mean line")
    center = np.array([parse(lines[2 + i], d, "center row") for i in range(d)])
    sigma_p = np.array([parse(lines[2 + d + i], 9 * d, "sigma_p row")
                        for i in range(9 * d)])
    stored = sigma_p[CENTER_INDEX * d:(CENTER_INDEX + 1) * d,
                     CENTER_INDEX * d:(CENTER_INDEX + 1) * d]
    if not np.allclose(center, stored, rtol=1e-9, atol=0.0):
        raise InvalidParams(f"{path}: center block disagrees with sigma_p")
    if d == 1:
        return PatchMoments.from_sigma_p(sigma_p, float(mean[0]))
    return MultiPatchMoments.from_sigma_p(sigma_p, mean)
