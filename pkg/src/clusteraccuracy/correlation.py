"""Power-exponential spatial correlation and the joint field covariance.

The field value at any two locations separated by distance d is assumed to
decorrelate as exp(-(d/theta1)**theta2): 1 at d=0, monotonically decreasing,
0 in the limit. theta1 (metres) sets how fast correlation decays with
distance; theta2 in (0, 2] sets the local geometry of the field (1 gives the
exponential kernel, 2 the Gaussian one).

The joint covariance over (event, node_1, ..., node_m) treats the event as
just another field point, which is what makes direct sampling of the event
together with the node observations possible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, SingularCovarianceError
from .topology import Topology

# Escalating diagonal jitter, as a fraction of the field variance, applied
# only when both the plain and the semidefinite factorization fail.
JITTER_LADDER = (1e-12, 1e-10, 1e-8)


@dataclass(frozen=True)
class CorrelationModel:
    """Power-exponential kernel parameters."""

    theta1: float
    theta2: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "theta1", float(self.theta1))
        object.__setattr__(self, "theta2", float(self.theta2))
        if not self.theta1 > 0:
            raise InvalidArgumentError(f"theta1 must be positive, got {self.theta1}")
        if not 0 < self.theta2 <= 2:
            raise InvalidArgumentError(f"theta2 must lie in (0, 2], got {self.theta2}")


def kernel(d, model: CorrelationModel):
    """Correlation at distance d: exp(-(d/theta1)**theta2).

    Accepts scalars or arrays; negative distances are rejected.
    """
    arr = np.asarray(d, dtype=float)
    if np.any(arr < 0):
        raise InvalidArgumentError("distance must be nonnegative")
    out = np.exp(-((arr / model.theta1) ** model.theta2))
    if arr.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class CovarianceMatrix:
    """Joint covariance over [event, node_1, ..., node_m].

    ``matrix`` is (m+1) x (m+1), symmetric, with sigma_s2 on the diagonal.
    """

    matrix: np.ndarray
    sigma_s2: float

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=float)
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @property
    def order(self) -> int:
        return self.matrix.shape[0]


def covariance_matrix(topology: Topology, model: CorrelationModel, sigma_s2: float = 1.0) -> CovarianceMatrix:
    """Covariance of the field at the event point and every node.

    All points share the same variance sigma_s2 (homogeneous field); every
    off-diagonal entry is sigma_s2 times the kernel at the pair distance.
    """
    if not sigma_s2 > 0:
        raise InvalidArgumentError(f"sigma_s2 must be positive, got {sigma_s2}")
    pts = np.vstack([[topology.event.x, topology.event.y], topology.coords])
    dx = pts[:, 0][:, None] - pts[:, 0][None, :]
    dy = pts[:, 1][:, None] - pts[:, 1][None, :]
    dist = np.hypot(dx, dy)
    return CovarianceMatrix(matrix=sigma_s2 * kernel(dist, model), sigma_s2=float(sigma_s2))


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower-triangular factor plus the diagonal jitter that was needed."""

    lower: np.ndarray
    jitter: float

    def __post_init__(self):
        low = np.array(self.lower, dtype=float)
        low.setflags(write=False)
        object.__setattr__(self, "lower", low)


def _semidefinite_cholesky(mat: np.ndarray, tol: float) -> np.ndarray:
    """Cholesky that tolerates exactly rank-deficient (PSD) input.

    A pivot within +-tol of zero is accepted as zero provided the residual
    of its column is also negligible, which is the case when points
    coincide exactly. Anything else raises, handing control to the jitter
    ladder.
    """
    n = mat.shape[0]
    low = np.zeros_like(mat)
    for j in range(n):
        pivot = mat[j, j] - low[j, :j] @ low[j, :j]
        if pivot > tol:
            low[j, j] = np.sqrt(pivot)
            if j + 1 < n:
                low[j + 1 :, j] = (mat[j + 1 :, j] - low[j + 1 :, :j] @ low[j, :j]) / low[j, j]
        elif pivot >= -tol:
            if j + 1 < n:
                resid = mat[j + 1 :, j] - low[j + 1 :, :j] @ low[j, :j]
                if np.any(np.abs(resid) > tol):
                    raise np.linalg.LinAlgError("zero pivot with nonzero residual column")
        else:
            raise np.linalg.LinAlgError("negative pivot")
    return low


def cholesky(cov: CovarianceMatrix | np.ndarray) -> CholeskyFactor:
    """Factor a covariance as L @ L.T, escalating jitter only as needed.

    Order of attempts: plain factorization; a semidefinite-tolerant pass
    (so exactly coincident points factor without perturbation); then the
    jitter ladder. The jitter actually used is recorded on the result so
    downstream reports can surface it.
    """
    if isinstance(cov, CovarianceMatrix):
        mat = np.asarray(cov.matrix, dtype=float)
        scale = float(cov.sigma_s2)
    else:
        mat = np.asarray(cov, dtype=float)
        scale = float(np.max(np.diag(mat))) if mat.size else 1.0
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise InvalidArgumentError(f"covariance must be square, got shape {mat.shape}")
    if mat.size and not np.allclose(mat, mat.T, rtol=1e-10, atol=1e-12 * max(abs(scale), 1.0)):
        raise InvalidArgumentError("covariance must be symmetric")
    if scale <= 0:
        scale = 1.0

    try:
        return CholeskyFactor(lower=np.linalg.cholesky(mat), jitter=0.0)
    except np.linalg.LinAlgError:
        pass

    tol = 64.0 * np.finfo(float).eps * scale * max(mat.shape[0], 1)
    try:
        return CholeskyFactor(lower=_semidefinite_cholesky(mat, tol), jitter=0.0)
    except np.linalg.LinAlgError:
        pass

    eye = np.eye(mat.shape[0])
    for eps in JITTER_LADDER:
        jitter = eps * scale
        try:
            return CholeskyFactor(lower=np.linalg.cholesky(mat + jitter * eye), jitter=jitter)
        except np.linalg.LinAlgError:
            continue
    raise SingularCovarianceError(
        "covariance not factorizable even with jitter "
        f"{JITTER_LADDER[-1]:g} * {scale:g}; check for coincident points with theta2 near 2"
    )
