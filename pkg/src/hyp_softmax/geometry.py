"""Poincare-ball primitives: projection, hyperbolic distance and their gradients.

Single-point operations (``project``, ``hyperbolic_distance``, ``distance_gradient``)
work on ``BallPoint`` values. The row-wise variants (``project_rows``,
``pairwise_distance`` and their ``*_backward`` companions) are what the losses use.
"""
import logging
import math
from typing import Tuple, Union

import numpy as np

from .errors import ArgumentError, DomainError
from .models import BallPoint, Curvature, StabilityPolicy

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, list, tuple]
PointLike = Union[BallPoint, ArrayLike]

DEFAULT_POLICY = StabilityPolicy()


def _curvature_value(c: Union[Curvature, float]) -> float:
    if isinstance(c, Curvature):
        return c.c
    return Curvature(float(c)).c


def _as_vector(x: PointLike, name: str = 'x') -> np.ndarray:
    coords = x.coords if isinstance(x, BallPoint) else x
    vec = np.asarray(coords, dtype=np.float64)
    if vec.ndim != 1:
        raise ArgumentError(f"{name} must be a vector, got shape {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise DomainError(f"{name} has non-finite coordinates: {vec}")
    return vec


def ball_radius(c: Union[Curvature, float], policy: StabilityPolicy = DEFAULT_POLICY) -> float:
    """Largest norm a projected point may have: (1 - eps) / sqrt(c)."""
    return (1.0 - policy.eps_boundary) / math.sqrt(_curvature_value(c))


def arcosh(z: float, policy: StabilityPolicy = DEFAULT_POLICY) -> float:
    """Inverse hyperbolic cosine with the argument clipped to 1 + arcosh_floor from below."""
    if not math.isfinite(z):
        raise DomainError(f"arcosh argument must be finite, got {z}")
    return float(np.arccosh(max(z, 1.0 + policy.arcosh_floor)))


def _arcosh1p(u: np.ndarray) -> np.ndarray:
    # arcosh(1 + u) without forming 1 + u, accurate for tiny u
    return np.log1p(u + np.sqrt(u * (u + 2.0)))


# Projection

def fitting_curvature(c: Union[Curvature, float], c_dist: Union[Curvature, float]) -> float:
    """Curvature whose projection ball lies inside both the ball of ``c`` and that of ``c_dist``.

    Projecting with radius (1 - eps)/sqrt(max(c, c_dist)) keeps every point valid for
    distances measured with ``c_dist``. For c >= c_dist this is just ``c``.
    """
    return max(_curvature_value(c), _curvature_value(c_dist))


def project_rows(x: np.ndarray, c: Union[Curvature, float],
                 policy: StabilityPolicy = DEFAULT_POLICY) -> np.ndarray:
    """Project every row of ``x`` into the ball of curvature ``c``.

    Rows with norm <= (1 - eps)/sqrt(c) come back bit-identical, which makes the
    projection idempotent. Rescaled rows are nudged down one ulp at a time until their
    computed norm no longer exceeds the radius.
    """
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise DomainError("Cannot project non-finite coordinates")

    radius = ball_radius(c, policy)
    norms = np.linalg.norm(x, axis=-1)
    scale = np.minimum(1.0, radius / np.maximum(norms, policy.delta_norm))
    out = x * scale[..., None]

    outside = scale < 1.0
    if np.any(outside):
        over = outside & (np.linalg.norm(out, axis=-1) > radius)
        while np.any(over):
            logger.debug(f"Nudging {int(np.sum(over))} projected rows back inside radius {radius}")
            scale = np.where(over, np.nextafter(scale, 0.0), scale)
            out = x * scale[..., None]
            over = outside & (np.linalg.norm(out, axis=-1) > radius)
    return out


def project_rows_backward(x: np.ndarray, grad_out: np.ndarray, c: Union[Curvature, float],
                          policy: StabilityPolicy = DEFAULT_POLICY) -> np.ndarray:
    """Pull ``grad_out`` (w.r.t. projected rows) back to the raw rows ``x``.

    Inside the ball the Jacobian is the identity. On the rescaling branch
    proj(x) = r x / |x| and the Jacobian is (r/|x|)(I - x x^T / |x|^2).
    """
    x = np.asarray(x, dtype=np.float64)
    grad_out = np.asarray(grad_out, dtype=np.float64)
    radius = ball_radius(c, policy)
    norms = np.linalg.norm(x, axis=-1)
    clipped = np.maximum(norms, policy.delta_norm)
    rescaled = radius / clipped < 1.0

    grad = grad_out.copy()
    if np.any(rescaled):
        xs = x[rescaled]
        gs = grad_out[rescaled]
        n = clipped[rescaled][:, None]
        # below delta the denominator is the constant delta, so only the scale remains
        radial_part = np.where(norms[rescaled][:, None] >= policy.delta_norm,
                               xs * np.sum(xs * gs, axis=-1, keepdims=True) / n ** 2, 0.0)
        grad[rescaled] = (radius / n) * (gs - radial_part)
    return grad


def project(x: ArrayLike, c: Union[Curvature, float],
            policy: StabilityPolicy = DEFAULT_POLICY) -> BallPoint:
    """Project ``x`` into the Poincare ball of curvature ``c``.

    Args:
        x: Finite real vector
        c: Curvature of the target ball
        policy: Stability constants (eps sets the margin to the boundary)

    Returns:
        BallPoint with norm <= (1 - eps)/sqrt(c), same direction as ``x``

    Raises:
        DomainError: If ``x`` has non-finite coordinates
    """
    vec = _as_vector(x)
    c_value = _curvature_value(c)
    return BallPoint(coords=project_rows(vec[None, :], c_value, policy)[0], c=c_value)


# Distance

def _conformal_factors(sq_norms: np.ndarray, c_dist: float, name: str) -> np.ndarray:
    factors = 1.0 - c_dist * sq_norms
    if np.any(factors <= 0.0):
        bad = int(np.argmax(factors <= 0.0))
        raise DomainError(
            f"{name} row {bad} lies on or outside the ball of curvature {c_dist} "
            f"(c*|{name}|^2 = {c_dist * float(np.ravel(sq_norms)[bad]):.6g})"
        )
    return factors


def pairwise_distance(x: np.ndarray, w: np.ndarray, c_dist: float = 1.0,
                      policy: StabilityPolicy = DEFAULT_POLICY) -> np.ndarray:
    """N x C matrix of hyperbolic distances between rows of ``x`` and rows of ``w``."""
    dist, _ = _pairwise_terms(x, w, c_dist, policy)
    return dist


def _pairwise_terms(x: np.ndarray, w: np.ndarray, c_dist: float, policy: StabilityPolicy):
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    alpha = _conformal_factors(np.sum(x * x, axis=-1), c_dist, 'x')
    beta = _conformal_factors(np.sum(w * w, axis=-1), c_dist, 'w')
    diff = x[:, None, :] - w[None, :, :]
    sq_dist = np.sum(diff * diff, axis=-1)
    u = 2.0 * c_dist * sq_dist / (alpha[:, None] * beta[None, :])
    clipped = u <= policy.arcosh_floor
    dist = _arcosh1p(np.maximum(u, policy.arcosh_floor))
    terms = {'alpha': alpha, 'beta': beta, 'diff': diff, 'sq_dist': sq_dist, 'u': u, 'clipped': clipped}
    return dist, terms


def pairwise_distance_backward(x: np.ndarray, w: np.ndarray, grad_dist: np.ndarray,
                               c_dist: float = 1.0,
                               policy: StabilityPolicy = DEFAULT_POLICY) -> Tuple[np.ndarray, np.ndarray]:
    """Gradients of sum(grad_dist * pairwise_distance(x, w)) w.r.t. ``x`` and ``w``.

    Pairs whose arcosh argument was clipped (coincident points) contribute zero.
    """
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    _, t = _pairwise_terms(x, w, c_dist, policy)
    u = np.where(t['clipped'], 1.0, t['u'])
    # d arcosh(1+u)/du * du/d(sq_dist) * 2 folded into one coefficient per pair
    k = grad_dist / np.sqrt(u * (u + 2.0)) * 4.0 * c_dist / (t['alpha'][:, None] * t['beta'][None, :])
    k = np.where(t['clipped'], 0.0, k)

    diff = t['diff']
    sq_dist = t['sq_dist']
    grad_x = (np.einsum('nc,ncd->nd', k, diff)
              + c_dist * np.sum(k * sq_dist, axis=1)[:, None] * x / t['alpha'][:, None])
    grad_w = (-np.einsum('nc,ncd->cd', k, diff)
              + c_dist * np.sum(k * sq_dist, axis=0)[:, None] * w / t['beta'][:, None])
    return grad_x, grad_w


def hyperbolic_distance(x: PointLike, y: PointLike, c_dist: Union[Curvature, float] = 1.0,
                        policy: StabilityPolicy = DEFAULT_POLICY) -> float:
    """Hyperbolic distance between two points of the ball of curvature ``c_dist``.

    Raises:
        DomainError: If either point is on or outside the boundary
    """
    xv = _as_vector(x, 'x')
    yv = _as_vector(y, 'y')
    if xv.shape != yv.shape:
        raise ArgumentError(f"Dimension mismatch: {xv.shape} vs {yv.shape}")
    return float(pairwise_distance(xv[None, :], yv[None, :], _curvature_value(c_dist), policy)[0, 0])


def distance_gradient(x: PointLike, y: PointLike, c_dist: Union[Curvature, float] = 1.0,
                      policy: StabilityPolicy = DEFAULT_POLICY) -> Tuple[np.ndarray, np.ndarray]:
    """Analytic (d dist/dx, d dist/dy); zero vectors when x and y coincide."""
    xv = _as_vector(x, 'x')
    yv = _as_vector(y, 'y')
    if xv.shape != yv.shape:
        raise ArgumentError(f"Dimension mismatch: {xv.shape} vs {yv.shape}")
    grad_x, grad_y = pairwise_distance_backward(xv[None, :], yv[None, :], np.ones((1, 1)),
                                                _curvature_value(c_dist), policy)
    return grad_x[0], grad_y[0]


def score_pairs(a: np.ndarray, b: np.ndarray, c: Union[Curvature, float],
                policy: StabilityPolicy = DEFAULT_POLICY, c_dist: float = 1.0) -> np.ndarray:
    """Row-wise negative hyperbolic distance after projecting both sides with ``c``.

    Points are projected into the smaller of the two balls of ``c`` and ``c_dist``.
    """
    c_proj = fitting_curvature(c, c_dist)
    pa = project_rows(a, c_proj, policy)
    pb = project_rows(b, c_proj, policy)
    alpha = _conformal_factors(np.sum(pa * pa, axis=-1), c_dist, 'a')
    beta = _conformal_factors(np.sum(pb * pb, axis=-1), c_dist, 'b')
    diff = pa - pb
    u = 2.0 * c_dist * np.sum(diff * diff, axis=-1) / (alpha * beta)
    return -_arcosh1p(np.maximum(u, policy.arcosh_floor))
