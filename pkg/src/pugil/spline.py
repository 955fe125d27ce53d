"""Cubic action splines: time -> per-joint angle targets.

A candidate action sequence is a :class:`ControlSpline` of three timed control
points.  The optimizer works on the flat :func:`encode` vector (time then
targets for each point, so 3 * (ndof + 1) numbers); :func:`decode` is the
inverse and also canonicalizes whatever the optimizer produced: times are
clamped into the horizon, sorted (stable, so equal times keep their original
order), forced at least ``min_spacing`` apart, and targets are clamped to the
joint limits.

Evaluation interpolates with a Catmull-Rom style cubic Hermite: tangents are
finite differences of neighbouring points, with the end points duplicated so
the boundary tangents become one-sided differences.  The curve passes through
every control point and holds the first/last pose outside the knot range.
Between knots it may overshoot the control-point values; actuation clamps to
joint limits downstream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class JointLimits:
    lo: np.ndarray
    hi: np.ndarray

    @property
    def ndof(self) -> int:
        return len(self.lo)


@dataclass(frozen=True, eq=False)
class ControlPoint:
    time: float
    targets: np.ndarray  # (ndof,) radians


@dataclass(frozen=True, eq=False)
class ControlSpline:
    points: tuple[ControlPoint, ...]

    @property
    def n_points(self) -> int:
        return len(self.points)

    @property
    def ndof(self) -> int:
        return len(self.points[0].targets)

    @property
    def times(self) -> np.ndarray:
        return np.array([p.time for p in self.points])

    @property
    def target_matrix(self) -> np.ndarray:
        return np.stack([p.targets for p in self.points])


class DimensionError(ValueError):
    """Parameter vector length does not match n_points * (ndof + 1)."""


def spline_from_arrays(times: np.ndarray, targets: np.ndarray) -> ControlSpline:
    points = tuple(
        ControlPoint(float(t), np.asarray(q, dtype=float).copy())
        for t, q in zip(times, targets)
    )
    return ControlSpline(points)


def constant_spline(pose: np.ndarray, horizon: float, n_points: int = 3) -> ControlSpline:
    """A spline that holds ``pose`` over the whole horizon."""
    times = np.linspace(0.0, horizon, n_points)
    targets = np.tile(np.asarray(pose, dtype=float), (n_points, 1))
    return spline_from_arrays(times, targets)


def encode(spline: ControlSpline) -> np.ndarray:
    """Flatten to the optimizer's parameter vector: per point, time then targets."""
    rows = [np.concatenate(([p.time], p.targets)) for p in spline.points]
    return np.concatenate(rows)


def _canonical_times(raw: np.ndarray, horizon: float, min_spacing: float):
    """Clamp into [0, horizon], stable-sort, enforce minimum spacing.

    Returns (times, order) where ``order`` maps output slots to input indices.
    Spacing is restored with a forward pass from the bottom and a backward
    pass from the top, so the result stays inside the horizon as long as
    (n - 1) * min_spacing <= horizon.
    """
    clamped = np.clip(raw, 0.0, horizon)
    order = np.argsort(clamped, kind="stable")
    t = clamped[order]
    for i in range(1, len(t)):
        if t[i] < t[i - 1] + min_spacing:
            t[i] = t[i - 1] + min_spacing
    if t[-1] > horizon:
        t[-1] = horizon
        for i in range(len(t) - 2, -1, -1):
            if t[i] > t[i + 1] - min_spacing:
                t[i] = t[i + 1] - min_spacing
    return t, order


def decode(
    v: np.ndarray,
    limits: JointLimits,
    horizon: float,
    min_spacing: float = 1e-3,
    n_points: int = 3,
) -> ControlSpline:
    """Rebuild a canonical spline from a flat parameter vector.

    Raises :class:`DimensionError` if the vector length is not
    ``n_points * (ndof + 1)``.
    """
    v = np.asarray(v, dtype=float)
    ndof = limits.ndof
    expected = n_points * (ndof + 1)
    if v.shape != (expected,):
        raise DimensionError(
            f"expected parameter vector of length {expected}, got {v.shape}"
        )
    rows = v.reshape(n_points, ndof + 1)
    times, order = _canonical_times(rows[:, 0], horizon, min_spacing)
    targets = np.clip(rows[order, 1:], limits.lo, limits.hi)
    return spline_from_arrays(times, targets)


def _tangents(times: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Finite-difference tangents with duplicated end points (one-sided ends)."""
    n = len(times)
    m = np.empty_like(targets)
    m[0] = (targets[1] - targets[0]) / (times[1] - times[0])
    m[-1] = (targets[-1] - targets[-2]) / (times[-1] - times[-2])
    for i in range(1, n - 1):
        m[i] = (targets[i + 1] - targets[i - 1]) / (times[i + 1] - times[i - 1])
    return m


def evaluate(spline: ControlSpline, t: float) -> np.ndarray:
    """Interpolated joint targets at time ``t`` (clamped to the knot range)."""
    return evaluate_many(spline, np.array([t]))[0]


def evaluate_many(spline: ControlSpline, ts: np.ndarray) -> np.ndarray:
    """Vectorized :func:`evaluate`; returns an array of shape (len(ts), ndof)."""
    ts = np.asarray(ts, dtype=float)
    times = spline.times
    targets = spline.target_matrix
    m = _tangents(times, targets)
    tc = np.clip(ts, times[0], times[-1])
    seg = np.clip(np.searchsorted(times, tc, side="right") - 1, 0, len(times) - 2)
    h = times[seg + 1] - times[seg]
    s = (tc - times[seg]) / h
    s2 = s * s
    s3 = s2 * s
    h00 = 2 * s3 - 3 * s2 + 1
    h10 = s3 - 2 * s2 + s
    h01 = -2 * s3 + 3 * s2
    h11 = s3 - s2
    out = (
        h00[:, None] * targets[seg]
        + (h10 * h)[:, None] * m[seg]
        + h01[:, None] * targets[seg + 1]
        + (h11 * h)[:, None] * m[seg + 1]
    )
    return out


def shift(
    spline: ControlSpline,
    delta: float,
    min_spacing: float = 1e-3,
) -> ControlSpline:
    """Re-base the spline ``delta`` seconds into its own future.

    Every knot time is reduced by ``delta`` and floored at zero; targets are
    unchanged.  Knots pushed onto the floor are re-spaced by ``min_spacing``.
    """
    if delta < 0:
        raise ValueError("shift requires delta >= 0")
    times = np.maximum(spline.times - delta, 0.0)
    for i in range(1, len(times)):
        if times[i] < times[i - 1] + min_spacing:
            times[i] = times[i - 1] + min_spacing
    return spline_from_arrays(times, spline.target_matrix)
