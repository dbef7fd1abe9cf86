"""
Classical flow Φᵗ, sensitivity to initial conditions, fixed points, invariant
manifolds and ergodic time averages.

Potential models follow q̇ = 2p, ṗ = −V′(q) (h = p² + V(q)) and are integrated
with leapfrog; the dilation symbol h = q·p uses its exact map (eᵗq, e^{−t}p).
"""

import logging
import math
from typing import Callable, List, Optional, Tuple

import numpy as np
from numpy.polynomial import Polynomial
from scipy.integrate import trapezoid
from scipy.stats import linregress

from .errors import (
    EmptyCurveError,
    FlowBlowupError,
    InvalidParameterError,
    NotHyperbolicError,
    UnsupportedModelError,
)
from .models import (
    Branch,
    ClassicalModel,
    FixedPoint,
    FixedPointKind,
    ManifoldCurve,
    ManifoldKind,
    ModelKind,
    PhasePoint,
    SensitivityResult,
    Trajectory,
)

logger = logging.getLogger(__name__)

BLOWUP_LIMIT = 1e6
ELLIPTIC_THRESHOLD = 1e-10
MAX_SEGMENT = 1e-2
RETURN_RADIUS = 0.05

PhaseFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]


def hamiltonian_value(model: ClassicalModel, x: PhasePoint) -> float:
    return float(_energy(model, np.asarray(x.q), np.asarray(x.p)))


def _energy(model: ClassicalModel, q: np.ndarray, p: np.ndarray) -> np.ndarray:
    if model.kind == ModelKind.DILATION:
        return q * p
    return p ** 2 + model.potential.value(q)


def vector_field(model: ClassicalModel, x: PhasePoint) -> np.ndarray:
    if model.kind == ModelKind.DILATION:
        return np.array([x.q, -x.p])
    return np.array([2 * x.p, -float(model.potential.derivative(x.q))])


def jacobian(model: ClassicalModel, x: PhasePoint) -> np.ndarray:
    if model.kind == ModelKind.DILATION:
        return np.array([[1.0, 0.0], [0.0, -1.0]])
    return np.array([[0.0, 2.0], [-float(model.potential.second_derivative(x.q)), 0.0]])


def _step(model: ClassicalModel, q: np.ndarray, p: np.ndarray, h: float) -> Tuple[np.ndarray, np.ndarray]:
    if model.kind == ModelKind.DILATION:
        return q * math.exp(h), p * math.exp(-h)
    force = model.potential.derivative
    p = p - 0.5 * h * force(q)
    q = q + 2 * h * p
    p = p - 0.5 * h * force(q)
    return q, p


def _guard(q: np.ndarray, p: np.ndarray, t: float) -> None:
    if np.max(np.abs(q)) > BLOWUP_LIMIT or np.max(np.abs(p)) > BLOWUP_LIMIT:
        raise FlowBlowupError(f"Trajectory left |q|,|p| <= {BLOWUP_LIMIT:g} at t={t:.6g}", {"t": t})


def _time_grid(t: float, dt: float) -> np.ndarray:
    count = int(math.floor(abs(t) / dt))
    times = math.copysign(dt, t) * np.arange(count + 1) if t else np.zeros(1)
    if abs(t) - count * dt > 1e-12 * dt:
        times = np.append(times, t)
    return times


def flow_points(model: ClassicalModel, q: np.ndarray, p: np.ndarray, t: float, dt: float):
    """Advance arrays of points by t (fractional final step included)."""
    if not dt > 0:
        raise InvalidParameterError(f"dt must be positive, got {dt}", {"dt": dt})
    q = np.array(q, dtype=float)
    p = np.array(p, dtype=float)
    times = _time_grid(t, dt)
    for previous, current in zip(times, times[1:]):
        q, p = _step(model, q, p, current - previous)
        _guard(q, p, current)
    return q, p


def classical_flow(model: ClassicalModel, x0: PhasePoint, t: float, dt: float) -> Trajectory:
    """Trajectory sampled every dt plus the exact endpoint t (t may be negative)."""
    if not dt > 0:
        raise InvalidParameterError(f"dt must be positive, got {dt}", {"dt": dt})
    times = _time_grid(t, dt)
    qs = np.empty(len(times))
    ps = np.empty(len(times))
    q, p = np.array([x0.q]), np.array([x0.p])
    qs[0], ps[0] = x0.q, x0.p
    for i in range(1, len(times)):
        h = times[i] - times[i - 1]
        if model.kind == ModelKind.DILATION:
            # exact map from the start avoids accumulating round-off
            q = np.array([x0.q * math.exp(times[i])])
            p = np.array([x0.p * math.exp(-times[i])])
        else:
            q, p = _step(model, q, p, h)
        _guard(q, p, times[i])
        qs[i], ps[i] = q[0], p[0]
    return Trajectory(times=times, q=qs, p=ps)


def _eigen(model: ClassicalModel, x: PhasePoint):
    values, vectors = np.linalg.eig(jacobian(model, x))
    return values, vectors


def _unit_direction(vector: np.ndarray) -> np.ndarray:
    vector = np.real(vector)
    vector = vector / np.linalg.norm(vector)
    # orient towards positive q so the PLUS branch leaves into q > 0
    if vector[0] < 0 or (vector[0] == 0 and vector[1] < 0):
        vector = -vector
    return vector


def unstable_direction(model: ClassicalModel, x: PhasePoint) -> Optional[np.ndarray]:
    values, vectors = _eigen(model, x)
    i = int(np.argmax(values.real))
    if values[i].real < ELLIPTIC_THRESHOLD:
        return None
    return _unit_direction(vectors[:, i])


def stable_direction(model: ClassicalModel, x: PhasePoint) -> Optional[np.ndarray]:
    values, vectors = _eigen(model, x)
    i = int(np.argmin(values.real))
    if values[i].real > -ELLIPTIC_THRESHOLD:
        return None
    return _unit_direction(vectors[:, i])


def fixed_points(model: ClassicalModel) -> List[FixedPoint]:
    """Equilibria (roots of V′ with p = 0) classified by their Jacobian."""
    if model.kind == ModelKind.DILATION:
        return [FixedPoint(point=PhasePoint(q=0.0, p=0.0), kind=FixedPointKind.HYPERBOLIC, exponent=1.0)]

    force = Polynomial(model.potential.coefficients).deriv()
    if not np.any(force.coef):
        raise UnsupportedModelError("Every point is an equilibrium of a constant potential")
    roots = force.roots()
    real_roots = sorted({round(float(r.real), 12) for r in roots if abs(r.imag) < 1e-10})

    points = []
    for q in real_roots:
        point = PhasePoint(q=q + 0.0, p=0.0)
        values = np.linalg.eigvals(jacobian(model, point))
        exponent = float(np.max(values.real))
        kind = FixedPointKind.HYPERBOLIC if exponent >= ELLIPTIC_THRESHOLD else FixedPointKind.ELLIPTIC
        points.append(
            FixedPoint(point=point, kind=kind, exponent=exponent, frequency=float(np.max(np.abs(values.imag))))
        )
    logger.debug(f"fixed points: {[(fp.point.q, fp.kind.value) for fp in points]}")
    return points


def sensitivity_time(
    model: ClassicalModel,
    x: PhasePoint,
    eps: float,
    target: float,
    dt: float,
    t_max: float,
) -> SensitivityResult:
    """Smallest sampled t with |Φᵗ(x') − Φᵗ(x)| ≥ target for |x' − x| = eps."""
    if not eps > 0 or not target > eps:
        raise InvalidParameterError("need eps > 0 and target > eps", {"eps": eps, "target": target})
    direction = unstable_direction(model, x)
    if direction is None:
        direction = np.array([1.0, 0.0])

    q = np.array([x.q, x.q + eps * direction[0]])
    p = np.array([x.p, x.p + eps * direction[1]])
    times = [0.0]
    separations = [eps]
    t = 0.0
    steps = int(math.ceil(t_max / dt))
    for i in range(1, steps + 1):
        h = min(dt, t_max - t)
        q, p = _step(model, q, p, h)
        t = i * dt if i < steps else t_max
        _guard(q, p, t)
        separation = float(math.hypot(q[1] - q[0], p[1] - p[0]))
        times.append(t)
        separations.append(separation)
        if separation >= target:
            logger.debug(f"separation {separation:.3e} reached target {target} at t={t:.6g}")
            return SensitivityResult(
                reached=True, time=t, t_max=t_max, eps=eps, target=target,
                times=np.array(times), separations=np.array(separations),
            )
    return SensitivityResult(
        reached=False, t_max=t_max, eps=eps, target=target,
        times=np.array(times), separations=np.array(separations),
    )


def growth_rate(result: SensitivityResult, lo: float, hi: float) -> float:
    """Slope of ln(separation) versus t over lo <= separation <= hi."""
    window = (result.separations >= lo) & (result.separations <= hi)
    if np.count_nonzero(window) < 3:
        raise InvalidParameterError("separation window holds fewer than three samples")
    return float(linregress(result.times[window], np.log(result.separations[window])).slope)


def finite_time_exponents(
    model: ClassicalModel, x: PhasePoint, t: float, dt: float, delta: float = 1e-7
) -> np.ndarray:
    """ln|μ|/t for the eigenvalues μ of the finite-difference monodromy of Φᵗ at x."""
    offsets = np.array([[delta, 0.0], [-delta, 0.0], [0.0, delta], [0.0, -delta]])
    q, p = flow_points(model, x.q + offsets[:, 0], x.p + offsets[:, 1], t, dt)
    monodromy = np.array([
        [(q[0] - q[1]) / (2 * delta), (q[2] - q[3]) / (2 * delta)],
        [(p[0] - p[1]) / (2 * delta), (p[2] - p[3]) / (2 * delta)],
    ])
    multipliers = np.linalg.eigvals(monodromy)
    return np.sort(np.log(np.abs(multipliers)) / t)[::-1]


def _arclength_resample(points: np.ndarray, max_segment: float) -> np.ndarray:
    """Thin a dense polyline to spacing ≤ max_segment, subdividing any longer gap."""
    kept = [points[0]]
    last = points[0]
    for i in range(1, len(points)):
        is_last = i == len(points) - 1
        if is_last or np.hypot(*(points[i + 1] - last)) > max_segment:
            gap = np.hypot(*(points[i] - last))
            if gap > max_segment:
                pieces = int(math.ceil(gap / max_segment))
                for j in range(1, pieces):
                    kept.append(last + (points[i] - last) * j / pieces)
            kept.append(points[i])
            last = points[i]
    return np.array(kept)


def _grow_branch(
    model: ClassicalModel,
    base: PhasePoint,
    seed: np.ndarray,
    h: float,
    steps: int,
    arclength_budget: float,
) -> np.ndarray:
    center = base.as_array()
    q, p = np.array([seed[0]]), np.array([seed[1]])
    raw = [center, seed.copy()]
    length = float(np.hypot(*(seed - center)))
    left_base = False
    for i in range(steps):
        q, p = _step(model, q, p, h)
        _guard(q, p, (i + 1) * h)
        point = np.array([q[0], p[0]])
        length += float(np.hypot(*(point - raw[-1])))
        raw.append(point)
        radius = float(np.hypot(*(point - center)))
        if radius > 2 * RETURN_RADIUS:
            left_base = True
        elif left_base and radius < RETURN_RADIUS:
            logger.debug(f"branch returned to the base after {i + 1} steps")
            break
        if length >= arclength_budget:
            break
    return np.array(raw)


def _manifold(
    model: ClassicalModel,
    y: PhasePoint,
    direction: Optional[np.ndarray],
    kind: ManifoldKind,
    eps: float,
    steps: int,
    dt: float,
    arclength_budget: float,
) -> Tuple[ManifoldCurve, ManifoldCurve]:
    if direction is None:
        raise NotHyperbolicError(
            f"Point ({y.q}, {y.p}) has no {kind.value} direction", {"q": y.q, "p": y.p}
        )
    h = dt if kind == ManifoldKind.UNSTABLE else -dt
    curves = []
    for branch, sign in ((Branch.PLUS, 1.0), (Branch.MINUS, -1.0)):
        seed = y.as_array() + sign * eps * direction
        raw = _grow_branch(model, y, seed, h, steps, arclength_budget)
        points = _arclength_resample(raw, MAX_SEGMENT)
        curves.append(ManifoldCurve(branch=branch, kind=kind, base=y, q=points[:, 0], p=points[:, 1]))
        logger.info(f"{kind.value} {branch.value} branch: {len(points)} points, arclength {curves[-1].arclength[-1]:.4g}")
    return curves[0], curves[1]


def unstable_manifold(
    model: ClassicalModel,
    y: PhasePoint,
    eps: float = 1e-6,
    steps: int = 400_000,
    dt: float = 1e-4,
    arclength_budget: float = 8.0,
) -> Tuple[ManifoldCurve, ManifoldCurve]:
    """Both branches of the unstable manifold of the hyperbolic point y, grown by forward flow."""
    return _manifold(model, y, unstable_direction(model, y), ManifoldKind.UNSTABLE, eps, steps, dt, arclength_budget)


def stable_manifold(
    model: ClassicalModel,
    y: PhasePoint,
    eps: float = 1e-6,
    steps: int = 400_000,
    dt: float = 1e-4,
    arclength_budget: float = 8.0,
) -> Tuple[ManifoldCurve, ManifoldCurve]:
    """Stable branches, grown by the same routine under time reversal."""
    return _manifold(model, y, stable_direction(model, y), ManifoldKind.STABLE, eps, steps, dt, arclength_budget)


def _nearest_on_polyline(points: np.ndarray, curve: np.ndarray):
    """Distance from each point to a polyline and whether the nearest spot is an end vertex."""
    start = curve[:-1]
    seg = curve[1:] - start
    seg_len2 = np.maximum(np.sum(seg ** 2, axis=1), 1e-300)
    rel = points[:, None, :] - start[None, :, :]
    u = np.clip(np.sum(rel * seg[None, :, :], axis=2) / seg_len2[None, :], 0.0, 1.0)
    nearest = start[None, :, :] + u[..., None] * seg[None, :, :]
    dist = np.hypot(points[:, None, 0] - nearest[..., 0], points[:, None, 1] - nearest[..., 1])
    j = np.argmin(dist, axis=1)
    rows = np.arange(len(points))
    u_best = u[rows, j]
    at_end = ((j == 0) & (u_best <= 0.0)) | ((j == len(seg) - 1) & (u_best >= 1.0))
    return dist[rows, j], at_end


def distance_to_curve(points: np.ndarray, curve: ManifoldCurve) -> np.ndarray:
    polyline = np.column_stack([curve.q, curve.p])
    if len(polyline) < 2:
        raise EmptyCurveError("Curve needs at least two points")
    return _nearest_on_polyline(np.asarray(points, dtype=float), polyline)[0]


def manifold_covariance_check(model: ClassicalModel, curve: ManifoldCurve, s: float, dt: float) -> float:
    """Max distance from Φˢ(curve) to the curve, for a curve based at a fixed point.

    Images whose nearest spot is an end vertex, or that fall inside the return
    disc around the base, lie beyond the computed portion of the manifold and
    are not scored.
    """
    if len(curve) < 2:
        raise EmptyCurveError("Curve needs at least two points")
    if s == 0:
        return 0.0
    q, p = flow_points(model, curve.q, curve.p, s, dt)
    polyline = np.column_stack([curve.q, curve.p])
    dist, at_end = _nearest_on_polyline(np.column_stack([q, p]), polyline)
    near_base = np.hypot(q - curve.base.q, p - curve.base.p) < RETURN_RADIUS
    scored = dist[~(at_end | near_base)]
    deviation = float(np.max(scored)) if scored.size else 0.0
    logger.debug(f"covariance check s={s}: {scored.size}/{dist.size} points scored, deviation {deviation:.3e}")
    return deviation


def time_average(model: ClassicalModel, f: PhaseFunction, x0: PhasePoint, T: float, dt: float) -> float:
    """(1/2T)∫_{−T}^{T} f∘Φᵗ(x0) dt by the trapezoidal rule."""
    if not T > 0:
        raise InvalidParameterError(f"T must be positive, got {T}", {"T": T})
    forward = classical_flow(model, x0, T, dt)
    backward = classical_flow(model, x0, -T, dt)
    times = np.concatenate((backward.times[::-1], forward.times[1:]))
    q = np.concatenate((backward.q[::-1], forward.q[1:]))
    p = np.concatenate((backward.p[::-1], forward.p[1:]))
    values = np.asarray(f(q, p), dtype=float) * np.ones_like(times)
    return float(trapezoid(values, times) / (2 * T))
