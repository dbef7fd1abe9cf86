"""
Split-step Fourier propagation for Ĥ = p̂² + V(q̂).

The kinetic term is p̂² (no ½), matching the classical h(q, p) = p² + V(q).
"""

import cmath
import logging
import math
from typing import List, Sequence

import numpy as np
from scipy import fft

from .errors import InvalidParameterError, UnstableParametersError
from .models import GaussianState, PotentialSpec, Snapshot, WaveFunction
from .wavepacket import momentum_density, moments, position_entropy

logger = logging.getLogger(__name__)

# Aliasing guard: relative momentum density allowed in the outer band of wavenumbers.
EDGE_DENSITY_LIMIT = 1e-8
EDGE_BAND = 0.95
GUARD_INTERVAL = 500


def potential_value(spec: PotentialSpec, q):
    return spec.value(q)


def default_dt(hbar: float) -> float:
    if hbar >= 1e-2:
        return 1e-3
    return 1e-3 * math.sqrt(hbar)


def energy_expectation(psi: WaveFunction, spec: PotentialSpec) -> float:
    """⟨p̂² + V(q̂)⟩ with the kinetic part from the momentum density."""
    kinetic = float(np.sum((psi.hbar * psi.grid.k) ** 2 * momentum_density(psi)))
    potential = float(np.sum(spec.value(psi.grid.x) * psi.density) * psi.grid.dx)
    return kinetic + potential


def gaussian_free_evolve(g: GaussianState, t: float) -> GaussianState:
    """Free evolution under Ĥ = p̂²: a ↦ a/(1 + 2iat), q0 ↦ q0 + 2p0t."""
    spread = 1 + 2j * g.a * t
    return GaussianState(
        q0=g.q0 + 2 * g.p0 * t,
        p0=g.p0,
        a=g.a / spread,
        phase=g.phase + g.p0 ** 2 * t / g.hbar - 0.5 * cmath.phase(spread),
        hbar=g.hbar,
    )


def _check_aliasing(amps: np.ndarray, k: np.ndarray, t: float) -> None:
    weights = np.abs(fft.fft(amps)) ** 2
    edge = np.abs(k) >= EDGE_BAND * np.max(np.abs(k))
    ratio = float(np.max(weights[edge]) / np.max(weights))
    if ratio > EDGE_DENSITY_LIMIT:
        raise UnstableParametersError(
            f"Momentum density at grid edge is {ratio:.3e} of its maximum at t={t:.6g}",
            {"t": t, "edge_ratio": ratio},
        )


class _StrangStepper:
    """Half potential kick, full kinetic step in Fourier space, half kick."""

    def __init__(self, psi: WaveFunction, spec: PotentialSpec):
        self.hbar = psi.hbar
        self.k = psi.grid.k
        self.v = spec.value(psi.grid.x)
        self._factors = {}

    def _phases(self, h: float):
        if h not in self._factors:
            half_kick = np.exp(-0.5j * h * self.v / self.hbar)
            drift = np.exp(-1j * h * self.hbar * self.k ** 2)
            self._factors[h] = (half_kick, drift)
        return self._factors[h]

    def step(self, amps: np.ndarray, h: float) -> np.ndarray:
        half_kick, drift = self._phases(h)
        return half_kick * fft.ifft(drift * fft.fft(half_kick * amps))


def _step_plan(t: float, dt: float):
    """Full steps and the fractional remainder covering exactly |t|."""
    count = int(math.floor(abs(t) / dt))
    remainder = abs(t) - count * dt
    if remainder <= 1e-12 * dt:
        remainder = 0.0
    sign = 1.0 if t >= 0 else -1.0
    return count, sign * dt, sign * remainder


def split_step_evolve(psi0: WaveFunction, spec: PotentialSpec, t: float, dt: float) -> WaveFunction:
    """Evolve ψ⁰ by e^{−iĤt/ℏ}; negative t runs backwards in time."""
    if not dt > 0:
        raise InvalidParameterError(f"dt must be positive, got {dt}", {"dt": dt})
    if t == 0:
        return psi0

    count, h, remainder = _step_plan(t, dt)
    stepper = _StrangStepper(psi0, spec)
    amps = np.array(psi0.amps)
    logger.debug(f"split_step_evolve: {count} steps of {h} plus remainder {remainder}")

    # Fractional step last going forward and first going backward, so −t undoes t.
    if remainder and t < 0:
        amps = stepper.step(amps, remainder)
    for i in range(count):
        amps = stepper.step(amps, h)
        if (i + 1) % GUARD_INTERVAL == 0:
            _check_aliasing(amps, stepper.k, (i + 1) * h)
    if remainder and t > 0:
        amps = stepper.step(amps, remainder)
    _check_aliasing(amps, stepper.k, t)
    return WaveFunction(grid=psi0.grid, amps=amps, hbar=psi0.hbar)


def evolve_observed(
    psi0: WaveFunction,
    spec: PotentialSpec,
    times: Sequence[float],
    dt: float,
    keep_states: bool = False,
) -> List[Snapshot]:
    """Single pass through ascending `times`, recording diagnostics at each."""
    if any(b < a for a, b in zip(times, times[1:])):
        raise InvalidParameterError("times must be ascending")

    snapshots: List[Snapshot] = []
    psi = psi0
    current = 0.0
    for t in times:
        psi = split_step_evolve(psi, spec, t - current, dt)
        current = t
        snapshot = Snapshot(
            t=t,
            moments=moments(psi),
            entropy=position_entropy(psi),
            energy=energy_expectation(psi, spec),
            state=psi if keep_states else None,
        )
        logger.info(
            f"snapshot t={t:.6g}: dQ={snapshot.moments.d_q:.6g} dP={snapshot.moments.d_p:.6g} "
            f"entropy={snapshot.entropy:.6g}"
        )
        snapshots.append(snapshot)
    return snapshots
