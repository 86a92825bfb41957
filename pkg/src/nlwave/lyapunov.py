"""Chaos diagnostics: trajectory-pair divergence and the maximal exponent.

Two probes of sensitive dependence on initial conditions.  The first
runs a pair of trajectories whose starting points differ by a small
rotation of one oscillator's (Q_i, P_i) plane; the rotation preserves
the norm and the spin observable exactly, so the separation in S starts
at zero and log |Delta S(t)| directly exposes any exponential growth.
The second integrates the tangent flow dz/dt = M(t) z alongside the
state, renormalizing z every tau steps and accumulating the stretch
logarithms; the running estimate

    gamma(t) = (1/t) sum_j ln alpha_j

converges to the maximal Lyapunov exponent when the limit exists.  A
frozen-coefficient harness reuses the same bookkeeping with a constant
matrix, which pins the estimator against the scalar exponential.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import dynamics, linalg
from .errors import BlowUpError, DegenerateUpdateError, NumericalError, ValidationError
from .rng import Rng
from .spins import SpinModel, WaveState

PERTURBATION_ANGLE = 1e-8
RENORM_INTERVAL = 10
TAIL_FRACTION = 0.2


@dataclass(frozen=True)
class DivergenceSeries:
    """log |Delta S| between a trajectory and its rotated twin.

    Entries where Delta S underflows to zero carry -inf; the initial
    samples always do, because the perturbation starts invisible to S.
    """

    times: np.ndarray
    log_dev: np.ndarray
    epsilon: float


@dataclass(frozen=True)
class MlceSeries:
    """Checkpoint record of the renormalized tangent-vector estimator.

    gamma[i] = (sum of log_alphas up to i) / times[i]; times start at
    the first renormalization, not at zero.
    """

    times: np.ndarray
    gamma: np.ndarray
    log_alphas: np.ndarray
    seed: int
    renorm_interval: int


@dataclass(frozen=True)
class WScanRow:
    w: float
    gamma_hat: float
    detm_sign: float
    error: str | None = None


def perturb_rotation(state: WaveState, index: int, angle: float) -> WaveState:
    """Rotate (Q_i, P_i) by the angle; every other entry is untouched.

    An isometry of the oscillator plane, so Q_i^2 + P_i^2 and with it
    the norm and S are preserved to the last bit of cos^2 + sin^2.
    """
    n = state.q.shape[0]
    if not (0 <= index < n):
        raise ValidationError(f"oscillator index {index} out of range for size {n}")
    c, s = math.cos(angle), math.sin(angle)
    q, p = state.q.copy(), state.p.copy()
    qi, pi = q[index], p[index]
    q[index] = qi * c + pi * s
    p[index] = -qi * s + pi * c
    return WaveState(q, p)


def divergence_series(
    state: WaveState,
    model: SpinModel,
    cfg: dynamics.IntegratorConfig,
    index: int = 0,
    epsilon: float = PERTURBATION_ANGLE,
) -> DivergenceSeries:
    """Evolve the state and its perturbed twin, sample log |Delta S|.

    A zero angle is allowed (the twin is identical and every entry is
    the -inf marker); negative angles are rejected.
    """
    if epsilon < 0.0:
        raise ValidationError(f"perturbation angle must be >= 0, got {epsilon}")
    base = dynamics.evolve(state, model, cfg)
    twin = dynamics.evolve(perturb_rotation(state, index, epsilon), model, cfg)
    with np.errstate(divide="ignore"):
        log_dev = np.log(np.abs(twin.spin - base.spin))
    return DivergenceSeries(base.times, log_dev, float(epsilon))


def running_max(series) -> np.ndarray:
    """out[i] = max(series[0..i]); increases only on new maxima."""
    arr = np.asarray(series, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValidationError("running max needs a nonempty 1-d sequence")
    return np.maximum.accumulate(arr)


def _checkpoint_bookkeeping(steps: int, renorm_interval: int, dt: float):
    if renorm_interval < 1:
        raise ValidationError(f"renormalization interval must be >= 1, got {renorm_interval}")
    count = steps // renorm_interval
    if count < 1:
        raise ValidationError(
            f"no checkpoints: {steps} steps with renormalization every {renorm_interval}"
        )
    return count, np.empty(count), np.empty(count), np.empty(count)


def _draw_tangent(seed: int, n2: int) -> np.ndarray:
    z = Rng(seed).normals(n2)
    nrm = math.sqrt(float(z @ z))
    if nrm == 0.0:
        raise DegenerateUpdateError(
            f"tangent draw from seed {seed} has zero norm; use a different seed"
        )
    return z / nrm


def mlce_series(
    state: WaveState,
    model: SpinModel,
    cfg: dynamics.IntegratorConfig,
    seed: int,
    renorm_interval: int = RENORM_INTERVAL,
) -> MlceSeries:
    """Renormalized tangent-vector estimate of the maximal exponent.

    The tangent starts as a normalized Gaussian draw over the 2N phase
    directions; state and tangent advance together by coupled_step, and
    every renorm_interval steps the stretch alpha = |z| is logged and z
    is rescaled to unit length.  Steps beyond the last full interval
    are not taken.
    """
    count, times, gamma, log_alphas = _checkpoint_bookkeeping(
        cfg.steps, renorm_interval, cfg.dt
    )
    z = _draw_tangent(seed, 2 * model.space.size)
    st = state
    theta = 2.0 * cfg.binding * cfg.dt
    trig = (math.cos(theta), math.sin(theta))
    total = 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        for c in range(count):
            for _ in range(renorm_interval):
                st, z = dynamics.coupled_step(st, z, model, cfg.dt, cfg.binding, trig)
            alpha = math.sqrt(float(z @ z))
            if not math.isfinite(alpha) or alpha == 0.0:
                raise BlowUpError(
                    f"tangent norm left the trusted range at step {(c + 1) * renorm_interval}"
                )
            la = math.log(alpha)
            total += la
            z = z / alpha
            times[c] = (c + 1) * renorm_interval * cfg.dt
            log_alphas[c] = la
            gamma[c] = total / times[c]
    return MlceSeries(times, gamma, log_alphas, int(seed), int(renorm_interval))


def frozen_tangent_series(
    matrix,
    seed: int,
    dt: float,
    steps: int,
    renorm_interval: int = RENORM_INTERVAL,
) -> MlceSeries:
    """Estimator harness with a constant coefficient matrix.

    Bypasses the state coupling entirely: the tangent takes the same
    Heun steps and renormalization bookkeeping against a frozen matrix,
    so the returned estimate must approach the largest real part of the
    matrix spectrum.  Pins the estimator to a known answer.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"frozen coefficient matrix must be square, got {m.shape}")
    if not (dt > 0.0):
        raise ValidationError(f"step size must be positive, got {dt}")
    count, times, gamma, log_alphas = _checkpoint_bookkeeping(steps, renorm_interval, dt)
    z = _draw_tangent(seed, m.shape[0])
    total = 0.0
    for c in range(count):
        for _ in range(renorm_interval):
            k1 = m @ z
            k2 = m @ (z + dt * k1)
            z = z + 0.5 * dt * (k1 + k2)
        alpha = math.sqrt(float(z @ z))
        if not math.isfinite(alpha) or alpha == 0.0:
            raise BlowUpError(
                f"tangent norm left the trusted range at step {(c + 1) * renorm_interval}"
            )
        la = math.log(alpha)
        total += la
        z = z / alpha
        times[c] = (c + 1) * renorm_interval * dt
        log_alphas[c] = la
        gamma[c] = total / times[c]
    return MlceSeries(times, gamma, log_alphas, int(seed), int(renorm_interval))


def mlce_estimate(series: MlceSeries, tail_fraction: float = TAIL_FRACTION) -> float:
    """Mean of the running estimate over the last tail_fraction of samples."""
    if not (0.0 < tail_fraction <= 1.0):
        raise ValidationError(f"tail fraction must be in (0, 1], got {tail_fraction}")
    g = np.asarray(series.gamma, dtype=float)
    if g.size == 0:
        raise ValidationError("cannot estimate from an empty series")
    k = max(1, int(round(tail_fraction * g.size)))
    return float(g[-k:].mean())


def w_scan(
    state: WaveState,
    model_template: SpinModel,
    w_grid,
    cfg: dynamics.IntegratorConfig,
    seed: int,
) -> list[WScanRow]:
    """One tail estimate per coupling value, same state and seed per row.

    Rows are mutually independent (each owns its copies; the table is
    assembled in grid order).  The initial-state determinant sign rides
    along so scans can be split at the instability threshold.  A row
    whose integration fails is recorded with a nan estimate and the
    error message, and the scan continues.
    """
    ws = [float(w) for w in np.asarray(w_grid, dtype=float).ravel()]
    if not ws:
        raise ValidationError("coupling grid must be nonempty")
    rows: list[WScanRow] = []
    for w in ws:
        model = model_template.with_w(w)
        det = linalg.lu_determinant(dynamics.hessian_m(state, model))
        sign = math.copysign(1.0, det) if det != 0.0 else 0.0
        try:
            gam = mlce_estimate(mlce_series(state, model, cfg, seed))
            rows.append(WScanRow(w, gam, sign))
        except NumericalError as exc:
            rows.append(WScanRow(w, math.nan, sign, error=str(exc)))
    return rows
