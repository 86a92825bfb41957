"""Hamiltonian flow of the nonlinear wavefunction model.

The Hamiltonian over N = 2**q oscillator pairs is

    H = (1/2) P^t K P + (1/2) Q^t K Q + w ( sum_k (Q_k^2 + P_k^2) s_k^2 - S^2 )

with S = sum_k s_k (Q_k^2 + P_k^2).  Hamilton's equations read

    dQ/dt =  K P + 2 f o P,      dP/dt = -K Q - 2 f o Q,
    f_k   =  w s_k (s_k - 2 S),

where o is the elementwise product.  The quartic term makes H
nonseparable, so the integrator is Tao's explicit symplectic splitting
on the doubled phase space (Q, P, X, Y): two mixed-argument kick/drift
maps wrapped around an exact rotation of the difference coordinates by
the binding frequency.  The flow conserves H and the norm exactly; the
scheme tracks both to second order in the step.

The tangent (variational) flow dz/dt = M(t) z uses the Jacobian of
Hamilton's equations.  With a = s o Q, b = s o P and E' = K + 2 diag(f):

    M = [[ -8w b(x)a,  E' - 8w b(x)b ],
         [ -E' + 8w a(x)a,  8w a(x)b ]]

whose trace vanishes identically (the diagonal of the two outer-product
corners cancels pairwise), as it must for a Hamiltonian linearization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import BlowUpError, ValidationError
from .spins import SpinConfigSpace, SpinModel, WaveState, norm_squared, spin_observable

# trajectories leaving this range abort with a blow-up diagnostic
BLOWUP_LIMIT = 1e12


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 5e-4
    steps: int = 20000
    binding: float = 50.0
    record_stride: int = 10

    def __post_init__(self):
        if not (self.dt > 0.0):
            raise ValidationError(f"step size must be positive, got {self.dt}")
        if self.steps < 1:
            raise ValidationError(f"step count must be >= 1, got {self.steps}")
        if not (self.binding > 0.0):
            raise ValidationError(f"binding frequency must be positive, got {self.binding}")
        if self.record_stride < 1:
            raise ValidationError(f"record stride must be >= 1, got {self.record_stride}")


def hamiltonian(state: WaveState, model: SpinModel) -> float:
    q, p, s, w = state.q, state.p, model.space.s, model.w
    dens = q * q + p * p
    big_s = float(s @ dens)
    quad = 0.5 * float(p @ (model.k @ p) + q @ (model.k @ q))
    return quad + w * (float((s * s) @ dens) - big_s * big_s)


def gradients(q: np.ndarray, p: np.ndarray, model: SpinModel):
    """(dH/dQ, dH/dP) of the mixed-argument Hamiltonian H(q, p)."""
    s, w = model.space.s, model.w
    big_s = float(s @ (q * q + p * p))
    f = w * s * (s - 2.0 * big_s)
    return model.k @ q + 2.0 * f * q, model.k @ p + 2.0 * f * p


def rds_rhs(state: WaveState, model: SpinModel):
    """Hamilton's equations: (dQ/dt, dP/dt)."""
    gq, gp = gradients(state.q, state.p, model)
    return gp, -gq


def tangent_coefficients(q: np.ndarray, p: np.ndarray, model: SpinModel):
    """(f, a, b) entering the linearized flow at the state (q, p)."""
    s, w = model.space.s, model.w
    big_s = float(s @ (q * q + p * p))
    f = w * s * (s - 2.0 * big_s)
    return f, s * q, s * p


def tangent_apply(coeffs, model: SpinModel, zq: np.ndarray, zp: np.ndarray):
    """M z without materializing M; coeffs from tangent_coefficients."""
    f, a, b = coeffs
    w8 = 8.0 * model.w
    r = float(a @ zq + b @ zp)
    dzq = model.k @ zp + 2.0 * f * zp - w8 * b * r
    dzp = -(model.k @ zq) - 2.0 * f * zq + w8 * a * r
    return dzq, dzp


def hessian_m(state: WaveState, model: SpinModel) -> np.ndarray:
    """Dense 2N x 2N matrix of the linearized flow at the state."""
    f, a, b = tangent_coefficients(state.q, state.p, model)
    w8 = 8.0 * model.w
    eprime = model.k + 2.0 * np.diag(f)
    tl = -w8 * np.outer(b, a)
    tr = eprime - w8 * np.outer(b, b)
    bl = -eprime + w8 * np.outer(a, a)
    br = w8 * np.outer(a, b)
    return linalg.compose_blocks(tl, tr, bl, br)


def tao_step(q, p, x, y, model: SpinModel, dt: float, binding: float, trig=None):
    """One step of Tao's splitting on the doubled phase space.

    Sequence A(dt/2) B(dt/2) C(dt) B(dt/2) A(dt/2): A kicks (p, x) from
    H(q, y), B kicks (q, y) from H(x, p), C rotates the copy differences
    by 2*binding*dt while leaving the sums alone.
    """
    half = 0.5 * dt
    gq, gy = gradients(q, y, model)
    p = p - half * gq
    x = x + half * gy
    gx, gp = gradients(x, p, model)
    q = q + half * gp
    y = y - half * gx
    if trig is None:
        theta = 2.0 * binding * dt
        trig = (math.cos(theta), math.sin(theta))
    c, s = trig
    sq, sp = q + x, p + y
    dq, dp = q - x, p - y
    rq = c * dq + s * dp
    rp = -s * dq + c * dp
    q, x = 0.5 * (sq + rq), 0.5 * (sq - rq)
    p, y = 0.5 * (sp + rp), 0.5 * (sp - rp)
    gx, gp = gradients(x, p, model)
    q = q + half * gp
    y = y - half * gx
    gq, gy = gradients(q, y, model)
    p = p - half * gq
    x = x + half * gy
    # NaN/inf propagate through sums, so one scalar check covers all entries
    if not math.isfinite(float(q.sum() + p.sum() + x.sum() + y.sum())):
        raise BlowUpError("non-finite state after integrator step")
    return q, p, x, y


@dataclass
class TrajectoryRecord:
    """Sampled observables; all arrays share length floor(steps/stride)+1."""

    times: np.ndarray
    spin: np.ndarray
    energy: np.ndarray
    norm: np.ndarray
    detm: np.ndarray | None
    final: WaveState


def _check_range(q, p, step):
    m = max(float(np.abs(q).max()), float(np.abs(p).max()))
    if not math.isfinite(m) or m > BLOWUP_LIMIT:
        raise BlowUpError(f"trajectory left the trusted range at step {step} (max |entry| = {m:.3e})")


def evolve(
    state: WaveState,
    model: SpinModel,
    cfg: IntegratorConfig,
    record_detm: bool = False,
) -> TrajectoryRecord:
    """Integrate and sample observables every record_stride steps.

    Observables (and the returned final state) are read from the mean
    of the two phase-space copies: both copies shadow the solution, and
    averaging cancels the leading binding oscillation of the splitting
    (measured: two orders of magnitude tighter energy conservation than
    either copy alone at the default step and binding).
    """
    space = model.space
    q, p = state.q.copy(), state.p.copy()
    x, y = q.copy(), p.copy()
    theta = 2.0 * cfg.binding * cfg.dt
    trig = (math.cos(theta), math.sin(theta))
    nrec = cfg.steps // cfg.record_stride + 1
    times = np.empty(nrec)
    spin = np.empty(nrec)
    energy = np.empty(nrec)
    norm = np.empty(nrec)
    detm = np.empty(nrec) if record_detm else None

    def record(idx, step, qv, pv):
        _check_range(qv, pv, step)
        st = WaveState(qv, pv)
        times[idx] = step * cfg.dt
        spin[idx] = spin_observable(st, space)
        energy[idx] = hamiltonian(st, model)
        norm[idx] = norm_squared(st)
        if record_detm:
            detm[idx] = linalg.lu_determinant(hessian_m(st, model))

    record(0, 0, q, p)
    idx = 1
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(1, cfg.steps + 1):
            try:
                q, p, x, y = tao_step(q, p, x, y, model, cfg.dt, cfg.binding, trig)
            except BlowUpError as exc:
                raise BlowUpError(f"{exc} (step {step})") from None
            if step % cfg.record_stride == 0:
                record(idx, step, 0.5 * (q + x), 0.5 * (p + y))
                idx += 1
    return TrajectoryRecord(
        times, spin, energy, norm, detm, WaveState(0.5 * (q + x), 0.5 * (p + y))
    )


def coupled_step(state: WaveState, tangent: np.ndarray, model: SpinModel, dt: float, binding: float, trig=None):
    """Advance the state and a tangent vector together through one step.

    The state takes one tao_step on freshly seeded copies and is merged
    back by the copy mean (the readout convention of evolve; a ladder of
    coupled_steps therefore shadows evolve without reproducing it
    bitwise).  The tangent z = (dQ, dP) takes a Heun step of
    dz/dt = M(t) z with the Jacobian evaluated at the pre-step and
    post-step states:

        k1 = M(t) z,   k2 = M(t+dt) (z + dt k1),   z' = z + dt (k1+k2)/2.
    """
    n = state.q.shape[0]
    z = np.asarray(tangent, dtype=float)
    if z.shape != (2 * n,):
        raise ValidationError(f"tangent needs {2 * n} entries, got shape {z.shape}")
    qn, pn, xn, yn = tao_step(
        state.q, state.p, state.q.copy(), state.p.copy(), model, dt, binding, trig
    )
    new_state = WaveState(0.5 * (qn + xn), 0.5 * (pn + yn))
    k1q, k1p = tangent_apply(
        tangent_coefficients(state.q, state.p, model), model, z[:n], z[n:]
    )
    k2q, k2p = tangent_apply(
        tangent_coefficients(new_state.q, new_state.p, model),
        model,
        z[:n] + dt * k1q,
        z[n:] + dt * k1p,
    )
    out = np.empty(2 * n)
    out[:n] = z[:n] + 0.5 * dt * (k1q + k2q)
    out[n:] = z[n:] + 0.5 * dt * (k1p + k2p)
    return new_state, out


def closed_form_linear(state: WaveState, model: SpinModel, times) -> tuple[np.ndarray, np.ndarray]:
    """Exact w = 0 evolution through the eigenbasis of K.

    Returns (qs, ps) with one row per requested time.  In the eigenbasis
    the complex amplitudes rotate as exp(-i lambda t).
    """
    if model.w != 0.0:
        raise ValidationError("closed form requires the linear model (w = 0)")
    dec = linalg.sym_eigen(model.k)
    ts = np.asarray(times, dtype=float)
    a = dec.vectors.T @ state.q
    b = dec.vectors.T @ state.p
    phases = np.outer(ts, dec.values)
    cos_t, sin_t = np.cos(phases), np.sin(phases)
    qs = (cos_t * a + sin_t * b) @ dec.vectors.T
    ps = (cos_t * b - sin_t * a) @ dec.vectors.T
    return qs, ps
