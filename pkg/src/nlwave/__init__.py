"""nlwave: numerical laboratory for a nonlinear wavefunction model.

The model couples N = 2**q oscillator pairs (Q_k, P_k), one per spin
configuration of q spins, through a quadratic coupling matrix K and a
quartic self-interaction of strength w built from the total-spin
observable.  The package provides:

* hand-rolled dense linear algebra (LU, Jacobi, shifted QR) sized for
  reproducibility rather than speed,
* the Hamiltonian flow and its tangent (variational) flow, integrated
  with Tao's explicit symplectic scheme for nonseparable Hamiltonians,
* Lyapunov-exponent and trajectory-divergence estimators,
* the determinant criterion for local instability of the linearized
  flow, with closed-form block evaluations and sufficiency bundles,
* a truncated harmonic-continuum operator with the feasibility
  criteria for instability windows,
* a reproducible CLI (`nlwave`) writing delimited output plus manifests.
"""

__version__ = "0.1.0"
