"""Spin-configuration space, coupling matrices, and wavefunction states.

A system of q spins (q odd) has N = 2**q configurations.  Configuration
k is read from the bits of k: bit r set means spin r points up.  The
total spin of configuration k is

    s_k = popcount(k) - q/2,

a half integer, never zero for odd q.  Each configuration carries one
oscillator pair (Q_k, P_k); the complex amplitude is Q_k + i P_k.  The
observable driving the nonlinearity is the mean total spin

    S = sum_k s_k (Q_k**2 + P_k**2).

Flipping every spin maps k to its bitwise complement; vectors over
configurations split into even/odd parts under that involution, and
states built from definite-parity vectors start at S = 0 exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import CapacityError, SymmetryError, ValidationError
from .rng import Rng

MAX_SPINS = 13  # 2**13 = 8192 oscillator pairs; dense kernels stop being fun past this


@dataclass(frozen=True)
class SpinConfigSpace:
    """Enumerated configurations for q spins."""

    spins: int
    size: int
    s: np.ndarray  # total spin per configuration, length size

    def flip_permutation(self) -> np.ndarray:
        """Index map of the all-spin flip, k -> ~k on q bits."""
        return np.arange(self.size) ^ (self.size - 1)


def enumerate_configs(q: int) -> SpinConfigSpace:
    if not isinstance(q, (int, np.integer)) or isinstance(q, bool):
        raise ValidationError(f"spin count must be an integer, got {q!r}")
    if q < 1 or q % 2 == 0:
        raise ValidationError(f"spin count must be odd and positive, got {q}")
    if q > MAX_SPINS:
        raise CapacityError(f"spin count {q} exceeds the supported maximum {MAX_SPINS}")
    n = 1 << q
    s = np.array([k.bit_count() - q / 2.0 for k in range(n)], dtype=float)
    return SpinConfigSpace(spins=int(q), size=n, s=s)


def flip_parity(space: SpinConfigSpace, vec: np.ndarray, tol: float = 1e-12) -> int:
    """+1 if vec is even under the all-spin flip, -1 if odd; raises otherwise."""
    v = np.asarray(vec, dtype=float)
    if v.shape != (space.size,):
        raise ValidationError(f"vector length {v.shape} does not match {space.size} configs")
    flipped = v[space.flip_permutation()]
    scale = tol * max(1.0, float(np.abs(v).max()))
    if np.abs(flipped - v).max() <= scale:
        return 1
    if np.abs(flipped + v).max() <= scale:
        return -1
    raise SymmetryError("vector has no definite parity under the all-spin flip")


# ---------------------------------------------------------------------------
# Coupling matrices


@dataclass(frozen=True)
class SpinModel:
    """Coupling matrix K (symmetric positive definite) plus strength w >= 0."""

    space: SpinConfigSpace
    k: np.ndarray
    w: float

    def __post_init__(self):
        if self.k.shape != (self.space.size, self.space.size):
            raise ValidationError(
                f"K has shape {self.k.shape}, expected {(self.space.size,) * 2}"
            )
        if not (self.w >= 0.0):
            raise ValidationError(f"interaction strength must be >= 0, got {self.w}")

    def with_w(self, w: float) -> "SpinModel":
        return SpinModel(self.space, self.k, float(w))


def build_k_identity(space: SpinConfigSpace, scale: float = 1.0) -> np.ndarray:
    if not (scale > 0.0):
        raise ValidationError(f"identity coupling needs scale > 0, got {scale}")
    return scale * np.eye(space.size)


def build_k_flip_graph(
    space: SpinConfigSpace, kappa: float = 1.0, shift: float | None = None
) -> np.ndarray:
    """shift on the diagonal, kappa between configurations one spin flip apart.

    The single-flip graph on q bits has adjacency spectrum q - 2i with
    binomial multiplicities, so the matrix is positive definite exactly
    when shift > kappa * q; the default shift q + 1 with kappa = 1
    gives eigenvalues {1, 3, ..., 2q + 1}.
    """
    if shift is None:
        shift = space.spins + 1.0
    if not (kappa > 0.0):
        raise ValidationError(f"flip-graph coupling needs kappa > 0, got {kappa}")
    if not (shift > kappa * space.spins):
        raise ValidationError(
            f"flip-graph coupling needs shift > kappa*q for positivity, "
            f"got shift={shift}, kappa*q={kappa * space.spins}"
        )
    n = space.size
    k = shift * np.eye(n)
    for j in range(n):
        for r in range(space.spins):
            k[j, j ^ (1 << r)] = kappa
    return k


def build_k_random_spd(
    space: SpinConfigSpace,
    seed: int,
    lam_min: float = 0.5,
    lam_max: float = 2.0,
) -> np.ndarray:
    """Random orthogonal conjugation of uniform eigenvalues in [lam_min, lam_max]."""
    if not (0.0 < lam_min <= lam_max):
        raise ValidationError(
            f"random coupling needs 0 < lam_min <= lam_max, got [{lam_min}, {lam_max}]"
        )
    rng = Rng(seed)
    n = space.size
    g = np.array([[rng.normal() for _ in range(n)] for _ in range(n)])
    q = linalg.orthonormal_from(g)
    lams = np.array([rng.uniform_in(lam_min, lam_max) for _ in range(n)])
    k = (q * lams) @ q.T
    return 0.5 * (k + k.T)  # exact symmetry


def load_k_matrix(space: SpinConfigSpace, path) -> np.ndarray:
    m = linalg.read_matrix_text(path)
    if m.shape != (space.size, space.size):
        raise ValidationError(
            f"{path}: coupling matrix is {m.shape}, expected {(space.size,) * 2}"
        )
    m = linalg.check_symmetric(m)
    dec = linalg.sym_eigen(m)
    if dec.values[0] <= 0.0:
        raise ValidationError(
            f"{path}: coupling matrix not positive definite "
            f"(smallest eigenvalue {dec.values[0]:.3e})"
        )
    return m


# ---------------------------------------------------------------------------
# States


@dataclass(frozen=True)
class WaveState:
    """Real and imaginary quadratures of the wavefunction over configs."""

    q: np.ndarray
    p: np.ndarray

    def copy(self) -> "WaveState":
        return WaveState(self.q.copy(), self.p.copy())


def make_state(q, p) -> WaveState:
    qq = np.asarray(q, dtype=float).copy()
    pp = np.asarray(p, dtype=float).copy()
    if qq.ndim != 1 or qq.shape != pp.shape:
        raise ValidationError(
            f"state needs two equal-length vectors, got {qq.shape} and {pp.shape}"
        )
    if not (np.all(np.isfinite(qq)) and np.all(np.isfinite(pp))):
        raise ValidationError("state entries must be finite")
    return WaveState(qq, pp)


def norm_squared(state: WaveState) -> float:
    return float(state.q @ state.q + state.p @ state.p)


def spin_observable(state: WaveState, space: SpinConfigSpace) -> float:
    return float(space.s @ (state.q * state.q + state.p * state.p))


def random_state(space: SpinConfigSpace, seed: int) -> WaveState:
    """Unit-norm state with isotropic Gaussian direction."""
    rng = Rng(seed)
    vec = rng.normals(2 * space.size)
    vec /= np.sqrt(vec @ vec)
    return WaveState(vec[: space.size].copy(), vec[space.size :].copy())


# named direction vectors for symmetric-state construction; each has a
# definite parity under the all-spin flip (s is odd, s**2 even, ...)
def _named_direction(space: SpinConfigSpace, name: str) -> np.ndarray:
    table = {
        "s": lambda: space.s.copy(),
        "s2": lambda: space.s**2,
        "s3": lambda: space.s**3,
        "abs_s": lambda: np.abs(space.s),
        "ones": lambda: np.ones(space.size),
    }
    if name not in table:
        raise ValidationError(
            f"unknown direction name {name!r}; choose one of {sorted(table)}"
        )
    return table[name]()


def symmetric_state(space: SpinConfigSpace, f, g, beta: float) -> WaveState:
    """Unit-norm state Q = sqrt(1-beta) f/|f|, P = sqrt(beta) g/|g|.

    f and g may be vectors over configurations or names ("s", "s2",
    "s3", "abs_s", "ones").  Both must have definite parity under the
    all-spin flip; that forces the initial mean total spin to vanish.
    """
    fv = _named_direction(space, f) if isinstance(f, str) else np.asarray(f, dtype=float)
    gv = _named_direction(space, g) if isinstance(g, str) else np.asarray(g, dtype=float)
    if not (0.0 < beta < 1.0):
        raise ValidationError(f"mixing weight beta must lie in (0, 1), got {beta}")
    flip_parity(space, fv)
    flip_parity(space, gv)
    fn = float(np.sqrt(fv @ fv))
    gn = float(np.sqrt(gv @ gv))
    if fn <= 0.0 or gn <= 0.0:
        raise ValidationError("direction vectors must be nonzero")
    return WaveState(np.sqrt(1.0 - beta) * fv / fn, np.sqrt(beta) * gv / gn)


def write_state_text(path, state: WaveState) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("Q: " + " ".join(f"{x:.17g}" for x in state.q) + "\n")
        fh.write("P: " + " ".join(f"{x:.17g}" for x in state.p) + "\n")


def read_state_text(path) -> WaveState:
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if len(lines) != 2 or not lines[0].startswith("Q:") or not lines[1].startswith("P:"):
        raise ValidationError(f"{path}: expected exactly two lines 'Q: ...' and 'P: ...'")
    try:
        q = np.array([float(t) for t in lines[0][2:].split()], dtype=float)
        p = np.array([float(t) for t in lines[1][2:].split()], dtype=float)
    except ValueError as exc:
        raise ValidationError(f"{path}: non-numeric state entry") from exc
    return make_state(q, p)
