"""Dense linear-algebra kernels, hand rolled for reproducibility.

Everything operates on plain row-major float64 arrays.  The systems in
scope are small (2N = 16 for the default spin count, a few hundred rows
for truncated continuum operators), so the kernels favor transparent,
platform-stable arithmetic over speed:

* LU with partial pivoting is the single determinant/solve path.
* Symmetric eigenproblems use cyclic Jacobi sweeps.
* General spectra use Householder reduction to Hessenberg form plus a
  shifted QR iteration in complex arithmetic.

numpy.linalg is deliberately not called anywhere in this module; the
test suite uses it as an independent oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ConvergenceError,
    DegenerateUpdateError,
    SingularMatrixError,
    SymmetryError,
    ValidationError,
)
from .rng import Rng

# pivot below this fraction of the largest row norm counts as singular
SINGULAR_PIVOT_RTOL = 1e-12
# elementwise symmetry tolerance for matrices tagged symmetric
SYMMETRY_RTOL = 1e-12

_EPS = float(np.finfo(float).eps)


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=float)
    if m.ndim != 2:
        raise ValidationError(f"expected a 2-d array, got ndim={m.ndim}")
    return m


def require_square(a) -> np.ndarray:
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {m.shape}")
    return m


def check_symmetric(a, rtol: float = SYMMETRY_RTOL) -> np.ndarray:
    """Return a if |a[i,j] - a[j,i]| <= rtol * max(1, |a[i,j]|) everywhere."""
    m = require_square(a)
    gap = np.abs(m - m.T)
    tol = rtol * np.maximum(1.0, np.abs(m))
    if np.any(gap > tol):
        i, j = np.unravel_index(int(np.argmax(gap - tol)), m.shape)
        raise SymmetryError(
            f"matrix not symmetric: |a[{i},{j}] - a[{j},{i}]| = {gap[i, j]:.3e}"
        )
    return m


# ---------------------------------------------------------------------------
# LU with partial pivoting


@dataclass(frozen=True)
class LuFactorization:
    """Combined L\\U storage; row i of P@A is row perm[i] of A."""

    lu: np.ndarray
    perm: np.ndarray
    parity: int
    row_scale: float  # largest euclidean row norm of the input


def lu_factor(a) -> LuFactorization:
    m = require_square(a).copy()
    n = m.shape[0]
    row_scale = float(np.sqrt((m * m).sum(axis=1)).max()) if n else 0.0
    perm = np.arange(n)
    parity = 1
    for k in range(n - 1):
        p = k + int(np.argmax(np.abs(m[k:, k])))
        if p != k:
            m[[k, p]] = m[[p, k]]
            perm[[k, p]] = perm[[p, k]]
            parity = -parity
        piv = m[k, k]
        if piv == 0.0:
            # whole subcolumn is zero after pivoting; nothing to eliminate
            continue
        m[k + 1 :, k] /= piv
        m[k + 1 :, k + 1 :] -= np.outer(m[k + 1 :, k], m[k, k + 1 :])
    return LuFactorization(m, perm, parity, row_scale)


def determinant_from_factor(f: LuFactorization) -> float:
    if f.lu.shape[0] == 0:
        return 1.0
    return float(f.parity * np.prod(np.diag(f.lu)))


def lu_determinant(a) -> float:
    """Determinant via LU; exactly singular inputs return 0.0, no raise."""
    return determinant_from_factor(lu_factor(a))


def _check_pivots(f: LuFactorization) -> None:
    diag = np.abs(np.diag(f.lu))
    tol = SINGULAR_PIVOT_RTOL * f.row_scale
    bad = np.nonzero(diag <= tol)[0]
    if bad.size:
        k = int(bad[0])
        raise SingularMatrixError(
            f"matrix singular to working precision at pivot {k} "
            f"(|u_kk| = {diag[k]:.3e}, tol = {tol:.3e})"
        )


def solve_factored(f: LuFactorization, b) -> np.ndarray:
    """Solve A x = b from a factorization; b may be a vector or a matrix."""
    _check_pivots(f)
    bb = np.asarray(b, dtype=float)
    vector = bb.ndim == 1
    if vector:
        bb = bb[:, None]
    n = f.lu.shape[0]
    if bb.shape[0] != n:
        raise ValidationError(f"rhs has {bb.shape[0]} rows, matrix has {n}")
    x = bb[f.perm].copy()
    for k in range(1, n):  # forward, unit lower triangle
        x[k] -= f.lu[k, :k] @ x[:k]
    for k in range(n - 1, -1, -1):  # backward
        x[k] -= f.lu[k, k + 1 :] @ x[k + 1 :]
        x[k] /= f.lu[k, k]
    return x[:, 0] if vector else x


def solve(a, b) -> np.ndarray:
    return solve_factored(lu_factor(a), b)


def inverse(a) -> np.ndarray:
    m = require_square(a)
    return solve(m, np.eye(m.shape[0]))


# ---------------------------------------------------------------------------
# Symmetric eigenproblems: cyclic Jacobi


@dataclass(frozen=True)
class EigenDecomposition:
    """values ascending; vectors[:, i] is the unit eigenvector of values[i]."""

    values: np.ndarray
    vectors: np.ndarray


def sym_eigen(a, max_sweeps: int = 100) -> EigenDecomposition:
    m = check_symmetric(a)
    n = m.shape[0]
    w = 0.5 * (m + m.T)  # exact symmetry for the sweep
    v = np.eye(n)
    if n == 1:
        return EigenDecomposition(np.array([w[0, 0]]), v)
    scale = max(1.0, float(np.sqrt((w * w).sum())))
    for sweep in range(max_sweeps):
        off = float(np.sqrt(2.0 * (np.triu(w, 1) ** 2).sum()))
        if off <= 1e-14 * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = w[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (w[q, q] - w[p, p]) / (2.0 * apq)
                # smaller rotation angle keeps the sweep stable
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rp = w[p, :].copy()
                rq = w[q, :].copy()
                w[p, :] = c * rp - s * rq
                w[q, :] = s * rp + c * rq
                cp = w[:, p].copy()
                cq = w[:, q].copy()
                w[:, p] = c * cp - s * cq
                w[:, q] = s * cp + c * cq
                w[p, q] = 0.0
                w[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        raise ConvergenceError(
            f"jacobi sweep budget exhausted after {max_sweeps} sweeps "
            f"(off-diagonal norm {off:.3e})"
        )
    order = np.argsort(np.diag(w), kind="stable")
    return EigenDecomposition(np.diag(w)[order].copy(), v[:, order].copy())


def sym_matrix_function(a, fn) -> np.ndarray:
    """Apply fn to the spectrum of a symmetric matrix: V fn(D) V^t."""
    d = sym_eigen(a)
    return (d.vectors * fn(d.values)) @ d.vectors.T


# ---------------------------------------------------------------------------
# General spectra: Hessenberg + shifted QR in complex arithmetic


def hessenberg_form(a) -> np.ndarray:
    h = require_square(a).copy()
    n = h.shape[0]
    for k in range(n - 2):
        x = h[k + 1 :, k].copy()
        norm = float(np.sqrt((x * x).sum()))
        if norm <= 1e-300:
            continue
        alpha = -norm if x[0] >= 0 else norm
        x[0] -= alpha
        vnorm = float(np.sqrt((x * x).sum()))
        if vnorm <= 1e-300:
            continue
        v = x / vnorm
        h[k + 1 :, k:] -= 2.0 * np.outer(v, v @ h[k + 1 :, k:])
        h[:, k + 1 :] -= 2.0 * np.outer(h[:, k + 1 :] @ v, v)
        h[k + 2 :, k] = 0.0
    return h


def _eig2(a11: complex, a12: complex, a21: complex, a22: complex):
    mid = 0.5 * (a11 + a22)
    delta = 0.5 * (a11 - a22)
    disc = np.sqrt(complex(delta * delta + a12 * a21))
    return mid + disc, mid - disc


def _wilkinson_shift(a11, a12, a21, a22) -> complex:
    lam1, lam2 = _eig2(a11, a12, a21, a22)
    return lam1 if abs(lam1 - a22) <= abs(lam2 - a22) else lam2


def general_eigenvalues(a, max_sweeps: int = 100) -> np.ndarray:
    """All eigenvalues of a real square matrix, sorted by (real, imag).

    Shifted QR with Wilkinson shifts and an exceptional shift every 10
    stalled iterations; 1x1 and 2x2 tail blocks deflate directly.
    """
    m = require_square(a)
    n = m.shape[0]
    if n == 0:
        return np.zeros(0, dtype=complex)
    if n == 1:
        return m.astype(complex).ravel()
    h = hessenberg_form(m).astype(complex)
    eig: list[complex] = []
    hi = n - 1
    iters = 0
    while hi >= 0:
        # knock out negligible subdiagonals in the active region
        for i in range(1, hi + 1):
            if abs(h[i, i - 1]) <= _EPS * (abs(h[i - 1, i - 1]) + abs(h[i, i])):
                h[i, i - 1] = 0.0
        lo = hi
        while lo > 0 and h[lo, lo - 1] != 0.0:
            lo -= 1
        if lo == hi:
            eig.append(complex(h[hi, hi]))
            hi -= 1
            iters = 0
            continue
        if lo == hi - 1:
            lam1, lam2 = _eig2(h[lo, lo], h[lo, hi], h[hi, lo], h[hi, hi])
            eig.extend([lam1, lam2])
            hi -= 2
            iters = 0
            continue
        iters += 1
        if iters > max_sweeps:
            raise ConvergenceError(
                f"qr iteration stalled after {iters - 1} sweeps on a "
                f"{hi - lo + 1}-row block"
            )
        if iters % 10 == 0:
            # exceptional shift breaks symmetry-induced stalls
            mu = complex(abs(h[hi, hi - 1]) + abs(h[hi - 1, hi - 2]))
        else:
            mu = _wilkinson_shift(h[hi - 1, hi - 1], h[hi - 1, hi], h[hi, hi - 1], h[hi, hi])
        w = h[lo : hi + 1, lo : hi + 1]
        k = w.shape[0]
        w[np.arange(k), np.arange(k)] -= mu
        rots = []
        for j in range(k - 1):
            x, y = w[j, j], w[j + 1, j]
            r = float(np.hypot(abs(x), abs(y)))
            if r <= 1e-300:
                rots.append((1.0 + 0j, 0.0 + 0j))
                continue
            cx, cy = np.conj(x) / r, np.conj(y) / r
            rots.append((cx, cy))
            rj = w[j, j:].copy()
            rj1 = w[j + 1, j:].copy()
            w[j, j:] = cx * rj + cy * rj1
            w[j + 1, j:] = -np.conj(cy) * rj + np.conj(cx) * rj1
            w[j + 1, j] = 0.0
        for j in range(k - 1):  # right-multiply by the adjoint rotations
            cx, cy = rots[j]
            top = min(j + 2, k)
            cj = w[:top, j].copy()
            cj1 = w[:top, j + 1].copy()
            w[:top, j] = np.conj(cx) * cj + np.conj(cy) * cj1
            w[:top, j + 1] = -cy * cj + cx * cj1
        w[np.arange(k), np.arange(k)] += mu
    out = np.array(eig, dtype=complex)
    order = np.lexsort((out.imag, out.real))
    return out[order]


# ---------------------------------------------------------------------------
# Determinant identities used by the instability criterion


def sylvester_det(x, u, v) -> float:
    """det(X + v (x) u) = det(X) (1 + u^t X^-1 v); one factor, one solve.

    The rank-one term has entries (v (x) u)[i, j] = v[i] u[j].
    """
    m = require_square(x)
    uu = np.asarray(u, dtype=float)
    vv = np.asarray(v, dtype=float)
    if uu.shape != (m.shape[0],) or vv.shape != (m.shape[0],):
        raise ValidationError("u and v must be vectors matching the matrix size")
    f = lu_factor(m)
    xinv_v = solve_factored(f, vv)
    return determinant_from_factor(f) * (1.0 + float(uu @ xinv_v))


def compose_blocks(a, b, c, d) -> np.ndarray:
    """[[A, B], [C, D]] as a dense 2N x 2N matrix."""
    aa, bb, cc, dd = (require_square(x) for x in (a, b, c, d))
    n = aa.shape[0]
    for name, blk in (("B", bb), ("C", cc), ("D", dd)):
        if blk.shape != (n, n):
            raise ValidationError(f"block {name} has shape {blk.shape}, expected {(n, n)}")
    top = np.hstack([aa, bb])
    bot = np.hstack([cc, dd])
    return np.vstack([top, bot])


def block_det_reduction(a, b, c, d) -> float:
    """det [[A,B],[C,D]] = (-1)^N det(B) det(C - D B^-1 A); needs B invertible."""
    aa, bb, cc, dd = (require_square(x) for x in (a, b, c, d))
    n = aa.shape[0]
    fb = lu_factor(bb)
    try:
        binv_a = solve_factored(fb, aa)
    except SingularMatrixError as exc:
        raise SingularMatrixError(
            "B block singular; fall back to lu_determinant on the composed matrix"
        ) from exc
    inner = cc - dd @ binv_a
    sign = -1.0 if n % 2 else 1.0
    return sign * determinant_from_factor(fb) * lu_determinant(inner)


def rank_one_inverse_update(e, u) -> np.ndarray:
    """Inverse of B = E - u (x) u for symmetric invertible E.

    B^-1 = E^-1 + (E^-1 u)(x)(E^-1 u) / (1 - u^t E^-1 u); raises when the
    update is within 1e-10 of its degenerate direction u^t E^-1 u = 1.
    """
    m = check_symmetric(e)
    uu = np.asarray(u, dtype=float)
    if uu.shape != (m.shape[0],):
        raise ValidationError("u must be a vector matching the matrix size")
    f = lu_factor(m)
    einv_u = solve_factored(f, uu)
    gap = 1.0 - float(uu @ einv_u)
    if abs(gap) <= 1e-10:
        raise DegenerateUpdateError(
            f"rank-one update degenerate: 1 - u^t E^-1 u = {gap:.3e}"
        )
    einv = solve_factored(f, np.eye(m.shape[0]))
    return einv + np.outer(einv_u, einv_u) / gap


def orthonormal_from(a) -> np.ndarray:
    """Q factor of a Householder QR, diagonal-of-R sign fixed positive."""
    r = require_square(a).copy()
    n = r.shape[0]
    q = np.eye(n)
    for k in range(n - 1):
        x = r[k:, k].copy()
        norm = float(np.sqrt((x * x).sum()))
        if norm <= 1e-300:
            continue
        alpha = -norm if x[0] >= 0 else norm
        x[0] -= alpha
        vnorm = float(np.sqrt((x * x).sum()))
        if vnorm <= 1e-300:
            continue
        v = x / vnorm
        r[k:, k:] -= 2.0 * np.outer(v, v @ r[k:, k:])
        q[:, k:] -= 2.0 * np.outer(q[:, k:] @ v, v)
    d = np.sign(np.diag(r)).copy()
    d[d == 0.0] = 1.0
    return q * d


# ---------------------------------------------------------------------------
# Text round-trip


def write_matrix_text(path, a) -> None:
    """First line "rows cols", then one whitespace-separated row per line."""
    m = as_matrix(a)
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{m.shape[0]} {m.shape[1]}\n")
        for row in m:
            fh.write(" ".join(f"{x:.17g}" for x in row) + "\n")


def read_matrix_text(path) -> np.ndarray:
    with open(path, "r", encoding="ascii") as fh:
        tokens = fh.read().split()
    if len(tokens) < 2:
        raise ValidationError(f"{path}: missing matrix header")
    try:
        rows, cols = int(tokens[0]), int(tokens[1])
    except ValueError as exc:
        raise ValidationError(f"{path}: malformed header {tokens[:2]}") from exc
    body = tokens[2:]
    if rows < 0 or cols < 0 or len(body) != rows * cols:
        raise ValidationError(
            f"{path}: expected {rows * cols} entries for {rows}x{cols}, got {len(body)}"
        )
    try:
        vals = np.array([float(t) for t in body], dtype=float)
    except ValueError as exc:
        raise ValidationError(f"{path}: non-numeric matrix entry") from exc
    return vals.reshape(rows, cols)


# ---------------------------------------------------------------------------
# Seeded identity suite (shared by tests and the `identities` subcommand)


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def _draw_matrix(rng: Rng, n: int) -> np.ndarray:
    return np.array([[rng.uniform_in(-1.0, 1.0) for _ in range(n)] for _ in range(n)])


def _draw_invertible(rng: Rng, n: int, floor: float = 1e-3) -> np.ndarray:
    # rejection keeps conditioning sane so 1e-9 relative checks are fair
    while True:
        m = _draw_matrix(rng, n)
        if abs(lu_determinant(m)) > floor:
            return m


def run_identity_suite(seed: int = 20260816, trials: int = 1000, max_size: int = 8) -> dict:
    """Max relative errors of the determinant identities over seeded draws.

    Exercised identities: det(XY) = det X det Y, det X^t = det X,
    det X^-1 = 1/det X, the rank-one (Sylvester) correction, the
    rank-one symmetric inverse update, column-block reversal picking up
    (-1)^N, block reduction through B, and the product of Jacobi
    eigenvalues against the LU determinant.
    """
    rng = Rng(seed)
    errs = {
        "product_rule": 0.0,
        "transpose_rule": 0.0,
        "inverse_rule": 0.0,
        "sylvester_corollary": 0.0,
        "rank_one_inverse": 0.0,
        "block_reversal": 0.0,
        "block_reduction": 0.0,
        "sym_eigen_product": 0.0,
    }
    for _ in range(trials):
        n = rng.integer(1, max_size)
        x = _draw_invertible(rng, n)
        y = _draw_invertible(rng, n)
        det_x = lu_determinant(x)
        det_y = lu_determinant(y)
        errs["product_rule"] = max(
            errs["product_rule"], _rel(lu_determinant(x @ y), det_x * det_y)
        )
        errs["transpose_rule"] = max(
            errs["transpose_rule"], _rel(lu_determinant(x.T.copy()), det_x)
        )
        errs["inverse_rule"] = max(
            errs["inverse_rule"], _rel(lu_determinant(inverse(x)), 1.0 / det_x)
        )
        u = np.array([rng.uniform_in(-1.0, 1.0) for _ in range(n)])
        v = np.array([rng.uniform_in(-1.0, 1.0) for _ in range(n)])
        errs["sylvester_corollary"] = max(
            errs["sylvester_corollary"],
            _rel(sylvester_det(x, u, v), lu_determinant(x + np.outer(v, u))),
        )
        g = _draw_matrix(rng, n)
        e = g.T @ g + 0.1 * np.eye(n)  # SPD, condition bounded by the shift
        uu = 0.2 * np.array([rng.uniform_in(-1.0, 1.0) for _ in range(n)])
        binv = rank_one_inverse_update(e, uu)
        resid = np.abs((e - np.outer(uu, uu)) @ binv - np.eye(n)).max()
        errs["rank_one_inverse"] = max(errs["rank_one_inverse"], float(resid))
        a_blk = _draw_matrix(rng, n)
        b_blk = _draw_invertible(rng, n)
        c_blk = _draw_matrix(rng, n)
        d_blk = _draw_matrix(rng, n)
        m_full = compose_blocks(a_blk, b_blk, c_blk, d_blk)
        m_rev = compose_blocks(b_blk, a_blk, d_blk, c_blk)
        det_full = lu_determinant(m_full)
        sign = -1.0 if n % 2 else 1.0
        errs["block_reversal"] = max(
            errs["block_reversal"], _rel(lu_determinant(m_rev), sign * det_full)
        )
        errs["block_reduction"] = max(
            errs["block_reduction"],
            _rel(block_det_reduction(a_blk, b_blk, c_blk, d_blk), det_full),
        )
        s_mat = 0.5 * (g + g.T)
        dec = sym_eigen(s_mat)
        errs["sym_eigen_product"] = max(
            errs["sym_eigen_product"],
            _rel(float(np.prod(dec.values)), lu_determinant(s_mat)),
        )
    errs["trials"] = float(trials)
    return errs
