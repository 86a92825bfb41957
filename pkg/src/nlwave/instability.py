"""Determinant criterion for local instability of the linearized flow.

det M < 0 forces the 2N x 2N linearization M to carry real eigenvalues
of both signs (complex eigenvalues of a real matrix pair up and
contribute positive determinant factors, and trace M = 0 balances the
real ones), so the state sits on a locally unstable direction.

The algebra route works with the rank-one pieces evaluated at a state:

    u_k = 2 sqrt(w) s_k P_k,   v_k = 2 sqrt(w) s_k Q_k,
    f_j = w s_j (s_j - 2S),    E = K + diag(f),

assembled into blocks A = u(x)v, B = E - u(x)u, C = -E + v(x)v,
D = -A.  With x = v^t E^-1 v, y = v^t E^-1 u, z = u^t E^-1 u the
composed block matrix has

    det [[A,B],[C,D]] = (det E)^2 (1 - z) (1 - x - y^2/(1 - z)).

The blocks differ from the true Hessian-derived M by factor and sign
arrangement (the Hessian cross blocks carry -8w terms where the
composed matrix carries u(x)v), so the closed form is validated against
its own composed matrix and the sign agreement with the Hessian route
is measured per state instead of assumed.  The ground truth for the
criterion itself is always the LU determinant of the Hessian M.

As w grows, x, y, z approach state-only limits (for S < 1/4)

    x_inf = 4 sum Q_k^2 s_k/(s_k - 2S),   and likewise y_inf, z_inf,

which power the large-w instability prediction: unit norm, S < 1/4,
z_inf < 1, and (x_inf > 1 or (x_inf - 1)(1 - z_inf) + y_inf^2 > 1)
guarantee a finite threshold w* beyond which det M < 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import dynamics, linalg
from .errors import SingularMatrixError, ValidationError
from .spins import SpinConfigSpace, SpinModel, WaveState, norm_squared, spin_observable


@dataclass(frozen=True)
class BlockPieces:
    """Rank-one pieces and blocks of the composed matrix at one state."""

    u: np.ndarray
    v: np.ndarray
    f: np.ndarray
    e: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    s_value: float


@dataclass(frozen=True)
class XyzQuantities:
    x: float
    y: float
    z: float
    x_inf: float
    y_inf: float
    z_inf: float
    s_value: float


@dataclass(frozen=True)
class DciVerdict:
    det_direct: float
    det_closed: float | None
    holds: bool
    spectrum: np.ndarray
    checks: dict


def nonlinear_pieces(state: WaveState, model: SpinModel) -> BlockPieces:
    s, w = model.space.s, model.w
    big_s = spin_observable(state, model.space)
    rw = math.sqrt(w)
    u = 2.0 * rw * s * state.p
    v = 2.0 * rw * s * state.q
    f = w * s * (s - 2.0 * big_s)
    # f must agree with w*J, J = diag(s^2) - 2S diag(s)
    j_diag = s * s - 2.0 * big_s * s
    assert np.abs(w * j_diag - f).max() <= 1e-12 * max(1.0, float(np.abs(f).max()))
    e = model.k + np.diag(f)
    a = np.outer(u, v)
    b = e - np.outer(u, u)
    c = -e + np.outer(v, v)
    return BlockPieces(u=u, v=v, f=f, e=e, a=a, b=b, c=c, d=-a, s_value=big_s)


def xyz_of(pieces: BlockPieces) -> tuple[float, float, float]:
    """x = v^t E^-1 v, y = v^t E^-1 u, z = u^t E^-1 u (E must be invertible)."""
    fac = linalg.lu_factor(pieces.e)
    einv_v = linalg.solve_factored(fac, pieces.v)
    einv_u = linalg.solve_factored(fac, pieces.u)
    return (
        float(pieces.v @ einv_v),
        float(pieces.v @ einv_u),
        float(pieces.u @ einv_u),
    )


def det_m(state: WaveState, model: SpinModel) -> DciVerdict:
    """Ground-truth criterion plus the closed-form cross-check.

    det_direct comes from the Hessian M; det_closed evaluates the
    assembled formula on the composed block matrix and is cross-checked
    against that matrix's own LU determinant (recorded in checks), not
    against det_direct; only the determinant SIGN agreement between the
    two routes is measured.
    """
    m = dynamics.hessian_m(state, model)
    det_direct = linalg.lu_determinant(m)
    spectrum = linalg.general_eigenvalues(m)
    pieces = nonlinear_pieces(state, model)
    composed = linalg.compose_blocks(pieces.a, pieces.b, pieces.c, pieces.d)
    det_composed = linalg.lu_determinant(composed)
    checks: dict = {"det_composed_lu": det_composed}
    det_closed = None
    try:
        x, y, z = xyz_of(pieces)
        if abs(1.0 - z) <= 1e-12:
            checks["closed_form_note"] = "B singular (z = 1), closed form skipped"
        else:
            det_e = linalg.lu_determinant(pieces.e)
            det_closed = det_e**2 * (1.0 - z) * (1.0 - x - y * y / (1.0 - z))
            scale = max(abs(det_closed), abs(det_composed), 1e-300)
            checks["closed_vs_composed_rel"] = abs(det_closed - det_composed) / scale
    except SingularMatrixError:
        checks["closed_form_note"] = "E singular, closed form skipped"
    sign = lambda t: math.copysign(1.0, t) if t != 0.0 else 0.0
    checks["sign_agreement_direct_vs_composed"] = sign(det_direct) == sign(det_composed)
    holds = det_direct < 0.0
    if holds:
        # consequence of a negative determinant with zero trace
        checks["has_positive_real_part"] = bool((spectrum.real > 1e-10).any())
        checks["has_negative_real_part"] = bool((spectrum.real < -1e-10).any())
    return DciVerdict(det_direct, det_closed, holds, spectrum, checks)


def sufficiency_report(pieces: BlockPieces, sigma: float = 2.0) -> dict:
    """Named sufficiency and necessity conditions evaluated on the pieces.

    The two-sided bundle uses the orientation of z against 1: the top
    branch needs z < 1 with x + y^2/(1-z) > 1, the bottom branch z > 1
    with the same expression < 1.  The corollary bundles:

      2.1: z < 1 and x > 1;
      2.2: K pos.def., u^t u below the least eigenvalue of E (so z < 1
           by the norm lemma), diag(f) bounded by (sigma-1) K, and
           v^t K^-1 v > sigma;
      2.3 (necessary for the top branch): x + z > 1.

    Values and booleans are returned flat so the CLI can dump them as
    name=value lines.
    """
    e_dec = linalg.sym_eigen(linalg.check_symmetric(pieces.e))
    e_min = float(e_dec.values[0])
    e_max = float(e_dec.values[-1])
    report: dict = {"e_min_eig": e_min, "e_max_eig": e_max, "e_positive": e_min > 0.0}
    try:
        x, y, z = xyz_of(pieces)
    except SingularMatrixError:
        report["note"] = "E singular; condition set not evaluable"
        report["sufficient_bundle_satisfied"] = False
        return report
    report.update({"x": x, "y": y, "z": z})
    top1 = z < 1.0
    expr = x + y * y / (1.0 - z) if z != 1.0 else math.inf
    report["orientation"] = "top" if top1 else "bottom"
    report["top1_z_lt_1"] = top1
    report["top2_expr"] = expr
    report["top2_gt_1"] = expr > 1.0
    bottom1 = z > 1.0
    report["bottom1_z_gt_1"] = bottom1
    report["bottom2_lt_1"] = expr < 1.0
    theorem2 = (top1 and expr > 1.0) or (bottom1 and expr < 1.0)
    report["theorem2_bundle"] = theorem2
    report["cor21"] = top1 and x > 1.0
    k_mat = pieces.e - np.diag(pieces.f)
    k_dec = linalg.sym_eigen(k_mat)
    report["cor22_i_k_positive"] = bool(k_dec.values[0] > 0.0)
    uu = float(pieces.u @ pieces.u)
    vv = float(pieces.v @ pieces.v)
    report["cor22_ii_eta"] = e_min
    report["cor22_iii_utu"] = uu
    report["cor22_iii_utu_lt_eta"] = uu < e_min
    gap = (sigma - 1.0) * k_mat - np.diag(pieces.f)
    report["cor22_iv_min_eig"] = float(linalg.sym_eigen(gap).values[0])
    report["cor22_iv_ok"] = report["cor22_iv_min_eig"] >= 0.0
    try:
        vkv = float(pieces.v @ linalg.solve(k_mat, pieces.v))
    except SingularMatrixError:
        vkv = math.nan
    report["cor22_v_vkv"] = vkv
    report["cor22_v_gt_sigma"] = bool(vkv > sigma)
    report["cor22_sigma"] = sigma
    report["cor22_bundle"] = bool(
        report["cor22_i_k_positive"]
        and e_min > 0.0
        and report["cor22_iii_utu_lt_eta"]
        and report["cor22_iv_ok"]
        and report["cor22_v_gt_sigma"]
    )
    report["cor23_necessary_x_plus_z_gt_1"] = (x + z) > 1.0
    # norm lemmas: small u forces z < 1, large v forces x > 1
    lemma1_hyp = e_min > 0.0 and uu < e_min
    report["lemma1_hyp_utu_lt_eta"] = lemma1_hyp
    report["lemma1_implied_z_lt_1"] = (not lemma1_hyp) or (z < 1.0)
    lemma2_hyp = e_min > 0.0 and vv > e_max
    report["lemma2_hyp_vtv_gt_emax"] = lemma2_hyp
    report["lemma2_implied_x_gt_1"] = (not lemma2_hyp) or (x > 1.0)
    report["sufficient_bundle_satisfied"] = bool(
        theorem2 or report["cor21"] or report["cor22_bundle"]
    )
    return report


def asymptotic_xyz(state: WaveState, space: SpinConfigSpace, model: SpinModel | None = None) -> XyzQuantities:
    """Large-w limits of (x, y, z); finite-w values too when a model is given.

    Requires |S| < 1/4 so that every s_k - 2S keeps the sign of s_k (the
    nearest spin values are +-1/2, so the symmetric bound is the sharp
    one; S < -1/4 flips the sign of the negative-spin denominators just
    as S > 1/4 flips the positive ones).  The limits then read
    4 sum Q_k^2 s_k/(s_k - 2S) and friends.
    """
    big_s = spin_observable(state, space)
    if not (abs(big_s) < 0.25):
        raise ValidationError(
            f"asymptotic limits need |S| < 1/4, got S = {big_s:.6g}"
        )
    ratio = space.s / (space.s - 2.0 * big_s)
    x_inf = 4.0 * float((state.q * state.q) @ ratio)
    y_inf = 4.0 * float((state.q * state.p) @ ratio)
    z_inf = 4.0 * float((state.p * state.p) @ ratio)
    if model is not None:
        x, y, z = xyz_of(nonlinear_pieces(state, model))
    else:
        x = y = z = math.nan
    return XyzQuantities(x, y, z, x_inf, y_inf, z_inf, big_s)


def theorem3_predict(state: WaveState, space: SpinConfigSpace) -> dict:
    """Large-w instability prediction from the state alone (no w input).

    Hypotheses: unit norm, |S| < 1/4, z_inf < 1, and either x_inf > 1 or
    (x_inf - 1)(1 - z_inf) + y_inf^2 > 1.
    """
    nrm = norm_squared(state)
    if abs(nrm - 1.0) > 1e-9:
        raise ValidationError(f"prediction needs a unit-norm state, got |psi|^2 = {nrm}")
    big_s = spin_observable(state, space)
    report: dict = {"norm_sq": nrm, "s_value": big_s, "s_lt_quarter": abs(big_s) < 0.25}
    if not report["s_lt_quarter"]:
        report.update(
            x_inf=math.nan, y_inf=math.nan, z_inf=math.nan,
            z_inf_lt_1=False, x_inf_gt_1=False, product_form_gt_1=False,
            predicted=False,
        )
        return report
    q = asymptotic_xyz(state, space)
    product_form = (q.x_inf - 1.0) * (1.0 - q.z_inf) + q.y_inf**2
    report.update(
        x_inf=q.x_inf,
        y_inf=q.y_inf,
        z_inf=q.z_inf,
        z_inf_lt_1=q.z_inf < 1.0,
        x_inf_gt_1=q.x_inf > 1.0,
        product_form=product_form,
        product_form_gt_1=product_form > 1.0,
    )
    report["predicted"] = bool(
        report["s_lt_quarter"]
        and report["z_inf_lt_1"]
        and (report["x_inf_gt_1"] or report["product_form_gt_1"])
    )
    return report


@dataclass(frozen=True)
class WstarResult:
    w_star: float | None
    crossings: list
    w_max: float
    tol: float
    grid_points: int


def _det_at(state: WaveState, model_w0: SpinModel, w: float) -> float:
    m = dynamics.hessian_m(state, model_w0.with_w(w))
    return linalg.lu_determinant(m)


def wstar_search(
    state: WaveState,
    model_template: SpinModel,
    w_max: float,
    tol: float = 1e-4,
    grid_points: int = 200,
) -> WstarResult:
    """Largest sign change of det M(w) on [0, w_max], bisected to |dw| <= tol.

    All crossings found on the grid are kept (det M(w) need not be
    monotone when K and the spin diagonal fail to commute); the sup is
    the reported threshold.  None means no sign change on the grid.
    """
    if not (w_max > 0.0) or not (tol > 0.0) or grid_points < 2:
        raise ValidationError("need w_max > 0, tol > 0, grid_points >= 2")
    grid = np.linspace(0.0, w_max, grid_points)
    dets = np.array([_det_at(state, model_template, w) for w in grid])
    crossings: list[float] = []
    for i in range(len(grid) - 1):
        d0, d1 = dets[i], dets[i + 1]
        if d0 == 0.0:  # grid point exactly on a root
            crossings.append(float(grid[i]))
            continue
        if d0 * d1 < 0.0:
            lo, hi = float(grid[i]), float(grid[i + 1])
            flo = d0
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                fm = _det_at(state, model_template, mid)
                if fm == 0.0:
                    lo = hi = mid
                    break
                if flo * fm < 0.0:
                    hi = mid
                else:
                    lo, flo = mid, fm
            crossings.append(0.5 * (lo + hi))
    w_star = max(crossings) if crossings else None
    return WstarResult(w_star, crossings, float(w_max), float(tol), int(grid_points))


def dci_time_series(state: WaveState, model: SpinModel, cfg: dynamics.IntegratorConfig):
    """Sampled det M along the trajectory: (times, det values)."""
    rec = dynamics.evolve(state, model, cfg, record_detm=True)
    return rec.times, rec.detm
