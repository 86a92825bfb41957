import math

import numpy as np
import pytest

from nlwave import dynamics, instability, linalg, spins
from nlwave.errors import ValidationError
from nlwave.rng import Rng


def _default_model(q=3, w=0.0):
    space = spins.enumerate_configs(q)
    return spins.SpinModel(space, spins.build_k_flip_graph(space), w)


def _beta_state(space, beta=0.1):
    return spins.symmetric_state(space, "s", "s2", beta)


# ---------------------------------------------------------------- pieces


def test_pieces_linear_case_collapse():
    model = _default_model(w=0.0)
    st = spins.random_state(model.space, 5)
    p = instability.nonlinear_pieces(st, model)
    assert np.all(p.u == 0.0) and np.all(p.v == 0.0)
    assert np.all(p.f == 0.0)
    assert np.allclose(p.e, model.k)
    assert np.allclose(p.b, model.k)
    assert np.allclose(p.c, -model.k)
    assert np.all(p.a == 0.0) and np.all(p.d == 0.0)


def test_pieces_hand_case_one_spin():
    # q=1, K=I, w=2, Q=(sqrt .4, sqrt .6), P=0:
    # S = 0.1, f = (0.7, 0.3), v = sqrt(2)*(-Q0, Q1), u = 0
    space = spins.enumerate_configs(1)
    model = spins.SpinModel(space, spins.build_k_identity(space), 2.0)
    a, b = math.sqrt(0.4), math.sqrt(0.6)
    st = spins.make_state([a, b], [0.0, 0.0])
    p = instability.nonlinear_pieces(st, model)
    assert p.s_value == pytest.approx(0.1, abs=1e-15)
    assert p.f == pytest.approx([0.7, 0.3], abs=1e-15)
    assert p.u == pytest.approx([0.0, 0.0], abs=0.0)
    assert p.v == pytest.approx([-math.sqrt(2) * a, math.sqrt(2) * b], rel=1e-14)
    assert np.allclose(p.e, np.diag([1.7, 1.3]))
    x, y, z = instability.xyz_of(p)
    assert x == pytest.approx(0.8 / 1.7 + 1.2 / 1.3, rel=1e-13)
    assert y == 0.0 and z == 0.0


def test_xyz_against_direct_solves():
    model = _default_model(w=1.9)
    for seed in range(8):
        st = spins.random_state(model.space, 100 + seed)
        p = instability.nonlinear_pieces(st, model)
        x, y, z = instability.xyz_of(p)
        einv = np.linalg.inv(p.e)
        assert x == pytest.approx(float(p.v @ einv @ p.v), rel=1e-10, abs=1e-12)
        assert y == pytest.approx(float(p.v @ einv @ p.u), rel=1e-10, abs=1e-12)
        assert z == pytest.approx(float(p.u @ einv @ p.u), rel=1e-10, abs=1e-12)


def test_cauchy_schwarz_between_xyz():
    # y is an E^-1 inner product, so y^2 <= x z whenever E is positive
    model = _default_model(w=2.4)
    for seed in range(30):
        st = spins.random_state(model.space, 3000 + seed)
        p = instability.nonlinear_pieces(st, model)
        if linalg.sym_eigen(linalg.check_symmetric(p.e)).values[0] <= 0.0:
            continue
        x, y, z = instability.xyz_of(p)
        assert abs(y) <= math.sqrt(max(x, 0.0) * max(z, 0.0)) + 1e-12


# ---------------------------------------------------------------- det M


def test_det_linear_identity_coupling():
    space = spins.enumerate_configs(1)
    model = spins.SpinModel(space, spins.build_k_identity(space), 0.0)
    st = spins.random_state(space, 11)
    verdict = instability.det_m(st, model)
    # M = [[0, I], [-I, 0]], det = 1
    assert verdict.det_direct == pytest.approx(1.0, rel=1e-12)
    assert verdict.det_closed == pytest.approx(1.0, rel=1e-12)
    assert not verdict.holds
    assert verdict.checks["sign_agreement_direct_vs_composed"]


def test_det_linear_law_random_spd():
    # w = 0 freezes det M at (det K)^2 regardless of the state
    space = spins.enumerate_configs(3)
    for seed in (1, 2, 3, 4, 5):
        k = spins.build_k_random_spd(space, seed)
        model = spins.SpinModel(space, k, 0.0)
        st = spins.random_state(space, 50 + seed)
        verdict = instability.det_m(st, model)
        want = linalg.lu_determinant(k) ** 2
        assert verdict.det_direct == pytest.approx(want, rel=1e-10)
        assert not verdict.holds


def test_det_hand_composed_value():
    # continues the one-spin hand case: det = (1.7*1.3)^2 (1 - x)
    space = spins.enumerate_configs(1)
    model = spins.SpinModel(space, spins.build_k_identity(space), 2.0)
    st = spins.make_state([math.sqrt(0.4), math.sqrt(0.6)], [0.0, 0.0])
    verdict = instability.det_m(st, model)
    x = 0.8 / 1.7 + 1.2 / 1.3
    want = (1.7 * 1.3) ** 2 * (1.0 - x)
    assert verdict.det_closed == pytest.approx(want, rel=1e-12)
    assert verdict.checks["det_composed_lu"] == pytest.approx(want, rel=1e-10)


def test_closed_form_matches_composed_lu():
    model = _default_model(w=3.1)
    checked = 0
    for seed in range(250):
        st = spins.random_state(model.space, 7000 + seed)
        p = instability.nonlinear_pieces(st, model)
        try:
            x, y, z = instability.xyz_of(p)
        except linalg.SingularMatrixError:
            continue
        if abs(1.0 - z) <= 1e-6:
            continue
        verdict = instability.det_m(st, model)
        assert verdict.det_closed is not None
        assert verdict.checks["closed_vs_composed_rel"] <= 1e-8
        checked += 1
    assert checked >= 200


def test_spectrum_consistency_when_unstable():
    space = spins.enumerate_configs(3)
    model = spins.SpinModel(space, spins.build_k_flip_graph(space), 0.8124)
    verdict = instability.det_m(_beta_state(space), model)
    assert verdict.holds
    assert verdict.checks["has_positive_real_part"]
    assert verdict.checks["has_negative_real_part"]
    # trace M = 0 shows up as a balanced spectrum
    tot = verdict.spectrum.sum()
    scale = max(1.0, float(np.abs(verdict.spectrum).max()))
    assert abs(tot.real) <= 1e-8 * scale
    assert abs(tot.imag) <= 1e-8 * scale
    assert len(verdict.spectrum) == 2 * space.size


# ------------------------------------------------- sufficiency bundles


def test_sufficiency_zero_w_all_off():
    model = _default_model(w=0.0)
    rep = instability.sufficiency_report(
        instability.nonlinear_pieces(spins.random_state(model.space, 9), model)
    )
    assert rep["x"] == 0.0 and rep["y"] == 0.0 and rep["z"] == 0.0
    assert rep["orientation"] == "top"
    assert not rep["cor21"]
    assert not rep["theorem2_bundle"]
    assert not rep["sufficient_bundle_satisfied"]
    assert not rep["cor23_necessary_x_plus_z_gt_1"]
    assert rep["e_positive"]


def test_sufficiency_bundle_on_at_large_w():
    # beta state with the flip-graph coupling turns Cor 2.1 on by w ~ 4
    space = spins.enumerate_configs(3)
    model = spins.SpinModel(space, spins.build_k_flip_graph(space), 4.0618)
    rep = instability.sufficiency_report(
        instability.nonlinear_pieces(_beta_state(space), model)
    )
    assert rep["e_positive"]
    assert rep["top1_z_lt_1"]
    assert rep["x"] > 1.0
    assert rep["cor21"]
    assert rep["theorem2_bundle"]
    assert rep["sufficient_bundle_satisfied"]
    assert rep["cor23_necessary_x_plus_z_gt_1"]
    assert rep["lemma1_implied_z_lt_1"]
    assert rep["lemma2_implied_x_gt_1"]
    verdict = instability.det_m(_beta_state(space), model)
    assert verdict.holds
    assert verdict.checks["sign_agreement_direct_vs_composed"]


def test_bundle_forces_negative_composed_det():
    # property: any Cor 2.1 instance has composed-block det < 0
    space = spins.enumerate_configs(3)
    k = spins.build_k_flip_graph(space)
    rng = Rng(20260816)
    kept = 0
    tries = 0
    while kept < 200 and tries < 5000:
        tries += 1
        st = spins.random_state(space, 40000 + tries)
        model = spins.SpinModel(space, k, rng.uniform_in(0.5, 8.0))
        p = instability.nonlinear_pieces(st, model)
        rep = instability.sufficiency_report(p)
        if not rep.get("cor21", False):
            continue
        kept += 1
        verdict = instability.det_m(st, model)
        assert verdict.checks["det_composed_lu"] < 0.0, (
            f"cor21 held but composed det = {verdict.checks['det_composed_lu']:.3e} "
            f"(S = {p.s_value:.3f}, w = {model.w:.3f})"
        )
        # small spin pins the Hessian route too: f > 0 elementwise gives
        # E <= K + 2 diag(f) <= 2E, so x only grows on the direct side
        if abs(p.s_value) < 0.25:
            assert verdict.holds, (
                f"cor21 with |S| < 1/4 but det_direct = {verdict.det_direct:.3e}"
            )
    assert kept == 200, f"sampler starved: {kept} keeps in {tries} tries"


def test_bundle_small_spin_parity_states():
    # flip-odd Q plus flip-even P keeps S = 0 exactly, the clean regime
    space = spins.enumerate_configs(3)
    k = spins.build_k_flip_graph(space)
    flip = space.flip_permutation()
    rng = Rng(77)
    kept = 0
    tries = 0
    while kept < 120 and tries < 4000:
        tries += 1
        raw = spins.random_state(space, 90000 + tries)
        q = raw.q - raw.q[flip]
        p = raw.p + raw.p[flip]
        nrm = math.sqrt(float(q @ q + p @ p))
        if nrm < 1e-6:
            continue
        st = spins.make_state(q / nrm, p / nrm)
        model = spins.SpinModel(space, k, rng.uniform_in(0.5, 8.0))
        rep = instability.sufficiency_report(instability.nonlinear_pieces(st, model))
        if not rep.get("cor21", False):
            continue
        kept += 1
        verdict = instability.det_m(st, model)
        assert verdict.holds
        assert verdict.checks["det_composed_lu"] < 0.0
    assert kept == 120, f"parity sampler starved: {kept} keeps in {tries} tries"


# ------------------------------------------------------- asymptotics


def test_asymptotic_values_beta_state():
    space = spins.enumerate_configs(3)
    for beta in (0.1, 0.3, 0.5):
        st = _beta_state(space, beta)
        q = instability.asymptotic_xyz(st, space)
        # S = 0 for this family, so the ratio weights are all 1
        assert q.s_value == pytest.approx(0.0, abs=1e-14)
        assert q.x_inf == pytest.approx(4.0 * (1.0 - beta), abs=1e-12)
        assert q.z_inf == pytest.approx(4.0 * beta, abs=1e-12)
        assert q.y_inf == pytest.approx(0.0, abs=1e-12)
        assert math.isnan(q.x)  # no model given


def test_asymptotic_hand_weights():
    # q=1, Q=(sqrt .4, sqrt .6), P=0: S=0.1, weights 5/7 and 5/3
    space = spins.enumerate_configs(1)
    st = spins.make_state([math.sqrt(0.4), math.sqrt(0.6)], [0.0, 0.0])
    q = instability.asymptotic_xyz(st, space)
    assert q.x_inf == pytest.approx(4.0 * (0.4 * 5 / 7 + 0.6 * 5 / 3), rel=1e-13)
    assert q.y_inf == 0.0 and q.z_inf == 0.0


def test_asymptotic_finite_w_converges_to_limit():
    space = spins.enumerate_configs(3)
    st = _beta_state(space)
    k = spins.build_k_flip_graph(space)
    errs = []
    for w in (1e2, 1e4):
        q = instability.asymptotic_xyz(st, space, spins.SpinModel(space, k, w))
        errs.append(abs(q.x - q.x_inf) + abs(q.z - q.z_inf) + abs(q.y - q.y_inf))
    assert errs[1] < errs[0] * 0.1
    assert errs[1] <= 1e-2


def test_asymptotic_rejects_large_spin():
    space = spins.enumerate_configs(1)
    st = spins.make_state([1.0, 0.0], [0.0, 0.0])  # S = -1/2
    with pytest.raises(ValidationError):
        instability.asymptotic_xyz(st, space)


def test_prediction_beta_point_one():
    space = spins.enumerate_configs(3)
    rep = instability.theorem3_predict(_beta_state(space, 0.1), space)
    assert rep["s_lt_quarter"]
    assert rep["x_inf"] == pytest.approx(3.6, abs=1e-12)
    assert rep["z_inf"] == pytest.approx(0.4, abs=1e-12)
    assert rep["y_inf"] == pytest.approx(0.0, abs=1e-12)
    assert rep["product_form"] == pytest.approx(1.56, abs=1e-12)
    assert rep["z_inf_lt_1"] and rep["x_inf_gt_1"]
    assert rep["predicted"]


def test_prediction_turns_off_at_heavy_momentum():
    space = spins.enumerate_configs(3)
    rep = instability.theorem3_predict(_beta_state(space, 0.3), space)
    assert rep["z_inf"] == pytest.approx(1.2, abs=1e-12)
    assert not rep["z_inf_lt_1"]
    assert not rep["predicted"]
    rep = instability.theorem3_predict(_beta_state(space, 0.5), space)
    assert rep["z_inf"] == pytest.approx(2.0, abs=1e-12)
    assert not rep["predicted"]


def test_prediction_requires_unit_norm():
    space = spins.enumerate_configs(3)
    st = _beta_state(space)
    with pytest.raises(ValidationError):
        instability.theorem3_predict(spins.make_state(2.0 * st.q, 2.0 * st.p), space)


def test_prediction_reports_large_spin_without_raising():
    space = spins.enumerate_configs(1)
    rep = instability.theorem3_predict(
        spins.make_state([1.0, 0.0], [0.0, 0.0]), space
    )
    assert not rep["s_lt_quarter"]
    assert not rep["predicted"]
    assert math.isnan(rep["x_inf"])


# ----------------------------------------------------- threshold scan


def test_wstar_bracketing_beta_state():
    space = spins.enumerate_configs(3)
    model = spins.SpinModel(space, spins.build_k_flip_graph(space), 0.0)
    st = _beta_state(space)
    res = instability.wstar_search(st, model, w_max=2.0, tol=1e-4, grid_points=200)
    assert res.w_star is not None
    assert 0.3 < res.w_star < 0.5
    lo = instability.det_m(st, model.with_w(res.w_star - 10 * res.tol))
    hi = instability.det_m(st, model.with_w(res.w_star + 10 * res.tol))
    assert lo.det_direct > 0.0 > hi.det_direct
    assert res.crossings == [res.w_star]


def test_wstar_det_negative_at_twice_threshold():
    space = spins.enumerate_configs(3)
    model = spins.SpinModel(space, spins.build_k_flip_graph(space), 0.0)
    st = _beta_state(space)
    res = instability.wstar_search(st, model, w_max=2.0)
    verdict = instability.det_m(st, model.with_w(2.0 * res.w_star))
    assert verdict.holds


def test_wstar_none_below_threshold():
    space = spins.enumerate_configs(3)
    model = spins.SpinModel(space, spins.build_k_flip_graph(space), 0.0)
    res = instability.wstar_search(_beta_state(space), model, w_max=0.1)
    assert res.w_star is None
    assert res.crossings == []


def test_wstar_deterministic_and_validated():
    space = spins.enumerate_configs(3)
    model = spins.SpinModel(space, spins.build_k_flip_graph(space), 0.0)
    st = _beta_state(space)
    a = instability.wstar_search(st, model, w_max=1.0, grid_points=60)
    b = instability.wstar_search(st, model, w_max=1.0, grid_points=60)
    assert a.w_star == b.w_star and a.crossings == b.crossings
    with pytest.raises(ValidationError):
        instability.wstar_search(st, model, w_max=0.0)
    with pytest.raises(ValidationError):
        instability.wstar_search(st, model, w_max=1.0, grid_points=1)


# ----------------------------------------------------- det time series


def test_dci_series_constant_in_linear_case():
    space = spins.enumerate_configs(3)
    k = spins.build_k_flip_graph(space)
    model = spins.SpinModel(space, k, 0.0)
    cfg = dynamics.IntegratorConfig(dt=1e-3, steps=50, record_stride=10)
    times, detm = instability.dci_time_series(_beta_state(space), model, cfg)
    assert len(times) == 6 and len(detm) == 6
    want = linalg.lu_determinant(k) ** 2
    assert np.abs(detm - want).max() <= 1e-9 * abs(want)


def test_dci_series_stride_equal_steps():
    space = spins.enumerate_configs(3)
    model = spins.SpinModel(space, spins.build_k_flip_graph(space), 0.8124)
    cfg = dynamics.IntegratorConfig(dt=1e-3, steps=40, record_stride=40)
    times, detm = instability.dci_time_series(_beta_state(space), model, cfg)
    assert len(times) == 2
    assert times[0] == 0.0
    assert times[1] == pytest.approx(0.04)
    assert detm[0] < 0.0  # starts beyond the threshold
