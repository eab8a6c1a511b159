import numpy as np
import pytest

from gridforge.certify import NotHurwitzError, osp_freq_test, osp_grid_margin
from gridforge.inverter import ClosedLoopBus
from gridforge.lmi import lmi_block, lmi_feasibility, verify_certificate
from helpers import random_loop, scalar_lag


def test_scalar_lag_block_by_hand():
    # x' = -x + w, z = x, P = 1, rho = 0.5: [[-2 + 1, 1 - 1], [0, 0]]
    M = lmi_block(scalar_lag(), np.eye(1), 0.5)
    np.testing.assert_allclose(M, [[-1.0, 0.0], [0.0, 0.0]])
    ok, lmax, pmin = verify_certificate(scalar_lag(), np.eye(1), 0.5)
    assert ok and lmax == pytest.approx(0.0) and pmin == 1.0


def test_scalar_lag_feasible_at_half():
    res = lmi_feasibility(scalar_lag(), 0.5)
    assert res.status == "feasible"
    P = res.certificate.P
    assert P[0, 0] > 0
    assert verify_certificate(scalar_lag(), P, 0.5)[0]


def test_scalar_lag_not_feasible_above_index():
    assert lmi_feasibility(scalar_lag(), 1.05).status != "feasible"


def test_unsymmetric_or_indefinite_p_rejected():
    clb = scalar_lag()
    assert not verify_certificate(clb, -np.eye(1), 0.5)[0]
    P = np.array([[1.0, 0.1], [0.0, 1.0]])
    A2 = ClosedLoopBus(-np.eye(2), np.eye(2), np.eye(2), np.zeros((2, 2)))
    assert not verify_certificate(A2, P, 0.5)[0]


def test_non_hurwitz_rejected():
    clb = ClosedLoopBus(np.array([[0.5]]), np.array([[1.0]]), np.array([[1.0]]),
                        np.zeros((1, 1)))
    with pytest.raises(NotHurwitzError):
        lmi_feasibility(clb, 0.1)


def test_static_identity():
    clb = ClosedLoopBus(np.zeros((0, 0)), np.zeros((0, 2)), np.zeros((2, 0)), np.eye(2))
    assert lmi_feasibility(clb, 1.0).status == "feasible"
    assert lmi_feasibility(clb, 1.01).status == "infeasible"


def test_reference_gains_feasible_below_index(reference_clb):
    res = lmi_feasibility(reference_clb, 0.399)
    assert res.status == "feasible"
    c = res.certificate
    assert c.p_min_eig > 0
    np.testing.assert_allclose(c.P, c.P.T, atol=1e-10 * np.abs(c.P).max())
    assert verify_certificate(reference_clb, c.P, 0.399)[0]


def test_reference_gains_rho_two_rejected_by_both_paths(reference_clb):
    assert lmi_feasibility(reference_clb, 2.0).status in ("infeasible", "indeterminate")
    assert not osp_freq_test(reference_clb, 2.0)


def test_kyp_agreement_sample():
    rng = np.random.default_rng(7)
    checked = 0
    for k in range(24):
        clb = random_loop(rng, k % 3)
        m0, _ = osp_grid_margin(clb, 0.0)
        rho = max(m0, 0.0) * rng.uniform(0.5, 1.5) if m0 > 0 else rng.uniform(0.0, 0.5)
        m, _ = osp_grid_margin(clb, rho)
        if abs(m) <= 1e-6:
            continue
        res = lmi_feasibility(clb, rho)
        if res.status == "indeterminate":
            continue
        assert (res.status == "feasible") == osp_freq_test(clb, rho), k
        checked += 1
    assert checked >= 20
