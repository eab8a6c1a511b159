import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridforge.certify import osp_freq_test
from gridforge.dqframe import SyncFrame
from gridforge.inverter import (ClosedLoopBus, ControllerGains, InverterParams, VirtualImpedance,
                                assemble_plant, augment, close_loop, isolated_equilibrium,
                                reference_gains)

FRAME = SyncFrame()


def test_plant_entries():
    fp = assemble_plant(InverterParams(), FRAME)
    A = fp.A
    assert A[0, 0] == pytest.approx(-12.5)
    assert A[0, 2] == pytest.approx(-125.0)
    assert A[2, 0] == pytest.approx(20000.0)
    assert A[2, 2] == pytest.approx(-57.1429, abs=1e-4)
    assert A[0, 1] == pytest.approx(314.159, abs=1e-3)
    np.testing.assert_allclose(fp.B_u, np.vstack([125 * np.eye(2), np.zeros((2, 2))]))
    x = np.arange(1.0, 5.0)
    np.testing.assert_array_equal(fp.C @ x, [3.0, 4.0])


@pytest.mark.parametrize("field", ["r_f", "l_f", "g_f", "c_f"])
def test_params_must_be_positive(field):
    with pytest.raises(ValueError):
        InverterParams(**{field: 0.0})


def test_virtual_impedance_matrix():
    np.testing.assert_array_equal(VirtualImpedance(0.5, 1.0).Z, [[0.5, 1.0], [-1.0, 0.5]])


def test_augmented_structure(plant):
    fp = assemble_plant(InverterParams(), FRAME)
    np.testing.assert_array_equal(plant.A[:4, :4], fp.A)
    np.testing.assert_array_equal(plant.A[4:, 2:4], np.eye(2))
    np.testing.assert_array_equal(plant.B_w[4:], -VirtualImpedance().Z)
    np.testing.assert_array_equal(plant.B_ref[4:], -np.eye(2))
    np.testing.assert_array_equal(plant.C, np.hstack([np.zeros((2, 2)), np.eye(2), np.zeros((2, 2))]))
    assert not plant.D_u.any() and not plant.D_w.any()


def test_zero_virtual_impedance_gives_pure_integrator():
    aug = augment(assemble_plant(InverterParams(), FRAME), VirtualImpedance(0.0, 0.0))
    assert not aug.B_w[4:].any()


def test_droop_identity_example():
    Z = VirtualImpedance().Z
    v = np.array([381.0, 0.0]) - Z @ np.array([10.0, 0.0])
    np.testing.assert_allclose(v, [376.0, 10.0])


def test_zero_gains_leave_integrators_unstable(plant):
    clb = close_loop(plant, ControllerGains.zeros())
    np.testing.assert_array_equal(clb.A, plant.A)
    ev = np.linalg.eigvals(clb.A)
    assert np.sum(np.abs(ev) < 1e-9) == 2


def test_reference_gains_meet_eigenvalue_spec(reference_clb):
    assert np.linalg.eigvals(reference_clb.A).real.max() <= -5.0


def test_reconstruction(plant, reference_clb):
    g = reference_gains()
    np.testing.assert_allclose(reference_clb.A + plant.B_u @ g.K, plant.A, atol=1e-12)
    np.testing.assert_allclose(reference_clb.B + plant.B_u @ g.M, plant.B_w, atol=1e-12)
    np.testing.assert_array_equal(reference_clb.C, plant.C)
    assert not reference_clb.D.any()


def test_gain_shape_checked(plant):
    with pytest.raises(ValueError):
        ControllerGains(np.zeros((2, 4)), np.zeros((2, 2)))


def test_filter_alone_is_passive():
    fp = assemble_plant(InverterParams(), FRAME)
    clb = ClosedLoopBus(fp.A, fp.B_w, fp.C, np.zeros((2, 2)))
    assert osp_freq_test(clb, 0.0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 11), st.floats(-5, 5))
def test_closed_loop_affine_in_gains(idx, delta):
    plant = augment(assemble_plant(InverterParams(), FRAME), VirtualImpedance())
    g = reference_gains()
    K2 = g.K.copy()
    K2.flat[idx] += delta
    dA = close_loop(plant, ControllerGains(K2, g.M)).A - close_loop(plant, g).A
    E = np.zeros((2, 6))
    E.flat[idx] = 1.0
    np.testing.assert_allclose(dA, -plant.B_u @ E * delta, atol=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.floats(300, 420), st.floats(-20, 20), st.floats(-30, 30), st.floats(-30, 30))
def test_equilibrium_droop_law(vd, vq, wd, wq):
    clb = close_loop(augment(assemble_plant(InverterParams(), FRAME), VirtualImpedance()),
                     reference_gains())
    v_ref = np.array([vd, vq])
    w = np.array([wd, wq])
    x = isolated_equilibrium(clb, v_ref, w)
    v = clb.C @ x
    expected = v_ref - VirtualImpedance().Z @ (-w)
    assert np.linalg.norm(v - expected) <= 1e-6 * np.linalg.norm(v)
