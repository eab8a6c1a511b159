import dataclasses

import numpy as np
import pytest

from gridforge.dqframe import instantaneous_power
from gridforge.inverter import (ControllerGains, VirtualImpedance, close_loop,
                                isolated_equilibrium, reference_gains)
from gridforge.network import Line, build_network, line_dissipation, line_energy
from gridforge.sim import (Broadcast, DivergenceError, InverterBus, LoadBus, LoadSwitch, MissingCertificateError, PassiveBus, PlugIn, Scenario,
                           build_closed_system, exact_step, lyapunov_trace, power_trace,
                           rk4_propagator, run_scenario, step)
from helpers import (V_REF, case_study_scenario, certified_inverter,
                     default_plant, plug_and_play_scenario)

Z = VirtualImpedance().Z


def two_bus(load=None, t_end=1.0, **kw):
    net = build_network(2, [Line.lumped(1, 2, 0.1, 0.6e-3)])
    return Scenario(net, [certified_inverter(), load or LoadBus(3000, 500)], t_end=t_end, **kw)


def black_start(sc):
    sc.x0 = np.zeros(build_closed_system(sc).n_states)
    return sc


@pytest.fixture(scope="module")
def case_run():
    return run_scenario(case_study_scenario(t_end=3.5))


# --- assembly ------------------------------------------------------------

def test_two_bus_dimension():
    net = build_network(2, [Line.lumped(1, 2, 0.1, 0.6e-3)])
    sys_ = build_closed_system(Scenario(net, [certified_inverter(), PassiveBus()]))
    assert sys_.n_states == 6 + 2 + 2
    assert sys_.bus_slice(2) == slice(8, 10)


def test_case_study_builds(reference_inverter):
    sys_ = build_closed_system(case_study_scenario())
    # 3 lumped lines; each load bus has a capacitor, a static and a switched RL branch
    assert sys_.n_line == 6
    assert sys_.n_states == 6 + 6 + 6 + 6 + 6
    assert sys_.block_name(0) == "line network"
    assert sys_.block_name(sys_.offsets[2]) == "bus 3"
    # the switched-off branch at bus 2 is inert
    assert sys_.live.sum() == sys_.n_states - 2


def test_load_bus_derived_quantities():
    b = LoadBus(3000, 500)
    assert b.g_load() == pytest.approx(3000 / 380.9**2)
    assert b.n_states == 4
    assert LoadBus(3000).n_states == 2
    with pytest.raises(ValueError):
        LoadBus(-1)
    with pytest.raises(ValueError):
        LoadBus(3000, c_shunt=0)


def test_bad_event_references():
    net = build_network(2, [Line.lumped(1, 2, 0.1, 0.6e-3)])
    buses = [certified_inverter(), LoadBus(3000, 500)]
    with pytest.raises(ValueError, match="non-load bus 1"):
        build_closed_system(Scenario(net, buses, [LoadSwitch(0.1, 1, 0, True)]))
    with pytest.raises(ValueError, match="no element"):
        build_closed_system(Scenario(net, buses, [LoadSwitch(0.1, 2, 0, True)]))
    with pytest.raises(ValueError, match="non-inverter"):
        build_closed_system(Scenario(net, buses, [Broadcast(0.1, {2: (1.0, 0.0)})]))
    with pytest.raises(ValueError, match="unknown bus 7"):
        build_closed_system(Scenario(net, buses, [PlugIn(0.1, 7, certified_inverter())]))


@pytest.mark.parametrize("kw", [dict(dt=0), dict(stride=0), dict(t_end=-1)])
def test_scenario_rejects_bad_settings(kw):
    with pytest.raises(ValueError):
        two_bus(**kw)


def test_scenario_rejects_event_order():
    with pytest.raises(ValueError, match="negative"):
        two_bus(events=[Broadcast(-0.1, {1: V_REF})])
    with pytest.raises(ValueError, match="strictly ordered"):
        two_bus(events=[Broadcast(0.2, {1: V_REF}), Broadcast(0.2, {1: V_REF})])
    with pytest.raises(ValueError, match="after t_end"):
        two_bus(events=[Broadcast(2.0, {1: V_REF})])


def test_uncertified_inverter_warns():
    clb = default_plant()
    bus = InverterBus(close_loop(clb, reference_gains()), V_REF)
    net = build_network(2, [Line.lumped(1, 2, 0.1, 0.6e-3)])
    with pytest.warns(RuntimeWarning, match="certificate"):
        build_closed_system(Scenario(net, [bus, PassiveBus()]))


def test_plug_in_bookkeeping(reference_inverter):
    ts = run_scenario(plug_and_play_scenario(t_plug=0.05, t_end=0.06))
    before, after = ts.segments
    s0, s1 = before.system, after.system
    assert s1.network.bus_count == 5
    # connector line adds one edge; the new bus adds six controller states
    assert s1.n_states == s0.n_states + 2 + 6
    x_old, x_new = before.X[-1], after.X[0]
    ne = 2 * s0.network.n_edges
    np.testing.assert_array_equal(x_new[:ne], x_old[:ne])
    assert np.all(x_new[ne:ne + 2] == 0)
    np.testing.assert_array_equal(x_new[s1.n_line:s1.offsets[-2]], x_old[s0.n_line:])
    np.testing.assert_allclose(x_new[s1.bus_slice(5)],
                               isolated_equilibrium(reference_inverter.clb, V_REF))
    assert ts.event_log[0]["new_bus"] == 5
    assert np.isnan(ts.v[0, 4]).all() and np.isfinite(ts.v[-1, 4]).all()


# --- stepping ------------------------------------------------------------

def test_equilibrium_is_fixed_point():
    sys_ = build_closed_system(case_study_scenario())
    x = sys_.equilibrium()
    y = step(sys_, x, 1e-5)
    assert np.linalg.norm(y - x) <= 1e-10 * np.linalg.norm(x)


def test_step_matches_propagator_and_exponential():
    sys_ = build_closed_system(two_bus())
    rng = np.random.default_rng(0)
    x = sys_.equilibrium() + rng.standard_normal(sys_.n_states)
    Phi, gam = rk4_propagator(sys_.A, sys_.b, 1e-5)
    y = step(sys_, x, 1e-5)
    np.testing.assert_allclose(Phi @ x + gam, y, rtol=1e-12, atol=1e-9)
    z = exact_step(sys_, x, 1e-5)
    assert np.linalg.norm(y - z) <= 1e-8 * np.linalg.norm(z)


def test_step_flags_nonfinite_state_by_block():
    sys_ = build_closed_system(two_bus())
    x = sys_.equilibrium()
    x[sys_.offsets[1]] = np.nan
    with pytest.raises(DivergenceError, match="bus 2"):
        step(sys_, x, 1e-5, t=0.25)


def test_check_step_guard_warns():
    sys_ = build_closed_system(two_bus())
    with pytest.warns(RuntimeWarning, match="RK4 guard"):
        sys_.check_step(1e-2)
    assert sys_.check_step(1e-5) < 2.5


def test_unstable_inverter_diverges_with_timestamp():
    g = reference_gains()
    bad = InverterBus(close_loop(default_plant(), ControllerGains(-g.K, g.M)), V_REF)
    net = build_network(2, [Line.lumped(1, 2, 0.1, 0.6e-3)])
    sc = Scenario(net, [bad, LoadBus(3000, 500)], t_end=2.0)
    with pytest.warns(RuntimeWarning):
        with pytest.raises(DivergenceError) as err:
            run_scenario(black_start(sc))
    assert 0 < err.value.t <= 2.0
    assert "bus 1" in str(err.value) or "line" in str(err.value)


def test_single_inverter_droop_law():
    ts = run_scenario(black_start(two_bus(t_end=2.0)))
    v, i = ts.v[-1, 0], ts.i[-1, 0]
    resid = v - (np.array(V_REF) - Z @ i)
    assert np.linalg.norm(resid) <= 1e-4 * np.linalg.norm(v)


def test_halving_dt_converges():
    a = run_scenario(black_start(two_bus(t_end=1.0, dt=1e-5)))
    b = run_scenario(black_start(two_bus(t_end=1.0, dt=5e-6)))
    xa, xb = a.final_state, b.final_state
    assert np.linalg.norm(xa - xb) <= 1e-6 * np.linalg.norm(xb)


def test_no_event_run_is_constant():
    ts = run_scenario(case_study_scenario(t_end=0.2))
    X = ts.segments[0].X
    assert np.abs(X - X[0]).max() <= 1e-9 * np.abs(X[0]).max()


def test_records_follow_stride():
    ts = run_scenario(two_bus(t_end=0.0105))
    t = ts.t
    assert t[0] == 0 and t[-1] == pytest.approx(0.0105)
    np.testing.assert_allclose(np.diff(t[:-1]), 1e-3)
    assert np.all(np.diff(t) >= 0)


# --- power and energy ----------------------------------------------------

def test_post_step_power_split(case_run):
    sys_ = case_run.segments[1].system
    V, I = sys_.bus_outputs(sys_.equilibrium())
    p, _ = instantaneous_power(V[0], I[0])
    assert p[0] > 0 and p[3] > 0
    assert abs(p[0] - p[3]) <= 0.25 * max(p[0], p[3])


def test_static_load_power_at_nominal_voltage():
    base = two_bus()
    sys_ = build_closed_system(base)
    V, _ = sys_.bus_outputs(sys_.equilibrium())
    # the system is affine in the setpoint: rescale so the load sees nominal voltage
    scale = 380.9 / np.linalg.norm(V[0, 1])
    inv = dataclasses.replace(certified_inverter(), v_ref=(380.9 * scale, 0.0))
    sys_ = build_closed_system(dataclasses.replace(base, buses=[inv, LoadBus(3000, 500)]))
    V, I = sys_.bus_outputs(sys_.equilibrium())
    assert np.linalg.norm(V[0, 1]) == pytest.approx(380.9, rel=1e-9)
    p, _ = instantaneous_power(V[0], I[0])
    assert -p[1] == pytest.approx(3000, rel=0.02)


def test_zero_current_bus_has_no_power():
    p, q = instantaneous_power(np.array([[380.0, 5.0]]), np.zeros((1, 2)))
    assert p[0] == 0 and q[0] == 0


def test_losses_nonnegative_and_match_resistances(case_run):
    for seg in case_run.segments:
        sys_ = seg.system
        x = sys_.equilibrium()
        V, I = sys_.bus_outputs(x)
        p, _ = instantaneous_power(V[0], I[0])
        loss = line_dissipation(sys_.network, x[:sys_.n_line])
        assert p.sum() >= 0
        assert p.sum() == pytest.approx(loss, rel=1e-8)


def test_power_trace_shape(case_run):
    p, q = power_trace(case_run)
    assert p.shape == q.shape == (len(case_run.t), 4)
    assert np.all(p[:, 1] < 0) and np.all(p[:, 0] > 0)


# --- Lyapunov ------------------------------------------------------------

def test_lyapunov_zero_at_equilibrium():
    lt = lyapunov_trace(run_scenario(case_study_scenario(t_end=0.2)))
    assert lt.monotone
    assert np.abs(lt.V).max() <= 1e-12


def test_lyapunov_case_study_monotone_with_jumps(case_run):
    lt = lyapunov_trace(case_run)
    assert lt.monotone, lt.worst_increase
    first = lt.segment == 1
    assert lt.V[first][0] > 1.0
    assert lt.V[first][-1] < 1e-3 * lt.V[first][0]


def test_lyapunov_requires_certificates():
    net = build_network(2, [Line.lumped(1, 2, 0.1, 0.6e-3)])
    bus = InverterBus(close_loop(default_plant(), reference_gains()), V_REF)
    with pytest.warns(RuntimeWarning):
        ts = run_scenario(Scenario(net, [bus, LoadBus(3000, 500)], t_end=0.01))
    with pytest.raises(MissingCertificateError):
        lyapunov_trace(ts)


def test_lyapunov_discriminates_negated_gains(reference_inverter):
    g = reference_gains()
    bad = InverterBus(close_loop(default_plant(), ControllerGains(-g.K, g.M)), V_REF,
                      reference_inverter.certificate)
    sc = dataclasses.replace(case_study_scenario(t_end=1.2), buses=[
        reference_inverter, *case_study_scenario().buses[1:3], bad])
    with pytest.warns(RuntimeWarning):
        try:
            ts = run_scenario(black_start(sc))
        except DivergenceError:
            return
    assert not lyapunov_trace(ts).monotone


# --- trajectory properties -----------------------------------------------

def test_plug_in_preserves_prior_trajectory_bitwise():
    plain = run_scenario(case_study_scenario(t_end=1.05))
    plugged = run_scenario(dataclasses.replace(
        case_study_scenario(t_end=1.05),
        events=[LoadSwitch(1.0, 2, 0, True), PlugIn(1.02, 4, certified_inverter())]))
    a, b = plain.segments[1], plugged.segments[1]
    keep = a.t <= 1.02
    assert np.array_equal(a.X[keep], b.X)
    assert np.array_equal(plain.segments[0].X, plugged.segments[0].X)


def test_csv_export(tmp_path, case_run):
    path = tmp_path / "ts.csv"
    case_run.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,bus,vd,vq,id,iq,p,q"
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert data.shape == (4 * len(case_run.t), 8)
    assert np.all(np.diff(data[:, 0]) >= 0)
    meta = case_run.metadata("abc")
    assert meta["scenario_hash"] == "abc" and len(meta["events"]) == 2


def _random_scenario(rng, nb):
    lines = []
    for j in range(2, nb + 1):
        lines.append(Line.uniform(int(rng.integers(1, j)), j, int(rng.integers(1, 4)),
                                  rng.uniform(0.05, 0.3), rng.uniform(3e-4, 3e-3),
                                  0.0, rng.uniform(1e-6, 1e-5)))
    net = build_network(nb, lines)
    buses = []
    for j in range(nb):
        if j == 0 or rng.random() < 0.4:
            g = reference_gains()
            K = g.K * (1 + 0.02 * rng.standard_normal(g.K.shape))
            buses.append(certified_inverter(ControllerGains(K, g.M), rho=0.3))
        elif rng.random() < 0.7:
            buses.append(LoadBus(rng.uniform(500, 4000), rng.uniform(0, 800)))
        else:
            buses.append(PassiveBus(c_shunt=rng.uniform(5e-6, 5e-5), g_shunt=rng.uniform(0, 0.01)))
    return Scenario(net, buses, t_end=1.2, dt=1e-5, stride=200)


@pytest.mark.parametrize("seed", range(4))
def test_random_certified_networks_converge(seed):
    rng = np.random.default_rng(seed)
    sc = black_start(_random_scenario(rng, int(rng.integers(2, 7))))
    sys_ = build_closed_system(sc)
    assert np.linalg.eigvals(sys_.A[np.ix_(sys_.live, sys_.live)]).real.max() < 0
    ts = run_scenario(sc)
    dn = ts.derivative_norm()
    assert dn[-1] < 1e-2 * dn[:10].max()
    lt = lyapunov_trace(ts)
    assert lt.monotone, lt.worst_increase


def test_line_dissipation_identity_along_run():
    seg = run_scenario(dataclasses.replace(case_study_scenario(t_end=1.05), stride=10)).segments[1]
    sys_ = seg.system
    nl = sys_.n_line
    x_star = seg.equilibrium()
    dX = seg.X[:, :nl] - x_star[:nl]
    # energy rate from the composite vector field evaluated on the recorded states
    w = 2 * line_energy(sys_.network, np.eye(nl))
    dE = np.sum(w * dX * (seg.X @ sys_.A.T + sys_.b)[:, :nl], axis=1)
    V, I = sys_.bus_outputs(seg.X)
    V_star, I_star = sys_.bus_outputs(x_star)
    supply = np.sum((V - V_star) * (I - I_star), axis=(1, 2))
    diss = line_dissipation(sys_.network, seg.X[:, :nl], x_star[:nl])
    scale = np.abs(dE) + diss + np.abs(supply)
    assert np.max(np.abs(dE + diss - supply) / scale) < 1e-6
