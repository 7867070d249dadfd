"""Integrator: history buffer, delay handling, RK4 accuracy, error integral."""

import numpy as np
import pytest
from scipy.linalg import expm

from cubicobs.cert import cubic_gain
from cubicobs.exprlang import SignalDims, parse
from cubicobs.model import ConfigError, ObserverParams, PlantModel, example_system
from cubicobs.sim import (
    DEFAULT_INPUT_SIGNAL,
    HistoryBuffer,
    SimConfig,
    SimulationError,
    compare_cubic_linear,
    cumulative_error,
    input_signals,
    simulate,
    write_trajectory_csv,
)


def example_cfg(h=0.01, t_end=2.0, **overrides):
    base = dict(
        h=h,
        t_end=t_end,
        x0=np.zeros(2),
        xhat0=np.array([-5.0, -5.0]),
        input_signal=input_signals(DEFAULT_INPUT_SIGNAL, 1),
    )
    base.update(overrides)
    return SimConfig(**base)


# --- history buffer -------------------------------------------------------

def test_buffer_push_sample_round():
    buf = HistoryBuffer(1, 3, np.array([7.0]))
    for k in range(6):
        buf.push(k, np.array([float(k)]))
    assert buf.sample(5)[0] == 5.0
    assert buf.sample(2)[0] == 2.0


def test_buffer_enforces_order():
    buf = HistoryBuffer(1, 2, np.zeros(1))
    buf.push(0, np.zeros(1))
    with pytest.raises(ValueError, match="in order"):
        buf.push(2, np.zeros(1))


def test_buffer_prehistory_policies():
    hold = HistoryBuffer(2, 1, np.array([3.0, 4.0]), "hold")
    assert np.array_equal(hold.sample(-5), [3.0, 4.0])
    zero = HistoryBuffer(2, 1, np.array([3.0, 4.0]), "zero")
    assert np.array_equal(zero.sample(-1), [0.0, 0.0])
    with pytest.raises(ValueError, match="policy"):
        HistoryBuffer(1, 1, np.zeros(1), "mirror")


def test_buffer_evicts_beyond_depth():
    buf = HistoryBuffer(1, 2, np.zeros(1))
    for k in range(5):
        buf.push(k, np.array([float(k)]))
    assert buf.sample(2)[0] == 2.0
    with pytest.raises(ValueError, match="window"):
        buf.sample(1)


def test_buffer_linear_interpolation():
    buf = HistoryBuffer(1, 2, np.zeros(1))
    buf.push(0, np.array([0.0]))
    buf.push(1, np.array([10.0]))
    assert buf.value_at(0.5)[0] == 5.0
    assert buf.value_at(0.25)[0] == 2.5
    # grid-adjacent queries snap to the stored sample
    assert buf.value_at(1.0 - 1e-12)[0] == 10.0
    assert buf.value_at(1e-12)[0] == 0.0


# --- configuration errors -------------------------------------------------

def test_simconfig_validation():
    sig = input_signals("sin(t)", 1)
    with pytest.raises(ConfigError, match="h"):
        SimConfig(h=0.0, t_end=1.0, x0=[0.0], xhat0=[0.0], input_signal=sig)
    with pytest.raises(ConfigError, match="t_end"):
        SimConfig(h=0.1, t_end=0.05, x0=[0.0], xhat0=[0.0], input_signal=sig)
    with pytest.raises(ConfigError, match="prehistory"):
        SimConfig(h=0.1, t_end=1.0, x0=[0.0], xhat0=[0.0], input_signal=sig,
                  prehistory="mirror")


def test_delay_must_divide_step():
    ex = example_system()
    with pytest.raises(ConfigError, match="multiple"):
        simulate(ex.nominal, ex.nominal, ex.observer, example_cfg(h=0.3))


def test_state_dimension_checks():
    ex = example_system()
    with pytest.raises(ConfigError, match="x0"):
        simulate(ex.nominal, ex.nominal, ex.observer, example_cfg(x0=np.zeros(3)))
    with pytest.raises(ConfigError, match="input_signal"):
        simulate(ex.nominal, ex.nominal, ex.observer,
                 example_cfg(input_signal=input_signals("sin(t)", 2)))


def test_invalid_model_is_rejected():
    ex = example_system()
    bad = ObserverParams(G=np.eye(3), J=ex.observer.J, E=ex.observer.E,
                         N=ex.observer.N, theta=ex.observer.theta)
    with pytest.raises(ValueError, match="validation"):
        simulate(ex.nominal, ex.nominal, bad, example_cfg())


# --- exact small cases ----------------------------------------------------

def static_pair():
    """x' = 0 with x(0) = 1 against a dead observer: e == 1 forever."""
    dims = SignalDims(n=1, n_u=0, n_y=1)
    zero = parse("0", dims)
    plant = PlantModel(A=[[0.0]], C=[[1.0]], D=[[0.0]], n_u=0,
                       f_u=(zero,), f_g=(zero,), f_L=(zero,))
    obs = ObserverParams(G=[[0.0]], J=[[0.0]], E=[[0.0]], N=[[0.0]],
                         theta=[[0.0]])
    return plant, obs


def test_constant_error_integral_exact():
    plant, obs = static_pair()
    cfg = SimConfig(h=0.5, t_end=2.0, x0=[1.0], xhat0=[0.0], input_signal=())
    res = simulate(plant, plant, obs, cfg)
    assert np.array_equal(res.x.ravel(), np.ones(5))
    assert np.array_equal(res.xhat.ravel(), np.zeros(5))
    # trapezoid of a constant 1 over [0, 2]
    assert res.jo[-1] == 2.0
    assert np.all(np.diff(res.jo) >= 0)


def test_cumulative_error_matches_direct_trapezoid():
    ex = example_system()
    res = simulate(ex.nominal, ex.nominal, ex.observer, example_cfg(t_end=1.0))
    g = np.sum((res.x - res.xhat) ** 2, axis=1)
    direct = np.concatenate([[0.0], np.cumsum(0.5 * 0.01 * (g[:-1] + g[1:]))])
    assert np.allclose(res.jo, direct, atol=1e-15)


# --- linear oracle and RK4 order ------------------------------------------

def linear_triplet(rng):
    """Random stable 3-state plant whose observer is an open-loop model copy.

    Eigenvalue magnitudes are pushed to O(10) so the RK4 truncation error at
    h = 0.001 sits far above double-precision roundoff; the order test would
    otherwise measure noise.
    """
    n = 3
    Q = rng.standard_normal((n, n))
    S = rng.standard_normal((n, n))
    A = -(2.0 * Q @ Q.T + 0.5 * np.eye(n)) + 2.0 * (S - S.T)
    dims = SignalDims(n=n, n_u=0, n_y=1)
    zero = parse("0", dims)
    plant = PlantModel(A=A, C=[[1.0, 0.0, 0.0]], D=np.zeros((n, 1)), n_u=0,
                       f_u=(zero,) * n, f_g=(zero,), f_L=(zero,) * n)
    obs = ObserverParams(G=A, J=np.zeros((n, 1)), E=np.zeros((n, 1)),
                         N=np.zeros((n, 1)), theta=[[0.0]])
    return plant, obs


def end_error(plant, obs, x0, xhat0, h, t_end):
    cfg = SimConfig(h=h, t_end=t_end, x0=x0, xhat0=xhat0, input_signal=())
    res = simulate(plant, plant, obs, cfg)
    e_sim = res.x[-1] - res.xhat[-1]
    e_true = expm(plant.A * t_end) @ (x0 - xhat0)
    return float(np.linalg.norm(e_sim - e_true) / np.linalg.norm(e_true))


def test_linear_error_matches_matrix_exponential():
    rng = np.random.default_rng(11)
    for _ in range(3):
        plant, obs = linear_triplet(rng)
        x0 = rng.standard_normal(3)
        xhat0 = rng.standard_normal(3)
        assert end_error(plant, obs, x0, xhat0, h=0.001, t_end=2.0) <= 1e-6


def test_rk4_order_on_linear_case():
    rng = np.random.default_rng(13)  # draw with truncation ~1e-11 at h=0.001
    plant, obs = linear_triplet(rng)
    x0 = rng.standard_normal(3)
    xhat0 = rng.standard_normal(3)
    coarse = end_error(plant, obs, x0, xhat0, h=0.001, t_end=2.0)
    fine = end_error(plant, obs, x0, xhat0, h=0.0005, t_end=2.0)
    assert coarse / fine >= 12.0  # nominal 16 for a fourth-order method


# --- structural invariants along trajectories -----------------------------

def test_reconstruction_identity_everywhere():
    ex = example_system()
    res = simulate(ex.nominal, ex.nominal, ex.observer, example_cfg())
    assert np.array_equal(res.xhat, res.w + res.y @ ex.observer.E.T)
    # w(0) backs out the requested initial estimate
    assert np.allclose(res.xhat[0], [-5.0, -5.0], atol=1e-15)


def test_jo_nondecreasing_on_example():
    ex = example_system()
    res = simulate(ex.uncertain, ex.nominal, ex.observer, example_cfg(t_end=5.0))
    assert np.all(np.diff(res.jo) >= 0)


def test_zero_theta_makes_comparison_trivial():
    ex = example_system()
    obs = ObserverParams(G=ex.observer.G, J=ex.observer.J, E=ex.observer.E,
                         N=ex.observer.N, theta=[[0.0]])
    rep = compare_cubic_linear(ex.nominal, ex.nominal, obs, example_cfg())
    assert abs(rep.ratio - 1.0) <= 1e-12
    assert np.array_equal(rep.cubic.x, rep.linear.x)


def test_cubic_term_dissipates_along_trajectory():
    # instantaneous contribution (Ce)'theta(Ce) * e'(PNC + C'N'P)e stays <= 0
    ex = example_system()
    P = ex.certificate.P
    C = ex.nominal.C
    N = cubic_gain(P, C, ex.observer.theta)
    M = P @ N @ C
    M = M + M.T
    res = simulate(ex.nominal, ex.nominal, ex.observer, example_cfg(t_end=5.0))
    e = res.x - res.xhat
    quad = np.einsum("ki,ij,kj->k", e, M, e)
    gate = np.einsum("ki,ij,kj->k", e @ C.T, ex.observer.theta, e @ C.T)
    assert np.all(gate * quad <= 1e-15)


def test_cubic_run_beats_linear_on_example():
    ex = example_system()
    rep = compare_cubic_linear(ex.nominal, ex.nominal, ex.observer,
                               example_cfg(t_end=20.0))
    assert rep.jo_cubic < rep.jo_linear


# --- prehistory handling --------------------------------------------------

def test_input_prehistory_policies_differ():
    ex = example_system()
    analytic = simulate(ex.nominal, ex.nominal, ex.observer,
                        example_cfg(t_end=1.0, input_signal=input_signals("cos(t)", 1)))
    zeroed = simulate(ex.nominal, ex.nominal, ex.observer,
                      example_cfg(t_end=1.0, input_signal=input_signals("cos(t)", 1),
                                  prehistory="zero"))
    # u(t - 1) is cos(t - 1) in one policy and 0 in the other until t = 1
    assert not np.allclose(analytic.x, zeroed.x)


def delayed_output_pair():
    dims = SignalDims(n=1, n_u=0, n_y=1, n_tau=1)
    zero = parse("0", dims)
    plant = PlantModel(A=[[-1.0]], C=[[1.0]], D=[[0.0]], n_u=0, tau=(0.5,),
                       f_u=(zero,), f_g=(zero,),
                       f_L=(parse("0.5*y1@1", dims),))
    obs = ObserverParams(G=[[-1.0]], J=[[0.0]], E=[[0.0]], N=[[0.0]],
                         theta=[[0.0]])
    return plant, obs


def test_output_delay_uses_buffer_and_prehistory():
    plant, obs = delayed_output_pair()
    runs = {}
    for policy in ("analytic", "zero"):
        cfg = SimConfig(h=0.25, t_end=2.0, x0=[1.0], xhat0=[1.0],
                        input_signal=(), prehistory=policy)
        runs[policy] = simulate(plant, plant, obs, cfg)
    # held y(0) = 1 feeds back harder than a zeroed history
    assert runs["analytic"].x[2, 0] != runs["zero"].x[2, 0]
    assert np.all(np.isfinite(runs["analytic"].x))


def test_blowup_raises_simulation_error():
    # the bundled plant escapes in finite time under a unit-amplitude drive
    ex = example_system()
    with pytest.raises(SimulationError):
        simulate(ex.nominal, ex.nominal, ex.observer,
                 example_cfg(t_end=10.0, input_signal=input_signals("sin(t)", 1)))


# --- CSV output -----------------------------------------------------------

def test_trajectory_csv_format(tmp_path):
    ex = example_system()
    res = simulate(ex.nominal, ex.nominal, ex.observer, example_cfg(t_end=0.1))
    path = tmp_path / "run.csv"
    write_trajectory_csv(res, path)
    raw = path.read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().splitlines()
    assert lines[0] == "t,x1,x2,xhat1,xhat2,y1,Jo"
    assert len(lines) == res.t.size + 1
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert np.allclose(data[:, 0], res.t, atol=1e-12)
    assert np.allclose(data[:, 1:3], res.x, rtol=1e-11, atol=1e-18)
    assert np.allclose(data[:, 5], res.y.ravel(), rtol=1e-11, atol=1e-18)
    assert np.allclose(data[:, 6], res.jo, rtol=1e-11, atol=1e-18)
