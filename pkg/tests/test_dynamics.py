import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from openqst.control import T_TOTAL, FourierCombo, IdealSine, LeoControl, Passage, PiecewiseSine
from openqst.dynamics import (
    BathParams,
    DivergenceError,
    DynamicState,
    Trajectory,
    evolve_batch,
    fidelity,
    lindblad_rhs,
    max_fidelity_and_arrival,
    propagate_closed,
    propagate_lindblad,
    propagate_qsd,
    qsd_rhs,
)
from openqst.spin_model import (
    ChainSpec,
    InvalidSiteError,
    LindbladKind,
    basis_index,
    basis_state,
    build_xy_hamiltonian,
    collective_lindblad,
    xy_hamiltonians,
)

FIG3 = BathParams(0.1, 10.0, 10.0)
FIG1 = BathParams(0.1, 2.0, 10.0)


def comm(a, b):
    return a @ b - b @ a


def dag(x):
    return x.conj().T


def random_hermitian(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (a + dag(a)) / 2


def random_complex(rng, d):
    return rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))


def direct_rhs(rho, o_z, o_w, h, lind, bath):
    g, big_g, temp = bath.gamma_memory, bath.gamma_coupling, bath.temperature
    ld = dag(lind)
    d_rho = (
        -1j * comm(h, rho)
        + comm(lind, rho @ dag(o_z))
        - comm(ld, o_z @ rho)
        + comm(ld, rho @ dag(o_w))
        - comm(lind, o_w @ rho)
    )
    a = -1j * h - (ld @ o_z + lind @ o_w)
    d_oz = (big_g * temp * g / 2 - 1j * big_g * g**2 / 2) * lind - g * o_z + comm(a, o_z)
    d_ow = (big_g * temp * g / 2) * ld - g * o_w + comm(a, o_w)
    return d_rho, d_oz, d_ow


def direct_lindblad(rho, h, lind, bath):
    ld = dag(lind)
    rate = bath.gamma_coupling * bath.temperature / 2
    first = 2 * lind @ rho @ ld - ld @ lind @ rho - rho @ ld @ lind
    second = 2 * ld @ rho @ lind - lind @ ld @ rho - rho @ lind @ ld
    return -1j * comm(h, rho) + rate * (first + second)


@pytest.mark.parametrize(
    "bad",
    [dict(gamma_coupling=-0.1), dict(gamma_memory=0.0), dict(gamma_memory=np.inf), dict(temperature=-1.0)],
)
def test_bath_validation(bad):
    args = dict(gamma_coupling=0.1, gamma_memory=2.0, temperature=10.0) | bad
    with pytest.raises(ValueError):
        BathParams(**args)


def test_rhs_closed_limit():
    rng = np.random.default_rng(1)
    d = 8
    rho, h = random_hermitian(rng, d), random_hermitian(rng, d)
    zero = np.zeros((d, d), dtype=complex)
    state = DynamicState(rho, zero, zero.copy())
    d_rho, d_oz, d_ow = qsd_rhs(state, h, collective_lindblad("lowering", 3), BathParams(0.0, 2.0, 10.0))
    np.testing.assert_allclose(d_rho, -1j * comm(h, rho), atol=1e-13)
    assert not d_oz.any() and not d_ow.any()


def test_rhs_maximally_mixed_is_stationary():
    rng = np.random.default_rng(2)
    d = 8
    zero = np.zeros((d, d), dtype=complex)
    state = DynamicState(np.eye(d) / d, zero, zero.copy())
    d_rho, _, _ = qsd_rhs(state, random_hermitian(rng, d), collective_lindblad("lowering", 3), FIG1)
    assert np.abs(d_rho).max() <= 1e-15


@pytest.mark.parametrize("seed", range(5))
def test_rhs_matches_direct_commutators(seed):
    rng = np.random.default_rng(seed)
    d = 8
    rho = random_hermitian(rng, d)
    rho /= np.trace(rho)
    o_z, o_w, lind = (random_complex(rng, d) for _ in range(3))
    h = random_hermitian(rng, d)
    bath = BathParams(0.3, 4.0, 7.0)
    got = qsd_rhs(DynamicState(rho, o_z, o_w, 0.2), h, lind, bath)
    want = direct_rhs(rho, o_z, o_w, h, lind, bath)
    for g, w in zip(got, want):
        np.testing.assert_allclose(g, w, atol=1e-11)
    assert abs(np.trace(got[0])) <= 1e-13
    assert np.abs(got[0] - dag(got[0])).max() <= 1e-13


def test_rhs_accepts_time_dependent_hamiltonian():
    rng = np.random.default_rng(7)
    d = 4
    rho = random_hermitian(rng, d)
    zero = np.zeros((d, d), dtype=complex)
    h1 = random_hermitian(rng, d)
    lind = collective_lindblad("sigma_x", 2)
    from_callable = qsd_rhs(DynamicState(rho, zero, zero, 0.5), lambda t: 2 * t * h1, lind, FIG1)
    from_matrix = qsd_rhs(DynamicState(rho, zero, zero, 0.5), h1, lind, FIG1)
    for a, b in zip(from_callable, from_matrix):
        np.testing.assert_allclose(a, b)


def test_rhs_shape_mismatch():
    zero = np.zeros((4, 4), dtype=complex)
    with pytest.raises(ValueError):
        qsd_rhs(DynamicState(zero, zero, zero), np.zeros((8, 8)), zero, FIG1)


@pytest.mark.parametrize("kind", list(LindbladKind))
def test_lindblad_rhs_matches_direct(kind):
    rng = np.random.default_rng(3)
    rho = random_hermitian(rng, 8)
    h = random_hermitian(rng, 8)
    lind = collective_lindblad(kind, 3)
    np.testing.assert_allclose(lindblad_rhs(rho, h, lind, FIG1), direct_lindblad(rho, h, lind, FIG1), atol=1e-11)


def test_fidelity_examples():
    n = 3
    target = basis_state(n, n)
    assert fidelity(np.outer(target, target), n) == 1.0
    first = basis_state(1, n)
    assert fidelity(np.outer(first, first), n) == 0.0
    assert fidelity(np.eye(8) / 8, n) == pytest.approx(2 ** (-n / 2))


def test_fidelity_clamps_negative_noise():
    rho = np.zeros((4, 4))
    rho[basis_index(2, 2), basis_index(2, 2)] = -1e-12
    assert fidelity(rho, 2) == 0.0


@pytest.mark.parametrize("site", [0, 4, 1.5])
def test_fidelity_bad_site(site):
    with pytest.raises(InvalidSiteError):
        fidelity(np.eye(8) / 8, site)


def test_arrival_picks_earliest_maximum():
    traj = Trajectory(np.linspace(0, 1, 5), np.full(5, 0.3), None)
    assert max_fidelity_and_arrival(traj) == (0.3, 0.0)
    traj = Trajectory(np.linspace(0, 1, 5), np.array([0.1, 0.5, 0.2, 0.5, 0.0]), None)
    assert max_fidelity_and_arrival(traj) == (0.5, 0.25)
    with pytest.raises(ValueError):
        max_fidelity_and_arrival(Trajectory(np.array([]), np.array([]), None))


def test_closed_pst_transfer():
    traj = propagate_closed(ChainSpec.pst(6))
    assert traj.fidelities[-1] >= 0.9999
    assert abs(traj.t_a - T_TOTAL) <= T_TOTAL / 2000
    assert traj.times[0] == 0 and traj.times[-1] == pytest.approx(T_TOTAL)
    assert len(traj.times) == len(traj.fidelities) == 2001


def test_uncoupled_qsd_matches_unitary_oracle():
    spec = ChainSpec(4, (-1.3, -2.0, -0.7))
    h = build_xy_hamiltonian(spec)
    traj = propagate_qsd(spec, collective_lindblad("lowering", 4), BathParams(0.0, 2.0, 10.0), n_steps=400)
    start = basis_state(1, 4)
    target = basis_state(4, 4)
    oracle = np.array([abs(target @ expm(-1j * h * t) @ start) for t in traj.times])
    assert np.abs(traj.fidelities - oracle).max() <= 1e-6


@pytest.mark.parametrize("bath", [BathParams(0.0, 2.0, 10.0), BathParams(0.1, 2.0, 0.0)])
def test_lindblad_zero_prefactor_is_closed(bath):
    spec = ChainSpec.pst(4)
    lind = collective_lindblad("lowering", 4)
    closed = propagate_closed(spec, n_steps=200)
    markov = propagate_lindblad(spec, lind, bath, n_steps=200)
    np.testing.assert_allclose(markov.fidelities, closed.fidelities, atol=1e-12)


def test_no_control_baseline_fig3():
    traj = propagate_qsd(ChainSpec.pst(4), collective_lindblad("lowering", 4), FIG3)
    assert traj.f_max == pytest.approx(0.585, abs=0.03)


def test_fidelity_drops_with_coupling():
    lind = collective_lindblad("lowering", 6)
    weak = propagate_qsd(ChainSpec.pst(6), lind, BathParams(0.05, 2.0, 10.0), n_steps=400)
    strong = propagate_qsd(ChainSpec.pst(6), lind, FIG1, n_steps=400)
    assert strong.f_max < weak.f_max


def test_dephasing_leaves_transfer_intact():
    # numerically observed: collective dephasing barely touches the single-excitation transfer
    traj = propagate_qsd(ChainSpec.pst(4), collective_lindblad("sigma_z", 4), FIG3, n_steps=400)
    assert traj.f_max == pytest.approx(1.0, abs=1e-6)


def test_integrator_order():
    spec = ChainSpec.pst(4)
    lind = collective_lindblad("lowering", 4)
    coarse = propagate_qsd(spec, lind, FIG3, n_steps=2000)
    fine = propagate_qsd(spec, lind, FIG3, n_steps=4000)
    assert abs(coarse.fidelities[-1] - fine.fidelities[-1]) <= 1e-7


def test_step_validation():
    spec = ChainSpec.pst(3)
    with pytest.raises(ValueError):
        propagate_closed(spec, n_steps=99)
    with pytest.raises(ValueError):
        propagate_closed(spec, t_total=0.0)


def test_divergence_names_step():
    with pytest.raises(DivergenceError) as err:
        propagate_qsd(ChainSpec.pst(3), collective_lindblad("lowering", 3), BathParams(5.0, 2000.0, 10.0), n_steps=100)
    assert err.value.step > 0
    assert "step" in str(err.value)


grid = st.tuples(
    st.sampled_from(list(LindbladKind)),
    st.sampled_from([0.0, 0.1]),
    st.sampled_from([2.0, 10.0]),
    st.sampled_from([0.0, 10.0]),
    st.sampled_from(["qsd", "lindblad"]),
)


@settings(max_examples=20, deadline=None)
@given(grid)
def test_trace_and_hermiticity_preserved(params):
    kind, big_g, g, temp, model = params
    spec = ChainSpec.pst(3)
    run = propagate_qsd if model == "qsd" else propagate_lindblad
    traj = run(spec, collective_lindblad(kind, 3), BathParams(big_g, g, temp), n_steps=200)
    assert traj.trace_error.max() <= 1e-8
    assert traj.hermiticity_error.max() <= 1e-8


@pytest.mark.parametrize("kind", list(LindbladKind))
@pytest.mark.parametrize("model", ["qsd", "lindblad"])
def test_graded_matches_dense(kind, model):
    n = 4
    lind = collective_lindblad(kind, n)
    hs = xy_hamiltonians(np.array([[-1.7, -2.0, -1.7], [-2.5, -2.1, -2.9]]), n)
    common = dict(n_sites=n, model=model, n_steps=200)
    dense = evolve_batch(hs, lind, FIG3, representation="dense", **common)
    graded = evolve_batch(hs, lind, FIG3, representation="graded", **common)
    np.testing.assert_allclose(graded.fidelities, dense.fidelities, atol=1e-12)
    np.testing.assert_allclose(graded.final, dense.final, atol=1e-12)


def test_graded_matches_dense_with_pulses():
    n = 4
    passage = Passage.for_chain(n)
    pulses = [IdealSine(96.19, np.pi / 40), IdealSine(40.0, np.pi / 20)]
    hs = np.repeat(build_xy_hamiltonian(ChainSpec.pst(n))[None], 2, axis=0)
    lind = collective_lindblad("lowering", n)
    common = dict(n_sites=n, n_steps=200, pulses=pulses, passage=passage)
    dense = evolve_batch(hs, lind, FIG3, representation="dense", **common)
    graded = evolve_batch(hs, lind, FIG3, representation="graded", **common)
    np.testing.assert_allclose(graded.fidelities, dense.fidelities, atol=1e-11)


def test_batch_matches_single_runs():
    n = 3
    lind = collective_lindblad("lowering", n)
    couplings = np.array([[-1.0, -1.0], [-2.0, -0.5]])
    res = evolve_batch(xy_hamiltonians(couplings, n), lind, FIG1, n_sites=n, n_steps=150)
    for row, fids in zip(couplings, res.fidelities):
        single = propagate_qsd(ChainSpec(n, row), lind, FIG1, n_steps=150)
        np.testing.assert_allclose(fids, single.fidelities, atol=1e-14)


def test_leo_control_raises_fidelity():
    spec = ChainSpec.pst(4)
    lind = collective_lindblad("lowering", 4)
    ctrl = LeoControl(IdealSine(96.19, np.pi / 40), Passage.for_chain(4))
    bare = propagate_qsd(spec, lind, FIG3, n_steps=1000)
    driven = propagate_qsd(spec, lind, FIG3, control=ctrl, n_steps=1000)
    assert driven.f_max > bare.f_max + 0.3


def test_store_states():
    traj = propagate_closed(ChainSpec.pst(2), n_steps=100, store_states=True)
    assert len(traj.states) == 101
    assert traj.states[0][basis_index(1, 2), basis_index(1, 2)] == 1


@settings(max_examples=5, deadline=None)
@given(
    st.sampled_from(["fourier", "piecewise"]),
    st.lists(st.floats(min_value=-100, max_value=100), min_size=5, max_size=5),
)
def test_leo_is_inert_in_closed_chain(family, amps):
    spec = ChainSpec.pst(4)
    shape = FourierCombo(tuple(amps), 40.0) if family == "fourier" else PiecewiseSine(tuple(amps))
    control = LeoControl(shape, Passage.for_chain(4))
    bare = propagate_closed(spec, n_steps=1000).fidelities[-1]
    driven = propagate_qsd(spec, collective_lindblad("lowering", 4), BathParams(0.0, 10.0, 10.0),
                           control=control, n_steps=1000)
    assert abs(driven.fidelities[-1] - bare) <= 1e-6


def test_zero_coupling_shortcut_agrees_with_full_hierarchy():
    spec = ChainSpec.pst(4)
    lind = collective_lindblad("lowering", 4)
    exact = propagate_qsd(spec, lind, BathParams(0.0, 10.0, 10.0), n_steps=300)
    tiny = propagate_qsd(spec, lind, BathParams(1e-12, 10.0, 10.0), n_steps=300)
    np.testing.assert_allclose(tiny.fidelities, exact.fidelities, atol=1e-9)
    assert not exact.final_state.o_z.any()
