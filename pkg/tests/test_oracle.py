import math

import numpy as np
import pytest

from freqswap import oracle, swap
from freqswap.errors import (
    BudgetExceededError,
    InputError,
    UnknownPortError,
    ZeroHeraldError,
)
from freqswap.spectral import (
    FilterFunction,
    FrequencyGrid,
    JointSpectralAmplitude,
    build_gaussian_jsa,
    marginals,
    params_from_marginals,
)


@pytest.fixture(scope="module")
def ideal():
    params = params_from_marginals(830.0, 830.0, 9.0, 16.4, 3.0)
    return oracle.ideal_setup(params, n_bins=32, herald_offset_std=1.6)


@pytest.fixture(scope="module")
def after_idler_bs(ideal):
    sources, _, _ = ideal
    return oracle.apply_beamsplitter(oracle.build_four_photon_state(sources), ("b1", "b2"), ("c", "d"))


def _delta_bsm(sources, bin_r, bin_b, tau_i=0.0):
    gi = sources.grid_i
    return swap.BsmConfig(FilterFunction("delta-bin", gi.bin_center(bin_r)),
                          FilterFunction("delta-bin", gi.bin_center(bin_b)), tau_i)


def _small_grids(n=8):
    return FrequencyGrid(2.2, 0.01, n), FrequencyGrid(2.2, 0.01, n)


def test_four_photon_weights_follow_schmidt_number(ideal):
    sources, _, _ = ideal
    state = oracle.build_four_photon_state(sources)
    k = 3.0
    expected = np.array([1.0, 0.5 * (1 + 1 / k), 0.5 * (1 + 1 / k)])
    expected /= expected.sum()
    np.testing.assert_allclose(state.weights, expected, atol=1e-6)
    for comp in state.components:
        assert oracle.fock_norm2(comp.labels, comp.coeffs) == pytest.approx(1.0, abs=1e-12)


def test_single_bin_jsa_bosonic_normalization():
    gs, gi = _small_grids()
    f = np.zeros((8, 8))
    f[3, 5] = 1.0
    jsa = JointSpectralAmplitude.from_values(gs, gi, f)
    state = oracle.build_four_photon_state(swap.SourcePair.identical(jsa))
    psi12 = state.component("psi12")
    psi11 = state.component("psi11")
    assert psi12.n_terms == 1 and psi11.n_terms == 1
    amp = list(oracle.fock_amplitudes(psi11).values())[0]
    assert abs(amp) == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(state.weights, [1 / 3] * 3, atol=1e-12)


def test_port_spectrum_matches_marginal(ideal):
    sources, _, _ = ideal
    state = oracle.build_four_photon_state(sources)
    psi12 = state.component("psi12")
    ms, mi = marginals(sources.jsa_1)
    dws, dwi = sources.grid_s.delta_omega, sources.grid_i.delta_omega
    np.testing.assert_allclose(oracle.port_spectrum(state, psi12, "a1"), ms.values * dws, atol=1e-9)
    np.testing.assert_allclose(oracle.port_spectrum(state, psi12, "b2"), mi.values * dwi, atol=1e-9)


def test_hom_null_for_identical_photons():
    gs, gi = _small_grids()
    st = oracle.state_from_terms(gs, gi, {(("a1", 2), ("a2", 2)): 1.0})
    out = oracle.apply_beamsplitter(st, ("a1", "a2"), ("x", "y"))
    amps = oracle.fock_amplitudes(out.components[0])
    x, y = oracle.PORTS.index("x"), oracle.PORTS.index("y")
    nb = out.nb
    coinc = amps.get((x * nb + 2, y * nb + 2), 0.0)
    assert abs(coinc) < 1e-15
    assert sum(abs(a) ** 2 for a in amps.values()) == pytest.approx(1.0, abs=1e-12)


def test_single_photon_splits_evenly():
    gs, gi = _small_grids()
    st = oracle.state_from_terms(gs, gi, {(("a1", 4),): 1.0})
    out = oracle.apply_beamsplitter(st, ("a1", "a2"), ("x", "y"))
    comp = out.components[0]
    px = oracle.port_spectrum(out, comp, "x").sum()
    py = oracle.port_spectrum(out, comp, "y").sum()
    assert px == pytest.approx(0.5, abs=1e-15) and py == pytest.approx(0.5, abs=1e-15)


def test_splitter_round_trip_amplitudes(ideal):
    sources, _, _ = ideal
    state = oracle.build_four_photon_state(sources)
    there = oracle.apply_beamsplitter(state, ("b1", "b2"), ("c", "d"))
    back = oracle.apply_beamsplitter(there, ("c", "d"), ("b1", "b2"))
    for c0, c2 in zip(state.components, back.components):
        a0 = oracle.fock_amplitudes(c0)
        a2 = {k: v for k, v in oracle.fock_amplitudes(c2).items() if abs(v) > 1e-14}
        assert set(a2) <= set(a0)
        err = max(abs(a0[k] - a2.get(k, 0.0)) for k in a0)
        assert err < 1e-12


def test_splitter_preserves_norm_with_delay(ideal):
    sources, _, _ = ideal
    state = oracle.build_four_photon_state(sources)
    out = oracle.apply_beamsplitter(state, ("b1", "b2"), ("c", "d"), tau=75.0)
    for comp in out.components:
        assert oracle.fock_norm2(comp.labels, comp.coeffs) == pytest.approx(1.0, abs=1e-9)


def test_unknown_port_and_mixed_splitter():
    gs, gi = _small_grids()
    st = oracle.state_from_terms(gs, gi, {(("a1", 1),): 1.0})
    with pytest.raises(UnknownPortError):
        oracle.apply_beamsplitter(st, ("a1", "z"), ("x", "y"))
    with pytest.raises(InputError):
        oracle.apply_beamsplitter(st, ("a1", "b2"), ("x", "y"))


def test_budget_exceeded(ideal):
    sources, _, _ = ideal
    with pytest.raises(BudgetExceededError, match="MiB"):
        oracle.build_four_photon_state(sources, budget_bytes=1024)


def test_project_bsm_rejects_equal_bins(after_idler_bs, ideal):
    _, bin_r, _ = ideal
    with pytest.raises(InputError):
        oracle.project_bsm(after_idler_bs, bin_r, bin_r)


def test_zero_herald_probability():
    gs, gi = _small_grids()
    f = np.zeros((8, 8))
    f[3, 5] = 1.0
    jsa = JointSpectralAmplitude.from_values(gs, gi, f)
    st = oracle.apply_beamsplitter(oracle.build_four_photon_state(swap.SourcePair.identical(jsa)),
                                   ("b1", "b2"), ("c", "d"))
    with pytest.raises(ZeroHeraldError):
        oracle.project_bsm(st, 0, 1)


def test_project_requires_idler_splitter(ideal):
    sources, bin_r, bin_b = ideal
    with pytest.raises(InputError):
        oracle.project_bsm(oracle.build_four_photon_state(sources), bin_r, bin_b)


def test_weights_with_overlapping_colours():
    params = params_from_marginals(830.0, 830.0, 9.0, 16.4, 3.0)
    sources, bin_r, bin_b = oracle.ideal_setup(params, n_bins=32, herald_offset_std=0.4)
    st = oracle.apply_beamsplitter(oracle.build_four_photon_state(sources), ("b1", "b2"), ("c", "d"))
    mixture, _ = oracle.project_bsm(st, bin_r, bin_b)
    w = oracle.heralded_weights(mixture)
    fr = sources.jsa_1.values[:, bin_r]
    fb = sources.jsa_1.values[:, bin_b]
    x2 = (fr @ fb) ** 2 / ((fr @ fr) * (fb @ fb))
    assert x2 > 1e-3
    expected = np.array([(1 - x2) / 2, (1 + x2) / 4, (1 + x2) / 4])
    expected /= expected.sum()
    np.testing.assert_allclose([w["singlet"], w["double_1"], w["double_2"]], expected, atol=1e-9)


def test_scan_decays_to_half(after_idler_bs, ideal):
    _, bin_r, bin_b = ideal
    mixture, _ = oracle.project_bsm(after_idler_bs, bin_r, bin_b)
    assert oracle.coincidence_scan(mixture, [800.0])[0] == pytest.approx(0.5, abs=1e-3)


@pytest.mark.parametrize("tau_i", [0.0, 40.0, 80.0])
def test_scan_matches_overlap_model(ideal, tau_i):
    sources, bin_r, bin_b = ideal
    st = oracle.apply_beamsplitter(oracle.build_four_photon_state(sources), ("b1", "b2"), ("c", "d"), tau_i)
    mixture, _ = oracle.project_bsm(st, bin_r, bin_b)
    taus = np.linspace(-200.0, 200.0, 41)
    full = swap.coincidence_full(sources, _delta_bsm(sources, bin_r, bin_b, tau_i), taus)
    assert np.max(np.abs(oracle.coincidence_scan(mixture, taus) - full)) < 1e-6


def test_coherent_pump_gives_fast_term(ideal):
    sources, bin_r, bin_b = ideal
    st = oracle.build_four_photon_state(sources, coherent=True)
    st = oracle.apply_beamsplitter(st, ("b1", "b2"), ("c", "d"), 40.0)
    mixture, _ = oracle.project_bsm(st, bin_r, bin_b)
    taus = np.linspace(-200.0, 200.0, 41)
    full = swap.coincidence_full(sources, _delta_bsm(sources, bin_r, bin_b, 40.0), taus,
                                 include_fast_term=True)
    assert np.max(np.abs(oracle.coincidence_scan(mixture, taus) - full)) < 1e-6


def test_joint_spectrum(after_idler_bs, ideal):
    sources, bin_r, bin_b = ideal
    mixture, _ = oracle.project_bsm(after_idler_bs, bin_r, bin_b)
    total, parts = oracle.joint_spectrum_heralded(mixture, by_component=True)
    assert total.sum() == pytest.approx(1.0, abs=1e-9)
    singlet = parts["singlet"]
    assert np.all(np.diag(singlet) == 0.0)
    assert singlet.sum() == pytest.approx(0.5, abs=1e-9)
    # the two singlet blobs sit at (R, B) and (B, R)
    hs = swap.heralded_state(sources, _delta_bsm(sources, bin_r, bin_b))
    j_r = sources.grid_s.bin_index(hs.omega_R)
    j_b = sources.grid_s.bin_index(hs.omega_B)
    upper = singlet[np.triu_indices_from(singlet, 1)].argmax()
    lower = singlet[np.tril_indices_from(singlet, -1)].argmax()
    ju = tuple(int(a[upper]) for a in np.triu_indices_from(singlet, 1))
    jl = tuple(int(a[lower]) for a in np.tril_indices_from(singlet, -1))
    assert abs(ju[0] - j_r) <= 1 and abs(ju[1] - j_b) <= 1
    assert abs(jl[0] - j_b) <= 1 and abs(jl[1] - j_r) <= 1


def test_antisymmetry_residuals(after_idler_bs, ideal):
    _, bin_r, bin_b = ideal
    mixture, _ = oracle.project_bsm(after_idler_bs, bin_r, bin_b)
    assert oracle.antisymmetry_residual(mixture) < 1e-12
    assert oracle.herald_exchange_residual(after_idler_bs, bin_r, bin_b) < 1e-12


def test_filtered_herald_probability_grows_with_bandwidth(ideal):
    sources, bin_r, bin_b = ideal
    st = oracle.apply_beamsplitter(oracle.build_four_photon_state(sources), ("b1", "b2"), ("c", "d"))
    gi = sources.grid_i
    probs = []
    for width in (0.002, 0.004, 0.008):
        wr = FilterFunction("gaussian", gi.bin_center(bin_r), width).weights(gi)
        wb = FilterFunction("gaussian", gi.bin_center(bin_b), width).weights(gi)
        mixture, p = oracle.project_bsm_filtered(st, wr, wb)
        assert sum(mixture.weights) == pytest.approx(1.0, abs=1e-12)
        probs.append(p)
    assert probs[0] < probs[1] < probs[2]


def test_mismatched_sources_lose_antisymmetry(ideal):
    sources, bin_r, bin_b = ideal
    p2 = params_from_marginals(830.3, 829.7, 8.0, 15.0, 2.5)
    jsa2 = build_gaussian_jsa(p2, sources.grid_s, sources.grid_i)
    st = oracle.apply_beamsplitter(oracle.build_four_photon_state(swap.SourcePair(sources.jsa_1, jsa2)),
                                   ("b1", "b2"), ("c", "d"))
    mixture, _ = oracle.project_bsm(st, bin_r, bin_b)
    assert oracle.antisymmetry_residual(mixture) > 1e-3
    assert oracle.herald_exchange_residual(st, bin_r, bin_b) < 1e-12
    assert oracle.coincidence_scan(mixture, [0.0])[0] < 0.75


def test_bosonic_factor():
    assert math.isclose(oracle.bosonic_factor(np.array([[1, 1, 1, 2]]))[0], 6.0)
    assert math.isclose(oracle.bosonic_factor(np.array([[1, 1, 2, 2]]))[0], 4.0)
