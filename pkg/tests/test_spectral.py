import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freqswap import units
from freqswap.errors import (
    GridTooNarrowError,
    HeraldOffGridError,
    InputError,
    JsiFormatError,
    NegativeIntensityError,
    NormalizationError,
)
from freqswap.spectral import (
    DoubleGaussianJsaParams,
    FilterFunction,
    FrequencyGrid,
    JointSpectralAmplitude,
    SpectralAmplitude,
    build_gaussian_jsa,
    default_grids,
    experiment_params,
    fwhm,
    heralded_amplitude,
    heralded_purity,
    ingest_jsi_csv,
    marginals,
    params_from_marginals,
    purity,
    reduced_density_matrix,
    schmidt_decompose,
    schmidt_number,
    write_jsi_csv,
)


@pytest.fixture(scope="module")
def default_jsa():
    p = experiment_params()
    return p, build_gaussian_jsa(p, *default_grids(p))


def test_unit_round_trips():
    assert units.omega_to_nm(units.nm_to_omega(830.0)) == pytest.approx(830.0, rel=1e-15)
    sigma = 0.004
    assert units.fwhm_to_amplitude_sigma(units.amplitude_sigma_to_fwhm(sigma)) == pytest.approx(sigma)
    # intensity FWHM of exp(-x^2 / 2 s^2) squared is 2 s sqrt(ln 2)
    x = np.linspace(-0.05, 0.05, 200001)
    assert fwhm(x, np.exp(-(x**2) / sigma**2)) == pytest.approx(units.amplitude_sigma_to_fwhm(sigma), rel=1e-6)


def test_grid_basics():
    g = FrequencyGrid.centered(2.0, 0.1, 11)
    assert g.bin_center(5) == pytest.approx(2.0)
    assert g.bin_index(2.0) == 5
    assert g.refined(2).n_bins == 22
    with pytest.raises(HeraldOffGridError):
        g.bin_index(3.0)


def test_separable_jsa_has_unit_schmidt_number():
    p = DoubleGaussianJsaParams(2.27, 2.27, 0.01, 0.01)
    jsa = build_gaussian_jsa(p, *default_grids(p, 96))
    dec = schmidt_decompose(jsa)
    assert dec.schmidt_number == pytest.approx(1.0, abs=1e-9)
    assert dec.coefficients[0] == pytest.approx(1.0, abs=1e-12)
    assert np.all(dec.coefficients[1:] < 1e-7)


def test_two_equal_schmidt_terms_give_k2():
    g = FrequencyGrid.centered(2.27, 0.1, 64)
    x = g.centers - 2.27
    h0 = np.exp(-(x**2) / (2 * 0.01**2))
    h1 = x * h0
    h0 /= np.linalg.norm(h0)
    h1 /= np.linalg.norm(h1)
    f = np.outer(h0, h0) + np.outer(h1, h1)
    jsa = JointSpectralAmplitude.from_values(g, g, f)
    assert schmidt_number(jsa) == pytest.approx(2.0, abs=1e-12)


def test_default_marginals_and_schmidt_number(default_jsa):
    p, jsa = default_jsa
    ms, mi = marginals(jsa)
    assert ms.total() == pytest.approx(1.0, abs=1e-9)
    assert ms.fwhm_nm() == pytest.approx(9.0, rel=0.02)
    assert mi.fwhm_nm() == pytest.approx(16.4, rel=0.02)
    assert p.schmidt_number == pytest.approx(5.0)
    k = schmidt_number(jsa)
    k_fine = schmidt_number(build_gaussian_jsa(p, *default_grids(p, 512)))
    assert k == pytest.approx(k_fine, rel=1e-6)
    assert k == pytest.approx(1.0 / purity(reduced_density_matrix(jsa)), abs=1e-8)


def test_marginal_width_set_by_wide_sigma():
    p = DoubleGaussianJsaParams(2.27, 2.27, 0.001, 0.02)
    jsa = build_gaussian_jsa(p, *default_grids(p, 256))
    ms, _ = marginals(jsa)
    # intensity std of the marginal from the closed form sqrt(s+^2 + s-^2) / 2
    std = math.sqrt(np.sum(ms.values * (jsa.grid_s.centers - 2.27) ** 2) * jsa.grid_s.delta_omega)
    assert std == pytest.approx(p.signal_intensity_std, rel=1e-6)
    assert std == pytest.approx(p.sigma_minus / 2, rel=2e-3)


def test_narrow_grid_rejected():
    p = experiment_params()
    with pytest.raises(GridTooNarrowError):
        build_gaussian_jsa(p, *default_grids(p, 64, span_std=3.0))


def test_normalization_invariants(default_jsa):
    _, jsa = default_jsa
    assert jsa.norm2() == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(NormalizationError):
        JointSpectralAmplitude(jsa.grid_s, jsa.grid_i, 2 * jsa.values)
    with pytest.raises(NormalizationError):
        JointSpectralAmplitude.from_values(jsa.grid_s, jsa.grid_i, np.zeros_like(jsa.values))


def test_heralded_packets_follow_gaussian_conditional(default_jsa):
    p, jsa = default_jsa
    for lam in (825.0, 834.5):
        flt = FilterFunction.delta_nm(lam)
        phi = heralded_amplitude(jsa, flt)
        assert phi.norm2() == pytest.approx(1.0, abs=1e-9)
        center, sigma = p.conditional_signal(jsa.grid_i.bin_center(jsa.grid_i.bin_index(flt.center)))
        assert phi.mean() == pytest.approx(center, abs=1e-9)
        assert phi.gaussian_sigma() == pytest.approx(sigma, rel=1e-6)


def test_experiment_heralded_packets(default_jsa):
    _, jsa = default_jsa
    blue = heralded_amplitude(jsa, FilterFunction.delta_nm(825.0))
    red = heralded_amplitude(jsa, FilterFunction.delta_nm(834.5))
    lam_r = float(units.omega_to_nm(blue.mean()))
    lam_b = float(units.omega_to_nm(red.mean()))
    # anticorrelation: the blue idler heralds the red signal
    assert lam_r > lam_b
    assert lam_r == pytest.approx(832.5, abs=1.0)
    assert lam_b == pytest.approx(826.8, abs=1.0)
    for phi, lam in ((blue, lam_r), (red, lam_b)):
        assert units.width_omega_to_nm(phi.fwhm(), lam) == pytest.approx(1.80, abs=0.05)


def test_heralded_purity_with_3nm_filter(default_jsa):
    _, jsa = default_jsa
    flt = FilterFunction.gaussian_nm(830.0, 3.0)
    p = heralded_purity(jsa, flt)
    rho = reduced_density_matrix(jsa, "signal", flt.weights(jsa.grid_i))
    assert p == pytest.approx(purity(rho))
    assert 0.2 < p < 1.0
    narrow = heralded_purity(jsa, FilterFunction.gaussian_nm(830.0, 0.5))
    assert narrow > p


def test_filter_kinds(default_jsa):
    _, jsa = default_jsa
    w = FilterFunction.delta_nm(830.0).weights(jsa.grid_i)
    assert w.sum() == 1.0
    with pytest.raises(InputError):
        FilterFunction("boxcar", 2.27)
    with pytest.raises(HeraldOffGridError):
        FilterFunction.gaussian_nm(700.0, 3.0).weights(jsa.grid_i)


def test_jsi_csv_round_trip(tmp_path, default_jsa):
    p = experiment_params()
    jsa = build_gaussian_jsa(p, *default_grids(p, 64))
    path = tmp_path / "jsi.csv"
    write_jsi_csv(path, jsa, comment="synthetic")
    back = ingest_jsi_csv(path)
    assert np.max(np.abs(np.abs(back.values) - np.abs(jsa.values))) < 1e-9
    assert schmidt_number(back) == pytest.approx(5.0, rel=0.01)


def test_jsi_csv_nonuniform_axes_resampled(tmp_path):
    lam = np.linspace(820.0, 840.0, 41)  # uniform in nm, not in omega
    w = units.nm_to_omega(lam)
    jsi = np.exp(-((w[:, None] - w.mean()) ** 2 + (w[None, :] - w.mean()) ** 2) / 0.003**2)
    path = tmp_path / "jsi.csv"
    with path.open("w") as fh:
        fh.write("," + ",".join(map(str, lam)) + "\n")
        for k, row in enumerate(jsi):
            fh.write(f"{lam[k]}," + ",".join(map(str, row)) + "\n")
    jsa = ingest_jsi_csv(path)
    assert jsa.grid_s.n_bins == 41
    assert schmidt_number(jsa) == pytest.approx(1.0, abs=1e-3)


@pytest.mark.parametrize(
    "text, error, line",
    [
        (",830,831\n830,1,2\n831,1\n", JsiFormatError, 3),
        (",830,831\n830,1,2\n831,1,-2\n", NegativeIntensityError, 3),
        (",830,831\n830,1,x\n831,1,2\n", JsiFormatError, 2),
        ("a,830,831\n830,1,2\n831,1,2\n", JsiFormatError, 1),
    ],
)
def test_jsi_csv_errors_carry_line_numbers(tmp_path, text, error, line):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(error, match=f"line {line}"):
        ingest_jsi_csv(path)


def test_jsi_all_zero(tmp_path):
    path = tmp_path / "zero.csv"
    path.write_text(",830,831\n830,0,0\n831,0,0\n")
    with pytest.raises(NormalizationError):
        ingest_jsi_csv(path)


@settings(max_examples=25, deadline=None)
@given(
    k=st.floats(1.0, 8.0),
    fwhm_s=st.floats(4.0, 12.0),
    ratio=st.floats(0.5, 2.5),
)
def test_params_from_marginals_inverts(k, fwhm_s, ratio):
    p = params_from_marginals(830.0, 830.0, fwhm_s, fwhm_s * ratio, k)
    assert p.schmidt_number == pytest.approx(k, rel=1e-9)
    s_s = units.fwhm_to_intensity_std(units.width_nm_to_omega(fwhm_s, 830.0))
    assert p.signal_intensity_std == pytest.approx(s_s, rel=1e-9)
    assert p.idler_intensity_std == pytest.approx(s_s * ratio, rel=1e-9)
    assert p.anticorrelated or k == pytest.approx(1.0)


@settings(max_examples=20, deadline=None)
@given(k=st.floats(1.0, 6.0), ratio=st.floats(0.6, 2.0))
def test_discrete_schmidt_number_matches_continuum(k, ratio):
    p = params_from_marginals(830.0, 830.0, 9.0, 9.0 * ratio, k)
    jsa = build_gaussian_jsa(p, *default_grids(p, 160))
    assert schmidt_number(jsa) == pytest.approx(k, rel=1e-4)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=8, max_size=8).filter(lambda v: sum(x * x for x in v) > 1e-3))
def test_spectral_amplitude_normalizes(vals):
    g = FrequencyGrid(2.0, 0.01, 8)
    a = SpectralAmplitude.from_values(g, np.array(vals))
    assert a.norm2() == pytest.approx(1.0, abs=1e-12)
    assert a.overlap(a) == pytest.approx(1.0, abs=1e-12)
