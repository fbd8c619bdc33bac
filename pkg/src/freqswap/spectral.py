"""Frequency grids, biphoton spectra and their Schmidt decomposition.

All spectral objects live on uniform angular-frequency grids (rad/fs) and all
integrals are plain Riemann sums weighted by the bin width.  A joint spectral
amplitude ``f(ws, wi)`` is stored as a complex ``[n_s, n_i]`` matrix whose
weighted squared modulus sums to one.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DecompositionError,
    GridTooNarrowError,
    HeraldOffGridError,
    InputError,
    JsiFormatError,
    NegativeIntensityError,
    NormalizationError,
)
from .units import (
    fwhm_to_amplitude_sigma,
    fwhm_to_intensity_std,
    nm_to_omega,
    omega_to_nm,
    width_nm_to_omega,
)

NORM_TOL = 1e-9


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform grid; bin ``k`` is centred at ``omega_min + (k + 1/2) delta_omega``."""

    omega_min: float
    delta_omega: float
    n_bins: int

    def __post_init__(self):
        if not self.delta_omega > 0:
            raise InputError(f"delta_omega must be positive, got {self.delta_omega}")
        if self.n_bins < 2:
            raise InputError(f"n_bins must be >= 2, got {self.n_bins}")

    @classmethod
    def centered(cls, center, half_width, n_bins):
        """Grid of ``n_bins`` covering ``[center - half_width, center + half_width]``."""
        delta = 2.0 * half_width / n_bins
        return cls(center - half_width, delta, int(n_bins))

    @property
    def omega_max(self):
        return self.omega_min + self.n_bins * self.delta_omega

    @property
    def centers(self):
        return self.omega_min + (np.arange(self.n_bins) + 0.5) * self.delta_omega

    def bin_center(self, k):
        return self.omega_min + (k + 0.5) * self.delta_omega

    def contains(self, omega):
        return self.omega_min <= omega <= self.omega_max

    def bin_index(self, omega):
        """Index of the bin containing ``omega``."""
        if not self.contains(omega):
            raise HeraldOffGridError(
                f"frequency {omega:.6g} rad/fs outside grid "
                f"[{self.omega_min:.6g}, {self.omega_max:.6g}]"
            )
        return min(int((omega - self.omega_min) // self.delta_omega), self.n_bins - 1)

    def refined(self, factor=2):
        """Same span with ``factor`` times as many bins."""
        return FrequencyGrid(self.omega_min, self.delta_omega / factor, self.n_bins * factor)


def fwhm(x, y):
    """Full width at half maximum of a sampled peak, by linear interpolation."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    k = int(np.argmax(y))
    half = y[k] / 2.0
    if half <= 0:
        return 0.0
    lo = k
    while lo > 0 and y[lo - 1] > half:
        lo -= 1
    hi = k
    while hi < len(y) - 1 and y[hi + 1] > half:
        hi += 1
    if lo == 0 or hi == len(y) - 1:
        # peak not resolved inside the window
        return float("nan")
    x_left = np.interp(half, [y[lo - 1], y[lo]], [x[lo - 1], x[lo]])
    x_right = np.interp(half, [y[hi + 1], y[hi]], [x[hi + 1], x[hi]])
    return float(x_right - x_left)


@dataclass(frozen=True)
class SpectralAmplitude:
    grid: FrequencyGrid
    values: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, complex))
        if self.values.shape != (self.grid.n_bins,):
            raise InputError("values do not match grid")
        if self.normalized and abs(self.norm2() - 1.0) > NORM_TOL:
            raise NormalizationError(f"amplitude norm {self.norm2():.12g} != 1")

    @classmethod
    def from_values(cls, grid, values):
        values = np.asarray(values, dtype=complex)
        n2 = float(np.sum(np.abs(values) ** 2) * grid.delta_omega)
        if not n2 > 0:
            raise NormalizationError("cannot normalize an all-zero amplitude")
        return cls(grid, values / math.sqrt(n2))

    def norm2(self):
        return float(np.sum(np.abs(self.values) ** 2) * self.grid.delta_omega)

    @property
    def intensity(self):
        return np.abs(self.values) ** 2

    def mean(self):
        p = self.intensity * self.grid.delta_omega
        return float(np.sum(p * self.grid.centers) / np.sum(p))

    def std(self):
        p = self.intensity * self.grid.delta_omega
        p = p / p.sum()
        mu = np.sum(p * self.grid.centers)
        return float(math.sqrt(np.sum(p * (self.grid.centers - mu) ** 2)))

    def gaussian_sigma(self):
        """Amplitude ``sigma`` of the Gaussian with the same second moment."""
        return math.sqrt(2.0) * self.std()

    def fwhm(self):
        return fwhm(self.grid.centers, self.intensity)

    def overlap(self, other):
        """``<self|other>`` as a Riemann sum."""
        return complex(np.sum(np.conj(self.values) * other.values) * self.grid.delta_omega)


@dataclass(frozen=True)
class SpectralDensity:
    """Real probability density on a grid (a marginal intensity)."""

    grid: FrequencyGrid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, float))

    def total(self):
        return float(np.sum(self.values) * self.grid.delta_omega)

    def mean(self):
        return float(np.sum(self.values * self.grid.centers) / np.sum(self.values))

    def fwhm(self):
        return fwhm(self.grid.centers, self.values)

    def fwhm_nm(self):
        center = float(omega_to_nm(self.mean()))
        return self.fwhm() * center**2 / (2 * math.pi * 299.792458)


@dataclass(frozen=True)
class JointSpectralAmplitude:
    grid_s: FrequencyGrid
    grid_i: FrequencyGrid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, complex))
        if self.values.shape != (self.grid_s.n_bins, self.grid_i.n_bins):
            raise InputError(
                f"JSA shape {self.values.shape} does not match grids "
                f"({self.grid_s.n_bins}, {self.grid_i.n_bins})"
            )
        if abs(self.norm2() - 1.0) > NORM_TOL:
            raise NormalizationError(f"JSA norm {self.norm2():.12g} != 1")

    @classmethod
    def from_values(cls, grid_s, grid_i, values):
        values = np.asarray(values, dtype=complex)
        n2 = float(np.sum(np.abs(values) ** 2) * grid_s.delta_omega * grid_i.delta_omega)
        if not n2 > 0 or not math.isfinite(n2):
            raise NormalizationError("cannot normalize an all-zero JSA")
        return cls(grid_s, grid_i, values / math.sqrt(n2))

    @property
    def bin_area(self):
        return self.grid_s.delta_omega * self.grid_i.delta_omega

    def norm2(self):
        return float(np.sum(np.abs(self.values) ** 2) * self.bin_area)

    def mode_matrix(self):
        """Amplitudes on the orthonormal bin modes: ``f * sqrt(dws * dwi)``."""
        return self.values * math.sqrt(self.bin_area)

    @property
    def intensity(self):
        return np.abs(self.values) ** 2


@dataclass(frozen=True)
class DoubleGaussianJsaParams:
    """Double-Gaussian JSA

    ``f ∝ exp[-(u + r v)**2 / 4 sigma_plus**2] exp[-(u - r v)**2 / 4 sigma_minus**2]``

    with ``u = ws - omega_s0``, ``v = wi - omega_i0`` and ``r = idler_scale``.
    ``r = 1`` is the symmetric form; other values stretch the idler axis so the
    two marginals can have different widths without changing the Schmidt number.
    """

    omega_s0: float
    omega_i0: float
    sigma_plus: float
    sigma_minus: float
    idler_scale: float = 1.0

    def __post_init__(self):
        if not (self.sigma_plus > 0 and self.sigma_minus > 0 and self.idler_scale > 0):
            raise InputError("sigma_plus, sigma_minus and idler_scale must be positive")

    @property
    def anticorrelated(self):
        return self.sigma_plus < self.sigma_minus

    @property
    def signal_intensity_std(self):
        return math.sqrt(self.sigma_plus**2 + self.sigma_minus**2) / 2.0

    @property
    def idler_intensity_std(self):
        return self.signal_intensity_std / self.idler_scale

    @property
    def schmidt_number(self):
        """Continuum value ``(s+^2 + s-^2) / (2 s+ s-)``."""
        return (self.sigma_plus**2 + self.sigma_minus**2) / (2 * self.sigma_plus * self.sigma_minus)

    def conditional_signal(self, omega_i):
        """Centre and amplitude sigma of ``f(., omega_i)``."""
        a = 1.0 / self.sigma_plus**2
        b = 1.0 / self.sigma_minus**2
        v = self.idler_scale * (omega_i - self.omega_i0)
        center = self.omega_s0 - v * (a - b) / (a + b)
        sigma = math.sqrt(2.0 / (a + b))
        return center, sigma

    def amplitude(self, ws, wi):
        u = ws - self.omega_s0
        v = self.idler_scale * (wi - self.omega_i0)
        return np.exp(-((u + v) ** 2) / (4 * self.sigma_plus**2) - (u - v) ** 2 / (4 * self.sigma_minus**2))

    def continuum_norm2(self):
        return math.pi * self.sigma_plus * self.sigma_minus / self.idler_scale


def params_from_marginals(center_s_nm, center_i_nm, fwhm_s_nm, fwhm_i_nm, schmidt_number):
    """Double-Gaussian parameters with the given marginal widths and Schmidt number.

    Marginal widths alone fix only the stretch ``idler_scale`` and the sum
    ``sigma_plus**2 + sigma_minus**2``; the Schmidt number closes the system.
    The result is anticorrelated (``sigma_plus < sigma_minus``).
    """
    if schmidt_number < 1:
        raise InputError("Schmidt number must be >= 1")
    s_s = fwhm_to_intensity_std(width_nm_to_omega(fwhm_s_nm, center_s_nm))
    s_i = fwhm_to_intensity_std(width_nm_to_omega(fwhm_i_nm, center_i_nm))
    t = schmidt_number + math.sqrt(schmidt_number**2 - 1.0)
    sigma_plus = 2.0 * s_s / math.sqrt(1.0 + t * t)
    return DoubleGaussianJsaParams(
        omega_s0=float(nm_to_omega(center_s_nm)),
        omega_i0=float(nm_to_omega(center_i_nm)),
        sigma_plus=sigma_plus,
        sigma_minus=t * sigma_plus,
        idler_scale=s_s / s_i,
    )


def experiment_params():
    """Sources matched to the measured marginals: 9.0 / 16.4 nm at 830 nm, K = 5."""
    return params_from_marginals(830.0, 830.0, 9.0, 16.4, 5.0)


def default_grids(params, n_bins=256, span_std=6.0):
    """Grids spanning ``span_std`` marginal intensity std around each centre."""
    gs = FrequencyGrid.centered(params.omega_s0, span_std * params.signal_intensity_std, n_bins)
    gi = FrequencyGrid.centered(params.omega_i0, span_std * params.idler_intensity_std, n_bins)
    return gs, gi


def build_gaussian_jsa(params, grid_s, grid_i):
    """Sample the double-Gaussian JSA on the grids and normalize it.

    Raises :class:`GridTooNarrowError` if the grids cut off more than 1e-6 of
    the probability mass or cover less than 4 amplitude std per axis.
    """
    amp_std_s = math.sqrt(2.0) * params.signal_intensity_std
    amp_std_i = math.sqrt(2.0) * params.idler_intensity_std
    for name, grid, c, s in (
        ("signal", grid_s, params.omega_s0, amp_std_s),
        ("idler", grid_i, params.omega_i0, amp_std_i),
    ):
        if grid.omega_min > c - 4 * s or grid.omega_max < c + 4 * s:
            raise GridTooNarrowError(f"{name} grid covers less than 4 amplitude std")
    ws = grid_s.centers[:, None]
    wi = grid_i.centers[None, :]
    f = params.amplitude(ws, wi)
    captured = float(np.sum(f**2) * grid_s.delta_omega * grid_i.delta_omega)
    lost = 1.0 - captured / params.continuum_norm2()
    if lost > 1e-6:
        raise GridTooNarrowError(f"grid truncates {lost:.3g} of the JSA mass")
    return JointSpectralAmplitude.from_values(grid_s, grid_i, f)


def marginals(jsa):
    """Signal and idler marginal intensities, each integrating to one."""
    p = jsa.intensity
    ps = p.sum(axis=1) * jsa.grid_i.delta_omega
    pi = p.sum(axis=0) * jsa.grid_s.delta_omega
    return SpectralDensity(jsa.grid_s, ps), SpectralDensity(jsa.grid_i, pi)


@dataclass(frozen=True)
class SchmidtDecomposition:
    coefficients: np.ndarray
    signal_modes: np.ndarray  # columns are amplitudes on grid_s, unit Riemann norm
    idler_modes: np.ndarray
    grid_s: FrequencyGrid = field(repr=False)
    grid_i: FrequencyGrid = field(repr=False)

    @property
    def schmidt_number(self):
        return float(1.0 / np.sum(self.coefficients**4))

    def signal_mode(self, k):
        return SpectralAmplitude(self.grid_s, self.signal_modes[:, k])

    def idler_mode(self, k):
        return SpectralAmplitude(self.grid_i, self.idler_modes[:, k])


def schmidt_decompose(jsa):
    """SVD of the bin-mode matrix; coefficients are sorted descending."""
    try:
        u, s, vh = np.linalg.svd(jsa.mode_matrix(), full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise DecompositionError(f"SVD failed: {exc}") from exc
    return SchmidtDecomposition(
        coefficients=s,
        signal_modes=u / math.sqrt(jsa.grid_s.delta_omega),
        idler_modes=vh.T / math.sqrt(jsa.grid_i.delta_omega),
        grid_s=jsa.grid_s,
        grid_i=jsa.grid_i,
    )


def schmidt_number(jsa):
    return schmidt_decompose(jsa).schmidt_number


def reduced_density_matrix(jsa, photon="signal", filter_weights=None):
    """Unit-trace density matrix of one photon on the orthonormal bin modes.

    ``filter_weights`` are intensity transmissions applied to the partner photon
    (heralding with a finite filter); ``None`` means no filter.
    """
    m = jsa.mode_matrix()
    if photon == "idler":
        m = m.T
    elif photon != "signal":
        raise InputError(f"photon must be 'signal' or 'idler', got {photon!r}")
    if filter_weights is not None:
        m = m * np.asarray(filter_weights, dtype=float)[None, :]
    rho = m @ m.conj().T
    tr = np.trace(rho).real
    if not tr > 0:
        raise NormalizationError("filter transmits nothing")
    return rho / tr


def purity(rho):
    return float(np.real(np.trace(rho @ rho)))


@dataclass(frozen=True)
class FilterFunction:
    """Herald filter: ``gaussian`` (intensity FWHM ``fwhm``) or ``delta-bin``."""

    kind: str
    center: float
    fwhm: float = 0.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "delta-bin"):
            raise InputError(f"unknown filter kind {self.kind!r}")
        if self.kind == "gaussian" and not self.fwhm > 0:
            raise InputError("gaussian filter needs a positive fwhm")

    @classmethod
    def gaussian_nm(cls, center_nm, fwhm_nm):
        return cls("gaussian", float(nm_to_omega(center_nm)), width_nm_to_omega(fwhm_nm, center_nm))

    @classmethod
    def delta_nm(cls, center_nm):
        return cls("delta-bin", float(nm_to_omega(center_nm)))

    def transmission(self, omega):
        """Amplitude transmission ``t(omega)``; peak 1 at the centre."""
        omega = np.asarray(omega, dtype=float)
        if self.kind == "delta-bin":
            raise InputError("delta-bin filter has no pointwise transmission; use weights()")
        sigma = fwhm_to_amplitude_sigma(self.fwhm)
        return np.exp(-((omega - self.center) ** 2) / (2 * sigma**2))

    def weights(self, grid):
        """Intensity transmission ``|t|^2`` per bin; a delta filter selects one bin."""
        if not grid.contains(self.center):
            raise HeraldOffGridError(f"filter centre {self.center:.6g} rad/fs is off the grid")
        if self.kind == "delta-bin":
            w = np.zeros(grid.n_bins)
            w[grid.bin_index(self.center)] = 1.0
            return w
        return self.transmission(grid.centers) ** 2


def heralded_amplitude(jsa, herald):
    """Signal amplitude heralded by detecting the idler at the filter centre.

    This is the frequency-resolved limit ``phi(w) ∝ f(w, w_h)`` for every filter
    kind; the impurity caused by a finite filter is reported separately by
    :func:`heralded_purity`.
    """
    k = jsa.grid_i.bin_index(herald.center)
    return SpectralAmplitude.from_values(jsa.grid_s, jsa.values[:, k])


def heralded_purity(jsa, herald, photon="signal"):
    """``Tr rho^2`` of ``photon`` when its partner passes ``herald``."""
    partner_grid = jsa.grid_i if photon == "signal" else jsa.grid_s
    return purity(reduced_density_matrix(jsa, photon, herald.weights(partner_grid)))


def _parse_float(text, line, what):
    try:
        return float(text)
    except ValueError:
        raise JsiFormatError(f"cannot parse {what} {text!r}", line) from None


def _uniform(omega):
    d = np.diff(omega)
    return np.all(np.abs(d - d.mean()) <= 1e-6 * abs(d.mean()))


def ingest_jsi_csv(path):
    """Read a measured JSI and return the flat-phase JSA ``sqrt(JSI)``.

    Cell (0, 0) is empty, row 0 holds idler wavelengths and column 0 signal
    wavelengths (nm, strictly monotonic).  ``#`` lines are ignored.  Axes that
    are not uniform in angular frequency are resampled linearly onto a uniform
    grid with the same number of points.
    """
    path = Path(path)
    rows = []
    with path.open(newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if row[0].lstrip().startswith("#"):
                continue
            rows.append((lineno, [c.strip() for c in row]))
    if len(rows) < 3:
        raise JsiFormatError("need a header row and at least two data rows")
    head_line, header = rows[0]
    if header[0] != "":
        raise JsiFormatError("cell (0,0) must be empty", head_line)
    lam_i = np.array([_parse_float(c, head_line, "idler wavelength") for c in header[1:]])
    width = len(header)
    lam_s, body = [], []
    for lineno, row in rows[1:]:
        if len(row) != width:
            raise JsiFormatError(f"expected {width} columns, found {len(row)}", lineno)
        lam_s.append(_parse_float(row[0], lineno, "signal wavelength"))
        vals = [_parse_float(c, lineno, "intensity") for c in row[1:]]
        if any(v < 0 for v in vals):
            raise NegativeIntensityError("negative intensity", lineno)
        body.append(vals)
    lam_s = np.array(lam_s)
    jsi = np.array(body, dtype=float)
    for name, lam in (("idler", lam_i), ("signal", lam_s)):
        if len(lam) < 2:
            raise JsiFormatError(f"{name} axis needs at least two points")
        d = np.diff(lam)
        if not (np.all(d > 0) or np.all(d < 0)):
            raise JsiFormatError(f"{name} wavelength axis is not strictly monotonic")
    if not np.all(lam_s > 0) or not np.all(lam_i > 0):
        raise JsiFormatError("wavelengths must be positive")

    ws = nm_to_omega(lam_s)
    wi = nm_to_omega(lam_i)
    os_, oi = np.argsort(ws), np.argsort(wi)
    ws, wi = ws[os_], wi[oi]
    jsi = jsi[np.ix_(os_, oi)]
    grid_s, jsi = _to_uniform(ws, jsi, axis=0)
    grid_i, jsi = _to_uniform(wi, jsi, axis=1)
    amp = np.sqrt(np.clip(jsi, 0.0, None))
    return JointSpectralAmplitude.from_values(grid_s, grid_i, amp)


def _to_uniform(omega, data, axis):
    n = len(omega)
    if _uniform(omega):
        delta = (omega[-1] - omega[0]) / (n - 1)
        return FrequencyGrid(omega[0] - delta / 2, delta, n), data
    delta = (omega[-1] - omega[0]) / (n - 1)
    grid = FrequencyGrid(omega[0] - delta / 2, delta, n)
    target = grid.centers
    out = np.apply_along_axis(lambda col: np.interp(target, omega, col), axis, data)
    return grid, out


def write_jsi_csv(path, jsa, comment=None):
    """Write ``|f|^2`` in the JSI CSV format (wavelength axes, descending omega order kept)."""
    lam_s = omega_to_nm(jsa.grid_s.centers)
    lam_i = omega_to_nm(jsa.grid_i.centers)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow([""] + [repr(float(x)) for x in lam_i])
        for k, row in enumerate(jsa.intensity):
            w.writerow([repr(float(lam_s[k]))] + [repr(float(x)) for x in row])
