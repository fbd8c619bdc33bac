"""Unit conversions.

Angular frequencies are in rad/fs, times in fs and wavelengths in nm.
Quoted spectral widths are intensity FWHM; for an amplitude Gaussian
``exp[-(w - w0)**2 / (2 sigma**2)]`` that is ``2 sigma sqrt(ln 2)``.
"""

import math

import numpy as np

C_NM_PER_FS = 299.792458
TWO_PI_C = 2.0 * math.pi * C_NM_PER_FS

_SQRT_LN2 = math.sqrt(math.log(2.0))


def nm_to_omega(wavelength_nm):
    return TWO_PI_C / np.asarray(wavelength_nm, dtype=float)


def omega_to_nm(omega):
    return TWO_PI_C / np.asarray(omega, dtype=float)


def width_nm_to_omega(width_nm, center_nm):
    """Map a small wavelength width to angular frequency at ``center_nm``."""
    return TWO_PI_C * width_nm / center_nm**2


def width_omega_to_nm(width_omega, center_nm):
    return width_omega * center_nm**2 / TWO_PI_C


def amplitude_sigma_to_fwhm(sigma):
    return 2.0 * sigma * _SQRT_LN2


def fwhm_to_amplitude_sigma(fwhm):
    return fwhm / (2.0 * _SQRT_LN2)


def intensity_std_to_fwhm(std):
    """FWHM of an intensity Gaussian ``exp[-x**2 / (2 std**2)]``."""
    return 2.0 * math.sqrt(2.0 * math.log(2.0)) * std


def fwhm_to_intensity_std(fwhm):
    return fwhm / (2.0 * math.sqrt(2.0 * math.log(2.0)))
