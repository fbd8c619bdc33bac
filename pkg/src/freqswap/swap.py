"""Heralded two-colour Bell state and its two-photon interference.

Conventions
-----------
* ``R`` and ``B`` label the heralded signal packets, with ``omega_B > omega_R``.
  ``R`` is heralded by the blue idler filter ``b`` and ``B`` by the red one
  ``r`` (frequency anticorrelation).
* A delay ``tau`` on the second input of a splitter multiplies its creation
  operators by ``exp(i omega tau)``.  The idler delay acts on source 2's idler.
* The singlet with relative phase is ``|R>1|B>2 - exp(i phi)|B>1|R>2`` with
  ``phi = (omega_b - omega_r) tau_idler``.  With these conventions the slow
  fringe is ``cos[(omega_b - omega_r) tau_i - (omega_B - omega_R) tau_s]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, GridTooCoarseError, HeraldOffGridError, InputError
from .spectral import (
    FilterFunction,
    JointSpectralAmplitude,
    SpectralAmplitude,
    heralded_amplitude,
    heralded_purity,
)

# smallest number of samples per period of the per-bin phase in an overlap sum
MIN_SAMPLES_PER_PERIOD = 8


@dataclass(frozen=True)
class SourcePair:
    jsa_1: JointSpectralAmplitude
    jsa_2: JointSpectralAmplitude

    def __post_init__(self):
        if self.jsa_1.grid_s != self.jsa_2.grid_s or self.jsa_1.grid_i != self.jsa_2.grid_i:
            raise DimensionMismatchError("both sources must share their grids")

    @classmethod
    def identical(cls, jsa):
        return cls(jsa, jsa)

    @property
    def grid_s(self):
        return self.jsa_1.grid_s

    @property
    def grid_i(self):
        return self.jsa_1.grid_i


@dataclass(frozen=True)
class BsmConfig:
    filter_r: FilterFunction
    filter_b: FilterFunction
    tau_idler: float = 0.0

    @property
    def delta_Omega(self):
        """Idler filter separation ``omega_b - omega_r``."""
        return self.filter_b.center - self.filter_r.center


@dataclass(frozen=True)
class HeraldedState:
    weight_singlet: float
    weight_double_1: float
    weight_double_2: float
    phi_R: SpectralAmplitude
    phi_B: SpectralAmplitude
    relative_phase: float = 0.0
    purity_R: float = 1.0
    purity_B: float = 1.0

    def __post_init__(self):
        w = (self.weight_singlet, self.weight_double_1, self.weight_double_2)
        if min(w) < 0 or abs(sum(w) - 1.0) > 1e-9:
            raise InputError(f"weights {w} must be non-negative and sum to 1")

    @property
    def omega_R(self):
        return self.phi_R.mean()

    @property
    def omega_B(self):
        return self.phi_B.mean()

    @property
    def delta_omega(self):
        return self.omega_B - self.omega_R

    @property
    def sigma(self):
        """Common packet width: mean of the two moment-matched amplitude sigmas."""
        return 0.5 * (self.phi_R.gaussian_sigma() + self.phi_B.gaussian_sigma())

    @property
    def period(self):
        return 2 * math.pi / abs(self.delta_omega)

    @property
    def envelope_fwhm(self):
        """FWHM (fs) of ``exp(-tau^2 sigma^2 / 2)``."""
        return 2.0 * math.sqrt(2.0 * math.log(2.0)) / self.sigma


@dataclass(frozen=True)
class FringePrediction:
    taus: np.ndarray
    probabilities: np.ndarray
    visibility: float
    period: float
    envelope_fwhm: float


def heralded_state(sources, bsm):
    """Heralded signal state in the frequency-resolved limit.

    Packets come from source 1.  Weights keep their ideal values for any filter;
    finite filters only show up in ``purity_R`` / ``purity_B``.
    """
    jsa = sources.jsa_1
    for name, flt in (("filter_r", bsm.filter_r), ("filter_b", bsm.filter_b)):
        if not jsa.grid_i.contains(flt.center):
            raise HeraldOffGridError(f"{name} centre is off the idler grid")
    phi_R = heralded_amplitude(jsa, bsm.filter_b)
    phi_B = heralded_amplitude(jsa, bsm.filter_r)
    if phi_R.mean() > phi_B.mean():
        raise InputError("filter_b must herald the lower-frequency (red) signal packet")

    def _purity(flt):
        return 1.0 if flt.kind == "delta-bin" else heralded_purity(jsa, flt)

    return HeraldedState(
        weight_singlet=0.5,
        weight_double_1=0.25,
        weight_double_2=0.25,
        phi_R=phi_R,
        phi_B=phi_B,
        relative_phase=bsm.delta_Omega * bsm.tau_idler,
        purity_R=_purity(bsm.filter_b),
        purity_B=_purity(bsm.filter_r),
    )


def coincidence_ideal(state, tau):
    """Closed-form coincidence probability behind a balanced splitter.

    ``w_s / 2 (1 + exp(-tau^2 sigma^2 / 2) cos(dw tau - phi)) + (w_1 + w_2) / 2``,
    which is ``1/2 + 1/4 exp(..) cos(..)`` for the ideal weights.
    """
    tau = np.asarray(tau, dtype=float)
    env = np.exp(-(tau**2) * state.sigma**2 / 2.0)
    osc = np.cos(state.delta_omega * tau - state.relative_phase)
    doubles = state.weight_double_1 + state.weight_double_2
    p = 0.5 * state.weight_singlet * (1.0 + env * osc) + 0.5 * doubles
    return p if p.ndim else float(p)


def fringe_prediction(state, taus):
    taus = np.asarray(taus, dtype=float)
    p = coincidence_ideal(state, taus)
    # V = (Pmax - Pmin) / (Pmax + Pmin) of the un-enveloped model
    amp = 0.5 * state.weight_singlet
    return FringePrediction(taus, p, amp / 0.5, state.period, state.envelope_fwhm)


def _filtered_distributions(jsa, bsm):
    """Normalized ``phi_R = f t_b`` and ``phi_B = f t_r`` on the joint grid."""
    out = []
    for flt in (bsm.filter_b, bsm.filter_r):
        t = np.sqrt(flt.weights(jsa.grid_i))
        phi = jsa.values * t[None, :]
        n2 = np.sum(np.abs(phi) ** 2) * jsa.bin_area
        out.append(phi / math.sqrt(n2))
    return out


def _check_sampling(grid, tau, axis):
    step = abs(tau) * grid.delta_omega
    if step > 2 * math.pi / MIN_SAMPLES_PER_PERIOD:
        raise GridTooCoarseError(
            f"{axis} delay {tau:g} fs rotates the phase by {step:.3g} rad per bin; "
            f"refine the grid or shorten the scan (limit "
            f"{2 * math.pi / MIN_SAMPLES_PER_PERIOD / grid.delta_omega:.0f} fs)"
        )


@dataclass(frozen=True)
class _Overlaps:
    """Precomputed pieces of the overlap integrals for one source pair."""

    prod_R: np.ndarray = field(repr=False)  # conj(phi_R1) * phi_R2 * area
    prod_B: np.ndarray = field(repr=False)
    ws: np.ndarray = field(repr=False)
    wi: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, sources, bsm):
        r1, b1 = _filtered_distributions(sources.jsa_1, bsm)
        r2, b2 = _filtered_distributions(sources.jsa_2, bsm)
        area = sources.jsa_1.bin_area
        return cls(np.conj(r1) * r2 * area, np.conj(b1) * b2 * area,
                   sources.grid_s.centers, sources.grid_i.centers)

    def overlap(self, which, tau_s, tau_i):
        prod = self.prod_R if which == "R" else self.prod_B
        # carrier factored out exactly; only the offsets are summed
        ps = np.exp(1j * (self.ws - self.ws[0]) * tau_s)
        pi = np.exp(1j * (self.wi - self.wi[0]) * tau_i)
        carrier = np.exp(1j * (self.ws[0] * tau_s + self.wi[0] * tau_i))
        return complex(carrier * (ps @ prod @ pi))


def overlap_integrals(sources, bsm, tau_s, tau_i):
    """``O_X = <phi_X1| exp(i(ws tau_s + wi tau_i)) |phi_X2>`` for X = R, B."""
    _check_sampling(sources.grid_s, tau_s, "signal")
    _check_sampling(sources.grid_i, tau_i, "idler")
    ov = _Overlaps.build(sources, bsm)
    return ov.overlap("R", tau_s, tau_i), ov.overlap("B", tau_s, tau_i)


def _full_from_overlaps(ov, tau_s, tau_i, include_fast_term):
    o_r = ov.overlap("R", tau_s, tau_i)
    o_b = ov.overlap("B", tau_s, tau_i)
    p = 0.5 + 0.25 * (o_r * np.conj(o_b)).real
    if include_fast_term:
        p += 0.25 * (o_r * o_b).real
    return p


def coincidence_full(sources, bsm, tau_s, tau_i=None, include_fast_term=False):
    """Finite-filter coincidence probability from discrete overlap integrals.

    ``1/2 + 1/4 Re{O_R conj(O_B)}``; the pump-coherent term ``1/4 Re{O_R O_B}``,
    which oscillates at the optical sum frequencies, is added when
    ``include_fast_term`` is set.
    """
    if tau_i is None:
        tau_i = bsm.tau_idler
    tau_s_arr = np.atleast_1d(np.asarray(tau_s, dtype=float))
    for t in (tau_s_arr.min(), tau_s_arr.max()):
        _check_sampling(sources.grid_s, t, "signal")
    _check_sampling(sources.grid_i, tau_i, "idler")
    ov = _Overlaps.build(sources, bsm)
    out = np.array([_full_from_overlaps(ov, t, tau_i, include_fast_term) for t in tau_s_arr])
    return out if np.ndim(tau_s) else float(out[0])


def fringe_map(sources, bsm, tau_s_range, tau_i_range, include_fast_term=False):
    """``P[j, k]`` at ``(tau_s_range[j], tau_i_range[k])``."""
    ts = np.asarray(tau_s_range, dtype=float)
    ti = np.asarray(tau_i_range, dtype=float)
    if ts.size < 2 or ti.size < 2:
        raise InputError("fringe map needs at least two samples per axis")
    for t in (ts.min(), ts.max()):
        _check_sampling(sources.grid_s, t, "signal")
    for t in (ti.min(), ti.max()):
        _check_sampling(sources.grid_i, t, "idler")
    ov = _Overlaps.build(sources, bsm)
    out = np.empty((ts.size, ti.size))
    for j, a in enumerate(ts):
        for k, b in enumerate(ti):
            out[j, k] = _full_from_overlaps(ov, a, b, include_fast_term)
    return out


def hom_dip(rho_1, rho_2, tau, grid):
    """Coincidences for two independent photons at a balanced splitter.

    ``P = (1 - Re Tr[rho_1 D(tau) rho_2 D(-tau)]) / 2`` with
    ``D(tau) = diag(exp(i w tau))`` on ``grid``.  At ``tau = 0`` the dip depth
    ``1 - 2 P`` is ``Tr[rho_1 rho_2]``.
    """
    rho_1 = np.asarray(rho_1)
    rho_2 = np.asarray(rho_2)
    n = grid.n_bins
    if rho_1.shape != (n, n) or rho_2.shape != (n, n):
        raise DimensionMismatchError(
            f"density matrices {rho_1.shape}, {rho_2.shape} do not match grid size {n}"
        )
    w = grid.centers - grid.centers[0]
    taus = np.atleast_1d(np.asarray(tau, dtype=float))
    out = np.empty(taus.size)
    # Tr[r1 D r2 D*] = sum_jk r1_jk r2_kj exp(i (w_k - w_j) tau)
    m = rho_1 * rho_2.T
    for n_, t in enumerate(taus):
        d = np.exp(1j * w * t)
        out[n_] = 0.5 * (1.0 - (np.conj(d) @ m @ d).real)
    return out if np.ndim(tau) else float(out[0])


def hom_visibility(rho_1, rho_2):
    """Dip visibility ``1 - P(0) / P(inf)`` = ``Re Tr[rho_1 rho_2]``."""
    return float(np.real(np.trace(rho_1 @ rho_2)))


def filtered_signal_centroids(sources, bsm):
    """Mean signal frequencies of the filtered distributions ``(R, B)`` of source 1."""
    r, b = _filtered_distributions(sources.jsa_1, bsm)
    ws = sources.grid_s.centers[:, None]
    area = sources.jsa_1.bin_area
    return tuple(float(np.sum(np.abs(x) ** 2 * ws) * area) for x in (r, b))


def coincidence_fast_averaged(sources, bsm, tau_s, n_samples=64):
    """Coincidences with the fast term, averaged over one sum-frequency period.

    The window of length ``2 pi / (omega_R + omega_B)`` (filtered centroids)
    is centred on each ``tau_s``, so the slow fringe is not shifted.
    """
    w_plus = sum(filtered_signal_centroids(sources, bsm))
    period = 2 * math.pi / w_plus
    off = (np.arange(n_samples) + 0.5) / n_samples * period - period / 2
    taus = np.atleast_1d(np.asarray(tau_s, dtype=float))
    out = np.array([coincidence_full(sources, bsm, t + off, include_fast_term=True).mean()
                    for t in taus])
    return out if np.ndim(tau_s) else float(out[0])
