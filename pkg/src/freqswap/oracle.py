"""Brute-force Fock-space model of the swap on binned frequency modes.

States are stored as polynomials in creation operators acting on vacuum.  A
term is a sorted row of mode labels ``port * nb + bin`` and a complex
coefficient; linear optics is then plain substitution of creation operators
followed by collecting equal monomials.  The Fock amplitude of a monomial is
its coefficient times ``sqrt(prod m!)`` over the mode multiplicities ``m``, so
every norm and probability below carries that factor explicitly.

Nothing here assumes Gaussian packets, orthogonal colours or ideal weights;
the module exists to check the closed forms in :mod:`freqswap.swap`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BudgetExceededError,
    DimensionMismatchError,
    InputError,
    UnknownPortError,
    ZeroHeraldError,
)
from .spectral import FrequencyGrid

PORTS = ("a1", "a2", "b1", "b2", "c", "d", "x", "y")
SIGNAL_PORTS = frozenset({"a1", "a2", "x", "y"})
_PORT_INDEX = {p: k for k, p in enumerate(PORTS)}

DEFAULT_CUTOFF = 1e-10
DEFAULT_BUDGET_BYTES = 2 * 1024**3
_BYTES_PER_TERM = 4 * 8 + 16 + 8


def _port(name):
    try:
        return _PORT_INDEX[name]
    except KeyError:
        raise UnknownPortError(f"unknown port {name!r}; expected one of {PORTS}") from None


@dataclass(frozen=True)
class ModeLabel:
    port: str
    bin: int


@dataclass(frozen=True)
class Component:
    """One pure state of a mixture; ``coeffs`` have unit Fock norm."""

    name: str
    weight: float
    labels: np.ndarray = field(repr=False)
    coeffs: np.ndarray = field(repr=False)

    @property
    def n_terms(self):
        return len(self.coeffs)

    @property
    def n_photons(self):
        return self.labels.shape[1]


@dataclass(frozen=True)
class FockMixture:
    """Incoherent mixture of fixed-photon-number states on binned modes."""

    grid_s: FrequencyGrid
    grid_i: FrequencyGrid
    components: tuple

    @property
    def nb(self):
        return max(self.grid_s.n_bins, self.grid_i.n_bins)

    @property
    def weights(self):
        return tuple(c.weight for c in self.components)

    def component(self, name):
        for c in self.components:
            if c.name == name:
                return c
        raise KeyError(name)

    def label(self, port, bin_):
        grid = self.grid_s if port in SIGNAL_PORTS else self.grid_i
        if not 0 <= bin_ < grid.n_bins:
            raise InputError(f"bin {bin_} outside port {port} grid")
        return _port(port) * self.nb + bin_

    def decode(self, label):
        return ModeLabel(PORTS[label // self.nb], int(label % self.nb))

    def omegas(self, labels):
        """Angular frequency of each label."""
        port = labels // self.nb
        b = labels % self.nb
        is_sig = np.isin(port, [_PORT_INDEX[p] for p in SIGNAL_PORTS])
        return np.where(is_sig, self.grid_s.omega_min + (b + 0.5) * self.grid_s.delta_omega,
                        self.grid_i.omega_min + (b + 0.5) * self.grid_i.delta_omega)

    def _replace(self, components):
        return FockMixture(self.grid_s, self.grid_i, tuple(components))


BinnedFourPhotonState = FockMixture
HeraldedMixture = FockMixture


def bosonic_factor(labels):
    """``prod m!`` over label multiplicities of each sorted row."""
    n, k = labels.shape
    factor = np.ones(n)
    run = np.ones(n)
    for col in range(1, k):
        same = labels[:, col] == labels[:, col - 1]
        run = np.where(same, run + 1, 1)
        factor = factor * np.where(same, run, 1)
    return factor


def fock_norm2(labels, coeffs):
    return float(np.sum(np.abs(coeffs) ** 2 * bosonic_factor(labels)))


def _encode(labels, base):
    code = np.zeros(labels.shape[0], dtype=np.int64)
    for col in range(labels.shape[1]):
        code = code * base + labels[:, col]
    return code


def _decode(codes, base, k):
    out = np.empty((codes.size, k), dtype=np.int64)
    c = codes.copy()
    for col in range(k - 1, -1, -1):
        out[:, col] = c % base
        c //= base
    return out


def _collect(labels, coeffs, base):
    """Sort rows, merge equal monomials, return (labels, coeffs, inverse)."""
    labels = np.sort(labels, axis=1)
    codes = _encode(labels, base)
    uniq, inverse = np.unique(codes, return_inverse=True)
    summed = (np.bincount(inverse, weights=coeffs.real, minlength=uniq.size)
              + 1j * np.bincount(inverse, weights=coeffs.imag, minlength=uniq.size))
    return _decode(uniq, base, labels.shape[1]), summed, inverse


def _pairs(jsa, cutoff):
    m = jsa.mode_matrix()
    keep = np.abs(m) > cutoff * np.abs(m).max()
    j, k = np.nonzero(keep)
    return j, k, m[j, k]


def estimate_memory(sources, cutoff=DEFAULT_CUTOFF):
    """Rough peak bytes of :func:`build_four_photon_state` plus one idler splitter."""
    n1 = len(_pairs(sources.jsa_1, cutoff)[0])
    n2 = len(_pairs(sources.jsa_2, cutoff)[0])
    terms = n1 * n2 + n1 * n1 + n2 * n2
    # splitter expansion quadruples the rows; sorting copies them twice more
    return terms * 4 * 3 * _BYTES_PER_TERM


def build_four_photon_state(sources, cutoff=DEFAULT_CUTOFF, coherent=False,
                            budget_bytes=DEFAULT_BUDGET_BYTES):
    """Four-photon term of two SPDC sources on the JSA bin modes.

    Components ``psi12`` (one pair per source), ``psi11`` and ``psi22`` (both
    pairs from one source) carry the expansion weights ``1, 1/4, 1/4`` of the
    unnormalized kets, renormalized after each ket is normalized.  With
    ``coherent=True`` a single component holds ``psi12 + psi11/2 + psi22/2``,
    i.e. the pump-phase-locked superposition.  JSA bin amplitudes below
    ``cutoff`` times the peak are dropped.
    """
    need = estimate_memory(sources, cutoff)
    if need > budget_bytes:
        raise BudgetExceededError(
            f"four-photon state needs about {need / 1024**2:.0f} MiB "
            f"(budget {budget_bytes / 1024**2:.0f} MiB); use fewer bins or a larger cutoff"
        )
    gs, gi = sources.grid_s, sources.grid_i
    nb = max(gs.n_bins, gi.n_bins)
    base = len(PORTS) * nb
    a1, a2, b1, b2 = (_port(p) * nb for p in ("a1", "a2", "b1", "b2"))

    j1, k1, f1 = _pairs(sources.jsa_1, cutoff)
    j2, k2, f2 = _pairs(sources.jsa_2, cutoff)

    def product(ja, ka, fa, pa, qa, jb, kb, fb, pb, qb):
        p, q = np.meshgrid(np.arange(len(fa)), np.arange(len(fb)), indexing="ij")
        p, q = p.ravel(), q.ravel()
        rows = np.column_stack([pa + ja[p], qa + ka[p], pb + jb[q], qb + kb[q]])
        return _collect(rows, fa[p] * fb[q], base)[:2]

    kets = {
        "psi12": product(j1, k1, f1, a1, b1, j2, k2, f2, a2, b2),
        "psi11": product(j1, k1, f1, a1, b1, j1, k1, f1, a1, b1),
        "psi22": product(j2, k2, f2, a2, b2, j2, k2, f2, a2, b2),
    }
    expansion = {"psi12": 1.0, "psi11": 0.5, "psi22": 0.5}
    grid_state = FockMixture(gs, gi, ())
    if coherent:
        rows = np.vstack([kets[n][0] for n in kets])
        coeffs = np.concatenate([expansion[n] * kets[n][1] for n in kets])
        rows, coeffs, _ = _collect(rows, coeffs, base)
        coeffs = coeffs / math.sqrt(fock_norm2(rows, coeffs))
        return grid_state._replace([Component("coherent", 1.0, rows, coeffs)])

    comps = []
    for name, (rows, coeffs) in kets.items():
        n2 = fock_norm2(rows, coeffs)
        comps.append(Component(name, expansion[name] ** 2 * n2, rows, coeffs / math.sqrt(n2)))
    total = sum(c.weight for c in comps)
    return grid_state._replace(
        [Component(c.name, c.weight / total, c.labels, c.coeffs) for c in comps]
    )


def _expand(state, labels, coeffs, in_ports, out_ports):
    """Substitute ``p -> (u + v)/sqrt2`` and ``q -> e^{iwt}(u - v)/sqrt2``.

    Returns raw rows, coefficients and, per row, the summed frequency of the
    photons that came from ``q`` (the delay phase is ``exp(i tau * freq)``).
    """
    nb = state.nb
    p, q = (_port(x) for x in in_ports)
    u, v = (_port(x) for x in out_ports)
    if (in_ports[0] in SIGNAL_PORTS) != (in_ports[1] in SIGNAL_PORTS):
        raise InputError("splitter inputs must both be signal or both idler ports")
    freq = np.zeros(len(coeffs))
    inv_sqrt2 = 1.0 / math.sqrt(2.0)
    for col in range(labels.shape[1]):
        port = labels[:, col] // nb
        b = labels[:, col] % nb
        m_p = port == p
        m_q = port == q
        keep = ~(m_p | m_q)
        parts_l, parts_c, parts_f = [labels[keep]], [coeffs[keep]], [freq[keep]]
        for mask, sign_v in ((m_p, 1.0), (m_q, -1.0)):
            if not mask.any():
                continue
            rows = labels[mask]
            c = coeffs[mask] * inv_sqrt2
            f = freq[mask]
            if sign_v < 0:
                f = f + state.omegas(rows[:, col])
            for out, sign in ((u, 1.0), (v, sign_v)):
                r2 = rows.copy()
                r2[:, col] = out * nb + b[mask]
                parts_l.append(r2)
                parts_c.append(sign * c)
                parts_f.append(f)
        labels = np.vstack(parts_l)
        coeffs = np.concatenate(parts_c)
        freq = np.concatenate(parts_f)
    return labels, coeffs, freq


def _check_ports_present(state, in_ports):
    idx = [_port(p) for p in in_ports]
    for comp in state.components:
        if np.isin(comp.labels // state.nb, idx).any():
            return
    raise InputError(f"no photons in ports {in_ports}")


def apply_beamsplitter(state, in_ports, out_ports, tau=0.0):
    """Balanced splitter from ``in_ports`` to ``out_ports``.

    The second input is delayed by ``tau`` (fs): its creation operators pick
    up ``exp(i omega tau)`` before ``p -> (u + v)/sqrt2``, ``q -> (u - v)/sqrt2``.
    """
    if len(in_ports) != 2 or len(out_ports) != 2:
        raise InputError("a splitter has two inputs and two outputs")
    for name in (*in_ports, *out_ports):
        _port(name)
    _check_ports_present(state, in_ports)
    base = len(PORTS) * state.nb
    comps = []
    for comp in state.components:
        rows, c, f = _expand(state, comp.labels, comp.coeffs, in_ports, out_ports)
        c = c * np.exp(1j * f * tau)
        rows, c, _ = _collect(rows, c, base)
        comps.append(Component(comp.name, comp.weight, rows, c))
    return state._replace(comps)


_HERALD_NAMES = {"psi12": "singlet", "psi11": "double_1", "psi22": "double_2", "coherent": "coherent"}


def _herald_component(state, comp, c_label, d_label):
    nb = state.nb
    ports = comp.labels // nb
    n_c = np.sum(ports == _port("c"), axis=1)
    n_d = np.sum(ports == _port("d"), axis=1)
    hit = (n_c == 1) & (n_d == 1)
    hit &= np.any(comp.labels == c_label, axis=1) & np.any(comp.labels == d_label, axis=1)
    rows = comp.labels[hit]
    keep = (rows != c_label) & (rows != d_label)
    rest = rows[keep].reshape(len(rows), comp.n_photons - 2)
    return rest, comp.coeffs[hit]


def project_bsm(state, bin_r, bin_b):
    """Herald on one photon in ``(c, bin_r)`` and one in ``(d, bin_b)``.

    Returns the normalized two-photon mixture over the signal ports and the
    herald probability.  Component names become ``singlet``, ``double_1`` and
    ``double_2``.
    """
    if bin_r == bin_b:
        raise InputError("herald bins must differ for a two-colour measurement")
    return project_bsm_filtered(state, _one_hot(state.grid_i, bin_r), _one_hot(state.grid_i, bin_b))


def _one_hot(grid, k):
    if not 0 <= k < grid.n_bins:
        raise InputError(f"bin {k} outside idler grid")
    w = np.zeros(grid.n_bins)
    w[k] = 1.0
    return w


def project_bsm_filtered(state, weights_r, weights_b, min_weight=1e-12):
    """Herald through filters with per-bin intensity transmissions.

    Each pair of herald bins gives its own component (the detectors are
    frequency resolving in principle, so different bins never interfere),
    weighted by ``|t_r|^2 |t_b|^2``.
    """
    weights_r = np.asarray(weights_r, dtype=float)
    weights_b = np.asarray(weights_b, dtype=float)
    if weights_r.shape != (state.grid_i.n_bins,) or weights_b.shape != weights_r.shape:
        raise DimensionMismatchError("filter weights must match the idler grid")
    idler_in = [_port("b1"), _port("b2")]
    if any(np.isin(c.labels // state.nb, idler_in).any() for c in state.components):
        raise InputError("idler splitter has not been applied")
    rs = np.flatnonzero(weights_r > min_weight * weights_r.max())
    bs = np.flatnonzero(weights_b > min_weight * weights_b.max())
    comps, probs = [], []
    for comp in state.components:
        name = _HERALD_NAMES.get(comp.name, comp.name)
        for r in rs:
            for b in bs:
                if r == b:
                    continue
                rest, c = _herald_component(state, comp, state.label("c", r), state.label("d", b))
                if not len(c):
                    continue
                n2 = fock_norm2(rest, c)
                p = comp.weight * weights_r[r] * weights_b[b] * n2
                if n2 <= 0:
                    continue
                suffix = "" if len(rs) == 1 and len(bs) == 1 else f"@{r},{b}"
                comps.append(Component(name + suffix, p, rest, c / math.sqrt(n2)))
                probs.append(p)
    total = float(sum(probs))
    if not total > 1e-300:
        raise ZeroHeraldError(f"herald probability {total:.3g} underflows")
    out = [Component(c.name, c.weight / total, c.labels, c.coeffs) for c in comps]
    return state._replace(out), total


def heralded_weights(mixture):
    """Total weight per component family (singlet, double_1, double_2)."""
    out = {}
    for c in mixture.components:
        key = c.name.split("@")[0]
        out[key] = out.get(key, 0.0) + c.weight
    return out


def coincidence_scan(mixture, taus):
    """Probability of one photon in each output of the signal splitter.

    The splitter takes ``a1, a2 -> x, y`` with ``a2`` delayed by each ``tau``.
    """
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    base = len(PORTS) * mixture.nb
    x, y = _port("x"), _port("y")
    out = np.zeros(taus.size)
    for comp in mixture.components:
        rows, c, f = _expand(mixture, comp.labels, comp.coeffs, ("a1", "a2"), ("x", "y"))
        uniq, _, inverse = _collect(rows, np.zeros(len(c), dtype=complex), base)
        ports = uniq // mixture.nb
        xy = (np.sum(ports == x, axis=1) == 1) & (np.sum(ports == y, axis=1) == 1)
        xy &= ports.shape[1] == 2
        for k, t in enumerate(taus):
            ct = c * np.exp(1j * f * t)
            amp = (np.bincount(inverse, weights=ct.real, minlength=len(uniq))
                   + 1j * np.bincount(inverse, weights=ct.imag, minlength=len(uniq)))
            out[k] += comp.weight * float(np.sum(np.abs(amp[xy]) ** 2))
    return out


def amplitude_matrix(mixture, comp):
    """Two-photon amplitudes ``A[j, k]`` for ``a1`` in bin ``j`` and ``a2`` in bin ``k``."""
    n = mixture.grid_s.n_bins
    a = np.zeros((n, n), dtype=complex)
    ports = comp.labels // mixture.nb
    sep = (ports[:, 0] == _port("a1")) & (ports[:, 1] == _port("a2"))
    rows = comp.labels[sep] % mixture.nb
    a[rows[:, 0], rows[:, 1]] = comp.coeffs[sep]
    return a


def antisymmetry_residual(mixture, name="singlet"):
    """``max |A[j,k] + A[k,j]|`` of a separated-port component, relative to ``max |A|``."""
    a = amplitude_matrix(mixture, mixture.component(name))
    return float(np.max(np.abs(a + a.T)) / np.max(np.abs(a)))


def herald_exchange_residual(state, bin_r, bin_b, name="singlet"):
    """``max |A_rb + A_br|`` relative to ``max |A_rb|``.

    Swapping the two herald colours flips the sign of the heralded singlet for
    any pair of sources, matched or not.
    """
    m_rb, _ = project_bsm(state, bin_r, bin_b)
    m_br, _ = project_bsm(state, bin_b, bin_r)
    a = amplitude_matrix(m_rb, m_rb.component(name))
    b = amplitude_matrix(m_br, m_br.component(name))
    return float(np.max(np.abs(a + b)) / np.max(np.abs(a)))


def joint_spectrum_heralded(mixture, by_component=False):
    """Joint probability of the two signal photons' bins.

    Separated-port components fill ``M[j, k]`` with ``a1`` at ``j`` and ``a2``
    at ``k``; same-port pairs (double emissions) are split evenly over both
    orderings.  The total mass is one.
    """
    n = mixture.grid_s.n_bins
    total = np.zeros((n, n))
    parts = {}
    for comp in mixture.components:
        m = np.zeros((n, n))
        bins = comp.labels % mixture.nb
        ports = comp.labels // mixture.nb
        p = np.abs(comp.coeffs) ** 2 * bosonic_factor(comp.labels)
        sep = ports[:, 0] != ports[:, 1]
        np.add.at(m, (bins[sep, 0], bins[sep, 1]), p[sep])
        same = ~sep
        np.add.at(m, (bins[same, 0], bins[same, 1]), 0.5 * p[same])
        np.add.at(m, (bins[same, 1], bins[same, 0]), 0.5 * p[same])
        m *= comp.weight
        total += m
        key = comp.name.split("@")[0]
        parts[key] = parts.get(key, 0.0) + m
    return (total, parts) if by_component else total


def port_spectrum(mixture, comp, port):
    """Mean photon number per bin in ``port`` for one component."""
    grid = mixture.grid_s if port in SIGNAL_PORTS else mixture.grid_i
    target = _port(port)
    p = np.abs(comp.coeffs) ** 2 * bosonic_factor(comp.labels)
    out = np.zeros(grid.n_bins)
    for col in range(comp.n_photons):
        sel = comp.labels[:, col] // mixture.nb == target
        np.add.at(out, comp.labels[sel, col] % mixture.nb, p[sel])
    return out


def oracle_coincidences(sources, bin_r, bin_b, taus, tau_i=0.0, cutoff=DEFAULT_CUTOFF):
    """Full pipeline with delta herald bins: build, split idlers, herald, scan."""
    state = build_four_photon_state(sources, cutoff)
    state = apply_beamsplitter(state, ("b1", "b2"), ("c", "d"), tau_i)
    mixture, p_herald = project_bsm(state, bin_r, bin_b)
    return coincidence_scan(mixture, taus), mixture, p_herald


def ideal_setup(params, n_bins=32, herald_offset_std=1.6, span_std=6.0):
    """Small grid with delta heralds far enough apart that the colours are orthogonal.

    The herald bins sit ``herald_offset_std`` idler intensity std either side
    of the idler centre.  Returns ``(sources, bin_r, bin_b)``.
    """
    from .spectral import build_gaussian_jsa, default_grids
    from .swap import SourcePair

    gs, gi = default_grids(params, n_bins, span_std)
    jsa = build_gaussian_jsa(params, gs, gi)
    off = herald_offset_std * params.idler_intensity_std
    bin_r = gi.bin_index(params.omega_i0 - off)
    bin_b = gi.bin_index(params.omega_i0 + off)
    return SourcePair.identical(jsa), bin_r, bin_b


def oracle_check(sources, bin_r, bin_b, n_tau=61, cutoff=DEFAULT_CUTOFF):
    """Compare the oracle with the closed form over ``+-3 / sigma``.

    Returns a dict with the maximum deviation, ``P(0)``, the heralded weights,
    the singlet antisymmetry residual and the herald-colour exchange residual.
    """
    from .spectral import FilterFunction
    from .swap import BsmConfig, coincidence_ideal, heralded_state

    gi = sources.grid_i
    bsm = BsmConfig(FilterFunction("delta-bin", gi.bin_center(bin_r)),
                    FilterFunction("delta-bin", gi.bin_center(bin_b)))
    hs = heralded_state(sources, bsm)
    taus = np.linspace(-3.0 / hs.sigma, 3.0 / hs.sigma, n_tau)
    state = apply_beamsplitter(build_four_photon_state(sources, cutoff), ("b1", "b2"), ("c", "d"))
    mixture, p_herald = project_bsm(state, bin_r, bin_b)
    p_oracle = coincidence_scan(mixture, taus)
    p_analytic = coincidence_ideal(hs, taus)
    weights = heralded_weights(mixture)
    return {
        "max_abs_deviation": float(np.max(np.abs(p_oracle - p_analytic))),
        "p_oracle_tau0": float(coincidence_scan(mixture, [0.0])[0]),
        "weights": [weights.get(k, 0.0) for k in ("singlet", "double_1", "double_2")],
        "antisymmetry_residual": antisymmetry_residual(mixture),
        "herald_exchange_residual": herald_exchange_residual(state, bin_r, bin_b),
        "herald_probability": p_herald,
        "n_bins": sources.grid_s.n_bins,
        "n_tau": int(n_tau),
        "tau_range_fs": [float(taus[0]), float(taus[-1])],
    }


def state_from_terms(grid_s, grid_i, terms, name="state"):
    """Normalized pure state from ``{((port, bin), ...): coefficient}``.

    Each key lists the creation operators of one monomial; repeated modes mean
    multiple photons in that mode.
    """
    if not terms:
        raise InputError("no terms given")
    shell = FockMixture(grid_s, grid_i, ())
    sizes = {len(k) for k in terms}
    if len(sizes) != 1:
        raise InputError("all terms must have the same photon number")
    rows = np.array([[shell.label(p, b) for p, b in key] for key in terms], dtype=np.int64)
    coeffs = np.array(list(terms.values()), dtype=complex)
    rows, coeffs, _ = _collect(rows, coeffs, len(PORTS) * shell.nb)
    n2 = fock_norm2(rows, coeffs)
    if not n2 > 0:
        raise InputError("state has zero norm")
    return shell._replace([Component(name, 1.0, rows, coeffs / math.sqrt(n2))])


def fock_amplitudes(comp):
    """``{tuple of (port index, bin): Fock amplitude}`` for one component."""
    amps = comp.coeffs * np.sqrt(bosonic_factor(comp.labels))
    return {tuple(int(x) for x in row): complex(a) for row, a in zip(comp.labels, amps)}
