"""Least-squares fit of two-photon interferograms.

Model: ``P(tau) = A (1 + V exp(-beta tau^2) cos(delta_omega tau + phase))``.
The optimizer is a small Levenberg-Marquardt loop with an analytic Jacobian and
box constraints ``0 <= V <= 1``, ``beta >= 0`` enforced by projection.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateDataError, InputError, JsiFormatError, NonConvergenceError

PARAM_NAMES = ("amplitude", "visibility", "beta", "delta_omega", "phase")


@dataclass(frozen=True)
class FringeParams:
    amplitude: float
    visibility: float
    beta: float
    delta_omega: float
    phase: float = 0.0

    @property
    def period(self):
        return 2 * math.pi / abs(self.delta_omega) if self.delta_omega else math.inf

    @property
    def envelope_fwhm(self):
        """FWHM of ``exp(-beta tau^2)``."""
        return 2.0 * math.sqrt(math.log(2.0) / self.beta) if self.beta > 0 else math.inf

    def as_array(self):
        return np.array([self.amplitude, self.visibility, self.beta, self.delta_omega, self.phase])

    def to_dict(self):
        return {name: float(v) for name, v in zip(PARAM_NAMES, self.as_array())}


def fringe_model(params, taus):
    taus = np.asarray(taus, dtype=float)
    a, v, b, dw, ph = params.as_array()
    return a * (1.0 + v * np.exp(-b * taus**2) * np.cos(dw * taus + ph))


@dataclass(frozen=True)
class Interferogram:
    """Delay scan; ``kind`` is ``"probability"`` or ``"counts"`` (Poisson weights)."""

    taus: np.ndarray
    values: np.ndarray
    sigmas: np.ndarray | None = None
    kind: str = "probability"

    def __post_init__(self):
        taus = np.asarray(self.taus, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "values", values)
        if taus.shape != values.shape or taus.ndim != 1:
            raise InputError("taus and values must be 1-D and of equal length")
        if np.any(np.diff(taus) <= 0):
            raise InputError("taus must be strictly increasing")
        if np.any(values < 0):
            raise InputError("values must be non-negative")
        if self.sigmas is not None:
            sig = np.asarray(self.sigmas, dtype=float)
            if sig.shape != taus.shape or np.any(sig <= 0):
                raise InputError("sigmas must be positive and match taus")
            object.__setattr__(self, "sigmas", sig)
        if self.kind not in ("probability", "counts"):
            raise InputError(f"unknown interferogram kind {self.kind!r}")

    def weights(self):
        if self.sigmas is not None:
            return 1.0 / self.sigmas
        if self.kind == "counts":
            return 1.0 / np.sqrt(np.maximum(self.values, 1.0))
        return np.ones_like(self.values)

    def scaled(self, k):
        sig = None if self.sigmas is None else self.sigmas * k
        return Interferogram(self.taus, self.values * k, sig, self.kind)


@dataclass(frozen=True)
class FitResult:
    params: FringeParams
    covariance: np.ndarray = field(repr=False)
    stderr: dict
    residual_norm: float
    initial_residual_norm: float
    iterations: int
    beta_unreliable: bool
    delta_omega_identifiable: bool
    fit_phase: bool

    def to_dict(self):
        p = self.params
        return {
            "params": p.to_dict(),
            "stderr": self.stderr,
            "period_fs": p.period,
            "envelope_fwhm_fs": p.envelope_fwhm,
            "residual_norm": self.residual_norm,
            "initial_residual_norm": self.initial_residual_norm,
            "iterations": self.iterations,
            "beta_unreliable": self.beta_unreliable,
            "delta_omega_identifiable": self.delta_omega_identifiable,
            "fit_phase": self.fit_phase,
        }


def _check_data(data):
    if data.taus.size < 8:
        raise DegenerateDataError("need at least 8 points")
    if not np.any(data.values > 0):
        raise DegenerateDataError("all values are zero")


def initial_guess(data):
    """Moment and periodogram estimates; phase starts at 0."""
    taus, y = data.taus, data.values
    a = float(np.mean(y))
    dev = y - a
    span = taus[-1] - taus[0]
    if not np.any(np.abs(dev) > 1e-12 * max(abs(a), 1e-300)):
        return FringeParams(a, 0.0, 1.0 / span**2 if span > 0 else 0.0, 2 * math.pi / span, 0.0)
    # DFT bins of a uniform scan of the same span
    n = taus.size
    k = np.arange(1, n // 2 + 1)
    freqs = 2 * math.pi * k / span
    power = np.abs(np.exp(-1j * np.outer(freqs, taus)) @ dev) ** 2
    m = int(np.argmax(power))
    dw = freqs[m]
    if 0 < m < len(power) - 1:
        # parabolic refinement of the peak
        y0, y1, y2 = power[m - 1], power[m], power[m + 1]
        denom = y0 - 2 * y1 + y2
        if denom < 0:
            dw += 0.5 * (y0 - y2) / denom * (freqs[1] - freqs[0])
    v = float(np.clip((y.max() - a) / a, 0.0, 1.0)) if a > 0 else 0.0
    env = np.abs(dev)
    w = env / env.sum()
    center = np.sum(w * taus)
    var = np.sum(w * (taus - center) ** 2)
    beta = 1.0 / (2.0 * var) if var > 0 else 0.0
    return FringeParams(a, v, float(beta), float(dw), 0.0)


def _jacobian(p, taus):
    a, v, b, dw, ph = p
    e = np.exp(-b * taus**2)
    c = np.cos(dw * taus + ph)
    s = np.sin(dw * taus + ph)
    return np.column_stack([
        1.0 + v * e * c,
        a * e * c,
        -a * v * taus**2 * e * c,
        -a * v * e * s * taus,
        -a * v * e * s,
    ])


def _model(p, taus):
    a, v, b, dw, ph = p
    return a * (1.0 + v * np.exp(-b * taus**2) * np.cos(dw * taus + ph))


def _project(p):
    p = p.copy()
    p[1] = min(max(p[1], 0.0), 1.0)
    p[2] = max(p[2], 0.0)
    return p


def _levenberg_marquardt(p0, taus, y, w, free, max_iter, rtol):
    p = _project(p0)
    r = w * (y - _model(p, taus))
    cost = float(r @ r)
    lam = 1e-3
    for it in range(1, max_iter + 1):
        jac = (w[:, None] * _jacobian(p, taus))[:, free]
        jtj = jac.T @ jac
        g = jac.T @ r
        scale = np.diag(jtj).copy()
        scale[scale <= 0] = 1e-30
        while True:
            try:
                step = np.linalg.solve(jtj + lam * np.diag(scale), g)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(jtj + lam * np.diag(scale), g, rcond=None)[0]
            trial = p.copy()
            trial[free] += step
            trial = _project(trial)
            r_new = w * (y - _model(trial, taus))
            cost_new = float(r_new @ r_new)
            if cost_new <= cost:
                break
            lam *= 10.0
            if lam > 1e16:
                return p, cost, it
        improvement = cost - cost_new
        p, r, cost_prev, cost = trial, r_new, cost, cost_new
        lam = max(lam / 10.0, 1e-12)
        if improvement <= rtol * max(cost_prev, 1e-300):
            return p, cost, it
    raise NonConvergenceError(f"fit did not converge in {max_iter} iterations")


def fit_fringes(data, fit_phase=False, max_iter=200, rtol=1e-10):
    """Fit the fringe model; returns a :class:`FitResult`.

    With ``fit_phase`` the phase is free and the fit is started from four
    phases (0, pi/2, pi, 3pi/2); the best converged solution is kept.
    """
    _check_data(data)
    taus, y = data.taus, data.values
    w = data.weights()
    guess = initial_guess(data)
    p0 = guess.as_array()
    free = np.array([True, True, True, True, fit_phase])
    r0 = w * (y - _model(_project(p0), taus))
    cost0 = float(r0 @ r0)

    if guess.visibility == 0.0 and np.ptp(y) <= 1e-12 * max(abs(guess.amplitude), 1e-300):
        # constant data: only the amplitude is identifiable
        return _result(guess, taus, y, w, np.array([True, False, False, False, False]),
                       cost0, math.sqrt(cost0), 0, fit_phase, identifiable=False)

    starts = [p0]
    if fit_phase:
        for ph in (0.5 * math.pi, math.pi, 1.5 * math.pi):
            q = p0.copy()
            q[4] = ph
            starts.append(q)
    best = None
    failure = None
    for q in starts:
        try:
            p, cost, it = _levenberg_marquardt(q, taus, y, w, free, max_iter, rtol)
        except NonConvergenceError as exc:
            failure = exc
            continue
        if best is None or cost < best[1]:
            best = (p, cost, it)
    if best is None:
        raise failure
    p, cost, it = best
    if cost > cost0:
        p, cost = _project(p0), cost0
    if fit_phase:
        p[4] = math.remainder(p[4], 2 * math.pi)
    params = FringeParams(*map(float, p))
    ident = params.visibility > 1e-6
    return _result(params, taus, y, w, free, cost, math.sqrt(cost0), it, fit_phase, ident)


def _result(params, taus, y, w, free, cost, initial_norm, it, fit_phase, identifiable):
    p = params.as_array()
    jac = (w[:, None] * _jacobian(p, taus))[:, free]
    n_free = int(free.sum())
    dof = max(taus.size - n_free, 1)
    s2 = cost / dof
    cov_free = np.linalg.pinv(jac.T @ jac) * s2
    cov = np.full((5, 5), np.nan)
    idx = np.flatnonzero(free)
    cov[np.ix_(idx, idx)] = cov_free
    stderr = {name: float(math.sqrt(cov[k, k])) if free[k] and cov[k, k] >= 0 else None
              for k, name in enumerate(PARAM_NAMES)}
    span = taus[-1] - taus[0]
    return FitResult(
        params=params,
        covariance=cov,
        stderr=stderr,
        residual_norm=math.sqrt(cost),
        initial_residual_norm=float(initial_norm),
        iterations=it,
        beta_unreliable=bool(params.envelope_fwhm > span),
        delta_omega_identifiable=bool(identifiable),
        fit_phase=fit_phase,
    )


def fringe_visibility(taus, probabilities, fit_phase=True):
    """Visibility and phase of a simulated fringe, from the fitted model."""
    res = fit_fringes(Interferogram(taus, probabilities), fit_phase=fit_phase)
    return res.params.visibility, res.params.phase


def read_interferogram_csv(path, column=None):
    """Read ``tau_fs, value, ...`` with a header row; ``#`` lines skipped.

    ``column`` selects the value column by header name (default: the second
    column).  A column named ``sigma`` supplies uncertainties; a value column
    named ``counts`` gets Poisson weights.
    """
    path = Path(path)
    rows = []
    with path.open(newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            rows.append((lineno, [c.strip() for c in row]))
    if not rows:
        raise JsiFormatError("empty interferogram file")
    head_line, header = rows[0]
    if len(header) < 2:
        raise JsiFormatError("need at least two columns", head_line)
    try:
        float(header[0])
        raise JsiFormatError("header row required", head_line)
    except ValueError:
        pass
    vcol = 1 if column is None else _column_index(header, column, head_line)
    scol = header.index("sigma") if "sigma" in header else None
    taus, vals, sigs = [], [], []
    for lineno, row in rows[1:]:
        if len(row) != len(header):
            raise JsiFormatError(f"expected {len(header)} columns, found {len(row)}", lineno)
        try:
            taus.append(float(row[0]))
            vals.append(float(row[vcol]))
            if scol is not None:
                sigs.append(float(row[scol]))
        except ValueError:
            raise JsiFormatError("non-numeric entry", lineno) from None
    kind = "counts" if header[vcol].lower() == "counts" else "probability"
    try:
        return Interferogram(np.array(taus), np.array(vals), np.array(sigs) if sigs else None, kind)
    except InputError as exc:
        raise JsiFormatError(str(exc)) from None


def _column_index(header, column, line):
    if column not in header:
        raise JsiFormatError(f"no column named {column!r}", line)
    return header.index(column)
