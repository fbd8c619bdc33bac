"""Run configuration: flat JSON with unit-suffixed keys."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import InputError
from .spectral import (
    FilterFunction,
    build_gaussian_jsa,
    default_grids,
    params_from_marginals,
)
from .swap import BsmConfig, SourcePair


@dataclass(frozen=True)
class RunConfig:
    # sources (source 2 copies source 1 unless overridden)
    lambda_s0_nm: float = 830.0
    lambda_i0_nm: float = 830.0
    fwhm_s_nm: float = 9.0
    fwhm_i_nm: float = 16.4
    schmidt_number: float = 5.0
    source2_lambda_s0_nm: float | None = None
    source2_lambda_i0_nm: float | None = None
    source2_fwhm_s_nm: float | None = None
    source2_fwhm_i_nm: float | None = None
    source2_schmidt_number: float | None = None
    # herald filters
    lambda_r_nm: float = 834.5
    lambda_b_nm: float = 825.0
    filter_fwhm_nm: float = 3.0
    filter_kind: str = "gaussian"
    # delays
    tau_idler_fs: float = 0.0
    tau_min_fs: float = -1000.0
    tau_max_fs: float = 1000.0
    n_tau: int = 401
    tau_i_min_fs: float = 0.0
    tau_i_max_fs: float = 260.0
    n_tau_i: int = 27
    # grids
    n_bins: int = 256
    span_std: float = 6.0
    # oracle preset
    oracle_n_bins: int = 32
    oracle_schmidt_number: float = 3.0
    oracle_herald_offset_std: float = 1.6
    oracle_n_tau: int = 61
    # fit demos
    noise_fraction: float = 0.0
    # HOM calibration
    hom_filter_nm: float = 830.0
    hom_filter_fwhm_nm: float = 3.0
    # optional measured JSI for the schmidt command
    jsi_csv: str | None = None

    def __post_init__(self):
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if f.name in ("filter_kind", "jsi_csv"):
                continue
            if v is None and f.name.startswith("source2_"):
                continue
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise InputError(f"{f.name} must be a number, got {v!r}")
            if not math.isfinite(v):
                raise InputError(f"{f.name} must be finite")
        for name in ("n_tau", "n_tau_i", "n_bins", "oracle_n_bins", "oracle_n_tau"):
            if int(getattr(self, name)) != getattr(self, name):
                raise InputError(f"{name} must be an integer")
        for name in ("lambda_s0_nm", "lambda_i0_nm", "fwhm_s_nm", "fwhm_i_nm",
                     "lambda_r_nm", "lambda_b_nm", "hom_filter_nm", "span_std"):
            if getattr(self, name) <= 0:
                raise InputError(f"{name} must be positive")
        if self.filter_kind not in ("gaussian", "delta-bin"):
            raise InputError(f"filter_kind must be 'gaussian' or 'delta-bin', not {self.filter_kind!r}")
        if self.filter_kind == "gaussian" and self.filter_fwhm_nm <= 0:
            raise InputError("filter_fwhm_nm must be positive")
        if not 0 <= self.noise_fraction < 1:
            raise InputError("noise_fraction must lie in [0, 1)")
        if self.n_bins < 8 or self.oracle_n_bins < 8:
            raise InputError("grids need at least 8 bins")

    def to_dict(self):
        return dataclasses.asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    def replace(self, **changes):
        return dataclasses.replace(self, **{k: v for k, v in changes.items() if v is not None})

    # builders

    def source_params(self, which=1):
        def pick(name):
            v = getattr(self, f"source2_{name}") if which == 2 else None
            return getattr(self, name) if v is None else v

        return params_from_marginals(pick("lambda_s0_nm"), pick("lambda_i0_nm"), pick("fwhm_s_nm"),
                                     pick("fwhm_i_nm"), pick("schmidt_number"))

    def sources(self):
        p1 = self.source_params(1)
        gs, gi = default_grids(p1, int(self.n_bins), self.span_std)
        jsa1 = build_gaussian_jsa(p1, gs, gi)
        p2 = self.source_params(2)
        jsa2 = jsa1 if p2 == p1 else build_gaussian_jsa(p2, gs, gi)
        return SourcePair(jsa1, jsa2)

    def filters(self):
        if self.filter_kind == "delta-bin":
            return FilterFunction.delta_nm(self.lambda_r_nm), FilterFunction.delta_nm(self.lambda_b_nm)
        return (FilterFunction.gaussian_nm(self.lambda_r_nm, self.filter_fwhm_nm),
                FilterFunction.gaussian_nm(self.lambda_b_nm, self.filter_fwhm_nm))

    def bsm(self, tau_idler=None):
        r, b = self.filters()
        return BsmConfig(r, b, self.tau_idler_fs if tau_idler is None else tau_idler)


def load_config(path=None, **overrides):
    """Defaults, then the JSON file at ``path``, then non-None ``overrides``."""
    data = {}
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise InputError(f"cannot read config {path}: {exc.strerror}") from None
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
        if not isinstance(data, dict):
            raise InputError(f"{path}: top level must be an object")
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise InputError(f"unknown config keys: {', '.join(unknown)}")
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig(**data)
    except TypeError as exc:
        raise InputError(str(exc)) from None
