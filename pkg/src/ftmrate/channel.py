"""Log-distance path loss, Nakagami fading and per-MCS frame success curves.

Success curves are CDFs of the sinh-arcsinh normal distribution evaluated in
the SNR domain (dB)::

    p = Phi(sinh(tailweight * asinh((snr - location) / scale) - skewness))
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy import optimize
from scipy.special import log_ndtr, ndtr

from .core import N_MCS

MIN_DISTANCE = 0.1  # m; the log-distance model diverges at 0
_SQRT1_2 = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class ChannelParams:
    gamma0: float = 109.9906  # reference SNR, dB
    l0: float = 46.6777  # path loss at 1 m, dB
    exponent: float = 3.0

    def __post_init__(self):
        if self.exponent <= 0:
            raise ValueError("path loss exponent must be positive")


def snr_from_distance(rho, params: ChannelParams = ChannelParams()):
    """Mean SNR (dB) at distance ``rho`` (m); distances below 0.1 m are clamped."""
    r = np.maximum(rho, MIN_DISTANCE)
    return params.gamma0 - (params.l0 + 10.0 * params.exponent * np.log10(r))


def distance_from_snr(snr, params: ChannelParams = ChannelParams()):
    return 10.0 ** ((params.gamma0 - params.l0 - np.asarray(snr)) / (10.0 * params.exponent))


@dataclass(frozen=True)
class FadingModel:
    kind: str = "nakagami"  # "none" | "nakagami"
    m: float = 1.0

    def __post_init__(self):
        if self.kind not in ("none", "nakagami"):
            raise ValueError(f"unknown fading kind {self.kind!r}")
        if self.kind == "nakagami" and self.m < 0.5:
            raise ValueError("Nakagami shape m must be >= 0.5")


NO_FADING = FadingModel("none")


def sample_faded_snr(mean_snr, fading: FadingModel, rng: np.random.Generator, size=None):
    """Instantaneous SNR: mean SNR plus a unit-mean Gamma(m, 1/m) power gain in dB."""
    if fading.kind == "none":
        return mean_snr if size is None else np.full(size, mean_snr, dtype=float)
    gain = rng.gamma(fading.m, 1.0 / fading.m, size)
    return mean_snr + 10.0 * np.log10(gain)


@dataclass(frozen=True)
class SuccessModelParams:
    """Sinh-arcsinh success-curve parameters, one entry per MCS."""

    location: tuple
    scale: tuple
    skewness: tuple
    tailweight: tuple
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name in ("location", "scale", "skewness", "tailweight"):
            v = getattr(self, name)
            if len(v) != N_MCS:
                raise ValueError(f"{name} needs {N_MCS} entries, got {len(v)}")
            object.__setattr__(self, name, tuple(float(x) for x in v))
        if min(self.scale) <= 0 or min(self.tailweight) <= 0:
            raise ValueError("scale and tailweight must be positive")
        # column vectors for broadcasting against sample rows
        object.__setattr__(self, "_arrays", tuple(np.array(getattr(self, n))[:, None] for n in
                                                  ("location", "scale", "skewness", "tailweight")))

    def to_dict(self) -> dict:
        return {
            "format": "ftmrate-success-model",
            "version": 1,
            "metadata": self.metadata,
            "mcs": [
                {"mcs": i, "location": self.location[i], "scale": self.scale[i],
                 "skewness": self.skewness[i], "tailweight": self.tailweight[i]}
                for i in range(N_MCS)
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SuccessModelParams":
        rows = sorted(d["mcs"], key=lambda r: r["mcs"])
        if [r["mcs"] for r in rows] != list(range(N_MCS)):
            raise ValueError("success model must list MCS 0..11 exactly once")
        return cls(
            location=[r["location"] for r in rows],
            scale=[r["scale"] for r in rows],
            skewness=[r["skewness"] for r in rows],
            tailweight=[r["tailweight"] for r in rows],
            metadata=d.get("metadata", {}),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "SuccessModelParams":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _sas_cdf(x, loc, scale, skew, tail):
    return ndtr(np.sinh(tail * np.arcsinh((x - loc) / scale) - skew))


def success_probability(gamma, mcs: int, params: SuccessModelParams):
    """Probability of frame success at SNR ``gamma`` (dB) using ``mcs``."""
    if not 0 <= mcs < N_MCS:
        raise ValueError(f"mcs must be in [0, 11], got {mcs}")
    loc, sc, sk, tw = params.location[mcs], params.scale[mcs], params.skewness[mcs], params.tailweight[mcs]
    if np.ndim(gamma) == 0:
        u = math.sinh(tw * math.asinh((float(gamma) - loc) / sc) - sk)
        return 0.5 * math.erfc(-u * _SQRT1_2)
    return _sas_cdf(np.asarray(gamma, dtype=float), loc, sc, sk, tw)


def success_matrix(gamma, params: SuccessModelParams) -> np.ndarray:
    """Success probability for every MCS; shape (12, len(gamma))."""
    loc, sc, sk, tw = params._arrays
    return _sas_cdf(np.atleast_1d(gamma)[None, :], loc, sc, sk, tw)


# Reference PHY error model ---------------------------------------------------

# IEEE 802.11ax minimum receiver sensitivity for 20 MHz (dBm), MCS 0..11.
# Only the spacing between MCSs is used.
_RX_SENSITIVITY_DBM = (-82, -79, -77, -74, -70, -66, -65, -64, -59, -57, -54, -52)
# MCS 7 threshold placing 20 m (24.28 dB mean SNR with default channel) in
# the middle of the Rayleigh-averaged MCS 7 optimality window.
REFERENCE_MCS7_THRESHOLD = 17.4
REFERENCE_SLOPE_DB = 1.0
REFERENCE_GENERATOR_VERSION = "ref-per-1"


def reference_phy_params(mcs7_threshold: float = REFERENCE_MCS7_THRESHOLD,
                         slope: float = REFERENCE_SLOPE_DB) -> SuccessModelParams:
    """Ground-truth frame success versus instantaneous SNR (probit sigmoid per MCS)."""
    loc = [mcs7_threshold + s - _RX_SENSITIVITY_DBM[7] for s in _RX_SENSITIVITY_DBM]
    return SuccessModelParams(
        location=loc,
        scale=[slope] * N_MCS,
        skewness=[0.0] * N_MCS,
        tailweight=[1.0] * N_MCS,
        metadata={"kind": "reference-phy", "generator_version": REFERENCE_GENERATOR_VERSION},
    )


class SuccessSamples(NamedTuple):
    snr: np.ndarray
    mcs: np.ndarray
    success: np.ndarray


def generate_reference_samples(
    n_per_mcs: int,
    rng: np.random.Generator,
    fading: FadingModel = FadingModel(),
    snr_range: tuple[float, float] = (-20.0, 70.0),
    truth: SuccessModelParams | None = None,
) -> SuccessSamples:
    """Offline transmission outcomes labelled with the *mean* SNR.

    Mean SNRs are drawn uniformly; each frame sees an independently faded SNR
    and succeeds according to the ground-truth PHY curve, so a fit to these
    samples absorbs the fading into the success curve.
    """
    truth = truth or reference_phy_params()
    snr = rng.uniform(*snr_range, size=(N_MCS, n_per_mcs))
    faded = sample_faded_snr(snr, fading, rng, size=snr.shape) if fading.kind != "none" else snr
    p = np.stack([success_probability(faded[m], m, truth) for m in range(N_MCS)])
    success = rng.random(snr.shape) < p
    mcs = np.repeat(np.arange(N_MCS), n_per_mcs).reshape(N_MCS, n_per_mcs)
    return SuccessSamples(snr.ravel(), mcs.ravel(), success.ravel())


# Fitting ---------------------------------------------------------------------

class FitError(RuntimeError):
    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


def _negloglik(theta, x, y):
    loc, log_sc, sk, log_tw = theta
    sc, tw = math.exp(log_sc), math.exp(log_tw)
    z = (x - loc) / sc
    a = np.arcsinh(z)
    w = tw * a - sk
    u = np.sinh(w)
    lp, lq = log_ndtr(u), log_ndtr(-u)
    ll = np.where(y, lp, lq).sum()
    # d loglik / du
    log_phi = -0.5 * u * u - 0.5 * math.log(2 * math.pi)
    dldu = np.where(y, np.exp(log_phi - lp), -np.exp(log_phi - lq))
    dldw = dldu * np.cosh(w)
    dldz = dldw * tw / np.sqrt(1.0 + z * z)
    grad = np.array([
        -(dldz.sum()) / sc,
        -(dldz * z).sum(),
        -dldw.sum(),
        (dldw * a).sum() * tw,
    ])
    return -ll, -grad


def binned_residual(x, y, predict, width: float = 1.0, min_count: int = 30) -> float:
    """Mean |empirical - predicted| success rate over ``width``-dB SNR bins."""
    bins = np.floor(x / width).astype(int)
    p = predict(x)
    errs = []
    for b in np.unique(bins):
        sel = bins == b
        if sel.sum() >= min_count:
            errs.append(abs(y[sel].mean() - p[sel].mean()))
    return float(np.mean(errs)) if errs else float("nan")


def _fit_one(x, y, mcs, max_residual):
    n_succ = int(y.sum())
    diag = {"mcs": mcs, "n_samples": int(len(x)), "n_success": n_succ}
    if min(n_succ, len(y) - n_succ) < 0.01 * len(y):
        raise FitError(f"MCS {mcs}: no transition region in the data", diag)

    order = np.argsort(x)
    # initial location: where the cumulative success fraction crosses one half
    ys = y[order].astype(float)
    frac = np.convolve(ys, np.ones(201) / 201, mode="same")
    loc0 = float(x[order][np.argmin(np.abs(frac - 0.5))])
    res = optimize.minimize(_negloglik, np.array([loc0, math.log(2.0), 0.0, 0.0]), args=(x, y),
                            jac=True, method="L-BFGS-B")
    if not res.success and not np.isfinite(res.fun):
        raise FitError(f"MCS {mcs}: optimizer failed: {res.message}", {**diag, "message": str(res.message)})
    loc, log_sc, sk, log_tw = res.x
    sc, tw = math.exp(log_sc), math.exp(log_tw)
    resid = binned_residual(x, y, lambda v: _sas_cdf(v, loc, sc, sk, tw))
    diag.update(residual=resid, nll=float(res.fun), iterations=int(res.nit))
    if not np.isfinite(resid) or resid > max_residual:
        raise FitError(f"MCS {mcs}: residual {resid:.4f} exceeds {max_residual}", diag)
    return (loc, sc, sk, tw), diag


def fit_success_model(samples: SuccessSamples, min_samples: int = 1000,
                      max_residual: float = 0.05) -> SuccessModelParams:
    """Maximum-likelihood sinh-arcsinh fit of frame outcomes, separately per MCS."""
    snr = np.asarray(samples.snr, dtype=float)
    mcs = np.asarray(samples.mcs, dtype=int)
    ok = np.asarray(samples.success, dtype=bool)
    fitted, diags = [], []
    for m in range(N_MCS):
        sel = mcs == m
        if sel.sum() < min_samples:
            raise FitError(f"MCS {m}: {int(sel.sum())} samples, need {min_samples}",
                           {"mcs": m, "n_samples": int(sel.sum())})
        theta, diag = _fit_one(snr[sel], ok[sel], m, max_residual)
        fitted.append(theta)
        diags.append(diag)
    loc, sc, sk, tw = zip(*fitted)
    meta = {
        "n_samples": [d["n_samples"] for d in diags],
        "residual": [round(d["residual"], 6) for d in diags],
    }
    return SuccessModelParams(loc, sc, sk, tw, metadata=meta)


DEFAULT_MODEL_RESOURCE = "success_model.json"


@lru_cache(maxsize=None)
def default_success_model() -> SuccessModelParams:
    """Success curves shipped with the package (fit to the reference PHY with Rayleigh fading)."""
    text = resources.files("ftmrate").joinpath("data", DEFAULT_MODEL_RESOURCE).read_text()
    return SuccessModelParams.from_dict(json.loads(text))


def fit_reference_model(seed: int = 0, n_per_mcs: int = 100_000,
                        fading: FadingModel = FadingModel()) -> SuccessModelParams:
    """Fit success curves to outcomes drawn from the reference PHY under ``fading``."""
    rng = np.random.default_rng(seed)
    params = fit_success_model(generate_reference_samples(n_per_mcs, rng, fading))
    meta = dict(params.metadata)
    meta.update(generator_version=REFERENCE_GENERATOR_VERSION, seed=seed, n_per_mcs=n_per_mcs,
                fading={"kind": fading.kind, "m": fading.m}, snr_range=[-20.0, 70.0])
    return SuccessModelParams(params.location, params.scale, params.skewness, params.tailweight, metadata=meta)
