"""Synthetic and semi-synthetic survival data generation.

Fully synthetic draws follow the inverse-transform route: covariates are
uniform on [0, 1]^d, a dependent quantile pair (u1, u2) is drawn from the
configured copula, and latent times come from inverting the two Weibull
marginal survival functions at u1 and u2.  The observed record is
(x, min(T_E, T_C), 1[T_E < T_C]).

Semi-synthetic censoring turns a positive-target regression dataset into a
dependently censored survival dataset: a linear Weibull model fit on the
targets (all treated as events) supplies the event marginal, a sharpened
copy of it (shape divided by 0.6) acts as the censoring marginal, and
censoring times are drawn from the copula conditionally on each record's
event quantile.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .copulas import CopulaSpec, U_EPS, conditional_sample, sample_pairs, theta_to_tau
from .copulas import Family
from .data import SurvivalDataset
from .errors import ValidationError
from .weibull import LinearRisk, QuadraticRisk, WeibullCoxModel, risk_from_dict


@dataclass
class SyntheticGenConfig:
    n: int
    d: int
    nu_event: float
    rho_event: float
    risk_event: object
    nu_censor: float
    rho_censor: float
    risk_censor: object
    copula: CopulaSpec
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError(f"n must be >= 1, got {self.n}")
        if self.d < 1:
            raise ValidationError(f"d must be >= 1, got {self.d}")
        for name in ("nu_event", "rho_event", "nu_censor", "rho_censor"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")

    def event_model(self) -> WeibullCoxModel:
        return WeibullCoxModel.from_natural(self.nu_event, self.rho_event, self.risk_event)

    def censor_model(self) -> WeibullCoxModel:
        return WeibullCoxModel.from_natural(self.nu_censor, self.rho_censor, self.risk_censor)


@dataclass
class GroundTruth:
    event_model: WeibullCoxModel
    censor_model: WeibullCoxModel
    copula: CopulaSpec


@dataclass
class LatentOutcomes:
    """The latent (pre-censoring) event and censoring times."""

    t_event: np.ndarray
    t_censor: np.ndarray

    def save_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("t_event,t_censor\n")
            for te, tc in zip(self.t_event, self.t_censor):
                fh.write(f"{float(te)!r},{float(tc)!r}\n")


def generate_synthetic(config: SyntheticGenConfig):
    """Draws a dependently censored dataset.

    Returns (dataset, ground_truth, latent).  All randomness comes from
    ``config.seed``; identical configs give identical draws.
    """
    rng = np.random.default_rng(config.seed)
    x = rng.uniform(size=(config.n, config.d))
    pairs = sample_pairs(config.copula, config.n, rng)
    event_model = config.event_model()
    censor_model = config.censor_model()
    t_event = event_model.inverse_survival(pairs[:, 0], x)
    t_censor = censor_model.inverse_survival(pairs[:, 1], x)
    dataset = SurvivalDataset(
        x, np.minimum(t_event, t_censor), (t_event < t_censor).astype(np.int64)
    )
    truth = GroundTruth(event_model, censor_model, config.copula)
    return dataset, truth, LatentOutcomes(t_event, t_censor)


# ---------------------------------------------------------------------------
# Reference data-generating processes (d = 10 throughout).


def preset_linear_risk(
    seed: int,
    n: int = 20000,
    copula: CopulaSpec = None,
    data_seed: Optional[int] = None,
) -> SyntheticGenConfig:
    """Linear risks on both marginals; weights drawn uniform on [0, 1]^10."""
    rng = np.random.default_rng(seed)
    beta_event = rng.uniform(size=10)
    beta_censor = rng.uniform(size=10)
    return SyntheticGenConfig(
        n=n,
        d=10,
        nu_event=4.0,
        rho_event=14.0,
        risk_event=LinearRisk(beta_event),
        nu_censor=3.0,
        rho_censor=16.0,
        risk_censor=LinearRisk(beta_censor),
        copula=copula or CopulaSpec.independence(),
        seed=seed if data_seed is None else data_seed,
    )


def preset_nonlinear_risk(
    seed: int,
    n: int = 20000,
    copula: CopulaSpec = None,
    data_seed: Optional[int] = None,
) -> SyntheticGenConfig:
    """Quadratic risks: event sum(x^2)/8, censor beta . x^2 / 5."""
    rng = np.random.default_rng(seed)
    beta_censor = rng.uniform(size=10)
    return SyntheticGenConfig(
        n=n,
        d=10,
        nu_event=4.0,
        rho_event=17.0,
        risk_event=QuadraticRisk(np.full(10, 1.0 / 8.0)),
        nu_censor=3.0,
        rho_censor=16.0,
        risk_censor=QuadraticRisk(beta_censor / 5.0),
        copula=copula or CopulaSpec.independence(),
        seed=seed if data_seed is None else data_seed,
    )


def preset_metric_bias(
    seed: int,
    n: int = 10000,
    copula: CopulaSpec = None,
    data_seed: Optional[int] = None,
) -> SyntheticGenConfig:
    """Generator for the metric-bias study: event risk x1^2 + x2^2,
    censor risk a random quadratic in the first three covariates."""
    rng = np.random.default_rng(seed)
    beta_censor = rng.uniform(size=10)
    event_w = np.zeros(10)
    event_w[:2] = 1.0
    censor_w = np.zeros(10)
    censor_w[:3] = beta_censor[:3]
    return SyntheticGenConfig(
        n=n,
        d=10,
        nu_event=4.0,
        rho_event=17.0,
        risk_event=QuadraticRisk(event_w),
        nu_censor=3.0,
        rho_censor=16.0,
        risk_censor=QuadraticRisk(censor_w),
        copula=copula or CopulaSpec.independence(),
        seed=seed if data_seed is None else data_seed,
    )


PRESETS = {
    "linear_risk": preset_linear_risk,
    "nonlinear_risk": preset_nonlinear_risk,
    "metric_bias": preset_metric_bias,
}


# ---------------------------------------------------------------------------
# Sidecar serialization of the ground truth.


def sidecar_dict(config: SyntheticGenConfig, tau: Optional[float] = None) -> dict:
    spec = config.copula
    if tau is None and spec.family is not Family.MIXTURE:
        tau = theta_to_tau(spec)
    return {
        "n": config.n,
        "d": config.d,
        "seed": config.seed,
        "nu_E": config.nu_event,
        "rho_E": config.rho_event,
        "risk_E": config.risk_event.to_dict(),
        "nu_C": config.nu_censor,
        "rho_C": config.rho_censor,
        "risk_C": config.risk_censor.to_dict(),
        "copula": spec.to_dict(),
        "tau": tau,
    }


def truth_from_sidecar(doc: dict) -> GroundTruth:
    event = WeibullCoxModel.from_natural(
        doc["nu_E"], doc["rho_E"], risk_from_dict(doc["risk_E"])
    )
    censor = WeibullCoxModel.from_natural(
        doc["nu_C"], doc["rho_C"], risk_from_dict(doc["risk_C"])
    )
    return GroundTruth(event, censor, CopulaSpec.from_dict(doc["copula"]))


# ---------------------------------------------------------------------------
# Semi-synthetic censoring of regression data.


ZERO_SHIFT_FACTOR = 1e-3
CENSOR_SHAPE_DIVISOR = 0.6


def zscore_fit(x: np.ndarray):
    """Per-column standardization parameters; zero-spread columns get std 1."""
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std == 0.0, 1.0, std)
    return mean, std


@dataclass
class CensoredRegressionInfo:
    event_model: WeibullCoxModel
    censor_model: WeibullCoxModel
    copula: CopulaSpec
    y: np.ndarray
    t_censor: np.ndarray
    standardize_mean: np.ndarray
    standardize_std: np.ndarray
    shift: float
    censoring_fraction: float


def censor_regression(
    x: np.ndarray,
    y: np.ndarray,
    spec: CopulaSpec,
    seed: int = 0,
    fit_config=None,
    shift: bool = False,
):
    """Imposes copula-dependent censoring on a regression dataset.

    Covariates are z-scored; a linear Weibull event model is fit on the
    (shifted) targets with every record treated as an event, the censoring
    marginal reuses its scale and risk but divides the shape by 0.6, and
    each censoring time is drawn conditionally on the record's event
    quantile.  Returns (dataset, info); the dataset carries the
    standardized covariates.
    """
    from .training import TrainConfig, fit_marginal  # deferred; training imports us not

    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 2 or y.shape != (x.shape[0],):
        raise ValidationError(f"need x (n, d) and y (n,), got {x.shape} and {y.shape}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValidationError("covariates and targets must be finite")

    total_shift = 0.0
    if np.any(y < 0.0):
        if not shift:
            raise ValidationError(
                "targets must be non-negative; pass shift=True to translate them"
            )
        total_shift += -float(y.min())
        y = y - y.min()
    if np.any(y == 0.0):
        eps = ZERO_SHIFT_FACTOR * float(y.max())
        if eps <= 0.0:
            raise ValidationError("targets are identically zero")
        total_shift += eps
        y = y + eps

    mean, std = zscore_fit(x)
    xs = (x - mean) / std

    cfg = fit_config or TrainConfig(max_epochs=5000, patience=500, seed=seed)
    event_model, _ = fit_marginal(
        SurvivalDataset(xs, y, np.ones(len(y), dtype=np.int64)), "linear", cfg
    )
    censor_model = WeibullCoxModel(
        float(event_model.log_nu) - np.log(CENSOR_SHAPE_DIVISOR),
        float(event_model.log_rho),
        LinearRisk(event_model.risk.weights.copy()),
    )

    rng = np.random.default_rng(seed)
    u1 = np.clip(event_model.survival(y, xs), U_EPS, 1.0 - U_EPS)
    u2 = np.clip(np.asarray(conditional_sample(spec, u1, rng)), U_EPS, 1.0 - U_EPS)
    t_censor = censor_model.inverse_survival(u2, xs)

    delta = (y <= t_censor).astype(np.int64)
    dataset = SurvivalDataset(xs, np.minimum(y, t_censor), delta)
    info = CensoredRegressionInfo(
        event_model=event_model,
        censor_model=censor_model,
        copula=spec,
        y=y,
        t_censor=t_censor,
        standardize_mean=mean,
        standardize_std=std,
        shift=total_shift,
        censoring_fraction=float(1.0 - delta.mean()),
    )
    return dataset, info


def synthetic_regression(n: int, d: int, seed: int):
    """A positive-target regression stand-in: Weibull noise around a linear
    risk, so a proportional-hazards fit is well specified."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(size=(n, d))
    beta = rng.uniform(size=d)
    model = WeibullCoxModel.from_natural(4.0, 10.0, LinearRisk(beta))
    u = np.clip(rng.uniform(size=n), U_EPS, 1.0 - U_EPS)
    y = model.inverse_survival(u, x)
    return x, y
