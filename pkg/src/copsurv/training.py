"""Full-batch maximum-likelihood training.

Every parameter is updated by Adam on the exact gradient of the penalized
log-likelihood.  Dependence parameters get a special schedule: their raw
gradient is multiplied by ``grad_scale`` and clamped into
``[-clip_bound, clip_bound]`` before the Adam update, and theta is clamped
to at least ``theta_min`` afterwards (the mixture weight kappa is clamped
into [0, 1]).  The copula's gradient signal is orders of magnitude weaker
than the marginals'; without the rescale theta barely moves.

Early stopping watches the negated validation log-likelihood and returns the
parameters from the best validation epoch.  With ``validation_fraction = 0``
no split is made, no early stopping happens, and the final epoch wins.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional

import numpy as np

from . import copulas, likelihood
from .copulas import CopulaSpec, Family
from .data import SurvivalDataset
from .errors import NumericalFailure, ValidationError
from .weibull import WeibullCoxModel, default_mlp_widths, make_risk


@dataclass
class TrainConfig:
    """Optimization settings.

    ``l2_lambda = None`` resolves at fit time to 0 for linear risks and
    0.001 when either risk is an MLP.  ``patience`` counts epochs without
    validation improvement and must not exceed ``max_epochs``.
    """

    alpha: float = 1e-3
    max_epochs: int = 10000
    grad_scale: float = 1000.0
    clip_bound: float = 0.1
    theta_min: float = 1e-3
    l2_lambda: Optional[float] = None
    patience: int = 3000
    validation_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValidationError(f"alpha must be positive, got {self.alpha}")
        if self.max_epochs < 1:
            raise ValidationError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.grad_scale <= 0 or self.clip_bound <= 0:
            raise ValidationError("grad_scale and clip_bound must be positive")
        if self.theta_min <= 0:
            raise ValidationError(f"theta_min must be positive, got {self.theta_min}")
        if self.l2_lambda is not None and self.l2_lambda < 0:
            raise ValidationError(f"l2_lambda must be >= 0, got {self.l2_lambda}")
        if not 1 <= self.patience <= self.max_epochs:
            raise ValidationError(
                f"patience must lie in [1, max_epochs], got {self.patience}"
            )
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValidationError(
                f"validation_fraction must lie in [0, 1), got {self.validation_fraction}"
            )

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "max_epochs": self.max_epochs,
            "grad_scale": self.grad_scale,
            "clip_bound": self.clip_bound,
            "theta_min": self.theta_min,
            "l2_lambda": self.l2_lambda,
            "patience": self.patience,
            "validation_fraction": self.validation_fraction,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(doc) - known
        if extra:
            raise ValidationError(f"unknown TrainConfig fields: {sorted(extra)}")
        return cls(**doc)


class Adam:
    """Plain Adam ascending the objective (maximization convention)."""

    def __init__(self, params: Dict[str, np.ndarray], alpha: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.alpha = alpha
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, grads: Dict[str, np.ndarray]) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for key, p in self.params.items():
            g = np.asarray(grads[key], dtype=float)
            self.m[key] = self.beta1 * self.m[key] + (1.0 - self.beta1) * g
            self.v[key] = self.beta2 * self.v[key] + (1.0 - self.beta2) * g * g
            m_hat = self.m[key] / b1c
            v_hat = self.v[key] / b2c
            p[...] = p + self.alpha * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class TrainTrace:
    """Per-epoch optimization trace.

    ``train_negloglik`` is evaluated at the parameters entering the epoch,
    ``val_negloglik`` and the dependence-parameter columns at the parameters
    leaving it (post update and clamp).
    """

    epoch: np.ndarray
    train_negloglik: np.ndarray
    val_negloglik: np.ndarray
    copula_path: Dict[str, np.ndarray] = field(default_factory=dict)

    def to_csv(self, path) -> None:
        cols = ["epoch", "train_negloglik", "val_negloglik"] + list(self.copula_path)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(cols) + "\n")
            for i in range(len(self.epoch)):
                row = [str(int(self.epoch[i])), repr(float(self.train_negloglik[i])),
                       repr(float(self.val_negloglik[i]))]
                for key in self.copula_path:
                    row.append(repr(float(self.copula_path[key][i])))
                fh.write(",".join(row) + "\n")


@dataclass
class FittedJointModel:
    event_model: WeibullCoxModel
    censor_model: WeibullCoxModel
    copula: CopulaSpec
    trace: Optional[TrainTrace]
    best_epoch: int
    best_val_negloglik: float
    config: Optional[TrainConfig] = None

    def to_dict(self) -> dict:
        return {
            "event": self.event_model.to_dict(),
            "censor": self.censor_model.to_dict(),
            "copula": self.copula.to_dict(),
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def from_dict(cls, doc: dict) -> "FittedJointModel":
        return cls(
            event_model=WeibullCoxModel.from_dict(doc["event"]),
            censor_model=WeibullCoxModel.from_dict(doc["censor"]),
            copula=CopulaSpec.from_dict(doc["copula"]),
            trace=None,
            best_epoch=-1,
            best_val_negloglik=float("nan"),
        )

    @classmethod
    def load(cls, path) -> "FittedJointModel":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def tau_hat(spec: CopulaSpec, mc_seed: int = 0) -> float:
    """Kendall's tau of a fitted copula; Monte Carlo for the mixture."""
    if spec.family is Family.MIXTURE:
        return copulas.mixture_tau_monte_carlo(spec, seed=mc_seed)
    return copulas.theta_to_tau(spec)


def _split_validation(n: int, cfg: TrainConfig, rng: np.random.Generator):
    n_val = int(round(cfg.validation_fraction * n))
    perm = rng.permutation(n)
    if n - n_val < 1:
        raise ValidationError("validation split leaves no training records")
    return perm[n_val:], perm[:n_val]


def _snapshot(params):
    return {k: v.copy() for k, v in params.items()}


def _restore(params, snap):
    for k, v in params.items():
        v[...] = snap[k]


def _optimize(params, copula_keys, loss_and_grad, val_negloglik, cfg: TrainConfig):
    """Shared Adam loop; returns (trace arrays, best_epoch, best_val)."""
    adam = Adam(params, cfg.alpha)
    theta_keys = [k for k in copula_keys if not k.endswith("kappa")]
    kappa_keys = [k for k in copula_keys if k.endswith("kappa")]
    use_val = val_negloglik is not None

    train_hist: List[float] = []
    val_hist: List[float] = []
    copula_hist: Dict[str, List[float]] = {k: [] for k in copula_keys}

    best_val = np.inf
    best_epoch = -1
    best_state = None
    since_best = 0

    for epoch in range(cfg.max_epochs):
        try:
            loglik, grads = loss_and_grad()
            for key in copula_keys:
                grads[key] = np.clip(
                    grads[key] * cfg.grad_scale, -cfg.clip_bound, cfg.clip_bound
                )
            adam.step(grads)
            for key in theta_keys:
                params[key][...] = np.maximum(params[key], cfg.theta_min)
            for key in kappa_keys:
                params[key][...] = np.clip(params[key], 0.0, 1.0)
            val = float(val_negloglik()) if use_val else float("nan")
        except NumericalFailure as failure:
            raise NumericalFailure(
                f"epoch {epoch}: {failure}",
                record_index=failure.record_index,
                epoch=epoch,
                last_state=_snapshot(params),
            ) from failure

        train_hist.append(-loglik)
        val_hist.append(val)
        for key in copula_keys:
            copula_hist[key].append(float(params[key]))

        if use_val:
            if val < best_val:
                best_val = val
                best_epoch = epoch
                best_state = _snapshot(params)
                since_best = 0
            else:
                since_best += 1
                if since_best >= cfg.patience:
                    break

    if best_state is not None:
        _restore(params, best_state)
    else:
        best_epoch = len(train_hist) - 1
        best_val = val_hist[-1]

    trace = TrainTrace(
        epoch=np.arange(len(train_hist)),
        train_negloglik=np.array(train_hist),
        val_negloglik=np.array(val_hist),
        copula_path={k: np.array(v) for k, v in copula_hist.items()},
    )
    return trace, best_epoch, float(best_val)


def _model_params(model: WeibullCoxModel, prefix: str) -> Dict[str, np.ndarray]:
    out = {f"{prefix}.log_nu": model.log_nu, f"{prefix}.log_rho": model.log_rho}
    for key, val in model.risk.params().items():
        out[f"{prefix}.risk.{key}"] = val
    return out


def _init_copula_params(family: Family):
    """Starting dependence parameters and trace column names."""
    if family is Family.INDEPENDENCE:
        return {}, {}
    if family is Family.MIXTURE:
        params = {
            "copula.theta_frank": np.array(1.0),
            "copula.theta_clayton": np.array(1.0),
            "copula.kappa": np.array(0.5),
        }
        names = {
            "copula.theta_frank": "theta_frank",
            "copula.theta_clayton": "theta_clayton",
            "copula.kappa": "kappa",
        }
        return params, names
    return {"copula.theta": np.array(1.0)}, {"copula.theta": "theta_hat"}


def _spec_builder(family: Family, params):
    if family is Family.INDEPENDENCE:
        return lambda: CopulaSpec.independence()
    if family is Family.MIXTURE:
        return lambda: CopulaSpec.mixture(
            float(params["copula.theta_frank"]),
            float(params["copula.theta_clayton"]),
            float(params["copula.kappa"]),
        )
    return lambda: CopulaSpec(family, theta=float(params["copula.theta"]))


def _resolve_l2(cfg: TrainConfig, *risk_kinds) -> float:
    if cfg.l2_lambda is not None:
        return cfg.l2_lambda
    return 0.001 if "mlp" in risk_kinds else 0.0


def fit(
    data: SurvivalDataset,
    event_risk: str = "linear",
    censor_risk: str = "linear",
    family="clayton",
    config: Optional[TrainConfig] = None,
    mlp_widths=None,
) -> FittedJointModel:
    """Jointly fits both marginals and the copula dependence parameters.

    The dataset must contain at least one event and one censoring record.
    RNG use is fully determined by ``config.seed``: first the validation
    split, then event-risk and censor-risk initialization.
    """
    cfg = config or TrainConfig()
    family = copulas._coerce_family(family)
    if len(data) == 0:
        raise ValidationError("cannot fit on an empty dataset")
    if data.n_events == 0 or data.n_events == len(data):
        raise ValidationError(
            "joint fit requires at least one event and one censoring record"
        )

    rng = np.random.default_rng(cfg.seed)
    train_idx, val_idx = _split_validation(len(data), cfg, rng)
    train_ds = data.subset(train_idx)
    val_ds = data.subset(val_idx) if len(val_idx) else None

    widths = mlp_widths or default_mlp_widths(data.dim)
    event_model = WeibullCoxModel(
        0.0, np.log(train_ds.t_obs.mean()), make_risk(event_risk, data.dim, rng, widths)
    )
    censor_model = WeibullCoxModel(
        0.0, np.log(train_ds.t_obs.mean()), make_risk(censor_risk, data.dim, rng, widths)
    )

    params = {}
    params.update(_model_params(event_model, "event"))
    params.update(_model_params(censor_model, "censor"))
    copula_params, trace_names = _init_copula_params(family)
    params.update(copula_params)
    build_spec = _spec_builder(family, params)
    l2 = _resolve_l2(cfg, event_risk, censor_risk)

    def loss_and_grad():
        return likelihood.loglik_and_gradient(
            event_model, censor_model, build_spec(), train_ds, l2
        )

    val_fn = None
    if val_ds is not None:
        def val_fn():
            return -likelihood.loglik_copula(event_model, censor_model, build_spec(), val_ds)

    trace, best_epoch, best_val = _optimize(
        params, list(copula_params), loss_and_grad, val_fn, cfg
    )
    trace.copula_path = {trace_names[k]: v for k, v in trace.copula_path.items()}
    return FittedJointModel(
        event_model=event_model,
        censor_model=censor_model,
        copula=build_spec(),
        trace=trace,
        best_epoch=best_epoch,
        best_val_negloglik=best_val,
        config=cfg,
    )


def fit_marginal(
    data: SurvivalDataset,
    risk_kind: str = "linear",
    config: Optional[TrainConfig] = None,
    mlp_widths=None,
):
    """Fits a single Weibull marginal on right-censored (or all-event) data.

    Follows the same split, initialization, and early-stopping schedule as
    :func:`fit`; returns (model, trace).
    """
    cfg = config or TrainConfig()
    if len(data) == 0:
        raise ValidationError("cannot fit on an empty dataset")
    rng = np.random.default_rng(cfg.seed)
    train_idx, val_idx = _split_validation(len(data), cfg, rng)
    train_ds = data.subset(train_idx)
    val_ds = data.subset(val_idx) if len(val_idx) else None

    widths = mlp_widths or default_mlp_widths(data.dim)
    model = WeibullCoxModel(
        0.0, np.log(train_ds.t_obs.mean()), make_risk(risk_kind, data.dim, rng, widths)
    )
    params = _model_params(model, "model")
    l2 = _resolve_l2(cfg, risk_kind)

    def loss_and_grad():
        return likelihood.marginal_loglik_and_gradient(model, train_ds, l2)

    val_fn = None
    if val_ds is not None:
        def val_fn():
            return -likelihood.marginal_loglik(model, val_ds)

    trace, _, _ = _optimize(params, [], loss_and_grad, val_fn, cfg)
    return model, trace
