"""Bivariate Archimedean copulas on survival quantiles.

Implements the Independence, Clayton, and Frank families together with a
convex Frank/Clayton mixture, restricted throughout to positive dependence
(theta > 0).  Provided operations: the joint CDF, both first partial
derivatives (which double as conditional CDFs), conditional inversion and
sampling, and Kendall's tau conversions in both directions.

Numerics: quantiles entering logs or negative powers are clamped into
``[U_EPS, 1 - U_EPS]``; exact boundary arguments are resolved by the copula
axioms before the clamp so groundedness and uniform margins hold exactly.
Frank evaluation is arranged around ``expm1``/``logaddexp`` so that theta up
to 500 neither overflows nor cancels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np
from scipy import integrate, stats

from .errors import DomainError, ParameterDomainError

ArrayLike = Union[float, np.ndarray]

# Clamp applied to quantiles before logs / negative powers.
U_EPS = 1e-12

# Frank theta range supported by tau_to_theta root finding.
THETA_LO = 1e-6
THETA_HI_FRANK = 500.0

_BISECT_TOL = 1e-10
_BISECT_MAX_ITER = 200


class Family(str, Enum):
    INDEPENDENCE = "independence"
    CLAYTON = "clayton"
    FRANK = "frank"
    MIXTURE = "mixture"


def _coerce_family(family) -> Family:
    if isinstance(family, Family):
        return family
    try:
        return Family(str(family).lower())
    except ValueError:
        raise ParameterDomainError(f"unknown copula family: {family!r}") from None


@dataclass(frozen=True)
class CopulaSpec:
    """A copula family plus its dependence parameters.

    ``theta`` is used by Clayton and Frank; the mixture instead carries
    ``theta_frank``, ``theta_clayton`` and the Frank mixing weight ``kappa``.
    Unused fields stay ``None``.
    """

    family: Family
    theta: Optional[float] = None
    theta_frank: Optional[float] = None
    theta_clayton: Optional[float] = None
    kappa: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "family", _coerce_family(self.family))
        fam = self.family
        if fam in (Family.CLAYTON, Family.FRANK):
            if self.theta is None or not math.isfinite(self.theta) or self.theta <= 0:
                raise ParameterDomainError(
                    f"{fam.value} copula requires theta > 0, got {self.theta}"
                )
            if fam is Family.FRANK and self.theta > THETA_HI_FRANK:
                raise ParameterDomainError(
                    f"frank theta capped at {THETA_HI_FRANK}, got {self.theta}"
                )
        elif fam is Family.INDEPENDENCE:
            if self.theta is not None:
                raise ParameterDomainError("independence copula takes no theta")
        else:
            for name in ("theta_frank", "theta_clayton"):
                val = getattr(self, name)
                if val is None or not math.isfinite(val) or val <= 0:
                    raise ParameterDomainError(f"mixture requires {name} > 0, got {val}")
            if self.theta_frank > THETA_HI_FRANK:
                raise ParameterDomainError(
                    f"frank theta capped at {THETA_HI_FRANK}, got {self.theta_frank}"
                )
            if self.kappa is None or not (0.0 <= self.kappa <= 1.0):
                raise ParameterDomainError(
                    f"mixture requires kappa in [0, 1], got {self.kappa}"
                )

    @classmethod
    def independence(cls) -> "CopulaSpec":
        return cls(Family.INDEPENDENCE)

    @classmethod
    def clayton(cls, theta: float) -> "CopulaSpec":
        return cls(Family.CLAYTON, theta=float(theta))

    @classmethod
    def frank(cls, theta: float) -> "CopulaSpec":
        return cls(Family.FRANK, theta=float(theta))

    @classmethod
    def mixture(cls, theta_frank: float, theta_clayton: float, kappa: float) -> "CopulaSpec":
        return cls(
            Family.MIXTURE,
            theta_frank=float(theta_frank),
            theta_clayton=float(theta_clayton),
            kappa=float(kappa),
        )

    def to_dict(self) -> dict:
        out = {"family": self.family.value}
        if self.family in (Family.CLAYTON, Family.FRANK):
            out["theta"] = float(self.theta)
        elif self.family is Family.MIXTURE:
            out["theta_frank"] = float(self.theta_frank)
            out["theta_clayton"] = float(self.theta_clayton)
            out["kappa"] = float(self.kappa)
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "CopulaSpec":
        fam = _coerce_family(doc["family"])
        if fam is Family.INDEPENDENCE:
            return cls.independence()
        if fam is Family.MIXTURE:
            return cls.mixture(doc["theta_frank"], doc["theta_clayton"], doc["kappa"])
        return cls(fam, theta=float(doc["theta"]))


def _as_unit_array(u, name: str) -> np.ndarray:
    arr = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError(f"{name} must lie in [0, 1]")
    return arr


def _clamp(u: np.ndarray) -> np.ndarray:
    return np.clip(u, U_EPS, 1.0 - U_EPS)


def _maybe_scalar(value: np.ndarray, *inputs) -> ArrayLike:
    if all(np.ndim(x) == 0 for x in inputs):
        return float(value)
    return value


# ---------------------------------------------------------------------------
# Clayton internals.  S = u1^-theta + u2^-theta - 1 is kept in log space so
# small quantiles with large theta cannot overflow.

def _clayton_log_s(theta, u1, u2):
    a = -theta * np.log(u1)
    b = -theta * np.log(u2)
    m = np.maximum(a, b)
    return m + np.log(np.exp(a - m) + np.exp(b - m) - np.exp(-m))


def _clayton_cdf(theta, u1, u2):
    return np.exp(-_clayton_log_s(theta, u1, u2) / theta)


def _clayton_log_partial_u1(theta, u1, u2):
    log_s = _clayton_log_s(theta, u1, u2)
    return -(1.0 + theta) / theta * log_s - (theta + 1.0) * np.log(u1)


# ---------------------------------------------------------------------------
# Frank internals.  With A = expm1(-theta u1), B = expm1(-theta u2) and
# D = expm1(-theta), the CDF is -log1p(A B / D) / theta.  D + A B suffers
# catastrophic cancellation for large theta, so it is evaluated through the
# factored form
#   D + A B = exp(-theta lo) * (exp(-theta (hi-lo)) * expm1(-theta lo)
#                               + expm1(-theta (1-lo)))
# with lo = min(u1, u2), hi = max(u1, u2), whose bracket has one sign.

def _frank_log_neg_d(theta):
    return np.log(-np.expm1(-theta))


def _frank_log_neg_dab(theta, u1, u2):
    lo = np.minimum(u1, u2)
    hi = np.maximum(u1, u2)
    bracket = np.exp(-theta * (hi - lo)) * (-np.expm1(-theta * lo)) + (
        -np.expm1(-theta * (1.0 - lo))
    )
    return -theta * lo + np.log(bracket)


def _frank_cdf(theta, u1, u2):
    return (_frank_log_neg_d(theta) - _frank_log_neg_dab(theta, u1, u2)) / theta


def _frank_log_partial_u1(theta, u1, u2):
    # dC/du1 = exp(-theta u1) * B / (D + A B); both factors are negative.
    log_neg_b = np.log(-np.expm1(-theta * u2))
    return -theta * u1 + log_neg_b - _frank_log_neg_dab(theta, u1, u2)


# ---------------------------------------------------------------------------
# Public evaluators.


def copula_cdf(spec: CopulaSpec, u1: ArrayLike, u2: ArrayLike) -> ArrayLike:
    """Joint CDF C(u1, u2).

    Boundary arguments are resolved exactly: C(0, u) = C(u, 0) = 0,
    C(u, 1) = u and C(1, u) = u.
    """
    a1 = _as_unit_array(u1, "u1")
    a2 = _as_unit_array(u2, "u2")
    a1, a2 = np.broadcast_arrays(a1, a2)
    c1, c2 = _clamp(a1), _clamp(a2)

    fam = spec.family
    if fam is Family.INDEPENDENCE:
        interior = c1 * c2
    elif fam is Family.CLAYTON:
        interior = _clayton_cdf(spec.theta, c1, c2)
    elif fam is Family.FRANK:
        interior = _frank_cdf(spec.theta, c1, c2)
    else:
        interior = spec.kappa * _frank_cdf(spec.theta_frank, c1, c2) + (
            1.0 - spec.kappa
        ) * _clayton_cdf(spec.theta_clayton, c1, c2)

    out = np.where(a1 == 1.0, a2, np.where(a2 == 1.0, a1, interior))
    out = np.where((a1 == 0.0) | (a2 == 0.0), 0.0, out)
    return _maybe_scalar(out, np.asarray(u1), np.asarray(u2))


def _log_partial_u1_interior(spec: CopulaSpec, c1, c2):
    fam = spec.family
    if fam is Family.INDEPENDENCE:
        return np.log(c2)
    if fam is Family.CLAYTON:
        return _clayton_log_partial_u1(spec.theta, c1, c2)
    if fam is Family.FRANK:
        return _frank_log_partial_u1(spec.theta, c1, c2)
    pf = np.exp(_frank_log_partial_u1(spec.theta_frank, c1, c2))
    pc = np.exp(_clayton_log_partial_u1(spec.theta_clayton, c1, c2))
    return np.log(spec.kappa * pf + (1.0 - spec.kappa) * pc)


def _partial_u1_impl(spec: CopulaSpec, u1, u2):
    a1 = _as_unit_array(u1, "u1")
    a2 = _as_unit_array(u2, "u2")
    if spec.family in (Family.CLAYTON, Family.MIXTURE) and np.any(a1 == 0.0):
        raise DomainError(f"{spec.family.value} partial derivative undefined at u1 = 0")
    a1, a2 = np.broadcast_arrays(a1, a2)
    interior = np.exp(_log_partial_u1_interior(spec, _clamp(a1), _clamp(a2)))
    out = np.where(a2 == 1.0, 1.0, np.where(a2 == 0.0, 0.0, interior))
    return out


def copula_partial_u1(spec: CopulaSpec, u1: ArrayLike, u2: ArrayLike) -> ArrayLike:
    """dC/du1, i.e. the conditional CDF of U2 given U1 = u1."""
    out = _partial_u1_impl(spec, u1, u2)
    return _maybe_scalar(out, np.asarray(u1), np.asarray(u2))


def copula_partial_u2(spec: CopulaSpec, u1: ArrayLike, u2: ArrayLike) -> ArrayLike:
    """dC/du2, by exchangeability the u1-swapped first partial."""
    out = _partial_u1_impl(spec, u2, u1)
    return _maybe_scalar(out, np.asarray(u1), np.asarray(u2))


def log_partial_u1(spec: CopulaSpec, u1: ArrayLike, u2: ArrayLike) -> ArrayLike:
    """log dC/du1 on clamped interior quantiles (likelihood building block)."""
    a1 = _clamp(_as_unit_array(u1, "u1"))
    a2 = _clamp(_as_unit_array(u2, "u2"))
    a1, a2 = np.broadcast_arrays(a1, a2)
    return _maybe_scalar(
        _log_partial_u1_interior(spec, a1, a2), np.asarray(u1), np.asarray(u2)
    )


def log_partial_u2(spec: CopulaSpec, u1: ArrayLike, u2: ArrayLike) -> ArrayLike:
    return log_partial_u1(spec, u2, u1)


# ---------------------------------------------------------------------------
# Derivatives of log dC/du1 with respect to u1, u2 and the dependence
# parameters.  These feed the exact likelihood gradient.  Inputs are assumed
# clamped into the open unit square.


def _clayton_grad_log_partial_u1(theta, u1, u2):
    log_s = _clayton_log_s(theta, u1, u2)
    lu1 = np.log(u1)
    lu2 = np.log(u2)
    r1 = np.exp(-(theta + 1.0) * lu1 - log_s)  # u1^-(theta+1) / S
    r2 = np.exp(-(theta + 1.0) * lu2 - log_s)
    d_u1 = (1.0 + theta) * r1 - (theta + 1.0) / u1
    d_u2 = (1.0 + theta) * r2
    ds_dtheta_over_s = -(np.exp(-theta * lu1 - log_s) * lu1 + np.exp(-theta * lu2 - log_s) * lu2)
    d_theta = log_s / theta**2 - (1.0 + theta) / theta * ds_dtheta_over_s - lu1
    return d_u1, d_u2, d_theta


def _frank_grad_log_partial_u1(theta, u1, u2):
    log_neg_a = np.log(-np.expm1(-theta * u1))
    log_neg_b = np.log(-np.expm1(-theta * u2))
    log_neg_n = _frank_log_neg_dab(theta, u1, u2)
    p = np.exp(-theta * u1 + log_neg_b - log_neg_n)  # dC/du1
    q = np.exp(-theta * u2 + log_neg_a - log_neg_n)  # dC/du2
    inv_neg_b = np.exp(-log_neg_b)  # 1 / (1 - e^{-theta u2})
    d_u1 = theta * (p - 1.0)
    d_u2 = theta * (q - 1.0 + inv_neg_b)
    # dN/dtheta / N  with N = D + A B
    dn_over_n = np.exp(-theta - log_neg_n) - u1 * p - u2 * q
    d_theta = -u1 - u2 * (1.0 - inv_neg_b) - dn_over_n
    return d_u1, d_u2, d_theta


def grad_log_partial_u1(spec: CopulaSpec, u1, u2):
    """Returns (d/du1, d/du2, {param: d/dparam}) of log dC/du1.

    Quantiles are clamped exactly as in :func:`log_partial_u1`, so the two
    functions are consistent for finite differencing.
    """
    a1 = _clamp(_as_unit_array(u1, "u1"))
    a2 = _clamp(_as_unit_array(u2, "u2"))
    a1, a2 = np.broadcast_arrays(a1, a2)
    fam = spec.family
    if fam is Family.INDEPENDENCE:
        zero = np.zeros_like(a1)
        return zero, 1.0 / a2, {}
    if fam is Family.CLAYTON:
        d1, d2, dth = _clayton_grad_log_partial_u1(spec.theta, a1, a2)
        return d1, d2, {"theta": dth}
    if fam is Family.FRANK:
        d1, d2, dth = _frank_grad_log_partial_u1(spec.theta, a1, a2)
        return d1, d2, {"theta": dth}

    log_pf = _frank_log_partial_u1(spec.theta_frank, a1, a2)
    log_pc = _clayton_log_partial_u1(spec.theta_clayton, a1, a2)
    pf = np.exp(log_pf)
    pc = np.exp(log_pc)
    mix = spec.kappa * pf + (1.0 - spec.kappa) * pc
    f1, f2, fth = _frank_grad_log_partial_u1(spec.theta_frank, a1, a2)
    c1, c2, cth = _clayton_grad_log_partial_u1(spec.theta_clayton, a1, a2)
    d_u1 = (spec.kappa * pf * f1 + (1.0 - spec.kappa) * pc * c1) / mix
    d_u2 = (spec.kappa * pf * f2 + (1.0 - spec.kappa) * pc * c2) / mix
    grads = {
        "theta_frank": spec.kappa * pf * fth / mix,
        "theta_clayton": (1.0 - spec.kappa) * pc * cth / mix,
        "kappa": (pf - pc) / mix,
    }
    return d_u1, d_u2, grads


def grad_log_partial_u2(spec: CopulaSpec, u1, u2):
    """Gradient of log dC/du2, built from the swapped first partial."""
    d_swapped_1, d_swapped_2, dparams = grad_log_partial_u1(spec, u2, u1)
    return d_swapped_2, d_swapped_1, dparams


# ---------------------------------------------------------------------------
# Conditional inversion and sampling.


def conditional_quantile(spec: CopulaSpec, u1: ArrayLike, v: ArrayLike) -> ArrayLike:
    """Solves dC/du1(u1, u2) = v for u2.

    Closed form for Independence, Clayton, and Frank; bracketed bisection for
    the mixture.
    """
    a1 = np.asarray(u1, dtype=float)
    if np.any(a1 <= 0.0) or np.any(a1 >= 1.0):
        raise DomainError("u1 must lie in (0, 1) for conditional inversion")
    av = _as_unit_array(v, "v")
    a1, av = np.broadcast_arrays(a1, av)
    fam = spec.family
    if fam is Family.INDEPENDENCE:
        out = av.copy()
    elif fam is Family.CLAYTON:
        out = _clayton_conditional_quantile(spec.theta, a1, av)
    elif fam is Family.FRANK:
        out = _frank_conditional_quantile(spec.theta, a1, av)
    else:
        out = conditional_quantile_bisect(spec, a1, av)
    return _maybe_scalar(out, np.asarray(u1), np.asarray(v))


def _clayton_conditional_quantile(theta, u1, v):
    # u2 = (1 + u1^-theta (v^{-theta/(1+theta)} - 1))^{-1/theta}
    with np.errstate(divide="ignore"):
        s = -theta / (1.0 + theta) * np.log(v)  # +inf at v = 0
        log_w = np.where(s > 0.0, s + np.log(-np.expm1(-np.minimum(s, 745.0))), -np.inf)
        z = -theta * np.log(u1) + log_w
    return np.exp(-np.logaddexp(0.0, z) / theta)


def _frank_conditional_quantile(theta, u1, v):
    with np.errstate(divide="ignore"):
        log_v = np.log(v)
        log_1mv = np.log1p(-v)
    upper = np.logaddexp(-theta * u1 + log_1mv, -theta + log_v)
    lower = np.logaddexp(-theta * u1 + log_1mv, log_v)
    return (lower - upper) / theta


def conditional_quantile_bisect(
    spec: CopulaSpec,
    u1: ArrayLike,
    v: ArrayLike,
    tol: float = _BISECT_TOL,
    max_iter: int = _BISECT_MAX_ITER,
) -> np.ndarray:
    """Generic monotone bisection solver for dC/du1(u1, u2) = v.

    Used directly by the mixture family and as the oracle against which the
    closed-form inverses are checked.
    """
    a1 = np.asarray(u1, dtype=float)
    av = np.asarray(v, dtype=float)
    a1, av = np.broadcast_arrays(a1, av)
    lo = np.zeros(a1.shape)
    hi = np.ones(a1.shape)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        too_low = _partial_u1_impl(spec, a1, mid) < av
        lo = np.where(too_low, mid, lo)
        hi = np.where(too_low, hi, mid)
        if np.max(hi - lo) <= tol:
            break
    return 0.5 * (lo + hi)


def conditional_sample(spec: CopulaSpec, u1: ArrayLike, rng: np.random.Generator) -> ArrayLike:
    """Draws u2 from the conditional law of U2 given U1 = u1."""
    a1 = np.asarray(u1, dtype=float)
    v = rng.uniform(size=a1.shape if a1.ndim else None)
    return conditional_quantile(spec, u1, np.clip(v, U_EPS, 1.0 - U_EPS))


def sample_pairs(spec: CopulaSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draws n dependent quantile pairs; returns an (n, 2) array."""
    if n <= 0:
        raise DomainError(f"sample count must be positive, got {n}")
    u1 = np.clip(rng.uniform(size=n), U_EPS, 1.0 - U_EPS)
    u2 = conditional_sample(spec, u1, rng)
    return np.column_stack([u1, np.asarray(u2)])


# ---------------------------------------------------------------------------
# Kendall's tau.


def _debye1(theta: float) -> float:
    def integrand(t):
        return t / math.expm1(t) if t > 0.0 else 1.0

    value, _ = integrate.quad(integrand, 0.0, theta, epsabs=1e-10, limit=200)
    return value / theta


def _frank_tau(theta: float) -> float:
    return 1.0 - 4.0 / theta * (1.0 - _debye1(theta))


def theta_to_tau(spec: CopulaSpec) -> float:
    """Kendall's tau implied by the copula parameters.

    Clayton uses tau = theta / (theta + 2); Frank integrates the first Debye
    function.  The mixture has no closed form; call
    :func:`mixture_tau_monte_carlo` instead.
    """
    fam = spec.family
    if fam is Family.INDEPENDENCE:
        return 0.0
    if fam is Family.CLAYTON:
        return spec.theta / (spec.theta + 2.0)
    if fam is Family.FRANK:
        return _frank_tau(spec.theta)
    raise DomainError("mixture tau has no closed form; use mixture_tau_monte_carlo")


def tau_to_theta(family, tau: float) -> float:
    """Dependence parameter reproducing Kendall's tau for a single family."""
    fam = _coerce_family(family)
    if not 0.0 < tau < 1.0:
        raise DomainError(f"tau must lie in (0, 1), got {tau}")
    if fam is Family.CLAYTON:
        return 2.0 * tau / (1.0 - tau)
    if fam is Family.FRANK:
        if tau > _frank_tau(THETA_HI_FRANK):
            raise DomainError(f"tau {tau} exceeds the supported Frank range")
        lo, hi = THETA_LO, THETA_HI_FRANK
        while hi - lo > 1e-8:
            mid = 0.5 * (lo + hi)
            if _frank_tau(mid) < tau:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)
    raise DomainError(f"tau_to_theta supports clayton and frank, not {fam.value}")


def mixture_tau_monte_carlo(spec: CopulaSpec, n: int = 100_000, seed: int = 0) -> float:
    """Monte Carlo Kendall's tau estimate (defined for every family)."""
    rng = np.random.default_rng(seed)
    pairs = sample_pairs(spec, n, rng)
    tau, _ = stats.kendalltau(pairs[:, 0], pairs[:, 1])
    return float(tau)


def spec_from_tau(family, tau: float, kappa: float = 0.5) -> CopulaSpec:
    """Builds a spec whose Kendall's tau is (approximately) ``tau``.

    tau = 0 maps to the Independence family.  For the mixture, both
    components are placed at ``tau`` and mixed with weight ``kappa``.
    """
    fam = _coerce_family(family)
    if tau == 0.0:
        return CopulaSpec.independence()
    if fam is Family.INDEPENDENCE:
        raise DomainError("independence family only admits tau = 0")
    if fam is Family.MIXTURE:
        return CopulaSpec.mixture(
            tau_to_theta(Family.FRANK, tau), tau_to_theta(Family.CLAYTON, tau), kappa
        )
    return CopulaSpec(fam, theta=tau_to_theta(fam, tau))
