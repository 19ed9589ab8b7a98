"""Survival analysis under dependent censoring.

Weibull proportional-hazards marginals for the event and censoring times are
coupled through a parametric Archimedean copula and fit jointly by maximum
likelihood, so the event-time model stays consistent when censoring is
informative.
"""

__version__ = "0.1.0"
