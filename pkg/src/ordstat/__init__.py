"""Mixed isotonic estimators of ordered location and scale parameters.

The usual entry points are the model constructors in :mod:`ordstat.models`,
the estimator specs in :mod:`ordstat.estimators`, the weight-curve analysis in
:mod:`ordstat.alpha_analysis` and the Monte Carlo risk engine.
"""
__version__ = "0.1.0"

from ._backend import NAME as BACKEND
from .alpha_analysis import (AdmissibleInterval, AlphaCurve, Limit, LimitKind, admissible_interval,
                             alpha_curve, alpha_value, infinity_limit, oracle_best_alpha)
from .assumptions import AssumptionReport, boundary_sign_check, classify_lemma_case
from .errors import *  # noqa: F401,F403
from .estimators import (EstimatorSpec, WeightPair, blee, estimate, isotonic_pair,
                         named_estimator)
from .models import (Kind, ModelSpec, Target, bivariate_normal, blee_bsee_constants,
                     derived_functions, exponential_location, gamma_scale, load_model,
                     power_scale)
from .risk_engine import (DominanceReport, RiskCurve, dominance_report, quadrature_risk_location,
                          reproduce_figure, simulate_risk, simulate_risks)
