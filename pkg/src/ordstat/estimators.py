"""Mixed (pooled isotonic) estimators of an ordered pair of parameters.

For theta1 the estimator keeps d1 unless the pair is out of order, in which
case it returns the pooled value alpha*d1 + (1-alpha)*d2; for theta2 it keeps
d2 under the same rule.  Location kind uses d = X - constant, scale kind uses
d = constant * X.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .errors import InapplicableTag, ModelFileError, NonPositiveEstimate, OutOfSupport, ZeroWeights
from .models import Kind, ModelSpec, Target, blee_bsee_constants


@dataclass(frozen=True)
class WeightPair:
    w1: float
    w2: float

    def __post_init__(self):
        if self.w1 < 0 or self.w2 < 0:
            raise ValueError("isotonic weights must be non-negative")
        if self.w1 + self.w2 == 0:
            raise ZeroWeights("isotonic weights sum to zero")

    @property
    def alpha(self) -> float:
        return self.w1 / (self.w1 + self.w2)


def isotonic_pair(d1, d2, weights):
    """Weighted isotonic regression of (d1, d2) under d1 <= d2.

    Returns (lower, upper) = (min(d1, p), max(d2, p)) with
    p = alpha*d1 + (1-alpha)*d2 and alpha = w1/(w1+w2).
    """
    if not isinstance(weights, WeightPair):
        weights = WeightPair(*weights)
    a = weights.alpha
    d1 = np.asarray(d1, float)
    d2 = np.asarray(d2, float)
    pooled = a * d1 + (1.0 - a) * d2
    # on the violated branch pooled lies between d2 and d1, so min/max both pick it;
    # writing it out keeps the result exactly tied and leaves ordered pairs untouched
    ordered = d1 <= d2
    lower, upper = np.where(ordered, d1, pooled), np.where(ordered, d2, pooled)
    if lower.ndim == 0:
        return float(lower), float(upper)
    return lower, upper


@dataclass(frozen=True)
class EstimatorSpec:
    """One member of the mixed-estimator class.

    ``c0`` is the constant applied to the target's own coordinate and
    ``companion`` (nu for theta1, beta for theta2) the one applied to the
    other coordinate.
    """

    target: Target
    kind: Kind
    c0: float
    companion: float
    alpha: float
    tag: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "target", Target(self.target))
        object.__setattr__(self, "kind", Kind(self.kind))
        for name in ("c0", "companion", "alpha"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if self.kind is Kind.SCALE and (self.c0 <= 0 or self.companion <= 0):
            raise ValueError("scale estimators need positive constants")

    @property
    def id(self) -> str:
        if self.tag:
            return self.tag
        return f"{self.target.value}:c0={self.c0:.6g}:comp={self.companion:.6g}:alpha={self.alpha:.6g}"

    def pair(self, x):
        """(d1, d2) for observations ``x`` of shape (..., 2)."""
        x = np.asarray(x, float)
        x1, x2 = x[..., 0], x[..., 1]
        first, second = (self.c0, self.companion) if self.target is Target.THETA1 else (self.companion, self.c0)
        if self.kind is Kind.LOCATION:
            return x1 - first, x2 - second
        return first * x1, second * x2

    def to_dict(self) -> dict:
        d = asdict(self)
        d["target"] = self.target.value
        d["kind"] = self.kind.value
        if d["tag"] is None:
            del d["tag"]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "EstimatorSpec":
        allowed = {"target", "kind", "c0", "companion", "alpha", "tag"}
        extra = set(d) - allowed
        if extra:
            raise ModelFileError(f"unknown estimator keys: {sorted(extra)}")
        missing = allowed - {"tag"} - set(d)
        if missing:
            raise ModelFileError(f"missing estimator keys: {sorted(missing)}")
        try:
            return cls(d["target"], d["kind"], d["c0"], d["companion"], d["alpha"], d.get("tag"))
        except (TypeError, ValueError) as exc:
            raise ModelFileError(str(exc)) from None

    @classmethod
    def from_json(cls, text: str) -> "EstimatorSpec":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ModelFileError(f"bad estimator JSON: {exc}") from None
        if not isinstance(d, dict):
            raise ModelFileError("estimator JSON must be an object")
        return cls.from_dict(d)


def estimate(spec: EstimatorSpec, x):
    """Evaluate the estimator at observations ``x`` (shape (2,) or (n, 2))."""
    x = np.asarray(x, float)
    if x.shape[-1:] != (2,):
        raise ValueError("observations must have a trailing axis of length 2")
    if not np.all(np.isfinite(x)):
        raise OutOfSupport("observations must be finite")
    if spec.kind is Kind.SCALE and np.any(x <= 0):
        raise OutOfSupport("scale observations must lie in the positive quadrant")
    d1, d2 = spec.pair(x)
    a = spec.alpha
    pooled = a * d1 + (1.0 - a) * d2
    keep = d1 if spec.target is Target.THETA1 else d2
    est = np.where(d1 <= d2, keep, pooled)
    if spec.kind is Kind.SCALE and np.any(est <= 0):
        warnings.warn("non-positive scale estimate", NonPositiveEstimate, stacklevel=2)
    return float(est) if est.ndim == 0 else est


def blee(model: ModelSpec, target: Target) -> EstimatorSpec:
    """Best location/scale equivariant estimator of one component (alpha picks it out)."""
    target = Target(target)
    c1, c2 = blee_bsee_constants(model)
    tag = "blee" if model.kind is Kind.LOCATION else "bsee"
    if target is Target.THETA1:
        return EstimatorSpec(target, model.kind, c1, c2, 1.0, tag)
    return EstimatorSpec(target, model.kind, c2, c1, 0.0, tag)


# ---------------------------------------------------------------------------
# named presets: (c0, companion, alpha) as functions of the family parameters

def _p(model):
    return model.family.params


def _normal_beta0(model):
    s1, s2, r = _p(model)
    return s2 * (s2 - r * s1) / (s1 * s1 + s2 * s2 - 2 * r * s1 * s2)


def _exp_theta2_alpha(model):
    from .alpha_analysis import alpha_value
    s1, _ = _p(model)
    return alpha_value(model, Target.THETA2, s1, 0.0)


def _gamma_theta2_alpha(model):
    from .alpha_analysis import alpha_value
    a1, _ = _p(model)
    return alpha_value(model, Target.THETA2, 1.0 / (a1 + 1.0), 1.0)


def _power_alpha0(model):
    a1, a2 = _p(model)
    if a1 < a2:
        raise InapplicableTag("power-dominator for theta1 needs a1 >= a2")
    return 1.0 - a2 * (a2 + 2.0) / (2.0 * (a1 + 2.0) * (a1 + a2 + 1.0))


def _c(model, i):
    return blee_bsee_constants(model)[i]


@dataclass(frozen=True)
class Preset:
    families: tuple
    c0: Callable
    companion: Callable
    alpha: Callable
    note: str


_PRESETS: dict[tuple[str, Target], Preset] = {
    ("rmle", Target.THETA1): Preset(("bivariate_normal",), lambda m: 0.0, lambda m: 0.0, _normal_beta0,
                                    "restricted maximum likelihood"),
    ("rmle", Target.THETA2): Preset(("bivariate_normal",), lambda m: 0.0, lambda m: 0.0, _normal_beta0,
                                    "restricted maximum likelihood"),
    ("rmle-min", Target.THETA1): Preset(("exponential",), lambda m: 0.0, lambda m: 0.0, lambda m: 0.0,
                                        "restricted MLE min(X1, X2)"),
    ("ire-blee", Target.THETA1): Preset(("bivariate_normal", "exponential"), lambda m: _c(m, 0),
                                        lambda m: _c(m, 1), lambda m: 0.0,
                                        "isotonic regression of the two BLEEs"),
    ("exp-dominator", Target.THETA1): Preset(("exponential",), lambda m: _p(m)[0],
                                             lambda m: _p(m)[0] * _p(m)[1] / (_p(m)[0] + _p(m)[1]),
                                             lambda m: 0.0, "improves on the BLEE for every lambda"),
    ("exp-dominator", Target.THETA2): Preset(("exponential",), lambda m: _p(m)[1], lambda m: _p(m)[0],
                                             _exp_theta2_alpha, "improves on the BLEE for every lambda"),
    ("ire-bsee", Target.THETA1): Preset(("gamma",), lambda m: _c(m, 0), lambda m: _c(m, 1),
                                        lambda m: _p(m)[0] / (_p(m)[0] + _p(m)[1]),
                                        "isotonic regression of the two BSEEs"),
    ("ire-bsee", Target.THETA2): Preset(("gamma",), lambda m: _c(m, 1), lambda m: _c(m, 0),
                                        lambda m: _p(m)[0] / (_p(m)[0] + _p(m)[1]),
                                        "isotonic regression of the two BSEEs"),
    ("gamma-dominator", Target.THETA1): Preset(("gamma",), lambda m: _c(m, 0), lambda m: 1.0 / _p(m)[1],
                                               lambda m: (_p(m)[0] + 1) / (_p(m)[0] + _p(m)[1] + 1),
                                               "improves on the BSEE for every lambda"),
    ("gamma-dominator", Target.THETA2): Preset(("gamma",), lambda m: _c(m, 1),
                                               lambda m: 1.0 / (_p(m)[0] + 1), _gamma_theta2_alpha,
                                               "improves on the BSEE for every lambda"),
    ("power-dominator", Target.THETA1): Preset(("power",), lambda m: _c(m, 0),
                                               lambda m: (_p(m)[1] + 2) / (_p(m)[1] + 1), _power_alpha0,
                                               "improves on the BSEE for every lambda"),
    ("power-dominator", Target.THETA2): Preset(("power",), lambda m: _c(m, 1),
                                               lambda m: (sum(_p(m)) + 2) / (sum(_p(m)) + 1), lambda m: 1.0,
                                               "improves on the BSEE for every lambda"),
}

TAGS = ("blee", "bsee") + tuple(sorted({t for t, _ in _PRESETS}))


def _normalise_tag(tag: str, target):
    t = str(tag).strip().lower().replace("_", "-")
    for suffix, tgt in (("-theta1", Target.THETA1), ("-theta2", Target.THETA2)):
        if t.endswith(suffix):
            t = t[: -len(suffix)]
            if target is not None and Target(target) is not tgt:
                raise InapplicableTag(f"tag {tag!r} names {tgt.value}, not {Target(target).value}")
            target = tgt
    if target is None:
        target = Target.THETA1
    return t, Target(target)


def named_estimator(model: ModelSpec, tag: str, target=None) -> EstimatorSpec:
    """Look up a named estimator for ``model``; raises InapplicableTag on a mismatch."""
    name, target = _normalise_tag(tag, target)
    if name in ("blee", "bsee"):
        want = Kind.LOCATION if name == "blee" else Kind.SCALE
        if model.kind is not want:
            raise InapplicableTag(f"{name} applies to {want.value} models")
        return blee(model, target)
    preset = _PRESETS.get((name, target))
    if preset is None:
        known = sorted({t for t, _ in _PRESETS}) + ["blee", "bsee"]
        if any(t == name for t, _ in _PRESETS):
            raise InapplicableTag(f"tag {name!r} is not defined for {target.value}")
        raise InapplicableTag(f"unknown tag {name!r}; known: {', '.join(known)}")
    if model.family.name not in preset.families:
        raise InapplicableTag(f"tag {name!r} applies to {'/'.join(preset.families)} models")
    return EstimatorSpec(target, model.kind, preset.c0(model), preset.companion(model),
                         preset.alpha(model), name)
