"""Least-squares fits of T1 curves: single, bi- and stretched exponentials.

All three families are fitted by a damped Gauss-Newton (Levenberg-Marquardt)
iteration with analytic Jacobians. Amplitudes and times are optimised in log
space and the stretch exponent through a logistic map onto (0, 2), so every
iterate is a valid model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ensemble import T1Curve

FAMILIES = ("single_exp", "biexp", "stretched")
N_PARAMS = {"single_exp": 2, "biexp": 4, "stretched": 3}
MAX_ITER = 500
XTOL = 1e-10
GTOL = 1e-12
COLLAPSE_RATIO = 0.99
BETA_MAX = 2.0


class FitError(ValueError):
    """Raised for data a decay model cannot be fitted to."""


@dataclass(frozen=True)
class DecayModel:
    family: str
    params: dict

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        p = self.params
        if self.family == "single_exp":
            return p["A"] * np.exp(-t / p["T"])
        if self.family == "biexp":
            return p["A_s"] * np.exp(-t / p["T_s"]) + p["A_l"] * np.exp(-t / p["T_l"])
        return p["A"] * np.exp(-((t / p["T"]) ** p["beta"]))


@dataclass
class FitResult:
    model: DecayModel
    r_squared: float
    residual_norm: float
    iterations: int
    converged: bool
    derived_rates: dict = field(default_factory=dict)
    collapsed: bool = False

    @property
    def family(self) -> str:
        return self.model.family

    @property
    def params(self) -> dict:
        return self.model.params

    def to_json(self) -> dict:
        return {
            "family": self.family,
            "params": dict(self.params),
            "r_squared": self.r_squared,
            "residual_norm": self.residual_norm,
            "derived_rates": dict(self.derived_rates),
            "converged": self.converged,
            "collapsed": self.collapsed,
            "iterations": self.iterations,
        }


# -- parameter maps ---------------------------------------------------------

def _beta(u):
    return BETA_MAX / (1.0 + math.exp(-u))


def _beta_inv(beta):
    return -math.log(BETA_MAX / beta - 1.0)


def _to_params(family, q):
    e = np.exp
    if family == "single_exp":
        return {"A": float(e(q[0])), "T": float(e(q[1]))}
    if family == "biexp":
        return {"A_s": float(e(q[0])), "T_s": float(e(q[1])), "A_l": float(e(q[2])), "T_l": float(e(q[3]))}
    return {"A": float(e(q[0])), "T": float(e(q[1])), "beta": _beta(q[2])}


def _from_params(family, p):
    if family == "single_exp":
        return np.log([p["A"], p["T"]])
    if family == "biexp":
        return np.log([p["A_s"], p["T_s"], p["A_l"], p["T_l"]])
    return np.array([math.log(p["A"]), math.log(p["T"]), _beta_inv(p["beta"])])


def _model_and_jacobian(family, q, t):
    """Model values and d(model)/dq on grid t."""
    if family == "single_exp":
        a, tt = math.exp(q[0]), math.exp(q[1])
        y = a * np.exp(-t / tt)
        return y, np.column_stack([y, y * t / tt])
    if family == "biexp":
        a1, t1, a2, t2 = np.exp(q)
        y1 = a1 * np.exp(-t / t1)
        y2 = a2 * np.exp(-t / t2)
        return y1 + y2, np.column_stack([y1, y1 * t / t1, y2, y2 * t / t2])
    a, tt, beta = math.exp(q[0]), math.exp(q[1]), _beta(q[2])
    s = t / tt
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(s > 0, np.log(np.where(s > 0, s, 1.0)), 0.0)
    x = np.where(s > 0, np.exp(beta * logs), 0.0)
    y = a * np.exp(-x)
    dbeta_du = beta * (1.0 - beta / BETA_MAX)
    return y, np.column_stack([y, y * beta * x, -y * x * logs * dbeta_du])


def _levenberg_marquardt(family, q0, t, data):
    """Minimise ||model(q) - data||^2 from q0; returns (q, cost, iterations, converged)."""
    q = np.array(q0, dtype=float)
    y, jac = _model_and_jacobian(family, q, t)
    res = y - data
    cost = float(res @ res)
    lam = 1e-3
    for it in range(1, MAX_ITER + 1):
        grad = jac.T @ res
        if np.max(np.abs(grad)) < GTOL:
            return q, cost, it, True
        hess = jac.T @ jac
        damping = np.diag(np.maximum(np.diag(hess), 1e-300))
        while True:
            try:
                step = np.linalg.solve(hess + lam * damping, -grad)
            except np.linalg.LinAlgError:
                step = np.full_like(q, np.nan)
            if np.all(np.isfinite(step)):
                tiny = np.max(np.abs(step)) <= XTOL * (np.max(np.abs(q)) + XTOL)
                q_try = q + step
                y_try, jac_try = _model_and_jacobian(family, q_try, t)
                res_try = y_try - data
                cost_try = float(res_try @ res_try)
                if np.isfinite(cost_try) and cost_try <= cost:
                    q, jac, res, cost = q_try, jac_try, res_try, cost_try
                    lam = max(lam / 10.0, 1e-12)
                    if tiny:
                        return q, cost, it, True
                    break
                if tiny:
                    return q, cost, it, True
            lam *= 10.0
            if lam > 1e20:
                return q, cost, it, False
    return q, cost, MAX_ITER, False


# -- public API ---------------------------------------------------------------

def r_squared(curve: T1Curve, model) -> float:
    """Coefficient of determination of ``model`` (callable on tau) against ``curve``."""
    data = curve.intensity
    centred = data - data.mean()
    ss_tot = float(centred @ centred)
    if ss_tot == 0.0:
        raise FitError("zero-variance curve: R^2 undefined")
    resid = np.asarray(model(curve.tau), dtype=float) - data
    return 1.0 - float(resid @ resid) / ss_tot


def weighted_rate_from_params(a_s, t_s, a_l, t_l) -> float:
    """Amplitude-weighted rate (A_s/T_s + A_l/T_l) / (A_s + A_l)."""
    return (a_s / t_s + a_l / t_l) / (a_s + a_l)


def weighted_rate(fit: FitResult) -> float:
    if fit.family != "biexp":
        raise ValueError(f"weighted rate needs a biexp fit, got {fit.family}")
    p = fit.params
    return weighted_rate_from_params(p["A_s"], p["T_s"], p["A_l"], p["T_l"])


def _derived(model: DecayModel) -> dict:
    p = model.params
    if model.family == "single_exp":
        return {"gamma": 1.0 / p["T"]}
    if model.family == "biexp":
        return {
            "gamma_w": weighted_rate_from_params(p["A_s"], p["T_s"], p["A_l"], p["T_l"]),
            "gamma_long": 1.0 / p["T_l"],
            "gamma_short": 1.0 / p["T_s"],
        }
    return {"gamma_stre": 1.0 / p["T"]}


def _initial_single(t, data):
    pos = data > 0
    if pos.sum() < 2:
        raise FitError("need at least two positive intensities to initialise")
    slope, intercept = np.polyfit(t[pos], np.log(data[pos]), 1)
    span = t[pos].max() - t[pos].min()
    if slope >= 0 or not np.isfinite(slope):
        slope = -1.0 / (10.0 * span)
    return {"A": math.exp(intercept), "T": -1.0 / slope}


def _check_curve(curve: T1Curve, family: str):
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")
    if len(curve) < N_PARAMS[family] + 1:
        raise FitError(f"{family} needs at least {N_PARAMS[family] + 1} points, got {len(curve)}")
    if np.ptp(curve.intensity) == 0.0:
        raise FitError("constant intensity: no decay to fit")


def _result(family, q, cost, iters, converged, curve, collapsed=False) -> FitResult:
    model = DecayModel(family, _to_params(family, q))
    return FitResult(
        model=model,
        r_squared=r_squared(curve, model),
        residual_norm=math.sqrt(cost),
        iterations=iters,
        converged=converged,
        derived_rates=_derived(model),
        collapsed=collapsed,
    )


def _collapse_to_single(single: FitResult, curve: T1Curve) -> FitResult:
    """Biexp-form copy of a single-exponential fit (zero short amplitude)."""
    a, t = single.params["A"], single.params["T"]
    model = DecayModel("biexp", {"A_s": 0.0, "T_s": t, "A_l": a, "T_l": t})
    return FitResult(
        model=model,
        r_squared=single.r_squared,
        residual_norm=single.residual_norm,
        iterations=single.iterations,
        converged=single.converged,
        derived_rates=_derived(model),
        collapsed=True,
    )


def fit(curve: T1Curve, family: str = "biexp") -> FitResult:
    """Fit one decay family; non-convergence is reported via ``converged``, not raised."""
    _check_curve(curve, family)
    t, data = curve.tau, curve.intensity
    init = _initial_single(t, data)
    q, cost, iters, ok = _levenberg_marquardt("single_exp", _from_params("single_exp", init), t, data)
    single = _result("single_exp", q, cost, iters, ok, curve)
    if family == "single_exp":
        return single

    a, tt = single.params["A"], single.params["T"]
    if family == "stretched":
        start = {"A": a, "T": tt, "beta": 0.8}
        q, cost, iters, ok = _levenberg_marquardt("stretched", _from_params("stretched", start), t, data)
        return _result("stretched", q, cost, iters, ok, curve)

    start = {"A_s": a / 2, "T_s": tt / 4, "A_l": a / 2, "T_l": 4 * tt}
    q, cost, iters, ok = _levenberg_marquardt("biexp", _from_params("biexp", start), t, data)
    if q[1] > q[3]:
        q = q[[2, 3, 0, 1]]
    result = _result("biexp", q, cost, iters, ok, curve)
    p = result.params
    # nested model: never report a biexp worse than the single exponential
    if p["T_s"] / p["T_l"] > COLLAPSE_RATIO or cost > single.residual_norm**2:
        return _collapse_to_single(single, curve)
    return result
