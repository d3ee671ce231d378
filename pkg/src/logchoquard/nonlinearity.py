"""The nonlinearity family (f, F), assumption checkers, the auxiliary
function G and the explicit level-estimate threshold constant.

Built-in kinds (a = 4 pi throughout):

* ``exp_minus_one``  F(s) = e^{a s^2} - 1
* ``power_exp``      F(s) = s^p e^{a s^2}
* ``piecewise``      F(s) = s^q below the splice s0, c s^p e^{a s^2} above,
                     with c solved for continuity of F
* ``custom``         user-supplied f and f'; F by adaptive quadrature

f(s) = 0 for s <= 0 (only positive solutions are sought), F(0) = 0.
Exponents a s^2 > 700 are clamped; query ``saturation_mask`` for the flag.
Evaluations that would overflow (tail checks, envelope fits) run in log
space through the closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate as sp_integrate
from scipy import optimize as sp_optimize

from .errors import InvalidParameterError, QuadratureFailureError
from .spaces import EXP_GUARD, PeriodicCoefficient

A_CRIT = 4.0 * np.pi

KINDS = ("exp_minus_one", "power_exp", "piecewise", "custom")


@dataclass(frozen=True)
class NonlinearitySpec:
    """Parametric description of (f, F) with growth data (p, q, s0, beta)."""

    kind: str = "exp_minus_one"
    p: float = 1.0
    q: float = 2.0
    s0: float = 1.0
    beta: float = 1.0
    c_profile: PeriodicCoefficient = field(
        default_factory=lambda: PeriodicCoefficient(1.0))
    f_callable: Optional[Callable] = None
    f_prime_callable: Optional[Callable] = None
    F_callable: Optional[Callable] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameterError(f"unknown nonlinearity kind {self.kind!r}")
        if self.p <= 0:
            raise InvalidParameterError("p must be positive")
        if self.q < 2:
            raise InvalidParameterError("q must be >= 2")
        if self.s0 <= 0:
            raise InvalidParameterError("s0 must be positive")
        if self.beta <= 0:
            raise InvalidParameterError("beta must be positive")
        if self.kind == "custom" and (self.f_callable is None
                                      or self.f_prime_callable is None):
            raise InvalidParameterError("custom specs need f and f' callables")

    @property
    def splice_constant(self) -> float:
        """c making the piecewise F continuous at s0."""
        return self.s0 ** (self.q - self.p) * math.exp(-A_CRIT * self.s0**2)


def _guarded_exp(expo):
    return np.exp(np.minimum(expo, EXP_GUARD))


def saturation_mask(spec: NonlinearitySpec, s) -> np.ndarray:
    """True where the exponential growth exceeds the overflow guard."""
    s = np.asarray(s, dtype=float)
    mask = A_CRIT * s**2 > EXP_GUARD
    if spec.kind == "piecewise":
        mask = mask & (s > spec.s0)
    return mask & (s > 0)


def _apply_guard(spec, s, sp, out, log_form):
    """Replace saturated entries by the exp-clamped log form (built-ins)."""
    if spec.kind == "custom":
        return out
    mask = saturation_mask(spec, sp)
    if np.any(mask):
        out = np.where(mask, np.exp(np.minimum(log_form(spec, sp), EXP_GUARD)), out)
    return out


def eval_F(spec: NonlinearitySpec, s):
    """Primitive of f vanishing at zero; zero for s <= 0."""
    s = np.asarray(s, dtype=float)
    sp = np.maximum(s, 0.0)
    with np.errstate(over="ignore"):
        if spec.kind == "exp_minus_one":
            out = np.expm1(np.minimum(A_CRIT * sp**2, EXP_GUARD))
        elif spec.kind == "power_exp":
            out = sp**spec.p * _guarded_exp(A_CRIT * sp**2)
        elif spec.kind == "piecewise":
            c = spec.splice_constant
            upper = c * sp**spec.p * _guarded_exp(A_CRIT * sp**2)
            out = np.where(sp <= spec.s0, sp**spec.q, upper)
        else:
            out = _custom_F(spec, sp)
    out = _apply_guard(spec, s, sp, out, log_F)
    return np.where(s > 0, out, 0.0)


def eval_f(spec: NonlinearitySpec, s):
    s = np.asarray(s, dtype=float)
    sp = np.maximum(s, 1e-300)
    with np.errstate(over="ignore"):
        if spec.kind == "exp_minus_one":
            out = 2 * A_CRIT * sp * _guarded_exp(A_CRIT * sp**2)
        elif spec.kind == "power_exp":
            out = sp ** (spec.p - 1) * (spec.p + 2 * A_CRIT * sp**2) \
                * _guarded_exp(A_CRIT * sp**2)
        elif spec.kind == "piecewise":
            c = spec.splice_constant
            upper = c * sp ** (spec.p - 1) * (spec.p + 2 * A_CRIT * sp**2) \
                * _guarded_exp(A_CRIT * sp**2)
            out = np.where(sp <= spec.s0, spec.q * sp ** (spec.q - 1), upper)
        else:
            out = np.asarray(spec.f_callable(sp), dtype=float)
    out = _apply_guard(spec, s, sp, out, log_f)
    return np.where(s > 0, out, 0.0)


def eval_f_prime(spec: NonlinearitySpec, s):
    s = np.asarray(s, dtype=float)
    sp = np.maximum(s, 1e-300)
    a = A_CRIT
    with np.errstate(over="ignore"):
        if spec.kind == "exp_minus_one":
            out = (2 * a + 4 * a**2 * sp**2) * _guarded_exp(a * sp**2)
        elif spec.kind == "power_exp":
            p = spec.p
            out = (p * (p - 1) * sp ** (p - 2) + 2 * a * (2 * p + 1) * sp**p
                   + 4 * a**2 * sp ** (p + 2)) * _guarded_exp(a * sp**2)
        elif spec.kind == "piecewise":
            c, p, q = spec.splice_constant, spec.p, spec.q
            upper = c * (p * (p - 1) * sp ** (p - 2) + 2 * a * (2 * p + 1) * sp**p
                         + 4 * a**2 * sp ** (p + 2)) * _guarded_exp(a * sp**2)
            out = np.where(sp <= spec.s0, q * (q - 1) * sp ** (q - 2), upper)
        else:
            out = np.asarray(spec.f_prime_callable(sp), dtype=float)
    out = _apply_guard(spec, s, sp, out, _log_f_prime)
    return np.where(s > 0, out, 0.0)


def _custom_F(spec: NonlinearitySpec, sp):
    if spec.F_callable is not None:
        return np.asarray(spec.F_callable(sp), dtype=float)
    flat = np.atleast_1d(sp).ravel()
    order = np.argsort(flat)
    out = np.empty_like(flat)
    acc, prev = 0.0, 0.0
    for idx in order:
        val, _ = sp_integrate.quad(spec.f_callable, prev, flat[idx],
                                   epsrel=1e-10, limit=200)
        acc += val
        out[idx] = acc
        prev = flat[idx]
    return out.reshape(np.shape(sp))


# log-space closed forms for overflow-free tail checks ----------------------

def log_F(spec: NonlinearitySpec, s):
    s = np.asarray(s, dtype=float)
    sp = np.maximum(s, 1e-300)
    x = A_CRIT * sp**2
    if spec.kind == "exp_minus_one":
        return x + np.log1p(-np.exp(-x))
    if spec.kind == "power_exp":
        return spec.p * np.log(sp) + x
    if spec.kind == "piecewise":
        upper = math.log(spec.splice_constant) + spec.p * np.log(sp) + x
        return np.where(sp <= spec.s0, spec.q * np.log(sp), upper)
    with np.errstate(divide="ignore"):
        return np.log(eval_F(spec, sp))


def log_f(spec: NonlinearitySpec, s):
    s = np.asarray(s, dtype=float)
    sp = np.maximum(s, 1e-300)
    x = A_CRIT * sp**2
    if spec.kind == "exp_minus_one":
        return math.log(2 * A_CRIT) + np.log(sp) + x
    if spec.kind == "power_exp":
        return (spec.p - 1) * np.log(sp) + np.log(spec.p + 2 * A_CRIT * sp**2) + x
    if spec.kind == "piecewise":
        upper = (math.log(spec.splice_constant) + (spec.p - 1) * np.log(sp)
                 + np.log(spec.p + 2 * A_CRIT * sp**2) + x)
        return np.where(sp <= spec.s0,
                        math.log(spec.q) + (spec.q - 1) * np.log(sp), upper)
    with np.errstate(divide="ignore"):
        return np.log(eval_f(spec, sp))


def _log_f_prime(spec: NonlinearitySpec, s):
    s = np.asarray(s, dtype=float)
    sp = np.maximum(s, 1e-300)
    a = A_CRIT
    x = a * sp**2
    if spec.kind == "exp_minus_one":
        return math.log(2 * a) + np.log1p(2 * a * sp**2) + x
    poly = np.log(spec.p * (spec.p - 1) + 2 * a * (2 * spec.p + 1) * sp**2
                  + 4 * a**2 * sp**4)
    if spec.kind == "power_exp":
        return (spec.p - 2) * np.log(sp) + poly + x
    if spec.kind == "piecewise":
        upper = math.log(spec.splice_constant) + (spec.p - 2) * np.log(sp) + poly + x
        lower = (math.log(spec.q * (spec.q - 1)) if spec.q > 1 else -np.inf) \
            + (spec.q - 2) * np.log(sp)
        return np.where(sp <= spec.s0, lower, upper)
    with np.errstate(divide="ignore"):
        return np.log(eval_f_prime(spec, sp))


def log_s3fF_tail(spec: NonlinearitySpec, s):
    """log of s^3 f(s) F(s) e^{-8 pi s^2}, the liminf quantity of the
    growth-floor assumption, computed without overflow."""
    s = np.asarray(s, dtype=float)
    return 3.0 * np.log(s) + log_f(spec, s) + log_F(spec, s) - 2 * A_CRIT * s**2


# ratios and the auxiliary function G ---------------------------------------

def ratio_Ffprime_f2(spec: NonlinearitySpec, s):
    """F f' / f^2, with cancellation-safe closed forms for the built-ins."""
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise InvalidParameterError("the ratio is defined for s > 0 only")
    a = A_CRIT
    x = a * s**2
    if spec.kind == "exp_minus_one":
        out = -np.expm1(-x) * (1.0 + 1.0 / (2.0 * x))
    elif spec.kind == "power_exp":
        p = spec.p
        out = (p * (p - 1) + 2 * a * (2 * p + 1) * s**2 + 4 * a**2 * s**4) \
            / (p + 2 * a * s**2) ** 2
    elif spec.kind == "piecewise":
        p, q = spec.p, spec.q
        upper = (p * (p - 1) + 2 * a * (2 * p + 1) * s**2 + 4 * a**2 * s**4) \
            / (p + 2 * a * s**2) ** 2
        out = np.where(s <= spec.s0, (q - 1) / q, upper)
    else:
        f = eval_f(spec, s)
        if np.any(f == 0):
            raise ZeroDivisionError("f vanishes inside the scan range")
        out = eval_F(spec, s) * eval_f_prime(spec, s) / f**2
    return out if out.ndim else float(out)


def G_auxiliary(spec: NonlinearitySpec, t: float) -> float:
    """G(t) = int_0^t sqrt(F f') / f ds = int_0^t sqrt(F f'/f^2) ds."""
    if t < 0:
        raise InvalidParameterError("G is defined for t >= 0")
    if t == 0:
        return 0.0

    def integrand(s):
        val = ratio_Ffprime_f2(spec, max(s, 1e-12))
        if not np.isfinite(val) or val < 0:
            raise QuadratureFailureError(f"non-finite ratio at s = {s}")
        return math.sqrt(val)

    val, _ = sp_integrate.quad(integrand, 0.0, t, limit=200)
    return float(val)


def G_upper_bound_residual(spec: NonlinearitySpec, t: float) -> float:
    """t^2 - t F(t)/f(t) - G(t)^2; nonnegative up to quadrature tolerance."""
    g = G_auxiliary(spec, t)
    ff = float(np.exp(log_F(spec, t) - log_f(spec, t)))
    return t**2 - t * ff - g**2


# assumption checking --------------------------------------------------------

@dataclass(frozen=True)
class ScanPlan:
    """Sampling plan for assumption checks on (0, s_max]."""

    s_max: float = 10.0
    num: int = 2000
    s_min: float = 1e-4

    def __post_init__(self):
        if self.s_max < 10.0:
            raise InvalidParameterError("scan must reach s_max >= 10")
        if self.num < 100:
            raise InvalidParameterError("scan needs at least 100 points")

    def points(self) -> np.ndarray:
        return np.geomspace(self.s_min, self.s_max, self.num)


@dataclass(frozen=True)
class AssumptionReport:
    f1_ok: bool
    f2_ok: bool
    f3_ok: bool
    f4_ok: bool
    delta_estimate: float
    C_estimate: float
    f3_limit_estimate: float
    f4_liminf_estimate: float
    script_V: float
    sample_range: tuple
    ar_improved_ok: bool          # F(s) <= (1 - delta) s f(s) on the scan
    envelope_constant: float      # fitted C of the two-branch growth envelope
    q_limit_estimate: float       # limit of f(s)/s^{q-1} at 0
    s_epsilon: float              # onset of the (1 - eps) lower-bound regime
    epsilon: float

    @property
    def all_ok(self) -> bool:
        return self.f1_ok and self.f2_ok and self.f3_ok and self.f4_ok


def check_assumptions(spec: NonlinearitySpec, scan: ScanPlan = ScanPlan(),
                      potential: Optional[PeriodicCoefficient] = None,
                      epsilon: float = 0.1, f3_tolerance: float = 0.01) -> AssumptionReport:
    """Evaluate the growth assumptions on the scan; failures are reported,
    never raised."""
    s = scan.points()
    ratios = np.asarray(ratio_Ffprime_f2(spec, s))

    # (f1): sign, behaviour at 0, exponential envelope at infinity
    f_vals = eval_f(spec, s)
    nonneg = bool(np.all(f_vals >= 0))
    head = s <= min(10 * scan.s_min, 0.05)
    small = np.exp(log_f(spec, s[head]) - (spec.q - 1) * np.log(s[head]))
    q_limit = float(small[-1]) if small.size else float("nan")
    small_ok = bool(small.size and np.all(np.isfinite(small)) and np.all(small > 0)
                    and small.max() < 100 * max(small.min(), 1e-12))
    tail = s >= scan.s_max / 2
    log_env = log_f(spec, s[tail]) - spec.p * np.log(s[tail]) - A_CRIT * s[tail]**2
    f1_ok = nonneg and small_ok and bool(np.all(np.isfinite(log_env)))

    # (f2): two-sided bounds of the ratio, with a 1% safety margin
    rmin, rmax = float(ratios.min()), float(ratios.max())
    delta_est = 0.99 * rmin
    c_est = 1.01 * rmax
    f2_ok = rmin > 0 and np.isfinite(rmax)

    # (f3): tail limit by Richardson extrapolation in 1/s^2
    r_half = float(ratio_Ffprime_f2(spec, scan.s_max / 2))
    r_full = float(ratio_Ffprime_f2(spec, scan.s_max))
    f3_limit = (4.0 * r_full - r_half) / 3.0
    f3_ok = abs(f3_limit - 1.0) < f3_tolerance

    # (f4): liminf of s^3 f F e^{-8 pi s^2} compared with the threshold
    pot = potential if potential is not None else PeriodicCoefficient(1.0)
    script_v, _ = compute_script_V(spec.q, pot.max_within(0.5))
    tail_log = log_s3fF_tail(spec, s[tail])
    liminf_est = float(np.exp(min(np.min(tail_log), 690.0)))
    f4_ok = bool(liminf_est > script_v)

    # Ambrosetti-Rabinowitz improvement F <= (1 - delta) s f, in log space
    margin = log_F(spec, s) - (np.log(s) + log_f(spec, s))
    ar_ok = bool(np.all(margin <= math.log(max(1.0 - delta_est, 1e-12)) + 1e-12))

    # two-branch growth envelope constant
    below = s <= spec.s0
    env_low = np.exp(log_F(spec, s[below]) - spec.q * np.log(s[below])) \
        if np.any(below) else np.array([0.0])
    env_high = np.exp(log_F(spec, s[~below]) - (spec.p - 1) * np.log(s[~below])
                      - A_CRIT * s[~below]**2) if np.any(~below) else np.array([0.0])
    envelope_c = float(max(env_low.max(), env_high.max()))

    # onset of sqrt(ratio) >= 1 - eps (used by the G lower bound)
    good = np.sqrt(np.maximum(ratios, 0.0)) >= 1.0 - epsilon
    idx = np.nonzero(~good)[0]
    s_eps = float(s[idx[-1] + 1]) if idx.size and idx[-1] + 1 < len(s) else float(s[0])

    return AssumptionReport(
        f1_ok=f1_ok, f2_ok=f2_ok, f3_ok=f3_ok, f4_ok=f4_ok,
        delta_estimate=delta_est, C_estimate=c_est,
        f3_limit_estimate=f3_limit, f4_liminf_estimate=liminf_est,
        script_V=script_v, sample_range=(float(s[0]), float(s[-1])),
        ar_improved_ok=ar_ok, envelope_constant=envelope_c,
        q_limit_estimate=q_limit, s_epsilon=s_eps, epsilon=epsilon,
    )


def G_lower_bound_holds(spec: NonlinearitySpec, report: AssumptionReport,
                        s_values) -> bool:
    """Check G(s) >= delta * min(s, s_eps) + (1 - eps) (s - s_eps)_+ on a scan.

    This is the integrated form of the lower bound sqrt(F f')/f >= delta,
    and >= 1 - eps past s_eps.
    """
    s_values = np.asarray(s_values, dtype=float)
    fine = np.geomspace(1e-6, float(s_values.max()), 4000)
    sqrt_ratio = np.sqrt(np.maximum(np.asarray(ratio_Ffprime_f2(spec, fine)), 0.0))
    g_cum = np.concatenate(([0.0], np.cumsum(
        0.5 * (sqrt_ratio[1:] + sqrt_ratio[:-1]) * np.diff(fine))))
    g_at = np.interp(s_values, fine, g_cum)
    delta, eps, s_eps = report.delta_estimate, report.epsilon, report.s_epsilon
    bound = delta * np.minimum(s_values, s_eps) \
        + (1.0 - eps) * np.maximum(s_values - s_eps, 0.0)
    return bool(np.all(g_at >= bound - 1e-6 * (1 + bound)))


# the explicit threshold constant --------------------------------------------

def growth_bracket(q: float, V_bound: float, rho):
    """V + (2 pi)^{2/q-1} log^{2/q}(1+rho) ([q]!/2^{[q]-1}) (1 + ([q]+1)/2),
    the bracket shared by the Moser norm expansion and the threshold constant.
    [q] is the integer floor; half-integer q is admitted."""
    rho = np.asarray(rho, dtype=float)
    fq = math.floor(q)
    combinatorial = math.factorial(fq) / 2.0 ** (fq - 1) * (1.0 + (fq + 1) / 2.0)
    out = V_bound + (2 * np.pi) ** (2.0 / q - 1.0) \
        * np.log1p(rho) ** (2.0 / q) * combinatorial
    return out if out.ndim else float(out)


def script_V_integrand(rho, q: float, V_half: float):
    """(1/pi^3) rho^-4 exp(rho^2 * growth_bracket(q, V_half, rho))."""
    rho = np.asarray(rho, dtype=float)
    return rho ** (-4.0) * np.exp(rho**2 * growth_bracket(q, V_half, rho)) / np.pi**3


def compute_script_V(q: float, V_half: float, scan_points: int = 200_001):
    """Minimize the threshold expression over rho in (0, 1/2].

    Returns (value, argmin_rho); a dense scan locates the basin and a
    bounded scalar minimization refines it.  The expression diverges like
    rho^-4 at 0, so the minimizer is interior or the right endpoint.
    """
    if q < 2:
        raise InvalidParameterError("q must be >= 2")
    if V_half <= 0:
        raise InvalidParameterError("V_half must be positive")
    rho = np.linspace(0.5 / scan_points, 0.5, scan_points)
    vals = script_V_integrand(rho, q, V_half)
    i = int(np.argmin(vals))
    lo = rho[max(i - 1, 0)]
    hi = rho[min(i + 1, len(rho) - 1)]
    res = sp_optimize.minimize_scalar(
        lambda x: script_V_integrand(x, q, V_half),
        bounds=(lo, hi), method="bounded",
        options={"xatol": 1e-14})
    best_rho, best_val = float(res.x), float(res.fun)
    if vals[i] < best_val:
        best_rho, best_val = float(rho[i]), float(vals[i])
    # the endpoint is admissible and often the minimizer
    end_val = float(script_V_integrand(0.5, q, V_half))
    if end_val <= best_val:
        best_rho, best_val = 0.5, end_val
    return best_val, best_rho
