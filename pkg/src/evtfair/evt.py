"""Peaks-over-threshold extreme value machinery.

The pipeline keeps two fits of the same tail:

* a generalized Pareto (GPD) fit on the excesses over the threshold u,
  which drives return-level extrapolation through the exceedance rate
  zeta_u = k/n, and
* a three-parameter GEV fit on the raw exceedance values, whose location
  parameter is the per-group worst-case summary that audit reports compare.

Both likelihoods are maximized with a downhill simplex started from moment
style initializers; the support constraint (1 + xi*(t)/scale > 0 for every
observation) is enforced by an infinite penalty, and shapes at or below -1
are rejected because the MLE does not exist there.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import (
    AllEqual,
    BootstrapUnstable,
    DegenerateExceedances,
    DegenerateExcesses,
    EvtFairError,
    FitDiverged,
    InvalidFit,
    TooFewSamples,
)
from .simplex import nelder_mead

TYPE_I = "TypeI"
TYPE_II = "TypeII"
TYPE_III = "TypeIII"

QQ_LINEAR = "Linear"
QQ_SKEWED_LEFT = "SkewedLeft"
QQ_SKEWED_RIGHT = "SkewedRight"
QQ_HEAVY_TAIL = "HeavyTail"

_XI_ZERO = 1e-9          # below this |xi| the exponential/Gumbel limits apply
_DEGENERACY_TOL = 1e-12  # tail means at or below this flag a degenerate group
_EULER_GAMMA = 0.5772156649015329
_EVT_B_CHOICES = (500, 1000, 2000, 5000, 10000)


class GpdFit(NamedTuple):
    sigma_hat: float
    xi: float
    log_likelihood: float


class GevFit(NamedTuple):
    mu: float
    sigma: float
    xi: float
    log_likelihood: float


@dataclass(frozen=True)
class CvTestResult:
    passed: bool
    degenerate: bool
    size_ok: bool
    per_k: tuple  # (k, cv, bound) triples


@dataclass(frozen=True)
class QqDiagnostic:
    points: tuple  # (empirical, theoretical) pairs
    qq_class: str
    r2: float


@dataclass(frozen=True)
class EvtFit:
    """Complete description of one group's fitted tail."""

    u: float
    zeta_u: float
    k: int
    gpd: GpdFit
    gev: GevFit
    se: dict
    tail_type: str
    qq_class: str
    horizon_b: float  # math.inf, 0, or a positive count
    point_mass: bool = False

    def to_json_dict(self) -> dict:
        return {
            "u": self.u,
            "zeta_u": self.zeta_u,
            "k": self.k,
            "gpd": {"sigma_hat": self.gpd.sigma_hat, "xi": self.gpd.xi},
            "gev": {"mu": self.gev.mu, "sigma": self.gev.sigma, "xi": self.gev.xi},
            "se": dict(self.se),
            "tail_type": self.tail_type,
            "qq_class": self.qq_class,
            "horizon": "infinite" if math.isinf(self.horizon_b) else int(self.horizon_b),
            "point_mass": self.point_mass,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "EvtFit":
        horizon = obj["horizon"]
        horizon = math.inf if horizon == "infinite" else float(horizon)
        return cls(
            u=float(obj["u"]),
            zeta_u=float(obj["zeta_u"]),
            k=int(obj["k"]),
            gpd=GpdFit(float(obj["gpd"]["sigma_hat"]), float(obj["gpd"]["xi"]), math.nan),
            gev=GevFit(
                float(obj["gev"]["mu"]),
                float(obj["gev"]["sigma"]),
                float(obj["gev"]["xi"]),
                math.nan,
            ),
            se={k: float(v) for k, v in obj.get("se", {}).items()},
            tail_type=obj["tail_type"],
            qq_class=obj["qq_class"],
            horizon_b=horizon,
            point_mass=bool(obj.get("point_mass", False)),
        )


# --------------------------------------------------------------------------
# threshold selection and the coefficient-of-variation screen
# --------------------------------------------------------------------------

def select_threshold(values, k_max: int):
    """Pick u so that exactly k_max measurements exceed it strictly.

    u is the (k_max+1)-th largest value. When ties leave fewer than k_max
    strict exceedances, u is lowered to the largest observed value that
    admits at least k_max strict exceedances and the larger actual count is
    reported by the caller as k = len(exceedances). Raises AllEqual when no
    observed value admits enough strict exceedances.
    """
    vals = np.asarray(values, dtype=float)
    n = vals.size
    if k_max < 2:
        raise ValueError("k_max must be at least 2")
    if n <= k_max:
        raise TooFewSamples(f"need more than {k_max} values, got {n}")
    if vals.max() == vals.min():
        raise AllEqual("all values identical: no strict exceedance possible")
    desc = np.sort(vals)[::-1]
    u = float(desc[k_max])
    exceed = vals[vals > u]
    if exceed.size < k_max:
        for cand in np.unique(vals)[::-1]:
            if np.sum(vals > cand) >= k_max:
                u = float(cand)
                exceed = vals[vals > u]
                break
        else:
            raise AllEqual(
                "ties prevent any threshold from admitting enough strict exceedances"
            )
    return u, np.sort(exceed).tolist()


def cv_test(values, k_min: int, k_max: int) -> CvTestResult:
    """Exponentiality screen over the top-k values for k in [k_min, k_max].

    Each CV_k is sample standard deviation (n-1 denominator) over mean of
    the k largest values; the pass bound 1 + 1/(4k) carries a small-sample
    bias correction. The screen passes only when there are at least k_max
    values and every CV_k is below its bound. A top-k mean at or below the
    degeneracy tolerance marks the group degenerate instead of pass/fail.
    """
    if k_min < 2:
        raise ValueError("k_min must be at least 2")
    if k_max < k_min:
        raise ValueError("k_max must be >= k_min")
    vals = np.asarray(values, dtype=float)
    if vals.size < k_max:
        return CvTestResult(passed=False, degenerate=False, size_ok=False, per_k=())
    top = np.sort(vals)[::-1][:k_max]
    csum = np.cumsum(top)
    csq = np.cumsum(top * top)
    per_k = []
    degenerate = False
    passed = True
    for k in range(k_min, k_max + 1):
        mean = csum[k - 1] / k
        if mean <= _DEGENERACY_TOL:
            degenerate = True
            passed = False
            break
        var = max((csq[k - 1] - k * mean * mean) / (k - 1), 0.0)
        cv = math.sqrt(var) / mean
        bound = 1.0 + 1.0 / (4.0 * k)
        per_k.append((k, cv, bound))
        if cv >= bound:
            passed = False
            break
    return CvTestResult(
        passed=passed, degenerate=degenerate, size_ok=True, per_k=tuple(per_k)
    )


# --------------------------------------------------------------------------
# likelihoods, initializers, and fits
# --------------------------------------------------------------------------

def gpd_negloglik(params, excesses) -> float:
    """Negative log-likelihood of the GPD at (log_sigma, xi).

    Infinite outside the support or for xi <= -1.
    """
    log_sigma, xi = params
    t = np.asarray(excesses, dtype=float)
    n = t.size
    sigma = math.exp(log_sigma)
    if xi <= -1.0 + 1e-12:
        return math.inf
    if abs(xi) < _XI_ZERO:
        return n * log_sigma + float(t.sum()) / sigma
    w = 1.0 + xi * t / sigma
    if w.min() <= 0.0:
        return math.inf
    return n * log_sigma + (1.0 + 1.0 / xi) * float(np.log(w).sum())


def gpd_pwm_init(excesses):
    """Probability-weighted-moment starting point (sigma, xi)."""
    t = np.sort(np.asarray(excesses, dtype=float))
    n = t.size
    a0 = float(t.mean())
    weights = (n - np.arange(1, n + 1)) / (n - 1.0)
    a1 = float(np.sum(weights * t) / n)
    denom = a0 - 2.0 * a1
    if denom <= 0:
        # heavy-tail indication; start mildly heavy
        sigma, xi = a0 / 2.0, 0.5
    else:
        sigma = 2.0 * a0 * a1 / denom
        xi = 2.0 - a0 / denom
    sigma = max(sigma, 1e-12)
    xi = max(xi, -0.99)
    t_max = float(t[-1])
    if xi < 0 and 1.0 + xi * t_max / sigma <= 0:
        xi = -0.95 * sigma / t_max
    return sigma, xi


def fit_gpd(excesses):
    """Maximum-likelihood GPD fit on positive excesses over the threshold."""
    t = np.asarray(excesses, dtype=float)
    if t.size < 2:
        raise TooFewSamples("need at least 2 excesses")
    if t.min() <= 0:
        raise ValueError("excesses must be strictly positive")
    if t.max() == t.min() or float(t.std()) == 0.0:
        raise DegenerateExcesses("all excesses equal")
    sigma0, xi0 = gpd_pwm_init(t)
    x0 = (math.log(sigma0), xi0)
    f0 = gpd_negloglik(x0, t)
    if not math.isfinite(f0):
        raise FitDiverged("initializer infeasible")
    best, f_best, _ = nelder_mead(
        lambda p: gpd_negloglik(p, t), x0, steps=(0.3, 0.15)
    )
    if not math.isfinite(f_best) or f_best > f0:
        best, f_best = np.asarray(x0), f0
    sigma_hat = math.exp(best[0])
    return GpdFit(sigma_hat=sigma_hat, xi=float(best[1]), log_likelihood=-f_best)


def gev_negloglik(params, values) -> float:
    """Negative log-likelihood of the GEV at (mu, log_sigma, xi)."""
    mu, log_sigma, xi = params
    z = np.asarray(values, dtype=float)
    n = z.size
    sigma = math.exp(log_sigma)
    y = (z - mu) / sigma
    if xi <= -1.0 + 1e-12:
        return math.inf
    if abs(xi) < _XI_ZERO:
        return n * log_sigma + float(y.sum()) + float(np.exp(-y).sum())
    w = 1.0 + xi * y
    if w.min() <= 0.0:
        return math.inf
    log_w = np.log(w)
    return (
        n * log_sigma
        + (1.0 + 1.0 / xi) * float(log_w.sum())
        + float(np.exp(-log_w / xi).sum())
    )


def gev_moment_init(values):
    """Gumbel method-of-moments starting point (mu, sigma, xi=0)."""
    z = np.asarray(values, dtype=float)
    sigma0 = max(float(z.std(ddof=1)) * math.sqrt(6.0) / math.pi, 1e-12)
    mu0 = float(z.mean()) - _EULER_GAMMA * sigma0
    return mu0, sigma0, 0.0


def fit_gev(exceedances):
    """Maximum-likelihood three-parameter GEV fit on raw exceedance values."""
    z = np.asarray(exceedances, dtype=float)
    if z.size < 5:
        raise TooFewSamples("need at least 5 exceedance values")
    if z.max() == z.min():
        raise DegenerateExceedances("all exceedance values equal")
    mu0, sigma0, xi0 = gev_moment_init(z)
    x0 = (mu0, math.log(sigma0), xi0)
    f0 = gev_negloglik(x0, z)
    if not math.isfinite(f0):
        raise FitDiverged("initializer infeasible")
    best, f_best, _ = nelder_mead(
        lambda p: gev_negloglik(p, z), x0, steps=(0.5 * sigma0, 0.3, 0.1)
    )
    if not math.isfinite(f_best) or f_best > f0:
        best, f_best = np.asarray(x0), f0
    return GevFit(
        mu=float(best[0]),
        sigma=math.exp(best[1]),
        xi=float(best[2]),
        log_likelihood=-f_best,
    )


# --------------------------------------------------------------------------
# distribution functions
# --------------------------------------------------------------------------

def gev_cdf(params, z: float) -> float:
    """GEV distribution function exp(-[1 + xi*(z-mu)/sigma]^(-1/xi)).

    Uses the Gumbel limit for |xi| below 1e-9 and returns 0 or 1 outside
    the support depending on which tail is finite.
    """
    mu, sigma, xi = params[0], params[1], params[2]
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    y = (z - mu) / sigma
    if abs(xi) < _XI_ZERO:
        return math.exp(-math.exp(-y))
    w = 1.0 + xi * y
    if w <= 0.0:
        return 0.0 if xi > 0 else 1.0
    return math.exp(-(w ** (-1.0 / xi)))


def gev_quantile(params, p: float) -> float:
    mu, sigma, xi = params[0], params[1], params[2]
    if not 0.0 < p < 1.0:
        raise ValueError("p must be in (0, 1)")
    if abs(xi) < _XI_ZERO:
        return mu - sigma * math.log(-math.log(p))
    return mu + sigma * ((-math.log(p)) ** (-xi) - 1.0) / xi


def gpd_quantile(params, u: float) -> float:
    sigma, xi = params[0], params[1]
    if not 0.0 <= u < 1.0:
        raise ValueError("u must be in [0, 1)")
    if abs(xi) < _XI_ZERO:
        return -sigma * math.log1p(-u)
    return sigma * ((1.0 - u) ** (-xi) - 1.0) / xi


def _gpd_quantile_vec(params, u: np.ndarray) -> np.ndarray:
    sigma, xi = params[0], params[1]
    if abs(xi) < _XI_ZERO:
        return -sigma * np.log1p(-u)
    return sigma * ((1.0 - u) ** (-xi) - 1.0) / xi


def _gev_quantile_vec(params, p: np.ndarray) -> np.ndarray:
    mu, sigma, xi = params[0], params[1], params[2]
    if abs(xi) < _XI_ZERO:
        return mu - sigma * np.log(-np.log(p))
    return mu + sigma * ((-np.log(p)) ** (-xi) - 1.0) / xi


def return_level(fit: EvtFit, m: float) -> float:
    """Level expected to be exceeded once in m interactions.

    Exceedance parameterization: u + (sigma_hat/xi) * ((m*zeta_u)^xi - 1),
    with the logarithmic branch when the shape is numerically zero. A point
    mass tail returns its constant location for every m.
    """
    if m < 1:
        raise InvalidFit(f"m must be >= 1, got {m}")
    if fit.point_mass:
        return fit.gev.mu
    if not (0.0 < fit.zeta_u <= 1.0) or fit.gpd.sigma_hat <= 0:
        raise InvalidFit("fit has no valid exceedance model")
    x = m * fit.zeta_u
    xi = fit.gpd.xi
    if abs(xi) < _XI_ZERO:
        return fit.u + fit.gpd.sigma_hat * math.log(x)
    return fit.u + fit.gpd.sigma_hat / xi * (x ** xi - 1.0)


# --------------------------------------------------------------------------
# tail classification, Q-Q diagnostics, horizons
# --------------------------------------------------------------------------

def classify_tail(xi: float, se_xi: float) -> str:
    """Type III if the shape is negative at ~95% confidence, Type II if
    positive at the same level, Type I when indistinguishable from zero."""
    if se_xi < 0:
        raise ValueError("se_xi must be nonnegative")
    if xi + 2.0 * se_xi < 0:
        return TYPE_III
    if xi - 2.0 * se_xi > 0:
        return TYPE_II
    return TYPE_I


def qq_diagnostic(gev, exceedances, tail_type: str) -> QqDiagnostic:
    """Empirical vs fitted GEV quantiles at plotting positions (i-0.5)/k.

    Heavy-tail classification takes precedence for Type II fits. Otherwise
    the plot is Linear when the squared correlation of the points reaches
    0.99, and skewness is read off the mean residual of the upper quartile
    (negative means the observed tail sits below the fitted line).
    """
    emp = np.sort(np.asarray(exceedances, dtype=float))
    k = emp.size
    probs = (np.arange(1, k + 1) - 0.5) / k
    theo = _gev_quantile_vec(gev, probs)
    points = tuple(zip(emp.tolist(), theo.tolist()))
    if tail_type == TYPE_II:
        return QqDiagnostic(points=points, qq_class=QQ_HEAVY_TAIL, r2=_r_squared(emp, theo))
    r2 = _r_squared(emp, theo)
    if r2 >= 0.99:
        return QqDiagnostic(points=points, qq_class=QQ_LINEAR, r2=r2)
    slope, intercept = _least_squares_line(theo, emp)
    residuals = emp - (intercept + slope * theo)
    n_up = max(1, k // 4)
    mean_res = float(residuals[-n_up:].mean())
    cls = QQ_SKEWED_LEFT if mean_res < 0 else QQ_SKEWED_RIGHT
    return QqDiagnostic(points=points, qq_class=cls, r2=r2)


def _r_squared(a, b) -> float:
    if float(np.std(a)) == 0.0 or float(np.std(b)) == 0.0:
        return 1.0
    r = float(np.corrcoef(a, b)[0, 1])
    return r * r


def _least_squares_line(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xm, ym = x.mean(), y.mean()
    denom = float(np.sum((x - xm) ** 2))
    slope = float(np.sum((x - xm) * (y - ym)) / denom) if denom > 0 else 0.0
    return slope, ym - slope * xm


def horizon(tail_type: str, qq_class: str, zeta_u: float):
    """Extrapolation horizon: infinite for a clean finite-endpoint tail,
    zero for heavy tails, and a bounded interaction count otherwise."""
    if not 0.0 < zeta_u <= 1.0:
        raise ValueError("zeta_u must be in (0, 1]")
    if tail_type == TYPE_II or qq_class == QQ_HEAVY_TAIL:
        return 0
    if tail_type == TYPE_III and qq_class == QQ_LINEAR:
        return math.inf
    raw = 10.0 / zeta_u
    return min(_EVT_B_CHOICES, key=lambda b: (abs(raw - b), b))


# --------------------------------------------------------------------------
# parametric bootstrap
# --------------------------------------------------------------------------

def _thread_count() -> int:
    raw = os.environ.get("EVTFAIR_THREADS", "0")
    try:
        return max(int(raw), 0)
    except ValueError:
        return 0


def bootstrap_se(values, fit_kind: str, n_resamples: int = 200, seed: int = 0,
                 params=None, threads: int | None = None) -> dict:
    """Parametric-bootstrap standard errors for the fitted parameters.

    Resamples are drawn from the fitted distribution by inverse CDF with a
    per-resample generator seeded from (seed, index), so results do not
    depend on execution order. Refits that raise are dropped; fewer than
    80% surviving raises BootstrapUnstable.
    """
    if n_resamples < 50:
        raise ValueError("n_resamples must be at least 50")
    vals = np.asarray(values, dtype=float)
    n = vals.size
    if fit_kind == "gpd":
        base = params if params is not None else fit_gpd(vals)
        quantile = lambda u: _gpd_quantile_vec(base, u)
        refit = fit_gpd
        names = ("sigma_hat", "xi")
    elif fit_kind == "gev":
        base = params if params is not None else fit_gev(vals)
        quantile = lambda u: _gev_quantile_vec(base, np.clip(u, 1e-12, 1 - 1e-12))
        refit = fit_gev
        names = ("mu", "sigma", "xi")
    else:
        raise ValueError(f"unknown fit_kind {fit_kind!r}")

    def one(i):
        rng = np.random.default_rng([seed, i])
        sample = quantile(rng.random(n))
        try:
            result = refit(sample)
        except EvtFairError:
            return None
        return tuple(result[: len(names)])

    threads = _thread_count() if threads is None else threads
    if threads >= 2:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(n_resamples)))
    else:
        results = [one(i) for i in range(n_resamples)]
    ok = [r for r in results if r is not None]
    if len(ok) < 0.8 * n_resamples:
        raise BootstrapUnstable(
            f"only {len(ok)}/{n_resamples} bootstrap refits converged"
        )
    arr = np.asarray(ok)
    return {name: float(arr[:, j].std(ddof=1)) for j, name in enumerate(names)}
