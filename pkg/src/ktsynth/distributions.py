"""Univariate distribution toolkit behind the whole-distribution grade generator.

Seven parametric families, each with density evaluation, maximum-likelihood
fitting (Nelder-Mead on the negative log-likelihood from method-of-moments
starts), closed-form moments and seeded sampling. Best-family selection ranks
fits by residual sum of squares against an equal-width histogram of the data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import betaln, gammaln, polygamma, psi, xlog1py, xlogy

FAMILIES = ("loggamma", "beta4", "normal", "gamma3", "lognormal3", "uniform", "weibull3")

PARAM_NAMES = {
    "loggamma": ("c", "loc", "scale"),
    "beta4": ("a", "b", "loc", "scale"),
    "normal": ("mu", "sigma"),
    "gamma3": ("k", "loc", "scale"),
    "lognormal3": ("s", "loc", "scale"),
    "uniform": ("lo", "hi"),
    "weibull3": ("k", "loc", "scale"),
}

_MIN_SAMPLE = 50
_JITTER_SEED = 0x5EEDF17
_N_RESTARTS = 3

_LOG2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class FittedDistribution:
    """A parametric family with concrete parameters plus fit scores."""

    family: str
    params: tuple[float, ...]
    rss_score: float
    log_likelihood: float

    def __post_init__(self):
        validate_params(self.family, self.params)
        if not self.rss_score >= 0.0:
            raise ValueError(f"rss_score must be non-negative, got {self.rss_score}")

    def param_dict(self) -> dict:
        return dict(zip(PARAM_NAMES[self.family], self.params))


@dataclass(frozen=True)
class FitFailure:
    """Non-fatal fitting outcome: the family could not be fitted."""

    family: str
    message: str


class AllFitsFailedError(ValueError):
    """Every candidate family failed to fit the sample."""

    def __init__(self, failures: Sequence[FitFailure]):
        self.failures = tuple(failures)
        detail = "; ".join(f"{f.family}: {f.message}" for f in failures)
        super().__init__(f"all families failed to fit: {detail}")


@dataclass(frozen=True)
class Histogram:
    """Equal-width density histogram: len(bin_edges) = len(densities) + 1."""

    bin_edges: np.ndarray
    densities: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])


def validate_params(family: str, params: Sequence[float]) -> None:
    """Raise ValueError unless params are a valid parameter vector for family."""
    if family not in PARAM_NAMES:
        raise ValueError(f"unknown family {family!r}")
    names = PARAM_NAMES[family]
    if len(params) != len(names):
        raise ValueError(f"{family} expects {len(names)} params, got {len(params)}")
    p = dict(zip(names, (float(v) for v in params)))
    if any(not np.isfinite(v) for v in p.values()):
        raise ValueError(f"{family} params must be finite, got {params}")
    if family == "loggamma" and (p["c"] <= 0 or p["scale"] <= 0):
        raise ValueError(f"loggamma needs c>0 and scale>0, got {params}")
    if family == "beta4" and (p["a"] <= 0 or p["b"] <= 0 or p["scale"] <= 0):
        raise ValueError(f"beta4 needs a,b,scale>0, got {params}")
    if family == "normal" and p["sigma"] <= 0:
        raise ValueError(f"normal needs sigma>0, got {params}")
    if family in ("gamma3", "weibull3") and (p["k"] <= 0 or p["scale"] <= 0):
        raise ValueError(f"{family} needs k>0 and scale>0, got {params}")
    if family == "lognormal3" and (p["s"] <= 0 or p["scale"] <= 0):
        raise ValueError(f"lognormal3 needs s>0 and scale>0, got {params}")
    if family == "uniform" and not p["hi"] > p["lo"]:
        raise ValueError(f"uniform needs hi>lo, got {params}")


def logpdf(family: str, params: Sequence[float], x) -> np.ndarray | float:
    """Log density; -inf outside the support."""
    validate_params(family, params)
    xv = np.asarray(x, dtype=np.float64)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        out = _logpdf_raw(family, tuple(float(v) for v in params), xv)
    if np.ndim(x) == 0:
        return float(out)
    return out


def pdf(family_or_fit, params_or_x, x=None) -> np.ndarray | float:
    """Density of a family/params pair or of a FittedDistribution.

    Call as pdf(fit, x) or pdf(family, params, x). Returns 0 outside support.
    """
    if isinstance(family_or_fit, FittedDistribution):
        family, params, x = family_or_fit.family, family_or_fit.params, params_or_x
    else:
        family, params = family_or_fit, params_or_x
    lp = logpdf(family, params, x)
    with np.errstate(over="ignore"):
        out = np.exp(lp)
    if np.ndim(x) == 0:
        return float(out)
    return out


def _logpdf_raw(family: str, p: tuple, x: np.ndarray) -> np.ndarray:
    if family == "loggamma":
        c, loc, scale = p
        z = (x - loc) / scale
        return c * z - np.exp(z) - gammaln(c) - np.log(scale)
    if family == "beta4":
        a, b, loc, scale = p
        y = (x - loc) / scale
        inside = (y >= 0.0) & (y <= 1.0)
        ys = np.where(inside, y, 0.5)
        val = (
            xlogy(a - 1.0, ys)
            + xlog1py(b - 1.0, -ys)
            - betaln(a, b)
            - np.log(scale)
        )
        return np.where(inside, val, -np.inf)
    if family == "normal":
        mu, sigma = p
        z = (x - mu) / sigma
        return -0.5 * z * z - np.log(sigma) - 0.5 * _LOG2PI
    if family == "gamma3":
        k, loc, scale = p
        y = (x - loc) / scale
        inside = y >= 0.0
        ys = np.where(inside, y, 1.0)
        val = xlogy(k - 1.0, ys) - ys - gammaln(k) - np.log(scale)
        return np.where(inside, val, -np.inf)
    if family == "lognormal3":
        s, loc, scale = p
        y = (x - loc) / scale
        inside = y > 0.0
        ys = np.where(inside, y, 1.0)
        ly = np.log(ys)
        val = -0.5 * (ly / s) ** 2 - ly - np.log(s * scale) - 0.5 * _LOG2PI
        return np.where(inside, val, -np.inf)
    if family == "uniform":
        lo, hi = p
        inside = (x >= lo) & (x <= hi)
        return np.where(inside, -np.log(hi - lo), -np.inf)
    if family == "weibull3":
        k, loc, scale = p
        y = (x - loc) / scale
        inside = y >= 0.0
        ys = np.where(inside, y, 1.0)
        val = np.log(k / scale) + xlogy(k - 1.0, ys) - ys**k
        return np.where(inside, val, -np.inf)
    raise ValueError(f"unknown family {family!r}")


def analytic_moments(fit_or_family, params: Sequence[float] | None = None) -> tuple[float, float]:
    """Closed-form (mean, std); every supported family has finite moments."""
    if isinstance(fit_or_family, FittedDistribution):
        family, params = fit_or_family.family, fit_or_family.params
    else:
        family = fit_or_family
    validate_params(family, params)
    p = tuple(float(v) for v in params)
    if family == "loggamma":
        c, loc, scale = p
        return loc + scale * float(psi(c)), scale * float(np.sqrt(polygamma(1, c)))
    if family == "beta4":
        a, b, loc, scale = p
        mean = a / (a + b)
        var = a * b / ((a + b) ** 2 * (a + b + 1.0))
        return loc + scale * mean, scale * float(np.sqrt(var))
    if family == "normal":
        return p[0], p[1]
    if family == "gamma3":
        k, loc, scale = p
        return loc + k * scale, scale * float(np.sqrt(k))
    if family == "lognormal3":
        s, loc, scale = p
        w = float(np.exp(s * s))
        return loc + scale * float(np.sqrt(w)), scale * float(np.sqrt(w * (w - 1.0)))
    if family == "uniform":
        lo, hi = p
        return 0.5 * (lo + hi), (hi - lo) / float(np.sqrt(12.0))
    if family == "weibull3":
        k, loc, scale = p
        m1 = float(np.exp(gammaln(1.0 + 1.0 / k)))
        m2 = float(np.exp(gammaln(1.0 + 2.0 / k)))
        return loc + scale * m1, scale * float(np.sqrt(max(m2 - m1 * m1, 0.0)))
    raise ValueError(f"unknown family {family!r}")


def sample(fit: FittedDistribution, n: int, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. variates; built from gamma/normal/uniform/Weibull primitives."""
    if n < 0:
        raise ValueError(f"n must be non-negative, got {n}")
    family = fit.family
    p = fit.params
    if n == 0:
        return np.empty(0, dtype=np.float64)
    if family == "loggamma":
        c, loc, scale = p
        return loc + scale * np.log(rng.standard_gamma(c, size=n))
    if family == "beta4":
        a, b, loc, scale = p
        g1 = rng.standard_gamma(a, size=n)
        g2 = rng.standard_gamma(b, size=n)
        return loc + scale * (g1 / (g1 + g2))
    if family == "normal":
        mu, sigma = p
        return rng.normal(mu, sigma, size=n)
    if family == "gamma3":
        k, loc, scale = p
        return loc + scale * rng.standard_gamma(k, size=n)
    if family == "lognormal3":
        s, loc, scale = p
        return loc + scale * np.exp(s * rng.standard_normal(n))
    if family == "uniform":
        lo, hi = p
        return rng.uniform(lo, hi, size=n)
    if family == "weibull3":
        k, loc, scale = p
        return loc + scale * rng.weibull(k, size=n)
    raise ValueError(f"unknown family {family!r}")


def make_histogram(sample_values: Sequence[float], n_bins: int) -> Histogram:
    """Equal-width density histogram over [min, max] of the sample."""
    x = np.asarray(sample_values, dtype=np.float64)
    if x.size == 0:
        raise ValueError("cannot histogram an empty sample")
    if n_bins < 1:
        raise ValueError(f"n_bins must be positive, got {n_bins}")
    lo, hi = float(np.min(x)), float(np.max(x))
    if hi <= lo:
        raise ValueError("sample has zero range")
    densities, edges = np.histogram(x, bins=n_bins, range=(lo, hi), density=True)
    return Histogram(bin_edges=edges, densities=densities)


# ---------------------------------------------------------------------------
# Maximum-likelihood fitting
# ---------------------------------------------------------------------------
#
# Each family optimizes in an unconstrained transformed space. Positive
# parameters travel as logs; lower-bound location parameters travel as
# loc = bound - exp(u) so the support constraint cannot be violated. The
# margin keeps threshold families off the unbounded-likelihood spike that
# shape < 1 fits can reach when loc approaches the sample minimum.


@dataclass(frozen=True)
class _SampleInfo:
    x: np.ndarray
    mean: float
    var: float
    std: float
    skew: float
    min: float
    max: float
    span: float
    margin: float


def _describe(x: np.ndarray) -> _SampleInfo:
    mean = float(np.mean(x))
    var = float(np.var(x))
    std = float(np.sqrt(var))
    centered = x - mean
    skew = float(np.mean(centered**3) / std**3) if std > 0 else 0.0
    lo, hi = float(np.min(x)), float(np.max(x))
    span = hi - lo
    return _SampleInfo(
        x=x, mean=mean, var=var, std=std, skew=skew, min=lo, max=hi, span=span,
        margin=1e-6 * span,
    )


def _bisect_increasing(fn, target: float, lo: float, hi: float, iters: int = 80) -> float:
    """Root of fn(v) = target for fn monotone increasing on [lo, hi]."""
    target = min(max(target, fn(lo)), fn(hi))
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if fn(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _loggamma_init(info: _SampleInfo) -> tuple:
    # Standard log-gamma skew psi2(c)/psi1(c)^1.5 is negative and increases
    # toward 0 with c; invert it at the sample skew.
    t = min(max(info.skew, -1.95), -0.05)
    c = _bisect_increasing(
        lambda v: float(polygamma(2, v)) / float(polygamma(1, v)) ** 1.5,
        t, 1e-3, 2e3,
    )
    scale = info.std / float(np.sqrt(polygamma(1, c)))
    loc = info.mean - scale * float(psi(c))
    return c, loc, scale

def _beta4_init(info: _SampleInfo) -> tuple:
    delta = 0.01 * info.span + info.margin
    loc = info.min - delta
    scale = info.span + 2.0 * delta
    m = (info.mean - loc) / scale
    v = max(info.std**2 / scale**2, 1e-8)
    t = max(m * (1.0 - m) / v - 1.0, 0.2)
    a = min(max(m * t, 0.05), 1e3)
    b = min(max((1.0 - m) * t, 0.05), 1e3)
    return a, b, loc, scale

def _gamma3_init(info: _SampleInfo) -> tuple:
    if info.skew > 0.05:
        k = (2.0 / info.skew) ** 2
        scale = info.std / np.sqrt(k)
        loc = info.mean - k * scale
        if loc < info.min - info.margin:
            return k, loc, scale
    loc = info.min - 0.05 * info.std - info.margin
    k = ((info.mean - loc) / info.std) ** 2
    return k, loc, info.std**2 / (info.mean - loc)

def _lognormal3_init(info: _SampleInfo) -> tuple:
    loc = info.min - 0.05 * info.std - info.margin
    y = np.log(info.x - loc)
    s = max(float(np.std(y)), 1e-2)
    return s, loc, float(np.exp(np.mean(y)))

def _weibull3_init(info: _SampleInfo) -> tuple:
    # Coefficient of variation of a standard Weibull decreases in k.
    loc = info.min - 0.05 * info.std - info.margin
    cv_target = info.std / (info.mean - loc)

    def neg_cv(k):
        c2 = float(np.exp(gammaln(1.0 + 2.0 / k) - 2.0 * gammaln(1.0 + 1.0 / k)))
        return -np.sqrt(max(c2 - 1.0, 1e-12))

    k = _bisect_increasing(neg_cv, -cv_target, 0.2, 50.0)
    scale = (info.mean - loc) / float(np.exp(gammaln(1.0 + 1.0 / k)))
    return k, loc, scale

def _normal_init(info: _SampleInfo) -> tuple:
    return info.mean, info.std


def _pack(family: str, params: tuple, info: _SampleInfo) -> np.ndarray:
    """Natural parameters -> unconstrained optimizer coordinates."""
    lo_bound = info.min - info.margin
    hi_bound = info.max + info.margin
    floor = 1e-4 * max(info.std, 1e-12)
    if family == "loggamma":
        c, loc, scale = params
        return np.array([np.log(c), loc, np.log(scale)])
    if family == "normal":
        mu, sigma = params
        return np.array([mu, np.log(sigma)])
    if family in ("gamma3", "lognormal3", "weibull3"):
        shape, loc, scale = params
        gap = max(lo_bound - loc, floor)
        return np.array([np.log(shape), np.log(gap), np.log(scale)])
    if family == "beta4":
        a, b, loc, scale = params
        gap_lo = max(lo_bound - loc, floor)
        gap_hi = max(loc + scale - hi_bound, floor)
        return np.array([np.log(a), np.log(b), np.log(gap_lo), np.log(gap_hi)])
    raise ValueError(family)


def _unpack(family: str, z: np.ndarray, info: _SampleInfo) -> tuple:
    lo_bound = info.min - info.margin
    hi_bound = info.max + info.margin
    if family == "loggamma":
        return float(np.exp(z[0])), float(z[1]), float(np.exp(z[2]))
    if family == "normal":
        return float(z[0]), float(np.exp(z[1]))
    if family in ("gamma3", "lognormal3", "weibull3"):
        loc = lo_bound - float(np.exp(z[1]))
        return float(np.exp(z[0])), loc, float(np.exp(z[2]))
    if family == "beta4":
        loc = lo_bound - float(np.exp(z[2]))
        upper = hi_bound + float(np.exp(z[3]))
        return float(np.exp(z[0])), float(np.exp(z[1])), loc, upper - loc
    raise ValueError(family)


_INITS = {
    "loggamma": _loggamma_init,
    "beta4": _beta4_init,
    "normal": _normal_init,
    "gamma3": _gamma3_init,
    "lognormal3": _lognormal3_init,
    "weibull3": _weibull3_init,
}


def _mean_nll(family: str, params: tuple, info: _SampleInfo) -> float:
    """Mean negative log-likelihood via per-family sufficient statistics.

    Only called with parameters whose support strictly covers the sample
    (guaranteed by the optimizer parameterization), so no masking is needed;
    overflow yields a non-finite value handled by the caller.
    """
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        return _mean_nll_raw(family, params, info)


def _mean_nll_raw(family: str, params: tuple, info: _SampleInfo) -> float:
    x = info.x
    if family == "loggamma":
        c, loc, scale = params
        mean_z = (info.mean - loc) / scale
        mean_exp = float(np.mean(np.exp((x - loc) / scale)))
        return -(c * mean_z - mean_exp - float(gammaln(c)) - np.log(scale))
    if family == "normal":
        mu, sigma = params
        quad = (info.var + (info.mean - mu) ** 2) / (2.0 * sigma * sigma)
        return float(0.5 * _LOG2PI + np.log(sigma) + quad)
    if family == "beta4":
        a, b, loc, scale = params
        ls = np.log(scale)
        l1 = float(np.mean(np.log(x - loc)))
        l2 = float(np.mean(np.log(loc + scale - x)))
        return -((a - 1.0) * (l1 - ls) + (b - 1.0) * (l2 - ls) - float(betaln(a, b)) - ls)
    if family == "gamma3":
        k, loc, scale = params
        mean_w = float(np.mean(np.log(x - loc)))
        ls = np.log(scale)
        return -((k - 1.0) * (mean_w - ls) - (info.mean - loc) / scale - float(gammaln(k)) - ls)
    if family == "lognormal3":
        s, loc, scale = params
        w = np.log(x - loc)
        mean_w = float(np.mean(w))
        mean_w2 = float(np.mean(w * w))
        ls = np.log(scale)
        quad = (mean_w2 - 2.0 * ls * mean_w + ls * ls) / (2.0 * s * s)
        return float(quad + (mean_w - ls) + np.log(s) + ls + 0.5 * _LOG2PI)
    if family == "weibull3":
        k, loc, scale = params
        w = np.log(x - loc)
        ls = np.log(scale)
        mean_pow = float(np.mean(np.exp(k * (w - ls))))
        return -(np.log(k) - ls + (k - 1.0) * (float(np.mean(w)) - ls) - mean_pow)
    raise ValueError(family)


def _fit_uniform(info: _SampleInfo) -> FittedDistribution | FitFailure:
    # The likelihood maximum is the sample range; no search needed.
    if info.span <= 0:
        return FitFailure("uniform", "degenerate sample: zero range")
    ll = -info.x.size * float(np.log(info.span))
    return FittedDistribution(
        family="uniform", params=(info.min, info.max), rss_score=0.0,
        log_likelihood=ll,
    )


def mle_fit(family: str, sample_values: Sequence[float]) -> FittedDistribution | FitFailure:
    """Maximum-likelihood fit of one family by Nelder-Mead with restarts.

    Starts from a method-of-moments estimate plus jittered copies and keeps
    the best final likelihood. Returns a FitFailure (never raises) when the
    sample is degenerate or no start reaches a finite optimum.
    """
    if family not in PARAM_NAMES:
        raise ValueError(f"unknown family {family!r}")
    x = np.asarray(sample_values, dtype=np.float64)
    if x.size < _MIN_SAMPLE:
        raise ValueError(f"need at least {_MIN_SAMPLE} values, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("sample contains non-finite values")
    info = _describe(x)
    if info.std <= 0 or info.span <= 0:
        return FitFailure(family, "degenerate sample: zero variance")
    if family == "uniform":
        return _fit_uniform(info)

    def objective(z: np.ndarray) -> float:
        val = _mean_nll(family, _unpack(family, z, info), info)
        if not np.isfinite(val):
            return 1e7
        return val

    try:
        z0 = _pack(family, _INITS[family](info), info)
    except (ValueError, FloatingPointError, OverflowError) as exc:
        return FitFailure(family, f"moment initialization failed: {exc}")
    if not np.all(np.isfinite(z0)):
        return FitFailure(family, "moment initialization not finite")

    jitter_rng = np.random.default_rng(_JITTER_SEED)
    starts = [(z0, 400 * z0.size)] + [
        (z0 + jitter_rng.normal(0.0, 0.3, size=z0.size), 130 * z0.size)
        for _ in range(_N_RESTARTS)
    ]
    best_z, best_val = None, np.inf
    for start, budget in starts:
        res = minimize(
            objective, start, method="Nelder-Mead",
            options={
                "maxiter": budget, "maxfev": budget,
                "xatol": 1e-6, "fatol": 1e-10,
            },
        )
        if np.isfinite(res.fun) and res.fun < best_val:
            best_val, best_z = float(res.fun), np.asarray(res.x)
    if best_z is None or best_val >= 1e7:
        return FitFailure(family, "optimizer found no finite-likelihood solution")
    params = _unpack(family, best_z, info)
    try:
        validate_params(family, params)
    except ValueError as exc:
        return FitFailure(family, f"optimizer left the valid domain: {exc}")
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        ll = float(np.sum(_logpdf_raw(family, params, x)))
    if not np.isfinite(ll):
        return FitFailure(family, "final likelihood not finite")
    return FittedDistribution(
        family=family, params=tuple(params), rss_score=0.0, log_likelihood=ll,
    )


def exclude_boundary_grades(sample_values: Sequence[float]) -> np.ndarray:
    """Drop grades exactly equal to 0 or 100 ahead of distribution fitting."""
    x = np.asarray(sample_values, dtype=np.float64)
    return x[(x != 0.0) & (x != 100.0)]


def select_best_fit(
    sample_values: Sequence[float],
    families: Sequence[str] = FAMILIES,
    n_bins: int = 50,
) -> list[FittedDistribution]:
    """Fit every family and rank by histogram residual sum of squares.

    Boundary grades (exactly 0 or 100) are removed first. Each surviving
    family's rss_score is the sum over histogram bins of the squared gap
    between empirical bin density and the fitted density at the bin center;
    the returned list is sorted ascending by that score. Raises
    AllFitsFailedError when no family fits.
    """
    x = exclude_boundary_grades(sample_values)
    if x.size < _MIN_SAMPLE:
        raise ValueError(
            f"need at least {_MIN_SAMPLE} interior values after boundary "
            f"exclusion, got {x.size}"
        )
    if float(np.min(x)) == float(np.max(x)):
        # A constant sample defeats every family; report it per family so
        # callers get the same diagnostics shape as any other total failure.
        raise AllFitsFailedError(
            [mle_fit(family, x) for family in families]
        )
    hist = make_histogram(x, n_bins)
    centers = hist.centers
    ranked: list[FittedDistribution] = []
    failures: list[FitFailure] = []
    for family in families:
        fit = mle_fit(family, x)
        if isinstance(fit, FitFailure):
            failures.append(fit)
            continue
        dens = pdf(fit.family, fit.params, centers)
        rss = float(np.sum((hist.densities - dens) ** 2))
        ranked.append(replace(fit, rss_score=rss))
    if not ranked:
        raise AllFitsFailedError(failures)
    ranked.sort(key=lambda f: f.rss_score)
    return ranked


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def fit_to_dict(fit: FittedDistribution) -> dict:
    return {
        "family": fit.family,
        "params": fit.param_dict(),
        "rss_score": fit.rss_score,
        "log_likelihood": fit.log_likelihood,
    }


def fit_from_dict(doc: dict) -> FittedDistribution:
    family = doc["family"]
    if family not in PARAM_NAMES:
        raise ValueError(f"unknown family {family!r}")
    params = tuple(float(doc["params"][name]) for name in PARAM_NAMES[family])
    return FittedDistribution(
        family=family,
        params=params,
        rss_score=float(doc.get("rss_score", 0.0)),
        log_likelihood=float(doc.get("log_likelihood", 0.0)),
    )


def fits_to_json(fits: Sequence[FittedDistribution]) -> str:
    return json.dumps({"fits": [fit_to_dict(f) for f in fits]}, indent=2) + "\n"


def fits_from_json(text: str) -> list[FittedDistribution]:
    doc = json.loads(text)
    return [fit_from_dict(d) for d in doc["fits"]]
