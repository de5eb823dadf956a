"""Archimedean generator families.

Five one-parameter families are supported (AMH, Clayton, Frank, Gumbel, Joe).
Every function accepts scalars or numpy arrays and returns the same shape.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

FAMILIES = ("amh", "clayton", "frank", "gumbel", "joe")

# admissible theta: (lower, lower_inclusive, upper, upper_inclusive)
_THETA_RANGE = {
    "amh": (0.0, True, 1.0, False),
    "clayton": (0.0, False, math.inf, False),
    "frank": (0.0, False, math.inf, False),
    "gumbel": (1.0, True, math.inf, False),
    "joe": (1.0, True, math.inf, False),
}

AMH_TAU_MAX = 1.0 / 3.0
_JOE_TERM_CUTOFF = 1e-14


class GeneratorDomainError(ValueError):
    """Argument or parameter outside a generator's domain."""


class TauRangeError(ValueError):
    """Kendall's tau that the family cannot attain."""


def _check_family(family: str) -> str:
    fam = str(family).lower()
    if fam not in FAMILIES:
        raise GeneratorDomainError(f"unknown family {family!r}; expected one of {FAMILIES}")
    return fam


def _check_theta(family: str, theta: float) -> None:
    lo, lo_inc, hi, hi_inc = _THETA_RANGE[family]
    ok = math.isfinite(theta) and (theta >= lo if lo_inc else theta > lo)
    ok = ok and (theta <= hi if hi_inc else theta < hi)
    if not ok:
        lb = "[" if lo_inc else "("
        rb = "]" if hi_inc else ")"
        raise GeneratorDomainError(
            f"theta={theta!r} outside {family} range {lb}{lo}, {hi}{rb}"
        )


@dataclass(frozen=True)
class Generator:
    """A generator family tag with its parameter."""

    family: str
    theta: float

    def __post_init__(self):
        fam = _check_family(self.family)
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "theta", float(self.theta))
        _check_theta(fam, self.theta)

    @classmethod
    def from_tau(cls, family: str, tau: float) -> "Generator":
        return cls(family, theta_from_tau(family, tau))

    @classmethod
    def from_dict(cls, d: dict) -> "Generator":
        if "theta" in d:
            return cls(d["family"], d["theta"])
        if "tau" in d:
            return cls.from_tau(d["family"], d["tau"])
        raise GeneratorDomainError(f"generator needs 'theta' or 'tau': {d!r}")

    def to_dict(self) -> dict:
        return {"family": self.family, "theta": self.theta}

    @property
    def tau(self) -> float:
        return tau_from_theta(self.family, self.theta)

    def psi(self, x):
        return psi(self, x)

    def psi_inv(self, u):
        return psi_inv(self, u)

    def psi_deriv(self, x):
        return psi_deriv(self, x)

    def kendall_cdf(self, w):
        return bivariate_kendall_cdf(self, w)


def _frank_log_inner(th, x):
    # log(1 - (1 - e^-th) e^-x) without cancellation near x = 0
    with np.errstate(divide="ignore"):
        near = np.log(-np.expm1(-x) + np.exp(-x - th))
    far = np.log1p(np.expm1(-th) * np.exp(-np.maximum(x, 1.0)))
    return np.where(x < 1.0, near, far)


def psi(gen: Generator, x):
    """Evaluate the generator at ``x >= 0``."""
    x = np.asarray(x, dtype=float)
    if np.any(~(x >= 0)):
        raise GeneratorDomainError("psi requires x >= 0")
    th = gen.theta
    with np.errstate(over="ignore", under="ignore"):
        if gen.family == "clayton":
            out = np.exp(-np.log1p(x) / th)
        elif gen.family == "gumbel":
            out = np.exp(-(x ** (1.0 / th)))
        elif gen.family == "frank":
            out = -_frank_log_inner(th, x) / th
        elif gen.family == "joe":
            out = 1.0 - (-np.expm1(-x)) ** (1.0 / th)
        else:  # amh
            out = (1.0 - th) / (np.exp(x) - th)
    return out[()] if out.ndim == 0 else out


def psi_inv(gen: Generator, u):
    """Inverse generator on ``(0, 1]``."""
    u = np.asarray(u, dtype=float)
    if np.any(~((u > 0) & (u <= 1))):
        raise GeneratorDomainError("psi_inv requires u in (0, 1]")
    th = gen.theta
    with np.errstate(over="ignore", divide="ignore"):
        if gen.family == "clayton":
            out = np.expm1(-th * np.log(u))
        elif gen.family == "gumbel":
            out = (-np.log(u)) ** th
        elif gen.family == "frank":
            # ratio expm1(-th u) / expm1(-th); as 1 + r near u = 1 to keep precision
            r = -np.exp(-th * u) * np.expm1(-th * (1.0 - u)) / np.expm1(-th)
            out = np.where(u < 0.5, -np.log(np.expm1(-th * u) / np.expm1(-th)), -np.log1p(r))
        elif gen.family == "joe":
            out = -np.log1p(-((1.0 - u) ** th))
        else:
            out = np.log((1.0 - th) / u + th)
    out = np.maximum(out, 0.0)
    return out[()] if out.ndim == 0 else out


def psi_deriv(gen: Generator, x):
    """First derivative of the generator (nonpositive)."""
    x = np.asarray(x, dtype=float)
    th = gen.theta
    with np.errstate(over="ignore", under="ignore", divide="ignore", invalid="ignore"):
        if gen.family == "clayton":
            out = -np.exp(-(1.0 / th + 1.0) * np.log1p(x)) / th
        elif gen.family == "gumbel":
            a = 1.0 / th
            out = np.where(x > 0, -a * x ** (a - 1.0) * np.exp(-(x**a)), -np.inf if th > 1 else -1.0)
        elif gen.family == "frank":
            e = -np.expm1(-th) * np.exp(-x)
            out = -e / (np.exp(_frank_log_inner(th, x)) * th)
        elif gen.family == "joe":
            a = 1.0 / th
            out = np.where(x > 0, -a * (-np.expm1(-x)) ** (a - 1.0) * np.exp(-x), -np.inf if th > 1 else -1.0)
        else:
            ex = np.exp(x)
            out = -(1.0 - th) * ex / (ex - th) ** 2
    return out[()] if np.ndim(out) == 0 else out


def _frank_debye1(theta: float) -> float:
    def integrand(t):
        return 1.0 if t == 0.0 else t / math.expm1(t)

    val, _ = integrate.quad(integrand, 0.0, theta, epsabs=1e-12, epsrel=1e-12, limit=200)
    return val / theta


def _joe_tau_series(theta: float) -> float:
    # terms decrease in k; stop once the running term falls below the cutoff
    total = 0.0
    k0 = 1
    block = 4096
    while True:
        k = np.arange(k0, k0 + block, dtype=float)
        terms = 1.0 / (k * (theta * k + 2.0) * (theta * (k - 1.0) + 2.0))
        below = np.nonzero(terms < _JOE_TERM_CUTOFF)[0]
        if below.size:
            total += terms[: below[0]].sum()
            break
        total += terms.sum()
        k0 += block
        block *= 2
    return 1.0 - 4.0 * total


def tau_from_theta(family: str, theta: float) -> float:
    """Kendall's tau of the bivariate copula with the given generator."""
    family = _check_family(family)
    theta = float(theta)
    _check_theta(family, theta)
    if family == "clayton":
        return theta / (theta + 2.0)
    if family == "gumbel":
        return (theta - 1.0) / theta
    if family == "frank":
        return 1.0 + 4.0 * (_frank_debye1(theta) - 1.0) / theta
    if family == "joe":
        return _joe_tau_series(theta)
    # amh: the closed form cancels badly near 0, use its Taylor expansion there
    if theta < 1e-3:
        t = theta
        return 2 * t / 9 + t**2 / 18 + t**3 / 45 + t**4 / 90 + 2 * t**5 / 315
    return 1.0 - 2.0 * (theta + (1.0 - theta) ** 2 * math.log1p(-theta)) / (3.0 * theta**2)


def _bracket_up(f, lo: float, hi: float) -> float:
    while f(hi) < 0:
        lo, hi = hi, hi * 2.0
        if hi > 1e12:
            raise TauRangeError("tau too close to 1 for numerical inversion")
    return hi


def theta_from_tau(family: str, tau: float) -> float:
    """Parameter giving the requested Kendall's tau."""
    family = _check_family(family)
    tau = float(tau)
    if family == "amh":
        if not (0.0 <= tau < AMH_TAU_MAX):
            raise TauRangeError(f"AMH attains tau in [0, 1/3), got {tau}")
    elif family in ("gumbel", "joe"):
        if not (0.0 <= tau < 1.0):
            raise TauRangeError(f"{family} attains tau in [0, 1), got {tau}")
    elif not (0.0 < tau < 1.0):
        raise TauRangeError(f"{family} attains tau in (0, 1), got {tau}")

    if family == "clayton":
        return 2.0 * tau / (1.0 - tau)
    if family == "gumbel":
        return 1.0 / (1.0 - tau)
    if family == "amh":
        if tau == 0.0:
            return 0.0
        f = lambda th: tau_from_theta("amh", th) - tau
        return optimize.brentq(f, 0.0, 1.0 - 1e-15, xtol=1e-15, rtol=1e-15)
    if family == "joe":
        if tau == 0.0:
            return 1.0
        f = lambda th: tau_from_theta("joe", th) - tau
        hi = _bracket_up(f, 1.0, 2.0 / (1.0 - tau))
        return optimize.brentq(f, 1.0, hi, xtol=1e-12, rtol=1e-15)
    # frank: tau ~ theta/9 near zero
    f = lambda th: tau_from_theta("frank", th) - tau
    lo = min(1e-8, tau)
    hi = _bracket_up(f, lo, max(10.0 * tau, 4.0 / (1.0 - tau)))
    return optimize.brentq(f, lo, hi, xtol=1e-12, rtol=1e-15)


def check_nesting(outer: Generator, inner: Generator) -> bool:
    """Whether ``inner`` may sit below ``outer`` in a nested copula.

    Only same-family pairs with a strictly larger inner parameter are accepted;
    the strict inequality also keeps the tree structure identifiable.
    """
    return outer.family == inner.family and outer.theta < inner.theta


def bivariate_kendall_cdf(gen: Generator, w):
    """Kendall distribution function of the bivariate copula, ``K(w) = w - phi(w)/phi'(w)``."""
    w = np.asarray(w, dtype=float)
    if np.any(~((w > 0) & (w < 1))):
        raise GeneratorDomainError("kendall cdf requires w in (0, 1)")
    x = np.asarray(psi_inv(gen, w))
    d = np.asarray(psi_deriv(gen, x))
    with np.errstate(invalid="ignore"):
        out = w - x * d
    out = np.where(np.isfinite(out), out, 1.0)
    out = np.clip(out, w, 1.0)
    return out[()] if out.ndim == 0 else out
