"""Bootstrap test for the structure of three variables.

For a triple of columns the three pairwise empirical Kendall distributions
are compared. The pair of distributions that are closest share one index
``i``; the candidate structure then joins the other two leaves below the
root. Whether the three distributions differ at all is decided by a
bootstrap under the null of an exchangeable (Archimedean) triple, whose
generator is estimated nonparametrically from the trivariate Kendall
pseudo-observations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kendall
from .tree import TreeStructure, fan, from_branching

DEFAULT_BOOTSTRAP = 200
FIT_TOLERANCE = 1e-8
FIT_FALLBACK_TOLERANCE = 1e-3
_BOOT_CHUNK_ELEMS = 3_000_000


class RadialFitError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3g})")
        self.residual = residual


# --- distances and statistic -----------------------------------------------------


def triple_distances(sample3) -> np.ndarray:
    """``(d1, d2, d3)`` where ``d_i`` compares the two pairs sharing column ``i``.

    ``d1 = L1(K12, K13)``, ``d2 = L1(K12, K23)``, ``d3 = L1(K13, K23)``.
    """
    x = np.asarray(sample3, dtype=float)
    if x.ndim != 2 or x.shape[1] != 3:
        raise ValueError(f"expected an n x 3 sample, got shape {x.shape}")
    if x.shape[0] < 2:
        raise ValueError("need at least two observations")
    k12 = kendall.pair_pseudo_obs(x[:, 0], x[:, 1])
    k13 = kendall.pair_pseudo_obs(x[:, 0], x[:, 2])
    k23 = kendall.pair_pseudo_obs(x[:, 1], x[:, 2])
    return np.array(
        [kendall.l1_distance(k12, k13), kendall.l1_distance(k12, k23), kendall.l1_distance(k13, k23)]
    )


def test_statistic(deltas) -> float:
    """Distance between the smallest ``delta`` and the mean of the other two."""
    d = np.sort(np.asarray(deltas, dtype=float))
    return float(abs(d[0] - 0.5 * (d[1] + d[2])))


test_statistic.__test__ = False  # not a pytest test


def _batch_statistics(deltas: np.ndarray) -> np.ndarray:
    d = np.sort(deltas, axis=1)
    return np.abs(d[:, 0] - 0.5 * (d[:, 1] + d[:, 2]))


def candidate_structure(deltas, triple=(0, 1, 2)):
    """Inner pair suggested by the distances, or ``None`` for the fan.

    Returns ``(pair, tie_flag)``. An exactly tied minimum carries no
    directional evidence and yields the fan with ``tie_flag`` set.
    """
    d = np.asarray(deltas, dtype=float)
    i = int(np.argmin(d))
    tied = int(np.sum(d == d[i])) > 1
    if tied:
        return None, True
    others = tuple(triple[j] for j in range(3) if j != i)
    return others, False


# --- nonparametric generator under the null ----------------------------------------


@dataclass(frozen=True)
class RadialFit:
    """Discrete radial law whose 3-dimensional Williamson transform is the fitted generator.

    ``psi(x) = mean((1 - x / r)_+ ** 2)`` over the atoms ``r``. The atoms are
    scaled so the largest equals 1; generators are only defined up to scale.
    """

    atoms: np.ndarray  # ascending, one per observation
    w: np.ndarray  # sorted trivariate pseudo-observations the fit reproduces
    residual: float
    converged: bool

    _a: np.ndarray = field(init=False, repr=False, compare=False)
    _cum: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        a = np.sort(1.0 / self.atoms)
        p = 1.0 / self.atoms.size
        cum = tuple(np.concatenate([[0.0], np.cumsum(p * a**k)]) for k in range(3))
        object.__setattr__(self, "_a", a)
        object.__setattr__(self, "_cum", cum)

    @property
    def n(self) -> int:
        return self.atoms.size

    def psi(self, x, chunk: int = 1 << 22):
        """Direct evaluation of the mean of squared hinges."""
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        out = np.empty(flat.size)
        step = max(1, chunk // self.n)
        inv_r = 1.0 / self.atoms
        for s in range(0, flat.size, step):
            h = np.maximum(1.0 - np.outer(flat[s : s + step], inv_r), 0.0)
            out[s : s + step] = np.mean(h * h, axis=1)
        return out.reshape(x.shape)[()] if x.ndim == 0 else out.reshape(x.shape)

    def _active(self, x):
        # number of atoms with r > x, i.e. 1/r < 1/x
        with np.errstate(divide="ignore"):
            return np.searchsorted(self._a, 1.0 / x, side="left")

    def psi_deriv(self, x):
        x = np.asarray(x, dtype=float)
        k = self._active(x)
        c1, c2 = self._cum[1][k], self._cum[2][k]
        return -2.0 * (c1 - x * c2)

    def psi_inv(self, u):
        """Inverse on ``(0, 1]``; the generator is quadratic between atoms."""
        u = np.asarray(u, dtype=float)
        r_desc = np.unique(self.atoms)[::-1]
        vals = self.psi(r_desc)  # ascending in the order of r_desc
        # active atom count for targets in [vals[j], vals[j+1]) is #atoms >= r_desc[j]
        counts = np.searchsorted(np.sort(-self.atoms), -r_desc, side="right")
        j = np.clip(np.searchsorted(vals, u, side="right") - 1, 0, r_desc.size - 1)
        k = counts[j]
        s0, s1, s2 = (c[k] for c in self._cum)
        gap = np.maximum(s0 - u, 0.0)
        disc = np.maximum(s1 * s1 - s2 * gap, 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            x = np.where(gap > 0, gap / (s1 + np.sqrt(disc)), 0.0)
        return x[()] if x.ndim == 0 else x

    def bivariate_kendall_cdf(self, w):
        """Kendall distribution of the bivariate copula with this generator."""
        w = np.asarray(w, dtype=float)
        x = self.psi_inv(w)
        return np.clip(w - x * self.psi_deriv(x), w, 1.0)


def fit_radial(sample3) -> RadialFit:
    """Fit the radial law from the trivariate Kendall pseudo-observations.

    Atoms solve ``psi_n(r_m) = w_(m)``. Because ``psi_n(x)`` only involves
    atoms larger than ``x``, the system is triangular: the largest atom is
    fixed to 1 (it carries the zero pseudo-observations) and each next distinct
    value of ``w`` determines the next atom through a quadratic equation.
    """
    x = np.asarray(sample3, dtype=float)
    if x.ndim != 2 or x.shape[1] != 3:
        raise ValueError(f"expected an n x 3 sample, got shape {x.shape}")
    n = x.shape[0]
    if n < 10:
        raise ValueError("the radial fit needs at least 10 observations")
    w = kendall.triple_pseudo_obs(x[:, 0], x[:, 1], x[:, 2]).sorted
    return fit_radial_from_pseudo_obs(w)


def fit_radial_from_pseudo_obs(w_sorted) -> RadialFit:
    w = np.asarray(w_sorted, dtype=float)
    n = w.size
    vals, counts = np.unique(w, return_counts=True)
    p = counts / n
    r = np.empty(vals.size)
    r[0] = 1.0
    s0, s1, s2 = p[0], p[0], p[0]
    worst = abs(vals[0])
    for k in range(1, vals.size):
        target = vals[k]
        if not target < s0:
            # empirical Kendall CDF too low for any generator; best attainable is just below s0
            worst = max(worst, target - s0)
            target = s0 * (1.0 - 1e-12)
        gap = s0 - target
        disc = max(s1 * s1 - s2 * gap, 0.0)
        xk = gap / (s1 + math.sqrt(disc))
        xk = min(xk, r[k - 1])
        r[k] = xk
        a = 1.0 / xk
        s0 += p[k]
        s1 += p[k] * a
        s2 += p[k] * a * a
    atoms = np.repeat(r, counts)[::-1].copy()  # ascending
    fit = RadialFit(atoms=atoms, w=w, residual=0.0, converged=True)
    resid = float(np.max(np.abs(fit.psi(atoms[::-1]) - w)))
    resid = max(resid, worst)
    converged = resid <= FIT_TOLERANCE
    if not converged and resid > FIT_FALLBACK_TOLERANCE:
        raise RadialFitError("pseudo-observations admit no radial fit", resid)
    return RadialFit(atoms=atoms, w=w, residual=resid, converged=converged)


def _latent_resample(fit: RadialFit, nb: int, n: int, rng: np.random.Generator) -> np.ndarray:
    # R * S with S uniform on the simplex; shape (nb, n, 3)
    r = fit.atoms[rng.integers(0, fit.n, size=(nb, n))]
    e = rng.standard_exponential((nb, n, 3))
    return r[..., None] * e / e.sum(axis=2, keepdims=True)


def h0_resample(fit: RadialFit, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n x 3`` sample from the fitted exchangeable copula, entries in ``(0, 1]``."""
    return fit.psi(_latent_resample(fit, 1, n, rng)[0])


def _null_distances(fit: RadialFit, nb: int, n: int, rng) -> np.ndarray:
    # psi_n is strictly decreasing below the largest atom, so ranks of U = psi_n(R S)
    # are the reversed ranks of R S; the negated latent sample has identical pseudo-observations
    out = []
    chunk = max(1, _BOOT_CHUNK_ELEMS // (3 * n))
    for s in range(0, nb, chunk):
        m = min(chunk, nb - s)
        out.append(kendall.batch_triple_distances(-_latent_resample(fit, m, n, rng)))
    return np.concatenate(out)


# --- the test -----------------------------------------------------------------------


@dataclass(frozen=True)
class TripleDecision:
    triple: tuple  # three labels in leaf order
    distances: tuple  # shared index 1, 2, 3
    statistic: float
    p_value: float
    candidate: tuple | None  # inner pair, None for the fan
    tie_flag: bool
    bootstrap: int
    fit_residual: float = 0.0
    error: str | None = None

    def rejects(self, alpha: float) -> bool:
        return self.p_value < alpha

    def structure(self, alpha: float) -> TreeStructure:
        """Fan unless the null is rejected at ``alpha`` and a pair is suggested."""
        if self.candidate is not None and self.rejects(alpha):
            return from_branching(self.triple, [self.candidate])
        return fan(self.triple)

    def to_dict(self) -> dict:
        return {
            "triple": list(self.triple),
            "distances": {lab: float(d) for lab, d in zip(self.triple, self.distances)},
            "statistic": self.statistic,
            "p_value": self.p_value,
            "candidate": "fan" if self.candidate is None else list(self.candidate),
            "tie_flag": self.tie_flag,
            "bootstrap": self.bootstrap,
            "fit_residual": self.fit_residual,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TripleDecision":
        triple = tuple(d["triple"])
        cand = d["candidate"]
        return cls(
            triple=triple,
            distances=tuple(d["distances"][lab] for lab in triple),
            statistic=d["statistic"],
            p_value=d["p_value"],
            candidate=None if cand == "fan" else tuple(cand),
            tie_flag=d["tie_flag"],
            bootstrap=d["bootstrap"],
            fit_residual=d.get("fit_residual", 0.0),
            error=d.get("error"),
        )


def triple_test(sample3, B: int = DEFAULT_BOOTSTRAP, rng=None, labels=("U1", "U2", "U3")) -> TripleDecision:
    """Distances, statistic, and bootstrap p-value for one triple.

    ``p = #{T_b >= T_obs} / B`` over ``B`` samples from the fitted null.
    The significance level is applied by the caller.
    """
    if B < 1:
        raise ValueError("need at least one bootstrap replication")
    if rng is None:
        raise ValueError("triple_test needs an explicit random generator")
    x = np.asarray(sample3, dtype=float)
    deltas = triple_distances(x)
    t_obs = test_statistic(deltas)
    cand, tied = candidate_structure(deltas, tuple(labels))
    fit = fit_radial(x)
    t_boot = _batch_statistics(_null_distances(fit, B, x.shape[0], rng))
    p = float(np.count_nonzero(t_boot >= t_obs)) / B
    return TripleDecision(
        triple=tuple(labels),
        distances=tuple(float(d) for d in deltas),
        statistic=t_obs,
        p_value=p,
        candidate=cand,
        tie_flag=tied,
        bootstrap=B,
        fit_residual=fit.residual,
    )


triple_test.__test__ = False
