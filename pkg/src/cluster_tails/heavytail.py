"""Mark laws, joint mark models, and analytic tail formulas.

The joint models pair a mark variable X with either an offspring count K
(renewal family) or a branching intensity kappa (Hawkes family).  The
catalog spans the three tail-comparison regimes for (X, K) -- count tail
lighter, heavier, or equivalent to the mark tail -- plus fully dependent
counts, and light/heavy intensity variants for the Hawkes family.

Heavy tails are exact Pareto (constant slowly varying factor), which makes
every asymptotic denominator computable in closed form.  A cached
Monte Carlo oracle is provided as an independent route to the joint-tail
terms of the sum denominators.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import os
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import NamedTuple, Union

import numpy as np
from scipy import special, stats

from .errors import InfiniteMean, ModelError, NoClosedForm, SupercriticalModel
from .rng import RngStream

__all__ = [
    "ParetoLaw",
    "Exponential",
    "Constant",
    "BoundedUniform",
    "LightLaw",
    "MarkLaw",
    "Regime",
    "JointMarkModel",
    "ModelConstants",
    "MarkPair",
    "TailTarget",
    "OracleSpec",
    "OracleRecord",
    "pareto_survival",
    "sample_pareto",
    "sample_joint",
    "model_constants",
    "theoretical_denominator",
    "mark_survival",
    "count_survival",
    "joint_tail_exact",
    "joint_tail_mc",
    "model_hash",
]


# ---------------------------------------------------------------------------
# Marginal laws


@dataclass(frozen=True)
class ParetoLaw:
    """Exact power-law tail: P(X > x) = (scale/x)**alpha for x > scale."""

    scale: float
    alpha: float

    def __post_init__(self) -> None:
        if self.scale <= 0:
            raise ModelError("scale must be positive", "scale")
        if self.alpha <= 0:
            raise ModelError("alpha must be positive", "alpha")

    def survival(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x <= self.scale, 1.0, (self.scale / np.maximum(x, self.scale)) ** self.alpha)
        return out if out.ndim else float(out)

    def mean(self) -> float:
        if self.alpha <= 1:
            raise InfiniteMean(f"Pareto mean requires alpha > 1, got {self.alpha}")
        return self.alpha * self.scale / (self.alpha - 1.0)

    def sample(self, gen: np.random.Generator, size=None):
        # inverse CDF: (1 - U)**(-1/alpha) with 1 - U in (0, 1]
        u = gen.random(size)
        return self.scale * (1.0 - u) ** (-1.0 / self.alpha)

    # lower edge of the region where survival == 1
    @property
    def support_min(self) -> float:
        return self.scale

    def survival_integral(self, a: float, b: float) -> float:
        """Integral of the survival function over [a, b]."""
        if b <= a:
            return 0.0
        s, al = self.scale, self.alpha
        flat = max(0.0, min(b, s) - a)
        lo, hi = max(a, s), b
        if hi <= lo:
            return flat
        if al == 1.0:
            tail = s * (math.log(hi) - math.log(lo))
        else:
            tail = s**al * (lo ** (1.0 - al) - hi ** (1.0 - al)) / (al - 1.0)
        return flat + tail


@dataclass(frozen=True)
class Exponential:
    rate: float

    def __post_init__(self) -> None:
        if self.rate <= 0:
            raise ModelError("rate must be positive", "rate")

    def survival(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x <= 0, 1.0, np.exp(-self.rate * np.maximum(x, 0.0)))
        return out if out.ndim else float(out)

    def mean(self) -> float:
        return 1.0 / self.rate

    def sample(self, gen: np.random.Generator, size=None):
        return gen.exponential(1.0 / self.rate, size)

    @property
    def support_min(self) -> float:
        return 0.0

    def survival_integral(self, a: float, b: float) -> float:
        if b <= a:
            return 0.0
        flat = max(0.0, min(b, 0.0) - a)
        lo, hi = max(a, 0.0), b
        if hi <= lo:
            return flat
        return flat + (math.exp(-self.rate * lo) - math.exp(-self.rate * hi)) / self.rate


@dataclass(frozen=True)
class Constant:
    value: float

    def __post_init__(self) -> None:
        if self.value <= 0:
            raise ModelError("value must be positive", "value")

    def survival(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x < self.value, 1.0, 0.0)
        return out if out.ndim else float(out)

    def mean(self) -> float:
        return self.value

    def sample(self, gen: np.random.Generator, size=None):
        if size is None:
            return self.value
        return np.full(size, self.value)

    @property
    def support_min(self) -> float:
        return self.value

    def survival_integral(self, a: float, b: float) -> float:
        if b <= a:
            return 0.0
        return max(0.0, min(b, self.value) - a)


@dataclass(frozen=True)
class BoundedUniform:
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not 0 <= self.lo < self.hi:
            raise ModelError("need 0 <= lo < hi", "lo")

    def survival(self, x):
        x = np.asarray(x, dtype=float)
        out = np.clip((self.hi - x) / (self.hi - self.lo), 0.0, 1.0)
        return out if out.ndim else float(out)

    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def sample(self, gen: np.random.Generator, size=None):
        return gen.uniform(self.lo, self.hi, size)

    @property
    def support_min(self) -> float:
        return self.lo

    def survival_integral(self, a: float, b: float) -> float:
        if b <= a:
            return 0.0
        flat = max(0.0, min(b, self.lo) - a)
        lo, hi = max(a, self.lo), min(b, self.hi)
        if hi <= lo:
            return flat
        width = self.hi - self.lo
        # integral of (hi - t)/width over [lo, hi_]
        return flat + ((self.hi - lo) ** 2 - (self.hi - hi) ** 2) / (2.0 * width)


LightLaw = Union[Exponential, Constant, BoundedUniform]
MarkLaw = Union[ParetoLaw, LightLaw]


def pareto_survival(law: ParetoLaw, x):
    """P(X > x) for an exact Pareto law; 1 on (0, scale]."""
    return law.survival(x)


def sample_pareto(law: ParetoLaw, rng: RngStream, size=None):
    """Inverse-CDF Pareto sampler; every draw is >= scale."""
    return law.sample(rng.generator, size)


# ---------------------------------------------------------------------------
# Joint mark models


class Regime(str, Enum):
    INDEPENDENT_LIGHT_COUNT = "IndependentLightCount"
    INDEPENDENT_HEAVY_COUNT = "IndependentHeavyCount"
    INDEPENDENT_TAIL_EQUIVALENT = "IndependentTailEquivalent"
    COMONOTONE_COUNT = "ComonotoneCount"
    HAWKES_LIGHT_INTENSITY = "HawkesLightIntensity"
    HAWKES_COMONOTONE_INTENSITY = "HawkesComonotoneIntensity"


_RENEWAL_REGIMES = {
    Regime.INDEPENDENT_LIGHT_COUNT,
    Regime.INDEPENDENT_HEAVY_COUNT,
    Regime.INDEPENDENT_TAIL_EQUIVALENT,
    Regime.COMONOTONE_COUNT,
}
_HAWKES_REGIMES = {
    Regime.HAWKES_LIGHT_INTENSITY,
    Regime.HAWKES_COMONOTONE_INTENSITY,
}


class MarkPair(NamedTuple):
    """One joint draw: the mark X and its count K (renewal) or kappa (Hawkes)."""

    x: np.ndarray | float
    count: np.ndarray | float


@dataclass(frozen=True)
class JointMarkModel:
    """The joint law of (X, K) or (X, kappa) for one regime.

    ``count_param`` is regime-specific:

    * IndependentLightCount -- Poisson mean (float) of K;
    * IndependentHeavyCount / IndependentTailEquivalent -- ParetoLaw of Z
      with K = ceil(Z);
    * ComonotoneCount -- unused (K = ceil(X));
    * HawkesLightIntensity -- a LightLaw rescaled so E[kappa] equals
      ``target_mean_kappa``;
    * HawkesComonotoneIntensity -- unused (kappa = X * target_mean_kappa / E[X]).
    """

    regime: Regime
    mark_law: MarkLaw
    count_param: float | ParetoLaw | LightLaw | None = None
    target_mean_kappa: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "regime", Regime(self.regime))
        r = self.regime
        if r is Regime.INDEPENDENT_LIGHT_COUNT:
            if not isinstance(self.count_param, (int, float)) or self.count_param < 0:
                raise ModelError("Poisson mean must be a nonnegative number", "count_param")
        elif r in (Regime.INDEPENDENT_HEAVY_COUNT, Regime.INDEPENDENT_TAIL_EQUIVALENT):
            if not isinstance(self.count_param, ParetoLaw):
                raise ModelError("count_param must be the ParetoLaw of Z", "count_param")
        elif r is Regime.HAWKES_LIGHT_INTENSITY:
            if not isinstance(self.count_param, (Exponential, Constant, BoundedUniform)):
                raise ModelError("count_param must be a light law", "count_param")
        if r in _HAWKES_REGIMES:
            if self.target_mean_kappa is None or self.target_mean_kappa < 0:
                raise ModelError(
                    "Hawkes regimes need target_mean_kappa >= 0", "target_mean_kappa"
                )
        if r is Regime.COMONOTONE_COUNT and not isinstance(self.mark_law, ParetoLaw):
            raise ModelError("comonotone counts need a Pareto mark law", "mark_law")

    @property
    def is_hawkes(self) -> bool:
        return self.regime in _HAWKES_REGIMES

    @property
    def is_renewal(self) -> bool:
        return self.regime in _RENEWAL_REGIMES

    def kappa_of_mark_factor(self) -> float:
        """Scaling r with kappa = r * X for the comonotone intensity regime."""
        assert self.regime is Regime.HAWKES_COMONOTONE_INTENSITY
        return self.target_mean_kappa / self.mark_law.mean()

    def intensity_scale_factor(self) -> float:
        """Scaling applied to the base light law for the light intensity regime."""
        assert self.regime is Regime.HAWKES_LIGHT_INTENSITY
        base_mean = self.count_param.mean()
        if base_mean <= 0:
            raise ModelError("base intensity law must have positive mean", "count_param")
        return self.target_mean_kappa / base_mean


def sample_joint(model: JointMarkModel, rng: RngStream, size=None) -> MarkPair:
    """Draw (X, K) or (X, kappa) from the regime's joint law.

    Draw order per regime is fixed (mark first, then count variable) so that
    identical streams reproduce identical pairs bit for bit.
    """
    gen = rng.generator
    r = model.regime
    x = model.mark_law.sample(gen, size)
    if r is Regime.INDEPENDENT_LIGHT_COUNT:
        k = gen.poisson(model.count_param, size)
        return MarkPair(x, k)
    if r in (Regime.INDEPENDENT_HEAVY_COUNT, Regime.INDEPENDENT_TAIL_EQUIVALENT):
        z = model.count_param.sample(gen, size)
        k = np.ceil(z).astype(np.int64) if size is not None else int(math.ceil(z))
        return MarkPair(x, k)
    if r is Regime.COMONOTONE_COUNT:
        k = np.ceil(x).astype(np.int64) if size is not None else int(math.ceil(x))
        return MarkPair(x, k)
    if r is Regime.HAWKES_LIGHT_INTENSITY:
        kappa = model.count_param.sample(gen, size)
        return MarkPair(x, kappa * model.intensity_scale_factor())
    if r is Regime.HAWKES_COMONOTONE_INTENSITY:
        return MarkPair(x, x * model.kappa_of_mark_factor())
    raise ModelError(f"unknown regime {r}")  # pragma: no cover


def _ceil_pareto_mean(z: ParetoLaw) -> float:
    """E[ceil(Z)] for Pareto Z, via the Hurwitz zeta tail sum."""
    if z.alpha <= 1:
        raise InfiniteMean("count mean requires alpha > 1 on the count law")
    k0 = math.floor(z.scale) + 1
    return k0 + z.scale**z.alpha * special.zeta(z.alpha, k0)


def mean_count(model: JointMarkModel) -> float:
    """E[K] for renewal regimes, E[kappa] for Hawkes regimes."""
    r = model.regime
    if r is Regime.INDEPENDENT_LIGHT_COUNT:
        return float(model.count_param)
    if r in (Regime.INDEPENDENT_HEAVY_COUNT, Regime.INDEPENDENT_TAIL_EQUIVALENT):
        return _ceil_pareto_mean(model.count_param)
    if r is Regime.COMONOTONE_COUNT:
        return _ceil_pareto_mean(model.mark_law)
    return float(model.target_mean_kappa)


@dataclass(frozen=True)
class ModelConstants:
    """Exact analytic constants entering the tail asymptotics.

    Family-inapplicable entries are None (renewal models have no Hawkes
    constants and vice versa).
    """

    mean_mark: float
    mean_count: float
    max_constant_renewal: float | None
    max_constant_hawkes: float | None
    sum_shift_hawkes: float | None


def model_constants(model: JointMarkModel) -> ModelConstants:
    """Exact constants for the regime; rejects supercritical / infinite-mean setups."""
    if isinstance(model.mark_law, ParetoLaw) and model.mark_law.alpha <= 1:
        raise InfiniteMean(
            f"mark law alpha={model.mark_law.alpha} has no finite mean", "mark_law.alpha"
        )
    mx = model.mark_law.mean()
    mc = mean_count(model)
    if model.is_hawkes:
        if mc >= 1:
            raise SupercriticalModel(
                f"E[kappa]={mc:g} >= 1 gives infinite clusters", "target_mean_kappa"
            )
        return ModelConstants(
            mean_mark=mx,
            mean_count=mc,
            max_constant_renewal=None,
            max_constant_hawkes=1.0 / (1.0 - mc),
            sum_shift_hawkes=mx / (1.0 - mc),
        )
    return ModelConstants(
        mean_mark=mx,
        mean_count=mc,
        max_constant_renewal=1.0 + mc,
        max_constant_hawkes=None,
        sum_shift_hawkes=None,
    )


def mark_survival(model: JointMarkModel, x):
    """P(X > x) for the model's mark marginal."""
    return model.mark_law.survival(x)


def count_survival(model: JointMarkModel, x):
    """P(K > x) for integer-count regimes (K = ceil of something or Poisson)."""
    r = model.regime
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if r is Regime.INDEPENDENT_LIGHT_COUNT:
        out = stats.poisson.sf(np.floor(xs), model.count_param)
    elif r in (Regime.INDEPENDENT_HEAVY_COUNT, Regime.INDEPENDENT_TAIL_EQUIVALENT):
        # ceil(Z) > x  iff  Z > floor(x)
        out = np.asarray(model.count_param.survival(np.floor(xs)))
    elif r is Regime.COMONOTONE_COUNT:
        out = np.asarray(model.mark_law.survival(np.floor(xs)))
    else:
        raise ModelError("count_survival applies to renewal regimes only")
    return out if np.ndim(x) else float(out[0])


# ---------------------------------------------------------------------------
# Exact joint-tail terms P(X + c*count > x)


def _count_pmf_and_sf(model: JointMarkModel, kmax: int):
    """pmf on 0..kmax-1 and P(K >= kmax) for integer-count regimes."""
    r = model.regime
    ks = np.arange(kmax)
    if r is Regime.INDEPENDENT_LIGHT_COUNT:
        pmf = stats.poisson.pmf(ks, model.count_param)
        tail = float(stats.poisson.sf(kmax - 1, model.count_param))
        return pmf, tail
    if r in (Regime.INDEPENDENT_HEAVY_COUNT, Regime.INDEPENDENT_TAIL_EQUIVALENT):
        z = model.count_param
        # P(ceil Z = k) = P(Z > k-1) - P(Z > k); P(K >= kmax) = P(Z > kmax-1)
        sf_prev = np.asarray(z.survival(ks - 1.0))
        sf_k = np.asarray(z.survival(ks.astype(float)))
        pmf = sf_prev - sf_k
        tail = float(z.survival(float(kmax - 1)))
        return pmf, tail
    raise ModelError("independent-count series applies to independent regimes only")


def _sum_tail_independent_count(model: JointMarkModel, c: float, x: float) -> float:
    """P(X + c*K > x) for K independent of X, by conditioning on K."""
    lo = model.mark_law.support_min
    if x <= lo:
        return 1.0
    if c <= 0:
        return float(model.mark_law.survival(x))
    # smallest k with x - c*k <= lo: whole mark support qualifies from there on
    k0 = max(0, math.ceil((x - lo) / c))
    if k0 == 0:
        return 1.0
    pmf, tail = _count_pmf_and_sf(model, k0)
    ks = np.arange(k0)
    vals = np.asarray(model.mark_law.survival(x - c * ks))
    return float(np.dot(pmf, vals) + tail)


def _sum_tail_comonotone_count(model: JointMarkModel, c: float, x: float) -> float:
    """P(X + c*ceil(X) > x) for Pareto X, by slicing on K = ceil(X)."""
    law = model.mark_law
    lo = law.support_min
    if x <= lo:
        return 1.0
    total = 0.0
    k = math.floor(lo) + 1
    while True:
        slice_lo = max(lo, float(k - 1))
        if x - c * k <= slice_lo:
            # the whole remaining tail {X > slice_lo} qualifies
            total += float(law.survival(slice_lo))
            break
        threshold = x - c * k
        if threshold < k:
            total += float(law.survival(threshold)) - float(law.survival(float(k)))
        k += 1
    return min(1.0, total)


def _sum_tail_hawkes(model: JointMarkModel, c: float, x: float) -> float:
    """P(X + c*kappa > x) for the Hawkes regimes."""
    law = model.mark_law
    if model.regime is Regime.HAWKES_COMONOTONE_INTENSITY:
        r = model.kappa_of_mark_factor()
        return float(law.survival(x / (1.0 + c * r)))
    # light intensity: kappa = s*U with U ~ base law, independent of X
    s = model.intensity_scale_factor()
    if s == 0.0:
        return float(law.survival(x))
    base = model.count_param
    if isinstance(base, Constant):
        return float(law.survival(x - c * s * base.value))
    if isinstance(base, BoundedUniform):
        lo, hi = s * base.lo, s * base.hi
        # E[survival(x - c*kappa)] = (1/(c(hi-lo))) * int_{x-c*hi}^{x-c*lo} sf(t) dt
        return law.survival_integral(x - c * hi, x - c * lo) / (c * (hi - lo))
    if isinstance(base, Exponential):
        # kappa ~ Exponential(rate/s); integrate sf_X against its density
        rate = base.rate / s
        from scipy.integrate import quad

        val, _ = quad(
            lambda u: rate * math.exp(-rate * u) * float(law.survival(x - c * u)),
            0.0,
            np.inf,
            limit=200,
        )
        return min(1.0, val)
    raise ModelError("unsupported intensity base law")  # pragma: no cover


def joint_tail_exact(model: JointMarkModel, c: float, x) -> np.ndarray | float:
    """P(X + c*count > x) evaluated exactly (series / slicing / integral)."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    r = model.regime
    if r in (
        Regime.INDEPENDENT_LIGHT_COUNT,
        Regime.INDEPENDENT_HEAVY_COUNT,
        Regime.INDEPENDENT_TAIL_EQUIVALENT,
    ):
        out = np.array([_sum_tail_independent_count(model, c, xi) for xi in xs])
    elif r is Regime.COMONOTONE_COUNT:
        out = np.array([_sum_tail_comonotone_count(model, c, xi) for xi in xs])
    else:
        out = np.array([_sum_tail_hawkes(model, c, xi) for xi in xs])
    return out if np.ndim(x) else float(out[0])


# ---------------------------------------------------------------------------
# Monte Carlo oracle for the joint-tail terms, with a disk cache


@dataclass(frozen=True)
class OracleSpec:
    """How to obtain MC-oracle joint tails: sample size, seed, cache location."""

    size: int = 10_000_000
    seed: int = 0
    cache_dir: Path | str | None = None

    def resolved_cache_dir(self) -> Path | None:
        env = os.environ.get("CLUSTER_TAILS_CACHE")
        if env:
            return Path(env)
        if self.cache_dir is None:
            return None
        return Path(self.cache_dir)


@dataclass(frozen=True)
class OracleRecord:
    """A cached (or freshly computed) MC joint-tail record."""

    model_hash: str
    target: str
    seed: int
    size: int
    xs: np.ndarray
    probs: np.ndarray


def model_hash(model: JointMarkModel) -> str:
    """Stable short hash of the model definition, used as the cache key."""
    return hashlib.sha256(repr(model).encode()).hexdigest()[:16]


_ORACLE_CHUNK = 1 << 20


def _oracle_compute(model: JointMarkModel, c: float, xs: np.ndarray, spec: OracleSpec) -> np.ndarray:
    counts = np.zeros(len(xs), dtype=np.int64)
    root = RngStream(spec.seed, 0)
    done = 0
    chunk_idx = 0
    while done < spec.size:
        m = min(_ORACLE_CHUNK, spec.size - done)
        pair = sample_joint(model, root.child(chunk_idx), m)
        total = np.sort(pair.x + c * np.asarray(pair.count, dtype=float))
        counts += m - np.searchsorted(total, xs, side="right")
        done += m
        chunk_idx += 1
    return counts / float(spec.size)


def _oracle_path(cache_dir: Path, mh: str, target: str) -> Path:
    return cache_dir / f"{mh}-{target}.csv"


def _oracle_read(path: Path, mh: str, target: str) -> OracleRecord | None:
    if not path.exists():
        return None
    with open(path, newline="") as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            return None
        meta = dict(
            part.split("=", 1) for part in header.lstrip("# ").split() if "=" in part
        )
        rows = list(csv.reader(fh))
    if rows and rows[0] and rows[0][0] == "x":
        rows = rows[1:]
    xs = np.array([float(r[0]) for r in rows])
    probs = np.array([float(r[1]) for r in rows])
    return OracleRecord(
        model_hash=mh,
        target=target,
        seed=int(meta.get("seed", -1)),
        size=int(meta.get("size", -1)),
        xs=xs,
        probs=probs,
    )


def _oracle_write(path: Path, record: OracleRecord) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    buf.write(f"# seed={record.seed} size={record.size} model={record.model_hash}\n")
    buf.write("x,probability\n")
    for xi, pi in zip(record.xs, record.probs):
        buf.write(f"{float(xi)!r},{float(pi)!r}\n")
    path.write_text(buf.getvalue())


def joint_tail_mc(
    model: JointMarkModel, c: float, x, spec: OracleSpec
) -> OracleRecord:
    """P(X + c*count > x) by high-precision MC, cached on disk.

    The cache holds one record per (model hash, target); a record is reused
    only when its seed, size and x-grid match the request exactly.
    """
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    mh = model_hash(model)
    target = f"joint-sum-c{c!r}"
    cache_dir = spec.resolved_cache_dir()
    if cache_dir is None:
        raise NoClosedForm(
            "MC-oracle joint tail requested but the oracle cache is disabled"
        )
    path = _oracle_path(cache_dir, mh, target)
    cached = _oracle_read(path, mh, target)
    if (
        cached is not None
        and cached.seed == spec.seed
        and cached.size == spec.size
        and len(cached.xs) == len(xs)
        and np.allclose(cached.xs, xs, rtol=0, atol=0)
    ):
        return cached
    probs = _oracle_compute(model, c, xs, spec)
    record = OracleRecord(mh, target, spec.seed, spec.size, xs.copy(), probs)
    _oracle_write(path, record)
    return record


# ---------------------------------------------------------------------------
# The asymptotic denominators


class TailTarget(str, Enum):
    RENEWAL_MAX = "renewal-max"
    RENEWAL_SUM = "renewal-sum"
    HAWKES_MAX = "hawkes-max"
    HAWKES_SUM = "hawkes-sum"

    @classmethod
    def coerce(cls, value: "TailTarget | str") -> "TailTarget":
        if isinstance(value, cls):
            return value
        aliases = {
            "renewalmax": cls.RENEWAL_MAX,
            "renewalsum": cls.RENEWAL_SUM,
            "hawkesmax": cls.HAWKES_MAX,
            "hawkessum": cls.HAWKES_SUM,
        }
        key = str(value).replace("-", "").replace("_", "").lower()
        if key not in aliases:
            raise ModelError(f"unknown tail target {value!r}", "target")
        return aliases[key]


def default_target(model: JointMarkModel, functional: str) -> TailTarget:
    """The natural target for a model family and functional ('max' or 'sum')."""
    if functional not in ("max", "sum"):
        raise ModelError(f"functional must be 'max' or 'sum', got {functional!r}")
    if model.is_hawkes:
        return TailTarget.HAWKES_MAX if functional == "max" else TailTarget.HAWKES_SUM
    return TailTarget.RENEWAL_MAX if functional == "max" else TailTarget.RENEWAL_SUM


def theoretical_denominator(
    model: JointMarkModel,
    target: TailTarget | str,
    x,
    *,
    joint: str = "closed",
    oracle: OracleSpec | None = None,
):
    """The asymptotic tail approximation for the requested functional at x.

    * renewal max:  (1 + E[K]) * P(X > x)
    * renewal sum:  P(X + E[X] K > x) + E[K] P(X > x)
    * hawkes max:   P(X > x) / (1 - E[kappa])
    * hawkes sum:   P(X + (E[X]/(1-E[kappa])) kappa > x) / (1 - E[kappa])

    ``joint`` selects how the joint-tail term of the sum targets is computed:
    ``"closed"`` (exact series/integral) or ``"mc"`` (cached MC oracle, which
    then requires an :class:`OracleSpec` with caching enabled).
    """
    target = TailTarget.coerce(target)
    consts = model_constants(model)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xs <= 0):
        raise ModelError("denominator requires x > 0", "x")

    if target is TailTarget.RENEWAL_MAX:
        if not model.is_renewal:
            raise ModelError("renewal target on a Hawkes model", "target")
        out = consts.max_constant_renewal * np.asarray(model.mark_law.survival(xs))
    elif target is TailTarget.HAWKES_MAX:
        if not model.is_hawkes:
            raise ModelError("Hawkes target on a renewal model", "target")
        out = consts.max_constant_hawkes * np.asarray(model.mark_law.survival(xs))
    elif target is TailTarget.RENEWAL_SUM:
        if not model.is_renewal:
            raise ModelError("renewal target on a Hawkes model", "target")
        c = consts.mean_mark
        jt = _joint_term(model, c, xs, joint, oracle)
        out = jt + consts.mean_count * np.asarray(model.mark_law.survival(xs))
    else:  # HAWKES_SUM
        if not model.is_hawkes:
            raise ModelError("Hawkes target on a renewal model", "target")
        c = consts.sum_shift_hawkes
        jt = _joint_term(model, c, xs, joint, oracle)
        out = consts.max_constant_hawkes * jt
    return out if np.ndim(x) else float(out[0])


def _joint_term(model, c, xs, joint, oracle):
    if joint == "closed":
        return np.asarray(joint_tail_exact(model, c, xs))
    if joint == "mc":
        if oracle is None:
            raise NoClosedForm(
                "MC-oracle joint tail requested but no oracle spec given"
            )
        return joint_tail_mc(model, c, xs, oracle).probs
    raise ModelError(f"joint must be 'closed' or 'mc', got {joint!r}")
