"""Simulation of the full marked process on a finite window [0, T].

Clusters are seeded by a homogeneous Poisson immigration process on [0, T];
every event of every started cluster is classified as in-window (time <= T)
or leftover.  The per-window statistics are exactly the quantities entering
the large-deviation decompositions: event count, leftover count, in-window
mark sum, in-window mark max, leftover mark sum, and cluster count.

Clusters born before time 0 are ignored by construction; the decomposition
identities (sum + leftover == total cluster mass, window max <= cluster max)
then hold pathwise on every replication.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .clusters import HawkesParams, RenewalParams
from .errors import ClusterOverflow, ModelError
from .heavytail import JointMarkModel, model_constants, sample_joint
from .rng import RngStream

__all__ = [
    "WindowConfig",
    "WindowStats",
    "WindowBatch",
    "MeanSumEstimate",
    "simulate_window",
    "batch_windows",
    "estimate_mean_sum",
]


@dataclass(frozen=True)
class WindowConfig:
    model: JointMarkModel
    cluster_params: RenewalParams | HawkesParams
    nu: float
    horizon: float

    def __post_init__(self) -> None:
        if self.nu <= 0:
            raise ModelError("immigration rate nu must be positive", "nu")
        if self.horizon <= 0:
            raise ModelError("horizon must be positive", "horizon")
        if self.model.is_hawkes and not isinstance(self.cluster_params, HawkesParams):
            raise ModelError("Hawkes model needs HawkesParams", "cluster_params")
        if self.model.is_renewal and not isinstance(self.cluster_params, RenewalParams):
            raise ModelError("renewal model needs RenewalParams", "cluster_params")


@dataclass(frozen=True)
class WindowStats:
    """Summary of one simulated window."""

    n_events: int
    j_leftover: int
    sum_in_window: float
    max_in_window: float
    leftover_sum: float
    n_clusters: int


@dataclass
class WindowBatch:
    """Structure-of-arrays view of n i.i.d. windows (sequence of WindowStats)."""

    n_events: np.ndarray
    j_leftover: np.ndarray
    sum_in_window: np.ndarray
    max_in_window: np.ndarray
    leftover_sum: np.ndarray
    n_clusters: np.ndarray

    def __len__(self) -> int:
        return len(self.n_events)

    def __getitem__(self, i: int) -> WindowStats:
        return WindowStats(
            n_events=int(self.n_events[i]),
            j_leftover=int(self.j_leftover[i]),
            sum_in_window=float(self.sum_in_window[i]),
            max_in_window=float(self.max_in_window[i]),
            leftover_sum=float(self.leftover_sum[i]),
            n_clusters=int(self.n_clusters[i]),
        )

    @staticmethod
    def concatenate(parts: "list[WindowBatch]") -> "WindowBatch":
        return WindowBatch(
            n_events=np.concatenate([p.n_events for p in parts]),
            j_leftover=np.concatenate([p.j_leftover for p in parts]),
            sum_in_window=np.concatenate([p.sum_in_window for p in parts]),
            max_in_window=np.concatenate([p.max_in_window for p in parts]),
            leftover_sum=np.concatenate([p.leftover_sum for p in parts]),
            n_clusters=np.concatenate([p.n_clusters for p in parts]),
        )


def _segmented_offsets(waits: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Running sums of waits within each segment of the given lengths."""
    if counts.size == 0:
        return np.empty(0)
    cs = np.cumsum(waits)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    prefix = np.concatenate(([0.0], cs))
    return cs - np.repeat(prefix[starts], counts)


def _renewal_windows(config: WindowConfig, n: int, rng: RngStream) -> WindowBatch:
    gen = rng.generator
    model, T = config.model, config.horizon
    c_t = gen.poisson(config.nu * T, n)
    m = int(c_t.sum())
    win_of_cluster = np.repeat(np.arange(n), c_t)
    tau = gen.uniform(0.0, T, m)
    x, k = sample_joint(model, rng, m)
    k = np.asarray(k, dtype=np.int64)
    total = int(k.sum())
    waits = np.asarray(config.cluster_params.waiting_law.sample(gen, total), dtype=float)
    marks = np.asarray(model.mark_law.sample(gen, total), dtype=float)
    offsets = _segmented_offsets(waits, k)
    evt_time = np.repeat(tau, k) + offsets
    win_of_event = np.repeat(win_of_cluster, k)
    inside = evt_time <= T

    n_events = c_t + np.bincount(win_of_event[inside], minlength=n)
    j_leftover = np.bincount(win_of_event[~inside], minlength=n)
    sum_in = np.bincount(win_of_cluster, weights=x, minlength=n) + np.bincount(
        win_of_event[inside], weights=marks[inside], minlength=n
    )
    leftover = np.bincount(win_of_event[~inside], weights=marks[~inside], minlength=n)
    max_in = np.zeros(n)
    np.maximum.at(max_in, win_of_cluster, x)
    np.maximum.at(max_in, win_of_event[inside], marks[inside])
    return WindowBatch(n_events, j_leftover, sum_in, max_in, leftover, c_t)


def _hawkes_windows(config: WindowConfig, n: int, rng: RngStream) -> WindowBatch:
    gen = rng.generator
    model, T = config.model, config.horizon
    params: HawkesParams = config.cluster_params
    c_t = gen.poisson(config.nu * T, n)
    m = int(c_t.sum())
    win_of_cluster = np.repeat(np.arange(n), c_t)
    tau = gen.uniform(0.0, T, m)
    x0, kappa0 = sample_joint(model, rng, m)

    n_events = c_t.copy()
    j_leftover = np.zeros(n, dtype=np.int64)
    sum_in = np.bincount(win_of_cluster, weights=x0, minlength=n)
    leftover = np.zeros(n)
    max_in = np.zeros(n)
    np.maximum.at(max_in, win_of_cluster, x0)
    cluster_sizes = np.ones(m, dtype=np.int64)

    owner = np.arange(m)
    evt_time = tau.copy()
    kappa = np.asarray(kappa0, dtype=float)
    while owner.size:
        brood = gen.poisson(kappa)
        total = int(brood.sum())
        if total == 0:
            break
        owner = np.repeat(owner, brood)
        dt = gen.exponential(1.0 / params.decay_rate, total)
        evt_time = np.repeat(evt_time, brood) + dt
        xc, kc = sample_joint(model, rng, total)
        cluster_sizes += np.bincount(owner, minlength=m)
        if cluster_sizes.max() > params.max_cluster_events:
            bad = int(win_of_cluster[int(cluster_sizes.argmax())])
            raise ClusterOverflow(bad, params.max_cluster_events)
        win = win_of_cluster[owner]
        inside = evt_time <= T
        n_events += np.bincount(win[inside], minlength=n)
        j_leftover += np.bincount(win[~inside], minlength=n)
        sum_in += np.bincount(win[inside], weights=xc[inside], minlength=n)
        leftover += np.bincount(win[~inside], weights=xc[~inside], minlength=n)
        np.maximum.at(max_in, win[inside], xc[inside])
        kappa = np.asarray(kc, dtype=float)
    return WindowBatch(n_events, j_leftover, sum_in, max_in, leftover, c_t)


def simulate_window(config: WindowConfig, rng: RngStream) -> WindowStats:
    """One window drawn directly from the given stream."""
    if config.model.is_hawkes:
        return _hawkes_windows(config, 1, rng)[0]
    return _renewal_windows(config, 1, rng)[0]


def _window_chunk_size(config: WindowConfig, target_events: int = 1 << 21) -> int:
    consts = model_constants(config.model)
    if config.model.is_hawkes:
        per_cluster = 1.0 / (1.0 - consts.mean_count)
    else:
        per_cluster = 1.0 + consts.mean_count
    events_per_window = max(1.0, config.nu * config.horizon * per_cluster)
    raw = max(1.0, target_events / events_per_window)
    return int(min(1 << 16, max(1 << 6, 1 << int(math.log2(raw)))))


def _window_worker(args):
    config, chunk_index, count, chunk_span, base = args
    rng = base.child(chunk_index)
    try:
        if config.model.is_hawkes:
            return chunk_index, _hawkes_windows(config, count, rng)
        return chunk_index, _renewal_windows(config, count, rng)
    except ClusterOverflow as exc:
        raise ClusterOverflow(
            chunk_index * chunk_span + exc.replication, exc.limit
        ) from None


def batch_windows(
    config: WindowConfig, n: int, rng: RngStream, workers: int = 1
) -> WindowBatch:
    """n i.i.d. windows with replication-indexed chunk streams.

    Output is bit-identical for any worker count: chunk boundaries depend
    only on the configuration, and chunk i always draws from
    ``rng.child(i)``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    chunk = _window_chunk_size(config)
    base = rng.fresh()
    tasks = [
        (config, i, c, chunk, base)
        for i, c in enumerate(min(chunk, n - s) for s in range(0, n, chunk))
    ]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = sorted(pool.map(_window_worker, tasks), key=lambda r: r[0])
        parts = [r[1] for r in results]
    else:
        parts = [_window_worker(t)[1] for t in tasks]
    return WindowBatch.concatenate(parts)


@dataclass(frozen=True)
class MeanSumEstimate:
    """Pilot Monte Carlo estimate of E[S_T] with its standard error."""

    value: float
    se: float
    pilot_n: int


def estimate_mean_sum(
    config: WindowConfig, pilot_n: int, rng: RngStream, workers: int = 1
) -> MeanSumEstimate:
    """Pilot estimate of the window mean sum, used to center deviation sweeps."""
    if pilot_n < 1_000:
        raise ValueError("pilot_n must be at least 1000")
    batch = batch_windows(config, pilot_n, rng, workers=workers)
    s = batch.sum_in_window
    return MeanSumEstimate(
        value=float(s.mean()),
        se=float(s.std(ddof=1) / math.sqrt(pilot_n)),
        pilot_n=pilot_n,
    )
