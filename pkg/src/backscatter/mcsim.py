"""Monte Carlo ground truth for the decoding probabilities.

Realizes the sensor PPP on the reading annulus at the thinned density
lambda' = p_c lambda / D, evaluates the typical sensor's SINR, and runs
the successive-cancellation loop.  Estimates carry Wilson 95% intervals
and per-stage counters.

Reproducibility: trials are partitioned into fixed blocks of 4096 and
every block draws from its own counter-based Philox substream keyed by
(seed, block index).  The partition depends only on the trial count, so
results are bit-identical for any worker-thread count; per-block
partial results are merged in block order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channel import sample_fading, sample_typical_distance

__all__ = [
    "NetworkRealization",
    "StageCounters",
    "McEstimate",
    "CfEstimate",
    "wilson_interval",
    "realize_network",
    "sinr_typical",
    "estimate_decoding_probability",
    "estimate_sic",
    "empirical_cf",
]

_BLOCK = 4096
_Z95 = 1.959963984540054


@dataclass
class NetworkRealization:
    """One draw of the network around the reader.

    Interferer lists are parallel and sorted by distance; fading powers
    are identically 1 in fading-free mode.
    """

    typical_distance: float
    typical_fading: float
    interferer_distances: np.ndarray
    interferer_fading: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.interferer_distances, dtype=float)
        h = np.asarray(self.interferer_fading, dtype=float)
        if d.shape != h.shape:
            raise ValueError("NetworkRealization: parallel lists must match")
        if d.size and np.any(np.diff(d) < 0):
            raise ValueError("NetworkRealization: distances must be sorted")
        self.interferer_distances = d
        self.interferer_fading = h


@dataclass(frozen=True)
class StageCounters:
    attempts: int
    cancel_successes: int
    decode_successes: int


@dataclass
class McEstimate:
    trials: int
    successes: int
    estimate: float
    ci_low: float
    ci_high: float
    seed: int
    stage_counters: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if not (self.ci_low <= self.estimate <= self.ci_high):
            raise ValueError("McEstimate: interval must bracket the estimate")

    @property
    def ci_half_width(self):
        return 0.5 * (self.ci_high - self.ci_low)


@dataclass
class CfEstimate:
    t: float
    value: complex
    se_re: float
    se_im: float


def wilson_interval(successes, trials, z=_Z95):
    """Wilson score interval; always brackets the point estimate."""
    if trials < 1:
        raise ValueError("wilson_interval: trials must be >= 1")
    p = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (p + z2 / (2.0 * trials)) / denom
    half = z * math.sqrt(p * (1.0 - p) / trials + z2 / (4.0 * trials * trials)) / denom
    return center - half, center + half


def _block_rng(seed, block_index):
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, block_index])))


def realize_network(params, fading=None, rng=None):
    """Draw one network realization: typical sensor plus PPP interferers.

    The interferer count is Poisson with mean lambda' * annulus area;
    positions are planar-uniform on the annulus, fading powers drawn per
    the model for every node.
    """
    model = fading if fading is not None else params.fading_model()
    rng = rng if rng is not None else np.random.default_rng()
    ann = params.annulus
    d0 = float(sample_typical_distance(ann, rng))
    h0 = float(sample_fading(model, rng))
    count = int(rng.poisson(params.thinned_density * ann.area))
    d = np.sort(sample_typical_distance(ann, rng, count)) if count else np.empty(0)
    h = np.asarray(sample_fading(model, rng, count) if count else np.empty(0), dtype=float)
    return NetworkRealization(d0, h0, d, h)


def sinr_typical(realization, params):
    """SINR of the typical sensor; the dyadic channel doubles the
    path-loss exponent."""
    two_a = 2.0 * params.alpha
    a_pow = params.beta * params.gain * params.p_linear
    sig = a_pow * realization.typical_fading * realization.typical_distance ** (-two_a)
    interference = float(np.sum(realization.interferer_fading
                                * realization.interferer_distances ** (-two_a)))
    return sig / (params.sigma2_linear + a_pow * interference)


def _blocks(trials):
    n_blocks = (trials + _BLOCK - 1) // _BLOCK
    return [(b, min(_BLOCK, trials - b * _BLOCK)) for b in range(n_blocks)]


def _draw_block(params, model, rng, m):
    """Vectorized draw of m realizations.

    Returns (d0, h0, counts, offsets, flat_d, flat_h) with flat arrays
    sorted by distance within each trial segment.
    """
    ann = params.annulus
    d0 = sample_typical_distance(ann, rng, m)
    h0 = np.asarray(sample_fading(model, rng, m), dtype=float)
    counts = rng.poisson(params.thinned_density * ann.area, m)
    total = int(counts.sum())
    flat_d = sample_typical_distance(ann, rng, total)
    flat_h = np.asarray(sample_fading(model, rng, total), dtype=float)
    seg = np.repeat(np.arange(m), counts)
    order = np.lexsort((flat_d, seg))
    offsets = np.concatenate([[0], np.cumsum(counts)])
    return d0, h0, counts, offsets, flat_d[order], flat_h[order]


def _run_blocks(worker, trials, seed, threads):
    blocks = _blocks(trials)
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda bm: worker(bm[0], bm[1]), blocks))
    else:
        results = [worker(b, m) for b, m in blocks]
    return results  # in block order regardless of scheduling


def estimate_decoding_probability(params, fading=None, trials=100_000, seed=0,
                                  threads=None):
    """Fraction of realizations whose typical-sensor SINR reaches tau."""
    if trials < 1:
        raise ValueError("estimate_decoding_probability: trials must be >= 1")
    model = fading if fading is not None else params.fading_model()
    two_a = 2.0 * params.alpha
    a_pow = params.beta * params.gain * params.p_linear
    tau = params.tau_linear
    sig2 = params.sigma2_linear

    def worker(b, m):
        rng = _block_rng(seed, b)
        d0, h0, counts, offsets, d, h = _draw_block(params, model, rng, m)
        seg = np.repeat(np.arange(m), counts)
        i_tot = np.bincount(seg, weights=h * d ** (-two_a), minlength=m)
        gam = a_pow * h0 * d0 ** (-two_a) / (sig2 + a_pow * i_tot)
        return int(np.count_nonzero(gam >= tau))

    successes = sum(_run_blocks(worker, trials, seed, threads))
    lo, hi = wilson_interval(successes, trials)
    return McEstimate(trials, successes, successes / trials, lo, hi, int(seed))


def estimate_sic(params, trials=100_000, seed=0, threads=None):
    """Decoding probability with up to n_sic cancellation rounds.

    Fading-free only ("strongest interferer" means nearest).  Each round
    decodes the nearest remaining interferer against the strictly
    farther ones (the typical sensor's own signal never interferes),
    removes it on success and retries the typical sensor; outage when an
    interferer decode fails, runs out, or n rounds are exhausted.
    """
    if not params.fading_free:
        raise ValueError("estimate_sic: fading-free mode only")
    if trials < 1:
        raise ValueError("estimate_sic: trials must be >= 1")
    model = params.fading_model()
    n_sic = int(params.n_sic)
    two_a = 2.0 * params.alpha
    a_pow = params.beta * params.gain * params.p_linear
    tau = params.tau_linear
    sig2 = params.sigma2_linear

    def worker(b, m):
        rng = _block_rng(seed, b)
        d0, h0, counts, offsets, d, h = _draw_block(params, model, rng, m)
        seg = np.repeat(np.arange(m), counts)
        pl = h * d ** (-two_a)
        pl0 = h0 * d0 ** (-two_a)
        i_tot = np.bincount(seg, weights=pl, minlength=m)
        # inclusive prefix sums within each trial segment
        cs = np.cumsum(pl)
        starts = offsets[:-1]
        if pl.size:
            base = np.repeat(cs[starts] - pl[starts], counts)
            cum_local = cs - base
        else:
            cum_local = cs
        success = a_pow * pl0 / (sig2 + a_pow * i_tot) >= tau
        stage_rows = []
        alive = ~success
        for k in range(1, n_sic + 1):
            attempts = int(np.count_nonzero(alive))
            if attempts == 0:
                stage_rows.append((0, 0, 0))
                continue
            has_k = counts >= k
            can_try = alive & has_k
            idx_k = starts + (k - 1)
            pl_k = np.where(has_k, pl[np.minimum(idx_k, max(pl.size - 1, 0))], 0.0)
            rest = np.where(has_k, i_tot - cum_local[np.minimum(idx_k, max(pl.size - 1, 0))], 0.0)
            cancel_ok = can_try & (a_pow * pl_k / (sig2 + a_pow * rest) >= tau)
            retry_ok = cancel_ok & (a_pow * pl0 / (sig2 + a_pow * rest) >= tau)
            stage_rows.append((attempts, int(np.count_nonzero(cancel_ok)),
                               int(np.count_nonzero(retry_ok))))
            success |= retry_ok
            alive = cancel_ok & ~retry_ok
        return int(np.count_nonzero(success)), stage_rows

    results = _run_blocks(worker, trials, seed, threads)
    successes = sum(r[0] for r in results)
    stages = []
    for k in range(n_sic):
        stages.append(StageCounters(
            attempts=sum(r[1][k][0] for r in results),
            cancel_successes=sum(r[1][k][1] for r in results),
            decode_successes=sum(r[1][k][2] for r in results)))
    lo, hi = wilson_interval(successes, trials)
    return McEstimate(trials, successes, successes / trials, lo, hi, int(seed),
                      tuple(stages))


def empirical_cf(params, fading=None, t_grid=(1.0,), trials=100_000, seed=0,
                 threads=None):
    """Sample mean of exp(i t I) over network realizations, with
    componentwise standard errors."""
    if trials < 1:
        raise ValueError("empirical_cf: trials must be >= 1")
    t_arr = np.asarray(t_grid, dtype=float)
    if t_arr.size == 0 or np.any(t_arr < 0):
        raise ValueError("empirical_cf: t_grid must be non-empty and non-negative")
    model = fading if fading is not None else params.fading_model()
    two_a = 2.0 * params.alpha

    def worker(b, m):
        rng = _block_rng(seed, b)
        _d0, _h0, counts, offsets, d, h = _draw_block(params, model, rng, m)
        seg = np.repeat(np.arange(m), counts)
        i_tot = np.bincount(seg, weights=h * d ** (-two_a), minlength=m)
        z = np.exp(1j * np.outer(i_tot, t_arr))
        return (z.sum(axis=0), (z.real**2).sum(axis=0), (z.imag**2).sum(axis=0))

    results = _run_blocks(worker, trials, seed, threads)
    s1 = np.sum([r[0] for r in results], axis=0)
    s2r = np.sum([r[1] for r in results], axis=0)
    s2i = np.sum([r[2] for r in results], axis=0)
    mean = s1 / trials
    var_re = np.maximum(s2r / trials - mean.real**2, 0.0)
    var_im = np.maximum(s2i / trials - mean.imag**2, 0.0)
    se_re = np.sqrt(var_re / trials)
    se_im = np.sqrt(var_im / trials)
    return [CfEstimate(float(t_arr[j]), complex(mean[j]), float(se_re[j]), float(se_im[j]))
            for j in range(t_arr.size)]
