"""Information density sampling, the Monte-Carlo DT bound and normalized rates.

For a frame ``w`` and reads ``y`` the information density is

    i(w; y) = N_o log2 q_o + log2 p(w, y) - log2 p(y),

where both probabilities come from forward sweeps of the drift trellis: a
free sweep under uniform input priors for ``p(y)`` and a sweep pinned to
``w`` for ``p(w, y)``.  The DT bound at a message count ``2**b`` is estimated
as the sample mean of ``2**-(i - (b - 1))^+``.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .channel import ChannelParams, transmit_multi
from .inner import InnerScheme, encode
from .seeding import TAG_CHANNEL, TAG_MESSAGE, derive
from .trellis import DriftOverflow, DriftTrellis, ZeroProbability


@dataclass(frozen=True)
class DensitySample:
    i_bits: float
    seed: int
    final_drifts: tuple
    valid: bool = True
    reason: str = ""


@dataclass(frozen=True)
class DtEstimate:
    bound: float
    stderr: float
    V: int
    threshold_bits: float
    invalid_frac: float
    N: int = 0
    M: int = 1
    rate: float = float("nan")  # threshold_bits / N


@dataclass(frozen=True)
class NormalizedRate:
    value: float  # actual_rate / r_max, inf when infeasible
    r_max: float
    b_star: float
    feasible: bool


def information_density(scheme: InnerScheme, params: ChannelParams, w, reads, *,
                        seed: int = -1, i_max: int = 2, d_max=None, offset_seed=None,
                        engine: str = "auto") -> DensitySample:
    """Density of one ``(w, reads)`` pair; drift overflow gives an invalid sample."""
    w = np.asarray(w, dtype=np.int64)
    trellis = DriftTrellis(scheme, params, len(w), reads, i_max=i_max, d_max=d_max,
                           offset_seed=offset_seed, engine=engine)
    drifts = tuple(int(d) for d in trellis.final_drift)
    try:
        log_py = trellis.log2_p_y()
        log_pwy = trellis.constrained_forward(w)
    except DriftOverflow:
        return DensitySample(math.nan, seed, drifts, False, "drift overflow")
    except ZeroProbability:
        return DensitySample(math.nan, seed, drifts, False, "zero probability")
    if not (np.isfinite(log_py) and np.isfinite(log_pwy)):
        return DensitySample(math.nan, seed, drifts, False, "zero probability")
    i_bits = len(w) * math.log2(scheme.q_outer) + log_pwy - log_py
    return DensitySample(float(i_bits), seed, drifts)


def _split(samples):
    """Valid densities as an array, plus the number of invalid entries."""
    vals, bad = [], 0
    for s in samples:
        if isinstance(s, DensitySample):
            if s.valid:
                vals.append(s.i_bits)
            else:
                bad += 1
        else:
            vals.append(float(s))
    return np.asarray(vals, dtype=float), bad


def _summands(i_bits, b):
    return np.exp2(-np.maximum(i_bits - (b - 1.0), 0.0))


def dt_bound(samples, num_messages_log2: float, pessimistic: bool = False,
             N: int = 0, M: int = 1) -> DtEstimate:
    """Monte-Carlo DT bound for ``2**num_messages_log2`` messages.

    ``samples`` holds :class:`DensitySample` objects or plain densities in
    bits.  Invalid samples are dropped unless ``pessimistic``, in which case
    each contributes a summand of 1.
    """
    if not num_messages_log2 > 0:
        raise ValueError("num_messages_log2 must be positive")
    vals, bad = _split(samples)
    total = len(vals) + bad
    if total == 0:
        raise ValueError("no density samples")
    terms = _summands(vals, num_messages_log2)
    if pessimistic:
        terms = np.concatenate((terms, np.ones(bad)))
    if len(terms) == 0:
        raise ValueError("every density sample is invalid")
    V = len(terms)
    bound = float(min(max(terms.mean(), 0.0), 1.0))
    stderr = float(terms.std(ddof=1) / math.sqrt(V)) if V > 1 else math.nan
    rate = num_messages_log2 / N if N else math.nan
    return DtEstimate(bound, stderr, V, float(num_messages_log2), bad / total, N, M, rate)


def _one_sample(args):
    scheme, params, n_outer, M, seed, v, i_max, d_max = args
    w = derive(seed, TAG_MESSAGE, v).integers(0, scheme.q_outer, size=n_outer)
    x = encode(scheme, w)
    chan_seed = int(np.random.SeedSequence([seed, TAG_CHANNEL, v]).generate_state(1, np.uint64)[0])
    reads = transmit_multi(x, params, M, chan_seed)
    return information_density(scheme, params, w, reads, seed=v, i_max=i_max, d_max=d_max)


def sample_densities(scheme: InnerScheme, params: ChannelParams, n_outer: int, V: int,
                     M: int = 1, seed: int = 0, *, i_max: int = 2, d_max=None,
                     workers: int = 1) -> list[DensitySample]:
    """``V`` densities with uniform random messages.

    Sample ``v`` depends only on ``(seed, v)``, so the result does not depend
    on ``workers``.
    """
    jobs = [(scheme, params, n_outer, M, int(seed), v, i_max, d_max) for v in range(V)]
    if workers <= 1 or V <= 1:
        return [_one_sample(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_one_sample, jobs, chunksize=max(1, V // (4 * workers))))


def default_threshold(scheme: InnerScheme, n_outer: int, rate: float = 0.5,
                      literal: bool = False) -> float:
    """Message-count exponent ``b``: rate-matched ``rate * N`` or the literal ``N_o log2 q_o``."""
    if literal:
        return n_outer * math.log2(scheme.q_outer)
    return rate * scheme.length(n_outer)


def sample_dt(scheme: InnerScheme, params: ChannelParams, n_outer: int, V: int, M: int = 1,
              seed: int = 0, num_messages_log2: float | None = None, *, rate: float = 0.5,
              literal: bool = False, pessimistic: bool = False, i_max: int = 2,
              d_max=None, workers: int = 1) -> DtEstimate:
    if num_messages_log2 is None:
        num_messages_log2 = default_threshold(scheme, n_outer, rate, literal)
    samples = sample_densities(scheme, params, n_outer, V, M, seed, i_max=i_max,
                               d_max=d_max, workers=workers)
    return dt_bound(samples, num_messages_log2, pessimistic, N=scheme.length(n_outer), M=M)


def normalized_rate(samples, target_fer: float, N: int, actual_rate: float,
                    tol: float = 0.1, pessimistic: bool = False) -> NormalizedRate:
    """Ratio of ``actual_rate`` to the largest rate whose DT bound meets ``target_fer``.

    ``b*`` is the largest exponent with ``dt_bound <= target_fer``, located by
    bisection to within ``tol`` bits; ``R_max = b* / N``.
    """
    if not 0 < target_fer < 1:
        raise ValueError("target_fer must lie in (0, 1)")
    vals, bad = _split(samples)
    if len(vals) == 0:
        raise ValueError("no valid density samples")

    def bound(b):
        terms = _summands(vals, b)
        if pessimistic:
            terms = np.concatenate((terms, np.ones(bad)))
        return terms.mean()

    lo = tol
    if bound(lo) > target_fer:
        return NormalizedRate(math.inf, 0.0, 0.0, False)
    # At b - 1 >= max(i) every summand is 1 > target.
    hi = float(vals.max()) + 2.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if bound(mid) <= target_fer:
            lo = mid
        else:
            hi = mid
    r_max = lo / N
    return NormalizedRate(actual_rate / r_max, r_max, lo, True)
