"""Concatenated encoder, turbo decoder and the frame-error-rate harness."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import binomtest

from .channel import ChannelParams, transmit_multi
from .inner import InnerScheme, encode, make_scheme
from .outer_ldpc import DEFAULT_PROTOGRAPH, LdpcCode, decode_bp, encode_ldpc, make_code
from .seeding import TAG_CHANNEL, TAG_MESSAGE, derive
from .trellis import DriftOverflow, DriftTrellis, ZeroProbability

EXTRINSIC_FLOOR = 1e-12

OK, NOT_CONVERGED, CHANNEL_FAILURE = "ok", "not_converged", "channel_failure"


@dataclass(frozen=True)
class SystemConfig:
    """Inner scheme, outer code and decoder settings of one concatenated system."""

    scheme: InnerScheme
    code: LdpcCode
    M: int = 1
    turbo_iters: int = 100
    bp_iters: int = 100
    p_sub: float = 0.0
    i_max: int = 2
    d_max: int | None = None

    def __post_init__(self):
        if self.code.q != self.scheme.q_outer:
            raise ValueError(f"outer field size {self.code.q} does not match the inner "
                             f"input alphabet {self.scheme.q_outer}")
        if self.M < 1:
            raise ValueError("M must be >= 1")
        if self.turbo_iters < 1 or self.bp_iters < 1:
            raise ValueError("iteration caps must be >= 1")

    @property
    def n_outer(self) -> int:
        return self.code.N

    @property
    def N(self) -> int:
        return self.scheme.length(self.n_outer)

    @property
    def K(self) -> int:
        return self.code.K

    @property
    def rate_outer(self) -> float:
        return self.code.K / self.code.N

    @property
    def rate_inner(self) -> float:
        return self.scheme.rate(self.n_outer)

    @property
    def rate(self) -> float:
        """Overall rate ``K k / N`` in bits per nucleotide."""
        return self.K * self.scheme.k / self.N

    def channel(self, p: float) -> ChannelParams:
        return ChannelParams.symmetric(p, self.p_sub, self.scheme.q)


def make_system(kind: str, Qp: int = 40, protograph: str | None = None, seed: int = 0,
                codebooks=None, M: int = 1, lift: str = "peg", **kw) -> SystemConfig:
    """Inner scheme ``kind`` with its default protograph lifted by ``Qp``.

    The outer field is GF(2^k) with ``k`` the inner input width (GF(2) for CC).
    """
    scheme = make_scheme(kind, codebooks, seed=seed)
    proto = protograph or DEFAULT_PROTOGRAPH[scheme.kind]
    code = make_code(proto, Qp, field_bits=scheme.k, seed=seed, method=lift)
    return SystemConfig(scheme, code, M=M, **kw)


def encode_frame(cfg: SystemConfig, u) -> np.ndarray:
    return encode(cfg.scheme, encode_ldpc(cfg.code, u))


@dataclass
class DecodeResult:
    u_hat: np.ndarray | None
    status: str
    turbo_iterations: int
    w_hat: np.ndarray | None = None


def _renorm(p, floor=EXTRINSIC_FLOOR):
    p = p / p.sum(axis=1, keepdims=True)
    p = np.maximum(p, floor)
    return p / p.sum(axis=1, keepdims=True)


def decode_frame(cfg: SystemConfig, reads, params: ChannelParams) -> DecodeResult:
    """Turbo decoding of one frame from its reads.

    Each round runs the trellis with the current priors, divides the prior out
    of the APPs, runs BP on that extrinsic and feeds the BP extrinsic back as
    the next prior.  Stops as soon as BP finds a codeword.
    """
    code = cfg.code
    trellis = DriftTrellis(cfg.scheme, params, cfg.n_outer, reads, i_max=cfg.i_max, d_max=cfg.d_max)
    if trellis.overflow:
        return DecodeResult(None, CHANNEL_FAILURE, 0)
    prior = np.full((code.N, code.q), 1.0 / code.q)
    res = None
    it = 0
    for it in range(1, cfg.turbo_iters + 1):
        try:
            app = trellis.app(prior)
        except (DriftOverflow, ZeroProbability):
            return DecodeResult(None, CHANNEL_FAILURE, it)
        ext_in = _renorm(app / prior)
        res = decode_bp(code, ext_in, cfg.bp_iters)
        if res.converged:
            break
        prior = _renorm(res.extrinsic)
    status = OK if res.converged else NOT_CONVERGED
    return DecodeResult(res.hard[code.info_positions], status, it, res.hard)


# ---------------------------------------------------------------------------
# FER harness


@dataclass(frozen=True)
class StopRule:
    max_errors: int = 100
    max_frames: int = 100_000


@dataclass(frozen=True)
class FrameOutcome:
    error: bool
    status: str
    turbo_iterations: int


@dataclass(frozen=True)
class FerPoint:
    p: float
    frames: int
    errors: int
    fer: float
    ci_lo: float
    ci_hi: float
    overflows: int = 0
    not_converged: int = 0
    turbo_iterations: int = 0  # summed over frames

    @property
    def overflow_frac(self) -> float:
        return self.overflows / self.frames if self.frames else 0.0


def clopper_pearson(errors: int, frames: int, level: float = 0.95) -> tuple[float, float]:
    if frames == 0:
        return 0.0, 1.0
    ci = binomtest(errors, frames).proportion_ci(confidence_level=level, method="exact")
    return float(ci.low), float(ci.high)


def frame_seed(seed: int, tag: int, f: int) -> int:
    return int(np.random.SeedSequence([int(seed), tag, int(f)]).generate_state(1, np.uint64)[0])


def simulate_frame(cfg: SystemConfig, params: ChannelParams, seed: int, f: int) -> FrameOutcome:
    """Frame ``f`` of an experiment; depends only on ``(cfg, params, seed, f)``."""
    u = derive(seed, TAG_MESSAGE, f).integers(0, cfg.code.q, size=cfg.K)
    x = encode_frame(cfg, u)
    reads = transmit_multi(x, params, cfg.M, frame_seed(seed, TAG_CHANNEL, f))
    res = decode_frame(cfg, reads, params)
    err = res.u_hat is None or not np.array_equal(res.u_hat, u)
    return FrameOutcome(bool(err), res.status, res.turbo_iterations)


_WORKER: dict = {}


def _init_worker(cfg, params, seed):
    _WORKER.update(cfg=cfg, params=params, seed=seed)


def _worker_frame(f):
    return simulate_frame(_WORKER["cfg"], _WORKER["params"], _WORKER["seed"], f)


def run_fer(cfg: SystemConfig, p, stop: StopRule = StopRule(), seed: int = 0,
            workers: int = 1, batch: int | None = None) -> FerPoint:
    """Simulate frames ``0, 1, ...`` until the stop rule fires.

    Frames are scored in index order and the run ends at the first frame that
    reaches ``max_errors`` (or at ``max_frames``), so the counters do not depend
    on ``workers``; surplus frames from a parallel batch are discarded.
    """
    params = p if isinstance(p, ChannelParams) else cfg.channel(float(p))
    p_val = params.p_ins if isinstance(p, ChannelParams) else float(p)
    outcomes: list[FrameOutcome] = []
    errors = 0

    def absorb(results):
        nonlocal errors
        for r in results:
            if errors >= stop.max_errors or len(outcomes) >= stop.max_frames:
                return True
            outcomes.append(r)
            errors += r.error
        return errors >= stop.max_errors or len(outcomes) >= stop.max_frames

    if workers <= 1:
        f = 0
        while not absorb([simulate_frame(cfg, params, seed, f)]):
            f += 1
    else:
        batch = batch or 4 * workers
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(cfg, params, seed)) as pool:
            start = 0
            while True:
                n = min(batch, stop.max_frames - start)
                if absorb(pool.map(_worker_frame, range(start, start + n))):
                    break
                start += n

    frames = len(outcomes)
    lo, hi = clopper_pearson(errors, frames)
    return FerPoint(
        p=p_val, frames=frames, errors=errors,
        fer=errors / frames if frames else math.nan, ci_lo=lo, ci_hi=hi,
        overflows=sum(o.status == CHANNEL_FAILURE for o in outcomes),
        not_converged=sum(o.status == NOT_CONVERGED for o in outcomes),
        turbo_iterations=sum(o.turbo_iterations for o in outcomes),
    )


FER_COLUMNS = ("p_id", "frames", "errors", "fer", "ci_lo", "ci_hi", "overflow_frac",
               "scheme", "N", "M", "turbo_iters")


def fer_row(cfg: SystemConfig, pt: FerPoint) -> dict:
    return {"p_id": pt.p, "frames": pt.frames, "errors": pt.errors, "fer": pt.fer,
            "ci_lo": pt.ci_lo, "ci_hi": pt.ci_hi, "overflow_frac": pt.overflow_frac,
            "scheme": cfg.scheme.kind, "N": cfg.N, "M": cfg.M, "turbo_iters": cfg.turbo_iters}


def run_curve(cfg: SystemConfig, p_list, stop: StopRule = StopRule(), seed: int = 0,
              workers: int = 1, out=None) -> list[FerPoint]:
    """``run_fer`` at each point of ``p_list``; optionally write the CSV rows to ``out``."""
    points = [run_fer(cfg, p, stop, seed, workers) for p in p_list]
    if out is not None:
        from .report import write_csv
        write_csv(out, FER_COLUMNS, [fer_row(cfg, pt) for pt in points])
    return points
