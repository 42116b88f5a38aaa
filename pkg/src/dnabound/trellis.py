"""Drift-augmented trellis for an inner code seen through the IDS channel.

The hidden state after block ``i`` is the code state together with the drift
``d_i`` of every read.  A transition emits ``n + d' - d`` received symbols per
read; its probability comes from a small edit lattice over the block (the
branch metric).  Forward and backward sweeps are kept in the linear domain
with per-step normalisation; the normalisers are accumulated as natural-log
scale factors so absolute log-probabilities are always recoverable.

Decoder-side modelling choices:

* at most ``i_max`` insertions while one input symbol waits in the queue
  (truncated, not renormalised, so probabilities are those of the true
  channel restricted to the modelled events);
* drifts live in ``[-d_max, d_max]``; transitions leaving the window are
  dropped;
* both boundary drifts are known: ``d_0 = 0`` and ``d_T = N' - N``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .channel import ChannelParams, drift_std

LOG2E = 1.0 / math.log(2.0)


class DriftOverflow(RuntimeError):
    """A read's final drift lies outside the decoder's drift window."""


class ZeroProbability(RuntimeError):
    """The received sequence has zero probability under the decoder model."""


# --------------------------------------------------------------------------
# numba kernels


@njit(cache=True)
def _block_metrics(y, start, D, words, W, del_w, tr_w, e_hit, e_miss):
    """P(y[s:s+l] | block word u) for s = start + d, d in [-D, D], l < W."""
    nd = 2 * D + 1
    U, n = words.shape
    I = del_w.shape[0] - 1
    Ny = y.shape[0]
    out = np.zeros((nd, U, W))
    A = np.empty(W)
    B = np.empty(W)
    for dd in range(nd):
        s = start + dd - D
        if s < 0 or s > Ny:
            continue
        lmax = min(W - 1, Ny - s)
        for u in range(U):
            A[:] = 0.0
            A[0] = 1.0
            hi = 0
            for j in range(n):
                x = words[u, j]
                B[:] = 0.0
                top = min(lmax, hi + I + 1)
                for p in range(top + 1):
                    acc = 0.0
                    for L in range(min(I, p) + 1):
                        acc += A[p - L] * del_w[L]
                    if p >= 1:
                        tacc = 0.0
                        for L in range(1, min(I + 1, p) + 1):
                            tacc += A[p - L] * tr_w[L]
                        if y[s + p - 1] == x:
                            acc += tacc * e_hit
                        else:
                            acc += tacc * e_miss
                    B[p] = acc
                hi = top
                for p in range(W):
                    A[p] = B[p]
            for p in range(lmax + 1):
                out[dd, u, p] = A[p]
    return out


@njit(cache=True)
def _fwd1(alpha, bm, src, dst, ub, pb, n, out):
    nd = alpha.shape[1]
    W = bm.shape[2]
    out[:] = 0.0
    for b in range(src.shape[0]):
        if pb[b] == 0.0:
            continue
        for dd in range(nd):
            a = alpha[src[b], dd] * pb[b]
            if a == 0.0:
                continue
            for l in range(W):
                d2 = dd + l - n
                if d2 < 0:
                    continue
                if d2 >= nd:
                    break
                out[dst[b], d2] += a * bm[dd, ub[b], l]


@njit(cache=True)
def _bwd1(beta, alpha_prev, bm, src, dst, ub, pb, n, out, app_b):
    nd = beta.shape[1]
    W = bm.shape[2]
    out[:] = 0.0
    for b in range(src.shape[0]):
        app_b[b] = 0.0
        if pb[b] == 0.0:
            continue
        for dd in range(nd):
            g = 0.0
            for l in range(W):
                d2 = dd + l - n
                if d2 < 0:
                    continue
                if d2 >= nd:
                    break
                g += bm[dd, ub[b], l] * beta[dst[b], d2]
            out[src[b], dd] += pb[b] * g
            app_b[b] += pb[b] * alpha_prev[src[b], dd] * g


@njit(cache=True)
def _fwd2(alpha, bm1, bm2, src, dst, ub, pb, n, out):
    nd = alpha.shape[1]
    W = bm1.shape[2]
    out[:] = 0.0
    tmp = np.empty((nd, nd))
    for b in range(src.shape[0]):
        if pb[b] == 0.0:
            continue
        u = ub[b]
        tmp[:] = 0.0
        for d1 in range(nd):
            for d2 in range(nd):
                a = alpha[src[b], d1, d2]
                if a == 0.0:
                    continue
                a *= pb[b]
                for l in range(W):
                    e1 = d1 + l - n
                    if e1 < 0:
                        continue
                    if e1 >= nd:
                        break
                    tmp[e1, d2] += a * bm1[d1, u, l]
        for e1 in range(nd):
            for d2 in range(nd):
                a = tmp[e1, d2]
                if a == 0.0:
                    continue
                for l in range(W):
                    e2 = d2 + l - n
                    if e2 < 0:
                        continue
                    if e2 >= nd:
                        break
                    out[dst[b], e1, e2] += a * bm2[d2, u, l]


@njit(cache=True)
def _bwd2(beta, alpha_prev, bm1, bm2, src, dst, ub, pb, n, out, app_b):
    nd = beta.shape[1]
    W = bm1.shape[2]
    out[:] = 0.0
    h = np.empty((nd, nd))
    for b in range(src.shape[0]):
        app_b[b] = 0.0
        if pb[b] == 0.0:
            continue
        u = ub[b]
        # h[e1, d2] = sum_l2 bm2[d2, u, l2] beta[e1, d2 + l2 - n]
        for e1 in range(nd):
            for d2 in range(nd):
                g = 0.0
                for l in range(W):
                    e2 = d2 + l - n
                    if e2 < 0:
                        continue
                    if e2 >= nd:
                        break
                    g += bm2[d2, u, l] * beta[dst[b], e1, e2]
                h[e1, d2] = g
        for d1 in range(nd):
            for d2 in range(nd):
                g = 0.0
                for l in range(W):
                    e1 = d1 + l - n
                    if e1 < 0:
                        continue
                    if e1 >= nd:
                        break
                    g += bm1[d1, u, l] * h[e1, d2]
                out[src[b], d1, d2] += pb[b] * g
                app_b[b] += pb[b] * alpha_prev[src[b], d1, d2] * g


# --------------------------------------------------------------------------
# generic numpy path (any number of reads)


def _band_forward(X, bm, ub, n, axis):
    """Y[b, .., d + l - n, ..] += X[b, .., d, ..] * bm[d, ub[b], l] along ``axis``."""
    X = np.moveaxis(X, axis, -1)
    nd, _, W = bm.shape
    Y = np.zeros_like(X)
    shape = (len(ub),) + (1,) * (X.ndim - 2) + (nd,)
    for l in range(W):
        shift = l - n
        coef = bm[:, ub, l].T.reshape(shape)
        lo, hi = max(0, -shift), min(nd, nd - shift)
        if lo >= hi:
            continue
        Y[..., lo + shift:hi + shift] += X[..., lo:hi] * coef[..., lo:hi]
    return np.moveaxis(Y, -1, axis)


def _band_backward(X, bm, ub, n, axis):
    """Y[b, .., d, ..] = sum_l bm[d, ub[b], l] * X[b, .., d + l - n, ..]."""
    X = np.moveaxis(X, axis, -1)
    nd, _, W = bm.shape
    Y = np.zeros_like(X)
    shape = (len(ub),) + (1,) * (X.ndim - 2) + (nd,)
    for l in range(W):
        shift = l - n
        coef = bm[:, ub, l].T.reshape(shape)
        lo, hi = max(0, -shift), min(nd, nd - shift)
        if lo >= hi:
            continue
        Y[..., lo:hi] += X[..., lo + shift:hi + shift] * coef[..., lo:hi]
    return np.moveaxis(Y, -1, axis)


# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ForwardTable:
    """Natural-log forward messages.

    ``log_alpha[i]`` has shape ``(S, nd, ..., nd)`` (one drift axis per read);
    ``log_scale[i]`` is the accumulated log normaliser, so that
    ``exp(log_alpha[i])`` are absolute probabilities ``p(y prefix, state)``.
    """

    log_alpha: np.ndarray
    log_scale: np.ndarray
    log2_p_y: float


@dataclass(frozen=True)
class BackwardTable:
    log_beta: np.ndarray
    log_scale: np.ndarray
    log2_p_y: float


class DriftTrellis:
    """Trellis for one frame: inner scheme, channel model and received reads.

    ``reads`` is a list of received sequences (or a :class:`ReadSet`).
    ``priors`` arguments are ``(n_outer, q_outer)`` arrays of per-step input
    distributions; ``None`` means uniform.
    """

    def __init__(self, scheme, params: ChannelParams, n_outer: int, reads, *,
                 i_max: int = 2, d_max: int | None = None, offset_seed=None,
                 engine: str = "auto"):
        reads = getattr(reads, "reads", reads)
        if isinstance(reads, np.ndarray) and reads.ndim == 1:
            reads = [reads]
        self.reads = [np.ascontiguousarray(r, dtype=np.int64) for r in reads]
        if not self.reads:
            raise ValueError("need at least one read")
        self.scheme = scheme
        self.params = params
        self.n_outer = int(n_outer)
        self.n = scheme.n
        self.T = scheme.n_steps(self.n_outer)
        self.N = scheme.length(self.n_outer)
        self.M = len(self.reads)
        self.i_max = int(i_max)
        if d_max is None:
            d_max = math.ceil(5 * drift_std(self.N, max(params.p_del, params.p_ins)))
        self.d_max = int(d_max)
        self.nd = 2 * self.d_max + 1
        self.W = self.n * (self.i_max + 1) + 1
        self.final_drift = [len(r) - self.N for r in self.reads]
        self.overflow = any(abs(d) > self.d_max for d in self.final_drift)
        if engine == "auto":
            engine = "numba" if self.M <= 2 else "numpy"
        if engine == "numba" and self.M > 2:
            raise ValueError("numba engine supports at most two reads")
        self.engine = engine

        q = params.q
        pi_q = params.p_ins / q
        self._del_w = np.array([pi_q**L * params.p_del for L in range(self.i_max + 1)])
        self._tr_w = np.array([0.0] + [pi_q ** (L - 1) * params.p_trans for L in range(1, self.i_max + 2)])
        self._e_hit = 1.0 - params.p_sub
        self._e_miss = params.p_sub / (q - 1)

        offset = scheme.offset(self.N, offset_seed)
        self.steps = []
        for i, br in enumerate(scheme.branches(self.n_outer)):
            blk = offset[i * self.n:(i + 1) * self.n]
            words = (br.word + blk) % q
            uniq, ub = np.unique(words, axis=0, return_inverse=True)
            self.steps.append((br.src.astype(np.int64), br.dst.astype(np.int64),
                               br.label.astype(np.int64), np.ascontiguousarray(uniq, dtype=np.int64),
                               ub.reshape(-1).astype(np.int64)))
        self.S = scheme.n_states
        self._bm_cache: dict = {}

    # ---- branch metrics ----

    def branch_metrics(self, i: int, r: int = 0) -> np.ndarray:
        """``(nd, U, W)`` metrics of step ``i`` (0-based) for read ``r``."""
        key = (i, r)
        bm = self._bm_cache.get(key)
        if bm is None:
            words = self.steps[i][3]
            bm = _block_metrics(self.reads[r], i * self.n, self.d_max, words, self.W,
                                self._del_w, self._tr_w, self._e_hit, self._e_miss)
            self._bm_cache[key] = bm
        return bm

    def clear_cache(self):
        self._bm_cache.clear()

    # ---- helpers ----

    def _check(self):
        if self.overflow:
            raise DriftOverflow(f"final drift {self.final_drift} outside window +-{self.d_max}")

    def _branch_prior(self, i, priors):
        label = self.steps[i][2]
        if i >= self.n_outer:
            return np.ones(len(label))
        if priors is None:
            return np.full(len(label), 1.0 / self.scheme.q_outer)
        return np.asarray(priors[i], dtype=float)[label]

    def _alloc(self):
        return np.zeros((self.S,) + (self.nd,) * self.M)

    def _start(self):
        a = self._alloc()
        a[(0,) + (self.d_max,) * self.M] = 1.0
        return a

    def _final_index(self):
        return (0,) + tuple(d + self.d_max for d in self.final_drift)

    def _forward_step(self, i, alpha, pb):
        src, dst, _, _, ub = self.steps[i]
        bms = [self.branch_metrics(i, r) for r in range(self.M)]
        out = self._alloc()
        if self.engine == "numba" and self.M == 1:
            _fwd1(alpha, bms[0], src, dst, ub, pb, self.n, out)
        elif self.engine == "numba":
            _fwd2(alpha, bms[0], bms[1], src, dst, ub, pb, self.n, out)
        else:
            X = alpha[src] * pb.reshape((-1,) + (1,) * self.M)
            for r in range(self.M):
                X = _band_forward(X, bms[r], ub, self.n, axis=r + 1)
            np.add.at(out, dst, X)
        return out

    def _backward_step(self, i, beta, alpha_prev, pb):
        src, dst, _, _, ub = self.steps[i]
        bms = [self.branch_metrics(i, r) for r in range(self.M)]
        out = self._alloc()
        app_b = np.zeros(len(src))
        if self.engine == "numba" and self.M == 1:
            _bwd1(beta, alpha_prev, bms[0], src, dst, ub, pb, self.n, out, app_b)
        elif self.engine == "numba":
            _bwd2(beta, alpha_prev, bms[0], bms[1], src, dst, ub, pb, self.n, out, app_b)
        else:
            G = beta[dst]
            for r in range(self.M):
                G = _band_backward(G, bms[r], ub, self.n, axis=r + 1)
            G = G * pb.reshape((-1,) + (1,) * self.M)
            np.add.at(out, src, G)
            app_b = (G * alpha_prev[src]).reshape(len(src), -1).sum(axis=1)
        return out, app_b

    def _run_forward(self, prior_fn, keep=False):
        self._check()
        alpha = self._start()
        log_scale = 0.0
        tables, scales = ([alpha.copy()], [0.0]) if keep else (None, None)
        for i in range(self.T):
            alpha = self._forward_step(i, alpha, prior_fn(i))
            c = alpha.sum()
            if not c > 0:
                raise ZeroProbability(f"all forward mass lost at step {i + 1}")
            alpha /= c
            log_scale += math.log(c)
            if keep:
                tables.append(alpha.copy())
                scales.append(log_scale)
        final = alpha[self._final_index()]
        log_p = log_scale + math.log(final) if final > 0 else -math.inf
        return alpha, log_p, tables, scales

    # ---- public recursions ----

    def forward(self, priors=None) -> ForwardTable:
        _, log_p, tables, scales = self._run_forward(lambda i: self._branch_prior(i, priors), keep=True)
        with np.errstate(divide="ignore"):
            log_alpha = np.log(np.stack(tables)) + np.asarray(scales).reshape((-1,) + (1,) * (self.M + 1))
        return ForwardTable(log_alpha, np.asarray(scales), log_p * LOG2E)

    def log2_p_y(self, priors=None) -> float:
        """``log2 p(y)`` restricted to the pinned final drift(s)."""
        _, log_p, _, _ = self._run_forward(lambda i: self._branch_prior(i, priors))
        return log_p * LOG2E

    def constrained_forward(self, w) -> float:
        """``log2 p(w, y)``: forward sweep with every step pinned to ``w_i``."""
        w = np.asarray(w, dtype=np.int64)
        if len(w) != self.n_outer:
            raise ValueError("w has the wrong length")
        inv_q = 1.0 / self.scheme.q_outer

        def prior(i):
            label = self.steps[i][2]
            if i >= self.n_outer:
                return np.ones(len(label))
            return np.where(label == w[i], inv_q, 0.0)

        _, log_p, _, _ = self._run_forward(prior)
        return log_p * LOG2E

    def _sweep(self, priors):
        """Forward pass kept in memory, then backward pass with per-step APPs."""
        self._check()
        pbs = [self._branch_prior(i, priors) for i in range(self.T)]
        _, log_p, tables, scales = self._run_forward(lambda i: pbs[i], keep=True)
        if not np.isfinite(log_p):
            raise ZeroProbability("received sequence has zero probability")
        beta = self._alloc()
        beta[self._final_index()] = 1.0
        betas, bscales = [beta.copy()], [0.0]
        log_b = 0.0
        q_outer = self.scheme.q_outer
        app = np.zeros((self.n_outer, q_outer))
        for i in reversed(range(self.T)):
            beta, app_b = self._backward_step(i, beta, tables[i], pbs[i])
            if i < self.n_outer:
                np.add.at(app[i], self.steps[i][2], app_b)
            c = beta.sum()
            if not c > 0:
                raise ZeroProbability(f"all backward mass lost at step {i}")
            beta /= c
            log_b += math.log(c)
            betas.append(beta.copy())
            bscales.append(log_b)
        betas.reverse()
        bscales.reverse()
        return log_p, tables, scales, betas, bscales, app

    def backward(self, priors=None) -> BackwardTable:
        log_p, _, _, betas, bscales, _ = self._sweep(priors)
        with np.errstate(divide="ignore"):
            log_beta = np.log(np.stack(betas)) + np.asarray(bscales).reshape((-1,) + (1,) * (self.M + 1))
        return BackwardTable(log_beta, np.asarray(bscales), log_p * LOG2E)

    def app(self, priors=None) -> np.ndarray:
        """Per-step posteriors ``p(w_i | y)``, shape ``(n_outer, q_outer)``."""
        *_, app = self._sweep(priors)
        tot = app.sum(axis=1, keepdims=True)
        if np.any(tot <= 0):
            raise ZeroProbability("an input step received no posterior mass")
        return app / tot


def branch_metric(block, segment, params: ChannelParams, i_max: int = 2) -> float:
    """Probability that ``block`` enters the channel and exactly ``segment`` comes out."""
    block = np.asarray(block, dtype=np.int64).reshape(1, -1)
    segment = np.asarray(segment, dtype=np.int64)
    n = block.shape[1]
    W = n * (i_max + 1) + 1
    if len(segment) >= W:
        return 0.0
    q = params.q
    del_w = np.array([(params.p_ins / q) ** L * params.p_del for L in range(i_max + 1)])
    tr_w = np.array([0.0] + [(params.p_ins / q) ** (L - 1) * params.p_trans for L in range(1, i_max + 2)])
    bm = _block_metrics(segment, 0, 0, block, W, del_w, tr_w, 1.0 - params.p_sub, params.p_sub / (q - 1))
    return float(bm[0, 0, len(segment)])
