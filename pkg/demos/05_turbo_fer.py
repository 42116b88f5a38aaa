"""Concatenated system: turbo decoding and a small FER curve.

Run:  python demos/05_turbo_fer.py
The full-size experiments go through the ``dnabound`` command instead.
"""
# %%
import numpy as np

from dnabound.channel import transmit_multi
from dnabound.infodensity import sample_dt
from dnabound.pipeline import StopRule, decode_frame, encode_frame, make_system, run_fer

# %% TVC-2 inner code with the B2 outer code, 120 nt per frame.
cfg = make_system("tvc2", Qp=5, seed=0)
print(f"N = {cfg.N} nt, K = {cfg.K} GF(16) symbols, rate {cfg.rate:.3f} bits/nt")

# %% One frame, decoded with turbo iterations.
u = np.random.default_rng(1).integers(0, 16, cfg.K)
params = cfg.channel(0.12)
reads = transmit_multi(encode_frame(cfg, u), params, 1, seed=1)
res = decode_frame(cfg, reads, params)
print(f"status {res.status}, turbo rounds {res.turbo_iterations}, correct {np.array_equal(res.u_hat, u)}")

# %% FER next to the DT bound of the inner code at the same rate.
for p in (0.08, 0.12, 0.16):
    pt = run_fer(cfg, p, StopRule(max_errors=15, max_frames=1500), seed=2)
    dt = sample_dt(cfg.scheme, cfg.channel(p), cfg.n_outer, V=60, seed=3)
    print(f"p = {p}: FER {pt.fer:.4f} [{pt.ci_lo:.4f}, {pt.ci_hi:.4f}]  DT bound {dt.bound:.2e}")
