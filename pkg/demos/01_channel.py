"""Walk through the insertion/deletion/substitution channel.

Run:  python demos/01_channel.py
"""
# %%
import numpy as np

from dnabound.channel import ChannelParams, block_drift, drift_std, to_dna, transmit, transmit_multi

# %% One short strand through a noisy channel, with its event trace.
params = ChannelParams(p_ins=0.1, p_del=0.1, p_sub=0.05)
x = np.array([0, 1, 2, 3, 3, 2, 1, 0, 0, 1, 2, 3])
y, trace = transmit(x, params, seed=3)
print("x     ", to_dna(x))
print("y     ", to_dna(y))
print("events", [e[0] for e in trace.events()])
print("drift per symbol", trace.symbol_drift.tolist())
print("drift per 4-nt block", block_drift(trace, 4).tolist())

# %% The trace replays exactly.
assert np.array_equal(trace.replay(x), y)

# %% Two reads of the same strand are independent.
reads = transmit_multi(x, params, 2, seed=3)
for j, r in enumerate(reads.reads):
    print(f"read {j}", to_dna(r))

# %% Final drift over many frames of 960 nt.
rng = np.random.Generator(np.random.PCG64(1))
N = 960
d = np.array([len(transmit(np.zeros(N, dtype=int), ChannelParams.symmetric(0.1), rng)[0]) - N
              for _ in range(5000)])
print(f"final drift: mean {d.mean():.2f}, std {d.std():.2f}")
print(f"decoder window sigma sqrt(N p/(1-p)) = {drift_std(N, 0.1):.2f}, half-width {int(np.ceil(5 * drift_std(N, 0.1)))}")
print(f"share of frames outside the window: {np.mean(np.abs(d) > 52):.4f}")
