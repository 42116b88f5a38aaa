"""Information density and the Monte-Carlo DT bound for the inner codes.

Run:  python demos/03_density_and_bound.py
"""
# %%
import numpy as np

from dnabound.channel import ChannelParams, transmit_multi
from dnabound.infodensity import information_density, normalized_rate, sample_densities, sample_dt
from dnabound.inner import encode, make_scheme
from dnabound.trellis import DriftTrellis

# %% Posteriors from the drift trellis for one noisy frame.
s = make_scheme("tvc2", seed=0)
rng = np.random.default_rng(4)
w = rng.integers(0, 16, 60)
p = ChannelParams.symmetric(0.12)
reads = transmit_multi(encode(s, w), p, 1, seed=4)
app = DriftTrellis(s, p, 60, reads).app()
print("symbols decided correctly from the inner code alone:", np.mean(app.argmax(axis=1) == w))

# %% One information density sample, in bits, against its ceiling N_o log2 q_o.
smp = information_density(s, p, w, reads)
print(f"i(w; y) = {smp.i_bits:.1f} bits of at most {60 * 4}")

# %% DT bound versus p for a short frame (N = 240 nt, rate 1/2 threshold).
for p_id in (0.08, 0.12, 0.16):
    est = sample_dt(s, ChannelParams.symmetric(p_id), 60, V=40, seed=1)
    est2 = sample_dt(s, ChannelParams.symmetric(p_id), 60, V=40, M=2, seed=1)
    print(f"p = {p_id}: DT bound {est.bound:.2e} (M=1)  {est2.bound:.2e} (M=2)")

# %% Largest rate the DT bound allows at FER 1e-2 for p = 0.10.
smp = sample_densities(s, ChannelParams.symmetric(0.10), 60, 60, seed=2)
nr = normalized_rate(smp, 1e-2, 240, actual_rate=0.5)
print(f"R_max = {nr.r_max:.3f} bits/nt, a rate-1/2 code would sit at {nr.value:.2f} of it")
