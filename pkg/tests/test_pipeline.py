import io
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import beta

from dnabound.channel import ChannelParams, transmit_multi
from dnabound.inner import Codebook, identity_codebook, make_scheme
from dnabound.outer_ldpc import make_code
from dnabound.pipeline import (CHANNEL_FAILURE, OK, FER_COLUMNS, StopRule, SystemConfig, _renorm,
                               clopper_pearson, decode_frame, encode_frame, make_system, run_curve, run_fer)
from dnabound.trellis import DriftTrellis
from oracles import lattice_prob


@pytest.fixture(scope="module")
def tiny():
    # GF(2) outer code with 12 information bits and a 2-nt binary watermark.
    return make_system("wm", Qp=4, protograph="B2", codebooks=[Codebook(1, [[0, 1], [2, 3]])], seed=1)


# ---- bookkeeping ----

def test_zero_message_identity_watermark():
    scheme = make_scheme("wm", [identity_codebook(4, 4)], offset=False)
    cfg = SystemConfig(scheme, make_code("B1", 40, field_bits=4))
    assert not encode_frame(cfg, np.zeros(cfg.K, dtype=int)).any()


def test_frame_lengths_and_rates():
    cfg = make_system("tvc2", Qp=40)
    assert (cfg.n_outer, cfg.N, cfg.K) == (240, 960, 120)
    assert cfg.rate == pytest.approx(0.5) and cfg.rate_inner == 1.0 and cfg.rate_outer == 0.5
    cc = make_system("cc", Qp=160)
    assert cc.scheme.length(1924) == 1926
    assert cc.N == cc.n_outer + 2
    assert cc.rate == pytest.approx(cc.K / cc.N)


def test_field_mismatch_rejected():
    with pytest.raises(ValueError):
        SystemConfig(make_scheme("tvc2"), make_code("B2", 5, field_bits=1))
    with pytest.raises(ValueError):
        make_system("tvc2", Qp=5, M=0)


@pytest.mark.parametrize("kind,Qp", [("tvc1", 10), ("tvc2", 10), ("wm", 10), ("cc", 40)])
def test_noiseless_decoding(kind, Qp):
    cfg = make_system(kind, Qp=Qp, seed=2)
    u = np.random.default_rng(0).integers(0, cfg.code.q, cfg.K)
    x = encode_frame(cfg, u)
    assert len(x) == cfg.N
    res = decode_frame(cfg, transmit_multi(x, ChannelParams(), 1, 0), ChannelParams())
    assert res.status == OK and res.turbo_iterations == 1
    assert np.array_equal(res.u_hat, u)


def test_zero_noise_fer():
    cfg = make_system("tvc2", Qp=5)
    pt = run_fer(cfg, 0.0, StopRule(max_errors=1, max_frames=5))
    assert pt.frames == 5 and pt.errors == 0 and pt.fer == 0.0 and pt.ci_lo == 0.0


def test_channel_failure_counts_as_error(tiny):
    u = np.zeros(tiny.K, dtype=int)
    x = encode_frame(tiny, u)
    y = np.concatenate([x, np.zeros(40, dtype=int)])
    cfg = SystemConfig(tiny.scheme, tiny.code, d_max=3)
    res = decode_frame(cfg, [y], ChannelParams.symmetric(0.05))
    assert res.status == CHANNEL_FAILURE and res.u_hat is None


# ---- turbo decoding against maximum likelihood ----

@pytest.mark.parametrize("p,frames", [(0.02, 200), (0.1, 60)])
def test_turbo_agrees_with_ml(tiny, p, frames):
    assert (tiny.n_outer, tiny.K, tiny.N) == (24, 12, 48)
    msgs = np.array(list(itertools.product(range(2), repeat=tiny.K)))
    X = np.array([encode_frame(tiny, u) for u in msgs])
    p = ChannelParams.symmetric(p)
    rng = np.random.default_rng(0)
    agree = 0
    for _ in range(frames):
        i = rng.integers(len(msgs))
        reads = transmit_multi(X[i], p, 1, int(rng.integers(1 << 30)))
        ml_ok = lattice_prob(X, reads.reads[0], p).argmax() == i
        res = decode_frame(tiny, reads, p)
        ok = res.u_hat is not None and np.array_equal(res.u_hat, msgs[i])
        agree += ok == ml_ok
    assert agree >= 0.95 * frames


def test_uniform_prior_extrinsic_is_app():
    cfg = make_system("tvc2", Qp=5, seed=2)
    p = cfg.channel(0.1)
    u = np.random.default_rng(1).integers(0, 16, cfg.K)
    reads = transmit_multi(encode_frame(cfg, u), p, 1, 5)
    tr = DriftTrellis(cfg.scheme, p, cfg.n_outer, reads)
    prior = np.full((cfg.n_outer, 16), 1 / 16)
    app = tr.app(prior)
    assert np.abs(_renorm(app / prior) - app).max() < 1e-10


def test_more_turbo_rounds_do_not_hurt():
    base = make_system("tvc2", Qp=10, seed=3, turbo_iters=1)
    many = SystemConfig(base.scheme, base.code, turbo_iters=10)
    stop = StopRule(max_errors=1000, max_frames=40)
    one = run_fer(base, 0.16, stop, seed=4)
    ten = run_fer(many, 0.16, stop, seed=4)
    assert ten.errors <= one.errors
    assert one.turbo_iterations == one.frames


# ---- FER harness ----

def test_run_fer_deterministic_and_worker_independent():
    cfg = make_system("tvc2", Qp=5, seed=1, turbo_iters=5)
    stop = StopRule(max_errors=3, max_frames=30)
    a = run_fer(cfg, 0.2, stop, seed=7)
    b = run_fer(cfg, 0.2, stop, seed=7)
    c = run_fer(cfg, 0.2, stop, seed=7, workers=2, batch=5)
    assert a == b == c
    assert a.errors == 3 or a.frames == 30


def test_stop_rule():
    cfg = make_system("tvc2", Qp=5, seed=1, turbo_iters=5)
    pt = run_fer(cfg, 0.3, StopRule(max_errors=2, max_frames=50), seed=0)
    assert pt.errors == 2 and pt.frames < 50


def test_fer_grows_with_p():
    cfg = make_system("tvc2", Qp=5, seed=1, turbo_iters=5)
    pts = run_curve(cfg, [0.02, 0.12, 0.25], StopRule(max_errors=1000, max_frames=60), seed=2)
    for a, b in zip(pts, pts[1:]):
        assert a.ci_lo <= b.ci_hi
    assert pts[0].fer < pts[-1].fer


def test_run_curve_singleton_and_resume():
    cfg = make_system("tvc2", Qp=5, seed=1, turbo_iters=5)
    stop = StopRule(max_errors=2, max_frames=6)
    assert run_curve(cfg, [0.15], stop, seed=3) == [run_fer(cfg, 0.15, stop, seed=3)]
    assert run_curve(cfg, [0.15, 0.2], stop, seed=3) == run_curve(cfg, [0.15, 0.2], stop, seed=3)


def test_run_curve_csv():
    cfg = make_system("tvc2", Qp=5, seed=1)
    buf = io.StringIO()
    pts = run_curve(cfg, [0.0, 0.1], StopRule(max_errors=2, max_frames=4), seed=0, out=buf)
    lines = [ln for ln in buf.getvalue().splitlines() if not ln.startswith("#")]
    assert lines[0].split(",") == list(FER_COLUMNS)
    assert len(lines) == 3 and len(pts) == 2
    assert lines[1].split(",")[0] == "0.0" and lines[1].split(",")[7] == "tvc2"


@settings(max_examples=60)
@given(st.integers(1, 200), st.data())
def test_clopper_pearson_matches_beta_quantiles(n, data):
    k = data.draw(st.integers(0, n))
    lo, hi = clopper_pearson(k, n)
    ref_lo = 0.0 if k == 0 else beta.ppf(0.025, k, n - k + 1)
    ref_hi = 1.0 if k == n else beta.ppf(0.975, k + 1, n - k)
    assert lo == pytest.approx(ref_lo, abs=1e-9) and hi == pytest.approx(ref_hi, abs=1e-9)
    assert lo <= k / n <= hi


def test_clopper_pearson_no_frames():
    assert clopper_pearson(0, 0) == (0.0, 1.0)
    assert math.isclose(clopper_pearson(0, 3000)[1], 1 - 0.025 ** (1 / 3000))
