"""Command-line entry point: ``dnabound <subcommand> [options]``.

Subcommands: ``channel-sample``, ``dt-bound``, ``simulate-fer``,
``normalized-rate`` and ``validate-codebook``.  Settings come from an optional
sectioned config file (``--config``), overridden by flags.  Every output file
starts with ``#`` lines holding the resolved configuration and seed.

Exit status: 0 on success, 2 on configuration errors, 1 on runtime failures.
"""

from __future__ import annotations

import argparse
import configparser
import math
import os
import sys

import numpy as np

from . import __version__
from .channel import ChannelParameterError, ChannelParams, from_dna, to_dna, transmit_multi
from .infodensity import default_threshold, dt_bound, normalized_rate, sample_densities
from .inner import CodebookError, codebook_min_levenshtein, load_codebooks, make_scheme
from .outer_ldpc import DEFAULT_PROTOGRAPH, make_code
from .pipeline import FER_COLUMNS, StopRule, SystemConfig, fer_row, run_fer
from .report import write_csv, write_json
from .seeding import TAG_MESSAGE, derive


class ConfigError(Exception):
    pass


def _bool(s):
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _floats(s):
    if isinstance(s, (list, tuple)):
        return [float(v) for v in s]
    return [float(v) for v in str(s).replace(",", " ").split()]


def _ints(s):
    if isinstance(s, (list, tuple)):
        return [int(v) for v in s]
    return [int(v) for v in str(s).replace(",", " ").split()]


def _opt(conv):
    def parse(s):
        if s is None or str(s).strip().lower() in ("", "auto", "none"):
            return None
        return conv(s)
    return parse


# key -> (section, parser, default)
KEYS = {
    "p": ("channel", _opt(float), None),
    "p_list": ("channel", _floats, []),
    "p_ins": ("channel", _opt(float), None),
    "p_del": ("channel", _opt(float), None),
    "p_sub": ("channel", float, 0.0),
    "q": ("channel", int, 4),
    "reads": ("channel", int, 1),
    "scheme": ("inner", str, "tvc2"),
    "codebooks": ("inner", _opt(str), None),
    "offset": ("inner", _opt(_bool), None),
    "strict": ("inner", _bool, False),
    "metric": ("inner", str, "edit"),
    "N": ("frame", _opt(int), 960),
    "N_list": ("frame", _ints, []),
    "protograph": ("outer", _opt(str), None),
    "Qp": ("outer", _opt(int), None),
    "lift": ("outer", str, "peg"),
    "turbo_iters": ("pipeline", int, 100),
    "bp_iters": ("pipeline", int, 100),
    "max_errors": ("pipeline", int, 100),
    "max_frames": ("pipeline", int, 100_000),
    "i_max": ("pipeline", int, 2),
    "d_max": ("pipeline", _opt(int), None),
    "V": ("sampling", int, 200),
    "threshold_bits": ("sampling", _opt(float), None),
    "rate": ("sampling", float, 0.5),
    "literal_threshold": ("sampling", _bool, False),
    "pessimistic": ("sampling", _bool, False),
    "target_fer": ("sampling", float, 1e-3),
    "p_star": ("sampling", _opt(float), None),
    "seed": ("run", int, 0),
    "workers": ("run", _opt(int), None),
    "output": ("run", _opt(str), None),
    "json": ("run", _opt(str), None),
}
# Keys that never change results and are left out of the output header.
_NOT_IN_HEADER = {"workers", "output", "json"}


def load_config(path) -> dict:
    """Flat ``{key: raw string}`` from a sectioned config file; unknown keys are errors."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e.strerror}") from None
    except configparser.Error as e:
        raise ConfigError(f"malformed config file {path}: {e}") from None
    sections = {s for s, _, _ in KEYS.values()}
    raw = {}
    for sec in cp.sections():
        if sec not in sections:
            raise ConfigError(f"unknown config section [{sec}]")
        for key, value in cp.items(sec):
            spec = KEYS.get(key)
            if spec is None or spec[0] != sec:
                raise ConfigError(f"unknown config key '{key}' in section [{sec}]")
            raw[key] = value
    return raw


def resolve(args) -> dict:
    """Defaults, then config file, then flags; every value parsed and named on failure."""
    raw = load_config(args.config) if getattr(args, "config", None) else {}
    for key in KEYS:
        v = getattr(args, key, None)
        if v is not None:
            raw[key] = v
    cfg = {}
    for key, (sec, conv, default) in KEYS.items():
        if key not in raw:
            cfg[key] = default
            continue
        try:
            cfg[key] = conv(raw[key])
        except (TypeError, ValueError):
            raise ConfigError(f"invalid value for '{key}' in [{sec}]: {raw[key]!r}") from None
    if cfg["workers"] is None:
        cfg["workers"] = os.cpu_count() or 1
    return cfg


def _header(command: str, cfg: dict) -> dict:
    meta = {"tool": f"dnabound {__version__}", "command": command}
    for key in sorted(KEYS, key=lambda k: (KEYS[k][0], k)):
        if key in _NOT_IN_HEADER:
            continue
        value = cfg[key]
        if isinstance(value, list):
            value = ",".join(str(v) for v in value)
        meta[f"{KEYS[key][0]}.{key}"] = "auto" if value is None else value
    return meta


def _points(cfg) -> list[ChannelParams]:
    """Channel points from ``p_list``, ``p`` or explicit ``p_ins``/``p_del``."""
    try:
        if cfg["p_ins"] is not None or cfg["p_del"] is not None:
            return [ChannelParams(cfg["p_ins"] or 0.0, cfg["p_del"] or 0.0, cfg["p_sub"], cfg["q"])]
        ps = cfg["p_list"] or ([cfg["p"]] if cfg["p"] is not None else [])
        if not ps:
            raise ConfigError("no channel point: give 'p', 'p_list' or 'p_ins'/'p_del'")
        return [ChannelParams.symmetric(p, cfg["p_sub"], cfg["q"]) for p in ps]
    except ChannelParameterError as e:
        raise ConfigError(f"channel parameters: {e}") from None


def _scheme(cfg):
    try:
        return make_scheme(cfg["scheme"], cfg["codebooks"], seed=cfg["seed"], offset=cfg["offset"],
                           strict=cfg["strict"], metric=cfg["metric"], q=cfg["q"])
    except (CodebookError, OSError) as e:
        raise ConfigError(f"inner code ('scheme'/'codebooks'): {e}") from None
    except ValueError as e:
        raise ConfigError(f"'scheme': {e}") from None


def _n_outer(scheme, N) -> int:
    body = N // scheme.n - scheme.memory
    if N % scheme.n or body < 1:
        raise ConfigError(f"'N'={N} is not a valid frame length for {scheme.kind} (block length {scheme.n})")
    return body


def _system(cfg, scheme, N) -> SystemConfig:
    proto = cfg["protograph"] or DEFAULT_PROTOGRAPH[scheme.kind]
    if cfg["Qp"] is not None and not cfg["N_list"]:
        Qp = cfg["Qp"]
    else:
        n_outer = _n_outer(scheme, N)
        if n_outer % 6:
            good = 6 * scheme.n * max(1, round(n_outer / 6)) + scheme.memory * scheme.n
            raise ConfigError(f"'N'={N} gives {n_outer} outer symbols, not a multiple of the "
                              f"protograph width 6 (nearest valid N: {good})")
        Qp = n_outer // 6
    try:
        code = make_code(proto, Qp, field_bits=scheme.k, seed=cfg["seed"], method=cfg["lift"])
    except (ValueError, OSError) as e:
        raise ConfigError(f"outer code ('protograph'/'Qp'): {e}") from None
    return SystemConfig(scheme, code, M=cfg["reads"], turbo_iters=cfg["turbo_iters"],
                        bp_iters=cfg["bp_iters"], p_sub=cfg["p_sub"], i_max=cfg["i_max"],
                        d_max=cfg["d_max"])


def _emit(cfg, command, columns, rows, out):
    meta = _header(command, cfg)
    if cfg["output"]:
        write_csv(cfg["output"], columns, rows, meta)
    else:
        write_csv(out, columns, rows, meta)
    if cfg["json"]:
        write_json(cfg["json"], columns, rows, meta)


# ---------------------------------------------------------------------------
# subcommands


def cmd_channel_sample(args, out):
    cfg = resolve(args)
    params = _points(cfg)[0]
    if args.x:
        try:
            x = from_dna(args.x)
        except ValueError as e:
            raise ConfigError(f"'x': {e}") from None
    else:
        x = derive(cfg["seed"], TAG_MESSAGE).integers(0, params.q, size=cfg["N"] or 0)
    rs = transmit_multi(x, params, cfg["reads"], cfg["seed"])
    names = {"ins": "I", "del": "D", "tx": "T", "sub": "S"}
    lines = [f"# {k} = {v}" for k, v in _header("channel-sample", cfg).items()]
    lines.append(f"x {to_dna(x)}")
    for j, (y, tr) in enumerate(zip(rs.reads, rs.traces)):
        lines.append(f"y{j} {to_dna(y)}")
        ev = [names[e[0]] + ("" if len(e) == 1 else to_dna([e[1]])) for e in tr.events()]
        lines.append(f"events{j} {' '.join(ev)}")
        lines.append(f"drift{j} {' '.join(str(d) for d in tr.symbol_drift)}")
    text = "\n".join(lines) + "\n"
    if cfg["output"]:
        with open(cfg["output"], "w") as fh:
            fh.write(text)
    else:
        out.write(text)


DT_COLUMNS = ("p_id", "bound", "stderr", "V", "invalid_frac", "threshold_bits", "N", "M", "scheme")


def cmd_dt_bound(args, out):
    cfg = resolve(args)
    scheme = _scheme(cfg)
    n_outer = _n_outer(scheme, cfg["N"])
    N = scheme.length(n_outer)
    b = cfg["threshold_bits"]
    if b is None:
        b = default_threshold(scheme, n_outer, cfg["rate"], cfg["literal_threshold"])
    rows = []
    for params in _points(cfg):
        samples = sample_densities(scheme, params, n_outer, cfg["V"], cfg["reads"], cfg["seed"],
                                   i_max=cfg["i_max"], d_max=cfg["d_max"], workers=cfg["workers"])
        est = dt_bound(samples, b, cfg["pessimistic"], N=N, M=cfg["reads"])
        rows.append({"p_id": params.p_ins, "bound": est.bound, "stderr": est.stderr, "V": est.V,
                     "invalid_frac": est.invalid_frac, "threshold_bits": est.threshold_bits,
                     "N": N, "M": cfg["reads"], "scheme": scheme.kind})
    _emit(cfg, "dt-bound", DT_COLUMNS, rows, out)


def cmd_simulate_fer(args, out):
    cfg = resolve(args)
    scheme = _scheme(cfg)
    sys_cfg = _system(cfg, scheme, cfg["N"])
    stop = StopRule(cfg["max_errors"], cfg["max_frames"])
    rows = []
    for params in _points(cfg):
        pt = run_fer(sys_cfg, params, stop, cfg["seed"], cfg["workers"])
        rows.append(fer_row(sys_cfg, pt))
    _emit(cfg, "simulate-fer", FER_COLUMNS, rows, out)


NR_COLUMNS = ("scheme", "N", "M", "K", "rate", "target_fer", "p_star", "p_bracket", "V",
              "invalid_frac", "b_star", "r_max", "normalized_rate", "feasible")


def crossing_point(ps, fers, frames, target):
    """Channel point where the FER curve crosses ``target`` (log-linear interpolation).

    Returns ``(p, how)`` with ``how`` one of ``interp``, ``all_below``, ``all_above``.
    """
    order = np.argsort(ps)
    ps, fers, frames = np.asarray(ps)[order], np.asarray(fers)[order], np.asarray(frames)[order]
    logs = np.log10(np.maximum(fers, 0.5 / np.maximum(frames, 1)))
    lt = math.log10(target)
    for a in range(len(ps) - 1):
        if fers[a] <= target < fers[a + 1]:
            frac = (lt - logs[a]) / (logs[a + 1] - logs[a])
            return float(ps[a] + min(max(frac, 0.0), 1.0) * (ps[a + 1] - ps[a])), "interp"
    if np.all(fers <= target):
        return float(ps[-1]), "all_below"
    return float(ps[0]), "all_above"


def cmd_normalized_rate(args, out):
    cfg = resolve(args)
    scheme = _scheme(cfg)
    lengths = cfg["N_list"] or [cfg["N"]]
    stop = StopRule(cfg["max_errors"], cfg["max_frames"])
    target = cfg["target_fer"]
    rows = []
    for N in lengths:
        sys_cfg = _system(cfg, scheme, N)
        if cfg["p_star"] is not None:
            p_star, how = cfg["p_star"], "given"
        else:
            pts = [run_fer(sys_cfg, params, stop, cfg["seed"], cfg["workers"]) for params in _points(cfg)]
            p_star, how = crossing_point([p.p for p in pts], [p.fer for p in pts],
                                         [p.frames for p in pts], target)
        params = sys_cfg.channel(p_star)
        samples = sample_densities(scheme, params, sys_cfg.n_outer, cfg["V"], cfg["reads"], cfg["seed"],
                                   i_max=cfg["i_max"], d_max=cfg["d_max"], workers=cfg["workers"])
        nr = normalized_rate(samples, target, sys_cfg.N, sys_cfg.rate, pessimistic=cfg["pessimistic"])
        invalid = dt_bound(samples, max(nr.b_star, 1.0)).invalid_frac
        rows.append({"scheme": scheme.kind, "N": sys_cfg.N, "M": sys_cfg.M, "K": sys_cfg.K,
                     "rate": sys_cfg.rate, "target_fer": target, "p_star": p_star, "p_bracket": how,
                     "V": cfg["V"], "invalid_frac": invalid, "b_star": nr.b_star, "r_max": nr.r_max,
                     "normalized_rate": nr.value, "feasible": nr.feasible})
    _emit(cfg, "normalized-rate", NR_COLUMNS, rows, out)


def cmd_validate_codebook(args, out):
    try:
        books = load_codebooks(args.file, args.q)
    except (CodebookError, OSError) as e:
        raise ConfigError(f"codebook file {args.file}: {e}") from None
    worst = math.inf
    for cb in books:
        d_edit = codebook_min_levenshtein(cb, "edit") if len(cb.words) > 1 else 0
        d_indel = codebook_min_levenshtein(cb, "indel") if len(cb.words) > 1 else 0
        worst = min(worst, d_edit if args.metric == "edit" else d_indel)
        out.write(f"codebook {cb.id} n={cb.n} k={cb.k} entries={len(cb.words)} "
                  f"min_levenshtein={d_edit} min_indel={d_indel}\n")
    if args.strict and worst < args.min_distance:
        out.write(f"FAIL: minimum {args.metric} distance {worst} < {args.min_distance}\n")
        return 1
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _common(p, channel=True, frame=True):
    p.add_argument("--config", help="sectioned key-value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, help="parallel worker processes (default: CPU count)")
    p.add_argument("--output", "-o", help="output file (default: stdout)")
    p.add_argument("--json", help="also write a JSON mirror of the output")
    if channel:
        p.add_argument("--p", type=float, help="p_ins = p_del = p")
        p.add_argument("--p-list", dest="p_list", help="comma-separated channel points")
        p.add_argument("--p-ins", dest="p_ins", type=float)
        p.add_argument("--p-del", dest="p_del", type=float)
        p.add_argument("--p-sub", dest="p_sub", type=float)
        p.add_argument("--q", type=int)
        p.add_argument("--M", "--reads", dest="reads", type=int, help="number of reads")
    if frame:
        p.add_argument("--N", type=int, help="DNA frame length")
        p.add_argument("--scheme", choices=("cc", "wm", "tvc1", "tvc2"))
        p.add_argument("--codebooks", help="codebook file (default: bundled set)")
        p.add_argument("--offset", help="add the random offset sequence (true/false/auto)")
        p.add_argument("--strict", action="store_const", const="true", help="require distance-4 codebooks")
        p.add_argument("--metric", choices=("edit", "indel"))
        p.add_argument("--i-max", dest="i_max", type=int, help="decoder insertion cap per symbol")
        p.add_argument("--d-max", dest="d_max", help="drift window half-width (default 5 sigma)")


def _sampling(p):
    p.add_argument("--V", type=int, help="number of density samples")
    p.add_argument("--threshold-bits", dest="threshold_bits", help="log2 of the message count")
    p.add_argument("--rate", type=float, help="rate for the default threshold rate*N")
    p.add_argument("--literal-threshold", dest="literal_threshold", action="store_const", const="true",
                   help="use N_o*log2(q_o) as the threshold")
    p.add_argument("--pessimistic", action="store_const", const="true",
                   help="count invalid samples as bound summand 1")


def _decoding(p):
    p.add_argument("--protograph", help="B1, B2 or a base-matrix file")
    p.add_argument("--Qp", type=int, help="lifting factor (default from N)")
    p.add_argument("--lift", choices=("peg", "random"))
    p.add_argument("--turbo-iters", dest="turbo_iters", type=int)
    p.add_argument("--bp-iters", dest="bp_iters", type=int)
    p.add_argument("--max-errors", dest="max_errors", type=int)
    p.add_argument("--max-frames", dest="max_frames", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dnabound", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"dnabound {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("channel-sample", help="pass a sequence through the channel and dump the trace")
    _common(p)
    p.add_argument("--x", help="input DNA string (default: random of length N)")
    p.set_defaults(func=cmd_channel_sample)

    p = sub.add_parser("dt-bound", help="Monte-Carlo DT bound per channel point")
    _common(p)
    _sampling(p)
    p.set_defaults(func=cmd_dt_bound)

    p = sub.add_parser("simulate-fer", help="frame error rate of the concatenated code")
    _common(p)
    _decoding(p)
    p.set_defaults(func=cmd_simulate_fer)

    p = sub.add_parser("normalized-rate", help="code rate relative to the DT-bound rate at a target FER")
    _common(p)
    _sampling(p)
    _decoding(p)
    p.add_argument("--N-list", dest="N_list", help="comma-separated frame lengths")
    p.add_argument("--target-fer", dest="target_fer", type=float)
    p.add_argument("--p-star", dest="p_star", type=float,
                   help="channel point where the code meets the target (skips the FER search)")
    p.set_defaults(func=cmd_normalized_rate)

    p = sub.add_parser("validate-codebook", help="report minimum distances of a codebook file")
    p.add_argument("file")
    p.add_argument("--q", type=int, default=4)
    p.add_argument("--strict", action="store_true", help="exit 1 if a book is below --min-distance")
    p.add_argument("--metric", choices=("edit", "indel"), default="edit")
    p.add_argument("--min-distance", dest="min_distance", type=int, default=4)
    p.set_defaults(func=cmd_validate_codebook)
    return ap


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        rc = args.func(args, out)
    except ConfigError as e:
        print(f"dnabound: config error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001 - any failure of the workflow itself
        print(f"dnabound: error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    return int(rc or 0)


def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
