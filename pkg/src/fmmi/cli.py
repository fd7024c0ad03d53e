"""Command-line front end.

Every subcommand reads one TOML config, computes a table and writes it as
CSV (atomically) to ``--out`` or stdout.  The first line of every table is a
comment with the tool version and a hash of the effective configuration.

Exit codes: 0 ok, 2 bad configuration, 3 numerical failure, 4 guard tripped.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile
import warnings

import numpy as np

from . import __version__
from .bsc import capacity, conjugate_bsc, esp_bsc, esp_prime_bsc, rcr_bsc, universality_region_bsc
from .exponents import CompoundClass, ExponentCurve, KinkWarning, NumericalError, _as_pmf, _channel_curve
from .probkit import Channel, EnumerationGuardError, Pmf, bsc
from .relative import ReferenceFunctional, minimax_attribution, rel_optimal_F, relative_attribution, relative_members
from .simulator import CodebookGuardError, Decoder, SimConfig, run_experiment
from .weighting import (
    ProblemSpec,
    ck_lambda_range,
    exponent_pair_for_channel,
    optimal_exponents,
    optimal_F_list,
    optimal_F_single,
    universality_check,
)
from .weightfn import WeightFn

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_GUARD = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config parsing


def load_config(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from exc


def _need(cfg: dict, key: str, section: str = ""):
    if key not in cfg:
        raise ConfigError(f"missing key {section + '.' if section else ''}{key!r}")
    return cfg[key]


def parse_class(cfg: dict) -> CompoundClass:
    """``[class]`` with either ``channels = [[[...]]]`` or ``rho_min``/``rho_max``."""
    cls = _need(cfg, "class")
    if "channels" in cls:
        return CompoundClass.explicit([Channel(m) for m in cls["channels"]])
    if "rho_min" in cls or "rho_max" in cls:
        lo = float(cls.get("rho_min", cls.get("rho_max")))
        hi = float(cls.get("rho_max", lo))
        return CompoundClass.bsc_interval(lo, hi, int(cls.get("grid", 201)))
    raise ConfigError("[class] needs 'channels' or 'rho_min'/'rho_max'")


def parse_pmf(cfg: dict, W: CompoundClass) -> Pmf:
    if "pX" in cfg:
        return Pmf(cfg["pX"])
    return Pmf.uniform(W.shape[0])


def parse_problem(cfg: dict) -> ProblemSpec:
    W = parse_class(cfg)
    p = parse_pmf(cfg, W)
    R = float(_need(cfg, "R"))
    if "alpha" in cfg:
        return ProblemSpec(R, p, W, float(cfg["alpha"]))
    return ProblemSpec.from_delta(R, p, W, float(_need(cfg, "delta")))


def _channel_labels(W: CompoundClass, members) -> list[str]:
    if W.kind == "bsc":
        return [f"rho={ch.rows[0, 1]:.6g}" for ch in members]
    return [f"ch{k}" for k in range(len(members))]


def _endpoints(W: CompoundClass):
    if W.kind == "bsc":
        return relative_members(W, fast=True)
    return W.members


# ---------------------------------------------------------------------------
# CSV output


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, str):
        return x
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".12g")


def config_hash(command: str, cfg: dict, flags: dict) -> str:
    blob = json.dumps({"command": command, "config": cfg, "flags": flags}, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def render(header: list, rows: list, comments: list[str]) -> str:
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def write_atomic(text: str, out: str | None):
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    d = os.path.dirname(os.path.abspath(out))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".fmmi-", suffix=".csv")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, out)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# commands; each returns (header, rows, extra comment lines)


def cmd_esp(cfg: dict, args) -> tuple:
    W = parse_class(cfg)
    p = parse_pmf(cfg, W)
    curve = ExponentCurve(p, W)
    n = args.grid or 2049
    R = np.linspace(0.0, float(cfg.get("R_max", curve.H)), n)
    members = _endpoints(W)
    pp = _as_pmf(p)
    cols = [np.asarray(_channel_curve(pp, ch).value(R)) for ch in members]
    comp = curve.value(R)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", KinkWarning)
        slope = np.where(R <= curve.R_inf, -np.inf, np.where(R >= curve.I_min, 0.0, curve.slope_grid(R)))
    header = ["R"] + [f"E_sp[{lab}]" for lab in _channel_labels(W, members)] + ["E_sp_compound", "slope"]
    rows = [[R[i]] + [c[i] for c in cols] + [comp[i], slope[i]] for i in range(n)]
    notes = [f"R_inf={fmt(curve.R_inf)} I_min={fmt(curve.I_min)} R_cr={fmt(curve.R_cr)}"]
    return header, rows, notes


def cmd_optimal_f(cfg: dict, args) -> tuple:
    spec = parse_problem(cfg)
    FL = optimal_F_list(spec)
    FS = optimal_F_single(spec)
    inv = FL.inverse()
    inv_pos = inv.positive_part()
    lo, hi = FL.domain
    t = np.linspace(lo, hi, args.grid or 513)
    rows = [[ti, FL(ti), FS(ti), inv(ti), inv_pos(ti)] for ti in t]
    notes = [f"R={fmt(spec.R)} alpha={fmt(spec.alpha)} delta={fmt(spec.delta)}"]
    return ["t", "F_list", "F_single", "F_list_inv", "F_list_inv_pos"], rows, notes


def _delta_grid(cfg: dict, curve: ExponentCurve, R: float, n: int) -> np.ndarray:
    sweep = cfg.get("tradeoff", {})
    if "deltas" in sweep:
        return np.asarray(sweep["deltas"], dtype=float)
    lo = max(curve.R_inf - R, -curve.value(R))
    lo = float(sweep.get("delta_min", lo))
    hi = float(sweep.get("delta_max", curve.I_min - R))
    return np.linspace(lo, hi, n)


def cmd_tradeoff(cfg: dict, args) -> tuple:
    W = parse_class(cfg)
    p = parse_pmf(cfg, W)
    R = float(_need(cfg, "R"))
    curve = ExponentCurve(p, W)
    conj = curve.conjugate_rate(R)
    d_conj = max((conj if conj is not None else R) - R, 0.0)
    rows = []
    for d in _delta_grid(cfg, curve, R, args.grid or 41):
        spec = ProblemSpec.from_delta(R, p, W, float(d))
        pair = optimal_exponents(spec, crosscheck=False)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", KinkWarning)
            lam = ck_lambda_range(spec) if pair.regime == "I" else None
            if R < curve.I_min and R + d <= curve.I_min:
                rep = universality_check(spec, float(d), 1.0, fast=True)
                l_lo, l_hi = rep.lambda_range
                universal = rep.delta_ok and l_lo <= l_hi * (1 + 1e-12)
            else:
                universal = False
        rows.append([d, spec.alpha, pair.E_i, pair.E_erase, pair.regime,
                     lam[0] if lam else None, lam[1] if lam else None, universal])
    notes = [f"boundary delta={fmt(d_conj)} (conjugate rate minus R)",
             f"boundary delta={fmt(curve.I_min - R)} (I_min minus R)"]
    header = ["delta", "alpha", "E_i", "E_erase", "regime", "lambda_lo", "lambda_hi", "universal"]
    return header, rows, notes


def _weighting_from(cfg: dict, spec: ProblemSpec, kind: str) -> WeightFn:
    lo, hi = -spec.R, spec.curve.H - spec.R
    if kind == "fmmi-list":
        return optimal_F_list(spec)
    if kind == "fmmi-single":
        return optimal_F_single(spec)
    if kind == "threshold":
        return WeightFn.threshold(spec.delta, lo, hi)
    if kind == "mmi":
        return WeightFn.identity(lo, hi)
    raise ConfigError(f"no weighting function for decoder {kind!r}")


def cmd_simulate(cfg: dict, args) -> tuple:
    sim = _need(cfg, "simulate")
    trials = int(_need(sim, "trials", "simulate"))
    if trials < 1:
        raise ConfigError("simulate.trials must be at least 1")
    if "true_rho" in sim:
        ch = bsc(float(sim["true_rho"]))
    else:
        ch = Channel(_need(sim, "true_channel", "simulate"))
    if "class" not in cfg:
        cfg = dict(cfg, **{"class": {"channels": [ch.rows.tolist()]}})
    spec = parse_problem(cfg)
    kind = sim.get("decoder", "fmmi-list")
    T = float(sim.get("T", 0.0))
    T_nats = T if args.t_nats else T * math.log(2.0)
    if kind in ("fmmi-list", "fmmi-single", "threshold", "mmi"):
        F = _weighting_from(cfg, spec, kind)
        dec = Decoder("fmmi", F=F) if kind != "mmi" else Decoder("mmi")
    elif kind == "ck":
        lam = float(_need(sim, "lambda", "simulate"))
        F = WeightFn.ck(spec.delta, lam, -spec.R, spec.curve.H - spec.R)
        dec = Decoder("ck", delta=spec.delta, lam=lam)
    elif kind in ("forney", "forney2"):
        F = None
        dec = Decoder(kind, T=T_nats)
    else:
        raise ConfigError(f"unknown decoder {kind!r}")
    seed = args.seed if args.seed is not None else int(sim.get("seed", 0))
    conf = SimConfig(ch, dec, spec.R, spec.pX, trials, seed, list(sim.get("blocklengths", [24, 36, 48, 60])),
                     threads=int(sim.get("threads", 1)), block_size=int(sim.get("block_size", 1000)),
                     knows_channel=dec.needs_channel)
    res = run_experiment(conf)
    slopes = res.slopes()
    if F is not None:
        theory = exponent_pair_for_channel(spec.R, spec.pX, ch, F)
        th_i, th_e = theory.E_i, theory.E_erase
    else:
        th_i = th_e = None
    rows = []
    for r in res.per_N:
        rows.append([r.N, r.M, r.R_eff, r.tally.trials,
                     r.erasure_rate, *r.ci("erasure"), r.miss_rate, *r.ci("miss"),
                     r.undetected_rate, *r.ci("undetected"), r.mean_incorrect, *r.ci("mean_incorrect"),
                     -slopes["miss"], -slopes["mean_incorrect"], th_e, th_i])
    header = ["N", "M", "R_eff", "trials", "erasure", "erasure_lo", "erasure_hi", "miss", "miss_lo",
              "miss_hi", "undetected", "undetected_lo", "undetected_hi", "mean_Ni", "mean_Ni_lo",
              "mean_Ni_hi", "emp_exp_miss", "emp_exp_Ni", "theory_E_erase", "theory_E_i"]
    notes = [f"decoder={kind} seed={seed} T_nats={fmt(T_nats)}"]
    return header, rows, notes


def cmd_relative(cfg: dict, args) -> tuple:
    spec = parse_problem(cfg)
    W, p, R, delta = spec.W, spec.pX, spec.R, spec.delta
    rel = cfg.get("relative", {})
    ref = rel.get("reference", "forney")
    if ref == "forney":
        aref = ReferenceFunctional.forney(R, delta)
    elif ref == "constant":
        aref = ReferenceFunctional.constant(float(rel.get("value", spec.alpha)))
    else:
        raise ConfigError("relative.reference must be 'forney' or 'constant'")
    Fm = optimal_F_list(spec)
    Fr = rel_optimal_F(R, p, W, aref)
    members = _endpoints(W)
    labels = _channel_labels(W, members)
    pp = _as_pmf(p)
    al = aref.alpha(p, members)
    lo, hi = Fm.domain
    t = np.linspace(lo, hi, args.grid or 513)
    shifted = [np.asarray(_channel_curve(pp, ch).value(R + t)) - a for ch, a in zip(members, al)]
    rows = [[t[i], Fm(t[i]), Fr(t[i])] + [s[i] for s in shifted] for i in range(t.size)]
    notes = []
    if W.kind == "bsc" and len(W.members) > 1:
        tp = t[t > 1e-9]
        mm = set(minimax_attribution(R, p, W, tp).tolist())
        rr = set(relative_attribution(R, p, W, aref, tp).tolist())
        notes.append("minimax F from rho=" + ",".join(fmt(W.rhos[k]) for k in sorted(mm)) + " (noisiest)")
        notes.append("relative F from rho=" + ",".join(fmt(W.rhos[k]) for k in sorted(rr)) + " (cleanest)")
    header = ["t", "F_minimax", "F_relative"] + [f"shifted_E_sp[{lab}]" for lab in labels]
    return header, rows, notes


def cmd_bsc_report(cfg: dict, args) -> tuple:
    W = parse_class(cfg)
    if W.kind != "bsc":
        raise ConfigError("bsc-report needs a [class] with rho_min/rho_max")
    R = float(_need(cfg, "R"))
    delta = cfg.get("delta")
    rows = []
    for tag, rho in (("rho_min", W.rho_min), ("rho_max", W.rho_max)):
        C = capacity(rho)
        rows += [[f"capacity[{tag}]", C], [f"R_cr[{tag}]", rcr_bsc(rho)]]
        if R < C:
            rows += [[f"E_sp(R)[{tag}]", esp_bsc(R, rho)], [f"slope(R)[{tag}]", esp_prime_bsc(R, rho)],
                     [f"R_conj[{tag}]", conjugate_bsc(R, rho)]]
    reg = universality_region_bsc(R, W.rho_min, W.rho_max)
    rows += [["delta_lo", reg.delta_range[0]], ["delta_hi", reg.delta_range[1]], ["nonempty", reg.nonempty]]
    if delta is not None:
        d = float(delta)
        lr = reg.lambda_range(d)
        rows += [["lambda_lo", lr[0] if lr else None], ["lambda_hi", lr[1] if lr else None],
                 ["lambda_opt", reg.lambda_opt(d)], ["mu_gate", reg.gate(d)]]
    return ["quantity", "value"], rows, []


COMMANDS = {
    "esp": cmd_esp,
    "optimal-f": cmd_optimal_f,
    "tradeoff": cmd_tradeoff,
    "simulate": cmd_simulate,
    "relative": cmd_relative,
    "bsc-report": cmd_bsc_report,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fmmi", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"fmmi {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="TOML configuration file")
        sp.add_argument("--out", default=None, help="output CSV path (default: stdout)")
        sp.add_argument("--seed", type=int, default=None, help="unsigned 64-bit seed (simulate)")
        sp.add_argument("--grid", type=int, default=None, help="number of grid points")
        sp.add_argument("--t-nats", action="store_true",
                        help="read simulate.T in nats per letter (threshold e^{NT}); "
                             "by default T is in bits and multiplied by ln 2")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        if args.grid is not None and args.grid < 2:
            raise ConfigError("--grid must be at least 2")
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg = load_config(args.config)
        header, rows, notes = COMMANDS[args.command](cfg, args)
        flags = {"seed": args.seed, "grid": args.grid, "t_nats": args.t_nats}
        comments = [f"fmmi {__version__} {args.command} config_hash={config_hash(args.command, cfg, flags)}"]
        write_atomic(render(header, rows, comments + notes), args.out)
    except (EnumerationGuardError, CodebookGuardError) as exc:
        print(f"fmmi: guard tripped: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except NumericalError as exc:
        print(f"fmmi: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ValueError, KeyError, TypeError) as exc:
        print(f"fmmi: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
