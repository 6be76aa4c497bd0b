"""Experiment runner: ``nctorus run <config.json>`` and ``nctorus validate <config.json>``."""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import os
import re
import sys
import time
from fractions import Fraction

import numpy as np

from . import __version__
from .algebra import parse_ncpoly, random_ncpoly, trace
from .angles import GOLDEN_THETA
from .anzai import AnzaiMap, Weight, apply_iter, cesaro, mode_terms, right_twist
from .circle import TrigPoly, WindingMap
from .errors import ConfigError, ExperimentError, NCTorusError, ParseError

EXPERIMENTS = ("trace-invariance", "ergodic-average", "spectral-measure", "cohomology",
               "weighted-average", "classical-crosscheck", "counterexample")

DEFAULTS = {
    "experiment": None,
    "alpha": 0.0,
    "theta": "golden",
    "f": "char:z0=1,w=1",
    "a": "V",
    "lambda": "1",
    "N": [64, 256, 1024, 4096],
    "K": [64, 128, 256],
    "G": 4096,
    "seed": 12345,
    "samples": 16,
    "k_max": 1000,
    "n_max": 5,
    "vector": "1",
    "grid": 1024,
    "levels": 4,
    "nu": "default",
    "h": "1",
    "window": [1024, 65536],
    "points": 32,
    "output_dir": None,
}

DEFAULT_OUT = "nctorus-out"


# -- parsers for config strings ---------------------------------------------------------

def _kv(spec: str, body: str, offset: int) -> dict[str, tuple[str, int]]:
    """``k1=v1,k2=v2`` into ``{k: (v, position)}``."""
    out = {}
    pos = offset
    for part in body.split(","):
        if "=" not in part:
            raise ParseError("expected key=value", spec, pos)
        k, v = part.split("=", 1)
        out[k.strip()] = (v.strip(), pos + len(k) + 1)
        pos += len(part) + 1
    return out


def _num(spec: str, text: str, pos: int, kind=float):
    try:
        if kind is complex:
            return complex(text.replace("i", "j").replace(" ", ""))
        return kind(text)
    except ValueError:
        raise ParseError(f"bad {kind.__name__} {text!r}", spec, pos) from None


def parse_real(value, name: str) -> float:
    """Numbers, ``"p/q"`` fractions, ``"golden"`` (as a turn fraction), or ``"pi*x"``."""
    if isinstance(value, bool):
        raise ConfigError(f"{name}: expected a number")
    if isinstance(value, (int, float)):
        return float(value)
    s = str(value).strip()
    if s == "golden":
        return (math.sqrt(5.0) - 1.0) / 2.0
    m = re.fullmatch(r"pi\*(.+)", s)
    try:
        if m:
            return math.pi * float(m.group(1))
        return float(Fraction(s))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"{name}: cannot read {value!r}") from None


def parse_theta(value):
    """Returns ``(theta, LiouvilleAngle or None)``."""
    if isinstance(value, str):
        s = value.strip()
        if s == "golden":
            return GOLDEN_THETA, None
        if s.startswith("liouville:"):
            from .counterexample import liouville_theta
            kv = _kv(s, s[len("liouville:"):], len("liouville:"))
            unknown = set(kv) - {"levels"}
            if unknown:
                k = sorted(unknown)[0]
                raise ParseError(f"unknown key {k!r}", s, kv[k][1] - len(k) - 1)
            lv = _num(s, *kv.get("levels", ("4", len(s))), kind=int)
            ang = liouville_theta(lv)
            return ang.theta, ang
    return parse_real(value, "theta"), None


def f_spec_parser(spec: str, theta: float = GOLDEN_THETA, angle=None, nu: float | None = None,
                  alpha: float = 0.0):
    """``char:z0=<complex>,w=<int>``, ``exp-sin:amp=<real>,freq=<int>``, ``furstenberg:levels=<int>``.

    ``side=right`` on the first two reads ``f`` as acting on the right of ``V``.

    Returns ``(f, construction)`` where the construction is a JSON object for
    the manifest, or None.
    """
    s = spec.strip()
    if ":" not in s:
        raise ParseError("expected kind:params", spec, 0)
    kind, body = s.split(":", 1)
    off = len(kind) + 1
    kv = _kv(spec, body, off) if body else {}
    allowed = {"char": {"z0", "w", "side"}, "exp-sin": {"amp", "freq", "w", "side"},
               "furstenberg": {"levels", "nu"}}
    if kind not in allowed:
        raise ParseError(f"unknown function kind {kind!r}", spec, 0)
    extra = set(kv) - allowed[kind]
    if extra:
        k = sorted(extra)[0]
        raise ParseError(f"unknown key {k!r}", spec, kv[k][1] - len(k) - 1)
    if kind in ("char", "exp-sin"):
        side, spos = kv.get("side", ("left", off))
        if side not in ("left", "right"):
            raise ParseError("side must be left or right", spec, spos)
        if kind == "char":
            z0 = _num(spec, *kv.get("z0", ("1", off)), kind=complex)
            w = _num(spec, *kv.get("w", ("1", off)), kind=int)
            if abs(abs(z0) - 1.0) > 1e-12:
                raise ParseError("z0 must be unimodular", spec, kv["z0"][1])
            f = WindingMap.character(z0, w)
        else:
            amp = _num(spec, *kv.get("amp", ("0", off)))
            freq = _num(spec, *kv.get("freq", ("1", off)), kind=int)
            w = _num(spec, *kv.get("w", ("0", off)), kind=int)
            f = WindingMap.exp_sin(amp, freq, w)
        if side == "right":
            # Phi(V) = V f(U) is the left form with f o R_{-alpha}
            f = right_twist(f, alpha)
        return f, None
    from .counterexample import DEFAULT_NU, RoughSolution, furstenberg_f, liouville_theta, manifest
    levels = _num(spec, *kv.get("levels", ("3", off)), kind=int)
    if "nu" in kv:
        nu = _num(spec, *kv["nu"])
    nu = DEFAULT_NU if nu is None else nu
    ang = angle if angle is not None and angle.levels >= levels else liouville_theta(levels)
    g = RoughSolution.build(ang, levels)
    # the exact next-level bound is only meaningful on the construction's own angle
    ft, bound = furstenberg_f(ang if theta == ang.theta else theta, g, nu)
    return ft, manifest(ang, g, nu, bound)


def parse_lambda(value, theta: float, nu: float) -> Weight:
    """``"1"``, ``"theta"``, ``"theta*m"``, ``"nu"``, ``"angle:x"``."""
    s = str(value).strip()
    if s in ("1", "1.0"):
        return Weight.one()
    if s == "theta":
        return Weight.theta(theta, 1)
    m = re.fullmatch(r"theta\*(-?\d+)", s)
    if m:
        return Weight.theta(theta, int(m.group(1)))
    if s == "nu":
        return Weight(nu)
    if s.startswith("angle:"):
        return Weight(_num(s, s[6:], 6))
    raise ParseError("expected 1, theta, theta*m, nu or angle:x", s, 0)


def _int_list(value, name: str) -> list[int]:
    vals = value if isinstance(value, list) else [value]
    try:
        out = [int(v) for v in vals]
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: expected integers") from None
    if any(v < 1 for v in out):
        raise ConfigError(f"{name}: entries must be positive")
    return out


# -- config -----------------------------------------------------------------------------

def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def apply_sets(cfg: dict, sets: list[str]) -> dict:
    cfg = dict(cfg)
    for item in sets or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            cfg[k.strip()] = json.loads(v)
        except json.JSONDecodeError:
            cfg[k.strip()] = v
    return cfg


def resolve(cfg: dict, out: str | None = None) -> dict:
    """Fill defaults, reject unknown keys, and check types."""
    unknown = sorted(set(cfg) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    r = copy.deepcopy(DEFAULTS)
    r.update(cfg)
    if r["experiment"] not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {list(EXPERIMENTS)}")
    if out is not None:
        r["output_dir"] = out
    elif r["output_dir"] is None:
        r["output_dir"] = os.environ.get("NCTORUS_OUT", DEFAULT_OUT)
    r["alpha"] = parse_real(r["alpha"], "alpha")
    r["N"] = _int_list(r["N"], "N")
    r["K"] = _int_list(r["K"], "K")
    r["window"] = _int_list(r["window"], "window")
    if len(r["window"]) != 2 or r["window"][0] > r["window"][1]:
        raise ConfigError("window must be [N_min, N_max]")
    for key in ("G", "samples", "k_max", "n_max", "grid", "levels", "points"):
        r[key] = _int_list(r[key], key)[0]
    if not isinstance(r["seed"], int) or isinstance(r["seed"], bool):
        raise ConfigError("seed must be an integer")
    # parse once here so a bad spec fails validation
    theta, _ = parse_theta(r["theta"])
    _nu(r)
    f_spec_parser(str(r["f"]), theta)
    parse_lambda(r["lambda"], theta, _nu(r))
    parse_ncpoly(str(r["a"]), r["alpha"])
    parse_ncpoly(str(r["vector"]), r["alpha"])
    return r


def _nu(r: dict) -> float:
    if r["nu"] == "default":
        from .counterexample import DEFAULT_NU
        return DEFAULT_NU
    return parse_real(r["nu"], "nu")


# -- output helpers ---------------------------------------------------------------------

def _g(x: float) -> str:
    return "%.17g" % x


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_g(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


class _Writer:
    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        self.files: list[str] = []
        self.construction = None
        os.makedirs(out_dir, exist_ok=True)

    def text(self, name: str, content: str) -> None:
        with open(os.path.join(self.out_dir, name), "w", newline="") as fh:
            fh.write(content)
        self.files.append(name)

    def png(self, path: str) -> None:
        self.files.append(os.path.basename(path))


# -- experiments ------------------------------------------------------------------------

def _setup(r: dict, w: "_Writer"):
    theta, angle = parse_theta(r["theta"])
    nu = _nu(r)
    f, construction = f_spec_parser(str(r["f"]), theta, angle, nu, r["alpha"])
    w.construction = construction
    A = AnzaiMap(theta, r["alpha"], f)
    return A, theta, nu, construction


def _character_params(spec: str):
    """``(z0, w)`` when the f spec is a character, else None."""
    s = spec.strip()
    if not s.startswith("char:"):
        return None
    kv = _kv(s, s[5:], 5)
    return (_num(s, *kv.get("z0", ("1", 5)), kind=complex), _num(s, *kv.get("w", ("1", 5)), kind=int))


def exp_trace_invariance(r, w: _Writer, threads: int, plots: bool) -> dict:
    A, theta, nu, _ = _setup(r, w)
    rng = np.random.default_rng(r["seed"])
    xs = [random_ncpoly(rng, r["alpha"]) for _ in range(r["samples"])]
    K = r["k_max"]
    drift = np.zeros(K + 1)
    spot = 0.0
    for x in xs:
        t0 = trace(x)
        c0 = x.modes.get(0)
        # only mode 0 carries the trace; stream its iterates
        if c0 is not None:
            for k, lo, arr in mode_terms(A, 0, c0, Weight.one(), K + 1):
                v = arr[-lo] if lo <= 0 < lo + arr.size else 0.0
                drift[k] = max(drift[k], abs(v - t0))
        else:
            drift[:] = np.maximum(drift, abs(t0))
        for k in sorted({1, 2, K // 2, K}):
            spot = max(spot, abs(trace(apply_iter(A, x, k)) - t0))
    w.text("trace_drift.csv", _csv(((k, float(d)) for k, d in enumerate(drift)), ["k", "max_abs_dtrace"]))
    if plots:
        from .plotting import line_plot
        w.png(line_plot(os.path.join(w.out_dir, "trace_drift.png"), np.arange(K + 1),
                        {"max |dtau|": np.maximum(drift, 1e-300)}, "k", "max |tau(Phi^k x) - tau(x)|"))
    return {"max_dtrace": float(drift.max()), "max_dtrace_apply_iter": float(spot)}


def _exp_cesaro(r, w: _Writer, threads: int, plots: bool, lam) -> dict:
    A, theta, nu, _ = _setup(r, w)
    a = parse_ncpoly(str(r["a"]), r["alpha"])
    weight = parse_lambda(lam, theta, nu)
    res = cesaro(A, a, weight, r["N"], G=r["G"], threads=threads)
    w.text("cesaro.csv", res.to_csv())
    w.text("averages.json", json.dumps(res.to_json_obj(), sort_keys=True))
    if plots:
        from .plotting import cesaro_plot
        w.png(cesaro_plot(w.out_dir, res))
    last = res.checkpoints[-1]
    return {"N": last.N, "upper_norm": last.upper, "lower_norm": last.lower, "gns_norm": last.gns_norm,
            "limit_dev": last.limit_dev, "candidate": res.candidate.to_json_obj() if res.candidate else None}


def exp_ergodic_average(r, w, threads, plots) -> dict:
    return _exp_cesaro(r, w, threads, plots, "1")


def exp_weighted_average(r, w, threads, plots) -> dict:
    return _exp_cesaro(r, w, threads, plots, r["lambda"])


def exp_spectral_measure(r, w, threads, plots) -> dict:
    from .gns import (GNSVector, atom_mass, correlation, density_csv, density_mass, fejer_density,
                      toeplitz_min_eig)
    A, theta, nu, _ = _setup(r, w)
    xi = GNSVector.of(parse_ncpoly(str(r["vector"]), r["alpha"]))
    N = max(r["N"])
    c = correlation(A, xi, N)
    w.text("correlation.csv", c.to_csv())
    weight = parse_lambda(r["lambda"], theta, nu)
    mass, trace_rows = atom_mass(c, weight, theta)
    w.text("atom_trace.csv", _csv(((M, v.real, v.imag) for M, v in trace_rows), ["N", "re", "im"]))
    angles, dens = fejer_density(c, r["grid"])
    w.text("density.csv", density_csv(angles, dens))
    if plots:
        from .plotting import density_plot
        w.png(density_plot(w.out_dir, angles, dens))
    return {"N": N, "atom_mass": mass, "density_mass": density_mass(dens),
            "density_min": float(dens.min()), "density_max": float(dens.max()),
            "toeplitz_min_eig": toeplitz_min_eig(c)}


def exp_cohomology(r, w, threads, plots) -> dict:
    from .cohomology import character_decision, verdict
    A, theta, nu, _ = _setup(r, w)
    ns = [n for n in range(-r["n_max"], r["n_max"] + 1) if n]
    rep = verdict(theta, r["alpha"], A.f, ns, tuple(r["K"]), threads=threads)
    w.text("cohomology.json", rep.to_json())
    rows = [(n, K, float(g)) for n, m in sorted(rep.per_n.items()) for K, g in zip(m.Ks, m.gaps)]
    w.text("gaps.csv", _csv(rows, ["n", "K", "gap"]))
    out = {"verdict": rep.verdict, "min_gap": rep.min_gap()}
    ch = _character_params(str(r["f"]))
    if ch is not None:
        out["character_decision"] = {str(n): str(character_decision(ch[0], ch[1], theta, r["alpha"], n))
                                     for n in ns}
    if plots:
        from .plotting import gaps_plot
        w.png(gaps_plot(w.out_dir, rep))
    return out


def exp_classical_crosscheck(r, w, threads, plots) -> dict:
    from .classical import TorusPoint, averages_csv, birkhoff, crosscheck_alpha0, orbit, sample_points
    if r["alpha"] != 0.0:
        raise ConfigError("classical-crosscheck needs alpha = 0")
    A, theta, nu, _ = _setup(r, w)
    a = parse_ncpoly(str(r["a"]), 0.0)
    pts = sample_points(np.random.default_rng(r["seed"]), r["samples"])
    res = cesaro(A, a, 1.0, r["N"], G=r["G"], threads=threads)
    rows = []
    for cp in res.checkpoints:
        rows.append((cp.N, crosscheck_alpha0(A, a, cp.N, pts, average=cp.average)))
    w.text("crosscheck.csv", _csv(rows, ["N", "max_deviation"]))
    Nmax = max(r["N"])
    w.text("orbit.csv", orbit(theta, A.f, [pts[0]], Nmax).to_csv())
    if len(a.coeffs) == 1:
        (m, n), coef = next(iter(a.coeffs.items()))
        _, cps = birkhoff(theta, A.f, pts[0], (m, n), 1.0, Nmax)
        w.text("birkhoff.csv", averages_csv([(N, coef * v) for N, v in cps]))
    if plots:
        from .plotting import line_plot
        w.png(line_plot(os.path.join(w.out_dir, "crosscheck.png"), [x[0] for x in rows],
                        {"deviation": [max(x[1], 1e-300) for x in rows]}, "N", "max deviation",
                        logx=True, logy=True))
    return {"max_deviation": max(x[1] for x in rows)}


def exp_counterexample(r, w, threads, plots) -> dict:
    from .cohomology import NoSolution, character_decision
    from .counterexample import (RoughSolution, cohomology_defect, eigenvector, furstenberg_f,
                                 gauge_control, gk_functions, liouville_theta, manifest, oscillation_stat)
    nu = _nu(r)
    ang = liouville_theta(r["levels"])
    theta = ang.theta
    g = RoughSolution.build(ang)
    ft, bound = furstenberg_f(ang, g, nu)
    w.construction = manifest(ang, g, nu, bound)
    w.text("construction.json", json.dumps(w.construction, sort_keys=True))
    h_nc = parse_ncpoly(str(r["h"]), 0.0)
    if set(h_nc.modes) - {0}:
        raise ConfigError("h must be a polynomial in U only")
    h = h_nc.modes.get(0, TrigPoly())
    defect = cohomology_defect(theta, g, ft, nu)
    lv = min(3, r["levels"])
    g_small = RoughSolution.build(ang, lv)
    _, resid = eigenvector(theta, g_small, nu)
    _, resid_neg = eigenvector(theta, g_small, nu, map_theta=GOLDEN_THETA)
    ks = [0, 1, 2, 3, 5, 8, 13]
    g2 = RoughSolution.build(ang, min(2, r["levels"]))
    f2, _ = furstenberg_f(ang, g2, 0.0)
    gk_functions(theta, f2, h if len(h) else TrigPoly.constant(1.0), ks, g2)
    win = tuple(r["window"])
    osc, Ns, vals = oscillation_stat(theta, ft, h, nu, win, r["points"], g=g, return_values=True)
    osc_c, _, vals_c = oscillation_stat(theta, gauge_control(), h, nu, win, r["points"], return_values=True)
    cert = all(character_decision(complex(math.cos(nu), math.sin(nu)), 0, theta, 0.0, n) == NoSolution
               for n in range(-5, 6) if n)
    rows = []
    for label, V in (("liouville", vals), ("gauge_control", vals_c)):
        for i, N in enumerate(Ns):
            for j in range(V.shape[1]):
                rows.append((label, N, j, float(V[i, j].real), float(V[i, j].imag)))
    w.text("oscillation.csv", _csv(rows, ["run", "N", "point", "re", "im"]))
    if plots:
        from .plotting import oscillation_plot
        w.png(oscillation_plot(w.out_dir, Ns, {"Liouville": vals, "gauge control": vals_c}))
    return {"identity_defect": defect, "eigen_residual": resid, "eigen_residual_negative_control": resid_neg,
            "gk_dual_path": "agree", "oscillation": osc, "oscillation_gauge_control": osc_c,
            "gauge_certificate": cert, "tail_bound": bound}


RUNNERS = {
    "trace-invariance": exp_trace_invariance,
    "ergodic-average": exp_ergodic_average,
    "spectral-measure": exp_spectral_measure,
    "cohomology": exp_cohomology,
    "weighted-average": exp_weighted_average,
    "classical-crosscheck": exp_classical_crosscheck,
    "counterexample": exp_counterexample,
}


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def run(cfg: dict, threads: int = 1, out: str | None = None, plots: bool = True) -> dict:
    """Run one experiment and write its outputs; returns the manifest."""
    r = resolve(cfg, out)
    w = _Writer(r["output_dir"])
    t0 = time.perf_counter()
    try:
        summary = RUNNERS[r["experiment"]](r, w, threads, plots)
    except ConfigError:
        raise
    except NCTorusError as exc:
        raise ExperimentError(f"{type(exc).__name__}: {exc}") from exc
    wall = time.perf_counter() - t0
    summary = _jsonable(summary)
    w.text("results.csv", _csv(sorted((k, json.dumps(v) if not isinstance(v, float) else v)
                                      for k, v in summary.items()), ["metric", "value"]))
    construction = w.construction
    manifest = {"config": r, "threads": threads, "version": __version__, "wall_clock_s": wall,
                "summary": summary, "files": w.files + ["manifest.json"], "construction": construction}
    with open(os.path.join(w.out_dir, "manifest.json"), "w") as fh:
        json.dump(_jsonable(manifest), fh, indent=2, sort_keys=True)
    return manifest


def _fail(exc: Exception) -> int:
    code = 2 if isinstance(exc, (ConfigError, ParseError)) else 1
    err = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ParseError):
        err["position"] = exc.position
    print(json.dumps(err), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="nctorus")
    sub = ap.add_subparsers(dest="cmd", required=True)
    p_run = sub.add_parser("run", help="run one experiment")
    p_run.add_argument("config")
    p_run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p_run.add_argument("--threads", type=int, default=1)
    p_run.add_argument("--out")
    p_run.add_argument("--no-plots", action="store_true")
    p_val = sub.add_parser("validate", help="check a config and print it fully resolved")
    p_val.add_argument("config")
    p_val.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    args = ap.parse_args(argv)
    try:
        cfg = apply_sets(load_config(args.config), args.set)
        if args.cmd == "validate":
            print(json.dumps(_jsonable(resolve(cfg)), indent=2, sort_keys=True))
            return 0
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        m = run(cfg, threads=args.threads, out=args.out, plots=not args.no_plots)
        print(json.dumps({"output_dir": m["config"]["output_dir"], "summary": m["summary"]}, sort_keys=True))
        return 0
    except NCTorusError as exc:
        return _fail(exc)
    except Exception as exc:  # anything else still reports as JSON
        return _fail(ExperimentError(f"{type(exc).__name__}: {exc}"))


if __name__ == "__main__":
    sys.exit(main())
