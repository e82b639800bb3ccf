"""Configuration-driven experiment runner and report emitter.

Subcommands are thin wrappers over the library operations; a config file
(key/value text with nested sections, or JSON) drives multi-experiment runs.
All outputs are deterministic: CSV with a fixed header, comma separator,
LF endings and %.12g number formatting; JSON with sorted keys.  Kernel
subcommands additionally render a figure next to each CSV unless
--no-figures is given.

Exit codes: 0 all checks pass, 1 a pass-gated check failed, 2 usage or
config error, 3 numerical failure inside an operation.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, KatospecError
from .free_kernels import br0_kernel_sep, heat0, poisson0
from .grids import build_support_grid
from .potentials import Potential, Primitive, diagnostics, kato_norm
from .propagators import (bochner_riesz_pc, build_spectral_quadrature,
                          heat_pc, poisson_pc, wave_T)
from .bound_states import find_bound_states, states_report
from .birman_schwinger import bs_report, count_negative_bound_states
from .bounds_harness import (br_decay_slope, check_heat_domination,
                             check_k2_decay, check_poisson_domination,
                             l2_br_norm, separation_pairs, tau_T_mass)

#: grid/quadrature scale factors per tolerance profile
PROFILES = {"fast": 0.75, "default": 1.0, "strict": 1.5}


# ---------------------------------------------------------------------------
# deterministic serialization
# ---------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    if isinstance(v, complex):
        return f"{v.real:.12g}{v.imag:+.12g}j"
    return str(v)


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) for v in row) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(f"{float(obj):.12g}")
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    return obj


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(_jsonable(obj), f, sort_keys=True, indent=2)
        f.write("\n")


def save_kernel_figure(path, slices, title):
    """|kernel| versus separation, one line per parameter value."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    fig, ax = plt.subplots(figsize=(6, 4))
    for ks in slices:
        ax.semilogy(ks.geom.sep, np.maximum(np.abs(ks.values), 1e-300),
                    marker="o", ms=3,
                    label=f"{ks.kind} {ks.parameter}")
    ax.set_xlabel("|x - y|")
    ax.set_ylabel("|kernel|")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata={"Software": "katospec"})
    plt.close(fig)


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

def _parse_scalar(tok):
    tok = tok.strip()
    if tok.startswith('"') and tok.endswith('"'):
        return tok[1:-1]
    if tok in ("true", "false"):
        return tok == "true"
    try:
        return int(tok)
    except ValueError:
        pass
    try:
        return float(tok)
    except ValueError as exc:
        raise ConfigError(f"cannot parse value {tok!r}") from exc


def _parse_value(tok):
    tok = tok.strip()
    if tok.startswith("[") and tok.endswith("]"):
        inner = tok[1:-1].strip()
        return [] if not inner else [_parse_scalar(t) for t in inner.split(",")]
    return _parse_scalar(tok)


def parse_config_text(text):
    """Minimal nested key/value format: [section.sub] headers, key = value
    lines, values are strings, numbers, booleans, or flat arrays."""
    root = {}
    section = root
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = root
            for part in line[1:-1].strip().split("."):
                section = section.setdefault(part, {})
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln}: expected key = value")
        key, val = line.split("=", 1)
        section[key.strip()] = _parse_value(val)
    return root


def load_config(path):
    p = Path(path)
    if not p.exists():
        # fall back to the configs shipped with the package
        bundled = Path(__file__).parent / "configs" / f"{path}.cfg"
        if bundled.exists():
            p = bundled
        else:
            raise ConfigError(f"config not found: {path}")
    text = p.read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(str(exc)) from exc
    return parse_config_text(text)


def potential_from_config(cfg):
    prims = []
    for name in sorted(k for k in cfg if k.startswith("primitive")):
        sec = cfg[name]
        try:
            prims.append(Primitive(shape=sec["shape"],
                                   amplitude=float(sec["amplitude"]),
                                   width=float(sec["width"]),
                                   center=tuple(sec.get("center", (0, 0, 0)))))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad primitive {name}: {exc}") from exc
    return Potential(primitives=prims)


# ---------------------------------------------------------------------------
# shared setup
# ---------------------------------------------------------------------------

def _setup(args, cfg=None):
    scale = PROFILES[args.tol_profile]
    pot_cfg = (cfg or {}).get("potential")
    if pot_cfg is not None:
        p = potential_from_config(pot_cfg)
    elif getattr(args, "shape", None):
        p = Potential(primitives=[Primitive(shape=args.shape,
                                            amplitude=args.amplitude,
                                            width=args.width)])
    else:
        p = Potential(primitives=[])
    grid_cfg = (cfg or {}).get("grid", {})
    radial = int(round(grid_cfg.get("radial_order", 24) * scale))
    g = build_support_grid(p, radial_order=max(radial, 8))
    q_cfg = (cfg or {}).get("quadrature", {})
    eta_max = float(q_cfg.get("eta_max", getattr(args, "eta_max", 30.0)))
    osc = float(q_cfg.get("osc_scale", getattr(args, "osc_scale", 1.0)))
    sq = build_spectral_quadrature(eta_max=eta_max, osc_scale=osc * scale)
    return p, g, sq, scale


def _slice_csv(path, slices):
    rows = []
    for ks in slices:
        rows.extend(ks.to_csv_rows())
    write_csv(path, ["sep", "x_norm", "y_norm", "value", "im_residual",
                     "kind", "parameter"], rows)


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_kato(args):
    p, g, sq, _ = _setup(args)
    diag = diagnostics(p)
    out = _out_dir(args)
    write_json(out / "kato.json", {
        "kato_norm": diag.kato_norm,
        "local_modulus": [{"eps": e, "value": v}
                          for e, v in sorted(diag.local_modulus.items())],
        "distal_modulus": [{"R": r, "value": v}
                           for r, v in sorted(diag.distal_modulus.items())]})
    write_csv(out / "kato.csv", ["quantity", "parameter", "value"],
              [("kato_norm", 0.0, diag.kato_norm)]
              + [("local_modulus", e, v)
                 for e, v in sorted(diag.local_modulus.items())]
              + [("distal_modulus", r, v)
                 for r, v in sorted(diag.distal_modulus.items())])
    print(f"kato_norm={diag.kato_norm:.6g}")
    return 0


def cmd_spectrum(args):
    p, g, sq, _ = _setup(args)
    kcap = math.sqrt(max(-float(np.min(p.radial_profile(
        np.linspace(0, p.support_radius, 256)))), 0.0) + 0.25) + 0.5 \
        if p.primitives else 1.0
    states = find_bound_states(p, g, kcap) if p.primitives else []
    count = count_negative_bound_states(p, g)
    out = _out_dir(args)
    rep = states_report(states)
    write_json(out / "spectrum.json", {"count": count, "states": rep})
    write_csv(out / "spectrum.csv",
              ["lambda_k", "kappa", "l", "m", "residual"],
              [(s["lambda_k"], s["kappa"], s["l"], s["m"], s["residual"])
               for s in rep])
    for s in rep:
        print(f"lambda={s['lambda_k']:.8g} (l={s['l']}, m={s['m']})")
    print(f"count={count}")
    return 0


def cmd_assume(args):
    p, g, sq, _ = _setup(args)
    rep = bs_report(p, g, lambda_max=args.lambda_max)
    out = _out_dir(args)
    write_json(out / "assume.json", rep)
    write_csv(out / "assume.csv", ["lambda", "sigma_min"],
              [(e["lambda"], e["sigma_min"]) for e in rep["embedded_scan"]])
    print(f"sigma_min={rep['sigma_min_zero']:.6g} "
          f"regular={'true' if rep['regular'] else 'false'}")
    return 0


def _kernel_cmd(args, kind):
    p, g, sq, _ = _setup(args)
    pairs = separation_pairs(args.seps)
    slices = []
    if kind == "heat":
        slices = [heat_pc(p, g, sq, t, pairs) for t in args.t]
    elif kind == "poisson":
        slices = [poisson_pc(p, g, sq, t, pairs) for t in args.t]
    elif kind == "wave":
        slices = [wave_T(p, g, sq, tau, pairs) for tau in args.tau]
    elif kind == "br":
        slices = [bochner_riesz_pc(p, g, None, a, args.lambda0, pairs)
                  for a in args.alpha]
    out = _out_dir(args)
    _slice_csv(out / f"{kind}.csv", slices)
    if not args.no_figures:
        save_kernel_figure(out / f"{kind}.png", slices, f"{kind} kernel")
    for ks in slices:
        peak = float(np.max(np.abs(ks.values)))
        print(f"{ks.kind} parameter={ks.parameter} max|K|={peak:.6g}")
    return 0


def cmd_verify(args):
    """Small deterministic acceptance slice: free-kernel identities, the
    square-well spectrum, and a Kato-norm closed form."""
    if args.suite != "small":
        raise ConfigError(f"unknown suite {args.suite!r}")
    out = _out_dir(args)
    rows, checks = [], []

    p0 = Potential(primitives=[])
    g0 = build_support_grid(p0)
    sq = build_spectral_quadrature(eta_max=20.0, osc_scale=2.0)
    pairs = separation_pairs([0.5, 2.0])
    for t in (0.25, 1.0):
        ks = heat_pc(p0, g0, sq, t, pairs)
        for j, (x, y) in enumerate(ks.geom.pairs):
            ref = heat0(t, x, y)
            err = abs(ks.values[j] - ref) / ref
            rows.append(("free_heat", t, ks.geom.sep[j], ks.values[j], err))
            checks.append(("free_heat", err <= 1e-3))
        kp = poisson_pc(p0, g0, sq, t, pairs)
        for j, (x, y) in enumerate(kp.geom.pairs):
            ref = poisson0(t, x, y)
            err = abs(kp.values[j] - ref) / ref
            rows.append(("free_poisson", t, kp.geom.sep[j], kp.values[j], err))
            checks.append(("free_poisson", err <= 1e-3))

    psw = Potential(primitives=[Primitive("square_well", -4.0, 1.0)])
    gsw = build_support_grid(psw)
    states = find_bound_states(psw, gsw, 2.5)
    count = count_negative_bound_states(psw, gsw)
    checks.append(("square_well_count", count == 1 and len(states) == 1))
    for s in states:
        rows.append(("square_well_state", 0.0, 0.0, s.lambda_k, s.residual))
        checks.append(("square_well_residual", s.residual <= 1e-6))

    kn = kato_norm(Potential(primitives=[Primitive("gaussian", 1.0, 1.0)]))
    rows.append(("kato_norm_gaussian", 0.0, 0.0, kn, abs(kn - 2 * math.pi)))
    checks.append(("kato_norm_gaussian", abs(kn - 2 * math.pi) <= 1e-3))

    passed = all(ok for _, ok in checks)
    write_csv(out / "verify_small.csv",
              ["check", "parameter", "sep", "value", "error"], rows)
    write_json(out / "verify_small.json",
               {"suite": "small", "pass": passed,
                "checks": [{"name": n, "pass": ok} for n, ok in checks]})
    print(f"verify small: {'pass' if passed else 'FAIL'} "
          f"({sum(ok for _, ok in checks)}/{len(checks)})")
    return 0 if passed else 1


# ---------------------------------------------------------------------------
# config-driven runs
# ---------------------------------------------------------------------------

def _run_experiment(name, exp, p, g, sq, out, no_figures):
    op = exp.get("op")
    if op is None:
        raise ConfigError(f"experiment {name}: missing op")
    pairs = separation_pairs(exp.get("seps", [0.5, 1.0, 2.0, 4.0]))
    stem = exp.get("out", name)
    passed = True
    if op in ("heat", "poisson", "wave"):
        params = exp.get("t", exp.get("tau", [1.0]))
        fn = {"heat": heat_pc, "poisson": poisson_pc, "wave": wave_T}[op]
        slices = [fn(p, g, sq, float(v), pairs) for v in params]
        _slice_csv(out / f"{stem}.csv", slices)
        if not no_figures:
            save_kernel_figure(out / f"{stem}.png", slices, f"{op} kernel")
    elif op == "br":
        slices = [bochner_riesz_pc(p, g, None, float(a),
                                   float(exp.get("lambda0", 4.0)), pairs)
                  for a in exp.get("alpha", [0.0])]
        _slice_csv(out / f"{stem}.csv", slices)
        if not no_figures:
            save_kernel_figure(out / f"{stem}.png", slices, "br kernel")
    elif op == "kato":
        diag = diagnostics(p)
        write_json(out / f"{stem}.json", {"kato_norm": diag.kato_norm})
    elif op == "spectrum":
        kcap = float(exp.get("kappa_max", 3.0))
        states = find_bound_states(p, g, kcap) if p.primitives else []
        write_json(out / f"{stem}.json",
                   {"count": count_negative_bound_states(p, g),
                    "states": states_report(states)})
    elif op == "assume":
        rep = bs_report(p, g, lambda_max=float(exp.get("lambda_max", 25.0)))
        write_json(out / f"{stem}.json", rep)
        passed = bool(rep["regular"])
    elif op in ("poisson_domination", "heat_domination", "k2_decay",
                "br_slope", "l2_br", "tau_T_mass"):
        t_list = [float(v) for v in exp.get("t", [0.5, 1.0, 2.0])]
        if op == "poisson_domination":
            rep = check_poisson_domination(p, g, sq, t_list, pairs,
                                           mode=exp.get("mode"))
        elif op == "heat_domination":
            rep = check_heat_domination(p, g, sq, t_list, pairs,
                                        mode=exp.get("mode"))
        elif op == "k2_decay":
            states = find_bound_states(p, g, float(exp.get("kappa_max", 3.0)))
            rep = check_k2_decay(p, g, states, exp.get("mode", "poisson"),
                                 eps=float(exp.get("eps", 0.1)))
        elif op == "br_slope":
            rep = br_decay_slope(p, g, None, float(exp.get("alpha", 0.0)),
                                 float(exp.get("lambda0", 4.0)))
        elif op == "l2_br":
            rep = l2_br_norm(p, g, None, float(exp.get("alpha", 0.0)),
                             float(exp.get("lambda0", 4.0)))
        else:
            rep = tau_T_mass(p, g, sq, pairs,
                             tau_max=float(exp.get("tau_max", 2.0)))
        write_json(out / f"{stem}.json", rep.to_json())
        write_csv(out / f"{stem}.csv", ["param", "pair", "ratio"],
                  [(e["param"], e["pair"], e["ratio"])
                   for e in rep.ratio_grid])
        passed = rep.passed
    else:
        raise ConfigError(f"experiment {name}: unknown op {op!r}")
    return passed


def cmd_run(args):
    cfg = load_config(args.config)
    p, g, sq, _ = _setup(args, cfg)
    out = _out_dir(args)
    failures = []
    for name in sorted(k for k in cfg if k.startswith("experiment")):
        ok = _run_experiment(name, cfg[name], p, g, sq, out, args.no_figures)
        print(f"{name}: {'pass' if ok else 'FAIL'}")
        if not ok:
            failures.append(name)
    write_json(out / "run_summary.json",
               {"config": str(args.config), "failures": failures,
                "pass": not failures})
    return 0 if not failures else 1


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_common(sp):
    sp.add_argument("--out", default="out", help="output directory")
    sp.add_argument("--threads", type=int, default=0,
                    help="cap the BLAS worker pool (0 = leave unchanged)")
    sp.add_argument("--tol-profile", dest="tol_profile", default="default",
                    choices=sorted(PROFILES))
    sp.add_argument("--no-figures", action="store_true")


def _add_potential(sp):
    sp.add_argument("--shape", choices=["gaussian", "square_well", "exp_decay"])
    sp.add_argument("--amplitude", type=float, default=-1.0)
    sp.add_argument("--width", type=float, default=1.0)
    sp.add_argument("--eta-max", dest="eta_max", type=float, default=30.0)
    sp.add_argument("--osc-scale", dest="osc_scale", type=float, default=1.0)


def build_parser():
    ap = argparse.ArgumentParser(prog="katospec", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    for name in ("kato", "spectrum", "assume"):
        sp = sub.add_parser(name)
        _add_common(sp)
        _add_potential(sp)
        if name == "assume":
            sp.add_argument("--lambda-max", dest="lambda_max", type=float,
                            default=25.0)

    for name in ("heat", "poisson"):
        sp = sub.add_parser(name)
        _add_common(sp)
        _add_potential(sp)
        sp.add_argument("--t", type=float, nargs="+", default=[1.0])
        sp.add_argument("--seps", type=float, nargs="+",
                        default=[0.5, 1.0, 2.0, 4.0])

    sp = sub.add_parser("wave")
    _add_common(sp)
    _add_potential(sp)
    sp.add_argument("--tau", type=float, nargs="+", default=[1.0])
    sp.add_argument("--seps", type=float, nargs="+", default=[2.5, 3.0, 3.5])

    sp = sub.add_parser("br")
    _add_common(sp)
    _add_potential(sp)
    sp.add_argument("--alpha", type=float, nargs="+", default=[0.0])
    sp.add_argument("--lambda0", type=float, default=4.0)
    sp.add_argument("--seps", type=float, nargs="+", default=[2.5, 5.0, 10.0])

    sp = sub.add_parser("verify")
    _add_common(sp)
    sp.add_argument("--suite", default="small")

    sp = sub.add_parser("run")
    _add_common(sp)
    sp.add_argument("--config", required=True)
    return ap


def _cap_threads(n):
    if n and n > 0:
        try:
            from threadpoolctl import threadpool_limits
            threadpool_limits(limits=n)
        except ImportError:
            pass


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    _cap_threads(args.threads)
    handlers = {"kato": cmd_kato, "spectrum": cmd_spectrum,
                "assume": cmd_assume, "verify": cmd_verify, "run": cmd_run,
                "heat": lambda a: _kernel_cmd(a, "heat"),
                "poisson": lambda a: _kernel_cmd(a, "poisson"),
                "wave": lambda a: _kernel_cmd(a, "wave"),
                "br": lambda a: _kernel_cmd(a, "br")}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except KatospecError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
