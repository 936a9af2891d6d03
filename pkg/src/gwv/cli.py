"""Command-line front end.

Every command writes a CSV report (to ``--out`` or stdout).  The exit
status is 0 when every row with an expected value is within tolerance,
1 when some check fails, and 2 for a bad configuration.
"""

import argparse
import csv
import io as _io
import json
import sys
from dataclasses import dataclass, field

import numpy as np

from . import io as gio
from . import scenes
from ._util import set_threads
from .curves import willmore_energy
from .measures import abs_integrand, power_integrand, sqrt1_integrand
from .relaxation import OpenLevelError, coarea_check, f_energy, minvu_gap
from .report import Row, all_passed, info_row, rel_row, to_csv
from .varifolds import estimate_curvature, singular_ratio, willmore
from .young import pairing

MIN_GRID = 64
MIN_LEVELS = 8
MIN_SAMPLES = 64


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    inputs: dict = field(default_factory=dict)
    p: float = None
    grid: int = None
    levels: int = None
    samples: int = None
    tolerance: float = None
    out: str = None
    threads: int = None

    def validate(self):
        if self.p is not None and not self.p > 1:
            raise ConfigError("p must exceed 1")
        if self.grid is not None and self.grid < MIN_GRID:
            raise ConfigError(f"grid must be at least {MIN_GRID}")
        if self.levels is not None and self.levels < MIN_LEVELS:
            raise ConfigError(f"levels must be at least {MIN_LEVELS}")
        if self.samples is not None and self.samples < MIN_SAMPLES:
            raise ConfigError(f"curve samples must be at least {MIN_SAMPLES}")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads must be positive")
        if self.tolerance is not None and not self.tolerance >= 0:
            raise ConfigError("tolerance must be nonnegative")


def _load(path, reader):
    try:
        return reader(gio.load(path))
    except FileNotFoundError:
        raise ConfigError(f"no such file: {path}") from None
    except (KeyError, ValueError, TypeError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read {path}: {e}") from None


def _expect(rows, quantity, value, cfg, provenance="[user]"):
    """Append the value row, checked against ``--expected`` when given."""
    exp = cfg.inputs.get("expected")
    if exp is None:
        rows.append(info_row(quantity, value))
    else:
        rtol = cfg.tolerance if cfg.tolerance is not None else 1e-6
        rows.append(rel_row(quantity, value, exp, rtol, provenance))
    return rows


def _override_tol(rows, tol):
    if tol is None:
        return rows
    out = []
    for r in rows:
        if r.expected is None or isinstance(r.expected, bool):
            out.append(r)
        else:
            out.append(Row(r.quantity, r.value, r.expected, r.provenance,
                           tol * max(abs(float(r.expected)), 1.0)))
    return out


def _integrand(name):
    if name == "abs":
        return abs_integrand()
    if name == "sqrt1":
        return sqrt1_integrand()
    if name.startswith("power:"):
        return power_integrand(float(name.split(":", 1)[1]))
    raise ConfigError(f"unknown integrand {name!r} (abs, sqrt1, power:<p>)")


def _field(cfg):
    src = cfg.inputs.get("field")
    builtin = cfg.inputs.get("builtin")
    n = cfg.grid or 256
    if src:
        return _load(src, gio.field_from_json)
    if builtin == "bowl":
        return scenes.bowl_field(n)
    if builtin == "smoothed_disk":
        return scenes.smoothed_disk_field(n)
    if builtin == "quartic":
        return scenes.quartic_field(n)
    raise ConfigError("give --field or --builtin")


# commands -------------------------------------------------------------------

def cmd_scene_run(cfg):
    name = cfg.inputs["name"]
    reg = scenes.registry()
    if not reg:
        raise ConfigError("no scenes compiled")
    if name not in reg:
        raise ConfigError(f"unknown scene {name!r}")
    rows = scenes.run_scene(name, cfg.p)
    pts = cfg.inputs.get("emit_points")
    if pts:
        with open(pts, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("label", "x", "y"))
            for lab, x, y in scenes.scene_points(name):
                w.writerow((lab, format(float(x), ".17g"), format(float(y), ".17g")))
    return _override_tol(rows, cfg.tolerance)


def cmd_list(cfg):
    reg = scenes.registry()
    if not reg:
        raise ConfigError("no scenes compiled")
    entries = []
    for e in reg.values():
        entries.append({"name": e.name, "description": e.description, "p": e.default_p,
                        "expected": [{"quantity": q, "value": v, "provenance": pv}
                                     for q, v, pv in e.expectations]})
    if cfg.inputs.get("json"):
        return json.dumps(entries, indent=2) + "\n"
    lines = []
    for e in entries:
        lines.append(f"{e['name']:<16} p={e['p']:g}  {e['description']}")
        for x in e["expected"]:
            lines.append(f"{'':<18}{x['quantity']} = {x['value']}  {x['provenance']}")
    return "\n".join(lines) + "\n"


def cmd_curve_energy(cfg):
    system = _load(cfg.inputs["system"], gio.system_from_json)
    W = willmore_energy(system, cfg.p)
    rows = [info_row("curves", len(system)), info_row("length", sum(c.length * c.multiplicity for c in system))]
    return _expect(rows, "W(Gamma)", W, cfg)


def cmd_ym_pair(cfg):
    nu = _load(cfg.inputs["ym"], gio.young_from_json)
    f = _integrand(cfg.inputs["f"])
    return _expect([info_row("lambda mass", nu.lambda_mass())], f"<<nu, {f.name}>>", pairing(nu, f), cfg)


def cmd_ym_identify(cfg):
    return _override_tol(scenes.identification_rows(cfg.inputs["kind"]), cfg.tolerance)


def cmd_varifold_energy(cfg):
    V = _load(cfg.inputs["varifold"], gio.varifold_from_json)
    if V.curvature is None:
        V = V.with_curvature(estimate_curvature(V).H)
    rows = [info_row("mass", V.mass())]
    return _expect(rows, "W(V)", willmore(V, cfg.p), cfg)


def cmd_varifold_curvature(cfg):
    V = _load(cfg.inputs["varifold"], gio.varifold_from_json)
    kw = {} if cfg.inputs.get("reg") is None else {"reg": cfg.inputs["reg"]}
    est = estimate_curvature(V, **kw)
    out = cfg.inputs.get("curvature_out")
    if out:
        gio.save(V.with_curvature(est.H), out)
    Hn = np.hypot(est.H[:, 0], est.H[:, 1])
    rows = [info_row("particles", len(V)), info_row("residual", est.residual),
            info_row("residual / mass", est.residual / V.mass()),
            info_row("weighted mean |H|", float(np.sum(V.weights * Hn) / V.mass()))]
    return _expect(rows, "weighted mean |H|", float(np.sum(V.weights * Hn) / V.mass()), cfg) if \
        cfg.inputs.get("expected") is not None else rows


def cmd_singular_ratio(cfg):
    V = _load(cfg.inputs["varifold"], gio.varifold_from_json)
    radii = cfg.inputs.get("radii") or list(scenes.RATIO_RADII)
    try:
        prof = singular_ratio(V, cfg.inputs["center"], radii)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    rows = [info_row(f"ratio r={r:g}", q) for r, q in zip(prof.radii, prof.ratios)]
    rows += [info_row(f"growth {a:g}->{b:g}", g) for a, b, g in zip(prof.radii, prof.radii[1:], prof.growth)]
    rows.append(info_row("relative variation", float((prof.ratios.max() - prof.ratios.min()) / prof.ratios.max())))
    return rows


def cmd_coarea_check(cfg):
    u = _field(cfg)
    n_levels = cfg.levels or 40
    builtin = cfg.inputs.get("builtin")
    t = cfg.inputs.get("t")
    if t is None:
        if builtin == "smoothed_disk":
            t = scenes.smoothed_disk_levels(n_levels)
        elif builtin == "bowl":
            t = scenes.bowl_levels(n_levels)
        else:
            lo, hi = float(np.min(u.values)), float(np.max(u.values))
            t = lo + (hi - lo) * (np.arange(n_levels) + 0.5) / n_levels
    try:
        rep = coarea_check(u, cfg.p, t)
    except OpenLevelError as e:
        raise ConfigError(f"scene policy: {e}") from None
    tol = 0.02 if cfg.tolerance is None else cfg.tolerance
    return [info_row("F direct", rep.F_direct), info_row("F levels", rep.F_levels),
            Row("coarea gap", rep.gap, 0.0, "[DERIVED] coarea identity", tol)]


def cmd_f_energy(cfg):
    u = _field(cfg)
    rows = [info_row("grid", u.shape[0])]
    return _expect(rows, "F(u)", f_energy(u, cfg.p), cfg)


def cmd_minvu(cfg):
    path = cfg.inputs.get("scene")
    if path:
        spec = _load(path, lambda d: d)
        name = spec.get("name")
        p = spec.get("p", cfg.p)
    else:
        name, p = cfg.inputs.get("name"), cfg.p
    if name not in ("cusp", "cross", "smooth"):
        raise ConfigError(f"minvu supports the cusp, cross and smooth scenes, not {name!r}")
    if p is not None and not p > 1:
        raise ConfigError("p must exceed 1")
    rows = scenes.run_scene(name, p)
    keep = ("candidate", "F_bar", "min W", "(F_bar", "|F - W|", "F(u)", "W(V_nu_Du)", "mu_V")
    return _override_tol([r for r in rows if r.quantity.startswith(keep)], cfg.tolerance)


COMMANDS = {
    "list": cmd_list,
    "curve-energy": cmd_curve_energy,
    "ym-pair": cmd_ym_pair,
    "ym-identify": cmd_ym_identify,
    "varifold-energy": cmd_varifold_energy,
    "varifold-curvature": cmd_varifold_curvature,
    "singular-ratio": cmd_singular_ratio,
    "coarea-check": cmd_coarea_check,
    "minvu": cmd_minvu,
    "f-energy": cmd_f_energy,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser():
    ap = _Parser(prog="gwv", description="Willmore-type energies of measures, curves and varifolds")
    ap.add_argument("--threads", type=int, default=None)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, p=True, p_default=None):
        if p:
            sp.add_argument("--p", type=float, default=p_default)
        sp.add_argument("--out", default=None)
        sp.add_argument("--tol", type=float, default=None, dest="tolerance")
        sp.add_argument("--threads", type=int, default=None, dest="sub_threads")
        return sp

    sc = sub.add_parser("scene")
    scs = sc.add_subparsers(dest="scene_command", required=True, parser_class=_Parser)
    run = common(scs.add_parser("run"))
    run.add_argument("--name", required=True)
    run.add_argument("--emit-points", default=None)

    ls = sub.add_parser("list")
    ls.add_argument("--json", action="store_true")
    ls.add_argument("--out", default=None)

    ce = common(sub.add_parser("curve-energy"), p_default=2.0)
    ce.add_argument("--system", required=True)
    ce.add_argument("--expected", type=float, default=None)
    ce.add_argument("--samples", type=int, default=None)

    yp = common(sub.add_parser("ym-pair"), p=False)
    yp.add_argument("--ym", required=True)
    yp.add_argument("--f", default="abs")
    yp.add_argument("--expected", type=float, default=None)

    yi = common(sub.add_parser("ym-identify"), p=False)
    yi.add_argument("--kind", required=True, choices=["osc", "conc", "concdiff"])

    ve = common(sub.add_parser("varifold-energy"), p_default=2.0)
    ve.add_argument("--varifold", required=True)
    ve.add_argument("--expected", type=float, default=None)

    vc = common(sub.add_parser("varifold-curvature"), p=False)
    vc.add_argument("--varifold", required=True)
    vc.add_argument("--reg", type=float, default=None)
    vc.add_argument("--curvature-out", default=None)
    vc.add_argument("--expected", type=float, default=None)

    sr = common(sub.add_parser("singular-ratio"), p=False)
    sr.add_argument("--varifold", required=True)
    sr.add_argument("--center", type=float, nargs=2, default=(0.0, 0.0))
    sr.add_argument("--radii", type=float, nargs="+", default=None)

    for name in ("coarea-check", "f-energy"):
        c = common(sub.add_parser(name), p_default=2.0)
        c.add_argument("--field", default=None)
        c.add_argument("--builtin", choices=["bowl", "smoothed_disk", "quartic"], default=None)
        c.add_argument("--grid", type=int, default=None)
        c.add_argument("--expected", type=float, default=None)
        if name == "coarea-check":
            c.add_argument("--levels", type=int, default=None)

    mv = common(sub.add_parser("minvu"))
    mv.add_argument("--scene", default=None)
    mv.add_argument("--name", default=None)
    return ap


_NOT_INPUTS = {"command", "scene_command", "p", "grid", "levels", "samples", "tolerance", "out",
               "threads", "sub_threads"}


def config_from_args(argv):
    args = vars(build_parser().parse_args(argv))
    cmd = args["command"]
    if cmd == "scene":
        cmd = "scene run"
    threads = args.get("sub_threads")
    if threads is None:
        threads = args.get("threads")
    cfg = RunConfig(cmd, {k: v for k, v in args.items() if k not in _NOT_INPUTS}, args.get("p"),
                    args.get("grid"), args.get("levels"), args.get("samples"), args.get("tolerance"),
                    args.get("out"), threads)
    cfg.validate()
    return cfg


def run(cfg):
    """Execute a configuration; returns (exit status, report text)."""
    if cfg.threads is not None:
        set_threads(cfg.threads)
    try:
        fn = cmd_scene_run if cfg.command == "scene run" else COMMANDS[cfg.command]
        result = fn(cfg)
    finally:
        if cfg.threads is not None:
            set_threads(None)
    if isinstance(result, str):
        return 0, result
    return (0 if all_passed(result) else 1), to_csv(result)


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = config_from_args(argv)
        status, text = run(cfg)
    except ConfigError as e:
        print(f"gwv: error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"gwv: error: {e}", file=sys.stderr)
        return 2
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if status:
        failed = [ln for ln in _io.StringIO(text).read().splitlines() if ln.endswith(",FAIL")]
        for ln in failed:
            print(f"gwv: check failed: {ln}", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
