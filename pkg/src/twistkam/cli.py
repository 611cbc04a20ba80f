"""``twistkam`` command line: check, solve, sweep, orbit, regcheck.

Exit codes: 0 ok, 1 hypothesis (or check) failure, 2 config/usage error,
3 solver non-convergence, 4 no singularity for ``--x0 auto``.
"""

from __future__ import annotations

import argparse
import ast
import configparser
import csv
import io
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field

import numpy as np

from twistkam import __version__
from twistkam.generating import (Family, GeneratingFunction, InvalidModelError,
                                 verify_hypotheses)
from twistkam.grid import fmt, to_csv
from twistkam.singular import (alpha_limit_set, default_delta_sing, detect_singularities,
                               propagate_singularity, pseudo_graph, regularization_study,
                               rotation_number, sigma_plus_lift, tent)
from twistkam.weak_kam import SWEEP_HEADER, alpha_sweep, weak_kam_backward

EXIT_OK = 0
EXIT_HYPOTHESIS = 1
EXIT_CONFIG = 2
EXIT_NONCONVERGED = 3
EXIT_NO_SINGULARITY = 4


class ConfigError(Exception):
    pass


SCHEMA = {
    "generating_function": {"family", "K", "fourier_cos", "coupling", "twist_eps", "window"},
    "solver": {"n", "tol", "max_iter", "n_iter_rotation", "delta_sing", "n_steps_alpha_limit"},
    "sweep": {"c_min", "c_max", "c_step", "fd_step", "fd_tol"},
    "output": {"out_dir"},
}


@dataclass
class RunConfig:
    gf: GeneratingFunction = field(default_factory=GeneratingFunction.integrable)
    n: int = 4096
    tol: float = 1e-7
    max_iter: int = 5000
    n_iter_rotation: int = 1000
    delta_sing: float | None = None
    n_steps_alpha_limit: int = 64
    sweep: dict | None = None
    out_dir: str = "."

    @property
    def delta(self) -> float:
        return self.delta_sing if self.delta_sing is not None else default_delta_sing(self.n)


def _value(raw, key):
    raw = raw.strip()
    try:
        return ast.literal_eval(raw)
    except (ValueError, SyntaxError):
        if raw.lower() in ("true", "false"):
            return raw.lower() == "true"
        return raw


def _real(v, key):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key} must be a number, got {v!r}")
    v = float(v)
    if not math.isfinite(v):
        raise ConfigError(f"{key} must be finite")
    return v


def _int(v, key):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{key} must be an integer, got {v!r}")
    return v


def _build_gf(sec):
    fam = sec.get("family", "integrable")
    try:
        family = Family(fam)
    except ValueError:
        raise ConfigError(f"unknown family {fam!r}") from None
    allowed = {"family", "twist_eps", "window"}
    allowed |= {Family.FRENKEL_KONTOROVA: {"K"}, Family.CUSTOM: {"fourier_cos", "coupling"},
                Family.INTEGRABLE: set()}[family]
    extra = set(sec) - allowed
    if extra:
        raise ConfigError(f"key(s) {sorted(extra)} not valid for family {family.value}")
    kw = {}
    if "twist_eps" in sec:
        kw["twist_eps"] = _real(sec["twist_eps"], "twist_eps")
    if "window" in sec:
        kw["window"] = _real(sec["window"], "window")
    try:
        if family is Family.INTEGRABLE:
            return GeneratingFunction.integrable(**kw)
        if family is Family.FRENKEL_KONTOROVA:
            if "K" not in sec:
                raise ConfigError("frenkel_kontorova needs K")
            return GeneratingFunction.frenkel_kontorova(_real(sec["K"], "K"), **kw)
        coeffs = sec.get("fourier_cos", [])
        if not isinstance(coeffs, (list, tuple)):
            raise ConfigError("fourier_cos must be a list")
        coeffs = [_real(a, "fourier_cos") for a in coeffs]
        coupling = _real(sec.get("coupling", 1.0), "coupling")
        return GeneratingFunction.custom(coeffs, coupling, **kw)
    except InvalidModelError as e:
        raise ConfigError(str(e)) from None


def parse_config_text(text, source="<config>") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as e:
        raise ConfigError(f"{source}: {e}") from None
    secs = {}
    for name in cp.sections():
        if name not in SCHEMA:
            raise ConfigError(f"{source}: unknown section [{name}]")
        keys = dict(cp.items(name))
        unknown = set(keys) - SCHEMA[name]
        if unknown:
            raise ConfigError(f"{source}: unknown key(s) {sorted(unknown)} in [{name}]")
        secs[name] = {k: _value(v, k) for k, v in keys.items()}

    cfg = RunConfig()
    if "generating_function" in secs:
        cfg.gf = _build_gf(secs["generating_function"])
    s = secs.get("solver", {})
    if "n" in s:
        cfg.n = _int(s["n"], "n")
    if "tol" in s:
        cfg.tol = _real(s["tol"], "tol")
    if "max_iter" in s:
        cfg.max_iter = _int(s["max_iter"], "max_iter")
    if "n_iter_rotation" in s:
        cfg.n_iter_rotation = _int(s["n_iter_rotation"], "n_iter_rotation")
    if "delta_sing" in s:
        cfg.delta_sing = _real(s["delta_sing"], "delta_sing")
    if "n_steps_alpha_limit" in s:
        cfg.n_steps_alpha_limit = _int(s["n_steps_alpha_limit"], "n_steps_alpha_limit")
    if "sweep" in secs:
        sw = secs["sweep"]
        missing = {"c_min", "c_max", "c_step"} - set(sw)
        if missing:
            raise ConfigError(f"[sweep] missing {sorted(missing)}")
        cfg.sweep = {k: _real(v, k) for k, v in sw.items()}
        if cfg.sweep["c_step"] <= 0:
            raise ConfigError("c_step must be positive")
        if cfg.sweep["c_max"] < cfg.sweep["c_min"]:
            raise ConfigError("c_max must be >= c_min")
        for k in ("fd_step", "fd_tol"):
            if k in cfg.sweep and cfg.sweep[k] <= 0:
                raise ConfigError(f"{k} must be positive")
    if "output" in secs and "out_dir" in secs["output"]:
        cfg.out_dir = str(secs["output"]["out_dir"])
    validate(cfg)
    return cfg


def validate(cfg: RunConfig):
    if cfg.n < 64 or cfg.n & (cfg.n - 1):
        raise ConfigError(f"n must be a power of two >= 64, got {cfg.n}")
    if not cfg.tol > 0:
        raise ConfigError("tol must be positive")
    if cfg.max_iter < 1 or cfg.n_iter_rotation < 1 or cfg.n_steps_alpha_limit < 1:
        raise ConfigError("iteration counts must be positive")
    if cfg.delta_sing is not None and not cfg.delta_sing > 0:
        raise ConfigError("delta_sing must be positive")


def load_config(path) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e.strerror}") from None
    return parse_config_text(text, str(path))


# -- output ----------------------------------------------------------------------------


def write_atomic(path, text):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([v if isinstance(v, str) else (str(v) if isinstance(v, (int, np.integer))
                                                   else fmt(v)) for v in r])
    return buf.getvalue()


# -- commands -----------------------------------------------------------------------------


def _hyp_ok(cfg, c, out):
    rep = verify_hypotheses(cfg.gf, c)
    for line in rep.lines():
        print(line, file=out)
    return rep.all_pass


def cmd_check(cfg: RunConfig, c=0.0, out=None) -> int:
    print(f"family {cfg.gf.family.value}  c={fmt(c)}", file=out)
    ok = _hyp_ok(cfg, c, out)
    print("all hypotheses PASS" if ok else "hypothesis check FAILED", file=out)
    return EXIT_OK if ok else EXIT_HYPOTHESIS


def _solve(cfg, c):
    u, rep = weak_kam_backward(cfg.gf, c, cfg.tol, cfg.max_iter, cfg.n)
    lift = sigma_plus_lift(u, cfg.gf, c, rep.s_bar)
    sing = detect_singularities(u, lift, cfg.delta)
    return u, rep, lift, sing


def cmd_solve(cfg: RunConfig, c, out=None) -> int:
    if not _hyp_ok(cfg, c, io.StringIO()):
        print("hypothesis check FAILED; run `check` for details", file=out)
        return EXIT_HYPOTHESIS
    u, rep, lift, sing = _solve(cfg, c)
    rho, err = rotation_number(lift, 0.0, cfg.n_iter_rotation)
    pg = pseudo_graph(u, cfg.gf, c, cfg.delta, lift=lift)
    d = cfg.out_dir
    write_atomic(os.path.join(d, "solution.csv"), to_csv(u))
    gap = lift.gap if lift.gap is not None else np.full(u.n, np.nan)
    write_atomic(os.path.join(d, "sigma.csv"),
                 _csv(["x", "sigma_x", "gap"], zip(u.nodes, lift.samples, gap)))
    write_atomic(os.path.join(d, "pseudo_graph.csv"),
                 _csv(["x", "p", "kind"], zip(pg.x, pg.p, pg.vertex_kinds())))
    al = alpha_limit_set(u, cfg.gf, c, cfg.n_steps_alpha_limit)
    write_atomic(os.path.join(d, "alpha_limit.csv"),
                 _csv(["x", "p", "inv_residual"], zip(al.x, c + al.p, al.inv_residual)))
    lines = []
    if not rep.converged:
        lines.append("FAILED: solver did not converge")
    lines += [
        f"family = {cfg.gf.family.value}",
        f"c = {fmt(c)}",
        f"n = {cfg.n}",
        f"s_bar = {fmt(rep.s_bar)}",
        f"alpha = {fmt(-rep.s_bar)}",
        f"residual = {fmt(rep.residual)}",
        f"iterations = {rep.iterations}",
        f"converged = {rep.converged}",
        f"delta_sing = {fmt(cfg.delta)}",
        f"singularities_per_period = {len(sing.points)}",
        "singularities = " + " ".join(fmt(x) for x in sing.points),
        "singularities_gap_detector = " + " ".join(fmt(x) for x in sing.by_gap),
        "singularities_plateau_detector = " + " ".join(fmt(x) for x in sing.by_plateau),
        f"detector_disagreements = {len(sing.disagreements)}",
        f"rho_sigma = {fmt(rho)}",
        f"rho_error_bound = {fmt(err)}",
        f"lip_estimate = {fmt(lift.lip_estimate)}",
        f"alpha_limit_points = {al.indices.size}",
        f"alpha_limit_max_inv_residual = {fmt(al.max_residual)}",
    ]
    text = "\n".join(lines) + "\n"
    write_atomic(os.path.join(d, "report.txt"), text)
    (out or sys.stdout).write(text)
    return EXIT_OK if rep.converged else EXIT_NONCONVERGED


def sweep_values(sw):
    c_min, c_max, step = sw["c_min"], sw["c_max"], sw["c_step"]
    k = int(math.floor((c_max - c_min) / step + 1e-9))
    return [c_min + i * step for i in range(k + 1)]


def cmd_sweep(cfg: RunConfig, out=None) -> int:
    if cfg.sweep is None:
        raise ConfigError("sweep needs a [sweep] section with c_min, c_max, c_step")
    cs = sweep_values(cfg.sweep)
    rows = alpha_sweep(cfg.gf, cs, cfg.tol, cfg.n, cfg.max_iter, cfg.n_iter_rotation,
                       fd_step=cfg.sweep.get("fd_step"), fd_tol=cfg.sweep.get("fd_tol"),
                       delta_sing=cfg.delta)
    table = [[r.c, r.alpha, r.s_bar, r.alpha_prime_fd, r.rho_sigma,
              r.residual if r.converged else math.nan, r.iterations] for r in rows]
    write_atomic(os.path.join(cfg.out_dir, "alpha_sweep.csv"), _csv(SWEEP_HEADER, table))
    dev = [abs(r.alpha_prime_fd - r.rho_sigma) for r in rows
           if r.converged and math.isfinite(r.alpha_prime_fd) and math.isfinite(r.rho_sigma)]
    n_ok = sum(r.converged for r in rows)
    print(f"rows = {len(rows)}  converged = {n_ok}", file=out)
    print(f"max |alpha'_fd - rho| = {fmt(max(dev)) if dev else 'nan'}", file=out)
    return EXIT_OK if n_ok >= 0.9 * len(rows) else EXIT_NONCONVERGED


def cmd_orbit(cfg: RunConfig, c, x0, n_steps, out=None) -> int:
    if not _hyp_ok(cfg, c, io.StringIO()):
        print("hypothesis check FAILED; run `check` for details", file=out)
        return EXIT_HYPOTHESIS
    u, rep, lift, sing = _solve(cfg, c)
    if x0 == "auto":
        if not sing.points:
            print("no singularity detected; nothing to propagate", file=out)
            return EXIT_NO_SINGULARITY
        x0 = sing.points[0]
    orb = propagate_singularity(float(x0), u, cfg.gf, c, lift, n_steps, cfg.delta, strict=False)
    write_atomic(os.path.join(cfg.out_dir, "orbit.csv"),
                 _csv(["k", "x_k", "gap_k"], zip(range(n_steps + 1), orb.points, orb.gaps)))
    if not rep.converged:
        print("FAILED: solver did not converge", file=out)
    print(f"x0 = {fmt(x0)}", file=out)
    print(f"rho = {fmt(orb.rho_estimate)}  error_bound = {fmt(orb.rho_error)}", file=out)
    if orb.rational:
        p, q = orb.rational
        print(f"orbit closes: rho = {p}/{q}", file=out)
    print(f"steps with gap <= delta_sing: {len(orb.below_threshold)}", file=out)
    return EXIT_OK if rep.converged else EXIT_NONCONVERGED


def cmd_regcheck(cfg: RunConfig, c=0.0, out=None) -> int:
    grids = (cfg.n // 4, cfg.n // 2, cfg.n)
    study = regularization_study(tent, cfg.gf, c, grids)
    lines = ["n,input_two_sided,t_minus_one_sided,t_minus_two_sided,w_two_sided"]
    for r in study.reports:
        lines.append(",".join([str(r.n), fmt(r.input_two_sided), fmt(r.t_minus_one_sided),
                               fmt(r.t_minus_two_sided), fmt(r.w_two_sided)]))
    lines.append(f"# w bound ratio across grids = {fmt(study.w_ratio)} (pass <= 2)")
    lines.append(f"# input bound growth = {fmt(study.input_growth)} (pass >= 4)")
    lines.append("# PASS" if study.passed() else "# FAIL")
    text = "\n".join(lines) + "\n"
    write_atomic(os.path.join(cfg.out_dir, "regcheck.csv"), text)
    (out or sys.stdout).write(text)
    return EXIT_OK if study.passed() else EXIT_HYPOTHESIS


# -- argument parsing ----------------------------------------------------------------------


def _x0(s):
    if s == "auto":
        return s
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"x0 must be a real or 'auto', got {s!r}") from None
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError("x0 must be finite")
    return v


def _finite(s):
    v = float(s)
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError("value must be finite")
    return v


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="config file path")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("--grid", type=int, default=argparse.SUPPRESS,
                        help="grid size n (overrides the config)")

    p = argparse.ArgumentParser(prog="twistkam", parents=[common],
                                description="Weak KAM solutions and singular dynamics of twist maps.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("check", parents=[common], help="verify the model hypotheses")
    s.add_argument("--c", type=_finite, default=0.0)
    s = sub.add_parser("solve", parents=[common], help="solve at one cohomology class")
    s.add_argument("--c", type=_finite, required=True)
    sub.add_parser("sweep", parents=[common], help="alpha-function sweep")
    s = sub.add_parser("orbit", parents=[common], help="propagate a singularity")
    s.add_argument("--c", type=_finite, required=True)
    s.add_argument("--x0", type=_x0, required=True)
    s.add_argument("--n", type=int, required=True, dest="n_steps", help="number of steps")
    s = sub.add_parser("regcheck", parents=[common], help="C^{1,1} refinement study")
    s.add_argument("--c", type=_finite, default=0.0)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(getattr(args, "config", None))
        if hasattr(args, "grid"):
            cfg.n = args.grid
        if hasattr(args, "out"):
            cfg.out_dir = args.out
        validate(cfg)
        if args.command == "check":
            return cmd_check(cfg, args.c)
        if args.command == "solve":
            return cmd_solve(cfg, args.c)
        if args.command == "sweep":
            return cmd_sweep(cfg)
        if args.command == "orbit":
            if args.n_steps < 1:
                raise ConfigError("--n must be a positive integer")
            return cmd_orbit(cfg, args.c, args.x0, args.n_steps)
        return cmd_regcheck(cfg, args.c)
    except ConfigError as e:
        print(f"twistkam: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
