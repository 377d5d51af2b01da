"""Command-line front end.

    decoupling-lab SUBCOMMAND [--config FILE] [--out DIR] [--workers N] [--section.key=VALUE ...]

Subcommands: gen, norm, decompose, verify, sweep, suite.  Exit status 0 when
every certificate or invariant passes, 2 when at least one fails (artifacts
are still written), 1 on usage or configuration errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

from .config import ConfigError, RunConfig, load_config, parse_value, resolve_workers
from .geometry import Ambient, GeometryError, origin_cube

log = logging.getLogger("decoupling_lab")

SUBCOMMANDS = ("gen", "norm", "decompose", "verify", "sweep", "suite")
EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{message}\n{self.format_usage()}")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="decoupling-lab", description=__doc__.split("\n\n")[0],
                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("command", choices=SUBCOMMANDS, help="what to run")
    ap.add_argument("--config", help="JSON run configuration (defaults are used when omitted)")
    ap.add_argument("--out", help="output directory (overrides output.dir)")
    ap.add_argument("--workers", type=int, help="worker threads (DECOUPLING_LAB_WORKERS wins over this)")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="dot-path override, e.g. --set norms.p=4 (same as --norms.p=4)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def split_overrides(extra: list[str], explicit: list[str]) -> dict:
    out = {}
    for item in explicit:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key=value")
        k, v = item.split("=", 1)
        out[k] = parse_value(v)
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--") or "." not in tok.split("=", 1)[0]:
            raise ConfigError(f"unrecognized argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, val = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise ConfigError(f"override {tok} needs a value")
            val = extra[i + 1]
            i += 2
        out[key] = parse_value(val)
    return out


# -- helpers ---------------------------------------------------------------

def _ambient(cfg: RunConfig, D: int | None = None, n: int | None = None) -> Ambient:
    a = cfg.ambient
    D = D or a.D
    D0 = min(a.D0, D) if a.D0 else None
    return Ambient(n or a.n, D, a.eps, a.L, D0)


def _field(cfg: RunConfig, seed: int, D: int | None = None, n: int | None = None):
    from .field import Field
    from .lab import Ensemble, generate
    if cfg.ensemble.field_path:
        return Field.from_json(json.loads(Path(cfg.ensemble.field_path).read_text(encoding="utf-8")))
    return generate(Ensemble(cfg.ensemble.kind, _ambient(cfg, D, n), cfg.ensemble.density, seed))


def _norm_params(cfg: RunConfig, **kw):
    from .norms import NormParams
    nm = cfg.norms
    base = NormParams(p=nm.p, k=nm.k, A=nm.A, search_mode=nm.search_mode,
                      candidate_strategy=nm.candidate_strategy, candidate_budget=nm.candidate_budget,
                      candidate_samples=nm.candidate_samples, seed=cfg.seed, spacing=nm.spacing,
                      quad_mode=nm.quad_mode, sample_budget=nm.sample_budget)
    return replace(base, **kw)


def _paths(cfg: RunConfig, name: str) -> Path:
    d = Path(cfg.output.dir)
    d.mkdir(parents=True, exist_ok=True)
    return d / f"{cfg.output.prefix}_{name}"


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")
    log.info("wrote %s", path)


def _emit_certs(cfg, name, certs) -> int:
    from .bg_engine import certificates_csv, certificates_json
    base = _paths(cfg, name)
    _write(base.with_suffix(".json"), certificates_json(certs))
    _write(base.with_suffix(".csv"), certificates_csv(certs))
    failed = [c.name for c in certs if not c.passed]
    for c in certs:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}  lhs={c.lhs:.6g}  rhs={c.rhs:.6g}  slack={c.slack:.6g}")
    return EXIT_FAIL if failed else EXIT_OK


# -- subcommands -----------------------------------------------------------

def cmd_gen(cfg: RunConfig) -> int:
    F = _field(cfg, cfg.seed)
    path = _paths(cfg, "field.json")
    _write(path, json.dumps(F.to_json(), indent=1, sort_keys=True))
    print(f"{len(F.packets)} packets -> {path}")
    return EXIT_OK


def cmd_norm(cfg: RunConfig) -> int:
    from .norms import broad_norm, decoupling_norm, lp_norm, max_cap_norm, xi
    nm = cfg.norms
    F = _field(cfg, cfg.seed)
    D = F.amb.D
    U = origin_cube(F.amb.dim, nm.region_side or float(D) ** 2)
    P = _norm_params(cfg)
    out = {"norm": nm.which, "p": nm.p, "D": D, "region": U.to_json()}
    if nm.which == "lp":
        v = lp_norm(F, U, nm.p, P)
        out.update(value=v.value, stderr=v.stderr, mode=v.mode)
    elif nm.which == "decoupling":
        v = decoupling_norm(F, U, nm.p, D, P)
        out.update(value=v.value, stderr=v.stderr, mode=v.mode)
    elif nm.which == "max":
        v = max_cap_norm(F, U, nm.p, D, P)
        out.update(value=v.value, stderr=v.stderr, mode=v.mode)
    elif nm.which == "broad":
        r = broad_norm(F, U, P)
        out.update(r.to_json())
    else:
        r = xi(F, nm.k, nm.p, nm.M, U, replace(P, D0=F.amb.D0))
        out.update(r.to_json())
    text = json.dumps(out, indent=1, sort_keys=True)
    _write(_paths(cfg, f"norm_{nm.which}.json"), text)
    print(f"{nm.which} = {out['value']:.17g}")
    return EXIT_OK


def cmd_decompose(cfg: RunConfig) -> int:
    from .bg_engine import base_step, broad_step, ladder, recursion
    d, nm = cfg.decompose, cfg.norms
    if cfg.ambient.n < 2 and not cfg.ensemble.field_path:
        raise ConfigError("decompose needs ambient.n >= 2 (the broad step raises k to k+1 <= n+1)")
    certs = []
    for seed in cfg.ensemble.seeds:
        F = _field(cfg, seed)
        D = F.amb.D
        U = origin_cube(F.amb.dim, d.region_side or float(D) ** 2)
        P = _norm_params(cfg, seed=seed)
        if d.mode == "steps":
            got = [base_step(F, U, d.A, nm.p, D, P, cfg.constants),
                   broad_step(F, U, d.k, d.A, d.M, nm.p, P, cfg.constants, D=D, D0=d.D0)]
        else:
            L = cfg.ladder
            lad = ladder(L.R or D, cfg.ambient.eps, cfg.ambient.L, F.amb.n, L.K, L.A)
            got = recursion(F, U, L.m, lad, nm.p, P, cfg.constants)
        for c in got:
            c.name = f"{c.name}@seed={seed}"
            c.params["seed"] = seed
        certs += got
    return _emit_certs(cfg, "decompose", certs)


def _default_level(F, Q) -> float:
    import numpy as np
    from .field import evaluate
    from .wave_packets import dyadic_ceil
    rng = np.random.default_rng(0)
    pts = Q.lo + rng.random((256, Q.dim)) * Q.side
    top = float(np.abs(evaluate(F, pts)).max())
    return dyadic_ceil(top) if top > 0 else 1.0


def cmd_verify(cfg: RunConfig) -> int:
    import csv
    import io
    from .bg_engine import multiscale_checks, regime_sweep
    from .lab import densest_gamma_cube
    v = cfg.verify
    certs = []
    for seed in cfg.ensemble.seeds:
        F = _field(cfg, seed, D=v.K, n=v.n)
        B = origin_cube(F.amb.dim, float(v.K) ** 2)
        pick = densest_gamma_cube(F, B)
        if pick is None:
            continue
        mu, _, gamma, Q = pick
        lam = v.lam or _default_level(F, Q)
        P = _norm_params(cfg, seed=seed, p=v.p, k=v.k, A=v.A)
        got = multiscale_checks(F, None, B, Q, v.D, mu, lam, gamma, v.p, v.k, v.A, P, cfg.constants)
        for c in got:
            c.name = f"{c.name}@seed={seed}"
            c.params["seed"] = seed
        certs += got
    code = _emit_certs(cfg, "verify", certs)
    # regime dichotomy grid (n = 2, k = 2, mu = 1)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "k", "p", "D", "mu", "gamma", "lambda", "regime", "flagged"])
    anomalies = 0
    for D in v.regime_D:
        for p in v.regime_p:
            g = 1
            while g <= D:
                for lam, r in regime_sweep(2, 2, p, D, 1.0, float(g), v.octaves):
                    w.writerow([2, 2, format(p, ".17g"), D, 1, g, format(lam, ".17g"), r.regime,
                                "true" if r.flagged else "false"])
                    anomalies += r.flagged
                g *= 2
    _write(_paths(cfg, "regimes.csv"), buf.getvalue())
    print(f"regime grid: {anomalies} flagged gaps")
    return EXIT_FAIL if anomalies or code else EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    from .lab import check_p_range, default_sweep_D0, theorem_sweep
    nm, s, a = cfg.norms, cfg.sweep, cfg.ambient
    check_p_range(a.n, nm.k, nm.p, s.mode)
    rule = default_sweep_D0 if s.D0_rule == "quarter" else (lambda D: min(a.D0 or 2, D))
    rep = theorem_sweep(cfg.ensemble.kind, a.n, nm.k, nm.p, a.D_list, s.v_strategy, nm.A, cfg.ensemble.seeds,
                        s.mode, cfg.ensemble.density, rule, a.eps, a.L, _norm_params(cfg), s.run_id)
    _write(_paths(cfg, "sweep.csv"), rep.to_csv())
    _write(_paths(cfg, "sweep.json"), json.dumps(rep.to_json(), indent=1, sort_keys=True))
    ok = rep.alpha is not None and rep.alpha <= rep.target + 0.5 and rep.zero_fraction < 0.5
    print(f"alpha = {rep.alpha}  target = {rep.target:.6g}  zero-lhs rows = {rep.excluded_zero}/{len(rep.rows)}"
          f"  -> {'PASS' if ok else 'FAIL'}")
    for note in rep.notes:
        print(f"note: {note}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_suite(cfg: RunConfig) -> int:
    from .lab import invariant_suite, suite_csv, suite_failed
    rows = invariant_suite(cfg.suite.seeds, [tuple(x) for x in cfg.suite.sizes], constants=cfg.constants)
    _write(_paths(cfg, "suite.csv"), suite_csv(rows))
    for r in rows:
        print(f"{r.status.upper():16s} {r.invariant:26s} {json.dumps(r.params, sort_keys=True)}  {r.measured:.6g}")
    return EXIT_FAIL if suite_failed(rows) else EXIT_OK


COMMANDS = {"gen": cmd_gen, "norm": cmd_norm, "decompose": cmd_decompose, "verify": cmd_verify,
            "sweep": cmd_sweep, "suite": cmd_suite}


def main(argv=None) -> int:
    from .quadrature import set_workers
    ap = build_parser()
    try:
        args, extra = ap.parse_known_args(argv)
        overrides = split_overrides(extra, args.set)
        if args.out:
            overrides["output.dir"] = args.out
        if args.workers is not None:
            overrides["workers"] = args.workers
        cfg = load_config(args.config, overrides)
        set_workers(resolve_workers(cfg))
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](cfg)
    except (ConfigError, GeometryError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    finally:
        set_workers(None)


if __name__ == "__main__":
    sys.exit(main())
