"""Command-line front end.

Each subcommand reads an optional JSON config, runs one computation and writes
``<command>.csv`` plus a ``<command>.json`` provenance sidecar into ``--out``.
Files are written to temporaries and renamed into place only after the whole
run succeeded. CSV bodies depend only on the config and the seed.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import os
import platform
import sys
import tempfile
import time
from dataclasses import replace

import numpy as np

from . import __version__
from .config import COMMANDS, ConfigError, ExperimentConfig, load_config, parse_config
from .decoherence import QuadratureError
from .energy import heating_report
from .model import CatStateSpec
from .purity import (
    faure_config_for,
    initial_rate_analytic,
    initial_rate_qmc,
    purity_curve,
    purity_longtime_asymptote,
    purity_shorttime,
    r_max,
)
from .qmc import FaureConfig, IntegrandError, integrate_vector
from .semiclassical import kernels_at, q_coefficients

__all__ = ["main", "run"]


def _fmt(v) -> str:
    v = float(v) + 0.0  # no negative zero
    if math.isnan(v):
        return "nan"
    return format(v, ".17g")


def _csv(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else _fmt(v) for v in row))
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------------ runners
# each returns (csv text, extra sidecar fields)

def run_purity_decay(cfg: ExperimentConfig, workers=1):
    ctx = cfg.context()
    gt = np.asarray(cfg.gamma_t)
    if ctx.noise.gamma == 0.0:
        times = gt.copy()
        p = np.ones(len(gt))
        err = np.zeros(len(gt))
        analytic = np.ones(len(gt))
    else:
        times = gt / ctx.noise.gamma
        curve = purity_curve(cfg.state(), ctx, faure_config_for(ctx.model, cfg.seed), times,
                             cfg.n_points, workers=workers)
        p, err, analytic = curve.values, curve.errors, curve.p_analytic
    short = purity_shorttime(ctx.noise, times)
    rows = []
    for i, g in enumerate(gt):
        longt = (purity_longtime_asymptote(ctx.noise, ctx.model, times[i])
                 if ctx.noise.gamma > 0 and g > 0 else float("nan"))
        rows.append((g, p[i], err[i], analytic[i], short[i], longt))
    header = ("gamma_t", "p_qmc", "p_err", "p_analytic", "p_shorttime", "p_longtime")
    note = "gamma = 0: unitary dynamics, purity is identically 1" if ctx.noise.gamma == 0 else None
    return _csv(header, rows), {"n_points": cfg.n_points, "note": note}


def _offset_state(offset, separation):
    return CatStateSpec(0.5 * (offset + 1j * separation), 0.5 * (offset - 1j * separation))


def run_initial_rate(cfg: ExperimentConfig, workers=1):
    ctx = cfg.context()
    fcfg = faure_config_for(ctx.model, cfg.seed)
    rows = []
    for off in cfg.offsets:
        for d in cfg.separations:
            state = _offset_state(off, d)
            if ctx.noise.gamma == 0.0:
                val, err = 0.0, 0.0
            else:
                est = initial_rate_qmc(state, ctx, fcfg, cfg.n_points, workers=workers)
                val, err = est.value, est.error_estimate
            rows.append((off, d, val, err, initial_rate_analytic(state, ctx.noise, ctx.model)))
    header = ("offset", "separation", "r0_qmc", "r0_err", "r0_analytic")
    return _csv(header, rows), {"n_points": cfg.n_points, "r_max": r_max(ctx.noise, ctx.model)}


def run_energy(cfg: ExperimentConfig, workers=1):
    model, noise = cfg.model(), cfg.noise()
    rep = heating_report(model, noise)
    header = ("n_modes", "sigma_x_over_L", "rate_sum", "rate_closed", "relative_gap")
    rows = [(model.n_modes, noise.sigma_x, rep.rate_sum, rep.rate_closed, rep.relative_gap)]
    return _csv(header, rows), {}


def run_kernels(cfg: ExperimentConfig, workers=1):
    ctx = cfg.context()
    header = ["t", "s"]
    for name in ("a", "b", "q_ll", "q_ll_conj", "q_conj_l", "q_conj_conj"):
        header += [f"{name}_re", f"{name}_im"]
    rows = []
    for t in cfg.kernel_times:
        k = kernels_at(ctx, t)
        q = q_coefficients(ctx, t)
        cols = (k.a, k.b, q.ll, q.ll_conj, q.conj_l, q.conj_conj)
        for m in range(k.size):
            row = [t, m * k.spacing]
            for c in cols:
                row += [c[m].real, c[m].imag]
            rows.append(row)
    return _csv(header, rows), {"x_nodes": ctx.x_nodes}


SELFTEST_CHECKS = (
    # name, exact value, function of eta (n, n_modes) -> (n,)
    ("mean_abs_sq", 1.0, lambda eta: np.mean(np.abs(eta) ** 2, axis=1)),
    ("gaussian_weight", None, lambda eta: np.exp(-np.mean(np.abs(eta) ** 2, axis=1))),
    ("fourth_moment_mode0", 2.0, lambda eta: np.abs(eta[:, 0]) ** 4),
)
SELFTEST_TOLERANCE = "|value - exact| <= 3 * error_estimate + 1e-3"


def run_qmc_selftest(cfg: ExperimentConfig, workers=1):
    n_modes = cfg.n_modes
    exact_weight = (1.0 + 1.0 / n_modes) ** (-n_modes)
    fcfg = FaureConfig(2 * n_modes, scramble_seed=cfg.seed)

    def integrand(eta, extra):
        return np.stack([fn(eta) for _, _, fn in SELFTEST_CHECKS], axis=1)

    rows = []
    all_pass = True
    for n in cfg.selftest_points:
        ests = integrate_vector(integrand, fcfg, n, n_modes=n_modes, workers=workers)
        for (name, exact, _), est in zip(SELFTEST_CHECKS, ests):
            exact = exact_weight if exact is None else exact
            gap = abs(est.value - exact)
            ok = gap <= 3.0 * est.error_estimate + 1e-3
            all_pass &= ok
            rows.append((str(n), name, est.value, exact, est.error_estimate, gap, "pass" if ok else "fail"))
    header = ("n_points", "check", "value", "exact", "error_estimate", "abs_error", "status")
    return _csv(header, rows), {"tolerance": SELFTEST_TOLERANCE, "all_pass": bool(all_pass)}


RUNNERS = {
    "purity-decay": run_purity_decay,
    "initial-rate": run_initial_rate,
    "energy": run_energy,
    "kernels": run_kernels,
    "qmc-selftest": run_qmc_selftest,
}


# ------------------------------------------------------------------ output handling

def _write_atomic(out_dir, name, text, pending):
    fd, tmp = tempfile.mkstemp(prefix=f".{name}.", suffix=".tmp", dir=out_dir)
    pending.append(tmp)
    with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
        fh.flush()
        os.fsync(fh.fileno())
    return tmp


def run(cfg: ExperimentConfig, out_dir, workers=1):
    """Run ``cfg.command`` and place ``<command>.csv`` and ``.json`` in ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    start = time.perf_counter()
    body, extra = RUNNERS[cfg.command](cfg, workers=workers)
    sidecar = {
        "command": cfg.command,
        "config": cfg.to_dict(),
        "version": __version__,
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "runtime_seconds": round(time.perf_counter() - start, 3),
        "threads": int(workers),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "csv": f"{cfg.command}.csv",
        **{k: v for k, v in extra.items() if v is not None},
    }
    pending = []
    try:
        tmp_csv = _write_atomic(out_dir, f"{cfg.command}.csv", body, pending)
        tmp_json = _write_atomic(out_dir, f"{cfg.command}.json",
                                 json.dumps(sidecar, indent=2, sort_keys=True) + "\n", pending)
        os.replace(tmp_csv, os.path.join(out_dir, f"{cfg.command}.csv"))
        pending.remove(tmp_csv)
        os.replace(tmp_json, os.path.join(out_dir, f"{cfg.command}.json"))
        pending.remove(tmp_json)
    finally:
        for tmp in pending:
            try:
                os.unlink(tmp)
            except OSError:
                pass
    return os.path.join(out_dir, f"{cfg.command}.csv")


def _parser():
    ap = argparse.ArgumentParser(prog="fielddeco", description="Bosonic field decoherence experiments.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file (defaults are used when omitted)")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
        p.add_argument("--seed", type=int, help="override the config seed")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg = load_config(args.config, args.command) if args.config else parse_config({}, args.command)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        path = run(cfg, args.out, workers=args.threads)
    except ConfigError as exc:
        print(f"fielddeco: config error: {exc}", file=sys.stderr)
        return 2
    except (QuadratureError, IntegrandError, OverflowError, ValueError, OSError) as exc:
        print(f"fielddeco: {args.command} failed: {exc}".replace("\n", " "), file=sys.stderr)
        return 1
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
