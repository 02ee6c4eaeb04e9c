"""Command-line front end: analytical sweeps and Monte-Carlo campaigns.

    urllc-mimo analytical --config cfg.json --sweep n_antennas=64,128,256 --out results/
    urllc-mimo simulate --scheme krep --krep 4 --trials 1300 --seed 7 --compare --out results/

Every CSV starts with a ``#`` line holding the JSON config (and seed) that
produced it; read it with ``pandas.read_csv(path, comment="#")``.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import subprocess
import sys
from importlib import metadata
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import analytical, simulator
from .config import ConfigError, HarqScheme, SystemConfig, load, validate

DEFAULT_SCHEMES = ("reactive", "krep:2", "krep:4", "krep:8")
RATIO_MS = (1.0, 2.0, 3.0, 4.0)
QOS_TARGET = 1e-6
QOS_DEADLINE_MS = 3.0
KEY_ALIASES = {"K": "n_antennas", "k": "n_antennas", "lambda": "lambda_u", "lambda_U": "lambda_u"}


def version_string() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            capture_output=True,
            text=True,
            timeout=5,
            cwd=Path(__file__).resolve().parent,
        )
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def parse_sweep(items: Sequence[str] | None) -> dict[str, list[str]]:
    """``["n_antennas=64,128", "scheme=reactive,krep:4"]`` -> ordered grid axes."""
    axes: dict[str, list[str]] = {}
    for item in items or []:
        key, sep, values = item.partition("=")
        key = KEY_ALIASES.get(key.strip(), key.strip())
        vals = [v.strip() for v in values.split(",") if v.strip()]
        if not sep or not key or not vals:
            raise ConfigError(f"bad --sweep {item!r}; expected KEY=v1,v2,...")
        if key in axes:
            raise ConfigError(f"--sweep key {key!r} given twice")
        axes[key] = vals
    return axes


def _schemes(args, axes: dict[str, list[str]]) -> list[HarqScheme]:
    if "scheme" in axes:
        return [HarqScheme.parse(s) for s in axes.pop("scheme")]
    if args.scheme == "reactive":
        return [HarqScheme.reactive()]
    if args.scheme == "krep":
        return [HarqScheme.krep(k) for k in (args.krep or [2, 4, 8])]
    return [HarqScheme.parse(s) for s in DEFAULT_SCHEMES]


def _grid(base: SystemConfig, axes: dict[str, list[str]]) -> list[SystemConfig]:
    if not axes:
        return [base]
    keys = list(axes)
    out = []
    for combo in itertools.product(*(axes[k] for k in keys)):
        raw = base.to_dict()
        raw.update(dict(zip(keys, combo)))
        out.append(validate(raw))
    return out


def _point_name(prefix: str, scheme: HarqScheme, cfg: SystemConfig, extra_keys: Sequence[str]) -> str:
    parts = [prefix, scheme.label, f"K{cfg.n_antennas}", f"lam{cfg.lambda_u:g}"]
    for key in extra_keys:
        if key not in ("n_antennas", "lambda_u"):
            parts.append(f"{key}{getattr(cfg, key)}")
    return "_".join(str(p).replace(".", "p") if i else str(p) for i, p in enumerate(parts))


def _header(cfg: SystemConfig, **extra: Any) -> str:
    return "# " + json.dumps({"config": cfg.to_dict(), **extra}, sort_keys=True) + "\n"


def _write_rows(path: Path, header: str, columns: Sequence[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(header)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        w.writerows(rows)


def _ms_to_tti(cfg: SystemConfig, ms: float) -> int:
    return int(round(ms / cfg.tti_ms))


def max_supported_density(
    cfg: SystemConfig,
    scheme: HarqScheme,
    tau: int,
    target: float = QOS_TARGET,
    lo: float = 0.0,
    hi: float = 20000.0,
    resolution: float = 1.0,
) -> float | None:
    """Largest user density whose failure probability at ``tau`` stays below ``target``.

    Bisection assumes the failure probability grows with density. Returns
    None when even ``lo`` misses the target and ``hi`` when ``hi`` meets it.
    """

    def ok(lam: float) -> bool:
        return analytical.lafp(scheme, tau, cfg.replace(lambda_u=lam)).lafp <= target

    if not ok(lo):
        return None
    if ok(hi):
        return hi
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def cmd_analytical(args) -> int:
    base = load(args.config) if args.config else SystemConfig()
    axes = parse_sweep(args.sweep)
    schemes = _schemes(args, axes)
    swept = list(axes)
    configs = _grid(base, axes)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    taus = np.arange(1, args.tau_max + 1)

    curves: dict[tuple, np.ndarray] = {}
    files = []
    for cfg in configs:
        for scheme in schemes:
            lafp = analytical.lafp_curve(scheme, taus, cfg)
            curves[(cfg, scheme)] = lafp
            path = out / (_point_name("lafp", scheme, cfg, swept) + ".csv")
            rows = [(int(t), repr(float(t * cfg.tti_ms)), repr(float(p))) for t, p in zip(taus, lafp)]
            _write_rows(path, _header(cfg, scheme=str(scheme)), ("tau_ttis", "tau_ms", "lafp"), rows)
            files.append(path.name)

    summary = {
        "version": version_string(),
        "config": base.to_dict(),
        "sweep": {k: v for k, v in parse_sweep(args.sweep).items()},
        "files": files,
        "reduction_ratios": _reduction_ratios(configs, schemes),
        "max_supported_density": [],
    }
    if not args.no_density:
        tau_qos = _ms_to_tti(base, QOS_DEADLINE_MS)
        seen = set()
        for cfg in configs:
            key_cfg = cfg.replace(lambda_u=base.lambda_u)
            for scheme in schemes:
                if (key_cfg, scheme) in seen:
                    continue
                seen.add((key_cfg, scheme))
                summary["max_supported_density"].append(
                    {
                        "scheme": str(scheme),
                        "n_antennas": cfg.n_antennas,
                        "tau_ttis": tau_qos,
                        "target": QOS_TARGET,
                        "lambda_u": max_supported_density(key_cfg, scheme, tau_qos),
                    }
                )
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {len(files)} curves and summary.json to {out}")
    return 0


def _reduction_ratios(configs: list[SystemConfig], schemes: list[HarqScheme]) -> list[dict]:
    """Failure-probability ratio between every pair of antenna counts that differ only in K."""
    out = []
    by_rest: dict[SystemConfig, list[SystemConfig]] = {}
    for cfg in configs:
        by_rest.setdefault(cfg.replace(n_antennas=3), []).append(cfg)
    for group in by_rest.values():
        group = sorted(group, key=lambda c: c.n_antennas)
        for small, large in itertools.combinations(group, 2):
            for scheme in schemes:
                ratios = {}
                for ms in RATIO_MS:
                    tau = _ms_to_tti(small, ms)
                    a = analytical.lafp(scheme, tau, small).lafp
                    b = analytical.lafp(scheme, tau, large).lafp
                    ratios[f"{ms:g}ms"] = a / b if b > 0 else None
                out.append(
                    {
                        "scheme": str(scheme),
                        "lambda_u": small.lambda_u,
                        "from_antennas": small.n_antennas,
                        "to_antennas": large.n_antennas,
                        "ratio": ratios,
                    }
                )
    return out


def cmd_simulate(args) -> int:
    base = load(args.config) if args.config else SystemConfig()
    axes = parse_sweep(args.sweep)
    schemes = _schemes(args, axes)
    swept = list(axes)
    configs = _grid(base, axes)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    version = version_string()

    for cfg in configs:
        for scheme in schemes:
            curve = simulator.run_trials(cfg, scheme, args.tau_max, args.trials, args.seed, workers=args.workers)
            stem = _point_name("sim", scheme, cfg, swept)
            header = _header(cfg, scheme=str(scheme), seed=args.seed, n_trials=args.trials)
            rows = [
                (int(t), repr(float(t * cfg.tti_ms)), repr(float(p)), repr(float(h)), curve.n_trials, curve.n_users, int(c))
                for t, p, h, c in zip(curve.tau, curve.failure_prob, curve.ci_half_width, curve.censored)
            ]
            columns = ("tau_ttis", "tau_ms", "failure_prob", "ci_half_width", "n_trials", "n_users", "censored")
            _write_rows(out / f"{stem}.csv", header, columns, rows)
            manifest = {
                "config": cfg.to_dict(),
                "scheme": str(scheme),
                "seed": args.seed,
                "n_trials": args.trials,
                "tau_max": args.tau_max,
                "n_users": curve.n_users,
                "version": version,
            }
            (out / f"{stem}.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
            if args.compare:
                an = analytical.lafp_curve(scheme, curve.tau, cfg)
                est = curve.point_estimate
                gap = np.where(an > 0, est / np.where(an > 0, an, 1.0) - 1.0, np.nan)
                rows = [
                    (int(t), repr(float(a)), repr(float(s)), repr(float(h)), int(c), repr(float(g)))
                    for t, a, s, h, c, g in zip(curve.tau, an, est, curve.ci_half_width, curve.censored, gap)
                ]
                columns = ("tau_ttis", "analytical", "simulated", "ci_half_width", "censored", "relative_gap")
                _write_rows(out / f"{stem}_compare.csv", header, columns, rows)
            print(f"{stem}: {curve.n_users} user samples over {curve.n_trials} trials")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="urllc-mimo", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON parameter file (defaults to the built-in setup)")
        p.add_argument("--scheme", choices=("reactive", "krep"), help="HARQ scheme (default: reactive and krep 2,4,8)")
        p.add_argument("--krep", type=int, action="append", help="repetitions for --scheme krep; repeatable")
        p.add_argument("--tau-max", type=int, default=80, help="last deadline in TTIs (default 80)")
        p.add_argument("--out", default="results", help="output directory")
        p.add_argument("--sweep", action="append", metavar="KEY=v1,v2", help="grid axis over a config key or 'scheme'")

    a = sub.add_parser("analytical", help="closed-form failure curves, ratio tables and density bisection")
    common(a)
    a.add_argument("--no-density", action="store_true", help="skip the maximum-density bisection")
    a.set_defaults(func=cmd_analytical)

    s = sub.add_parser("simulate", help="Monte-Carlo failure curves")
    common(s)
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--compare", action="store_true", help="also write analytical vs simulated side by side")
    s.set_defaults(func=cmd_simulate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.tau_max < 1:
            raise ConfigError("--tau-max must be >= 1")
        if args.krep and args.scheme != "krep":
            raise ConfigError("--krep requires --scheme krep")
        if getattr(args, "trials", 1) < 1:
            raise ConfigError("--trials must be >= 1")
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
