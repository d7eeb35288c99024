"""Experiment runner: ``ceeat <experiment> --config FILE [--seed S] [--workers K] [--out DIR]``.

Configs are INI files with an ``[experiment]`` section (kind, seed, workers,
out) and a ``[params]`` section whose keys depend on the experiment. Unknown
keys are rejected. Exit codes: 0 success, 1 usage or config error, 2 an
internal invariant check failed.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from math import comb
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .cascade import evolve_cascade, ladder_rates, peak_time
from .fockspace import SPIN, HO, StateVector, collective_op, enumerate_sector
from .rates import (
    AggregateSpec,
    anharmonic_sr_rate,
    closed_form_enhancement,
    golden_rule_enhancement,
    gamma0_reference,
    table1_rows,
    write_table1_csv,
)
from .stochastic import TrajectoryConfig, UNITS_HEADER, disorder_pr_scan, noise_sweep

OUT_ENV = "CEEAT_OUT"
EXPERIMENTS = ("table1", "example4site", "ladder", "noise-sweep", "disorder-pr", "anharmonic")


class ConfigError(ValueError):
    pass


class InvariantError(RuntimeError):
    pass


# --------------------------------------------------------------------------- #
#                               config schema                                 #
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class Param:
    parse: Callable[[str], Any]
    default: Any
    check: Callable[[Any], bool] = lambda v: True
    rule: str = ""


def _floats(text: str) -> tuple[float, ...]:
    values = tuple(float(x) for x in text.split(",") if x.strip())
    if not values:
        raise ValueError("empty list")
    return values


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x.strip())


def _optional_float(text: str):
    return None if text.strip().lower() in ("", "auto", "none") else float(text)


def _choice(*options):
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {options}")
        return text
    return parse


_pos = lambda v: v > 0  # noqa: E731
_nonneg_list = lambda vs: all(v >= 0 for v in vs)  # noqa: E731
_pos_list = lambda vs: all(v > 0 for v in vs)  # noqa: E731

SCHEMAS: dict[str, dict[str, Param]] = {
    "table1": {
        "max_spin_sites": Param(int, 6, lambda v: 1 <= v <= 8, "1 <= max_spin_sites <= 8"),
        "max_ho_sites": Param(int, 4, lambda v: 1 <= v <= 5, "1 <= max_ho_sites <= 5"),
        "max_bright": Param(int, 4, lambda v: 0 <= v <= 6, "0 <= max_bright <= 6"),
        "max_dark": Param(int, 2, lambda v: 0 <= v <= 3, "0 <= max_dark <= 3"),
        "tolerance": Param(float, 1e-9, _pos, "tolerance > 0"),
    },
    "example4site": {},
    "ladder": {
        "aggregate": Param(_choice(SPIN, HO), SPIN),
        "n_sites": Param(int, 8, lambda v: v >= 1, "n_sites >= 1"),
        "initial_levels": Param(_ints, None, lambda v: v is None or all(x >= 0 for x in v),
                                "initial_levels >= 0"),
        "max_level": Param(int, None, lambda v: v is None or v >= 0, "max_level >= 0"),
        "t_final": Param(float, 2.0, _pos, "t_final > 0"),
        "n_steps": Param(int, 2000, lambda v: v >= 1, "n_steps >= 1"),
    },
    "noise-sweep": {
        "mode": Param(_choice("lambda", "inv_tau"), "lambda"),
        "n_sites": Param(int, 4, lambda v: 1 <= v <= 10, "1 <= n_sites <= 10"),
        "excitations": Param(int, None, lambda v: v is None or v >= 1, "excitations >= 1"),
        "v_grid": Param(_floats, (0.0, 1.0, 5.0, 10.0, 50.0, 100.0), _nonneg_list, "V_dd >= 0"),
        "noise_grid": Param(_floats, (0.1, 0.5, 1.0, 2.0, 5.0, 10.0), _nonneg_list,
                            "noise_grid >= 0 (Lambda) or > 0 (1/tau_c)"),
        "tau_c": Param(float, 0.33, _pos, "tau_c > 0"),
        "amplitude": Param(float, 5.0, lambda v: v >= 0, "amplitude (Lambda) >= 0"),
        "n_traj": Param(int, 200, lambda v: v >= 1, "n_traj >= 1"),
        "t_final": Param(float, 1.0, _pos, "t_final > 0"),
        "dt": Param(_optional_float, None, lambda v: v is None or v > 0, "dt > 0"),
    },
    "disorder-pr": {
        "n_sites": Param(int, 4, lambda v: 1 <= v <= 10, "1 <= n_sites <= 10"),
        "excitations": Param(int, 2, lambda v: v >= 0, "excitations >= 0"),
        "v_grid": Param(_floats, (0.0, 0.1, 1.0, 10.0, 100.0), _nonneg_list, "V_dd >= 0"),
        "lambda_grid": Param(_floats, (0.01, 0.1, 1.0, 10.0), _nonneg_list, "Lambda >= 0"),
        "n_realizations": Param(int, 100, lambda v: v >= 1, "n_realizations >= 1"),
        "eigenstates": Param(_choice("bright", "all"), "bright"),
    },
    "anharmonic": {
        "n_sites": Param(int, 4, lambda v: 1 <= v <= 6, "1 <= n_sites <= 6"),
        "excitations": Param(int, 2, lambda v: v >= 1, "excitations >= 1"),
        "coupling": Param(float, 1.0, _pos, "coupling > 0"),
        "u_grid": Param(_floats, (0.0, 0.1, 0.3, 1.0, 3.0, 10.0, 100.0, 1e3, 1e4), _nonneg_list,
                        "U >= 0"),
    },
}

EXPERIMENT_KEYS = {"kind", "seed", "workers", "out"}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    params: dict = field(default_factory=dict)
    out_dir: str = ""
    seed: int = 0
    workers: int = 1

    def echo(self) -> dict:
        params = {k: list(v) if isinstance(v, tuple) else v for k, v in self.params.items()}
        return {"kind": self.kind, "seed": self.seed, "workers": self.workers,
                "out": self.out_dir, "params": params}


def _line_of(text: str, key: str) -> str:
    for n, line in enumerate(text.splitlines(), start=1):
        if line.split("=")[0].split(":")[0].strip().lower() == key.lower():
            return f"line {n}"
    return "line ?"


def _cross_check(kind: str, p: dict):
    if kind == "noise-sweep":
        m = p["excitations"] if p["excitations"] is not None else p["n_sites"] // 2
        if not 1 <= m <= p["n_sites"]:
            raise ConfigError(f"range-error: excitations must satisfy 1 <= excitations <= n_sites, got {m}")
        if p["mode"] == "inv_tau" and not all(x > 0 for x in p["noise_grid"]):
            raise ConfigError("range-error: noise_grid values (1/tau_c) must be > 0")
    if kind == "disorder-pr" and p["excitations"] > p["n_sites"]:
        raise ConfigError("range-error: excitations must satisfy excitations <= n_sites")
    if kind == "ladder":
        N = p["n_sites"]
        if p["aggregate"] == SPIN:
            top = N if p["max_level"] is None else p["max_level"]
            if top > N:
                raise ConfigError(f"range-error: max_level must satisfy max_level <= n_sites={N}")
        if p["initial_levels"] and p["max_level"] is not None:
            if max(p["initial_levels"]) > p["max_level"]:
                raise ConfigError("range-error: initial_levels must not exceed max_level")
        if p["aggregate"] == SPIN and p["initial_levels"] and max(p["initial_levels"]) > N:
            raise ConfigError(f"range-error: initial_levels must satisfy level <= n_sites={N}")


def validate_config(text: str, kind: str | None = None) -> ExperimentConfig:
    """Parse INI text into a fully defaulted, range-checked config."""
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    try:
        cp.read_string(text, source="<config>")
    except configparser.Error as exc:
        raise ConfigError(f"parse-error: {exc}") from None
    for section in cp.sections():
        if section not in ("experiment", "params"):
            raise ConfigError(
                f"parse-error: unknown section [{section}]; valid sections are [experiment], [params]"
            )
    exp = dict(cp["experiment"]) if cp.has_section("experiment") else {}
    unknown = set(exp) - EXPERIMENT_KEYS
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(
            f"parse-error: unknown key {key!r} in [experiment] ({_line_of(text, key)}); "
            f"valid keys: {', '.join(sorted(EXPERIMENT_KEYS))}"
        )
    file_kind = exp.get("kind")
    if kind and file_kind and kind != file_kind:
        raise ConfigError(f"parse-error: config is for {file_kind!r} but {kind!r} was requested")
    kind = kind or file_kind
    if kind not in SCHEMAS:
        raise ConfigError(f"parse-error: experiment kind must be one of {', '.join(EXPERIMENTS)}, got {kind!r}")

    try:
        seed = int(exp.get("seed", 0))
        workers = int(exp.get("workers", 1))
    except ValueError as exc:
        raise ConfigError(f"parse-error: [experiment] {exc}") from None
    if seed < 0:
        raise ConfigError("range-error: seed must satisfy seed >= 0")
    if workers < 1:
        raise ConfigError("range-error: workers must satisfy workers >= 1")

    schema = SCHEMAS[kind]
    raw = dict(cp["params"]) if cp.has_section("params") else {}
    unknown = set(raw) - set(schema)
    if unknown:
        key = sorted(unknown)[0]
        valid = ", ".join(sorted(schema)) or "(none)"
        raise ConfigError(
            f"parse-error: unknown key {key!r} in [params] ({_line_of(text, key)}); "
            f"valid keys for {kind}: {valid}"
        )
    params = {}
    for key, spec in schema.items():
        if key in raw:
            try:
                value = spec.parse(raw[key])
            except ValueError as exc:
                raise ConfigError(
                    f"parse-error: key {key!r} ({_line_of(text, key)}): cannot parse {raw[key]!r}: {exc}"
                ) from None
        else:
            value = spec.default
        if not spec.check(value):
            raise ConfigError(f"range-error: {key} must satisfy {spec.rule} (got {value!r})")
        params[key] = value
    _cross_check(kind, params)
    out = exp.get("out") or os.environ.get(OUT_ENV) or "ceeat_out"
    return ExperimentConfig(kind, params, out, seed, workers)


# --------------------------------------------------------------------------- #
#                                 outputs                                     #
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class RunManifest:
    config: dict
    code_version: str
    duration_s: float
    checksums: dict

    def to_json(self) -> str:
        return json.dumps(
            {"config": self.config, "code_version": self.code_version,
             "duration_s": self.duration_s, "checksums": self.checksums},
            indent=2, sort_keys=True,
        )


def _atomic_write(path: Path, writer: Callable[[str], None]) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_text(path: Path, text: str) -> None:
    def w(tmp):
        with open(tmp, "w") as fh:
            fh.write(text)
    _atomic_write(path, w)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_rows(path: Path, header: list[str], rows: list[list]) -> None:
    def w(tmp):
        with open(tmp, "w", newline="") as fh:
            fh.write(UNITS_HEADER)
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    _atomic_write(path, w)


# --------------------------------------------------------------------------- #
#                               experiments                                   #
# --------------------------------------------------------------------------- #

def _run_table1(cfg: ExperimentConfig, out: Path) -> list[Path]:
    p = cfg.params
    path = out / "table1.csv"
    rows = table1_rows(p["max_spin_sites"], p["max_ho_sites"], p["max_bright"], p["max_dark"])
    worst = [0.0]

    def w(tmp):
        worst[0] = write_table1_csv(rows, tmp)
    _atomic_write(path, w)
    if not worst[0] < p["tolerance"]:
        raise InvariantError(f"table1: closed form and oracle differ by {worst[0]:.3e}")
    return [path]


def four_site_examples() -> list[tuple[str, float, float]]:
    """(name, closed form, oracle) for the symmetric/antisymmetric four-spin states."""
    def explicit(m, amplitude):
        sector = enumerate_sector(SPIN, 4, m)
        amps = np.array([amplitude(c) for c in sector.configs], dtype=complex)
        return StateVector(sector, amps / np.linalg.norm(amps))

    bright1 = explicit(1, lambda c: 1.0)
    bright2 = explicit(2, lambda c: 1.0)
    dark1 = explicit(1, lambda c: (-1) ** c.index(1))
    ref = gamma0_reference(SPIN)
    out = []
    for name, state, label in (
        ("one excitation, symmetric", bright1, (4, 4, 1)),
        ("two excitations, symmetric", bright2, (4, 4, 2)),
        ("one excitation, alternating signs", dark1, (4, 3, 1)),
    ):
        oracle = golden_rule_enhancement(state, collective_op(state.sector, "J_minus"), ref)
        closed = closed_form_enhancement("SR", AggregateSpec.spin(*label), AggregateSpec.field())
        out.append((name, closed, oracle))
    return out


def _run_example4site(cfg: ExperimentConfig, out: Path) -> list[Path]:
    rows = four_site_examples()
    path = out / "example4site.csv"
    _write_rows(path, ["state", "closed_form", "oracle"], [list(r) for r in rows])
    for (name, closed, oracle), expected in zip(rows, (4.0, 6.0, 0.0)):
        if abs(closed - expected) > 1e-12 or abs(oracle - expected) > 1e-12:
            raise InvariantError(f"example4site: {name} gives {closed}/{oracle}, expected {expected}")
    return [path]


def _run_ladder(cfg: ExperimentConfig, out: Path) -> list[Path]:
    p = cfg.params
    N, kind = p["n_sites"], p["aggregate"]
    if kind == SPIN:
        levels = p["initial_levels"] or tuple(range(1, N + 1))
        spec = ladder_rates(SPIN, N, p["max_level"])
    else:
        levels = p["initial_levels"] or (1, 2, 3, 4)
        top = p["max_level"] if p["max_level"] is not None else 4 * max(levels)
        spec = ladder_rates(HO, N, top)
    paths = []
    g = spec.level_rates
    for m0 in levels:
        traj = evolve_cascade(spec, m0, p["t_final"], p["n_steps"])
        path = out / f"ladder_{kind}_N{N}_m0_{m0}.csv"
        _atomic_write(path, traj.to_csv)
        paths.append(path)
        has_peak = peak_time(traj) is not None
        expect_peak = m0 >= 2 and g[m0 - 1] > g[m0]
        if has_peak != expect_peak:
            raise InvariantError(f"ladder: m0={m0} peak={has_peak}, rate ordering says {expect_peak}")
        if kind == HO:
            err = np.max(np.abs(traj.mean_level() - m0 * np.exp(-N * traj.times)))
            if err > 1e-6:
                raise InvariantError(f"ladder: HO mean level deviates from R0 exp(-Nt) by {err:.2e}")
    return paths


def _write_sweep(result, out: Path, stem: str, cfg: ExperimentConfig) -> list[Path]:
    csv_path, meta_path = out / f"{stem}.csv", out / f"{stem}.json"
    _atomic_write(csv_path, result.to_csv)
    meta = dict(result.metadata, code_version=__version__)
    _write_text(meta_path, json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return [csv_path, meta_path]


def _run_noise_sweep(cfg: ExperimentConfig, out: Path) -> list[Path]:
    p = cfg.params
    traj = TrajectoryConfig(p["n_traj"], p["t_final"], p["dt"], cfg.seed)
    result = noise_sweep(
        p["mode"], p["v_grid"], p["noise_grid"], traj, p["n_sites"], p["excitations"],
        tau_c=p["tau_c"], amplitude=p["amplitude"], workers=cfg.workers,
    )
    N = p["n_sites"]
    m = result.metadata["excitations"]
    ceiling = m * (N - m + 1)
    if np.any(result.mean < -1e-9) or np.any(result.mean > ceiling + 1e-9):
        raise InvariantError(f"noise-sweep: enhancement outside [0, {ceiling}]")
    return _write_sweep(result, out, "noise_sweep", cfg)


def _run_disorder_pr(cfg: ExperimentConfig, out: Path) -> list[Path]:
    p = cfg.params
    result = disorder_pr_scan(
        p["n_sites"], p["excitations"], p["v_grid"], p["lambda_grid"], p["n_realizations"],
        seed=cfg.seed, eigenstates=p["eigenstates"], workers=cfg.workers,
    )
    top = comb(p["n_sites"], p["excitations"])
    if np.any(result.mean < 1 - 1e-9) or np.any(result.mean > top + 1e-9):
        raise InvariantError(f"disorder-pr: mean PR outside [1, {top}]")
    return _write_sweep(result, out, "disorder_pr", cfg)


def _run_anharmonic(cfg: ExperimentConfig, out: Path) -> list[Path]:
    p = cfg.params
    N, n = p["n_sites"], p["excitations"]
    rows = []
    for U in p["u_grid"]:
        r = anharmonic_sr_rate(N, U, n, p["coupling"])
        rows.append([U, r.value, r.eigenstate_index])
    path = out / "anharmonic.csv"
    _write_rows(path, ["U_over_V", "gamma_over_gamma0", "eigenstate_index"], rows)
    values = [r[1] for r in sorted(rows)]
    if any(b > a + 1e-9 for a, b in zip(values, values[1:])):
        raise InvariantError("anharmonic: rate increases with U")
    if n <= N:
        lo, hi = n * (N - n + 1), N * n
        if any(v < lo - 1e-6 or v > hi + 1e-9 for v in values):
            raise InvariantError(f"anharmonic: rate outside [{lo}, {hi}]")
    return [path]


RUNNERS = {
    "table1": _run_table1,
    "example4site": _run_example4site,
    "ladder": _run_ladder,
    "noise-sweep": _run_noise_sweep,
    "disorder-pr": _run_disorder_pr,
    "anharmonic": _run_anharmonic,
}


def run_experiment(config: ExperimentConfig) -> RunManifest:
    """Run one experiment, write its data files, then the manifest."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    paths = RUNNERS[config.kind](config, out)
    manifest = RunManifest(
        config.echo(), __version__, round(time.perf_counter() - start, 6),
        {p.name: _sha256(p) for p in paths},
    )
    _write_text(out / "run_manifest.json", manifest.to_json() + "\n")
    return manifest


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="ceeat", description=__doc__.splitlines()[0])
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", help="INI config file (defaults are used if omitted)")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--workers", type=int, help="worker processes; 0 means all CPUs")
    parser.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./ceeat_out)")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1

    try:
        text = Path(args.config).read_text() if args.config else ""
        config = validate_config(text, args.experiment)
        overrides = {}
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("range-error: seed must satisfy seed >= 0")
            overrides["seed"] = args.seed
        if args.workers is not None:
            if args.workers < 0:
                raise ConfigError("range-error: workers must satisfy workers >= 0")
            overrides["workers"] = args.workers or (os.cpu_count() or 1)
        if args.out:
            overrides["out_dir"] = args.out
        if overrides:
            config = ExperimentConfig(**{**config.__dict__, **overrides})
    except (OSError, ConfigError) as exc:
        print(f"ceeat: {exc}", file=sys.stderr)
        return 1

    try:
        manifest = run_experiment(config)
    except InvariantError as exc:
        print(f"ceeat: invariant check failed: {exc}", file=sys.stderr)
        return 2
    for name, digest in manifest.checksums.items():
        print(f"{digest[:12]}  {Path(config.out_dir) / name}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
