"""Experiment runner.

Usage::

    blochnet <experiment> --config run.json [--out DIR] [--threads N] [--gauge single|uniform]

The config is a JSON object of experiment parameters.  Every parameter has
a default (see :data:`DEFAULTS`) except the few listed in
:data:`REQUIRED`; unknown keys are rejected.  Each run writes long-form CSV
files and a ``manifest.json`` holding the fully resolved parameters.

Exit status: 0 on success, 2 for a configuration error, 3 for a numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import PacketOverflowError, ballistic_time, gaussian_packet, spectrum_of
from .net import (Network, NetworkError, interferometer_network, q_ring_network, star_network,
                  y_network)
from .netfile import load_network
from .observe import (WindowTooShort, film_coefficients, flux_sweep_Q, interference_intensity,
                      max_concurrence, max_concurrence_scan, reflection_factor, reflection_scan,
                      time_grid)
from .reduce import SchemeMismatch, reduce_network, scheme_from_dict

EXPERIMENTS = ("star", "ybeam", "entangler", "interferometer", "qring", "film", "ab", "sweep",
               "reduce-report")

_COMMON = {"alpha": 0.3, "k": math.pi / 2, "t": 1.0, "gnuplot": False}
_GRID = {"min": 0.0, "max": 2.0, "n": 21}

DEFAULTS = {
    "star": {**_COMMON, "m": 2, "M": 50, "N": 50, "N0": 25, "t_n": None, "network": None,
             "input_chain": "A", "t_end": None},
    "ybeam": {**_COMMON, "M": 50, "N": 50, "N0": 25, "grid": _GRID, "tau0": None},
    "entangler": {**_COMMON, "M": 50, "N": 50, "N0": 25, "grid": _GRID, "t_end": None},
    "interferometer": {**_COMMON, "M": 50, "N": 50, "L": 50, "N0": 25, "delta_min": -25,
                       "delta_max": 25, "r0": 50, "tau0": 100.0, "phi": 0.0},
    "qring": {**_COMMON, "alpha": 0.1, "M": 100, "N": 50, "N0": 50, "t_nB": None, "t_nC": None,
              "phis": [0.0, 0.25, 0.5], "t_end": None},
    "film": {**_COMMON, "alpha": 0.1, "N": 200, "N0": 100,
             "Phis": [i * math.pi / 8 for i in range(9)]},
    "ab": {**_COMMON, "alphas": [0.1, 0.3], "M": 100, "N0": 50, "N": 50, "L": 450,
           "paths": [200, 400], "phi": {"min": -2.0, "max": 2.0, "n": 81}},
    "sweep": {**_COMMON, "observable": "R", "M": 50, "N": 50, "N0": 25, "grid": _GRID,
              "tau0": None, "t_end": None},
    "reduce-report": {"scheme": None, "network": None, "t": 1.0, "gnuplot": False},
}
REQUIRED = {"reduce-report": ("scheme",)}


class ConfigError(Exception):
    pass


class NumericalError(Exception):
    pass


# -- config handling --------------------------------------------------------

def load_config(path, experiment: str) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    return resolve_config(raw, experiment, base=Path(path).parent)


def resolve_config(raw: dict, experiment: str, base: Path = Path(".")) -> dict:
    """Merge ``raw`` onto the experiment defaults and validate it."""
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    raw = dict(raw)
    tag = raw.pop("experiment", experiment)
    if tag != experiment:
        raise ConfigError(f"key 'experiment': config says {tag!r} but {experiment!r} was requested")
    defaults = DEFAULTS[experiment]
    for key in raw:
        if key not in defaults:
            raise ConfigError(f"unknown key {key!r} for experiment {experiment}")
    for key in REQUIRED.get(experiment, ()):
        if raw.get(key) is None:
            raise ConfigError(f"missing required key {key!r}")
    cfg = {}
    for key, default in defaults.items():
        value = raw.get(key, default)
        if isinstance(default, dict) and isinstance(value, dict):
            extra = set(value) - set(default)
            if extra:
                raise ConfigError(f"unknown key(s) {sorted(extra)} in {key!r}")
            value = {**default, **value}
        cfg[key] = _check_value(key, value, default)
    if cfg.get("network"):
        p = Path(cfg["network"])
        p = p if p.is_absolute() else base / p
        if not p.exists():
            raise ConfigError(f"key 'network': file {p} does not exist")
        cfg["network"] = str(p)
    return cfg


def _check_value(key, value, default):
    if value is None:
        return None
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"key {key!r} must be true or false")
        return value
    if isinstance(default, (int, float)) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"key {key!r} must be a number")
        if isinstance(default, int) and not isinstance(default, bool):
            if int(value) != value:
                raise ConfigError(f"key {key!r} must be an integer")
            return int(value)
        return float(value)
    if isinstance(default, list):
        if not isinstance(value, list) or not value:
            raise ConfigError(f"key {key!r} must be a non-empty list")
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            raise ConfigError(f"key {key!r} must hold numbers")
        return value
    if isinstance(default, dict):
        if not isinstance(value, dict):
            raise ConfigError(f"key {key!r} must be an object")
        if "n" in value and (not isinstance(value["n"], int) or value["n"] < 1):
            raise ConfigError(f"key {key!r}: 'n' must be a positive integer")
        return value
    return value


def _linspace(spec: dict) -> np.ndarray:
    return np.linspace(float(spec["min"]), float(spec["max"]), int(spec["n"]))


# -- output helpers ---------------------------------------------------------

def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([x if isinstance(x, str) else repr(float(x)) if isinstance(x, float) else x
                        for x in row])


def _gnuplot(path: Path, data: str, kind: str, xlabel: str, ylabel: str) -> None:
    if kind == "map":
        body = (f"set xlabel '{xlabel}'\nset ylabel '{ylabel}'\nset view map\n"
                f"splot '{data}' matrix nonuniform with image notitle\n")
    else:
        body = (f"set datafile separator ','\nset key autotitle columnhead\n"
                f"set xlabel '{xlabel}'\nset ylabel '{ylabel}'\n"
                f"plot '{data}' using 1:2 with linespoints\n")
    path.write_text("set terminal pngcairo\nset output '" + path.stem + ".png'\n" + body)


def _map(fn, items, threads):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# -- experiments -------------------------------------------------------------

def _ybeam_template(cfg):
    M, N, t = cfg["M"], cfg["N"], cfg["t"]
    return lambda x, y: y_network(M, N, x * t, y * t, t)


def _ybeam_packet(cfg):
    net = y_network(cfg["M"], cfg["N"], cfg["t"], cfg["t"], cfg["t"])
    return gaussian_packet(net, "A", cfg["N0"], cfg["alpha"], cfg["k"])


def _tau0(cfg):
    if cfg.get("tau0") is None:
        cfg["tau0"] = ballistic_time(2 * (cfg["M"] - cfg["N0"]), cfg["k"], cfg["t"])
    return cfg["tau0"]


def _window(cfg):
    if cfg.get("t_end") is None:
        cfg["t_end"] = ballistic_time(cfg["M"] - cfg["N0"] + cfg["N"], cfg["k"], cfg["t"])
    return time_grid(cfg["t_end"])


def run_star(cfg, out, threads, gauge):
    if cfg["network"]:
        net = load_network(cfg["network"], gauge)
    else:
        t_n = cfg["t"] / math.sqrt(cfg["m"]) if cfg["t_n"] is None else cfg["t_n"]
        cfg["t_n"] = t_n
        net = star_network(cfg["m"], cfg["M"], cfg["N"], t_n, cfg["t"])
    M = net.chain_map[cfg["input_chain"]].n_sites
    psi0 = gaussian_packet(net, cfg["input_chain"], cfg["N0"], cfg["alpha"], cfg["k"])
    if cfg["t_end"] is None:
        rest = max(c.n_sites for c in net.chains if c.label != cfg["input_chain"])
        cfg["t_end"] = ballistic_time(M - cfg["N0"] + rest // 2, cfg["k"], cfg["t"])
    times = time_grid(cfg["t_end"])
    states = spectrum_of(net).evolve_many(psi0, times)
    prob = np.abs(states) ** 2
    rows = [(float(tau), c.label, float(prob[i, net.chain_sites(c.label)].sum()))
            for i, tau in enumerate(times) for c in net.chains]
    _write_rows(out / "arm_weights.csv", ["tau", "chain", "weight"], rows)
    return ["arm_weights.csv"]


def run_ybeam(cfg, out, threads, gauge):
    xs = _linspace(cfg["grid"])
    scan = reflection_scan(_ybeam_template(cfg), xs, xs, _ybeam_packet(cfg), _tau0(cfg),
                           threads=threads)
    scan.to_csv(out / "reflection_scan.csv")
    scan.to_gnuplot_matrix(out / "reflection_scan.matrix")
    files = ["reflection_scan.csv", "reflection_scan.matrix"]
    if cfg["gnuplot"]:
        _gnuplot(out / "reflection_scan.gp", "reflection_scan.matrix", "map", "t_nB/t", "t_nC/t")
        files.append("reflection_scan.gp")
    return files


def run_entangler(cfg, out, threads, gauge):
    xs = _linspace(cfg["grid"])
    scan = max_concurrence_scan(_ybeam_template(cfg), xs, xs, _ybeam_packet(cfg), _window(cfg),
                                threads=threads)
    scan.to_csv(out / "concurrence_scan.csv")
    scan.to_gnuplot_matrix(out / "concurrence_scan.matrix")
    files = ["concurrence_scan.csv", "concurrence_scan.matrix"]
    if cfg["gnuplot"]:
        _gnuplot(out / "concurrence_scan.gp", "concurrence_scan.matrix", "map", "t_nB/t", "t_nC/t")
        files.append("concurrence_scan.gp")
    return files


def run_sweep(cfg, out, threads, gauge):
    obs = cfg["observable"]
    if obs not in ("R", "C"):
        raise ConfigError("key 'observable' must be 'R' or 'C'")
    xs = _linspace(cfg["grid"])
    template, psi0 = _ybeam_template(cfg), _ybeam_packet(cfg)
    if obs == "R":
        tau0 = _tau0(cfg)
        values = _map(lambda x: reflection_factor(template(x, x), psi0, tau0), xs, threads)
    else:
        times = _window(cfg)
        values = _map(lambda x: max_concurrence(template(x, x), psi0, times), xs, threads)
    _write_rows(out / "sweep.csv", ["t_n", obs], zip(map(float, xs), values))
    files = ["sweep.csv"]
    if cfg["gnuplot"]:
        _gnuplot(out / "sweep.gp", "sweep.csv", "line", "t_n/t", obs)
        files.append("sweep.gp")
    return files


def run_interferometer(cfg, out, threads, gauge):
    M, N, L, t = cfg["M"], cfg["N"], cfg["L"], cfg["t"]
    r = t / math.sqrt(2)
    deltas = list(range(cfg["delta_min"], cfg["delta_max"] + 1))
    if N + min(deltas) < 1:
        raise ConfigError("key 'delta_min': arm C would have no sites")

    def one(delta):
        net = interferometer_network(M, N, L, r, r, r, r, cfg["phi"], t, gauge, N_C=N + delta)
        psi0 = gaussian_packet(net, "A", cfg["N0"], cfg["alpha"], cfg["k"])
        return interference_intensity(net, psi0, ("D", cfg["r0"]), cfg["tau0"])

    values = _map(one, deltas, threads)
    _write_rows(out / "interference.csv", ["delta", "I"], zip(deltas, values))
    files = ["interference.csv"]
    if cfg["gnuplot"]:
        _gnuplot(out / "interference.gp", "interference.csv", "line", "Delta", "I")
        files.append("interference.gp")
    return files


def run_qring(cfg, out, threads, gauge):
    M, N, t = cfg["M"], cfg["N"], cfg["t"]
    cfg["t_nB"] = t / math.sqrt(2) if cfg["t_nB"] is None else cfg["t_nB"]
    cfg["t_nC"] = t / math.sqrt(2) if cfg["t_nC"] is None else cfg["t_nC"]
    if cfg["t_end"] is None:
        cfg["t_end"] = ballistic_time(2 * (M - cfg["N0"]), cfg["k"], t)
    times = time_grid(cfg["t_end"])

    def one(phi):
        net = q_ring_network(M, N, cfg["t_nB"], cfg["t_nC"], phi, t, gauge)
        psi0 = gaussian_packet(net, "A", cfg["N0"], cfg["alpha"], cfg["k"])
        prob = np.abs(spectrum_of(net).evolve_many(psi0, times)) ** 2
        return [(float(phi), float(tau), lab, float(prob[i, net.chain_sites(lab)].sum()))
                for i, tau in enumerate(times) for lab in ("A", "B", "C")]

    rows = [r for block in _map(one, cfg["phis"], threads) for r in block]
    _write_rows(out / "qring_weights.csv", ["phi", "tau", "chain", "weight"], rows)
    return ["qring_weights.csv"]


def run_film(cfg, out, threads, gauge):
    def one(Phi):
        return film_coefficients(cfg["N"], Phi, cfg["alpha"], cfg["N0"], cfg["t"], cfg["k"])

    values = _map(one, cfg["Phis"], threads)
    _write_rows(out / "film.csv", ["Phi", "T", "R"],
                [(float(p), T, R) for p, (T, R) in zip(cfg["Phis"], values)])
    files = ["film.csv"]
    if cfg["gnuplot"]:
        _gnuplot(out / "film.gp", "film.csv", "line", "Phi", "T")
        files.append("film.gp")
    return files


def ab_geometry(M, N0, N, paths):
    """Detector sites on D for source-detector path lengths ``paths``."""
    dets = []
    for p in paths:
        j = p - (M - N0) - N
        if j < 1:
            raise ConfigError(f"key 'paths': length {p} does not reach chain D")
        dets.append(("D", j))
    return dets


def run_ab(cfg, out, threads, gauge):
    M, N0, N, L, t = cfg["M"], cfg["N0"], cfg["N"], cfg["L"], cfg["t"]
    dets = ab_geometry(M, N0, N, cfg["paths"])
    if max(j for _, j in dets) > L:
        raise ConfigError("key 'L': chain D is shorter than the farthest detector")
    r = t / math.sqrt(2)
    phis = _linspace(cfg["phi"])

    def template(phi):
        return interferometer_network(M, N, L, r, r, r, r, phi, t, gauge)

    responses = flux_sweep_Q(template, phis, cfg["alphas"], ("A", N0), dets, k=cfg["k"],
                             threads=threads, path_lengths=cfg["paths"])
    rows = [(float(resp.alpha), resp.L, float(p), float(q))
            for resp in responses for p, q in zip(resp.phi, resp.Q)]
    _write_rows(out / "flux_Q.csv", ["alpha", "L", "phi", "Q"], rows)
    files = ["flux_Q.csv"]
    if cfg["gnuplot"]:
        (out / "flux_Q.gp").write_text(
            "set terminal pngcairo\nset output 'flux_Q.png'\nset datafile separator ','\n"
            "set xlabel 'phi'\nset ylabel 'Q'\n"
            "plot for [a in '" + " ".join(map(str, cfg["alphas"])) + "'] for [L in '"
            + " ".join(map(str, cfg["paths"])) + "'] 'flux_Q.csv' every ::1 using "
            "($1==a+0 && $2==L+0 ? $3 : 1/0):4 with lines title sprintf('alpha=%s L=%s', a, L)\n")
        files.append("flux_Q.gp")
    return files


def run_reduce_report(cfg, out, threads, gauge):
    try:
        scheme = scheme_from_dict(cfg["scheme"])
    except ValueError as exc:
        raise ConfigError(f"key 'scheme': {exc}") from None
    if cfg["network"]:
        net = load_network(cfg["network"], gauge)
    else:
        net = scheme.network(cfg["t"], gauge)
    dec = reduce_network(net, scheme)
    (out / "reduce_report.txt").write_text(dec.report())
    dec.write_htilde_csv(out / "htilde.csv")
    return ["reduce_report.txt", "htilde.csv"]


RUNNERS = {
    "star": run_star,
    "ybeam": run_ybeam,
    "entangler": run_entangler,
    "interferometer": run_interferometer,
    "qring": run_qring,
    "film": run_film,
    "ab": run_ab,
    "sweep": run_sweep,
    "reduce-report": run_reduce_report,
}


def run(experiment: str, cfg: dict, out: Path, threads: int = 1, gauge: str = "single") -> list:
    """Run one experiment with a resolved config; returns the files written."""
    out.mkdir(parents=True, exist_ok=True)
    try:
        files = RUNNERS[experiment](cfg, out, threads, gauge)
    except (NetworkError, SchemeMismatch) as exc:
        raise ConfigError(str(exc)) from None
    except (PacketOverflowError, WindowTooShort) as exc:
        raise NumericalError(f"{type(exc).__module__}: {exc}") from None
    except (np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
        raise NumericalError(f"{experiment}: {exc}") from None
    manifest = {"experiment": experiment, "version": __version__, "gauge": gauge,
                "threads": threads, "parameters": cfg, "outputs": files}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return files


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="blochnet", description=__doc__.split("\n\n")[0])
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", required=True, help="JSON parameter file")
    ap.add_argument("--out", default="out", help="output directory (default: out)")
    ap.add_argument("--threads", type=int, default=1, help="worker threads for scans")
    ap.add_argument("--gauge", choices=("single", "uniform"), default="single",
                    help="distribution of loop phases over the loop links")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config, args.experiment)
        files = run(args.experiment, cfg, Path(args.out), args.threads, args.gauge)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    for f in files:
        print(Path(args.out) / f)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
