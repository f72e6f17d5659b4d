"""Batch entry point: JSON-configured experiments, records and plot data on
disk, exit codes for CI gating.

Layout of a run directory:
  manifest.json    config echo, package/library versions, wall time
  records.csv      (or records.jsonl with format = "json")
  slopes.json      slope summaries, when the command fits any
  plotdata/*.dat   two-column (x, y) text files, one per fitted curve
  FAILED           marker file, present only when something failed

Exit status: 0 all records pass, 2 at least one record fails, 1 execution
error (bad config, solver blowup, ...).  Reruns with identical config and
seed are byte-identical except for the manifest's timestamp key.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import __version__
from .evolution import EvolutionConfig, solve
from .grid import FrequencyGrid, SpectralField, save_field, to_spectral
from .norms import AnisoIndex, MixedNormSpec, energy_alpha, mass
from .probes import (
    ProbeSweep,
    bilinear_sweep,
    linear_strichartz_sweep,
    lowfreq_l4_sweep,
    lw_band_sweep,
    lw_modulation_sweep,
    make_record,
    nonresonant_modulation_sweep,
    scaling_exponent_fit,
    scaling_norm_pair,
    illposedness_growth_study,
    slope_report,
    write_records_csv,
    write_records_jsonl,
)
from .symbols import DispersionParams, resonance_size_scan, transversality_check

COMMANDS = ("simulate", "conserve", "strichartz", "bilinear", "trilinear",
            "scaling", "illposedness", "resonance-scan", "transversality")

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class _Key:
    default: object
    kind: str
    help: str
    choices: tuple = ()


SCHEMA = {
    "command": _Key(None, "str", "experiment to run", COMMANDS),
    "alpha": _Key(2.5, "float", "dispersion exponent, 2 <= alpha < 4"),
    "seed": _Key(0, "int", "master seed for all randomized probes"),
    "workers": _Key(0, "int", "sweep worker pool size; 0 = logical cores"),
    "output_dir": _Key("fkpi-out", "str", "directory for run artifacts"),
    "format": _Key("csv", "str", "records file format", ("csv", "json")),
    "grid": {
        "length_x": _Key(TWO_PI, "float", "periodic box length in x"),
        "length_y": _Key(TWO_PI, "float", "periodic box length in y"),
        "modes_x": _Key(256, "int", "Fourier modes in x"),
        "modes_y": _Key(256, "int", "Fourier modes in y"),
    },
    "evolution": {
        "dt": _Key(1e-3, "float", "time step"),
        "T": _Key(1.0, "float", "final time"),
        "scheme": _Key("etdrk4", "str", "time stepper", ("etdrk4", "strang")),
        "dealias": _Key(True, "bool", "2/3-rule dealiasing of the product"),
        "snapshot_stride": _Key(50, "int", "record every k-th step"),
    },
    "probe": {
        "dyadic_range": _Key(None, "float_list",
                             "sweep points (powers of two, ascending); "
                             "omit the section for the command's canonical sweep"),
        "trials_per_point": _Key(4, "int", "random trials averaged per point"),
        "tolerance_lo": _Key(None, "float_or_null",
                             "slope band floor; null = one-sided"),
        "tolerance_hi": _Key(0.1, "float", "slope band cap"),
    },
    "data": {
        "kind": _Key("smooth", "str", "initial data for simulate/conserve",
                     ("smooth", "zero")),
        "amplitude": _Key(0.05, "float", "amplitude of the smooth profile"),
        "l2_norm": _Key(0.0, "float", "if > 0, rescale data to this L2 norm"),
    },
    "conserve": {
        "mass_tol": _Key(1e-6, "float", "relative mass drift cap"),
        "energy_tol": _Key(1e-4, "float", "relative energy drift cap"),
    },
    "strichartz": {
        "kind": _Key("linear", "str", "which space-time ratio to sweep",
                     ("linear", "lowfreq")),
        "q": _Key(4.0, "float", "time exponent of the mixed norm"),
        "r": _Key(4.0, "float", "space exponent of the mixed norm"),
        "T": _Key(1.0, "float", "time window at the first band"),
        "snapshots": _Key(128, "int", "trajectory snapshots per window"),
        "eta_sigma": _Key(2.0, "float", "transverse width of the data bump"),
        "comparator_shift": _Key(0.0, "float",
                                 "multiply the comparator by N^shift "
                                 "(negative control: -0.25)"),
    },
    "bilinear": {
        "n2": _Key(2.0, "float", "low band held fixed during the N1 sweep"),
        "nk": _Key(20, "int", "output-frequency cells per axis"),
        "nw": _Key(64, "int", "level-set nodes per slice"),
        "nx": _Key(48, "int", "xi nodes per slice"),
        "comparator_shift": _Key(0.0, "float",
                                 "multiply the comparator by N1^shift"),
    },
    "trilinear": {
        "regime": _Key("lw_band", "str", "which trilinear sweep to run",
                       ("lw_band", "lw_modulation", "nonresonant")),
        "n1": _Key(8.0, "float", "high band (fixed for modulation sweeps)"),
        "n2": _Key(2.0, "float", "second band"),
        "l": _Key(1.0, "float", "modulation width for band sweeps"),
        "l3": _Key(0.0, "float", "output modulation; 0 = regime default"),
        "nodes_tau": _Key(16, "int", "base tau nodes per patch"),
        "nodes_xi": _Key(12, "int", "xi nodes per patch"),
        "nodes_eta": _Key(12, "int", "eta nodes per patch"),
        "comparator_shift": _Key(0.0, "float",
                                 "multiply the comparator by (sweep var)^shift "
                                 "(modulation regimes only)"),
    },
    "scaling": {
        "s1": _Key(0.0, "float", "x-weight of the fitted norm"),
        "s2": _Key(0.0, "float", "y-weight of the fitted norm"),
        "lambdas": _Key((0.5, 2.0 ** -0.5, 1.0, 2.0 ** 0.5, 2.0), "float_list",
                        "rescaling factors for the fit"),
    },
    "illposedness": {
        "theta": _Key(0.05, "float", "closeness to the critical gamma scaling"),
        "n_list": _Key((256.0, 512.0, 1024.0, 2048.0, 4096.0, 8192.0),
                       "float_list", "dyadic frequencies of the growth sweep"),
        "t": _Key(1.0, "float", "evaluation time of the second iterate"),
        "quad_res": _Key(12, "int", "box quadrature resolution"),
        "s1": _Key(0.0, "float", "x-weight of the measured norm"),
        "s2": _Key(0.0, "float", "y-weight of the measured norm"),
    },
    "scan": {
        "N": _Key(256.0, "float", "frequency separation of the boxes"),
        "theta": _Key(0.05, "float", "gamma = N^(-(alpha-1)/2 - theta)"),
        "samples": _Key(10000, "int", "uniform samples over the box pair"),
    },
    "transversality": {
        "n_max": _Key(16.0, "float", "magnitude band of the high frequency"),
        "n_min": _Key(2.0, "float", "magnitude band of the low frequency"),
        "samples": _Key(1000, "int", "resonant pairs to sample"),
        "c": _Key(0.1, "float", "resonance acceptance |Omega| <= c |Omega1|"),
    },
}


@dataclass(frozen=True)
class RunConfig:
    command: str
    alpha: float
    seed: int
    workers: int
    output_dir: str
    format: str
    grid: FrequencyGrid | None
    evolution: EvolutionConfig | None
    probe: ProbeSweep | None
    sections: dict
    echo: dict


def _coerce(path, value, key):
    kind = key.kind
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueError(f"'{path}' must be a number, got {value!r}")
        return float(value)
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValueError(f"'{path}' must be an integer, got {value!r}")
        return int(value)
    if kind == "bool":
        if not isinstance(value, bool):
            raise ValueError(f"'{path}' must be true or false, got {value!r}")
        return value
    if kind == "str":
        if not isinstance(value, str):
            raise ValueError(f"'{path}' must be a string, got {value!r}")
        if key.choices and value not in key.choices:
            raise ValueError(
                f"'{path}' must be one of {list(key.choices)}, got {value!r}")
        return value
    if kind == "float_list":
        if not isinstance(value, (list, tuple)) or not value:
            raise ValueError(f"'{path}' must be a nonempty list of numbers")
        out = []
        for v in value:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ValueError(f"'{path}' must hold numbers, got {v!r}")
            out.append(float(v))
        return tuple(out)
    if kind == "float_or_null":
        if value is None:
            return None
        return _coerce(path, value, _Key(None, "float", ""))
    raise AssertionError(f"unhandled kind {kind}")


def _walk_schema(raw):
    """Validate a raw JSON object against SCHEMA; unknown keys are fatal."""
    cfg = {}
    for key, val in raw.items():
        if key not in SCHEMA:
            raise ValueError(f"unknown key '{key}'")
        spec = SCHEMA[key]
        if isinstance(spec, dict):
            if not isinstance(val, dict):
                raise ValueError(f"'{key}' must be a JSON object")
            sub = {}
            for k2, v2 in val.items():
                if k2 not in spec:
                    raise ValueError(f"unknown key '{key}.{k2}'")
                sub[k2] = _coerce(f"{key}.{k2}", v2, spec[k2])
            cfg[key] = sub
        else:
            cfg[key] = _coerce(key, val, spec)
    return cfg


def _fill_section(name, present):
    spec = SCHEMA[name]
    out = dict(present or {})
    for k2, key in spec.items():
        out.setdefault(k2, key.default)
    return out


def parse_config(text, command=None):
    """Parse and validate a JSON config; `command` overrides/fills the key."""
    try:
        raw = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ValueError(f"config is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ValueError("config must be a JSON object")
    cfg = _walk_schema(raw)

    cmd = cfg.get("command")
    if command is not None:
        if cmd is not None and cmd != command:
            raise ValueError(
                f"command mismatch: '{command}' on the command line but "
                f"'{cmd}' in the config")
        cmd = command
    if cmd is None:
        raise ValueError("command is required")
    if cmd not in COMMANDS:
        raise ValueError(f"'command' must be one of {list(COMMANDS)}, got {cmd!r}")

    alpha = cfg.get("alpha", SCHEMA["alpha"].default)
    if not (2.0 <= alpha < 4.0):
        raise ValueError(f"alpha must lie in [2, 4), got {alpha}")
    seed = cfg.get("seed", SCHEMA["seed"].default)
    workers = cfg.get("workers", SCHEMA["workers"].default)
    if workers < 0:
        raise ValueError(f"workers must be nonnegative, got {workers}")

    grid = None
    if "grid" in cfg:
        g = _fill_section("grid", cfg["grid"])
        grid = FrequencyGrid(length_x=g["length_x"], length_y=g["length_y"],
                             modes_x=g["modes_x"], modes_y=g["modes_y"])
    evolution = None
    if "evolution" in cfg:
        e = _fill_section("evolution", cfg["evolution"])
        evolution = EvolutionConfig(dt=e["dt"], T=e["T"], scheme=e["scheme"],
                                    dealias=e["dealias"],
                                    snapshot_stride=e["snapshot_stride"])
    probe = None
    if "probe" in cfg:
        p = _fill_section("probe", cfg["probe"])
        if p["dyadic_range"] is None:
            raise ValueError("'probe.dyadic_range' is required when the "
                             "probe section is given")
        lo = -math.inf if p["tolerance_lo"] is None else p["tolerance_lo"]
        probe = ProbeSweep(alpha=alpha, dyadic_range=p["dyadic_range"],
                           trials_per_point=p["trials_per_point"], seed=seed,
                           tolerance_band=(lo, p["tolerance_hi"]))

    sections = {
        name: _fill_section(name, cfg.get(name))
        for name in ("data", "conserve", "strichartz", "bilinear", "trilinear",
                     "scaling", "illposedness", "scan", "transversality")
    }
    echo = {"command": cmd, "alpha": alpha, "seed": seed, "workers": workers,
            "output_dir": cfg.get("output_dir", SCHEMA["output_dir"].default),
            "format": cfg.get("format", SCHEMA["format"].default)}
    for name in ("grid", "evolution", "probe"):
        if name in cfg:
            echo[name] = _fill_section(name, cfg[name])
    echo.update(sections)
    return RunConfig(
        command=cmd, alpha=alpha, seed=seed, workers=workers,
        output_dir=echo["output_dir"], format=echo["format"],
        grid=grid, evolution=evolution, probe=probe,
        sections=sections, echo=echo)


def apply_overrides(raw, assignments):
    """Apply --set key=value pairs (dotted paths) onto the raw JSON dict."""
    for item in assignments:
        if "=" not in item:
            raise ValueError(f"--set needs key=value, got {item!r}")
        path, text = item.split("=", 1)
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        parts = path.split(".")
        if len(parts) == 1:
            raw[parts[0]] = value
        elif len(parts) == 2:
            raw.setdefault(parts[0], {})
            if not isinstance(raw[parts[0]], dict):
                raise ValueError(f"'{parts[0]}' is not a section")
            raw[parts[0]][parts[1]] = value
        else:
            raise ValueError(f"--set supports at most one dot, got {path!r}")
    return raw


# ------------------------------------------------------------------ handlers


def _smooth_data(grid, amplitude, l2_target, seed):
    rng = np.random.default_rng([seed, 101])
    x, y = np.meshgrid(grid.x, grid.y, indexing="ij")
    samples = amplitude * sum(
        rng.normal() * np.cos(i * x + j * y + rng.uniform(0.0, TWO_PI))
        for i in (1, 2)
        for j in (-1, 0, 1)
    )
    u0 = to_spectral(samples, grid)
    if l2_target > 0.0:
        norm = math.sqrt(mass(u0))
        if norm > 0.0:
            u0 = SpectralField(grid, u0.coeffs * (l2_target / norm), is_real=True)
    return u0


def _rel_drift(value, reference):
    if value == reference:
        return 0.0
    return abs(value - reference) / max(abs(reference), 1e-300)


def _evolve(config):
    params = DispersionParams(config.alpha)
    grid = config.grid or FrequencyGrid(length_x=TWO_PI, length_y=TWO_PI,
                                        modes_x=256, modes_y=256)
    ev = config.evolution or EvolutionConfig(dt=1e-3, T=1.0, snapshot_stride=50)
    data = config.sections["data"]
    if data["kind"] == "zero":
        u0 = to_spectral(np.zeros((grid.modes_x, grid.modes_y)), grid)
    else:
        u0 = _smooth_data(grid, data["amplitude"], data["l2_norm"], config.seed)
    traj = solve(params, u0, ev)
    masses = [mass(f) for f in traj.fields]
    energies = [energy_alpha(params, f) for f in traj.fields]
    return params, traj, masses, energies


def _run_simulate(config):
    params, traj, masses, energies = _evolve(config)
    base = {"alpha": config.alpha, "dt": traj.config.dt, "T": traj.config.T,
            "scheme": traj.config.scheme, "seed": config.seed}
    records = [
        make_record("simulate_mass", base, masses[-1], masses[0], True,
                    note="final vs initial"),
        make_record("simulate_energy", base, energies[-1], energies[0], True,
                    note="final vs initial"),
    ]
    curves = [("mass_t", traj.times, masses), ("energy_t", traj.times, energies)]
    final = os.path.join(config.output_dir, "final_state.fkpi")
    save_field(traj.fields[-1], final)
    return records, curves


def _run_conserve(config):
    params, traj, masses, energies = _evolve(config)
    tol = config.sections["conserve"]
    base = {"alpha": config.alpha, "dt": traj.config.dt, "T": traj.config.T,
            "scheme": traj.config.scheme, "seed": config.seed}
    mass_drift = max(_rel_drift(m, masses[0]) for m in masses)
    energy_drift = max(_rel_drift(e, energies[0]) for e in energies)
    records = [
        make_record("mass_drift", base, mass_drift, tol["mass_tol"],
                    mass_drift <= tol["mass_tol"]),
        make_record("energy_drift", base, energy_drift, tol["energy_tol"],
                    energy_drift <= tol["energy_tol"]),
    ]
    curves = [
        ("mass_drift_t", traj.times, [_rel_drift(m, masses[0]) for m in masses]),
        ("energy_drift_t", traj.times,
         [_rel_drift(e, energies[0]) for e in energies]),
    ]
    return records, curves


def _default_sweep(config, dyadic_range, trials, band):
    if config.probe is not None:
        return config.probe
    return ProbeSweep(alpha=config.alpha, dyadic_range=dyadic_range,
                      trials_per_point=trials, seed=config.seed,
                      tolerance_band=band)


def _run_strichartz(config):
    params = DispersionParams(config.alpha)
    sec = config.sections["strichartz"]
    workers = config.workers or os.cpu_count()
    if sec["kind"] == "lowfreq":
        sweep = _default_sweep(
            config, tuple(2.0 ** -k for k in range(6, 0, -1)), 1, (-0.2, 0.2))
        records = lowfreq_l4_sweep(params, sweep, grid=config.grid,
                                   T=sec["T"], snapshots=sec["snapshots"],
                                   eta_sigma=sec["eta_sigma"], workers=workers,
                                   comparator_shift=sec["comparator_shift"])
        name = "lowfreq_l4_N"
    else:
        sweep = _default_sweep(config, (8.0, 16.0, 32.0, 64.0, 128.0), 1,
                               (-math.inf, 0.1))
        spec = MixedNormSpec(sec["q"], sec["r"])
        records = linear_strichartz_sweep(
            params, spec, sweep, grid=config.grid, T=sec["T"],
            snapshots=sec["snapshots"], eta_sigma=sec["eta_sigma"],
            workers=workers, comparator_shift=sec["comparator_shift"])
        name = "linear_strichartz_band_n"
    curves = [(name, sweep.dyadic_range, [r.ratio for r in records[:-1]])]
    return records, curves


def _run_bilinear(config):
    params = DispersionParams(config.alpha)
    sec = config.sections["bilinear"]
    sweep = _default_sweep(config, (8.0, 16.0, 32.0, 64.0), 8,
                           (-math.inf, 0.1))
    records = bilinear_sweep(params, sec["n2"], sweep,
                             workers=config.workers or os.cpu_count(),
                             comparator_shift=sec["comparator_shift"],
                             resolution=(sec["nk"], sec["nw"], sec["nx"]))
    curves = [("bilinear_n1", sweep.dyadic_range,
               [r.ratio for r in records[:-1]])]
    return records, curves


def _run_trilinear(config):
    params = DispersionParams(config.alpha)
    sec = config.sections["trilinear"]
    nodes = (sec["nodes_tau"], sec["nodes_xi"], sec["nodes_eta"])
    workers = config.workers or os.cpu_count()
    shift = sec["comparator_shift"]
    if sec["regime"] == "lw_band":
        if shift != 0.0:
            raise ValueError(
                "trilinear.comparator_shift applies to the modulation sweeps "
                "only, not to the lw_band regime")
        sweep = _default_sweep(config, (8.0, 16.0, 32.0, 64.0), 4,
                               (-math.inf, 0.2))
        records = lw_band_sweep(params, sec["n2"], sweep, l=sec["l"],
                                workers=workers, nodes=nodes)
        var = "lw_n1"
    elif sec["regime"] == "lw_modulation":
        sweep = _default_sweep(config, (1.0, 2.0, 4.0, 8.0), 4,
                               (-math.inf, 0.2))
        records = lw_modulation_sweep(params, sec["n1"], sec["n2"], sweep,
                                      workers=workers, comparator_shift=shift,
                                      nodes=nodes)
        var = "lw_modulation_l"
    else:
        sweep = _default_sweep(config, (1.0, 2.0, 4.0, 8.0), 4,
                               (-math.inf, 0.2))
        l3 = sec["l3"] if sec["l3"] > 0.0 else None
        records = nonresonant_modulation_sweep(
            params, sec["n1"], sec["n2"], sweep, l3=l3, workers=workers,
            comparator_shift=shift, nodes=nodes)
        var = "nonresonant_l1"
    curves = [(var, sweep.dyadic_range, [r.ratio for r in records[:-1]])]
    return records, curves


def _run_scaling(config):
    params = DispersionParams(config.alpha)
    sec = config.sections["scaling"]
    idx = AnisoIndex(sec["s1"], sec["s2"])
    grid = config.grid or FrequencyGrid(length_x=64.0 * math.pi,
                                        length_y=64.0 * math.pi,
                                        modes_x=512, modes_y=1024)
    record = scaling_exponent_fit(params, idx, lambdas=sec["lambdas"], grid=grid)
    norms = [scaling_norm_pair(params, idx, lam, grid)[0]
             for lam in sec["lambdas"]]
    curves = [("scaling_norm_lambda", sec["lambdas"], norms)]
    return [record], curves


def _run_illposedness(config):
    params = DispersionParams(config.alpha)
    sec = config.sections["illposedness"]
    records = illposedness_growth_study(
        params, sec["theta"], sec["n_list"],
        sbar=AnisoIndex(sec["s1"], sec["s2"]), t=sec["t"],
        quad_res=sec["quad_res"])
    curves = [("illposedness_norm_N", sec["n_list"],
               [r.measured for r in records[:-1]])]
    return records, curves


def _band_records(name, base, pairs, lo, hi):
    records = []
    for law, rmin, rmax in pairs:
        ok = lo <= rmin and rmax <= hi
        inputs = dict(base, law=law, ratio_min=rmin)
        records.append(make_record(name, inputs, rmax, hi, ok,
                                   note=f"band [{lo}, {hi}]"))
    return records


def _run_resonance_scan(config):
    params = DispersionParams(config.alpha)
    sec = config.sections["scan"]
    gamma = sec["N"] ** (-(config.alpha - 1.0) / 2.0 - sec["theta"])
    report = resonance_size_scan(params, sec["N"], gamma,
                                 samples=sec["samples"], seed=config.seed)
    base = {"alpha": config.alpha, "N": sec["N"], "gamma": gamma,
            "samples": sec["samples"], "seed": config.seed}
    pairs = [
        ("omega1_over_N^alpha*gamma",
         report.omega1_ratio_min, report.omega1_ratio_max),
        ("omega_over_N^(alpha-1)*gamma^2",
         report.omega_ratio_min, report.omega_ratio_max),
    ]
    return _band_records("resonance_scan", base, pairs, 0.125, 8.0), []


def _run_transversality(config):
    params = DispersionParams(config.alpha)
    sec = config.sections["transversality"]
    report = transversality_check(params, sec["n_max"], sec["n_min"],
                                  samples=sec["samples"], seed=config.seed,
                                  c=sec["c"])
    base = {"alpha": config.alpha, "n_max": sec["n_max"], "n_min": sec["n_min"],
            "c": sec["c"], "samples": sec["samples"], "seed": config.seed}
    pairs = [
        ("cross_over_Nmax^(alpha/2+1)*Nmin",
         report.cross_ratio_min, report.cross_ratio_max),
        ("slope_gap_over_Nmax^(alpha/2)",
         report.slope_gap_ratio_min, report.slope_gap_ratio_max),
    ]
    return _band_records("transversality", base, pairs, 0.0625, 16.0), []


HANDLERS = {
    "simulate": _run_simulate,
    "conserve": _run_conserve,
    "strichartz": _run_strichartz,
    "bilinear": _run_bilinear,
    "trilinear": _run_trilinear,
    "scaling": _run_scaling,
    "illposedness": _run_illposedness,
    "resonance-scan": _run_resonance_scan,
    "transversality": _run_transversality,
}


# ----------------------------------------------------------------- artifacts


def _write_curves(out_dir, curves):
    plot_dir = os.path.join(out_dir, "plotdata")
    os.makedirs(plot_dir, exist_ok=True)
    for name, xs, ys in curves:
        lines = [f"{repr(float(x))} {repr(float(y))}" for x, y in zip(xs, ys)]
        with open(os.path.join(plot_dir, name + ".dat"), "w") as fh:
            fh.write("\n".join(lines) + "\n")


def _write_manifest(out_dir, config, n_records, failures, wall, error=None):
    manifest = {
        "command": config.command,
        "config": config.echo,
        "versions": {
            "fkpi_lab": __version__,
            "numpy": np.__version__,
            "python": ".".join(str(v) for v in sys.version_info[:3]),
        },
        "records": n_records,
        "failures": failures,
        "timestamp": {"unix": time.time(), "wall_time_s": wall},
    }
    if error is not None:
        manifest["error"] = error
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run(config):
    """Execute one experiment; returns the process exit status."""
    out = config.output_dir
    os.makedirs(out, exist_ok=True)
    marker = os.path.join(out, "FAILED")
    if os.path.exists(marker):
        os.remove(marker)
    start = time.monotonic()
    try:
        records, curves = HANDLERS[config.command](config)
    except Exception as exc:  # noqa: BLE001 - the contract is an exit code
        wall = time.monotonic() - start
        _write_manifest(out, config, 0, [], wall, error=str(exc))
        with open(marker, "w") as fh:
            fh.write(f"error: {exc}\n")
        print(f"error: {exc}", file=sys.stderr)
        return 1
    wall = time.monotonic() - start

    if config.format == "json":
        write_records_jsonl(records, os.path.join(out, "records.jsonl"))
    else:
        write_records_csv(records, os.path.join(out, "records.csv"))
    slopes = slope_report(records)
    if slopes:
        with open(os.path.join(out, "slopes.json"), "w") as fh:
            json.dump(slopes, fh, indent=2, sort_keys=True)
            fh.write("\n")
    _write_curves(out, curves)
    failures = [r.probe_name for r in records if not r.passed]
    _write_manifest(out, config, len(records), failures, wall)
    if failures:
        with open(marker, "w") as fh:
            fh.write("\n".join(failures) + "\n")
        return 2
    return 0


# ----------------------------------------------------------------------- CLI


def _describe(name, key):
    text = key.help
    if key.choices:
        text += f" (one of {', '.join(str(c) for c in key.choices)})"
    if name == "command":
        shown = "required"
    else:
        default = list(key.default) if isinstance(key.default, tuple) else key.default
        shown = json.dumps(default)
    return f"  {name:<28} default {shown:<22} {text}"


def _schema_help():
    lines = ["configuration keys (JSON file; override with --set key=value):"]
    for key, spec in SCHEMA.items():
        if isinstance(spec, dict):
            lines += [_describe(f"{key}.{k2}", sub) for k2, sub in spec.items()]
        else:
            lines.append(_describe(key, spec))
    lines += [
        "",
        "grid/evolution/probe sections are optional; when omitted each command",
        "uses its canonical setup:",
        "  simulate, conserve   2pi periodic box, 256x256 modes, dt 1e-3, T 1",
        "  strichartz linear    512x64 modes on a 2pi box, N in {8..128}, "
        "slope cap 0.1",
        "  strichartz lowfreq   512x64 modes on a (256pi, 16pi) box, N in "
        "{1/64..1/2}, band [-0.2, 0.2]",
        "  bilinear             N1 in {8..64}, 8 trials per point, slope cap 0.1",
        "  trilinear            N1 in {8..64} or L in {1..8}, 4 trials, "
        "slope cap 0.2",
        "  scaling              512x1024 modes on a 64pi box",
        "",
        "exit status: 0 = all records pass, 2 = some record failed, "
        "1 = execution error",
    ]
    return "\n".join(lines)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fkpi-lab",
        description="Dispersive-estimate laboratory: run one experiment and "
                    "write its records, slopes, and plot data.",
        epilog=_schema_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("command", choices=COMMANDS, nargs="?", default=None,
                        help="experiment to run (may also come from the config)")
    parser.add_argument("--config", metavar="FILE",
                        help="JSON configuration file")
    parser.add_argument("--set", metavar="KEY=VALUE", action="append",
                        default=[], dest="overrides",
                        help="override one config key (dotted paths reach "
                             "into sections)")
    parser.add_argument("--output-dir", metavar="DIR",
                        help="shorthand for --set output_dir=DIR")
    parser.add_argument("--seed", metavar="S", type=int,
                        help="shorthand for --set seed=S")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.config is not None:
            with open(args.config) as fh:
                text = fh.read()
        else:
            text = "{}"
        raw = json.loads(text) if text.strip() else {}
        if not isinstance(raw, dict):
            raise ValueError("config must be a JSON object")
        apply_overrides(raw, args.overrides)
        if args.output_dir is not None:
            raw["output_dir"] = args.output_dir
        if args.seed is not None:
            raw["seed"] = args.seed
        config = parse_config(json.dumps(raw), command=args.command)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
