"""Command-line interface: simulate, fit, invert-field, eseem, select-spins, report.

Exit codes: 0 success, 1 usage or configuration error, 2 data-format
error in an input file, 3 fit non-convergence (the report is still
written, flagged).  Config files are JSON with nested sections; flags
override config values.  Frequencies are ordinary MHz and angles
degrees at this boundary; angular rad/us quantities appear only inside
the API.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .core import (TWO_PI, ConfigError, DEFAULT_CONSTANTS, NvSenseError, Trace,
                   TraceFormatError, XKind)
from .deer import DeerSpectrumModel, TargetSpinModel
from .eseem import (BathModel, EseemNucleus, bath_decoherence, cpmg_echo_model,
                    eseem_modulation, load_hyperfine_table, nucleus_from_record)
from .fitting import (FitResult, fit_deer_rabi, fit_gaussian_peak, fit_rabi,
                      select_spin_count)
from .hamiltonian import TransitionPair, g_value, invert_field
from .io import read_json, read_trace, write_columns, write_json, write_trace
from .presets import (DEFAULT_N_AVG, NULL_CENTERS, carbon_bath,
                      default_sequence, default_truth, detector, main_field)
from .synth import (Cpmg8Truth, DetectorModel, OdmrTruth, RabiTruth,
                    SequenceKind, SequenceSpec, coherence_trace,
                    difference_signal, normalized_channels, synthesize)

_PRESET_NAMES = ("coupled-pair",) + tuple(NULL_CENTERS)


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as ConfigError (exit 1)."""

    def error(self, message):
        raise ConfigError(message)


def _float_list(text: str) -> list:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated number list, got {text!r}")


# ---------------------------------------------------------------- config

_DETECTOR_SCHEMA = {"counts_bright": float, "counts_dark": float,
                    "contrast": float, "n_avg": int, "noiseless": bool,
                    "n_avg_is_total": bool}
_SEQUENCE_SCHEMA = {"kind": str, "x_start": float, "x_stop": float,
                    "x_num": int, "tau_us": float, "n_pulses": int,
                    "channels": [str]}
_TRUTH_SCHEMA = {"b0_mt": float, "theta_deg": float, "linewidth_mhz": float,
                 "transfer": float, "f_mhz": float, "t0_us": float,
                 "t2_us": float, "b_rms_ut": float, "nuclei": [str],
                 "center_mhz": float, "width_mhz": float, "amplitude": float,
                 "baseline": float, "omegas_mhz": [float]}
_SIMULATE_SCHEMA = {"seed": int, "workers": int, "out": str, "preset": str,
                    "detector": _DETECTOR_SCHEMA,
                    "sequence": _SEQUENCE_SCHEMA,
                    "truth": _TRUTH_SCHEMA}
_FIT_SCHEMA = {"kind": str, "channel": str, "n_spins": int, "in": str,
               "out": str}


def _check_scalar(value, expected, where):
    if expected is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif expected is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif expected is bool:
        ok = isinstance(value, bool)
    else:
        ok = isinstance(value, str)
    if not ok:
        raise ConfigError(f"config field {where!r} must be {expected.__name__}, "
                          f"got {value!r}")


def _validate_config(obj, schema, path="") -> None:
    if not isinstance(obj, dict):
        raise ConfigError(f"config section {path or '<top>'!r} must be an object")
    for key, value in obj.items():
        where = f"{path}.{key}" if path else key
        if key not in schema:
            raise ConfigError(f"config: unknown key {where!r}")
        expected = schema[key]
        if isinstance(expected, dict):
            _validate_config(value, expected, where)
        elif isinstance(expected, list):
            if not isinstance(value, list):
                raise ConfigError(f"config field {where!r} must be a list")
            for i, item in enumerate(value):
                _check_scalar(item, expected[0], f"{where}[{i}]")
        else:
            _check_scalar(value, expected, where)


def _load_config(name, schema) -> dict:
    if name is None:
        return {}
    path = name
    if not os.path.exists(path) and os.sep not in name:
        config_dir = os.environ.get("NVSENSE_CONFIG_DIR")
        if config_dir and os.path.exists(os.path.join(config_dir, name)):
            path = os.path.join(config_dir, name)
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {name}")
    try:
        with open(path, "r") as handle:
            obj = json.load(handle)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, "
                          f"column {exc.colno}: {exc.msg}") from None
    _validate_config(obj, schema)
    return obj


def _config_hash(effective: dict) -> str:
    canonical = json.dumps(effective, sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode()).hexdigest()


def _merge(config: dict, section: str, key: str, flag_value, default):
    """flag > config > default."""
    if flag_value is not None:
        return flag_value
    block = config.get(section, {}) if section else config
    value = block.get(key)
    return default if value is None else value


# ---------------------------------------------------------------- simulate

def _cmd_simulate(args) -> int:
    config = _load_config(args.config, _SIMULATE_SCHEMA)
    kind_str = _merge(config, "sequence", "kind", args.kind, None)
    if kind_str is None:
        raise ConfigError("simulate needs --kind (or sequence.kind in config)")
    try:
        kind = SequenceKind(kind_str)
    except ValueError:
        raise ConfigError(f"unknown kind {kind_str!r}; choose from "
                          f"{[k.value for k in SequenceKind]}") from None
    preset = _merge(config, None, "preset", args.preset, "coupled-pair")
    if preset not in _PRESET_NAMES:
        raise ConfigError(f"unknown preset {preset!r}; choose from "
                          f"{_PRESET_NAMES}")
    null_center = NULL_CENTERS.get(preset)

    base_seq = default_sequence(kind)
    x_start = _merge(config, "sequence", "x_start", args.x_start,
                     float(base_seq.grid[0]))
    x_stop = _merge(config, "sequence", "x_stop", args.x_stop,
                    float(base_seq.grid[-1]))
    x_num = _merge(config, "sequence", "x_num", args.x_num, base_seq.grid.size)
    tau_default = null_center.tau_us if (null_center and base_seq.tau) else base_seq.tau
    tau = _merge(config, "sequence", "tau_us", args.tau_us, tau_default)
    n_pulses = _merge(config, "sequence", "n_pulses", args.n_pulses,
                      base_seq.n_pulses)
    channels = config.get("sequence", {}).get("channels")
    if x_num < 2:
        raise ConfigError("sequence.x_num must be at least 2")
    try:
        seq = SequenceSpec(kind=kind, grid=np.linspace(x_start, x_stop, x_num),
                           tau=tau, n_pulses=n_pulses,
                           channels=tuple(channels) if channels else None)
        truth = _build_truth(kind, args, config, null_center)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    contrast_default = null_center.contrast if null_center else 0.166
    contrast = _merge(config, "detector", "contrast", args.contrast,
                      contrast_default)
    n_avg_default = (null_center.n_avg
                     if null_center and kind is SequenceKind.CPMG_DEER
                     else DEFAULT_N_AVG[kind])
    n_avg = _merge(config, "detector", "n_avg", args.n_avg, n_avg_default)
    seed = _merge(config, None, "seed", args.seed, 1)
    workers = _merge(config, None, "workers", args.workers, 1)
    try:
        det = detector(n_avg=n_avg, contrast=contrast, seed=seed,
                       noiseless=args.noiseless
                       or config.get("detector", {}).get("noiseless", False),
                       n_avg_is_total=args.n_avg_total
                       or config.get("detector", {}).get("n_avg_is_total", False))
        bright = _merge(config, "detector", "counts_bright", args.counts_bright,
                        None)
        dark = _merge(config, "detector", "counts_dark", args.counts_dark, None)
        if bright is not None or dark is not None:
            det = DetectorModel(
                counts_bright=bright if bright is not None else det.counts_bright,
                counts_dark=dark if dark is not None else det.counts_dark,
                n_avg=det.n_avg, seed=det.seed, noiseless=det.noiseless,
                n_avg_is_total=det.n_avg_is_total)
        trace = synthesize(seq, truth, det, workers=workers)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    out = _merge(config, None, "out", args.out, "trace.csv")
    comments = (
        f"kind: {kind.value}",
        f"preset: {preset}",
        f"seed: {seed}",
        f"n_avg: {trace.n_avg} per point per channel",
        f"tau_us: {seq.tau}" if seq.tau else "tau_us: none",
        f"version: {__version__}",
    )
    write_trace(out, trace, comments=comments)
    print(f"wrote {out}: {kind.value}, {trace.x.size} points, "
          f"channels {', '.join(trace.channel_names)}")
    return 0


def _build_truth(kind, args, config, null_center):
    t = dict(config.get("truth", {}))
    for key, flag in (("b0_mt", args.b0_mt), ("theta_deg", args.theta_deg),
                      ("linewidth_mhz", args.linewidth_mhz),
                      ("transfer", args.transfer), ("f_mhz", args.f_mhz),
                      ("t0_us", args.t0_us), ("t2_us", args.t2_us),
                      ("b_rms_ut", args.b_rms_ut),
                      ("center_mhz", args.center_mhz),
                      ("width_mhz", args.width_mhz),
                      ("amplitude", args.amplitude),
                      ("baseline", args.baseline)):
        if flag is not None:
            t[key] = flag
    if args.omegas_mhz is not None:
        t["omegas_mhz"] = _float_list(args.omegas_mhz)
    if args.nuclei is not None:
        t["nuclei"] = [s.strip() for s in args.nuclei.split(",") if s.strip()]

    field = main_field()
    b0 = t.get("b0_mt", null_center.b0 if null_center else field.b0)
    theta = math.radians(t.get("theta_deg", math.degrees(field.theta)))

    if kind is SequenceKind.PULSED_ODMR:
        base = OdmrTruth(b0=b0, theta=theta)
        return OdmrTruth(b0=b0, theta=theta,
                         linewidth_mhz=t.get("linewidth_mhz",
                                             base.linewidth_mhz),
                         transfer=t.get("transfer", base.transfer))
    if kind is SequenceKind.RABI:
        return RabiTruth(f_mhz=t.get("f_mhz", 5.50),
                         t0_us=t.get("t0_us", 0.67))
    if kind is SequenceKind.CPMG8:
        labels = t.get("nuclei")
        if labels is None:
            labels = [] if null_center else ["near-13c", "14n"]
        table = load_hyperfine_table()
        unknown = [lab for lab in labels if lab not in table]
        if unknown:
            raise ConfigError(f"unknown nuclei {unknown}; table has "
                              f"{sorted(table)}")
        nuclei = tuple(nucleus_from_record(table[lab], b0) for lab in labels)
        bath = None
        b_rms = t.get("b_rms_ut", 4.0)
        if b_rms > 0:
            bath = BathModel(b_rms=b_rms,
                             omega_i=TWO_PI * DEFAULT_CONSTANTS.gamma_c13 * b0,
                             n_pulses=8)
        t2_default = null_center.t2_us if null_center else 38.0
        return Cpmg8Truth(nuclei=nuclei, bath=bath,
                          t2_us=t.get("t2_us", t2_default))
    if kind is SequenceKind.CPMG_DEER:
        amplitude_default = 0.0 if null_center else -0.3
        return DeerSpectrumModel(center=t.get("center_mhz", 914.7),
                                 width=t.get("width_mhz", 9.0),
                                 amplitude=t.get("amplitude",
                                                 amplitude_default),
                                 baseline=t.get("baseline", 0.5))
    if kind is SequenceKind.DEER_RABI:
        if null_center:
            raise ConfigError(
                f"preset {null_center.name!r} has no coupled target spins; "
                "deer-rabi needs the coupled-pair preset or explicit "
                "--omegas-mhz")
        omegas = t.get("omegas_mhz", [1.12, 2.24])
        return TargetSpinModel(omegas=tuple(TWO_PI * f for f in omegas),
                               t0=t.get("t0_us", 0.34))
    raise ConfigError(f"unhandled kind {kind!r}")


# ---------------------------------------------------------------- fit

def _prepare_fit_input(trace: Trace, kind: str, channel) -> Trace:
    """Reduce a raw multichannel trace to the channel the fit expects."""
    if channel is not None or len(trace.channels) == 1:
        return trace
    if "REF1" not in trace.channels or "REF2" not in trace.channels:
        raise ConfigError(
            "trace has multiple channels but no REF1/REF2 pair; pass "
            "--channel to pick one")
    if kind == "gaussian":
        return trace.with_channels({"diff": difference_signal(trace)})
    if kind == "rabi":
        return trace.with_channels(
            {"SIG1n": normalized_channels(trace)["SIG1n"]})
    return coherence_trace(trace)


def _fit_report(result: FitResult, extra: dict) -> dict:
    report = {
        "version": __version__,
        "params": {name: float(value) for name, value
                   in zip(result.param_names, result.params)},
        "param_errors": (None if result.param_errors is None else
                         {name: float(err) for name, err
                          in zip(result.param_names, result.param_errors)}),
        "ss_res": result.ss_res,
        "adj_r2": result.adj_r2,
        "converged": bool(result.converged),
        "n_iter": result.n_iter,
    }
    report.update(extra)
    return report


def _print_fit(result: FitResult) -> None:
    print(f"converged: {'yes' if result.converged else 'NO'}  "
          f"(iterations: {result.n_iter}, ss_res: {result.ss_res:.6g}, "
          f"adj R^2: {result.adj_r2:.4f})")
    errors = (result.param_errors if result.param_errors is not None
              else [float("nan")] * len(result.params))
    for name, value, err in zip(result.param_names, result.params, errors):
        print(f"  {name} = {value:.6g} +/- {err:.3g}")


def _cmd_fit(args) -> int:
    config = _load_config(args.config, _FIT_SCHEMA)
    kind = _merge(config, None, "kind", args.kind, None)
    if kind not in ("gaussian", "rabi", "deer-rabi"):
        raise ConfigError("fit needs --kind gaussian | rabi | deer-rabi")
    in_path = _merge(config, None, "in", getattr(args, "in_path"), None)
    if in_path is None:
        raise ConfigError("fit needs --in <trace.csv>")
    channel = _merge(config, None, "channel", args.channel, None)
    trace = read_trace(in_path)
    work = _prepare_fit_input(trace, kind, channel)
    if kind == "gaussian":
        result = fit_gaussian_peak(work, channel=channel, min_snr=0.0)
    elif kind == "rabi":
        result = fit_rabi(work, channel=channel)
    else:
        n_spins = _merge(config, None, "n_spins", args.n_spins, 2)
        result = fit_deer_rabi(work, n_spins=n_spins, channel=channel)
    _print_fit(result)
    effective = {"command": "fit", "kind": kind, "in": str(in_path),
                 "channel": channel,
                 "n_spins": args.n_spins if kind == "deer-rabi" else None}
    out = _merge(config, None, "out", args.out, None)
    if out:
        report = _fit_report(result, {
            "command": "fit", "model": kind, "input": str(in_path),
            "n_points": int(work.x.size), "seed": None,
            "config_hash": _config_hash(effective),
        })
        write_json(out, report)
        print(f"wrote {out}")
    return 0 if result.converged else 3


# ---------------------------------------------------------------- invert-field

def _cmd_invert_field(args) -> int:
    try:
        pair = TransitionPair(f_minus=args.f_minus, f_plus=args.f_plus)
        estimate = invert_field(pair, (args.f_minus_err, args.f_plus_err),
                                b_max=args.b_max)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    theta_deg = math.degrees(estimate.theta)
    theta_err_deg = math.degrees(estimate.theta_err)
    print(f"B0 = {estimate.b0:.3f} +/- {estimate.b0_err:.3f} mT")
    print(f"theta = {theta_deg:.2f} +/- {theta_err_deg:.2f} deg")
    if args.g_at is not None:
        g = g_value(args.g_at, estimate.b0)
        print(f"g({args.g_at:g} MHz) = {g:.4f}")
    if args.out:
        write_json(args.out, {
            "version": __version__, "command": "invert-field",
            "f_minus_mhz": args.f_minus, "f_plus_mhz": args.f_plus,
            "b0_mt": estimate.b0, "b0_err_mt": estimate.b0_err,
            "theta_deg": theta_deg, "theta_err_deg": theta_err_deg,
            "seed": None,
            "config_hash": _config_hash({
                "f_minus": args.f_minus, "f_plus": args.f_plus,
                "errors": [args.f_minus_err, args.f_plus_err]}),
        })
        print(f"wrote {args.out}")
    return 0


# ---------------------------------------------------------------- eseem

def _cmd_eseem(args) -> int:
    b0 = args.b0_mt if args.b0_mt is not None else main_field().b0
    n_pulses = args.n_pulses
    if args.x_start is None or args.x_stop is None:
        defaults = {"modulation": (0.0, 2.5, 251), "bath": (0.0, 4.0, 201),
                    "echo": (0.8, 64.0, 199)}
        start, stop, num = defaults[args.mode]
    else:
        start, stop = args.x_start, args.x_stop
        num = args.x_num or 201
    grid = np.linspace(start, stop, num)

    table = load_hyperfine_table()

    def build_nucleus(label):
        if label not in table:
            raise ConfigError(f"unknown nucleus {label!r}; table has "
                              f"{sorted(table)}")
        return nucleus_from_record(table[label], b0)

    try:
        if args.mode == "modulation":
            if args.a_mhz is not None or args.b_mhz is not None:
                if args.a_mhz is None or args.b_mhz is None:
                    raise ConfigError("--a-mhz and --b-mhz go together")
                gamma = (DEFAULT_CONSTANTS.gamma_n14 if args.species == "14N"
                         else DEFAULT_CONSTANTS.gamma_c13)
                nucleus = EseemNucleus(a=TWO_PI * args.a_mhz,
                                       b=TWO_PI * args.b_mhz,
                                       omega_i=TWO_PI * gamma * b0)
            else:
                nucleus = build_nucleus(args.nucleus or "near-13c")
            values = {"V": eseem_modulation(grid, n_pulses, nucleus)}
            comment = f"echo modulation V(tau), N={n_pulses}, B0={b0} mT"
        elif args.mode == "bath":
            bath = BathModel(b_rms=args.b_rms_ut,
                             omega_i=TWO_PI * DEFAULT_CONSTANTS.gamma_c13 * b0,
                             n_pulses=n_pulses)
            values = {"C": bath_decoherence(grid, bath)}
            comment = (f"bath coherence C(tau), N={n_pulses}, "
                       f"B_rms={args.b_rms_ut} uT, B0={b0} mT")
        else:
            labels = [s.strip() for s in (args.nuclei or "near-13c,14n").split(",")
                      if s.strip()]
            nuclei = tuple(build_nucleus(lab) for lab in labels)
            bath = None
            if args.b_rms_ut > 0:
                bath = BathModel(b_rms=args.b_rms_ut,
                                 omega_i=TWO_PI * DEFAULT_CONSTANTS.gamma_c13 * b0,
                                 n_pulses=n_pulses)
            s = cpmg_echo_model(grid, nuclei, bath, args.t2_us,
                                n_pulses=n_pulses)
            values = {"s": s, "population": 0.5 * (1.0 + s)}
            comment = (f"echo coherence s(t_total), N={n_pulses}, "
                       f"T2={args.t2_us} us, B0={b0} mT")
        trace = Trace(grid, XKind.EVOLUTION_TIME, values, n_avg=1)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    x_name = "t_total (us)" if args.mode == "echo" else "tau (us)"
    write_trace(args.out, trace, comments=(comment, f"x is {x_name}"))
    print(f"wrote {args.out}: {args.mode}, {grid.size} points")
    return 0


# ---------------------------------------------------------------- select-spins

def _cmd_select_spins(args) -> int:
    trace = read_trace(getattr(args, "in_path"))
    if len(trace.channels) > 1:
        trace = _prepare_fit_input(trace, "deer-rabi", None)
    sel = select_spin_count(trace, max_n=args.max_n, k_fixed=args.k_fixed,
                            canonicalize=not args.no_canonicalize)
    print(" n  k   adj_R2     converged  couplings (MHz) and T0 (us)")
    for n, entry in sorted(sel.entries.items()):
        fit = entry.fit
        omegas = ", ".join(f"{w / TWO_PI:.3f}" for w in fit.params[:-1])
        mark = " *" if n == sel.best_n else "  "
        print(f"{mark}{n}  {entry.k}  {entry.adj_r2: .4f}   "
              f"{'yes' if fit.converged else 'NO '}        "
              f"[{omegas}]  T0={fit.params[-1]:.3f}")
    print(f"best_n = {sel.best_n}" + ("  (no significant signal: all "
                                      "adjusted R^2 <= 0)" if sel.no_signal
                                      else ""))
    best_fit = sel.entries[sel.best_n].fit
    if args.out:
        report = {
            "version": __version__, "command": "select-spins",
            "input": str(getattr(args, "in_path")),
            "best_n": sel.best_n, "no_signal": sel.no_signal,
            "seed": None,
            "config_hash": _config_hash({
                "max_n": args.max_n, "k_fixed": args.k_fixed,
                "canonicalize": not args.no_canonicalize}),
            "models": {
                str(n): {
                    "k": entry.k,
                    "adj_r2": entry.adj_r2,
                    "converged": bool(entry.fit.converged),
                    "ss_res": entry.fit.ss_res,
                    "omegas_mhz": [float(w / TWO_PI)
                                   for w in entry.fit.params[:-1]],
                    "t0_us": float(entry.fit.params[-1]),
                } for n, entry in sel.entries.items()},
        }
        write_json(args.out, report)
        print(f"wrote {args.out}")
    return 0 if best_fit.converged else 3


# ---------------------------------------------------------------- report

def _model_from_report(report: dict):
    kind = report.get("model")
    params = report.get("params", {})
    if kind == "gaussian":
        def fn(x):
            return (params["baseline"] + params["amplitude"]
                    * np.exp(-((x - params["center_mhz"]) ** 2)
                             / (2.0 * params["width_mhz"] ** 2)))
        return fn, "gaussian"
    if kind == "rabi":
        def fn(x):
            return 0.5 * (1.0 + np.exp(-((x / params["t0_us"]) ** 2))
                          * np.cos(2.0 * np.pi * params["f_mhz"] * x))
        return fn, "rabi"
    if kind == "deer-rabi":
        omegas = [value for name, value in sorted(params.items())
                  if name.startswith("omega_")]
        from .deer import nv_epr_signal
        model = TargetSpinModel(omegas=tuple(omegas), t0=params["t0_us"])

        def fn(x):
            return nv_epr_signal(model, x)
        return fn, "deer-rabi"
    raise ConfigError(f"fit report has unknown model {kind!r}")


def _cmd_report(args) -> int:
    trace = read_trace(getattr(args, "in_path"))
    fit_report = read_json(args.fit)
    if not isinstance(fit_report, dict):
        raise TraceFormatError(f"{args.fit}: fit report must be a JSON object")
    fn, kind = _model_from_report(fit_report)
    work = _prepare_fit_input(trace, kind, None)
    name = next(iter(work.channels))
    data = work.channel(name)
    model = fn(work.x)
    residual = data - model
    write_columns(args.out, ("x", "data", "model", "residual"),
                  (work.x, data, model, residual),
                  comments=(f"model: {kind}",
                            f"params: {json.dumps(fit_report['params'], sort_keys=True)}",
                            f"source trace: {getattr(args, 'in_path')}",
                            f"version: {__version__}"))
    rms = float(np.sqrt(np.mean(residual ** 2)))
    print(f"wrote {args.out}: {work.x.size} rows ({kind} model, channel "
          f"{name!r}, residual rms {rms:.4g})")
    return 0


# ---------------------------------------------------------------- parser

def _build_parser() -> _Parser:
    parser = _Parser(prog="nvsense",
                     description="Simulate and analyze single-spin sensing "
                                 "experiments")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="synthesize a photon-count trace",
                         description="Synthesize a photon-count trace for one "
                                     "experiment kind")
    sim.add_argument("--kind", choices=[k.value for k in SequenceKind])
    sim.add_argument("--preset", choices=_PRESET_NAMES)
    sim.add_argument("--config")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--workers", type=int)
    sim.add_argument("--out")
    sim.add_argument("--n-avg", type=int, dest="n_avg")
    sim.add_argument("--n-avg-total", action="store_true", dest="n_avg_total",
                     help="interpret n_avg as a total split across points")
    sim.add_argument("--noiseless", action="store_true")
    sim.add_argument("--counts-bright", type=float, dest="counts_bright")
    sim.add_argument("--counts-dark", type=float, dest="counts_dark")
    sim.add_argument("--contrast", type=float)
    sim.add_argument("--x-start", type=float, dest="x_start")
    sim.add_argument("--x-stop", type=float, dest="x_stop")
    sim.add_argument("--x-num", type=int, dest="x_num")
    sim.add_argument("--tau-us", type=float, dest="tau_us")
    sim.add_argument("--n-pulses", type=int, dest="n_pulses")
    sim.add_argument("--b0-mt", type=float, dest="b0_mt")
    sim.add_argument("--theta-deg", type=float, dest="theta_deg")
    sim.add_argument("--linewidth-mhz", type=float, dest="linewidth_mhz")
    sim.add_argument("--transfer", type=float)
    sim.add_argument("--f-mhz", type=float, dest="f_mhz")
    sim.add_argument("--t0-us", type=float, dest="t0_us")
    sim.add_argument("--t2-us", type=float, dest="t2_us")
    sim.add_argument("--b-rms-ut", type=float, dest="b_rms_ut")
    sim.add_argument("--nuclei", help="comma-separated table labels")
    sim.add_argument("--center-mhz", type=float, dest="center_mhz")
    sim.add_argument("--width-mhz", type=float, dest="width_mhz")
    sim.add_argument("--amplitude", type=float)
    sim.add_argument("--baseline", type=float)
    sim.add_argument("--omegas-mhz", dest="omegas_mhz",
                     help="comma-separated couplings in MHz")
    sim.set_defaults(func=_cmd_simulate)

    fit = sub.add_parser("fit", help="fit a model to a trace CSV")
    fit.add_argument("--kind", choices=["gaussian", "rabi", "deer-rabi"])
    fit.add_argument("--in", dest="in_path")
    fit.add_argument("--channel")
    fit.add_argument("--n-spins", type=int, dest="n_spins")
    fit.add_argument("--config")
    fit.add_argument("--out")
    fit.set_defaults(func=_cmd_fit)

    inv = sub.add_parser("invert-field",
                         help="field magnitude and tilt from two resonances")
    inv.add_argument("--f-minus", type=float, required=True, dest="f_minus")
    inv.add_argument("--f-plus", type=float, required=True, dest="f_plus")
    inv.add_argument("--f-minus-err", type=float, default=0.0,
                     dest="f_minus_err")
    inv.add_argument("--f-plus-err", type=float, default=0.0,
                     dest="f_plus_err")
    inv.add_argument("--b-max", type=float, default=300.0, dest="b_max")
    inv.add_argument("--g-at", type=float, dest="g_at",
                     help="also print the g-value of a resonance at this "
                          "frequency (MHz)")
    inv.add_argument("--out")
    inv.set_defaults(func=_cmd_invert_field)

    ese = sub.add_parser("eseem", help="evaluate modulation/decoherence models")
    ese.add_argument("--mode", choices=["modulation", "bath", "echo"],
                     required=True)
    ese.add_argument("--out", default="eseem.csv")
    ese.add_argument("--b0-mt", type=float, dest="b0_mt")
    ese.add_argument("--n-pulses", type=int, default=8, dest="n_pulses")
    ese.add_argument("--nucleus", help="table label for --mode modulation")
    ese.add_argument("--nuclei", help="comma-separated labels for --mode echo")
    ese.add_argument("--a-mhz", type=float, dest="a_mhz")
    ese.add_argument("--b-mhz", type=float, dest="b_mhz")
    ese.add_argument("--species", choices=["13C", "14N"], default="13C")
    ese.add_argument("--b-rms-ut", type=float, default=4.0, dest="b_rms_ut")
    ese.add_argument("--t2-us", type=float, default=38.0, dest="t2_us")
    ese.add_argument("--x-start", type=float, dest="x_start")
    ese.add_argument("--x-stop", type=float, dest="x_stop")
    ese.add_argument("--x-num", type=int, dest="x_num")
    ese.set_defaults(func=_cmd_eseem)

    sel = sub.add_parser("select-spins",
                         help="compare 1..max_n spin models by adjusted R^2")
    sel.add_argument("--in", dest="in_path", required=True)
    sel.add_argument("--max-n", type=int, default=3, dest="max_n")
    sel.add_argument("--k-fixed", type=int, dest="k_fixed")
    sel.add_argument("--no-canonicalize", action="store_true",
                     dest="no_canonicalize")
    sel.add_argument("--out")
    sel.set_defaults(func=_cmd_select_spins)

    rep = sub.add_parser("report",
                         help="plot-ready columns (x, data, model, residual)")
    rep.add_argument("--in", dest="in_path", required=True)
    rep.add_argument("--fit", required=True,
                     help="fit report JSON produced by the fit command")
    rep.add_argument("--out", default="report.csv")
    rep.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except TraceFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NvSenseError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
