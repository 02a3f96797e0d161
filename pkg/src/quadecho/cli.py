"""Batch front-end: validate, describe and run experiment configurations.

Exit codes: 0 success, 2 configuration error, 3 fit failure (partial
results are still written, flagged incomplete), 4 internal invariant
violation.
"""

from __future__ import annotations

import argparse
import json
import sys as _sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, parse_config, serialize_resolved
from .experiments import (
    INIT_GAP,
    MARKER_DURATION,
    DecayTrace,
    FitError,
    FitResult,
    cpmg_scan,
    cpmg_sequence,
    fit_decay,
    hahn_echo_decay,
    multiquantum_decays,
    three_pulse_phase_cycle,
    three_pulse_sequence,
    tspace_scan,
)
from .pulses import Delay, EnvironmentMarker, InvariantViolation, PulseEvent, Sequence

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FIT = 3
EXIT_INTERNAL = 4


@dataclass
class ResultBundle:
    config: RunConfig
    results: dict = field(default_factory=dict)
    traces: list = field(default_factory=list)      # (name, DecayTrace)
    spectra: list = field(default_factory=list)     # (name, PathwaySpectrum)
    incomplete: bool = False
    fit_failures: list = field(default_factory=list)

    @property
    def provenance(self) -> dict:
        return {
            "artifact": "quadecho",
            "version": __version__,
            "seed": self.config.seed,
            "config_sha256": self.config.config_hash,
            "timestamp": datetime.now(timezone.utc).isoformat(),
        }


# ---------------------------------------------------------------------------
# human-readable protocol timeline


def _fmt_duration(t: float) -> str:
    if t == 0:
        return "0 s"
    if t < 1e-3:
        return f"{t * 1e6:g} µs"
    if t < 1.0:
        return f"{t * 1e3:g} ms"
    return f"{t:g} s"


def _fmt_angle(theta: float) -> str:
    frac = theta / np.pi
    named = {0.5: "π/2", 1.0: "π", 2.0 / 3.0: "2π/3", 1.0 / 3.0: "π/3"}
    for val, name in named.items():
        if abs(frac - val) < 1e-9:
            return name
    return f"{np.degrees(theta):g}°"


def _timeline(seq: Sequence, cycled_phase: Optional[int] = None) -> str:
    parts = []
    pulse_idx = 0
    for ev in seq.events:
        if isinstance(ev, PulseEvent):
            label = _fmt_angle(ev.nutation_angle)
            if cycled_phase is not None and pulse_idx == cycled_phase:
                label += "(φ)"
            parts.append(label)
            pulse_idx += 1
        elif isinstance(ev, EnvironmentMarker):
            tag = "LED" if ev.kind == "light" else "LED+U"
            parts.append(f"{tag} {_fmt_duration(ev.duration)}")
        elif isinstance(ev, Delay):
            parts.append(_fmt_duration(ev.duration))
    parts.append("detect")
    return " | ".join(parts)


def describe(config: RunConfig) -> str:
    """Resolved pulse/delay/marker timeline of the configured protocol."""
    p = config.protocol_params
    lines = [f"protocol: {config.protocol}"]
    if config.protocol == "hahn":
        tau = p["tau"][0]
        marker = p.get("marker")
        seq = _hahn_sequence(config, tau, marker)
        if marker is not None:
            lines.append(f"marker {marker[0]} inserted {_fmt_duration(INIT_GAP)} after "
                         f"initialization, t_space = {_fmt_duration(marker[1])}")
        lines.append(_timeline(seq))
        if len(p["tau"]) > 1:
            lines.append(f"tau grid: {', '.join(_fmt_duration(t) for t in p['tau'])}")
    elif config.protocol == "cpmg":
        for n in p["n_list"]:
            seq = cpmg_sequence(p["transition"], n, p["total_times"][0])
            lines.append(f"n = {n}: {_timeline(seq)}")
    elif config.protocol in ("phase_cycle", "multiquantum"):
        if config.protocol == "phase_cycle":
            tau1, tau2, nsteps = p["tau1"], p["tau2"], p["n_phase_steps"]
        else:
            tau1 = tau2 = p["tau"][0]
            nsteps = p["n_phase_steps"]
        seq = three_pulse_sequence(p["init_level"], tau1, tau2, 0.0)
        lines.append(_timeline(seq, cycled_phase=1))
        lines.append(f"phase cycle ({nsteps} steps):")
        for k in range(nsteps):
            lines.append(f"  k={k:2d}  φ = {360.0 * k / nsteps:7.2f}°")
    elif config.protocol == "tspace":
        tau = p["tau"][0]
        seq = _hahn_sequence(config, tau, (p["burst_kind"], p["t_space"][0]))
        lines.append(f"marker {p['burst_kind']} inserted {_fmt_duration(INIT_GAP)} after "
                     f"initialization; t_space scanned over "
                     f"{', '.join(_fmt_duration(t) for t in p['t_space'])}")
        lines.append(_timeline(seq))
    return "\n".join(lines)


def _hahn_sequence(config: RunConfig, tau: float, marker) -> Sequence:
    prelude = []
    if marker is not None:
        kind, t_space = marker
        prelude = [Delay(INIT_GAP), EnvironmentMarker(kind, MARKER_DURATION), Delay(t_space)]
    return cpmg_sequence(config.protocol_params["transition"], 1, 2 * tau, prelude=prelude)


# ---------------------------------------------------------------------------
# protocol execution


def _fit_record(fit: FitResult) -> dict:
    def _num(x: float):
        return float(x) if np.isfinite(x) else None

    return {
        "t2_s": _num(fit.t2),
        "alpha": _num(fit.alpha),
        "amplitude": _num(fit.amplitude),
        "t2_stderr_s": _num(fit.t2_stderr),
        "alpha_stderr": _num(fit.alpha_stderr),
        "residual_norm": _num(fit.residual_norm),
        "alpha_fixed": fit.alpha_fixed,
        "converged": fit.converged,
        "message": fit.message,
    }


def _try_fit(bundle: ResultBundle, name: str, trace: DecayTrace, alpha) -> Optional[FitResult]:
    try:
        fit = fit_decay(trace, alpha=alpha)
    except FitError as exc:
        bundle.incomplete = True
        bundle.fit_failures.append({"trace": name, "error": str(exc)})
        return None
    if not fit.converged:
        bundle.incomplete = True
        bundle.fit_failures.append({"trace": name, "error": fit.message})
    return fit


def run(config: RunConfig, quiet: bool = False) -> ResultBundle:
    """Execute the configured protocol and collect results in memory."""
    bundle = ResultBundle(config=config)
    p = config.protocol_params
    common = dict(
        disorder=config.disorder,
        baths=config.baths,
        realizations=config.realizations,
        seed=config.seed,
        workers=config.workers,
    )
    if config.protocol == "hahn":
        trace = hahn_echo_decay(
            config.system, p["transition"], p["tau"],
            burst=config.burst, marker=p.get("marker"), **common,
        )
        bundle.traces.append(("hahn", trace))
        fit = _try_fit(bundle, "hahn", trace, p["fit_alpha"])
        bundle.results["fit"] = _fit_record(fit) if fit else None
    elif config.protocol == "phase_cycle":
        spectrum = three_pulse_phase_cycle(
            config.system, p["init_level"], p["tau1"], p["tau2"],
            n_phase_steps=p["n_phase_steps"], **common,
        )
        bundle.spectra.append(("phase_cycle", spectrum))
        bundle.results["components"] = {
            str(int(o)): [float(c.real), float(c.imag)]
            for o, c in zip(spectrum.orders, spectrum.components)
        }
    elif config.protocol == "multiquantum":
        traces = multiquantum_decays(
            config.system, p["init_level"], p["tau"],
            n_phase_steps=p["n_phase_steps"], **common,
        )
        fits = {}
        for name, trace in traces.items():
            bundle.traces.append((name.lower(), trace))
            fit = _try_fit(bundle, name, trace, p["fit_alpha"])
            fits[name] = fit
        bundle.results["fits"] = {k: _fit_record(f) if f else None for k, f in fits.items()}
        if all(f is not None and f.converged for f in fits.values()):
            t2 = {k: f.t2 for k, f in fits.items()}
            bundle.results["t2_ratios"] = {
                "sqt_over_dqt": t2["SQT"] / t2["DQT"],
                "sqt_over_tqt": t2["SQT"] / t2["TQT"],
            }
    elif config.protocol == "cpmg":
        results, beta, traces = cpmg_scan(
            config.system, p["transition"], p["n_list"], p["total_times"],
            burst=config.burst, alpha=p["fit_alpha"], **common,
        )
        for (n, fit), trace in zip(results, traces):
            bundle.traces.append((f"cpmg_n{n}", trace))
            if not fit.converged:
                bundle.incomplete = True
                bundle.fit_failures.append({"trace": f"cpmg_n{n}", "error": fit.message})
        bundle.results["scaling"] = [
            {"n": n, **_fit_record(fit)} for n, fit in results
        ]
        bundle.results["beta"] = beta if np.isfinite(beta) else None
        if not np.isfinite(beta):
            bundle.incomplete = True
            bundle.fit_failures.append({"trace": "cpmg", "error": "beta fit failed"})
    elif config.protocol == "tspace":
        results, traces = tspace_scan(
            config.system, p["transition"], p["t_space"], p["burst_kind"],
            tau_list=p["tau"], burst=config.burst, alpha=p["fit_alpha"], **common,
        )
        for (t_space, fit), trace in zip(results, traces):
            bundle.traces.append((f"tspace_{t_space:g}s", trace))
            if not fit.converged:
                bundle.incomplete = True
                bundle.fit_failures.append(
                    {"trace": f"tspace_{t_space:g}s", "error": fit.message}
                )
        bundle.results["t2_vs_t_space"] = [
            {"t_space_s": t_space, **_fit_record(fit)} for t_space, fit in results
        ]
    if not quiet:
        print(f"protocol {config.protocol} finished"
              + (" (incomplete: fit failures)" if bundle.incomplete else ""))
    return bundle


# ---------------------------------------------------------------------------
# output files


def _preamble(bundle: ResultBundle, extra: dict) -> list[str]:
    lines = [
        f"# quadecho {__version__}",
        f"# seed={bundle.config.seed}",
        f"# config_sha256={bundle.config.config_hash}",
        f"# protocol={bundle.config.protocol}",
    ]
    lines += [f"# {k}={v}" for k, v in extra.items()]
    return lines


def _write_csv(path: Path, preamble: list[str], header: list[str], rows) -> None:
    with open(path, "w") as fh:
        for line in preamble:
            fh.write(line + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def write_outputs(bundle: ResultBundle, out_dir: Path, quiet: bool = False) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, trace in bundle.traces:
        path = out_dir / f"trace_{name}.csv"
        extra = {
            k: v for k, v in trace.meta.items()
            if (np.isscalar(v) or isinstance(v, str)) and k not in ("protocol", "seed")
        }
        _write_csv(
            path,
            _preamble(bundle, extra),
            ["time_s", "amplitude"],
            zip(trace.times, trace.amplitudes),
        )
        written.append(path)
    for name, spectrum in bundle.spectra:
        path = out_dir / f"spectrum_{name}.csv"
        _write_csv(
            path,
            _preamble(bundle, {}),
            ["phase_rad", "amplitude"],
            zip(spectrum.phases, spectrum.amplitudes),
        )
        written.append(path)
        path = out_dir / f"components_{name}.csv"
        _write_csv(
            path,
            _preamble(bundle, {}),
            ["delta_p", "real", "imag", "abs"],
            (
                (o, c.real, c.imag, abs(c))
                for o, c in zip(spectrum.orders, spectrum.components)
            ),
        )
        written.append(path)
    doc = {
        "provenance": bundle.provenance,
        "config": bundle.config.resolved,
        "results": bundle.results,
        "incomplete": bundle.incomplete,
        "fit_failures": bundle.fit_failures,
        "files": [p.name for p in written],
    }
    results_path = out_dir / "results.json"
    with open(results_path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(results_path)
    if not quiet:
        for p in written:
            print(f"wrote {p}")
    return written


# ---------------------------------------------------------------------------
# entry point


def _load_config(path: str, seed: Optional[int], out_dir: Optional[str],
                 workers: Optional[int]) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc}")
    config = parse_config(text)
    if seed is not None:
        config.seed = seed
        config.resolved["execution"]["seed"] = seed
    if out_dir is not None:
        config.out_dir = out_dir
        config.resolved["output"]["dir"] = out_dir
    if workers is not None:
        config.workers = workers
        config.resolved["execution"]["workers"] = workers
    return config


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="quadecho",
        description="Donor nuclear-spin echo simulator: run, describe or validate a config",
    )
    parser.add_argument("--version", action="version", version=f"quadecho {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for verb in ("run", "describe", "validate"):
        sp = sub.add_parser(verb)
        sp.add_argument("config", help="path to the YAML run configuration")
        if verb == "run":
            sp.add_argument("--seed", type=int, default=None, help="override the config seed")
            sp.add_argument("--out-dir", default=None, help="override the output directory")
            sp.add_argument("--workers", type=int, default=None, help="override worker count")
            sp.add_argument("--quiet", action="store_true", help="suppress progress output")
    args = parser.parse_args(argv)

    try:
        if args.command == "validate":
            config = _load_config(args.config, None, None, None)
            print(serialize_resolved(config), end="")
            return EXIT_OK
        if args.command == "describe":
            config = _load_config(args.config, None, None, None)
            print(describe(config))
            return EXIT_OK
        config = _load_config(args.config, args.seed, args.out_dir, args.workers)
        bundle = run(config, quiet=args.quiet)
        write_outputs(bundle, Path(config.out_dir), quiet=args.quiet)
        if bundle.incomplete:
            print("fit failure: results flagged incomplete", file=_sys.stderr)
            return EXIT_FIT
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return EXIT_CONFIG
    except FitError as exc:
        print(f"fit failure: {exc}", file=_sys.stderr)
        return EXIT_FIT
    except InvariantViolation as exc:
        print(f"internal invariant violation: {exc}", file=_sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    raise SystemExit(main())
