"""Command-line experiment runner.

    halflow --config CONFIG.json [--out DIR] [--seed N] [--level fast|full] [--threads N]

The config is one JSON object with a ``kind`` field; see the README for the
schema of each kind. Every artifact is written to a temporary file and renamed
into place, and each experiment writes into its own subdirectory of the output
root together with a ``manifest.json``.

Exit status: 0 pass, 1 malformed config, 2 check failure, 3 integration failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields as dc_fields
from pathlib import Path

from . import __version__
from .errors import CheckRefused, ConfigurationError, DomainError, IntegrationFailure
from .flow_solver import DIAGNOSTIC_COLUMNS, SCHEMES, FlowConfig, long_time_harness, run, twin_run
from .fractional_calculus import build_table
from .inequality_lab import _jsonable
from .verify import CHECKS, LEVELS, CheckResult, run_check

EXIT_PASS, EXIT_CONFIG, EXIT_CHECK, EXIT_INTEGRATION = 0, 1, 2, 3
KINDS = ("flow", "twin", "longtime", "verify-all", "cjk-table", "report")
SUMMARY_COLUMNS = ("check", "anchor", "measured", "tolerance", "verdict", "path")
RANDOM_FAMILIES = ("perturbed_constant",)


class ConfigError(Exception):
    """Malformed config; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


# ---------------------------------------------------------------------------
# Atomic output


def _atomic_write(path: Path, data: str | bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, float) else x for x in r])
    return buf.getvalue()


def _digest(text: str | bytes) -> str:
    return hashlib.sha256(text.encode() if isinstance(text, str) else text).hexdigest()


class Artifacts:
    """Collects the files of one experiment and writes them with a manifest."""

    def __init__(self, root: Path):
        self.root = root
        self.files: dict[str, str] = {}

    def write(self, name: str, text: str) -> Path:
        path = self.root / name
        _atomic_write(path, text)
        self.files[name] = _digest(text)
        return path

    def manifest(self, config: dict, seed, status: str, wall: float) -> None:
        body = {
            "version": __version__,
            "config_digest": _digest(json.dumps(config, sort_keys=True)),
            "seed": seed,
            "status": status,
            "wall_time_s": round(wall, 3),
            "files": self.files,
        }
        _atomic_write(self.root / "manifest.json", _dumps(body))


# ---------------------------------------------------------------------------
# Config parsing


def load_config(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno} column {exc.colno}", exc.msg) from exc
    if not isinstance(cfg, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    kind = cfg.get("kind")
    if kind is None:
        raise ConfigError("kind", "missing")
    if kind not in KINDS and not (isinstance(kind, str) and kind.startswith("ineq:")):
        raise ConfigError("kind", f"unknown experiment kind {kind!r}; expected one of {KINDS} or ineq:<check>")
    if isinstance(kind, str) and kind.startswith("ineq:") and kind[5:] not in CHECKS:
        raise ConfigError("kind", f"unknown check {kind[5:]!r}; known: {', '.join(CHECKS)}")
    return cfg


_FLOW_FIELDS = {f.name for f in dc_fields(FlowConfig)}


def flow_config(cfg: dict, seed) -> FlowConfig:
    """Build a FlowConfig from the ``flow`` section, naming the field on error."""
    section = cfg.get("flow")
    if not isinstance(section, dict):
        raise ConfigError("flow", "missing or not an object")
    for key in section:
        if key not in _FLOW_FIELDS or key == "seed":
            raise ConfigError(f"flow.{key}", "unknown field")
    if "N" not in section:
        raise ConfigError("flow.N", "missing")
    init = section.get("initial", {"family": "perturbed_constant"})
    if not isinstance(init, dict) or "family" not in init:
        raise ConfigError("flow.initial", "must be an object with a 'family' field")
    if section.get("scheme", "exponential") not in SCHEMES:
        raise ConfigError("flow.scheme", f"unknown scheme {section['scheme']!r}; expected one of {SCHEMES}")
    try:
        fc = FlowConfig(**section, seed=seed)
    except (ConfigurationError, TypeError) as exc:
        raise ConfigError("flow", str(exc)) from exc
    if init["family"] in RANDOM_FAMILIES and seed is None:
        raise ConfigError("seed", f"initial family {init['family']!r} is randomized and needs a seed")
    return fc


def _seed(cfg: dict, override) -> int | None:
    seed = override if override is not None else cfg.get("seed")
    if seed is not None and (not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64):
        raise ConfigError("seed", f"must be an unsigned 64-bit integer, got {seed!r}")
    return seed


def _require_seed(seed, kind: str) -> int:
    if seed is None:
        raise ConfigError("seed", f"kind {kind!r} draws seeded samples and needs a seed")
    return seed


# ---------------------------------------------------------------------------
# Experiments


def _flow(cfg: dict, seed, out: Artifacts) -> str:
    fc = flow_config(cfg, seed)
    try:
        traj = run(fc)
    except IntegrationFailure as exc:
        out.write("failure.json", _dumps({"error": str(exc), "t": exc.state.t if exc.state is not None else None}))
        return "integration_failure"
    out.write("diagnostics.csv", _csv_text(DIAGNOSTIC_COLUMNS, [r.row() for r in traj.records]))
    snaps = [{"t": s.t, "energy": s.energy, "values": s.u.values} for s in traj.states]
    out.write("snapshots.json", _dumps({"N": fc.N, "n": fc.n, "snapshots": snaps}))
    out.write("events.json", _dumps({"events": traj.events}))
    return "fail" if traj.halted else "pass"


def _twin(cfg: dict, seed, out: Artifacts) -> str:
    fc = flow_config(cfg, seed)
    schemes = cfg.get("schemes", ["exponential", "semi-implicit"])
    if not (isinstance(schemes, list) and len(schemes) == 2 and all(s in SCHEMES for s in schemes)):
        raise ConfigError("schemes", f"must be two of {SCHEMES}")
    dts = cfg.get("dts", [2.0**-m for m in range(6, 11)])
    if not (isinstance(dts, list) and len(dts) >= 2 and all(isinstance(d, (int, float)) and d > 0 for d in dts)):
        raise ConfigError("dts", "must be a list of at least two positive step sizes")
    rep = twin_run(fc.initial_state().u, schemes[0], schemes[1], tuple(dts), fc.T, fc.project)
    ratios = rep.ratios + [math.nan]
    out.write("twin.csv", _csv_text(("dt", "divergence", "ratio"), zip(map(float, rep.dts), rep.divergence, ratios)))
    out.write("twin.json", _dumps({"events": rep.events, "passed": rep.passed, "band": rep.band}))
    return "pass" if rep.passed else "fail"


def _longtime(cfg: dict, seed, out: Artifacts) -> str:
    fc = flow_config(cfg, seed)
    try:
        rep = long_time_harness(fc)
    except IntegrationFailure as exc:
        out.write("failure.json", _dumps({"error": str(exc)}))
        return "integration_failure"
    out.write("longtime.csv", _csv_text(("t", "energy", "h_half", "harmonic"), zip(rep.times, rep.energy, rep.h_half, rep.harmonic)))
    out.write("longtime.json", _dumps({"verdict": rep.verdict, "notes": rep.notes, "targets": rep.targets,
                                       "dissipation_tail": rep.dissipation_tail}))
    return "pass" if rep.verdict == "pass" else "fail"


def _cjk(cfg: dict, out: Artifacts) -> str:
    J = cfg.get("J", 64)
    if not isinstance(J, int) or isinstance(J, bool) or J < 0:
        raise ConfigError("J", f"must be a non-negative integer, got {J!r}")
    table = build_table(J)
    rows = [(j, k, float(table.values[j + J, k + J])) for j in range(-J, J + 1) for k in range(-J, J + 1)]
    out.write("cjk_table.csv", _csv_text(("j", "k", "value"), rows))
    return "pass"


def _run_checks(names: list[str], level: str, seed: int, threads: int) -> list[CheckResult]:
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda n: run_check(n, level, seed), names))
    return [run_check(n, level, seed) for n in names]


def verify_suite(level: str, seed: int, out: Artifacts, names: list[str] | None = None, threads: int = 1) -> str:
    """Run the registry checks, one JSON per check plus ``summary.csv`` and ``report.txt``."""
    names = list(CHECKS) if names is None else names
    results = _run_checks(names, level, seed, threads)
    rows = []
    for r in results:
        rel = f"checks/{r.name}.json"
        out.write(rel, _dumps({**r.to_dict(), "level": level, "seed": seed}))
        rows.append((r.name, r.anchor, float(r.measured), r.tolerance, r.verdict, rel))
    out.write("summary.csv", _csv_text(SUMMARY_COLUMNS, rows))
    text, _ = emit_report(out.root, names)
    out.write("report.txt", text)
    for r in results:
        if not r.passed:
            print(f"FAILED {r.name}: see {out.root / 'checks' / (r.name + '.json')}", file=sys.stderr)
    return "pass" if all(r.passed for r in results) else "fail"


def emit_report(artifacts: str | Path, names: list[str] | None = None) -> tuple[str, int]:
    """Plain-text table of check results found under ``artifacts/checks``.

    Checks without an artifact are listed as SKIPPED. Returns the text and an
    exit status: 0 when every listed check passed, 2 otherwise.
    """
    root = Path(artifacts)
    names = list(CHECKS) if names is None else names
    rows, constants = [], {}
    status = EXIT_PASS
    for name in names:
        path = root / "checks" / f"{name}.json"
        try:
            d = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError):
            rows.append((name, "-", "-", "-", "SKIPPED"))
            status = EXIT_CHECK
            continue
        verdict = str(d.get("verdict", "fail")).upper()
        if verdict != "PASS":
            status = EXIT_CHECK
        measured = d.get("measured")
        rows.append((name, d.get("anchor", ""), f"{measured:.6g}" if isinstance(measured, (int, float)) else str(measured),
                     d.get("tolerance", ""), verdict))
        if name == "wente":
            constants["Wente constant (max ratio)"] = measured
        if name == "ladyzhenskaya":
            constants["Ladyzhenskaya L4 embedding constant"] = measured
    header = ("check", "anchor", "measured", "tolerance", "verdict")
    widths = [max(len(str(r[i])) for r in rows + [header]) for i in range(len(header))]
    fmt = "  ".join(f"{{:{w}}}" for w in widths)
    lines = [fmt.format(*header).rstrip(), fmt.format(*("-" * w for w in widths))]
    lines += [fmt.format(*map(str, r)).rstrip() for r in rows]
    counts = {v: sum(1 for r in rows if r[4] == v) for v in ("PASS", "FAIL", "REFUSED", "INCONCLUSIVE", "SKIPPED")}
    lines.append("")
    lines.append("  ".join(f"{k}: {v}" for k, v in counts.items() if v))
    for k, v in constants.items():
        lines.append(f"{k}: {v:.6g}" if isinstance(v, (int, float)) else f"{k}: {v}")
    return "\n".join(lines) + "\n", status


def run_experiment(cfg: dict, out_root: Path, seed_override=None, level=None, threads: int = 1) -> int:
    """Dispatch one parsed config; returns the exit status."""
    kind = cfg["kind"]
    seed = _seed(cfg, seed_override)
    level = level or cfg.get("level", "fast")
    if level not in LEVELS:
        raise ConfigError("level", f"must be one of {LEVELS}, got {level!r}")
    sub = kind.replace(":", "-") if kind != "verify-all" else f"verify-{level}"
    out = Artifacts(out_root / sub)
    start = time.perf_counter()
    if kind == "report":
        src = cfg.get("artifacts")
        if not isinstance(src, str):
            raise ConfigError("artifacts", "missing path to a verify output directory")
        text, status = emit_report(src)
        sys.stdout.write(text)
        return status
    if kind == "flow":
        verdict = _flow(cfg, seed, out)
    elif kind == "twin":
        verdict = _twin(cfg, seed, out)
    elif kind == "longtime":
        verdict = _longtime(cfg, seed, out)
    elif kind == "cjk-table":
        verdict = _cjk(cfg, out)
    elif kind == "verify-all":
        names = cfg.get("checks")
        if names is not None and (not isinstance(names, list) or any(n not in CHECKS for n in names)):
            raise ConfigError("checks", f"must be a list of known checks: {', '.join(CHECKS)}")
        verdict = verify_suite(level, _require_seed(seed, kind), out, names, threads)
        sys.stdout.write((out.root / "report.txt").read_text())
    else:
        verdict = verify_suite(level, _require_seed(seed, kind), out, [kind[5:]], threads)
        sys.stdout.write((out.root / "report.txt").read_text())
    out.manifest(cfg, seed, verdict, time.perf_counter() - start)
    return {"pass": EXIT_PASS, "integration_failure": EXIT_INTEGRATION}.get(verdict, EXIT_CHECK)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="halflow", description="Half-harmonic flow experiments and verification checks.")
    p.add_argument("--config", required=True, help="JSON experiment config")
    p.add_argument("--out", default=os.environ.get("HALFLOW_OUT", "halflow-out"), help="output root (default: $HALFLOW_OUT or ./halflow-out)")
    p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    p.add_argument("--level", choices=LEVELS, default=None, help="verification level for verify-all and ineq:<check>")
    p.add_argument("--threads", type=int, default=1, help="worker threads for independent checks (speed only)")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config)
        return run_experiment(cfg, Path(args.out), args.seed, args.level, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigurationError, DomainError, CheckRefused) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IntegrationFailure as exc:
        print(f"integration failure: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION


if __name__ == "__main__":
    sys.exit(main())
