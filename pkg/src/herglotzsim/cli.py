"""Command-line front end.

``herglotzsim run``     simulate a scenario and write trajectory, events and
                        energy ledger (optionally figures)
``herglotzsim verify``  compare a scenario against its closed-form references

Exit codes: 0 success, 2 configuration error, 3 Zeno behaviour, 4 step-size
underflow, 5 reference-check failure, 6 any other simulator error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import HerglotzSimError, StepSizeUnderflow, ZenoDetected
from .lagrangian import energy, kinetic_energy, potential_energy
from .scenarios import SCENARIOS, make_params
from .simulator import HybridTrajectory, IntegratorOptions, Scenario, energy_ledger, simulate

logger = logging.getLogger("herglotzsim")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ZENO = 3
EXIT_UNDERFLOW = 4
EXIT_ORACLE = 5
EXIT_SIM = 6

_TOP_KEYS = {"scenario", "params", "t_span", "integrator", "output"}
_OUTPUT_KEYS = {"path", "format", "sample_dt"}
_INTEGRATOR_KEYS = {f.name for f in dataclasses.fields(IntegratorOptions)}
FORMATS = ("csv", "json")


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending key."""


@dataclass
class RunConfig:
    scenario: str = "sphere"
    params: dict = field(default_factory=dict)
    t_span: Tuple[float, float] = (0.0, 3.0)
    integrator: dict = field(default_factory=dict)
    path: Optional[str] = None
    format: str = "csv"
    sample_dt: float = 0.01

    def validate(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario: unknown scenario '{self.scenario}' (known: {', '.join(SCENARIOS)})")
        try:
            make_params(self.scenario, self.params)
        except KeyError as exc:
            raise ConfigError(f"params.{exc.args[0]}: unknown parameter for '{self.scenario}'") from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"params: {exc}") from None
        if len(self.t_span) != 2 or not float(self.t_span[1]) > float(self.t_span[0]):
            raise ConfigError("t_span: must be an increasing pair")
        for key in self.integrator:
            if key not in _INTEGRATOR_KEYS:
                raise ConfigError(f"integrator.{key}: unknown option")
        try:
            self.options()
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"integrator: {exc}") from None
        if not self.sample_dt > 0:
            raise ConfigError("output.sample_dt: must be positive")
        if self.format not in FORMATS:
            raise ConfigError(f"output.format: expected one of {FORMATS}, got '{self.format}'")

    def options(self) -> IntegratorOptions:
        return IntegratorOptions(**self.integrator)

    def build(self) -> Scenario:
        return SCENARIOS[self.scenario].build(make_params(self.scenario, self.params))


def _scalar(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _read_json(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config '{path}': {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config '{path}' is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config '{path}' must hold a JSON object")
    return data


def config_from_dict(data: dict) -> RunConfig:
    for key in data:
        if key not in _TOP_KEYS:
            raise ConfigError(f"{key}: unknown config key")
    cfg = RunConfig()
    if "scenario" in data:
        name = data["scenario"]
        if not isinstance(name, str):
            raise ConfigError("scenario: must be a string")
        if name.endswith(".json"):
            # scenario file: {"scenario": name, "params": {...}}
            sub = _read_json(name)
            for key in sub:
                if key not in ("scenario", "params"):
                    raise ConfigError(f"{key}: unknown key in scenario file '{name}'")
            name = sub.get("scenario", cfg.scenario)
            cfg.params.update(sub.get("params", {}))
        cfg.scenario = name
    if "params" in data:
        if not isinstance(data["params"], dict):
            raise ConfigError("params: must be an object")
        cfg.params.update(data["params"])
    if "t_span" in data:
        ts = data["t_span"]
        if not isinstance(ts, list) or len(ts) != 2 or not all(isinstance(x, (int, float)) for x in ts):
            raise ConfigError("t_span: must be a pair of numbers")
        cfg.t_span = (float(ts[0]), float(ts[1]))
    if "integrator" in data:
        if not isinstance(data["integrator"], dict):
            raise ConfigError("integrator: must be an object")
        cfg.integrator = dict(data["integrator"])
    if "output" in data:
        out = data["output"]
        if not isinstance(out, dict):
            raise ConfigError("output: must be an object")
        for key in out:
            if key not in _OUTPUT_KEYS:
                raise ConfigError(f"output.{key}: unknown key")
        cfg.path = out.get("path", cfg.path)
        cfg.format = out.get("format", cfg.format)
        cfg.sample_dt = out.get("sample_dt", cfg.sample_dt)
    return cfg


def config_from_args(args: argparse.Namespace) -> RunConfig:
    data = _read_json(args.config) if args.config else {}
    if args.scenario:
        data = {**data, "scenario": args.scenario}
    cfg = config_from_dict(data)
    for item in args.set or ():
        if "=" not in item:
            raise ConfigError(f"--set {item}: expected key=value")
        key, value = item.split("=", 1)
        cfg.params[key.strip()] = _scalar(value)
    if args.t_end is not None:
        cfg.t_span = (cfg.t_span[0], args.t_end)
    if getattr(args, "out", None):
        cfg.path = args.out
    if getattr(args, "sample_dt", None) is not None:
        cfg.sample_dt = args.sample_dt
    if getattr(args, "format", None):
        cfg.format = args.format
    cfg.validate()
    return cfg


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------

def sample_rows(traj: HybridTrajectory, scn: Scenario, sample_dt: float) -> List[list]:
    """Rows on a uniform grid plus both ends of every segment."""
    nrows = scn.cs.rows
    rows = []
    for seg in traj.segments:
        mask = sum(1 << r for r in seg.rows) if nrows else 0
        k0 = int(np.ceil(seg.t0 / sample_dt - 1e-9))
        grid = [k * sample_dt for k in range(k0, int(np.floor(seg.t1 / sample_dt + 1e-9)) + 1)]
        times = sorted({seg.t0, seg.t1, *[t for t in grid if seg.t0 < t < seg.t1]})
        for t in times:
            st = seg.state_at(t)
            T = kinetic_energy(scn.sys, st)
            V = potential_energy(scn.sys, st)
            rows.append([t, *st.q, *st.v, st.z, T + V, T, V, mask, seg.index])
    return rows


def header(scn: Scenario) -> List[str]:
    return (["t"] + [f"q{i}" for i in range(scn.sys.nq)] + [f"v{i}" for i in range(scn.sys.n)]
            + ["z", "E", "T", "V", "active_mask", "segment_id"])


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def sibling(path: Path, suffix: str) -> Path:
    return path.with_name(path.stem + suffix)


def write_outputs(traj: HybridTrajectory, scn: Scenario, cfg: RunConfig, path: Path) -> List[Path]:
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = sample_rows(traj, scn, cfg.sample_dt)
    cols = header(scn)
    if cfg.format == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for row in rows:
                w.writerow([_fmt(x) for x in row])
    else:
        with open(path, "w") as fh:
            json.dump({"columns": cols, "rows": [[float(x) for x in r] for r in rows]}, fh, indent=1)
            fh.write("\n")
    events = sibling(path, ".events.json")
    with open(events, "w") as fh:
        json.dump([e.to_dict() for e in traj.events], fh, indent=1)
        fh.write("\n")
    ledger = sibling(path, ".ledger.json")
    with open(ledger, "w") as fh:
        json.dump(energy_ledger(traj, scn).to_dict(), fh, indent=1)
        fh.write("\n")
    return [path, events, ledger]


def summary_lines(traj: HybridTrajectory, scn: Scenario) -> List[str]:
    led = energy_ledger(traj, scn)
    lines = [f"scenario\t{scn.name}", f"segments\t{len(traj.segments)}", f"events\t{len(traj.events)}"]
    for e, le in zip(traj.events, led.events):
        lines.append(f"event\t{e.t_event:.12g}\t{e.kind.value}\t{e.label}\tdE={le.dE_measured:.6e}"
                     f"\tpredicted={le.dE_predicted:.6e}")
    worst = max((s.max_rel_deviation for s in led.segments), default=0.0)
    lines.append(f"energy_law_max_rel_dev\t{worst:.3e}")
    fin = traj.final_state()
    lines.append(f"final\tt={fin.t:.12g}\tE={energy(scn.sys, fin):.12g}")
    return lines


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def _error_code(exc: BaseException) -> int:
    if isinstance(exc, ZenoDetected):
        return EXIT_ZENO
    if isinstance(exc, StepSizeUnderflow):
        return EXIT_UNDERFLOW
    return EXIT_SIM


def execute(cfg: RunConfig, figures: bool = False, out=None) -> int:
    """Run one configuration; write files when ``cfg.path`` is set."""
    out = sys.stdout if out is None else out
    scn = cfg.build()
    code = EXIT_OK
    try:
        traj = simulate(scn, cfg.t_span, cfg.options())
    except HerglotzSimError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        traj = getattr(exc, "trajectory", None)
        code = _error_code(exc)
        if traj is None or not traj.segments:
            return code
    for line in summary_lines(traj, scn):
        print(line, file=out)
    if cfg.path:
        path = Path(cfg.path)
        written = write_outputs(traj, scn, cfg, path)
        if figures:
            from .plotting import write_figures
            written += write_figures(traj, scn, path.with_suffix(""))
        for p in written:
            print(f"wrote\t{p}", file=out)
    return code


def _sweep_job(job) -> Tuple[str, int, str]:
    import io
    cfg, figures, label = job
    buf = io.StringIO()
    code = execute(cfg, figures, out=buf)
    return label, code, buf.getvalue()


def expand_sweep(cfg: RunConfig, spec: str) -> List[Tuple[RunConfig, str]]:
    if "=" not in spec:
        raise ConfigError(f"--sweep {spec}: expected key=v1,v2,...")
    key, values = spec.split("=", 1)
    jobs = []
    for raw in values.split(","):
        c = dataclasses.replace(cfg, params={**cfg.params, key: _scalar(raw)})
        label = f"{key}={raw}"
        if cfg.path:
            p = Path(cfg.path)
            c.path = str(p.with_name(f"{p.stem}_{key}{raw}{p.suffix}"))
        c.validate()
        jobs.append((c, label))
    return jobs


def cmd_run(args: argparse.Namespace) -> int:
    cfg = config_from_args(args)
    if not args.sweep:
        return execute(cfg, args.figures)
    jobs = [(c, args.figures, label) for c, label in expand_sweep(cfg, args.sweep)]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_job, jobs))
    else:
        results = [_sweep_job(j) for j in jobs]
    worst = EXIT_OK
    for label, code, text in results:
        print(f"# {label}\texit={code}")
        sys.stdout.write(text)
        worst = max(worst, code)
    return worst


def cmd_verify(args: argparse.Namespace) -> int:
    cfg = config_from_args(args)
    entry = SCENARIOS[cfg.scenario]
    params = make_params(cfg.scenario, cfg.params)
    try:
        checks = entry.verify(params, t_end=cfg.t_span[1], opts=cfg.options(), tol=args.tol)
    except HerglotzSimError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return _error_code(exc)
    print(f"{'check':<26}{'status':<9}{'residual':>12}  {'tol':>9}  note")
    for c in checks:
        print(f"{c.name:<26}{c.status:<9}{c.residual:>12.3e}  {c.tol:>9.1e}  {c.note}")
    return EXIT_OK if all(c.passed for c in checks) else EXIT_ORACLE


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="herglotzsim", description=__doc__.split("\n\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--scenario", help=f"one of {', '.join(SCENARIOS)} or a scenario JSON file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="parameter override (repeatable)")
        p.add_argument("--t-end", type=float, help="end of the time span")

    run = sub.add_parser("run", help="simulate and write outputs")
    common(run)
    run.add_argument("--out", help="trajectory file; events and ledger go to sibling files")
    run.add_argument("--format", choices=FORMATS)
    run.add_argument("--sample-dt", type=float, help="output grid spacing")
    run.add_argument("--figures", action="store_true", help="also write PNG figures next to --out")
    run.add_argument("--sweep", metavar="KEY=V1,V2,...", help="run once per parameter value")
    run.add_argument("--jobs", type=int, default=1, help="parallel sweep workers")
    run.set_defaults(func=cmd_run)

    ver = sub.add_parser("verify", help="compare against closed-form references")
    common(ver)
    ver.add_argument("--tol", type=float, help="override every check tolerance")
    ver.set_defaults(func=cmd_verify)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
