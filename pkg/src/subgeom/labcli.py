"""Command-line harness: run / verify / list / report-diff.

Configs are INI files with [experiment], [model] and [grid] sections (or
the same structure as JSON). Values are parsed as JSON where possible, and
comma-separated numbers become lists.
"""
import argparse
import configparser
import csv
import json
import os
import sys
import time
from dataclasses import dataclass, field

import jsonschema
import numpy as np

from . import __version__, experiments
from .errors import BlowUpError, ConfigError, SubgeomError

SECTIONS = ("experiment", "model", "grid", "verify")

CLAIM_SCHEMA = {
    "type": "object",
    "required": ["id", "tag", "measured", "expected", "tolerance", "verdict"],
    "properties": {
        "id": {"type": "string"},
        "tag": {"type": "string"},
        "measured": {"type": ["number", "null"]},
        "expected": {"type": ["number", "null"]},
        "tolerance": {"type": ["number", "null"]},
        "verdict": {"enum": ["pass", "fail", "inconclusive"]},
        "details": {"type": "object"},
    },
}

REPORT_SCHEMA = {
    "type": "object",
    "required": ["tool", "version", "command", "config", "claims", "verdict", "wall_time_s"],
    "properties": {
        "tool": {"const": "subgeom-lab"},
        "version": {"type": "string"},
        "command": {"enum": ["run", "verify"]},
        "config": {"type": "object"},
        "claims": {"type": "array", "items": CLAIM_SCHEMA, "minItems": 1},
        "verdict": {"enum": ["pass", "fail"]},
        "wall_time_s": {"type": "number", "minimum": 0},
        "curves": {"type": "array", "items": {"type": "string"}},
    },
}


# -------------------------------------------------------------- config


def _parse_value(text):
    text = text.strip()
    try:
        return json.loads(text)
    except ValueError:
        pass
    if "," in text:
        parts = [p.strip() for p in text.split(",") if p.strip()]
        try:
            return [json.loads(p) for p in parts]
        except ValueError:
            return parts
    return text


def load_config(path):
    """Read an INI or JSON config into {section: {key: value}}."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path) as fh:
        text = fh.read()
    if path.endswith(".json"):
        try:
            data = json.loads(text)
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    else:
        cp = configparser.ConfigParser()
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        data = {s: {k: _parse_value(v) for k, v in cp[s].items()} for s in cp.sections()}
    unknown = set(data) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    return {s: dict(data.get(s, {})) for s in SECTIONS}


def apply_override(cfg, item):
    """section.key=value; a bare key goes to [experiment]."""
    if "=" not in item:
        raise ConfigError(f"override must look like key=value: {item!r}")
    key, value = item.split("=", 1)
    section, _, name = key.strip().rpartition(".")
    section = section or "experiment"
    if section not in SECTIONS or not name:
        raise ConfigError(f"bad override key {key!r}")
    cfg.setdefault(section, {})[name] = _parse_value(value)
    return cfg


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int
    preset: str | None = None
    model: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    out: str = "out"

    @classmethod
    def from_sections(cls, cfg, out="out"):
        ex = dict(cfg.get("experiment", {}))
        name = ex.pop("name", None)
        if name is None:
            raise ConfigError("[experiment] needs a name")
        experiments.get(name)
        if "seed" not in ex or ex["seed"] in (None, ""):
            raise ConfigError("a seed is mandatory (no wall-clock seeding)")
        try:
            seed = int(ex.pop("seed"))
        except (TypeError, ValueError):
            raise ConfigError("seed must be an integer") from None
        model = dict(cfg.get("model", {}))
        preset = model.pop("preset", None)
        params = {**ex, **cfg.get("grid", {})}
        for key in ("paths", "chains", "total_steps", "bootstrap"):
            if key in params:
                v = params[key]
                if not isinstance(v, (int, float)) or v != int(v) or v < (0 if key == "bootstrap" else 1):
                    raise ConfigError(f"'{key}' must be a positive integer, got {v!r}")
        for key, v in cfg.get("grid", {}).items():
            if isinstance(v, list) and not v:
                raise ConfigError(f"grid '{key}' is empty")
        return cls(name, seed, preset, model, params, out)

    def echo(self):
        return {"experiment": self.experiment, "seed": self.seed, "preset": self.preset,
                "model": self.model, "params": self.params}


# ------------------------------------------------------------- reports


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(u) for k, u in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_plain(u) for u in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if np.isfinite(v) else None
    return v


def write_curves(out, curves):
    os.makedirs(os.path.join(out, "curves"), exist_ok=True)
    names = []
    for name, (x, y, ci) in sorted(curves.items()):
        path = os.path.join(out, "curves", f"{name}.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "ci"])
            for row in zip(x, y, ci):
                w.writerow([repr(float(v)) for v in row])
        names.append(f"curves/{name}.csv")
    return names


def build_report(command, config_echo, claims, wall, curves=()):
    report = _plain({
        "tool": "subgeom-lab", "version": __version__, "command": command,
        "config": config_echo, "claims": claims,
        "verdict": "pass" if all(c["verdict"] == "pass" for c in claims) else "fail",
        "wall_time_s": wall, "curves": list(curves),
    })
    jsonschema.validate(report, REPORT_SCHEMA)
    return report


def write_report(out, report):
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "report.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run(config):
    """Run one experiment config, write report.json and curves, return the report."""
    t0 = time.perf_counter()
    claims, curves, resolved, _ = experiments.run_experiment(
        config.experiment, config.seed, config.params, config.model, config.preset)
    names = write_curves(config.out, curves)
    echo = config.echo()
    echo["resolved"] = resolved
    report = build_report("run", echo, claims, time.perf_counter() - t0, names)
    write_report(config.out, report)
    return report


def verify(cfg, out):
    v = dict(cfg.get("verify", {}))
    preset = v.get("preset", "ap-langevin-k3")
    triple = v.get("triple", "k3-p2")
    grid = v.get("grid", list(np.geomspace(2.0, 100.0, 20)))
    if not isinstance(grid, list):
        grid = [grid]
    t0 = time.perf_counter()
    claims = experiments.verify_triple(preset, triple, [float(g) for g in grid],
                                       cfg.get("model") or None)
    echo = {"preset": preset, "triple": triple, "grid": grid, "model": cfg.get("model", {})}
    report = build_report("verify", echo, claims, time.perf_counter() - t0)
    write_report(out, report)
    return report


def report_diff(path_a, path_b, rel_tol=0.0):
    """Claims whose verdict or measured value differ between two reports."""
    with open(path_a) as fa, open(path_b) as fb:
        a, b = json.load(fa), json.load(fb)
    ca = {c["id"]: c for c in a["claims"]}
    cb = {c["id"]: c for c in b["claims"]}
    rows = []
    for cid in sorted(set(ca) | set(cb)):
        x, y = ca.get(cid), cb.get(cid)
        if x is None or y is None:
            rows.append({"id": cid, "change": "only in " + ("second" if x is None else "first")})
            continue
        mx, my = x.get("measured"), y.get("measured")
        moved = mx != my and not (mx is not None and my is not None
                                  and abs(mx - my) <= rel_tol * max(abs(mx), abs(my)))
        if x["verdict"] != y["verdict"] or moved:
            rows.append({"id": cid, "change": "verdict" if x["verdict"] != y["verdict"] else "value",
                         "first": [x["verdict"], mx], "second": [y["verdict"], my]})
    return rows


# ----------------------------------------------------------------- CLI


def _parser():
    p = argparse.ArgumentParser(prog="subgeom-lab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="INI or JSON config file")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="section.key=value, repeatable; bare keys go to [experiment]")

    r = sub.add_parser("run", help="run a named experiment")
    common(r)
    r.add_argument("experiment", nargs="?", help="experiment name (overrides the config)")
    r.add_argument("--seed", type=int)
    r.add_argument("--paths", type=int, help="number of simulated paths")
    v = sub.add_parser("verify", help="grid-check the drift inequalities of a triple preset")
    common(v)
    v.add_argument("--seed", type=int, help="accepted for symmetry; verification is deterministic")
    sub.add_parser("list", help="list experiments")
    d = sub.add_parser("report-diff", help="compare two report.json files")
    d.add_argument("first")
    d.add_argument("second")
    d.add_argument("--rel-tol", type=float, default=0.0)
    return p


def _gather(args):
    cfg = load_config(args.config) if args.config else {s: {} for s in SECTIONS}
    for item in args.override:
        apply_override(cfg, item)
    return cfg


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.command == "list":
            for e in experiments.list_experiments():
                print(f"{e['name']:<26} {e['tag']:<9} ~{e['runtime_s']:>4.0f}s  {e['summary']}")
            return 0
        if args.command == "report-diff":
            rows = report_diff(args.first, args.second, args.rel_tol)
            for row in rows:
                print(json.dumps(row))
            if not rows:
                print("no differences")
            return 0 if not any(r["change"] != "value" for r in rows) else 1
        cfg = _gather(args)
        if args.command == "verify":
            report = verify(cfg, args.out)
        else:
            ex = cfg["experiment"]
            if args.experiment:
                ex["name"] = args.experiment
            if args.seed is not None:
                ex["seed"] = args.seed
            if args.paths is not None:
                ex["paths"] = args.paths
            report = run(ExperimentConfig.from_sections(cfg, args.out))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except BlowUpError as exc:
        print(f"blow-up: {exc} (seed {exc.seed})", file=sys.stderr)
        return 3
    except SubgeomError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    for c in report["claims"]:
        print(f"{c['verdict'].upper():<5} {c['id']:<32} measured={c['measured']}")
    print(f"overall: {report['verdict']}  ({report['wall_time_s']:.1f}s)  -> {args.out}/report.json")
    return 0 if report["verdict"] == "pass" else 1


if __name__ == "__main__":
    sys.exit(main())
