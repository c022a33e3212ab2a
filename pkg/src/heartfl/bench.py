"""Experiment harness: centralized, federated, local-baseline, SHAP and grid-search runs.

Usage::

    bench centralized --data-dir DATA --seeds 0..9 --format markdown --out table2.md
    bench federated --families LR,NN1,SVM --strategies fedavg,fedadam,fedyogi,scaffold

Exit codes: 0 success, 1 usage error, 2 I/O error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import dataset as D
from .dataset import CENTERS, Center, FEATURE_SETS, RawRecord
from .errors import ConfigError, HeartFLError, ParseError
from .federation import ALL_STRATEGIES, FedConfig, Strategy, run_federated, run_local_baseline, write_trace
from .interpret import mean_abs_shap, sample_background
from .models import (ALL_FAMILIES, DEFAULT_GRIDS, DEFAULT_HYPERPARAMS, DIFFERENTIABLE,
                     FLAMBY_LR, Family, Hyperparams, holdout_accuracy, score_grid, train_model)

log = logging.getLogger(__name__)

EXPERIMENTS = ("centralized", "federated", "local-baseline", "shap", "grid-search")
FORMATS = ("csv", "json", "markdown")
FLAMBY_ROW = "LR [FLamby]"
REFERENCE_POOLED_ROWS = 740

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3


@dataclass
class RunConfig:
    experiment: str
    data_dir: str | None = None
    families: tuple[Family, ...] = ()
    strategies: tuple[Strategy, ...] = ALL_STRATEGIES
    seeds: tuple[int, ...] = tuple(range(10))
    hyperparams: dict[Family, Hyperparams] = field(default_factory=dict)
    tune: bool = False
    features: str = "full"
    rounds: int = 30
    local_steps: int = 50
    train_frac: float = 0.66
    server_lr: float | None = None
    scaffold_option: str = "ii"
    include_switzerland: bool = False
    background_size: int = 100
    shap_instances: int | None = None
    output_format: str = "markdown"
    out: str | None = None
    trace: str | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment: expected one of {EXPERIMENTS}, got {self.experiment!r}")
        if not self.seeds:
            raise ConfigError("seeds: the seed list is empty")
        self.seeds = tuple(int(s) for s in self.seeds)
        if self.features not in (*FEATURE_SETS, "auto"):
            raise ConfigError(f"features: expected full, table4 or auto, got {self.features!r}")
        if self.output_format not in FORMATS:
            raise ConfigError(f"format: expected one of {FORMATS}, got {self.output_format!r}")
        fams = tuple(Family.parse(f) for f in self.families)
        if not fams:
            fams = DIFFERENTIABLE if self.experiment in ("federated", "local-baseline") else ALL_FAMILIES
        if self.experiment in ("federated", "local-baseline"):
            bad = [f.value for f in fams if f not in DIFFERENTIABLE]
            if bad:
                raise ConfigError(f"families: {bad} cannot run in the federated comparison")
        self.families = fams
        self.strategies = tuple(Strategy.parse(s) for s in self.strategies)
        if self.experiment == "federated" and not self.strategies:
            raise ConfigError("strategies: at least one strategy is required")
        self.hyperparams = {Family.parse(k): v for k, v in self.hyperparams.items()}

    def hp_for(self, family: Family) -> Hyperparams:
        return self.hyperparams.get(family, DEFAULT_HYPERPARAMS[family])


@dataclass
class Cell:
    mean: float
    std: float = 0.0
    rank: int | None = None


@dataclass
class BenchReport:
    experiment: str
    kind: str  # "accuracy" or "shap"
    rows: list[str]
    columns: list[str]
    cells: dict[tuple[str, str], Cell]
    metadata: dict = field(default_factory=dict)

    def cell(self, row: str, col: str) -> Cell:
        return self.cells[(row, col)]


def parse_seeds(text: str) -> tuple[int, ...]:
    """``"0..9"`` (inclusive), ``"1,4,7"`` or a mix such as ``"0..2,9"``."""
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..", 1)
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ConfigError(f"seeds: empty range {part!r}")
            seeds.extend(range(lo, hi + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise ConfigError("seeds: no seeds given")
    return tuple(seeds)


def resolve_feature_set(name: str, records: Sequence[RawRecord]) -> tuple[str, ...]:
    """Map a feature-set name to column names.

    ``auto`` picks the first of ``full``, ``table4`` whose complete-case row
    count equals the 740 pooled rows of the reference setup, else ``full``.
    """
    if name != "auto":
        return FEATURE_SETS[name]
    for cand in ("full", "table4"):
        if len(D.drop_incomplete(records, D.UCI_SCHEMA, FEATURE_SETS[cand])) == REFERENCE_POOLED_ROWS:
            return FEATURE_SETS[cand]
    return FEATURE_SETS["full"]


def _file_digests(data_dir):
    root = D.resolve_data_dir(data_dir)
    out = {}
    for c in CENTERS:
        path = root / c.filename
        if path.exists():
            out[c.filename] = hashlib.sha256(path.read_bytes()).hexdigest()[:16]
    return out


def config_hash(cfg: RunConfig, features: Sequence[str], digests: dict) -> str:
    payload = {
        "experiment": cfg.experiment,
        "families": [f.value for f in cfg.families],
        "strategies": [s.value for s in cfg.strategies],
        "seeds": list(cfg.seeds),
        "hyperparams": {f.value: _hp_json(cfg.hp_for(f)) for f in cfg.families},
        "tune": cfg.tune,
        "features": list(features),
        "rounds": cfg.rounds,
        "local_steps": cfg.local_steps,
        "train_frac": cfg.train_frac,
        "server_lr": cfg.server_lr,
        "scaffold_option": cfg.scaffold_option,
        "include_switzerland": cfg.include_switzerland,
        "background_size": cfg.background_size,
        "shap_instances": cfg.shap_instances,
        "data": digests,
    }
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _hp_json(hp: Hyperparams) -> dict:
    return {"family": hp.family.value, **hp.relevant()}


def _acc_cell(accs) -> Cell:
    accs = np.asarray(accs, dtype=float)
    return Cell(float(accs.mean()), float(accs.std()))


def _tune(cfg, ds):
    """Grid-search every requested family on the pooled data; returns {family: (hp, accs)}."""
    best = {}
    for fam in cfg.families:
        scored = score_grid(fam, DEFAULT_GRIDS[fam], cfg.seeds, ds, cfg.train_frac, cfg.hp_for(fam))
        hp, accs = max(scored, key=lambda t: t[1].mean())  # max keeps the first of equal means
        log.info("tuned %s: %s -> %.3f", fam.value, hp.relevant(), accs.mean())
        best[fam] = (hp, accs)
    return best


def run_experiment(cfg: RunConfig, records: Sequence[RawRecord] | None = None) -> BenchReport:
    """Run ``cfg.experiment`` over every seed and collect a :class:`BenchReport`.

    ``records`` may be passed to bypass reading ``cfg.data_dir``.
    """
    t0 = time.perf_counter()
    if records is None:
        records = D.load_uci(cfg.data_dir)
        digests = _file_digests(cfg.data_dir)
    else:
        digests = {"records": hashlib.sha256(repr([(r.values, r.center.value) for r in records])
                                             .encode()).hexdigest()[:16]}
    features = resolve_feature_set(cfg.features, records)
    ds = D.preprocess(records, D.UCI_SCHEMA, features)
    log.info("%s: %d rows x %d features", cfg.experiment, len(ds), ds.n_features)

    if cfg.tune or cfg.experiment == "grid-search":
        tuned = _tune(cfg, ds)
        cfg.hyperparams.update({f: hp for f, (hp, _) in tuned.items()})
    else:
        tuned = {}

    runner = {
        "centralized": _centralized,
        "grid-search": _centralized,
        "federated": _federated,
        "local-baseline": _local_baseline,
        "shap": _shap,
    }[cfg.experiment]
    report = runner(cfg, ds, tuned)
    report.metadata.update({
        "seeds": list(cfg.seeds),
        "features": list(features),
        "rows": len(ds),
        "hyperparams": {f.value: _hp_json(cfg.hp_for(f)) for f in cfg.families},
        "config_hash": config_hash(cfg, features, digests),
        "runtime_s": round(time.perf_counter() - t0, 3),
    })
    return report


def _centralized(cfg, ds, tuned):
    rows, cells = [], {}
    for fam in cfg.families:
        if fam in tuned:
            accs = tuned[fam][1]
        else:
            hp = cfg.hp_for(fam)
            accs = [holdout_accuracy(hp, ds, s, cfg.train_frac) for s in cfg.seeds]
        rows.append(fam.value)
        cells[(fam.value, "pooled")] = _acc_cell(accs)
        if fam is Family.LR and cfg.experiment == "centralized":
            flamby = [holdout_accuracy(FLAMBY_LR, ds, s, cfg.train_frac) for s in cfg.seeds]
            rows.append(FLAMBY_ROW)
            cells[(FLAMBY_ROW, "pooled")] = _acc_cell(flamby)
    return BenchReport(cfg.experiment, "accuracy", rows, ["pooled"], cells)


def _federated(cfg, ds, tuned):
    cols = [s.label for s in cfg.strategies]
    rows, cells = [], {}
    if cfg.trace:
        Path(cfg.trace).write_text("")
    for fam in cfg.families:
        rows.append(fam.value)
        for strat in cfg.strategies:
            fc = FedConfig(fam, cfg.hp_for(fam), strat, cfg.rounds, cfg.local_steps, cfg.seeds,
                           cfg.train_frac, cfg.server_lr, scaffold_option=cfg.scaffold_option)
            summary = run_federated(fc, ds)
            if cfg.trace:
                for run in summary.runs:
                    write_trace(run, cfg.trace)
            cells[(fam.value, strat.label)] = Cell(summary.mean, summary.std)
    return BenchReport(cfg.experiment, "accuracy", rows, cols, cells)


def _local_baseline(cfg, ds, tuned):
    centers = [c for c in CENTERS if cfg.include_switzerland or c is not Center.SWITZERLAND]
    rows, cells = [], {}
    for fam in cfg.families:
        rows.append(fam.value)
        for c in centers:
            mean, std = run_local_baseline(c, ds, cfg.hp_for(fam), cfg.seeds, cfg.train_frac)
            cells[(fam.value, c.label)] = Cell(mean, std)
    return BenchReport(cfg.experiment, "accuracy", rows, [c.label for c in centers], cells)


def shap_for_family(hp: Hyperparams, ds: D.TabularDataset, seed: int, background_size: int = 100,
                    n_instances: int | None = None, train_frac: float = 0.66):
    """Train ``hp`` on one seeded split and explain its test predictions."""
    train, test = D.split_train_test(ds, seed, train_frac)
    train, test, _ = D.standardize(train, test)
    model = train_model(hp, train, seed)
    bg = sample_background(train, background_size, seed)
    if n_instances is not None:
        test = test.take(np.arange(min(n_instances, len(test))))
    return mean_abs_shap(model, test, bg, label=hp.family.value)


def _shap(cfg, ds, tuned):
    names = list(ds.schema.names)
    rows, cells = [], {}
    for fam in cfg.families:
        rep = shap_for_family(cfg.hp_for(fam), ds, cfg.seeds[0], cfg.background_size,
                              cfg.shap_instances, cfg.train_frac)
        rows.append(fam.value)
        for j, name in enumerate(names):
            cells[(fam.value, name)] = Cell(float(rep.mean_abs[j]), 0.0, int(rep.ranks[j]))
    return BenchReport(cfg.experiment, "shap", rows, names, cells)


def format_cell(c: Cell | None, kind: str) -> str:
    if c is None:
        return ""
    if kind == "shap":
        return f"{c.mean:.3f} ({c.rank})"
    return f"{c.mean:.3f} ± {c.std:.3f}"


def parse_cell(text: str, kind: str) -> Cell | None:
    text = text.strip()
    if not text:
        return None
    if kind == "shap":
        value, rank = text.split("(")
        return Cell(float(value), 0.0, int(rank.rstrip(")")))
    mean, std = text.split("±")
    return Cell(float(mean), float(std))


def report_to_json(report: BenchReport, with_runtime: bool = True) -> dict:
    body = {}
    for r in report.rows:
        body[r] = {}
        for c in report.columns:
            cell = report.cells.get((r, c))
            if cell is None:
                continue
            if report.kind == "shap":
                body[r][c] = {"mean_abs": round(cell.mean, 3), "rank": cell.rank}
            else:
                body[r][c] = {"mean": round(cell.mean, 3), "std": round(cell.std, 3)}
    meta = dict(report.metadata)
    if not with_runtime:
        meta.pop("runtime_s", None)
    return {"experiment": report.experiment, "kind": report.kind,
            "columns": list(report.columns), "rows": body, "metadata": meta}


def render(report: BenchReport, fmt: str) -> str:
    head = "model" if report.kind == "shap" else "family"
    if fmt == "json":
        return json.dumps(report_to_json(report), indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    table = [[r] + [format_cell(report.cells.get((r, c)), report.kind) for c in report.columns]
             for r in report.rows]
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([head] + list(report.columns))
        w.writerows(table)
        return buf.getvalue()
    if fmt == "markdown":
        lines = ["| " + " | ".join([head] + list(report.columns)) + " |",
                 "|" + "---|" * (len(report.columns) + 1)]
        lines += ["| " + " | ".join(row) + " |" for row in table]
        meta = report.metadata
        if meta:
            lines += ["", f"seeds: {_seed_text(meta.get('seeds', []))}; "
                          f"rows: {meta.get('rows')}; config: {meta.get('config_hash')}"]
        return "\n".join(lines) + "\n"
    raise ConfigError(f"format: unknown format {fmt!r}")


def _seed_text(seeds):
    seeds = list(seeds)
    if seeds and seeds == list(range(seeds[0], seeds[-1] + 1)) and len(seeds) > 2:
        return f"{seeds[0]}..{seeds[-1]}"
    return ",".join(map(str, seeds))


def parse_report(text: str, fmt: str, kind: str = "accuracy") -> dict[tuple[str, str], Cell]:
    """Read the numeric cells back from rendered csv or json output."""
    cells = {}
    if fmt == "json":
        doc = json.loads(text)
        for r, cols in doc["rows"].items():
            for c, v in cols.items():
                if doc["kind"] == "shap":
                    cells[(r, c)] = Cell(v["mean_abs"], 0.0, v["rank"])
                else:
                    cells[(r, c)] = Cell(v["mean"], v["std"])
        return cells
    if fmt == "csv":
        rows = list(csv.reader(io.StringIO(text)))
        header = rows[0][1:]
        for row in rows[1:]:
            for c, t in zip(header, row[1:]):
                cell = parse_cell(t, kind)
                if cell is not None:
                    cells[(row[0], c)] = cell
        return cells
    raise ConfigError(f"cannot parse format {fmt!r}")


def emit_report(report: BenchReport, fmt: str, path: str | Path | None = None) -> str:
    """Render ``report``; write it to ``path`` when given. Returns the text."""
    text = render(report, fmt)
    if path is not None:
        try:
            Path(path).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise OSError(f"cannot write report to {path}: {exc.strerror}") from exc
    return text


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="bench", description="Heart-disease centralized/federated benchmark.")
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--data-dir", help=f"directory with the processed.*.data files "
                                       f"(default: ${D.DATA_DIR_ENV})")
    ap.add_argument("--families", default="", help="comma list, e.g. LR,NN1,SVM")
    ap.add_argument("--strategies", default=",".join(s.value for s in ALL_STRATEGIES))
    ap.add_argument("--seeds", default="0..9")
    ap.add_argument("--rounds", type=int, default=30)
    ap.add_argument("--local-steps", type=int, default=50)
    ap.add_argument("--features", default="full", choices=(*FEATURE_SETS, "auto"))
    ap.add_argument("--tune", action="store_true", help="grid-search hyperparameters first")
    ap.add_argument("--hparams", help="JSON file mapping family to hyperparameter overrides")
    ap.add_argument("--server-lr", type=float)
    ap.add_argument("--scaffold-option", choices=("i", "ii"), default="ii")
    ap.add_argument("--include-switzerland", action="store_true")
    ap.add_argument("--background-size", type=int, default=100)
    ap.add_argument("--shap-instances", type=int)
    ap.add_argument("--trace", help="write per-round federated records (JSON lines)")
    ap.add_argument("--format", default="markdown", choices=FORMATS)
    ap.add_argument("--out", help="output path (default: stdout)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def load_hparams(path) -> dict[Family, Hyperparams]:
    doc = json.loads(Path(path).read_text())
    out = {}
    for fam, fields in doc.items():
        fam = Family.parse(fam)
        base = DEFAULT_HYPERPARAMS[fam]
        try:
            out[fam] = base.replace(**fields)
        except TypeError as exc:
            raise ConfigError(f"hparams: {exc}") from None
    return out


def config_from_args(args) -> RunConfig:
    return RunConfig(
        experiment=args.experiment,
        data_dir=args.data_dir,
        families=tuple(f for f in args.families.split(",") if f.strip()),
        strategies=tuple(s for s in args.strategies.split(",") if s.strip()),
        seeds=parse_seeds(args.seeds),
        hyperparams=load_hparams(args.hparams) if args.hparams else {},
        tune=args.tune,
        features=args.features,
        rounds=args.rounds,
        local_steps=args.local_steps,
        server_lr=args.server_lr,
        scaffold_option=args.scaffold_option,
        include_switzerland=args.include_switzerland,
        background_size=args.background_size,
        shap_instances=args.shap_instances,
        output_format=args.format,
        out=args.out,
        trace=args.trace,
    )


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        report = run_experiment(cfg)
        text = emit_report(report, cfg.output_format, cfg.out)
        if cfg.out is None:
            sys.stdout.write(text)
    except ConfigError as exc:
        print(f"bench: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ParseError) as exc:
        print(f"bench: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ArithmeticError, FloatingPointError, HeartFLError) as exc:
        print(f"bench: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
