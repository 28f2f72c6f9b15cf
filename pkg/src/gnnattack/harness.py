"""Experiment harness: config parsing, pipeline commands, metric persistence.

A run is described by an INI config file plus CLI overrides, and every
command funnels results into the same delimited schema::

    run_id,dataset,model,phase,norm,eps,k,lambda,seed,split,loss,accuracy,wall_ms

Reruns of the same config write byte-identical metrics.csv files. That rules
real timings out of the table, so wall_ms is fixed at 0 there and the
measured wall clock lives in run_record.json next to it.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import json
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .decision import AttackBudget, attack_report, norm_name, topk_pgd_attack
from .graphdata import (
    GraphDataset,
    SplitConfig,
    build_graph_from_embeddings,
    dataset_from_embeddings,
    encode_labels,
    load_embedding_corpus,
    load_planetoid,
    read_edge_list,
    stratified_split,
    write_edge_list,
    write_feature_file,
    write_label_file,
    write_split_file,
)
from .models import (
    TrainConfig,
    evaluate_split,
    load_checkpoint,
    prepare_structure,
    save_checkpoint,
    train,
)
from .plots import line_plot
from .poison import PoisonConfig, gcl_poison, mean_shift_poison, poison_retrain_evaluate, write_trace_csv
from .synthetic import SyntheticSpec, clustered_dataset

__all__ = [
    "ConfigError",
    "DatasetSpec",
    "ExperimentConfig",
    "RunRecord",
    "parse_config",
    "load_config_file",
    "cmd_train",
    "cmd_attack",
    "cmd_poison",
    "cmd_sweep",
    "cmd_plot",
    "cmd_build_graph",
    "METRICS_COLUMNS",
]

METRICS_COLUMNS = ["run_id", "dataset", "model", "phase", "norm", "eps", "k",
                   "lambda", "seed", "split", "loss", "accuracy", "wall_ms"]

DEFAULT_EPS_GRID = tuple(round(0.1 * i, 1) for i in range(11))
DEFAULT_LAMBDA_GRID = tuple(round(0.1 * i, 1) for i in range(1, 10)) + (0.92, 0.98, 1.0)
DEFAULT_NORM_GRID = ("l1", "l2", "linf")
DEFAULT_SEEDS = (0, 1, 2, 3, 4)


class ConfigError(ValueError):
    """Bad config file, flags, or referenced paths; maps to exit code 2."""


# ------------------------------------------------------------------- config


@dataclass(frozen=True)
class DatasetSpec:
    """Where the graph comes from: citation files, a feature corpus, or the
    built-in clustered generator."""

    kind: str = "synthetic"
    name: str = ""
    content: str | None = None
    cites: str | None = None
    features: str | None = None
    labels: str | None = None
    edges: str | None = None
    threshold: float = 0.85
    normalize: bool = True
    train_frac: float = 0.1
    val_frac: float = 0.1
    split_seed: int = 0
    split_file: str | None = None
    classes: int = 4
    per_class: int = 30
    dim: int = 768
    noise: float = 0.35
    gen_seed: int = 0

    def __post_init__(self):
        if self.kind not in ("planetoid", "corpus", "synthetic"):
            raise ConfigError(f"unknown dataset kind {self.kind!r}")
        if not self.name:
            object.__setattr__(self, "name", self.kind)

    def _split(self) -> SplitConfig:
        return SplitConfig(train_frac=self.train_frac, val_frac=self.val_frac,
                           seed=self.split_seed, split_path=self.split_file)

    def load(self) -> GraphDataset:
        if self.kind == "planetoid":
            for label, p in (("content", self.content), ("cites", self.cites)):
                if p is None:
                    raise ConfigError(f"planetoid dataset needs a {label} path")
                if not Path(p).exists():
                    raise ConfigError(f"{label} file not found: {p}")
            return load_planetoid(self.content, self.cites, split=self._split(),
                                  normalize_features=self.normalize, name=self.name)
        if self.kind == "corpus":
            for label, p in (("features", self.features), ("labels", self.labels)):
                if p is None:
                    raise ConfigError(f"corpus dataset needs a {label} path")
                if not Path(p).exists():
                    raise ConfigError(f"{label} file not found: {p}")
            x, raw = load_embedding_corpus(self.features, self.labels)
            edges = None
            if self.edges is not None:
                if not Path(self.edges).exists():
                    raise ConfigError(f"edges file not found: {self.edges}")
                edges = read_edge_list(self.edges, n=len(raw))
            return dataset_from_embeddings(x, raw, threshold=self.threshold,
                                           split=self._split(), name=self.name,
                                           edges=edges)
        spec = SyntheticSpec(num_classes=self.classes, per_class=self.per_class,
                             dim=self.dim, noise=self.noise,
                             threshold=self.threshold, seed=self.gen_seed)
        ds = clustered_dataset(spec, split=self._split())
        return replace(ds, name=self.name)


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    model_kind: str = "gcn"
    train: TrainConfig = field(default_factory=TrainConfig)
    budget: AttackBudget = field(default_factory=AttackBudget)
    poison_method: str = "mean_shift"
    poison: PoisonConfig = field(default_factory=PoisonConfig)
    sweep_eps: tuple = DEFAULT_EPS_GRID
    sweep_lambdas: tuple = DEFAULT_LAMBDA_GRID
    sweep_norms: tuple = DEFAULT_NORM_GRID
    sweep_seeds: tuple = DEFAULT_SEEDS
    seed: int = 0
    out_dir: str = "runs"

    def __post_init__(self):
        if self.model_kind not in ("gcn", "gat"):
            raise ConfigError(f"model kind must be gcn or gat, got {self.model_kind!r}")
        if self.poison_method not in ("mean_shift", "gcl"):
            raise ConfigError(f"poison method must be mean_shift or gcl, "
                              f"got {self.poison_method!r}")
        for grid, label in ((self.sweep_eps, "eps"), (self.sweep_lambdas, "lambda"),
                            (self.sweep_norms, "norms"), (self.sweep_seeds, "seeds")):
            if not grid:
                raise ConfigError(f"sweep grid {label} is empty")

    def to_dict(self) -> dict:
        """Semantic content only: filesystem locations are excluded so the
        hash is stable across machines holding the same experiment."""
        d = {
            "dataset": {k: v for k, v in asdict(self.dataset).items()
                        if k not in ("content", "cites", "features", "labels",
                                     "edges", "split_file")},
            "model": self.model_kind,
            "train": asdict(self.train),
            "attack": {**asdict(self.budget),
                       "norm": norm_name(self.budget.norm)},
            "poison_method": self.poison_method,
            "poison": asdict(self.poison),
            "sweep": {"eps": list(self.sweep_eps),
                      "lambdas": list(self.sweep_lambdas),
                      "norms": [norm_name(parse_any_norm(n)) for n in self.sweep_norms],
                      "seeds": list(self.sweep_seeds)},
            "seed": self.seed,
        }
        return d

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def parse_any_norm(v):
    from .decision import parse_norm

    return parse_norm(v)


def _get(section, key, cast, default):
    if section is None or key not in section:
        return default
    raw = section[key]
    try:
        if cast is bool:
            return section.getboolean(key)
        return cast(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def _tuple_of(cast):
    def parse(raw: str):
        items = [s.strip() for s in raw.split(",") if s.strip()]
        return tuple(cast(s) for s in items)

    return parse


_KNOWN_KEYS = {
    "dataset": {"kind", "name", "content", "cites", "features", "labels",
                "edges", "threshold", "normalize", "train_frac", "val_frac",
                "split_seed", "split_file", "classes", "per_class", "dim",
                "noise", "gen_seed"},
    "model": {"kind", "epochs", "learning_rate", "weight_decay", "dropout",
              "patience", "hidden"},
    "attack": {"norm", "eps", "step", "iterations", "k", "projection"},
    "poison": {"method", "lambda", "epochs", "learning_rate", "similarity"},
    "sweep": {"eps", "lambda", "norms", "seeds"},
    "run": {"seed", "out"},
}


def _reject_unknown(parser: configparser.ConfigParser, path: Path) -> None:
    """A typo'd key would otherwise fall back to its default without a
    word, which makes for miserable debugging; fail loudly instead."""
    for name in parser.sections():
        known = _KNOWN_KEYS.get(name)
        if known is None:
            raise ConfigError(f"{path}: unknown section [{name}]; expected one "
                              f"of {', '.join(sorted(_KNOWN_KEYS))}")
        for key in parser[name]:
            if key not in known:
                raise ConfigError(f"{path}: unknown key {key!r} in [{name}]; "
                                  f"valid keys: {', '.join(sorted(known))}")


def load_config_file(path: str | Path) -> configparser.ConfigParser:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    _reject_unknown(parser, path)
    return parser


def parse_config(path: str | Path | None = None,
                 overrides: dict | None = None) -> ExperimentConfig:
    """Materialize an ExperimentConfig from an INI file plus CLI overrides.

    Sections: [dataset], [model], [attack], [poison], [sweep], [run]. Any
    missing key falls back to its default; overrides win over file values.
    """
    overrides = dict(overrides or {})
    parser = load_config_file(path) if path else configparser.ConfigParser()

    def section(name):
        return parser[name] if parser.has_section(name) else None

    ds_s, model_s = section("dataset"), section("model")
    attack_s, poison_s = section("attack"), section("poison")
    sweep_s, run_s = section("sweep"), section("run")

    seed = int(overrides.pop("seed", _get(run_s, "seed", int, 0)))
    out_dir = str(overrides.pop("out", _get(run_s, "out", str, "runs")))

    try:
        dataset = DatasetSpec(
            kind=_get(ds_s, "kind", str, "synthetic"),
            name=_get(ds_s, "name", str, ""),
            content=_get(ds_s, "content", str, None),
            cites=_get(ds_s, "cites", str, None),
            features=_get(ds_s, "features", str, None),
            labels=_get(ds_s, "labels", str, None),
            edges=_get(ds_s, "edges", str, None),
            threshold=_get(ds_s, "threshold", float, 0.85),
            normalize=_get(ds_s, "normalize", bool, True),
            train_frac=_get(ds_s, "train_frac", float, 0.1),
            val_frac=_get(ds_s, "val_frac", float, 0.1),
            split_seed=_get(ds_s, "split_seed", int, 0),
            split_file=_get(ds_s, "split_file", str, None),
            classes=_get(ds_s, "classes", int, 4),
            per_class=_get(ds_s, "per_class", int, 30),
            dim=_get(ds_s, "dim", int, 768),
            noise=_get(ds_s, "noise", float, 0.35),
            gen_seed=_get(ds_s, "gen_seed", int, 0),
        )
        train_cfg = TrainConfig(
            epochs=_get(model_s, "epochs", int, 200),
            learning_rate=_get(model_s, "learning_rate", float, 0.01),
            weight_decay=_get(model_s, "weight_decay", float, 5e-4),
            dropout=_get(model_s, "dropout", float, 0.5),
            seed=seed,
            patience=_get(model_s, "patience", int, 30),
            hidden_dims=_get(model_s, "hidden", _tuple_of(int), (256, 32)),
        )
        k_raw = overrides.pop("k", _get(attack_s, "k", str, "all"))
        k = None if str(k_raw).lower() == "all" else int(k_raw)
        step_raw = _get(attack_s, "step", float, None)
        budget = AttackBudget(
            norm=overrides.pop("norm", _get(attack_s, "norm", str, "linf")),
            eps=float(overrides.pop("eps", _get(attack_s, "eps", float, 0.1))),
            step=step_raw,
            iterations=_get(attack_s, "iterations", int, 40),
            k=k,
            projection=str(overrides.pop("proj",
                                         _get(attack_s, "projection", str, "radial"))),
        )
        poison_cfg = PoisonConfig(
            lam=float(overrides.pop("lam", _get(poison_s, "lambda", float, 0.3))),
            epochs=_get(poison_s, "epochs", int, 200),
            learning_rate=_get(poison_s, "learning_rate", float, 0.01),
            similarity=_get(poison_s, "similarity", str, "cosine"),
            seed=seed,
        )
        config = ExperimentConfig(
            dataset=dataset,
            model_kind=_get(model_s, "kind", str, "gcn"),
            train=train_cfg,
            budget=budget,
            poison_method=_get(poison_s, "method", str, "mean_shift"),
            poison=poison_cfg,
            sweep_eps=_get(sweep_s, "eps", _tuple_of(float), DEFAULT_EPS_GRID),
            sweep_lambdas=_get(sweep_s, "lambda", _tuple_of(float), DEFAULT_LAMBDA_GRID),
            sweep_norms=_get(sweep_s, "norms", _tuple_of(str), DEFAULT_NORM_GRID),
            sweep_seeds=_get(sweep_s, "seeds", _tuple_of(int), DEFAULT_SEEDS),
            seed=seed,
            out_dir=out_dir,
        )
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    if overrides:
        raise ConfigError(f"unknown overrides: {sorted(overrides)}")
    return config


# ------------------------------------------------------------------ records


@dataclass
class RunRecord:
    phase: str
    config_hash: str
    seed: int
    reports: dict
    wall_clock_s: float
    artifacts: dict
    inputs: dict = field(default_factory=dict)

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")


class MetricsTable:
    """Accumulates schema rows and writes them as one deterministic CSV."""

    def __init__(self, config_hash: str, dataset: str, model: str):
        self.prefix = config_hash[:8]
        self.dataset = dataset
        self.model = model
        self.rows: list[dict] = []

    @staticmethod
    def _fmt(v) -> str:
        if v is None or v == "":
            return ""
        if isinstance(v, float):
            return repr(float(v))
        return str(v)

    def add(self, phase: str, split: str, loss: float, accuracy: float, *,
            norm="", eps="", k="", lam="", seed=0) -> None:
        self.rows.append({
            "run_id": f"{self.prefix}-{len(self.rows):04d}",
            "dataset": self.dataset,
            "model": self.model,
            "phase": phase,
            "norm": self._fmt(norm),
            "eps": self._fmt(eps),
            "k": self._fmt(k),
            "lambda": self._fmt(lam),
            "seed": self._fmt(seed),
            "split": split,
            "loss": self._fmt(loss),
            "accuracy": self._fmt(accuracy),
            "wall_ms": "0",
        })

    def write(self, path: Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=METRICS_COLUMNS)
            writer.writeheader()
            writer.writerows(self.rows)


def _report_dict(report) -> dict:
    return {"loss": report.loss, "accuracy": report.accuracy,
            "split": report.split, "n": report.n}


def _checkpoint_path(cfg: ExperimentConfig, out: Path) -> Path:
    return out / f"{cfg.model_kind}-{cfg.dataset.name}-seed{cfg.seed}.ckpt"


# ------------------------------------------------------------------ commands


def cmd_train(cfg: ExperimentConfig) -> RunRecord:
    """Train once, write checkpoint + history + metrics + run record."""
    started = time.perf_counter()
    ds = cfg.dataset.load()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    params, history = train(cfg.model_kind, ds, cfg.train)
    structure = prepare_structure(cfg.model_kind, ds)
    reports = {}
    table = MetricsTable(cfg.config_hash, ds.name, cfg.model_kind)
    for split in ("val", "test"):
        mask = ds.val_mask if split == "val" else ds.test_mask
        if not mask.any():
            continue
        rep = evaluate_split(params, ds, split, structure=structure)
        reports[split] = rep
        table.add("train", split, rep.loss, rep.accuracy, seed=cfg.seed)

    ckpt = _checkpoint_path(cfg, out)
    save_checkpoint(ckpt, params)
    table.write(out / "metrics.csv")
    history_path = out / "history.csv"
    with open(history_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["epoch", "train_loss", "train_acc",
                                                "val_loss", "val_acc"])
        writer.writeheader()
        writer.writerows(history["rows"])

    record = RunRecord(
        phase="train",
        config_hash=cfg.config_hash,
        seed=cfg.seed,
        reports={k: _report_dict(v) for k, v in reports.items()},
        wall_clock_s=time.perf_counter() - started,
        artifacts={"checkpoint": str(ckpt), "metrics": str(out / "metrics.csv"),
                   "history": str(history_path)},
    )
    record.write(out / "run_record.json")
    return record


def _load_params_for(cfg: ExperimentConfig, ds: GraphDataset, checkpoint):
    path = Path(checkpoint) if checkpoint else _checkpoint_path(cfg, Path(cfg.out_dir))
    if not path.exists():
        raise ConfigError(f"checkpoint not found: {path} (train first, or pass "
                          f"--checkpoint)")
    params = load_checkpoint(path)
    if params.kind != cfg.model_kind:
        raise ConfigError(f"checkpoint holds a {params.kind} model but the config "
                          f"asks for {cfg.model_kind}")
    if params.weights[0].shape[0] != ds.num_features:
        raise ConfigError(
            f"checkpoint expects {params.weights[0].shape[0]} features but the "
            f"dataset has {ds.num_features}")
    return params, path


def cmd_attack(cfg: ExperimentConfig, checkpoint: str | None = None) -> RunRecord:
    """One decision-time attack at the configured budget, clean row included."""
    started = time.perf_counter()
    ds = cfg.dataset.load()
    params, ckpt = _load_params_for(cfg, ds, checkpoint)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    structure = prepare_structure(cfg.model_kind, ds)
    clean = evaluate_split(params, ds, "test", structure=structure)
    x_prime, pert = topk_pgd_attack(params, ds, cfg.budget, structure=structure)
    attacked = attack_report(params, ds, x_prime, structure=structure)

    k = cfg.budget.resolve_k(ds.n)
    table = MetricsTable(cfg.config_hash, ds.name, cfg.model_kind)
    table.add("clean", "test", clean.loss, clean.accuracy, seed=cfg.seed)
    table.add("attack", "test", attacked.loss, attacked.accuracy,
              norm=norm_name(cfg.budget.norm), eps=cfg.budget.eps, k=k, seed=cfg.seed)
    table.write(out / "metrics.csv")
    feat_path = out / "attacked-features.feat"
    write_feature_file(feat_path, x_prime)

    record = RunRecord(
        phase="attack",
        config_hash=cfg.config_hash,
        seed=cfg.seed,
        reports={"clean": _report_dict(clean), "attacked": _report_dict(attacked)},
        wall_clock_s=time.perf_counter() - started,
        artifacts={"metrics": str(out / "metrics.csv"),
                   "attacked_features": str(feat_path)},
        inputs={"checkpoint": str(ckpt)},
    )
    record.write(out / "run_record.json")
    return record


def cmd_poison(cfg: ExperimentConfig) -> RunRecord:
    """Poison, retrain from scratch, and report both sides of the swap."""
    started = time.perf_counter()
    ds = cfg.dataset.load()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    artifacts = {}

    if cfg.poison_method == "mean_shift":
        x_star = mean_shift_poison(ds.features, cfg.poison.lam)
    else:
        opt_outcome = gcl_poison(ds.features, cfg.poison)
        x_star = opt_outcome.x_star
        trace_path = out / "poison-trace.csv"
        write_trace_csv(trace_path, opt_outcome.trace)
        artifacts["trace"] = str(trace_path)

    outcome = poison_retrain_evaluate(ds, x_star, cfg.train, cfg.model_kind)
    feat_path = out / "poisoned-features.feat"
    write_feature_file(feat_path, x_star)
    artifacts["poisoned_features"] = str(feat_path)

    table = MetricsTable(cfg.config_hash, ds.name, cfg.model_kind)
    table.add("poison", "test", outcome.poisoned_report.loss,
              outcome.poisoned_report.accuracy, lam=cfg.poison.lam, seed=cfg.seed)
    table.add("poison", "test_clean", outcome.clean_report.loss,
              outcome.clean_report.accuracy, lam=cfg.poison.lam, seed=cfg.seed)
    table.write(out / "metrics.csv")
    artifacts["metrics"] = str(out / "metrics.csv")

    record = RunRecord(
        phase="poison",
        config_hash=cfg.config_hash,
        seed=cfg.seed,
        reports={"poisoned": _report_dict(outcome.poisoned_report),
                 "clean_features": _report_dict(outcome.clean_report)},
        wall_clock_s=time.perf_counter() - started,
        artifacts=artifacts,
    )
    record.write(out / "run_record.json")
    return record


def cmd_sweep(cfg: ExperimentConfig, kind: str) -> RunRecord:
    """Grid runs over seeds: attack sweeps (norm × ε) or poison sweeps (λ).

    Each seed trains a fresh model; the summary file aggregates grid points
    as mean and population standard deviation over seeds.
    """
    if kind not in ("attack", "poison"):
        raise ConfigError(f"sweep kind must be attack or poison, got {kind!r}")
    started = time.perf_counter()
    ds = cfg.dataset.load()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = MetricsTable(cfg.config_hash, ds.name, cfg.model_kind)
    groups: dict[tuple, list[float]] = {}
    structure = prepare_structure(cfg.model_kind, ds)

    for seed in cfg.sweep_seeds:
        train_cfg = replace(cfg.train, seed=int(seed))
        params, _ = train(cfg.model_kind, ds, train_cfg, structure=structure)
        clean = evaluate_split(params, ds, "test", structure=structure)
        table.add("clean", "test", clean.loss, clean.accuracy, seed=seed)
        groups.setdefault(("clean", "", "", ""), []).append(clean.accuracy)

        if kind == "attack":
            for norm in cfg.sweep_norms:
                for eps in cfg.sweep_eps:
                    budget = replace(cfg.budget, norm=norm, eps=float(eps), step=None)
                    x_prime, _ = topk_pgd_attack(params, ds, budget, structure=structure)
                    rep = attack_report(params, ds, x_prime, structure=structure)
                    key = ("attack", norm_name(budget.norm), float(eps), "")
                    groups.setdefault(key, []).append(rep.accuracy)
                    table.add("attack", "test", rep.loss, rep.accuracy,
                              norm=norm_name(budget.norm), eps=float(eps),
                              k=budget.resolve_k(ds.n), seed=seed)
        else:
            for lam in cfg.sweep_lambdas:
                poison_cfg = replace(cfg.poison, lam=float(lam), seed=int(seed))
                if cfg.poison_method == "mean_shift":
                    x_star = mean_shift_poison(ds.features, poison_cfg.lam)
                else:
                    x_star = gcl_poison(ds.features, poison_cfg).x_star
                outcome = poison_retrain_evaluate(ds, x_star, train_cfg, cfg.model_kind)
                key = ("poison", "", "", float(lam))
                groups.setdefault(key, []).append(outcome.poisoned_report.accuracy)
                table.add("poison", "test", outcome.poisoned_report.loss,
                          outcome.poisoned_report.accuracy, lam=float(lam), seed=seed)
                table.add("poison", "test_clean", outcome.clean_report.loss,
                          outcome.clean_report.accuracy, lam=float(lam), seed=seed)

    table.write(out / "metrics.csv")
    summary_path = out / "sweep-summary.csv"
    with open(summary_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["phase", "norm", "eps", "lambda", "mean_accuracy",
                         "std_accuracy", "seeds"])
        for key in sorted(groups, key=lambda t: tuple(str(v) for v in t)):
            vals = np.array(groups[key])
            writer.writerow([key[0], key[1], key[2], key[3],
                             repr(float(vals.mean())), repr(float(vals.std())),
                             len(vals)])

    record = RunRecord(
        phase=f"sweep-{kind}",
        config_hash=cfg.config_hash,
        seed=cfg.seed,
        reports={},
        wall_clock_s=time.perf_counter() - started,
        artifacts={"metrics": str(out / "metrics.csv"), "summary": str(summary_path)},
    )
    record.write(out / "run_record.json")
    return record


def cmd_plot(metrics_path: str | Path, x: str, y: str, series: str,
             out_path: str | Path, where: dict | None = None) -> Path:
    """Line plot straight from a metrics CSV.

    Rows are filtered by the ``where`` column=value pairs, grouped into one
    line per distinct ``series`` value, and sorted by numeric x.
    """
    metrics_path = Path(metrics_path)
    if not metrics_path.exists():
        raise ConfigError(f"metrics file not found: {metrics_path}")
    with open(metrics_path, newline="") as fh:
        reader = csv.DictReader(fh)
        columns = reader.fieldnames or []
        rows = list(reader)
    if not rows:
        raise ConfigError(f"{metrics_path}: no data rows to plot")
    for col in (x, y, series):
        if col not in columns:
            raise ConfigError(f"unknown column {col!r}; available: {', '.join(columns)}")
    for col in (where or {}):
        if col not in columns:
            raise ConfigError(f"unknown filter column {col!r}; available: "
                              f"{', '.join(columns)}")

    grouped: dict[str, list[tuple[float, float]]] = {}
    for row in rows:
        if where and any(row[c] != v for c, v in where.items()):
            continue
        try:
            point = (float(row[x]), float(row[y]))
        except ValueError:
            continue  # rows where x or y is blank do not belong to this plot
        grouped.setdefault(row[series], []).append(point)
    if not grouped:
        raise ConfigError("no rows with numeric values survived the filters")
    plot_series = []
    for label in sorted(grouped):
        pts = sorted(grouped[label])
        plot_series.append((label, [p[0] for p in pts], [p[1] for p in pts]))
    return line_plot(out_path, plot_series, xlabel=x, ylabel=y)


def cmd_build_graph(features_path: str | Path, labels_path: str | Path,
                    threshold: float, out_prefix: str | Path,
                    train_frac: float = 0.1, val_frac: float = 0.1,
                    split_seed: int = 0) -> dict:
    """Corpus files in, graph files out, plus printable stats.

    Emits ``<prefix>.edges``, ``<prefix>.labels``, ``<prefix>.split.json``.
    """
    for label, p in (("features", features_path), ("labels", labels_path)):
        if not Path(p).exists():
            raise ConfigError(f"{label} file not found: {p}")
    x, raw = load_embedding_corpus(features_path, labels_path)
    edges = build_graph_from_embeddings(x, threshold)
    ids, _ = encode_labels(raw)
    tr, va, te = stratified_split(ids, train_frac, val_frac, split_seed)

    prefix = Path(out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    paths = {s: Path(f"{prefix}.{s}") for s in ("edges", "labels", "split.json")}
    write_edge_list(paths["edges"], edges)
    write_label_file(paths["labels"], raw)
    write_split_file(paths["split.json"], tr, va, te)

    n = x.shape[0]
    deg = np.zeros(n, dtype=int)
    if len(edges):
        np.add.at(deg, edges[:, 0], 1)
        np.add.at(deg, edges[:, 1], 1)
    histogram = {int(d): int(c) for d, c in
                 zip(*np.unique(deg, return_counts=True))}
    return {
        "n": int(n),
        "edges": int(len(edges)),
        "density": float(2 * len(edges) / (n * (n - 1))) if n > 1 else 0.0,
        "degree_histogram": histogram,
        "files": [str(p) for p in paths.values()],
    }
