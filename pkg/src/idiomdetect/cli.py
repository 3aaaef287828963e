"""Command-line front end for reproducible experiments.

Configuration is line-oriented ``key = value`` text; command-line flags
override file values, and every command writes the fully resolved
configuration (defaults included) into the output directory before doing
any work, so each run is diffable provenance.  All randomness derives from
the single mandatory ``seed`` via named substreams.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import baseline, corpus, embeddings, ensemble, evaluation, model
from .errors import ConfigError, IdiomDetectError
from .util import derive_seed

DEFAULTS = {
    "task": "sentence",
    "language": "sl",
    "filter.agreement": "true",
    "split.mode": "random",
    "split.train": "0.63",
    "split.test": "0.30",
    "split.dev": "0.07",
    "split.test_fraction": "0.30",
    "train.epochs": "10",
    "train.learning_rate": "0.001",
    "train.rho": "0.9",
    "train.epsilon": "1e-7",
    "train.batch_size": "32",
    "train.clip_norm": "none",
    "model.hidden": "100",
    "model.dropout": "0.5",
    "systems": "gru",
    "cupt.keep_categories": "VID",
    "ablate.fractions": "1.0,0.8,0.6,0.4,0.2,0.1",
    "ensemble.k": "1",
    "eval.expression_tokens_only": "false",
}


def parse_config_file(path) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values


def resolve_config(args) -> dict[str, str]:
    config = dict(DEFAULTS)
    if getattr(args, "config", None):
        config.update(parse_config_file(args.config))
    for pair in getattr(args, "set", None) or []:
        if "=" not in pair:
            raise ConfigError(f"--set expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        config[key.strip()] = value.strip()
    for flag in ("corpus", "archive", "out", "task", "seed"):
        value = getattr(args, flag, None)
        if value is not None:
            config[flag] = str(value)
    if "seed" not in config:
        raise ConfigError("seed is mandatory: pass --seed or set it in the config file")
    int(config["seed"])
    return config


def _require(config, key) -> str:
    if key not in config or not config[key]:
        raise ConfigError(f"missing required config key {key!r}")
    return config[key]


def _out_dir(config) -> Path:
    out = Path(_require(config, "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def echo_config(config: dict[str, str], out_dir: Path) -> None:
    lines = [f"{key} = {config[key]}" for key in sorted(config)]
    (out_dir / "config.resolved").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _load_raw_corpus(config):
    path = _require(config, "corpus")
    if not Path(path).exists():
        raise ConfigError(f"corpus path does not exist: {path}")
    if path.endswith(".cupt"):
        keep = config.get("cupt.keep_categories", "VID")
        categories = None if keep in ("", "all") else frozenset(keep.split(","))
        return [
            corpus.cupt_to_annotated(s, config.get("language", "xx"))
            for s in corpus.load_cupt(path, categories)
        ]
    return corpus.load_sloie(path, language=config.get("language", "sl"))


def _load_corpus(config):
    sentences = _load_raw_corpus(config)
    if config.get("filter.agreement", "true").lower() == "true":
        sentences = corpus.filter_agreement(sentences)
    return sentences


def _open_archive(config):
    path = _require(config, "archive")
    if not Path(path).exists():
        raise ConfigError(f"archive path does not exist: {path}")
    return embeddings.open_archive(path)


def _train_config(config, seed: int) -> model.TrainConfig:
    clip = config.get("train.clip_norm", "none")
    return model.TrainConfig(
        epochs=int(config["train.epochs"]),
        learning_rate=float(config["train.learning_rate"]),
        rho=float(config["train.rho"]),
        epsilon=float(config["train.epsilon"]),
        batch_size=int(config["train.batch_size"]),
        seed=seed,
        clip_norm=None if clip in ("none", "") else float(clip),
    )


def _task(config) -> model.Task:
    name = config.get("task", "sentence")
    try:
        return model.Task(name)
    except ValueError:
        raise ConfigError(f"task must be 'token' or 'sentence', got {name!r}") from None


def _build_systems(config):
    names = [n.strip() for n in config.get("systems", "").split(",") if n.strip()]
    systems = []
    for name in names:
        if name == "gru":
            systems.append(
                model.GruSystem(
                    hidden_size=int(config["model.hidden"]),
                    dropout_rate=float(config["model.dropout"]),
                    config=_train_config(config, 0),
                )
            )
        elif name == "svm":
            systems.append(baseline.SvmSystem())
        elif name == "majority":
            systems.append(baseline.MajoritySystem())
        elif name == "all_positive":
            systems.append(baseline.AllPositiveSystem())
        else:
            raise ConfigError(f"unknown system {name!r}")
    return systems


def _resolve_split(config, sentences, seed: int) -> corpus.DataSplit:
    if config.get("split.file"):
        return corpus.load_split(config["split.file"])
    mode = config.get("split.mode", "random")
    if mode == "random":
        ratios = (
            float(config["split.train"]),
            float(config["split.test"]),
            float(config["split.dev"]),
        )
        return corpus.split_random(sentences, ratios=ratios, seed=derive_seed(seed, "split"))
    if mode == "expression":
        return corpus.split_expression_disjoint(
            sentences,
            test_fraction=float(config["split.test_fraction"]),
            seed=derive_seed(seed, "split"),
        )
    raise ConfigError(f"unknown split.mode {mode!r}")


def _write_reports(report, out_dir: Path) -> None:
    evaluation.emit_report(report, "tsv", out_dir / "report.tsv")
    evaluation.emit_report(report, "json", out_dir / "report.json")
    if report.per_expression is not None:
        (out_dir / "per_expression.tsv").write_text(
            evaluation.render_per_expression_tsv(report), encoding="utf-8"
        )
        histogram = evaluation.f1_histogram([r.f1 for r in report.per_expression])
        (out_dir / "f1_histogram.tsv").write_text(
            evaluation.render_histogram_tsv(histogram), encoding="utf-8"
        )


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_stats(args) -> int:
    config = resolve_config(args)
    out_dir = _out_dir(config)
    echo_config(config, out_dir)
    raw = _load_raw_corpus(config)
    filtered = corpus.filter_agreement(raw)
    lines = []
    for name, sentences in (("raw", raw), ("filtered", filtered)):
        stats = corpus.compute_stats(sentences)
        lines.append(f"[{name}]")
        lines.append(f"sentences = {stats.sentences}")
        lines.append(f"tokens = {stats.tokens}")
        lines.append(f"idiomatic_sentences = {stats.idiomatic_sentences}")
        lines.append(f"literal_sentences = {stats.literal_sentences}")
        lines.append(f"idiomatic_tokens = {stats.idiomatic_tokens}")
        lines.append(f"literal_tokens = {stats.literal_tokens}")
        lines.append(f"expressions = {stats.expressions}")
    if raw:
        lines.append(f"inter_annotator_agreement = {corpus.inter_annotator_agreement(raw):.4f}")
    text = "\n".join(lines) + "\n"
    (out_dir / "stats.txt").write_text(text, encoding="utf-8")
    print(text, end="")
    return 0


def cmd_split(args) -> int:
    config = resolve_config(args)
    out_dir = _out_dir(config)
    echo_config(config, out_dir)
    sentences = _load_corpus(config)
    split = _resolve_split(config, sentences, int(config["seed"]))
    corpus.save_split(split, out_dir / "split.txt")
    print(
        f"split sizes: train={len(split.train)} test={len(split.test)} dev={len(split.dev)}"
    )
    return 0


def cmd_train(args) -> int:
    config = resolve_config(args)
    out_dir = _out_dir(config)
    echo_config(config, out_dir)
    seed = int(config["seed"])
    sentences = _load_corpus(config)
    archive = _open_archive(config)
    split = _resolve_split(config, sentences, seed)
    train_sentences = [s for s in sentences if s.id in split.train]
    task = _task(config)
    train_config = _train_config(config, seed=derive_seed(seed, "train"))
    gru = model.init_model(
        archive.dim,
        hidden_size=int(config["model.hidden"]),
        dropout_rate=float(config["model.dropout"]),
        seed=derive_seed(seed, "train"),
    )
    _, trace = model.train(gru, train_sentences, archive, task, train_config)
    model.save_checkpoint(gru, train_config, out_dir / "model.ckpt")
    trace_lines = ["epoch\tloss"] + [
        f"{epoch + 1}\t{loss:.6f}" for epoch, loss in enumerate(trace)
    ]
    (out_dir / "loss_trace.tsv").write_text("\n".join(trace_lines) + "\n", encoding="utf-8")
    print(f"trained {task.value} model on {len(train_sentences)} sentences")
    return 0


def _pretrained_systems(checkpoints, task):
    systems = []
    for i, path in enumerate(checkpoints):
        trained, _ = model.load_checkpoint(path)
        name = Path(path).stem if len(checkpoints) == 1 else f"{Path(path).stem}#{i}"
        systems.append(model.PretrainedGruSystem({task: trained}, name=name))
    return systems


def cmd_eval(args) -> int:
    config = resolve_config(args)
    out_dir = _out_dir(config)
    echo_config(config, out_dir)
    seed = int(config["seed"])
    sentences = _load_corpus(config)
    archive = _open_archive(config)
    systems = _build_systems(config)
    tasks = (model.Task.TOKEN, model.Task.SENTENCE)
    if args.checkpoint:
        # Loaded checkpoints serve one task, so restrict the run to it.
        task = _task(config)
        tasks = (task,)
        systems = _pretrained_systems(args.checkpoint, task) + systems
    expression_tokens_only = (
        config.get("eval.expression_tokens_only", "false").lower() == "true"
    )
    if config.get("split.mode", "random") == "expression":
        report = evaluation.run_out_of_training_eval(
            sentences,
            archive,
            systems,
            seed,
            test_fraction=float(config["split.test_fraction"]),
            tasks=tasks,
            expression_tokens_only=expression_tokens_only,
        )
    else:
        ratios = (
            float(config["split.train"]),
            float(config["split.test"]),
            float(config["split.dev"]),
        )
        report = evaluation.run_in_training_eval(
            sentences, archive, systems, seed, ratios, tasks=tasks,
            expression_tokens_only=expression_tokens_only,
        )
    _write_reports(report, out_dir)
    print(evaluation.render_report_tsv(report), end="")
    return 0


def cmd_ensemble(args) -> int:
    config = resolve_config(args)
    out_dir = _out_dir(config)
    echo_config(config, out_dir)
    seed = int(config["seed"])
    if len(args.checkpoint) < 2:
        raise ConfigError("ensemble needs at least 2 --checkpoint models (3 in practice)")
    sentences = _load_corpus(config)
    archive = _open_archive(config)
    task = _task(config)
    split = _resolve_split(config, sentences, seed)
    train_set = [s for s in sentences if s.id in split.train]
    test_set = [s for s in sentences if s.id in split.test]
    members = _pretrained_systems(args.checkpoint, task)
    mm = ensemble.EnsembleSystem(
        members, mode="mm", k=int(config["ensemble.k"]), fit_members=False
    )
    voting = ensemble.EnsembleSystem(members, mode="vote", fit_members=False)
    report = evaluation.EvalReport(
        experiment="ensemble",
        split=f"{split.mode.value} seed={seed}",
        metadata={"train_size": len(train_set), "test_size": len(test_set)},
    )
    gold = evaluation._gold_labels(test_set, task)
    for system in members + [mm, voting]:
        system.fit(train_set, archive, task, derive_seed(seed, f"fit/{system.name}"))
        predictions = evaluation._predicted_labels(system, test_set, archive, task)
        _, ca, f1 = evaluation.score(predictions, gold, task)
        report.rows.append(
            evaluation.ReportRow(system=system.name, level=task.value, ca=ca, f1=f1)
        )
    ensemble.save_ensemble(mm.densities[task], out_dir / "ensemble.bin")
    _write_reports(report, out_dir)
    print(evaluation.render_report_tsv(report), end="")
    return 0


def cmd_ablate(args) -> int:
    config = resolve_config(args)
    out_dir = _out_dir(config)
    echo_config(config, out_dir)
    sentences = _load_corpus(config)
    archive = _open_archive(config)
    systems = _build_systems(config)
    if len(systems) != 1:
        raise ConfigError("ablate runs exactly one system; set systems=<name>")
    fractions = tuple(float(f) for f in config["ablate.fractions"].split(","))
    report = evaluation.run_size_ablation(
        sentences, archive, systems[0], fractions=fractions, seed=int(config["seed"])
    )
    _write_reports(report, out_dir)
    print(evaluation.render_report_tsv(report), end="")
    return 0


def cmd_balanced(args) -> int:
    config = resolve_config(args)
    out_dir = _out_dir(config)
    echo_config(config, out_dir)
    sentences = _load_corpus(config)
    archive = _open_archive(config)
    systems = _build_systems(config)
    if len(systems) != 1:
        raise ConfigError("balanced runs exactly one system; set systems=<name>")
    report = evaluation.run_balanced_study(
        sentences, archive, systems[0], seed=int(config["seed"])
    )
    _write_reports(report, out_dir)
    print(evaluation.render_report_tsv(report), end="")
    return 0


def cmd_crosslingual(args) -> int:
    config = resolve_config(args)
    out_dir = _out_dir(config)
    echo_config(config, out_dir)
    seed = int(config["seed"])
    train_sentences = _load_corpus(config)
    archives = {train_sentences[0].language: _open_archive(config)}
    tests = {}
    for spec_str in args.test or []:
        parts = spec_str.split(":")
        if len(parts) != 3:
            raise ConfigError(f"--test expects language:corpus:archive, got {spec_str!r}")
        language, corpus_path, archive_path = parts
        loaded = [
            corpus.cupt_to_annotated(s, language)
            for s in corpus.load_cupt(
                corpus_path, frozenset(config["cupt.keep_categories"].split(","))
            )
        ]
        tests[language] = corpus.balance_sentence_level(
            loaded, seed=derive_seed(seed, f"balance/{language}")
        )
        archives[language] = embeddings.open_archive(archive_path)
    systems = _build_systems(config)
    if len(systems) != 1:
        raise ConfigError("crosslingual runs exactly one system; set systems=<name>")
    report = evaluation.run_crosslingual_eval(
        train_sentences, tests, archives, systems[0], seed=seed
    )
    _write_reports(report, out_dir)
    print(evaluation.render_report_tsv(report), end="")
    return 0


def cmd_export_report(args) -> int:
    config = resolve_config(args)
    out_dir = _out_dir(config)
    echo_config(config, out_dir)
    text = Path(args.input).read_text(encoding="utf-8")
    report = evaluation.report_from_json(text)
    target = out_dir / f"report.{args.to}"
    evaluation.emit_report(report, args.to, target)
    print(f"wrote {target}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_common(sub):
    sub.add_argument("--config", help="key = value config file")
    sub.add_argument("--seed", type=int, help="master seed (mandatory here or in config)")
    sub.add_argument("--out", help="output directory")
    sub.add_argument("--task", choices=["token", "sentence"], help="classification level")
    sub.add_argument("--archive", help="embedding archive path")
    sub.add_argument("--corpus", help="corpus path (.tsv or .cupt)")
    sub.add_argument(
        "--set",
        action="append",
        metavar="KEY=VALUE",
        help="override any config key (repeatable)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="idiomdetect",
        description="Idiom detection experiments over frozen embedding archives.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    commands = {
        "stats": (cmd_stats, "corpus statistics, raw and agreement-filtered"),
        "split": (cmd_split, "compute and persist a data split"),
        "train": (cmd_train, "train a biGRU and write a checkpoint"),
        "eval": (cmd_eval, "train/evaluate systems on one split"),
        "ensemble": (cmd_ensemble, "combine trained checkpoints (MM + voting)"),
        "ablate": (cmd_ablate, "dataset-size ablation"),
        "balanced": (cmd_balanced, "balanced vs size-matched imbalanced study"),
        "crosslingual": (cmd_crosslingual, "train once, evaluate per language"),
        "export-report": (cmd_export_report, "convert a JSON report"),
    }
    for name, (func, help_text) in commands.items():
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        p.set_defaults(func=func)
        if name in ("eval", "ensemble"):
            p.add_argument("--checkpoint", action="append", default=[], help="trained model file")
        if name == "crosslingual":
            p.add_argument(
                "--test",
                action="append",
                metavar="LANG:CORPUS:ARCHIVE",
                help="per-language test set (repeatable)",
            )
        if name == "export-report":
            p.add_argument("--input", required=True, help="JSON report to convert")
            p.add_argument("--to", choices=["tsv", "json"], default="tsv")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (IdiomDetectError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
