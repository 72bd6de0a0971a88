"""Command-line entry point: datasets, GAN training, attacks, detectors, evaluation and reports.

Option values resolve as flag > config file section > built-in default. Config files
are INI text with one section per subcommand (``[dataset-split]``, ``[train-gan]``, ...)
and an optional ``[DEFAULT]`` section shared by all of them.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from . import __version__
from .data import (
    DEFAULT_CLASSES,
    FORMAT_VERSION as DATASET_FORMAT,
    MIN_CLASS_SIZE,
    Manifest,
    SplitSpec,
    balance,
    ingest,
    load_tensors,
    save_tensors,
    split,
    synth_signs,
)
from .detectors import (
    DetectorBank,
    TrainConfig,
    build_detector,
    build_resnet9,
    evaluate_two_stage,
    history_csv,
    train,
)
from .detectors.hybrid import HIDDEN, N_CIRCUITS
from .gan import (
    LOSS_MODES,
    AttackConfig,
    Critic,
    GanTrainConfig,
    GanTrainer,
    Generator,
    attack,
    objective_bound,
    toy_networks,
    toy_samples,
)
from .metrics import COLUMNS, DetectionResult, ParamRow, Report, count_params, dense_param_count, emit_report
from .quantum.qcnn import DEFAULT_TOPOLOGY
from .tensor.checkpoint import FORMAT_VERSION as CHECKPOINT_FORMAT, CheckpointError, load_module, save_module

ENV_OUT = "QDEEPFAKE_OUT"
SPLITS = ("train", "val", "test")
PUBLISHED_HYBRID = 5_425
TOY_SIZE = 4000


class CliError(Exception):
    pass


@dataclass(frozen=True)
class Opt:
    name: str
    type: type
    default: object
    help: str
    choices: tuple | None = None


SEED = Opt("seed", int, 0, "seed for every random draw of the run")
TRAIN_OPTS = [Opt("epochs", int, 50, "training epochs"), Opt("batch-size", int, 16, "mini-batch size"),
              Opt("lr", float, 1e-3, "Adam learning rate"), SEED]

COMMANDS: dict[str, tuple[str, list[Opt]]] = {
    "dataset-synth": ("render a procedural sign dataset as a PNG tree", [
        Opt("classes", int, 10, "number of sign classes"),
        Opt("per-class", int, 60, "images per class, split evenly between real and fake"), SEED]),
    "dataset-ingest": ("read a PNG tree into a dataset file", [Opt("in", str, None, "PNG tree root")]),
    "dataset-balance": ("undersample the majority provenance of every class", [
        Opt("in", str, None, "PNG tree root or dataset file"), SEED]),
    "dataset-split": ("split every class 60/20/20 into train, val and test", [
        Opt("in", str, None, "PNG tree root or dataset file"), SEED]),
    "train-gan": ("train the WGAN-GP generator and critic (resumable)", [
        Opt("data", str, None, "PNG tree, dataset file or split directory (images mode)"),
        Opt("toy", bool, False, "train the 2-D Gaussian toy problem instead of images"),
        Opt("width", float, 1.0, "channel width multiplier of the image networks"),
        Opt("steps", int, 1000, "generator steps"), Opt("batch-size", int, 64, "mini-batch size"),
        Opt("n-critic", int, 5, "critic updates per generator step"), Opt("lr", float, 1e-4, "Adam learning rate"),
        Opt("beta1", float, 0.0, "Adam beta1"), Opt("beta2", float, 0.9, "Adam beta2"),
        Opt("lam", float, 10.0, "gradient-penalty weight"),
        Opt("loss", str, "canonical", "critic objective", LOSS_MODES),
        Opt("resume", bool, False, "continue from the state saved in the output directory"), SEED]),
    "attack": ("replace images with the generator output farthest from them", [
        Opt("gan", str, None, "train-gan output directory"),
        Opt("data", str, None, "PNG tree, dataset file or split directory"),
        Opt("limit", int, 4, "attack the first N images (0 = all)"),
        Opt("restarts", int, 8, "random latent restarts"), Opt("steps", int, 50, "ascent steps per restart"),
        Opt("step-size", float, 0.05, "Adam step size on z"),
        Opt("min-objective", float, 0.0, "mark attacks scoring below this value as rejected"), SEED]),
    "train-detector": ("train one real/fake detector per sign class", [
        Opt("data", str, None, "split directory"),
        Opt("kind", str, None, "detector family", ("classical", "hybrid")),
        Opt("depth", int, 1, "classical CNN depth", (1, 2, 3, 4, 5)),
        Opt("grad-method", str, "analytic", "hybrid circuit gradient", ("analytic", "fd", "shift")),
        Opt("classes", str, "", "comma-separated subset of sign classes (default all)"), *TRAIN_OPTS]),
    "train-classifier": ("train the ResNet-9 sign-type classifier", [
        Opt("data", str, None, "split directory"), Opt("width", int, 64, "base channel width"), *TRAIN_OPTS]),
    "evaluate": ("run two-stage detection over a split and write the report", [
        Opt("data", str, None, "split directory"), Opt("split", str, "test", "split to evaluate", SPLITS),
        Opt("classifier", str, None, "train-classifier output directory"),
        Opt("detectors", str, None, "train-detector output directory")]),
    "report": ("write the parameter and memory table, optionally with detection scores", [
        Opt("evaluation", str, "", "evaluate output directory whose scores to include"),
        Opt("classifier-width", int, 64, "ResNet-9 width to account for"),
        Opt("classifier-classes", int, 10, "ResNet-9 output classes to account for")]),
}
REQUIRED = {"dataset-ingest": ["in"], "dataset-balance": ["in"], "dataset-split": ["in"], "attack": ["gan", "data"],
            "train-detector": ["data", "kind"], "train-classifier": ["data"],
            "evaluate": ["data", "classifier", "detectors"]}


def _key(name: str) -> str:
    return name.replace("-", "_")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qdeepfake", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add(p, command):
        p.set_defaults(section=command)
        p.add_argument("--config", help="INI file with a [%s] section" % command)
        p.add_argument("--out", help=f"output directory (default ${ENV_OUT}/{command} or ./runs/{command})")
        for o in COMMANDS[command][1]:
            if o.type is bool:
                p.add_argument(f"--{o.name}", action="store_const", const=True, default=None, help=o.help)
            else:
                p.add_argument(f"--{o.name}", type=o.type, choices=o.choices, default=None, help=o.help)

    ds = sub.add_parser("dataset", help="dataset tooling").add_subparsers(dest="action", required=True,
                                                                           metavar="action")
    for action in ("synth", "ingest", "balance", "split"):
        command = f"dataset-{action}"
        add(ds.add_parser(action, help=COMMANDS[command][0]), command)
    for command in COMMANDS:
        if not command.startswith("dataset-"):
            add(sub.add_parser(command, help=COMMANDS[command][0]), command)
    return parser


def _convert(o: Opt, raw: str, section: configparser.SectionProxy):
    if o.type is bool:
        return section.getboolean(o.name)
    value = o.type(raw)
    if o.choices is not None and value not in o.choices:
        raise CliError(f"config value {o.name}={raw} not one of {', '.join(map(str, o.choices))}")
    return value


def resolve(args: argparse.Namespace) -> dict:
    """Merge flags over the config file section over defaults."""
    command = args.section
    opts = COMMANDS[command][1]
    file_values = {}
    if args.config:
        cfg = configparser.ConfigParser(interpolation=None)
        if not cfg.read(args.config):
            raise CliError(f"cannot read config file {args.config}")
        known = {o.name for o in opts} | {"out"}
        if cfg.has_section(command):
            section = cfg[command]
            unknown = sorted(set(cfg.options(command)) - known - set(cfg.defaults()))
            if unknown:
                raise CliError(f"unknown option(s) {', '.join(unknown)} in [{command}] of {args.config}")
        else:
            section = cfg[cfg.default_section]
        for o in opts:
            if o.name in section:
                try:
                    file_values[o.name] = _convert(o, section[o.name], section)
                except ValueError as exc:
                    raise CliError(f"bad value for {o.name} in {args.config}: {exc}") from None
        if "out" in section:
            file_values["out"] = section["out"]
    values = {}
    for o in opts:
        flag = getattr(args, _key(o.name))
        values[o.name] = flag if flag is not None else file_values.get(o.name, o.default)
    missing = [f"--{name}" for name in REQUIRED.get(command, []) if values[name] in (None, "")]
    if missing:
        raise CliError(f"{command} requires {', '.join(missing)}")
    out = args.out or file_values.get("out") or str(Path(os.environ.get(ENV_OUT, "runs")) / command)
    values["out"] = out
    return values


# -- helpers


class RunDir:
    """Output directory guarded by a lock file for the duration of one run."""

    def __init__(self, path):
        self.path = Path(path)
        self.lock = self.path / ".lock"

    def __enter__(self):
        try:
            self.path.mkdir(parents=True, exist_ok=True)
            fd = os.open(self.lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise CliError(f"output directory {self.path} is in use by another run ({self.lock} exists)") from None
        except OSError as exc:
            raise CliError(f"cannot use output directory {self.path}: {exc}") from None
        with os.fdopen(fd, "w") as fh:
            fh.write(f"{os.getpid()}\n")
        return self

    def __exit__(self, *exc):
        self.lock.unlink(missing_ok=True)


def _snapshot(command: str, values: dict) -> str:
    meta = {"command": command, "options": values, "version": __version__,
            "formats": {"checkpoint": CHECKPOINT_FORMAT, "dataset": DATASET_FORMAT, "report_columns": list(COLUMNS)}}
    return json.dumps(meta, indent=1, sort_keys=True) + "\n"


def load_dataset(path) -> Manifest:
    """A dataset file, or a PNG tree root."""
    path = Path(path)
    if path.is_file():
        return load_tensors(path)
    if not path.exists():
        raise CliError(f"dataset path {path} does not exist")
    return ingest(path)


def load_split(directory) -> dict[str, Manifest]:
    directory = Path(directory)
    out = {}
    for name in SPLITS:
        path = directory / f"{name}.qdf"
        if not path.is_file():
            raise CliError(f"split file {path} does not exist (run 'dataset split' first)")
        out[name] = load_tensors(path)
    return out


def _images(path) -> tuple[np.ndarray, list[str]]:
    """Images for GAN training and attacks: every record of a dataset, or the train split."""
    p = Path(path)
    manifest = load_split(p)["train"] if (p / "train.qdf").is_file() else load_dataset(p)
    return manifest.arrays()[0], [r.source for r in manifest.records]


def _counts_table(m: Manifest) -> str:
    lines = [f"  {'class':<16} {'real':>5} {'fake':>5}"]
    lines += [f"  {label:<16} {r:>5} {f:>5}" for label, (r, f) in m.counts().items()]
    return "\n".join(lines)


def _manifest_csv(m: Manifest) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["source", "label", "provenance"])
    w.writerows([r.source, r.label, r.provenance] for r in m.records)
    return buf.getvalue()


def _save_dataset(m: Manifest, out: Path, stem: str) -> list[Path]:
    save_tensors(m, out / f"{stem}.qdf")
    (out / f"{stem}.csv").write_text(_manifest_csv(m))
    return [out / f"{stem}.qdf", out / f"{stem}.csv"]


def _to_png(image: np.ndarray, path: Path) -> None:
    rgb = np.clip(np.rint((np.asarray(image, dtype=np.float64) + 1) * 127.5), 0, 255).astype(np.uint8)
    Image.fromarray(rgb.transpose(1, 2, 0), "RGB").save(path)


def _hybrid_line() -> str:
    per = DEFAULT_TOPOLOGY.n_params
    head = dense_param_count([N_CIRCUITS, HIDDEN, 2])
    total = N_CIRCUITS * per + head
    return (f"hybrid detector: {N_CIRCUITS} circuits x {per} + {head:,} = {total:,} trainable parameters "
            f"(published total {PUBLISHED_HYBRID:,} differs by {total - PUBLISHED_HYBRID:,}, "
            f"which no per-circuit count over {N_CIRCUITS} circuits can absorb)")


def _detector_name(spec: dict) -> str:
    return f"cnn-{spec['depth']}" if spec["kind"] == "classical" else "hybrid"


def _detector_spec(values: dict) -> dict:
    if values["kind"] == "classical":
        return {"kind": "classical", "depth": values["depth"]}
    return {"kind": "hybrid", "grad_method": values["grad_method"]}


def _gan_networks(model: dict, seed: int):
    if model["kind"] == "toy":
        return toy_networks(seed)
    return (Generator(width=model["width"], seed=seed),
            Critic(width=model["width"], seed=seed, head=model["head"]))


def _rows_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows([repr(v) if isinstance(v, float) else v for v in row] for row in rows)
    return buf.getvalue()


# -- subcommands; each returns the artifact paths it promised


def cmd_dataset_synth(v: dict, out: Path) -> list[Path]:
    if not 1 <= v["classes"] <= len(DEFAULT_CLASSES):
        raise CliError(f"--classes must lie in [1, {len(DEFAULT_CLASSES)}], got {v['classes']}")
    if v["per_class"] < 2:
        raise CliError(f"--per-class must be at least 2 (one real and one fake), got {v['per_class']}")
    classes = list(DEFAULT_CLASSES[: v["classes"]])
    real = v["per_class"] // 2
    synth_signs(out, classes, count=real, fake_count=v["per_class"] - real, seed=v["seed"])
    m = ingest(out)
    print(f"synthesized {len(m)} images under {out}\n{_counts_table(m)}")
    return [out / c for c in classes]


def cmd_dataset_ingest(v: dict, out: Path) -> list[Path]:
    m = ingest(v["in"])
    print(f"ingested {len(m)} images from {v['in']} ({m.warnings} skipped)\n{_counts_table(m)}")
    return _save_dataset(m, out, "dataset")


def cmd_dataset_balance(v: dict, out: Path) -> list[Path]:
    m = load_dataset(v["in"])
    print(f"before balancing ({len(m)} images)\n{_counts_table(m)}")
    b = balance(m, seed=v["seed"])
    print(f"after balancing ({len(b)} images)\n{_counts_table(b)}")
    return _save_dataset(b, out, "balanced")


def cmd_dataset_split(v: dict, out: Path) -> list[Path]:
    m = load_dataset(v["in"])
    parts = split(m, SplitSpec(seed=v["seed"]))
    print(f"before splitting ({len(m)} images)\n{_counts_table(m)}")
    print(f"  {'class':<16} {'train':>5} {'val':>5} {'test':>5}")
    for label in m.classes:
        sizes = [len(p.by_class(label)) for p in parts]
        print(f"  {label:<16} {sizes[0]:>5} {sizes[1]:>5} {sizes[2]:>5}")
    paths = []
    for name, part in zip(SPLITS, parts):
        paths += _save_dataset(part, out, name)
    return paths


def cmd_train_gan(v: dict, out: Path) -> list[Path]:
    if v["toy"]:
        model = {"kind": "toy"}
        data = toy_samples(TOY_SIZE, v["seed"])
    else:
        if not v["data"]:
            raise CliError("train-gan requires --data unless --toy is given")
        model = {"kind": "images", "width": v["width"], "head": "sigmoid" if v["loss"] == "paper_literal" else "linear"}
        data = _images(v["data"])[0]
    config = GanTrainConfig(steps=v["steps"], batch_size=v["batch_size"], n_critic=v["n_critic"], lr=v["lr"],
                            beta1=v["beta1"], beta2=v["beta2"], lam=v["lam"], seed=v["seed"], loss=v["loss"])
    config.check()
    trainer = GanTrainer(data, config, *_gan_networks(model, v["seed"]))
    if v["resume"]:
        if not (out / "trainer.json").is_file():
            raise CliError(f"nothing to resume: {out / 'trainer.json'} does not exist")
        saved = json.loads((out / "model.json").read_text())
        if saved != model:
            raise CliError(f"saved model {saved} differs from the requested {model}")
        trainer.load(out)
        print(f"resuming at step {trainer.step}")
    while trainer.step < config.steps:
        row = trainer.train_step()
        print(f"step {row.step} critic_loss={row.critic_loss:.6f} generator_loss={row.generator_loss:.6f} "
              f"penalty={row.penalty:.6f} grad_norm={row.grad_norm:.6f}", flush=True)
    trainer.generator.eval()
    trainer.save(out)
    (out / "model.json").write_text(json.dumps(model, sort_keys=True) + "\n")
    history = _rows_csv(["step", "critic_loss", "generator_loss", "penalty", "grad_norm"], trainer.history)
    (out / "history.csv").write_text(history)
    return [out / "generator.manifest", out / "critic.manifest", out / "trainer.json", out / "history.csv"]


def load_generator(directory):
    directory = Path(directory)
    if not (directory / "model.json").is_file():
        raise CliError(f"no generator checkpoint in {directory} (missing model.json)")
    model = json.loads((directory / "model.json").read_text())
    generator = _gan_networks(model, 0)[0]
    load_module(generator, directory / "generator")
    generator.eval()
    return generator


def cmd_attack(v: dict, out: Path) -> list[Path]:
    generator = load_generator(v["gan"])
    images, sources = _images(v["data"])
    if images.shape[1:] != tuple(generator.out_shape):
        raise CliError(f"generator makes {tuple(generator.out_shape)} samples but the images are {images.shape[1:]}")
    n = len(images) if v["limit"] == 0 else min(v["limit"], len(images))
    config = AttackConfig(restarts=v["restarts"], steps=v["steps"], step_size=v["step_size"], seed=v["seed"])
    rows, paths = [], []
    for i in range(n):
        res = attack(images[i], generator, config)
        np.save(out / f"z_{i:04d}.npy", res.z)
        _to_png(res.image, out / f"fake_{i:04d}.png")
        paths += [out / f"z_{i:04d}.npy", out / f"fake_{i:04d}.png"]
        rows.append((i, sources[i], f"z_{i:04d}.npy", f"fake_{i:04d}.png", res.restart, res.objective,
                     objective_bound(images[i]), int(res.objective >= v["min_objective"]),
                     " ".join(repr(float(s)) for s in res.objectives)))
        print(f"image {i} ({sources[i]}): objective {res.objective:.6f} from restart {res.restart}")
    header = ["index", "source", "z_file", "image_file", "restart", "objective", "bound", "kept", "restart_objectives"]
    log = _rows_csv(header, rows)
    (out / "attack_log.csv").write_text(log)
    return [*paths, out / "attack_log.csv"]


def _class_subset(values: dict, manifest: Manifest) -> list[str]:
    if not values["classes"]:
        return list(manifest.classes)
    wanted = [c.strip() for c in values["classes"].split(",") if c.strip()]
    unknown = [c for c in wanted if c not in manifest.classes]
    if unknown:
        raise CliError(f"unknown sign class(es): {', '.join(unknown)}")
    return wanted


def cmd_train_detector(v: dict, out: Path) -> list[Path]:
    spec = _detector_spec(v)
    parts = load_split(v["data"])
    if spec["kind"] == "classical":
        print(f"classical CNN depth {spec['depth']}: "
              f"{count_params(build_detector(spec, v['seed'])):,} trainable parameters")
    else:
        print(_hybrid_line())
    classes = _class_subset(v, parts["train"])
    for label in classes:
        n = sum(len(p.by_class(label)) for p in parts.values())
        if n < MIN_CLASS_SIZE or not parts["train"].by_class(label) or not parts["val"].by_class(label):
            raise CliError(f"class '{label}' has {n} images; training a detector needs at least {MIN_CLASS_SIZE} "
                           "with train and val members")
    config = TrainConfig(epochs=v["epochs"], batch_size=v["batch_size"], lr=v["lr"], seed=v["seed"])
    bank = DetectorBank(class_names=list(parts["train"].classes))
    paths = []
    for label in classes:
        xt, _, ft = parts["train"].arrays(label)
        xv, _, fv = parts["val"].arrays(label)
        model = build_detector(spec, v["seed"])
        result = train(model, (xt, ft), (xv, fv), config)
        final = [r for r in result.history if r.split == "train"][-1]
        print(f"{label}: best epoch {result.best_epoch}, last train accuracy {final.accuracy:.4f}")
        path = out / f"history_{label}.csv"
        path.write_text(history_csv(result.history))
        paths.append(path)
        bank.add(parts["train"].class_index(label), result.model, spec)
    bank.save(out / "bank")
    return [*paths, out / "bank" / "bank.json"]


def cmd_train_classifier(v: dict, out: Path) -> list[Path]:
    parts = load_split(v["data"])
    k = len(parts["train"].classes)
    model = build_resnet9(num_classes=k, seed=v["seed"], width=v["width"])
    print(f"ResNet-9 width {v['width']}, {k} classes: {count_params(model):,} trainable parameters")
    xt, ct, _ = parts["train"].arrays()
    xv, cv, _ = parts["val"].arrays()
    config = TrainConfig(epochs=v["epochs"], batch_size=v["batch_size"], lr=v["lr"], seed=v["seed"])
    result = train(model, (xt, ct), (xv, cv), config)
    save_module(result.model, out / "classifier")
    meta = {"width": v["width"], "num_classes": k, "classes": list(parts["train"].classes)}
    (out / "classifier.json").write_text(json.dumps(meta, indent=1) + "\n")
    (out / "history.csv").write_text(history_csv(result.history))
    return [out / "classifier.manifest", out / "classifier.json", out / "history.csv"]


def load_classifier(directory):
    directory = Path(directory)
    if not (directory / "classifier.json").is_file():
        raise CliError(f"no classifier checkpoint in {directory} (missing classifier.json)")
    meta = json.loads((directory / "classifier.json").read_text())
    model = build_resnet9(num_classes=meta["num_classes"], width=meta["width"])
    load_module(model, directory / "classifier")
    model.eval()
    return model, meta


def param_rows(classifier_width: int, num_classes: int, detector_specs=()) -> list[ParamRow]:
    """Trainable counts of every buildable model plus the detectors actually used."""
    rows = [ParamRow(f"cnn-{d}", count_params(build_detector({"kind": "classical", "depth": d})))
            for d in range(1, 6)]
    rows.append(ParamRow("hybrid", count_params(build_detector({"kind": "hybrid"})),
                         f"published total {PUBLISHED_HYBRID:,} is not reachable with {N_CIRCUITS} equal circuits"))
    rows.append(ParamRow("hybrid (published)", PUBLISHED_HYBRID, "reported figure, for comparison"))
    resnet = build_resnet9(num_classes=num_classes, width=classifier_width)
    rows.append(ParamRow(f"resnet9-w{classifier_width}-k{num_classes}", count_params(resnet)))
    for spec in detector_specs:
        name = _detector_name(spec)
        if name not in {r.model for r in rows}:
            rows.append(ParamRow(name, count_params(build_detector(spec))))
    return rows


def cmd_evaluate(v: dict, out: Path) -> list[Path]:
    parts = load_split(v["data"])
    m = parts[v["split"]]
    classifier, meta = load_classifier(v["classifier"])
    bank_dir = Path(v["detectors"]) / "bank"
    if not (bank_dir / "bank.json").is_file():
        raise CliError(f"no detector bank in {v['detectors']} (missing bank/bank.json)")
    bank = DetectorBank.load(bank_dir)
    if meta["classes"] != list(m.classes) or bank.class_names != list(m.classes):
        raise CliError("classifier, detector bank and dataset disagree on the sign class table")
    missing = [m.classes[c] for c in range(len(m.classes)) if c not in bank.detectors]
    if missing:
        raise CliError(f"detector bank is incomplete; missing sign classes: {', '.join(missing)}")
    x, y_class, y_fake = m.arrays()
    res = evaluate_two_stage(x, y_class, y_fake, classifier, bank, len(m.classes))
    detections = []
    for c, cm in sorted(res.per_class.items()):
        detections.append(DetectionResult(_detector_name(bank.specs[c]), m.classes[c], cm))
    detections.append(DetectionResult("two-stage", "all", sum(res.per_class.values())))
    report = Report(detections, param_rows(meta["width"], meta["num_classes"], bank.specs.values()))
    paths = list(emit_report(report, out).values())
    labels = [f"{c}/{p}" for c in m.classes for p in ("real", "fake")]
    joint = _rows_csv(["actual\\predicted", *labels], [[labels[i], *map(int, row)] for i, row in enumerate(res.joint)])
    (out / "joint_confusion.csv").write_text(joint)
    preds = _rows_csv(["source", "label", "provenance", "predicted_class", "predicted_provenance"],
                      [(r.source, r.label, r.provenance, m.classes[c], ("real", "fake")[f])
                       for r, c, f in zip(m.records, res.classes, res.flags)])
    (out / "predictions.csv").write_text(preds)
    class_acc = float(np.mean(res.classes == y_class)) if len(x) else float("nan")
    print(f"evaluated {len(x)} {v['split']} images; sign classification accuracy {class_acc:.4f}")
    print((out / "report.txt").read_text(), end="")
    return [*paths, out / "joint_confusion.csv", out / "predictions.csv"]


def _read_detections(directory) -> list[DetectionResult]:
    path = Path(directory) / "report.jsonl"
    if not path.is_file():
        raise CliError(f"no evaluation report at {path}")
    out = []
    for line in path.read_text().splitlines():
        rec = json.loads(line)
        if rec.get("record") == "row" and rec["section"] == "detection":
            cm = np.array([[rec["tn"], rec["fp"]], [rec["fn"], rec["tp"]]], dtype=np.int64)
            out.append(DetectionResult(rec["model"], rec["sign_class"], cm))
    return out


def cmd_report(v: dict, out: Path) -> list[Path]:
    detections = _read_detections(v["evaluation"]) if v["evaluation"] else []
    paths = emit_report(Report(detections, param_rows(v["classifier_width"], v["classifier_classes"])), out)
    print(paths["txt"].read_text(), end="")
    return list(paths.values())


HANDLERS = {
    "dataset-synth": cmd_dataset_synth, "dataset-ingest": cmd_dataset_ingest, "dataset-balance": cmd_dataset_balance,
    "dataset-split": cmd_dataset_split, "train-gan": cmd_train_gan, "attack": cmd_attack,
    "train-detector": cmd_train_detector, "train-classifier": cmd_train_classifier, "evaluate": cmd_evaluate,
    "report": cmd_report,
}

def main(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    command = args.section
    try:
        values = resolve(args)
        out = Path(values["out"])
        with RunDir(out):
            (out / "config.json").write_text(_snapshot(command, values))
            opts = {_key(k): val for k, val in values.items()}
            artifacts = HANDLERS[command](opts, out)
        missing = [str(p) for p in artifacts if not Path(p).exists()]
        if missing:
            print(f"qdeepfake: error: artifacts not produced: {', '.join(missing)}", file=sys.stderr)
            return 1
        return 0
    except (CliError, ValueError, KeyError, OSError, FloatingPointError, CheckpointError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"qdeepfake: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
