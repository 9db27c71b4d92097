"""Command-line runner.

    spikeseq datagen|encode|transform|train|eval|crossval [--config FILE] [--set key=value ...]

Every command writes ``run_manifest.txt`` (the fully resolved config) into
the output directory. Metric summaries also go to stdout as tab-separated
``name<TAB>value`` lines.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import config as config_mod
from .encode import EncodingError, max_length, one_hot_encode, signal_encode
from .metrics import MetricsReport
from .seqio import Dataset, SequenceFormatError, generate_synthetic, parse_fasta, read_label_csv, \
    write_fasta, write_label_csv
from .snn import load_checkpoint, save_checkpoint
from .train import TrainingError, evaluate_model, evaluate_repeated, run_repeat
from .transforms import KINDS, apply, markov_transition_field, matrix_to_csv

log = logging.getLogger("spikeseq")

COMMANDS = ("datagen", "encode", "transform", "train", "eval", "crossval")
MANIFEST = "run_manifest.txt"


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="spikeseq", description="Spiking neural network protein sequence classifier.")
    p.add_argument("--version", action="version", version=f"spikeseq {__version__}")
    p.add_argument("command", choices=COMMANDS, metavar="command", help=" | ".join(COMMANDS))
    p.add_argument("--config", help="key = value config file (a run_manifest.txt works too)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    p.add_argument("--out", help="output directory (output_dir)")
    p.add_argument("--seed", help="base seed (seed)")
    p.add_argument("--fasta", help="input FASTA (data.fasta)")
    p.add_argument("--labels", help="id,label CSV (data.labels)")
    p.add_argument("--kind", help="transform kind: rp | gaf | mtf (transform.kind)")
    p.add_argument("--image", action="store_true", help="also write grayscale PNGs of transform matrices")
    p.add_argument("--checkpoint", help="model checkpoint for eval (eval.checkpoint)")
    p.add_argument("--parallel", type=int, nargs="?", const=4, default=1, metavar="N",
                   help="crossval: run repeats on N worker threads")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _overrides(args) -> dict[str, str]:
    out = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise CliError(f"--set expects KEY=VALUE, got {item!r}")
        out[key.strip()] = value.strip()
    for flag, key in (("out", "output_dir"), ("seed", "seed"), ("fasta", "data.fasta"),
                      ("labels", "data.labels"), ("kind", "transform.kind"), ("checkpoint", "eval.checkpoint")):
        value = getattr(args, flag)
        if value is not None:
            out[key] = value
    if args.image:
        out["transform.image"] = "true"
    return out


def load_dataset(cfg: config_mod.RunConfig) -> Dataset:
    if cfg["data.source"] == "fasta":
        labels = None
        if cfg["data.labels"]:
            labels = read_label_csv(Path(cfg["data.labels"]).read_text(encoding="utf-8"))
        return parse_fasta(Path(cfg["data.fasta"]).read_text(encoding="utf-8"), labels)
    return generate_synthetic(cfg["data.synthetic.n_classes"], cfg["data.synthetic.per_class"],
                              cfg["data.synthetic.length"], cfg["data.synthetic.mutation_rate"], cfg["seed"])


def _print_metrics(report: MetricsReport, stream=None) -> None:
    stream = stream or sys.stdout
    for name, value in report.values().items():
        stream.write(f"{name}\t{value:.6f}\n")


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")
    log.info("wrote %s", path)


def cmd_datagen(cfg, out: Path, args) -> None:
    ds = load_dataset(cfg)
    _write(out / "data.fasta", write_fasta(ds))
    _write(out / "labels.csv", write_label_csv(ds))
    sys.stdout.write(f"records\t{len(ds)}\nclasses\t{len(ds.classes)}\n")


def _l_max(cfg, ds: Dataset) -> int:
    return cfg["encode.l_max"] if cfg["encode.l_max"] is not None else max_length(r.residues for r in ds.records)


def cmd_encode(cfg, out: Path, args) -> None:
    ds = load_dataset(cfg)
    alphabet = cfg.alphabet()
    l_max = _l_max(cfg, ds)
    ohe = np.stack([one_hot_encode(r.residues, alphabet, l_max).matrix for r in ds.records])
    np.save(out / "ohe.npy", ohe)
    lines = ["id,label,true_length," + ",".join(f"v{i}" for i in range(l_max))]
    for r in ds.records:
        sig = signal_encode(r.residues, alphabet, l_max)
        lines.append(f"{r.id},{r.label},{sig.true_length}," + ",".join(str(int(v)) for v in sig.values))
    _write(out / "signals.csv", "\n".join(lines) + "\n")
    _write(out / "encoding.txt", f"alphabet = {alphabet.symbols}\nl_max = {l_max}\n"
                                 f"ohe_shape = {','.join(str(d) for d in ohe.shape)}\n")
    sys.stdout.write(f"records\t{len(ds)}\nl_max\t{l_max}\nalphabet_size\t{len(alphabet)}\n")


def cmd_transform(cfg, out: Path, args) -> None:
    kind = cfg["transform.kind"]
    if kind not in KINDS:
        raise CliError(f"unknown transform kind {kind!r}; expected one of {', '.join(KINDS)}")
    ds = load_dataset(cfg)
    alphabet = cfg.alphabet()
    l_max = _l_max(cfg, ds)
    target = out / "transforms" / kind
    target.mkdir(parents=True, exist_ok=True)
    params = dict(m=cfg["transform.m"], tau=cfg["transform.tau"], a=cfg["transform.a"], b=cfg["transform.b"],
                  q=cfg["transform.q"], slice_true_length=cfg["transform.slice_true_length"])
    for r in ds.records:
        sig = signal_encode(r.residues, alphabet, l_max)
        if kind == "mtf":
            trans, mat = markov_transition_field(sig, params["q"], params["slice_true_length"])
            (target / f"{r.id}.transition.csv").write_text(matrix_to_csv(trans.entries))
        else:
            mat = apply(kind, sig, **params)
        (target / f"{r.id}.csv").write_text(matrix_to_csv(mat.entries))
        if cfg["transform.image"]:
            from .plotting import save_matrix_image
            save_matrix_image(mat.entries, target / f"{r.id}.png")
    sys.stdout.write(f"records\t{len(ds)}\nkind\t{kind}\n")


def cmd_train(cfg, out: Path, args) -> None:
    ds = load_dataset(cfg)
    # same split, seeds and L_max as crossval repeat 0
    result = run_repeat(ds, cfg.split_plan(), cfg.train_config(), 0, cfg.lif(), cfg["snn.hidden"],
                        cfg.alphabet(), _l_max(cfg, ds))
    model, history, report, cm = result.model, result.history, result.report, result.confusion
    save_checkpoint(model, out / "model.ckpt")
    _write(out / "history.csv", history.to_csv())
    _write(out / "metrics.json", report.to_json())
    _write(out / "confusion.csv", cm.to_csv(ds.classes))
    if cfg["report.figures"]:
        from .plotting import plot_confusion, plot_loss_curve
        plot_loss_curve(history.losses, out / "loss_curve.png")
        plot_confusion(cm.counts, ds.classes, out / "confusion.png")
    _print_metrics(report)


def cmd_eval(cfg, out: Path, args) -> None:
    if not cfg["eval.checkpoint"]:
        raise CliError("eval needs a checkpoint: --checkpoint PATH or eval.checkpoint = PATH")
    model = load_checkpoint(cfg["eval.checkpoint"])
    ds = load_dataset(cfg)
    report, cm = evaluate_model(model, ds)
    classes = model.meta.get("classes", list(ds.classes))
    _write(out / "metrics.json", report.to_json())
    _write(out / "confusion.csv", cm.to_csv(classes))
    if cfg["report.figures"]:
        from .plotting import plot_confusion
        plot_confusion(cm.counts, classes, out / "confusion.png")
    _print_metrics(report)


def cmd_crossval(cfg, out: Path, args) -> None:
    ds = load_dataset(cfg)
    plan = cfg.split_plan()
    mean, results = evaluate_repeated(ds, plan, cfg.train_config(), cfg.lif(), cfg["snn.hidden"],
                                      cfg.alphabet(), _l_max(cfg, ds), workers=args.parallel)
    for r in results:
        _write(out / f"metrics_repeat_{r.repeat_index}.json", r.report.to_json())
        _write(out / f"history_repeat_{r.repeat_index}.csv", r.history.to_csv())
    _write(out / "metrics_mean.json", mean.to_json())
    if cfg["report.figures"]:
        from .plotting import plot_repeat_metrics
        plot_repeat_metrics([r.report for r in results], out / "crossval.png")
    sys.stdout.write("repeat\t" + "\t".join(mean.values().keys()) + "\n")
    for r in results:
        sys.stdout.write(f"{r.repeat_index}\t" + "\t".join(f"{v:.6f}" for v in r.report.values().values()) + "\n")
    sys.stdout.write("mean\t" + "\t".join(f"{v:.6f}" for v in mean.values().values()) + "\n")


HANDLERS = {
    "datagen": cmd_datagen,
    "encode": cmd_encode,
    "transform": cmd_transform,
    "train": cmd_train,
    "eval": cmd_eval,
    "crossval": cmd_crossval,
}


def run_command(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
        cfg = config_mod.load(args.config, _overrides(args), require_source=False)
        if cfg["data.source"] is None:
            if args.command != "datagen":
                raise config_mod.ConfigError("no data source: set data.fasta or data.synthetic.* parameters")
            cfg.values["data.source"] = "synthetic"
        out = Path(cfg["output_dir"])
        out.mkdir(parents=True, exist_ok=True)
        _write(out / MANIFEST, cfg.manifest())
        HANDLERS[args.command](cfg, out, args)
    except (CliError, config_mod.ConfigError, SequenceFormatError, EncodingError, TrainingError,
            ValueError, OSError) as exc:
        sys.stderr.write(f"spikeseq: error: {exc}\n")
        return 2 if isinstance(exc, (CliError, config_mod.ConfigError)) else 1
    return 0


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
