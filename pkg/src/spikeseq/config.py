"""Run configuration: ``key = value`` lines with dotted section prefixes.

Resolution order is defaults, then the config file, then command-line
overrides. The resolved mapping is what gets written to ``run_manifest.txt``,
and that file is itself a valid config.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .encode import DEFAULT_ALPHABET, Alphabet
from .seqio import SplitPlan
from .snn import LifConfig
from .train import TrainConfig


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.replace(" ", "").split(",") if v)


def _opt_int(text: str):
    return None if text.strip() in ("", "none", "auto") else int(text)


def _opt_str(text: str):
    return None if text.strip() in ("", "none") else text.strip()


# key -> (parser, default)
SCHEMA = {
    "seed": (int, 0),
    "output_dir": (str, "out"),
    "data.source": (_opt_str, None),
    "data.fasta": (_opt_str, None),
    "data.labels": (_opt_str, None),
    "data.synthetic.n_classes": (int, 5),
    "data.synthetic.per_class": (_int_list, (100,)),
    "data.synthetic.length": (int, 200),
    "data.synthetic.mutation_rate": (float, 0.02),
    "encode.alphabet": (str, DEFAULT_ALPHABET.symbols),
    "encode.l_max": (_opt_int, None),
    "snn.decay_multiplier": (float, 0.9),
    "snn.threshold": (float, 1.0),
    "snn.time_steps": (int, 10),
    "snn.surrogate_width": (float, 1.0),
    "snn.reset": (str, "subtract"),
    "snn.readout": (str, "rate"),
    "snn.hidden": (int, 128),
    "train.epochs": (int, 100),
    "train.learning_rate": (float, 0.001),
    "train.batch_size": (int, 32),
    "train.beta1": (float, 0.9),
    "train.beta2": (float, 0.999),
    "train.eps": (float, 1e-8),
    "split.train_fraction": (float, 0.7),
    "split.repeats": (int, 5),
    "transform.kind": (str, "rp"),
    "transform.m": (int, 1),
    "transform.tau": (int, 1),
    "transform.a": (float, -1.0),
    "transform.b": (float, 1.0),
    "transform.q": (int, 8),
    "transform.slice_true_length": (_bool, False),
    "transform.image": (_bool, False),
    "eval.checkpoint": (_opt_str, None),
    "report.figures": (_bool, True),
}

SYNTHETIC_KEYS = tuple(k for k in SCHEMA if k.startswith("data.synthetic."))
PATH_KEYS = ("data.fasta", "data.labels", "eval.checkpoint")


def parse_lines(text: str, origin: str = "<config>") -> dict[str, str]:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{origin}:{lineno}: expected 'key = value', got {line!r}")
        raw[key.strip()] = value.strip()
    return raw


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class RunConfig:
    values: dict

    @classmethod
    def resolve(cls, raw: dict[str, str] | None = None, require_source: bool = True,
                check_paths: bool = True) -> "RunConfig":
        raw = dict(raw or {})
        unknown = sorted(set(raw) - set(SCHEMA))
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        values = {}
        for key, (parse, default) in SCHEMA.items():
            if key in raw:
                try:
                    values[key] = parse(raw[key])
                except ValueError as exc:
                    raise ConfigError(f"bad value for {key}: {raw[key]!r} ({exc})") from None
            else:
                values[key] = default

        source = values["data.source"]
        has_fasta = values["data.fasta"] is not None
        has_synthetic = any(k in raw for k in SYNTHETIC_KEYS)
        if source is None:
            if has_fasta and has_synthetic:
                raise ConfigError("both data.fasta and data.synthetic.* given; exactly one data source is allowed")
            source = "fasta" if has_fasta else "synthetic" if has_synthetic else None
        if source not in (None, "fasta", "synthetic"):
            raise ConfigError(f"data.source must be 'fasta' or 'synthetic', got {source!r}")
        if source == "fasta" and not has_fasta:
            raise ConfigError("data.source = fasta but data.fasta is not set")
        if source == "synthetic" and has_fasta:
            raise ConfigError("data.source = synthetic but data.fasta is also set")
        if source is None and require_source:
            raise ConfigError("no data source: set data.fasta or data.synthetic.* parameters")
        values["data.source"] = source

        per_class = values["data.synthetic.per_class"]
        n = values["data.synthetic.n_classes"]
        if len(per_class) == 1:
            values["data.synthetic.per_class"] = per_class * n
        elif len(per_class) != n:
            raise ConfigError(f"data.synthetic.per_class has {len(per_class)} entries for {n} classes")

        if check_paths:
            for key in PATH_KEYS:
                if values[key] is not None and not Path(values[key]).exists():
                    raise ConfigError(f"{key}: path does not exist: {values[key]}")

        cfg = cls(values)
        # construct the typed views now so bad values fail at load time
        try:
            cfg.lif(), cfg.train_config(), cfg.split_plan(), cfg.alphabet()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return cfg

    def __getitem__(self, key: str):
        return self.values[key]

    def lif(self) -> LifConfig:
        v = self.values
        return LifConfig(v["snn.decay_multiplier"], v["snn.threshold"], v["snn.time_steps"],
                         v["snn.surrogate_width"], v["snn.reset"], v["snn.readout"])

    def train_config(self) -> TrainConfig:
        v = self.values
        return TrainConfig(v["train.epochs"], v["train.learning_rate"], v["train.batch_size"],
                           v["train.beta1"], v["train.beta2"], v["train.eps"], v["seed"])

    def split_plan(self) -> SplitPlan:
        return SplitPlan(self.values["split.train_fraction"], self.values["split.repeats"], self.values["seed"])

    def alphabet(self) -> Alphabet:
        return Alphabet.parse(self.values["encode.alphabet"])

    def manifest(self) -> str:
        lines = ["# resolved run configuration; usable as --config"]
        lines += [f"{key} = {_format(self.values[key])}" for key in sorted(self.values)]
        return "\n".join(lines) + "\n"


def load(path=None, overrides: dict[str, str] | None = None, require_source: bool = True,
         check_paths: bool = True) -> RunConfig:
    """Resolve a config file plus overrides.

    Relative paths in the file are taken relative to the file's directory,
    those in ``overrides`` relative to the working directory; both are stored
    absolute so a manifest replays from anywhere.
    """
    raw: dict[str, str] = {}
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        raw.update(_absolute_paths(parse_lines(text, str(p)), p.parent))
    raw.update(_absolute_paths(overrides or {}, Path.cwd()))
    return RunConfig.resolve(raw, require_source, check_paths)


def _absolute_paths(raw: dict[str, str], base: Path) -> dict[str, str]:
    out = dict(raw)
    for key in PATH_KEYS:
        value = out.get(key)
        if value and value.strip().lower() != "none" and not Path(value).is_absolute():
            out[key] = str((base / value).resolve())
    return out
