"""Evaluation harness: dataset loaders, synthetic data, cross-validated
comparisons, budget-ratio sweeps and runtime benchmarks.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import platform
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .classifier import FitConfig, accuracy, fit_dp, fit_plain
from .core import (
    AttributeSpec,
    Dataset,
    DatasetSchema,
    as_fraction,
    atomic_write_text,
    dataset_from_columns,
    fold_indices,
    load_csv,
    load_schema,
    validate_dataset,
)
from .exceptions import SmoothNBError, TooFewRows

DP_METHODS = ("dp_smooth", "dp_global", "dp_bunsteinke")
METHODS = ("plain", "majority", *DP_METHODS)
_ALIASES = {"smooth": "dp_smooth", "global": "dp_global", "bunsteinke": "dp_bunsteinke"}
CSV_COLUMNS = ("dataset", "method", "noise", "epsilon", "delta", "ratio", "fold", "repetition",
               "accuracy", "train_seconds")
DATA_DIR_ENV = "SMOOTHNB_DATA_DIR"


def canonical_method(name: str) -> str:
    name = _ALIASES.get(name, name)
    if name not in METHODS:
        raise ValueError(f"unknown method {name!r}; choose from {METHODS}")
    return name


# ---------------------------------------------------------------------------
# datasets


def data_dir() -> Path:
    return Path(os.environ.get(DATA_DIR_ENV, Path.home() / ".smoothnb" / "data"))


class DatasetUnavailable(SmoothNBError):
    """A public dataset file is not present locally."""


def _require(path: Path, url: str) -> Path:
    if not path.is_file():
        raise DatasetUnavailable(f"{path} not found; download it from {url} and place it in {path.parent} "
                                 f"(or point {DATA_DIR_ENV} at its directory)")
    return path


SEEDS_URL = "https://archive.ics.uci.edu/ml/machine-learning-databases/00236/seeds_dataset.txt"
GLASS_URL = "https://archive.ics.uci.edu/ml/machine-learning-databases/glass/glass.data"
MUSHROOM_URL = "https://archive.ics.uci.edu/ml/machine-learning-databases/mushroom/agaricus-lepiota.data"

SEEDS_SCHEMA = DatasetSchema(
    (
        AttributeSpec.numeric("area", 10.0, 22.0),
        AttributeSpec.numeric("perimeter", 12.0, 18.0),
        AttributeSpec.numeric("compactness", 0.80, 0.92),
        AttributeSpec.numeric("kernel_length", 4.5, 7.0),
        AttributeSpec.numeric("kernel_width", 2.5, 4.1),
        AttributeSpec.numeric("asymmetry", 0.0, 9.0),
        AttributeSpec.numeric("groove_length", 4.5, 7.0),
    ),
    "variety",
    ("Kama", "Rosa", "Canadian"),
)

GLASS_SCHEMA = DatasetSchema(
    (
        AttributeSpec.numeric("RI", 1.50, 1.54),
        AttributeSpec.numeric("Na", 10.0, 18.0),
        AttributeSpec.numeric("Mg", 0.0, 4.5),
        AttributeSpec.numeric("Al", 0.0, 4.0),
        AttributeSpec.numeric("Si", 69.0, 76.0),
        AttributeSpec.numeric("K", 0.0, 6.5),
        AttributeSpec.numeric("Ca", 5.0, 17.0),
        AttributeSpec.numeric("Ba", 0.0, 3.5),
        AttributeSpec.numeric("Fe", 0.0, 0.6),
    ),
    "type",
    ("WinF", "WinNF", "Veh", "Con", "Tabl", "Head"),
)
_GLASS_CODES = {"1": "WinF", "2": "WinNF", "3": "Veh", "5": "Con", "6": "Tabl", "7": "Head"}

_MUSHROOM_VALUES = {
    "cap-shape": "bcxfks", "cap-surface": "fgys", "cap-color": "nbcgrpuewy", "bruises": "tf",
    "odor": "alcyfmnps", "gill-attachment": "adfn", "gill-spacing": "cwd", "gill-size": "bn",
    "gill-color": "knbhgropuewy", "stalk-shape": "et", "stalk-root": "bcuezr",
    "stalk-surface-above-ring": "fyks", "stalk-surface-below-ring": "fyks",
    "stalk-color-above-ring": "nbcgopewy", "stalk-color-below-ring": "nbcgopewy", "veil-type": "pu",
    "veil-color": "nowy", "ring-number": "not", "ring-type": "ceflnpsz", "spore-print-color": "knbhrouwy",
    "population": "acnsvy", "habitat": "glmpuwd",
}
MUSHROOM_SCHEMA = DatasetSchema(
    tuple(AttributeSpec.categorical(k, list(v)) for k, v in _MUSHROOM_VALUES.items()),
    "edibility",
    ("e", "p"),
)


def load_seeds(directory=None) -> Dataset:
    path = _require(Path(directory or data_dir()) / "seeds_dataset.txt", SEEDS_URL)
    rows = []
    for line in path.read_text().splitlines():
        parts = line.split()
        if len(parts) == 8:
            rows.append(parts[:7] + [SEEDS_SCHEMA.class_labels[int(parts[7]) - 1]])
    return validate_dataset(rows, SEEDS_SCHEMA)


def load_glass(directory=None) -> Dataset:
    """UCI Glass from ``glass.data``; falls back to the identical ``fgl`` table
    shipped with the ``rdatasets`` package when the file is absent."""
    path = Path(directory or data_dir()) / "glass.data"
    if path.is_file():
        rows = [line.split(",")[1:10] + [_GLASS_CODES[line.split(",")[10].strip()]]
                for line in path.read_text().splitlines() if line.strip()]
        return validate_dataset(rows, GLASS_SCHEMA)
    try:
        import rdatasets
    except ImportError:
        _require(path, GLASS_URL)
    df = rdatasets.data("MASS", "fgl")
    names = [a.name for a in GLASS_SCHEMA.attributes]
    # fgl stores the refractive index as (RI - 1.518) * 1000
    df = df.assign(RI=df["RI"] / 1000.0 + 1.518)
    rows = [[*r[:-1], str(r[-1])] for r in df[names + ["type"]].itertuples(index=False)]
    return validate_dataset(rows, GLASS_SCHEMA)


def load_mushroom(directory=None) -> Dataset:
    """UCI Mushroom; rows with an unknown value (``?``) are dropped."""
    path = _require(Path(directory or data_dir()) / "agaricus-lepiota.data", MUSHROOM_URL)
    rows = []
    for line in path.read_text().splitlines():
        parts = line.strip().split(",")
        if len(parts) == 23 and "?" not in parts:
            rows.append(parts[1:] + [parts[0]])
    return validate_dataset(rows, MUSHROOM_SCHEMA)


FIXTURES = {"fixture-mixed": "fixture_mixed", "fixture-categorical": "fixture_categorical"}


def fixture_paths(name: str) -> tuple[Path, Path]:
    base = resources.files("smoothnb") / "data"
    stem = FIXTURES[name]
    return Path(str(base / f"{stem}.csv")), Path(str(base / f"{stem}.schema.json"))


def load_fixture(name: str) -> Dataset:
    data, schema = fixture_paths(name)
    return load_csv(data, load_schema(schema))


def load_named(name: str, directory=None) -> Dataset:
    if name in FIXTURES:
        return load_fixture(name)
    loaders = {"seeds": load_seeds, "glass": load_glass, "mushroom": load_mushroom}
    if name not in loaders:
        raise ValueError(f"unknown dataset {name!r}; known: {sorted([*loaders, *FIXTURES])}")
    return loaders[name](directory)


# ---------------------------------------------------------------------------
# synthetic data


@dataclass(frozen=True)
class SyntheticSpec:
    rows: int = 10000
    categorical: int = 5
    numeric: int = 5
    correlated: str = "numeric"
    seed: int = 0
    levels: int = 4

    def __post_init__(self):
        if self.rows < 1:
            raise TooFewRows(f"a synthetic dataset needs at least one row, got {self.rows}")
        if self.categorical < 0 or self.numeric < 0 or self.categorical + self.numeric == 0:
            raise ValueError("need a nonnegative number of each kind and at least one attribute")
        if self.correlated not in ("numeric", "categorical"):
            raise ValueError(f"correlated must be 'numeric' or 'categorical', got {self.correlated!r}")
        if self.levels < 2:
            raise ValueError("categorical attributes need at least 2 levels")


def synthetic_schema(spec: SyntheticSpec) -> DatasetSchema:
    values = [f"v{i}" for i in range(spec.levels)]
    attrs = [AttributeSpec.numeric(f"num{i}", 0.0, 100.0) for i in range(spec.numeric)]
    attrs += [AttributeSpec.categorical(f"cat{i}", values) for i in range(spec.categorical)]
    return DatasetSchema(tuple(attrs), "label", ("neg", "pos"))


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """Binary-label data where only one attribute kind carries signal.

    Correlated numeric columns are N(35, 15) for ``neg`` and N(65, 15) for
    ``pos``, clipped to [0, 100]; uncorrelated ones are N(50, 15) for both.
    Correlated categorical columns put 70% of the mass on the first level for
    ``neg`` and on the last for ``pos``; uncorrelated ones are uniform.
    """
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    y = rng.integers(0, 2, spec.rows)
    cols = []
    for _ in range(spec.numeric):
        centre = np.where(y == 1, 65.0, 35.0) if spec.correlated == "numeric" else np.full(spec.rows, 50.0)
        cols.append(np.clip(rng.normal(centre, 15.0), 0.0, 100.0))
    L = spec.levels
    rest = 0.3 / (L - 1)
    skew = np.array([[0.7] + [rest] * (L - 1), [rest] * (L - 1) + [0.7]])
    for _ in range(spec.categorical):
        if spec.correlated == "categorical":
            u = rng.random(spec.rows)
            cdf = np.cumsum(skew, axis=1)[y]
            cdf[:, -1] = 1.0
            cols.append((u[:, None] > cdf).sum(axis=1))
        else:
            cols.append(rng.integers(0, L, spec.rows))
    return dataset_from_columns(synthetic_schema(spec), cols, y)


# ---------------------------------------------------------------------------
# experiment specification and results


@dataclass(frozen=True)
class ExperimentSpec:
    dataset: str | None = None
    schema: str | None = None
    synthetic: SyntheticSpec | None = None
    methods: tuple = ("plain", "majority", "dp_smooth", "dp_global")
    noises: tuple = ("cauchy",)
    epsilons: tuple = (0.5, 1.0, 2.0)
    deltas: tuple = ("1/n",)
    folds: int = 10
    repetitions: int = 5
    seed: int = 0
    ratios: tuple = (2,)
    beta_mode: str = "strict"
    gamma: float = 2.0
    trim: int | None = None
    threads: int = 1
    name: str | None = None

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError(f"folds must be >= 2, got {self.folds}")
        if self.repetitions < 1:
            raise ValueError(f"repetitions must be >= 1, got {self.repetitions}")
        methods = tuple(canonical_method(m) for m in self.methods)
        object.__setattr__(self, "methods", methods)
        if any(m in DP_METHODS for m in methods) and not self.epsilons:
            raise ValueError("DP methods need at least one epsilon")
        for r in self.ratios:
            if as_fraction(r) <= 0:
                raise ValueError(f"budget ratios must be positive, got {r}")
        for noise in self.noises:
            if noise not in ("cauchy", "gaussian"):
                raise ValueError(f"unknown noise {noise!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        d = dict(d)
        if d.get("synthetic") is not None:
            d["synthetic"] = SyntheticSpec(**d["synthetic"])
        for key in ("methods", "noises", "epsilons", "deltas", "ratios"):
            if key in d:
                d[key] = tuple(d[key])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown experiment fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentSpec":
        spec = cls.from_dict(json.loads(Path(path).read_text()))
        base = Path(path).parent
        fix = {}
        for key in ("dataset", "schema"):
            val = getattr(spec, key)
            if val and val not in FIXTURES and val not in ("seeds", "glass", "mushroom") and not Path(val).is_absolute():
                fix[key] = str(base / val)
        return cls.from_dict({**spec.to_dict(), **fix}) if fix else spec

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("methods", "noises", "epsilons", "deltas", "ratios"):
            d[key] = list(d[key])
        d["ratios"] = [str(as_fraction(r)) if not isinstance(r, (int, float)) else r for r in self.ratios]
        return d

    def label(self) -> str:
        if self.name:
            return self.name
        if self.synthetic is not None:
            return f"synthetic-{self.synthetic.correlated}"
        return Path(self.dataset).stem if self.dataset else "dataset"


def resolve_delta(preset, n: int) -> float:
    """``0``, ``"1/n"``, ``"1/n^2"`` or a number."""
    if isinstance(preset, str):
        p = preset.replace(" ", "").replace("**", "^")
        if p == "1/n":
            return 1.0 / n
        if p in ("1/n^2", "1/n2"):
            return 1.0 / (n * n)
        return float(p)
    return float(preset)


@dataclass(frozen=True)
class Setting:
    method: str
    noise: str = "none"
    epsilon: float | None = None
    delta: float = 0.0
    ratio: str = "2"

    @property
    def key(self) -> tuple:
        return (self.method, self.noise, self.epsilon, self.delta, self.ratio)


def settings_for(spec: ExperimentSpec, n: int) -> list[Setting]:
    out = []
    for method in spec.methods:
        if method not in DP_METHODS:
            out.append(Setting(method))
            continue
        for ratio in spec.ratios:
            for eps in spec.epsilons:
                for noise in spec.noises:
                    deltas = [0.0] if noise == "cauchy" else [resolve_delta(d, n) for d in spec.deltas]
                    for delta in deltas:
                        if noise == "gaussian" and delta <= 0:
                            continue
                        out.append(Setting(method, noise, float(eps), delta, str(as_fraction(ratio))))
    return out


@dataclass
class SettingSummary:
    setting: Setting
    mean_accuracy: float
    std: float
    fold_scores: list
    repetition_means: list
    train_seconds: float

    def to_dict(self):
        return {**asdict(self.setting), "mean_accuracy": self.mean_accuracy, "std": self.std,
                "repetition_means": self.repetition_means, "fold_scores": self.fold_scores,
                "train_seconds": self.train_seconds}


@dataclass
class ExperimentResult:
    dataset: str
    spec: dict
    records: list = field(default_factory=list)
    summaries: list = field(default_factory=list)
    environment: dict = field(default_factory=dict)

    def summary(self, method: str, noise: str | None = None, epsilon=None, delta=None, ratio=None):
        """The single summary matching the given filters."""
        hits = [s for s in self.summaries
                if s.setting.method == canonical_method(method)
                and (noise is None or s.setting.noise == noise)
                and (epsilon is None or s.setting.epsilon == float(epsilon))
                and (delta is None or s.setting.delta == float(delta))
                and (ratio is None or s.setting.ratio == str(as_fraction(ratio)))]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} settings match {method, noise, epsilon, delta, ratio}")
        return hits[0]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for rec in self.records:
            w.writerow({k: ("" if rec[k] is None else rec[k]) for k in CSV_COLUMNS})
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"dataset": self.dataset, "spec": self.spec, "environment": self.environment,
                "results": [s.to_dict() for s in self.summaries]}

    def write(self, csv_path, json_path) -> None:
        atomic_write_text(csv_path, self.to_csv())
        atomic_write_text(json_path, json.dumps(self.to_dict(), indent=1))


def _environment() -> dict:
    import numba
    import scipy

    return {"python": platform.python_version(), "platform": platform.platform(),
            "numpy": np.__version__, "scipy": scipy.__version__, "numba": numba.__version__}


def _fit_seed(seed: int, repetition: int, fold: int) -> int:
    # shared by every setting so paired comparisons see the same noise streams
    return int(np.random.SeedSequence(seed, spawn_key=(1, repetition, fold)).generate_state(2, np.uint64)[0] >> 1)


def _fold_seed(seed: int, repetition: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(0, repetition)).generate_state(1)[0])


def _evaluate(setting: Setting, train: Dataset, test: Dataset, spec: ExperimentSpec, fit_seed: int):
    t0 = time.perf_counter()
    if setting.method == "majority":
        winner = int(np.argmax(train.class_counts()))
        elapsed = time.perf_counter() - t0
        return float(np.mean(test.labels == winner)), elapsed
    if setting.method == "plain":
        model = fit_plain(train)
    else:
        cfg = FitConfig(mode=setting.method, noise=setting.noise, epsilon=setting.epsilon,
                        delta=setting.delta, numeric_weight=as_fraction(setting.ratio), trim=spec.trim,
                        gamma=spec.gamma, beta_mode=spec.beta_mode, seed=fit_seed)
        model = fit_dp(train, cfg)
    elapsed = time.perf_counter() - t0
    return accuracy(model, test), elapsed


def run_experiment(spec: ExperimentSpec, dataset: Dataset | None = None) -> ExperimentResult:
    """Repeated k-fold cross-validation of every configured setting.

    Each repetition reshuffles the folds; every fold retrains with fresh noise.
    The result depends only on ``spec`` (and ``dataset``), not on ``threads``.
    """
    if dataset is None:
        dataset = load_experiment_data(spec)
    if spec.folds > dataset.n:
        raise TooFewRows(f"{spec.folds} folds need at least {spec.folds} rows, got {dataset.n}")
    settings = settings_for(spec, dataset.n)
    splits = []
    for rep in range(spec.repetitions):
        folds = fold_indices(dataset.n, spec.folds, _fold_seed(spec.seed, rep))
        for f, test_idx in enumerate(folds):
            train_idx = np.sort(np.concatenate([folds[g] for g in range(spec.folds) if g != f]))
            splits.append((rep, f, dataset.take(train_idx), dataset.take(test_idx)))

    tasks = [(s, sp) for s in settings for sp in splits]

    def work(task):
        setting, (rep, f, train, test) = task
        try:
            return _evaluate(setting, train, test, spec, _fit_seed(spec.seed, rep, f))
        except SmoothNBError as exc:
            raise type(exc)(f"{setting.method} fold {f} repetition {rep}: {exc}") from exc

    if spec.threads > 1:
        with ThreadPoolExecutor(spec.threads) as pool:
            outcomes = list(pool.map(work, tasks))
    else:
        outcomes = [work(t) for t in tasks]

    name = spec.label()
    result = ExperimentResult(name, spec.to_dict(), environment=_environment())
    per_setting: dict = {}
    for (setting, (rep, f, _, _)), (acc, secs) in zip(tasks, outcomes):
        result.records.append({"dataset": name, "method": setting.method, "noise": setting.noise,
                               "epsilon": setting.epsilon, "delta": setting.delta, "ratio": setting.ratio,
                               "fold": f, "repetition": rep, "accuracy": acc, "train_seconds": secs})
        per_setting.setdefault(setting, []).append((rep, acc, secs))
    for setting in settings:
        rows = per_setting[setting]
        scores = [a for _, a, _ in rows]
        rep_means = [float(np.mean([a for r, a, _ in rows if r == rep])) for rep in range(spec.repetitions)]
        result.summaries.append(SettingSummary(
            setting, float(np.mean(scores)), float(np.std(rep_means)), scores, rep_means,
            float(sum(s for _, _, s in rows))))
    return result


def load_experiment_data(spec: ExperimentSpec) -> Dataset:
    if spec.synthetic is not None:
        return generate_synthetic(spec.synthetic)
    if spec.dataset is None:
        raise ValueError("experiment spec names neither a dataset nor a synthetic generator")
    if spec.schema is None:
        return load_named(spec.dataset)
    return load_csv(spec.dataset, load_schema(spec.schema))


def budget_sweep(dataset: Dataset, ratios, epsilons, *, repetitions: int = 5, folds: int = 10,
                 seed: int = 0, threads: int = 1, name: str = "sweep", **options) -> ExperimentResult:
    """dp_smooth under each numeric:categorical budget weight."""
    spec = ExperimentSpec(name=name, methods=("dp_smooth",), epsilons=tuple(epsilons), ratios=tuple(ratios),
                          repetitions=repetitions, folds=folds, seed=seed, threads=threads, **options)
    return run_experiment(spec, dataset)


# ---------------------------------------------------------------------------
# runtime


@dataclass(frozen=True)
class RuntimePoint:
    n: int
    global_seconds: float
    smooth_seconds: float


BENCH_TEMPLATE = SyntheticSpec(rows=1, categorical=1, numeric=2, correlated="numeric", seed=7)


def benchmark_runtime(sizes, template: SyntheticSpec = BENCH_TEMPLATE, epsilon: float = 1.0,
                      repeats: int = 3) -> list[RuntimePoint]:
    """Median-of-``repeats`` training wall time for dp_global and dp_smooth."""
    sizes = list(sizes)
    if sizes != sorted(sizes):
        raise ValueError("sizes must be ascending")
    warm = generate_synthetic(SyntheticSpec(**{**asdict(template), "rows": 64}))
    for mode in ("dp_global", "dp_smooth"):
        fit_dp(warm, FitConfig(mode=mode, epsilon=epsilon, seed=0))
    out = []
    for n in sizes:
        data = generate_synthetic(SyntheticSpec(**{**asdict(template), "rows": n}))
        times = {}
        for mode in ("dp_global", "dp_smooth"):
            runs = []
            for r in range(repeats):
                t0 = time.perf_counter()
                fit_dp(data, FitConfig(mode=mode, epsilon=epsilon, seed=r))
                runs.append(time.perf_counter() - t0)
            times[mode] = statistics.median(runs)
        out.append(RuntimePoint(n, times["dp_global"], times["dp_smooth"]))
    return out


def runtime_csv(points) -> str:
    lines = ["n,global_seconds,smooth_seconds"]
    lines += [f"{p.n},{p.global_seconds!r},{p.smooth_seconds!r}" for p in points]
    return "\n".join(lines) + "\n"


def loglog_slopes(points) -> list[tuple[float, float]]:
    """(global, smooth) log-log slopes between consecutive sizes."""
    out = []
    for a, b in zip(points, points[1:]):
        r = math.log(b.n / a.n)
        out.append((math.log(b.global_seconds / a.global_seconds) / r,
                    math.log(b.smooth_seconds / a.smooth_seconds) / r))
    return out

