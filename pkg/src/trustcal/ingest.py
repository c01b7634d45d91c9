"""Dataset manifests, the canonical CSV format, and synthetic verification environments.

Canonical file layout (comma separated, header row, period decimal point)::

    trial_id,x_1,...,x_j,o_1,...,o_m,o_team,truth

Files from other sources are read through a manifest that maps their column
names onto these roles. Manifests are TOML documents::

    name = "speed_dating_high"
    encoding = "onehot"      # optional; onehot for binary arms, raw otherwise
    normalize = true         # optional; min-max scale features per column

    [arms]
    values = [0, 1]          # or: start = 0, stop = 100, step = 10

    [reward]
    kind = "unit"            # unit | signed | abs100

    [columns]
    id = "trial_id"          # optional; row order is used when absent
    features = ["x_1", "x_2"]
    opinions = ["o_1", "o_2"]
    team = "o_team"
    truth = "truth"
"""

from __future__ import annotations

import csv
import enum
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from trustcal.domain import (
    ArmSet,
    DatasetInfo,
    OpinionEncoding,
    RewardKind,
    RewardSpec,
    TrialRecord,
    default_encoding,
)
from trustcal.exceptions import RowValidationError, SchemaError
from trustcal.rng import SplitMix64

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    arms: ArmSet
    reward: RewardSpec
    feature_columns: tuple[str, ...]
    opinion_columns: tuple[str, ...]
    team_column: str
    truth_column: str
    id_column: str | None = None
    encoding: OpinionEncoding | None = None
    normalize: bool = True
    delimiter: str = ","
    agent_names: tuple[str, ...] = ()

    def __post_init__(self):
        if self.encoding is None:
            object.__setattr__(self, "encoding", default_encoding(self.arms))
        columns = self.columns
        dupes = sorted({c for c in columns if columns.count(c) > 1})
        if dupes:
            raise SchemaError(f"manifest {self.name!r}: columns used for more than one role: {dupes}")
        if not self.opinion_columns:
            raise SchemaError(f"manifest {self.name!r}: at least one agent opinion column is required")
        if self.reward.kind is RewardKind.ABS100 and (min(self.arms.arms) < 0 or max(self.arms.arms) > 100):
            raise SchemaError(f"manifest {self.name!r}: abs100 rewards need arms within [0, 100]")

    @property
    def columns(self) -> list[str]:
        cols = [*self.feature_columns, *self.opinion_columns, self.team_column, self.truth_column]
        return ([self.id_column] if self.id_column else []) + cols

    @property
    def n_features(self) -> int:
        return len(self.feature_columns)

    @property
    def n_agents(self) -> int:
        return len(self.opinion_columns)

    def info(self) -> DatasetInfo:
        return DatasetInfo(self.arms, self.reward, self.encoding, self.n_features, self.n_agents,
                           self.name, self.agent_names)

    @classmethod
    def canonical(cls, name: str, arms: ArmSet, reward: RewardSpec, n_features: int, n_agents: int,
                  encoding: OpinionEncoding | None = None, normalize: bool = False) -> DatasetManifest:
        """Manifest for a file written by :func:`save`."""
        return cls(name, arms, reward,
                   tuple(f"x_{i + 1}" for i in range(n_features)),
                   tuple(f"o_{i + 1}" for i in range(n_agents)),
                   "o_team", "truth", "trial_id", encoding, normalize)

    @classmethod
    def from_dict(cls, doc: dict, source: str = "<manifest>") -> DatasetManifest:
        try:
            arms_doc = doc["arms"]
            if "values" in arms_doc:
                arms = ArmSet(tuple(arms_doc["values"]))
            else:
                arms = ArmSet.from_range(arms_doc["start"], arms_doc["stop"], arms_doc["step"])
            cols = doc["columns"]
            encoding = OpinionEncoding.parse(doc["encoding"]) if "encoding" in doc else None
            return cls(
                name=str(doc.get("name", Path(source).stem)),
                arms=arms,
                reward=RewardSpec.parse(doc["reward"]["kind"]),
                feature_columns=tuple(cols["features"]),
                opinion_columns=tuple(cols["opinions"]),
                team_column=cols["team"],
                truth_column=cols["truth"],
                id_column=cols.get("id"),
                encoding=encoding,
                normalize=bool(doc.get("normalize", True)),
                delimiter=str(doc.get("delimiter", ",")),
                agent_names=tuple(doc.get("agents", {}).get("names", ())),
            )
        except KeyError as exc:
            raise SchemaError(f"{source}: missing manifest key {exc.args[0]!r}") from None
        except ValueError as exc:
            raise SchemaError(f"{source}: {exc}") from None

    @classmethod
    def read(cls, path) -> DatasetManifest:
        path = Path(path)
        with open(path, "rb") as fh:
            try:
                doc = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise SchemaError(f"{path}: {exc}") from None
        return cls.from_dict(doc, str(path))

    def to_toml(self) -> str:
        def q(s):
            return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'

        def qlist(items):
            return "[" + ", ".join(q(s) for s in items) + "]"

        lines = [
            f"name = {q(self.name)}",
            f"encoding = {q(self.encoding.value)}",
            f"normalize = {'true' if self.normalize else 'false'}",
            "",
            "[arms]",
            f"values = [{', '.join(str(a) for a in self.arms)}]",
            "",
            "[reward]",
            f"kind = {q(self.reward.kind.value)}",
            "",
            "[columns]",
        ]
        if self.id_column:
            lines.append(f"id = {q(self.id_column)}")
        lines += [
            f"features = {qlist(self.feature_columns)}",
            f"opinions = {qlist(self.opinion_columns)}",
            f"team = {q(self.team_column)}",
            f"truth = {q(self.truth_column)}",
        ]
        if self.agent_names:
            lines += ["", "[agents]", f"names = {qlist(self.agent_names)}"]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Dataset(Sequence):
    """Validated records plus the description the replay harness needs.

    ``feature_min``/``feature_max`` are the raw per-column extremes used for
    min-max scaling (empty when the manifest disables normalization).
    """

    info: DatasetInfo
    records: tuple[TrialRecord, ...]
    feature_min: tuple[float, ...] = field(default=())
    feature_max: tuple[float, ...] = field(default=())

    def __len__(self):
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def __iter__(self) -> Iterator[TrialRecord]:
        return iter(self.records)


def _parse_int(text: str, column: str, row: int) -> int:
    try:
        value = float(text)
    except ValueError:
        raise RowValidationError(row, f"column {column!r}: {text!r} is not a number") from None
    if not value.is_integer():
        raise RowValidationError(row, f"column {column!r}: {text!r} is not an integer arm value")
    return int(value)


def normalize_features(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Min-max scale each column to [0, 1]; constant columns map to 0."""
    if matrix.size == 0:
        return matrix.copy(), np.empty(matrix.shape[1:]), np.empty(matrix.shape[1:])
    lo = matrix.min(axis=0)
    hi = matrix.max(axis=0)
    span = hi - lo
    scaled = np.zeros_like(matrix)
    nz = span > 0
    scaled[:, nz] = (matrix[:, nz] - lo[nz]) / span[nz]
    return scaled, lo, hi


def load(path, manifest: DatasetManifest) -> Dataset:
    """Read and validate a delimited file through ``manifest``.

    Raises :class:`SchemaError` for missing columns and
    :class:`RowValidationError` (carrying the 1-based row index) for empty
    cells, non-numeric values or opinions outside the arm set.
    """
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"{path}: no such file")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=manifest.delimiter)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: file is empty") from None
        missing = [c for c in manifest.columns if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {', '.join(repr(c) for c in missing)}")
        pos = {c: header.index(c) for c in manifest.columns}
        opinion_cols = [*manifest.opinion_columns, manifest.team_column, manifest.truth_column]

        features, opinions, ids = [], [], []
        for row_no, row in enumerate(reader, start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < len(header):
                raise RowValidationError(row_no, f"expected {len(header)} fields, got {len(row)}")
            cells = {c: row[pos[c]].strip() for c in manifest.columns}
            empty = [c for c, v in cells.items() if v == ""]
            if empty:
                raise RowValidationError(row_no, f"missing value in column(s) {empty}")
            feat = []
            for c in manifest.feature_columns:
                try:
                    value = float(cells[c])
                except ValueError:
                    raise RowValidationError(row_no, f"column {c!r}: {cells[c]!r} is not a number") from None
                if not math.isfinite(value):
                    raise RowValidationError(row_no, f"column {c!r}: non-finite value {cells[c]!r}")
                feat.append(value)
            ops = []
            for c in opinion_cols:
                value = _parse_int(cells[c], c, row_no)
                if value not in manifest.arms:
                    raise RowValidationError(
                        row_no, f"column {c!r}: opinion {value} is not in arm set {manifest.arms.arms}"
                    )
                ops.append(value)
            if manifest.id_column:
                trial_id = _parse_int(cells[manifest.id_column], manifest.id_column, row_no)
                if trial_id < 0:
                    raise RowValidationError(row_no, f"negative trial id {trial_id}")
            else:
                trial_id = row_no - 1
            features.append(feat)
            opinions.append(ops)
            ids.append(trial_id)

    matrix = np.array(features, dtype=float).reshape(len(features), manifest.n_features)
    lo = hi = ()
    if manifest.normalize:
        matrix, lo_arr, hi_arr = normalize_features(matrix)
        lo, hi = tuple(lo_arr.tolist()), tuple(hi_arr.tolist())
    m = manifest.n_agents
    records = tuple(
        TrialRecord(tid, tuple(feat), tuple(ops[:m]), ops[m], ops[m + 1])
        for tid, feat, ops in zip(ids, matrix.tolist(), opinions)
    )
    return Dataset(manifest.info(), records, lo, hi)


def save(records: Sequence[TrialRecord], path) -> None:
    """Write records in the canonical layout (floats written with ``repr`` so they round-trip)."""
    records = list(records)
    j = len(records[0].features) if records else 0
    m = len(records[0].agent_opinions) if records else 0
    header = (["trial_id"] + [f"x_{i + 1}" for i in range(j)]
              + [f"o_{i + 1}" for i in range(m)] + ["o_team", "truth"])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for r in records:
            writer.writerow([r.trial_id, *(repr(v) for v in r.features), *r.agent_opinions,
                             r.team_opinion, r.truth_arm])


# --- synthetic environments -------------------------------------------------


class SyntheticKind(enum.Enum):
    LINEAR = "linear"
    COMPLEMENTARY = "complementary"


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of a synthetic dataset; generation is a pure function of these.

    LINEAR
        Hidden payoff vector per arm with non-negative weights summing to 1,
        so noiseless payoffs lie in [0, 1]. The truth arm is the argmax of
        the payoffs plus Gaussian noise of scale ``sigma``. Each agent (and
        the team) states the truth with its accuracy, otherwise a uniformly
        chosen wrong arm.
    COMPLEMENTARY
        Binary truth drawn fairly. Agent A states the truth when
        ``x_1 > threshold`` and agent B states it otherwise; the team always
        follows agent A. Outside its region an agent states ``off_opinion``
        (``"default"``: arm 0; ``"random"``: a fair coin).
    """

    kind: SyntheticKind
    n: int
    n_features: int = 3
    seed: int = 0
    n_arms: int = 3
    sigma: float = 0.1
    accuracies: tuple[float, ...] = (0.7, 0.6)
    team_accuracy: float = 0.65
    threshold: float = 0.5
    off_opinion: str = "default"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.n_features < 1:
            raise ValueError("n_features must be >= 1")
        if self.off_opinion not in ("default", "random"):
            raise ValueError(f"off_opinion must be 'default' or 'random', got {self.off_opinion!r}")


def linear_payoffs(n_arms: int, n_features: int, seed: int) -> np.ndarray:
    """Hidden (K, j) payoff matrix with rows on the probability simplex."""
    gen = SplitMix64(seed ^ 0x5EED)
    theta = np.array([[gen.random() + 1e-3 for _ in range(n_features)] for _ in range(n_arms)])
    return theta / theta.sum(axis=1, keepdims=True)


def _noisy_copy(gen: SplitMix64, truth: int, n_arms: int, accuracy: float) -> int:
    if gen.random() < accuracy:
        return truth
    wrong = gen.randbelow(n_arms - 1)
    return wrong if wrong < truth else wrong + 1


def generate(spec: SyntheticSpec) -> Dataset:
    gen = SplitMix64(spec.seed)
    records = []
    if spec.kind is SyntheticKind.LINEAR:
        K = spec.n_arms
        theta = linear_payoffs(K, spec.n_features, spec.seed)
        for t in range(spec.n):
            x = [gen.random() for _ in range(spec.n_features)]
            payoff = theta @ np.array(x)
            if spec.sigma > 0:
                payoff = payoff + spec.sigma * np.array([gen.normal() for _ in range(K)])
            truth = int(np.argmax(payoff))
            ops = tuple(_noisy_copy(gen, truth, K, acc) for acc in spec.accuracies)
            team = _noisy_copy(gen, truth, K, spec.team_accuracy)
            records.append(TrialRecord(t, tuple(x), ops, team, truth))
        arms = ArmSet(tuple(range(K)))
        names: tuple[str, ...] = ()
    else:
        for t in range(spec.n):
            x = [gen.random() for _ in range(spec.n_features)]
            truth = gen.randbelow(2)
            off = 0 if spec.off_opinion == "default" else gen.randbelow(2)
            if x[0] > spec.threshold:
                a, b = truth, off
            else:
                a, b = off, truth
            records.append(TrialRecord(t, tuple(x), (a, b), a, truth))
        arms = ArmSet.binary()
        names = ("agent A", "agent B")
    reward = RewardSpec(RewardKind.UNIT)
    info = DatasetInfo(arms, reward, default_encoding(arms), spec.n_features,
                       len(records[0].agent_opinions), f"synthetic-{spec.kind.value}", names)
    return Dataset(info, tuple(records))


class LinearEnvironment:
    """Bandit environment with linear expected payoffs, for regret measurements.

    Contexts are uniform on [0, 1]^d and the reward of arm ``k`` is
    ``theta[k] @ x`` plus Gaussian noise of scale ``sigma``.
    """

    def __init__(self, dim: int, n_arms: int, sigma: float, seed: int):
        self.dim = dim
        self.n_arms = n_arms
        self.sigma = sigma
        self.theta = linear_payoffs(n_arms, dim, seed)
        self._gen = SplitMix64(seed)

    @property
    def reward_range(self) -> float:
        """Noiseless payoffs lie in [0, 1] because every weight row sums to 1."""
        return 1.0

    def context(self) -> np.ndarray:
        return np.array([self._gen.random() for _ in range(self.dim)])

    def expected(self, x) -> np.ndarray:
        return self.theta @ x

    def reward(self, x, arm: int) -> float:
        return float(self.theta[arm] @ x + self.sigma * self._gen.normal())
