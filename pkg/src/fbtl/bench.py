"""Seeded experiment harness, dataset ingestion and bound tables.

Every synthetic trial is a pure function of ``(config, point, trial)``: the
trial's :class:`numpy.random.SeedSequence` is split into three children
that drive the instance (graph, features, score vector), the pair sample
and the comparison outcomes. Results are written as CSV with 12
significant digits, ordered by ``(point, trial, estimator)``.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    BasisError,
    ConfigError,
    InputError,
    NoInformationError,
    OutOfScopeError,
    OutputError,
    ParseError,
)
from .estimators import ESTIMATORS, run_estimator
from .features import FeatureSet, compute_coefficients, select_basis, synth_features
from .graphs import FAMILIES, RelationGraph, edge_cover_sets, gen_family
from .metrics import default_m_grid, l2_error, pd_error, trial_seed
from .model import ComparisonSample, FbtlModel, sample_comparisons, sample_pairs, sample_pairs_exact
from .parallel import map_ordered
from .recovery import THRESHOLD_FAMILIES, closed_form_threshold, error_probability_bound

__all__ = [
    "EXPERIMENT_TYPES",
    "ESTIMATOR_ALIASES",
    "Instance",
    "SyntheticScenario",
    "ExperimentConfig",
    "ExperimentResult",
    "DatasetBundle",
    "make_instance",
    "sampling_rate",
    "parse_estimators",
    "score_estimate",
    "run_experiment",
    "load_dataset",
    "bundle_from_arrays",
    "export_bundle",
    "emit_bound_table",
    "format_number",
    "write_csv",
]

EXPERIMENT_TYPES = ("type1_vs_n", "type2_vs_p", "type3_vs_alpha", "real_dataset", "sc_sweep")
ESTIMATOR_ALIASES = {
    "fbtl_ls": "fbtl_ls",
    "fbtl-ls": "fbtl_ls",
    "ols": "ols",
    "rank_centrality": "rank_centrality",
    "rank-centrality": "rank_centrality",
    "rc": "rank_centrality",
}
# estimators whose output is only defined up to a common shift
SHIFT_AMBIGUOUS = ("ols", "rank_centrality")

TRIAL_COLUMNS = ["point", "trial", "estimator", "n", "alpha", "p", "K", "m", "l2_error", "pd_error"]
SUMMARY_COLUMNS = [
    "point", "estimator", "n", "alpha", "p", "K", "trials",
    "l2_mean", "l2_se", "pd_mean", "pd_se", "m_mean",
]
SC_TRIAL_COLUMNS = ["point", "m", "trial", "estimator", "n", "alpha", "K", "l2_error"]
SC_SUMMARY_COLUMNS = ["point", "estimator", "n", "alpha", "K", "eps", "sc"]
BOUND_COLUMNS = ["family", "n", "param", "delta", "p_min", "p", "bound"]


def format_number(x) -> str:
    """Render a CSV cell: integers verbatim, floats with 12 significant digits."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        return f"{x:.12g}"
    return str(x)


def write_csv(path, columns: Sequence[str], rows: Sequence[dict]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_number(row.get(c)) for c in columns])
    try:
        Path(path).write_text(buf.getvalue())
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc


def sampling_rate(c: float, alpha: int, n: int) -> float:
    """``min(1, c * alpha * log(alpha) / C(n, 2))``."""
    pairs = math.comb(n, 2)
    if pairs == 0:
        return 0.0
    return min(1.0, c * alpha * math.log(alpha) / pairs) if alpha > 0 else 0.0


def parse_estimators(names) -> tuple[str, ...]:
    if isinstance(names, str):
        names = [t for t in names.split(",") if t.strip()]
    out = []
    for name in names:
        key = name.strip().lower()
        if key not in ESTIMATOR_ALIASES:
            raise ConfigError(f"unknown estimator {name!r}; choose from {sorted(ESTIMATOR_ALIASES)}")
        canon = ESTIMATOR_ALIASES[key]
        if canon not in out:
            out.append(canon)
    if not out:
        raise ConfigError("no estimator selected")
    return tuple(out)


@dataclass(frozen=True, eq=False)
class Instance:
    graph: RelationGraph
    features: FeatureSet
    model: FbtlModel


def make_instance(
    family: str,
    n: int,
    param: int | None,
    seed,
    coeff_mode: str = "gaussian",
    form: str = "exponential",
) -> Instance:
    """Graph, features and unit-norm scores ``theta = U w`` with ``w ~ N(0, I)``."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    feat_seed, w_seed, graph_seed = ss.spawn(3)
    graph = gen_family(family, n, param, seed=int(graph_seed.generate_state(1)[0]))
    features = synth_features(graph, coeff_mode, feat_seed)
    w = np.random.default_rng(w_seed).standard_normal(features.d)
    return Instance(graph, features, FbtlModel.from_features(features, w, form=form))


def score_estimate(name: str, instance: Instance, sample: ComparisonSample) -> tuple[float, float]:
    """``(l2_error, pd_error)`` of one estimator; NaN when the sample is unusable."""
    try:
        report = run_estimator(name, instance.features, sample)
    except (InputError, NoInformationError):
        return math.nan, math.nan
    theta = instance.model.theta
    l2 = l2_error(report.theta_hat, theta, center=name in SHIFT_AMBIGUOUS)
    return l2, pd_error(report.theta_hat, theta)


@dataclass(frozen=True)
class SyntheticScenario:
    """One simulation with exactly ``m`` observed pairs, for :func:`sample_complexity`.

    Calling ``scenario(m, seed)`` draws a fresh instance, ``m`` distinct
    pairs and ``K`` comparisons per pair, and returns the normalized l2
    error of ``estimator``.
    """

    family: str
    n: int
    param: int | None
    K: int = 1000
    estimator: str = "fbtl_ls"
    coeff_mode: str = "gaussian"

    def sample(self, m: int, seed) -> tuple[Instance, ComparisonSample]:
        inst_seed, pair_seed, cmp_seed = seed.spawn(3)
        inst = make_instance(self.family, self.n, self.param, inst_seed, self.coeff_mode)
        pairs = sample_pairs_exact(self.n, m, pair_seed)
        return inst, sample_comparisons(pairs, inst.model, self.K, cmp_seed)

    def __call__(self, m: int, seed) -> float:
        inst, sample = self.sample(m, seed)
        return score_estimate(self.estimator, inst, sample)[0]


def _as_tuple(value, cast) -> tuple:
    if value is None:
        return ()
    if isinstance(value, (list, tuple)):
        return tuple(cast(v) for v in value)
    return (cast(value),)


def _opt_int(v):
    return None if v is None else int(v)


# which schedule axis each experiment type sweeps; the others must be single-valued
_SWEPT = {
    "type1_vs_n": {"n"},
    "type2_vs_p": {"c"},
    "type3_vs_alpha": {"param"},
    "real_dataset": {"c", "K"},
    "sc_sweep": {"n", "param"},
}


@dataclass(frozen=True)
class ExperimentConfig:
    """A complete, archivable description of one experiment.

    ``n``, ``param``, ``c`` and ``K`` are schedules; the schedule points are
    their Cartesian product in that order. The sampling rate of a point is
    ``c * alpha * log(alpha) / C(n, 2)`` (capped at 1), except for
    ``sc_sweep`` which sweeps the exact number of pairs ``m`` over a
    geometric grid instead.
    """

    experiment_type: str
    family: str = "r_disconnected_cliques"
    n: tuple = (100,)
    param: tuple = (10,)
    c: tuple = (10.0,)
    K: tuple = (1000,)
    trials: int = 50
    estimators: tuple = ESTIMATORS
    coeff_mode: str = "gaussian"
    seed: int = 0
    out: str = "results"
    eps: float = 0.5
    m_grid_ratio: float = 1.5
    features: str | None = None
    counts: str | None = None

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("n", _as_tuple(self.n, int))
        set_("param", _as_tuple(self.param, _opt_int) or (None,))
        set_("c", _as_tuple(self.c, float))
        set_("K", _as_tuple(self.K, int))
        set_("estimators", parse_estimators(self.estimators))
        self.validate()

    def validate(self) -> None:
        if self.experiment_type not in EXPERIMENT_TYPES:
            raise ConfigError(f"unknown experiment type {self.experiment_type!r}")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if not self.K or any(k < 1 for k in self.K):
            raise ConfigError("K schedule must be nonempty with K >= 1")
        real = self.experiment_type == "real_dataset"
        axes = {"K": self.K}
        if real:
            if not self.features or not self.counts:
                raise ConfigError("real_dataset needs 'features' and 'counts' paths")
        else:
            if self.family not in FAMILIES:
                raise ConfigError(f"unknown family {self.family!r}")
            if not self.n or any(v < 1 for v in self.n):
                raise ConfigError("n schedule must be nonempty with n >= 1")
            axes.update(n=self.n, param=self.param)
        if self.experiment_type != "sc_sweep":
            if not self.c or any(v <= 0 for v in self.c):
                raise ConfigError("c schedule must be nonempty and positive")
            axes["c"] = self.c
        else:
            if not self.eps > 0:
                raise ConfigError("eps must be positive")
            if not self.m_grid_ratio > 1:
                raise ConfigError("m_grid_ratio must exceed 1")
        swept = _SWEPT[self.experiment_type]
        for name, values in axes.items():
            if name not in swept and len(values) > 1:
                raise ConfigError(f"{self.experiment_type} keeps {name} fixed, got {list(values)}")

    @property
    def points(self) -> list[dict]:
        """Schedule points in row order."""
        if self.experiment_type == "real_dataset":
            return [dict(c=c, K=k) for c, k in itertools.product(self.c, self.K)]
        cs = (None,) if self.experiment_type == "sc_sweep" else self.c
        return [
            dict(n=n, param=r, c=c, K=k)
            for n, r, c, k in itertools.product(self.n, self.param, cs, self.K)
        ]

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path, **overrides) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(data)

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list = field(default_factory=list)
    summary: list = field(default_factory=list)
    paths: dict = field(default_factory=dict)


def _mean_se(values) -> tuple[float, float]:
    vals = [v for v in values if v is not None and not math.isnan(v)]
    if not vals:
        return math.nan, math.nan
    mean = math.fsum(vals) / len(vals)
    if len(vals) < 2:
        return mean, math.nan
    var = math.fsum((v - mean) ** 2 for v in vals) / (len(vals) - 1)
    return mean, math.sqrt(var / len(vals))


def _summarise(rows: list[dict], estimators) -> list[dict]:
    groups: dict = {}
    for row in rows:
        groups.setdefault((row["point"], row["estimator"]), []).append(row)
    out = []
    for (point, est), grp in sorted(groups.items(), key=lambda kv: (kv[0][0], estimators.index(kv[0][1]))):
        l2_mean, l2_se = _mean_se([r["l2_error"] for r in grp])
        pd_mean, pd_se = _mean_se([r["pd_error"] for r in grp])
        first = grp[0]
        out.append(dict(
            point=point, estimator=est, n=first["n"], alpha=first["alpha"], p=first["p"],
            K=first["K"], trials=len(grp), l2_mean=l2_mean, l2_se=l2_se,
            pd_mean=pd_mean, pd_se=pd_se, m_mean=math.fsum(r["m"] for r in grp) / len(grp),
        ))
    return out


def _synthetic_trial(config: ExperimentConfig, point_id: int, point: dict, trial: int) -> list[dict]:
    inst_seed, pair_seed, cmp_seed = trial_seed(config.seed, point_id, trial).spawn(3)
    inst = make_instance(config.family, point["n"], point["param"], inst_seed, config.coeff_mode)
    n, alpha = inst.features.n, inst.features.alpha
    p = sampling_rate(point["c"], alpha, n)
    pairs = sample_pairs(n, p, pair_seed)
    rows = []
    sample = sample_comparisons(pairs, inst.model, point["K"], cmp_seed) if len(pairs) else None
    for est in config.estimators:
        l2, pd = score_estimate(est, inst, sample) if sample is not None else (math.nan, math.nan)
        rows.append(dict(point=point_id, trial=trial, estimator=est, n=n, alpha=alpha, p=p,
                         K=point["K"], m=len(pairs), l2_error=l2, pd_error=pd))
    return rows


def _dataset_trial(config, bundle: "DatasetBundle", point_id: int, point: dict, trial: int) -> list[dict]:
    pair_seed, cmp_seed = trial_seed(config.seed, point_id, trial).spawn(2)
    F = bundle.features
    n, alpha = F.n, F.alpha
    p = sampling_rate(point["c"], alpha, n)
    pairs = sample_pairs(n, p, pair_seed)
    probs = bundle.P_star[pairs[:, 0], pairs[:, 1]]
    keep = ~np.isnan(probs)
    pairs, probs = pairs[keep], probs[keep]
    rows = []
    sample = None
    if len(pairs):
        wins = np.random.default_rng(cmp_seed).binomial(point["K"], probs)
        sample = ComparisonSample.from_counts(pairs, wins, point["K"])
    for est in config.estimators:
        pd = math.nan
        if sample is not None:
            try:
                theta_hat = run_estimator(est, F, sample).theta_hat
                pd = pd_error(theta_hat, bundle.P_star)
            except (InputError, NoInformationError):
                pass
        rows.append(dict(point=point_id, trial=trial, estimator=est, n=n, alpha=alpha, p=p,
                         K=point["K"], m=len(pairs), l2_error=None, pd_error=pd))
    return rows


def _sc_point(config: ExperimentConfig, point_id: int, point: dict, workers) -> tuple[list, list]:
    n, param, K = point["n"], point["param"], point["K"]
    scenario = SyntheticScenario(config.family, n, param, K, config.estimators[0], config.coeff_mode)
    alpha = gen_family(config.family, n, param, seed=0).alpha
    grid = default_m_grid(alpha, n, config.m_grid_ratio)
    active = list(config.estimators)
    reached: dict = {}
    rows = []
    for m in grid:
        if not active:
            break

        def run(t, m=m, active=tuple(active)):
            inst, sample = scenario.sample(m, trial_seed(config.seed, m, t))
            return [score_estimate(est, inst, sample)[0] for est in active]

        errors = map_ordered(run, range(config.trials), workers)
        for t, errs in enumerate(errors):
            for est, e in zip(active, errs):
                rows.append(dict(point=point_id, m=m, trial=t, estimator=est, n=n, alpha=alpha,
                                 K=K, l2_error=e))
        for col, est in enumerate(tuple(active)):
            if float(np.mean([errs[col] for errs in errors])) < config.eps:
                reached[est] = m
                active.remove(est)
    summary = [
        dict(point=point_id, estimator=est, n=n, alpha=alpha, K=K, eps=config.eps, sc=reached.get(est))
        for est in config.estimators
    ]
    order = {est: i for i, est in enumerate(config.estimators)}
    rows.sort(key=lambda r: (r["m"], r["trial"], order[r["estimator"]]))
    return rows, summary


def run_experiment(config: ExperimentConfig, workers: int | None = None, write: bool = True) -> ExperimentResult:
    """Run every schedule point and trial; write ``trials.csv`` and ``summary.csv``.

    Trials of one point run concurrently; rows are collected in
    ``(point, trial, estimator)`` order regardless of completion order.
    For ``sc_sweep`` the trial table has one row per grid value ``m``
    visited and the summary holds ``sc(eps)`` per estimator (empty when
    the grid is exhausted).
    """
    out_dir = Path(config.out)
    if write:
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise OutputError(f"cannot create output directory {out_dir}: {exc}") from exc
    result = ExperimentResult(config)
    points = config.points

    if config.experiment_type == "sc_sweep":
        for pid, point in enumerate(points):
            rows, summary = _sc_point(config, pid, point, workers)
            result.rows += rows
            result.summary += summary
        trial_cols, summary_cols = SC_TRIAL_COLUMNS, SC_SUMMARY_COLUMNS
    else:
        if config.experiment_type == "real_dataset":
            bundle = load_dataset(config.features, config.counts)
            trial_fn = lambda pid, pt, t: _dataset_trial(config, bundle, pid, pt, t)  # noqa: E731
        else:
            trial_fn = lambda pid, pt, t: _synthetic_trial(config, pid, pt, t)  # noqa: E731
        for pid, point in enumerate(points):
            for rows in map_ordered(lambda t: trial_fn(pid, point, t), range(config.trials), workers):
                result.rows += rows
        result.summary = _summarise(result.rows, list(config.estimators))
        trial_cols, summary_cols = TRIAL_COLUMNS, SUMMARY_COLUMNS

    if write:
        result.paths = {"trials": out_dir / "trials.csv", "summary": out_dir / "summary.csv"}
        write_csv(result.paths["trials"], trial_cols, result.rows)
        write_csv(result.paths["summary"], summary_cols, result.summary)
    return result


# ---------------------------------------------------------------------------
# datasets


@dataclass(frozen=True, eq=False)
class DatasetBundle:
    """Item features plus aggregated comparison counts.

    ``P_star[i, j]`` is the empirical fraction of comparisons ``i`` won
    against ``j`` (NaN for pairs never compared, 0.5 on the diagonal).
    ``sample`` holds the same counts as a :class:`ComparisonSample`.
    """

    features_path: Path | None
    counts_path: Path | None
    item_ids: tuple
    features: FeatureSet
    sample: ComparisonSample
    P_star: np.ndarray

    @property
    def n(self) -> int:
        return self.features.n


def _read_rows(path) -> list[tuple[int, list[str]]]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    rows = []
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if row and any(cell.strip() for cell in row):
            rows.append((lineno, [cell.strip() for cell in row]))
    if not rows:
        raise ParseError(f"{path}: file is empty")
    return rows


def _read_features(path) -> tuple[list[int], np.ndarray]:
    rows = _read_rows(path)
    lineno, header = rows[0]
    if len(header) < 2 or header[0] != "item":
        raise ParseError(f"{path}:{lineno}: expected header 'item,f1,...,fd'")
    d = len(header) - 1
    ids, feats = [], []
    seen = set()
    for lineno, row in rows[1:]:
        if len(row) != d + 1:
            raise ParseError(f"{path}:{lineno}: expected {d + 1} fields, got {len(row)}")
        try:
            item = int(row[0])
            vec = [float(v) for v in row[1:]]
        except ValueError:
            raise ParseError(f"{path}:{lineno}: cannot parse {','.join(row)!r}") from None
        if not all(math.isfinite(v) for v in vec):
            raise ParseError(f"{path}:{lineno}: non-finite feature value")
        if item in seen:
            raise ParseError(f"{path}:{lineno}: duplicate item id {item}")
        seen.add(item)
        ids.append(item)
        feats.append(vec)
    if not ids:
        raise ParseError(f"{path}: no items")
    return ids, np.array(feats, dtype=float)


def _read_counts(path, index: dict) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rows = _read_rows(path)
    lineno, header = rows[0]
    if header != ["i", "j", "wins_i", "wins_j"]:
        raise ParseError(f"{path}:{lineno}: expected header 'i,j,wins_i,wins_j'")
    agg: dict = {}
    for lineno, row in rows[1:]:
        if len(row) != 4:
            raise ParseError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
        try:
            a, b, wa, wb = (int(v) for v in row)
        except ValueError:
            raise ParseError(f"{path}:{lineno}: cannot parse {','.join(row)!r}") from None
        for item in (a, b):
            if item not in index:
                raise ParseError(f"{path}:{lineno}: unknown item id {item}")
        if a == b:
            raise ParseError(f"{path}:{lineno}: item {a} compared with itself")
        if wa < 0 or wb < 0:
            raise ParseError(f"{path}:{lineno}: negative win count")
        i, j = index[a], index[b]
        if i > j:
            i, j, wa, wb = j, i, wb, wa
        prev = agg.get((i, j), (0, 0))
        agg[(i, j)] = (prev[0] + wa, prev[1] + wb)
    keys = sorted(k for k, (wa, wb) in agg.items() if wa + wb > 0)
    pairs = np.array(keys, dtype=int).reshape(-1, 2)
    wins = np.array([agg[k][0] for k in keys], dtype=int)
    totals = np.array([sum(agg[k]) for k in keys], dtype=int)
    return pairs, wins, totals


def _assemble(features_path, counts_path, ids, U, pairs, wins, totals, tol) -> DatasetBundle:
    ind = select_basis(U, tol)
    if len(ind) < U.shape[1]:
        raise BasisError(
            f"only {len(ind)} linearly independent items for {U.shape[1]} features"
        )
    F = FeatureSet(U, ind, compute_coefficients(U, ind, tol))
    n = U.shape[0]
    P = np.full((n, n), np.nan)
    np.fill_diagonal(P, 0.5)
    if len(pairs):
        frac = wins / totals
        P[pairs[:, 0], pairs[:, 1]] = frac
        P[pairs[:, 1], pairs[:, 0]] = 1.0 - frac
        sample = ComparisonSample.from_counts(pairs, wins, totals)
    else:
        sample = ComparisonSample(np.zeros((0, 2), dtype=int), np.zeros(0), np.zeros(0, int), np.zeros(0, int))
    fp = None if features_path is None else Path(features_path)
    cp = None if counts_path is None else Path(counts_path)
    return DatasetBundle(fp, cp, tuple(ids), F, sample, P)


def load_dataset(features_path, counts_path, tol: float = 1e-8) -> DatasetBundle:
    """Parse a feature CSV and a comparison-count CSV into a bundle.

    The basis is chosen by pivoted QR over the item features and must have
    as many items as there are feature columns. Counts for the same
    unordered pair on several rows are summed; pairs with no recorded
    comparison are dropped.
    """
    ids, U = _read_features(features_path)
    index = {item: pos for pos, item in enumerate(ids)}
    pairs, wins, totals = _read_counts(counts_path, index)
    return _assemble(features_path, counts_path, ids, U, pairs, wins, totals, tol)


def bundle_from_arrays(U, pairs, wins_i, wins_j, tol: float = 1e-8) -> DatasetBundle:
    """In-memory bundle with 1-based item ids, built exactly as :func:`load_dataset` would."""
    U = np.asarray(U, dtype=float)
    pairs = np.asarray(pairs, dtype=int).reshape(-1, 2)
    wins_i = np.asarray(wins_i, dtype=int)
    wins_j = np.asarray(wins_j, dtype=int)
    ids = list(range(1, U.shape[0] + 1))
    lo = np.minimum(pairs[:, 0], pairs[:, 1])
    hi = np.maximum(pairs[:, 0], pairs[:, 1])
    swap = pairs[:, 0] > pairs[:, 1]
    w = np.where(swap, wins_j, wins_i)
    total = wins_i + wins_j
    agg: dict = {}
    for a, b, x, t in zip(lo.tolist(), hi.tolist(), w.tolist(), total.tolist()):
        prev = agg.get((a, b), (0, 0))
        agg[(a, b)] = (prev[0] + x, prev[1] + t)
    keys = sorted(k for k, v in agg.items() if v[1] > 0)
    P = np.array(keys, dtype=int).reshape(-1, 2)
    return _assemble(
        None, None, ids, U, P,
        np.array([agg[k][0] for k in keys], dtype=int),
        np.array([agg[k][1] for k in keys], dtype=int),
        tol,
    )


def export_bundle(bundle: DatasetBundle, directory) -> tuple[Path, Path]:
    """Write ``features.csv`` and ``counts.csv``; floats keep full precision."""
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create {directory}: {exc}") from exc
    U = bundle.features.U
    ids = bundle.item_ids
    fbuf = io.StringIO()
    w = csv.writer(fbuf, lineterminator="\n")
    w.writerow(["item"] + [f"f{k + 1}" for k in range(U.shape[1])])
    for item, row in zip(ids, U):
        w.writerow([item] + [repr(float(v)) for v in row])
    cbuf = io.StringIO()
    w = csv.writer(cbuf, lineterminator="\n")
    w.writerow(["i", "j", "wins_i", "wins_j"])
    s = bundle.sample
    for (i, j), wins, total in zip(s.pairs.tolist(), s.wins.tolist(), s.trials.tolist()):
        w.writerow([ids[i], ids[j], wins, total - wins])
    fpath, cpath = directory / "features.csv", directory / "counts.csv"
    try:
        fpath.write_text(fbuf.getvalue())
        cpath.write_text(cbuf.getvalue())
    except OSError as exc:
        raise OutputError(f"cannot write bundle to {directory}: {exc}") from exc
    return fpath, cpath


# ---------------------------------------------------------------------------
# bound tables


def emit_bound_table(
    families: Sequence[tuple[str, int | None]],
    n_grid: Sequence[int],
    delta_grid: Sequence[float],
    p_multipliers: Sequence[float] = (1.0,),
    q_max: int | None = None,
    path=None,
) -> str:
    """Closed-form sampling thresholds next to the enumerated failure bound.

    For each ``(family, param)``, ``n`` and ``delta`` one row is written per
    multiplier ``t``, evaluating the bound at ``p = min(1, t * p_min)``.
    Rows with the same ``(family, n, param, delta)`` are in ascending ``p``.
    Returns the CSV text and writes it to ``path`` if given.
    """
    for family, _ in families:
        if family not in THRESHOLD_FAMILIES:
            raise OutOfScopeError(f"no closed-form sampling threshold is available for {family}")
    mults = sorted(float(t) for t in p_multipliers)
    if any(t <= 0 for t in mults):
        raise ConfigError("p multipliers must be positive")
    rows = []
    for (family, param), n in itertools.product(families, n_grid):
        graph = gen_family(family, n, param)
        cover = edge_cover_sets(graph)
        for delta in delta_grid:
            p_min = closed_form_threshold(family, n, param, delta)
            for t in mults:
                p = min(1.0, t * p_min)
                rows.append(dict(family=family, n=n, param=param, delta=delta, p_min=p_min, p=p,
                                 bound=error_probability_bound(cover, p, q_max)))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(BOUND_COLUMNS)
    for row in rows:
        writer.writerow([format_number(row[c]) for c in BOUND_COLUMNS])
    text = buf.getvalue()
    if path is not None:
        try:
            Path(path).write_text(text)
        except OSError as exc:
            raise OutputError(f"cannot write {path}: {exc}") from exc
    return text
