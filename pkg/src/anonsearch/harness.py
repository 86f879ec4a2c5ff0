"""Experiment grids over queries x noise x distractor count x l, with CSV output.

Every grid cell gets its own seed derived from the master seed and the cell
coordinates, so adding or removing cells never changes other cells.
Outputs are written by one collector in grid order and are byte-identical
for identical configurations.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from anonsearch.anonymise import DEFAULT_POOL_SIZE, DEFAULT_REMOVAL_FRACTION, DecomposeParams, decompose
from anonsearch.attack import AttackOutcome, AttackParams, attack_both
from anonsearch.corpus import INDEX_MAGIC, InvertedIndex, build_index, read_corpus, retrieve
from anonsearch.embed import EmbeddingStore, load_embeddings
from anonsearch.reconstruct import evaluate
from anonsearch.seeding import cell_seed, format_decimal, make_rng
from anonsearch.theory import FitError, coefficient_of_variation, fit_relationship

logger = logging.getLogger(__name__)

MODES = ("standard", "conservative")
DECOMPOSE_STREAM = 0
ATTACK_STREAM = 1


@dataclass
class ExperimentConfig:
    embedding_path: str
    corpus_path: str
    queries: list[str]
    sigmas: list[float] = field(default_factory=lambda: [0.0, 0.6, 1.0, 1.4, 1.8])
    distractor_counts: list[int] = field(default_factory=lambda: [0, 20, 40, 60, 120])
    n_related: int = 10
    l_values: list[int] = field(default_factory=lambda: [1])
    k_values: list[int] = field(default_factory=lambda: [1, 2, 3, 4, 5])
    pool_size: int = DEFAULT_POOL_SIZE
    master_seed: int = 0
    output_dir: str = "results"
    removal_fraction: float = DEFAULT_REMOVAL_FRACTION
    attacker_embedding_path: str | None = None

    def __post_init__(self):
        if not self.queries:
            raise ValueError("queries must be non-empty")
        for name in ("sigmas", "distractor_counts", "l_values", "k_values"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be non-empty")
        self.queries = [q.lower() for q in self.queries]
        self.sigmas = [float(s) for s in self.sigmas]
        if any(s < 0 or not math.isfinite(s) for s in self.sigmas):
            raise ValueError("sigmas must be finite and non-negative")
        if any(m < 0 for m in self.distractor_counts):
            raise ValueError("distractor counts must be non-negative")
        if any(not 1 <= l <= self.n_related for l in self.l_values):
            raise ValueError(f"l values must lie in 1..{self.n_related}")
        if any(k < 1 for k in self.k_values):
            raise ValueError("k values must be positive")

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        raw = json.loads(path.read_text(encoding="utf-8"))
        unknown = set(raw) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        for key in ("embedding_path", "corpus_path", "output_dir", "attacker_embedding_path"):
            if raw.get(key) is not None and not Path(raw[key]).is_absolute():
                raw[key] = str(path.parent / raw[key])
        return cls(**raw)


@dataclass
class EvalRecord:
    query: str
    sigma: float
    n: int
    m: int
    l: int
    alpha: float
    rho: float | None
    log_rho: float | None
    ground_truth_size: int
    reconstructed_size: int
    cell_seed: int
    related: tuple[str, ...] = ()
    distractors: tuple[str, ...] = ()
    attacks: dict[tuple[int, str], AttackOutcome] = field(default_factory=dict)


@dataclass
class SkippedItem:
    query: str
    sigma: float | None
    m: int | None
    l: int | None
    reason: str


@dataclass
class ExperimentResult:
    records: list[EvalRecord]
    skipped: list[SkippedItem]
    fits: list[dict]
    hitrates: list[dict]
    objective_histories: list[list[float]] = field(default_factory=list)
    files: dict[str, Path] = field(default_factory=dict)


def load_index(path: str | Path) -> InvertedIndex:
    """Load a saved index, or build one from a JSON Lines corpus."""
    with open(path, encoding="utf-8") as fh:
        head = fh.readline()
    if head.startswith(INDEX_MAGIC + " "):
        return InvertedIndex.load(path)
    return build_index(read_corpus(path))


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return "nan" if math.isnan(value) else repr(value)
    return str(value)


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8", newline="")


def run_cell(
    store: EmbeddingStore,
    index: InvertedIndex,
    query: str,
    sigma: float,
    m: int,
    l: int,
    config: ExperimentConfig,
    attacker: EmbeddingStore | None = None,
    histories: list[list[float]] | None = None,
) -> EvalRecord:
    seed = cell_seed(config.master_seed, query, sigma, m, config.n_related, l)
    params = DecomposeParams(
        n_related=config.n_related,
        m_distractors=m,
        sigma=sigma,
        pool_size=max(config.pool_size, m),
        removal_fraction=config.removal_fraction,
        seed=seed,
    )
    dq = decompose(store, query, params, make_rng(seed, DECOMPOSE_STREAM))
    metrics = evaluate(store, index, query, dq.related, dq.transmission_order, l)
    record = EvalRecord(
        query=query, sigma=sigma, n=config.n_related, m=m, l=l,
        alpha=metrics.alpha, rho=metrics.rho, log_rho=metrics.log_rho,
        ground_truth_size=metrics.ground_truth_size,
        reconstructed_size=metrics.reconstructed_size,
        cell_seed=seed, related=dq.related, distractors=dq.distractors,
    )
    attacker = attacker or store
    for k in config.k_values:
        if k > len(dq.transmission_order):
            continue
        std, cons, km = attack_both(
            attacker, dq.transmission_order, AttackParams(k=k, seed=seed),
            make_rng(seed, ATTACK_STREAM, k), true_query=query,
        )
        record.attacks[(k, "standard")] = std
        record.attacks[(k, "conservative")] = cons
        if histories is not None:
            histories.append(km.objective_history)
    return record


def run_experiment(
    config: ExperimentConfig,
    store: EmbeddingStore | None = None,
    index: InvertedIndex | None = None,
    attacker: EmbeddingStore | None = None,
    write: bool = True,
) -> ExperimentResult:
    """Run the full grid and (optionally) write the CSV outputs.

    Pre-loaded ``store``/``index`` skip reading the configured paths.
    """
    if store is None:
        store = load_embeddings(config.embedding_path)
    if index is None:
        index = load_index(config.corpus_path)
    if attacker is None and config.attacker_embedding_path:
        attacker = load_embeddings(config.attacker_embedding_path)

    skipped: list[SkippedItem] = []
    queries = []
    for q in config.queries:
        if q not in store:
            skipped.append(SkippedItem(q, None, None, None, "query not in embedding vocabulary"))
        elif not retrieve(index, q):
            skipped.append(SkippedItem(q, None, None, None, "query retrieves no documents"))
        else:
            queries.append(q)

    records: list[EvalRecord] = []
    histories: list[list[float]] = []
    grid = itertools.product(queries, config.sigmas, config.distractor_counts, config.l_values)
    for q, sigma, m, l in grid:
        try:
            records.append(run_cell(store, index, q, sigma, m, l, config, attacker, histories))
        except Exception as exc:  # one bad cell must not abort the grid
            logger.warning("cell (%s, %s, %s, %s) failed: %s", q, sigma, m, l, exc)
            skipped.append(SkippedItem(q, sigma, m, l, f"{type(exc).__name__}: {exc}"))

    result = ExperimentResult(
        records=records,
        skipped=skipped,
        fits=compute_fits(records, store),
        hitrates=compute_hitrates(records),
        objective_histories=histories,
    )
    if write:
        result.files = write_outputs(result, config)
    return result


def compute_fits(records: Sequence[EvalRecord], store: EmbeddingStore) -> list[dict]:
    """One log-linear fit per (sigma, m, l) group."""
    groups: dict[tuple, list[EvalRecord]] = defaultdict(list)
    for r in records:
        groups[(r.sigma, r.m, r.l)].append(r)
    rows = []
    for (sigma, m, l), group in groups.items():
        points = [(r.alpha, r.log_rho) for r in group if r.log_rho is not None]
        dropped = sum(1 for r in group if r.rho == 0)
        norms = [store.norm(t) for r in group for t in r.related if t in store]
        row = {
            "sigma": sigma, "m": m, "l": l, "slope": None, "intercept": None,
            "pearson_r": None, "n_points": len(points), "dropped_zero_rho": dropped,
            "norm_cv": coefficient_of_variation(norms) if norms else None,
        }
        try:
            fit = fit_relationship(points)
            row.update(slope=fit.slope, intercept=fit.intercept, pearson_r=fit.pearson_r)
        except FitError as exc:
            logger.info("no fit for sigma=%s m=%s l=%s: %s", sigma, m, l, exc)
        rows.append(row)
    return rows


def compute_hitrates(records: Sequence[EvalRecord]) -> list[dict]:
    tallies: dict[tuple, list[int]] = {}
    for r in records:
        for (k, mode), outcome in r.attacks.items():
            t = tallies.setdefault((r.sigma, r.m, k, mode), [0, 0])
            t[0] += outcome.hit
            t[1] += 1
    rows = []
    for (sigma, m, k, mode), (hits, total) in sorted(
        tallies.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2], MODES.index(kv[0][3]))
    ):
        rows.append({"sigma": sigma, "m": m, "k": k, "mode": mode,
                     "hits": hits, "attacks": total, "hit_rate": hits / total})
    return rows


RECORD_COLUMNS = [
    "query", "sigma", "n", "m", "l", "alpha", "rho", "log_rho",
    "ground_truth_size", "reconstructed_size", "cell_seed", "related", "distractors",
]
FIT_COLUMNS = ["sigma", "m", "l", "slope", "intercept", "pearson_r", "n_points", "dropped_zero_rho", "norm_cv"]
HITRATE_COLUMNS = ["sigma", "m", "k", "mode", "hits", "attacks", "hit_rate"]


def write_outputs(result: ExperimentResult, config: ExperimentConfig) -> dict[str, Path]:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "records": out / "records.csv",
        "fits": out / "fits.csv",
        "hitrates": out / "hitrates.csv",
        "attacks": out / "attacks.csv",
        "skipped": out / "skipped.csv",
    }
    _write_csv(files["records"], RECORD_COLUMNS, (
        [r.query, format_decimal(r.sigma), r.n, r.m, r.l, r.alpha, r.rho, r.log_rho,
         r.ground_truth_size, r.reconstructed_size, r.cell_seed,
         " ".join(r.related), " ".join(r.distractors)]
        for r in result.records
    ))
    _write_csv(files["fits"], FIT_COLUMNS, (
        [format_decimal(f["sigma"])] + [f[c] for c in FIT_COLUMNS[1:]] for f in result.fits
    ))
    _write_csv(files["hitrates"], HITRATE_COLUMNS, (
        [format_decimal(h["sigma"])] + [h[c] for c in HITRATE_COLUMNS[1:]] for h in result.hitrates
    ))
    max_k = max(config.k_values)
    _write_csv(
        files["attacks"],
        ["query", "sigma", "n", "m", "k", "mode", "hit"] + [f"guess{i}" for i in range(1, max_k + 1)]
        + ["coherence_max"],
        (
            [r.query, format_decimal(r.sigma), r.n, r.m, k, mode, o.hit]
            + list(o.guesses) + [""] * (max_k - len(o.guesses))
            + [o.chosen_cluster_coherence]
            for r in result.records
            for (k, mode), o in r.attacks.items()
        ),
    )
    _write_csv(files["skipped"], ["query", "sigma", "m", "l", "reason"], (
        [s.query, None if s.sigma is None else format_decimal(s.sigma), s.m, s.l, s.reason]
        for s in result.skipped
    ))
    files.update(emit_plot_data(result.records, out / "plots"))
    return files


def write_scatter(rows: Iterable[Mapping], path: str | Path, columns: Sequence[str]) -> Path:
    """Write mapping rows as a whitespace-free CSV with the given columns."""
    path = Path(path)
    _write_csv(path, columns, ([row.get(c) for c in columns] for row in rows))
    return path


def read_scatter(path: str | Path) -> list[dict[str, str]]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def emit_plot_data(
    records: Sequence[EvalRecord], out_dir: str | Path, group_by: Sequence[str] = ("sigma", "m")
) -> dict[str, Path]:
    """Per-panel scatter files (alpha vs log rho plus fitted line) and hit-rate bars."""
    if not records:
        raise ValueError("no records to plot")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    groups: dict[tuple, list[EvalRecord]] = defaultdict(list)
    for r in records:
        groups[tuple(getattr(r, g) for g in group_by)].append(r)
    files: dict[str, Path] = {}
    for key, group in groups.items():
        stem = "_".join(f"{g}-{format_decimal(v)}" for g, v in zip(group_by, key))
        rows = [{"alpha": r.alpha, "log_rho": r.log_rho, "kind": "point"}
                for r in group if r.log_rho is not None]
        if not rows:
            logger.warning("panel %s has no points with positive reconstructability", stem)
        else:
            try:
                fit = fit_relationship([(p["alpha"], p["log_rho"]) for p in rows])
                for x in (min(p["alpha"] for p in rows), max(p["alpha"] for p in rows)):
                    rows.append({"alpha": x, "log_rho": fit.slope * x + fit.intercept, "kind": "fit"})
            except FitError as exc:
                logger.warning("panel %s: no fitted line (%s)", stem, exc)
        files[f"panel_{stem}"] = write_scatter(rows, out / f"panel_{stem}.csv", ["alpha", "log_rho", "kind"])
        bars = compute_hitrates(group)
        files[f"hitrate_{stem}"] = write_scatter(bars, out / f"hitrate_{stem}.csv", ["k", "mode", "hit_rate"])
    return files


def config_to_json(config: ExperimentConfig) -> str:
    return json.dumps(asdict(config), indent=2) + "\n"
