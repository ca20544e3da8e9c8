"""Ranking metrics, time-difference histograms and the benchmark runner.

A retrieved hit is relevant when its segment label equals the query
segment's label.  All metrics are computed per query and then averaged
(macro average).  The benchmark runner repeats the whole protocol
(select queries, train, retrieve, score) for each seed and method and
collects per-seed and seed-averaged values.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import AE_RATIOS, ae_embedding_retrieve, euclidean_retrieve, train_ae_baseline
from .ingest import TimeSeries
from .model import (DDMM_RATIOS, DdmmModel, prepare_archive, retrieve_prepared,
                    train_ae_ddmm, train_comparison_model, train_ddmm)
from .neuralnet import TrainConfig
from .ranking import RankedResult, eligible_mask, rank_candidates
from .segment import QuerySpec, SegmentStore, build_segments, select_queries

METHODS = ("eu", "ae", "ddmm", "ae-ddmm", "comparison")

AP_NORMALIZERS = ("in-top-k", "min-k-total")


def relevance(store, q_index: int, hit_index: int) -> bool:
    """True iff the hit segment's label equals the query segment's label."""
    return store.label(hit_index) == store.label(q_index)


def relevance_bits(store, result: RankedResult) -> np.ndarray:
    """Boolean relevance of each hit, in rank order."""
    q_label = store.label(result.query_index)
    labels = store.labels()
    positions = np.searchsorted(store.times, result.indices)
    return labels[positions] == q_label


def precision_at_k(result: RankedResult, store, k: int) -> float:
    """Fraction of the first k hits that are relevant."""
    if k > len(result):
        raise ValueError(f"k={k} exceeds hit count {len(result)}")
    bits = relevance_bits(store, result.top(k))
    return float(bits.sum() / k)


def _total_relevant(store, q_index: int) -> int:
    labels = store.labels()
    eligible = eligible_mask(store.times, q_index, store.window)
    return int(np.sum(labels[eligible] == store.label(q_index)))


def recall_at_k(result: RankedResult, store, k: int) -> float:
    """Relevant hits in the top k over all relevant eligible segments."""
    if k > len(result):
        raise ValueError(f"k={k} exceeds hit count {len(result)}")
    total = _total_relevant(store, result.query_index)
    if total == 0:
        raise ValueError(f"query {result.query_index} has no relevant eligible segments")
    bits = relevance_bits(store, result.top(k))
    return float(bits.sum() / total)


def average_precision_at_k(result: RankedResult, store, k: int,
                           normalizer: str = "in-top-k") -> float:
    """AP@k: mean of precision at each relevant rank within the top k.

    The default normalizer is the number of relevant hits inside the
    top k (zero relevant hits give AP 0).  ``min-k-total`` divides by
    min(k, total relevant eligible) instead, for comparison with that
    convention.
    """
    if k > len(result):
        raise ValueError(f"k={k} exceeds hit count {len(result)}")
    if normalizer not in AP_NORMALIZERS:
        raise ValueError(f"unknown AP normalizer {normalizer!r}; expected one of {AP_NORMALIZERS}")
    bits = relevance_bits(store, result.top(k)).astype(np.float64)
    hits = bits.cumsum()
    precisions = hits / np.arange(1, k + 1)
    score = float((precisions * bits).sum())
    if normalizer == "in-top-k":
        denom = bits.sum()
        return score / denom if denom else 0.0
    denom = min(k, _total_relevant(store, result.query_index))
    return score / denom if denom else 0.0


def mean_average_precision(results, store, k: int, normalizer: str = "in-top-k") -> float:
    """Macro-averaged AP@k over a collection of per-query results."""
    aps = [average_precision_at_k(r, store, k, normalizer) for r in results]
    if not aps:
        raise ValueError("no results to average")
    return float(np.mean(aps))


def time_difference_histogram(results, store, k: int, bins: int = 101,
                              relevant_only: bool = False):
    """Histogram of t_query - t_hit over every query's top-k hits.

    Differences are binned over [-T, T] where T is the series length.
    With ``relevant_only`` only label-matching hits are counted (the
    histogram may then be empty).  Returns (counts, bin_edges).
    """
    results = list(results)
    if not results:
        raise ValueError("empty results")
    diffs = []
    for r in results:
        top = r.top(k)
        dt = r.query_index - top.indices
        if relevant_only:
            dt = dt[relevance_bits(store, top)]
        diffs.append(dt)
    diffs = np.concatenate(diffs) if diffs else np.empty(0)
    horizon = store.times[-1] + 1 if hasattr(store, "times") else 0
    horizon = int(getattr(getattr(store, "source", store), "n_steps", horizon))
    return np.histogram(diffs, bins=bins, range=(-horizon, horizon))


def write_histogram_csv(counts: np.ndarray, edges: np.ndarray, path) -> None:
    """Plot-ready CSV: left bin edge and count per row."""
    from pathlib import Path
    lines = ["bin_edge,count"]
    lines += [f"{edges[i]!r},{int(counts[i])}" for i in range(counts.size)]
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Benchmark runner
# ---------------------------------------------------------------------------

@dataclass
class BenchmarkConfig:
    """Everything one benchmark run needs besides methods and seeds."""

    series: TimeSeries
    query: QuerySpec
    train: TrainConfig
    window: int = 10
    stride: int = 1
    ks: tuple[int, ...] = (1, 10)
    curve_max_k: int = 0           # 0 disables precision/recall curves
    ratios: tuple = DDMM_RATIOS
    ae_ratios: tuple = AE_RATIOS
    rescale_mode: str = "affine-01"
    ap_normalizer: str = "in-top-k"


@dataclass
class MethodSeedResult:
    """Scores of one method under one seed."""

    method: str
    seed: int
    queries: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    ap: dict = field(default_factory=dict)           # k -> per-query AP array
    precision_curve: np.ndarray | None = None        # mean over queries
    recall_curve: np.ndarray | None = None
    rankings: list | None = None
    error: str | None = None

    def map_at(self, k: int) -> float:
        return float(np.mean(self.ap[k]))


@dataclass
class MetricsReport:
    """Per-seed and seed-averaged benchmark scores."""

    methods: tuple[str, ...]
    seeds: tuple[int, ...]
    ks: tuple[int, ...]
    results: dict = field(default_factory=dict)      # (method, seed) -> MethodSeedResult

    def result(self, method: str, seed: int) -> MethodSeedResult:
        return self.results[(method, seed)]

    def errors(self) -> list[str]:
        return [f"{m} (seed {s}): {r.error}" for (m, s), r in self.results.items() if r.error]

    def per_seed_map(self, method: str, k: int) -> list[float]:
        return [self.results[(method, s)].map_at(k) for s in self.seeds
                if self.results[(method, s)].error is None]

    def map_at(self, method: str, k: int) -> float:
        values = self.per_seed_map(method, k)
        if not values:
            raise ValueError(f"method {method!r} produced no successful runs")
        return float(np.mean(values))

    def mean_curve(self, method: str, which: str = "precision") -> np.ndarray | None:
        curves = [getattr(self.results[(method, s)], f"{which}_curve") for s in self.seeds
                  if self.results[(method, s)].error is None]
        curves = [c for c in curves if c is not None]
        return np.mean(curves, axis=0) if curves else None

    def to_table(self) -> str:
        header = ["method"] + [f"MAP@{k}" for k in self.ks]
        rows = [header]
        for m in self.methods:
            if all(self.results[(m, s)].error for s in self.seeds):
                rows.append([m] + ["failed"] * len(self.ks))
                continue
            rows.append([m] + [f"{self.map_at(m, k):.3f}" for k in self.ks])
        widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
        return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip()
                         for r in rows)

    def summary_rows(self) -> list[dict]:
        rows = []
        for m in self.methods:
            for k in self.ks:
                for s in self.seeds:
                    r = self.results[(m, s)]
                    rows.append({"method": m, "k": k, "seed": s,
                                 "map": None if r.error else r.map_at(k),
                                 "error": r.error or ""})
                ok = self.per_seed_map(m, k)
                rows.append({"method": m, "k": k, "seed": "mean",
                             "map": float(np.mean(ok)) if ok else None, "error": ""})
        return rows

    def query_rows(self) -> list[dict]:
        rows = []
        for (m, s), r in sorted(self.results.items()):
            if r.error:
                continue
            for k in self.ks:
                for q, ap in zip(r.queries, r.ap[k]):
                    rows.append({"method": m, "seed": s, "query": int(q),
                                 "k": k, "ap": float(ap)})
        return rows

    def write_summary_csv(self, path) -> None:
        from pathlib import Path
        lines = ["method,k,seed,map,error"]
        for r in self.summary_rows():
            value = "" if r["map"] is None else repr(r["map"])
            lines.append(f"{r['method']},{r['k']},{r['seed']},{value},{r['error']}")
        Path(path).write_text("\n".join(lines) + "\n")

    def write_query_csv(self, path) -> None:
        from pathlib import Path
        lines = ["method,seed,query,k,ap"]
        for r in self.query_rows():
            lines.append(f"{r['method']},{r['seed']},{r['query']},{r['k']},{r['ap']!r}")
        Path(path).write_text("\n".join(lines) + "\n")


def _train_and_prepare(method: str, store: SegmentStore, cfg: BenchmarkConfig,
                       train_cfg: TrainConfig):
    """Train one method and return a per-query retrieval closure."""
    x = store.matrix()
    if method == "eu":
        def query_fn(q_index, k):
            dists = np.linalg.norm(x - store.vector(q_index)[None, :], axis=1)
            return rank_candidates(store.times, dists, q_index, store.window, k)
        return None, query_fn
    if method == "ae":
        embedder = train_ae_baseline(store, train_cfg, ratios=cfg.ae_ratios)
        emb = embedder.embed(x)

        def query_fn(q_index, k):
            q = embedder.embed(store.vector(q_index))[0]
            dists = np.linalg.norm(emb - q[None, :], axis=1)
            return rank_candidates(store.times, dists, q_index, store.window, k)
        return embedder, query_fn
    if method == "ddmm":
        model = train_ddmm(store, train_cfg, ratios=cfg.ratios,
                           rescale_mode=cfg.rescale_mode)
    elif method == "ae-ddmm":
        model = train_ae_ddmm(store, train_cfg, train_cfg, ratios=cfg.ratios,
                              ae_ratios=cfg.ae_ratios, rescale_mode=cfg.rescale_mode)
    elif method == "comparison":
        comp = train_comparison_model(store, train_cfg, ratios=cfg.ratios)
        encoded = comp.encode(x)

        def query_fn(q_index, k):
            fq = comp.encode(store.vector(q_index))[0]
            dists = np.sum((encoded - fq[None, :]) ** 2, axis=1)
            return rank_candidates(store.times, dists, q_index, store.window, k)
        return comp, query_fn
    else:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    prep = prepare_archive(model, store)

    def query_fn(q_index, k):
        return retrieve_prepared(model, prep, store, q_index, k)
    return model, query_fn


def run_benchmark(config: BenchmarkConfig, methods, seeds,
                  keep_rankings: bool = False) -> MetricsReport:
    """Run the full retrieval protocol for every (method, seed) pair.

    Per seed: build segments, select that seed's queries, train each
    method with the seed, retrieve for every query and score.  A method
    whose training fails is reported with its error; the run continues.
    Identical config and seeds always reproduce identical reports.
    """
    methods = tuple(methods)
    seeds = tuple(int(s) for s in seeds)
    if not seeds:
        raise ValueError("need at least one seed")
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; expected one of {METHODS}")
    store = build_segments(config.series, config.window, config.stride)
    k_max = max(max(config.ks), config.curve_max_k)
    report = MetricsReport(methods=methods, seeds=seeds, ks=tuple(config.ks))
    for seed in seeds:
        queries = select_queries(store, replace(config.query, seed=seed))
        min_eligible = min(int(eligible_mask(store.times, q, store.window).sum())
                           for q in queries)
        if min_eligible < k_max:
            raise ValueError(f"k={k_max} requested but a query has only "
                             f"{min_eligible} eligible segments")
        train_cfg = replace(config.train, seed=seed)
        for method in methods:
            entry = MethodSeedResult(method=method, seed=seed, queries=queries)
            report.results[(method, seed)] = entry
            try:
                _, query_fn = _train_and_prepare(method, store, config, train_cfg)
            except (ValueError, FloatingPointError) as exc:
                entry.error = f"{type(exc).__name__}: {exc}"
                continue
            rankings = [query_fn(int(q), k_max) for q in queries]
            for k in config.ks:
                entry.ap[k] = np.asarray([
                    average_precision_at_k(r, store, k, config.ap_normalizer)
                    for r in rankings])
            if config.curve_max_k:
                pcurves, rcurves = [], []
                for r in rankings:
                    bits = relevance_bits(store, r.top(config.curve_max_k)).astype(np.float64)
                    hits = bits.cumsum()
                    pcurves.append(hits / np.arange(1, config.curve_max_k + 1))
                    rcurves.append(hits / max(_total_relevant(store, r.query_index), 1))
                entry.precision_curve = np.mean(pcurves, axis=0)
                entry.recall_curve = np.mean(rcurves, axis=0)
            if keep_rankings:
                entry.rankings = rankings
    return report
