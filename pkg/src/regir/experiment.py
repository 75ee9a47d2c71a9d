"""End-to-end experiment runs driven by a flat key=value config.

A run covers ingest -> index/vectors -> tune -> prefetch -> (train) ->
rerank -> date filter -> evaluate and drops every artifact (run files, grid
CSVs, checkpoints, eval reports, recall curve, year-difference histogram)
into one output directory together with a manifest. The manifest hash covers
the config snapshot, the content hashes of every input file, and the tool
version - not timings - so rerunning an unchanged experiment reproduces
byte-identical CSVs, and finished stages are skipped outright.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import __version__
from .bm25 import (Bm25Params, PostingsIndex, build_index, default_grid,
                   load_index, save_index, tune_bm25, write_grid_csv)
from .corpus import Corpus, SplitManifest, ingest_collection, load_qrels
from .datefilter import (DateWindow, choose_window, filter_run,
                         write_year_hist_csv, year_diff_histogram)
from .dense import (CentroidError, DocVectorStore, build_centroid_store,
                    centroid, knn_search, load_doc_vectors, load_word_vectors,
                    save_doc_vectors)
from .fusion import (default_alpha_grid, fuse, normalize_scores, tune_alpha,
                     write_alpha_grid_csv)
from .metrics import (aggregate_runs, evaluate_run, recall_at_k,
                      write_eval_csv, write_summary_csv)
from .ranking import RankedList, Run, read_run, write_run
from .rerank.features import TypeEmbeddings, load_token_vectors
from .rerank.train import (FeatureStore, Hyperparams, save_checkpoint,
                           train_model, write_training_log)
from .text import TextPipeline, build_pipeline, load_stopwords
from ._parallel import parallel_map

log = logging.getLogger(__name__)

TASKS = ("EU2UK", "UK2EU")
PREFETCH_MODES = ("bm25", "w2v-cent", "doc-vectors", "ensemble")


class ConfigError(ValueError):
    pass


def _parse_bool(raw: str, key: str) -> bool:
    if raw.lower() in ("true", "1", "yes"):
        return True
    if raw.lower() in ("false", "0", "no"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {raw!r}")


def _parse_range(raw: str, key: str) -> list[float]:
    """'start:stop:step' inclusive grid, or a comma-separated list."""
    if ":" in raw:
        parts = raw.split(":")
        if len(parts) != 3:
            raise ConfigError(f"{key}: expected start:stop:step, got {raw!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise ConfigError(f"{key}: step must be positive")
        values = []
        i = 0
        while True:
            v = round(start + i * step, 10)
            if v > stop + 1e-9:
                break
            values.append(round(v, 4))
            i += 1
        return values
    return [float(p) for p in raw.split(",") if p]


KNOWN_KEYS = {
    "task", "seed",
    "data.pool", "data.queries", "data.qrels", "data.splits",
    "text.stopwords", "text.idf_filter",
    "prefetch.mode", "prefetch.k",
    "bm25.k1", "bm25.b", "bm25.tune", "bm25.grid_k1", "bm25.grid_b",
    "dense.word_vectors", "dense.pool_vectors", "dense.query_vectors",
    "fusion.components", "fusion.alpha", "fusion.tune", "fusion.grid",
    "rerank.model", "rerank.hyperparams", "rerank.seeds", "rerank.embeddings",
    "rerank.token_vectors",
    "datefilter.years", "datefilter.mode", "datefilter.tune", "datefilter.grid",
    "eval.k",
}


def parse_config(text: str, base_dir: Path | None = None) -> "ExperimentConfig":
    raw: dict[str, str] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected key = value")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {line_no}: unknown config key {key!r}")
        if key in raw:
            raise ConfigError(f"line {line_no}: duplicate key {key!r}")
        raw[key] = value
    return ExperimentConfig.from_raw(raw, base_dir or Path("."))


def load_config(path) -> "ExperimentConfig":
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), path.parent)


@dataclass
class ExperimentConfig:
    raw: dict[str, str]
    task: str
    seed: int
    pool_path: Path
    queries_path: Path
    qrels_path: Path
    splits_path: Path
    stopwords_path: Path | None
    idf_filter: bool
    prefetch_mode: str
    k: int
    bm25_params: Bm25Params | None
    bm25_tune: bool
    bm25_grid_k1: list[float]
    bm25_grid_b: list[float]
    word_vectors_path: Path | None
    pool_vectors_path: Path | None
    query_vectors_path: Path | None
    fusion_components: tuple[str, str] | None
    fusion_alpha: float | None
    fusion_tune: bool
    fusion_grid: list[float]
    rerank_model: str
    rerank_hyperparams_path: Path | None
    rerank_seeds: list[int]
    rerank_embeddings: str
    token_vectors_path: Path | None
    datefilter_years: float | None
    datefilter_mode: str
    datefilter_tune: bool
    datefilter_grid: list[float]
    eval_k: int

    @classmethod
    def from_raw(cls, raw: dict[str, str], base: Path) -> "ExperimentConfig":
        def path_of(key, required=False):
            if key not in raw:
                if required:
                    raise ConfigError(f"missing required key {key!r}")
                return None
            p = Path(raw[key])
            if not p.is_absolute():
                p = base / p
            if not p.exists():
                raise ConfigError(f"{key}: {p} does not exist")
            return p

        task = raw.get("task", "")
        if task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {task!r}")
        mode = raw.get("prefetch.mode", "bm25")
        if mode not in PREFETCH_MODES:
            raise ConfigError(f"prefetch.mode must be one of {PREFETCH_MODES}")
        k = int(raw.get("prefetch.k", "100"))
        if k < 1:
            raise ConfigError("prefetch.k must be >= 1")
        eval_k = int(raw.get("eval.k", "20"))
        if eval_k < 1:
            raise ConfigError("eval.k must be >= 1")

        bm25_params = None
        if "bm25.k1" in raw or "bm25.b" in raw:
            if not ("bm25.k1" in raw and "bm25.b" in raw):
                raise ConfigError("bm25.k1 and bm25.b must be given together")
            bm25_params = Bm25Params(float(raw["bm25.k1"]), float(raw["bm25.b"]))
        bm25_tune = _parse_bool(raw.get("bm25.tune", "false"), "bm25.tune")
        if bm25_tune and bm25_params is not None:
            raise ConfigError("bm25.tune conflicts with explicit bm25.k1/b")
        grid_k1, grid_b = default_grid()
        if "bm25.grid_k1" in raw:
            grid_k1 = _parse_range(raw["bm25.grid_k1"], "bm25.grid_k1")
        if "bm25.grid_b" in raw:
            grid_b = _parse_range(raw["bm25.grid_b"], "bm25.grid_b")

        components = None
        if "fusion.components" in raw:
            parts = tuple(p.strip() for p in raw["fusion.components"].split(","))
            if len(parts) != 2 or any(p not in ("bm25", "w2v-cent", "doc-vectors")
                                      for p in parts):
                raise ConfigError("fusion.components must name two of "
                                  "bm25, w2v-cent, doc-vectors")
            components = parts
        if mode == "ensemble" and components is None:
            raise ConfigError("ensemble mode requires fusion.components")
        fusion_alpha = float(raw["fusion.alpha"]) if "fusion.alpha" in raw else None
        if fusion_alpha is not None and not 0 <= fusion_alpha <= 1:
            raise ConfigError("fusion.alpha must be in [0, 1]")
        fusion_tune = _parse_bool(raw.get("fusion.tune", "false"), "fusion.tune")
        if mode == "ensemble" and fusion_alpha is None and not fusion_tune:
            raise ConfigError("ensemble mode needs fusion.alpha or fusion.tune")
        fusion_grid = (_parse_range(raw["fusion.grid"], "fusion.grid")
                       if "fusion.grid" in raw else default_alpha_grid())

        rerank_model = raw.get("rerank.model", "none")
        if rerank_model not in ("none", "drmm", "pacrr"):
            raise ConfigError("rerank.model must be none, drmm or pacrr")
        seed = int(raw.get("seed", "0"))
        if "rerank.seeds" in raw:
            rerank_seeds = [int(s) for s in raw["rerank.seeds"].split(",") if s]
        else:
            rerank_seeds = [seed]
        if rerank_model != "none" and not rerank_seeds:
            raise ConfigError("a trained re-ranker needs at least one seed")
        rerank_embeddings = raw.get("rerank.embeddings", "word")
        if rerank_embeddings not in ("word", "token"):
            raise ConfigError("rerank.embeddings must be word or token")

        datefilter_years = None
        if "datefilter.years" in raw:
            datefilter_years = float(raw["datefilter.years"])
        datefilter_mode = raw.get("datefilter.mode", "post")
        if datefilter_mode not in ("pre", "post"):
            raise ConfigError("datefilter.mode must be pre or post")
        datefilter_tune = _parse_bool(raw.get("datefilter.tune", "false"),
                                      "datefilter.tune")
        datefilter_grid = (_parse_range(raw["datefilter.grid"], "datefilter.grid")
                           if "datefilter.grid" in raw else [1, 2, 5, 10, 15])

        cfg = cls(
            raw=dict(sorted(raw.items())),
            task=task,
            seed=seed,
            pool_path=path_of("data.pool", required=True),
            queries_path=path_of("data.queries", required=True),
            qrels_path=path_of("data.qrels", required=True),
            splits_path=path_of("data.splits", required=True),
            stopwords_path=path_of("text.stopwords"),
            idf_filter=_parse_bool(raw.get("text.idf_filter", "true"),
                                   "text.idf_filter"),
            prefetch_mode=mode,
            k=k,
            bm25_params=bm25_params,
            bm25_tune=bm25_tune,
            bm25_grid_k1=grid_k1,
            bm25_grid_b=grid_b,
            word_vectors_path=path_of("dense.word_vectors"),
            pool_vectors_path=path_of("dense.pool_vectors"),
            query_vectors_path=path_of("dense.query_vectors"),
            fusion_components=components,
            fusion_alpha=fusion_alpha,
            fusion_tune=fusion_tune,
            fusion_grid=fusion_grid,
            rerank_model=rerank_model,
            rerank_hyperparams_path=path_of("rerank.hyperparams"),
            rerank_seeds=rerank_seeds,
            rerank_embeddings=rerank_embeddings,
            token_vectors_path=path_of("rerank.token_vectors"),
            datefilter_years=datefilter_years,
            datefilter_mode=datefilter_mode,
            datefilter_tune=datefilter_tune,
            datefilter_grid=datefilter_grid,
            eval_k=eval_k,
        )
        cfg._check_resources()
        return cfg

    def _check_resources(self) -> None:
        needs_w2v = (self.prefetch_mode == "w2v-cent"
                     or (self.fusion_components is not None
                         and "w2v-cent" in self.fusion_components))
        if needs_w2v and self.word_vectors_path is None:
            raise ConfigError("w2v-cent requires dense.word_vectors")
        needs_docvec = (self.prefetch_mode == "doc-vectors"
                        or (self.fusion_components is not None
                            and "doc-vectors" in self.fusion_components))
        if needs_docvec and (self.pool_vectors_path is None
                             or self.query_vectors_path is None):
            raise ConfigError("doc-vectors requires dense.pool_vectors and "
                              "dense.query_vectors")
        if self.rerank_model != "none":
            if self.rerank_embeddings == "word" and self.word_vectors_path is None:
                raise ConfigError("re-ranking with word embeddings requires "
                                  "dense.word_vectors")
            if self.rerank_embeddings == "token" and self.token_vectors_path is None:
                raise ConfigError("re-ranking with token embeddings requires "
                                  "rerank.token_vectors")

    @property
    def needs_bm25(self) -> bool:
        return (self.prefetch_mode == "bm25"
                or (self.fusion_components is not None
                    and "bm25" in self.fusion_components))

    def input_paths(self) -> list[Path]:
        paths = [self.pool_path, self.queries_path, self.qrels_path,
                 self.splits_path]
        for p in (self.stopwords_path, self.word_vectors_path,
                  self.pool_vectors_path, self.query_vectors_path,
                  self.rerank_hyperparams_path, self.token_vectors_path):
            if p is not None:
                paths.append(p)
        return paths


def hash_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def stage_seed(root_seed: int, stage: str) -> int:
    digest = hashlib.sha256(f"{root_seed}:{stage}".encode()).digest()
    return int.from_bytes(digest[:4], "big") % (2 ** 31)


def emit_rk_curve(run: Run, qrels, k_max: int) -> list[tuple[int, float]]:
    """`(k, mean R@k)` rows for k = 1..k_max over queries with relevant
    documents; the run must be fetched at depth >= k_max."""
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    query_ids = [q for q in sorted(run) if qrels.relevant(q)]
    if not query_ids:
        raise ValueError("no queries with relevant documents")
    short = [q for q in query_ids
             if len(run[q]) < min(k_max, len(qrels.relevant(q)))]
    rows = []
    for k in range(1, k_max + 1):
        total = sum(recall_at_k(run[q], qrels.relevant(q), k) for q in query_ids)
        rows.append((k, total / len(query_ids)))
    if short:
        log.warning("rk curve: %d list(s) shorter than k_max", len(short))
    return rows


def write_rk_curve_csv(rows, path, comment: str = "") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        fh.write("k,recall\n")
        for k, recall in rows:
            fh.write(f"{k},{recall!r}\n")


def bm25_run(index: PostingsIndex, pipeline: TextPipeline, query_corpus: Corpus,
             query_ids, params: Bm25Params, depth: int) -> Run:
    def one(query_id: str):
        tokens = pipeline(query_corpus.get(query_id).text)
        return query_id, index.bm25_search(tokens, params, depth)

    return Run(parallel_map(one, list(query_ids)))


def centroid_run(pool_store: DocVectorStore, pipeline: TextPipeline,
                 word_vectors, query_corpus: Corpus, query_ids, depth: int) -> Run:
    def one(query_id: str):
        tokens = pipeline(query_corpus.get(query_id).text)
        try:
            qvec = centroid(tokens, word_vectors, pipeline.idf_table)
        except CentroidError:
            log.warning("query %s: no usable tokens for a centroid; empty list",
                        query_id)
            return query_id, RankedList(presorted=True)
        return query_id, knn_search(qvec, pool_store, depth)

    return Run(parallel_map(one, list(query_ids)))


def doc_vectors_run(pool_store: DocVectorStore, query_store: DocVectorStore,
                    query_ids, depth: int) -> Run:
    def one(query_id: str):
        if query_id not in query_store:
            raise KeyError(f"no vector for query {query_id!r}")
        return query_id, knn_search(query_store.get(query_id), pool_store, depth)

    return Run(parallel_map(one, list(query_ids)))


class _Stages:
    """Skip-if-done bookkeeping: a stage whose key (manifest hash + name)
    matches the previous run and whose outputs still exist is not recomputed."""

    def __init__(self, outdir: Path, manifest_hash: str):
        self.path = outdir / ".stages.json"
        self.manifest_hash = manifest_hash
        self.done: dict[str, dict] = {}
        if self.path.exists():
            try:
                self.done = json.loads(self.path.read_text())
            except json.JSONDecodeError:
                self.done = {}
        self.timings: dict[str, float] = {}

    def key(self, name: str) -> str:
        return hashlib.sha256(f"{self.manifest_hash}:{name}".encode()).hexdigest()

    def fresh(self, name: str, outputs: list[Path]) -> bool:
        entry = self.done.get(name)
        return (entry is not None and entry.get("key") == self.key(name)
                and all(Path(p).exists() for p in entry.get("outputs", []))
                and all(p.exists() for p in outputs))

    def run(self, name: str, outputs: list[Path], fn):
        if self.fresh(name, outputs):
            log.info("stage %s: outputs up to date, skipped", name)
            self.timings[name] = 0.0
            return None
        start = time.perf_counter()
        try:
            result = fn()
        except Exception as exc:
            raise RuntimeError(f"stage {name!r} failed: {exc}") from exc
        self.timings[name] = round(time.perf_counter() - start, 6)
        self.done[name] = {"key": self.key(name),
                           "outputs": [str(p) for p in outputs]}
        self.path.write_text(json.dumps(self.done, indent=2, sort_keys=True))
        return result


@dataclass
class ExperimentResult:
    outdir: Path
    manifest_hash: str
    eval_paths: list[Path] = field(default_factory=list)
    summary_path: Path | None = None


def run_experiment(config: ExperimentConfig, outdir) -> ExperimentResult:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    resources = {str(p): hash_file(p) for p in sorted(config.input_paths())}
    hash_basis = json.dumps({"config": config.raw, "resources": resources,
                             "version": __version__}, sort_keys=True)
    manifest_hash = hashlib.sha256(hash_basis.encode()).hexdigest()
    tag = f"manifest {manifest_hash}"
    stages = _Stages(outdir, manifest_hash)

    pool = ingest_collection(config.pool_path, tag="pool")
    queries = ingest_collection(config.queries_path, tag=config.task)
    qrels = load_qrels(config.qrels_path, query_corpus=queries, pool_corpus=pool)
    splits = SplitManifest.from_json(config.splits_path)
    splits.validate(query_corpus=queries, pool_corpus=pool, qrels=qrels)

    stopwords = (load_stopwords(config.stopwords_path)
                 if config.stopwords_path else None)
    pipeline = build_pipeline(pool, stopwords=stopwords,
                              idf_filter=config.idf_filter)

    deep = 2 * config.k
    word_vectors = (load_word_vectors(config.word_vectors_path)
                    if config.word_vectors_path else None)

    index = None
    bm25_params = config.bm25_params or Bm25Params()
    if config.needs_bm25:
        index_path = outdir / "index.bin"
        stages.run("index", [index_path],
                   lambda: save_index(build_index(pool, pipeline), index_path))
        index = load_index(index_path)
        if config.bm25_tune:
            grid_path = outdir / "bm25_grid.csv"

            def tune_stage():
                dev_tokens = {q: pipeline(queries.get(q).text)
                              for q in splits.dev_ids}
                best, cells = tune_bm25(index, dev_tokens, qrels,
                                        config.bm25_grid_k1, config.bm25_grid_b,
                                        config.k)
                write_grid_csv(cells, grid_path, comment=tag)
                (outdir / "bm25_params.json").write_text(
                    json.dumps({"k1": best.k1, "b": best.b}))

            stages.run("tune-bm25", [grid_path, outdir / "bm25_params.json"],
                       tune_stage)
            best = json.loads((outdir / "bm25_params.json").read_text())
            bm25_params = Bm25Params(best["k1"], best["b"])

    cent_store = None
    if (config.prefetch_mode == "w2v-cent"
            or (config.fusion_components and "w2v-cent" in config.fusion_components)):
        cent_path = outdir / "centroids.vec"
        stages.run("centroids", [cent_path],
                   lambda: save_doc_vectors(
                       build_centroid_store(pool, pipeline, word_vectors),
                       cent_path))
        cent_store = load_doc_vectors(cent_path)

    pool_store = query_store = None
    if (config.prefetch_mode == "doc-vectors"
            or (config.fusion_components and "doc-vectors" in config.fusion_components)):
        pool_store = load_doc_vectors(config.pool_vectors_path)
        pool_store.validate_against(pool)
        query_store = load_doc_vectors(config.query_vectors_path)

    def component_run(name: str, query_ids, depth: int) -> Run:
        if name == "bm25":
            return bm25_run(index, pipeline, queries, query_ids, bm25_params, depth)
        if name == "w2v-cent":
            return centroid_run(cent_store, pipeline, word_vectors, queries,
                                query_ids, depth)
        if name == "doc-vectors":
            return doc_vectors_run(pool_store, query_store, query_ids, depth)
        raise ValueError(f"unknown component {name!r}")

    need_train = config.rerank_model != "none"
    split_ids = {"test": splits.test_ids}
    if need_train:
        split_ids["train"] = splits.train_ids
        split_ids["dev"] = splits.dev_ids
    elif config.fusion_tune or config.datefilter_tune:
        split_ids["dev"] = splits.dev_ids

    alpha = config.fusion_alpha
    prefetch: dict[str, Run] = {}

    def prefetch_stage():
        nonlocal alpha
        if config.prefetch_mode == "ensemble":
            comp_a, comp_b = config.fusion_components
            if config.fusion_tune:
                dev_a = component_run(comp_a, splits.dev_ids, deep)
                dev_b = component_run(comp_b, splits.dev_ids, deep)
                alpha, grid = tune_alpha(dev_a, dev_b, qrels,
                                         config.fusion_grid, config.k)
                write_alpha_grid_csv(grid, outdir / "alpha_grid.csv", comment=tag)
                (outdir / "fusion_alpha.json").write_text(json.dumps({"alpha": alpha}))
            for split, ids in split_ids.items():
                run_a = component_run(comp_a, ids, 2 * deep)
                run_b = component_run(comp_b, ids, 2 * deep)
                fused = Run()
                for query_id in run_a:
                    fused[query_id] = fuse(normalize_scores(run_a[query_id]),
                                           normalize_scores(run_b[query_id]),
                                           alpha, deep)
                prefetch[split] = fused
        else:
            for split, ids in split_ids.items():
                prefetch[split] = component_run(config.prefetch_mode, ids, deep)
        for split, run in prefetch.items():
            write_run(run, outdir / f"prefetch_{split}.tsv", comment=tag)

    prefetch_outputs = [outdir / f"prefetch_{s}.tsv" for s in split_ids]
    if config.prefetch_mode == "ensemble" and config.fusion_tune:
        prefetch_outputs.append(outdir / "fusion_alpha.json")
    stages.run("prefetch", prefetch_outputs, prefetch_stage)
    if not prefetch:
        for split in split_ids:
            prefetch[split] = read_run(outdir / f"prefetch_{split}.tsv")
        if config.prefetch_mode == "ensemble" and config.fusion_tune:
            alpha = json.loads((outdir / "fusion_alpha.json").read_text())["alpha"]

    window = None
    if config.datefilter_years is not None or config.datefilter_tune:
        years = config.datefilter_years
        if config.datefilter_tune:
            years = choose_window(prefetch["dev"], qrels,
                                  queries, pool, config.datefilter_grid,
                                  config.datefilter_mode, k=config.eval_k)
            (outdir / "datefilter_years.json").write_text(json.dumps({"years": years}))
        window = DateWindow(years, config.datefilter_mode)

    def candidates_for(split: str) -> Run:
        """Top-k candidate lists, with pre-filter refill from the deep list."""
        run = prefetch[split]
        if window is not None and window.mode == "pre":
            return filter_run(run, window, queries, pool, k=config.k)
        return run.truncated(config.k)

    hist_path = outdir / "year_hist.csv"
    stages.run("year-hist", [hist_path],
               lambda: write_year_hist_csv(
                   year_diff_histogram(qrels.restrict(splits.dev_ids
                                                      if "dev" in split_ids
                                                      else splits.test_ids),
                                       queries, pool),
                   hist_path, comment=tag))

    rk_path = outdir / "rk_curve.csv"
    stages.run("rk-curve", [rk_path],
               lambda: write_rk_curve_csv(
                   emit_rk_curve(prefetch["test"], qrels.restrict(splits.test_ids),
                                 deep),
                   rk_path, comment=tag))

    eval_paths: list[Path] = []
    summary_path = None
    if need_train:
        hp = (Hyperparams.from_file(config.rerank_hyperparams_path)
              if config.rerank_hyperparams_path else Hyperparams())
        if config.rerank_embeddings == "word":
            provider = TypeEmbeddings(word_vectors)
        else:
            provider = load_token_vectors(config.token_vectors_path)
        store = FeatureStore(config.rerank_model, provider, pipeline,
                             queries, pool, hp)
        train_cands = candidates_for("train")
        dev_cands = candidates_for("dev")
        test_cands = candidates_for("test")
        reports = []
        for seed in config.rerank_seeds:
            ck_path = outdir / f"checkpoint_seed{seed}.bin"
            log_path = outdir / f"training_log_seed{seed}.csv"
            rr_path = outdir / f"reranked_test_seed{seed}.tsv"
            ev_path = outdir / f"eval_test_seed{seed}.csv"

            def train_stage(seed=seed, ck=ck_path, lg=log_path, rr=rr_path,
                            ev=ev_path):
                result = train_model(config.rerank_model, splits.train_ids,
                                     splits.dev_ids, qrels,
                                     {**train_cands, **dev_cands},
                                     store, replace(hp, seed=seed))
                save_checkpoint(result, ck)
                write_training_log(result.log_rows, lg, comment=tag)
                reranked = result.reranker(store).rerank_run(test_cands)
                if window is not None and window.mode == "post":
                    reranked = filter_run(reranked, window, queries, pool)
                write_run(reranked, rr, comment=tag)
                write_eval_csv(evaluate_run(reranked,
                                            qrels.restrict(splits.test_ids),
                                            k=config.eval_k),
                               ev, comment=tag)

            stages.run(f"train-seed{seed}", [ck_path, log_path, rr_path, ev_path],
                       train_stage)
            eval_paths.append(ev_path)
            reports.append(evaluate_run(read_run(rr_path),
                                        qrels.restrict(splits.test_ids),
                                        k=config.eval_k))
        if len(reports) > 1:
            summary_path = outdir / "eval_summary.csv"
            write_summary_csv(aggregate_runs(reports), summary_path, comment=tag)
    else:
        final = candidates_for("test")
        if window is not None and window.mode == "post":
            final = filter_run(final, window, queries, pool)
        ev_path = outdir / "eval_test.csv"

        def eval_stage():
            write_run(final, outdir / "final_test.tsv", comment=tag)
            write_eval_csv(evaluate_run(final, qrels.restrict(splits.test_ids),
                                        k=config.eval_k), ev_path, comment=tag)

        stages.run("evaluate", [ev_path, outdir / "final_test.tsv"], eval_stage)
        eval_paths.append(ev_path)

    manifest = {
        "config": config.raw,
        "resources": resources,
        "version": __version__,
        "manifest_hash": manifest_hash,
        "bm25_params": {"k1": bm25_params.k1, "b": bm25_params.b}
        if config.needs_bm25 else None,
        "fusion_alpha": alpha,
        "timings": stages.timings,
    }
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2,
                                                     sort_keys=True))
    return ExperimentResult(outdir, manifest_hash, eval_paths, summary_path)
