"""Pairwise hinge training of the neural matchers and re-ranking proper.

Each candidate document's final relevance is
    rel(q, d) = w_r * s_r + w_p * s_p
where s_r is the matcher's score and s_p the min-max normalized pre-fetcher
score; w_r and w_p train jointly with the matcher under

    loss = max(0, 1 - rel(q, d+) + rel(q, d-))

with Adam updates, early stopping on dev R@20, and a single RNG seed driving
sampling, shuffling and initialization. Training is single-threaded on
purpose: a fixed seed must give a bit-identical loss curve.
"""

from __future__ import annotations

import copy
import logging
import pickle
import random
from dataclasses import dataclass, field, replace

import numpy as np

from ..fusion import normalize_scores
from ..metrics import recall_at_k
from ..ranking import RankedList, Run, sort_scored
from .drmm import DrmmModel
from .features import dedup_terms, drmm_features, pacrr_features
from .pacrr import PacrrConfig, PacrrModel

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "regir-rerank-checkpoint"
CHECKPOINT_VERSION = 1


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class Hyperparams:
    lr: float = 1e-3
    batch: int = 32
    patience: int = 5
    max_epochs: int = 100
    negatives: int = 4
    B: int = 30
    hidden: int = 5
    kmax: int = 2
    kernel_sizes: tuple[int, ...] = (2, 3)
    filters: int = 16
    q_len: int = 256
    d_len: int = 1024
    seed: int = 0

    @classmethod
    def from_file(cls, path) -> "Hyperparams":
        """Flat key=value text; kernel_sizes is comma-separated."""
        values: dict = {}
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}: line {line_no}: expected key=value")
                key, _, raw = line.partition("=")
                key, raw = key.strip(), raw.strip()
                if key not in cls.__dataclass_fields__:
                    raise ValueError(f"{path}: line {line_no}: unknown "
                                     f"hyperparameter {key!r}")
                if key == "kernel_sizes":
                    values[key] = tuple(int(x) for x in raw.split(",") if x)
                elif key == "lr":
                    values[key] = float(raw)
                else:
                    values[key] = int(raw)
        return cls(**values)

    def as_dict(self) -> dict:
        return {f: getattr(self, f) for f in self.__dataclass_fields__}

    def pacrr_config(self) -> PacrrConfig:
        return PacrrConfig(q_len=self.q_len, d_len=self.d_len,
                           kernel_sizes=self.kernel_sizes,
                           filters=self.filters, kmax=self.kmax)


@dataclass(frozen=True)
class TrainTriple:
    query_id: str
    pos_doc_id: str
    neg_doc_id: str


def hinge_loss(rel_pos: float, rel_neg: float) -> float:
    """Zero exactly when the positive out-scores the negative by the full
    unit margin."""
    return max(0.0, 1.0 - rel_pos + rel_neg)


def rel_score(s_r: float, s_p: float, w_r: float, w_p: float) -> float:
    return w_r * s_r + w_p * s_p


def sample_triples(query_ids, qrels, run: Run, negatives: int,
                   rng: random.Random) -> tuple[list[TrainTriple], int]:
    """One (positive, negative) pair set per relevant document found in the
    pre-fetched list; negatives drawn uniformly without replacement from the
    non-relevant entries. Returns the triples and the count of relevant
    documents the pre-fetcher missed (those can never be trained on)."""
    if negatives < 1:
        raise ValueError("negatives must be >= 1")
    triples: list[TrainTriple] = []
    skipped = 0
    for query_id in query_ids:
        relevant = qrels.relevant(query_id)
        if query_id not in run:
            raise KeyError(f"no pre-fetched list for query {query_id!r}")
        ids = run[query_id].doc_ids
        positives = [d for d in ids if d in relevant]
        negs = [d for d in ids if d not in relevant]
        skipped += len(relevant) - len(positives)
        if not positives:
            log.warning("query %s: no relevant document in the pre-fetched "
                        "top-%d; skipped", query_id, len(ids))
            continue
        if not negs:
            continue
        for pos in positives:
            for neg in rng.sample(negs, min(negatives, len(negs))):
                triples.append(TrainTriple(query_id, pos, neg))
    return triples, skipped


class Adam:
    """Bias-corrected adaptive-moment updates, applied in place."""

    def __init__(self, params: dict[str, np.ndarray], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for key, g in grads.items():
            self.m[key] = b1 * self.m[key] + (1 - b1) * g
            self.v[key] = b2 * self.v[key] + (1 - b2) * g * g
            m_hat = self.m[key] / (1 - b1 ** self.t)
            v_hat = self.v[key] / (1 - b2 ** self.t)
            self.params[key] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class FeatureStore:
    """Caches denoised token lists and per-(query, document) matcher features;
    none of them depend on trainable parameters, so they are computed once."""

    def __init__(self, kind: str, provider, pipeline, query_corpus, pool_corpus,
                 hp: Hyperparams):
        if kind not in ("drmm", "pacrr"):
            raise ValueError(f"unknown matcher kind {kind!r}")
        self.kind = kind
        self.provider = provider
        self.pipeline = pipeline
        self.query_corpus = query_corpus
        self.pool_corpus = pool_corpus
        self.hp = hp
        self._q_tokens: dict[str, list[str]] = {}
        self._d_tokens: dict[str, list[str]] = {}
        self._feats: dict[tuple[str, str], object] = {}

    def query_tokens(self, query_id: str) -> list[str]:
        if query_id not in self._q_tokens:
            tokens = self.pipeline(self.query_corpus.get(query_id).text)
            if self.kind == "drmm" and self.provider.dedup:
                tokens = dedup_terms(tokens)
            self._q_tokens[query_id] = tokens
        return self._q_tokens[query_id]

    def doc_tokens(self, doc_id: str) -> list[str]:
        if doc_id not in self._d_tokens:
            self._d_tokens[doc_id] = self.pipeline(self.pool_corpus.get(doc_id).text)
        return self._d_tokens[doc_id]

    def features(self, query_id: str, doc_id: str):
        key = (query_id, doc_id)
        if key not in self._feats:
            idf_table = self.pipeline.idf_table
            if self.kind == "drmm":
                feats = drmm_features(self.query_tokens(query_id), query_id,
                                      self.doc_tokens(doc_id), doc_id,
                                      self.provider, idf_table, self.hp.B)
            else:
                feats = pacrr_features(self.query_tokens(query_id), query_id,
                                       self.doc_tokens(doc_id), doc_id,
                                       self.provider, idf_table,
                                       self.hp.q_len, self.hp.d_len)
            self._feats[key] = feats
        return self._feats[key]


def init_model(kind: str, hp: Hyperparams, rng: np.random.Generator):
    if kind == "drmm":
        return DrmmModel.init(rng, bins=hp.B, hidden=hp.hidden)
    if kind == "pacrr":
        return PacrrModel.init(rng, hp.pacrr_config())
    raise ValueError(f"unknown matcher kind {kind!r}")


class Reranker:
    """A trained matcher plus fusion weights, bound to a feature store."""

    def __init__(self, model, w_r: float, w_p: float, store: FeatureStore):
        self.model = model
        self.w_r = w_r
        self.w_p = w_p
        self.store = store

    def rerank_list(self, query_id: str, ranking: RankedList,
                    k: int | None = None) -> RankedList:
        """Reorder the pre-fetched candidates by rel(q, d); entries beyond k
        are dropped before scoring when k is given."""
        if not ranking:
            return ranking
        if k is not None:
            ranking = ranking.truncated(k)
        norm = dict(normalize_scores(ranking))
        rescored = []
        for doc_id in ranking.doc_ids:
            s_r, _ = self.model.score(self.store.features(query_id, doc_id))
            rescored.append((doc_id, rel_score(s_r, norm[doc_id], self.w_r, self.w_p)))
        return RankedList(sort_scored(rescored), presorted=True)

    def rerank_run(self, run: Run, k: int | None = None) -> Run:
        out = Run()
        for query_id in run:
            out[query_id] = self.rerank_list(query_id, run[query_id], k)
        return out


def _dev_recall(params_w, model, store: FeatureStore, dev_ids, qrels, run: Run,
                k: int) -> float:
    reranker = Reranker(model, float(params_w["w_r"][0]), float(params_w["w_p"][0]),
                        store)
    total, count = 0.0, 0
    for query_id in dev_ids:
        relevant = qrels.relevant(query_id)
        if not relevant or query_id not in run:
            continue
        reranked = reranker.rerank_list(query_id, run[query_id])
        total += recall_at_k(reranked, relevant, k)
        count += 1
    if count == 0:
        raise ValueError("no dev query with relevant documents")
    return total / count


@dataclass
class TrainResult:
    model: object
    w_r: float
    w_p: float
    hp: Hyperparams
    log_rows: list[tuple] = field(default_factory=list)
    best_epoch: int = 0
    best_dev_r20: float = 0.0
    skipped_positives: int = 0

    def reranker(self, store: FeatureStore) -> Reranker:
        return Reranker(self.model, self.w_r, self.w_p, store)


def _check_finite(value: float, params: dict, epoch: int, step: int) -> None:
    bad = not np.isfinite(value)
    bad_params = [k for k, v in params.items() if not np.all(np.isfinite(v))]
    if bad or bad_params:
        norms = {k: float(np.linalg.norm(v)) for k, v in params.items()}
        raise TrainingDiverged(
            f"non-finite state at epoch {epoch}, step {step}: "
            f"loss={value!r}, bad params={bad_params}, norms={norms}")


def train_model(kind: str, train_ids, dev_ids, qrels, run: Run,
                store: FeatureStore, hp: Hyperparams, dev_k: int = 20) -> TrainResult:
    """Full training run: sample triples once, then epochs of shuffled
    mini-batches with early stopping on dev R@k. Returns the best-dev
    checkpoint, never the last epoch's weights."""
    rng = random.Random(hp.seed)
    np_rng = np.random.default_rng(hp.seed)
    model = init_model(kind, hp, np_rng)
    fusion = {"w_r": np.array([1.0]), "w_p": np.array([1.0])}
    all_params = {**model.params, **fusion}
    opt = Adam(all_params, hp.lr)

    triples, skipped = sample_triples(train_ids, qrels, run, hp.negatives, rng)
    if not triples:
        raise ValueError("no training triples: no relevant documents inside "
                         "the pre-fetched lists")
    norm_sp = {q: dict(normalize_scores(run[q])) for q in
               {t.query_id for t in triples}}

    best = {"params": copy.deepcopy(all_params), "epoch": 0,
            "dev": _dev_recall(fusion, model, store, dev_ids, qrels, run, dev_k)}
    log_rows: list[tuple] = []
    waited = 0
    for epoch in range(1, hp.max_epochs + 1):
        rng.shuffle(triples)
        epoch_loss = 0.0
        for step in range(0, len(triples), hp.batch):
            batch = triples[step:step + hp.batch]
            grads = {k: np.zeros_like(v) for k, v in all_params.items()}
            w_r, w_p = float(fusion["w_r"][0]), float(fusion["w_p"][0])
            for triple in batch:
                sp = norm_sp[triple.query_id]
                f_pos = store.features(triple.query_id, triple.pos_doc_id)
                f_neg = store.features(triple.query_id, triple.neg_doc_id)
                sr_pos, cache_pos = model.score(f_pos)
                sr_neg, cache_neg = model.score(f_neg)
                sp_pos, sp_neg = sp[triple.pos_doc_id], sp[triple.neg_doc_id]
                loss = hinge_loss(rel_score(sr_pos, sp_pos, w_r, w_p),
                                  rel_score(sr_neg, sp_neg, w_r, w_p))
                epoch_loss += loss
                if loss <= 0.0:
                    continue
                grads["w_r"] += sr_neg - sr_pos
                grads["w_p"] += sp_neg - sp_pos
                for name, g in model.backward(cache_pos, -w_r).items():
                    grads[name] += g
                for name, g in model.backward(cache_neg, +w_r).items():
                    grads[name] += g
            for key in grads:
                grads[key] /= len(batch)
            opt.step(grads)
            _check_finite(epoch_loss, all_params, epoch, step // hp.batch)
        train_loss = epoch_loss / len(triples)
        dev_r = _dev_recall(fusion, model, store, dev_ids, qrels, run, dev_k)
        log_rows.append((epoch, train_loss, dev_r,
                         float(fusion["w_r"][0]), float(fusion["w_p"][0])))
        if dev_r > best["dev"]:
            best = {"params": copy.deepcopy(all_params), "epoch": epoch, "dev": dev_r}
            waited = 0
        else:
            waited += 1
            if waited >= hp.patience:
                break

    for key, value in best["params"].items():
        all_params[key][...] = value
    return TrainResult(model=model, w_r=float(fusion["w_r"][0]),
                       w_p=float(fusion["w_p"][0]), hp=hp, log_rows=log_rows,
                       best_epoch=best["epoch"], best_dev_r20=best["dev"],
                       skipped_positives=skipped)


def rerank_run(result: TrainResult, run: Run, store: FeatureStore,
               k: int | None = None) -> Run:
    return result.reranker(store).rerank_run(run, k)


def write_training_log(log_rows, path, comment: str = "") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        fh.write("epoch,train_loss,dev_r20,w_r,w_p\n")
        for epoch, loss, dev_r, w_r, w_p in log_rows:
            fh.write(f"{epoch},{loss!r},{dev_r!r},{w_r!r},{w_p!r}\n")


def save_checkpoint(result: TrainResult, path) -> None:
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "kind": result.model.kind,
        "params": result.model.params,
        "w_r": result.w_r,
        "w_p": result.w_p,
        "hyperparams": result.hp.as_dict(),
        "best_epoch": result.best_epoch,
        "best_dev_r20": result.best_dev_r20,
    }
    with open(path, "wb") as fh:
        pickle.dump(payload, fh, protocol=4)


def load_checkpoint(path) -> TrainResult:
    with open(path, "rb") as fh:
        payload = pickle.load(fh)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a re-ranker checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version")
    raw_hp = payload["hyperparams"]
    raw_hp["kernel_sizes"] = tuple(raw_hp["kernel_sizes"])
    hp = Hyperparams(**raw_hp)
    if payload["kind"] == "drmm":
        model = DrmmModel(payload["params"], bins=hp.B)
    elif payload["kind"] == "pacrr":
        model = PacrrModel(payload["params"], hp.pacrr_config())
    else:
        raise ValueError(f"{path}: unknown matcher kind {payload['kind']!r}")
    return TrainResult(model=model, w_r=payload["w_r"], w_p=payload["w_p"],
                       hp=hp, best_epoch=payload.get("best_epoch", 0),
                       best_dev_r20=payload.get("best_dev_r20", 0.0))


def seeded_runs(kind: str, train_ids, dev_ids, qrels, run: Run,
                store: FeatureStore, hp: Hyperparams,
                seeds: list[int], dev_k: int = 20) -> list[TrainResult]:
    """The multi-seed protocol: identical setup, one root seed per run."""
    if not seeds:
        raise ValueError("at least one seed required")
    return [train_model(kind, train_ids, dev_ids, qrels, run, store,
                        replace(hp, seed=s), dev_k) for s in seeds]
