import math

import numpy as np
import pytest

from regir.dense import WordVectors
from regir.rerank import (DrmmModel, PacrrConfig, PacrrModel,
                          TypeEmbeddings, build_histogram, drmm_score,
                          load_token_vectors, pacrr_score, sim_matrix)
from regir.rerank.features import (bin_similarities, dedup_terms,
                                   drmm_features, pacrr_features, softmax)


def wv_from(mapping):
    dim = len(next(iter(mapping.values())))
    return WordVectors({t: np.asarray(v, dtype=np.float64)
                        for t, v in mapping.items()}, dim)


def angle_wv(angles: dict[str, float]):
    """Terms as 2-d unit vectors; cosine between terms is cos(delta angle)."""
    return wv_from({t: [math.cos(a), math.sin(a)] for t, a in angles.items()})


class FixedIdf:
    def __init__(self, values, default=1.0):
        self.values, self.default = values, default

    def idf(self, term):
        return self.values.get(term, self.default)


# --- similarity matrix ---

def test_sim_matrix_identical_terms_pinned_to_one():
    provider = TypeEmbeddings(angle_wv({"a": 0.1, "b": 1.3}))
    qu, qm, qk = provider.rows("", ["a"])
    du, dm, dk = provider.rows("", ["b", "a", "a"])
    S = sim_matrix(qu, qm, qk, du, dm, dk)
    assert S[0, 1] == 1.0 and S[0, 2] == 1.0
    assert S[0, 0] == pytest.approx(math.cos(1.2))
    assert S[0, 0] != 1.0


def test_sim_matrix_oov_rows_and_cols_zero():
    provider = TypeEmbeddings(angle_wv({"a": 0.0}))
    qu, qm, qk = provider.rows("", ["a", "miss"])
    du, dm, dk = provider.rows("", ["miss", "a"])
    S = sim_matrix(qu, qm, qk, du, dm, dk)
    assert S[1].tolist() == [0.0, 0.0]
    assert S[:, 0].tolist() == [0.0, 0.0]
    assert S[0, 1] == 1.0


def test_sim_matrix_clipped_to_unit_interval():
    rng = np.random.default_rng(0)
    provider = TypeEmbeddings(wv_from({f"t{i}": rng.normal(size=5).tolist()
                                       for i in range(20)}))
    terms = [f"t{i}" for i in range(20)]
    u, m, k = provider.rows("", terms)
    S = sim_matrix(u, m, k, u, m, k)
    assert S.min() >= -1.0 and S.max() <= 1.0
    assert np.all(np.diag(S) == 1.0)


def test_zero_norm_word_vector_is_oov(caplog):
    with caplog.at_level("WARNING"):
        provider = TypeEmbeddings(wv_from({"a": [0.0, 0.0], "b": [1.0, 0.0]}))
    _, mask, _ = provider.rows("", ["a", "b"])
    assert mask.tolist() == [False, True]


# --- token-level provider ---

def test_token_embeddings_positional(tmp_path):
    path = tmp_path / "tok.txt"
    path.write_text("d1 0 1.0 0.0\nd1 1 0.0 2.0\nq1 0 1.0 0.0\n")
    provider = load_token_vectors(path)
    assert provider.dedup is False
    units, mask, keys = provider.rows("d1", ["tax", "tax"])
    assert keys is None
    assert np.allclose(units[1], [0.0, 1.0])  # normalized
    # identical surface forms do NOT get the hard 1.0 without identity keys
    qu, qm, qk = provider.rows("q1", ["tax"])
    S = sim_matrix(qu, qm, qk, units, mask, keys)
    assert S[0, 0] == pytest.approx(1.0)
    assert S[0, 1] == pytest.approx(0.0)


def test_token_embeddings_length_mismatch(tmp_path):
    path = tmp_path / "tok.txt"
    path.write_text("d1 0 1.0 0.0\n")
    provider = load_token_vectors(path)
    with pytest.raises(ValueError, match="positions"):
        provider.rows("d1", ["tax", "levy"])
    with pytest.raises(KeyError):
        provider.rows("ghost", ["tax"])


def test_load_token_vectors_rejects_gaps_and_dups(tmp_path):
    gap = tmp_path / "gap.txt"
    gap.write_text("d1 0 1.0\nd1 2 1.0\n")
    with pytest.raises(ValueError, match="gap-free"):
        load_token_vectors(gap)
    dup = tmp_path / "dup.txt"
    dup.write_text("d1 0 1.0\nd1 0 2.0\n")
    with pytest.raises(ValueError, match="duplicate"):
        load_token_vectors(dup)


# --- histograms ---

def test_bin_similarities_hand_case():
    hist = bin_similarities(np.array([0.0, 0.5, 0.5]), bins=5)
    assert np.allclose(hist, np.log1p([0, 0, 1, 2, 0, 0]))


def test_bin_similarities_exact_match_reserved_bin():
    hist = bin_similarities(np.array([1.0]), bins=5)
    want = np.zeros(6)
    want[5] = math.log(2)
    assert np.allclose(hist, want)
    # a near-1 similarity lands in the last regular bin instead
    near = bin_similarities(np.array([0.999999]), bins=5)
    assert near[4] == pytest.approx(math.log(2)) and near[5] == 0.0


def test_bin_similarities_minus_one_in_first_bin():
    hist = bin_similarities(np.array([-1.0]), bins=5)
    assert hist[0] == pytest.approx(math.log(2))
    assert hist[1:].sum() == 0.0


def test_build_histogram_exact_match_doc():
    wv = angle_wv({"tax": 0.3})
    hist = build_histogram("tax", ["tax"], wv, bins=30)
    assert hist.shape == (31,)
    assert hist[30] == pytest.approx(math.log(2))
    assert np.count_nonzero(hist) == 1


def test_build_histogram_oov_term_zero():
    wv = angle_wv({"tax": 0.0})
    assert np.all(build_histogram("ghost", ["tax"], wv, bins=10) == 0.0)


def test_drmm_features_shapes_and_oov_rows():
    provider = TypeEmbeddings(angle_wv({"a": 0.0, "b": 0.9}))
    idf = FixedIdf({"a": 2.0, "ghost": 0.5})
    hists, idf_vec = drmm_features(["a", "ghost"], "", ["b", "a"], "",
                                   provider, idf, bins=4)
    assert hists.shape == (2, 5)
    assert np.all(hists[1] == 0.0)
    assert idf_vec.tolist() == [2.0, 0.5]
    with pytest.raises(ValueError):
        drmm_features([], "", ["b"], "", provider, idf, bins=4)


# --- DRMM forward ---

def drmm_oracle(params, hists, idf):
    """Straight-line reimplementation with python loops."""
    w1, b1 = params["W1"], params["b1"]
    w2, b2 = params["W2"], params["b2"]
    outs = []
    for row in hists:
        z = [math.tanh(sum(w1[h][j] * row[j] for j in range(len(row))) + b1[h])
             for h in range(len(b1))]
        outs.append(sum(z[h] * w2[h] for h in range(len(b1))) + b2[0])
    logits = [params["w_g"][0] * v for v in idf]
    top = max(logits)
    exps = [math.exp(l - top) for l in logits]
    total = sum(exps)
    return sum(e / total * o for e, o in zip(exps, outs))


@pytest.mark.parametrize("seed", range(5))
def test_drmm_forward_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    bins, hidden, terms = 6, 4, 5
    model = DrmmModel.init(rng, bins=bins, hidden=hidden)
    model.params["w_g"] = rng.normal(size=1)
    hists = rng.uniform(0, 2, size=(terms, bins + 1))
    idf = rng.uniform(0, 3, size=terms)
    s_r, _ = model.score((hists, idf))
    assert s_r == pytest.approx(drmm_oracle(model.params, hists, idf),
                                abs=1e-10)


def test_drmm_single_term_gate_is_identity():
    rng = np.random.default_rng(1)
    model = DrmmModel.init(rng, bins=4, hidden=3)
    hists = rng.uniform(0, 1, size=(1, 5))
    s_r, cache = model.score((hists, np.array([2.5])))
    assert cache["gate"].tolist() == [1.0]
    z = np.tanh(hists[0] @ model.params["W1"].T + model.params["b1"])
    assert s_r == pytest.approx(float(z @ model.params["W2"]
                                      + model.params["b2"][0]))


def test_drmm_score_doc_order_invariant():
    provider = TypeEmbeddings(angle_wv({"a": 0.0, "b": 0.7, "c": 1.9}))
    idf = FixedIdf({})
    model = DrmmModel.init(np.random.default_rng(2), bins=8, hidden=3)
    s1 = drmm_score(["a", "b"], ["a", "b", "c", "c"], model, provider, idf)
    s2 = drmm_score(["a", "b"], ["c", "a", "c", "b"], model, provider, idf)
    assert s1 == pytest.approx(s2, abs=1e-12)


def test_drmm_score_query_dedup():
    provider = TypeEmbeddings(angle_wv({"a": 0.0, "b": 0.7}))
    idf = FixedIdf({"a": 1.0, "b": 2.0})
    model = DrmmModel.init(np.random.default_rng(3), bins=6, hidden=3)
    once = drmm_score(["a", "b"], ["a", "b"], model, provider, idf)
    dup = drmm_score(["a", "b", "a", "a"], ["a", "b"], model, provider, idf)
    assert once == pytest.approx(dup, abs=1e-12)


def test_drmm_rejects_wrong_histogram_width():
    model = DrmmModel.init(np.random.default_rng(0), bins=4, hidden=2)
    with pytest.raises(ValueError):
        model.score((np.zeros((2, 9)), np.zeros(2)))


# --- DRMM gradients ---

def finite_diff(score_fn, params, h=1e-5):
    grads = {}
    for name, arr in params.items():
        g = np.zeros_like(arr)
        flat = arr.ravel()
        for j in range(flat.size):
            keep = flat[j]
            flat[j] = keep + h
            up = score_fn()
            flat[j] = keep - h
            down = score_fn()
            flat[j] = keep
            g.ravel()[j] = (up - down) / (2 * h)
        grads[name] = g
    return grads


def assert_grads_close(analytic, numeric, rtol=1e-4):
    for name in numeric:
        a, n = analytic[name], numeric[name]
        denom = np.maximum(np.abs(n), 1e-6)
        rel = np.abs(a - n) / denom
        assert rel.max() < rtol, f"{name}: max rel err {rel.max()}"


@pytest.mark.parametrize("seed", range(3))
def test_drmm_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(100 + seed)
    model = DrmmModel.init(rng, bins=5, hidden=3)
    model.params["w_g"] = rng.normal(size=1)
    hists = rng.uniform(0, 2, size=(4, 6))
    idf = rng.uniform(0.2, 3, size=4)
    s_r, cache = model.score((hists, idf))
    analytic = model.backward(cache, 1.0)
    numeric = finite_diff(lambda: model.score((hists, idf))[0], model.params)
    assert_grads_close(analytic, numeric)


# --- PACRR features ---

def test_pacrr_features_truncation_no_padding():
    provider = TypeEmbeddings(angle_wv({c: 0.2 * i for i, c in
                                        enumerate("abcdef")}))
    idf = FixedIdf({c: float(i) for i, c in enumerate("abcdef")})
    S, idf_col = pacrr_features(list("abcde"), "", list("fedcba"), "",
                                provider, idf, q_len=3, d_len=4)
    assert S.shape == (3, 4)
    assert idf_col.shape == (3,)
    assert idf_col.sum() == pytest.approx(1.0)
    assert np.allclose(idf_col, softmax(np.array([0.0, 1.0, 2.0])))
    with pytest.raises(ValueError):
        pacrr_features([], "", ["a"], "", provider, idf, 3, 4)
    with pytest.raises(ValueError):
        pacrr_features(["a"], "", [], "", provider, idf, 3, 4)


def test_pacrr_config_validation():
    with pytest.raises(ValueError):
        PacrrConfig(kernel_sizes=(1,))
    with pytest.raises(ValueError):
        PacrrConfig(kmax=0)
    cfg = PacrrConfig(kernel_sizes=(2, 3), kmax=2)
    assert cfg.input_dim == (1 + 2) * 2 + 1


# --- PACRR forward ---

def pacrr_oracle(params, config, S, idf_col):
    """Straight-line reimplementation: explicit loops, no numpy tricks."""
    t_len, d_len = S.shape
    k = config.kmax

    def row_kmax(row):
        order = sorted(range(len(row)), key=lambda j: (-row[j], j))[:k]
        vals = [row[j] for j in order]
        return vals + [0.0] * (k - len(vals))

    views = [[row_kmax(S[t]) for t in range(t_len)]]
    for n in config.kernel_sizes:
        pad = (n - 1) // 2
        padded = [[0.0] * (d_len + n - 1) for _ in range(t_len + n - 1)]
        for t in range(t_len):
            for d in range(d_len):
                padded[pad + t][pad + d] = S[t, d]
        pooled = []
        for t in range(t_len):
            row = []
            for d in range(d_len):
                best = -math.inf
                for f in range(config.filters):
                    acc = params[f"c{n}"][f]
                    for a in range(n):
                        for b in range(n):
                            acc += params[f"K{n}"][f, a, b] * padded[t + a][d + b]
                    best = max(best, acc)
                row.append(best)
            pooled.append(row)
        views.append([row_kmax(row) for row in pooled])

    h = c = 0.0
    for t in range(t_len):
        x = [v for view in views for v in view[t]] + [idf_col[t]]
        a = [sum(params["lstm_W"][g][j] * x[j] for j in range(len(x)))
             + params["lstm_U"][g] * h + params["lstm_b"][g] for g in range(4)]
        gate_i = 1.0 / (1.0 + math.exp(-a[0]))
        gate_f = 1.0 / (1.0 + math.exp(-a[1]))
        gate_o = 1.0 / (1.0 + math.exp(-a[2]))
        cand = math.tanh(a[3])
        c = gate_f * c + gate_i * cand
        h = gate_o * math.tanh(c)
    return h


@pytest.mark.parametrize("seed", range(5))
def test_pacrr_forward_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    config = PacrrConfig(q_len=8, d_len=16, kernel_sizes=(2, 3), filters=3,
                         kmax=2)
    model = PacrrModel.init(rng, config)
    model.params["c2"] = rng.normal(0, 0.05, size=3)
    model.params["c3"] = rng.normal(0, 0.05, size=3)
    S = rng.uniform(-0.9, 0.9, size=(5, 9))
    idf_col = softmax(rng.uniform(0, 2, size=5))
    s_r, _ = model.score((S, idf_col))
    assert s_r == pytest.approx(pacrr_oracle(model.params, config, S, idf_col),
                                abs=1e-10)


def test_pacrr_zero_matrix_scores_from_idf_alone():
    rng = np.random.default_rng(7)
    config = PacrrConfig(kernel_sizes=(2,), filters=2, kmax=2)
    model = PacrrModel.init(rng, config)  # conv biases init to zero
    idf_col = softmax(np.array([1.0, 0.3, 0.3]))
    S = np.zeros((3, 6))
    s_r, cache = model.score((S, idf_col))
    # every similarity view is zero, so the recurrence sees only the idf column
    assert np.allclose(cache["x"][:, :-1], 0.0)
    assert cache["x"][:, -1].tolist() == idf_col.tolist()
    assert s_r == pytest.approx(pacrr_oracle(model.params, config, S, idf_col),
                                abs=1e-12)


def test_pacrr_kmax_view_column_permutation_invariant():
    rng = np.random.default_rng(8)
    from regir.rerank.pacrr import _row_kmax
    S = rng.uniform(-1, 1, size=(4, 10))
    perm = rng.permutation(10)
    vals, _ = _row_kmax(S, 3)
    vals_p, _ = _row_kmax(S[:, perm], 3)
    assert np.allclose(vals, vals_p)


def test_pacrr_kmax_pads_short_rows():
    from regir.rerank.pacrr import _row_kmax
    vals, idx = _row_kmax(np.array([[0.5, 0.2]]), 4)
    assert vals.tolist() == [[0.5, 0.2, 0.0, 0.0]]
    assert idx.tolist() == [[0, 1, -1, -1]]


def test_pacrr_hand_traced_conv():
    # single 2x2 kernel of ones, zero bias, k=1: same-padded conv at (0,0)
    # covers S[0:2, 0:2] so the top-left output is the sum of that block
    config = PacrrConfig(kernel_sizes=(2,), filters=1, kmax=1)
    model = PacrrModel.init(np.random.default_rng(0), config)
    model.params["K2"] = np.ones((1, 2, 2))
    model.params["c2"] = np.zeros(1)
    S = np.array([[1.0, 2.0], [3.0, 4.0]])
    _, cache = model.score((S, softmax(np.zeros(2))))
    # conv view sits in column index kmax..2*kmax of the concatenated x
    conv_vals = cache["x"][:, 1]
    assert conv_vals[0] == pytest.approx(10.0)  # 1+2+3+4
    assert conv_vals[1] == pytest.approx(7.0)   # 3+4 (bottom pad row is zero)


# --- PACRR gradients ---

@pytest.mark.parametrize("seed", range(3))
def test_pacrr_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(200 + seed)
    config = PacrrConfig(q_len=8, d_len=16, kernel_sizes=(2, 3), filters=2,
                         kmax=2)
    model = PacrrModel.init(rng, config)
    S = rng.uniform(-0.9, 0.9, size=(4, 7))
    idf_col = softmax(rng.uniform(0, 2, size=4))
    _, cache = model.score((S, idf_col))
    analytic = model.backward(cache, 1.0)
    numeric = finite_diff(lambda: model.score((S, idf_col))[0], model.params)
    assert_grads_close(analytic, numeric)


def test_pacrr_score_end_to_end():
    provider = TypeEmbeddings(angle_wv({"a": 0.0, "b": 0.5, "c": 1.1}))
    idf = FixedIdf({"a": 1.0, "b": 2.0, "c": 0.5})
    config = PacrrConfig(q_len=4, d_len=8, kernel_sizes=(2,), filters=2, kmax=2)
    model = PacrrModel.init(np.random.default_rng(5), config)
    value = pacrr_score(["a", "b"], ["c", "a", "b", "c"], model, provider, idf)
    assert math.isfinite(value)
    again = pacrr_score(["a", "b"], ["c", "a", "b", "c"], model, provider, idf)
    assert value == again


def test_dedup_terms_keeps_first_occurrence_order():
    assert dedup_terms(["b", "a", "b", "c", "a"]) == ["b", "a", "c"]
