import math
import random

import pytest

from regir.text import (IdfTable, TextPipeline, build_pipeline,
                        load_default_stopwords, load_stopwords, tokenize)

from conftest import VOCAB, random_corpus


# --- tokenize ---

def test_tokenize_drops_digits_and_punctuation():
    assert tokenize("The Batteries Act 2009.") == ["the", "batteries", "act"]


def test_tokenize_empty():
    assert tokenize("") == []


def test_tokenize_hyphen_is_boundary():
    assert tokenize("a-b") == ["a", "b"]


def test_tokenize_slash_citation():
    # all-digit fragments vanish, the alphabetic part survives
    assert tokenize("Directive 2006/66/EC") == ["directive", "ec"]


def test_tokenize_strips_diacritics():
    assert tokenize("café naïve") == ["cafe", "naive"]


def test_tokenize_underscore_is_boundary():
    assert tokenize("foo_bar") == ["foo", "bar"]


def test_tokenize_mixed_alnum_survives():
    # only tokens made solely of digits are removed
    assert tokenize("ec66 2006") == ["ec66"]


def test_tokenize_no_empty_or_spaced_tokens(rng):
    text = " ".join(rng.choice(VOCAB + ["a.b", "x-y", "1984", "§12"])
                    for _ in range(200))
    tokens = tokenize(text)
    assert all(t and " " not in t for t in tokens)
    assert all(t == t.lower() for t in tokens)


# --- idf ---

def test_idf_frozen_values():
    table = IdfTable.from_token_lists([["a", "b"], ["a"]])
    assert table.idf("b") == pytest.approx(math.log(2), abs=1e-12)
    assert table.idf("a") == pytest.approx(math.log(1.2), abs=1e-12)
    # unseen term falls back to the df=0 form
    assert table.idf("zz") == pytest.approx(math.log(6), abs=1e-12)


def test_idf_nonnegative_everywhere(rng):
    corpus = [[rng.choice(VOCAB) for _ in range(rng.randint(1, 30))]
              for _ in range(50)]
    table = IdfTable.from_token_lists(corpus)
    assert all(table.idf(t) >= 0 for t in table.terms)
    assert table.idf("never-seen") > 0


def test_idf_term_in_every_doc_positive():
    table = IdfTable.from_token_lists([["x"], ["x"], ["x"]])
    assert 0 < table.idf("x") == pytest.approx(math.log(0.5 / 3.5 + 1))


def test_idf_empty_collection_rejected():
    with pytest.raises(ValueError):
        IdfTable.from_token_lists([])


def test_stopword_avg_idf_restricted_to_present_words():
    table = IdfTable.from_token_lists([["the", "tax"], ["tax"], ["levy"]])
    # only "the" occurs; "of" must not drag the df=0 idf into the mean
    avg = table.stopword_avg_idf(frozenset({"the", "of"}))
    assert avg == pytest.approx(table.idf("the"))


def test_stopword_avg_idf_no_stopwords_present():
    table = IdfTable.from_token_lists([["tax"], ["levy"]])
    assert table.stopword_avg_idf(frozenset({"the", "of"})) == 0.0


# --- denoise ---

def test_denoise_removes_stopwords(uniform_idf):
    pipeline = TextPipeline(uniform_idf, stopwords=frozenset({"the"}),
                            idf_filter=False)
    assert pipeline.denoise(["the", "tax", "the", "levy"]) == ["tax", "levy"]


def test_denoise_all_stopwords(uniform_idf):
    pipeline = TextPipeline(uniform_idf, stopwords=frozenset({"a", "b"}),
                            idf_filter=False)
    assert pipeline.denoise(["a", "b", "a"]) == []


def test_denoise_idf_threshold_removes_boilerplate():
    # ten docs: "annex" in all ten (low idf), "the" in five (the stopword),
    # "tax" rare. The stopword's idf exceeds the boilerplate idf, so the
    # threshold filter must drop "annex" even though it is not a stopword.
    lists = [["annex", "the", "tax"] if i < 1 else
             (["annex", "the"] if i < 5 else ["annex", "levy"])
             for i in range(10)]
    table = IdfTable.from_token_lists(lists)
    assert table.idf("annex") < table.idf("the")
    pipeline = TextPipeline(table, stopwords=frozenset({"the"}), idf_filter=True)
    assert pipeline.threshold == pytest.approx(table.idf("the"))
    out = pipeline.denoise(["annex", "tax", "annex", "levy"])
    assert out == ["tax", "levy"]


def test_denoise_preserves_order_and_duplicates():
    table = IdfTable.from_token_lists([["tax", "levy"], ["tax"]])
    pipeline = TextPipeline(table, stopwords=frozenset(), idf_filter=False)
    assert pipeline.denoise(["levy", "tax", "levy", "tax"]) == \
        ["levy", "tax", "levy", "tax"]


@pytest.mark.parametrize("seed", range(5))
def test_denoise_idempotent_and_subsequence(seed):
    rng = random.Random(seed)
    corpus = random_corpus(rng, 30)
    pipeline = build_pipeline(corpus)
    for doc_id in list(corpus.ids)[:10]:
        tokens = tokenize(corpus.get(doc_id).text)
        once = pipeline.denoise(tokens)
        assert pipeline.denoise(once) == once
        it = iter(tokens)
        assert all(tok in it for tok in once)  # subsequence check


def test_pipeline_call_is_tokenize_then_denoise(tiny_corpus):
    pipeline = build_pipeline(tiny_corpus)
    text = "The tax, the LEVY; 2007."
    assert pipeline(text) == pipeline.denoise(tokenize(text))


# --- stopword resources ---

def test_default_stopwords_shape():
    words = load_default_stopwords()
    assert 250 <= len(words) <= 400
    assert "the" in words and "of" in words
    assert all(w == w.lower() and w.strip() == w for w in words)


def test_load_stopwords_file(tmp_path):
    path = tmp_path / "sw.txt"
    path.write_text("the\nof\n\nand\n")
    assert load_stopwords(path) == frozenset({"the", "of", "and"})


def test_build_pipeline_threshold_uses_pool(tiny_corpus):
    pipeline = build_pipeline(tiny_corpus)
    present = [w for w in load_default_stopwords()
               if pipeline.idf_table.df(w) > 0]
    if present:
        expected = sum(pipeline.idf_table.idf(w) for w in present) / len(present)
    else:
        expected = 0.0
    assert pipeline.threshold == pytest.approx(expected)
