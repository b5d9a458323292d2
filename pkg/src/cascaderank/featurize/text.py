"""Okapi-style text scoring over pin annotations.

Two scorers share the same saturation formula: `bm25` over unigram tokens and
`proximity_bm25` over within-window ordered token pairs, which rewards query
bigrams whose tokens sit close together in the annotations. Corpus statistics
(document frequencies, average lengths, postings for batch scoring) come from
CorpusStats built once per corpus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75
DEFAULT_WINDOW = 3


def idf(n_docs: int, doc_freq: int) -> float:
    """ln((N - df + 0.5) / (df + 0.5) + 1); non-negative for df <= N."""
    return math.log((n_docs - doc_freq + 0.5) / (doc_freq + 0.5) + 1.0)


def window_pairs(tokens, window: int = DEFAULT_WINDOW):
    """Ordered token pairs (tokens[i], tokens[j]) with 0 < j - i <= window."""
    n = len(tokens)
    out = []
    for i in range(n):
        for j in range(i + 1, min(i + window + 1, n)):
            out.append((tokens[i], tokens[j]))
    return out


@dataclass
class CorpusStats:
    """Document frequencies and length statistics over pin annotations."""

    n_docs: int
    avg_len: float
    avg_pair_len: float
    window: int = DEFAULT_WINDOW
    doc_freq: dict = field(default_factory=dict)
    pair_doc_freq: dict = field(default_factory=dict)
    # postings for batch scoring: term -> (pin index array, term frequency array)
    postings: dict = field(default_factory=dict)
    pair_postings: dict = field(default_factory=dict)
    doc_len: np.ndarray | None = None
    pair_doc_len: np.ndarray | None = None


def build_corpus_stats(pins, window: int = DEFAULT_WINDOW) -> CorpusStats:
    if not pins:
        raise DataError("cannot build corpus statistics over an empty pin list")
    n = len(pins)
    doc_freq: dict = {}
    pair_doc_freq: dict = {}
    tok_acc: dict = {}
    pair_acc: dict = {}
    doc_len = np.zeros(n, dtype=np.float64)
    pair_doc_len = np.zeros(n, dtype=np.float64)

    for i, pin in enumerate(pins):
        tokens = pin.annotations
        doc_len[i] = len(tokens)
        counts: dict = {}
        for t in tokens:
            counts[t] = counts.get(t, 0) + 1
        for t, c in counts.items():
            doc_freq[t] = doc_freq.get(t, 0) + 1
            tok_acc.setdefault(t, ([], []))
            tok_acc[t][0].append(i)
            tok_acc[t][1].append(c)
        pairs = window_pairs(tokens, window)
        pair_doc_len[i] = len(pairs)
        pcounts: dict = {}
        for p in pairs:
            pcounts[p] = pcounts.get(p, 0) + 1
        for p, c in pcounts.items():
            pair_doc_freq[p] = pair_doc_freq.get(p, 0) + 1
            pair_acc.setdefault(p, ([], []))
            pair_acc[p][0].append(i)
            pair_acc[p][1].append(c)

    postings = {t: (np.array(ix, dtype=np.int64), np.array(tf, dtype=np.float64)) for t, (ix, tf) in tok_acc.items()}
    pair_postings = {
        p: (np.array(ix, dtype=np.int64), np.array(tf, dtype=np.float64)) for p, (ix, tf) in pair_acc.items()
    }
    return CorpusStats(
        n_docs=n,
        avg_len=float(doc_len.mean()),
        avg_pair_len=float(pair_doc_len.mean()),
        window=window,
        doc_freq=doc_freq,
        pair_doc_freq=pair_doc_freq,
        postings=postings,
        pair_postings=pair_postings,
        doc_len=doc_len,
        pair_doc_len=pair_doc_len,
    )


def _bm25_sum(query_terms, term_counts, doc_len, avg_len, n_docs, doc_freq, k1, b):
    """Shared saturation sum. Duplicated query terms contribute once per
    occurrence, so repeating a token doubles its contribution."""
    if doc_len <= 0 or not query_terms:
        return 0.0
    score = 0.0
    norm = k1 * (1.0 - b + b * doc_len / max(avg_len, 1e-12))
    for term in query_terms:
        tf = term_counts.get(term, 0)
        if tf == 0:
            continue
        score += idf(n_docs, doc_freq.get(term, 0)) * (tf * (k1 + 1.0)) / (tf + norm)
    return score


def bm25(query_tokens, annotations, stats: CorpusStats, k1: float = DEFAULT_K1, b: float = DEFAULT_B) -> float:
    """Unigram relevance of one pin's annotations to the query tokens."""
    counts: dict = {}
    for t in annotations:
        counts[t] = counts.get(t, 0) + 1
    return _bm25_sum(list(query_tokens), counts, len(annotations), stats.avg_len, stats.n_docs, stats.doc_freq, k1, b)


def proximity_bm25(
    query_tokens, annotations, stats: CorpusStats, k1: float = DEFAULT_K1, b: float = DEFAULT_B
) -> float:
    """Same saturation formula over within-window ordered pairs; 0.0 when the
    query has fewer than two tokens."""
    if len(query_tokens) < 2:
        return 0.0
    query_bigrams = [(query_tokens[i], query_tokens[i + 1]) for i in range(len(query_tokens) - 1)]
    doc_pairs = window_pairs(annotations, stats.window)
    counts: dict = {}
    for p in doc_pairs:
        counts[p] = counts.get(p, 0) + 1
    return _bm25_sum(
        query_bigrams, counts, len(doc_pairs), stats.avg_pair_len, stats.n_docs, stats.pair_doc_freq, k1, b
    )


def batch_bm25(query_tokens, stats: CorpusStats, k1: float = DEFAULT_K1, b: float = DEFAULT_B) -> np.ndarray:
    """Vectorized unigram scores for every pin via postings."""
    scores = np.zeros(stats.n_docs, dtype=np.float64)
    if not query_tokens:
        return scores
    norms = k1 * (1.0 - b + b * stats.doc_len / max(stats.avg_len, 1e-12))
    for term in query_tokens:
        hit = stats.postings.get(term)
        if hit is None:
            continue
        ix, tf = hit
        scores[ix] += idf(stats.n_docs, stats.doc_freq[term]) * (tf * (k1 + 1.0)) / (tf + norms[ix])
    return scores


def batch_proximity_bm25(query_tokens, stats: CorpusStats, k1: float = DEFAULT_K1, b: float = DEFAULT_B) -> np.ndarray:
    """Vectorized pair scores for every pin; zeros for sub-bigram queries."""
    scores = np.zeros(stats.n_docs, dtype=np.float64)
    if len(query_tokens) < 2:
        return scores
    norms = k1 * (1.0 - b + b * stats.pair_doc_len / max(stats.avg_pair_len, 1e-12))
    for i in range(len(query_tokens) - 1):
        pair = (query_tokens[i], query_tokens[i + 1])
        hit = stats.pair_postings.get(pair)
        if hit is None:
            continue
        ix, tf = hit
        scores[ix] += idf(stats.n_docs, stats.pair_doc_freq[pair]) * (tf * (k1 + 1.0)) / (tf + norms[ix])
    return scores
