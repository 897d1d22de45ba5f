"""Evaluation suite: ingredient and verb recall, BLEU-1/4, a
stem-matching METEOR variant, per-step curves, max-future-match scoring,
and Fleiss's kappa for rater agreement."""

import json
import math
import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .corpus import canonical_ingredient, tokenize

# ---------------------------------------------------------------------------
# Porter stemmer
# ---------------------------------------------------------------------------

_VOWELS = "aeiou"


def _is_consonant(word, i):
    ch = word[i]
    if ch in _VOWELS:
        return False
    if ch == "y":
        return i == 0 or not _is_consonant(word, i - 1)
    return True


def _measure(word):
    """Number of VC sequences in the [C](VC)^m[V] form of the word."""
    m = 0
    prev_cons = None
    for i in range(len(word)):
        cons = _is_consonant(word, i)
        if prev_cons is False and cons:
            m += 1
        prev_cons = cons
    return m


def _has_vowel(word):
    return any(not _is_consonant(word, i) for i in range(len(word)))


def _double_consonant(word):
    return (len(word) >= 2 and word[-1] == word[-2]
            and _is_consonant(word, len(word) - 1))


def _cvc(word):
    if len(word) < 3:
        return False
    if not (_is_consonant(word, len(word) - 3)
            and not _is_consonant(word, len(word) - 2)
            and _is_consonant(word, len(word) - 1)):
        return False
    return word[-1] not in "wxy"


_STEP2 = [
    ("ational", "ate"), ("tional", "tion"), ("enci", "ence"), ("anci", "ance"),
    ("izer", "ize"), ("abli", "able"), ("alli", "al"), ("entli", "ent"),
    ("eli", "e"), ("ousli", "ous"), ("ization", "ize"), ("ation", "ate"),
    ("ator", "ate"), ("alism", "al"), ("iveness", "ive"), ("fulness", "ful"),
    ("ousness", "ous"), ("aliti", "al"), ("iviti", "ive"), ("biliti", "ble"),
]
_STEP3 = [
    ("icate", "ic"), ("ative", ""), ("alize", "al"), ("iciti", "ic"),
    ("ical", "ic"), ("ful", ""), ("ness", ""),
]
_STEP4 = [
    "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement",
    "ment", "ent", "ion", "ou", "ism", "ate", "iti", "ous", "ive", "ize",
]


def stem(token):
    """Porter-stemmed form of a lowercase token; non-alphabetic tokens
    pass through unchanged."""
    word = token
    if len(word) <= 2 or not word.isalpha():
        return word

    # step 1a
    if word.endswith("sses"):
        word = word[:-2]
    elif word.endswith("ies"):
        word = word[:-2]
    elif not word.endswith("ss") and word.endswith("s"):
        word = word[:-1]

    # step 1b
    if word.endswith("eed"):
        if _measure(word[:-3]) > 0:
            word = word[:-1]
    else:
        fired = False
        if word.endswith("ed") and _has_vowel(word[:-2]):
            word = word[:-2]
            fired = True
        elif word.endswith("ing") and _has_vowel(word[:-3]):
            word = word[:-3]
            fired = True
        if fired:
            if word.endswith(("at", "bl", "iz")):
                word += "e"
            elif _double_consonant(word) and word[-1] not in "lsz":
                word = word[:-1]
            elif _measure(word) == 1 and _cvc(word):
                word += "e"

    # step 1c
    if word.endswith("y") and _has_vowel(word[:-1]):
        word = word[:-1] + "i"

    # step 2
    for suffix, repl in _STEP2:
        if word.endswith(suffix):
            if _measure(word[:-len(suffix)]) > 0:
                word = word[:-len(suffix)] + repl
            break

    # step 3
    for suffix, repl in _STEP3:
        if word.endswith(suffix):
            if _measure(word[:-len(suffix)]) > 0:
                word = word[:-len(suffix)] + repl
            break

    # step 4
    for suffix in _STEP4:
        if word.endswith(suffix):
            base = word[:-len(suffix)]
            if _measure(base) > 1:
                if suffix == "ion" and not base.endswith(("s", "t")):
                    break
                word = base
            break

    # step 5a
    if word.endswith("e"):
        m = _measure(word[:-1])
        if m > 1 or (m == 1 and not _cvc(word[:-1])):
            word = word[:-1]

    # step 5b
    if _measure(word) > 1 and _double_consonant(word) and word.endswith("l"):
        word = word[:-1]

    return word


# ---------------------------------------------------------------------------
# Sentence scores
# ---------------------------------------------------------------------------

def content_tokens(tokens):
    """Drop punctuation-only tokens before sentence scoring."""
    return [t for t in tokens if any(ch.isalnum() for ch in t)]


def _ngram_counts(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu(pred, refs, n=4):
    """Sentence BLEU in [0, 100]: geometric mean of modified n-gram
    precisions up to order n, times the brevity penalty against the
    closest reference length. No smoothing: a zero higher-order
    precision zeroes the score."""
    if n < 1:
        raise ValueError("bleu: order must be >= 1")
    if not refs or all(len(r) == 0 for r in refs):
        raise ValueError("bleu: needs at least one non-empty reference")
    if len(pred) == 0:
        warnings.warn("bleu: empty prediction scored 0")
        return 0.0

    log_sum = 0.0
    for k in range(1, n + 1):
        pred_counts = _ngram_counts(pred, k)
        max_ref = Counter()
        for ref in refs:
            for gram, count in _ngram_counts(ref, k).items():
                if count > max_ref[gram]:
                    max_ref[gram] = count
        clipped = sum(min(c, max_ref[g]) for g, c in pred_counts.items())
        total = len(pred) - k + 1
        if total <= 0 or clipped == 0:
            return 0.0
        log_sum += math.log(clipped / total)

    c = len(pred)
    r = min((len(ref) for ref in refs), key=lambda L: (abs(L - c), L))
    bp = 1.0 if c >= r else math.exp(1.0 - r / c)
    return 100.0 * bp * math.exp(log_sum / n)


def _align(pred, ref):
    """Two-stage unigram alignment (exact, then stem) as (i, j) pairs.

    Each stage pairs still-unmatched occurrences of equal keys in
    order, which attains the stage's maximum match count and keeps the
    alignment deterministic.
    """
    pairs = []
    pred_used = [False] * len(pred)
    ref_used = [False] * len(ref)
    for key in (lambda t: t, stem):
        ref_slots = {}
        for j, token in enumerate(ref):
            if not ref_used[j]:
                ref_slots.setdefault(key(token), []).append(j)
        for i, token in enumerate(pred):
            if pred_used[i]:
                continue
            slots = ref_slots.get(key(token))
            if slots:
                j = slots.pop(0)
                pairs.append((i, j))
                pred_used[i] = True
                ref_used[j] = True
    return sorted(pairs)


def _chunks(pairs):
    chunks = 0
    prev = None
    for i, j in pairs:
        if prev is None or i != prev[0] + 1 or j != prev[1] + 1:
            chunks += 1
        prev = (i, j)
    return chunks


def meteor_lite(pred, ref):
    """Stem-augmented METEOR in [0, 100]: harmonic mean weighted 9:1
    toward recall, with the fragmentation penalty 0.5 * (chunks/matches)^3.
    Only exact and stem matching stages are applied (no synonym or
    paraphrase resources), so scores are comparable internally only."""
    if len(pred) == 0 or len(ref) == 0:
        return 0.0
    pairs = _align(pred, ref)
    m = len(pairs)
    if m == 0:
        return 0.0
    precision = m / len(pred)
    recall = m / len(ref)
    f_mean = 10.0 * precision * recall / (recall + 9.0 * precision)
    penalty = 0.5 * (_chunks(pairs) / m) ** 3
    return 100.0 * f_mean * (1.0 - penalty)


SENTENCE_METRICS = {
    "bleu1": lambda pred, ref: bleu(pred, [ref], n=1),
    "bleu4": lambda pred, ref: bleu(pred, [ref], n=4),
    "meteor_lite": meteor_lite,
}


# ---------------------------------------------------------------------------
# Per-step curves
# ---------------------------------------------------------------------------

@dataclass
class StepCurve:
    """Grid of (mean score, support) per (context length, absolute step)."""

    metric: str
    _sums: dict = field(default_factory=dict)
    _counts: dict = field(default_factory=dict)

    def add(self, context_len, step, score):
        key = (context_len, step)
        self._sums[key] = self._sums.get(key, 0.0) + score
        self._counts[key] = self._counts.get(key, 0) + 1

    def cells(self):
        for key in sorted(self._counts):
            yield key[0], key[1], self._sums[key] / self._counts[key], self._counts[key]

    def mean(self, context_len, step):
        key = (context_len, step)
        if key not in self._counts:
            return None
        return self._sums[key] / self._counts[key]

    def support(self, context_len, step):
        return self._counts.get((context_len, step), 0)

    def next_step_mean(self):
        """Mean over all horizon-1 cells, support weighted."""
        total = count = 0.0
        for (c, j), s in self._sums.items():
            if j == c + 1:
                total += s
                count += self._counts[(c, j)]
        return total / count if count else 0.0

    def overall_mean(self):
        total = sum(self._sums.values())
        count = sum(self._counts.values())
        return total / count if count else 0.0

    def to_json(self):
        return {
            "metric": self.metric,
            "cells": [
                {"context_len": c, "step": j, "mean": mean, "support": support}
                for c, j, mean, support in self.cells()
            ],
        }


def curves_to_csv(curves):
    """CSV text for external plotting: metric, context_len, step, mean, support."""
    lines = ["metric,context_len,step,mean,support"]
    for curve in curves:
        for c, j, mean, support in curve.cells():
            lines.append(f"{curve.metric},{c},{j},{mean:.6f},{support}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Ingredient and verb recall
# ---------------------------------------------------------------------------

def _head_stem(name):
    tokens = content_tokens(tokenize(canonical_ingredient(name)))
    return stem(tokens[-1]) if tokens else None


def _mentioned(head_stems, token_stems):
    return {h for h in head_stems if h in token_stems}


def ingredient_recall(pred_set, iv, corpus_by_id):
    """Recall of recipe ingredients mentioned in the ground-truth step
    that the prediction also mentions; mention means the ingredient's
    head-token stem appears among the sentence's token stems. Steps
    whose ground truth mentions nothing are skipped."""
    curve = StepCurve(metric="ingredient_recall")
    known = set(iv.names)
    for entry in pred_set:
        record = corpus_by_id.get(entry.recipe_id)
        if record is None:
            continue
        heads = {h for h in (_head_stem(n) for n in record.ingredients
                             if canonical_ingredient(n) in known) if h}
        if not heads:
            continue
        gt_stems = {stem(t) for t in entry.ground_truth_tokens}
        gt_mentions = _mentioned(heads, gt_stems)
        if not gt_mentions:
            continue
        pred_stems = {stem(t) for t in entry.predicted_tokens}
        pred_mentions = _mentioned(heads, pred_stems)
        curve.add(entry.context_len, entry.step_index,
                  len(gt_mentions & pred_mentions) / len(gt_mentions))
    return curve


# Imperative verbs common in instructional text; used as seed stems for
# verb-occurrence tagging since recipes rarely need a full POS model.
IMPERATIVE_VERB_SEEDS = (
    "add", "arrange", "bake", "baste", "beat", "blend", "boil", "bring",
    "broil", "brush", "chill", "chop", "coat", "combine", "cook", "cool",
    "cover", "crumble", "cut", "dice", "dip", "discard", "divide", "drain",
    "drizzle", "drop", "dry", "enjoy", "fill", "flip", "fold", "form",
    "freeze", "fry", "garnish", "grate", "grease", "grill", "heat", "knead",
    "layer", "let", "marinate", "mash", "melt", "microwave", "mince", "mix",
    "peel", "place", "pour", "preheat", "press", "reduce", "refrigerate",
    "remove", "repeat", "return", "rinse", "roast", "roll", "rub", "saute",
    "season", "serve", "set", "shape", "shred", "simmer", "slice", "soak",
    "spoon", "spread", "sprinkle", "steam", "stir", "strain", "stuff",
    "thaw", "toast", "top", "toss", "transfer", "turn", "wash", "whisk",
    "wrap",
)
_SEED_STEMS = frozenset(stem(v) for v in IMPERATIVE_VERB_SEEDS)


@dataclass
class VerbLexicon:
    """Top verb stems by training frequency, plus the full candidate tally."""

    stems: list
    counts: dict

    def __post_init__(self):
        self.stem_set = frozenset(self.stems)

    def __len__(self):
        return len(self.stems)

    def to_json(self):
        return {"stems": self.stems, "counts": self.counts}

    @classmethod
    def from_json(cls, obj):
        return cls(stems=list(obj["stems"]), counts=dict(obj["counts"]))


def build_verb_lexicon(train_corpus, max_size=250):
    """Tally verb occurrences over training steps and keep the most
    frequent stems. A token occurrence counts as a verb when it opens
    the sentence (imperative-mood heuristic) or its stem is a seed."""
    counts = Counter()
    for record in train_corpus:
        for step in record.steps:
            tokens = content_tokens(tokenize(step))
            for pos, token in enumerate(tokens):
                token_stem = stem(token)
                if (pos == 0 and token.isalpha()) or token_stem in _SEED_STEMS:
                    counts[token_stem] += 1
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    stems = [s for s, _ in ranked[:max_size]]
    return VerbLexicon(stems=stems, counts=dict(counts))


def verb_recall(pred_set, lexicon):
    """Recall of lexicon verb stems present in the ground-truth step
    that the prediction also contains."""
    curve = StepCurve(metric="verb_recall")
    for entry in pred_set:
        gt_verbs = {stem(t) for t in entry.ground_truth_tokens} & lexicon.stem_set
        if not gt_verbs:
            continue
        pred_verbs = {stem(t) for t in entry.predicted_tokens} & lexicon.stem_set
        curve.add(entry.context_len, entry.step_index,
                  len(gt_verbs & pred_verbs) / len(gt_verbs))
    return curve


def verbs_per_step(corpus, lexicon):
    """Mean number of lexicon-verb token occurrences per step (sanity stat)."""
    verbs = steps = 0
    for record in corpus:
        for step in record.steps:
            steps += 1
            verbs += sum(1 for t in content_tokens(tokenize(step))
                         if stem(t) in lexicon.stem_set)
    return verbs / steps if steps else 0.0


# ---------------------------------------------------------------------------
# Sentence-score curves, max-future matching
# ---------------------------------------------------------------------------

def sentence_curve(pred_set, metric):
    """Per-step curve of a sentence score, punctuation excluded."""
    fn = SENTENCE_METRICS[metric]
    curve = StepCurve(metric=metric)
    for entry in pred_set:
        pred = content_tokens(entry.predicted_tokens)
        gt = content_tokens(entry.ground_truth_tokens)
        if not gt:
            continue
        score = fn(pred, gt) if pred else 0.0
        curve.add(entry.context_len, entry.step_index, score)
    return curve


def max_future_match(pred_set, corpus_by_id, window=4, metric="bleu1"):
    """Score each prediction against its aligned ground-truth step and
    the next window-1 steps, keeping the best; mirrors how raters accept
    predictions that arrive a little early."""
    fn = SENTENCE_METRICS[metric]
    curve = StepCurve(metric=f"{metric}_max_future")
    for entry in pred_set:
        record = corpus_by_id.get(entry.recipe_id)
        if record is None:
            continue
        pred = content_tokens(entry.predicted_tokens)
        j = entry.step_index
        best = 0.0
        for future in record.steps[j - 1:j - 1 + window]:
            gt = content_tokens(tokenize(future))
            if not gt:
                continue
            score = fn(pred, gt) if pred else 0.0
            best = max(best, score)
        curve.add(entry.context_len, entry.step_index, best)
    return curve


# ---------------------------------------------------------------------------
# Rater agreement
# ---------------------------------------------------------------------------

def fleiss_kappa(table):
    """Fleiss's kappa over an items x raters matrix of category labels.

    Degenerate case: when every rating is one category, chance agreement
    is 1 and kappa is defined as 1.0 (with a warning).
    """
    rows = [list(r) for r in table]
    if not rows:
        raise ValueError("fleiss_kappa: no items")
    n = len(rows[0])
    if n < 2:
        raise ValueError("fleiss_kappa: needs at least 2 raters")
    if any(len(r) != n for r in rows):
        raise ValueError("fleiss_kappa: every item needs the same rater count")

    categories = sorted({label for row in rows for label in row}, key=repr)
    n_items = len(rows)
    counts = np.zeros((n_items, len(categories)))
    cat_index = {c: k for k, c in enumerate(categories)}
    for i, row in enumerate(rows):
        for label in row:
            counts[i, cat_index[label]] += 1

    p_bar = float(np.mean((np.sum(counts * counts, axis=1) - n) / (n * (n - 1))))
    margins = counts.sum(axis=0) / (n_items * n)
    p_e = float(np.sum(margins * margins))
    if p_e >= 1.0:
        warnings.warn("fleiss_kappa: single rating category, agreement defined as 1.0")
        return 1.0
    return (p_bar - p_e) / (1.0 - p_e)


# ---------------------------------------------------------------------------
# Full evaluation report
# ---------------------------------------------------------------------------

def evaluate_predictions(pred_set, corpus, iv, lexicon, max_future_window=4):
    """All curves and corpus aggregates for a prediction set.

    Returns (report dict, curves list); the report is JSON-ready.
    """
    corpus_by_id = {r.id: r for r in corpus}
    curves = [
        ingredient_recall(pred_set, iv, corpus_by_id),
        verb_recall(pred_set, lexicon),
    ]
    for metric in ("bleu1", "bleu4", "meteor_lite"):
        curves.append(sentence_curve(pred_set, metric))
    for metric in ("bleu1", "bleu4", "meteor_lite"):
        curves.append(max_future_match(pred_set, corpus_by_id,
                                       window=max_future_window, metric=metric))
    report = {
        "n_entries": len(pred_set),
        "aggregates": {
            c.metric: {"next_step": c.next_step_mean(), "overall": c.overall_mean()}
            for c in curves
        },
        "verbs_per_step": verbs_per_step(corpus, lexicon),
        "curves": [c.to_json() for c in curves],
    }
    return report, curves
