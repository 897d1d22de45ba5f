"""Zero-shot step prediction and fixed-window video segmentation.

Context may mix text steps and video segments; deeper-horizon rollouts
feed the recipe RNN's own prediction vector back as the next context,
never re-encoding the decoded sentence.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import FeatureSegment, tokenize
from .model import AnticipationModel  # noqa: F401  (re-exported for callers)
from .numerics import Tape


@dataclass
class WindowingConfig:
    window_size: int = 170  # raw frames per window (70 suits YouCookII-style clips)
    frame_stride: int = 5

    def validate(self):
        if self.window_size < 1:
            raise ValueError("window_size must be >= 1")
        if self.frame_stride < 1:
            raise ValueError("frame_stride must be >= 1")
        return self


@dataclass
class PredictionEntry:
    """One (recipe, target step, horizon) prediction with its ground truth."""

    recipe_id: str
    step_index: int  # 1-based index of the predicted step
    context_len: int
    predicted_tokens: list
    ground_truth_tokens: list

    @property
    def horizon(self):
        return self.step_index - self.context_len

    def to_json(self):
        return {
            "id": self.recipe_id,
            "step": self.step_index,
            "context_len": self.context_len,
            "horizon": self.horizon,
            "pred": " ".join(self.predicted_tokens),
            "gt": " ".join(self.ground_truth_tokens),
        }

    @classmethod
    def from_json(cls, obj):
        return cls(
            recipe_id=obj["id"],
            step_index=int(obj["step"]),
            context_len=int(obj["context_len"]),
            predicted_tokens=obj["pred"].split(),
            ground_truth_tokens=obj["gt"].split(),
        )


def rollout(model, vocab, ingredient_vec, context, horizon_max):
    """Greedy-decode predictions for the ``horizon_max`` steps after the context.

    ``context`` elements are either token-id lists (text) or
    FeatureSegment (video); each is encoded with the matching encoder.
    Deeper horizons feed the prediction vector back as context.
    Returns a list of token-string lists, one per horizon.
    """
    tape = Tape()
    bound = model.bind(tape)
    state = bound.initial_state()
    state, pred = bound.recipe_step(state, bound.project_ingredients(ingredient_vec))
    for element in context:
        if isinstance(element, FeatureSegment):
            encoded = bound.encode_video(element)
        else:
            encoded = bound.encode_sentence(list(element))
        state, pred = bound.recipe_step(state, encoded)
    outputs = []
    for _ in range(horizon_max):
        outputs.append(vocab.decode(bound.decode_greedy(pred)))
        state, pred = bound.recipe_step(state, pred)
    return outputs


def predict_steps(model, vocab, iv, record, context_len, horizon_max=None,
                  contexts=None, ingredient_vec=None):
    """PredictionEntry list for steps context_len+1 .. context_len+horizon_max.

    Text contexts default to the record's own (tokenized) steps; pass
    ``contexts`` to supply video segments or custom encodings instead.
    """
    from .corpus import encode_ingredients

    n_steps = len(record.steps)
    if context_len < 0 or context_len >= n_steps:
        raise ValueError(f"context_len {context_len} out of range for {n_steps} steps")
    if horizon_max is None:
        horizon_max = n_steps - context_len
    horizon_max = min(horizon_max, n_steps - context_len)
    if contexts is None:
        contexts = [vocab.encode(tokenize(s)) for s in record.steps[:context_len]]
    if ingredient_vec is None:
        ingredient_vec = encode_ingredients(record, iv)
    predictions = rollout(model, vocab, ingredient_vec, contexts, horizon_max)
    entries = []
    for h, tokens in enumerate(predictions, start=1):
        step_index = context_len + h
        entries.append(PredictionEntry(
            recipe_id=record.id,
            step_index=step_index,
            context_len=context_len,
            predicted_tokens=tokens,
            ground_truth_tokens=tokenize(record.steps[step_index - 1]),
        ))
    return entries


def predict_all_contexts(model, vocab, iv, record, horizon_max=None):
    """Entries for every context length 0 .. N-1 of one recipe."""
    entries = []
    for c in range(len(record.steps)):
        entries.extend(predict_steps(model, vocab, iv, record, c, horizon_max))
    return entries


def segment_video(frames, cfg, stop_at=None):
    """Partition a raw frame-feature stream into fixed windows.

    Consecutive windows of ``window_size`` raw frames are cut up to
    ``stop_at`` (default: the whole stream) and subsampled at
    ``frame_stride``; a final partial window is kept when it still holds
    at least ``frame_stride`` raw frames.
    """
    cfg.validate()
    frames = np.asarray(frames)
    if frames.ndim != 2 or frames.shape[0] == 0:
        raise ValueError("segment_video: empty or non-2D frame stream")
    if stop_at is None:
        stop_at = frames.shape[0]
    if not 0 < stop_at <= frames.shape[0]:
        raise ValueError(f"segment_video: stop_at {stop_at} out of range for {frames.shape[0]} frames")
    segments = []
    for start in range(0, stop_at, cfg.window_size):
        window = frames[start:min(start + cfg.window_size, stop_at)]
        if window.shape[0] < cfg.window_size and window.shape[0] < cfg.frame_stride:
            break  # partial tail too short to subsample
        segments.append(FeatureSegment(frames=window[::cfg.frame_stride]))
    return segments


def predict_from_video(model, vocab, iv, record, cfg, context_len, horizon_max=None,
                       feature_stream=None, mode="gt"):
    """Video-context prediction.

    ``mode="gt"`` feeds the record's annotated per-step segments (the
    first ``context_len`` of them); ``mode="window"`` cuts
    ``feature_stream`` into fixed windows first. With zero observed
    video this reduces to the ingredients-only text path.
    """
    if mode == "gt":
        if record.segments is None:
            raise ValueError(f"recipe {record.id!r} carries no segments")
        contexts = list(record.segments[:context_len])
    elif mode == "window":
        if context_len == 0:
            contexts = []
        else:
            if feature_stream is None:
                raise ValueError("window mode needs a feature stream")
            windows = segment_video(feature_stream, cfg)
            contexts = windows[:context_len]
            if len(contexts) < context_len:
                raise ValueError(
                    f"stream yields {len(windows)} windows, fewer than context_len {context_len}")
    else:
        raise ValueError(f"unknown video mode {mode!r}")
    return predict_steps(model, vocab, iv, record, context_len, horizon_max,
                         contexts=contexts)


def save_predictions(entries, path):
    with open(path, "w", encoding="utf-8") as handle:
        for e in entries:
            handle.write(json.dumps(e.to_json()) + "\n")


def load_predictions(path):
    entries = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                entries.append(PredictionEntry.from_json(json.loads(line)))
            except (json.JSONDecodeError, KeyError) as exc:
                raise ValueError(f"{path}, line {lineno}: bad prediction entry ({exc})") from None
    return entries
