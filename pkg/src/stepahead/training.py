"""Two-stage training.

Stage 1 trains sentence encoder, recipe RNN, sentence decoder and the
ingredient projection jointly on text. Stage 2 trains only the video
encoder, with everything else frozen, by swapping per-step video
encodings in place of sentence encodings under the same word loss.

Scheduled sampling: once the epoch counter passes the configured start
epoch, each non-initial context input is replaced, with the configured
probability, by the model's own previous prediction vector.
"""

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import encode_ingredients
from .model import AnticipationModel, video_param_names
from .numerics import Tape, add_n, adam_step, clip_gradients, scale, save_checkpoint


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    batch_size_recipes: int = 50
    lr: float = 0.001
    text_epochs: int = 50
    video_epochs: int = 25
    scheduled_sampling_prob: float = 0.5
    scheduled_sampling_start_epoch: int = 5
    clip_norm: float = 5.0
    seed: int = 0

    def validate(self):
        if not 0.0 <= self.scheduled_sampling_prob <= 1.0:
            raise ValueError("scheduled_sampling_prob must be in [0, 1]")
        if self.text_epochs < 1 or self.video_epochs < 1:
            raise ValueError("epoch counts must be >= 1")
        if self.batch_size_recipes < 1:
            raise ValueError("batch_size_recipes must be >= 1")
        return self

    def to_json(self):
        return {
            "batch_size_recipes": self.batch_size_recipes,
            "lr": self.lr,
            "text_epochs": self.text_epochs,
            "video_epochs": self.video_epochs,
            "scheduled_sampling_prob": self.scheduled_sampling_prob,
            "scheduled_sampling_start_epoch": self.scheduled_sampling_start_epoch,
            "clip_norm": self.clip_norm,
            "seed": self.seed,
        }


@dataclass
class EpochStats:
    epoch: int
    mean_loss: float
    val_loss: float
    wall_time: float
    teacher_inputs: int
    sampled_inputs: int


@dataclass
class TrainReport:
    """Per-epoch training record. ``teacher_inputs + sampled_inputs``
    equals the number of non-initial context inputs fed that epoch."""

    epochs: list = field(default_factory=list)

    def append(self, stats):
        self.epochs.append(stats)

    def total_inputs(self):
        return sum(e.teacher_inputs + e.sampled_inputs for e in self.epochs)

    def sampled_fraction(self, after_epoch=0):
        rows = [e for e in self.epochs if e.epoch > after_epoch]
        total = sum(e.teacher_inputs + e.sampled_inputs for e in rows)
        sampled = sum(e.sampled_inputs for e in rows)
        return sampled / total if total else 0.0

    def to_jsonl(self):
        lines = []
        for e in self.epochs:
            lines.append(json.dumps({
                "epoch": e.epoch, "mean_loss": e.mean_loss, "val_loss": e.val_loss,
                "wall_time": e.wall_time, "teacher_inputs": e.teacher_inputs,
                "sampled_inputs": e.sampled_inputs,
            }))
        return "\n".join(lines) + "\n"

    def save(self, path):
        Path(path).write_text(self.to_jsonl())


@dataclass
class PreparedRecipe:
    """Token-indexed view of a RecipeRecord, ready for the networks."""

    id: str
    step_token_ids: list
    ingredient_vec: np.ndarray
    segments: list = None

    @property
    def n_steps(self):
        return len(self.step_token_ids)

    @property
    def n_word_terms(self):
        return sum(len(ids) + 1 for ids in self.step_token_ids)


def prepare_recipe(record, vocab, iv, stats=None):
    from .corpus import tokenize

    return PreparedRecipe(
        id=record.id,
        step_token_ids=[vocab.encode(tokenize(s)) for s in record.steps],
        ingredient_vec=encode_ingredients(record, iv, stats=stats),
        segments=record.segments,
    )


@dataclass
class Batch:
    """A shuffled slice of recipes with per-sentence padding.

    ``tokens[i, j, :lengths[i, j]]`` are the real token ids of recipe
    i's step j; everything beyond is PAD and never reaches the loss or
    the encoder max-pool.
    """

    recipes: list
    tokens: np.ndarray
    lengths: np.ndarray
    step_counts: np.ndarray

    def step_ids(self, i, j):
        return self.tokens[i, j, :self.lengths[i, j]].tolist()


def _pad_batch(recipes):
    n = len(recipes)
    max_steps = max(r.n_steps for r in recipes)
    max_len = max(max(len(ids) for ids in r.step_token_ids) for r in recipes)
    tokens = np.zeros((n, max_steps, max_len), dtype=np.int32)  # PAD id is 0
    lengths = np.zeros((n, max_steps), dtype=np.int32)
    counts = np.zeros(n, dtype=np.int32)
    for i, r in enumerate(recipes):
        counts[i] = r.n_steps
        for j, ids in enumerate(r.step_token_ids):
            lengths[i, j] = len(ids)
            tokens[i, j, :len(ids)] = ids
    return Batch(recipes=recipes, tokens=tokens, lengths=lengths, step_counts=counts)


def make_batches(prepared, batch_size, seed=None, rng=None):
    """Shuffle recipes with a seeded RNG and cut into padded batches."""
    if rng is None:
        rng = np.random.default_rng(seed)
    order = rng.permutation(len(prepared))
    shuffled = [prepared[i] for i in order]
    return [
        _pad_batch(shuffled[i:i + batch_size])
        for i in range(0, len(shuffled), batch_size)
    ]


def text_recipe_losses(bound, batch, i, sample_mask=None):
    """Per-word losses for one recipe under stage-1 teacher forcing.

    ``sample_mask[j]`` (j = 0 .. n_steps-2) switches the context input
    for step j+1 from the encoded ground-truth step to the model's own
    previous prediction vector.
    """
    prep = batch.recipes[i]
    state = bound.initial_state()
    state, pred = bound.recipe_step(state, bound.project_ingredients(prep.ingredient_vec))
    losses = list(bound.decode_teacher(pred, batch.step_ids(i, 0)))
    for j in range(1, prep.n_steps):
        if sample_mask is not None and sample_mask[j - 1]:
            context = pred
        else:
            context = bound.encode_sentence(batch.step_ids(i, j - 1))
        state, pred = bound.recipe_step(state, context)
        losses.extend(bound.decode_teacher(pred, batch.step_ids(i, j)))
    return losses


def video_recipe_losses(bound, prep):
    """Per-word losses with video encodings as context (stage 2)."""
    state = bound.initial_state()
    state, pred = bound.recipe_step(state, bound.project_ingredients(prep.ingredient_vec))
    losses = list(bound.decode_teacher(pred, prep.step_token_ids[0]))
    for j in range(1, prep.n_steps):
        context = bound.encode_video(prep.segments[j - 1])
        state, pred = bound.recipe_step(state, context)
        losses.extend(bound.decode_teacher(pred, prep.step_token_ids[j]))
    return losses


def teacher_forced_loss(model, prepared, video=False):
    """Mean per-word loss over recipes, fully teacher forced (no updates)."""
    total, words = 0.0, 0
    for prep in prepared:
        tape = Tape()
        bound = model.bind(tape)
        if video:
            losses = video_recipe_losses(bound, prep)
        else:
            losses = text_recipe_losses(bound, _pad_batch([prep]), 0)
        total += sum(float(l.data) for l in losses)
        words += len(losses)
    return total / words if words else 0.0


def _epoch_rng(seed, stage, epoch):
    return np.random.default_rng([seed, stage, epoch])


def _save_epoch_checkpoint(checkpoint_dir, tag, epoch, model, config, extra):
    if checkpoint_dir is None:
        return
    hyper = {
        "model": model.config.to_json(),
        "train": config.to_json(),
        "init": "uniform LSTM with +1 forget bias",
    }
    if extra:
        hyper.update(extra)
    base = Path(checkpoint_dir) / f"{tag}_epoch_{epoch:04d}"
    save_checkpoint(base, model.params.tensors, hyper, config.seed)
    save_checkpoint(Path(checkpoint_dir) / f"{tag}_final", model.params.tensors, hyper, config.seed)


def train_text(corpus, vocab, iv, config, model_config=None, model=None,
               validation=None, checkpoint_dir=None, extra_hyperparams=None,
               log=None):
    """Stage-1 joint training on text. Returns (model, TrainReport).

    Deterministic given the config seed: shuffling and scheduled-sampling
    coin flips draw from per-epoch RNG streams derived from it.
    """
    config.validate()
    if not corpus:
        raise TrainingError("empty training split")
    if model is None:
        model = AnticipationModel(model_config, seed=config.seed)
    prepared = [prepare_recipe(r, vocab, iv) for r in corpus]
    val_prepared = [prepare_recipe(r, vocab, iv) for r in (validation or [])]
    report = TrainReport()

    for epoch in range(1, config.text_epochs + 1):
        start = time.perf_counter()
        rng = _epoch_rng(config.seed, 1, epoch)
        sampling_on = (epoch > config.scheduled_sampling_start_epoch
                       and config.scheduled_sampling_prob > 0.0)
        teacher_count = sampled_count = 0
        loss_sum, word_count = 0.0, 0

        for batch in make_batches(prepared, config.batch_size_recipes, rng=rng):
            tape = Tape()
            bound = model.bind(tape)
            batch_losses = []
            for i, prep in enumerate(batch.recipes):
                eligible = prep.n_steps - 1
                if sampling_on and eligible > 0:
                    mask = rng.random(eligible) < config.scheduled_sampling_prob
                else:
                    mask = np.zeros(eligible, dtype=bool)
                sampled_count += int(mask.sum())
                teacher_count += eligible - int(mask.sum())
                losses = text_recipe_losses(bound, batch, i, sample_mask=mask)
                recipe_loss = sum(float(l.data) for l in losses)
                if not np.isfinite(recipe_loss):
                    raise TrainingError(f"non-finite loss at epoch {epoch}, recipe {prep.id!r}")
                loss_sum += recipe_loss
                word_count += len(losses)
                batch_losses.extend(losses)
            objective = scale(add_n(batch_losses), 1.0 / len(batch_losses))
            tape.backward(objective)
            grads = bound.param_grads()
            clip_gradients(grads, config.clip_norm)
            adam_step(model.params, grads, config.lr)

        val_loss = teacher_forced_loss(model, val_prepared) if val_prepared else None
        stats = EpochStats(
            epoch=epoch,
            mean_loss=loss_sum / word_count,
            val_loss=val_loss,
            wall_time=time.perf_counter() - start,
            teacher_inputs=teacher_count,
            sampled_inputs=sampled_count,
        )
        report.append(stats)
        if log:
            log(f"epoch {epoch}: loss {stats.mean_loss:.4f}"
                + (f" val {val_loss:.4f}" if val_loss is not None else ""))
        _save_epoch_checkpoint(checkpoint_dir, "text", epoch, model, config, extra_hyperparams)

    return model, report


def train_video(corpus, model, vocab, iv, config, checkpoint_dir=None,
                extra_hyperparams=None, log=None):
    """Stage-2 training of the video encoder only.

    Recipes without aligned segments are skipped (counted); every
    non-video parameter tensor is bit-identical before and after.
    Returns (video tensors, TrainReport).
    """
    config.validate()
    prepared = []
    skipped = 0
    for record in corpus:
        if record.segments is None:
            skipped += 1
            continue
        prepared.append(prepare_recipe(record, vocab, iv))
    if not prepared:
        raise TrainingError("no trainable recipes (none carry aligned segments)")

    video_names = set(video_param_names(model.params))
    # fresh Adam state over the video tensors only; arrays stay shared
    from .numerics import ParamSet

    opt = ParamSet()
    for name in sorted(video_names):
        opt.tensors[name] = model.params.tensors[name]
        opt.m[name] = np.zeros_like(opt.tensors[name])
        opt.v[name] = np.zeros_like(opt.tensors[name])

    report = TrainReport()
    for epoch in range(1, config.video_epochs + 1):
        start = time.perf_counter()
        rng = _epoch_rng(config.seed, 2, epoch)
        loss_sum, word_count = 0.0, 0
        for batch in make_batches(prepared, config.batch_size_recipes, rng=rng):
            tape = Tape()
            bound = model.bind(tape)
            batch_losses = []
            for prep in batch.recipes:
                losses = video_recipe_losses(bound, prep)
                recipe_loss = sum(float(l.data) for l in losses)
                if not np.isfinite(recipe_loss):
                    raise TrainingError(f"non-finite loss at epoch {epoch}, recipe {prep.id!r}")
                loss_sum += recipe_loss
                word_count += len(losses)
                batch_losses.extend(losses)
            objective = scale(add_n(batch_losses), 1.0 / len(batch_losses))
            tape.backward(objective)
            grads = {n: g for n, g in bound.param_grads().items() if n in video_names}
            clip_gradients(grads, config.clip_norm)
            adam_step(opt, grads, config.lr)

        stats = EpochStats(
            epoch=epoch,
            mean_loss=loss_sum / word_count,
            val_loss=None,
            wall_time=time.perf_counter() - start,
            teacher_inputs=sum(p.n_steps - 1 for p in prepared),
            sampled_inputs=0,
        )
        report.append(stats)
        if log:
            log(f"video epoch {epoch}: loss {stats.mean_loss:.4f} (skipped {skipped} recipes)")
        _save_epoch_checkpoint(checkpoint_dir, "video", epoch, model, config, extra_hyperparams)

    video_tensors = {n: model.params.tensors[n] for n in sorted(video_names)}
    return video_tensors, report
