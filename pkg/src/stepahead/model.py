"""The four networks and their composition.

A bidirectional LSTM encodes each step sentence into a fixed vector by
max-pooling the concatenated per-timestep outputs. A second LSTM (the
recipe RNN) consumes the sequence of step vectors, starting from a
projected multi-hot ingredient vector; its hidden state after j inputs
is, verbatim, the prediction vector for step j+1. An LSTM language
model decodes prediction vectors back into sentences, and a structurally
identical bidirectional LSTM over precomputed frame features can stand
in for the sentence encoder at inference time.
"""

from dataclasses import dataclass

import numpy as np

from .corpus import BOS_ID, EOS_ID
from .numerics import (
    ShapeError,
    Tape,
    add,
    concat,
    embed,
    lstm_cell,
    matmul,
    maxpool,
    softmax_xent,
    tanh,
    vslice,
    ParamSet,
)

INIT_SCHEME = "uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)); zero biases; forget-gate bias +1"


@dataclass
class ModelConfig:
    """Network dimensions. The shared context width D is 2 * enc_hidden;
    the recipe RNN hidden size must equal D so its hidden state can be
    used directly as the next context vector, and the video encoder must
    produce the same width (vid_hidden == enc_hidden)."""

    vocab_size: int
    ingredient_vocab_size: int
    embed_dim: int = 256
    enc_hidden: int = 512
    dec_hidden: int = 512
    vid_hidden: int = 512
    recipe_hidden: int = 1024
    feature_dim: int = 2048
    max_decode_len: int = 20

    @property
    def context_dim(self):
        return 2 * self.enc_hidden

    def validate(self):
        for name in ("vocab_size", "ingredient_vocab_size", "embed_dim", "enc_hidden",
                     "dec_hidden", "vid_hidden", "recipe_hidden", "feature_dim",
                     "max_decode_len"):
            if getattr(self, name) <= 0:
                raise ValueError(f"model config: {name} must be positive")
        if self.recipe_hidden != self.context_dim:
            raise ValueError(
                f"model config: recipe_hidden ({self.recipe_hidden}) must equal "
                f"2 * enc_hidden ({self.context_dim}) so predictions feed back as context"
            )
        if self.vid_hidden != self.enc_hidden:
            raise ValueError(
                f"model config: vid_hidden ({self.vid_hidden}) must equal enc_hidden "
                f"({self.enc_hidden}) so video encodings share the context width"
            )
        return self

    def to_json(self):
        return {
            "vocab_size": self.vocab_size,
            "ingredient_vocab_size": self.ingredient_vocab_size,
            "embed_dim": self.embed_dim,
            "enc_hidden": self.enc_hidden,
            "dec_hidden": self.dec_hidden,
            "vid_hidden": self.vid_hidden,
            "recipe_hidden": self.recipe_hidden,
            "feature_dim": self.feature_dim,
            "max_decode_len": self.max_decode_len,
        }

    @classmethod
    def from_json(cls, obj):
        return cls(**{k: int(v) for k, v in obj.items()}).validate()


@dataclass
class RecipeState:
    """Recurrent state of the recipe RNN after ``step_index`` inputs."""

    h: object
    c: object
    step_index: int


def _uniform(rng, shape, fan_in):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def _lstm_params(params, prefix, rng, input_dim, hidden):
    w = params.add(f"{prefix}.w", _uniform(rng, (4 * hidden, input_dim), input_dim))
    u = params.add(f"{prefix}.u", _uniform(rng, (4 * hidden, hidden), hidden))
    b = np.zeros(4 * hidden)
    b[hidden:2 * hidden] = 1.0
    params.add(f"{prefix}.b", b)
    return w, u


def init_params(config, rng):
    """Fresh ParamSet for the whole model; deterministic given the rng."""
    cfg = config
    p = ParamSet()
    p.add("encoder.embed", _uniform(rng, (cfg.vocab_size, cfg.embed_dim), cfg.embed_dim))
    _lstm_params(p, "encoder.fwd", rng, cfg.embed_dim, cfg.enc_hidden)
    _lstm_params(p, "encoder.bwd", rng, cfg.embed_dim, cfg.enc_hidden)
    _lstm_params(p, "recipe", rng, cfg.context_dim, cfg.recipe_hidden)
    p.add("decoder.init.w", _uniform(rng, (2 * cfg.dec_hidden, cfg.context_dim), cfg.context_dim))
    p.add("decoder.init.b", np.zeros(2 * cfg.dec_hidden))
    _lstm_params(p, "decoder", rng, cfg.embed_dim, cfg.dec_hidden)
    p.add("decoder.out.w", _uniform(rng, (cfg.vocab_size, cfg.dec_hidden), cfg.dec_hidden))
    p.add("decoder.out.b", np.zeros(cfg.vocab_size))
    _lstm_params(p, "video.fwd", rng, cfg.feature_dim, cfg.vid_hidden)
    _lstm_params(p, "video.bwd", rng, cfg.feature_dim, cfg.vid_hidden)
    p.add("ingredient_proj.w",
          _uniform(rng, (cfg.context_dim, cfg.ingredient_vocab_size), cfg.ingredient_vocab_size))
    p.add("ingredient_proj.b", np.zeros(cfg.context_dim))
    return p

VIDEO_PARAM_PREFIX = "video."


def video_param_names(params):
    return [n for n in params.names() if n.startswith(VIDEO_PARAM_PREFIX)]


class AnticipationModel:
    """Configuration plus parameters; forward passes run on a bound tape."""

    def __init__(self, config, params=None, seed=0):
        self.config = config.validate()
        if params is None:
            params = init_params(config, np.random.default_rng(seed))
        self.params = params

    def bind(self, tape, param_values=None):
        """Attach the parameters to a tape for one forward/backward build.

        ``param_values`` may override the stored tensors with a
        name -> ndarray-or-Value map (used by the gradient checker).
        """
        return BoundModel(self.config, tape,
                          self.params.tensors if param_values is None else param_values)


class BoundModel:
    """Forward passes for one tape. Parameters are wrapped lazily and
    cached so gradients accumulate per named tensor."""

    def __init__(self, config, tape, values):
        self.cfg = config
        self.tape = tape
        self._values = values
        self._cache = {}

    def p(self, name):
        v = self._cache.get(name)
        if v is None:
            raw = self._values[name]
            v = raw if hasattr(raw, "tape") else self.tape.value(raw)
            self._cache[name] = v
        return v

    def param_grads(self):
        """name -> gradient array for every parameter touched this pass."""
        return {name: v.grad for name, v in self._cache.items() if v.grad is not None}

    def _zeros(self, n):
        return self.tape.value(np.zeros(n))

    def _bilstm(self, inputs, prefix, hidden):
        w, u, b = self.p(f"{prefix}.fwd.w"), self.p(f"{prefix}.fwd.u"), self.p(f"{prefix}.fwd.b")
        h, c = self._zeros(hidden), self._zeros(hidden)
        fwd = []
        for x in inputs:
            h, c = lstm_cell(x, h, c, w, u, b)
            fwd.append(h)
        w, u, b = self.p(f"{prefix}.bwd.w"), self.p(f"{prefix}.bwd.u"), self.p(f"{prefix}.bwd.b")
        h, c = self._zeros(hidden), self._zeros(hidden)
        bwd = [None] * len(inputs)
        for t in range(len(inputs) - 1, -1, -1):
            h, c = lstm_cell(inputs[t], h, c, w, u, b)
            bwd[t] = h
        return maxpool([concat(f, bb) for f, bb in zip(fwd, bwd)])

    def encode_sentence(self, token_ids):
        """Bi-LSTM over word embeddings, max-pooled per dimension."""
        if len(token_ids) == 0:
            raise ValueError("empty step")
        table = self.p("encoder.embed")
        inputs = [embed(table, i) for i in token_ids]
        return self._bilstm(inputs, "encoder", self.cfg.enc_hidden)

    def encode_video(self, segment):
        """Bi-LSTM over frame feature vectors, max-pooled per dimension."""
        frames = np.asarray(segment.frames, dtype=np.float64)
        if frames.shape[0] == 0:
            raise ValueError("empty video segment")
        if frames.shape[1] != self.cfg.feature_dim:
            raise ShapeError(
                f"encode_video: frame dim {frames.shape[1]} != feature_dim {self.cfg.feature_dim}")
        inputs = [self.tape.value(frames[t]) for t in range(frames.shape[0])]
        return self._bilstm(inputs, "video", self.cfg.vid_hidden)

    def project_ingredients(self, ingredient_vec):
        """tanh-squashed affine map of the multi-hot ingredient vector."""
        vec = np.asarray(ingredient_vec, dtype=np.float64)
        if vec.shape != (self.cfg.ingredient_vocab_size,):
            raise ShapeError(
                f"project_ingredients: got {vec.shape}, want ({self.cfg.ingredient_vocab_size},)")
        x = self.tape.value(vec)
        return tanh(add(matmul(self.p("ingredient_proj.w"), x), self.p("ingredient_proj.b")))

    def initial_state(self):
        r = self.cfg.recipe_hidden
        return RecipeState(h=self._zeros(r), c=self._zeros(r), step_index=0)

    def recipe_step(self, state, context):
        """One recipe-RNN step; the new hidden state is the prediction."""
        h, c = lstm_cell(context, state.h, state.c,
                         self.p("recipe.w"), self.p("recipe.u"), self.p("recipe.b"))
        new_state = RecipeState(h=h, c=c, step_index=state.step_index + 1)
        return new_state, h

    def _decoder_init(self, rhat):
        k = self.cfg.dec_hidden
        hc = tanh(add(matmul(self.p("decoder.init.w"), rhat), self.p("decoder.init.b")))
        return vslice(hc, 0, k), vslice(hc, k, 2 * k)

    def _decoder_logits(self, h):
        return add(matmul(self.p("decoder.out.w"), h), self.p("decoder.out.b"))

    def decode_teacher(self, rhat, token_ids):
        """Teacher-forced decoding; returns one loss per word plus EOS."""
        table = self.p("encoder.embed")
        w, u, b = self.p("decoder.w"), self.p("decoder.u"), self.p("decoder.b")
        h, c = self._decoder_init(rhat)
        losses = []
        inputs = [BOS_ID] + list(token_ids)
        targets = list(token_ids) + [EOS_ID]
        for inp, tgt in zip(inputs, targets):
            h, c = lstm_cell(embed(table, inp), h, c, w, u, b)
            losses.append(softmax_xent(self._decoder_logits(h), tgt))
        return losses

    def decode_greedy(self, rhat):
        """Argmax decoding from BOS until EOS or max_decode_len tokens."""
        table = self.p("encoder.embed")
        w, u, b = self.p("decoder.w"), self.p("decoder.u"), self.p("decoder.b")
        h, c = self._decoder_init(rhat)
        out = []
        inp = BOS_ID
        for _ in range(self.cfg.max_decode_len):
            h, c = lstm_cell(embed(table, inp), h, c, w, u, b)
            nxt = int(np.argmax(self._decoder_logits(h).data))
            if nxt == EOS_ID:
                break
            out.append(nxt)
            inp = nxt
        return out

    def decode_sentence(self, rhat, mode="greedy", tokens=None):
        """Greedy token list, or (tokens, per-word losses) when teacher-forced."""
        if mode == "greedy":
            return self.decode_greedy(rhat)
        if mode == "teacher":
            if tokens is None:
                raise ValueError("teacher-forced decoding needs the ground-truth tokens")
            return list(tokens), self.decode_teacher(rhat, tokens)
        raise ValueError(f"unknown decode mode {mode!r}")


def recipe_embedding(model, ingredient_vec, step_token_ids):
    """Final recipe-RNN hidden state after feeding every step encoding."""
    tape = Tape()
    bound = model.bind(tape)
    state = bound.initial_state()
    state, _ = bound.recipe_step(state, bound.project_ingredients(ingredient_vec))
    for ids in step_token_ids:
        state, _ = bound.recipe_step(state, bound.encode_sentence(ids))
    return state.h.data.copy()
