"""Autoregressive token policy: a small tanh recurrent net over numpy.

The decoder conditions on two fixed context vectors that are re-injected at
every step: the document context (mean of document token embeddings) and the
control context (a control-slot embedding, or the mean of requested entity
embeddings). EOS doubles as the start marker fed at the first step, and a
sampled or greedy rollout ends when EOS is emitted or max_len is hit.

hidden_0 = tanh(W_x doc + W_c ctrl)
hidden_t = tanh(W_h hidden_{t-1} + W_e emb[y_{t-1}] + W_x doc + W_c ctrl)
logits_t = W_o hidden_t + bias

Gradients of sequence log-probability are computed analytically by
backpropagation through time; `logprob_grad` is exact, not approximated, and
is validated against finite differences in the test suite.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .bins import BinTable
from .constraints import ControlRequest
from .vocab import N_ABS_BINS, N_LENGTH_BINS, TokenSeq, Vocabulary

FORMAT_VERSION = 1

# Serialization order of parameter blocks inside checkpoints.
PARAM_FIELDS = ("token_emb", "ctrl_emb", "w_h", "w_e", "w_x", "w_c", "w_o", "bias")

N_CTRL_SLOTS = N_LENGTH_BINS + N_ABS_BINS


@dataclass(frozen=True)
class PolicyDims:
    vocab_size: int
    d_embed: int = 16
    d_ctrl: int = 16
    d_hidden: int = 32

    def __post_init__(self):
        for name in ("vocab_size", "d_embed", "d_ctrl", "d_hidden"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    def shape_of(self, name: str) -> tuple[int, ...]:
        return {
            "token_emb": (self.vocab_size, self.d_embed),
            "ctrl_emb": (N_CTRL_SLOTS, self.d_ctrl),
            "w_h": (self.d_hidden, self.d_hidden),
            "w_e": (self.d_hidden, self.d_embed),
            "w_x": (self.d_hidden, self.d_embed),
            "w_c": (self.d_hidden, self.d_ctrl),
            "w_o": (self.vocab_size, self.d_hidden),
            "bias": (self.vocab_size,),
        }[name]

    def to_dict(self) -> dict:
        return {
            "vocab_size": self.vocab_size,
            "d_embed": self.d_embed,
            "d_ctrl": self.d_ctrl,
            "d_hidden": self.d_hidden,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PolicyDims":
        return cls(**d)


@dataclass
class PolicyParams:
    dims: PolicyDims
    token_emb: np.ndarray
    ctrl_emb: np.ndarray
    w_h: np.ndarray
    w_e: np.ndarray
    w_x: np.ndarray
    w_c: np.ndarray
    w_o: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        for name, arr in self.fields():
            want = self.dims.shape_of(name)
            if arr.shape != want:
                raise ValueError(f"{name} has shape {arr.shape}, expected {want}")

    def fields(self) -> Iterator[tuple[str, np.ndarray]]:
        for name in PARAM_FIELDS:
            yield name, getattr(self, name)

    def copy(self) -> "PolicyParams":
        return PolicyParams(self.dims, *(a.copy() for _, a in self.fields()))

    def add_scaled_(self, other: "PolicyParams", scale: float) -> None:
        for (_, a), (_, b) in zip(self.fields(), other.fields()):
            a += scale * b

    def scale_(self, scale: float) -> None:
        for _, a in self.fields():
            a *= scale

    def global_norm(self) -> float:
        total = 0.0
        for _, a in self.fields():
            total += float(np.sum(a * a))
        return float(np.sqrt(total))

    def first_nonfinite(self) -> Optional[str]:
        for name, a in self.fields():
            if not np.all(np.isfinite(a)):
                return name
        return None


def init_params(dims: PolicyDims, seed: int, scale: float = 0.1) -> PolicyParams:
    rng = np.random.default_rng(seed)
    arrays = {}
    for name in PARAM_FIELDS:
        shape = dims.shape_of(name)
        if name == "bias":
            arrays[name] = np.zeros(shape)
        else:
            arrays[name] = rng.normal(0.0, scale, shape)
    return PolicyParams(dims, **arrays)


def zeros_like(params: PolicyParams) -> PolicyParams:
    return PolicyParams(
        params.dims, *(np.zeros_like(a) for _, a in params.fields())
    )


@dataclass(frozen=True)
class Context:
    """Fixed conditioning vectors for one (document, request) pair, plus the
    bookkeeping backprop needs to route the control gradient."""

    doc: np.ndarray
    ctrl: np.ndarray
    doc_tokens: tuple[int, ...]
    ctrl_slot: Optional[int]  # ctrl_emb row, or None for entity requests
    ctrl_tokens: tuple[int, ...]  # requested entity ids for entity requests


def encode(params: PolicyParams, x: TokenSeq, request: ControlRequest) -> Context:
    dims = params.dims
    x = tuple(int(t) for t in x)
    if x:
        doc = params.token_emb[list(x)].mean(axis=0)
    else:
        doc = np.zeros(dims.d_embed)
    if request.task == "length":
        slot = request.length_bin - 1
        return Context(doc, params.ctrl_emb[slot].copy(), x, slot, ())
    if request.task == "abstractiveness":
        slot = N_LENGTH_BINS + request.abs_bin - 1
        return Context(doc, params.ctrl_emb[slot].copy(), x, slot, ())
    # Entity requests average entity token embeddings, so the two embedding
    # widths must agree.
    if dims.d_ctrl != dims.d_embed:
        raise ValueError(
            "entity requests need d_ctrl == d_embed "
            f"(got {dims.d_ctrl} != {dims.d_embed})"
        )
    ctrl = params.token_emb[list(request.entities)].mean(axis=0)
    return Context(doc, ctrl, x, None, tuple(request.entities))


@dataclass(frozen=True)
class Rollout:
    tokens: tuple[int, ...]
    logprobs: tuple[float, ...]
    greedy: bool
    seed: Optional[int]

    def __post_init__(self):
        if len(self.tokens) != len(self.logprobs):
            raise ValueError("one logprob per emitted token")

    @property
    def total_logprob(self) -> float:
        return float(sum(self.logprobs))


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    return z - np.log(np.exp(z).sum())


def _initial_hidden(params: PolicyParams, ctx: Context) -> np.ndarray:
    return np.tanh(params.w_x @ ctx.doc + params.w_c @ ctx.ctrl)


def _advance(
    params: PolicyParams, h: np.ndarray, prev_token: int, ctx: Context
) -> tuple[np.ndarray, np.ndarray]:
    """One decoder step: next hidden state and the logits read from it."""
    pre = (
        params.w_h @ h
        + params.w_e @ params.token_emb[prev_token]
        + params.w_x @ ctx.doc
        + params.w_c @ ctx.ctrl
    )
    h_new = np.tanh(pre)
    return h_new, params.w_o @ h_new + params.bias


def _decode(
    params: PolicyParams,
    x: TokenSeq,
    request: ControlRequest,
    vocab: Vocabulary,
    max_len: int,
    pick,
) -> tuple[list[int], list[float]]:
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    ctx = encode(params, x, request)
    h = _initial_hidden(params, ctx)
    prev = vocab.eos
    tokens: list[int] = []
    logprobs: list[float] = []
    while len(tokens) < max_len:
        h, logits = _advance(params, h, prev, ctx)
        logp = _log_softmax(logits)
        tok = pick(logp)
        tokens.append(tok)
        logprobs.append(float(logp[tok]))
        if tok == vocab.eos:
            break
        prev = tok
    return tokens, logprobs


def sample(
    params: PolicyParams,
    x: TokenSeq,
    request: ControlRequest,
    vocab: Vocabulary,
    seed: int,
    max_len: int = 40,
) -> Rollout:
    """Ancestral sampling, reproducible from the seed alone."""
    rng = np.random.default_rng(seed)

    def pick(logp: np.ndarray) -> int:
        cdf = np.cumsum(np.exp(logp))
        cdf[-1] = 1.0
        return int(np.searchsorted(cdf, rng.random(), side="right"))

    tokens, logprobs = _decode(params, x, request, vocab, max_len, pick)
    return Rollout(tuple(tokens), tuple(logprobs), greedy=False, seed=seed)


def greedy(
    params: PolicyParams,
    x: TokenSeq,
    request: ControlRequest,
    vocab: Vocabulary,
    max_len: int = 40,
) -> Rollout:
    """Argmax decoding; ties resolve to the lowest token id."""

    def pick(logp: np.ndarray) -> int:
        return int(np.argmax(logp))

    tokens, logprobs = _decode(params, x, request, vocab, max_len, pick)
    return Rollout(tuple(tokens), tuple(logprobs), greedy=True, seed=None)


def logprob_grad(
    params: PolicyParams,
    x: TokenSeq,
    request: ControlRequest,
    y: TokenSeq,
    vocab: Vocabulary,
) -> tuple[float, PolicyParams]:
    """Sequence log-probability of y and its exact parameter gradient.

    y is scored as emitted, so include the trailing EOS when the sequence
    ended by emitting one.
    """
    grads = zeros_like(params)
    y = [int(t) for t in y]
    if not y:
        return 0.0, grads
    ctx = encode(params, x, request)
    dims = params.dims
    T = len(y)
    prevs = [vocab.eos] + y[:-1]

    hs = np.empty((T + 1, dims.d_hidden))
    hs[0] = _initial_hidden(params, ctx)
    probs = np.empty((T, dims.vocab_size))
    total = 0.0
    for t in range(T):
        hs[t + 1], logits = _advance(params, hs[t], prevs[t], ctx)
        logp = _log_softmax(logits)
        probs[t] = np.exp(logp)
        total += float(logp[y[t]])

    d_doc = np.zeros(dims.d_embed)
    d_ctrl = np.zeros(dims.d_ctrl)
    dh = np.zeros(dims.d_hidden)
    for t in range(T - 1, -1, -1):
        dlogits = -probs[t]
        dlogits[y[t]] += 1.0
        grads.w_o += np.outer(dlogits, hs[t + 1])
        grads.bias += dlogits
        dh = dh + params.w_o.T @ dlogits
        dpre = dh * (1.0 - hs[t + 1] ** 2)
        grads.w_h += np.outer(dpre, hs[t])
        grads.w_e += np.outer(dpre, params.token_emb[prevs[t]])
        grads.token_emb[prevs[t]] += params.w_e.T @ dpre
        grads.w_x += np.outer(dpre, ctx.doc)
        grads.w_c += np.outer(dpre, ctx.ctrl)
        d_doc += params.w_x.T @ dpre
        d_ctrl += params.w_c.T @ dpre
        dh = params.w_h.T @ dpre

    # Initial hidden state also reads both context vectors.
    dpre0 = dh * (1.0 - hs[0] ** 2)
    grads.w_x += np.outer(dpre0, ctx.doc)
    grads.w_c += np.outer(dpre0, ctx.ctrl)
    d_doc += params.w_x.T @ dpre0
    d_ctrl += params.w_c.T @ dpre0

    if ctx.doc_tokens:
        np.add.at(grads.token_emb, list(ctx.doc_tokens), d_doc / len(ctx.doc_tokens))
    if ctx.ctrl_slot is not None:
        grads.ctrl_emb[ctx.ctrl_slot] += d_ctrl
    else:
        np.add.at(
            grads.token_emb, list(ctx.ctrl_tokens), d_ctrl / len(ctx.ctrl_tokens)
        )
    return total, grads


@dataclass
class Checkpoint:
    params: PolicyParams
    lam: Optional[np.ndarray] = None
    vocab: Optional[Vocabulary] = None
    bin_table: Optional[BinTable] = None
    meta: dict = field(default_factory=dict)


def save_checkpoint(
    path,
    params: PolicyParams,
    lam: Optional[np.ndarray] = None,
    vocab: Optional[Vocabulary] = None,
    bin_table: Optional[BinTable] = None,
    meta: Optional[dict] = None,
) -> None:
    """Self-describing JSON checkpoint. Parameter blocks are stored flat in
    row-major order under their field names; Python's float repr round-trips
    float64 exactly, so save/load is bit-identical."""
    payload = {
        "format_version": FORMAT_VERSION,
        "dims": params.dims.to_dict(),
        "params": {name: a.ravel().tolist() for name, a in params.fields()},
        "lambda": None if lam is None else np.asarray(lam, dtype=float).tolist(),
        "vocab": None if vocab is None else vocab.to_dict(),
        "bin_table": None if bin_table is None else bin_table.to_dict(),
        "meta": meta or {},
    }
    with open(path, "w") as f:
        json.dump(payload, f)
        f.write("\n")


def load_checkpoint(path) -> Checkpoint:
    with open(path) as f:
        payload = json.load(f)
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format_version: {version!r}")
    dims = PolicyDims.from_dict(payload["dims"])
    arrays = {}
    for name in PARAM_FIELDS:
        flat = np.asarray(payload["params"][name], dtype=float)
        arrays[name] = flat.reshape(dims.shape_of(name))
    params = PolicyParams(dims, **arrays)
    lam = payload.get("lambda")
    vocab = payload.get("vocab")
    table = payload.get("bin_table")
    return Checkpoint(
        params=params,
        lam=None if lam is None else np.asarray(lam, dtype=float),
        vocab=None if vocab is None else Vocabulary.from_dict(vocab),
        bin_table=None if table is None else BinTable.from_dict(table),
        meta=payload.get("meta", {}),
    )
