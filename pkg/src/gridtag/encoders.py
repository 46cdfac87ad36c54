"""Word encoders and word-pair representations.

Tokens are embedded with two channels (a general-purpose table and an
optional domain-specific one), encoded into contextual vectors h_i by a
stacked CNN or a BiLSTM, enhanced by an additive attention layer, and
finally paired: r_ij concatenates the enhanced vectors of w_i and w_j for
every upper-triangle cell.
"""

from __future__ import annotations

from collections.abc import Iterable
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, Tensor
from .config import TrainConfig
from .grid import cell_pairs

UNK_TOKEN = "<unk>"


class EncoderError(Exception):
    pass


def build_vocab(sentences: Iterable) -> dict[str, int]:
    """Token -> row index, by first appearance; row 0 is the unknown token."""
    vocab = {UNK_TOKEN: 0}
    for sentence in sentences:
        for token in sentence.tokens:
            if token not in vocab:
                vocab[token] = len(vocab)
    return vocab


def tokens_to_ids(vocab: dict[str, int], tokens: Iterable[str]) -> np.ndarray:
    unk = vocab[UNK_TOKEN]
    return np.array([vocab.get(t, unk) for t in tokens], dtype=np.int64)


def load_embedding_file(path: str | Path) -> tuple[dict[str, np.ndarray], int]:
    """Read a text embedding file: one token plus its floats per line.

    The dimension is inferred from the first line and enforced on the
    rest.
    """
    vectors: dict[str, np.ndarray] = {}
    dim: int | None = None
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            token, values = parts[0], parts[1:]
            if dim is None:
                if not values:
                    raise EncoderError(f"{path}:{lineno}: no values on first line")
                dim = len(values)
            elif len(values) != dim:
                raise EncoderError(
                    f"{path}:{lineno}: expected {dim} values, got {len(values)}"
                )
            vectors[token] = np.array([float(v) for v in values], dtype=np.float64)
    if dim is None:
        raise EncoderError(f"{path}: empty embedding file")
    return vectors, dim


def _init_embedding_table(
    rng: np.random.Generator,
    vocab: dict[str, int],
    dim: int,
    pretrained_path: str | None,
) -> np.ndarray:
    table = rng.uniform(-0.1, 0.1, size=(len(vocab), dim))
    if pretrained_path:
        vectors, file_dim = load_embedding_file(pretrained_path)
        if file_dim != dim:
            raise EncoderError(
                f"embedding file {pretrained_path} has dim {file_dim}, "
                f"config expects {dim}"
            )
        for token, row in vocab.items():
            vec = vectors.get(token)
            if vec is not None:
                table[row] = vec
    return table


def init_embedding_params(
    store: ParamStore,
    rng: np.random.Generator,
    vocab: dict[str, int],
    config: TrainConfig,
) -> None:
    store.add(
        "emb.general",
        _init_embedding_table(rng, vocab, config.general_dim, config.general_embeddings),
    )
    if config.domain_dim > 0:
        store.add(
            "emb.domain",
            _init_embedding_table(rng, vocab, config.domain_dim, config.domain_embeddings),
        )


def embed_tokens(store: ParamStore, token_ids: np.ndarray) -> list[Tensor]:
    """Per-channel embedding matrices for a sentence, each (n, dim)."""
    channels = [ad.lookup(store["emb.general"], token_ids)]
    if "emb.domain" in store:
        channels.append(ad.lookup(store["emb.domain"], token_ids))
    return channels


def _affine_init(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    return ad.xavier_uniform(rng, fan_in, fan_out, (fan_in, fan_out))


# ---------------------------------------------------------------------------
# CNN encoder: parallel first-layer convolutions over the two embedding
# channels, then a width-5 stack, ReLU activations, dropout after the
# embedding and after each ReLU.

def init_cnn_params(store: ParamStore, rng: np.random.Generator, config: TrainConfig) -> None:
    channels = config.cnn_channels
    if config.domain_dim > 0:
        general_out = channels // 2
        domain_out = channels - general_out
        store.add(
            "cnn.l1.general.w",
            _affine_init(rng, config.cnn_kernel * config.general_dim, general_out),
        )
        store.add("cnn.l1.general.b", np.zeros(general_out))
        store.add(
            "cnn.l1.domain.w",
            _affine_init(rng, config.cnn_domain_kernel * config.domain_dim, domain_out),
        )
        store.add("cnn.l1.domain.b", np.zeros(domain_out))
    else:
        store.add(
            "cnn.l1.general.w",
            _affine_init(rng, config.cnn_kernel * config.general_dim, channels),
        )
        store.add("cnn.l1.general.b", np.zeros(channels))
    for layer in range(2, config.cnn_layers + 1):
        store.add(
            f"cnn.l{layer}.w", _affine_init(rng, config.cnn_kernel * channels, channels)
        )
        store.add(f"cnn.l{layer}.b", np.zeros(channels))


def conv1d(x: Tensor, weight: Tensor, bias: Tensor, width: int) -> Tensor:
    """Same-padded 1-D convolution over the token axis.

    Implemented as window gathering plus one affine map; `weight` has
    shape (width * d_in, d_out).
    """
    if width % 2 != 1:
        raise EncoderError(f"kernel width must be odd for same padding, got {width}")
    n, d_in = x.shape
    pad = (width - 1) // 2
    padded = ad.pad_rows(x, pad, pad)
    windows = np.arange(n)[:, None] + np.arange(width)[None, :]
    gathered = ad.lookup(padded, windows)  # (n, width, d_in)
    flat = ad.reshape(gathered, (n, width * d_in))
    return ad.add(ad.matmul(flat, weight), bias)


def encode_cnn(
    store: ParamStore,
    config: TrainConfig,
    channels: list[Tensor],
    train: bool,
    rng: np.random.Generator | None,
) -> Tensor:
    p = config.dropout
    dropped = [ad.dropout(c, p, train, rng) for c in channels]
    first = conv1d(
        dropped[0], store["cnn.l1.general.w"], store["cnn.l1.general.b"], config.cnn_kernel
    )
    if len(dropped) > 1:
        domain = conv1d(
            dropped[1],
            store["cnn.l1.domain.w"],
            store["cnn.l1.domain.b"],
            config.cnn_domain_kernel,
        )
        first = ad.concat([first, domain], axis=-1)
    h = ad.dropout(ad.relu(first), p, train, rng)
    for layer in range(2, config.cnn_layers + 1):
        conv = conv1d(h, store[f"cnn.l{layer}.w"], store[f"cnn.l{layer}.b"], config.cnn_kernel)
        h = ad.dropout(ad.relu(conv), p, train, rng)
    return h


# ---------------------------------------------------------------------------
# BiLSTM encoder: standard forward and backward LSTMs, hidden states
# concatenated per token.

_GATES = ("i", "f", "g", "o")


def init_bilstm_params(store: ParamStore, rng: np.random.Generator, config: TrainConfig) -> None:
    d_in = config.embedding_dim
    hidden = config.lstm_hidden
    for direction in ("fwd", "bwd"):
        for gate in _GATES:
            store.add(f"lstm.{direction}.w{gate}", _affine_init(rng, d_in, hidden))
            store.add(f"lstm.{direction}.u{gate}", _affine_init(rng, hidden, hidden))
            store.add(f"lstm.{direction}.b{gate}", np.zeros(hidden))


def _lstm_direction(
    store: ParamStore, direction: str, x: Tensor, hidden: int, reverse: bool
) -> list[Tensor]:
    n = x.shape[0]
    w = {g: store[f"lstm.{direction}.w{g}"] for g in _GATES}
    u = {g: store[f"lstm.{direction}.u{g}"] for g in _GATES}
    b = {g: store[f"lstm.{direction}.b{g}"] for g in _GATES}
    h = Tensor(np.zeros((1, hidden)))
    c = Tensor(np.zeros((1, hidden)))
    steps = range(n - 1, -1, -1) if reverse else range(n)
    outputs: list[Tensor] = []
    for t in steps:
        xt = ad.lookup(x, np.array([t]))
        pre = {
            g: ad.add(ad.add(ad.matmul(xt, w[g]), ad.matmul(h, u[g])), b[g])
            for g in _GATES
        }
        gate_i = ad.sigmoid(pre["i"])
        gate_f = ad.sigmoid(pre["f"])
        gate_o = ad.sigmoid(pre["o"])
        cand = ad.tanh(pre["g"])
        c = ad.add(ad.mul(gate_f, c), ad.mul(gate_i, cand))
        h = ad.mul(gate_o, ad.tanh(c))
        outputs.append(h)
    if reverse:
        outputs.reverse()
    return outputs


def encode_bilstm(
    store: ParamStore,
    config: TrainConfig,
    channels: list[Tensor],
    train: bool,
    rng: np.random.Generator | None,
) -> Tensor:
    x = channels[0] if len(channels) == 1 else ad.concat(channels, axis=-1)
    x = ad.dropout(x, config.dropout, train, rng)
    fwd = _lstm_direction(store, "fwd", x, config.lstm_hidden, reverse=False)
    bwd = _lstm_direction(store, "bwd", x, config.lstm_hidden, reverse=True)
    rows = [ad.concat([f, b], axis=-1) for f, b in zip(fwd, bwd)]
    return ad.concat(rows, axis=0)


def encoder_output_dim(config: TrainConfig) -> int:
    if config.encoder == "cnn":
        return config.cnn_channels
    return 2 * config.lstm_hidden


def init_encoder_params(store: ParamStore, rng: np.random.Generator, config: TrainConfig) -> None:
    if config.encoder == "cnn":
        init_cnn_params(store, rng, config)
    else:
        init_bilstm_params(store, rng, config)


def encode_sentence(
    store: ParamStore,
    config: TrainConfig,
    token_ids: np.ndarray,
    train: bool = False,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Contextual vectors h_i for one sentence, shape (n, encoder dim)."""
    if len(token_ids) == 0:
        raise EncoderError("cannot encode an empty sentence")
    channels = embed_tokens(store, np.asarray(token_ids, dtype=np.int64))
    if config.encoder == "cnn":
        return encode_cnn(store, config, channels, train, rng)
    return encode_bilstm(store, config, channels, train, rng)


# ---------------------------------------------------------------------------
# Attention enhancement: every word attends over the whole sentence with
# additive scores, and the attended mix is added back onto h_i.

def init_attention_params(
    store: ParamStore, rng: np.random.Generator, config: TrainConfig
) -> None:
    d_h = encoder_output_dim(config)
    d_a = config.attention_dim or d_h
    store.add("attn.w1", _affine_init(rng, d_h, d_a))
    store.add("attn.w2", _affine_init(rng, d_h, d_a))
    store.add("attn.b", np.zeros(d_a))
    store.add("attn.v", ad.xavier_uniform(rng, d_a, 1, (d_a, 1)))


def attention_weights(store: ParamStore, h: Tensor) -> Tensor:
    """Row-normalized attention matrix; entry (i, j) weights h_j for word i.

    Scores are additive: score(i, j) = v . (W1 h_i + W2 h_j + b).
    """
    scores_i = ad.matmul(ad.add(ad.matmul(h, store["attn.w1"]), store["attn.b"]), store["attn.v"])
    scores_j = ad.matmul(ad.matmul(h, store["attn.w2"]), store["attn.v"])
    u = ad.add(scores_i, ad.transpose(scores_j))  # (n, 1) + (1, n) -> (n, n)
    return ad.row_softmax(u)


def attention_enhance(store: ParamStore, h: Tensor) -> Tensor:
    """h_i plus its attention-weighted mix of the whole sentence."""
    alpha = attention_weights(store, h)
    return ad.add(h, ad.matmul(alpha, h))


def word_pair_rep(h: Tensor, n: int) -> Tensor:
    """Concatenated vectors [h_i; h_j] for every upper-triangle cell."""
    rows_i, rows_j = cell_pairs(n)
    return ad.concat([ad.lookup(h, rows_i), ad.lookup(h, rows_j)], axis=-1)
