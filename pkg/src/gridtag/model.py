"""Full tagger: embeddings -> encoder -> attention -> word pairs ->
iterative inference -> per-cell tag distributions."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import encoders, inference
from .autodiff import ParamStore, Tensor
from .config import TrainConfig, config_from_dict
from .grid import DecodedResult, TagGrid, Task, decode, grid_from_probabilities

CHECKPOINT_VERSION = 1


class GridTagger:
    """One trained (or trainable) grid tagging model."""

    def __init__(
        self,
        config: TrainConfig,
        vocab: dict[str, int],
        rng: np.random.Generator | None = None,
        store: ParamStore | None = None,
    ):
        self.config = config
        self.vocab = vocab
        self.task = Task(config.task)
        self.num_tags = len(self.task.tags)
        if store is not None:
            self.store = store
            self.inference_params = inference.params_from_store(
                store, config.resolved_turns, config.evidence_excludes_self
            )
            return
        if rng is None:
            raise ValueError("need a random generator to initialize parameters")
        self.store = ParamStore()
        encoders.init_embedding_params(self.store, rng, vocab, config)
        encoders.init_encoder_params(self.store, rng, config)
        if config.attention:
            encoders.init_attention_params(self.store, rng, config)
        feature_dim = 2 * encoders.encoder_output_dim(config)
        self.inference_params = inference.init_inference_params(
            self.store,
            rng,
            feature_dim,
            self.num_tags,
            config.resolved_turns,
            config.evidence_excludes_self,
        )

    def forward_cells(
        self,
        token_ids: np.ndarray,
        train: bool = False,
        rng: np.random.Generator | None = None,
    ) -> Tensor:
        """Tag distributions for every upper-triangle cell, rows sum to 1."""
        h = encoders.encode_sentence(self.store, self.config, token_ids, train, rng)
        if self.config.attention:
            h = encoders.attention_enhance(self.store, h)
        n = len(token_ids)
        r = encoders.word_pair_rep(h, n)
        return inference.run_inference(r, self.inference_params, n)

    def ids(self, tokens) -> np.ndarray:
        return encoders.tokens_to_ids(self.vocab, tokens)

    def predict_grid(self, tokens) -> TagGrid:
        probs = self.forward_cells(self.ids(tokens)).data
        return grid_from_probabilities(probs, len(tokens), self.task)

    def predict(self, tokens) -> DecodedResult:
        return decode(self.predict_grid(tokens))

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.store.items()}

    def restore(self, snapshot: dict[str, np.ndarray]) -> None:
        for name, data in snapshot.items():
            np.copyto(self.store[name].data, data)

    def checkpoint_obj(self) -> dict:
        ordered = sorted(self.vocab.items(), key=lambda kv: kv[1])
        return {
            "version": CHECKPOINT_VERSION,
            "config": self.config.to_dict(),
            "vocab": [token for token, _ in ordered],
            "params": self.store.to_obj(),
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.checkpoint_obj()), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "GridTagger":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        if obj.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {obj.get('version')!r}")
        config = config_from_dict(obj["config"])
        vocab = {token: k for k, token in enumerate(obj["vocab"])}
        store = ParamStore.from_obj(obj["params"])
        return cls(config, vocab, store=store)


def predict_sentences(model: GridTagger, sentences, threads: int = 1) -> list[DecodedResult]:
    """Decode every sentence; order follows the input."""
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda s: model.predict(s.tokens), sentences))
    return [model.predict(s.tokens) for s in sentences]
