"""Attention-based encoder-decoder translation model over token ids.

The architecture is deliberately small: a single-layer bidirectional GRU
encoder, a single-layer GRU decoder with global dot-product attention and
a tanh readout. It exposes the scikit-learn estimator surface
(``fit`` / ``partial_fit`` / ``predict`` / ``get_params``) next to the
explicit operations the adaptation loop needs: ``forward``,
``loss_and_grad``, ``sgd_step``, ``train_batch`` and ``decode``.

All trainable state lives in ``params_`` (name -> Tensor); everything is
seeded and deterministic for a fixed platform.
"""

from __future__ import annotations

import hashlib
import io
import json
import zipfile
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import autodiff as ad
from .autodiff import Tensor, check_finite, no_grad
from .errors import CheckpointError, NumericError
from .textpipe import BOS, EOS, PAD, Vocabulary
from .validation import check_id_sequence, check_positive

CHECKPOINT_FORMAT = "adaptmt-ckpt-v1"

#: Gradient updates rescale the gradient so its global L2 norm never
#: exceeds this; online updates on single sentences are high-variance.
MAX_GRAD_NORM = 5.0


@dataclass
class DecodeOptions:
    """Beam-search settings. ``beam_size=1`` is greedy decoding."""

    beam_size: int = 1
    max_length: int = 50
    length_penalty: float = 0.0

    def __post_init__(self):
        if self.beam_size < 1:
            raise ValueError("beam_size must be >= 1")
        if self.max_length < 1:
            raise ValueError("max_length must be >= 1")
        if self.length_penalty < 0:
            raise ValueError("length_penalty must be >= 0")


class NmtModel(BaseEstimator):
    """Toy neural MT model: bidirectional-GRU encoder, attentive GRU decoder.

    Parameters are created lazily by :meth:`init_params` (or ``fit``) with a
    seeded uniform(-0.08, 0.08) initialization. ``dtype`` is ``"float32"``
    for normal operation; gradient tests use ``"float64"``.

    ``decode``/``loss`` are read-only and safe to call concurrently on a
    frozen parameter set; anything that steps the parameters needs
    exclusive access. Callers that interleave updates with decoding must
    serialize them per model (the serving layer uses a per-project
    reader-writer lock for exactly this).
    """

    def __init__(
        self,
        src_vocab: Vocabulary,
        tgt_vocab: Vocabulary,
        embed_dim: int = 64,
        hidden_dim: int = 128,
        learning_rate: float = 0.05,
        epochs: int = 10,
        batch_size: int = 8,
        optimizer: str = "sgd",
        beam_size: int = 1,
        max_length: int = 50,
        length_penalty: float = 0.0,
        seed: int = 0,
        dtype: str = "float32",
    ):
        self.src_vocab = src_vocab
        self.tgt_vocab = tgt_vocab
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.optimizer = optimizer
        self.beam_size = beam_size
        self.max_length = max_length
        self.length_penalty = length_penalty
        self.seed = seed
        self.dtype = dtype

    # -- construction ------------------------------------------------------

    @property
    def arch(self) -> dict:
        """Architecture descriptor, persisted in checkpoints."""
        return {
            "family": "bigru-attention",
            "layers": 1,
            "attention": "dot",
            "embed_dim": self.embed_dim,
            "hidden_dim": self.hidden_dim,
            "src_vocab_size": len(self.src_vocab),
            "tgt_vocab_size": len(self.tgt_vocab),
        }

    def _np_dtype(self):
        dt = np.dtype(self.dtype)
        if dt not in (np.dtype(np.float32), np.dtype(np.float64)):
            raise ValueError("dtype must be 'float32' or 'float64'")
        return dt

    def _param_shapes(self) -> dict[str, tuple[int, ...]]:
        e, h = self.embed_dim, self.hidden_dim
        vs, vt = len(self.src_vocab), len(self.tgt_vocab)
        shapes: dict[str, tuple[int, ...]] = {
            "src_embed": (vs, e),
            "tgt_embed": (vt, e),
            "bridge.W": (2 * h, h),
            "bridge.b": (h,),
            "attn.W": (2 * h, h),
            "readout.W": (3 * h + e, h),
            "readout.b": (h,),
            "out.W": (h, vt),
            "out.b": (vt,),
        }
        for cell in ("enc_fwd", "enc_bwd", "dec"):
            shapes[f"{cell}.W_ih"] = (e, 3 * h)
            shapes[f"{cell}.W_hh"] = (h, 3 * h)
            shapes[f"{cell}.b_ih"] = (3 * h,)
            shapes[f"{cell}.b_hh"] = (3 * h,)
        return shapes

    def init_params(self, force: bool = False) -> "NmtModel":
        """Create all parameter tensors from the model seed."""
        if hasattr(self, "params_") and not force:
            return self
        rng = np.random.default_rng(self.seed)
        dt = self._np_dtype()
        self.params_ = {
            name: ad.parameter(rng.uniform(-0.08, 0.08, shape), dtype=dt)
            for name, shape in sorted(self._param_shapes().items())
        }
        return self

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise NotFittedError("model has no parameters; call init_params() or fit()")

    def num_params(self) -> int:
        self._check_fitted()
        return sum(p.data.size for p in self.params_.values())

    def param_hash(self) -> str:
        """SHA-256 over all parameter bytes; equal hash = bit-identical model."""
        self._check_fitted()
        digest = hashlib.sha256()
        for name in sorted(self.params_):
            digest.update(name.encode())
            digest.update(self.params_[name].data.tobytes())
        return digest.hexdigest()

    # -- forward computation -----------------------------------------------

    def _gru_cell(self, prefix: str, gi: Tensor, h: Tensor) -> Tensor:
        p = self.params_
        return ad.gru_cell(gi, h, p[f"{prefix}.W_hh"], p[f"{prefix}.b_hh"])

    def _gru_sequence(self, prefix: str, emb: Tensor, reverse: bool = False) -> list[Tensor]:
        p = self.params_
        xproj = emb @ p[f"{prefix}.W_ih"] + p[f"{prefix}.b_ih"]
        length = emb.shape[0]
        h = Tensor(np.zeros(self.hidden_dim, dtype=self._np_dtype()))
        states: list[Tensor] = []
        steps = range(length - 1, -1, -1) if reverse else range(length)
        for t in steps:
            h = self._gru_cell(prefix, xproj[t], h)
            states.append(h)
        if reverse:
            states.reverse()
        return states

    def _encode(self, src_ids: list[int]) -> tuple[Tensor, Tensor, Tensor]:
        p = self.params_
        emb = ad.rows(p["src_embed"], src_ids)
        fwd = self._gru_sequence("enc_fwd", emb)
        bwd = self._gru_sequence("enc_bwd", emb, reverse=True)
        enc_out = ad.stack([ad.concat([f, b]) for f, b in zip(fwd, bwd)])
        enc_proj = enc_out @ p["attn.W"]
        h0 = (ad.concat([fwd[-1], bwd[0]]) @ p["bridge.W"] + p["bridge.b"]).tanh()
        return enc_out, enc_proj, h0

    def _decode_step(
        self, emb: Tensor, gi: Tensor, h: Tensor, enc_out: Tensor, enc_proj: Tensor
    ) -> tuple[Tensor, Tensor]:
        # The readout sees the previous-token embedding directly; this keeps
        # a short gradient path to token identity, which single-pair online
        # updates rely on.
        p = self.params_
        h = self._gru_cell("dec", gi, h)
        attn_weights = ad.softmax(enc_proj @ h)
        context = attn_weights @ enc_out
        readout = (ad.concat([h, context, emb]) @ p["readout.W"] + p["readout.b"]).tanh()
        logits = readout @ p["out.W"] + p["out.b"]
        return h, logits

    def _check_ids(self, src_ids, tgt_ids=None) -> tuple[list[int], list[int] | None]:
        src = check_id_sequence(src_ids, len(self.src_vocab), name="src_ids")
        if not src:
            raise ValueError("src_ids must be non-empty")
        tgt = None
        if tgt_ids is not None:
            tgt = check_id_sequence(tgt_ids, len(self.tgt_vocab), name="tgt_ids")
            if not tgt:
                raise ValueError("tgt_ids must be non-empty")
        return src, tgt

    def forward(self, src_ids: list[int], tgt_ids: list[int]) -> Tensor:
        """Teacher-forced logits, one row per target position.

        Decoder inputs are the BOS-shifted targets, so ``logits[i]`` is the
        prediction of ``tgt_ids[i]`` given ``tgt_ids[:i]`` and the source.
        """
        self._check_fitted()
        src, tgt = self._check_ids(src_ids, tgt_ids)
        p = self.params_
        enc_out, enc_proj, h = self._encode(src)
        dec_inputs = [BOS] + tgt[:-1]
        emb = ad.rows(p["tgt_embed"], dec_inputs)
        xproj = emb @ p["dec.W_ih"] + p["dec.b_ih"]
        logit_rows: list[Tensor] = []
        for t in range(len(tgt)):
            h, logits = self._decode_step(emb[t], xproj[t], h, enc_out, enc_proj)
            logit_rows.append(logits)
        out = ad.stack(logit_rows)
        check_finite(out.data, "forward logits")
        return out

    # -- training ------------------------------------------------------------

    def loss_and_grad(self, src_ids: list[int], tgt_ids: list[int]) -> tuple[float, dict]:
        """Mean token cross-entropy of ``tgt_ids + [EOS]`` plus its gradients."""
        self._check_fitted()
        src, tgt = self._check_ids(src_ids, tgt_ids)
        targets = tgt + [EOS]
        for p in self.params_.values():
            p.grad = None
        loss = ad.cross_entropy(self.forward(src, targets), targets)
        check_finite(loss.data, "loss")
        loss.backward()
        grads = {}
        for name, p in self.params_.items():
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            check_finite(g, f"gradient of {name}")
            grads[name] = g
            p.grad = None
        return float(loss.data), grads

    def loss(self, src_ids: list[int], tgt_ids: list[int]) -> float:
        """Loss only, with no graph recorded."""
        self._check_fitted()
        src, tgt = self._check_ids(src_ids, tgt_ids)
        targets = tgt + [EOS]
        with no_grad():
            loss = ad.cross_entropy(self.forward(src, targets), targets)
        return float(loss.data)

    def sgd_step(self, grads: dict, lr: float, max_norm: float | None = MAX_GRAD_NORM) -> "NmtModel":
        """Apply one gradient-descent step ``p <- p - lr * g``.

        The gradient is rescaled first if its global norm exceeds
        ``max_norm``. On any shape mismatch or non-finite gradient no
        parameter is touched.
        """
        self._check_fitted()
        check_positive(lr, "lr")
        if set(grads) != set(self.params_):
            missing = set(self.params_) ^ set(grads)
            raise ValueError(f"gradient keys do not match parameters: {sorted(missing)}")
        total_sq = 0.0
        for name, p in self.params_.items():
            g = np.asarray(grads[name])
            if g.shape != p.data.shape:
                raise ValueError(f"gradient shape mismatch for {name}: {g.shape} != {p.data.shape}")
            if not np.all(np.isfinite(g)):
                raise NumericError(f"non-finite gradient for {name}")
            total_sq += float((g.astype(np.float64) ** 2).sum())
        scale = 1.0
        norm = np.sqrt(total_sq)
        if max_norm is not None and norm > max_norm:
            scale = max_norm / norm
        for name, p in self.params_.items():
            p.data -= (lr * scale) * np.asarray(grads[name], dtype=p.data.dtype)
        return self

    def train_batch(
        self,
        pairs: list[tuple[list[int], list[int]]],
        lr: float | None = None,
        epochs: int | None = None,
        batch_size: int | None = None,
        optimizer: str | None = None,
        seed: int | None = None,
    ) -> list[float]:
        """Shuffled minibatch training; returns the per-epoch mean loss trace."""
        self.init_params()
        pairs = list(pairs)
        if not pairs:
            raise ValueError("pairs must be non-empty")
        lr = self.learning_rate if lr is None else lr
        check_positive(lr, "lr")
        epochs = self.epochs if epochs is None else epochs
        batch_size = self.batch_size if batch_size is None else max(1, batch_size)
        optimizer = self.optimizer if optimizer is None else optimizer
        if optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {optimizer!r}")
        rng = np.random.default_rng(self.seed if seed is None else seed)

        adam_m: dict[str, np.ndarray] = {}
        adam_v: dict[str, np.ndarray] = {}
        adam_t = 0
        beta1, beta2, eps = 0.9, 0.999, 1e-8
        if optimizer == "adam":
            adam_m = {n: np.zeros(p.data.shape) for n, p in self.params_.items()}
            adam_v = {n: np.zeros(p.data.shape) for n, p in self.params_.items()}

        trace: list[float] = []
        for _ in range(epochs):
            order = rng.permutation(len(pairs))
            epoch_losses: list[float] = []
            for start in range(0, len(order), batch_size):
                batch = [pairs[i] for i in order[start : start + batch_size]]
                grad_sum: dict[str, np.ndarray] = {}
                for src, tgt in batch:
                    loss, grads = self.loss_and_grad(src, tgt)
                    epoch_losses.append(loss)
                    for name, g in grads.items():
                        if name in grad_sum:
                            grad_sum[name] += g
                        else:
                            grad_sum[name] = g.copy()
                mean_grads = {n: g / len(batch) for n, g in grad_sum.items()}
                if optimizer == "sgd":
                    self.sgd_step(mean_grads, lr)
                else:
                    adam_t += 1
                    norm = np.sqrt(sum(float((g**2).sum()) for g in mean_grads.values()))
                    scale = MAX_GRAD_NORM / norm if norm > MAX_GRAD_NORM else 1.0
                    for name, p in self.params_.items():
                        g = mean_grads[name].astype(np.float64) * scale
                        adam_m[name] = beta1 * adam_m[name] + (1 - beta1) * g
                        adam_v[name] = beta2 * adam_v[name] + (1 - beta2) * g * g
                        m_hat = adam_m[name] / (1 - beta1**adam_t)
                        v_hat = adam_v[name] / (1 - beta2**adam_t)
                        step = lr * m_hat / (np.sqrt(v_hat) + eps)
                        p.data -= step.astype(p.data.dtype)
            trace.append(float(np.mean(epoch_losses)))
        return trace

    # -- decoding --------------------------------------------------------------

    def decode(self, src_ids: list[int], opts: DecodeOptions | None = None) -> list[int]:
        """Beam-search translation of ``src_ids`` into target ids.

        Hypotheses are ranked by ``logp / len**length_penalty`` where the
        length counts the end-of-sequence slot; BOS and PAD are never
        emitted. Returns the best hypothesis without BOS/EOS.
        """
        self._check_fitted()
        src, _ = self._check_ids(src_ids)
        if opts is None:
            opts = DecodeOptions(self.beam_size, self.max_length, self.length_penalty)
        p = self.params_

        def score(logp: float, n_tokens: int) -> float:
            return logp / (float(n_tokens + 1) ** opts.length_penalty)

        with no_grad():
            enc_out, enc_proj, h0 = self._encode(src)
            # beam entries: (tokens, logp, hidden state, finished)
            beams: list[tuple[tuple[int, ...], float, Tensor, bool]] = [((), 0.0, h0, False)]
            for _ in range(opts.max_length):
                if all(b[3] for b in beams):
                    break
                candidates: list[tuple[tuple[int, ...], float, Tensor, bool]] = []
                for tokens, logp, h, finished in beams:
                    if finished:
                        candidates.append((tokens, logp, h, True))
                        continue
                    last = tokens[-1] if tokens else BOS
                    emb = p["tgt_embed"][last]
                    gi = emb @ p["dec.W_ih"] + p["dec.b_ih"]
                    h_new, logits = self._decode_step(emb, gi, h, enc_out, enc_proj)
                    check_finite(logits.data, "decoder logits")
                    logprobs = ad.log_softmax_np(logits.data).astype(np.float64)
                    logprobs[PAD] = -np.inf
                    logprobs[BOS] = -np.inf
                    top = np.argsort(-logprobs, kind="stable")[: opts.beam_size]
                    for tok in top:
                        tok = int(tok)
                        if tok == EOS:
                            candidates.append((tokens, logp + logprobs[tok], h, True))
                        else:
                            candidates.append((tokens + (tok,), logp + logprobs[tok], h_new, False))
                candidates.sort(key=lambda c: (-score(c[1], len(c[0])), c[0]))
                beams = candidates[: opts.beam_size]
            best = beams[0]
            return list(best[0])

    def hypothesis_score(self, src_ids: list[int], tgt_ids: list[int], opts: DecodeOptions) -> float:
        """Length-penalized score of a full hypothesis (with its EOS step)."""
        self._check_fitted()
        src, tgt = self._check_ids(src_ids, tgt_ids)
        targets = tgt + [EOS]
        with no_grad():
            logits = self.forward(src, targets)
            logp = ad.log_softmax_np(logits.data)
        total = float(logp[np.arange(len(targets)), targets].sum())
        return total / (float(len(tgt) + 1) ** opts.length_penalty)

    # -- estimator facade --------------------------------------------------------

    def fit(self, X, y):
        """Offline training on parallel id sequences (wraps ``train_batch``)."""
        self.init_params()
        self.train_history_ = self.train_batch(list(zip(X, y)))
        return self

    def partial_fit(self, X, y, lr: float | None = None):
        """One online gradient step per (source, target) pair, in order."""
        self.init_params()
        lr = self.learning_rate if lr is None else lr
        for src, tgt in zip(X, y):
            _, grads = self.loss_and_grad(src, tgt)
            self.sgd_step(grads, lr)
        return self

    def predict(self, X) -> list[list[int]]:
        return [self.decode(ids) for ids in X]

    # -- persistence ---------------------------------------------------------

    def save_checkpoint(self, path) -> None:
        """Write a self-contained checkpoint: arch, parameters and vocabularies.

        Parameters are stored as little-endian 64-bit floats regardless of
        the runtime dtype, so a float32 model round-trips bit-identically.
        """
        self._check_fitted()
        names = sorted(self.params_)
        meta = {
            "format": CHECKPOINT_FORMAT,
            "arch": self.arch,
            "rng_seed": self.seed,
            "dtype": str(self._np_dtype().name),
            "src_vocab_file": "src_vocab.txt",
            "tgt_vocab_file": "tgt_vocab.txt",
            "params": [{"name": n, "shape": list(self.params_[n].data.shape)} for n in names],
        }
        blob = io.BytesIO()
        for name in names:
            blob.write(self.params_[name].data.astype("<f8").tobytes())
        with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
            zf.writestr("meta.json", json.dumps(meta, indent=1))
            zf.writestr("params.bin", blob.getvalue())
            zf.writestr("src_vocab.txt", "".join(t + "\n" for t in self.src_vocab.token_of_))
            zf.writestr("tgt_vocab.txt", "".join(t + "\n" for t in self.tgt_vocab.token_of_))

    @classmethod
    def load_checkpoint(cls, path) -> "NmtModel":
        try:
            with zipfile.ZipFile(path) as zf:
                meta = json.loads(zf.read("meta.json"))
                if meta.get("format") != CHECKPOINT_FORMAT:
                    raise CheckpointError(
                        f"incompatible checkpoint: format {meta.get('format')!r}, "
                        f"expected {CHECKPOINT_FORMAT!r}"
                    )
                src_vocab = Vocabulary.from_tokens(
                    zf.read(meta["src_vocab_file"]).decode("utf-8").splitlines()
                )
                tgt_vocab = Vocabulary.from_tokens(
                    zf.read(meta["tgt_vocab_file"]).decode("utf-8").splitlines()
                )
                raw = zf.read("params.bin")
        except CheckpointError:
            raise
        except (zipfile.BadZipFile, KeyError, ValueError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"cannot parse checkpoint {path!r}: {exc}") from exc

        arch = meta["arch"]
        model = cls(
            src_vocab,
            tgt_vocab,
            embed_dim=int(arch["embed_dim"]),
            hidden_dim=int(arch["hidden_dim"]),
            seed=int(meta.get("rng_seed", 0)),
            dtype=str(meta.get("dtype", "float32")),
        )
        expected = model._param_shapes()
        dt = model._np_dtype()
        params: dict[str, Tensor] = {}
        offset = 0
        for entry in meta["params"]:
            name, shape = entry["name"], tuple(entry["shape"])
            if name not in expected or expected[name] != shape:
                raise CheckpointError(f"incompatible checkpoint: unexpected parameter {name} {shape}")
            size = int(np.prod(shape))
            arr = np.frombuffer(raw, dtype="<f8", count=size, offset=offset).reshape(shape)
            params[name] = ad.parameter(arr.astype(dt, copy=True), dtype=dt)
            offset += size * 8
        if set(params) != set(expected):
            raise CheckpointError("incompatible checkpoint: parameter set mismatch")
        if offset != len(raw):
            raise CheckpointError("incompatible checkpoint: parameter payload size mismatch")
        model.params_ = params
        return model
