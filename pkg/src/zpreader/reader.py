"""Attentive bidirectional-GRU reader over cloze triples.

The document and query are embedded through one shared table, encoded by
separate bidirectional GRUs, and combined by additive attention: each
document state is scored against the mean query state, the attention-
blended document representation is concatenated with the query state,
and a linear layer over that joint vector produces a distribution over
the full vocabulary.  Training minimizes the negative log probability
of the answer token.
"""

import json
import struct
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import FingerprintError, ShapeError, ValidationError
from .tensorcore import (
    Tensor,
    add,
    concat,
    flip0,
    gru_sequence,
    matmul,
    mean_over_axis,
    neg_log,
    no_grad,
    orthogonal_init,
    parameter,
    pick,
    softmax,
    take_rows,
    tanh,
    uniform_init,
    zeros_init,
)

INIT_RANGE = 0.1

_CKPT_MAGIC = b"ZPRDR1\n"
_CKPT_VERSION = 1


@dataclass(frozen=True)
class ReaderConfig:
    """Model dimensions and the seed its parameters are drawn from."""

    vocab_total: int
    embed_dim: int = 256
    hidden_dim: int = 256
    rng_seed: int = 0
    dtype: str = "float64"

    def __post_init__(self):
        if self.vocab_total < 3:
            raise ValidationError(f"vocab_total must cover the reserved ids, got {self.vocab_total}")
        if self.embed_dim < 1 or self.hidden_dim < 1:
            raise ValidationError("embed_dim and hidden_dim must be positive")
        if self.dtype not in ("float64", "float32"):
            raise ValidationError(f"dtype must be float64 or float32, got {self.dtype!r}")
        if self.rng_seed < 0:
            raise ValidationError("rng_seed must be non-negative")

    @property
    def np_dtype(self):
        return np.float64 if self.dtype == "float64" else np.float32


@dataclass
class GRUParams:
    """One direction of one encoder: input projections, recurrent
    matrices, and gate biases for update / reset / candidate."""

    w_update: Tensor
    w_reset: Tensor
    w_cand: Tensor
    u_update: Tensor
    u_reset: Tensor
    u_cand: Tensor
    b_update: Tensor
    b_reset: Tensor
    b_cand: Tensor

    FIELDS = ("w_update", "w_reset", "w_cand",
              "u_update", "u_reset", "u_cand",
              "b_update", "b_reset", "b_cand")

    def named(self, prefix: str) -> Dict[str, Tensor]:
        return {f"{prefix}.{f}": getattr(self, f) for f in self.FIELDS}


_ENCODER_ORDER = ("doc_fwd", "doc_bwd", "query_fwd", "query_bwd")


@dataclass
class ReaderParams:
    embedding: Tensor
    doc_fwd: GRUParams
    doc_bwd: GRUParams
    query_fwd: GRUParams
    query_bwd: GRUParams
    att_doc: Tensor      # (2H, 2H), right-multiplies document states
    att_query: Tensor    # (2H, 2H), left-multiplies the query vector
    att_score: Tensor    # (2H,)
    out_proj: Tensor     # (V, 4H)

    def named(self) -> Dict[str, Tensor]:
        """Canonical name -> tensor mapping; iteration order is the
        serialization order."""
        out: Dict[str, Tensor] = {"embedding": self.embedding}
        for enc in _ENCODER_ORDER:
            out.update(getattr(self, enc).named(enc))
        out["att_doc"] = self.att_doc
        out["att_query"] = self.att_query
        out["att_score"] = self.att_score
        out["out_proj"] = self.out_proj
        return out

    def tensors(self) -> List[Tensor]:
        return list(self.named().values())

    def zero_grads(self) -> None:
        for t in self.tensors():
            t.zero_grad()

    def clone(self) -> "ReaderParams":
        def cp(t: Tensor) -> Tensor:
            return parameter(t.data.copy())

        def cp_gru(g: GRUParams) -> GRUParams:
            return GRUParams(*(cp(getattr(g, f)) for f in GRUParams.FIELDS))

        return ReaderParams(
            embedding=cp(self.embedding),
            doc_fwd=cp_gru(self.doc_fwd),
            doc_bwd=cp_gru(self.doc_bwd),
            query_fwd=cp_gru(self.query_fwd),
            query_bwd=cp_gru(self.query_bwd),
            att_doc=cp(self.att_doc),
            att_query=cp(self.att_query),
            att_score=cp(self.att_score),
            out_proj=cp(self.out_proj),
        )


def _init_gru(in_dim: int, hidden: int, rng, dtype) -> GRUParams:
    lo, hi = -INIT_RANGE, INIT_RANGE
    w = [uniform_init((in_dim, hidden), lo, hi, rng, dtype) for _ in range(3)]
    u = [orthogonal_init(hidden, hidden, rng, dtype) for _ in range(3)]
    b = [zeros_init((hidden,), dtype) for _ in range(3)]
    return GRUParams(w[0], w[1], w[2], u[0], u[1], u[2], b[0], b[1], b[2])


def init_params(cfg: ReaderConfig) -> ReaderParams:
    """Draw fresh parameters.

    All non-recurrent weights are uniform on [-0.1, 0.1]; recurrent
    matrices are orthogonal; biases start at zero.  The draw order is
    fixed so a seed pins every tensor.
    """
    rng = np.random.default_rng(cfg.rng_seed)
    dt = cfg.np_dtype
    lo, hi = -INIT_RANGE, INIT_RANGE
    v, e, h = cfg.vocab_total, cfg.embed_dim, cfg.hidden_dim
    embedding = uniform_init((v, e), lo, hi, rng, dt)
    encoders = [_init_gru(e, h, rng, dt) for _ in _ENCODER_ORDER]
    att_doc = uniform_init((2 * h, 2 * h), lo, hi, rng, dt)
    att_query = uniform_init((2 * h, 2 * h), lo, hi, rng, dt)
    att_score = uniform_init((2 * h,), lo, hi, rng, dt)
    out_proj = uniform_init((v, 4 * h), lo, hi, rng, dt)
    return ReaderParams(embedding, encoders[0], encoders[1], encoders[2],
                        encoders[3], att_doc, att_query, att_score, out_proj)


def param_shapes(cfg: ReaderConfig) -> Dict[str, Tuple[int, ...]]:
    """Canonical name -> shape manifest for a configuration."""
    v, e, h = cfg.vocab_total, cfg.embed_dim, cfg.hidden_dim
    shapes: Dict[str, Tuple[int, ...]] = {"embedding": (v, e)}
    for enc in _ENCODER_ORDER:
        for f in GRUParams.FIELDS:
            if f.startswith("w_"):
                shapes[f"{enc}.{f}"] = (e, h)
            elif f.startswith("u_"):
                shapes[f"{enc}.{f}"] = (h, h)
            else:
                shapes[f"{enc}.{f}"] = (h,)
    shapes["att_doc"] = (2 * h, 2 * h)
    shapes["att_query"] = (2 * h, 2 * h)
    shapes["att_score"] = (2 * h,)
    shapes["out_proj"] = (v, 4 * h)
    return shapes


def _zero_params(cfg: ReaderConfig) -> ReaderParams:
    shapes = param_shapes(cfg)

    def z(name):
        return parameter(np.zeros(shapes[name], dtype=cfg.np_dtype))

    def z_gru(enc):
        return GRUParams(*(z(f"{enc}.{f}") for f in GRUParams.FIELDS))

    return ReaderParams(z("embedding"), z_gru("doc_fwd"), z_gru("doc_bwd"),
                        z_gru("query_fwd"), z_gru("query_bwd"),
                        z("att_doc"), z("att_query"), z("att_score"), z("out_proj"))


def _run_direction(x: Tensor, g: GRUParams) -> Tensor:
    xz = add(matmul(x, g.w_update), g.b_update)
    xr = add(matmul(x, g.w_reset), g.b_reset)
    xh = add(matmul(x, g.w_cand), g.b_cand)
    return gru_sequence(xz, xr, xh, g.u_update, g.u_reset, g.u_cand)


def _encode(ids: Sequence[int], embedding: Tensor,
            fwd: GRUParams, bwd: GRUParams) -> Tensor:
    """Embed a token sequence and return (T, 2H) bidirectional states."""
    x = take_rows(embedding, ids)
    h_f = _run_direction(x, fwd)
    h_b = flip0(_run_direction(flip0(x), bwd))
    return concat([h_f, h_b], axis=1)


@dataclass
class ForwardResult:
    dist: Tensor        # (V,) output distribution
    attention: Tensor   # (T_doc,) weights over document positions
    h_query: Tensor     # (2H,) mean bidirectional query state
    doc_states: Tensor  # (T_doc, 2H)


def forward(params: ReaderParams, doc_ids: Sequence[int],
            query_ids: Sequence[int]) -> ForwardResult:
    if len(doc_ids) == 0 or len(query_ids) == 0:
        raise ValidationError("reader forward needs non-empty document and query")
    doc_states = _encode(doc_ids, params.embedding, params.doc_fwd, params.doc_bwd)
    query_states = _encode(query_ids, params.embedding,
                           params.query_fwd, params.query_bwd)
    h_query = mean_over_axis(query_states, axis=0)
    m = tanh(add(matmul(doc_states, params.att_doc),
                 matmul(params.att_query, h_query)))
    alpha = softmax(matmul(m, params.att_score))
    h_att = matmul(alpha, doc_states)
    joint = concat([h_att, h_query], axis=0)
    dist = softmax(matmul(params.out_proj, joint))
    return ForwardResult(dist=dist, attention=alpha,
                         h_query=h_query, doc_states=doc_states)


def loss(params: ReaderParams, doc_ids: Sequence[int],
         query_ids: Sequence[int], answer_id: int) -> Tuple[Tensor, ForwardResult]:
    """Negative log probability of the answer id (record on the active
    tape when one is open)."""
    result = forward(params, doc_ids, query_ids)
    return neg_log(pick(result.dist, answer_id)), result


def predict(params: ReaderParams, doc_ids: Sequence[int],
            query_ids: Sequence[int],
            restrict_to_context: bool = True) -> Tuple[int, float]:
    """Most probable token id (and its probability), off-tape.

    With ``restrict_to_context`` the argmax runs over the ids present in
    the document, which keeps every prediction recoverable to a surface
    form; ties break toward the lowest id.
    """
    with no_grad():
        dist = forward(params, doc_ids, query_ids).dist.data
    if restrict_to_context:
        pool = np.unique(np.asarray(doc_ids, dtype=np.int64))
    else:
        pool = np.arange(dist.shape[0], dtype=np.int64)
    best = pool[int(np.argmax(dist[pool]))]
    return int(best), float(dist[best])


# --------------------------------------------------------------------------
# Checkpoints: magic, fixed-size header length, JSON header, then raw
# float64 little-endian tensor bytes in canonical parameter order.

def save_checkpoint(path, params: ReaderParams, cfg: ReaderConfig,
                    vocab_fingerprint: str, extra: Optional[dict] = None) -> None:
    named = params.named()
    header = {
        "version": _CKPT_VERSION,
        "config": {
            "vocab_total": cfg.vocab_total,
            "embed_dim": cfg.embed_dim,
            "hidden_dim": cfg.hidden_dim,
            "rng_seed": cfg.rng_seed,
            "dtype": cfg.dtype,
        },
        "vocab_fingerprint": vocab_fingerprint,
        "tensors": [[name, list(t.shape)] for name, t in named.items()],
        "extra": extra or {},
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for _, t in named.items():
            fh.write(np.ascontiguousarray(t.data, dtype="<f8").tobytes())


def _read_exact(fh, n: int, path) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise ValidationError(f"{path}: truncated checkpoint")
    return buf


def load_checkpoint(path, expected_fingerprint: Optional[str] = None,
                    ) -> Tuple[ReaderParams, ReaderConfig, dict]:
    """Read a checkpoint back; returns (params, config, header).

    Shapes are re-derived from the stored config and verified against
    the stored manifest, so a corrupt or mismatched file fails loudly.
    """
    with open(path, "rb") as fh:
        if _read_exact(fh, len(_CKPT_MAGIC), path) != _CKPT_MAGIC:
            raise ValidationError(f"{path}: not a reader checkpoint")
        (hlen,) = struct.unpack("<Q", _read_exact(fh, 8, path))
        try:
            header = json.loads(_read_exact(fh, hlen, path).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ValidationError(f"{path}: bad checkpoint header: {exc}") from exc
        if header.get("version") != _CKPT_VERSION:
            raise ValidationError(
                f"{path}: unsupported checkpoint version {header.get('version')!r}")
        if expected_fingerprint is not None \
                and header.get("vocab_fingerprint") != expected_fingerprint:
            raise FingerprintError(
                f"{path}: checkpoint was trained against vocabulary "
                f"{header.get('vocab_fingerprint')!r}, expected {expected_fingerprint!r}")
        cfg = ReaderConfig(**header["config"])
        fresh = _zero_params(cfg)
        named = fresh.named()
        manifest = [(name, tuple(shape)) for name, shape in header["tensors"]]
        if [n for n, _ in manifest] != list(named.keys()):
            raise ValidationError(f"{path}: checkpoint tensor manifest does not match")
        for name, shape in manifest:
            t = named[name]
            if t.shape != shape:
                raise ShapeError(
                    f"{path}: tensor {name} has shape {shape}, expected {t.shape}")
            n_bytes = int(np.prod(shape, dtype=np.int64)) * 8 if shape else 8
            raw = np.frombuffer(_read_exact(fh, n_bytes, path), dtype="<f8")
            t.data = raw.reshape(shape).astype(cfg.np_dtype)
        if fh.read(1):
            raise ValidationError(f"{path}: trailing bytes after checkpoint payload")
    return fresh, cfg, header
