"""Block-Markov MAC-resolvability encoders.

Each transmitter stream runs a hash chain over k blocks of length N: block 1
is seeded with fresh uniform bits at rate H(S) + eps, every later block
re-seeds the black-box source-resolvability codec with the two-universal hash
of the previous block's output sequence (rate H(S | side-info) - eps/2)
concatenated with fresh bits (rate I(S; side-info) + eps).  The two-user
construction comes in two flavors:

* case 1 (I(XY;Z) > I(X;Z) + I(Y;Z)): transmitter 2 is rate-split into
  virtual users U, V with Y = max(U, V), one chain each;
* case 2 (equality): transmitter 2 runs a single chain for Y directly.

The L-user construction runs one chain per transmitter; the chosen user
order selects which corner of the dominant face is targeted.

All bit lengths are tolerant ceilings of the real-valued formulas; the codec
input width is pinned to hash_len + rest-block fresh length so the chain
concatenation ties out exactly in integers.  At desk-scale N the analysis
epsilon makes some hash lengths negative; they clamp to zero and the plan is
flagged ``asymptotic_only``.  Idealized overrides (xi', delta', possibly 0)
let the recycling mechanism run at small N anyway.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .hashing import ToeplitzHash, sample_hash
from .polar import ResolvabilityCode, compute_profile, encode_batch
from .probcore import Dist, MacChannel, entropy, make_rng, \
    conditional_entropy, mutual_information, transmit
from .ratesplit import SplitPoint, split_joint, split_rates, solve_eps

__all__ = [
    "IdealizedOverrides",
    "StreamPlan",
    "LengthPlan",
    "MacCode",
    "BatchTranscript",
    "make_plan",
    "make_plan_multi",
    "build_mac_code",
    "encode_tx1",
    "encode_tx2",
    "encode_case2",
    "encode_multi",
    "run_trials",
    "achieved_rates",
    "classify_two_user",
    "delta_concentration",
    "delta_concentration_multi",
    "code_to_descriptor",
    "code_from_descriptor",
    "descriptor_hash",
    "transcript_to_csv",
]

CASE_TOL = 1e-9


def _ceil_bits(x: float) -> int:
    """Tolerant ceiling: absorbs 1e-9 of float fuzz before rounding up."""
    return max(0, math.ceil(x - 1e-9))


def delta_concentration(ch: MacChannel, block_len: int) -> float:
    """Finite-block concentration term for the two-user construction.

    log2(|Y|^2 |X| + 3) * sqrt((2/N)(3 + log2 N)).
    """
    size_x = ch.input_alphabets[0].size
    size_y = ch.input_alphabets[1].size
    return math.log2(size_y ** 2 * size_x + 3) * math.sqrt(
        (2.0 / block_len) * (3.0 + math.log2(block_len))
    )


def delta_concentration_multi(ch: MacChannel, block_len: int) -> float:
    """L-user concentration term log2(|X_L| + 3) * sqrt((2/N)(L + log2 N))."""
    n_users = ch.n_users
    joint_size = int(np.prod([a.size for a in ch.input_alphabets]))
    return math.log2(joint_size + 3) * math.sqrt(
        (2.0 / block_len) * (n_users + math.log2(block_len))
    )


@dataclass(frozen=True)
class IdealizedOverrides:
    """User-supplied (xi', delta') replacing the loose analysis constants."""

    xi: float = 0.0
    delta: float = 0.0


@dataclass(frozen=True)
class StreamPlan:
    """Length bookkeeping for one hash-chain stream."""

    name: str
    source_entropy: float        # H(S)
    recycle_entropy: float       # H(S | side info), sets the hash length
    fresh_info: float            # I(S; side info), sets rest-block fresh bits
    hash_len: int                # r_s, clamped at 0
    hash_len_unclamped: float    # N * (recycle_entropy - eps/2)
    seed_len_first: int          # fresh bits charged in block 1
    seed_len_rest: int           # fresh bits in blocks 2..k
    codec_width: int             # hash_len + seed_len_rest
    clamped: bool
    widened: bool = False


@dataclass(frozen=True)
class LengthPlan:
    """Complete length/rate plan for one block-Markov code."""

    block_len: int
    k: int
    xi: float
    eps: float
    delta: float
    mode: str                    # "case1" | "case2" | "multi"
    streams: tuple[StreamPlan, ...]
    idealized: bool = False

    def __post_init__(self):
        if self.block_len & (self.block_len - 1) or self.block_len < 1:
            raise ValueError(f"N must be a power of two, got {self.block_len}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")

    @property
    def asymptotic_only(self) -> bool:
        return any(s.clamped for s in self.streams)

    def stream(self, name: str) -> StreamPlan:
        for s in self.streams:
            if s.name == name:
                return s
        raise KeyError(name)


def _plan_stream(
    name: str,
    h_source: float,
    h_recycle: float,
    i_fresh: float,
    block_len: int,
    eps: float,
    min_codec_width: int | None,
) -> StreamPlan:
    raw_hash = block_len * (h_recycle - eps / 2.0)
    hash_len = _ceil_bits(raw_hash)
    clamped = raw_hash < -1e-12
    seed_rest = _ceil_bits(block_len * (i_fresh + eps))
    width = hash_len + seed_rest
    widened = False
    if min_codec_width is not None and width < min_codec_width:
        seed_rest += min_codec_width - width
        width = min_codec_width
        widened = True
    seed_first = max(_ceil_bits(block_len * (h_source + eps)), width)
    return StreamPlan(
        name=name,
        source_entropy=h_source,
        recycle_entropy=h_recycle,
        fresh_info=i_fresh,
        hash_len=hash_len,
        hash_len_unclamped=raw_hash,
        seed_len_first=seed_first,
        seed_len_rest=seed_rest,
        codec_width=width,
        clamped=clamped,
        widened=widened,
    )


def classify_two_user(ch: MacChannel, p_x: Dist, p_y: Dist) -> str:
    """Dichotomy on I(XY;Z) vs I(X;Z) + I(Y;Z) at 1e-9 (strict gap: case 1)."""
    j = ch.joint_with_output([p_x, p_y])
    gap = mutual_information(j, [0, 1], [2]) - (
        mutual_information(j, [0], [2]) + mutual_information(j, [1], [2])
    )
    if gap < -CASE_TOL:
        raise AssertionError(
            f"I(XY;Z) below I(X;Z)+I(Y;Z) by {-gap}; inputs are not independent?"
        )
    return "case1" if gap > CASE_TOL else "case2"


def make_plan(
    ch: MacChannel,
    p_x: Dist,
    split: SplitPoint | None,
    block_len: int,
    k: int,
    xi: float,
    *,
    p_y: Dist | None = None,
    idealized: IdealizedOverrides | None = None,
    min_codec_widths: dict[str, int] | None = None,
) -> LengthPlan:
    """Two-user length plan; ``split`` present selects case 1, absent case 2.

    Entropic quantities are computed exactly from the joint law.  Case 2
    requires ``p_y``.  ``min_codec_widths`` (per stream) raises rest-block
    fresh lengths when a concrete codec needs a wider input than the formula
    provides, which can only happen with idealized overrides.
    """
    if block_len & (block_len - 1) or block_len < 1:
        raise ValueError(f"N must be a power of two, got {block_len}")
    if xi <= 0 and idealized is None:
        raise ValueError("xi must be > 0 (or pass idealized overrides)")
    delta = delta_concentration(ch, block_len)
    if idealized is not None:
        delta = idealized.delta
        xi = idealized.xi
    eps = 2.0 * (delta + xi)
    widths = min_codec_widths or {}

    if split is not None:
        j = split_joint(ch, p_x, split.p_u, split.p_v)
        u, v, x, y, z = range(5)
        streams = (
            _plan_stream("x", entropy(p_x),
                         conditional_entropy(j, [x], [u, z]),
                         mutual_information(j, [x], [u, z]),
                         block_len, eps, widths.get("x")),
            _plan_stream("u", entropy(split.p_u),
                         conditional_entropy(j, [u], [z]),
                         mutual_information(j, [u], [z]),
                         block_len, eps, widths.get("u")),
            _plan_stream("v", entropy(split.p_v),
                         conditional_entropy(j, [v], [u, z, x]),
                         mutual_information(j, [v], [u, z, x]),
                         block_len, eps, widths.get("v")),
        )
        mode = "case1"
    else:
        if p_y is None:
            raise ValueError("case 2 plan needs p_y")
        j = ch.joint_with_output([p_x, p_y])
        x, y, z = range(3)
        streams = (
            _plan_stream("x", entropy(p_x),
                         conditional_entropy(j, [x], [z]),
                         mutual_information(j, [x], [z]),
                         block_len, eps, widths.get("x")),
            _plan_stream("y", entropy(p_y),
                         conditional_entropy(j, [y], [z, x]),
                         mutual_information(j, [y], [z, x]),
                         block_len, eps, widths.get("y")),
        )
        mode = "case2"
    return LengthPlan(block_len, k, xi, eps, delta, mode, streams,
                      idealized=idealized is not None)


def make_plan_multi(
    ch: MacChannel,
    inputs: Sequence[Dist],
    order: Sequence[int],
    block_len: int,
    k: int,
    xi: float,
    *,
    idealized: IdealizedOverrides | None = None,
    min_codec_widths: dict[str, int] | None = None,
) -> LengthPlan:
    """L-user length plan targeting the corner selected by ``order``.

    ``order`` lists 0-based user indices; user order[l] is conditioned on
    Z and the users earlier in the order.
    """
    if sorted(order) != list(range(ch.n_users)):
        raise ValueError(f"order {order} is not a permutation of 0..{ch.n_users - 1}")
    if block_len & (block_len - 1) or block_len < 1:
        raise ValueError(f"N must be a power of two, got {block_len}")
    if xi <= 0 and idealized is None:
        raise ValueError("xi must be > 0 (or pass idealized overrides)")
    delta = delta_concentration_multi(ch, block_len)
    if idealized is not None:
        delta = idealized.delta
        xi = idealized.xi
    eps = 2.0 * (delta + xi)
    widths = min_codec_widths or {}
    j = ch.joint_with_output(list(inputs))
    z_axis = ch.n_users
    streams = []
    earlier: list[int] = []
    for user in order:
        name = f"x{user + 1}"
        streams.append(_plan_stream(
            name,
            entropy(inputs[user]),
            conditional_entropy(j, [user], [z_axis] + earlier),
            mutual_information(j, [user], [z_axis] + earlier),
            block_len, eps, widths.get(name),
        ))
        earlier.append(user)
    return LengthPlan(block_len, k, xi, eps, delta, "multi", tuple(streams),
                      idealized=idealized is not None)


@dataclass(frozen=True)
class MacCode:
    """A complete block-Markov MAC-resolvability code.

    ``codecs`` and ``hashes`` are keyed by stream name in plan order.
    ``user_order`` (multi mode) maps chain position to 0-based user index.
    """

    channel: MacChannel
    input_dists: tuple[Dist, ...]
    plan: LengthPlan
    split: SplitPoint | None
    codecs: dict[str, ResolvabilityCode]
    hashes: dict[str, ToeplitzHash]
    user_order: tuple[int, ...] | None = None
    profile_seed: int | None = None   # only set when profiling was sampled

    def __post_init__(self):
        if (self.plan.mode == "case1") != (self.split is not None):
            raise ValueError("split must be present exactly in case-1 mode")
        for s in self.plan.streams:
            codec = self.codecs[s.name]
            h = self.hashes[s.name]
            if codec.block_len != self.plan.block_len:
                raise ValueError(f"stream {s.name}: codec block length mismatch")
            if codec.seed_len > s.codec_width:
                raise ValueError(
                    f"stream {s.name}: codec needs {codec.seed_len} seed bits, "
                    f"plan width is {s.codec_width}; increase xi or N"
                )
            if h.out_len != s.hash_len or h.in_len != self.plan.block_len:
                raise ValueError(f"stream {s.name}: hash dimensions mismatch")
        if self.plan.mode == "multi":
            if self.user_order is None or len(self.user_order) != self.channel.n_users:
                raise ValueError("multi mode needs a full user_order")

    @property
    def mode(self) -> str:
        return self.plan.mode

    def channel_stream_names(self) -> tuple[str, ...]:
        """Stream names feeding channel users 1..L, in user order."""
        if self.plan.mode == "case1":
            return ("x", "y")
        if self.plan.mode == "case2":
            return ("x", "y")
        names = [""] * self.channel.n_users
        for pos, user in enumerate(self.user_order):
            names[user] = self.plan.streams[pos].name
        return tuple(names)


def build_mac_code(
    ch: MacChannel,
    inputs: Sequence[Dist],
    *,
    mode: str = "auto",
    block_len: int,
    k: int,
    xi: float,
    beta: float = 0.25,
    target_r1: float | None = None,
    eps_split: float | None = None,
    order: Sequence[int] | None = None,
    idealized: IdealizedOverrides | None = None,
    rng: np.random.Generator,
    mc_profile_samples: int = 1 << 14,
) -> MacCode:
    """Compose plan, rate split, polar profiles, and hashes into a MacCode.

    Mode ``auto`` resolves two-user channels to case1/case2 by the exact
    dichotomy; requesting the wrong case raises.  Hash functions are sampled
    once here and stay fixed for all blocks and trials.
    """
    inputs = list(inputs)
    if mode == "auto":
        mode = classify_two_user(ch, inputs[0], inputs[1]) if ch.n_users == 2 \
            else "multi"
    split = None
    user_order: tuple[int, ...] | None = None

    if mode in ("case1", "case2"):
        if ch.n_users != 2:
            raise ValueError(f"{mode} needs a two-user channel")
        actual = classify_two_user(ch, inputs[0], inputs[1])
        if actual != mode:
            raise ValueError(
                f"channel is {actual} (dichotomy at {CASE_TOL}); refusing {mode}"
            )
    if mode == "case1":
        q = float(inputs[1].pmf[1])
        if target_r1 is not None:
            split = solve_eps(ch, inputs[0], q, target_r1)
        else:
            split = split_rates(ch, inputs[0], q, 0.5 if eps_split is None else eps_split)
        sources = {"x": inputs[0], "u": split.p_u, "v": split.p_v}
    elif mode == "case2":
        sources = {"x": inputs[0], "y": inputs[1]}
    elif mode == "multi":
        user_order = tuple(order) if order is not None else tuple(range(ch.n_users))
        sources = {f"x{u + 1}": inputs[u] for u in user_order}
    else:
        raise ValueError(f"unknown mode {mode!r}")

    n_exp = block_len.bit_length() - 1
    if 1 << n_exp != block_len:
        raise ValueError(f"N must be a power of two, got {block_len}")
    from .polar import EXACT_CAP_N

    profile_seed = None
    if block_len > EXACT_CAP_N:
        profile_seed = int(rng.integers(0, 2 ** 63 - 1))
    codecs = {}
    for idx, (name, src) in enumerate(sources.items()):
        if profile_seed is None:
            prof = compute_profile(src, n_exp, beta)
        else:
            child = np.random.SeedSequence(profile_seed, spawn_key=(idx,))
            prof = compute_profile(src, n_exp, beta,
                                   mc_samples=mc_profile_samples,
                                   rng=make_rng(child))
        codecs[name] = ResolvabilityCode(prof)
    widths = {name: codecs[name].seed_len for name in sources}

    if mode == "multi":
        plan = make_plan_multi(ch, inputs, user_order, block_len, k, xi,
                               idealized=idealized, min_codec_widths=widths)
    else:
        plan = make_plan(ch, inputs[0], split, block_len, k, xi,
                         p_y=inputs[1] if mode == "case2" else None,
                         idealized=idealized, min_codec_widths=widths)
    if plan.asymptotic_only and idealized is None:
        warnings.warn(
            "plan is asymptotic-only: some hash lengths clamped to 0 at this N",
            stacklevel=2,
        )
    hashes = {
        s.name: sample_hash(rng, block_len, s.hash_len) for s in plan.streams
    }
    return MacCode(ch, tuple(inputs), plan, split, codecs, hashes,
                   user_order=user_order, profile_seed=profile_seed)


# -- encoding ------------------------------------------------------------------


def _chain_encode(
    codec: ResolvabilityCode,
    h: ToeplitzHash,
    stream: StreamPlan,
    fresh: Sequence[np.ndarray],
    rng: np.random.Generator,
    recycle: bool,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Run one stream's hash chain over k blocks.

    ``fresh[i]`` is the block-(i+1) fresh seed batch; block 1 feeds the codec
    its first ``codec_width`` bits, later blocks feed hash(previous block)
    concatenated with the fresh bits.  With ``recycle=False`` the hash output
    is replaced by fresh uniform bits (ablation baseline).
    """
    k = len(fresh)
    if fresh[0].shape[1] != stream.seed_len_first:
        raise ValueError(
            f"stream {stream.name}: block-1 seed width {fresh[0].shape[1]}, "
            f"plan says {stream.seed_len_first}"
        )
    seqs: list[np.ndarray] = []
    recycled: list[np.ndarray] = []
    for i in range(k):
        if i == 0:
            codec_in = fresh[0][:, :stream.codec_width]
        else:
            if fresh[i].shape[1] != stream.seed_len_rest:
                raise ValueError(
                    f"stream {stream.name}: block-{i + 1} seed width "
                    f"{fresh[i].shape[1]}, plan says {stream.seed_len_rest}"
                )
            if recycle:
                rec = h.apply_batch(seqs[i - 1])
            else:
                rec = rng.integers(0, 2, size=(fresh[i].shape[0], stream.hash_len),
                                   dtype=np.uint8)
            recycled.append(rec)
            codec_in = np.concatenate([rec, fresh[i]], axis=1)
        seqs.append(encode_batch(codec, codec_in[:, :codec.seed_len], rng))
    return seqs, recycled


def encode_tx1(
    code: MacCode, seeds: Sequence[np.ndarray], rng: np.random.Generator,
    *, recycle: bool = True,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Transmitter-1 chain (stream "x"): per-block sequences and recycled bits."""
    s = code.plan.stream("x")
    return _chain_encode(code.codecs["x"], code.hashes["x"], s, seeds, rng, recycle)


def encode_tx2(
    code: MacCode,
    seeds_u: Sequence[np.ndarray],
    seeds_v: Sequence[np.ndarray],
    rng: np.random.Generator,
    *, recycle: bool = True,
) -> dict[str, list[np.ndarray]]:
    """Transmitter-2 case-1 chains: virtual users U, V and Y = max(U, V)."""
    if code.mode != "case1":
        raise ValueError("encode_tx2 runs the case-1 rate-split construction")
    us, rec_u = _chain_encode(code.codecs["u"], code.hashes["u"],
                              code.plan.stream("u"), seeds_u, rng, recycle)
    vs, rec_v = _chain_encode(code.codecs["v"], code.hashes["v"],
                              code.plan.stream("v"), seeds_v, rng, recycle)
    ys = [np.maximum(u, v) for u, v in zip(us, vs)]
    return {"u": us, "v": vs, "y": ys, "recycled_u": rec_u, "recycled_v": rec_v}


def encode_case2(
    code: MacCode,
    seeds: dict[str, Sequence[np.ndarray]],
    rng: np.random.Generator,
    *, recycle: bool = True,
) -> dict[str, list[np.ndarray]]:
    """Case-2 encoding: one chain per transmitter (U absent, V = Y)."""
    if code.mode != "case2":
        raise ValueError("encode_case2 requires a case-2 code")
    out = {}
    for name in ("x", "y"):
        seqs, rec = _chain_encode(code.codecs[name], code.hashes[name],
                                  code.plan.stream(name), seeds[name], rng, recycle)
        out[name] = seqs
        out[f"recycled_{name}"] = rec
    return out


def encode_multi(
    code: MacCode,
    seeds: dict[str, Sequence[np.ndarray]],
    rng: np.random.Generator,
    *, recycle: bool = True,
) -> dict[str, list[np.ndarray]]:
    """L-user encoding: independent per-user hash chains in plan order."""
    if code.mode != "multi":
        raise ValueError("encode_multi requires a multi-user code")
    out = {}
    for s in code.plan.streams:
        seqs, rec = _chain_encode(code.codecs[s.name], code.hashes[s.name],
                                  s, seeds[s.name], rng, recycle)
        out[s.name] = seqs
        out[f"recycled_{s.name}"] = rec
    return out


@dataclass
class BatchTranscript:
    """Arrays for a batch of independent trials of one code.

    ``streams[name]`` has shape (trials, k, N); ``fresh_seeds[name]`` is a
    list of k arrays (trials, len_i); ``recycled[name]`` a list of k-1 arrays
    (trials, r); ``channel_out`` has shape (trials, k, N).
    """

    mode: str
    streams: dict[str, np.ndarray]
    fresh_seeds: dict[str, list[np.ndarray]]
    recycled: dict[str, list[np.ndarray]]
    channel_out: np.ndarray

    @property
    def n_trials(self) -> int:
        return self.channel_out.shape[0]

    @property
    def k(self) -> int:
        return self.channel_out.shape[1]


def run_trials(
    code: MacCode,
    n_trials: int,
    rng: np.random.Generator,
    *, recycle: bool = True,
) -> BatchTranscript:
    """Draw seeds, run every chain, and transmit each block through the channel.

    Deterministic given the generator state: seeds are drawn stream-major in
    plan order, chains encode in plan order, channel noise is drawn block by
    block.
    """
    plan = code.plan
    fresh: dict[str, list[np.ndarray]] = {}
    for s in plan.streams:
        widths = [s.seed_len_first] + [s.seed_len_rest] * (plan.k - 1)
        fresh[s.name] = [
            rng.integers(0, 2, size=(n_trials, w), dtype=np.uint8) for w in widths
        ]
    streams: dict[str, np.ndarray] = {}
    recycled: dict[str, list[np.ndarray]] = {}
    if code.mode == "case1":
        xs, rec_x = encode_tx1(code, fresh["x"], rng, recycle=recycle)
        tx2 = encode_tx2(code, fresh["u"], fresh["v"], rng, recycle=recycle)
        per_block = {"x": xs, "u": tx2["u"], "v": tx2["v"], "y": tx2["y"]}
        recycled = {"x": rec_x, "u": tx2["recycled_u"], "v": tx2["recycled_v"]}
    elif code.mode == "case2":
        out = encode_case2(code, fresh, rng, recycle=recycle)
        per_block = {"x": out["x"], "y": out["y"]}
        recycled = {"x": out["recycled_x"], "y": out["recycled_y"]}
    else:
        out = encode_multi(code, fresh, rng, recycle=recycle)
        per_block = {s.name: out[s.name] for s in plan.streams}
        recycled = {s.name: out[f"recycled_{s.name}"] for s in plan.streams}
    for name, blocks in per_block.items():
        streams[name] = np.stack(blocks, axis=1)
    user_names = code.channel_stream_names()
    z_blocks = []
    for i in range(plan.k):
        words = [streams[name][:, i, :] for name in user_names]
        z_blocks.append(transmit(code.channel, words, rng))
    channel_out = np.stack(z_blocks, axis=1)
    return BatchTranscript(code.mode, streams, fresh, recycled, channel_out)


def achieved_rates(plan: LengthPlan) -> dict:
    """Exact rational per-stream rates plus the large-k limit formulas.

    R_s = (|E_1| + (k-1) |E_i|) / (k N) as a Fraction; the reported limit is
    fresh_info + eps evaluated in floating point.
    """
    k, n = plan.k, plan.block_len
    per_stream = {}
    for s in plan.streams:
        total_bits = s.seed_len_first + (k - 1) * s.seed_len_rest
        per_stream[s.name] = {
            "rate": Fraction(total_bits, k * n),
            "rate_float": total_bits / (k * n),
            "total_fresh_bits": total_bits,
            "limit": s.fresh_info + plan.eps,
        }
    rates = {"per_stream": per_stream}
    if plan.mode == "case1":
        rates["r1"] = per_stream["x"]["rate"]
        rates["r2"] = per_stream["u"]["rate"] + per_stream["v"]["rate"]
        rates["r1_limit"] = per_stream["x"]["limit"]
        rates["r2_limit"] = per_stream["u"]["limit"] + per_stream["v"]["limit"]
    elif plan.mode == "case2":
        rates["r1"] = per_stream["x"]["rate"]
        rates["r2"] = per_stream["y"]["rate"]
        rates["r1_limit"] = per_stream["x"]["limit"]
        rates["r2_limit"] = per_stream["y"]["limit"]
    else:
        rates["per_user"] = {s.name: per_stream[s.name]["rate"]
                             for s in plan.streams}
    return rates


def tally_fresh_bits(bt: BatchTranscript) -> dict[str, int]:
    """Fresh-seed bits actually drawn per stream in one trial (replay check)."""
    return {
        name: sum(arr.shape[1] for arr in blocks)
        for name, blocks in bt.fresh_seeds.items()
    }


# -- descriptor (de)serialization ----------------------------------------------


def code_to_descriptor(code: MacCode, beta: float | None = None) -> dict:
    """Self-contained JSON-able descriptor enabling bit-exact rebuild."""
    plan = code.plan
    streams = []
    for s in plan.streams:
        d = s.__dict__.copy()
        streams.append(d)
    desc = {
        "mode": plan.mode,
        "block_len": plan.block_len,
        "k": plan.k,
        "xi": plan.xi,
        "eps": plan.eps,
        "delta": plan.delta,
        "idealized": plan.idealized,
        "asymptotic_only": plan.asymptotic_only,
        "streams": streams,
        "channel": {
            "inputs": [a.size for a in code.channel.input_alphabets],
            "output": code.channel.output_alphabet.size,
            "transition": code.channel.transition.reshape(
                -1, code.channel.output_alphabet.size).tolist(),
        },
        "input_dists": [d.pmf.tolist() for d in code.input_dists],
        "split": code.split.to_dict() if code.split else None,
        "hashes": {name: {"in_len": h.in_len, "out_len": h.out_len,
                          "hex": h.to_hex()}
                   for name, h in code.hashes.items()},
        "profiles": {name: {"n": c.profile.n, "beta": c.profile.beta,
                            "source": c.profile.source.pmf.tolist(),
                            "exact": c.profile.exact}
                     for name, c in code.codecs.items()},
        "profile_seed": code.profile_seed,
        "user_order": list(code.user_order) if code.user_order else None,
        "beta": beta if beta is not None else
            next(iter(code.codecs.values())).profile.beta,
    }
    return desc


def code_from_descriptor(desc: dict, mc_profile_samples: int = 1 << 14) -> MacCode:
    """Rebuild a MacCode from its descriptor; profiles are re-derived."""
    from .probcore import Alphabet, channel_from_json

    ch, _ = channel_from_json(desc["channel"])
    inputs = tuple(
        Dist(Alphabet(len(p)), np.asarray(p)) for p in desc["input_dists"]
    )
    streams = tuple(StreamPlan(**s) for s in desc["streams"])
    plan = LengthPlan(desc["block_len"], desc["k"], desc["xi"], desc["eps"],
                      desc["delta"], desc["mode"], streams,
                      idealized=desc["idealized"])
    split = None
    if desc["split"] is not None:
        sd = desc["split"]
        split = SplitPoint(sd["eps"], Dist.bernoulli(sd["a"]),
                           Dist.bernoulli(sd["b"]),
                           (sd["r1"], sd["r_u"], sd["r_v"]))
    codecs = {}
    for idx, (name, p) in enumerate(desc["profiles"].items()):
        src = Dist(Alphabet(2), np.asarray(p["source"]))
        if p["exact"]:
            prof = compute_profile(src, p["n"], p["beta"])
        else:
            child = np.random.SeedSequence(desc["profile_seed"], spawn_key=(idx,))
            prof = compute_profile(
                src, p["n"], p["beta"], mc_samples=mc_profile_samples,
                rng=make_rng(child),
            )
        codecs[name] = ResolvabilityCode(prof)
    hashes = {
        name: ToeplitzHash.from_hex(h["hex"], h["in_len"], h["out_len"])
        for name, h in desc["hashes"].items()
    }
    order = tuple(desc["user_order"]) if desc["user_order"] else None
    return MacCode(ch, inputs, plan, split, codecs, hashes, user_order=order,
                   profile_seed=desc["profile_seed"])


def descriptor_hash(desc: dict) -> str:
    return hashlib.sha256(
        json.dumps(desc, sort_keys=True).encode()
    ).hexdigest()[:16]


def transcript_to_csv(bt: BatchTranscript, trial: int, path) -> None:
    """Dump one trial as hex CSV rows (block, field, hex bits) for replay."""
    import csv as _csv

    def to_hex(bits: np.ndarray) -> str:
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.size == 0:
            return ""
        pad = (-bits.size) % 4
        nib = np.concatenate([bits, np.zeros(pad, dtype=np.uint8)]).reshape(-1, 4)
        return "".join(f"{v:x}" for v in (nib * [8, 4, 2, 1]).sum(axis=1))

    with open(path, "w", newline="") as f:
        w = _csv.writer(f)
        w.writerow(["block", "field", "n_bits", "hex"])
        for i in range(bt.k):
            for name, blocks in bt.fresh_seeds.items():
                w.writerow([i + 1, f"fresh_{name}", blocks[i].shape[1],
                            to_hex(blocks[i][trial])])
            for name, rec in bt.recycled.items():
                if i >= 1:
                    w.writerow([i + 1, f"recycled_{name}", rec[i - 1].shape[1],
                                to_hex(rec[i - 1][trial])])
            for name, arr in bt.streams.items():
                w.writerow([i + 1, f"stream_{name}", arr.shape[2],
                            to_hex(arr[trial, i])])
            z = bt.channel_out[trial, i]
            w.writerow([i + 1, "channel_out", z.size,
                        "".join(str(int(s)) for s in z)])
