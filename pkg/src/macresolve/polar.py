"""Source-resolvability codec built on source polarization.

The length-N transform is the Kronecker power of [[1, 0], [1, 1]] over GF(2),
applied so that the first transformed coordinate is the XOR of the whole
input block (for N = 2 and Bern(p): H(A^1) = h2(2p(1-p)),
H(A^2 | A^1) = 2 h2(p) - h2(2p(1-p))).  The transform is an involution.

Encoding is three-tier over the transformed coordinates, in index order:

* near-uniform coordinates (conditional entropy above 1 - delta_N) carry the
  uniform seed;
* the unpolarized middle is sampled from its exact conditional law, metered
  as local randomness;
* near-deterministic coordinates are set by conditional argmax.

Exact conditional laws come in two interchangeable forms: full 2^N prefix
tables (the brute-force oracle, capped), and a recursive computation that
costs O(N^2) per sequence and is vectorized over batches, which is what the
encoder uses and the only option beyond the cap.

Index convention: coordinates are 0-based internally; documentation quoting
1-based positions always says so.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .probcore import (
    BIT,
    Dist,
    JointDist,
    all_bit_rows,
    bits_to_index,
    entropy,
)

__all__ = [
    "EXACT_CAP_N",
    "PolarProfile",
    "ResolvabilityCode",
    "polar_transform",
    "compute_profile",
    "encode",
    "encode_batch",
    "output_dist_exact",
    "output_pmf_exact",
    "profile_to_csv",
]

EXACT_CAP_N = 20  # 2^N enumeration above this is refused
# conditional-argmax ties (exact 0.5 arises from parity symmetries) resolve
# to 0; the tolerance keeps the choice stable against last-ulp noise
TIE_TOL = 1e-12


def polar_transform(bits: np.ndarray) -> np.ndarray:
    """Apply the involutive polarization transform along the last axis.

    Length must be a power of two.  Accepts batched input (..., N).
    """
    x = np.array(bits, dtype=np.uint8, copy=True) & 1
    n_sym = x.shape[-1]
    if n_sym == 0 or (n_sym & (n_sym - 1)) != 0:
        raise ValueError(f"length must be a power of two, got {n_sym}")
    n = n_sym.bit_length() - 1
    for b in range(n):
        half = 1 << b
        step = half << 1
        for j in range(0, n_sym, step):
            x[..., j:j + half] ^= x[..., j + half:j + step]
    return x


def _check_binary_source(source: Dist) -> float:
    if source.alphabet.size != 2:
        raise ValueError("polarization codec handles binary sources only")
    return float(source.pmf[1])


def _exact_joint_pmf(source: Dist, n: int) -> np.ndarray:
    """pmf of the transformed block, indexed by the packed coordinate vector."""
    n_sym = 1 << n
    if n_sym > EXACT_CAP_N:
        raise ValueError(
            f"N={n_sym} exceeds the exact-enumeration cap {EXACT_CAP_N}"
        )
    p1 = _check_binary_source(source)
    rows = all_bit_rows(n_sym)
    weight = polar_transform(rows).sum(axis=1, dtype=np.int64)
    with np.errstate(divide="ignore"):
        logp = weight * np.log(p1) if p1 > 0 else np.where(weight > 0, -np.inf, 0.0)
        logq = (n_sym - weight) * np.log(1 - p1) if p1 < 1 else np.where(
            weight < n_sym, -np.inf, 0.0)
    return np.exp(logp + logq)


@dataclass(frozen=True)
class PolarProfile:
    """Conditional-entropy profile of one binary source at block length 2^n.

    ``cond_entropies[i]`` is H(A^{i+1} | A^{1:i}) in bits.  ``v_set`` holds the
    0-based coordinates with conditional entropy above ``1 - delta_n`` (seed
    positions), ``h_set`` those above ``delta_n``; ``v_set <= h_set``.
    ``exact`` records whether the entropies came from full enumeration or from
    sampled surprisals (unbiased, used beyond the enumeration cap).
    """

    n: int
    source: Dist
    cond_entropies: np.ndarray
    beta: float
    delta_n: float
    v_set: frozenset[int]
    h_set: frozenset[int]
    exact: bool = True

    def __post_init__(self):
        n_sym = 1 << self.n
        ce = np.ascontiguousarray(self.cond_entropies, dtype=np.float64)
        ce.setflags(write=False)
        object.__setattr__(self, "cond_entropies", ce)
        if ce.shape != (n_sym,):
            raise ValueError(f"profile length {ce.shape} != N={n_sym}")
        if not 0.0 < self.beta < 0.5:
            raise ValueError(f"beta must be in (0, 1/2), got {self.beta}")
        tol = 1e-9 if self.exact else 0.05
        if np.any(ce < -tol) or np.any(ce > 1 + tol):
            raise ValueError("conditional entropies outside [0, 1]")
        if self.exact:
            total = float(ce.sum())
            target = n_sym * entropy(self.source)
            if abs(total - target) > 1e-9:
                raise ValueError(
                    f"chain rule violated: sum {total} vs N*H(X) {target}"
                )
        if not self.v_set <= self.h_set:
            raise ValueError("v_set must be contained in h_set")

    @property
    def block_len(self) -> int:
        return 1 << self.n

    @property
    def mid_set(self) -> frozenset[int]:
        return self.h_set - self.v_set


def compute_profile(
    source: Dist,
    n: int,
    beta: float = 0.25,
    *,
    mc_samples: int | None = None,
    rng: np.random.Generator | None = None,
) -> PolarProfile:
    """Profile a binary source at block length N = 2^n.

    Exact mode enumerates all 2^N source sequences (N <= 20).  Above the cap,
    pass ``mc_samples`` to estimate each conditional entropy as the mean
    surprisal -log2 q(A^j | A^{1:j-1}) over sampled blocks; the per-sample
    conditionals themselves are exact, so the estimator is unbiased.
    """
    p1 = _check_binary_source(source)
    n_sym = 1 << n
    delta_n = 2.0 ** (-(n_sym ** beta))
    if n_sym <= EXACT_CAP_N and mc_samples is None:
        qa = _exact_joint_pmf(source, n)
        ce = np.empty(n_sym)
        prev_ent = 0.0
        for i in range(n_sym):
            marg = qa.reshape(1 << (i + 1), -1).sum(axis=1)
            pos = marg[marg > 0]
            ent = float(-(pos * np.log2(pos)).sum())
            ce[i] = ent - prev_ent
            prev_ent = ent
        exact = True
    else:
        if mc_samples is None:
            raise ValueError(
                f"N={n_sym} exceeds the exact cap {EXACT_CAP_N}; "
                "pass mc_samples to enable approximate profiling"
            )
        if rng is None:
            raise ValueError("approximate profiling needs an explicit rng")
        x = (rng.random((int(mc_samples), n_sym)) < p1).astype(np.uint8)
        a = polar_transform(x)
        ce = np.empty(n_sym)
        for j in range(n_sym):
            pj = _sc_conditional(p1, a[:, :j], n_sym)
            prob = np.where(a[:, j] == 1, pj, 1.0 - pj)
            ce[j] = float(np.mean(-np.log2(np.clip(prob, 1e-300, None))))
        ce = np.clip(ce, 0.0, 1.0)
        exact = False
    v = frozenset(np.nonzero(ce > 1.0 - delta_n)[0].tolist())
    h = frozenset(np.nonzero(ce > delta_n)[0].tolist())
    return PolarProfile(n, source, ce, beta, delta_n, v, h, exact=exact)


@dataclass(frozen=True)
class ResolvabilityCode:
    """Black-box source-resolvability encoder for one binary source.

    ``seed_len`` equals |v_set|; the seed rate seed_len / N approaches H(X)
    as N grows.  ``local_randomness_bits`` meters the middle-set sampling
    consumed per encoded block, reported separately from the seed and
    vanishing in rate.
    """

    profile: PolarProfile
    seed_len: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "seed_len", len(self.profile.v_set))

    @property
    def block_len(self) -> int:
        return self.profile.block_len

    @property
    def local_randomness_bits(self) -> int:
        return len(self.profile.mid_set)

    @cached_property
    def _tiers(self) -> np.ndarray:
        """Per-coordinate tier: 0 seed, 1 sampled middle, 2 argmax."""
        t = np.full(self.block_len, 2, dtype=np.int8)
        t[sorted(self.profile.mid_set)] = 1
        t[sorted(self.profile.v_set)] = 0
        return t

    @cached_property
    def _seed_positions(self) -> np.ndarray:
        return np.array(sorted(self.profile.v_set), dtype=np.int64)


def _sc_conditional(p1: float, decided: np.ndarray, n_sym: int) -> np.ndarray:
    """P(next transformed coordinate = 1 | decided prefix), batched.

    ``decided`` has shape (batch, j); returns shape (batch,).  Recursive over
    the two half-size subproblems; O(N) work per call.
    """
    batch = decided.shape[0]
    if n_sym == 1:
        return np.full(batch, p1)
    m = decided.shape[1]
    pairs = m // 2
    w1 = decided[:, 0:2 * pairs:2] ^ decided[:, 1:2 * pairs:2]
    w2 = decided[:, 1:2 * pairs:2]
    if m % 2 == 0:
        c1 = _sc_conditional(p1, w1, n_sym // 2)
        c2 = _sc_conditional(p1, w2, n_sym // 2)
        return c1 * (1.0 - c2) + (1.0 - c1) * c2
    v = decided[:, -1]
    c1 = _sc_conditional(p1, w1, n_sym // 2)
    c2 = _sc_conditional(p1, w2, n_sym // 2)
    p1_at_v = np.where(v == 1, c1, 1.0 - c1)        # P(w1 bit = v)
    p1_at_flip = np.where(v == 1, 1.0 - c1, c1)     # P(w1 bit = v xor 1)
    num1 = p1_at_flip * c2
    num0 = p1_at_v * (1.0 - c2)
    tot = num0 + num1
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(tot > 0, num1 / np.where(tot > 0, tot, 1.0), 0.5)
    return out


def encode_batch(
    code: ResolvabilityCode, seeds: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Encode a batch of seeds, shape (batch, seed_len) -> (batch, N)."""
    seeds = np.asarray(seeds, dtype=np.uint8)
    if seeds.ndim != 2 or seeds.shape[1] != code.seed_len:
        raise ValueError(
            f"seed batch shape {seeds.shape}, expected (batch, {code.seed_len})"
        )
    batch = seeds.shape[0]
    n_sym = code.block_len
    p1 = float(code.profile.source.pmf[1])
    tiers = code._tiers
    decided = np.zeros((batch, n_sym), dtype=np.uint8)
    seed_cursor = 0
    for j in range(n_sym):
        if tiers[j] == 0:
            decided[:, j] = seeds[:, seed_cursor]
            seed_cursor += 1
            continue
        pj = _sc_conditional(p1, decided[:, :j], n_sym)
        if tiers[j] == 1:
            decided[:, j] = (rng.random(batch) < pj).astype(np.uint8)
        else:
            decided[:, j] = (pj > 0.5 + TIE_TOL).astype(np.uint8)
    return polar_transform(decided)


def encode(
    code: ResolvabilityCode, seed: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Encode one seed of ``code.seed_len`` uniform bits into a length-N block."""
    seed = np.asarray(seed, dtype=np.uint8)
    if seed.shape != (code.seed_len,):
        raise ValueError(f"seed shape {seed.shape}, expected ({code.seed_len},)")
    return encode_batch(code, seed[None, :], rng)[0]


def output_pmf_exact(
    code: ResolvabilityCode, clamped_seed_bits: np.ndarray | None = None
) -> np.ndarray:
    """Exact encoder-output pmf as a flat array over packed length-N blocks.

    With ``clamped_seed_bits`` given, that prefix of the seed is fixed and
    only the remaining seed bits are uniform -- the conditional law needed to
    trace recycled randomness through a hash chain.  Requires N within the
    enumeration cap.
    """
    n_sym = code.block_len
    if n_sym > EXACT_CAP_N:
        raise ValueError(f"N={n_sym} exceeds the exact-enumeration cap {EXACT_CAP_N}")
    clamp = np.asarray(clamped_seed_bits, dtype=np.uint8) if clamped_seed_bits is not None \
        else np.zeros(0, dtype=np.uint8)
    if clamp.ndim != 1 or clamp.size > code.seed_len:
        raise ValueError(f"clamp length {clamp.size} exceeds seed length {code.seed_len}")
    qa = _exact_joint_pmf(code.profile.source, code.profile.n)
    tiers = code._tiers
    pt = np.array([1.0])
    prev_marg = np.array([1.0])
    seed_cursor = 0
    for i in range(n_sym):
        marg = qa.reshape(1 << (i + 1), -1).sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            c1 = np.where(prev_marg > 0,
                          marg[1::2] / np.where(prev_marg > 0, prev_marg, 1.0),
                          0.5)
        out = np.empty(1 << (i + 1))
        if tiers[i] == 0:
            if seed_cursor < clamp.size:
                bit = int(clamp[seed_cursor])
                out[bit::2] = pt
                out[1 - bit::2] = 0.0
            else:
                out[0::2] = 0.5 * pt
                out[1::2] = 0.5 * pt
            seed_cursor += 1
        elif tiers[i] == 1:
            out[0::2] = pt * (1.0 - c1)
            out[1::2] = pt * c1
        else:
            pick1 = c1 > 0.5 + TIE_TOL
            out[0::2] = pt * (~pick1)
            out[1::2] = pt * pick1
        pt = out
        prev_marg = marg
    # push through the involution: block = transform(coordinates)
    img = bits_to_index(polar_transform(all_bit_rows(n_sym)))
    px = np.empty(1 << n_sym)
    px[img] = pt
    return px


def output_dist_exact(code: ResolvabilityCode) -> JointDist:
    """Exact encoder-output law as a JointDist over N binary axes."""
    px = output_pmf_exact(code)
    n_sym = code.block_len
    return JointDist((BIT,) * n_sym, px.reshape((2,) * n_sym), renormalize=True)


def profile_to_csv(profile: PolarProfile, path) -> None:
    """Write the profile as CSV: index, cond_entropy, in_v_set, in_h_set."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["index", "cond_entropy", "in_v_set", "in_h_set"])
        for i in range(profile.block_len):
            w.writerow([
                i + 1,
                f"{profile.cond_entropies[i]:.12g}",
                int(i in profile.v_set),
                int(i in profile.h_set),
            ])
