"""Quantify what the construction promises.

Resolvability-region geometry (constraints, corner points, the case
dichotomy), exact variational-distance evaluation of whole codes at
enumerable sizes, Monte-Carlo windowed proxies with bootstrap confidence
intervals at scale, inter-block independence diagnostics, and the
distributed leftover-hash bound check.

Full-block variational distance over Z^{kN} cannot be estimated by sampling
at realistic sizes, so the exact joint TV is computed in exhaustive mode
only; windowed-marginal TV and the independence diagnostics are the scalable
proxies and are labeled as such.  The finite-N reference curves delta_i,
delta_i^(1), delta_i^(2) are reported alongside, and are typically vacuous
(> 2) at desk scale; the report says so rather than hiding it.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .encoder import BatchTranscript, MacCode, run_trials
from .hashing import hashed_joint_dist_exact, sample_hash
from .polar import EXACT_CAP_N, output_pmf_exact
from .probcore import (
    BudgetError,
    Dist,
    JointDist,
    MacChannel,
    all_bit_rows,
    bits_to_index,
    min_entropy_conditional,
    mutual_information,
    target_output_dist,
)

__all__ = [
    "RegionSpec",
    "MetricRow",
    "RunReport",
    "region_2user",
    "region_multi",
    "tv_exhaustive",
    "exact_report",
    "tv_monte_carlo",
    "independence_diagnostics",
    "mc_chunk_features",
    "assemble_mc_metrics",
    "lhl_bound_check",
    "delta0",
    "delta0_multi",
    "delta_block",
    "delta_block_multi",
    "delta_recycle",
    "delta_joint_recycle",
    "joint_tv_bound",
]

EXACT_STATE_BUDGET = 1 << 24
GEOM_TOL = 1e-9


# -- region geometry -----------------------------------------------------------


@dataclass(frozen=True)
class RegionSpec:
    """Resolvability region: subset lower bounds and dominant-face corners.

    ``constraints[S]`` is I(X_S; Z) in bits for each non-empty subset of
    0-based user indices; the region is {R : sum_{l in S} R_l >= I(X_S;Z)}.
    ``corner_points`` maps each user permutation to its rate tuple (indexed
    by user).  Construction verifies the contrapolymatroid structure: the
    set function I is supermodular (equivalently -I is submodular), every
    corner is feasible, and the sum constraint is tight at every corner.
    """

    n_users: int
    constraints: dict[frozenset, float]
    corner_points: dict[tuple, tuple]
    dominant_r1: tuple[float, float] | None = None

    def __post_init__(self):
        full = frozenset(range(self.n_users))
        subsets = [frozenset(s) for r in range(1, self.n_users + 1)
                   for s in itertools.combinations(range(self.n_users), r)]
        for s in subsets:
            if s not in self.constraints:
                raise ValueError(f"missing constraint for subset {sorted(s)}")
        get = lambda s: self.constraints[s] if s else 0.0
        for s in subsets:
            for t in subsets:
                lhs = get(s | t) + get(s & t)
                rhs = get(s) + get(t)
                if lhs < rhs - GEOM_TOL:
                    raise ValueError(
                        f"I(X_S;Z) not supermodular at S={sorted(s)}, "
                        f"T={sorted(t)}: {lhs} < {rhs}"
                    )
        for sigma, rates in self.corner_points.items():
            for s in subsets:
                if sum(rates[u] for u in s) < self.constraints[s] - GEOM_TOL:
                    raise ValueError(
                        f"corner {sigma} violates subset {sorted(s)}"
                    )
            if abs(sum(rates) - self.constraints[full]) > GEOM_TOL:
                raise ValueError(f"corner {sigma} is not sum-rate tight")

    def to_dict(self) -> dict:
        return {
            "n_users": self.n_users,
            "constraints": {
                "+".join(str(u + 1) for u in sorted(s)): v
                for s, v in sorted(self.constraints.items(),
                                   key=lambda kv: (len(kv[0]), sorted(kv[0])))
            },
            "corner_points": {
                ",".join(str(u + 1) for u in sigma): list(r)
                for sigma, r in sorted(self.corner_points.items())
            },
            "dominant_r1": list(self.dominant_r1) if self.dominant_r1 else None,
        }


def _region(ch: MacChannel, inputs: list[Dist]) -> RegionSpec:
    n_users = ch.n_users
    j = ch.joint_with_output(inputs)
    z = n_users
    constraints = {}
    for r in range(1, n_users + 1):
        for s in itertools.combinations(range(n_users), r):
            constraints[frozenset(s)] = mutual_information(j, list(s), [z])
    corners = {}
    for sigma in itertools.permutations(range(n_users)):
        rates = [0.0] * n_users
        earlier: list[int] = []
        for u in sigma:
            rates[u] = mutual_information(j, [u], [z], earlier)
            earlier.append(u)
        corners[sigma] = tuple(rates)
    dom = None
    if n_users == 2:
        dom = (
            mutual_information(j, [0], [2]),
            mutual_information(j, [0], [2], [1]),
        )
    return RegionSpec(n_users, constraints, corners, dominant_r1=dom)


def region_2user(ch: MacChannel, p_x: Dist, p_y: Dist) -> tuple[RegionSpec, str]:
    """Exact two-user region slice plus the case tag of the dichotomy."""
    if ch.n_users != 2:
        raise ValueError("region_2user needs a two-user channel")
    spec = _region(ch, [p_x, p_y])
    gap = spec.constraints[frozenset({0, 1})] - (
        spec.constraints[frozenset({0})] + spec.constraints[frozenset({1})]
    )
    return spec, ("case1" if gap > GEOM_TOL else "case2")


def region_multi(ch: MacChannel, inputs: list[Dist]) -> RegionSpec:
    """Exact L-user region: all 2^L - 1 constraints and L! corner points."""
    if ch.n_users > 4:
        raise ValueError(f"exact region computation supports L <= 4, got {ch.n_users}")
    if len(inputs) != ch.n_users:
        raise ValueError(f"{len(inputs)} input dists for {ch.n_users} users")
    return _region(ch, list(inputs))


# -- finite-N reference curves (reported, typically vacuous at desk scale) ------


def delta0(block_len: int, xi: float) -> float:
    """Hash-uniformity constant 2/N + sqrt(7) 2^(-N xi / 2), two-user."""
    return 2.0 / block_len + math.sqrt(7.0) * 2.0 ** (-block_len * xi / 2.0)


def delta0_multi(block_len: int, xi: float, n_users: int) -> float:
    """L-user hash-uniformity constant 2/N + 2^(L/2) 2^(-N xi / 2)."""
    return 2.0 / block_len + 2.0 ** (n_users / 2.0) * 2.0 ** (-block_len * xi / 2.0)


def delta_block(i: int, codec_tv: float, d0: float) -> float:
    """Per-block closed-form bound (3/2)(d + d0)(3^i - 1) + 3^(i+1) d."""
    return 1.5 * (codec_tv + d0) * (3.0 ** i - 1.0) + 3.0 ** (i + 1) * codec_tv


def delta_block_multi(i: int, codec_tv: float, d0: float, n_users: int) -> float:
    """L-user per-block bound L(d + d0)(L^i - 1)/(L - 1) + L^(i+1) d."""
    geom = float(i) if n_users == 1 else (n_users ** i - 1.0) / (n_users - 1.0)
    return n_users * (codec_tv + d0) * geom + n_users ** (i + 1) * codec_tv


def delta_recycle(i: int, codec_tv: float, d0: float, multi_users: int | None = None) -> float:
    """Recycled-vs-previous-output bound 4 delta_{i-1} + 2 delta0."""
    if multi_users is None:
        return 4.0 * delta_block(i - 1, codec_tv, d0) + 2.0 * d0
    return 4.0 * delta_block_multi(i - 1, codec_tv, d0, multi_users) + 2.0 * d0


def delta_joint_recycle(i: int, codec_tv: float, d0: float,
                        multi_users: int | None = None) -> float:
    """Recycled-vs-all-previous-outputs bound (2^(i-1) - 1) delta_i^(1)."""
    return (2.0 ** (i - 1) - 1.0) * delta_recycle(i, codec_tv, d0, multi_users)


def joint_tv_bound(k: int, codec_tv: float, d0: float,
                   multi_users: int | None = None) -> float:
    """Whole-run bound (k-1) delta_k^(2) + k delta_k."""
    if k == 1:
        dk = delta_block(1, codec_tv, d0) if multi_users is None else \
            delta_block_multi(1, codec_tv, d0, multi_users)
        return dk
    d2 = delta_joint_recycle(k, codec_tv, d0, multi_users)
    dk = delta_block(k, codec_tv, d0) if multi_users is None else \
        delta_block_multi(k, codec_tv, d0, multi_users)
    return (k - 1) * d2 + k * dk


# -- exact (exhaustive) evaluation ----------------------------------------------


def _stream_transition(code: MacCode, name: str) -> np.ndarray:
    """2^N x 2^N law of block i given block i-1 for one stream's chain."""
    codec = code.codecs[name]
    h = code.hashes[name]
    n_sym = code.plan.block_len
    rows = np.empty((1 << n_sym, 1 << n_sym))
    states = all_bit_rows(n_sym)
    clamp_len = min(h.out_len, codec.seed_len)
    hashed = h.apply_batch(states)[:, :clamp_len] if clamp_len else None
    for s in range(1 << n_sym):
        clamp = hashed[s] if hashed is not None else None
        rows[s] = output_pmf_exact(codec, clamp)
    return rows


def _emission_table(ch: MacChannel, n_sym: int) -> np.ndarray:
    """(2^(L N), |Z|^N) conditional law of one output block given inputs."""
    n_users = ch.n_users
    z_size = ch.output_alphabet.size
    combos = all_bit_rows(n_users * n_sym)   # (2^(LN), L*N); user-major
    per_user = [combos[:, u * n_sym:(u + 1) * n_sym] for u in range(n_users)]
    em = np.ones((combos.shape[0], 1))
    for pos in range(n_sym):
        idx = tuple(pu[:, pos] for pu in per_user)
        row = ch.transition[idx]             # (2^(LN), |Z|)
        em = (em[:, :, None] * row[:, None, :]).reshape(combos.shape[0], -1)
    return em


class _ExactEngine:
    """Shared state for exhaustive evaluation of one code."""

    def __init__(self, code: MacCode, budget: int = EXACT_STATE_BUDGET):
        plan = code.plan
        n_sym = plan.block_len
        if n_sym > EXACT_CAP_N:
            raise BudgetError(f"N={n_sym} beyond the exact codec cap {EXACT_CAP_N}")
        self.code = code
        self.names = [s.name for s in plan.streams]
        n_streams = len(self.names)
        self.n_states = 1 << (n_streams * n_sym)
        z_size = code.channel.output_alphabet.size
        zn = z_size ** n_sym
        carry = self.n_states * (zn ** max(0, plan.k - 1))
        if max(carry, self.n_states * zn, zn ** plan.k) > budget:
            raise BudgetError(
                f"exhaustive evaluation needs {max(carry, zn ** plan.k)} states, "
                f"budget is {budget}"
            )
        self.n_sym = n_sym
        self.zn = zn
        self.stream_dim = 1 << n_sym
        # block-1 law per stream and transition law per stream
        self.p1 = {name: output_pmf_exact(code.codecs[name])
                   for name in self.names}
        self.trans = {name: _stream_transition(code, name) for name in self.names}
        # joint stream state -> channel-input key -> emission row
        em = _emission_table(code.channel, n_sym)
        self.emission = em[self._input_keys()]

    def _input_keys(self) -> np.ndarray:
        """Map joint stream state -> packed channel-input tuple index."""
        n_sym, names = self.n_sym, self.names
        dim = self.stream_dim
        shape = (dim,) * len(names)
        grids = np.indices(shape).reshape(len(names), -1)
        per_stream = {name: grids[i] for i, name in enumerate(names)}
        if self.code.mode == "case1":
            bits_u = all_bit_rows(n_sym)[per_stream["u"]]
            bits_v = all_bit_rows(n_sym)[per_stream["v"]]
            y_int = bits_to_index(bits_u | bits_v)   # max of bits is OR
            keys = per_stream["x"] * dim + y_int
        elif self.code.mode == "case2":
            keys = per_stream["x"] * dim + per_stream["y"]
        else:
            keys = np.zeros(self.n_states, dtype=np.int64)
            for name in self.code.channel_stream_names():
                keys = keys * dim + per_stream[name]
        return keys

    def block1_state_pmf(self) -> np.ndarray:
        p = np.array([1.0])
        for name in self.names:
            p = np.multiply.outer(p, self.p1[name]).reshape(-1)
        return p

    def advance(self, state_pmf: np.ndarray) -> np.ndarray:
        """One block-Markov step of the joint stream-state law."""
        n_streams = len(self.names)
        t = state_pmf.reshape((self.stream_dim,) * n_streams)
        for axis, name in enumerate(self.names):
            t = np.moveaxis(
                np.tensordot(self.trans[name], t, axes=(0, axis)), 0, axis)
        return t.reshape(-1)

    def output_given_states(self, state_pmf: np.ndarray) -> np.ndarray:
        return state_pmf @ self.emission

    def joint_z_pmf(self) -> np.ndarray:
        """Exact law of all k output blocks, flat over |Z|^(kN)."""
        k = self.code.plan.k
        state = self.block1_state_pmf()
        if k == 1:
            return self.output_given_states(state)
        carry = state[:, None] * self.emission          # (states, z1)
        for _ in range(k - 2):
            n_streams = len(self.names)
            zdim = carry.shape[1]
            t = carry.reshape((self.stream_dim,) * n_streams + (zdim,))
            for axis, name in enumerate(self.names):
                t = np.moveaxis(
                    np.tensordot(self.trans[name], t, axes=(0, axis)), 0, axis)
            carry = t.reshape(self.n_states, zdim)
            carry = (carry[:, :, None] * self.emission[:, None, :]).reshape(
                self.n_states, -1)
        # last block: contract states out
        n_streams = len(self.names)
        zdim = carry.shape[1]
        t = carry.reshape((self.stream_dim,) * n_streams + (zdim,))
        for axis, name in enumerate(self.names):
            t = np.moveaxis(
                np.tensordot(self.trans[name], t, axes=(0, axis)), 0, axis)
        carry = t.reshape(self.n_states, zdim)
        return np.einsum("sz,sw->zw", carry, self.emission).reshape(-1)

    def target_z_pow(self, blocks: int) -> np.ndarray:
        qz = target_output_dist(self.code.channel, list(self.code.input_dists)).pmf
        out = np.array([1.0])
        for _ in range(blocks * self.n_sym):
            out = np.multiply.outer(out, qz).reshape(-1)
        return out


def tv_exhaustive(code: MacCode, *, budget: int = EXACT_STATE_BUDGET) -> float:
    """Exact V(p~_{Z over all k blocks}, q_Z^(kN)) by full enumeration."""
    eng = _ExactEngine(code, budget)
    return float(np.abs(eng.joint_z_pmf() - eng.target_z_pow(code.plan.k)).sum())


def exact_report(code: MacCode, *, budget: int = EXACT_STATE_BUDGET) -> list["MetricRow"]:
    """Exhaustive-mode metrics: joint TV, per-block TVs, independence, bounds."""
    eng = _ExactEngine(code, budget)
    plan = code.plan
    rows: list[MetricRow] = []
    q_block = eng.target_z_pow(1)

    joint = eng.joint_z_pmf()
    rows.append(MetricRow("joint_output_tv",
                          float(np.abs(joint - eng.target_z_pow(plan.k)).sum())))

    state = eng.block1_state_pmf()
    block_z = []
    states_seq = []
    for i in range(plan.k):
        if i > 0:
            state = eng.advance(state)
        states_seq.append(state)
        pz = eng.output_given_states(state)
        block_z.append(pz)
        rows.append(MetricRow(f"block{i + 1}_output_tv",
                              float(np.abs(pz - q_block).sum())))

    if plan.k >= 2:
        prod = np.array([1.0])
        for pz in block_z:
            prod = np.multiply.outer(prod, pz).reshape(-1)
        rows.append(MetricRow("interblock_product_tv",
                              float(np.abs(joint - prod).sum())))
        # recycled bits of block i vs output of block i-1 (exact law)
        total_r = sum(s.hash_len for s in plan.streams)
        if (1 << total_r) * eng.zn <= budget:
            e_key = np.zeros(eng.n_states, dtype=np.int64)
            n_streams = len(eng.names)
            grids = np.indices((eng.stream_dim,) * n_streams).reshape(n_streams, -1)
            for pos, name in enumerate(eng.names):
                h = code.hashes[name]
                htab = bits_to_index(h.apply_batch(all_bit_rows(eng.n_sym)))
                e_key = (e_key << h.out_len) | htab[grids[pos]]
            for i in range(2, plan.k + 1):
                m_prev = states_seq[i - 2]
                joint_ez = np.zeros((1 << total_r, eng.zn))
                np.add.at(joint_ez, e_key,
                          m_prev[:, None] * eng.emission)
                marg_e = joint_ez.sum(axis=1)
                marg_z = joint_ez.sum(axis=0)
                tv = float(np.abs(joint_ez - np.outer(marg_e, marg_z)).sum())
                rows.append(MetricRow(f"recycled_vs_prev_output_tv_block{i}", tv))
        # consecutive output blocks vs product of their marginals:
        # law of (z_{i-1}, z_i) = sum_s m[s] em[s, z1] (T em)[s, z2]
        tt = eng.emission.reshape(
            (eng.stream_dim,) * len(eng.names) + (eng.zn,)).copy()
        for axis, name in enumerate(eng.names):
            tt = np.moveaxis(
                np.tensordot(eng.trans[name].T, tt, axes=(0, axis)), 0, axis)
        w = tt.reshape(eng.n_states, eng.zn)
        for i in range(2, plan.k + 1):
            m_prev = states_seq[i - 2]
            pair = np.einsum("s,sz,sw->zw", m_prev, eng.emission, w)
            tv = float(np.abs(pair - np.outer(block_z[i - 2], block_z[i - 1])).sum())
            rows.append(MetricRow(f"consecutive_output_tv_block{i}", tv))

    # reference curves from the analysis, evaluated with the exact codec TVs
    codec_tv = max(
        float(np.abs(eng.p1[name] -
                     _source_power_pmf(code.codecs[name].profile.source,
                                       plan.block_len)).sum())
        for name in eng.names
    )
    mu = code.channel.n_users if plan.mode == "multi" else None
    d0 = delta0_multi(plan.block_len, plan.xi, code.channel.n_users) \
        if mu else delta0(plan.block_len, plan.xi)
    rows.append(MetricRow("codec_tv_worst_stream", codec_tv))
    rows.append(MetricRow("bound_delta0", d0))
    dk = delta_block_multi(plan.k, codec_tv, d0, mu) if mu else \
        delta_block(plan.k, codec_tv, d0)
    rows.append(MetricRow("bound_delta_block_k", dk))
    rows.append(MetricRow("bound_joint_tv", joint_tv_bound(plan.k, codec_tv, d0, mu)))
    return rows


def _source_power_pmf(source: Dist, n_sym: int) -> np.ndarray:
    w = all_bit_rows(n_sym).sum(axis=1)
    p1 = float(source.pmf[1])
    return (p1 ** w) * ((1 - p1) ** (n_sym - w))


# -- Monte-Carlo evaluation ------------------------------------------------------


@dataclass
class MetricRow:
    """One report metric; CI fields only in Monte-Carlo mode."""

    name: str
    value: float
    ci_lo: float | None = None
    ci_hi: float | None = None
    samples: int | None = None
    mode: str = "exact"

    def to_list(self):
        return [self.name, self.value, self.ci_lo, self.ci_hi,
                self.samples, self.mode]


@dataclass
class RunReport:
    """Simulation output: metrics plus provenance."""

    metrics: list[MetricRow]
    rates: dict | None = None
    region: dict | None = None
    config_hash: str | None = None
    descriptor_hash: str | None = None
    notes: list[str] = field(default_factory=list)

    def metric(self, name: str) -> MetricRow:
        for m in self.metrics:
            if m.name == name:
                return m
        raise KeyError(name)


def _window_cells(z: np.ndarray, z_size: int, w: int) -> np.ndarray:
    """Pack sliding windows of each block into cell indices.

    ``z`` has shape (trials, k, N); returns (trials, k * (N - w + 1)).
    """
    trials, k, n_sym = z.shape
    cells = np.zeros((trials, k, n_sym - w + 1), dtype=np.int64)
    for off in range(w):
        cells = cells * z_size + z[:, :, off:n_sym - w + 1 + off]
    return cells.reshape(trials, -1)


def _count_rows(cells: np.ndarray, n_cells: int) -> np.ndarray:
    """Per-trial histogram of cell indices: (trials, windows) -> (trials, n_cells)."""
    trials = cells.shape[0]
    out = np.zeros((trials, n_cells), dtype=np.int32)
    rows = np.repeat(np.arange(trials), cells.shape[1])
    np.add.at(out, (rows, cells.reshape(-1)), 1)
    return out


def _bootstrap_tv(counts: np.ndarray, target: np.ndarray, n_boot: int,
                  rng: np.random.Generator) -> tuple[float, float, float]:
    """Plug-in TV of pooled counts vs target, with Poisson-bootstrap CI."""
    total = counts.sum()
    emp = counts.sum(axis=0) / total
    tv = float(np.abs(emp - target).sum())
    trials = counts.shape[0]
    per_trial_windows = counts.sum(axis=1).astype(np.float64)
    tvs = np.empty(n_boot)
    c64 = counts.astype(np.float64)
    batch = max(1, min(n_boot, (1 << 27) // max(trials, 1)))
    done = 0
    while done < n_boot:
        b = min(batch, n_boot - done)
        wts = rng.poisson(1.0, size=(b, trials))
        tot = wts @ c64
        denom = (wts @ per_trial_windows)[:, None]
        denom[denom == 0] = 1.0
        tvs[done:done + b] = np.abs(tot / denom - target).sum(axis=1)
        done += b
    lo, hi = np.percentile(tvs, [2.5, 97.5])
    return tv, float(lo), float(hi)


def tv_monte_carlo(
    code: MacCode,
    trials: int,
    rng: np.random.Generator,
    *,
    window: int = 2,
    null: bool = False,
    recycle: bool = True,
    n_boot: int = 1000,
    transcript: BatchTranscript | None = None,
) -> list[MetricRow]:
    """Windowed-marginal TV estimates with bootstrap CIs.

    Pools sliding windows of ``window`` (and 1) symbols over positions,
    blocks, and trials; compares against the i.i.d. target.  Documented as a
    lower-bound proxy for the full-block distance.  ``null=True`` replaces
    the code's inputs with true i.i.d. samples from the target input laws --
    the calibration baseline.  A precomputed ``transcript`` skips simulation.
    """
    if not 1 <= window <= 3:
        raise ValueError("window must be in 1..3")
    z_size = code.channel.output_alphabet.size
    if transcript is not None:
        z = transcript.channel_out
        trials = z.shape[0]
    elif null:
        z = _null_outputs(code, trials, rng)
    else:
        z = run_trials(code, trials, rng, recycle=recycle).channel_out
    if trials < 1000:
        raise ValueError(f"need >= 1000 trials for stable estimates, got {trials}")
    qz = target_output_dist(code.channel, list(code.input_dists)).pmf
    boot_rng = rng.spawn(1)[0]
    out = []
    for w in sorted({1, window}):
        target = np.array([1.0])
        for _ in range(w):
            target = np.multiply.outer(target, qz).reshape(-1)
        counts = _count_rows(_window_cells(z, z_size, w), z_size ** w)
        tv, lo, hi = _bootstrap_tv(counts, target, n_boot, boot_rng)
        name = "symbol_marginal_tv" if w == 1 else f"windowed_tv_w{w}"
        out.append(MetricRow(name, tv, lo, hi, trials, "mc"))
    return out


def _null_outputs(code: MacCode, trials: int, rng: np.random.Generator) -> np.ndarray:
    """Channel outputs when inputs are true i.i.d. draws from the targets."""
    from .probcore import transmit

    plan = code.plan
    blocks = []
    for _ in range(plan.k):
        words = []
        for u, d in enumerate(code.input_dists):
            cdf = np.cumsum(d.pmf)
            uphase = rng.random((trials, plan.block_len, 1))
            words.append(np.sum(uphase >= cdf, axis=-1).clip(
                0, d.alphabet.size - 1).astype(np.int64))
        blocks.append(transmit(code.channel, words, rng))
    return np.stack(blocks, axis=1)


def independence_diagnostics(
    bt: BatchTranscript,
    code: MacCode,
    rng: np.random.Generator,
    *,
    window: int = 2,
    rec_bits: int = 3,
    n_boot: int = 1000,
) -> list[MetricRow]:
    """Empirical block-Markov independence checks with bootstrap CIs.

    For each block i >= 2: TV between the joint of (first ``rec_bits``
    recycled bits, last ``window`` output symbols of block i-1) and the
    product of its marginals; likewise between adjacent output windows
    (last ``window`` of block i-1, first ``window`` of block i).  k = 1 has
    nothing to recycle and reports a vacuous zero.
    """
    trials, k = bt.n_trials, bt.k
    if k == 1:
        return [MetricRow("recycled_independence_tv", 0.0, None, None, trials,
                          "exact")]
    if trials < 1000:
        raise ValueError(
            f"need >= 1000 transcripts for empirical joints, got {trials}"
        )
    z_size = code.channel.output_alphabet.size
    n_sym = bt.channel_out.shape[2]
    w = min(window, n_sym)
    zc = z_size ** w
    rec_e, z_last, z_first, ec = _dependence_indices(bt, code, w, rec_bits)

    rec_rows = []
    zz_rows = []
    boot_rng = rng.spawn(1)[0]
    for i in range(2, k + 1):
        rec_rows.append(_pair_tv(rec_e[:, i - 2], z_last[:, i - 2], ec, zc,
                                 n_boot, boot_rng))
        zz_rows.append(_pair_tv(z_last[:, i - 2], z_first[:, i - 1], zc, zc,
                                n_boot, boot_rng))
    out = []
    for i, (tv, lo, hi) in enumerate(rec_rows, start=2):
        out.append(MetricRow(f"recycled_independence_tv_block{i}", tv, lo, hi,
                             trials, "mc"))
    for i, (tv, lo, hi) in enumerate(zz_rows, start=2):
        out.append(MetricRow(f"interblock_output_tv_block{i}", tv, lo, hi,
                             trials, "mc"))
    rec_mean = float(np.mean([r[0] for r in rec_rows]))
    zz_mean = float(np.mean([r[0] for r in zz_rows]))
    out.append(MetricRow("recycled_independence_tv_mean", rec_mean,
                         float(np.mean([r[1] for r in rec_rows])),
                         float(np.mean([r[2] for r in rec_rows])), trials, "mc"))
    out.append(MetricRow("interblock_output_tv_mean", zz_mean,
                         float(np.mean([r[1] for r in zz_rows])),
                         float(np.mean([r[2] for r in zz_rows])), trials, "mc"))
    return out


def _dependence_indices(
    bt: BatchTranscript, code: MacCode, w: int, rec_bits: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """Cell indices for the block-Markov dependence checks.

    Returns (recycled bits per block pair (trials, k-1), last-w window per
    block, first-w window per block, recycled cell count).
    """
    trials, k = bt.n_trials, bt.k
    z_size = code.channel.output_alphabet.size
    n_sym = bt.channel_out.shape[2]
    names = [s.name for s in code.plan.streams]
    z_first = np.zeros((trials, k), dtype=np.int64)
    z_last = np.zeros((trials, k), dtype=np.int64)
    for off in range(w):
        z_first = z_first * z_size + bt.channel_out[:, :, off]
        z_last = z_last * z_size + bt.channel_out[:, :, n_sym - w + off]
    rec_cols = []
    ec = 1
    for i in range(2, k + 1):
        rec = np.concatenate([bt.recycled[name][i - 2] for name in names], axis=1)
        b = min(rec_bits, rec.shape[1])
        ec = 1 << b
        rec_cols.append(bits_to_index(rec[:, :b]) if b
                        else np.zeros(trials, dtype=np.int64))
    rec_e = np.stack(rec_cols, axis=1) if rec_cols else \
        np.zeros((trials, 0), dtype=np.int64)
    return rec_e, z_last, z_first, ec


def mc_chunk_features(
    code: MacCode,
    n_trials: int,
    rng: np.random.Generator,
    *,
    window: int = 2,
    rec_bits: int = 3,
    null: bool = False,
    recycle: bool = True,
) -> dict[str, np.ndarray]:
    """Per-trial integer features for one chunk of Monte-Carlo trials.

    Integer outputs reduce across chunks in any grouping without float-order
    effects, which is what makes reports byte-identical across worker counts.
    """
    z_size = code.channel.output_alphabet.size
    if null:
        z = _null_outputs(code, n_trials, rng)
        bt = None
    else:
        bt = run_trials(code, n_trials, rng, recycle=recycle)
        z = bt.channel_out
    n_sym = z.shape[2]
    feats: dict[str, np.ndarray] = {}
    for w in sorted({1, window}):
        feats[f"win{w}"] = _count_rows(_window_cells(z, z_size, w), z_size ** w)
    if bt is not None and bt.k >= 2:
        w = min(window, n_sym)
        rec_e, z_last, z_first, ec = _dependence_indices(bt, code, w, rec_bits)
        feats["rec_e"] = rec_e
        feats["z_last"] = z_last
        feats["z_first"] = z_first
        feats["rec_cells"] = np.array([ec])
    return feats


def assemble_mc_metrics(
    code: MacCode,
    feats: dict[str, np.ndarray],
    rng: np.random.Generator,
    *,
    window: int = 2,
    n_boot: int = 1000,
) -> list[MetricRow]:
    """Metrics from concatenated chunk features (window TVs + independence)."""
    qz = target_output_dist(code.channel, list(code.input_dists)).pmf
    z_size = code.channel.output_alphabet.size
    out: list[MetricRow] = []
    for w in sorted({1, window}):
        counts = feats[f"win{w}"]
        target = np.array([1.0])
        for _ in range(w):
            target = np.multiply.outer(target, qz).reshape(-1)
        tv, lo, hi = _bootstrap_tv(counts, target, n_boot, rng)
        name = "symbol_marginal_tv" if w == 1 else f"windowed_tv_w{w}"
        out.append(MetricRow(name, tv, lo, hi, counts.shape[0], "mc"))
    if "rec_e" in feats:
        trials = feats["rec_e"].shape[0]
        k = feats["z_last"].shape[1]
        ec = int(feats["rec_cells"][0])
        zc = z_size ** min(window, code.plan.block_len)
        rec_rows, zz_rows = [], []
        for i in range(2, k + 1):
            rec_rows.append(_pair_tv(feats["rec_e"][:, i - 2],
                                     feats["z_last"][:, i - 2], ec, zc,
                                     n_boot, rng))
            zz_rows.append(_pair_tv(feats["z_last"][:, i - 2],
                                    feats["z_first"][:, i - 1], zc, zc,
                                    n_boot, rng))
        for i, (tv, lo, hi) in enumerate(rec_rows, start=2):
            out.append(MetricRow(f"recycled_independence_tv_block{i}", tv, lo,
                                 hi, trials, "mc"))
        for i, (tv, lo, hi) in enumerate(zz_rows, start=2):
            out.append(MetricRow(f"interblock_output_tv_block{i}", tv, lo, hi,
                                 trials, "mc"))
        out.append(MetricRow("recycled_independence_tv_mean",
                             float(np.mean([r[0] for r in rec_rows])),
                             float(np.mean([r[1] for r in rec_rows])),
                             float(np.mean([r[2] for r in rec_rows])),
                             trials, "mc"))
        out.append(MetricRow("interblock_output_tv_mean",
                             float(np.mean([r[0] for r in zz_rows])),
                             float(np.mean([r[1] for r in zz_rows])),
                             float(np.mean([r[2] for r in zz_rows])),
                             trials, "mc"))
    return out


def _pair_tv(a_idx: np.ndarray, b_idx: np.ndarray, na: int, nb: int,
             n_boot: int, rng: np.random.Generator) -> tuple[float, float, float]:
    """TV between the empirical joint of two indices and the product of marginals."""
    trials = a_idx.shape[0]
    cells = a_idx * nb + b_idx
    counts = np.zeros((trials, na * nb), dtype=np.int8)
    counts[np.arange(trials), cells] = 1

    def stat(c: np.ndarray) -> float:
        tot = c.sum()
        joint = (c / tot).reshape(na, nb)
        return float(np.abs(joint - np.outer(joint.sum(1), joint.sum(0))).sum())

    tv = stat(counts.sum(axis=0).astype(np.float64))
    tvs = np.empty(n_boot)
    c64 = counts.astype(np.float64)
    batch = max(1, min(n_boot, (1 << 27) // max(trials, 1)))
    done = 0
    while done < n_boot:
        b = min(batch, n_boot - done)
        wts = rng.poisson(1.0, size=(b, trials))
        tots = wts @ c64
        for j in range(b):
            tvs[done + j] = stat(tots[j])
        done += b
    lo, hi = np.percentile(tvs, [2.5, 97.5])
    return tv, float(lo), float(hi)


# -- leftover-hash bound check ----------------------------------------------------


def lhl_bound_check(
    joint: JointDist,
    hash_lens: list[int],
    rng: np.random.Generator,
    n_hashes: int = 100,
) -> tuple[float, float, bool]:
    """Average exact hashed-joint TV against the distributed leftover-hash bound.

    ``joint`` is over (X_1, .., X_L, Z) with axis l of size 2^{n_l}; sampled
    hash tuples map it exactly to (E_1, .., E_L, Z), whose distance to
    uniform x q_Z is averaged over the tuples and compared with
    sqrt(sum_S 2^{r_S - Hmin(p_{X_S, Z} | q_Z)}) over non-empty subsets.
    """
    n_users = joint.n_axes - 1
    if len(hash_lens) != n_users:
        raise ValueError(f"{len(hash_lens)} hash lengths for {n_users} sources")
    in_lens = []
    for l in range(n_users):
        size = joint.axes[l].size
        n_l = size.bit_length() - 1
        if 1 << n_l != size:
            raise ValueError(f"axis {l} size {size} is not a power of two")
        if hash_lens[l] > n_l:
            raise ValueError(f"hash length {hash_lens[l]} exceeds input bits {n_l}")
        in_lens.append(n_l)
    q_z = joint.marginal_dist(n_users)

    bound_sq = 0.0
    for r in range(1, n_users + 1):
        for s in itertools.combinations(range(n_users), r):
            marg = joint.marginal(list(s) + [n_users])
            h_min = min_entropy_conditional(marg, q_z)
            r_s = sum(hash_lens[l] for l in s)
            bound_sq += 2.0 ** (r_s - h_min)
    bound = math.sqrt(bound_sq)

    total_r = sum(hash_lens)
    ideal = np.full((1 << total_r,), 2.0 ** (-total_r))[:, None] * q_z.pmf[None, :]
    tv_sum = 0.0
    for _ in range(n_hashes):
        hs = [sample_hash(rng, in_lens[l], hash_lens[l]) for l in range(n_users)]
        hashed = hashed_joint_dist_exact(hs, joint)
        flat = hashed.pmf.reshape(1 << total_r, q_z.alphabet.size)
        tv_sum += float(np.abs(flat - ideal).sum())
    tv_avg = tv_sum / n_hashes
    return tv_avg, bound, tv_avg <= bound
