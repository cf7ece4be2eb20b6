"""Two-universal Toeplitz hashing over GF(2).

A hash is an r x N binary Toeplitz matrix described by N + r - 1 i.i.d.
uniform diagonal bits: entry (i, j) = diagonal_bits[i - j + N - 1].  Distinct
inputs collide with probability at most 2^-r under a uniformly drawn member.
The family carries no affine offset: resolvability recycling needs no output
masking, and the description stays O(N + r).

Hash descriptors are public code parameters; their randomness is common
randomness and is never charged against any rate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .probcore import Alphabet, BudgetError, JointDist, all_bit_rows, bits_to_index

__all__ = ["ToeplitzHash", "sample_hash", "hashed_joint_dist_exact"]

HASH_STATE_BUDGET = 1 << 24


@dataclass(frozen=True)
class ToeplitzHash:
    """GF(2) Toeplitz hash from ``in_len`` bits to ``out_len`` bits."""

    in_len: int
    out_len: int
    diagonal_bits: np.ndarray

    def __post_init__(self):
        if not 0 <= self.out_len <= self.in_len:
            raise ValueError(
                f"need 0 <= out_len <= in_len, got ({self.in_len}, {self.out_len})"
            )
        d = np.ascontiguousarray(self.diagonal_bits, dtype=np.uint8) & 1
        want = max(0, self.in_len + self.out_len - 1) if self.out_len > 0 else 0
        if d.shape != (want,):
            raise ValueError(f"diagonal has {d.shape} bits, expected ({want},)")
        d.setflags(write=False)
        object.__setattr__(self, "diagonal_bits", d)

    def matrix(self) -> np.ndarray:
        """Dense r x N matrix with entry (i, j) = diagonal[i - j + N - 1]."""
        if self.out_len == 0:
            return np.zeros((0, self.in_len), dtype=np.uint8)
        i = np.arange(self.out_len)[:, None]
        j = np.arange(self.in_len)[None, :]
        return self.diagonal_bits[i - j + self.in_len - 1]

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Hash one input vector of ``in_len`` bits down to ``out_len`` bits."""
        x = np.asarray(x, dtype=np.uint8)
        if x.shape != (self.in_len,):
            raise ValueError(f"input shape {x.shape}, expected ({self.in_len},)")
        return self.apply_batch(x[None, :])[0]

    def apply_batch(self, x: np.ndarray) -> np.ndarray:
        """Hash a batch (..., in_len) -> (..., out_len); linear over GF(2)."""
        x = np.asarray(x, dtype=np.uint8)
        if x.shape[-1] != self.in_len:
            raise ValueError(f"input length {x.shape[-1]}, expected {self.in_len}")
        if self.out_len == 0:
            return np.zeros(x.shape[:-1] + (0,), dtype=np.uint8)
        prod = x.astype(np.int64) @ self.matrix().T.astype(np.int64)
        return (prod & 1).astype(np.uint8)

    def to_hex(self) -> str:
        """Diagonal bits as a hex string (first bit in the high nibble)."""
        bits = self.diagonal_bits
        if bits.size == 0:
            return ""
        pad = (-bits.size) % 4
        padded = np.concatenate([bits, np.zeros(pad, dtype=np.uint8)])
        nibbles = padded.reshape(-1, 4)
        vals = (nibbles * np.array([8, 4, 2, 1], dtype=np.uint8)).sum(axis=1)
        return "".join(f"{v:x}" for v in vals)

    @staticmethod
    def from_hex(hex_str: str, in_len: int, out_len: int) -> "ToeplitzHash":
        want = max(0, in_len + out_len - 1) if out_len > 0 else 0
        if want == 0:
            return ToeplitzHash(in_len, out_len, np.zeros(0, dtype=np.uint8))
        vals = np.array([int(c, 16) for c in hex_str], dtype=np.uint8)
        bits = ((vals[:, None] >> np.array([3, 2, 1, 0])) & 1).reshape(-1)
        if bits.size < want:
            raise ValueError(f"hex string holds {bits.size} bits, need {want}")
        return ToeplitzHash(in_len, out_len, bits[:want].astype(np.uint8))


def sample_hash(
    rng: np.random.Generator, in_len: int, out_len: int
) -> ToeplitzHash:
    """Draw a uniform member of the Toeplitz two-universal family."""
    if out_len > in_len:
        raise ValueError(f"out_len {out_len} exceeds in_len {in_len}")
    n_bits = max(0, in_len + out_len - 1) if out_len > 0 else 0
    return ToeplitzHash(in_len, out_len, rng.integers(0, 2, size=n_bits, dtype=np.uint8))


def hashed_joint_dist_exact(
    h_list: list[ToeplitzHash], j: JointDist
) -> JointDist:
    """Exact pushforward of (X_1, .., X_L, Z) through per-user hashes.

    Axis l of ``j`` must have size 2^{h_list[l].in_len}; symbols are read as
    bit blocks, first bit most significant.  The last axis (Z) passes through
    untouched.  Refuses joints above ``HASH_STATE_BUDGET`` states.
    """
    n_users = len(h_list)
    if j.n_axes != n_users + 1:
        raise ValueError(f"joint has {j.n_axes} axes, expected {n_users + 1}")
    if j.pmf.size > HASH_STATE_BUDGET:
        raise BudgetError(
            f"joint has {j.pmf.size} states, budget is {HASH_STATE_BUDGET}"
        )
    tables = []
    for l, h in enumerate(h_list):
        if j.axes[l].size != 1 << h.in_len:
            raise ValueError(
                f"axis {l} size {j.axes[l].size} != 2^in_len = {1 << h.in_len}"
            )
        tables.append(bits_to_index(h.apply_batch(all_bit_rows(h.in_len))))
    z_size = j.axes[-1].size
    out_shape = tuple(1 << h.out_len for h in h_list) + (z_size,)
    out = np.zeros(out_shape)
    flat = j.pmf.reshape(-1, z_size)
    # map each source index tuple to its hashed index tuple, accumulate
    src_idx = np.indices(tuple(a.size for a in j.axes[:-1])).reshape(n_users, -1)
    hashed = [tables[l][src_idx[l]] for l in range(n_users)]
    lin = np.zeros(src_idx.shape[1], dtype=np.int64)
    for l in range(n_users):
        lin = lin * (1 << h_list[l].out_len) + hashed[l]
    np.add.at(out.reshape(-1, z_size), lin, flat)
    return JointDist(
        tuple(Alphabet(1 << h.out_len) for h in h_list) + (j.axes[-1],),
        out,
        renormalize=True,
    )
