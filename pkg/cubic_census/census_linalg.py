from __future__ import annotations

import numpy as np

from .census_gf import FieldCtx, embed_mul_matrices

WORD_BITS = 64


def pack_rows(bits: np.ndarray) -> np.ndarray:
    """Pack a (batch, rows, cols) 0/1 array into (batch, rows, words) uint64, column c at bit c % 64."""
    bits = np.asarray(bits)
    columns = bits.shape[-1]
    words = -(-columns // WORD_BITS)
    weights = np.left_shift(np.uint64(1), np.arange(WORD_BITS, dtype=np.uint64))
    packed = np.zeros(bits.shape[:-1] + (words,), dtype=np.uint64)
    for word in range(words):
        chunk = bits[..., word * WORD_BITS : (word + 1) * WORD_BITS].astype(np.uint64)
        packed[..., word] = (chunk * weights[: chunk.shape[-1]]).sum(axis=-1, dtype=np.uint64)
    return packed


def rank_gf2_batch(bits: np.ndarray) -> np.ndarray:
    """Ranks over F_2 of a batch of 0/1 matrices by word-packed Gauss-Jordan elimination."""
    bits = np.asarray(bits)
    batch, rows, columns = bits.shape
    packed = pack_rows(bits)
    used = np.zeros((batch, rows), dtype=bool)
    rank = np.zeros(batch, dtype=np.int64)
    batch_index = np.arange(batch)
    zero = np.uint64(0)
    for column in range(columns):
        word, shift = divmod(column, WORD_BITS)
        mask = np.uint64(1) << np.uint64(shift)
        has_bit = (packed[:, :, word] & mask) != zero
        candidates = has_bit & ~used
        found = candidates.any(axis=1)
        if not found.any():
            continue
        pivot = candidates.argmax(axis=1)
        pivot_rows = packed[batch_index, pivot]
        eliminate = has_bit & found[:, None]
        eliminate[batch_index, pivot] = False
        packed ^= np.where(eliminate[:, :, None], pivot_rows[:, None, :], zero)
        used[batch_index[found], pivot[found]] = True
        rank += found
    return rank


def rank_mod_p_batch(matrices: np.ndarray, p: int) -> np.ndarray:
    """Ranks over F_p (p prime) of a batch of integer matrices."""
    if p == 2:
        return rank_gf2_batch(np.asarray(matrices) % 2)
    work = np.asarray(matrices, dtype=np.int64) % p
    batch, rows, columns = work.shape
    inverses = np.zeros(p, dtype=np.int64)
    inverses[1:] = [pow(value, -1, p) for value in range(1, p)]
    used = np.zeros((batch, rows), dtype=bool)
    rank = np.zeros(batch, dtype=np.int64)
    batch_index = np.arange(batch)
    for column in range(columns):
        candidates = (work[:, :, column] != 0) & ~used
        found = candidates.any(axis=1)
        if not found.any():
            continue
        active = batch_index[found]
        pivot = candidates.argmax(axis=1)[found]
        pivot_rows = work[active, pivot, column:] * inverses[work[active, pivot, column]][:, None] % p
        factors = work[active, :, column].copy()
        factors[np.arange(active.size), pivot] = 0
        block = work[active, :, column:]
        block = (block - factors[:, :, None] * pivot_rows[:, None, :]) % p
        block[np.arange(active.size), pivot] = pivot_rows
        work[active, :, column:] = block
        used[active, pivot] = True
        rank[active] += 1
    return rank


def expand_to_prime_field(ctx: FieldCtx, matrices: np.ndarray) -> np.ndarray:
    """Replace each GF(p^k) entry by its k x k multiplication matrix over F_p."""
    matrices = np.asarray(matrices, dtype=np.int64)
    if ctx.k == 1:
        return matrices
    batch, rows, columns = matrices.shape
    blocks = embed_mul_matrices(ctx, ctx)[matrices]
    return blocks.transpose(0, 1, 3, 2, 4).reshape(batch, rows * ctx.k, columns * ctx.k)


def field_rank_batch(ctx: FieldCtx, matrices: np.ndarray) -> np.ndarray:
    """Ranks over GF(p^k); the F_p rank of the expanded matrix is k times the field rank."""
    expanded = expand_to_prime_field(ctx, matrices)
    return rank_mod_p_batch(expanded, ctx.p) // ctx.k
