"""Regular (3,6) LDPC code with systematic GF(2) encoding and a batched
normalized min-sum belief-propagation decoder.

Decoding returns a per-block success flag rather than raising: a block
whose parity checks remain unsatisfied after the iteration budget is a
channel-decode failure.
"""

from __future__ import annotations

import numpy as np

COL_WEIGHT = 3
ROW_WEIGHT = 6


def _build_edges(n: int, m: int, rng: np.random.Generator):
    """Configuration-model matching of column and row stubs, with swap
    repair of duplicate (row, col) pairs."""
    col_stubs = np.repeat(np.arange(n), COL_WEIGHT)
    row_stubs = np.repeat(np.arange(m), ROW_WEIGHT)
    assert col_stubs.size == row_stubs.size
    rows = rng.permutation(row_stubs)
    cols = col_stubs
    for _ in range(200):
        order = np.lexsort((cols, rows))
        rs, cs = rows[order], cols[order]
        dup = np.flatnonzero((rs[1:] == rs[:-1]) & (cs[1:] == cs[:-1]))
        if dup.size == 0:
            rows, cols = rs, cs
            break
        swap_with = rng.integers(0, rows.size, size=dup.size)
        e = order[dup + 1]
        rows[e], rows[swap_with] = rows[swap_with].copy(), rows[e].copy()
    else:
        raise RuntimeError("failed to build a simple (3,6) graph")
    return rows, cols


def _gf2_rref(h: np.ndarray):
    """Reduced row echelon form over GF(2); returns (rref, pivot_cols)."""
    h = h.copy().astype(np.uint8)
    m, n = h.shape
    pivots = []
    r = 0
    for c in range(n):
        if r == m:
            break
        rows_with_one = np.flatnonzero(h[r:, c]) + r
        if rows_with_one.size == 0:
            continue
        p = rows_with_one[0]
        if p != r:
            h[[r, p]] = h[[p, r]]
        elim = np.flatnonzero(h[:, c])
        elim = elim[elim != r]
        h[elim] ^= h[r]
        pivots.append(c)
        r += 1
    return h[:r], np.array(pivots, dtype=np.int64)


class LdpcCode:
    def __init__(self, blocklength: int = 1024, seed: int = 11,
                 bp_max_iters: int = 50, alpha: float = 0.8):
        if blocklength % 2:
            raise ValueError("blocklength must be even")
        self.n = blocklength
        self.m = blocklength * COL_WEIGHT // ROW_WEIGHT
        self.bp_max_iters = bp_max_iters
        self.alpha = alpha
        rng = np.random.default_rng(seed)
        rows, cols = _build_edges(self.n, self.m, rng)
        # Edge arrays sorted by row, exactly ROW_WEIGHT per row.
        order = np.lexsort((cols, rows))
        self.edge_row = rows[order]
        self.edge_col = cols[order]
        # Permutation giving the column-sorted view of the same edges.
        self.col_order = np.lexsort((self.edge_row, self.edge_col))
        self.col_inverse = np.argsort(self.col_order)

        h = np.zeros((self.m, self.n), dtype=np.uint8)
        h[self.edge_row, self.edge_col] = 1
        self.H = h
        rref, pivots = _gf2_rref(h)
        self._rref = rref
        self._pivots = pivots
        mask = np.ones(self.n, dtype=bool)
        mask[pivots] = False
        self.info_positions = np.flatnonzero(mask)
        self.k_info = self.info_positions.size
        self.rate = self.k_info / self.n

    def encode(self, info_bits: np.ndarray) -> np.ndarray:
        """Systematic encoding: info bits occupy the non-pivot positions,
        parity bits solve H c = 0. Accepts (k,) or (B, k)."""
        single = np.asarray(info_bits).ndim == 1
        info_bits = np.atleast_2d(np.asarray(info_bits, dtype=np.uint8))
        if info_bits.shape[1] != self.k_info:
            raise ValueError(f"expected {self.k_info} info bits per block")
        b = info_bits.shape[0]
        c = np.zeros((b, self.n), dtype=np.uint8)
        c[:, self.info_positions] = info_bits
        # Back-substitute through the RREF: each pivot equals the XOR of
        # the non-pivot entries in its row.
        free = self._rref[:, self.info_positions]
        parity = (info_bits @ free.T) % 2
        c[:, self._pivots] = parity.astype(np.uint8)
        return c[0] if single else c

    def syndrome_ok(self, bits: np.ndarray) -> np.ndarray:
        bits = np.atleast_2d(bits)
        grouped = bits[:, self.edge_col].reshape(bits.shape[0], self.m,
                                                 ROW_WEIGHT)
        return (grouped.sum(axis=2) % 2 == 0).all(axis=1)

    def decode(self, llrs: np.ndarray, max_iters: int | None = None):
        """Batched normalized min-sum BP.

        llrs: (n,) or (B, n), positive favors bit 0.
        Returns (info_bits (B, k), ok (B,)).
        """
        llrs = np.atleast_2d(np.asarray(llrs, dtype=np.float64))
        if llrs.shape[1] != self.n:
            raise ValueError(f"expected length-{self.n} LLR blocks")
        max_iters = self.bp_max_iters if max_iters is None else max_iters
        bsz = llrs.shape[0]
        bits = (llrs < 0).astype(np.uint8)
        done = self.syndrome_ok(bits)
        msg = llrs[:, self.edge_col].copy()      # v->c, row-sorted order
        for _ in range(max_iters):
            if done.all():
                break
            act = ~done
            v2c = msg[act].reshape(-1, self.m, ROW_WEIGHT)
            sign = np.sign(v2c)
            sign[sign == 0] = 1.0
            row_sign = sign.prod(axis=2, keepdims=True)
            mag = np.abs(v2c)
            part = np.partition(mag, 1, axis=2)
            min1 = part[:, :, :1]
            min2 = part[:, :, 1:2]
            ext_mag = np.where(mag == min1, min2, min1)
            # Handle ties: if an edge equals min1 but min1 occurs twice,
            # its extrinsic min is still min1 == min2, already correct.
            c2v = self.alpha * row_sign * sign * ext_mag
            c2v = c2v.reshape(act.sum(), -1)
            # Variable update in the column-sorted view.
            c2v_col = c2v[:, self.col_order].reshape(-1, self.n, COL_WEIGHT)
            col_sum = c2v_col.sum(axis=2) + llrs[act]
            post = col_sum
            v2c_col = post[:, :, None] - c2v_col
            msg_act = v2c_col.reshape(act.sum(), -1)[:, self.col_inverse]
            msg[act] = msg_act
            bits_act = (post < 0).astype(np.uint8)
            bits[act] = bits_act
            done[act] = self.syndrome_ok(bits_act)
        return bits[:, self.info_positions], done
