"""Band-diagonal base matrices and the design operators built from them.

Block indices are 0-based internally.  ``block_maps(..., one_based=True)``
gives the 1-based labels used in reports.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dct, idct

DENSE = "dense"
DCT = "dct"
OPERATOR_KINDS = (DENSE, DCT)
DENSE_ELEMENT_BUDGET = 2 ** 31


@dataclass(frozen=True)
class BaseMatrix:
    """(omega, lambda, rho) variance profile W of shape R x C, unit column sums."""
    omega: int
    lam: int
    rho: float
    W: np.ndarray = field(repr=False, compare=False)

    @property
    def R(self):
        return self.lam + self.omega - 1

    @property
    def C(self):
        return self.lam

    @property
    def theta(self):
        """Ratio R/C = 1 + (omega-1)/lambda."""
        return 1.0 + (self.omega - 1) / self.lam

    @property
    def is_trivial(self):
        return self.R == 1 and self.C == 1

    def params(self):
        return {"omega": self.omega, "lambda": self.lam, "rho": self.rho}


def build_base_matrix(omega, lam, rho=0.0):
    if int(omega) != omega or omega < 1:
        raise ValueError("omega must be an integer >= 1")
    if int(lam) != lam or lam < 1:
        raise ValueError("lambda must be an integer >= 1")
    omega, lam = int(omega), int(lam)
    if omega > 1 and lam < 2 * omega - 1:
        raise ValueError(f"lambda must be >= 2*omega-1 = {2 * omega - 1} (got {lam})")
    if not 0.0 <= rho < 1.0:
        raise ValueError("rho must lie in [0, 1)")
    if lam == 1 and rho != 0.0:
        raise ValueError("rho must be 0 when lambda = 1 (no off-band entries)")
    R = lam + omega - 1
    off = rho / (lam - 1) if lam > 1 else 0.0
    W = np.full((R, lam), off)
    for c in range(lam):
        W[c:c + omega, c] = (1.0 - rho) / omega
    W.setflags(write=False)
    return BaseMatrix(omega, lam, float(rho), W)


def mu_inner(base, mu):
    """User density seen inside one row block: (R/C) mu."""
    return mu * base.R / base.C


def block_maps(base, n, L, B, one_based=False):
    """Row-block index of each of the n rows and column-block index of each of the L*B columns."""
    if n % base.R:
        raise ValueError(f"n={n} is not divisible by R={base.R}")
    if L % base.C:
        raise ValueError(f"L={L} is not divisible by C={base.C}")
    rows = np.repeat(np.arange(base.R), n // base.R)
    cols = np.repeat(np.arange(base.C), L * B // base.C)
    if one_based:
        return rows + 1, cols + 1
    return rows, cols


class DesignOperator:
    """n x LB sensing operator with a block variance profile.

    Subclasses implement ``forward``, ``adjoint_scaled`` and ``to_dense``.
    """

    kind = None

    def __init__(self, base, n, L, B, seed=None, stream=0):
        self.base = base
        self.n, self.L, self.B = int(n), int(L), int(B)
        self.row_block, self.col_block = block_maps(base, n, L, B)
        self.Mr = self.n // base.R
        self.Mc = self.L * self.B // base.C
        self.seed = seed
        self.stream = stream

    @property
    def shape(self):
        return self.n, self.L * self.B

    def adjoint(self, q):
        return self.adjoint_scaled(q, None)

    def _check_x(self, x):
        x = np.asarray(x, float)
        if x.shape != (self.L * self.B,):
            raise ValueError(f"expected x of shape ({self.L * self.B},), got {x.shape}")
        return x

    def _check_q(self, q, S):
        q = np.asarray(q, float)
        if q.shape != (self.n,):
            raise ValueError(f"expected q of shape ({self.n},), got {q.shape}")
        if S is not None:
            S = np.asarray(S, float)
            if S.shape != (self.base.R, self.base.C):
                raise ValueError(f"S_block must be {self.base.R}x{self.base.C}, got {S.shape}")
            if not np.all(np.isfinite(S)):
                raise ValueError("S_block must be finite")
        return q, S


class DenseGaussianOperator(DesignOperator):
    kind = DENSE

    def __init__(self, base, n, L, B, A, seed=None, stream=0):
        super().__init__(base, n, L, B, seed, stream)
        self.A = A

    def forward(self, x):
        return self.A @ self._check_x(x)

    def adjoint_scaled(self, q, S_block=None):
        """(S~ o A)^T q with S~_ij = S_block[row_block(i), col_block(j)]."""
        q, S = self._check_q(q, S_block)
        if S is None:
            return self.A.T @ q
        out = np.zeros(self.L * self.B)
        cb = self.col_block
        for r in range(self.base.R):
            sl = slice(r * self.Mr, (r + 1) * self.Mr)
            out += (self.A[sl].T @ q[sl]) * S[r, cb]
        return out

    def to_dense(self):
        return self.A


class StructuredDCTOperator(DesignOperator):
    """Each nonzero block is a row-subsampled, column-sign-flipped orthonormal DCT.

    Block (r, c) acts as sqrt(W_rc / Mr) * sqrt(w) * D[rows, cols] * diag(signs),
    with D the w-point orthonormal DCT-II, so its columns have squared norm
    close to W_rc, matching the dense design in second moments.  Row and
    column indices are drawn without replacement from 1..w-1 (the constant
    basis vector is skipped).  All blocks are transformed in one batched call.
    """

    kind = DCT

    def __init__(self, base, n, L, B, w, blocks, rows, cols, signs, seed=None, stream=0):
        super().__init__(base, n, L, B, seed, stream)
        self.w = int(w)
        self.blocks = blocks            # (nb, 2) int: (r, c)
        self.rows = rows                # (nb, Mr)
        self.cols = cols                # (nb, Mc)
        self.signs = signs              # (nb, Mc) of +-1
        W = base.W
        self.scale = np.sqrt(W[blocks[:, 0], blocks[:, 1]] / self.Mr) * np.sqrt(self.w)

    def forward(self, x):
        x = self._check_x(x).reshape(self.base.C, self.Mc)
        nb = len(self.blocks)
        ext = np.zeros((nb, self.w))
        idx = np.arange(nb)[:, None]
        ext[idx, self.cols] = self.signs * x[self.blocks[:, 1]]
        y = dct(ext, type=2, norm="ortho", axis=1)[idx, self.rows] * self.scale[:, None]
        out = np.zeros((self.base.R, self.Mr))
        np.add.at(out, self.blocks[:, 0], y)
        return out.ravel()

    def adjoint_scaled(self, q, S_block=None):
        q, S = self._check_q(q, S_block)
        q = q.reshape(self.base.R, self.Mr)
        nb = len(self.blocks)
        coef = self.scale.copy()
        if S is not None:
            coef *= S[self.blocks[:, 0], self.blocks[:, 1]]
        ext = np.zeros((nb, self.w))
        idx = np.arange(nb)[:, None]
        ext[idx, self.rows] = q[self.blocks[:, 0]] * coef[:, None]
        z = idct(ext, type=2, norm="ortho", axis=1)[idx, self.cols] * self.signs
        out = np.zeros((self.base.C, self.Mc))
        np.add.at(out, self.blocks[:, 1], z)
        return out.ravel()

    def to_dense(self):
        D = dct(np.eye(self.w), type=2, norm="ortho", axis=0)
        A = np.zeros(self.shape)
        for b, (r, c) in enumerate(self.blocks):
            blk = D[np.ix_(self.rows[b], self.cols[b])] * self.signs[b] * self.scale[b]
            A[r * self.Mr:(r + 1) * self.Mr, c * self.Mc:(c + 1) * self.Mc] = blk
        return A


def _as_rng(rng):
    if isinstance(rng, np.random.Generator):
        return rng, None
    return np.random.default_rng(rng), (int(rng) if rng is not None else None)


def sample_design(base, n, L, B, kind=DENSE, rng=None, max_elements=DENSE_ELEMENT_BUDGET,
                  seed=None, stream=0):
    """Draw a design operator.  ``rng`` may be a Generator or an integer seed."""
    rng, int_seed = _as_rng(rng)
    seed = int_seed if seed is None else seed
    block_maps(base, n, L, B)   # validates divisibility
    if kind == DENSE:
        if n * L * B > max_elements:
            raise MemoryError(f"dense design with {n * L * B} entries exceeds the budget "
                              f"of {max_elements}; use the dct operator or raise the budget")
        Mr = n // base.R
        Mc = L * B // base.C
        sd = np.sqrt(base.W / Mr)                  # R x C
        sd_full = np.repeat(np.repeat(sd, Mr, axis=0), Mc, axis=1)
        A = rng.standard_normal((n, L * B)) * sd_full
        return DenseGaussianOperator(base, n, L, B, A, seed, stream)
    if kind == DCT:
        Mr = n // base.R
        Mc = L * B // base.C
        w = 1 << int(np.ceil(np.log2(max(Mr, Mc) + 1)))
        blocks = np.argwhere(base.W > 0)
        nb = len(blocks)
        rows = np.empty((nb, Mr), dtype=np.int64)
        cols = np.empty((nb, Mc), dtype=np.int64)
        for b in range(nb):
            rows[b] = 1 + rng.choice(w - 1, Mr, replace=False)
            cols[b] = 1 + rng.choice(w - 1, Mc, replace=False)
        signs = np.where(rng.integers(0, 2, size=(nb, Mc)) == 1, 1.0, -1.0)
        return StructuredDCTOperator(base, n, L, B, w, blocks, rows, cols, signs, seed, stream)
    raise ValueError(f"unknown operator kind {kind!r}")


# --- binary snapshots -----------------------------------------------------------
#
# Layout (little endian):
#   magic   8s   b"GMACOP01"
#   kind    B    0 = dense, 1 = dct
#   n, L, B 3Q
#   omega, lambda  2I
#   rho     d
#   seed, stream   2q   (-1 when unknown)
# dense payload: n*L*B float64, row major
# dct payload:   w, nb (2Q), blocks int32 (nb,2), rows int32 (nb,Mr),
#                cols int32 (nb,Mc), signs int8 (nb,Mc)

_MAGIC = b"GMACOP01"
_HEADER = struct.Struct("<8sB3Q2Id2q")


def save_operator(op, path):
    seed = -1 if op.seed is None else int(op.seed)
    head = _HEADER.pack(_MAGIC, 0 if op.kind == DENSE else 1, op.n, op.L, op.B,
                        op.base.omega, op.base.lam, op.base.rho, seed, int(op.stream))
    with open(path, "wb") as f:
        f.write(head)
        if op.kind == DENSE:
            f.write(np.ascontiguousarray(op.A, dtype="<f8").tobytes())
        else:
            f.write(struct.pack("<2Q", op.w, len(op.blocks)))
            for arr, dt in ((op.blocks, "<i4"), (op.rows, "<i4"), (op.cols, "<i4"), (op.signs, "i1")):
                f.write(np.ascontiguousarray(arr, dtype=dt).tobytes())


def load_operator(path):
    with open(path, "rb") as f:
        buf = f.read()
    magic, kind, n, L, B, omega, lam, rho, seed, stream = _HEADER.unpack_from(buf, 0)
    if magic != _MAGIC:
        raise ValueError("not an operator snapshot")
    base = build_base_matrix(omega, lam, rho)
    seed = None if seed < 0 else seed
    off = _HEADER.size
    if kind == 0:
        A = np.frombuffer(buf, dtype="<f8", count=n * L * B, offset=off).reshape(n, L * B).copy()
        return DenseGaussianOperator(base, n, L, B, A, seed, stream)
    w, nb = struct.unpack_from("<2Q", buf, off)
    off += 16
    Mr, Mc = n // base.R, L * B // base.C
    out = []
    for shape, dt, size in (((nb, 2), "<i4", 4), ((nb, Mr), "<i4", 4), ((nb, Mc), "<i4", 4), ((nb, Mc), "i1", 1)):
        cnt = int(np.prod(shape))
        out.append(np.frombuffer(buf, dtype=dt, count=cnt, offset=off).reshape(shape).astype(np.int64))
        off += cnt * size
    blocks, rows, cols, signs = out
    return StructuredDCTOperator(base, n, L, B, w, blocks, rows, cols, signs.astype(float), seed, stream)
