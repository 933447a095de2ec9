"""Affine matrix expressions over structured matrix variables.

An :class:`Affine` is ``C + sum_t L_t @ V_t @ R_t`` (or ``L_t @ V_t.T @ R_t``)
with constant ``C, L_t, R_t``.  That is the only shape of expression the LMI
conditions need, and it lowers directly to ``F0 + sum_i x_i F_i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

STRUCTURES = ("full", "symmetric", "spd", "scalar")


@dataclass(frozen=True)
class MatrixVariable:
    """A named decision matrix.

    ``spd`` variables are constrained to be positive definite and ``scalar``
    variables (1x1) to be positive; both are enforced by the solver with the
    same margin as the LMIs.
    """

    name: str
    rows: int
    cols: int
    structure: str = "full"

    def __post_init__(self):
        if self.structure not in STRUCTURES:
            raise ValueError(f"unknown structure {self.structure!r}")
        if self.structure in ("symmetric", "spd") and self.rows != self.cols:
            raise ValueError(f"{self.name}: symmetric variables must be square")
        if self.structure == "scalar" and (self.rows, self.cols) != (1, 1):
            raise ValueError(f"{self.name}: scalar variables are 1x1")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def symmetric(self) -> bool:
        return self.structure in ("symmetric", "spd")

    @property
    def size(self) -> int:
        """Number of scalar degrees of freedom."""
        if self.symmetric:
            return self.rows * (self.rows + 1) // 2
        return self.rows * self.cols

    def unpack(self, x: np.ndarray) -> np.ndarray:
        """Matrix value from this variable's slice of the decision vector."""
        if self.symmetric:
            V = np.zeros(self.shape)
            V[np.triu_indices(self.rows)] = x
            return V + np.triu(V, 1).T
        return np.asarray(x, dtype=float).reshape(self.shape)

    def pack(self, V: np.ndarray) -> np.ndarray:
        V = np.asarray(V, dtype=float)
        if self.symmetric:
            return V[np.triu_indices(self.rows)].copy()
        return V.reshape(-1).copy()

    def expr(self) -> "Affine":
        return Affine.of(self)

    @property
    def T(self) -> "Affine":
        return self.expr().T

    def __matmul__(self, other):
        return self.expr() @ other

    def __rmatmul__(self, other):
        return other @ self.expr()

    def __add__(self, other):
        return self.expr() + other

    def __radd__(self, other):
        return other + self.expr()

    def __sub__(self, other):
        return self.expr() - other

    def __rsub__(self, other):
        return other - self.expr()

    def __neg__(self):
        return -self.expr()

    def __mul__(self, k):
        return self.expr() * k

    __rmul__ = __mul__

    __array_ufunc__ = None


@dataclass(frozen=True)
class Term:
    left: np.ndarray
    var: MatrixVariable
    right: np.ndarray
    transposed: bool = False

    def value(self, V: np.ndarray) -> np.ndarray:
        return self.left @ (V.T if self.transposed else V) @ self.right


def _const(value, shape=None) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(value, dtype=float))
    if shape is not None and arr.shape != shape:
        if arr.size == 1:
            return np.full(shape, float(arr.ravel()[0]))
        raise ValueError(f"shape mismatch: {arr.shape} vs {shape}")
    return arr


@dataclass(frozen=True)
class Affine:
    const: np.ndarray
    terms: tuple[Term, ...] = ()

    __array_ufunc__ = None

    @classmethod
    def of(cls, var: MatrixVariable) -> "Affine":
        return cls(np.zeros(var.shape), (Term(np.eye(var.rows), var, np.eye(var.cols)),))

    @classmethod
    def lift(cls, value) -> "Affine":
        if isinstance(value, Affine):
            return value
        if isinstance(value, MatrixVariable):
            return cls.of(value)
        return cls(_const(value))

    @property
    def shape(self) -> tuple[int, int]:
        return self.const.shape

    @property
    def variables(self) -> list[MatrixVariable]:
        seen = {}
        for t in self.terms:
            seen.setdefault(t.var.name, t.var)
        return list(seen.values())

    @property
    def T(self) -> "Affine":
        return Affine(
            self.const.T.copy(),
            tuple(Term(t.right.T, t.var, t.left.T, not t.transposed) for t in self.terms),
        )

    def __add__(self, other) -> "Affine":
        other = Affine.lift(other) if not np.isscalar(other) else Affine(np.full(self.shape, float(other)))
        if other.shape != self.shape:
            raise ValueError(f"cannot add {self.shape} and {other.shape}")
        return Affine(self.const + other.const, self.terms + other.terms)

    __radd__ = __add__

    def __neg__(self) -> "Affine":
        return self * -1.0

    def __sub__(self, other) -> "Affine":
        return self + (-Affine.lift(other))

    def __rsub__(self, other) -> "Affine":
        return Affine.lift(other) + (-self)

    def __mul__(self, k) -> "Affine":
        if not np.isscalar(k):
            raise TypeError("use @ for matrix products")
        k = float(k)
        return Affine(self.const * k, tuple(Term(t.left * k, t.var, t.right, t.transposed) for t in self.terms))

    __rmul__ = __mul__

    def __matmul__(self, other) -> "Affine":
        if isinstance(other, (Affine, MatrixVariable)):
            raise TypeError("products of two decision expressions are not affine")
        R = _const(other)
        if R.shape[0] != self.shape[1]:
            raise ValueError(f"cannot multiply {self.shape} by {R.shape}")
        return Affine(self.const @ R, tuple(Term(t.left, t.var, t.right @ R, t.transposed) for t in self.terms))

    def __rmatmul__(self, other) -> "Affine":
        L = _const(other)
        if L.shape[1] != self.shape[0]:
            raise ValueError(f"cannot multiply {L.shape} by {self.shape}")
        return Affine(L @ self.const, tuple(Term(L @ t.left, t.var, t.right, t.transposed) for t in self.terms))

    def evaluate(self, assignment: Mapping[str, np.ndarray]) -> np.ndarray:
        out = self.const.copy()
        for t in self.terms:
            if t.var.name not in assignment:
                raise MissingAssignment(t.var.name)
            out += t.value(np.asarray(assignment[t.var.name], dtype=float))
        return out


class MissingAssignment(KeyError):
    """A variable referenced by an expression has no value."""


def zeros(rows: int, cols: int) -> Affine:
    return Affine(np.zeros((rows, cols)))


def bmat(grid: Sequence[Sequence]) -> Affine:
    """Block matrix from Affine / MatrixVariable / array / None (zero) entries."""
    cells = [[None if c is None else Affine.lift(c) for c in row] for row in grid]
    nr, nc = len(cells), len(cells[0])
    heights = [None] * nr
    widths = [None] * nc
    for i, row in enumerate(cells):
        if len(row) != nc:
            raise ValueError("ragged block grid")
        for j, c in enumerate(row):
            if c is None:
                continue
            h, w = c.shape
            if heights[i] not in (None, h) or widths[j] not in (None, w):
                raise ValueError(f"block ({i},{j}) has inconsistent shape {c.shape}")
            heights[i], widths[j] = h, w
    if None in heights or None in widths:
        raise ValueError("every block row and column needs at least one sized entry")
    r_off = np.concatenate([[0], np.cumsum(heights)])
    c_off = np.concatenate([[0], np.cumsum(widths)])
    total = (int(r_off[-1]), int(c_off[-1]))
    const = np.zeros(total)
    terms = []
    for i, row in enumerate(cells):
        for j, c in enumerate(row):
            if c is None:
                continue
            rs = slice(r_off[i], r_off[i + 1])
            cs = slice(c_off[j], c_off[j + 1])
            const[rs, cs] = c.const
            for t in c.terms:
                left = np.zeros((total[0], t.left.shape[1]))
                left[rs] = t.left
                right = np.zeros((t.right.shape[0], total[1]))
                right[:, cs] = t.right
                terms.append(Term(left, t.var, right, t.transposed))
    return Affine(const, tuple(terms))


@dataclass(frozen=True)
class Tie:
    """Block (rows, cols) of a structured matrix equals a variable, its transpose, its negation, or zero."""

    rows: slice
    cols: slice
    source: MatrixVariable | None
    transform: str = "identity"


@dataclass(frozen=True)
class StructuredMatrix:
    """A matrix assembled from variable blocks and fixed zeros.

    Shared blocks (e.g. the common upper-left block of two slack matrices)
    are the same :class:`MatrixVariable` placed twice, so the tie is exact by
    construction; ``ties`` records the layout so it can be audited.
    """

    name: str
    expr: Affine
    ties: tuple[Tie, ...]

    @classmethod
    def from_blocks(cls, name: str, grid: Sequence[Sequence]) -> "StructuredMatrix":
        """Entries are a MatrixVariable, ``(var, "transpose" | "negate")`` or ``(rows, cols)`` zero."""
        affine_grid = []
        layout = []
        for row in grid:
            arow, lrow = [], []
            for cell in row:
                if isinstance(cell, MatrixVariable):
                    arow.append(cell.expr())
                    lrow.append((cell, "identity", cell.shape))
                elif isinstance(cell[0], MatrixVariable):
                    var, how = cell
                    e = {"transpose": var.T, "negate": -var.expr()}[how]
                    arow.append(e)
                    lrow.append((var, how, e.shape))
                else:
                    arow.append(zeros(*cell))
                    lrow.append((None, "zero", tuple(cell)))
            affine_grid.append(arow)
            layout.append(lrow)
        ties = []
        r0 = 0
        for lrow in layout:
            c0 = 0
            h = lrow[0][2][0]
            for var, how, shape in lrow:
                ties.append(Tie(slice(r0, r0 + shape[0]), slice(c0, c0 + shape[1]), var, how))
                c0 += shape[1]
            r0 += h
        return cls(name, bmat(affine_grid), tuple(ties))

    def check(self, assignment: Mapping[str, np.ndarray]) -> list[str]:
        """Exact audit of every tie; returns human-readable violations."""
        value = self.expr.evaluate(assignment)
        bad = []
        for t in self.ties:
            block = value[t.rows, t.cols]
            if t.source is None:
                expected = np.zeros_like(block)
            else:
                V = np.asarray(assignment[t.source.name], dtype=float)
                expected = {"identity": V, "transpose": V.T, "negate": -V}[t.transform]
            if not np.array_equal(block, expected):
                bad.append(f"{self.name}[{t.rows.start}:{t.rows.stop},{t.cols.start}:{t.cols.stop}]")
        return bad


@dataclass(frozen=True)
class BlockLmi:
    """Symmetric block matrix required to be negative definite.

    ``blocks`` is an r x r grid; entries below the diagonal may be None, in
    which case they are the transpose of their mirror block.
    """

    name: str
    blocks: tuple[tuple, ...]
    margin: float | None = None
    structured: tuple[StructuredMatrix, ...] = ()
    matrix: Affine = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        r = len(self.blocks)
        grid = [[None] * r for _ in range(r)]
        for i in range(r):
            if len(self.blocks[i]) != r:
                raise ValueError(f"{self.name}: block grid must be square")
            for j in range(i, r):
                grid[i][j] = self.blocks[i][j]
        for i in range(r):
            for j in range(i):
                lower = self.blocks[i][j]
                grid[i][j] = Affine.lift(lower) if lower is not None else (
                    None if grid[j][i] is None else Affine.lift(grid[j][i]).T
                )
        object.__setattr__(self, "matrix", bmat(grid))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def variables(self) -> list[MatrixVariable]:
        return self.matrix.variables

    def evaluate(self, assignment: Mapping[str, np.ndarray]) -> np.ndarray:
        return self.matrix.evaluate(assignment)

    def block_shapes(self) -> list[list[tuple[int, int] | None]]:
        shapes = []
        for row in self.blocks:
            shapes.append([None if b is None else Affine.lift(b).shape for b in row])
        return shapes

    def describe(self) -> dict:
        """JSON-friendly summary for cross-checking the printed block structure."""
        blocks = []
        r = len(self.blocks)
        for i in range(r):
            for j in range(i, r):
                b = self.blocks[i][j]
                if b is None:
                    continue
                a = Affine.lift(b)
                blocks.append({
                    "position": [i, j],
                    "shape": list(a.shape),
                    "variables": sorted({t.var.name for t in a.terms}),
                    "constant": a.const.tolist(),
                })
        return {
            "name": self.name,
            "dim": self.dim,
            "variables": {v.name: {"shape": list(v.shape), "structure": v.structure} for v in self.variables},
            "blocks": blocks,
        }
