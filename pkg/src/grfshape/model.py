"""Core data model for second-order Gibbs random fields on pixel grids.

Conventions used throughout the package:

* coordinates: ``x`` grows rightwards, ``y`` grows downwards; an offset
  ``(dx, dy)`` connects node ``t = (x, y)`` to ``t' = (x + dx, y + dy)``;
* arrays holding per-pixel data are indexed ``arr[y, x]`` (row-major);
* a labelling is a ``(height, width)`` integer array with values in
  ``0 .. K-1``;
* the probability of a labelling is proportional to ``exp(energy(y))``,
  i.e. :func:`energy` is the exponent of the unnormalised density.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    DuplicateOffset,
    OppositeOffsetPresent,
    UnknownOffset,
)

Offset = tuple[int, int]
"""Integer pixel offset ``(dx, dy)``."""

ZERO_OFFSET: Offset = (0, 0)


def as_offset(a: Sequence[int]) -> Offset:
    dx, dy = a
    return (int(dx), int(dy))


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class GridDomain:
    """Rectangular pixel grid; edges are truncated at the boundary (no wraparound)."""

    width: int
    height: int

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise DimensionMismatch(
                f"domain must be at least 1x1, got {self.width}x{self.height}"
            )

    @property
    def size(self) -> int:
        return self.width * self.height

    @property
    def shape(self) -> tuple[int, int]:
        """Array shape ``(height, width)``."""
        return (self.height, self.width)


@dataclass(frozen=True)
class LabelSet:
    """Dense label ids ``0 .. count-1``; names are metadata only."""

    count: int
    names: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.count < 1:
            raise DimensionMismatch(f"label count must be >= 1, got {self.count}")
        if self.names is not None:
            object.__setattr__(self, "names", tuple(self.names))
            if len(self.names) != self.count:
                raise DimensionMismatch(
                    f"{len(self.names)} names for {self.count} labels"
                )


@dataclass(frozen=True)
class NeighborhoodStructure:
    """Ordered offset set defining translation-invariant edge classes.

    Always contains the zero offset (unary terms). For every nonzero offset
    ``a`` in the set, ``-a`` must not be present: each undirected edge class
    is represented once, by a single directed offset.
    """

    offsets: tuple[Offset, ...]

    def __post_init__(self) -> None:
        offs = [as_offset(a) for a in self.offsets]
        nonzero = [a for a in offs if a != ZERO_OFFSET]
        if len(offs) - len(nonzero) > 1:
            raise DuplicateOffset("zero offset listed more than once")
        seen: set[Offset] = set()
        for a in nonzero:
            if a in seen:
                raise DuplicateOffset(f"offset {a} listed twice")
            if (-a[0], -a[1]) in seen:
                raise OppositeOffsetPresent(f"both {a} and {(-a[0], -a[1])} present")
            seen.add(a)
        object.__setattr__(self, "offsets", (ZERO_OFFSET, *nonzero))

    @property
    def pairwise(self) -> tuple[Offset, ...]:
        """Nonzero offsets, in declaration order."""
        return self.offsets[1:]

    def __contains__(self, a: object) -> bool:
        return a in self.offsets


def edge_count(domain: GridDomain, a: Sequence[int]) -> int:
    """Number of grid edges of offset class ``a``: ``max(0, W-|dx|) * max(0, H-|dy|)``."""
    dx, dy = as_offset(a)
    return max(0, domain.width - abs(dx)) * max(0, domain.height - abs(dy))


@dataclass(frozen=True)
class PotentialTable:
    """Gibbs potentials: one unary table plus one ``K x K`` table per nonzero offset.

    Tables may be stored in any gauge; :func:`normalize_potentials` maps to
    the canonical gauge in which every table sums to zero.
    """

    unary: np.ndarray
    offsets: tuple[Offset, ...]
    tables: np.ndarray

    def __post_init__(self) -> None:
        unary = _frozen(np.asarray(self.unary, dtype=np.float64))
        offsets = tuple(as_offset(a) for a in self.offsets)
        tables = _frozen(np.asarray(self.tables, dtype=np.float64))
        if unary.ndim != 1:
            raise DimensionMismatch("unary table must be one-dimensional")
        k = unary.shape[0]
        if tables.size == 0:
            tables = _frozen(np.zeros((len(offsets), k, k)))
        if tables.shape != (len(offsets), k, k):
            raise DimensionMismatch(
                f"pairwise tables shaped {tables.shape}, expected ({len(offsets)}, {k}, {k})"
            )
        if ZERO_OFFSET in offsets:
            raise DuplicateOffset("zero offset belongs to the unary table")
        if len(set(offsets)) != len(offsets):
            raise DuplicateOffset("duplicate offset in potential table")
        object.__setattr__(self, "unary", unary)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "tables", tables)

    @property
    def label_count(self) -> int:
        return self.unary.shape[0]

    @classmethod
    def zeros(cls, label_count: int, offsets: Iterable[Sequence[int]]) -> "PotentialTable":
        offs = tuple(as_offset(a) for a in offsets)
        return cls(
            unary=np.zeros(label_count),
            offsets=offs,
            tables=np.zeros((len(offs), label_count, label_count)),
        )

    def table_for(self, a: Sequence[int]) -> np.ndarray:
        a = as_offset(a)
        try:
            return self.tables[self.offsets.index(a)]
        except ValueError:
            raise UnknownOffset(f"no pairwise table for offset {a}") from None

    def is_canonical(self, tol: float = 1e-12) -> bool:
        if abs(float(self.unary.sum())) > tol:
            return False
        return bool(np.all(np.abs(self.tables.sum(axis=(1, 2))) <= tol))

    def replace(self, unary: np.ndarray | None = None, tables: np.ndarray | None = None) -> "PotentialTable":
        return PotentialTable(
            unary=self.unary if unary is None else unary,
            offsets=self.offsets,
            tables=self.tables if tables is None else tables,
        )


def normalize_potentials(potentials: PotentialTable) -> PotentialTable:
    """Map to the canonical gauge: subtract from each table its mean.

    Idempotent; the induced distribution is unchanged because adding a
    constant to a table shifts every labelling's energy by the same amount.
    """
    unary = potentials.unary - potentials.unary.mean()
    tables = potentials.tables - potentials.tables.mean(axis=(1, 2), keepdims=True)
    return potentials.replace(unary=unary, tables=tables)


def add_gauge_constants(
    potentials: PotentialTable, constants: Mapping[Sequence[int], float]
) -> PotentialTable:
    """Add per-offset constants entrywise; key ``(0, 0)`` addresses the unary table."""
    shifts = np.zeros(len(potentials.offsets))
    unary_shift = 0.0
    for key, c in constants.items():
        a = as_offset(key)
        if a == ZERO_OFFSET:
            unary_shift = float(c)
        elif a in potentials.offsets:
            shifts[potentials.offsets.index(a)] = float(c)
        else:
            raise UnknownOffset(f"constant given for unknown offset {a}")
    return potentials.replace(
        unary=potentials.unary + unary_shift,
        tables=potentials.tables + shifts[:, None, None],
    )


@dataclass(frozen=True)
class GrfModel:
    """A Gibbs random field: domain, labels, neighbourhood structure and potentials."""

    domain: GridDomain
    labels: LabelSet
    structure: NeighborhoodStructure
    potentials: PotentialTable

    def __post_init__(self) -> None:
        if self.potentials.label_count != self.labels.count:
            raise DimensionMismatch(
                f"potentials for {self.potentials.label_count} labels, "
                f"label set has {self.labels.count}"
            )
        if self.potentials.offsets != self.structure.pairwise:
            raise DimensionMismatch(
                "potential tables must be indexed exactly by the structure's "
                f"nonzero offsets: {self.potentials.offsets} != {self.structure.pairwise}"
            )

    @classmethod
    def zero(
        cls,
        domain: GridDomain,
        labels: LabelSet,
        structure: NeighborhoodStructure,
    ) -> "GrfModel":
        return cls(
            domain=domain,
            labels=labels,
            structure=structure,
            potentials=PotentialTable.zeros(labels.count, structure.pairwise),
        )

    def with_potentials(self, potentials: PotentialTable) -> "GrfModel":
        return GrfModel(self.domain, self.labels, self.structure, potentials)


def build_model(
    domain: GridDomain,
    labels: LabelSet,
    structure: NeighborhoodStructure,
    potentials: PotentialTable,
) -> GrfModel:
    """Validate and assemble a model; potentials are stored exactly as given."""
    return GrfModel(domain, labels, structure, potentials)


# -- labellings ---------------------------------------------------------------


def validate_labelling(y: np.ndarray, domain: GridDomain, labels: LabelSet) -> np.ndarray:
    y = np.asarray(y)
    if y.shape != domain.shape:
        raise DimensionMismatch(f"labelling shaped {y.shape}, domain is {domain.shape}")
    if not np.issubdtype(y.dtype, np.integer):
        raise DimensionMismatch(f"labelling must be integer, got dtype {y.dtype}")
    if y.size and ((y.min() < 0) or (y.max() >= labels.count)):
        raise DimensionMismatch(
            f"labels out of range 0..{labels.count - 1}: [{y.min()}, {y.max()}]"
        )
    return y


def random_labelling(
    domain: GridDomain, labels: LabelSet, rng: np.random.Generator
) -> np.ndarray:
    return rng.integers(0, labels.count, size=domain.shape).astype(np.int32)


def offset_slices(y: np.ndarray, a: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Source/destination views of ``y`` for every edge of offset class ``a``."""
    dx, dy = as_offset(a)
    h, w = y.shape[-2], y.shape[-1]
    x0, x1 = max(0, -dx), w - max(0, dx)
    y0, y1 = max(0, -dy), h - max(0, dy)
    if x0 >= x1 or y0 >= y1:
        empty = y[..., 0:0, 0:0]
        return empty, empty
    src = y[..., y0:y1, x0:x1]
    dst = y[..., y0 + dy : y1 + dy, x0 + dx : x1 + dx]
    return src, dst


# -- sufficient statistics ------------------------------------------------------

#: allowed values of :attr:`SufficientStatistics.kind`
STAT_KINDS = ("counts", "expectation", "frequency", "difference")


@dataclass(frozen=True)
class SufficientStatistics:
    """Per-offset label(-pair) tables: co-occurrence counts or their expectations.

    ``kind`` distinguishes raw counts of a single labelling, expectations of
    counts (same scale), per-edge-normalised frequencies, and signed
    differences (gradients). All entries are non-negative except for
    ``kind == "difference"``.
    """

    unary: np.ndarray
    offsets: tuple[Offset, ...]
    tables: np.ndarray
    kind: str = "counts"

    def __post_init__(self) -> None:
        unary = _frozen(np.asarray(self.unary, dtype=np.float64))
        offsets = tuple(as_offset(a) for a in self.offsets)
        tables = _frozen(np.asarray(self.tables, dtype=np.float64))
        k = unary.shape[0]
        if tables.size == 0:
            tables = _frozen(np.zeros((len(offsets), k, k)))
        if unary.ndim != 1 or tables.shape != (len(offsets), k, k):
            raise DimensionMismatch(
                f"statistics tables shaped {tables.shape}, expected ({len(offsets)}, {k}, {k})"
            )
        if self.kind not in STAT_KINDS:
            raise DimensionMismatch(f"unknown statistics kind {self.kind!r}")
        if self.kind != "difference" and (unary.min(initial=0.0) < 0 or tables.min(initial=0.0) < 0):
            raise DimensionMismatch(f"negative entries in {self.kind} statistics")
        object.__setattr__(self, "unary", unary)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "tables", tables)

    @property
    def label_count(self) -> int:
        return self.unary.shape[0]

    def table_for(self, a: Sequence[int]) -> np.ndarray:
        a = as_offset(a)
        try:
            return self.tables[self.offsets.index(a)]
        except ValueError:
            raise UnknownOffset(f"no statistics table for offset {a}") from None

    def normalized(self, domain: GridDomain) -> "SufficientStatistics":
        """Per-edge frequencies: unary over ``|D|``, each pairwise table over ``|E_a|``."""
        if self.kind == "frequency":
            return self
        counts = np.array(
            [edge_count(domain, a) for a in self.offsets], dtype=np.float64
        )
        denom = np.where(counts > 0, counts, 1.0)
        return SufficientStatistics(
            unary=self.unary / domain.size,
            offsets=self.offsets,
            tables=self.tables / denom[:, None, None],
            kind="frequency" if self.kind != "difference" else "difference",
        )

    def scaled_to_counts(self, domain: GridDomain) -> "SufficientStatistics":
        """Inverse of :meth:`normalized`: frequencies back to expected counts."""
        if self.kind != "frequency":
            return self
        counts = np.array(
            [edge_count(domain, a) for a in self.offsets], dtype=np.float64
        )
        return SufficientStatistics(
            unary=self.unary * domain.size,
            offsets=self.offsets,
            tables=self.tables * counts[:, None, None],
            kind="expectation",
        )

    def max_abs(self) -> float:
        mx = float(np.abs(self.unary).max(initial=0.0))
        if self.tables.size:
            mx = max(mx, float(np.abs(self.tables).max()))
        return mx


def count_statistics(
    domain: GridDomain,
    structure: NeighborhoodStructure,
    labels: LabelSet,
    y: np.ndarray,
) -> SufficientStatistics:
    """Co-occurrence counts ``n_a(k, k')`` over every edge class of the structure."""
    y = validate_labelling(y, domain, labels)
    k = labels.count
    unary = np.bincount(y.ravel(), minlength=k).astype(np.float64)
    tables = np.zeros((len(structure.pairwise), k, k))
    for i, a in enumerate(structure.pairwise):
        src, dst = offset_slices(y, a)
        if src.size:
            codes = src.ravel().astype(np.int64) * k + dst.ravel()
            tables[i] = np.bincount(codes, minlength=k * k).reshape(k, k)
    return SufficientStatistics(
        unary=unary, offsets=structure.pairwise, tables=tables, kind="counts"
    )


def energy(model: GrfModel, y: np.ndarray) -> float:
    """Exponent of the unnormalised density: ``sum_t u_0(y_t) + sum_a sum_{E_a} u_a(y_t, y_t')``."""
    y = validate_labelling(y, model.domain, model.labels)
    pot = model.potentials
    e = float(pot.unary[y].sum())
    for i, a in enumerate(pot.offsets):
        src, dst = offset_slices(y, a)
        if src.size:
            e += float(pot.tables[i][src, dst].sum())
    return e


# -- evidence -----------------------------------------------------------------

FREE = -1
"""Clamp-array marker for an unconstrained node."""


@dataclass(frozen=True)
class Evidence:
    """Observed data for conditioning: an image and/or a partial labelling.

    ``clamps`` is an integer array over the domain with ``-1`` for free nodes
    and a label id for nodes fixed to that label.
    """

    image: np.ndarray | None = None
    clamps: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.image is not None:
            img = np.asarray(self.image, dtype=np.float64)
            if img.ndim == 2:
                img = img[:, :, None]
            if img.ndim != 3:
                raise DimensionMismatch(f"image must be HxW or HxWxC, got shape {img.shape}")
            img.setflags(write=False)
            object.__setattr__(self, "image", img)
        if self.clamps is not None:
            cl = np.asarray(self.clamps)
            if not np.issubdtype(cl.dtype, np.integer):
                raise DimensionMismatch("clamps must be an integer array")
            cl = cl.astype(np.int32, copy=True)
            cl.setflags(write=False)
            object.__setattr__(self, "clamps", cl)

    def validate(self, domain: GridDomain, labels: LabelSet) -> None:
        if self.image is not None and self.image.shape[:2] != domain.shape:
            raise DimensionMismatch(
                f"image shaped {self.image.shape[:2]}, domain is {domain.shape}"
            )
        if self.clamps is not None:
            if self.clamps.shape != domain.shape:
                raise DimensionMismatch(
                    f"clamps shaped {self.clamps.shape}, domain is {domain.shape}"
                )
            if self.clamps.max(initial=FREE) >= labels.count or self.clamps.min(initial=FREE) < FREE:
                raise DimensionMismatch("clamp labels out of range")

    @property
    def channels(self) -> int | None:
        return None if self.image is None else self.image.shape[2]


def full_clamp(y: np.ndarray) -> Evidence:
    """Evidence fixing every node to the given labelling (supervised event)."""
    return Evidence(clamps=np.asarray(y, dtype=np.int32))
