"""Frequency counters for the one-dependence estimators.

Two backends share one interface:

* :class:`BinaryStore` for fully observed presence/absence data.  Only
  present-present pair counts are stored; the other three value combinations
  are recovered by inclusion-exclusion from per-(class, season, attribute)
  marginals and (class, season) totals.  An update touches ``s * s`` cells,
  where ``s`` is the number of present attributes.
* :class:`GeneralStore` for small discrete attributes, possibly missing.
  Pair counts live in a (W, W) table per (class, season), where W is the total
  number of attribute values.

Both keep the season-independent class/attribute-value counts that the naive
Bayes scorer needs.
"""

from __future__ import annotations

import copy
import io
import struct
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from ._kernels import add_pairs

MAGIC = b"SODE"
FORMAT_VERSION = 1

BACKEND_BINARY = 0
BACKEND_GENERAL = 1


class SchemaError(ValueError):
    """An instance does not conform to the store's attribute schema."""


class FormatError(ValueError):
    """A serialized payload cannot be decoded."""


@dataclass(frozen=True)
class AttributeSchema:
    """Value counts of the non-season attributes plus the season cycle length."""

    cardinalities: tuple[int, ...]
    n_seasons: int = 1

    def __post_init__(self):
        object.__setattr__(self, "cardinalities", tuple(int(c) for c in self.cardinalities))
        if len(self.cardinalities) < 1:
            raise SchemaError("schema needs at least one attribute")
        if any(c < 2 for c in self.cardinalities):
            raise SchemaError("every attribute needs at least two values")
        if self.n_seasons < 1:
            raise SchemaError("season cardinality must be >= 1")

    @classmethod
    def binary(cls, n: int, n_seasons: int = 1) -> "AttributeSchema":
        return cls((2,) * n, n_seasons)

    @property
    def n(self) -> int:
        return len(self.cardinalities)

    @cached_property
    def is_binary(self) -> bool:
        return all(c == 2 for c in self.cardinalities)

    @cached_property
    def offsets(self) -> np.ndarray:
        return np.concatenate(([0], np.cumsum(self.cardinalities))).astype(np.int64)

    @cached_property
    def card_array(self) -> np.ndarray:
        return np.asarray(self.cardinalities, dtype=np.float64)

    @property
    def width(self) -> int:
        return int(sum(self.cardinalities))

    def with_seasons(self, n_seasons: int) -> "AttributeSchema":
        return AttributeSchema(self.cardinalities, n_seasons)


@dataclass(frozen=True, eq=True)
class Instance:
    """One stream example.

    ``values`` maps attribute index to value.  Absent keys mean value 0 for
    binary data and MISSING for general data.  ``season`` is None when unknown.
    """

    values: Mapping[int, int]
    season: int | None = None
    labels: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        if not isinstance(self.labels, frozenset):
            object.__setattr__(self, "labels", frozenset(self.labels))

    @classmethod
    def binary(cls, present: Iterable[int], season: int | None = None,
               labels: Iterable[str] = ()) -> "Instance":
        return cls({int(i): 1 for i in present}, season, frozenset(labels))

    def present(self) -> list[int]:
        return sorted(i for i, v in self.values.items() if v)


def check_instance(schema: AttributeSchema, x: Instance, binary: bool) -> None:
    """Raise :class:`SchemaError` unless ``x`` fits ``schema``.

    With ``binary`` set, every value must be 0 or 1; otherwise None marks a
    missing value.
    """
    cards = schema.cardinalities
    n = len(cards)
    for i, v in x.values.items():
        if not (isinstance(i, (int, np.integer)) and 0 <= i < n):
            raise SchemaError(f"attribute {i!r} outside [0, {n})")
        if v is None and not binary:
            continue
        if binary:
            if v not in (0, 1):
                raise SchemaError(f"binary attribute {i} has value {v!r}")
        elif not (isinstance(v, (int, np.integer)) and 0 <= v < cards[i]):
            raise SchemaError(f"attribute {i} value {v!r} outside [0, {cards[i]})")
    t = x.season
    if t is not None and not (isinstance(t, (int, np.integer)) and 0 <= t < schema.n_seasons):
        raise SchemaError(f"season {t!r} outside [0, {schema.n_seasons})")


class FrequencyStore:
    """Counters shared by both backends.

    Class arrays grow on demand, so a store only knows about classes it has
    been updated with; readers pass the catalog size ``k`` and missing classes
    read as zero.
    """

    backend: int

    def __init__(self, schema: AttributeSchema, track_pairs: bool = True):
        self.schema = schema
        self.track_pairs = track_pairs
        self.count = 0
        self.pair_increments = 0
        self._c = np.zeros(0, dtype=np.int64)
        self._t = np.zeros(schema.n_seasons, dtype=np.int64)
        self._ct = np.zeros((0, schema.n_seasons), dtype=np.int64)
        # season -> (classes, side, side) pair counts, allocated on first use
        self._slabs: dict[int, np.ndarray] = {}
        self._readonly = False

    # -- growth and validation -------------------------------------------

    @property
    def n_classes(self) -> int:
        return len(self._c)

    def _grow(self, k: int) -> None:
        old = len(self._c)
        if k <= old:
            return
        self._c = np.concatenate([self._c, np.zeros(k - old, dtype=np.int64)])
        self._ct = np.vstack([self._ct, np.zeros((k - old, self.schema.n_seasons), dtype=np.int64)])
        for t, slab in self._slabs.items():
            side = slab.shape[1]
            self._slabs[t] = np.concatenate([slab, np.zeros((k - old, side, side), dtype=np.int64)])
        self._grow_classes(old, k)

    def _grow_classes(self, old: int, k: int) -> None:
        raise NotImplementedError

    def _check_writable(self) -> None:
        if self._readonly:
            raise TypeError("store snapshot is read-only")

    def validate(self, x: Instance) -> None:
        raise NotImplementedError

    def _check_class(self, y: int) -> None:
        if y < 0:
            raise SchemaError(f"class index {y} must be non-negative")

    # -- updates ---------------------------------------------------------

    def update(self, x: Instance, y: int) -> None:
        """Account for one training instance of class ``y``."""
        self.validate(x)
        self._apply(x, y)

    def _apply(self, x: Instance, y: int) -> None:
        # caller has validated x
        self._check_writable()
        self._check_class(y)
        self._grow(y + 1)
        self.count += 1
        self._c[y] += 1
        self._update_values(x, y)

    def update_many(self, xs: Sequence[Instance], ys: Sequence[int]) -> None:
        """Batch counterpart of :meth:`update`; yields identical counts."""
        self._check_writable()
        if len(xs) != len(ys):
            raise ValueError("instances and classes differ in length")
        for x, y in zip(xs, ys):
            self.validate(x)
            self._check_class(y)
        if not xs:
            return
        ys_arr = np.asarray(ys, dtype=np.int64)
        self._grow(int(ys_arr.max()) + 1)
        self.count += len(xs)
        self._c += np.bincount(ys_arr, minlength=len(self._c))
        self._update_many_values(xs, ys_arr)

    def _update_values(self, x: Instance, y: int) -> None:
        raise NotImplementedError

    def _update_many_values(self, xs: Sequence[Instance], ys: np.ndarray) -> None:
        raise NotImplementedError

    def _slab(self, t: int) -> np.ndarray:
        slab = self._slabs.get(t)
        if slab is None:
            side = self._block_side()
            slab = self._slabs[t] = np.zeros((len(self._c), side, side), dtype=np.int64)
        return slab

    def _block(self, y: int, t: int) -> np.ndarray:
        return self._slab(t)[y]

    def pair_slab(self, t: int) -> np.ndarray:
        """All pair counts of season ``t`` as (classes, side, side); may have no classes."""
        slab = self._slabs.get(t)
        if slab is None:
            side = self._block_side()
            return np.zeros((0, side, side), dtype=np.int64)
        return slab

    def _get_block(self, y: int, t: int) -> np.ndarray | None:
        slab = self._slabs.get(t)
        if slab is None or y >= len(slab):
            return None
        return slab[y]

    def _block_side(self) -> int:
        raise NotImplementedError

    # -- logical counters ------------------------------------------------

    def class_count(self, y: int) -> int:
        return int(self._c[y]) if y < len(self._c) else 0

    def season_count(self, t: int) -> int:
        self._bound(t, self.schema.n_seasons, "season")
        return int(self._t[t])

    def class_season_count(self, y: int, t: int) -> int:
        self._bound(t, self.schema.n_seasons, "season")
        return int(self._ct[y, t]) if y < len(self._c) else 0

    def attribute_count(self, i: int) -> int:
        raise NotImplementedError

    def value_count(self, i: int, v: int) -> int:
        raise NotImplementedError

    def joint_count(self, y: int, t: int, i: int, vi: int, j: int, vj: int) -> int:
        raise NotImplementedError

    def class_value_count(self, y: int, i: int, v: int) -> int:
        """Season-independent count of class ``y`` instances with ``x_i == v``."""
        raise NotImplementedError

    def parent_eligible(self, i: int, v: int, m: int) -> bool:
        return self.value_count(i, v) >= m

    def _bound(self, v: int, n: int, what: str) -> None:
        if not (0 <= v < n):
            raise IndexError(f"{what} index {v} outside [0, {n})")

    def _check_key(self, y, t, i, vi, j, vj) -> None:
        if y < 0:
            raise IndexError(f"class index {y} is negative")
        self._bound(t, self.schema.n_seasons, "season")
        self._check_value(i, vi)
        self._check_value(j, vj)

    def _check_value(self, i: int, v: int) -> None:
        self._bound(i, self.schema.n, "attribute")
        self._bound(v, self.schema.cardinalities[i], f"value of attribute {i}")

    # -- bulk reads used by the scorers ----------------------------------

    def class_counts(self, k: int) -> np.ndarray:
        return _pad(self._c, k)

    def class_season_counts(self, t: int, k: int) -> np.ndarray:
        return _pad(self._ct[:, t], k)

    def query(self, x: Instance):
        """Return ``(known, positions)`` for a query instance."""
        raise NotImplementedError

    # -- snapshots and persistence --------------------------------------

    def snapshot(self) -> "FrequencyStore":
        """Read-only deep copy, unaffected by later updates."""
        snap = copy.deepcopy(self)
        snap._readonly = True
        for arr in snap._arrays():
            arr.flags.writeable = False
        for slab in snap._slabs.values():
            slab.flags.writeable = False
        return snap

    def _arrays(self) -> list[np.ndarray]:
        return [self._c, self._t, self._ct]

    def to_bytes(self) -> bytes:
        return serialize(self)

    def __eq__(self, other):
        if not isinstance(other, FrequencyStore):
            return NotImplemented
        return serialize(self) == serialize(other)

    __hash__ = None  # type: ignore[assignment]


class BinaryStore(FrequencyStore):
    """Presence/absence backend.  Instances must be fully observed."""

    backend = BACKEND_BINARY

    def __init__(self, schema: AttributeSchema, track_pairs: bool = True):
        if not schema.is_binary:
            raise SchemaError("binary backend needs every cardinality == 2")
        super().__init__(schema, track_pairs)
        n = schema.n
        self._present = np.zeros(n, dtype=np.int64)          # season-known presence
        self._nb_present = np.zeros((0, n), dtype=np.int64)  # season-independent

    def _grow_classes(self, old, k):
        self._nb_present = np.vstack([self._nb_present, np.zeros((k - old, self.schema.n), dtype=np.int64)])

    def _arrays(self):
        return super()._arrays() + [self._present, self._nb_present]

    def _block_side(self):
        return self.schema.n

    def validate(self, x: Instance) -> None:
        check_instance(self.schema, x, binary=True)

    @staticmethod
    def _present_index(x: Instance) -> np.ndarray:
        return np.fromiter(sorted(i for i, v in x.values.items() if v), dtype=np.int64)

    def _update_values(self, x, y):
        s = self._present_index(x)
        self._nb_present[y, s] += 1
        t = x.season
        if t is None:
            return
        self._t[t] += 1
        self._ct[y, t] += 1
        self._present[s] += 1
        if self.track_pairs:
            add_pairs(self._block(y, t), s)
            self.pair_increments += len(s) * len(s)

    def _update_many_values(self, xs, ys):
        n = self.schema.n
        idx = [self._present_index(x) for x in xs]
        lengths = np.array([len(s) for s in idx], dtype=np.int64)
        flat = np.concatenate(idx) if idx else np.zeros(0, dtype=np.int64)
        rows = np.repeat(ys, lengths)
        np.add.at(self._nb_present, (rows, flat), 1)
        seasons = np.array([-1 if x.season is None else x.season for x in xs], dtype=np.int64)
        known = seasons >= 0
        if not known.any():
            return
        T = self.schema.n_seasons
        self._t += np.bincount(seasons[known], minlength=T)
        np.add.at(self._ct, (ys[known], seasons[known]), 1)
        known_flat = np.repeat(known, lengths)
        self._present += np.bincount(flat[known_flat], minlength=n)
        if not self.track_pairs:
            return
        groups: dict[tuple[int, int], list[np.ndarray]] = {}
        for s, y, t in zip(idx, ys, seasons):
            if t >= 0:
                groups.setdefault((int(y), int(t)), []).append(s)
        for (y, t), members in sorted(groups.items()):
            ii = np.concatenate([np.repeat(s, len(s)) for s in members])
            jj = np.concatenate([np.tile(s, len(s)) for s in members])
            np.add.at(self._block(y, t), (ii, jj), 1)
            self.pair_increments += len(ii)

    def attribute_count(self, i):
        self._bound(i, self.schema.n, "attribute")
        return int(self._t.sum())

    def value_count(self, i, v):
        self._check_value(i, v)
        present = int(self._present[i])
        return present if v == 1 else int(self._t.sum()) - present

    def _marginal(self, y, t, i) -> int:
        block = self._get_block(y, t)
        return 0 if block is None else int(block[i, i])

    def joint_count(self, y, t, i, vi, j, vj):
        self._check_key(y, t, i, vi, j, vj)
        if y >= len(self._c):
            return 0
        block = self._get_block(y, t)
        if block is None:
            return 0
        p11 = int(block[i, j])
        mi, mj = int(block[i, i]), int(block[j, j])
        if vi and vj:
            return p11
        if vi:
            return mi - p11
        if vj:
            return mj - p11
        return int(self._ct[y, t]) - mi - mj + p11

    def class_value_count(self, y, i, v):
        self._check_value(i, v)
        if y >= len(self._c):
            return 0
        present = int(self._nb_present[y, i])
        return present if v == 1 else int(self._c[y]) - present

    def class_known_count(self, y, i):
        self._bound(i, self.schema.n, "attribute")
        return self.class_count(y)

    # bulk reads

    def query(self, x):
        z = np.zeros(self.schema.n, dtype=np.int64)
        for i, v in x.values.items():
            if v:
                z[i] = 1
        return np.arange(self.schema.n), z

    def value_counts(self, known, z):
        total = self._t.sum()
        return np.where(z == 1, self._present, total - self._present)

    def nb_counts(self, known, z, k):
        """Per-class counts of the query values and of known values."""
        present = _pad(self._nb_present, k)
        c = self.class_counts(k)[:, None]
        match = np.where(z[None, :] == 1, present, c - present)
        return match, np.broadcast_to(c, match.shape)


class GeneralStore(FrequencyStore):
    """Backend for small discrete attributes with possible missing values."""

    backend = BACKEND_GENERAL

    def __init__(self, schema: AttributeSchema, track_pairs: bool = True):
        super().__init__(schema, track_pairs)
        self._offsets = schema.offsets
        self._a = np.zeros(schema.n, dtype=np.int64)
        self._av = np.zeros(schema.width, dtype=np.int64)
        self._nb = np.zeros((0, schema.width), dtype=np.int64)

    def _grow_classes(self, old, k):
        self._nb = np.vstack([self._nb, np.zeros((k - old, self.schema.width), dtype=np.int64)])

    def _arrays(self):
        return super()._arrays() + [self._a, self._av, self._nb]

    def _block_side(self):
        return self.schema.width

    def validate(self, x: Instance) -> None:
        check_instance(self.schema, x, binary=False)

    def _positions(self, x: Instance) -> tuple[np.ndarray, np.ndarray]:
        pairs = sorted((i, v) for i, v in x.values.items() if v is not None)
        if not pairs:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty
        kv = np.array(pairs, dtype=np.int64)
        return kv[:, 0], self._offsets[kv[:, 0]] + kv[:, 1]

    def _update_values(self, x, y):
        ki, u = self._positions(x)
        self._nb[y, u] += 1
        t = x.season
        if t is None:
            return
        self._t[t] += 1
        self._ct[y, t] += 1
        self._a[ki] += 1
        self._av[u] += 1
        if self.track_pairs:
            add_pairs(self._block(y, t), u)
            self.pair_increments += len(u) * len(u)

    def _update_many_values(self, xs, ys):
        pos = [self._positions(x) for x in xs]
        lengths = np.array([len(u) for _, u in pos], dtype=np.int64)
        flat_i = np.concatenate([ki for ki, _ in pos])
        flat_u = np.concatenate([u for _, u in pos])
        np.add.at(self._nb, (np.repeat(ys, lengths), flat_u), 1)
        seasons = np.array([-1 if x.season is None else x.season for x in xs], dtype=np.int64)
        known = seasons >= 0
        if not known.any():
            return
        T = self.schema.n_seasons
        self._t += np.bincount(seasons[known], minlength=T)
        np.add.at(self._ct, (ys[known], seasons[known]), 1)
        kf = np.repeat(known, lengths)
        self._a += np.bincount(flat_i[kf], minlength=self.schema.n)
        self._av += np.bincount(flat_u[kf], minlength=self.schema.width)
        if not self.track_pairs:
            return
        groups: dict[tuple[int, int], list[np.ndarray]] = {}
        for (_, u), y, t in zip(pos, ys, seasons):
            if t >= 0:
                groups.setdefault((int(y), int(t)), []).append(u)
        for (y, t), members in sorted(groups.items()):
            ii = np.concatenate([np.repeat(u, len(u)) for u in members])
            jj = np.concatenate([np.tile(u, len(u)) for u in members])
            np.add.at(self._block(y, t), (ii, jj), 1)
            self.pair_increments += len(ii)

    def attribute_count(self, i):
        self._bound(i, self.schema.n, "attribute")
        return int(self._a[i])

    def value_count(self, i, v):
        self._check_value(i, v)
        return int(self._av[self._offsets[i] + v])

    def joint_count(self, y, t, i, vi, j, vj):
        self._check_key(y, t, i, vi, j, vj)
        block = self._get_block(y, t)
        if block is None:
            return 0
        return int(block[self._offsets[i] + vi, self._offsets[j] + vj])

    def class_value_count(self, y, i, v):
        self._check_value(i, v)
        if y >= len(self._c):
            return 0
        return int(self._nb[y, self._offsets[i] + v])

    def class_known_count(self, y, i):
        self._bound(i, self.schema.n, "attribute")
        if y >= len(self._c):
            return 0
        o = self._offsets
        return int(self._nb[y, o[i]:o[i + 1]].sum())

    # bulk reads

    def query(self, x):
        return self._positions(x)

    def value_counts(self, known, u):
        return self._av[u]

    def nb_counts(self, known, u, k):
        nb = _pad(self._nb, k)
        per_attr = np.add.reduceat(nb, self._offsets[:-1], axis=1) if nb.size else np.zeros((k, self.schema.n), dtype=np.int64)
        return nb[:, u], per_attr[:, known]


def _pad(arr: np.ndarray, k: int) -> np.ndarray:
    """Pad or truncate the leading (class) axis to length ``k``."""
    have = arr.shape[0]
    if have == k:
        return arr
    if have > k:
        return arr[:k]
    pad = np.zeros((k - have,) + arr.shape[1:], dtype=arr.dtype)
    return np.concatenate([arr, pad])


def make_store(schema: AttributeSchema, backend: str = "auto", track_pairs: bool = True) -> FrequencyStore:
    """Pick a backend: ``"binary"``, ``"general"`` or ``"auto"`` (binary when possible)."""
    if backend == "auto":
        backend = "binary" if schema.is_binary else "general"
    if backend == "binary":
        return BinaryStore(schema, track_pairs)
    if backend == "general":
        return GeneralStore(schema, track_pairs)
    raise ValueError(f"unknown backend {backend!r}")


# --------------------------------------------------------------------------
# Binary format.  See docs/format.md for the layout.

_U64 = np.dtype("<u8")
_U32 = np.dtype("<u4")


def write_header(buf: io.BytesIO) -> None:
    buf.write(MAGIC)
    buf.write(struct.pack("<H", FORMAT_VERSION))


def write_section(buf: io.BytesIO, tag: bytes, payload: bytes) -> None:
    assert len(tag) == 4
    buf.write(tag)
    buf.write(struct.pack("<Q", len(payload)))
    buf.write(payload)


def read_header(data: bytes) -> int:
    if len(data) < 6:
        raise FormatError("payload too short for header")
    if data[:4] != MAGIC:
        raise FormatError(f"bad magic {data[:4]!r}")
    (version,) = struct.unpack_from("<H", data, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}")
    return 6


def iter_sections(data: bytes, offset: int) -> Iterator[tuple[bytes, bytes]]:
    while offset < len(data):
        if offset + 12 > len(data):
            raise FormatError("truncated section header")
        tag = data[offset:offset + 4]
        (length,) = struct.unpack_from("<Q", data, offset + 4)
        start = offset + 12
        end = start + length
        if end > len(data):
            raise FormatError(f"section {tag!r} truncated")
        yield tag, data[start:end]
        offset = end


def _u64(values) -> bytes:
    arr = np.asarray(values, dtype=np.int64)
    if arr.size and arr.min() < 0:
        raise ValueError("counters must be non-negative")
    return arr.astype(_U64).tobytes()


class _Reader:
    def __init__(self, payload: bytes, what: str):
        self.payload = payload
        self.pos = 0
        self.what = what

    def take(self, fmt: str):
        try:
            out = struct.unpack_from(fmt, self.payload, self.pos)
        except struct.error as exc:
            raise FormatError(f"{self.what}: truncated") from exc
        self.pos += struct.calcsize(fmt)
        return out

    def array(self, dtype: np.dtype, count: int) -> np.ndarray:
        nbytes = dtype.itemsize * count
        if self.pos + nbytes > len(self.payload):
            raise FormatError(f"{self.what}: truncated")
        arr = np.frombuffer(self.payload, dtype=dtype, count=count, offset=self.pos)
        self.pos += nbytes
        return arr.astype(np.int64)

    def done(self) -> None:
        if self.pos != len(self.payload):
            raise FormatError(f"{self.what}: {len(self.payload) - self.pos} trailing bytes")


def _logical_av(store: FrequencyStore) -> np.ndarray:
    if isinstance(store, BinaryStore):
        total = store._t.sum()
        return np.stack([total - store._present, store._present], axis=1).ravel()
    return store._av


def _logical_a(store: FrequencyStore) -> np.ndarray:
    if isinstance(store, BinaryStore):
        return np.full(store.schema.n, store._t.sum(), dtype=np.int64)
    return store._a


def _logical_nb(store: FrequencyStore) -> np.ndarray:
    if isinstance(store, BinaryStore):
        c = store._c[:, None]
        p = store._nb_present
        return np.stack([c - p, p], axis=2).reshape(len(store._c), 2 * store.schema.n)
    return store._nb


def serialize_body(store: FrequencyStore, buf: io.BytesIO) -> None:
    schema = store.schema
    n, T = schema.n, schema.n_seasons
    write_section(buf, b"SCHM",
                  struct.pack("<BBII", store.backend, int(store.track_pairs), n, T)
                  + np.asarray(schema.cardinalities).astype(_U32).tobytes())
    k = len(store._c)
    cnts = io.BytesIO()
    cnts.write(struct.pack("<QI", store.count, k))
    for arr in (store._c, store._t, store._ct.ravel(), _logical_a(store),
                _logical_av(store), _logical_nb(store).ravel()):
        cnts.write(_u64(arr))
    write_section(buf, b"CNTS", cnts.getvalue())
    pairs = io.BytesIO()
    keys = [(y, t) for y in range(k) for t in range(T) if store._ct[y, t] > 0] if store.track_pairs else []
    pairs.write(struct.pack("<I", len(keys)))
    for y, t in keys:
        block = store._get_block(y, t)
        if block is None:
            rows = cols = np.zeros(0, dtype=np.int64)
        else:
            rows, cols = np.nonzero(np.triu(block))
        pairs.write(struct.pack("<IIQ", y, t, len(rows)))
        entries = np.empty(len(rows), dtype=[("r", _U32), ("c", _U32), ("v", _U64)])
        entries["r"] = rows
        entries["c"] = cols
        if len(rows):
            entries["v"] = block[rows, cols]
        pairs.write(entries.tobytes())
    write_section(buf, b"PAIR", pairs.getvalue())


def serialize(store: FrequencyStore) -> bytes:
    """Encode every counter of ``store`` (little-endian, versioned)."""
    buf = io.BytesIO()
    write_header(buf)
    serialize_body(store, buf)
    return buf.getvalue()


def deserialize(data: bytes) -> FrequencyStore:
    """Inverse of :func:`serialize`; raises :class:`FormatError` on bad input."""
    offset = read_header(data)
    sections = dict(_expect(iter_sections(data, offset), [b"SCHM", b"CNTS", b"PAIR"]))
    return _decode_store(sections)


def _expect(sections: Iterator[tuple[bytes, bytes]], tags: list[bytes]) -> list[tuple[bytes, bytes]]:
    got = list(sections)
    if [t for t, _ in got] != tags:
        raise FormatError(f"expected sections {tags}, found {[t for t, _ in got]}")
    return got


def _decode_store(sections: Mapping[bytes, bytes]) -> FrequencyStore:
    r = _Reader(sections[b"SCHM"], "SCHM")
    backend, track, n, T = r.take("<BBII")
    cards = r.array(_U32, n)
    r.done()
    if backend not in (BACKEND_BINARY, BACKEND_GENERAL):
        raise FormatError(f"unknown backend {backend}")
    try:
        schema = AttributeSchema(tuple(int(c) for c in cards), int(T))
        store = make_store(schema, "binary" if backend == BACKEND_BINARY else "general", bool(track))
    except SchemaError as exc:
        raise FormatError(f"invalid schema block: {exc}") from exc
    W = schema.width

    r = _Reader(sections[b"CNTS"], "CNTS")
    count, k = r.take("<QI")
    store.count = int(count)
    store._grow(k)
    store._c[:] = r.array(_U64, k)
    store._t[:] = r.array(_U64, T)
    store._ct[:] = r.array(_U64, k * T).reshape(k, T)
    a = r.array(_U64, n)
    av = r.array(_U64, W)
    nb = r.array(_U64, k * W).reshape(k, W)
    r.done()
    if isinstance(store, BinaryStore):
        store._present[:] = av[1::2]
        store._nb_present[:] = nb[:, 1::2]
    else:
        store._a[:] = a
        store._av[:] = av
        store._nb[:] = nb

    r = _Reader(sections[b"PAIR"], "PAIR")
    (nblocks,) = r.take("<I")
    side = store._block_side()
    entry = np.dtype([("r", _U32), ("c", _U32), ("v", _U64)])
    for _ in range(nblocks):
        y, t, nnz = r.take("<IIQ")
        if y >= k or t >= T:
            raise FormatError(f"pair block ({y}, {t}) out of range")
        nbytes = entry.itemsize * nnz
        if r.pos + nbytes > len(r.payload):
            raise FormatError("PAIR: truncated")
        entries = np.frombuffer(r.payload, dtype=entry, count=nnz, offset=r.pos)
        r.pos += nbytes
        rows = entries["r"].astype(np.int64)
        cols = entries["c"].astype(np.int64)
        if nnz and (rows.max() >= side or cols.max() >= side):
            raise FormatError("pair entry outside block")
        block = store._block(int(y), int(t))
        vals = entries["v"].astype(np.int64)
        block[rows, cols] = vals
        block[cols, rows] = vals
    r.done()
    return store
