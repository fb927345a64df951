"""Group structures, penalty specifications and penalty values."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    DimensionMismatch,
    IndexOutOfRange,
    InvalidConfig,
    InvalidGroups,
    ParseError,
    SchemaError,
)


class Family(str, enum.Enum):
    EXCLUSIVE = "exclusive"
    LASSO = "lasso"
    RIDGE = "ridge"
    ELASTIC = "elastic"
    GROUP = "group"
    IPF = "ipf"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InvalidConfig(f"unknown penalty family {value!r}") from None


@dataclass(frozen=True, eq=False)
class GroupStructure:
    """Disjoint partition of covariate indices ``0..p-1``.

    ``group_of[j]`` is the group id of covariate ``j``; ids run ``0..G-1``
    and define the order in which groups are swept by the solver.
    """

    group_of: np.ndarray
    names: tuple = ()
    members: tuple = field(init=False, repr=False)

    def __post_init__(self):
        g = np.asarray(self.group_of)
        if g.ndim != 1 or g.size == 0:
            raise InvalidGroups("group_of must be a non-empty vector")
        if not np.issubdtype(g.dtype, np.integer):
            if not np.all(np.equal(np.mod(g, 1), 0)):
                raise InvalidGroups("group ids must be integers")
        g = g.astype(np.int64)
        G = int(g.max()) + 1
        if g.min() < 0:
            raise InvalidGroups("group ids must be non-negative")
        counts = np.bincount(g, minlength=G)
        if np.any(counts == 0):
            raise InvalidGroups(f"empty group ids: {np.flatnonzero(counts == 0).tolist()}")
        names = tuple(self.names) or tuple(f"g{k}" for k in range(G))
        if len(names) != G:
            raise InvalidGroups(f"{len(names)} names for {G} groups")
        g.setflags(write=False)
        members = tuple(np.flatnonzero(g == k) for k in range(G))
        object.__setattr__(self, "group_of", g)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "members", members)

    @classmethod
    def from_labels(cls, labels):
        """Groups from per-covariate labels, ids assigned by first appearance."""
        ids = {}
        group_of = [ids.setdefault(lab, len(ids)) for lab in labels]
        return cls(np.array(group_of), tuple(str(k) for k in ids))

    @classmethod
    def from_sizes(cls, sizes):
        return cls(np.repeat(np.arange(len(sizes)), sizes))

    @classmethod
    def singletons(cls, p):
        return cls(np.arange(p))

    @property
    def p(self):
        return self.group_of.shape[0]

    @property
    def n_groups(self):
        return len(self.members)

    @property
    def sizes(self):
        return np.array([m.size for m in self.members])

    def sweep_order(self):
        """Coordinate visiting order and group offsets for the solver."""
        order = np.concatenate(self.members).astype(np.int64)
        ptr = np.concatenate([[0], np.cumsum(self.sizes)]).astype(np.int64)
        return order, ptr

    def to_dict(self):
        return {"names": list(self.names), "group_of": self.group_of.tolist()}


@dataclass(frozen=True)
class PenaltySpec:
    """Penalty family and hyperparameters.

    ``lam`` multiplies the structural penalty.  ``alpha`` is the elastic-net
    mixing weight (1 = pure l1); ``group_factors`` are the IPF per-group
    penalty factors.  Fields a family does not use sit at neutral values.
    """

    family: Family
    lam: float = 0.0
    alpha: float = 1.0
    group_factors: tuple | None = None

    def __post_init__(self):
        fam = Family.parse(self.family)
        object.__setattr__(self, "family", fam)
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise InvalidConfig(f"lambda must be finite and >= 0, got {self.lam}")
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidConfig(f"alpha must lie in [0, 1], got {self.alpha}")
        if fam is Family.LASSO or fam is Family.IPF:
            object.__setattr__(self, "alpha", 1.0)
        elif fam is Family.RIDGE:
            object.__setattr__(self, "alpha", 0.0)
        elif fam is Family.GROUP:
            object.__setattr__(self, "alpha", 0.0)
        if self.group_factors is not None:
            f = tuple(float(v) for v in self.group_factors)
            if any(not (v >= 0 and math.isfinite(v)) for v in f):
                raise InvalidConfig("group factors must be finite and >= 0")
            if fam is not Family.IPF:
                f = None
            object.__setattr__(self, "group_factors", f)

    def with_lambda(self, lam):
        return replace(self, lam=float(lam))

    def factors(self, groups: GroupStructure) -> np.ndarray:
        """Per-group factors, validated against ``groups`` (ones if unset)."""
        if self.group_factors is None:
            return np.ones(groups.n_groups)
        f = np.asarray(self.group_factors, dtype=float)
        if f.shape[0] != groups.n_groups:
            raise DimensionMismatch(
                f"{f.shape[0]} group factors for {groups.n_groups} groups")
        return f

    def to_dict(self):
        return {"family": self.family.value, "lambda": self.lam, "alpha": self.alpha,
                "group_factors": None if self.group_factors is None else list(self.group_factors)}


def _check_beta(groups, beta):
    beta = np.asarray(beta, dtype=float).reshape(-1)
    if beta.shape[0] != groups.p:
        raise DimensionMismatch(f"beta has length {beta.shape[0]}, expected {groups.p}")
    return beta


def penalty_value(spec: PenaltySpec, groups: GroupStructure, beta) -> float:
    """Structural penalty ``P(beta)``, without the ``lam`` multiplier."""
    beta = _check_beta(groups, beta)
    fam = spec.family
    if fam is Family.EXCLUSIVE:
        return float(sum(0.5 * np.abs(beta[m]).sum() ** 2 for m in groups.members))
    if fam is Family.GROUP:
        return float(sum(math.sqrt(m.size) * np.linalg.norm(beta[m]) for m in groups.members))
    if fam is Family.IPF:
        f = spec.factors(groups)
        return float(sum(f[k] * np.abs(beta[m]).sum() for k, m in enumerate(groups.members)))
    a = spec.alpha
    return float(a * np.abs(beta).sum() + 0.5 * (1.0 - a) * np.dot(beta, beta))


def exclusive_threshold(spec: PenaltySpec, groups: GroupStructure, beta, j: int) -> float:
    """``lam`` times the l1 mass of ``j``'s group-mates, excluding ``j``."""
    beta = _check_beta(groups, beta)
    if not 0 <= j < groups.p:
        raise IndexOutOfRange(f"covariate index {j} not in [0, {groups.p})")
    mates = groups.members[groups.group_of[j]]
    return float(spec.lam * (np.abs(beta[mates]).sum() - abs(beta[j])))


def read_groups_csv(path, variables):
    """Read a ``variable,group`` CSV and align it to ``variables``.

    Every variable must appear exactly once; unknown variables are an error.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("groups file is empty", row=1) from None
        header = [h.strip() for h in header]
        if header[:2] != ["variable", "group"]:
            raise SchemaError(f"groups header must be 'variable,group', got {','.join(header)!r}")
        mapping = {}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 2:
                raise ParseError("expected two fields", row=lineno)
            var, grp = row[0].strip(), row[1].strip()
            if var in mapping:
                raise SchemaError(f"variable {var!r} listed more than once in groups file")
            mapping[var] = grp
    missing = [v for v in variables if v not in mapping]
    if missing:
        raise SchemaError(f"groups file is missing variable {missing[0]!r}"
                          + (f" (and {len(missing) - 1} more)" if len(missing) > 1 else ""))
    extra = sorted(set(mapping) - set(variables))
    if extra:
        raise SchemaError(f"groups file names unknown variable {extra[0]!r}")
    return GroupStructure.from_labels([mapping[v] for v in variables])
