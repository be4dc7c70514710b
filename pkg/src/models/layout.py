"""Mode layouts: role <-> global index maps for system, replica and chain modes"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

from ..utils.errors import ConfigError, OrderingError


class Ordering(str, Enum):
    SEPARATED = "separated"
    INTERLEAVED = "interleaved"


class Side(str, Enum):
    LEFT = "left"
    RIGHT = "right"


class RoleKind(str, Enum):
    SYSTEM = "system"
    REPLICA = "replica"
    CHAIN = "chain"


@dataclass(frozen=True)
class ModeRole:
    """Physical meaning of one fermionic mode"""
    kind: RoleKind
    site: int  # system/replica index i (0-based) or chain site n
    bath: Optional[str] = None
    branch: Optional[int] = None  # 0 empty, 1 filled

    @classmethod
    def system(cls, i: int) -> "ModeRole":
        return cls(RoleKind.SYSTEM, i)

    @classmethod
    def replica(cls, i: int) -> "ModeRole":
        return cls(RoleKind.REPLICA, i)

    @classmethod
    def chain(cls, bath: str, branch: int, n: int) -> "ModeRole":
        return cls(RoleKind.CHAIN, n, bath, branch)

    @property
    def label(self) -> str:
        if self.kind is RoleKind.SYSTEM:
            return f"s{self.site + 1}"
        if self.kind is RoleKind.REPLICA:
            return f"a{self.site + 1}"
        return f"c[{self.bath},{self.branch},{self.site}]"

    def __str__(self):
        return self.label


@dataclass(frozen=True)
class BathAttachment:
    """A bath's two thermofield chains hanging off one system mode"""
    bath_id: str
    M: int  # sites per branch
    side: Side = Side.LEFT
    system_mode: int = 0

    def __post_init__(self):
        object.__setattr__(self, "side", Side(self.side))
        if self.M < 1:
            raise ConfigError(f"Bath '{self.bath_id}' needs at least one chain site, got M={self.M}")


def ordered_roles(L: int, baths: Sequence[BathAttachment], ordering: Ordering) -> List[ModeRole]:
    """Global mode sequence for the given ordering.

    Two baths: left chains, then the system/replica block, then right chains.
    A single bath is always placed after the system/replica block.
    """
    if len(baths) == 1:
        before, after = [], list(baths)
    else:
        before = [b for b in baths if b.side is Side.LEFT]
        after = [b for b in baths if b.side is Side.RIGHT]

    roles: List[ModeRole] = []
    if ordering is Ordering.SEPARATED:
        for b in before:
            roles += [ModeRole.chain(b.bath_id, 0, n) for n in range(b.M)]
            roles += [ModeRole.chain(b.bath_id, 1, n) for n in range(b.M)]
        roles += [ModeRole.system(i) for i in range(L)]
        roles += [ModeRole.replica(i) for i in range(L)]
        for b in after:
            roles += [ModeRole.chain(b.bath_id, 0, n) for n in range(b.M)]
            roles += [ModeRole.chain(b.bath_id, 1, n) for n in range(b.M)]
    else:
        for b in before:
            for n in reversed(range(b.M)):
                roles += [ModeRole.chain(b.bath_id, 1, n), ModeRole.chain(b.bath_id, 0, n)]
        for i in range(L):
            roles += [ModeRole.system(i), ModeRole.replica(i)]
        for b in after:
            for n in range(b.M):
                roles += [ModeRole.chain(b.bath_id, 0, n), ModeRole.chain(b.bath_id, 1, n)]
    return roles


@dataclass(frozen=True)
class ModeLayout:
    """Ordered list of modes: system s_i, replicas a_i and thermofield chain sites"""
    L: int
    baths: Tuple[BathAttachment, ...]
    ordering: Ordering
    roles: Tuple[ModeRole, ...]
    _index: Dict[ModeRole, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        index = {role: k for k, role in enumerate(self.roles)}
        if len(index) != len(self.roles):
            raise ConfigError("Mode layout contains duplicate roles")
        object.__setattr__(self, "_index", index)

    @property
    def N(self) -> int:
        return len(self.roles)

    def index(self, role: ModeRole) -> int:
        try:
            return self._index[role]
        except KeyError:
            raise ConfigError(f"Mode {role} is not part of this layout") from None

    def role(self, k: int) -> ModeRole:
        return self.roles[k]

    def bath(self, bath_id: str) -> BathAttachment:
        for b in self.baths:
            if b.bath_id == bath_id:
                return b
        raise ConfigError(f"Unknown bath '{bath_id}'")

    @property
    def system_roles(self) -> Tuple[ModeRole, ...]:
        return tuple(ModeRole.system(i) for i in range(self.L))

    @property
    def replica_roles(self) -> Tuple[ModeRole, ...]:
        return tuple(ModeRole.replica(i) for i in range(self.L))

    @property
    def system_replica_roles(self) -> Tuple[ModeRole, ...]:
        """System + replica block in separated order (s_1..s_L, a_1..a_L)"""
        return self.system_roles + self.replica_roles

    def chain_roles(self, bath_id: str, branch: int) -> Tuple[ModeRole, ...]:
        b = self.bath(bath_id)
        return tuple(ModeRole.chain(bath_id, branch, n) for n in range(b.M))

    def indices(self, roles: Sequence[ModeRole]) -> List[int]:
        return [self.index(r) for r in roles]

    def filled_indices(self) -> List[int]:
        return [k for k, r in enumerate(self.roles) if r.kind is RoleKind.CHAIN and r.branch == 1]

    def with_ordering(self, ordering: Ordering) -> "ModeLayout":
        ordering = Ordering(ordering)
        if ordering is self.ordering:
            return self
        return ModeLayout(self.L, self.baths, ordering,
                          tuple(ordered_roles(self.L, self.baths, ordering)))

    def permutation_to(self, other: "ModeLayout") -> List[int]:
        """perm[k] = index in self of the mode at position k of other"""
        if set(self.roles) != set(other.roles):
            raise ConfigError("Layouts describe different mode sets")
        return [self.index(r) for r in other.roles]

    def contiguous_block(self, roles: Sequence[ModeRole]) -> Tuple[int, int]:
        """(start, stop) of a block occupying consecutive indices; raises OrderingError otherwise"""
        positions = sorted(self.index(r) for r in roles)
        if not positions:
            raise OrderingError("Empty mode block")
        start, stop = positions[0], positions[-1] + 1
        if stop - start != len(positions):
            labels = ", ".join(str(r) for r in roles)
            raise OrderingError(
                f"Modes ({labels}) are not contiguous in the {self.ordering.value} ordering; "
                f"use a separated layout"
            )
        return start, stop

    def to_dict(self):
        """Convert to dictionary"""
        return {
            "L": self.L,
            "ordering": self.ordering.value,
            "baths": [
                {"bath_id": b.bath_id, "M": b.M, "side": b.side.value, "system_mode": b.system_mode}
                for b in self.baths
            ],
            "roles": [r.label for r in self.roles],
        }
