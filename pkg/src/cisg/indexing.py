"""Lexicographic bijection between joint actions and integer indices."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class JointActionIndexing:
    """Positional encoding of joint actions.

    ``counts[i]`` is the (assumed) action count of agent ``i``. The first
    agent in ``agent_order`` is the most significant digit. Joint actions are
    always tuples indexed by agent id, whatever the order.
    """

    agent_order: tuple[int, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "agent_order", tuple(int(a) for a in self.agent_order))
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        if sorted(self.agent_order) != list(range(len(self.counts))):
            raise ValueError(f"agent_order {self.agent_order} is not a permutation")
        if any(c < 1 for c in self.counts):
            raise ValueError("counts must be positive")

    @classmethod
    def natural(cls, counts: Sequence[int]) -> "JointActionIndexing":
        return cls(tuple(range(len(counts))), tuple(counts))

    @property
    def size(self) -> int:
        return math.prod(self.counts)

    def index(self, joint: Sequence[int]) -> int:
        if len(joint) != len(self.counts):
            raise ValueError(f"joint action {tuple(joint)} has wrong length")
        j = 0
        for agent in self.agent_order:
            a, c = joint[agent], self.counts[agent]
            if not 0 <= a < c:
                raise ValueError(f"action {a} of agent {agent} outside [0, {c})")
            j = j * c + a
        return j

    def decode(self, j: int) -> tuple[int, ...]:
        if not 0 <= j < self.size:
            raise ValueError(f"index {j} outside [0, {self.size})")
        joint = [0] * len(self.counts)
        for agent in reversed(self.agent_order):
            j, joint[agent] = divmod(j, self.counts[agent])
        return tuple(joint)


def lex_index(indexing: JointActionIndexing, joint: Sequence[int]) -> int:
    return indexing.index(joint)


def lex_decode(indexing: JointActionIndexing, j: int) -> tuple[int, ...]:
    return indexing.decode(j)
