"""Ordered, disjoint, contiguous index ranges covering a parameter vector.

Blocks set the granularity of moment reconstruction: direction vectors are
always drawn block by block in partition order, so every consumer sees the
same stream for the same seed regardless of how the vector is partitioned.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class BlockPartition:
    blocks: tuple[tuple[int, int], ...]  # (start, length) pairs

    def __post_init__(self) -> None:
        if not self.blocks:
            raise ValueError("partition needs at least one block")
        cursor = 0
        for start, length in self.blocks:
            if start != cursor or length <= 0:
                raise ValueError(
                    f"blocks must be contiguous from 0 with positive lengths, got {self.blocks}"
                )
            cursor += length

    @property
    def dimension(self) -> int:
        start, length = self.blocks[-1]
        return start + length

    @property
    def block_count(self) -> int:
        return len(self.blocks)

    @property
    def max_block_len(self) -> int:
        return max(length for _, length in self.blocks)

    @staticmethod
    def whole(dimension: int) -> "BlockPartition":
        return BlockPartition(((0, dimension),))

    @staticmethod
    def uniform(dimension: int, block_count: int) -> "BlockPartition":
        """``block_count`` near-equal blocks; the remainder goes to the first ones."""
        if not (1 <= block_count <= dimension):
            raise ValueError(f"need 1 <= block_count <= {dimension}, got {block_count}")
        base, extra = divmod(dimension, block_count)
        blocks = []
        start = 0
        for i in range(block_count):
            length = base + (1 if i < extra else 0)
            blocks.append((start, length))
            start += length
        return BlockPartition(tuple(blocks))

    @staticmethod
    def per_coordinate(dimension: int) -> "BlockPartition":
        return BlockPartition(tuple((i, 1) for i in range(dimension)))
