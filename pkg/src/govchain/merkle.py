"""Merkle tree used to compress transactions into block headers.

Rules:
    - leaf digest h_i = hash(L_i)
    - parent = hash(left || right)
    - odd levels duplicate their last digest
    - a single leaf has root hash(h_0)
"""

from __future__ import annotations

import dataclasses
from collections.abc import Sequence

from govchain.crypto import Digest
from govchain.crypto import hash_bytes
from govchain.exceptions import MerkleError


@dataclasses.dataclass(frozen=True)
class MerkleTree:
    """Levels are stored bottom-up; ``levels[0]`` are the leaf digests."""

    leaves: tuple[Digest, ...]
    levels: tuple[tuple[Digest, ...], ...]

    @property
    def root(self) -> Digest:
        return self.levels[-1][0]

    def __len__(self) -> int:
        return len(self.leaves)


@dataclasses.dataclass(frozen=True)
class MerkleProof:
    """Sibling digests from the leaf level upwards."""

    index: int
    leaf_count: int
    siblings: tuple[Digest, ...]


def _parent(left: bytes, right: bytes) -> Digest:
    return hash_bytes(left + right)


def _next_level(level: Sequence[Digest]) -> tuple[Digest, ...]:
    padded = list(level)
    if len(padded) % 2 == 1:
        padded.append(padded[-1])
    return tuple(
        _parent(padded[i], padded[i + 1]) for i in range(0, len(padded), 2)
    )


def build_tree(leaves: Sequence[bytes]) -> MerkleTree:
    """Hash ``leaves`` and build every level up to the root."""
    if not leaves:
        msg = "cannot build a Merkle tree from an empty leaf list"
        raise MerkleError(msg)

    digests = tuple(hash_bytes(leaf) for leaf in leaves)
    levels: list[tuple[Digest, ...]] = [digests]
    if len(digests) == 1:
        levels.append((hash_bytes(digests[0]),))
    while len(levels[-1]) > 1:
        levels.append(_next_level(levels[-1]))
    return MerkleTree(leaves=digests, levels=tuple(levels))


def merkle_root(leaves: Sequence[bytes]) -> Digest:
    return build_tree(leaves).root


def merkle_proof(tree: MerkleTree, index: int) -> MerkleProof:
    """Inclusion proof for the leaf at ``index``."""
    if not 0 <= index < len(tree):
        msg = f"leaf index {index} out of range for {len(tree)} leaves"
        raise MerkleError(msg)
    if len(tree) == 1:
        return MerkleProof(index=0, leaf_count=1, siblings=())

    siblings: list[Digest] = []
    position = index
    for level in tree.levels[:-1]:
        sibling = position ^ 1
        # The duplicated last node is its own sibling.
        siblings.append(level[sibling] if sibling < len(level) else level[-1])
        position //= 2
    return MerkleProof(
        index=index, leaf_count=len(tree), siblings=tuple(siblings)
    )


def merkle_verify(
    root: bytes, leaf: bytes, index: int, proof: MerkleProof
) -> bool:
    """Recompute the root from ``leaf`` and ``proof``."""
    if index != proof.index or not 0 <= index < proof.leaf_count:
        return False
    current = hash_bytes(leaf)
    if proof.leaf_count == 1:
        return not proof.siblings and hash_bytes(current) == root

    position = index
    width = proof.leaf_count
    depth = 0
    while width > 1:
        depth += 1
        width = (width + 1) // 2
    if len(proof.siblings) != depth:
        return False

    for sibling in proof.siblings:
        if position % 2 == 0:
            current = _parent(current, sibling)
        else:
            current = _parent(sibling, current)
        position //= 2
    return current == root
