"""Experience store with cosine-similarity retrieval.

Each recorded experience is the prior scene description, estimated
position, and executed action for one step.  Retrieval embeds the query
text and returns the single most similar stored experience; the default
embedder is a hashed bag of words, and external embedding services can be
plugged in through the same callable contract.
"""

from __future__ import annotations

import re
import zlib
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NonMonotonicStep

EMBED_DIM = 512

_TOKEN_RE = re.compile(r"[a-z0-9]+")

Embedder = Callable[[str], np.ndarray]


def embed(text: str) -> np.ndarray:
    """Hash lowercased alphanumeric tokens into a 512-dim unit vector.

    Empty or token-free text embeds to the zero vector, whose similarity to
    anything is defined as 0.
    """
    vec = np.zeros(EMBED_DIM, dtype=np.float64)
    for token in _TOKEN_RE.findall(text.lower()):
        vec[zlib.crc32(token.encode("utf-8")) % EMBED_DIM] += 1.0
    norm = np.linalg.norm(vec)
    if norm > 0:
        vec /= norm
    return vec


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity, 0 when either vector is zero."""
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


@dataclass(frozen=True)
class Experience:
    step: int
    scene_description: str
    position: int
    action: str
    embedding: np.ndarray

    def summary(self) -> dict:
        return {
            "step": self.step,
            "scene_description": self.scene_description,
            "position": self.position,
            "action": self.action,
        }


@dataclass
class ExperienceStore:
    """Append-only per-episode store of navigation experiences."""

    embedder: Embedder = embed
    embedder_id: str = "hashed-bow-512"
    _items: list[Experience] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self._items)

    @property
    def items(self) -> tuple[Experience, ...]:
        return tuple(self._items)

    def make_experience(self, step: int, scene_description: str, position: int,
                        action: str) -> Experience:
        return Experience(step=step, scene_description=scene_description,
                          position=position, action=action,
                          embedding=self.embedder(scene_description))

    def record(self, experience: Experience) -> None:
        """Append an experience; steps must be strictly increasing.

        Raises:
            NonMonotonicStep: if the step does not exceed the last stored one.
        """
        if self._items and experience.step <= self._items[-1].step:
            raise NonMonotonicStep(
                f"step {experience.step} not after {self._items[-1].step}"
            )
        self._items.append(experience)

    def retrieve(self, query_text: str) -> "tuple[Experience, float] | None":
        """Most similar stored experience to the query, or None when empty.

        Ties go to the most recent step.
        """
        if not self._items:
            return None
        query = self.embedder(query_text)
        best: Experience | None = None
        best_sim = -1.0
        for exp in self._items:
            sim = cosine(query, exp.embedding)
            if sim >= best_sim:  # >= so later steps win ties
                best, best_sim = exp, sim
        assert best is not None
        return best, best_sim
