"""Per-user personalization store with deterministic trigram embeddings.

Records are append-only, one JSON document per line, so a profile can be
audited with a pager. The embedder is local and seeded by content only,
which keeps the whole rig runnable offline and byte-reproducible.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field, replace

EMBEDDING_DIM = 256
MEMORY_SCHEMA = "driverig-memory v1"
DEFAULT_TOP_K = 3


def embed(text: str, dim: int = EMBEDDING_DIM) -> tuple[float, ...]:
    """Character-trigram hashing into a unit vector; '' maps to the zero vector."""
    if not text:
        return tuple(0.0 for _ in range(dim))
    padded = f"  {text.lower()} "
    counts = [0.0] * dim
    for i in range(len(padded) - 2):
        trigram = padded[i: i + 3]
        digest = hashlib.sha1(trigram.encode("utf-8")).digest()
        bucket = int.from_bytes(digest[:4], "big") % dim
        sign = 1.0 if digest[4] % 2 == 0 else -1.0
        counts[bucket] += sign
    norm = math.sqrt(sum(c * c for c in counts))
    if norm == 0.0:
        # Degenerate cancellation; fall back to a deterministic one-hot.
        digest = hashlib.sha1(text.encode("utf-8")).digest()
        counts[int.from_bytes(digest[:4], "big") % dim] = 1.0
        norm = 1.0
    return tuple(c / norm for c in counts)


def cosine(a: tuple[float, ...], b: tuple[float, ...]) -> float:
    return sum(x * y for x, y in zip(a, b))


@dataclass(frozen=True)
class MemoryRecord:
    record_id: int
    user_id: str
    instruction: str
    policy: str                  # program source or serialized action matrix
    scene: str = ""              # optional situation description D
    feedback: str | None = None  # filled in after evaluation
    timestamp: float = 0.0       # trip time, monotone per profile
    embedding: tuple[float, ...] = ()

    def with_embedding(self) -> "MemoryRecord":
        if self.embedding:
            return self
        return replace(self, embedding=embed(self.instruction))


@dataclass
class UserProfile:
    user_id: str
    records: list[MemoryRecord] = field(default_factory=list)
    top_k: int = DEFAULT_TOP_K

    def next_id(self) -> int:
        return len(self.records)

    def next_timestamp(self) -> float:
        return self.records[-1].timestamp + 1.0 if self.records else 0.0


class LookupError_(KeyError):
    pass


def record(profile: UserProfile, rec: MemoryRecord) -> MemoryRecord:
    """Append one trip record; timestamps must stay monotone."""
    rec = rec.with_embedding()
    if profile.records and rec.timestamp <= profile.records[-1].timestamp:
        rec = replace(rec, timestamp=profile.next_timestamp())
    profile.records.append(rec)
    return rec


def update_feedback(profile: UserProfile, record_id: int, feedback: str) -> MemoryRecord:
    """Attach feedback to an existing (instruction, policy) pair."""
    for i, rec in enumerate(profile.records):
        if rec.record_id == record_id:
            updated = replace(rec, feedback=feedback)
            profile.records[i] = updated
            return updated
    raise LookupError_(f"no record {record_id} in profile {profile.user_id!r}")


def retrieve(profile: UserProfile, instruction: str, k: int | None = None) -> list[MemoryRecord]:
    """Top-k records by instruction cosine similarity, newest first on ties.

    ``k=None`` uses the profile default; ``k = math.inf`` renders the whole
    history (most similar first), mirroring a whole-history prompt.
    """
    if k is None:
        k = profile.top_k
    if not isinstance(k, float) or not math.isinf(k):
        k = int(k)
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
    query = embed(instruction)
    ranked = sorted(
        profile.records,
        key=lambda r: (-cosine(query, r.embedding), -r.timestamp),
    )
    if isinstance(k, float) and math.isinf(k):
        return ranked
    return ranked[:k]


# --- persistence -------------------------------------------------------------


def _record_to_dict(rec: MemoryRecord) -> dict:
    return {
        "schema": MEMORY_SCHEMA,
        "record_id": rec.record_id,
        "user_id": rec.user_id,
        "instruction": rec.instruction,
        "scene": rec.scene,
        "policy": rec.policy,
        "feedback": rec.feedback,
        "timestamp": rec.timestamp,
    }


def _record_from_dict(data: dict) -> MemoryRecord:
    if data.get("schema") != MEMORY_SCHEMA:
        raise ValueError(f"unsupported memory schema {data.get('schema')!r}")
    return MemoryRecord(
        record_id=int(data["record_id"]),
        user_id=data["user_id"],
        instruction=data["instruction"],
        scene=data.get("scene", ""),
        policy=data["policy"],
        feedback=data.get("feedback"),
        timestamp=float(data["timestamp"]),
    ).with_embedding()


class MemoryStore:
    """One append-only log file per user under a root directory."""

    def __init__(self, root: str | None = None):
        self.root = root
        self._profiles: dict[str, UserProfile] = {}
        if root is not None:
            os.makedirs(root, exist_ok=True)
            for name in sorted(os.listdir(root)):
                if name.endswith(".jsonl"):
                    user_id = name[: -len(".jsonl")]
                    self._profiles[user_id] = self._load(user_id)

    def _path(self, user_id: str) -> str:
        assert self.root is not None
        return os.path.join(self.root, f"{user_id}.jsonl")

    def _load(self, user_id: str) -> UserProfile:
        profile = UserProfile(user_id=user_id)
        with open(self._path(user_id), "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                data = json.loads(line)
                rec = _record_from_dict(data)
                if data.get("kind") == "feedback":
                    update_feedback(profile, rec.record_id, rec.feedback or "")
                else:
                    profile.records.append(rec)
        return profile

    def profile(self, user_id: str) -> UserProfile:
        if user_id not in self._profiles:
            self._profiles[user_id] = UserProfile(user_id=user_id)
        return self._profiles[user_id]

    def add_record(
        self,
        user_id: str,
        instruction: str,
        policy: str,
        scene: str = "",
        feedback: str | None = None,
    ) -> MemoryRecord:
        profile = self.profile(user_id)
        rec = MemoryRecord(
            record_id=profile.next_id(),
            user_id=user_id,
            instruction=instruction,
            policy=policy,
            scene=scene,
            feedback=feedback,
            timestamp=profile.next_timestamp(),
        )
        rec = record(profile, rec)
        self._append_line(user_id, _record_to_dict(rec))
        return rec

    def set_feedback(self, user_id: str, record_id: int, feedback: str) -> MemoryRecord:
        profile = self.profile(user_id)
        rec = update_feedback(profile, record_id, feedback)
        entry = _record_to_dict(rec)
        entry["kind"] = "feedback"
        self._append_line(user_id, entry)
        return rec

    def _append_line(self, user_id: str, entry: dict) -> None:
        if self.root is None:
            return
        with open(self._path(user_id), "a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")

    def users(self) -> list[str]:
        return sorted(self._profiles)

    def export_lines(self, user_id: str) -> list[str]:
        profile = self.profile(user_id)
        return [json.dumps(_record_to_dict(r), sort_keys=True) for r in profile.records]

    def import_lines(self, user_id: str, lines: list[str]) -> int:
        count = 0
        for line in lines:
            line = line.strip()
            if not line:
                continue
            data = json.loads(line)
            self.add_record(
                user_id,
                instruction=data["instruction"],
                policy=data["policy"],
                scene=data.get("scene", ""),
                feedback=data.get("feedback"),
            )
            count += 1
        return count
