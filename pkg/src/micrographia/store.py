"""Durable portal persistence: users, sessions, exam records.

A single SQLite file holds the relational state; uploaded images live on
disk next to it, keyed by content hash so duplicate uploads share bytes.
All access goes through one connection guarded by a lock, and an exam and
its per-image rows are committed in one transaction, so readers never see
a partially written exam.
"""

from __future__ import annotations

import hashlib
import os
import secrets
import sqlite3
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

_SCHEMA = """
CREATE TABLE IF NOT EXISTS users (
    user_id    TEXT PRIMARY KEY,
    login      TEXT NOT NULL UNIQUE,
    credential TEXT NOT NULL,
    created_at REAL NOT NULL
);
CREATE TABLE IF NOT EXISTS sessions (
    token_hash TEXT PRIMARY KEY,
    user_id    TEXT NOT NULL REFERENCES users(user_id),
    expires_at REAL NOT NULL
);
CREATE TABLE IF NOT EXISTS exams (
    exam_id             TEXT PRIMARY KEY,
    user_id             TEXT NOT NULL REFERENCES users(user_id),
    submitted_at        REAL NOT NULL,
    age                 REAL NOT NULL,
    gender              TEXT NOT NULL,
    verdict             TEXT NOT NULL,
    verdict_probability REAL NOT NULL,
    model_version       TEXT NOT NULL,
    low_confidence      INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS exam_images (
    exam_id      TEXT NOT NULL REFERENCES exams(exam_id),
    position     INTEGER NOT NULL,
    kind         TEXT NOT NULL,
    content_hash TEXT NOT NULL,
    content_type TEXT NOT NULL,
    probability  REAL,
    label        TEXT,
    error        TEXT,
    PRIMARY KEY (exam_id, position)
);
"""


class DuplicateLoginError(ValueError):
    pass


@dataclass(frozen=True)
class ExamImage:
    position: int
    kind: str
    content_hash: str
    content_type: str
    probability: Optional[float]
    label: Optional[str]
    error: Optional[str]


@dataclass(frozen=True)
class StoredExam:
    exam_id: str
    user_id: str
    submitted_at: float
    age: float
    gender: str
    verdict: str
    verdict_probability: float
    model_version: str
    low_confidence: bool
    images: tuple[ExamImage, ...] = field(default_factory=tuple)


def _hash_password(password: str, salt: bytes) -> str:
    digest = hashlib.scrypt(password.encode("utf-8"), salt=salt, n=2**14, r=8, p=1)
    return f"scrypt${salt.hex()}${digest.hex()}"


def _verify_password(password: str, credential: str) -> bool:
    try:
        scheme, salt_hex, _ = credential.split("$")
        if scheme != "scrypt":
            return False
        expected = _hash_password(password, bytes.fromhex(salt_hex))
        return secrets.compare_digest(expected, credential)
    except ValueError:
        return False


def _hash_token(token: str) -> str:
    return hashlib.sha256(token.encode("utf-8")).hexdigest()


class PortalStore:
    """Embedded store under one directory: ``portal.sqlite3`` plus a
    ``blobs/`` tree of content-addressed uploads."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.blob_dir = self.root / "blobs"
        self.blob_dir.mkdir(exist_ok=True)
        self._lock = threading.Lock()
        self._db = sqlite3.connect(self.root / "portal.sqlite3", check_same_thread=False)
        self._db.executescript(_SCHEMA)
        self._db.commit()

    def close(self) -> None:
        with self._lock:
            self._db.close()

    # -- users / sessions ---------------------------------------------------

    def create_user(self, login: str, password: str) -> str:
        user_id = uuid.uuid4().hex
        credential = _hash_password(password, os.urandom(16))
        with self._lock:
            try:
                self._db.execute(
                    "INSERT INTO users VALUES (?, ?, ?, ?)",
                    (user_id, login, credential, time.time()),
                )
                self._db.commit()
            except sqlite3.IntegrityError:
                raise DuplicateLoginError(f"login {login!r} already exists") from None
        return user_id

    def authenticate(self, login: str, password: str) -> Optional[str]:
        with self._lock:
            row = self._db.execute(
                "SELECT user_id, credential FROM users WHERE login = ?", (login,)
            ).fetchone()
        if row is None or not _verify_password(password, row[1]):
            return None
        return row[0]

    def create_session(self, user_id: str, ttl_seconds: float) -> str:
        token = secrets.token_urlsafe(32)
        with self._lock:
            self._db.execute(
                "INSERT INTO sessions VALUES (?, ?, ?)",
                (_hash_token(token), user_id, time.time() + ttl_seconds),
            )
            self._db.commit()
        return token

    def user_for_token(self, token: str) -> Optional[str]:
        with self._lock:
            row = self._db.execute(
                "SELECT user_id, expires_at FROM sessions WHERE token_hash = ?",
                (_hash_token(token),),
            ).fetchone()
        if row is None or row[1] < time.time():
            return None
        return row[0]

    # -- blobs ---------------------------------------------------------------

    def save_blob(self, data: bytes) -> str:
        digest = hashlib.sha256(data).hexdigest()
        path = self.blob_dir / digest
        if not path.exists():
            tmp = path.with_suffix(".tmp")
            tmp.write_bytes(data)
            tmp.replace(path)
        return digest

    def load_blob(self, content_hash: str) -> bytes:
        return (self.blob_dir / content_hash).read_bytes()

    # -- exams ---------------------------------------------------------------

    def save_exam(self, exam: StoredExam) -> None:
        with self._lock:
            self._db.execute(
                "INSERT INTO exams VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?)",
                (
                    exam.exam_id,
                    exam.user_id,
                    exam.submitted_at,
                    exam.age,
                    exam.gender,
                    exam.verdict,
                    exam.verdict_probability,
                    exam.model_version,
                    int(exam.low_confidence),
                ),
            )
            self._db.executemany(
                "INSERT INTO exam_images VALUES (?, ?, ?, ?, ?, ?, ?, ?)",
                [
                    (
                        exam.exam_id,
                        im.position,
                        im.kind,
                        im.content_hash,
                        im.content_type,
                        im.probability,
                        im.label,
                        im.error,
                    )
                    for im in exam.images
                ],
            )
            self._db.commit()

    def list_exams(self, user_id: str) -> list[StoredExam]:
        with self._lock:
            rows = self._db.execute(
                "SELECT exam_id, user_id, submitted_at, age, gender, verdict, "
                "verdict_probability, model_version, low_confidence "
                "FROM exams WHERE user_id = ? ORDER BY submitted_at DESC, exam_id DESC",
                (user_id,),
            ).fetchall()
        return [self._exam_from_row(row, with_images=False) for row in rows]

    def get_exam(self, exam_id: str) -> Optional[StoredExam]:
        with self._lock:
            row = self._db.execute(
                "SELECT exam_id, user_id, submitted_at, age, gender, verdict, "
                "verdict_probability, model_version, low_confidence "
                "FROM exams WHERE exam_id = ?",
                (exam_id,),
            ).fetchone()
            if row is None:
                return None
            image_rows = self._db.execute(
                "SELECT position, kind, content_hash, content_type, probability, "
                "label, error FROM exam_images WHERE exam_id = ? ORDER BY position",
                (exam_id,),
            ).fetchall()
        images = tuple(ExamImage(*r) for r in image_rows)
        return self._exam_from_row(row, with_images=True, images=images)

    @staticmethod
    def _exam_from_row(row, with_images: bool, images=()) -> StoredExam:
        return StoredExam(
            exam_id=row[0],
            user_id=row[1],
            submitted_at=row[2],
            age=row[3],
            gender=row[4],
            verdict=row[5],
            verdict_probability=row[6],
            model_version=row[7],
            low_confidence=bool(row[8]),
            images=tuple(images) if with_images else (),
        )
