"""HTTP assessment service.

Workflows mirror the portal's two use cases: an authenticated user
downloads the printable template, submits a filled exam (1-8 photographed
drawings plus age and gender) for synchronous scoring, and browses their
exam history.  The loaded model artifact is read-only shared state; all
durable state lives in :class:`micrographia.store.PortalStore`.

Configuration comes from a TOML file with environment overrides
(``MICROGRAPHIA_ARTIFACT``, ``MICROGRAPHIA_STORE``, ``MICROGRAPHIA_HOST``,
``MICROGRAPHIA_PORT``, ``MICROGRAPHIA_UPLOAD_CAP``,
``MICROGRAPHIA_STATIC_DIR``); the service refuses to start without a
valid artifact.
"""

from __future__ import annotations

import json
import logging
import time
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, File, Form, Request, Response, UploadFile
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .imaging import encode_png, decode_image, generate_assessment_template
from .models import load_artifact
from .scoring import score_exam
from .store import DuplicateLoginError, ExamImage, PortalStore, StoredExam

logger = logging.getLogger("micrographia.service")

DEFAULT_UPLOAD_CAP = 8 * 1024 * 1024
DEFAULT_SESSION_TTL = 24 * 3600.0
MAX_EXAM_IMAGES = 8


@dataclass(frozen=True)
class ServiceConfig:
    artifact_path: Path
    store_path: Path
    host: str = "127.0.0.1"
    port: int = 8000
    upload_cap_bytes: int = DEFAULT_UPLOAD_CAP
    session_ttl_seconds: float = DEFAULT_SESSION_TTL
    static_dir: Optional[Path] = None


def load_config(path: str | Path | None = None, env: dict | None = None) -> ServiceConfig:
    """TOML file settings, each overridable from the environment."""
    import os

    import tomli

    env = dict(os.environ if env is None else env)
    doc: dict = {}
    if path is not None:
        with open(path, "rb") as fh:
            doc = tomli.load(fh)

    def pick(env_key: str, toml_key: str, default=None):
        if env_key in env:
            return env[env_key]
        return doc.get(toml_key, default)

    artifact = pick("MICROGRAPHIA_ARTIFACT", "artifact_path")
    store = pick("MICROGRAPHIA_STORE", "store_path")
    if artifact is None or store is None:
        raise ValueError("configuration requires artifact_path and store_path")
    static_dir = pick("MICROGRAPHIA_STATIC_DIR", "static_dir")
    return ServiceConfig(
        artifact_path=Path(artifact),
        store_path=Path(store),
        host=str(pick("MICROGRAPHIA_HOST", "host", "127.0.0.1")),
        port=int(pick("MICROGRAPHIA_PORT", "port", 8000)),
        upload_cap_bytes=int(
            pick("MICROGRAPHIA_UPLOAD_CAP", "upload_cap_bytes", DEFAULT_UPLOAD_CAP)
        ),
        session_ttl_seconds=float(
            pick("MICROGRAPHIA_SESSION_TTL", "session_ttl_seconds", DEFAULT_SESSION_TTL)
        ),
        static_dir=Path(static_dir) if static_dir else None,
    )


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message})


def _sniff_content_type(data: bytes) -> str:
    if data[:8] == b"\x89PNG\r\n\x1a\n":
        return "image/png"
    if data[:2] == b"\xff\xd8":
        return "image/jpeg"
    return "application/octet-stream"


def _exam_summary(exam: StoredExam) -> dict:
    return {
        "exam_id": exam.exam_id,
        "submitted_at": exam.submitted_at,
        "age": exam.age,
        "gender": exam.gender,
        "verdict": exam.verdict,
        "verdict_probability": exam.verdict_probability,
        "model_version": exam.model_version,
        "low_confidence": exam.low_confidence,
    }


def _exam_detail(exam: StoredExam) -> dict:
    doc = _exam_summary(exam)
    doc["per_image"] = [
        {
            "position": im.position,
            "kind": im.kind,
            "probability": im.probability,
            "label": im.label,
            "error": im.error,
            "image_url": f"/api/exams/{exam.exam_id}/images/{im.position}",
        }
        for im in exam.images
    ]
    return doc


def create_app(config: ServiceConfig) -> FastAPI:
    artifact = load_artifact(config.artifact_path)  # refuse to start if invalid
    store = PortalStore(config.store_path)
    template_png = encode_png(generate_assessment_template())

    app = FastAPI(title="micrographia assessment service")
    app.state.store = store
    app.state.artifact = artifact
    app.state.config = config

    @app.middleware("http")
    async def request_log(request: Request, call_next):
        started = time.monotonic()
        response = await call_next(request)
        logger.info(
            json.dumps(
                {
                    "method": request.method,
                    "path": request.url.path,
                    "status": response.status_code,
                    "duration_ms": round(1000 * (time.monotonic() - started), 2),
                }
            )
        )
        return response

    def authed_user(request: Request) -> Optional[str]:
        header = request.headers.get("authorization", "")
        if not header.lower().startswith("bearer "):
            return None
        return store.user_for_token(header[7:].strip())

    # -- accounts -----------------------------------------------------------

    @app.post("/api/users", status_code=201)
    async def register(payload: dict):
        login = str(payload.get("login", "")).strip()
        password = str(payload.get("password", ""))
        if len(login) < 3 or len(password) < 8:
            return _error(400, "login needs >= 3 chars and password >= 8")
        try:
            user_id = store.create_user(login, password)
        except DuplicateLoginError:
            return _error(409, f"login {login!r} is taken")
        return {"user_id": user_id, "login": login}

    @app.post("/api/sessions")
    async def login(payload: dict):
        user_id = store.authenticate(
            str(payload.get("login", "")), str(payload.get("password", ""))
        )
        if user_id is None:
            return _error(401, "invalid credentials")
        token = store.create_session(user_id, config.session_ttl_seconds)
        return {"token": token, "expires_in": config.session_ttl_seconds}

    # -- template -----------------------------------------------------------

    @app.api_route("/api/template", methods=["GET", "HEAD"])
    async def template():
        return Response(
            content=template_png,
            media_type="image/png",
            headers={"content-disposition": 'inline; filename="assessment.png"'},
        )

    # -- exams ---------------------------------------------------------------

    @app.post("/api/exams")
    async def submit_exam(
        request: Request,
        images: list[UploadFile] = File(default=[]),
        age: str = Form(default=""),
        gender: str = Form(default=""),
        kinds: str = Form(default=""),
    ):
        user_id = authed_user(request)
        if user_id is None:
            return _error(401, "authentication required")
        if not images:
            return _error(400, "at least one image is required")
        if len(images) > MAX_EXAM_IMAGES:
            return _error(400, f"at most {MAX_EXAM_IMAGES} images per exam")
        try:
            age_years = float(age)
        except ValueError:
            return _error(400, f"age must be a number, got {age!r}")
        if not 0 < age_years < 130:
            return _error(400, f"age out of range: {age_years}")
        if gender not in ("male", "female"):
            return _error(400, "gender must be 'male' or 'female'")
        kind_list = [k.strip() for k in kinds.split(",") if k.strip()] or ["spiral"] * len(images)
        if len(kind_list) != len(images):
            return _error(400, "kinds must align with images")
        if any(k not in ("spiral", "meander") for k in kind_list):
            return _error(400, "kinds must be 'spiral' or 'meander'")

        decoded, blobs = [], []
        for upload, kind in zip(images, kind_list):
            data = await upload.read()
            if len(data) > config.upload_cap_bytes:
                return _error(413, f"image {upload.filename!r} exceeds the upload cap")
            try:
                decoded.append((kind, decode_image(data)))
            except Exception:
                return _error(400, f"image {upload.filename!r} does not decode")
            blobs.append(data)

        gender_code = 1 if gender == "female" else 0
        try:
            outcome = score_exam(artifact, decoded, age_years, gender_code, scheme="c")
        except ValueError:
            return _error(422, "every image failed trace extraction")

        exam = StoredExam(
            exam_id=uuid.uuid4().hex,
            user_id=user_id,
            submitted_at=time.time(),
            age=age_years,
            gender=gender,
            verdict="pd" if outcome.verdict == 1 else "healthy",
            verdict_probability=outcome.verdict_probability,
            model_version=artifact.model_version,
            low_confidence=outcome.low_confidence,
            images=tuple(
                ExamImage(
                    position=i,
                    kind=score.kind,
                    content_hash=store.save_blob(blob),
                    content_type=_sniff_content_type(blob),
                    probability=score.probability,
                    label=None
                    if score.label is None
                    else ("pd" if score.label == 1 else "healthy"),
                    error=score.error,
                )
                for i, (score, blob) in enumerate(zip(outcome.per_image, blobs))
            ),
        )
        store.save_exam(exam)
        return _exam_detail(exam)

    @app.get("/api/exams")
    async def exam_history(request: Request):
        user_id = authed_user(request)
        if user_id is None:
            return _error(401, "authentication required")
        return {"exams": [_exam_summary(e) for e in store.list_exams(user_id)]}

    @app.get("/api/exams/{exam_id}")
    async def exam_detail(exam_id: str, request: Request):
        user_id = authed_user(request)
        if user_id is None:
            return _error(401, "authentication required")
        exam = store.get_exam(exam_id)
        if exam is None:
            return _error(404, "no such exam")
        if exam.user_id != user_id:
            return _error(403, "exam belongs to another user")
        return _exam_detail(exam)

    @app.get("/api/exams/{exam_id}/images/{position}")
    async def exam_image(exam_id: str, position: int, request: Request):
        user_id = authed_user(request)
        if user_id is None:
            return _error(401, "authentication required")
        exam = store.get_exam(exam_id)
        if exam is None:
            return _error(404, "no such exam")
        if exam.user_id != user_id:
            return _error(403, "exam belongs to another user")
        for im in exam.images:
            if im.position == position:
                return Response(
                    content=store.load_blob(im.content_hash),
                    media_type=im.content_type,
                )
        return _error(404, "no such image")

    if config.static_dir is not None:
        app.mount("/", StaticFiles(directory=config.static_dir, html=True), name="portal")

    return app


def run(config: ServiceConfig) -> None:
    import uvicorn

    uvicorn.run(create_app(config), host=config.host, port=config.port, log_level="info")
