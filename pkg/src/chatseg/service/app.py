"""HTTP API for interactive multi-turn chat-and-segment sessions.

POST /sessions (multipart image) -> {session_id}
POST /sessions/{id}/turns {text} -> turn result with optional inline mask
GET  /sessions/{id}             -> full history with per-turn results
GET  /sessions/{id}/masks/{turn} -> image/png
GET  /healthz
Static files under /ui when a build directory is configured.
"""

from __future__ import annotations

import base64
import logging
import time
from pathlib import Path

from fastapi import FastAPI, File, HTTPException, Response, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from ..datagen.types import Turn
from ..imaging import ImageBuffer, mask_to_png, resize_mask_nearest
from ..model.full import SegChatModel
from ..model.vision import image_to_tensor
from .store import SessionStore

logger = logging.getLogger("chatseg.service")

DEFAULT_MAX_PIXELS = 1024 * 1024


class TurnRequest(BaseModel):
    text: str


def create_app(
    model: SegChatModel,
    store: SessionStore | None = None,
    max_pixels: int = DEFAULT_MAX_PIXELS,
    ui_dir: str | None = None,
    cors_origins: list[str] | None = None,
    checkpoint_name: str = "unnamed",
) -> FastAPI:
    app = FastAPI(title="chatseg session service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=cors_origins or ["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    store = store or SessionStore()
    tensor_cache: dict[str, object] = {}
    high_res = model.config.encoder.high_res

    def session_or_404(session_id: str):
        record = store.get(session_id)
        if record is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        return record

    def image_tensor_for(session_id: str):
        if session_id not in tensor_cache:
            blob = store.image_png(session_id)
            if blob is None:
                raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
            image = ImageBuffer.from_png(blob)
            tensor_cache[session_id] = (image_to_tensor(image, size=high_res), (image.height, image.width))
        return tensor_cache[session_id]

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "checkpoint": checkpoint_name, "sessions": store.count()}

    @app.post("/sessions", status_code=201)
    async def create_session(image: UploadFile = File(...)):
        blob = await image.read()
        try:
            decoded = ImageBuffer.from_png(blob)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=f"cannot use image: {exc}") from exc
        if decoded.width * decoded.height > max_pixels:
            raise HTTPException(status_code=413, detail=f"image exceeds {max_pixels} pixels")
        try:
            session_id = store.create(blob)
        except RuntimeError as exc:
            raise HTTPException(status_code=429, detail=str(exc)) from exc
        # warm both encoder resolutions once
        tensor_cache[session_id] = (image_to_tensor(decoded, size=high_res), (decoded.height, decoded.width))
        return {"session_id": session_id}

    @app.post("/sessions/{session_id}/turns")
    def post_turn(session_id: str, body: TurnRequest):
        record = session_or_404(session_id)
        if not body.text.strip():
            raise HTTPException(status_code=400, detail="turn text must be non-empty")
        lock = store.turn_lock(session_id)
        if not lock.acquire(blocking=False):
            raise HTTPException(status_code=409, detail="another turn is in flight for this session")
        try:
            tensor, original_hw = image_tensor_for(session_id)
            history = [Turn(**t) for t in record.turns] + [Turn("user", body.text)]
            started = time.monotonic()
            try:
                result = model.generate_reply(tensor, history)
            except Exception as exc:  # session stays unmodified on generation failure
                logger.exception("generation failed for session %s", session_id)
                raise HTTPException(status_code=500, detail=f"generation failed: {exc}") from exc
            latency_ms = int((time.monotonic() - started) * 1000)

            turn_index = len(record.turns) + 1  # index of the assistant turn
            mask_png = None
            if result.mask is not None:
                sized = resize_mask_nearest(result.mask, original_hw[0], original_hw[1])
                mask_png = mask_to_png(sized)
            payload = {
                "turn_index": turn_index,
                "assistant_text": result.text,
                "seg_triggered": result.mask is not None,
                "outcome": result.extraction.outcome,
                "target_class": result.target_class,
                "latency_ms": latency_ms,
                "mask_url": f"/sessions/{session_id}/masks/{turn_index}" if mask_png else None,
            }
            store.commit_turn(
                session_id,
                {"role": "user", "text": body.text},
                {"role": "assistant", "text": result.text},
                payload,
                mask_png,
            )
            response = dict(payload)
            if mask_png is not None:
                response["mask_base64"] = base64.b64encode(mask_png).decode("ascii")
            return response
        finally:
            lock.release()

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        record = session_or_404(session_id)
        return {
            "session_id": record.session_id,
            "created_at": record.created_at,
            "turns": record.turns,
            "results": record.results,
        }

    @app.get("/sessions/{session_id}/masks/{turn_index}")
    def get_mask(session_id: str, turn_index: int):
        session_or_404(session_id)
        blob = store.mask_png(session_id, turn_index)
        if blob is None:
            raise HTTPException(status_code=404, detail=f"no mask for turn {turn_index}")
        return Response(content=blob, media_type="image/png")

    if ui_dir and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
