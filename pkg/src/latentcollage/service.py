"""HTTP composition service: a model registry plus JSON/base64-PNG
endpoints for compose, encode, generate, and per-session finetuning.

Base models are immutable once registered; finetuning clones an encoder
into a session-scoped registry entry with a TTL. Config precedence is
environment > config file > defaults.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import images as im
from .analysis import finetune_encoder
from .composition import collage_spec_from_json, compose_detailed
from .errors import LatentCollageError, UnknownModelError
from .generators import generate, load_generator
from .images import ImageBatch
from .latent import LatentCode, sample_latent
from .masking import Mask, ones_mask
from .regressor import encode, load_encoder

_ENV_PREFIX = "LATENTCOLLAGE_"


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8321
    models: list = field(default_factory=list)  # [{model_id, generator, encoder}]
    session_ttl_s: float = 900.0
    finetune_queue_depth: int = 2


def load_service_config(path=None, env=None) -> ServiceConfig:
    """Merge defaults <- config file <- environment overrides."""
    env = os.environ if env is None else env
    data: dict = {}
    if path is not None:
        path = Path(path)
        if path.suffix == ".toml":
            try:
                import tomllib
            except ImportError as e:
                raise RuntimeError("TOML configs need Python >= 3.11; use JSON here") from e
            data = tomllib.loads(path.read_text())
        else:
            data = json.loads(path.read_text())
    cfg = ServiceConfig(
        host=data.get("host", ServiceConfig.host),
        port=int(data.get("port", ServiceConfig.port)),
        models=list(data.get("models", [])),
        session_ttl_s=float(data.get("session_ttl_s", ServiceConfig.session_ttl_s)),
        finetune_queue_depth=int(
            data.get("finetune_queue_depth", ServiceConfig.finetune_queue_depth)
        ),
    )
    if _ENV_PREFIX + "HOST" in env:
        cfg.host = env[_ENV_PREFIX + "HOST"]
    if _ENV_PREFIX + "PORT" in env:
        cfg.port = int(env[_ENV_PREFIX + "PORT"])
    if _ENV_PREFIX + "SESSION_TTL_S" in env:
        cfg.session_ttl_s = float(env[_ENV_PREFIX + "SESSION_TTL_S"])
    if _ENV_PREFIX + "QUEUE_DEPTH" in env:
        cfg.finetune_queue_depth = int(env[_ENV_PREFIX + "QUEUE_DEPTH"])
    return cfg


@dataclass
class RegistryEntry:
    model_id: str
    generator_path: str
    encoder_path: str
    generator: object
    encoder: object
    session: bool = False
    expires_at: float | None = None


class ModelRegistry:
    def __init__(self, session_ttl_s: float = 900.0):
        self.session_ttl_s = session_ttl_s
        self._entries: dict[str, RegistryEntry] = {}
        self._lock = threading.Lock()
        self._session_counter = 0

    def register(self, model_id: str, generator_path, encoder_path) -> None:
        """Validate and load both checkpoints; the registry is untouched on failure."""
        G = load_generator(generator_path)
        E = load_encoder(encoder_path)
        if E.config.latent_spec != G.latent_spec:
            raise LatentCollageError(
                f"encoder latent spec {E.config.latent_spec} != generator {G.latent_spec}"
            )
        if E.config.image_size != G.output_shape[1]:
            raise LatentCollageError(
                f"encoder image size {E.config.image_size} != generator {G.output_shape[1]}"
            )
        entry = RegistryEntry(model_id, str(generator_path), str(encoder_path), G, E)
        with self._lock:
            if model_id in self._entries:
                raise LatentCollageError(f"model id {model_id!r} already registered")
            self._entries[model_id] = entry

    def _prune(self) -> None:
        now = time.monotonic()
        dead = [
            k
            for k, e in self._entries.items()
            if e.session and e.expires_at is not None and e.expires_at < now
        ]
        for k in dead:
            del self._entries[k]

    def get(self, model_id: str) -> RegistryEntry:
        with self._lock:
            self._prune()
            entry = self._entries.get(model_id)
            if entry is None:
                raise UnknownModelError(model_id)
            return entry

    def add_session(self, base: RegistryEntry, encoder) -> str:
        with self._lock:
            self._prune()
            self._session_counter += 1
            session_id = f"{base.model_id}#session{self._session_counter}"
            self._entries[session_id] = RegistryEntry(
                model_id=session_id,
                generator_path=base.generator_path,
                encoder_path=base.encoder_path,
                generator=base.generator,
                encoder=encoder,
                session=True,
                expires_at=time.monotonic() + self.session_ttl_s,
            )
            return session_id

    def list_entries(self) -> list:
        with self._lock:
            self._prune()
            return [
                {
                    "model_id": e.model_id,
                    "latent_spec": e.generator.latent_spec.to_json(),
                    "output_shape": list(e.generator.output_shape),
                    "loaded": True,
                    "session": e.session,
                }
                for e in self._entries.values()
            ]


class ComposeBody(BaseModel):
    model_id: str
    collage_spec: dict
    refine_steps: int = 0


class EncodeBody(BaseModel):
    model_id: str
    image: str
    mask: str | None = None


class GenerateBody(BaseModel):
    model_id: str
    latent: list | None = None
    seed: int | None = None
    count: int = 1


class FinetuneBody(BaseModel):
    model_id: str
    image: str
    steps: int = 30


def _unknown_model() -> JSONResponse:
    return JSONResponse(status_code=404, content={"error": "UNKNOWN_MODEL"})


def _invalid(message: str) -> JSONResponse:
    return JSONResponse(status_code=422, content={"error": "INVALID_REQUEST", "message": message})


def create_app(config: ServiceConfig, registry: ModelRegistry | None = None) -> FastAPI:
    app = FastAPI(title="latentcollage", version="0.1.0")
    if registry is None:
        registry = ModelRegistry(session_ttl_s=config.session_ttl_s)
        for m in config.models:
            registry.register(m["model_id"], m["generator"], m["encoder"])
    app.state.registry = registry
    infer_lock = threading.Lock()
    finetune_slots = threading.Semaphore(config.finetune_queue_depth)

    @app.exception_handler(LatentCollageError)
    def _domain_error(request, exc: LatentCollageError):
        if isinstance(exc, UnknownModelError):
            return _unknown_model()
        return JSONResponse(status_code=500, content={"error": exc.code, "message": str(exc)})

    @app.get("/v1/models")
    def list_models():
        return registry.list_entries()

    @app.post("/v1/compose")
    def compose_endpoint(body: ComposeBody):
        try:
            entry = registry.get(body.model_id)
        except UnknownModelError:
            return _unknown_model()
        if body.refine_steps < 0:
            return _invalid("refine_steps must be >= 0")
        t0 = time.perf_counter()
        try:
            spec = collage_spec_from_json(body.collage_spec)
        except (KeyError, ValueError, TypeError) as e:
            return _invalid(f"malformed collage spec: {e}")
        G = entry.generator
        if tuple(spec.canvas_shape) != tuple(G.output_shape):
            return _invalid(
                f"canvas {spec.canvas_shape} does not match model output {G.output_shape}"
            )
        with infer_lock:
            result = compose_detailed(entry.encoder, G, spec, refine_steps=body.refine_steps)
        timing_ms = (time.perf_counter() - t0) * 1000.0
        return {
            "composite": im.b64_png(result["composite"].single()),
            "latent": result["latent"].values[0].tolist(),
            "union_mask": im.b64_mask_png(result["union_mask"].values[0, 0]),
            "timing_ms": timing_ms,
        }

    @app.post("/v1/encode")
    def encode_endpoint(body: EncodeBody):
        try:
            entry = registry.get(body.model_id)
        except UnknownModelError:
            return _unknown_model()
        try:
            chw = im.from_b64_png(body.image)
        except Exception as e:
            return _invalid(f"bad image payload: {e}")
        G, E = entry.generator, entry.encoder
        if chw.shape != tuple(G.output_shape):
            return _invalid(f"image shape {chw.shape} does not match model {G.output_shape}")
        h, w = chw.shape[1:]
        if body.mask is not None:
            try:
                m = Mask(im.from_b64_mask_png(body.mask)[None, None])
            except Exception as e:
                return _invalid(f"bad mask payload: {e}")
            if m.spatial != (h, w):
                return _invalid("mask size does not match the image")
        else:
            m = ones_mask(h, w, 1)
        x = ImageBatch((chw * m.values[0])[None])
        with infer_lock:
            z = encode(E, x, m) if E.config.input_channels == 4 else encode(E, x)
            recon = generate(G, z)
        return {
            "latent": z.values[0].tolist(),
            "reconstruction": im.b64_png(recon.single()),
        }

    @app.post("/v1/generate")
    def generate_endpoint(body: GenerateBody):
        try:
            entry = registry.get(body.model_id)
        except UnknownModelError:
            return _unknown_model()
        if (body.latent is None) == (body.seed is None):
            return _invalid("provide exactly one of latent or seed")
        G = entry.generator
        spec = G.latent_spec
        if body.latent is not None:
            values = np.asarray(body.latent, dtype=np.float32)
            if values.ndim == 2:
                values = values[None]
            try:
                z = LatentCode(spec, values)
            except LatentCollageError as e:
                return _invalid(str(e))
        else:
            if body.count < 1:
                return _invalid("count must be >= 1")
            z = sample_latent(spec, body.count, body.seed)
        with infer_lock:
            batch = generate(G, z)
        return {
            "images": [im.b64_png(batch.values[i]) for i in range(batch.batch)],
            "latents": z.values.tolist(),
        }

    @app.post("/v1/finetune")
    def finetune_endpoint(body: FinetuneBody):
        try:
            entry = registry.get(body.model_id)
        except UnknownModelError:
            return _unknown_model()
        if body.steps < 0:
            return _invalid("steps must be >= 0")
        try:
            chw = im.from_b64_png(body.image)
        except Exception as e:
            return _invalid(f"bad image payload: {e}")
        if chw.shape != tuple(entry.generator.output_shape):
            return _invalid("image shape does not match the model")
        if not finetune_slots.acquire(blocking=False):
            return JSONResponse(status_code=503, content={"error": "FINETUNE_QUEUE_FULL"})
        try:
            tuned = finetune_encoder(
                entry.encoder, entry.generator, ImageBatch(chw[None]), steps=body.steps
            )
        finally:
            finetune_slots.release()
        session_id = registry.add_session(entry, tuned)
        return {"session_model_id": session_id}

    return app
