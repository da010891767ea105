"""HTTP/JSON boundary: FastAPI adapter over the application core.

Endpoints (all under /api/v1): register, login, logout, share-attempt,
resolve, health. Bodies are strict JSON documents: unknown fields are
rejected, timestamps are ISO-8601 with explicit UTC offsets, and every
error is shaped {error_code, message}.
"""

from __future__ import annotations

import typing

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict

from .errors import (
    AuthenticationFailure,
    AuthorizationFailure,
    ConfigurationFailure,
    ConflictFailure,
    DegenerateInputError,
    ExpiredTokenFailure,
    NotFoundFailure,
    NudgeLabError,
    ValidationFailure,
)
from .service import NudgeService

_STATUS_BY_ERROR: dict[type[NudgeLabError], int] = {
    ValidationFailure: 400,
    AuthenticationFailure: 401,
    AuthorizationFailure: 403,
    NotFoundFailure: 404,
    ConflictFailure: 409,
    ExpiredTokenFailure: 410,
    DegenerateInputError: 400,
    ConfigurationFailure: 503,
}


class Utf8JSONResponse(JSONResponse):
    media_type = "application/json; charset=utf-8"


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class RegisterRequest(StrictModel):
    username: str
    password: str
    app_variant: str
    language: str


class LoginRequest(StrictModel):
    username: str
    password: str


class LogoutRequest(StrictModel):
    session_token: str


class ShareAttemptRequest(StrictModel):
    session_token: str
    client_event_id: str
    post_length: int
    post_hash: str
    image_hash: str
    client_timestamp: str


class ResolveRequest(StrictModel):
    session_token: str
    client_event_id: str
    intervention_token: str
    action: str
    post_length: int
    post_hash: str
    image_hash: str


def create_app(service: NudgeService) -> FastAPI:
    app = FastAPI(
        title="nudgelab intervention service",
        version="1.0",
        default_response_class=Utf8JSONResponse,
    )
    app.state.service = service

    @app.exception_handler(NudgeLabError)
    async def handle_domain_error(request: Request, exc: NudgeLabError) -> Utf8JSONResponse:
        status = _STATUS_BY_ERROR.get(type(exc), 500)
        return Utf8JSONResponse(
            status_code=status,
            content={"error_code": exc.error_code, "message": str(exc)},
        )

    @app.exception_handler(RequestValidationError)
    async def handle_body_error(request: Request, exc: RequestValidationError) -> Utf8JSONResponse:
        return Utf8JSONResponse(
            status_code=400,
            content={"error_code": "validation_error", "message": str(exc.errors())},
        )

    @app.post("/api/v1/register")
    def register(body: RegisterRequest) -> typing.Any:
        return service.register(body.username, body.password, body.app_variant, body.language)

    @app.post("/api/v1/login")
    def login(body: LoginRequest) -> typing.Any:
        return service.login(body.username, body.password)

    @app.post("/api/v1/logout")
    def logout(body: LogoutRequest) -> typing.Any:
        return service.logout(body.session_token)

    @app.post("/api/v1/share-attempt")
    def share_attempt(body: ShareAttemptRequest) -> typing.Any:
        return service.share_attempt(
            session_token=body.session_token,
            client_event_id=body.client_event_id,
            post_length=body.post_length,
            post_hash=body.post_hash,
            image_hash=body.image_hash,
            client_timestamp=body.client_timestamp,
        )

    @app.post("/api/v1/resolve")
    def resolve(body: ResolveRequest) -> typing.Any:
        return service.resolve_intervention(
            session_token=body.session_token,
            client_event_id=body.client_event_id,
            intervention_token=body.intervention_token,
            action=body.action,
            post_length=body.post_length,
            post_hash=body.post_hash,
            image_hash=body.image_hash,
        )

    @app.get("/api/v1/health")
    def health() -> typing.Any:
        return service.health()

    return app
