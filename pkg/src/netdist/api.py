"""HTTP surface over a SignalService: consolidated JSON API plus the matcher
endpoints. Bodies and responses are plain JSON; times are epoch seconds and
dates are ISO-8601 strings.
"""

from __future__ import annotations

import socket

from fastapi import Depends, FastAPI, Header, HTTPException
from pydantic import BaseModel

from .config import Config
from .ingest import IngestRejected, UnknownDeviceError
from .reporting import RedemptionRejected, UnauthorizedAuthority
from .service import SignalService
from .wifi import DuplicateSingleUseId

_REDEMPTION_STATUS = {
    "unknown-token": 404,
    "already-consumed": 409,
    "expired": 410,
    "wrong-community-scope": 403,
}


class DeviceIn(BaseModel):
    community: str | None = None


class DetectionIn(BaseModel):
    reporter: str
    channel: str
    timestamp: float
    peer_temp_id: str | None = None
    rssi: float | None = None
    est_distance_m: float | None = None
    wifi_temp_id: str | None = None


class ReportIn(BaseModel):
    token: str
    device: str
    symptom_start: str | None = None


class TokensIn(BaseModel):
    authority: str
    kind: str
    count: int


class WifiSubmitIn(BaseModel):
    single_use_id: str
    hashed_bssid: str
    timestamp: float


class WifiAnnounceIn(BaseModel):
    single_use_id: str
    device: str
    timestamp: float


class WifiResolveIn(BaseModel):
    hashed_bssid: str
    timestamp: float | None = None


def build_app(service: SignalService) -> FastAPI:
    app = FastAPI(title="netdist signal server", version="0.1.0")
    matcher_secret = service.config.server.matcher_secret

    def bearer_token(authorization: str = Header(default="")) -> str:
        if not authorization.startswith("Bearer "):
            raise HTTPException(status_code=401, detail="missing bearer token")
        return authorization.removeprefix("Bearer ")

    @app.get("/v1/health")
    def health():
        return service.health()

    @app.post("/v1/devices", status_code=201)
    def register_device(body: DeviceIn):
        return {"device": service.register_device(body.community)}

    @app.post("/v1/detections")
    def ingest_detection(body: DetectionIn):
        try:
            accepted = service.ingest_detection(body.model_dump(exclude_none=True))
        except IngestRejected as exc:
            raise HTTPException(status_code=400, detail={"error": exc.reason})
        return {"status": "accepted", "duplicate": not accepted}

    @app.post("/v1/reports")
    def redeem(body: ReportIn):
        try:
            report = service.redeem_token(body.token, body.device, body.symptom_start)
        except UnknownDeviceError:
            raise HTTPException(status_code=404, detail={"error": "unknown-device"})
        except RedemptionRejected as exc:
            status = _REDEMPTION_STATUS.get(exc.reason, 400)
            raise HTTPException(status_code=status, detail={"error": exc.reason})
        return {"case_id": report.case_id, "kind": report.kind,
                "reported_at": report.reported_at}

    @app.post("/v1/admin/tokens")
    def issue_tokens(body: TokensIn, secret: str = Depends(bearer_token)):
        try:
            issued = service.issue_tokens(body.authority, secret, body.kind, body.count)
        except UnauthorizedAuthority:
            raise HTTPException(status_code=401, detail={"error": "unauthorized-authority"})
        except ValueError as exc:
            raise HTTPException(status_code=400, detail={"error": str(exc)})
        return {"authority": body.authority,
                "tokens": [{"token": t.token, "kind": t.kind, "expires_at": t.expires_at}
                           for t in issued]}

    @app.get("/v1/chart/{device}")
    def chart(device: str):
        try:
            return service.chart(device).to_json_dict()
        except UnknownDeviceError:
            raise HTTPException(status_code=404, detail={"error": "unknown-device"})

    @app.get("/v1/network-chart/{device}")
    def network_chart(device: str):
        try:
            return service.network_chart(device)
        except UnknownDeviceError:
            raise HTTPException(status_code=404, detail={"error": "unknown-device"})

    @app.post("/v1/wifi/submit")
    def wifi_submit(body: WifiSubmitIn):
        try:
            service.wifi_submit(body.single_use_id, body.hashed_bssid, body.timestamp)
        except DuplicateSingleUseId:
            raise HTTPException(status_code=409, detail={"error": "duplicate-single-use-id"})
        return {"status": "buffered"}

    @app.post("/v1/wifi/resolve")
    def wifi_resolve(body: WifiResolveIn):
        temp = service.wifi_resolve(body.hashed_bssid, body.timestamp)
        return {"wifi_temp_id": temp.id, "issued_at": temp.issued_at, "ttl": temp.ttl}

    @app.post("/v1/wifi/announce")
    def wifi_announce(body: WifiAnnounceIn):
        try:
            service.wifi_announce(body.single_use_id, body.device, body.timestamp)
        except UnknownDeviceError:
            raise HTTPException(status_code=404, detail={"error": "unknown-device"})
        return {"status": "announced"}

    @app.post("/v1/wifi/close-round")
    def wifi_close_round(secret: str = Depends(bearer_token)):
        if secret != matcher_secret:
            raise HTTPException(status_code=401, detail={"error": "bad-matcher-secret"})
        observations = service.wifi_close_round()
        return {"observations": len(observations)}

    return app


class BindError(OSError):
    pass


def probe_bind(host: str, port: int) -> None:
    """Fail fast (and testably) when the configured port is taken."""
    try:
        with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as s:
            s.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            s.bind((host, port))
    except OSError as exc:
        raise BindError(f"cannot bind {host}:{port}: {exc}") from exc


def serve(config: Config, data_dir: str | None = None) -> None:
    """Run the signal server until interrupted."""
    import uvicorn

    from .service import reopen
    from pathlib import Path

    directory = data_dir or config.server.data_dir
    if directory and (Path(directory) / "events.jsonl").exists():
        service = reopen(directory, config=config)
    else:
        service = SignalService(config=config, data_dir=directory or None)
    probe_bind(config.server.host, config.server.port)
    app = build_app(service)
    uvicorn.run(app, host=config.server.host, port=config.server.port, log_level="warning")
