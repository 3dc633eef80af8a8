"""Serve scores over the wire protocol: stdio (newline-delimited JSON) or HTTP.

Each request {"id","text"} is answered by {"id","probs":[7]}; a request the
model cannot process is answered with {"id","error"} so one poison input
never fails its batch.  Requests without a recognisable id are answered with
an empty id, which the client surfaces as a protocol error.
"""

from __future__ import annotations

import json
import sys

from .model import AdapterConfig, Scorer


def respond_line(scorer: Scorer, line: str) -> dict:
    try:
        request = json.loads(line)
    except json.JSONDecodeError as e:
        return {"id": "", "error": f"malformed request: {e.msg}"}
    if not isinstance(request, dict) or "id" not in request:
        return {"id": "", "error": "request must be an object with an id"}
    request_id = str(request["id"])
    text = request.get("text")
    if not isinstance(text, str) or not text:
        return {"id": request_id, "error": "request must carry a non-empty text"}
    try:
        probs = scorer.score([text])[0]
    except Exception as e:  # scoring failure is per-input, not fatal
        return {"id": request_id, "error": f"scoring failed: {e}"}
    return {"id": request_id, "probs": probs}


def serve_stdio(config: AdapterConfig, stdin=None, stdout=None) -> None:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    scorer = Scorer(config)
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        stdout.write(json.dumps(respond_line(scorer, line), separators=(",", ":")) + "\n")
        stdout.flush()


def create_app(config: AdapterConfig):
    from fastapi import FastAPI, HTTPException

    app = FastAPI(title="ptmkit scorer adapter")
    scorer = Scorer(config)

    @app.post("/score")
    def score(batch: list[dict]):
        if not isinstance(batch, list):
            raise HTTPException(status_code=400, detail="body must be a JSON array")
        out = []
        for request in batch:
            out.append(respond_line(scorer, json.dumps(request)))
        return out

    return app


def serve_http(config: AdapterConfig, host: str, port: int) -> None:
    import uvicorn

    uvicorn.run(create_app(config), host=host, port=port, log_level="warning")
