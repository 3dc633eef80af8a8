"""Scorer contract and ensemble runner.

A scorer maps a masked abstract to a 7-class probability distribution.  The
built-in lexical stub keeps the whole pipeline testable without any ML
runtime; real models plug in behind the wire protocol: newline-delimited JSON
over a child process's stdin/stdout, or HTTP POST /score with a JSON array
body.  Request {"id","text"} -> response {"id","probs":[7]}, order free.
A response may instead carry {"id","error"} to reject one poison input
without failing its whole batch.
"""

from __future__ import annotations

import hashlib
import json
import math
import shlex
import subprocess
import time
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

from .corpus_io import DEFAULT_TRIGGER_STEMS, Interaction, N_CLASSES, json_line
from .transform import TransformedInput

SIMPLEX_TOL = 1e-6
STUB_BASELINE = 0.5  # negative-class prior; below one trigger hit on purpose


class ProtocolError(RuntimeError):
    """External scorer broke the wire contract (ids, schema, or distribution)."""


class ScorerError(RuntimeError):
    """External scorer unreachable or failing after retries."""


def check_distribution(probs: Sequence[float], n_classes: int = N_CLASSES) -> None:
    if len(probs) != n_classes:
        raise ValueError(f"expected {n_classes} probabilities, got {len(probs)}")
    if any(not (0.0 <= p <= 1.0) for p in probs):
        raise ValueError(f"probabilities outside [0, 1]: {probs}")
    total = math.fsum(probs)
    if abs(total - 1.0) > SIMPLEX_TOL:
        raise ValueError(f"probabilities sum to {total}, not 1")


@dataclass(frozen=True)
class ScorerHandle:
    """One ensemble member: the built-in stub or an external endpoint."""

    kind: str  # "stub-lexical" | "external"
    identity: int  # 1-based model index within the ensemble
    config: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("stub-lexical", "external"):
            raise ValueError(f"unknown scorer kind {self.kind!r}")
        if self.identity < 1:
            raise ValueError(f"model identity must be >= 1, got {self.identity}")


def stub_ensemble(size: int, seed: int = 0, noise: float = 0.05) -> list[ScorerHandle]:
    return [
        ScorerHandle(kind="stub-lexical", identity=i, config={"seed": seed, "noise": noise})
        for i in range(1, size + 1)
    ]


@dataclass(frozen=True)
class RawEnsembleOutput:
    sample_id: str
    per_model: tuple[tuple[float, ...], ...]

    def to_json(self) -> str:
        return json_line({"id": self.sample_id, "per_model": [list(p) for p in self.per_model]})


@dataclass(frozen=True)
class ScoreFailure:
    sample_id: str
    model_identity: int
    message: str


def raw_output_from_json(obj: dict) -> RawEnsembleOutput:
    per_model = tuple(tuple(float(x) for x in row) for row in obj["per_model"])
    return RawEnsembleOutput(sample_id=obj["id"], per_model=per_model)


def _hash_unit(seed: int, sample_id: str, model_index: int, class_index: int) -> float:
    """Deterministic value in [-1, 1) from a keyed blake2b digest."""
    key = f"{seed}:{sample_id}:{model_index}:{class_index}".encode()
    digest = hashlib.blake2b(key, digest_size=8).digest()
    return int.from_bytes(digest, "big") / 2**63 - 1.0


def score_stub(
    inp: TransformedInput,
    model_index: int,
    *,
    seed: int = 0,
    noise: float = 0.05,
    stems: Mapping[Interaction, tuple[str, ...]] = DEFAULT_TRIGGER_STEMS,
) -> list[float]:
    """Trigger-stem counting scorer with seeded per-model perturbation.

    Each positive class is weighted by how often its stems occur in the text;
    the negative class gets a constant baseline.  A bounded hash perturbation
    keyed on (sample id, model index) makes ensemble members distinct but
    correlated, so downstream variance statistics are exercised.
    """
    if model_index < 1:
        raise ValueError(f"model_index must be >= 1, got {model_index}")
    lowered = inp.text.lower()
    weights = [0.0] * N_CLASSES
    weights[Interaction.NEGATIVE] = STUB_BASELINE
    for interaction, class_stems in stems.items():
        weights[interaction] = float(sum(lowered.count(s) for s in class_stems))
    if noise:
        for c in range(N_CLASSES):
            weights[c] = max(weights[c] + noise * _hash_unit(seed, inp.sample_id, model_index, c), 0.0)
    total = math.fsum(weights)
    return [w / total for w in weights]


def _score_batch_stub(args: tuple) -> list[RawEnsembleOutput]:
    batch, handles = args
    outputs = []
    for inp in batch:
        per_model = tuple(
            tuple(
                score_stub(
                    inp,
                    h.identity,
                    seed=h.config.get("seed", 0),
                    noise=h.config.get("noise", 0.05),
                )
            )
            for h in handles
        )
        outputs.append(RawEnsembleOutput(sample_id=inp.sample_id, per_model=per_model))
    return outputs


class SubprocessEndpoint:
    """Wire protocol over a long-lived child process (one JSON object per line)."""

    def __init__(self, command: Sequence[str] | str):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self._proc: subprocess.Popen | None = None

    def _ensure(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        return self._proc

    def score(self, batch: Sequence[Mapping[str, str]]) -> list[dict]:
        proc = self._ensure()
        try:
            for request in batch:
                proc.stdin.write(json_line({"id": request["id"], "text": request["text"]}) + "\n")
            proc.stdin.flush()
            responses = []
            for _ in batch:
                line = proc.stdout.readline()
                if not line:
                    raise ScorerError(f"scorer process {self.command} closed its output early")
                responses.append(json.loads(line))
            return responses
        except (BrokenPipeError, OSError) as e:
            raise ScorerError(f"scorer process {self.command} failed: {e}") from e

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            self._proc.stdin.close()
            self._proc.wait(timeout=10)
        self._proc = None


class HttpEndpoint:
    """Wire protocol over HTTP: POST /score with a JSON array body."""

    def __init__(self, url: str, timeout: float = 60.0):
        self.url = url.rstrip("/") + "/score"
        self.timeout = timeout

    def score(self, batch: Sequence[Mapping[str, str]]) -> list[dict]:
        import requests

        try:
            resp = requests.post(
                self.url,
                json=[{"id": r["id"], "text": r["text"]} for r in batch],
                timeout=self.timeout,
            )
            resp.raise_for_status()
        except requests.RequestException as e:
            raise ScorerError(f"scorer at {self.url} failed: {e}") from e
        body = resp.json()
        if not isinstance(body, list):
            raise ProtocolError(f"scorer at {self.url} returned a non-array body")
        return body

    def close(self) -> None:
        pass


def external_score_batch(batch: Sequence[Mapping[str, str]], endpoint) -> list[dict]:
    """Send one batch through an endpoint and re-match responses by id.

    Returns one entry per request, in request order: {"id", "probs"} for a
    scored input or {"id", "error"} for a per-input rejection.  Anything else
    (missing/duplicate/unknown ids, bad distributions) is a ProtocolError.
    """
    responses = endpoint.score(batch)
    wanted = [r["id"] for r in batch]
    by_id: dict[str, dict] = {}
    for r in responses:
        if not isinstance(r, dict) or "id" not in r:
            raise ProtocolError(f"response without id: {r!r}")
        if r["id"] in by_id:
            raise ProtocolError(f"duplicate response for id {r['id']}")
        if r["id"] not in wanted:
            raise ProtocolError(f"response for unknown id {r['id']}")
        by_id[r["id"]] = r
    missing = [i for i in wanted if i not in by_id]
    if missing:
        raise ProtocolError(f"no response for ids {missing[:5]} ({len(missing)} missing)")
    out = []
    for i in wanted:
        r = by_id[i]
        if "error" in r:
            out.append({"id": i, "error": str(r["error"])})
            continue
        probs = r.get("probs")
        try:
            check_distribution(probs)
        except (TypeError, ValueError) as e:
            raise ProtocolError(f"id {i}: invalid distribution: {e}") from None
        out.append({"id": i, "probs": [float(p) for p in probs]})
    return out


def _endpoint_for(handle: ScorerHandle):
    if "command" in handle.config:
        return SubprocessEndpoint(handle.config["command"])
    if "url" in handle.config:
        return HttpEndpoint(handle.config["url"], timeout=handle.config.get("timeout", 60.0))
    raise ValueError(f"external scorer {handle.identity} has neither command nor url")


def _with_retries(fn, *, retries: int = 2, backoff: float = 0.5, label: str = ""):
    attempt = 0
    while True:
        try:
            return fn()
        except (ScorerError, ProtocolError):
            if attempt >= retries:
                raise
            time.sleep(backoff * 2**attempt)
            attempt += 1


@dataclass
class EnsembleRun:
    outputs: list[RawEnsembleOutput]
    failures: list[ScoreFailure]


def run_ensemble(
    inputs: Sequence[TransformedInput],
    scorers: Sequence[ScorerHandle],
    *,
    batch_size: int = 64,
    jobs: int = 1,
    retries: int = 2,
    backoff: float = 0.5,
) -> EnsembleRun:
    """Score every input with every ensemble member, in input order.

    Inputs are processed in batches; per-input rejections become ScoreFailure
    markers rather than silent drops.  Whole-batch external failures are
    retried with exponential backoff before an error naming the model and
    batch surfaces.
    """
    if not scorers:
        raise ValueError("need at least one scorer")
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    batches = [inputs[i : i + batch_size] for i in range(0, len(inputs), batch_size)]

    all_stub = all(h.kind == "stub-lexical" for h in scorers)
    if all_stub:
        work = [(batch, tuple(scorers)) for batch in batches]
        if jobs > 1 and len(batches) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                chunks = list(pool.map(_score_batch_stub, work, chunksize=4))
        else:
            chunks = [_score_batch_stub(w) for w in work]
        return EnsembleRun(outputs=[o for chunk in chunks for o in chunk], failures=[])

    endpoints = {h.identity: (None if h.kind == "stub-lexical" else _endpoint_for(h)) for h in scorers}

    def score_one_batch(batch_index: int) -> tuple[list[RawEnsembleOutput], list[ScoreFailure]]:
        batch = batches[batch_index]
        per_model_rows: dict[str, list] = {inp.sample_id: [] for inp in batch}
        failures: list[ScoreFailure] = []
        rejected: dict[str, ScoreFailure] = {}
        for handle in scorers:
            if handle.kind == "stub-lexical":
                results = [
                    {
                        "id": inp.sample_id,
                        "probs": score_stub(
                            inp,
                            handle.identity,
                            seed=handle.config.get("seed", 0),
                            noise=handle.config.get("noise", 0.05),
                        ),
                    }
                    for inp in batch
                ]
            else:
                request = [{"id": inp.sample_id, "text": inp.text} for inp in batch]
                endpoint = endpoints[handle.identity]
                try:
                    results = _with_retries(
                        lambda: external_score_batch(request, endpoint),
                        retries=retries,
                        backoff=backoff,
                    )
                except (ScorerError, ProtocolError) as e:
                    raise ScorerError(f"model {handle.identity}, batch {batch_index}: {e}") from e
            for inp, result in zip(batch, results):
                if "error" in result:
                    rejected.setdefault(
                        inp.sample_id, ScoreFailure(inp.sample_id, handle.identity, result["error"])
                    )
                else:
                    per_model_rows[inp.sample_id].append(tuple(result["probs"]))
        outputs = []
        for inp in batch:
            if inp.sample_id in rejected:
                failures.append(rejected[inp.sample_id])
            else:
                outputs.append(
                    RawEnsembleOutput(sample_id=inp.sample_id, per_model=tuple(per_model_rows[inp.sample_id]))
                )
        return outputs, failures

    any_subprocess = any(h.kind == "external" and "command" in h.config for h in scorers)
    try:
        if jobs > 1 and len(batches) > 1 and not any_subprocess:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(score_one_batch, range(len(batches))))
        else:
            results = [score_one_batch(i) for i in range(len(batches))]
    finally:
        for endpoint in endpoints.values():
            if endpoint is not None:
                endpoint.close()
    outputs = [o for out, _ in results for o in out]
    failures = [f for _, fail in results for f in fail]
    return EnsembleRun(outputs=outputs, failures=failures)


def read_raw_outputs(stream, source: str = "<stream>") -> list[RawEnsembleOutput]:
    from .corpus_io import iter_jsonl

    return [raw_output_from_json(obj) for _, obj in iter_jsonl(stream, source)]


def write_raw_outputs(outputs: Iterable[RawEnsembleOutput]):
    for o in outputs:
        yield o.to_json() + "\n"
