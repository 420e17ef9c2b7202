"""Generation and judging backends: a deterministic mock and a live HTTP adapter.

The mock backend is what the whole harness runs against at desk scale.  Each
model is a :class:`MockModelProfile` whose "text" output just encodes a latent
quality (``q=<float>``); judges compare those latents through a probit noise
law with a tie band.  Every stochastic draw is keyed by the run token, the
full call signature, and an occurrence counter, so replaying the same call
schedule reproduces identical transcripts even when calls are issued
concurrently and regardless of arrival order.

The live adapter speaks the common chat-completion HTTP shape.  Credentials
are read only from environment variables, and request/response bodies are
logged with the credential scrubbed.
"""

import hashlib
import json
import logging
import os
import re
import threading
from dataclasses import dataclass, field
from statistics import fmean
from typing import Mapping, Protocol, Sequence, runtime_checkable

import numpy as np
from scipy.special import ndtr

from .errors import GenselectError
from .quality import QualityDistribution

logger = logging.getLogger(__name__)

_QUALITY_RE = re.compile(r"^q=(-?\d+(?:\.\d+)?)")
_CATEGORY_RE = re.compile(r"^\[category:([a-z_]+)\]")


def encode_quality_text(quality: float) -> str:
    """Render a latent quality as the mock text format."""
    return f"q={quality:.10f}"


def parse_quality_text(text: str) -> float:
    """Inverse of encode_quality_text; rejects anything else."""
    m = _QUALITY_RE.match(text.strip())
    if m is None:
        raise GenselectError(f"not a mock quality text: {text[:50]!r}")
    return float(m.group(1))


def prompt_category(prompt: str) -> str | None:
    """Extract the optional leading ``[category:<name>]`` tag, if present."""
    m = _CATEGORY_RE.match(prompt)
    return m.group(1) if m else None


def _seed_words(*parts) -> list[int]:
    """Map a mixed key of ints and strings to a numpy seed sequence."""
    words = []
    for part in parts:
        if isinstance(part, (int, np.integer)):
            words.append(int(part) & 0xFFFFFFFF)
        else:
            digest = hashlib.sha256(str(part).encode("utf-8")).digest()
            words.append(int.from_bytes(digest[:4], "big"))
    return words


@runtime_checkable
class BackendInterface(Protocol):
    """Minimal surface the harness and selectors need from any backend."""

    def generate(self, model_id: str, prompt: str, temperature: float) -> str: ...

    def judge_pair(self, judge_id: str, prompt: str, rubric: str,
                   first_text: str, second_text: str, temperature: float) -> str: ...

    def synthesize(self, model_id: str, prompt: str,
                   candidate_texts: Sequence[str]) -> str: ...


@dataclass(frozen=True)
class MockModelProfile:
    """Behavioral parameters for one simulated model.

    quality_law drives generation; category_offsets shift its location per
    task category.  judge_noise_tau and tie_band_epsilon only matter when the
    model is used as a judge: the comparison noise scale is tau * temperature,
    so the pinned judge temperature stays meaningful in mock mode.
    synthesis_penalty is the incoherence cost subtracted when the model acts
    as a synthesizer.
    """

    model_id: str
    quality_law: QualityDistribution
    category_offsets: Mapping[str, float] = field(default_factory=dict)
    judge_noise_tau: float = 0.5
    tie_band_epsilon: float = 0.0
    synthesis_penalty: float = 0.0

    def __post_init__(self):
        if not self.model_id:
            raise GenselectError("model_id must be nonempty")
        if not self.judge_noise_tau > 0:
            raise GenselectError("judge_noise_tau must be > 0")
        if self.tie_band_epsilon < 0:
            raise GenselectError("tie_band_epsilon must be >= 0")
        if self.synthesis_penalty < 0:
            raise GenselectError("synthesis_penalty must be >= 0")


class MockBackend:
    """Deterministic simulated backend.

    Determinism contract: after begin_run(token), the value returned for a
    call depends only on (backend seed, token, call arguments, how many times
    this exact call was already made in the run).  The occurrence counter is
    guarded by a lock so concurrent schedules assign draws consistently.
    """

    def __init__(self, profiles, seed: int = 0):
        profiles = list(profiles)
        ids = [p.model_id for p in profiles]
        if len(set(ids)) != len(ids):
            raise GenselectError("duplicate model_id in mock profiles")
        self._profiles = {p.model_id: p for p in profiles}
        self._seed = int(seed)
        self._run_token = ""
        self._counts: dict[tuple, int] = {}
        self._lock = threading.Lock()

    @property
    def model_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self._profiles))

    def begin_run(self, token: str) -> None:
        """Reset occurrence counters; draws are replayable within one token."""
        with self._lock:
            self._run_token = str(token)
            self._counts = {}

    def _profile(self, model_id: str) -> MockModelProfile:
        try:
            return self._profiles[model_id]
        except KeyError:
            raise GenselectError(f"no mock profile for model {model_id!r}") from None

    def _occurrence(self, key: tuple) -> int:
        with self._lock:
            n = self._counts.get(key, 0)
            self._counts[key] = n + 1
            return n

    def generate(self, model_id: str, prompt: str, temperature: float = 0.7) -> str:
        profile = self._profile(model_id)
        offset = profile.category_offsets.get(prompt_category(prompt) or "", 0.0)
        law = profile.quality_law
        if temperature == 0.0 or law.is_point:
            quality = law.mean
        else:
            occ = self._occurrence(("gen", self._run_token, model_id, prompt))
            rng = np.random.default_rng(_seed_words(
                self._seed, "gen", self._run_token, model_id, prompt, occ))
            quality = float(law.draw(rng, 1)[0])
        return encode_quality_text(quality + offset)

    def judge_pair(self, judge_id: str, prompt: str, rubric: str,
                   first_text: str, second_text: str,
                   temperature: float = 0.1) -> str:
        profile = self._profile(judge_id)
        dq = parse_quality_text(first_text) - parse_quality_text(second_text)
        if abs(dq) < profile.tie_band_epsilon:
            return "tie"
        scale = profile.judge_noise_tau * temperature
        if scale == 0.0:
            return "first" if dq > 0 else "second"
        occ = self._occurrence(
            ("judge", self._run_token, judge_id, prompt, first_text, second_text))
        rng = np.random.default_rng(_seed_words(
            self._seed, "judge", self._run_token, judge_id, prompt,
            first_text, second_text, occ))
        p_first = float(ndtr(dq / scale))
        return "first" if rng.random() < p_first else "second"

    def synthesize(self, model_id: str, prompt: str,
                   candidate_texts: Sequence[str]) -> str:
        profile = self._profile(model_id)
        if not candidate_texts:
            raise GenselectError("synthesize needs at least one candidate")
        qualities = [parse_quality_text(t) for t in candidate_texts]
        return encode_quality_text(fmean(qualities) - profile.synthesis_penalty)


@dataclass(frozen=True)
class LiveEndpoint:
    """Connection settings for a chat-completion API.

    api_key_env names the environment variable holding the credential; the
    key itself is never accepted directly so it cannot end up in configs or
    artifacts.
    """

    base_url: str
    api_key_env: str
    timeout: float = 60.0

    def __post_init__(self):
        if not self.base_url.startswith(("http://", "https://")):
            raise GenselectError(f"base_url must be http(s): {self.base_url!r}")
        if not self.api_key_env:
            raise GenselectError("api_key_env must be nonempty")


_VERDICT_RE = re.compile(r"\b(first|second|tie)\b", re.IGNORECASE)

_JUDGE_INSTRUCTION = (
    "You are comparing two candidate responses to the same task. "
    "Judge them against the rubric. Reply with exactly one word: "
    "FIRST if the first response is better, SECOND if the second is better, "
    "or TIE if they are of equal quality."
)

_SYNTH_INSTRUCTION = (
    "Merge the candidate responses below into a single response that keeps "
    "the strongest elements of each and resolves any disagreements. "
    "Output only the merged response."
)


class LiveBackend:
    """Chat-completion HTTP adapter (OpenAI-style request/response shape).

    A session object may be injected for testing; anything with a
    requests-compatible ``post`` works.  Request and response bodies are
    logged at DEBUG with the bearer token scrubbed.
    """

    def __init__(self, endpoint: LiveEndpoint, *, session=None):
        self._endpoint = endpoint
        key = os.environ.get(endpoint.api_key_env, "")
        if not key:
            raise GenselectError(
                f"environment variable {endpoint.api_key_env} is not set; "
                "live-backend credentials are read only from the environment")
        self._key = key
        if session is None:
            import requests
            session = requests.Session()
        self._session = session

    def _redact(self, payload) -> str:
        return json.dumps(payload, sort_keys=True).replace(self._key, "***")

    def _chat(self, model_id: str, messages: list, temperature: float) -> str:
        payload = {"model": model_id, "messages": messages, "temperature": temperature}
        logger.debug("live request: %s", self._redact(payload))
        resp = self._session.post(
            f"{self._endpoint.base_url.rstrip('/')}/chat/completions",
            json=payload,
            headers={"Authorization": f"Bearer {self._key}"},
            timeout=self._endpoint.timeout,
        )
        resp.raise_for_status()
        body = resp.json()
        logger.debug("live response: %s", self._redact(body))
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise GenselectError(
                f"malformed completion response: {self._redact(body)[:200]}") from None

    def generate(self, model_id: str, prompt: str, temperature: float = 0.7) -> str:
        return self._chat(model_id, [{"role": "user", "content": prompt}], temperature)

    def judge_pair(self, judge_id: str, prompt: str, rubric: str,
                   first_text: str, second_text: str,
                   temperature: float = 0.1) -> str:
        user = (f"Task:\n{prompt}\n\nRubric:\n{rubric}\n\n"
                f"First response:\n{first_text}\n\nSecond response:\n{second_text}")
        reply = self._chat(judge_id, [
            {"role": "system", "content": _JUDGE_INSTRUCTION},
            {"role": "user", "content": user},
        ], temperature)
        m = _VERDICT_RE.search(reply)
        if m is None:
            raise GenselectError(f"unparseable judge verdict: {reply[:80]!r}")
        return m.group(1).lower()

    def synthesize(self, model_id: str, prompt: str,
                   candidate_texts: Sequence[str]) -> str:
        if not candidate_texts:
            raise GenselectError("synthesize needs at least one candidate")
        blocks = [f"Candidate {i + 1}:\n{text}" for i, text in enumerate(candidate_texts)]
        user = f"Task:\n{prompt}\n\n" + "\n\n".join(blocks)
        return self._chat(model_id, [
            {"role": "system", "content": _SYNTH_INSTRUCTION},
            {"role": "user", "content": user},
        ], temperature=0.7)
