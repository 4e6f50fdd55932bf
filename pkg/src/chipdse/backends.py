"""Plan-generation backends for the exploration loop.

Two interchangeable implementations of the same contract: a remote
chat-completion backend for LLM-guided search, and a seeded heuristic
backend that keeps offline runs fully reproducible.  Both consume a
:class:`PlanRequest` and return plans whose configurations are expressed as
canonical strings; feasibility enforcement stays with the caller.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import random
import re
from dataclasses import dataclass

import requests

from .cost import Profile
from .design_space import (
    ConfigParseError,
    DesignSpace,
    SystemConfig,
    parse_config,
    random_mutation,
    sample_feasible,
)
from .mapping import WorkloadSpec

PROMPT_VERSION = "1"

ENV_API_KEY = "CHICO_API_KEY"
ENV_API_BASE = "CHICO_API_BASE"
ENV_MODEL = "CHICO_MODEL"
ENV_EFFORT_PARAM = "CHICO_EFFORT_PARAM"

REASONING_EFFORTS = ("low", "medium", "high", "xhigh")


class BackendError(RuntimeError):
    """Transport failure or schema-invalid output after all retries."""


@dataclass(frozen=True)
class PlanRequest:
    workload: WorkloadSpec
    profile: Profile
    iteration: int
    n_plans: int
    agents_doc: str
    model_info_doc: str
    blacklist_doc: str
    evolving_digest: str = ""  # empty exactly on the first iteration
    reasoning_effort: str = "medium"

    def __post_init__(self) -> None:
        if self.n_plans < 1:
            raise ValueError("n_plans must be >= 1")
        if (self.iteration == 1) != (self.evolving_digest == ""):
            raise ValueError("evolving digest must be empty exactly on iteration 1")
        if self.reasoning_effort not in REASONING_EFFORTS:
            raise ValueError(f"reasoning effort must be one of {REASONING_EFFORTS}")


@dataclass(frozen=True)
class ExplorationPlan:
    plan_id: str
    configs: tuple[SystemConfig, ...]
    rationale: str
    target_region: str

    def __post_init__(self) -> None:
        if not 1 <= len(self.configs) <= 8:
            raise ValueError("a plan carries between 1 and 8 configurations")


@dataclass(frozen=True)
class PlanResponse:
    plans: tuple[ExplorationPlan, ...]
    insights: str = ""


def derive_rng(*parts) -> random.Random:
    """Stable RNG from arbitrary key parts (independent of hash salting)."""
    digest = hashlib.sha256("/".join(str(p) for p in parts).encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


# ---------------------------------------------------------------------------
# Deterministic heuristic backend
# ---------------------------------------------------------------------------

BEST_DIGEST_HEADER = "rank,weighted_cost,config,iteration_found"


def parse_best_rows(digest: str) -> list[tuple[float, str]]:
    """Extract (cost, canonical config) rows from a context digest."""
    rows: list[tuple[float, str]] = []
    in_table = False
    for line in digest.splitlines():
        line = line.strip()
        if line == BEST_DIGEST_HEADER:
            in_table = True
            continue
        if not in_table:
            continue
        if not line or line.startswith("#"):
            break
        parts = line.split(",")
        if len(parts) < 4:
            break
        rows.append((float(parts[1]), parts[2]))
    return rows


class HeuristicBackend:
    """Seeded stand-in for the reasoning model.

    Iteration one emits stratified coverage plans, cycling through every
    legal (chiplet count, integration, dataflow) combination.  Later
    iterations hill-climb: each plan picks a best-table entry
    (rank-weighted) and emits 80% single-field mutations of it plus 20%
    fresh uniform samples.  All randomness derives from (seed, iteration,
    plan ordinal), so concurrent generation cannot reorder outcomes.
    """

    name = "heuristic"

    def __init__(self, space: DesignSpace, seed: int, configs_per_plan: int = 5):
        if not 1 <= configs_per_plan <= 8:
            raise ValueError("configs_per_plan must be in 1..8")
        self.space = space
        self.seed = seed
        self.configs_per_plan = configs_per_plan

    def _coverage_combos(self) -> list[tuple[int, str, str]]:
        combos = []
        for count in self.space.counts:
            for integ in self.space.integrations:
                if (count == 1) != (integ == "2D"):
                    continue
                if integ == "2.5D+3D" and count < 3:
                    continue
                for dataflow in self.space.dataflows:
                    combos.append((count, integ, dataflow))
        return combos

    def _stratified_plan(self, ordinal: int, combos, rng: random.Random) -> ExplorationPlan:
        count, integ, dataflow = combos[(ordinal - 1) % len(combos)]
        region = self.space.restrict(
            counts=[count], integrations=[integ], dataflows=[dataflow]
        )
        configs = tuple(sample_feasible(region, rng) for _ in range(self.configs_per_plan))
        return ExplorationPlan(
            plan_id=f"p{ordinal:03d}",
            configs=configs,
            rationale=f"coverage sweep: {count} chiplet(s), {integ}, {dataflow} dataflow",
            target_region=f"count={count},integration={integ},dataflow={dataflow}",
        )

    def _refinement_plan(self, ordinal: int, best_rows, rng: random.Random) -> ExplorationPlan:
        weights = [1.0 / (r + 1) for r in range(len(best_rows))]
        pick = rng.choices(range(len(best_rows)), weights=weights, k=1)[0]
        anchor_cost, anchor_canon = best_rows[pick]
        anchor = parse_config(anchor_canon)
        n_mut = math.floor(0.8 * self.configs_per_plan)
        configs = [random_mutation(anchor, self.space, rng) for _ in range(n_mut)]
        configs += [sample_feasible(self.space, rng) for _ in range(self.configs_per_plan - n_mut)]
        return ExplorationPlan(
            plan_id=f"p{ordinal:03d}",
            configs=tuple(configs),
            rationale=(
                f"refine rank-{pick + 1} incumbent (cost {anchor_cost:.4f}) with "
                f"single-field moves plus uniform exploration"
            ),
            target_region=f"neighborhood of {anchor_canon}",
        )

    def generate(self, req: PlanRequest) -> PlanResponse:
        best_rows = parse_best_rows(req.evolving_digest) if req.iteration > 1 else []
        combos = self._coverage_combos()
        plans = []
        for ordinal in range(1, req.n_plans + 1):
            rng = derive_rng(self.seed, req.iteration, ordinal)
            if best_rows:
                plans.append(self._refinement_plan(ordinal, best_rows, rng))
            else:
                plans.append(self._stratified_plan(ordinal, combos, rng))
        mode = "refinement" if best_rows else "stratified coverage"
        return PlanResponse(
            plans=tuple(plans),
            insights=f"heuristic backend, iteration {req.iteration}: {mode} plans",
        )


# ---------------------------------------------------------------------------
# Chat-completion backend
# ---------------------------------------------------------------------------

_PLAN_BLOCK_RE = re.compile(r"```(?:json)?\s*\n(.*?)```", re.DOTALL)

_OUTPUT_CONTRACT = """\
Reply with a single fenced JSON block (```json ... ```) containing an array
of exactly {n_plans} plan objects. Each object must have:
  "configs": 1 to 8 canonical configuration strings of the form
             "<count>|<A-T-S>;...|<O-D-K>|<share>|<I-P-M>|<proto>|<topo>"
  "rationale": short free text explaining the plan
  "target_region": short free text naming the region being probed
Do not add any other top-level keys.
"""


def build_messages(req: PlanRequest) -> list[dict]:
    """Chat messages for a plan request (template version {PROMPT_VERSION})."""
    context = [
        f"# Optimization instance",
        f"workload: {req.workload.name or 'custom'} "
        f"(M={req.workload.m}, K={req.workload.k}, N={req.workload.n})",
        f"profile: {req.profile.name or 'custom'} "
        f"(alpha={req.profile.alpha}, beta={req.profile.beta}, "
        f"gamma={req.profile.gamma}, theta={req.profile.theta})",
        f"iteration: {req.iteration}",
        "",
        "# Model reference",
        req.model_info_doc,
        "",
        "# Blacklist (illegal combinations)",
        req.blacklist_doc,
    ]
    if req.evolving_digest:
        context += ["", "# Exploration history", req.evolving_digest]
    else:
        context += [
            "",
            "# Exploration history",
            "none yet; produce broad coverage of the design space "
            "(sweep chiplet counts and integration styles).",
        ]
    context += ["", _OUTPUT_CONTRACT.format(n_plans=req.n_plans)]
    return [
        {"role": "system", "content": req.agents_doc},
        {"role": "user", "content": "\n".join(context)},
    ]


def extract_plans(text: str, n_plans: int) -> list[ExplorationPlan]:
    """Parse the fenced JSON block of a model reply into plans.

    Raises BackendError when no block parses or the schema is violated.
    Configuration strings are validated for syntax only; infeasible but
    well-formed configs pass through for the orchestrator to replace.
    """
    blocks = _PLAN_BLOCK_RE.findall(text)
    if not blocks:
        raise BackendError("reply contains no fenced JSON block")
    last_error = "no parsable block"
    for block in blocks:
        try:
            raw = json.loads(block)
        except json.JSONDecodeError as exc:
            last_error = f"invalid JSON: {exc}"
            continue
        if not isinstance(raw, list) or not raw:
            last_error = "top level must be a non-empty array of plans"
            continue
        try:
            plans = []
            for i, entry in enumerate(raw[:n_plans], start=1):
                if not isinstance(entry, dict):
                    raise BackendError(f"plan {i} is not an object")
                configs = entry.get("configs")
                if not isinstance(configs, list) or not configs:
                    raise BackendError(f"plan {i} has no configs array")
                try:
                    parsed = tuple(parse_config(str(c)) for c in configs[:8])
                except ConfigParseError as exc:
                    raise BackendError(f"plan {i} config does not parse: {exc}") from exc
                plans.append(
                    ExplorationPlan(
                        plan_id=f"p{i:03d}",
                        configs=parsed,
                        rationale=str(entry.get("rationale", "")),
                        target_region=str(entry.get("target_region", "")),
                    )
                )
            return plans
        except BackendError as exc:
            last_error = str(exc)
            continue
    raise BackendError(last_error)


def _default_transport(url: str, headers: dict, payload: dict, timeout_s: float) -> tuple[int, str]:
    resp = requests.post(url, headers=headers, json=payload, timeout=timeout_s)
    return resp.status_code, resp.text


class LlmBackend:
    """Chat-completions client with bounded retries and strict output parsing.

    Configured through the environment (CHICO_API_BASE, CHICO_MODEL,
    CHICO_API_KEY); CHICO_EFFORT_PARAM names the request field carrying the
    reasoning effort and may be set empty for endpoints without one.
    """

    name = "llm"

    def __init__(
        self,
        base_url: str | None = None,
        model: str | None = None,
        api_key: str | None = None,
        effort_param: str | None = None,
        transport=None,
        max_retries: int = 3,
        timeout_s: float = 120.0,
    ):
        self.base_url = (base_url or os.environ.get(ENV_API_BASE, "")).rstrip("/")
        self.model = model or os.environ.get(ENV_MODEL, "")
        self.api_key = api_key if api_key is not None else os.environ.get(ENV_API_KEY, "")
        if effort_param is None:
            effort_param = os.environ.get(ENV_EFFORT_PARAM, "reasoning_effort")
        self.effort_param = effort_param
        self.transport = transport or _default_transport
        self.max_retries = max_retries
        self.timeout_s = timeout_s
        if not self.base_url or not self.model:
            raise BackendError(
                f"LLM backend needs {ENV_API_BASE} and {ENV_MODEL} (or explicit arguments)"
            )

    def _payload(self, messages: list[dict], effort: str) -> dict:
        payload: dict = {"model": self.model, "messages": messages}
        if self.effort_param:
            payload[self.effort_param] = effort
        return payload

    def generate(self, req: PlanRequest) -> PlanResponse:
        messages = build_messages(req)
        url = f"{self.base_url}/chat/completions"
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_error = "no attempt made"
        for _ in range(self.max_retries):
            try:
                status, body = self.transport(
                    url, headers, self._payload(messages, req.reasoning_effort), self.timeout_s
                )
            except requests.RequestException as exc:
                last_error = f"transport failure: {exc}"
                continue
            if status != 200:
                last_error = f"HTTP {status}: {body[:500]}"
                continue
            try:
                content = json.loads(body)["choices"][0]["message"]["content"]
            except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
                last_error = f"malformed completion body: {exc}"
                continue
            try:
                plans = extract_plans(content, req.n_plans)
                return PlanResponse(plans=tuple(plans), insights=content)
            except BackendError as exc:
                last_error = str(exc)
                messages = messages + [
                    {"role": "assistant", "content": content},
                    {
                        "role": "user",
                        "content": (
                            f"That reply was rejected ({exc}). "
                            + _OUTPUT_CONTRACT.format(n_plans=req.n_plans)
                        ),
                    },
                ]
        raise BackendError(f"plan generation failed after {self.max_retries} attempts: {last_error}")


def make_backend(kind: str, space: DesignSpace, seed: int, configs_per_plan: int = 5):
    if kind == "heuristic":
        return HeuristicBackend(space, seed, configs_per_plan)
    if kind == "llm":
        return LlmBackend()
    raise ValueError(f"unknown backend {kind!r} (expected 'heuristic' or 'llm')")
