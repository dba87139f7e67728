"""Buyer-side decision policies.

The engine only needs `decide(price, round_index) -> bool`. Policies with
internal cursors (scripted, external) are single-owner per game; `fresh()`
hands the engine a clean instance for each replication.
"""

from __future__ import annotations

from collections import deque
from typing import Callable, Iterable

from .errors import ConfigurationError, PolicyError


class CookPolicy:
    kind: str = "abstract"

    def decide(self, price: float, round_index: int) -> bool:
        raise NotImplementedError

    def fresh(self) -> "CookPolicy":
        """A restarted copy for a new game (self when the policy is stateless)."""
        return self

    def describe(self) -> dict:
        raise NotImplementedError


class NaivePolicy(CookPolicy):
    """Accept exactly the prices at or below a fixed threshold (ties accept)."""

    kind = "naive"

    def __init__(self, threshold: float):
        if threshold < 0:
            raise ConfigurationError(f"threshold must be nonnegative, got {threshold}")
        self.threshold = float(threshold)

    def decide(self, price: float, round_index: int) -> bool:
        return price <= self.threshold

    def describe(self) -> dict:
        return {"kind": "naive", "threshold": self.threshold}


class ScriptedPolicy(CookPolicy):
    """Replay a fixed decision sequence; running past its end is an error."""

    kind = "scripted"

    def __init__(self, decisions: Iterable[bool]):
        self._decisions = [bool(d) for d in decisions]
        self._cursor = 0

    @classmethod
    def from_file(cls, path: str) -> "ScriptedPolicy":
        """One decision per line, 0 = refuse / 1 = accept; blank lines ignored."""
        decisions = []
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                token = line.strip()
                if not token:
                    continue
                if token not in ("0", "1"):
                    raise ConfigurationError(f"{path}:{lineno}: expected 0 or 1, got {token!r}")
                decisions.append(token == "1")
        return cls(decisions)

    def decide(self, price: float, round_index: int) -> bool:
        if self._cursor >= len(self._decisions):
            raise PolicyError(
                f"script exhausted after {len(self._decisions)} decisions (round {round_index})"
            )
        decision = self._decisions[self._cursor]
        self._cursor += 1
        return decision

    def fresh(self) -> "ScriptedPolicy":
        return ScriptedPolicy(self._decisions)

    def describe(self) -> dict:
        # decisions included verbatim so a manifest round-trips through make_policy
        return {"kind": "scripted", "decisions": [int(d) for d in self._decisions]}


class ExternalPolicy(CookPolicy):
    """Decisions arrive from outside the engine: a live session or a callback.

    Fed decisions (see `feed`) are consumed first; otherwise the callback is
    asked. With neither available the policy cannot decide and raises.
    """

    kind = "external"

    def __init__(self, source: Callable[[float, int], bool] | None = None):
        self._source = source
        self._fed: deque[bool] = deque()

    def feed(self, decision: bool) -> None:
        self._fed.append(bool(decision))

    def decide(self, price: float, round_index: int) -> bool:
        if self._fed:
            return self._fed.popleft()
        if self._source is not None:
            return bool(self._source(price, round_index))
        raise PolicyError(f"no external decision available for round {round_index}")

    def fresh(self) -> "ExternalPolicy":
        if self._source is None:
            raise PolicyError("an external policy without a callback cannot be replicated")
        return ExternalPolicy(self._source)

    def describe(self) -> dict:
        return {"kind": "external"}


def make_policy(spec: dict) -> CookPolicy:
    """Build a policy from a config mapping: {"kind": "naive", "threshold": ...} etc."""
    kind = spec.get("kind")
    if kind == "naive":
        if "threshold" not in spec:
            raise ConfigurationError("naive policy spec is missing 'threshold'")
        return NaivePolicy(spec["threshold"])
    if kind == "scripted":
        if "path" in spec:
            return ScriptedPolicy.from_file(spec["path"])
        if "decisions" in spec:
            return ScriptedPolicy(bool(d) for d in spec["decisions"])
        raise ConfigurationError("scripted policy spec needs 'path' or 'decisions'")
    raise ConfigurationError(f"unknown policy kind {kind!r}")
