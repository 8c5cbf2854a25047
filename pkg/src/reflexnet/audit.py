"""Independent replay checks over an organization log."""

from __future__ import annotations

import json
from collections import defaultdict
from pathlib import Path
from typing import Iterable


def read_jsonl(path) -> list[dict]:
    records = []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        if record.get("truncated"):
            continue
        records.append(record)
    return records


def audit_ladder(records: Iterable[dict], k_tune: int, k_reorg: int) -> list[str]:
    """Escalation-order violations, one message each.

    Replays the log per agent: a Good feedback delivered to an agent ends
    all of its episodes; a non-exhausted tune restarts the exhausted streak
    of its (kind, direction) episode. A Reorganize needs ``k_tune``
    exhausted tunes in its streak and an Evolve needs ``k_reorg`` failed
    reorganizations. Evolve records without an NCS (an agent disappearing
    as useless) belong to no episode and are skipped.
    """
    streak: dict = defaultdict(int)
    failed: dict = defaultdict(int)
    violations = []
    for r in records:
        agent = r["agent"]
        key = (agent, r.get("ncs_kind"), r.get("direction"))
        kind = r["kind"]
        if kind == "feedback":
            if r.get("direction") == "Good":
                for d in (streak, failed):
                    for k in [k for k in d if k[0] == agent]:
                        del d[k]
        elif kind == "tune":
            if r.get("exhausted"):
                streak[key] += 1
            else:
                streak[key] = 0
        elif kind == "reorganize":
            if streak[key] < k_tune:
                violations.append(
                    f"record {r['seq']}: {agent} reorganized after {streak[key]} exhausted tunes (< {k_tune})"
                )
            if r.get("success"):
                streak[key] = 0
            else:
                failed[key] += 1
        elif kind == "evolve":
            if r.get("ncs_kind") is None:
                continue
            if failed[key] < k_reorg:
                violations.append(
                    f"record {r['seq']}: {agent} evolved after {failed[key]} failed reorganizations (< {k_reorg})"
                )
            if r.get("success"):
                streak[key] = 0
                failed[key] = 0
    return violations


def audit_hops(records: Iterable[dict], max_hops: int) -> list[str]:
    return [
        f"record {r['seq']}: feedback to {r['agent']} with {r['hops']} hops (> {max_hops})"
        for r in records
        if r["kind"] == "feedback" and r["hops"] > max_hops
    ]


def replay_topology(initial_links: Iterable[tuple[str, str]], records: Iterable[dict]) -> set[tuple[str, str]]:
    """Link set obtained by applying every logged add/remove to ``initial_links``."""
    links = set(initial_links)
    for r in records:
        if r["kind"] not in ("reorganize", "evolve"):
            continue
        for link in r.get("removed", []):
            links.discard((link["pre"], link["post"]))
        for link in r.get("added", []):
            links.add((link["pre"], link["post"]))
    return links
