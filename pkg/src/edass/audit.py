"""Post-hoc invariant checks over a parsed trace.

Each check returns a list of human-readable violations; empty means clean.
"""

from __future__ import annotations

from typing import Dict, List, Sequence, Set

from .trace import TraceLine


def check_ordering(lines: Sequence[TraceLine]) -> List[str]:
    bad = []
    for a, b in zip(lines, lines[1:]):
        if not (a.time < b.time or (a.time == b.time and a.seq < b.seq)):
            bad.append(f"seq {a.seq}@{a.time} then seq {b.seq}@{b.time}")
    return bad


def check_cluster_heads(lines: Sequence[TraceLine]) -> List[str]:
    """At every instant each live cluster has one head and no node heads two clusters."""
    bad = []
    live: Dict[str, int] = {}  # cluster id -> head
    members: Dict[str, Set[int]] = {}
    for ln in lines:
        d = ln.details
        if not ln.actor.startswith("node:") or d.get("stale") or "cluster" not in d:
            continue
        nid = int(ln.actor[5:])
        cid = d["cluster"]
        if d.get("timer") == "elect" and d.get("role") == "head":
            if cid in live:
                bad.append(f"t={ln.time}: cluster {cid} already headed by {live[cid]}, node {nid} claims it too")
                continue
            if nid in live.values():
                bad.append(f"t={ln.time}: node {nid} heads two live clusters")
            live[cid] = nid
            members.setdefault(cid, set()).add(nid)
        elif d.get("timer") == "elect" and d.get("role") == "member":
            members.setdefault(cid, set()).add(nid)
            if int(d["head"]) == nid:
                bad.append(f"t={ln.time}: node {nid} is member and head of {cid}")
        elif d.get("timer") == "fuse":
            head = live.pop(cid, None)
            if head != nid:
                bad.append(f"t={ln.time}: node {nid} fused cluster {cid} headed by {head}")
            listed = {int(x) for x in d["members"].split(",")}
            if nid not in listed:
                bad.append(f"t={ln.time}: head {nid} missing from members of {cid}")
            extra = listed - members.get(cid, set())
            if extra:
                bad.append(f"t={ln.time}: cluster {cid} fused reports from non-members {sorted(extra)}")
    return bad


def _detected(d: Dict[str, str]) -> Set[str]:
    return set(d["detect"].split(",")) if "detect" in d else set()


def check_escalation_causality(lines: Sequence[TraceLine]) -> List[str]:
    """Gas sampling follows a chemical positive on the same node; every
    CuNotify follows a positive reading of its modality at the sender."""
    bad = []
    seen: Dict[int, Set[str]] = {}
    for ln in lines:
        d = ln.details
        if ln.actor.startswith("node:"):
            nid = int(ln.actor[5:])
            if d.get("tick") == "gas" and not d.get("stale") and "chemical" not in seen.get(nid, set()):
                bad.append(f"t={ln.time}: node {nid} gas-sampled without a prior chemical positive")
            seen.setdefault(nid, set()).update(_detected(d))
        elif ln.actor == "cc" and d.get("msg") == "CuNotify":
            sender = int(d["from"])
            if d["modality"] not in seen.get(sender, set()):
                bad.append(f"t={ln.time}: CuNotify({d['modality']}) from {sender} without a prior positive")
    return bad


def check_energy_monotone(lines: Sequence[TraceLine]) -> List[str]:
    bad = []
    last: Dict[str, float] = {}
    for ln in lines:
        if "energy" in ln.details:
            e = float(ln.details["energy"])
            if e < last.get(ln.actor, 0.0):
                bad.append(f"t={ln.time}: {ln.actor} energy decreased to {e}")
            last[ln.actor] = e
    return bad


def check_sleep_senders(lines: Sequence[TraceLine], initial_mode: str = "Sleep") -> List[str]:
    """Sleeping nodes only transmit from a guard tick that woke them."""
    bad = []
    mode: Dict[str, str] = {}
    for ln in lines:
        if not ln.actor.startswith("node:"):
            continue
        d = ln.details
        before = mode.get(ln.actor, initial_mode)
        if before == "Sleep" and "sent" in d:
            woke = d.get("tick") == "guard" and d.get("mode") == "Sleep->Active"
            if not woke or set(d["sent"].split(",")) != {"CuNotify"}:
                bad.append(f"t={ln.time}: sleeping {ln.actor} sent {d['sent']}")
        mode[ln.actor] = d.get("mode_now", before)
    return bad


def check_delivery_delay(lines: Sequence[TraceLine], propagation: float) -> List[str]:
    bad = []
    for ln in lines:
        if ln.kind == "message" and "sent_at" in ln.details:
            if ln.time + 1e-6 < float(ln.details["sent_at"]) + propagation:
                bad.append(f"t={ln.time}: {ln.actor} received a message sent at {ln.details['sent_at']}")
    return bad


def audit(lines: Sequence[TraceLine], propagation: float = 0.0, initial_mode: str = "Sleep") -> Dict[str, List[str]]:
    return {
        "ordering": check_ordering(lines),
        "cluster_heads": check_cluster_heads(lines),
        "escalation_causality": check_escalation_causality(lines),
        "energy_monotone": check_energy_monotone(lines),
        "sleep_senders": check_sleep_senders(lines, initial_mode),
        "delivery_delay": check_delivery_delay(lines, propagation),
    }
