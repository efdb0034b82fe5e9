#!/usr/bin/env python3
"""Reference implementation of the round-robin harness for the retrieval fixture.

Writes golden_manifest.csv next to plan.toml. Standard library only (tomli on Python < 3.11).
Usage: harness_oracle.py [fixtures/retrieval]
"""
import csv
import json
import math
import os
import sys
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


def load(directory):
    with open(os.path.join(directory, "plan.toml"), "rb") as f:
        plan = tomllib.load(f)
    reports = {}
    with open(os.path.join(directory, plan["reports"])) as f:
        for line in f:
            if line.strip():
                r = json.loads(line)
                reports[r["report_id"]] = r
    with open(os.path.join(directory, plan["balanced"])) as f:
        balanced = {row["report_id"]: row["class"] for row in csv.DictReader(f)}
    with open(os.path.join(directory, plan["retrieval"])) as f:
        retrieval = [l.strip() for l in f if l.strip()]
    return plan, reports, balanced, retrieval


def weight(cui, a, b, pref):
    names = set()
    for r in (a, b):
        names.update(r.get("concept_meta", {}).get(cui, {}).get("semantic_types", []))
    default = pref.get("default_weight", 1.0)
    if not names:
        return default
    table = pref.get("weights", {})
    return max(table.get(n, default) for n in names)


def contradicts(x, y):
    return {x, y} == {"present", "absent"}


def weighted(a, b, pref, beta):
    ea = {e["cui"]: e["assertion"] for e in a["elements"]}
    eb = {e["cui"]: e["assertion"] for e in b["elements"]}
    if not ea and not eb:
        return 1.0
    inter = da = db = contr = 0.0
    for cui in sorted(set(ea) | set(eb)):
        w = weight(cui, a, b, pref)
        if cui in ea and cui in eb:
            if ea[cui] == eb[cui]:
                inter += w
            elif contradicts(ea[cui], eb[cui]):
                contr += w
            else:
                da += w
                db += w
        elif cui in ea:
            da += w
        else:
            db += w
    if inter == 0.0:
        return 0.0
    return inter / (inter + beta * max(da, db) + contr)


def run(plan, reports, balanced, retrieval):
    spec = plan["plan"]
    classes = spec["classes"]
    per = spec["queries_per_class"]
    budget = spec["budget_per_class"]
    pref = plan.get("distance", {}).get("preference", {})
    beta = plan.get("distance", {}).get("beta", 1.0)
    queries = {c: sorted(i for i, k in balanced.items() if k == c)[:per] for c in classes}
    qids = {q for qs in queries.values() for q in qs}
    pool = [i for i in retrieval if i in reports and i not in qids]
    taken, got, left, rows = set(), {c: 0 for c in classes}, {c: len(queries[c]) for c in classes}, []
    for rnd in range(max(len(q) for q in queries.values())):
        for c in classes:
            if got[c] >= budget or rnd >= len(queries[c]):
                continue
            q = queries[c][rnd]
            scored = sorted(((weighted(reports[q], reports[i], pref, beta), i) for i in pool),
                            key=lambda t: (-t[0], t[1]))
            quota = math.ceil((budget - got[c]) / left[c])
            left[c] -= 1
            n = 0
            for pos, (s, i) in enumerate(scored):
                if n == quota:
                    break
                if i in taken:
                    continue
                taken.add(i)
                n += 1
                rows.append((i, c, q, rnd + 1, pos + 1, s))
            got[c] += n
    return rows


def fmt(x):
    return str(int(x)) if x == int(x) else repr(x)


def main():
    directory = sys.argv[1] if len(sys.argv) > 1 else os.path.join(os.path.dirname(__file__), "..", "retrieval")
    rows = run(*load(directory))
    with open(os.path.join(directory, "golden_manifest.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["report_id", "class", "query_id", "round", "rank", "score"])
        for i, c, q, rnd, rank, s in rows:
            w.writerow([i, c, q, rnd, rank, fmt(s)])


if __name__ == "__main__":
    main()
