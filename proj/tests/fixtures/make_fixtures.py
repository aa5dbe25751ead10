#!/usr/bin/env python3
"""Regenerates the rule-matrix trajectory fixtures.

Each file violates exactly one pruning rule (or none, for the ok_* files),
so the validator's report must name that rule id and nothing else. Field
order matches the canonical serialization.
"""

import json
import os

HERE = os.path.join(os.path.dirname(os.path.abspath(__file__)), "trajectories")


def call(action, **fields):
    if action == "commit":
        return 'commit(raw="%s", summary="%s")' % (fields["raw"], fields["summary"])
    if action in ("expand", "fold"):
        return "%s(step_id=%d)" % (action, fields["step_id"])
    if action == "answer":
        return 'answer("%s")' % fields["text"]
    if action == "search":
        return 'search(query="%s")' % fields["query"]
    if action == "visit":
        return 'visit(url="%s", goal="%s")' % (fields["url"], fields["goal"])
    raise ValueError(action)


def event(action, observation=None, **fields):
    obj = {"action": action}
    obj.update(fields)
    if observation is not None:
        obj["observation"] = observation
    obj["emitted_text"] = call(action, **fields)
    return obj


def commit(raw, summary):
    return event("commit", raw=raw, summary=summary)


def expand(step_id):
    return event("expand", step_id=step_id)


def fold(step_id):
    return event("fold", step_id=step_id)


def answer(text):
    return event("answer", text=text)


def write(name, events, mode="reasoning", judge_correct=True):
    header = {
        "version": "1",
        "mode": mode,
        "question": "fixture question for " + name,
        "judge": {"correct": judge_correct, "judge_name": "fixture-judge"},
        "metadata": {"id": name},
    }
    lines = [json.dumps(header, separators=(",", ":"))]
    lines += [json.dumps(e, separators=(",", ":")) for e in events]
    path = os.path.join(HERE, name + ".jsonl")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")
    print("wrote", path)


def tokens(prefix, n):
    return " ".join("%s%d" % (prefix, i) for i in range(n))


def main():
    os.makedirs(HERE, exist_ok=True)

    # --- compliant ---------------------------------------------------------
    write("ok_compliant", [
        commit("first derive the product 3*4=12 step by step", "product is 12"),
        expand(1),
        commit("using the expanded details, add 30 to get 42", "total is 42"),
        fold(1),
        answer("42"),
    ])

    # exactly 0.90 similarity between consecutive commits: LCS 9, max len 10
    base = tokens("t", 10)
    nine = tokens("t", 9) + " zz"
    write("ok_boundary_lcs", [
        commit(base, "first summary"),
        commit(nine, "second summary"),
        expand(1),
        commit("combine both partial results now", "combined"),
        fold(1),
        answer("ok"),
    ])

    # --- R1: structural replay failures ------------------------------------
    write("r1_unknown_step", [
        commit("compute the first partial sum", "partial sum known"),
        expand(5),
        commit("continue with a different derivation", "second step"),
        fold(1),
        answer("x"),
    ])

    write("r1_already_active", [
        commit("derive the base quantity", "base known"),
        expand(1),
        commit("use the base to get the next value", "next value"),
        expand(1),
        fold(1),
        answer("x"),
    ])

    # third simultaneous expand violates the strict max-2 policy
    write("r1_policy_limit", [
        commit("first independent derivation", "s1"),
        commit("second unrelated computation", "s2"),
        commit("third separate piece of work", "s3"),
        expand(1),
        commit("use the first expanded details", "s4"),
        expand(2),
        commit("use the second expanded details", "s5"),
        expand(3),
        fold(1),
        answer("x"),
    ])

    # --- R2: lifecycle ------------------------------------------------------
    write("r2_no_fold", [
        commit("derive the base quantity", "base known"),
        expand(1),
        commit("use the expanded details here", "used them"),
        answer("x"),
    ])

    write("r2_judge_wrong", [
        commit("derive the base quantity", "base known"),
        expand(1),
        commit("use the expanded details here", "used them"),
        fold(1),
        answer("x"),
    ], judge_correct=False)

    write("r2_no_answer", [
        commit("derive the base quantity", "base known"),
        expand(1),
        commit("use the expanded details here", "used them"),
        fold(1),
    ])

    # --- R3: fold symmetry --------------------------------------------------
    write("r3_fold_archived", [
        commit("derive the base quantity", "base known"),
        fold(1),
        expand(1),
        commit("use the expanded details here", "used them"),
        fold(1),
        answer("x"),
    ])

    # --- R4: density --------------------------------------------------------
    write("r4_expand_heavy", [
        commit("the only committed derivation", "single step"),
        expand(1),
        fold(1),
        expand(1),
        fold(1),
        answer("x"),
    ])

    write("r4_double", [
        commit("first committed derivation", "s1"),
        expand(1),
        fold(1),
        commit("second committed derivation", "s2"),
        expand(2),
        fold(2),
        expand(1),
        fold(1),
        answer("x"),
    ])

    # --- R5: jitter ---------------------------------------------------------
    write("r5_adjacent_expand", [
        commit("first committed derivation", "s1"),
        commit("second committed derivation", "s2"),
        expand(1),
        expand(2),
        fold(1),
        fold(2),
        answer("x"),
    ])

    write("r5_same_step_research", [
        event("search", observation="a relevant snippet", query="find the fact"),
        commit("Thought: look it up\\nAction: search\\nObservation: snippet",
               "found the fact"),
        expand(1),
        fold(1),
        answer("x"),
    ], mode="research")

    # --- R6: commit similarity ----------------------------------------------
    dup = "the sum of the first three numbers is twelve exactly"
    write("r6_duplicate_commits", [
        commit(dup, "first summary"),
        commit(dup, "second summary"),
        expand(1),
        fold(1),
        answer("x"),
    ])

    # exactly 0.91: LCS 91 over max len 100
    hundred = tokens("t", 100)
    ninety_one = tokens("t", 91) + " " + tokens("z", 9)
    write("r6_91_percent", [
        commit(hundred, "first summary"),
        commit(ninety_one, "second summary"),
        expand(1),
        fold(1),
        answer("x"),
    ])


if __name__ == "__main__":
    main()
