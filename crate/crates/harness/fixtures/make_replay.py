#!/usr/bin/env python3
"""Rebuild the bundled replay fixture.

    drivebench generate --task sadm --seed 0 --out sadm_s0.jsonl
    python3 make_replay.py sadm_s0.jsonl > sadm_s0_replay.jsonl

Even-indexed scenarios get a correct answer and odd-indexed ones a wrong or
unusable one, so a 34-scenario set scores exactly 17/34.
"""
import json
import sys

ACTIONS = [
    "accelerate",
    "decelerate",
    "maintain",
    "change lane to the left",
    "change lane to the right",
]


def correct(label, k):
    answer = json.dumps({"action": label})
    return [
        answer,
        f"Looking at the traffic around me, my answer is {answer}. Drive safe.",
        json.dumps({"action": label.upper()}),
    ][k % 3]


def wrong(label, k):
    other = ACTIONS[(ACTIONS.index(label) + 1 + k) % len(ACTIONS)]
    if other == label:
        other = ACTIONS[(ACTIONS.index(label) + 1) % len(ACTIONS)]
    return [
        json.dumps({"action": other}),
        "I would rather not decide this one.",
        '{"action": "maintain"',
        json.dumps({"action": "turn around"}),
    ][k % 4]


def main(path):
    with open(path) as f:
        rows = [json.loads(line) for line in f if line.strip()]
    for i, row in enumerate(rows):
        label = row["ground_truth"]
        response = correct(label, i // 2) if i % 2 == 0 else wrong(label, i // 2)
        print(json.dumps({"id": row["id"], "response": response}))


if __name__ == "__main__":
    main(sys.argv[1])
