#!/usr/bin/env python3
# Copyright 2026 The infolabel Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Writes the bundled fixture corpus under data/fixture_corpus/.

The corpus is synthetic but shaped like real sampled reasoning: each problem
has 8 traces, a mix of correct ones and ones that go wrong at some step. The
reference model's table is built from the traces themselves. The gold
answer gains probability with every sound step; after a faulty step the
mass moves to the wrong answer that step leads to. Step-level signals
therefore carry real information and the threshold sweep has something to
find.

Output is deterministic: same seed, same bytes.
"""

import argparse
import json
import random
from pathlib import Path

TRACES_PER_PROBLEM = 8
FALLBACK_PROB = 1e-4

PY_TEST = """import sys
src = open(sys.argv[1]).read()
ns = {}
exec(src, ns)
f = ns[%(name)r]
for args, want in %(cases)r:
    assert f(*args) == want, (args, want)
"""

SQL_FIXTURE = """CREATE TABLE customers (id INTEGER PRIMARY KEY, name TEXT, city TEXT);
CREATE TABLE orders (id INTEGER PRIMARY KEY, customer_id INTEGER, amount REAL, status TEXT);
INSERT INTO customers VALUES (1, 'Ada', 'Paris'), (2, 'Bo', 'Oslo'), (3, 'Cy', 'Paris'),
  (4, 'Di', 'Rome'), (5, 'Ed', 'Oslo');
INSERT INTO orders VALUES (1, 1, 30.0, 'paid'), (2, 1, 12.5, 'open'), (3, 2, 99.0, 'paid'),
  (4, 3, 7.0, 'paid'), (5, 4, 45.0, 'open'), (6, 5, 18.0, 'paid'), (7, 3, 60.0, 'paid');
"""


def math_problem(rng, idx):
    a, b, c = rng.randint(3, 19), rng.randint(3, 19), rng.randint(2, 40)
    gold = a * b + c
    question = f"Compute {a} * {b} + {c}."

    def steps(err_at):
        # err_at: index of the faulty step, or None.
        prod = a * b if err_at != 0 else a * b + rng.choice([-2, -1, 1, 2]) * a
        total = prod + c if err_at != 1 else prod + c + rng.choice([-10, 10])
        return (
            [
                f"First multiply {a} by {b} to get {prod}.",
                f"Then add {c} to {prod}, which gives {total}.",
                f"So the final answer is ${total}$.",
            ],
            str(total),
        )

    return {
        "id": f"math-{idx:03d}",
        "domain": "math",
        "question": question,
        "gold_answer": str(gold),
        "validator": {"kind": "numeric_equivalence"},
    }, steps, 3


def qa_problem(rng, idx):
    facts = [
        ("Which planet is known as the red planet?", "Mars", "Venus",
         ["Rust-colored iron oxide covers this planet's surface.",
          "That planet is the fourth from the Sun."]),
        ("What is the chemical symbol of gold?", "Au", "Ag",
         ["The symbol comes from the Latin word aurum.",
          "Latin abbreviations give two-letter symbols."]),
        ("Which ocean is the largest?", "Pacific", "Atlantic",
         ["The largest ocean spans from Asia to the Americas.",
          "It covers about a third of the Earth's surface."]),
        ("Who wrote the play Hamlet?", "Shakespeare", "Marlowe",
         ["Hamlet is an Elizabethan tragedy from around 1600.",
          "It is the longest play by the Bard of Avon."]),
    ]
    question, gold, wrong, support = facts[idx]

    def steps(err_at):
        s = list(support)
        answer = gold
        if err_at is not None:
            s[err_at] = f"I recall that the answer is associated with {wrong}."
            answer = wrong
        return s + [f"The answer is ${answer}$."], answer

    return {
        "id": f"qa-{idx:03d}",
        "domain": "qa",
        "question": question,
        "gold_answer": gold,
        "validator": {"kind": "normalized_exact"},
    }, steps, 3


SQL_TASKS = [
    ("List the names of customers who live in Paris.",
     "SELECT name FROM customers WHERE city = 'Paris'",
     "SELECT c.name FROM customers AS c WHERE c.city='Paris'",
     "SELECT name FROM customers WHERE city = 'Oslo'"),
    ("Total amount of paid orders.",
     "SELECT SUM(amount) FROM orders WHERE status = 'paid'",
     "SELECT sum(o.amount) FROM orders o WHERE o.status='paid'",
     "SELECT SUM(amount) FROM orders"),
    ("Number of orders per customer id, ordered by customer id.",
     "SELECT customer_id, COUNT(*) FROM orders GROUP BY customer_id ORDER BY customer_id",
     "SELECT customer_id, count(id) FROM orders GROUP BY 1 ORDER BY 1",
     "SELECT customer_id, COUNT(*) FROM orders WHERE status = 'paid' GROUP BY customer_id ORDER BY customer_id"),
    ("Names of customers with at least one open order.",
     "SELECT DISTINCT c.name FROM customers c JOIN orders o ON o.customer_id = c.id WHERE o.status = 'open'",
     "SELECT name FROM customers WHERE id IN (SELECT customer_id FROM orders WHERE status = 'open')",
     "SELECT DISTINCT c.name FROM customers c JOIN orders o ON o.customer_id = c.id"),
    ("The largest single order amount.",
     "SELECT MAX(amount) FROM orders",
     "SELECT amount FROM orders ORDER BY amount DESC LIMIT 1",
     "SELECT MIN(amount) FROM orders"),
]


def sql_problem(rng, idx):
    question, gold, alt, wrong = SQL_TASKS[idx]

    def steps(err_at):
        query = alt
        plan = ["Identify the tables and columns the question needs.",
                "Apply the filter and aggregation the question asks for."]
        if err_at is not None:
            plan[err_at] = "The filter in the question can be ignored here."
            query = wrong
        return plan + [f"```sql\n{query}\n```"], query

    return {
        "id": f"sql-{idx:03d}",
        "domain": "sql",
        "question": question,
        "gold_answer": gold,
        "validator": {
            "kind": "sql_execution",
            "fixture": "shop.sql",
            "gold_query": gold,
        },
    }, steps, 3


PY_TASKS = [
    ("Write add(a, b) that returns the sum of two integers.", "add",
     [((1, 2), 3), ((-4, 4), 0)],
     "def add(a, b):\n    return a + b",
     "def add(a, b):\n    return a - b"),
    ("Write is_even(n) that returns True for even integers.", "is_even",
     [((2,), True), ((7,), False), ((0,), True)],
     "def is_even(n):\n    return n % 2 == 0",
     "def is_even(n):\n    return n % 2 == 1"),
    ("Write rev(s) that returns the string reversed.", "rev",
     [(("abc",), "cba"), (("",), "")],
     "def rev(s):\n    return s[::-1]",
     "def rev(s):\n    return s"),
]


def python_problem(rng, idx):
    question, name, cases, good, bad = PY_TASKS[idx]

    def steps(err_at):
        plan = ["Read the specification and pick the core operation.",
                "Handle the edge cases with the same expression."]
        code = good
        if err_at is not None:
            plan[err_at] = "The opposite operation should work just as well."
            code = bad
        return plan + [f"```python\n{code}\n```"], code

    return {
        "id": f"py-{idx:03d}",
        "domain": "python",
        "question": question,
        "gold_answer": good,
        "validator": {
            "kind": "external_command",
            "command": "python3 test_solution.py {candidate}",
            "timeout_s": 10,
            "files": {"test_solution.py": PY_TEST % {"name": name, "cases": cases}},
        },
    }, steps, 3


def context_of(question, steps):
    return "\n".join([question] + steps)


def build(seed):
    rng = random.Random(seed)
    problems = []
    traces = []
    table = {}

    makers = (
        [(math_problem, i) for i in range(12)]
        + [(sql_problem, i) for i in range(5)]
        + [(qa_problem, i) for i in range(4)]
        + [(python_problem, i) for i in range(3)]
    )
    for maker, idx in makers:
        problem, make_steps, n_steps = maker(rng, idx)
        pid = problem["id"]
        gold = problem["gold_answer"]
        # Trace 0 is always sound; the others go wrong with probability 0.6.
        # A few problems are special-cased to exercise the filters.
        all_correct = pid in ("math-011", "qa-003")
        all_wrong = pid == "math-010"
        plans = []
        for t in range(TRACES_PER_PROBLEM):
            if all_correct:
                err = None
            elif all_wrong:
                err = rng.randrange(n_steps - 1)
            elif t == 0:
                err = None
            else:
                err = rng.randrange(n_steps - 1) if rng.random() < 0.6 else None
            plans.append(err)
        if not all_correct and not all_wrong and all(p is None for p in plans):
            plans[-1] = 0

        generated = []
        for t, err in enumerate(plans):
            steps, answer = make_steps(err)
            generated.append((steps, answer, err))

        # Candidate answers: every generated final answer plus gold.
        candidates = []
        for _, answer, _ in generated:
            if answer not in candidates:
                candidates.append(answer)
        if gold not in candidates:
            candidates.append(gold)
        correct_answer = next((a for _, a, e in generated if e is None), gold)

        for t, (steps, answer, err) in enumerate(generated):
            for i in range(len(steps) + 1):
                key = context_of(problem["question"], steps[:i])
                sound = i if err is None or i <= err else err
                faulty = err is not None and i > err
                probs = {}
                for cand in candidates:
                    if cand == correct_answer or cand == gold:
                        p = 0.05 * (2.2 ** sound) if not faulty else 0.02
                    elif faulty and cand == answer:
                        p = 0.08 * (2.2 ** (i - err))
                    else:
                        p = 0.03
                    probs[cand] = min(p, 0.6)
                total = sum(probs.values())
                if total > 0.95:
                    probs = {k: v * 0.95 / total for k, v in probs.items()}
                probs = {k: round(v, 6) for k, v in probs.items()}
                if key in table and table[key] != probs:
                    # Shared prefix (e.g. the bare question): keep the first.
                    continue
                table[key] = probs

            raw = " [STEP] ".join(steps)
            traces.append({"problem_id": pid, "trace_id": f"{pid}-t{t}", "raw_text": raw})
        problems.append(problem)

    # Edge cases the pipeline must survive: an unparseable trace (no answer
    # span), a delimiter-only trace and a reserved marker inside a step.
    traces[1 * TRACES_PER_PROBLEM + 5]["raw_text"] = (
        "I think it is around a hundred. [STEP] Not sure how to finish.")
    traces[2 * TRACES_PER_PROBLEM + 6]["raw_text"] = " [STEP]  [STEP] "
    t = traces[3 * TRACES_PER_PROBLEM + 7]
    t["raw_text"] = t["raw_text"].replace("First", "<|s_req|> First", 1)

    return problems, traces, {"fallback_prob": FALLBACK_PROB, "table": table}


CONFIG = """# Bundled fixture corpus run configuration.
problems = "problems.jsonl"
traces = "traces.jsonl"
backend = "reference:reference_model.json"
out_dir = "out"
cache_dir = "cache"
seed = 7
method = "mcnig"
aggregation = "max"
reference = "step0"
k_subsample = 8
concurrency_limit = 4
grid_points = 256
eval_k = 8
eval_scorer = "label-product"
"""


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data" / "fixture_corpus"))
    ap.add_argument("--seed", type=int, default=20260101)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    problems, traces, model = build(args.seed)
    with open(out / "problems.jsonl", "w") as f:
        for p in problems:
            f.write(json.dumps(p, sort_keys=True) + "\n")
    with open(out / "traces.jsonl", "w") as f:
        for t in traces:
            f.write(json.dumps(t, sort_keys=True) + "\n")
    with open(out / "reference_model.json", "w") as f:
        json.dump(model, f, sort_keys=True, indent=1)
        f.write("\n")
    (out / "shop.sql").write_text(SQL_FIXTURE)
    (out / "corpus.toml").write_text(CONFIG)
    print(f"wrote {len(problems)} problems, {len(traces)} traces, "
          f"{len(model['table'])} table contexts to {out}")


if __name__ == "__main__":
    main()
