# Copyright 2026 The Distill Authors
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

"""Writes the bundled ticket-triage fixture: dataset.jsonl and config.json.

Every scripted backend answer is fixed here, so the expected scores follow from
the answer key alone:
  zero-shot (student always answers billing)          macro-F1 = 1/6
  clustered (outage rule maps 'offline' to feature)    macro-F1 = 5/9
  after resolution (outage rule corrected)             macro-F1 = 1
"""

import json
import pathlib

HERE = pathlib.Path(__file__).resolve().parent
LABELS = ["billing", "outage", "feature"]
KEYWORD = {"billing": "invoice", "outage": "offline", "feature": "wishlist"}

TEMPLATES = {
    "billing": [
        "My {k} for March shows a charge I do not recognise.",
        "Please resend the {k} for order 1182, the PDF is blank.",
        "The {k} total does not match the quote we signed.",
        "Can you split the {k} between our two cost centres?",
        "We were billed twice, the second {k} should be voided.",
        "Our {k} still lists the old company address.",
        "Why does the latest {k} include a late fee?",
        "I need a copy of every {k} from last year for the audit.",
        "The {k} currency switched from EUR to USD without notice.",
        "Where do I download the {k} for the annual plan?",
        "The {k} is missing our VAT number.",
        "An {k} arrived for a seat we removed in June.",
        "Please correct the {k} date, it is one month off.",
        "The {k} email went to a former employee.",
        "Our finance team cannot open the {k} attachment.",
    ],
    "outage": [
        "The whole dashboard went {k} at 09:40 UTC.",
        "Our API endpoint has been {k} for twenty minutes.",
        "All agents in the Paris office see the app as {k}.",
        "The sync service is {k} and jobs are piling up.",
        "Login page reports the server is {k}.",
        "Mobile clients show {k} since the last deploy.",
        "Reports module is {k} for every user in our tenant.",
        "Webhooks stopped firing, the relay looks {k}.",
        "The status page says everything is fine but we are {k}.",
        "Search has been {k} since this morning.",
        "Every upload fails because storage is {k}.",
        "Our SSO bridge shows as {k}.",
        "The export queue went {k} overnight.",
        "Admin console is {k} again today.",
        "Notifications service has been {k} for an hour.",
    ],
    "feature": [
        "Adding dark mode to our {k} would help the night shift.",
        "For the {k}: bulk editing of tags.",
        "Please put calendar export on the {k}.",
        "Our {k} item: keyboard shortcuts for triage.",
        "One more for the {k}, custom fields on contacts.",
        "Could saved filters go on the product {k}?",
        "A {k} entry from our team: per-user time zones.",
        "Top of our {k} is an audit log export.",
        "Adding Slack threads to the {k} please.",
        "Our {k} includes a read-only guest role.",
        "Could the {k} include CSV import for users?",
        "{k} request: two-factor by hardware key.",
        "Please consider a Gantt view for the {k}.",
        "The {k} from our admins: scheduled reports.",
        "Another {k} idea: emoji reactions on notes.",
    ],
}

MISC = [
    "The dashboard feels slower than usual after lunch.",
    "Support chat took a while to connect yesterday.",
]

COUNTS = {"train": 8, "validation": 3, "test": 4}


def ticket_text(label, i):
    return TEMPLATES[label][i].format(k=KEYWORD[label])


def rule(label, i):
    return (
        f"[{label}] If the ticket mentions '{KEYWORD[label]}', assign {label}."
        f" (abstracted from example {i + 1})"
    )


def main():
    records = []
    teacher = []
    for label in LABELS:
        i = 0
        for split, n in COUNTS.items():
            for _ in range(n):
                ex_id = f"{label}-{i:02d}"
                text = ticket_text(label, i)
                records.append({"example_id": ex_id, "inputs": {"ticket": text},
                                "gold_label": label, "split": split})
                if split == "train":
                    teacher.append({
                        "user_contains": f"Ticket: {text}\n",
                        "respond": json.dumps({
                            "reasoning_trace": f"The ticket says '{KEYWORD[label]}', which is a {label} signal.",
                            "executable_rule": rule(label, i),
                        }),
                    })
                i += 1
    for j, text in enumerate(MISC):
        ex_id = f"misc-{j:02d}"
        records.append({"example_id": ex_id, "inputs": {"ticket": text},
                        "gold_label": "outage", "split": "train"})
        teacher.append({
            "user_contains": f"Ticket: {text}\n",
            "respond": json.dumps({
                "reasoning_trace": "Slowness reported by one user hints at degraded service.",
                "executable_rule": f"[misc] If a single user reports slowness, assign outage. (variant {j})",
            }),
        })

    def branch_rule(topic, keyword, label):
        return {"topic": topic, "logic": [{"condition": f"the ticket mentions '{keyword}'", "label": label}]}

    synthesizer = [
        {"user_contains": "[billing]", "respond": json.dumps(branch_rule("Billing documents", "invoice", "billing"))},
        # Deliberately wrong: the resolver has to repair this one.
        {"user_contains": "[outage]", "respond": json.dumps(branch_rule("Service availability", "offline", "feature"))},
        {"user_contains": "[feature]", "respond": json.dumps(branch_rule("Product requests", "wishlist", "feature"))},
    ]
    resolved = [
        branch_rule("Billing documents", "invoice", "billing"),
        branch_rule("Service availability", "offline", "outage"),
        branch_rule("Product requests", "wishlist", "feature"),
    ]
    resolver = [{"user_contains": "", "respond": json.dumps(resolved, indent=2)}]

    def follows(keyword, label):
        return {"system_contains": f"If the ticket mentions '{keyword}' → {label}",
                "user_contains": keyword, "respond": label}

    student = [
        follows("offline", "outage"),
        follows("offline", "feature"),
        follows("invoice", "billing"),
        follows("wishlist", "feature"),
        {"user_contains": "", "respond": "billing"},
    ]

    config = {
        "task": {
            "task_id": "ticket_triage",
            "input_fields": ["ticket"],
            "label_set": LABELS,
            "prompt_template_ids": {"extract": "extract_ticket_triage.v1"},
        },
        "dataset": "dataset.jsonl",
        "template_dir": "../../templates",
        "backends": {
            "teacher": {"backend_id": "teacher-mock", "kind": "scripted_chat", "script": teacher},
            "synthesizer": {"backend_id": "synthesizer-mock", "kind": "scripted_chat", "script": synthesizer},
            "resolver": {"backend_id": "resolver-mock", "kind": "scripted_chat", "script": resolver},
            "student": {"backend_id": "student-mock", "kind": "scripted_chat", "script": student},
            "embedder": {
                "backend_id": "embed-mock", "kind": "hash_embed", "dimension": 16, "anchor_jitter": 0.05,
                "anchors": [{"prefix": f"[{label}]", "axis": a} for a, label in enumerate(LABELS)],
            },
        },
        "clustering": {"epsilon": 0.4, "min_samples": 6},
        "resolution": {"max_rounds": 5, "min_improvement": 0.005, "n_failures": 20, "n_successes": 10},
        "eval": {"k_shots": 5, "regimes": ["zero_shot", "few_shot", "clustered", "pld"], "split": "test"},
        "limits": {"extraction_limit": None, "train_eval_cap": 1000},
        "seed": 7,
        "run_root": "runs",
    }

    (HERE / "dataset.jsonl").write_text(
        "".join(json.dumps(r, ensure_ascii=False, separators=(",", ":")) + "\n" for r in records))
    (HERE / "config.json").write_text(json.dumps(config, indent=2, ensure_ascii=False) + "\n")


if __name__ == "__main__":
    main()
