"""Writes a small CodRED-format sample (bag files plus a document file)."""
import json
import random
import sys
from pathlib import Path

out = Path(sys.argv[1] if len(sys.argv) > 1 else "tests/data/codred_mini")
out.mkdir(parents=True, exist_ok=True)
rng = random.Random(5)
cue = {"broadcast_in": ["radio", "station"], "part_of": ["soviet", "republic"], "n/a": ["w1", "w2"]}
filler = ["the", "is", "a", "of", "in", "play", "w3", "pat"]

docs, bags = [], {"train": [], "dev": []}
for split, count in (("train", 24), ("dev", 12)):
    for i in range(count):
        rel = ["broadcast_in", "part_of", "n/a"][i % 3]
        h, t, bridge = f"Q{split}{i}h", f"Q{split}{i}t", f"Q{split}{i}b"
        pairs = []
        for k in range(1 + i % 2):
            titles = []
            for side, ent in (("h", h), ("t", t)):
                tokens, spans = [], []
                for s in range(2):
                    sent = [rng.choice(filler) for _ in range(3)]
                    if s == 0:
                        spans.append((ent, len(tokens) + 1, len(tokens) + 2))
                        sent.insert(1, "e" + str(1 + i % 3))
                    else:
                        spans.append((bridge, len(tokens), len(tokens) + 1))
                        sent.insert(0, "russian")
                        sent += cue[rel]
                    tokens += sent + ["."]
                entities = {}
                for eid, a, b in spans:
                    entities.setdefault(eid, []).append([a, b])
                title = f"{split}{i}_{k}_{side}"
                docs.append({"title": title, "tokens": tokens, "entities": [{"id": e, "spans": s} for e, s in entities.items()]})
                titles.append(title)
            pairs.append(titles)
        bags[split].append({"id": f"{split}{i}", "h": h, "t": t, "relations": [rel], "paths": pairs})

for split, recs in bags.items():
    (out / f"bags_{split}.jsonl").write_text("".join(json.dumps(r) + "\n" for r in recs))
(out / "docs.jsonl").write_text("".join(json.dumps(d) + "\n" for d in docs))
