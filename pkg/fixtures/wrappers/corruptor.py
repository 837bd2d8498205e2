#!/usr/bin/env python3
"""Returns a document whose span runs past the text (validation bait)."""

import json
import sys

doc = json.load(sys.stdin)
doc["annotations"] = [
    {"id": doc["next_id"], "type": "broken", "spans": [[0, len(doc["text"]) + 5]], "attributes": []}
]
doc["next_id"] = doc["next_id"] + 1
json.dump(doc, sys.stdout, ensure_ascii=False)
