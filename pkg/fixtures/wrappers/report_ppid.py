#!/usr/bin/env python3
"""Records the parent pid as a document attribute (spawn-isolation probe)."""

import json
import os
import sys

doc = json.load(sys.stdin)
doc.setdefault("attributes", []).append(
    {"name": "wrapper_ppid", "kind": "STRING", "value": str(os.getppid())}
)
json.dump(doc, sys.stdout, ensure_ascii=False)
