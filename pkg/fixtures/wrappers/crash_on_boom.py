#!/usr/bin/env python3
"""Identity wrapper that crashes for documents whose text contains BOOM."""

import json
import sys

raw = sys.stdin.read()
if "BOOM" in json.loads(raw).get("text", ""):
    sys.stderr.write("boom document rejected")
    sys.exit(3)
sys.stdout.write(raw)
