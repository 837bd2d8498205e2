#!/usr/bin/env python3
"""Uppercases the ``type`` attribute value of every token annotation."""

import json
import sys

doc = json.load(sys.stdin)
for annotation in doc.get("annotations", []):
    if annotation.get("type") != "token":
        continue
    for attr in annotation.get("attributes", []):
        if attr.get("name") == "type" and attr.get("kind") == "STRING":
            attr["value"] = attr["value"].upper()
json.dump(doc, sys.stdout, ensure_ascii=False)
