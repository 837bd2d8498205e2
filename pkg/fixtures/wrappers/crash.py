#!/usr/bin/env python3
"""Crash wrapper: consumes input, complains on stderr, exits 3."""

import sys

sys.stdin.read()
sys.stderr.write("bad lexicon")
sys.exit(3)
