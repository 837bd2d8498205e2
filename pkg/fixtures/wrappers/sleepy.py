#!/usr/bin/env python3
"""Sleepy wrapper: stalls long enough to trip any reasonable timeout."""

import sys
import time

seconds = float(sys.argv[1]) if len(sys.argv) > 1 else 30.0
sys.stdin.read()
time.sleep(seconds)
sys.stdout.write("too late")
