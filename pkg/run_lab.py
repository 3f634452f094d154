#!/usr/bin/env python3
"""
Launcher for the Hardy-Bellman laboratory.

    python run_lab.py bellman --p 2 --f 1 --F 2
    python run_lab.py verify --only bellman --out results/
"""

import sys

from hardy_bellman.run_lab import main

if __name__ == "__main__":
    sys.exit(main())
