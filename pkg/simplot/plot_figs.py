#!/usr/bin/env python3
"""Thin launcher; the real entry point is simplot.figures:main."""

import sys

from simplot.figures import main

if __name__ == "__main__":
    sys.exit(main())
