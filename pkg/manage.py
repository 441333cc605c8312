#!/usr/bin/env python
"""Command-line utility for style-moments runs."""
import sys

from driving.cli.main import main

if __name__ == '__main__':
    sys.exit(main())
