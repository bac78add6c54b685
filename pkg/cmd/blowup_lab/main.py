#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
blowup-lab command entry point

Runs the CLI from a source checkout without installing the package.
"""

import os
import sys

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..", "..")))

from internal.python.blowup_lab.cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
