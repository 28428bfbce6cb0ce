#!/usr/bin/env python3
#
# Copyright (c) 2026 mhpatchcore contributors
#
# MIT License - See LICENSE file accompanying this package.
#

"""mhpatchcore CLI"""

import sys
from mhpatchcore.cli import run

# allow running with "python3 -m", or as a standalone script
if __name__ == "__main__":
  sys.exit(run())
