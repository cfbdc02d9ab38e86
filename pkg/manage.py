#!/usr/bin/env python
"""latticeq's command-line utility for batch experiments."""

import os
import sys


def main():
    """Run a latticeq subcommand."""
    os.environ.setdefault("LATTICEQ_SETTINGS_MODULE", "config.profiles.local")
    from apps.cli.main import main as run

    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
