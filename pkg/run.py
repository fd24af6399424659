#!/usr/bin/env python3
"""
Fractional Volterra Toolkit Launcher

This script runs the command-line interface from a source checkout.
"""

import sys
import os

# Add src to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "src"))


def main():
    from frac_volterra.cli import main as cli_main

    sys.exit(cli_main())


if __name__ == "__main__":
    main()
