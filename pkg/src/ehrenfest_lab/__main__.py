#!/usr/bin/env python3
"""
Main entry point for the ehrenfest_lab package.
"""

from .cli import main

if __name__ == "__main__":
    main()
