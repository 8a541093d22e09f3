#!/usr/bin/env python3
"""
Main entry point for DER co-optimization hub
"""

from dercoopt_hub.cli.interface import main

if __name__ == "__main__":
    main()
