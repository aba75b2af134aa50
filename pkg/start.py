#!/usr/bin/env python3
"""
Startup script for the selfish-mining lab command line
"""
import sys
import os

# Add backend directory to Python path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), 'backend'))

try:
    from cli import main
except ImportError as e:
    print(f"Import error: {e}", file=sys.stderr)
    print("Make sure all required dependencies are installed", file=sys.stderr)
    sys.exit(2)

if __name__ == "__main__":
    sys.exit(main())
