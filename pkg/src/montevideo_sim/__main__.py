"""
Entry point for running montevideo-sim as a module.

Example:
    python -m montevideo_sim zurek --config zurek.json
"""

from .cli import main

if __name__ == "__main__":
    main()
