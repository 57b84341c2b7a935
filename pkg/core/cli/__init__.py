"""Command-line surface.

Modules:
    main      -- ``pnc`` console script (argparse subcommands, exit-code mapping)
    selftest  -- gradient checks and oracle comparisons on toy instances
"""

from cli.selftest import CheckResult, run_selftest

__all__ = ["CheckResult", "run_selftest"]
