#!/usr/bin/env python3
"""Run every experiment and print a status summary."""
import subprocess
import time
from pathlib import Path

BASE_DIR = Path(__file__).parent
EXPERIMENTS_DIR = BASE_DIR / "experiments"

EXPERIMENTS = [
    ("mnist-small-clone", 45 * 60),
    ("mnist-medium-clone", 60 * 60),
    ("heterogeneous-clone", 45 * 60),
    ("similarity-matrix", 90 * 60),
    ("scale-sweeps", 180 * 60),
]


def run_experiment(name: str, timeout: int) -> tuple[str, float]:
    """Run one experiment and return its status and elapsed time."""
    experiment_dir = EXPERIMENTS_DIR / name
    if not experiment_dir.exists():
        return "SKIP", 0.0

    start = time.time()
    try:
        result = subprocess.run(
            ["uv", "run", "python", "src/main.py"],
            cwd=experiment_dir,
            capture_output=True,
            timeout=timeout,
        )
        status = "OK" if result.returncode == 0 else "FAIL"
    except subprocess.TimeoutExpired:
        status = "TIMEOUT"
    except OSError as e:
        status = f"ERROR: {e}"

    elapsed = time.time() - start
    return status, elapsed


def main():
    print("=" * 60)
    print("Experiment Results")
    print("=" * 60)

    results = []
    for name, timeout in EXPERIMENTS:
        print(f"\n[{name}] Running...", end=" ", flush=True)
        status, elapsed = run_experiment(name, timeout)
        print(f"{status} ({elapsed:.1f}s)")
        results.append((name, status, elapsed))

    print("\n" + "=" * 60)
    print("Summary Table")
    print("=" * 60)
    print(f"{'Experiment':<25} {'Status':<8} {'Time':<10}")
    print("-" * 60)

    for name, status, elapsed in results:
        print(f"{name:<25} {status:<8} {elapsed:.1f}s")

    print("=" * 60)


if __name__ == "__main__":
    main()
