#!/usr/bin/env python3
# pyright: ignore
"""
Desk setup for the waveform archive.

Creates a virtual environment, installs the package in editable mode and,
on request, generates a one-day synthetic corpus and runs it through the
pipeline so the data/ roots are populated.

Usage:
    python setup_dev.py [--venv .venv] [--no-physionet] [--demo]
"""

import argparse
import subprocess
import sys
import venv
from pathlib import Path

ROOT = Path(__file__).resolve().parent
DEMO_DAY = "2021-03-01"


def check_python_version():
    if sys.version_info < (3, 10):
        print(f"❌ Error: Python 3.10 or higher is required (found {sys.version.split()[0]}).")
        sys.exit(1)
    print(f"✓ Python {sys.version_info.major}.{sys.version_info.minor}.{sys.version_info.micro} detected")


def venv_bin(venv_path, tool):
    folder = "Scripts" if sys.platform == "win32" else "bin"
    return venv_path / folder / tool


def ensure_venv(venv_path):
    if venv_path.exists():
        print(f"✓ Reusing virtual environment at {venv_path}")
        return True
    print(f"\nCreating virtual environment at {venv_path}...")
    try:
        venv.create(venv_path, with_pip=True)
    except Exception as e:
        print(f"❌ Failed to create virtual environment: {e}")
        return False
    print("✓ Virtual environment created")
    return True


def run_step(title, command):
    """Run one setup command; stderr is shown only when it fails."""
    print(f"\n{title}...")
    result = subprocess.run([str(c) for c in command], cwd=ROOT, capture_output=True, text=True)
    if result.returncode != 0:
        print(f"❌ {title} failed (exit {result.returncode})")
        if result.stderr:
            print(result.stderr.strip())
        return False
    print(f"✓ {title} done")
    return True


def install(venv_path, physionet):
    pip = venv_bin(venv_path, "pip")
    if not run_step("Upgrading pip", [pip, "install", "--upgrade", "pip"]):
        print("⚠️  Warning: pip upgrade had issues, continuing")
    target = ".[physionet]" if physionet else "."
    return run_step(f"Installing wave-archive ({target})", [pip, "install", "-e", target])


def demo(venv_path):
    """Synthesize one clean day and archive it with config/pipeline.yaml."""
    cli = venv_bin(venv_path, "wave-archive")
    config = ROOT / "config" / "pipeline.yaml"
    return (run_step("Generating a synthetic day",
                     [cli, "synth", "--scenario", ROOT / "config" / "scenario_clean.yaml",
                      "--out", ROOT / "data" / "extracts", "--bed-units", ROOT / "config" / "bed_units.csv"])
            and run_step(f"Archiving {DEMO_DAY}", [cli, "--config", config, "--day", DEMO_DAY, "run-day"]))


def print_next_steps(venv_path, demo_ran):
    activate = venv_path / "Scripts" / "activate" if sys.platform == "win32" else f"source {venv_path}/bin/activate"
    print("\n" + "=" * 70)
    print("✓ Setup complete")
    print("=" * 70)
    print(f"\nActivate the environment:\n\n  {activate}\n")
    if demo_ran:
        print("Look at the archived day:")
        print("  wave-archive --config config/pipeline.yaml query")
        print("  wave-archive --config config/pipeline.yaml --json stats")
    else:
        print("Generate and archive a day:")
        print("  wave-archive synth --scenario config/scenario_clean.yaml --out data/extracts \\")
        print("      --bed-units config/bed_units.csv")
        print(f"  wave-archive --config config/pipeline.yaml --day {DEMO_DAY} run-day")
    print("\nRun the tests:")
    print("  python -m unittest discover -s tests")
    print("\n" + "=" * 70)


def main():
    parser = argparse.ArgumentParser(description="Set up a development environment for wave-archive.")
    parser.add_argument("--venv", default=".venv", help="virtual environment directory (default .venv)")
    parser.add_argument("--no-physionet", action="store_true", help="skip the optional wfdb reader")
    parser.add_argument("--demo", action="store_true", help="generate and archive one synthetic day")
    args = parser.parse_args()

    print("=" * 70)
    print("Waveform Archive - Development Setup")
    print("=" * 70)

    check_python_version()
    venv_path = ROOT / args.venv
    if not ensure_venv(venv_path) or not install(venv_path, physionet=not args.no_physionet):
        sys.exit(1)
    demo_ran = args.demo and demo(venv_path)
    if args.demo and not demo_ran:
        sys.exit(1)
    print_next_steps(venv_path, demo_ran)


if __name__ == "__main__":
    main()
