"""
Master runner for the sgglab laboratory.

Usage:
    python run_lab.py gen --out data/vg --profile vg --train 200 --test 100 --seed 1
    python run_lab.py train --data data/vg --out runs/baseline --loss baseline
    python run_lab.py eval --data data/vg --out runs/baseline --checkpoint runs/baseline/checkpoint.json
    python run_lab.py stats --data data/vg --split test
    python run_lab.py report runs/baseline/metrics.csv runs/normalized/metrics.csv
"""

import sys

from sgglab.cli import main

if __name__ == "__main__":
    sys.exit(main())
