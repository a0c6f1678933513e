import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from lagr.harness import RunConfig, train  # noqa: E402
from lagr.synthetic import write_chain_dir  # noqa: E402

CRITERIA = {}

# Paired weak/strong runs on the unique-label chain corpus, shared by the
# reduction criterion and the changed-alignment metric check.
CHAIN_SEEDS = (0, 1, 2)
CHAIN = dict(dataset="cogs", d=64, enc_layers=2, heads=4, ff=256, dropout=0.1, max_len=16, batch_size=128,
             lr=1e-3, warmup=50, train_steps=1200, eval_every=40, eval_split="", k=1, sigma=0.0)


def record_criterion(number, ok, detail):
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    CRITERIA[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[number])


@pytest.fixture(scope="session")
def chain_runs(tmp_path_factory):
    """``{supervision: [RunResult per seed]}`` for weak (sigma 0, K 1) and strong mode."""
    root = tmp_path_factory.mktemp("chain")
    write_chain_dir(root, n_train=1000, n_dev=50, seed=0)
    runs = {"weak": [], "strong": []}
    for sup in runs:
        for seed in CHAIN_SEEDS:
            cfg = RunConfig(**CHAIN, data_dir=str(root), supervision=sup, seed=seed,
                            out_dir=str(root / f"{sup}-{seed}"))
            runs[sup].append(train(cfg))
    return runs


def data_root():
    """Dataset root from ``LAGR_DATA_DIR``, or None."""
    path = os.environ.get("LAGR_DATA_DIR", "")
    return Path(path) if path else None
