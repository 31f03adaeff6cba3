import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from arw import experiments

PARALLELISM = min(2, os.cpu_count() or 1)

# master seeds for the shared acceptance runs; fixed so results are
# reproducible run to run
SEQ_SEED = 20240817
D3_SEED = 91

# d=2 sequence: dims 8, 12, 16, 24, 32; budgets leave headroom over the
# ~92% certification rate so every n keeps >= 500 certified trials
SEQ_TRIALS = {5: 560, 25: 340, 65: 620, 325: 600, 1105: 590}


@pytest.fixture(scope="session")
def d2_sequence_records():
    """Shared d=2 run over n in {5, 25, 65, 325, 1105} at M = 16*ceil(sqrt n).

    Backs the concentration, nu-stabilization, diameter-scaling,
    Faber-Krahn, and consistency-gate criteria.
    """
    policy = experiments.MPolicy.parse("per_L:16")
    records = {}
    for n, trials in SEQ_TRIALS.items():
        records[n] = experiments.run_trials(
            2, n, trials, policy, SEQ_SEED, parallelism=PARALLELISM
        )
    return records


@pytest.fixture(scope="session")
def d3_records():
    """d=3 run at n=17 for the component/domain consistency gate."""
    policy = experiments.MPolicy.parse("per_L:16")
    return experiments.run_trials(3, 17, 60, policy, D3_SEED, parallelism=PARALLELISM)
