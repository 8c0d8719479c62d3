#!/usr/bin/env python3
"""Ablation direction check: plain vs advanced augmentation on shifted data."""
import sys
import time

sys.path.insert(0, "src")

from slipnet.cli import stratified_split
from slipnet.evaluation import ablation_run, build_ablation_train_sets, make_shifted_test
from slipnet.neural import NetworkConfig, TrainConfig
from slipnet.simgen import DatasetSpec, generate_dataset

COMPACT = NetworkConfig(
    input_dim=720, encoder_hidden=256, encoder_out=96, gru_hidden=96,
    estimator_hidden=(128, 64),
)

EPOCHS = int(sys.argv[1]) if len(sys.argv) > 1 else 20
FACTOR = int(sys.argv[2]) if len(sys.argv) > 2 else 5

t0 = time.time()
corpus = generate_dataset(DatasetSpec(seed=11))
train_raw, _ = stratified_split(corpus, 0.8, seed=11)
# dedicated shifted evaluation corpus with enough stop events to see the
# false-alarm signal
eval_corpus = generate_dataset(DatasetSpec(slip_count=45, stop_count=15, seed=303))
print(f"[{time.time()-t0:6.1f}s] corpora ready", flush=True)

train_cfg = TrainConfig(epochs=EPOCHS, seed=0)
wins = 0
for seed in (1, 2, 3):
    plain, advanced = build_ablation_train_sets(train_raw, expansion_factor=FACTOR, seed=seed)
    shifted = make_shifted_test(eval_corpus, seed=seed)
    run = ablation_run(plain, advanced, shifted, COMPACT, train_cfg, z=3, seed=seed)
    wins += run.delta_misclassified > 0
    print(
        f"[{time.time()-t0:6.1f}s] seed {seed}: plain {run.plain.to_dict()} | "
        f"augmented {run.augmented.to_dict()} | delta {run.delta_misclassified}",
        flush=True,
    )
print(f"wins {wins}/3", flush=True)
