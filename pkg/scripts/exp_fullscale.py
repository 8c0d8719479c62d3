#!/usr/bin/env python3
"""Scale experiment: full corpus, full-size network, offline metrics."""
import sys
import time

sys.path.insert(0, "src")

from slipnet.augment import AugmentationConfig, augment_dataset
from slipnet.cli import stratified_split
from slipnet.ensemble import train_ensemble
from slipnet.evaluation import evaluate_model
from slipnet.neural import NetworkConfig, TrainConfig
from slipnet.pipeline import prepare_dataset
from slipnet.simgen import DatasetSpec, generate_dataset

EPOCHS = int(sys.argv[1]) if len(sys.argv) > 1 else 30
Z = int(sys.argv[2]) if len(sys.argv) > 2 else 5

t0 = time.time()
corpus = generate_dataset(DatasetSpec(seed=11))
print(f"[{time.time()-t0:7.1f}s] corpus {len(corpus)}", flush=True)

train_raw, test_raw = stratified_split(corpus, 0.8, seed=11)
train = augment_dataset(train_raw, AugmentationConfig.symmetry_only(5, rng_seed=21))
test = augment_dataset(test_raw, AugmentationConfig.symmetry_only(5, rng_seed=22))
print(f"[{time.time()-t0:7.1f}s] train {len(train)} test {len(test)}", flush=True)

prepared = prepare_dataset(train)
nw = sum(len(p[1]) for p in prepared)
ni = sum(int(p[1].sum()) for p in prepared)
print(f"[{time.time()-t0:7.1f}s] {nw} train windows, {ni} incipient", flush=True)

model = train_ensemble(
    prepared,
    NetworkConfig(),
    TrainConfig(epochs=EPOCHS, seed=0),
    z=Z,
    master_seed=7,
    log=lambda m: print(f"[{time.time()-t0:7.1f}s] {m}", flush=True),
)

res = evaluate_model(model, test)
print(f"[{time.time()-t0:7.1f}s] confusion {res.confusion.to_dict()}", flush=True)
print(f"latency {res.latency.to_dict()}", flush=True)
stops = [o for o in res.outcomes if o.sequence_class == "stop"]
fn = sum(1 for o in stops if o.verdict == "FN")
print(f"stop false-alarm rate: {fn}/{len(stops)}", flush=True)

res_raw = evaluate_model(model, test_raw)
print(f"raw test confusion {res_raw.confusion.to_dict()}", flush=True)
