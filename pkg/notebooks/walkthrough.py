"""Walkthrough: plant a signature, boost over preconditions, read the importances.

Run with ``python3 notebooks/walkthrough.py``; takes well under a minute.
"""
import numpy as np

from ssboost.analysis import band_center_of_mass, band_importance, channel_importance
from ssboost.boost import predict_dataset, train_session
from ssboost.cli import split_session
from ssboost.core import DEFAULT_CHANNELS, Band, BoostConfig, ChannelSet
from ssboost.precondition import build_universe
from ssboost.synthgen import PlantSpec, generate_session

# A session whose class difference lives in C3/CP3 between 25 and 35 Hz.
planted = ChannelSet.from_names(["C3", "CP3"], DEFAULT_CHANNELS)
session = generate_session(PlantSpec(planted, Band(25, 35), snr=0.1, seed=1))
train, test = split_session(session)
print(f"{len(train)} training and {len(test)} test trials, {session.n_channels} channels")

# Compare the full-band baseline with boosting over the band universe.
for mode in ("PLAIN", "FB"):
    model, trace = train_session(train, build_universe(mode), BoostConfig(rng_seed=1))
    acc = np.mean(predict_dataset(model, test)[1] == test.labels)
    print(f"{mode:5s} held-out accuracy {acc:.2f}, {model.selected_k} term(s) kept, "
          f"training loss {trace.losses[0]:.3f} -> {trace.losses[-1]:.3f}")

# Where does the boosted model put its weight?
bi = band_importance(model)
print(f"band centre of mass {band_center_of_mass(bi):.1f} Hz")
for t in model.active_terms:
    print(f"  alpha {t.alpha:+.3f}  band {t.precondition.band}")

# Spatial view with the subset universe.
model, _ = train_session(train, build_universe("SB"), BoostConfig(rng_seed=1))
ci = channel_importance(model)
order = np.argsort(-ci)[:4]
print("top channels:", ", ".join(f"{DEFAULT_CHANNELS[i]} {ci[i]:.2f}" for i in order))
