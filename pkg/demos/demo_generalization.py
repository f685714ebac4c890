"""The headline experiment: does typology regularization help languages the
classifier never trained on?

Trains the same model twice from the same seed, once plain and once with
the auxiliary loss at 10x, then compares per-language test accuracy. Uses
one seed and a reduced corpus so it finishes in about a minute; the full
5-seed protocol lives in the harness (`lingualchemy sweep-scale`) and the
acceptance suite.
"""

from dataclasses import replace

from lingualchemy.harness import ExperimentConfig, run_experiment

cfg = ExperimentConfig()  # the default benchmark

plain = run_experiment(replace(cfg, factor=0.0), seed=2, persist=False)
regularized = run_experiment(replace(cfg, factor=10.0), seed=2, persist=False)

print("language   split    plain   10x     delta")
for (lang, split, base), (_, _, ours) in zip(plain.rows, regularized.rows):
    print(f"{lang}      {split:7s}  {base:.3f}   {ours:.3f}   {ours - base:+.3f}")

for tag in ("seen_mean", "unseen_mean"):
    print(f"{tag:12s} plain {plain.aggregates[tag]:.3f}  "
          f"10x {regularized.aggregates[tag]:.3f}  "
          f"delta {regularized.aggregates[tag] - plain.aggregates[tag]:+.3f}")
