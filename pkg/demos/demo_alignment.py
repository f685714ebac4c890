"""Fitting the linear map from sentence representations to language vectors.

Trains a small regularized model, mean-pools its hidden states over the
corpus, fits the alignment map two ways (ridge closed form and full-batch
gradient descent), and writes the 2-d projection CSV used for plotting.
"""

import numpy as np

from lingualchemy import (ALL_FEATURE_SETS, ClosedForm, ConstantScaling,
                          EncoderConfig, GradientDescent, align_representations,
                          collect_sentence_reps, fit_alignment, generate_corpus,
                          generate_languages, init_alchemy_model, train_loop)
from lingualchemy.alchemy import make_optimizer
from lingualchemy.alignment import export_alignment_pca
from lingualchemy.harness import make_token_batch

specs, store = generate_languages(8, 4, seed=1)
corpus = generate_corpus(specs, n_per_lang=60, n_classes=4, seed=1)
train = corpus.subset("train").examples

cfg = EncoderConfig(vocab_size=len(corpus.vocab), d_model=32, seed=1)
model = init_alchemy_model(cfg, n_outputs=4,
                           d_uriel=store.vector_dim(ALL_FEATURE_SETS),
                           feature_sets=ALL_FEATURE_SETS)
scaling = ConstantScaling(10.0)


def batches_fn(indices):
    return make_token_batch([train[i] for i in indices], corpus.vocab,
                            cfg.max_seq_len, "classification")


model, epoch_means, _ = train_loop(model, batches_fn, len(train), store,
                                   ALL_FEATURE_SETS, scaling, epochs=25,
                                   batch_size=32, lr=1e-3, seed=1)
print(f"final epoch: task loss {epoch_means[-1].l_cls:.3f}, "
      f"auxiliary loss {epoch_means[-1].l_uriel:.3f}")

batches = [batches_fn(range(i, min(i + 64, len(train))))
           for i in range(0, len(train), 64)]
data = collect_sentence_reps(model, batches, store, ALL_FEATURE_SETS)

closed = fit_alignment(data, ClosedForm())
descended = fit_alignment(data, GradientDescent(iters=6000))
print(f"closed form:      R^2 {closed.r_squared:.4f}, "
      f"residual {closed.residual_mse:.5f}")
print(f"gradient descent: R^2 {descended.r_squared:.4f}, "
      f"residual {descended.residual_mse:.5f}")
# encoder features are collinear, so weights can differ along flat
# directions even when the fits agree; compare predictions instead
pred_gap = np.abs(align_representations(closed, data.reps)
                  - align_representations(descended, data.reps)).mean()
print(f"mean prediction gap between the two fits: {pred_gap:.4f}")

aligned = align_representations(closed, data.reps)
export_alignment_pca(aligned, data.targets, data.langs, "alignment_pca.csv")
print("wrote alignment_pca.csv (kind,lang,pc1,pc2) for external plotting")
