"""Multi-view convolutional multi-label text classification toolkit.

Implements the MVC-LDA base model (multi-view convolution with
label-dependent attention pooling) and its description-regularized
variant MVC-RLDA, together with everything needed to train and judge
them at desk scale: CBOW embedding pretraining, an Adam training loop
with early stopping, tf-idf linear baselines (flat and hierarchical),
a multi-label metric suite, Hyperband hyperparameter search, a seeded
synthetic corpus generator, and a reproducible command-line pipeline.
"""

__version__ = "0.1.0"
