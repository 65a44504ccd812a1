"""brownpack: latent-space identity packing under Brownian-like dynamics.

Identity particles live in a latent space and interact through their
images under a differentiable embedding map: soft contact repulsion
pushes embedding pairs apart until they clear a separation threshold,
a quadratic pull-back keeps latents near a center, and Gaussian noise
keeps the ensemble from locking up. A second, per-identity stage spreads
variations in latent space while tethering their embeddings to the
reference identity.
"""

from .analysis import Histogram, contacts_per_identity, histogram, leakage_minimum, rho_threshold, trace_summary
from .config import ExperimentConfig, parse_config
from .container import read_container, save_covariates, save_embeddings, save_ensemble, save_trace, save_variations, write_container
from .covariates import CovariateBasis, LabeledLatents, fit_direction, sample_mixing_weights
from .dynamics import (
    IdentityEnsemble,
    RunTrace,
    VariationSet,
    adaptive_timestep,
    disco_init,
    disperse_identity,
    init_variations,
    langevin_init,
    langevin_step,
    run_dispersion,
    run_langevin,
)
from .errors import BrownpackError
from .geometry import angular_distance, angular_distance_grad, latent_identity_distance, pairwise_distances
from .losses import (
    LossResult,
    TrainingSetEmbeddings,
    dispersion_latent_granular,
    embedding_tether_loss,
    granular_embedding_loss,
    latent_pullback_loss,
    total_dispersion_loss,
    total_langevin_loss,
    training_repulsion_loss,
)
from .models import EmbeddingModel, ModelSpec, build_model
from .params import HyperParams
from .rng import draw_noise, stream
from .sampling import ContactGraph, build_contact_graph, erode, reject_sample

__version__ = "0.1.0"
