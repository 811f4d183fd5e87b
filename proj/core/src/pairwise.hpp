#pragma once

#include "shillbench/recommender.hpp"
#include "shillbench/rng.hpp"

namespace shillbench::detail {

double softplus(double x);
double sigmoid(double x);

/// Ego embeddings initialised N(0, 0.1/sqrt(d)) and zero biases.
EmbeddingModel init_embedding_model(const InteractionDataset& train, int dim, Rng& rng);

/// Mini-batch BPR shared by BPR-MF (no propagation) and LightGCN.
EmbeddingModel train_pairwise(const InteractionDataset& train, const TrainConfig& cfg, int n_layers, TrainLog* log);

}  // namespace shillbench::detail
