// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FEDTUNE_FED_TRAINER_H_
#define FEDTUNE_FED_TRAINER_H_

#include <cstdint>
#include <vector>

#include "fedtune/data/dataset.h"
#include "fedtune/fed/config.h"
#include "fedtune/model/model.h"

namespace fedtune::fed {

constexpr int64_t kEvalBatch = 32;

struct ValMetrics {
  double loss = 0.0;
  double accuracy = 0.0;
  double auc = 0.5;  // 0.5 when the split holds a single class
  bool operator==(const ValMetrics&) const = default;
};

// Per-sample scores (logit margin DE minus CN) with labels and summary stats.
struct Scored {
  std::vector<double> scores;
  std::vector<int> labels;
  double loss = 0.0;  // mean cross-entropy
  double accuracy = 0.0;
};

Scored ScoreSource(const Model& model, const data::SampleSource& source,
                   int64_t batch_size = kEvalBatch);
ValMetrics Summarize(const Scored& scored);

struct ClientUpdate {
  int64_t client_id = 0;
  int64_t round = 0;
  ParamSet trainables;  // post-training values
  int64_t n_train = 0;
  ValMetrics val;
  double update_norm = 0.0;  // ||theta_local - theta_global||_2
};

// Loads `global` into the trainable entries of `model` (the client's private
// copy), runs local_epochs of minibatch training with a fresh optimizer and
// returns the result. Minibatch order comes from
// DeriveSeed(seed, "shuffle/epoch<e>", client_id, round); the last batch may
// be short. Throws NumericError with client and round context on divergence.
ClientUpdate LocalTrain(const data::ClientDataset& client, Model& model, const ParamSet& global,
                        const FedConfig& config, int64_t round);

double UpdateNorm(const ParamSet& local, const ParamSet& global);
// local - global, flattened in entry order, in double.
std::vector<double> FlattenDelta(const ParamSet& local, const ParamSet& global);

}  // namespace fedtune::fed

#endif  // FEDTUNE_FED_TRAINER_H_
