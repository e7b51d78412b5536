// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtune/fed/trainer.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fedtune/eval/metrics.h"
#include "fedtune/tensor/ops.h"
#include "fedtune/tensor/optim.h"
#include "fedtune/tensor/rng.h"
#include "fedtune/tensor/tape.h"

namespace fedtune::fed {
namespace {

std::vector<int64_t> Shuffled(int64_t n, uint64_t seed) {
  std::vector<int64_t> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (int64_t i = n - 1; i > 0; --i) {
    std::swap(idx[i], idx[rng.Below(static_cast<uint64_t>(i + 1))]);
  }
  return idx;
}

void CheckGlobal(const Model& model, const ParamSet& global) {
  if (!model.params.Trainable().SameStructure(global)) {
    throw ConfigError("global parameters do not match the model's trainable set");
  }
}

}  // namespace

Scored ScoreSource(const Model& model, const data::SampleSource& source, int64_t batch_size) {
  Scored out;
  const int64_t n = source.size();
  double loss_sum = 0.0;
  int64_t correct = 0;
  for (int64_t begin = 0; begin < n; begin += batch_size) {
    std::vector<int64_t> idx;
    for (int64_t i = begin; i < std::min(n, begin + batch_size); ++i) idx.push_back(i);
    const Tensor logits =
        Predict(model, data::Gather(source, idx, model.spec.dtype)).Cast(DType::kFloat64);
    const auto v = logits.data<double>();
    const int64_t c = logits.dim(1);
    for (size_t r = 0; r < idx.size(); ++r) {
      const double* row = v.data() + r * c;
      const int y = source.label(idx[r]);
      const double mx = *std::max_element(row, row + c);
      double z = 0.0;
      for (int64_t k = 0; k < c; ++k) z += std::exp(row[k] - mx);
      loss_sum += mx + std::log(z) - row[y];
      const int pred = static_cast<int>(std::max_element(row, row + c) - row);
      correct += pred == y;
      out.scores.push_back(row[data::kLabelDE] - row[data::kLabelCN]);
      out.labels.push_back(y);
    }
  }
  if (n > 0) {
    out.loss = loss_sum / static_cast<double>(n);
    out.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  }
  return out;
}

ValMetrics Summarize(const Scored& scored) {
  ValMetrics m{scored.loss, scored.accuracy, 0.5};
  const bool has_pos = std::count(scored.labels.begin(), scored.labels.end(), 1) > 0;
  const bool has_neg = std::count(scored.labels.begin(), scored.labels.end(), 0) > 0;
  if (has_pos && has_neg) m.auc = eval::Auc(scored.scores, scored.labels);
  return m;
}

double UpdateNorm(const ParamSet& local, const ParamSet& global) {
  double s = 0.0;
  for (double d : FlattenDelta(local, global)) s += d * d;
  return std::sqrt(s);
}

std::vector<double> FlattenDelta(const ParamSet& local, const ParamSet& global) {
  if (!local.SameStructure(global)) throw ConfigError("update does not match the global structure");
  std::vector<double> a = local.Flatten();
  const std::vector<double> b = global.Flatten();
  for (size_t k = 0; k < a.size(); ++k) a[k] -= b[k];
  return a;
}

ClientUpdate LocalTrain(const data::ClientDataset& client, Model& model, const ParamSet& global,
                        const FedConfig& config, int64_t round) {
  config.Validate();
  const data::SampleSource& train = client.split(data::Split::kTrain);
  const data::SampleSource& val = client.split(data::Split::kVal);
  if (train.size() == 0) throw ConfigError("client " + client.name + " has an empty training split");
  if (val.size() == 0) throw ConfigError("client " + client.name + " has an empty validation split");
  CheckGlobal(model, global);
  model.params.AssignValues(global);

  AdamState adam = AdamState::ForParams(model.params);
  const AdamWHyper hyper{.weight_decay = config.weight_decay};
  const auto id = static_cast<uint64_t>(client.client_id);
  try {
    for (int64_t epoch = 0; epoch < config.local_epochs; ++epoch) {
      const auto order = Shuffled(
          train.size(),
          DeriveSeed(config.seed, "shuffle/epoch" + std::to_string(epoch), id, static_cast<uint64_t>(round)));
      for (size_t begin = 0; begin < order.size(); begin += static_cast<size_t>(config.batch_size)) {
        const size_t end = std::min(order.size(), begin + static_cast<size_t>(config.batch_size));
        const std::span<const int64_t> idx(order.data() + begin, end - begin);
        const std::vector<int> labels = data::GatherLabels(train, idx);
        Tape tape;
        Var logits = ModelForward(tape, model, tape.Constant(data::Gather(train, idx, model.spec.dtype)));
        Var loss = ops::CrossEntropyLogits(logits, labels);
        const ParamSet grads = tape.Backward(loss);
        if (config.optimizer == Optimizer::kSgd) {
          SgdStep(model.params, grads, config.lr);
        } else {
          AdamWStep(model.params, grads, adam, config.lr, hyper);
        }
      }
    }
  } catch (const NumericError& e) {
    throw NumericError("training diverged on client " + client.name + " in round " +
                       std::to_string(round) + ": " + e.what());
  }

  ClientUpdate update;
  update.client_id = client.client_id;
  update.round = round;
  update.trainables = model.params.Trainable();
  update.n_train = train.size();
  update.update_norm = UpdateNorm(update.trainables, global);
  if (!std::isfinite(update.update_norm)) {
    throw NumericError("non-finite update on client " + client.name + " in round " + std::to_string(round));
  }
  update.val = Summarize(ScoreSource(model, val));
  return update;
}

}  // namespace fedtune::fed
