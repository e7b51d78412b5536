// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FEDTUNE_FED_PROTOCOL_H_
#define FEDTUNE_FED_PROTOCOL_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fedtune/agg/aggregation.h"
#include "fedtune/data/dataset.h"
#include "fedtune/fed/config.h"
#include "fedtune/fed/trainer.h"
#include "fedtune/fed/wire.h"
#include "fedtune/model/model.h"

namespace fedtune::fed {

// Client side of the protocol. Holds a private model copy and reacts to
// encoded server messages:
//   idle,  GLOBAL_MODEL(r)          -> train, reply CLIENT_UPDATE(r), trained(r)
//   trained(r), GLOBAL_MODEL(r)     -> evaluate the received model on the
//                                      validation split, reply CLIENT_UPDATE(r)
//                                      with no tensors, idle
//   trained(r), GLOBAL_MODEL(r + 1) -> train round r + 1
// Rounds must be consecutive from 0; anything else is a FormatError.
class FedClient {
 public:
  enum class State { kIdle, kTrained };

  FedClient(data::ClientDataset data, Model model, FedConfig config);

  std::vector<uint8_t> Handle(std::span<const uint8_t> request);

  State state() const { return state_; }
  const data::ClientDataset& data() const { return data_; }
  const Model& model() const { return model_; }

 private:
  std::vector<uint8_t> Train(const WireMessage& m);
  std::vector<uint8_t> EvaluateOnly(const WireMessage& m);

  data::ClientDataset data_;
  Model model_;
  FedConfig config_;
  State state_ = State::kIdle;
  int64_t round_ = -1;
};

// In-process transport. Delivers a request to a client and returns its
// reply while counting bytes and simulated transfer time per client.
class Loopback {
 public:
  Loopback(size_t clients, LinkModel link);

  std::vector<uint8_t> Exchange(FedClient& client, size_t index, std::span<const uint8_t> request);

  void ResetCounters();
  uint64_t bytes_down(size_t i) const { return down_.at(i); }
  uint64_t bytes_up(size_t i) const { return up_.at(i); }
  // Sum of per-message latencies for client i since the last reset.
  double seconds(size_t i) const { return seconds_.at(i); }

 private:
  LinkModel link_;
  std::vector<uint64_t> down_, up_;
  std::vector<double> seconds_;
};

struct RoundLog {
  int64_t round = 0;
  std::vector<std::string> clients;
  agg::Weights weights;
  agg::Weights fedce_raw;  // FedCE only
  bool fedce_fallback = false;
  std::vector<ValMetrics> val;
  std::vector<double> loo_loss;  // FedCE only
  std::vector<double> update_norms;
  std::vector<uint64_t> bytes_down;
  std::vector<uint64_t> bytes_up;
  double latency_s = 0.0;  // slowest client's simulated communication time
};

struct FederationResult {
  Model model;  // initial model with the final global trainables loaded
  std::vector<RoundLog> logs;
};

// Sees each round's log and the aggregated model; returning false ends the
// federation after that round.
using RoundObserver = std::function<bool(const RoundLog&, const Model&)>;

// Builds the initial model from DeriveSeed(config.seed, "model"), then runs
// config.rounds rounds of broadcast, local training, collection and
// aggregation. Clients run on config.threads workers; results are identical
// for any thread count. With one client every method uses weight 1.
FederationResult RunFederation(std::span<const data::ClientDataset> clients, const ModelSpec& spec,
                               const FedConfig& config, const RoundObserver& observer = {});

// The model every participant starts from.
Model InitialModel(const ModelSpec& spec, const FedConfig& config);

}  // namespace fedtune::fed

#endif  // FEDTUNE_FED_PROTOCOL_H_
