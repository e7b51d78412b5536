// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtune/fed/protocol.h"

#include <algorithm>
#include <utility>

#include "fedtune/common/parallel.h"
#include "fedtune/tensor/rng.h"

namespace fedtune::fed {
namespace {

WireMessage ExpectUpdate(std::span<const uint8_t> bytes, int64_t round, size_t client) {
  WireMessage m = Decode(bytes);
  if (m.kind != MessageKind::kClientUpdate) {
    throw FormatError("server expects CLIENT_UPDATE, got " + ToString(m.kind));
  }
  if (m.round != static_cast<uint32_t>(round)) {
    throw FormatError("update for round " + std::to_string(m.round) + " received in round " +
                      std::to_string(round));
  }
  if (m.client.client_id != static_cast<uint32_t>(client)) {
    throw FormatError("update from client " + std::to_string(m.client.client_id) +
                      " received on channel " + std::to_string(client));
  }
  return m;
}

ValMetrics MetricsOf(const ClientTrailer& t) { return {t.val_loss, t.val_acc, t.val_auc}; }

}  // namespace

FedClient::FedClient(data::ClientDataset data, Model model, FedConfig config)
    : data_(std::move(data)), model_(std::move(model)), config_(std::move(config)) {}

std::vector<uint8_t> FedClient::Handle(std::span<const uint8_t> request) {
  const WireMessage m = Decode(request);
  if (m.kind != MessageKind::kGlobalModel) {
    throw FormatError("client " + data_.name + " expects GLOBAL_MODEL, got " + ToString(m.kind));
  }
  if (state_ == State::kTrained && m.round == static_cast<uint32_t>(round_)) return EvaluateOnly(m);
  if (m.round != static_cast<uint32_t>(round_ + 1)) {
    throw FormatError("client " + data_.name + " expects round " + std::to_string(round_ + 1) +
                      ", got " + std::to_string(m.round));
  }
  return Train(m);
}

std::vector<uint8_t> FedClient::Train(const WireMessage& m) {
  const ClientUpdate u = LocalTrain(data_, model_, m.tensors, config_, m.round);
  round_ = m.round;
  state_ = State::kTrained;
  WireMessage reply;
  reply.kind = MessageKind::kClientUpdate;
  reply.round = m.round;
  reply.tensors = u.trainables;
  reply.client = {static_cast<uint32_t>(data_.client_id), static_cast<uint64_t>(u.n_train),
                  u.val.loss, u.val.accuracy, u.val.auc, u.update_norm};
  return Encode(reply);
}

std::vector<uint8_t> FedClient::EvaluateOnly(const WireMessage& m) {
  if (!model_.params.Trainable().SameStructure(m.tensors)) {
    throw FormatError("evaluation model does not match the trainable set of client " + data_.name);
  }
  model_.params.AssignValues(m.tensors);
  const ValMetrics v = Summarize(ScoreSource(model_, data_.split(data::Split::kVal)));
  state_ = State::kIdle;
  WireMessage reply;
  reply.kind = MessageKind::kClientUpdate;
  reply.round = m.round;
  reply.client = {static_cast<uint32_t>(data_.client_id),
                  static_cast<uint64_t>(data_.split(data::Split::kTrain).size()),
                  v.loss, v.accuracy, v.auc, 0.0};
  return Encode(reply);
}

Loopback::Loopback(size_t clients, LinkModel link)
    : link_(link), down_(clients, 0), up_(clients, 0), seconds_(clients, 0.0) {
  link_.Validate();
}

std::vector<uint8_t> Loopback::Exchange(FedClient& client, size_t index,
                                        std::span<const uint8_t> request) {
  down_.at(index) += request.size();
  seconds_[index] += SimulateLatency(request.size(), link_);
  std::vector<uint8_t> reply = client.Handle(request);
  up_[index] += reply.size();
  seconds_[index] += SimulateLatency(reply.size(), link_);
  return reply;
}

void Loopback::ResetCounters() {
  std::fill(down_.begin(), down_.end(), 0);
  std::fill(up_.begin(), up_.end(), 0);
  std::fill(seconds_.begin(), seconds_.end(), 0.0);
}

Model InitialModel(const ModelSpec& spec, const FedConfig& config) {
  return BuildModel(spec, DeriveSeed(config.seed, "model"));
}

FederationResult RunFederation(std::span<const data::ClientDataset> clients, const ModelSpec& spec,
                               const FedConfig& config, const RoundObserver& observer) {
  config.Validate();
  if (clients.empty()) throw ConfigError("federation needs at least one client");
  const size_t n = clients.size();
  for (size_t i = 0; i < n; ++i) {
    if (clients[i].client_id != static_cast<int64_t>(i)) {
      throw ConfigError("client ids must be 0..N-1 in order; client " + clients[i].name +
                        " has id " + std::to_string(clients[i].client_id));
    }
  }
  FederationResult result{InitialModel(spec, config), {}};
  std::vector<FedClient> participants;
  for (const auto& c : clients) participants.emplace_back(c, result.model, config);
  ParamSet global = result.model.params.Trainable();
  Loopback link(n, config.link);
  agg::AggregationState state{config.aggregation, 0, {}, {}};

  for (int64_t r = 0; r < config.rounds; ++r) {
    link.ResetCounters();
    WireMessage broadcast;
    broadcast.kind = MessageKind::kGlobalModel;
    broadcast.round = static_cast<uint32_t>(r);
    broadcast.tensors = global;
    const std::vector<uint8_t> down = Encode(broadcast);

    std::vector<WireMessage> replies(n);
    ParallelFor(n, config.threads, [&](size_t i) {
      replies[i] = ExpectUpdate(link.Exchange(participants[i], i, down), r, i);
      if (!replies[i].tensors.SameStructure(global)) {
        throw FormatError("update from client " + clients[i].name +
                          " does not match the global trainable set");
      }
    });

    RoundLog log;
    log.round = r;
    std::vector<ParamSet> updates;
    std::vector<int64_t> sizes;
    std::vector<double> acc;
    for (size_t i = 0; i < n; ++i) {
      log.clients.push_back(clients[i].name);
      log.val.push_back(MetricsOf(replies[i].client));
      log.update_norms.push_back(replies[i].client.update_norm);
      sizes.push_back(static_cast<int64_t>(replies[i].client.n_train));
      acc.push_back(replies[i].client.val_acc);
      updates.push_back(std::move(replies[i].tensors));
    }

    if (n == 1) {
      log.weights = {1.0};
    } else {
      switch (config.aggregation) {
        case agg::Method::kSimpleAvg:
          log.weights = agg::SimpleAvgWeights(static_cast<int64_t>(n));
          break;
        case agg::Method::kFedAvg:
          log.weights = agg::FedAvgWeights(sizes);
          break;
        case agg::Method::kRateMyLora:
          log.weights = state.prev_val_acc.empty()
                            ? agg::SimpleAvgWeights(static_cast<int64_t>(n))
                            : agg::RateMyLoraWeights(state.prev_val_acc, acc);
          break;
        case agg::Method::kFedCE: {
          const agg::Weights base = state.prev_weights.empty()
                                        ? agg::SimpleAvgWeights(static_cast<int64_t>(n))
                                        : state.prev_weights;
          const std::vector<ParamSet> loo = agg::LeaveOneOutModels(updates, base);
          log.loo_loss.assign(n, 0.0);
          ParallelFor(n, config.threads, [&](size_t i) {
            WireMessage request;
            request.kind = MessageKind::kGlobalModel;
            request.round = static_cast<uint32_t>(r);
            request.tensors = loo[i];
            const WireMessage reply = ExpectUpdate(link.Exchange(participants[i], i, Encode(request)), r, i);
            if (!reply.tensors.empty()) throw FormatError("evaluation reply must not carry tensors");
            log.loo_loss[i] = reply.client.val_loss;
          });
          std::vector<std::vector<double>> deltas;
          for (const auto& u : updates) deltas.push_back(FlattenDelta(u, global));
          const agg::FedCeResult ce = agg::FedCeWeights(deltas, log.loo_loss, state.prev_weights);
          log.weights = ce.weights;
          log.fedce_raw = ce.raw;
          log.fedce_fallback = ce.fallback;
          break;
        }
      }
    }

    global = agg::Aggregate(updates, log.weights);
    state.prev_weights = log.weights;
    state.prev_val_acc = acc;
    state.round = r + 1;
    for (size_t i = 0; i < n; ++i) {
      log.bytes_down.push_back(link.bytes_down(i));
      log.bytes_up.push_back(link.bytes_up(i));
      log.latency_s = std::max(log.latency_s, link.seconds(i));
    }
    bool go_on = true;
    if (observer) {
      Model snapshot = result.model;
      snapshot.params.AssignValues(global);
      go_on = observer(log, snapshot);
    }
    result.logs.push_back(std::move(log));
    if (!go_on) break;
  }
  result.model.params.AssignValues(global);
  return result;
}

}  // namespace fedtune::fed
