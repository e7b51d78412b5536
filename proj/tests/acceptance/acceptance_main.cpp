// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails. Pass criterion numbers as arguments
// to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fedtune/agg/aggregation.h"
#include "fedtune/backbone/encoder.h"
#include "fedtune/baselines/baselines.h"
#include "fedtune/cli/commands.h"
#include "fedtune/cli/config.h"
#include "fedtune/common/parallel.h"
#include "fedtune/common/text_io.h"
#include "fedtune/data/cohort.h"
#include "fedtune/data/dataset.h"
#include "fedtune/data/synth.h"
#include "fedtune/eval/metrics.h"
#include "fedtune/fed/protocol.h"
#include "fedtune/fed/trainer.h"
#include "fedtune/fed/wire.h"
#include "fedtune/heads/head.h"
#include "fedtune/lora/lora.h"
#include "fedtune/model/model.h"
#include "fedtune/tensor/ops.h"
#include "fedtune/tensor/rng.h"
#include "fixtures.h"
#include "test_util.h"

namespace fedtune::acceptance {
namespace {

namespace fs = std::filesystem;
using data::Split;
using testing::RandomTensor;

// Collects named checks; a criterion passes when every check does.
class Checks {
 public:
  void Expect(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  void Note(const std::string& text) { notes_.push_back(text); }
  bool ok() const { return failures_.empty(); }
  std::string Summary() const {
    std::string s;
    for (const auto& n : notes_) s += (s.empty() ? "" : "; ") + n;
    for (const auto& f : failures_) s += (s.empty() ? "FAILED: " : "; FAILED: ") + f;
    return s;
  }

 private:
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
};

std::string Fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, v);
  return buf;
}

std::vector<int64_t> Iota(int64_t n) {
  std::vector<int64_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

std::shared_ptr<const data::InMemorySource> Subset(const data::InMemorySource& src,
                                                   const std::vector<int64_t>& idx,
                                                   const std::string& prefix) {
  return std::make_shared<data::InMemorySource>(prefix, data::Gather(src, idx, src.samples().dtype()),
                                                data::GatherLabels(src, idx));
}

// Splits [0, n) into `parts` non-empty random subsets.
std::vector<std::vector<int64_t>> RandomPartition(int64_t n, int parts, Rng& rng) {
  std::vector<int64_t> order = Iota(n);
  for (int64_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.Below(i + 1)]);
  std::vector<int64_t> cuts;
  std::set<int64_t> chosen;
  while (static_cast<int>(chosen.size()) < parts - 1) chosen.insert(1 + rng.Below(n - 1));
  cuts.assign(chosen.begin(), chosen.end());
  cuts.insert(cuts.begin(), 0);
  cuts.push_back(n);
  std::vector<std::vector<int64_t>> out;
  for (int p = 0; p < parts; ++p) out.emplace_back(order.begin() + cuts[p], order.begin() + cuts[p + 1]);
  return out;
}

// ---------------------------------------------------------------------------
// 1. Parameter counts.

Checks ParameterCounts() {
  Checks c;
  auto head_count = [](heads::HeadKind kind) {
    heads::HeadConfig h;
    h.kind = kind;
    const int64_t closed = heads::HeadParamCount(h);
    const int64_t built = heads::BuildHead(h, 1).NumElements(true);
    return closed == built ? closed : -1;
  };
  const int64_t linear = head_count(heads::HeadKind::kLinear);
  const int64_t convs = head_count(heads::HeadKind::kConvS);
  const int64_t convl = head_count(heads::HeadKind::kConvL);
  c.Expect(linear == 770, "Linear head " + std::to_string(linear) + " != 770");
  c.Expect(convs >= 1'700'000 && convs <= 1'720'000, "ConvS " + std::to_string(convs) + " outside [1.70M, 1.72M]");
  c.Expect(convl >= 4'190'000 && convl <= 4'210'000, "ConvL " + std::to_string(convl) + " outside [4.19M, 4.21M]");
  c.Note("Linear " + std::to_string(linear) + ", ConvS " + std::to_string(convs) + ", ConvL " + std::to_string(convl));

  const backbone::EncoderConfig enc = backbone::EncoderConfig::TestPreset();
  const std::pair<lora::BlockSelector, int64_t> expected[] = {
      {lora::BlockSelector::All(), 294'912},
      {lora::BlockSelector::First6(), 147'456},
      {lora::BlockSelector::Last6(), 147'456}};
  for (const auto& [selector, want] : expected) {
    backbone::FrozenEncoder e = backbone::BuildEncoder(enc);
    lora::InjectLora(e, selector, 8);
    const int64_t injected = e.params.NumElements(true);
    const int64_t closed = lora::LoraParamCount(selector, enc, 8);
    ModelSpec spec;
    spec.mode = InputMode::kVolumes;
    spec.encoder = enc;
    spec.head.kind = heads::HeadKind::kConvS;
    spec.regime = Regime::Lora(selector, 8);
    const int64_t model_total = TrainableParamCount(spec);
    c.Expect(injected == want && closed == want && model_total == want + convs,
             "LoRA-" + selector.Name() + " injected " + std::to_string(injected) + ", closed form " +
                 std::to_string(closed) + ", expected " + std::to_string(want));
    c.Note("LoRA-" + selector.Name() + " " + std::to_string(injected));
  }
  return c;
}

// ---------------------------------------------------------------------------
// 2. Gradient checks (float64, reduced shapes).

constexpr double kGradTol = 1e-4;

Checks GradientChecks() {
  Checks c;
  double worst = 0.0;
  auto check = [&](const std::string& name, double err) {
    worst = std::max(worst, err);
    c.Expect(err < kGradTol, name + " rel. err " + Fmt("%.2e", err));
  };
  using V = const std::vector<Var>&;
  for (auto pad : {ops::Padding::kSame, ops::Padding::kValid}) {
    check("Conv3d", testing::GradCheck([pad](Tape&, V v) { return ops::Conv3d(v[0], v[1], v[2], pad); },
                                       {RandomTensor({10, 2, 4, 4, 4}, 1), RandomTensor({3, 2, 3, 3, 3}, 2),
                                        RandomTensor({3}, 3)},
                                       {true, true, true}));
  }
  check("Linear", testing::GradCheck([](Tape&, V v) { return ops::Linear(v[0], v[1], v[2]); },
                                     {RandomTensor({2, 3, 5}, 4), RandomTensor({5, 4}, 5), RandomTensor({4}, 6)},
                                     {true, true, true}));
  check("MatMul", testing::GradCheck([](Tape&, V v) { return ops::MatMul(v[0], v[1]); },
                                     {RandomTensor({3, 5}, 7), RandomTensor({5, 2}, 8)}, {true, true}));
  check("Add/Scale", testing::GradCheck([](Tape&, V v) { return ops::Scale(ops::Add(v[0], v[1]), -1.5); },
                                        {RandomTensor({2, 3, 4}, 9), RandomTensor({3, 4}, 10)}, {true, true}));
  check("Sum", testing::GradCheck([](Tape&, V v) { return ops::Sum(v[0]); }, {RandomTensor({3, 4}, 11)}, {true}));
  check("Mean", testing::GradCheck([](Tape&, V v) { return ops::Mean(v[0]); }, {RandomTensor({3, 4}, 12)}, {true}));
  Tensor away = RandomTensor({4, 6}, 13);
  for (int64_t i = 0; i < away.numel(); ++i) {
    if (std::abs(away.item(i)) < 0.05) away.set_item(i, 0.3);
  }
  check("Relu", testing::GradCheck([](Tape&, V v) { return ops::Relu(v[0]); }, {away}, {true}));
  check("Gelu", testing::GradCheck([](Tape&, V v) { return ops::Gelu(v[0]); }, {away}, {true}));
  check("Softmax", testing::GradCheck([](Tape&, V v) { return ops::Softmax(v[0]); }, {away}, {true}));
  check("LayerNorm", testing::GradCheck([](Tape&, V v) { return ops::LayerNorm(v[0], v[1], v[2]); },
                                        {RandomTensor({3, 8}, 14, DType::kFloat64, 2.0), RandomTensor({8}, 15),
                                         RandomTensor({8}, 16)},
                                        {true, true, true}));
  check("GlobalAvgPool3d", testing::GradCheck([](Tape&, V v) { return ops::GlobalAvgPool3d(v[0]); },
                                              {RandomTensor({2, 3, 2, 3, 2}, 17)}, {true}));
  const std::vector<int> labels = {1, 0, 1};
  check("CrossEntropyLogits",
        testing::GradCheck([&](Tape&, V v) { return ops::CrossEntropyLogits(v[0], labels); },
                           {RandomTensor({3, 2}, 18)}, {true}));
  check("Reshape/TransposeLast2",
        testing::GradCheck([](Tape&, V v) { return ops::TransposeLast2(ops::Reshape(v[0], {2, 3, 4})); },
                           {RandomTensor({6, 4}, 19)}, {true}));
  check("Patchify", testing::GradCheck([](Tape&, V v) { return ops::Patchify(v[0], 2); },
                                       {RandomTensor({2, 2, 4, 4, 4}, 20)}, {true}));
  check("MultiHeadAttention",
        testing::GradCheck([](Tape&, V v) { return ops::MultiHeadAttention(v[0], v[1], v[2], 2); },
                           {RandomTensor({2, 5, 6}, 21), RandomTensor({2, 5, 6}, 22), RandomTensor({2, 5, 6}, 23)},
                           {true, true, true}));

  // Full models: logits and the training loss, gradients w.r.t. every
  // trainable tensor.
  auto model_check = [&](const std::string& name, const ModelSpec& spec, ParamSet params, uint64_t seed) {
    const Tensor x = RandomTensor(spec.InputShape(3), seed);
    const std::vector<int> y = {1, 0, 1};
    // The tape reads parameters in place, so each model outlives its tape.
    std::deque<Model> alive;
    auto forward = [&](Tape& tape, const ParamSet& p) {
      alive.push_back(Model{spec, p});
      return ModelForward(tape, alive.back(), tape.Constant(x));
    };
    // Stacked ReLUs leave some pre-activations within 1e-5 of zero; a 1e-6
    // probe keeps the central difference on one side of every kink.
    constexpr double kEps = 1e-6;
    check(name + " logits", testing::ParamGradCheck(forward, params, kEps));
    check(name + " loss", testing::ParamGradCheck(
                              [&](Tape& tape, const ParamSet& p) { return ops::CrossEntropyLogits(forward(tape, p), y); },
                              params, kEps));
  };
  for (auto kind : {heads::HeadKind::kLinear, heads::HeadKind::kConvS, heads::HeadKind::kConvL}) {
    ModelSpec spec = testing::TinyFeatureSpec(kind);
    if (kind == heads::HeadKind::kConvL) spec.head.channels = {5, 4, 4, 3};
    model_check(heads::ToString(kind) + " head", spec, BuildModel(spec, 31).params, 32);
  }
  // LoRA path: adapters in every block of a tiny encoder. B starts at zero,
  // which would zero dL/dA, so both factors get random values.
  ModelSpec lora_spec = testing::TinyVolumeSpec(Regime::Lora(lora::BlockSelector::All(), 2));
  ParamSet lora_params = BuildModel(lora_spec, 41).params;
  uint64_t s = 42;
  for (const auto& e : lora_params) {
    if (lora::IsLoraName(e.name)) lora_params.at(e.name) = RandomTensor(e.tensor.shape(), s++, DType::kFloat64, 0.3);
  }
  model_check("LoRA-All encoder", lora_spec, lora_params, 43);
  c.Note("27 checks, worst rel. err " + Fmt("%.2e", worst));
  return c;
}

// ---------------------------------------------------------------------------
// 3. FedAvg with one full-batch SGD step equals the centralized step.

Checks FedAvgCentralized() {
  Checks c;
  const auto geometry = testing::TinyGeometry();
  data::HeterogeneityConfig het = testing::SmallHet(5);
  het.outlier_client = "";
  const auto pool_client = data::GenerateClient(testing::Cohort("Pool", 20, 16, 6, 6, 1, 1), het, geometry);
  const auto train = data::Materialize(pool_client.split(Split::kTrain), DType::kFloat64);
  const auto val = data::Materialize(pool_client.split(Split::kVal), DType::kFloat64);
  const auto test = data::Materialize(pool_client.split(Split::kTest), DType::kFloat64);
  Rng rng(2024);
  double worst = 0.0;
  int trials = 0;
  for (auto kind : {heads::HeadKind::kLinear, heads::HeadKind::kConvS}) {
    const ModelSpec spec = testing::TinyFeatureSpec(kind);
    for (int t = 0; t < 5; ++t, ++trials) {
      const auto parts = RandomPartition(train->size(), 3, rng);
      const auto val_parts = RandomPartition(val->size(), 3, rng);
      std::vector<data::ClientDataset> clients;
      for (int i = 0; i < 3; ++i) {
        data::ClientDataset d;
        d.client_id = i;
        d.name = "P" + std::to_string(i);
        d.splits[0] = Subset(*train, parts[i], d.name + "/train");
        d.splits[1] = Subset(*val, val_parts[i], d.name + "/val");
        d.splits[2] = test;
        clients.push_back(std::move(d));
      }
      fed::FedConfig cfg;
      cfg.rounds = 1;
      cfg.local_epochs = 1;
      cfg.batch_size = train->size();
      cfg.optimizer = fed::Optimizer::kSgd;
      cfg.lr = 0.05;
      cfg.aggregation = agg::Method::kFedAvg;
      cfg.seed = 100 + t;
      const auto fed = fed::RunFederation(clients, spec, cfg);

      // Centralized oracle: gradient of the mean loss over all pooled
      // samples, straight from the tape, then one SGD step.
      Model central = fed::InitialModel(spec, cfg);
      Tape tape;
      const Var logits = ModelForward(tape, central, tape.Constant(train->samples()));
      const ParamSet grads = tape.Backward(ops::CrossEntropyLogits(logits, train->labels()));
      double scale = 0.0;
      for (const auto& g : grads) {
        Tensor& w = central.params.at(g.name);
        for (int64_t k = 0; k < w.numel(); ++k) w.set_item(k, w.item(k) - cfg.lr * g.tensor.item(k));
      }
      for (const auto& e : central.params.Trainable()) {
        const Tensor& got = fed.model.params.at(e.name);
        worst = std::max(worst, got.MaxAbsDiff(e.tensor));
        for (int64_t k = 0; k < e.tensor.numel(); ++k) scale = std::max(scale, std::abs(e.tensor.item(k)));
      }
      c.Expect(scale > 0.0, "degenerate model");
    }
  }
  c.Expect(worst < 1e-10, "max |federated - centralized| = " + Fmt("%.3e", worst));
  c.Note(std::to_string(trials) + " random 3-client partitions (Linear, ConvS), max abs diff " + Fmt("%.2e", worst));
  return c;
}

// ---------------------------------------------------------------------------
// 4. Federated NCC equals centralized NCC.

Checks FederatedNcc() {
  Checks c;
  const auto geometry = data::SynthGeometry::Features(16, 2);
  data::HeterogeneityConfig het;
  het.outlier_client = "";
  het.seed = 77;
  const auto pool_client = data::GenerateClient(testing::Cohort("Pool", 45, 38, 1, 1, 1, 1), het, geometry);
  const auto train = data::Materialize(pool_client.split(Split::kTrain), DType::kFloat32);
  ModelSpec spec;
  spec.head.kind = heads::HeadKind::kLinear;
  spec.head.in_channels = 16;
  spec.head.spatial = 2;
  const baselines::FeatureExtractor g = baselines::PooledFeatures(BuildModel(spec, 0));

  // Oracle: centralized NCC, the per-class means of g over the pooled set,
  // accumulated in long double.
  const Tensor z = g.fn(train->samples());
  std::vector<long double> de(16, 0.0L), cn(16, 0.0L);
  int64_t n_de = 0, n_cn = 0;
  for (int64_t i = 0; i < train->size(); ++i) {
    const bool is_de = train->label(i) == data::kLabelDE;
    (is_de ? n_de : n_cn) += 1;
    for (int64_t ch = 0; ch < 16; ++ch) (is_de ? de : cn)[ch] += z.item(i * 16 + ch);
  }
  Rng rng(99);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const int parts = 2 + static_cast<int>(rng.Below(5));
    const auto split = RandomPartition(train->size(), parts, rng);
    std::vector<data::ClientDataset> clients;
    for (int i = 0; i < parts; ++i) {
      data::ClientDataset d;
      d.client_id = i;
      d.name = "N" + std::to_string(i);
      d.splits[0] = Subset(*train, split[i], d.name + "/train");
      d.splits[1] = d.splits[2] = d.splits[0];
      clients.push_back(std::move(d));
    }
    const auto r = baselines::RunFederatedNcc(clients, g);
    for (int64_t ch = 0; ch < 16; ++ch) {
      worst = std::max(worst, std::abs(r.centroids.de[ch] - static_cast<double>(de[ch] / n_de)));
      worst = std::max(worst, std::abs(r.centroids.cn[ch] - static_cast<double>(cn[ch] / n_cn)));
    }
    c.Expect(std::all_of(r.bytes_up.begin(), r.bytes_up.end(), [&](uint64_t b) { return b == r.bytes_up[0]; }),
             "NCC message size varies with client size");
  }
  c.Expect(worst < 1e-9, "centroid disagreement " + Fmt("%.3e", worst));

  // Message size at the real feature width for very different counts.
  baselines::NccStats small{std::vector<double>(384, 1.0), std::vector<double>(384, 2.0), 3, 1};
  baselines::NccStats large{std::vector<double>(384, 5e6), std::vector<double>(384, 7e6), 4'000'000, 9'000'000};
  const size_t a = baselines::EncodeNccStats(small).size();
  const size_t b = baselines::EncodeNccStats(large).size();
  c.Expect(a == b, "NCC message " + std::to_string(a) + " vs " + std::to_string(b) + " bytes");
  c.Note("20 partitions, max centroid diff " + Fmt("%.2e", worst) + "; message " + std::to_string(a) +
         " bytes at d=384 for 4 and 1.3e7 samples");
  return c;
}

// ---------------------------------------------------------------------------
// 5. LoRA algebra at the default encoder width.

Checks LoraAlgebra() {
  Checks c;
  const backbone::EncoderConfig enc = backbone::EncoderConfig::TestPreset();
  const backbone::FrozenEncoder base = backbone::BuildEncoder(enc);
  const Tensor batch = SeededInit({2, 1, enc.input_size, enc.input_size, enc.input_size},
                                  InitScheme::Gaussian(1.0), 5, DType::kFloat32);
  const Tensor reference = backbone::Encode(base, batch);
  double worst = 0.0, ref_scale = 0.0;
  for (int64_t i = 0; i < reference.numel(); ++i) ref_scale = std::max(ref_scale, std::abs(reference.item(i)));
  uint64_t seed = 60;
  for (const auto& selector : {lora::BlockSelector::All(), lora::BlockSelector::First6(), lora::BlockSelector::Last6()}) {
    backbone::FrozenEncoder adapted = base;
    lora::InjectLora(adapted, selector, 8);
    c.Expect(backbone::Encode(adapted, batch).BitEqual(reference),
             "LoRA-" + selector.Name() + " changes the output at injection");
    for (const auto& e : adapted.params) {
      if (lora::IsLoraName(e.name) && e.name.ends_with("lora_B")) {
        adapted.params.at(e.name) = SeededInit(e.tensor.shape(), InitScheme::Gaussian(0.02), seed++, DType::kFloat32);
      }
    }
    const Tensor unmerged = backbone::Encode(adapted, batch);
    lora::MergeLora(adapted);
    const Tensor merged = backbone::Encode(adapted, batch);
    const double diff = merged.MaxAbsDiff(unmerged);
    worst = std::max(worst, diff);
    c.Expect(diff < 1e-5, "LoRA-" + selector.Name() + " merged vs unmerged " + Fmt("%.3e", diff));
    c.Expect(unmerged.MaxAbsDiff(reference) > 1e-3, "LoRA-" + selector.Name() + " trained adapters have no effect");
  }
  c.Note("bit-identical at injection for All/First6/Last6; merged vs unmerged max diff " + Fmt("%.2e", worst) +
         " (outputs up to " + Fmt("%.1f", ref_scale) + ")");
  return c;
}

// ---------------------------------------------------------------------------
// 6. Aggregation weights.

Checks AggregationWeights() {
  Checks c;
  constexpr int kFuzz = 10'000;
  Rng rng(6);
  auto valid = [](const std::vector<double>& w) {
    double s = 0.0;
    for (double x : w) {
      if (!(x >= 0.0) || !std::isfinite(x)) return false;
      s += x;
    }
    return std::abs(s - 1.0) <= 1e-12;
  };
  auto random_simplex = [&](int64_t n) {
    std::vector<double> w(n);
    double s = 0.0;
    for (auto& x : w) s += (x = rng.Uniform() < 0.1 ? 0.0 : rng.Uniform());
    if (s == 0.0) return std::vector<double>(n, 1.0 / n);
    for (auto& x : w) x /= s;
    return w;
  };
  std::map<std::string, int> bad;
  double worst_bound = -1.0;
  for (int t = 0; t < kFuzz; ++t) {
    const int64_t n = 1 + rng.Below(12);
    if (!valid(agg::SimpleAvgWeights(n))) ++bad["SimpleAvg"];

    std::vector<int64_t> sizes(n);
    const int64_t magnitude = int64_t{1} << rng.Below(40);
    for (auto& s : sizes) s = rng.Uniform() < 0.2 ? 0 : static_cast<int64_t>(rng.Below(magnitude) + 1);
    if (std::all_of(sizes.begin(), sizes.end(), [](int64_t s) { return s == 0; })) sizes[0] = 1;
    if (!valid(agg::FedAvgWeights(sizes))) ++bad["FedAvg"];

    std::vector<double> prev_acc(n), acc(n);
    for (int64_t i = 0; i < n; ++i) {
      prev_acc[i] = rng.Uniform();
      acc[i] = rng.Uniform() < 0.3 ? prev_acc[i] : rng.Uniform();
    }
    if (!valid(agg::RateMyLoraWeights(prev_acc, acc))) ++bad["RateMyLoRA"];

    const int64_t m = std::max<int64_t>(2, n);
    const int64_t dim = 1 + rng.Below(20);
    std::vector<std::vector<double>> deltas(m, std::vector<double>(dim));
    const std::vector<double> common = [&] {
      std::vector<double> v(dim);
      for (auto& x : v) x = rng.Gaussian();
      return v;
    }();
    const double mix = rng.Uniform(-1.0, 2.0);
    for (auto& d : deltas) {
      for (int64_t k = 0; k < dim; ++k) d[k] = mix * common[k] + rng.Gaussian() * std::pow(10.0, rng.Uniform(-6, 3));
      if (rng.Uniform() < 0.05) std::fill(d.begin(), d.end(), 0.0);
    }
    std::vector<double> loo(m);
    for (auto& e : loo) e = rng.Uniform() < 0.05 ? 0.0 : rng.Uniform(0.0, 5.0);
    const std::vector<double> prev = rng.Uniform() < 0.2 ? std::vector<double>{} : random_simplex(m);
    const auto fc = agg::FedCeWeights(deltas, loo, prev);
    if (!valid(fc.weights)) ++bad["FedCE"];
    const std::vector<double> base = prev.empty() ? std::vector<double>(m, 1.0 / m) : prev;
    double step = 0.0, gap = 0.0;
    for (int64_t i = 0; i < m; ++i) {
      step = std::max(step, std::abs(fc.weights[i] - base[i]));
      gap = std::max(gap, std::abs(fc.raw[i] - base[i]));
    }
    // Slack of a few ulp for the rounding of (prev + raw) / 2.
    if (!fc.fallback && step > 0.5 * gap + 1e-15) ++bad["FedCE smoothing bound"];
    if (fc.fallback && step != 0.0) ++bad["FedCE fallback keeps previous weights"];
    if (!fc.fallback) worst_bound = std::max(worst_bound, step - 0.5 * gap);
  }
  for (const auto& [name, count] : bad) c.Expect(count == 0, name + ": " + std::to_string(count) + " violations");

  const auto cohorts = data::BuiltinFederation();
  std::vector<int64_t> sizes;
  for (const auto& co : cohorts) sizes.push_back(co.counts(Split::kTrain).total());
  const auto w = agg::FedAvgWeights(sizes);
  for (size_t i = 0; i < cohorts.size(); ++i) {
    if (cohorts[i].name == "NACC") c.Expect(w[i] == 1945.0 / 3642.0, "w_NACC = " + Fmt("%.17g", w[i]));
    if (cohorts[i].name == "ADNI") c.Expect(w[i] == 756.0 / 3642.0, "w_ADNI = " + Fmt("%.17g", w[i]));
  }
  c.Expect(std::accumulate(sizes.begin(), sizes.end(), int64_t{0}) == 3642, "builtin train total != 3642");
  c.Note("10^4 fuzzed inputs x 4 strategies; w_NACC = 1945/3642, w_ADNI = 756/3642 exactly; max(step - gap/2) = " +
         Fmt("%.1e", worst_bound));
  return c;
}

// ---------------------------------------------------------------------------
// 7. Scheduling determinism and wire integrity.

std::map<std::string, std::string> ReadTree(const std::string& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = ReadTextFile(e.path().string());
  }
  return files;
}

bool WireRoundTrip(const ParamSet& trainables, Checks& c, const std::string& what) {
  bool ok = true;
  for (auto kind : {fed::MessageKind::kGlobalModel, fed::MessageKind::kClientUpdate}) {
    fed::WireMessage m;
    m.kind = kind;
    m.round = 7;
    m.tensors = trainables;
    m.client = {3, 1945, 0.25, 0.75, 0.8125, 1.5};
    const auto bytes = fed::Encode(m);
    const auto back = fed::Decode(bytes);
    ok = ok && bytes.size() == fed::EncodedSize(kind, trainables) && back.tensors.BitEqual(trainables) &&
         back.round == 7 && fed::Encode(back) == bytes;
    if (kind == fed::MessageKind::kClientUpdate) ok = ok && back.client == m.client;
  }
  c.Expect(ok, "wire round trip " + what);
  return ok;
}

Checks Determinism() {
  Checks c;
  const std::string root = (fs::temp_directory_path() / "fedtune_acceptance_c7").string();
  fs::remove_all(root);
  const std::string config = R"({
    "seed": 11,
    "federation": {"source": "cohorts", "feature_channels": 8, "feature_spatial": 4,
      "cohorts": [
        {"name": "S1", "train": [9, 7], "val": [3, 3], "test": [5, 5]},
        {"name": "S2", "train": [4, 11], "val": [3, 3], "test": [4, 6]},
        {"name": "S3", "train": [12, 5], "val": [3, 3], "test": [6, 4]},
        {"name": "S4", "train": [6, 6], "val": [3, 3], "test": [5, 5]}]},
    "heterogeneity": {"outlier_client": "S3"},
    "model": {"head": ["Linear", "ConvS"], "dtype": "float32"},
    "training": {"rounds": 3, "batch_size": 4, "lr": 0.003},
    "aggregation": ["SimpleAvg", "FedAvg", "FedCE", "RateMyLoRA"],
    "baselines": {"ncc": true, "centralized": true},
    "evaluation": {"bootstraps": 500}
  })";
  cli::ExperimentConfig cfg = cli::ParseExperimentConfig(config);
  std::ostringstream log;
  cfg.training.threads = 1;
  cli::CmdRun(cfg, root + "/serial", log);
  cfg.training.threads = 4;
  cli::CmdRun(cfg, root + "/parallel", log);
  auto serial = ReadTree(root + "/serial");
  auto parallel = ReadTree(root + "/parallel");
  serial.erase("config.json");
  parallel.erase("config.json");
  c.Expect(serial.size() == 11 * 4, "expected 44 output files, got " + std::to_string(serial.size()));
  c.Expect(serial == parallel, "serial and parallel outputs differ");

  // LoRA federation over a tiny encoder, serial vs parallel.
  const auto clients = data::SyntheticFederation(testing::SmallHet(3), data::SynthGeometry::Volumes(16))
                           .Clients(testing::SmallCohorts());
  const ModelSpec lora_spec = testing::TinyVolumeSpec(Regime::Lora(lora::BlockSelector::All(), 2), DType::kFloat32);
  fed::FedConfig fc = testing::SmallFedConfig(agg::Method::kFedCE);
  fc.rounds = 2;
  fc.threads = 1;
  const auto a = fed::RunFederation(clients, lora_spec, fc);
  fc.threads = 3;
  const auto b = fed::RunFederation(clients, lora_spec, fc);
  c.Expect(a.model.params.BitEqual(b.model.params), "LoRA federation differs between 1 and 3 threads");

  // Wire round trips for every regime at full width, both dtypes.
  int trips = 0;
  const std::vector<Regime> regimes = {Regime::Full(), Regime::ClsOnly(), Regime::Lora(lora::BlockSelector::All()),
                                       Regime::Lora(lora::BlockSelector::First6()),
                                       Regime::Lora(lora::BlockSelector::Last6())};
  for (const auto& regime : regimes) {
    for (auto head : {heads::HeadKind::kLinear, heads::HeadKind::kConvS}) {
      ModelSpec spec;
      spec.mode = InputMode::kVolumes;
      spec.encoder = backbone::EncoderConfig::TestPreset();
      spec.head.kind = head;
      spec.regime = regime;
      spec.dtype = DType::kFloat32;
      ParamSet t = ExtractTrainable(BuildModel(spec, 8));
      // Nonzero LoRA B factors so every byte pattern is exercised.
      for (const auto& e : t) {
        if (e.name.ends_with("lora_B")) t.at(e.name) = SeededInit(e.tensor.shape(), InitScheme::Gaussian(1.0), 9, DType::kFloat32);
      }
      WireRoundTrip(t, c, regime.Name() + "/" + heads::ToString(head));
      ++trips;
    }
  }
  for (auto head : {heads::HeadKind::kLinear, heads::HeadKind::kConvS, heads::HeadKind::kConvL}) {
    const ModelSpec spec = testing::TinyFeatureSpec(head, DType::kFloat64);
    WireRoundTrip(ExtractTrainable(BuildModel(spec, 3)), c, "float64 " + heads::ToString(head));
    ++trips;
  }
  baselines::NccStats stats{{0.1, -2.5, 3e300}, {-0.0, 1e-310, 7.0}, 5, 9};
  const auto ncc_bytes = baselines::EncodeNccStats(stats, 4);
  c.Expect(baselines::DecodeNccStats(ncc_bytes) == stats, "NCC_STATS round trip");
  c.Note("11 runs x 4 files byte-identical at 1 and 4 threads; LoRA federation bit-identical; " +
         std::to_string(trips * 2 + 1) + " wire round trips bit-exact");
  fs::remove_all(root);
  return c;
}

// ---------------------------------------------------------------------------
// 8. End-to-end benchmark on the six-cohort separable preset.

double PooledTestAuc(const std::vector<std::vector<double>>& scores, std::span<const data::ClientDataset> clients) {
  std::vector<double> s;
  std::vector<int> y;
  for (size_t i = 0; i < clients.size(); ++i) {
    const auto& test = clients[i].split(Split::kTest);
    s.insert(s.end(), scores[i].begin(), scores[i].end());
    for (int64_t k = 0; k < test.size(); ++k) y.push_back(test.label(k));
  }
  return eval::Auc(s, y);
}

Checks Benchmark() {
  Checks c;
  data::HeterogeneityConfig het;  // separable preset: s = 1
  het.seed = DeriveSeed(8, "data");
  const auto clients =
      data::SyntheticFederation(het, data::SynthGeometry::Features()).Clients(data::BuiltinFederation());
  ModelSpec spec;  // frozen-encoder feature maps, ConvS head
  spec.head.kind = heads::HeadKind::kConvS;
  fed::FedConfig cfg;
  cfg.rounds = 10;
  cfg.aggregation = agg::Method::kFedAvg;
  cfg.seed = DeriveSeed(8, "run/ConvS_ClsOnly_FedAvg");
  cfg.threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

  const int64_t workers = cfg.threads;
  auto score_all = [&](const std::function<std::vector<double>(const data::SampleSource&)>& fn) {
    std::vector<std::vector<double>> scores(clients.size());
    ParallelFor(static_cast<int64_t>(clients.size()), static_cast<int>(workers),
                [&](int64_t i) { scores[i] = fn(clients[i].split(Split::kTest)); });
    return scores;
  };
  double trained_auc = 0.0;
  int64_t reached = -1;
  std::string trace;
  const auto t0 = std::chrono::steady_clock::now();
  fed::RunFederation(clients, spec, cfg, [&](const fed::RoundLog& log, const Model& m) {
    trained_auc = PooledTestAuc(score_all([&](const data::SampleSource& s) { return fed::ScoreSource(m, s).scores; }),
                                clients);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    trace += (trace.empty() ? "" : ", ") + std::string("R") + std::to_string(log.round + 1) + " " +
             Fmt("%.4f", trained_auc) + " @" + Fmt("%.0fs", secs);
    std::fprintf(stderr, "  [8] round %lld pooled test AUC %.4f (%.0f s)\n", static_cast<long long>(log.round + 1),
                 trained_auc, secs);
    if (trained_auc >= 0.95) {
      reached = log.round + 1;
      return false;
    }
    return true;
  });
  c.Expect(reached > 0, "pooled AUC " + Fmt("%.4f", trained_auc) + " < 0.95 after 10 rounds");

  const baselines::FeatureExtractor g = baselines::PooledFeatures(fed::InitialModel(spec, cfg));
  const auto ncc = baselines::RunFederatedNcc(clients, g, static_cast<int>(workers));
  const double ncc_auc = PooledTestAuc(
      score_all([&](const data::SampleSource& s) { return baselines::NccScores(s, g, ncc.centroids); }), clients);
  c.Expect(ncc_auc > 0.5 && ncc_auc < trained_auc,
           "NCC AUC " + Fmt("%.4f", ncc_auc) + " not in (0.5, " + Fmt("%.4f", trained_auc) + ")");

  // One-client federation against direct local training from the same
  // initial model, two rounds.
  std::vector<data::ClientDataset> single = {clients[1]};
  single[0].client_id = 0;
  fed::FedConfig one = cfg;
  one.rounds = 2;
  one.threads = 1;
  const auto federated = fed::RunFederation(single, spec, one);
  Model local = fed::InitialModel(spec, one);
  ParamSet global = ExtractTrainable(local);
  for (int64_t r = 0; r < one.rounds; ++r) global = fed::LocalTrain(single[0], local, global, one, r).trainables;
  c.Expect(federated.model.params.Trainable().BitEqual(global), "single-client federation differs from local training");
  c.Note("ConvS+FedAvg pooled test AUC " + Fmt("%.4f", trained_auc) + " at round " + std::to_string(reached) +
         " [" + trace + "]; NCC " + Fmt("%.4f", ncc_auc) + "; single-client (" + single[0].name +
         ", 2 rounds) bit-identical; " + std::to_string(workers) + " worker thread(s)");
  return c;
}

// ---------------------------------------------------------------------------
// 9. Metric correctness.

double BruteForceAuc(const std::vector<double>& s, const std::vector<int>& y) {
  int64_t twice = 0, pairs = 0;
  for (size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      ++pairs;
      twice += s[i] > s[j] ? 2 : (s[i] == s[j] ? 1 : 0);
    }
  }
  return static_cast<double>(twice) / (2.0 * static_cast<double>(pairs));
}

Checks Metrics() {
  Checks c;
  Rng rng(9);
  int mismatches = 0;
  for (int t = 0; t < 1000; ++t) {
    const int64_t n = 2 + rng.Below(40);
    std::vector<double> s(n);
    std::vector<int> y(n);
    const bool coarse = rng.Uniform() < 0.5;  // many ties
    for (int64_t i = 0; i < n; ++i) {
      y[i] = i < 2 ? static_cast<int>(i) : static_cast<int>(rng.Below(2));
      s[i] = coarse ? static_cast<double>(rng.Below(4)) : rng.Gaussian() + 0.7 * y[i];
    }
    if (eval::Auc(s, y) != BruteForceAuc(s, y)) ++mismatches;
  }
  c.Expect(mismatches == 0, std::to_string(mismatches) + "/1000 AUC mismatches");

  auto sample = [&](int64_t n, Rng& r) {
    std::pair<std::vector<double>, std::vector<int>> out;
    for (int64_t i = 0; i < n; ++i) {
      const int y = i % 2;
      out.first.push_back(r.Gaussian() + 1.0 * y);
      out.second.push_back(y);
    }
    return out;
  };
  int contained = 0;
  for (int t = 0; t < 100; ++t) {
    Rng r(DeriveSeed(9, "ci", t));
    const auto [s, y] = sample(40 + static_cast<int64_t>(r.Below(160)), r);
    const double auc = eval::Auc(s, y);
    const auto [lo, hi] = eval::BootstrapCi(s, y, eval::kDefaultBootstraps, eval::kDefaultLevel, DeriveSeed(9, "boot", t));
    if (lo <= auc && auc <= hi) ++contained;
  }
  c.Expect(contained == 100, "CI contained the estimate in " + std::to_string(contained) + "/100 trials");

  double w_small = 0.0, w_large = 0.0;
  for (int t = 0; t < 5; ++t) {
    Rng r1(DeriveSeed(9, "width/n", t)), r4(DeriveSeed(9, "width/4n", t));
    const auto [s1, y1] = sample(300, r1);
    const auto [s4, y4] = sample(1200, r4);
    const auto ci1 = eval::BootstrapCi(s1, y1, 2000, 0.95, t);
    const auto ci4 = eval::BootstrapCi(s4, y4, 2000, 0.95, t);
    w_small += ci1.second - ci1.first;
    w_large += ci4.second - ci4.first;
  }
  const double ratio = w_large / w_small;
  c.Expect(ratio >= 0.4 && ratio <= 0.6, "width ratio " + Fmt("%.3f", ratio) + " outside 0.5 +- 20%");
  c.Note("1000/1000 exact; CI contains estimate " + std::to_string(contained) + "/100; width ratio n->4n " +
         Fmt("%.3f", ratio) + " (mean of 5 pairs)");
  return c;
}

struct Criterion {
  int id;
  std::string title;
  double budget_s;
  std::function<Checks()> run;
};

int Main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "parameter counts", 60, ParameterCounts},
      {2, "gradient checks", 120, GradientChecks},
      {3, "FedAvg-centralized equivalence", 60, FedAvgCentralized},
      {4, "federated NCC = centralized NCC", 60, FederatedNcc},
      {5, "LoRA algebra", 60, LoraAlgebra},
      {6, "aggregation weights", 60, AggregationWeights},
      {7, "determinism and wire integrity", 120, Determinism},
      {8, "end-to-end synthetic benchmark", 600, Benchmark},
      {9, "metric correctness", 180, Metrics},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));
  int failed = 0;
  for (const auto& cr : criteria) {
    if (!only.empty() && !only.count(cr.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Checks result;
    try {
      result = cr.run();
    } catch (const std::exception& e) {
      result.Expect(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.Expect(secs <= cr.budget_s, "runtime " + Fmt("%.1f", secs) + " s over budget");
    const bool pass = result.ok();
    failed += pass ? 0 : 1;
    std::printf("%s criterion %d: %s (%.1f s, budget %.0f s) -- %s\n", pass ? "PASS" : "FAIL", cr.id,
                cr.title.c_str(), secs, cr.budget_s, result.Summary().c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}

}  // namespace
}  // namespace fedtune::acceptance

int main(int argc, char** argv) { return fedtune::acceptance::Main(argc, argv); }
