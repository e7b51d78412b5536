// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtune/cli/config.h"

#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fedtune/common/text_io.h"
#include "fedtune/tensor/rng.h"

namespace fedtune::cli {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// Typed, range-checked access to one JSON object. Finish() rejects keys
// that were never read.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(Where() + " must be an object");
  }

  const json* Find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  double Number(const std::string& key, double def, double lo, double hi) {
    const json* v = Find(key);
    if (!v) return def;
    if (!v->is_number()) throw ConfigError(Where(key) + " must be a number");
    const double x = v->get<double>();
    if (!std::isfinite(x) || x < lo || x > hi) {
      throw ConfigError(Where(key) + " = " + v->dump() + " is outside [" + Num(lo) + ", " + Num(hi) + "]");
    }
    return x;
  }

  int64_t Int(const std::string& key, int64_t def, int64_t lo, int64_t hi) {
    const json* v = Find(key);
    if (!v) return def;
    if (!v->is_number_integer()) throw ConfigError(Where(key) + " must be an integer");
    if (v->is_number_unsigned() && v->get<uint64_t>() > static_cast<uint64_t>(hi)) {
      throw ConfigError(Where(key) + " = " + v->dump() + " exceeds " + std::to_string(hi));
    }
    const int64_t x = v->get<int64_t>();
    if (x < lo || x > hi) {
      throw ConfigError(Where(key) + " = " + v->dump() + " is outside [" + std::to_string(lo) + ", " +
                        std::to_string(hi) + "]");
    }
    return x;
  }

  uint64_t Seed(const std::string& key, uint64_t def) {
    const json* v = Find(key);
    if (!v) return def;
    if (!v->is_number_unsigned()) throw ConfigError(Where(key) + " must be a non-negative integer");
    return v->get<uint64_t>();
  }

  bool Bool(const std::string& key, bool def) {
    const json* v = Find(key);
    if (!v) return def;
    if (!v->is_boolean()) throw ConfigError(Where(key) + " must be true or false");
    return v->get<bool>();
  }

  std::string String(const std::string& key, const std::string& def) {
    const json* v = Find(key);
    if (!v) return def;
    if (!v->is_string()) throw ConfigError(Where(key) + " must be a string");
    return v->get<std::string>();
  }

  // A string or a non-empty array of distinct strings.
  std::vector<std::string> StringList(const std::string& key, std::vector<std::string> def) {
    const json* v = Find(key);
    if (!v) return def;
    if (v->is_string()) return {v->get<std::string>()};
    if (!v->is_array() || v->empty()) {
      throw ConfigError(Where(key) + " must be a string or a non-empty list of strings");
    }
    std::vector<std::string> out;
    for (const auto& e : *v) {
      if (!e.is_string()) throw ConfigError(Where(key) + " must contain only strings");
      out.push_back(e.get<std::string>());
    }
    if (std::set<std::string>(out.begin(), out.end()).size() != out.size()) {
      throw ConfigError(Where(key) + " lists a value twice");
    }
    return out;
  }

  std::string Where(const std::string& key = "") const {
    if (key.empty()) return path_.empty() ? "config" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  void Finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown key '" + Where(key) + "'");
    }
  }

 private:
  static std::string Num(double v) {
    std::ostringstream ss;
    ss << v;
    return ss.str();
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int64_t kMaxCount = 1'000'000;

data::LabelCounts ParseCounts(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_unsigned() || !v[1].is_number_unsigned()) {
    throw ConfigError(where + " must be [DE count, CN count] with non-negative integers");
  }
  const int64_t de = v[0].get<int64_t>(), cn = v[1].get<int64_t>();
  if (de > kMaxCount || cn > kMaxCount) throw ConfigError(where + " count exceeds " + std::to_string(kMaxCount));
  return {de, cn};
}

data::CohortSpec ParseCohort(const json& j, const std::string& where) {
  Fields f(j, where);
  data::CohortSpec c;
  c.name = f.String("name", "");
  if (c.name.empty() || c.name.find_first_of(",/\\\n\"") != std::string::npos) {
    throw ConfigError(where + ".name must be non-empty without , / \\ or quotes");
  }
  const char* keys[] = {"train", "val", "test"};
  for (size_t s = 0; s < 3; ++s) {
    const json* v = f.Find(keys[s]);
    if (!v) throw ConfigError(where + "." + keys[s] + " is required");
    c.splits[s] = ParseCounts(*v, where + "." + keys[s]);
  }
  f.Finish();
  c.Validate();
  return c;
}

DType ParseDType(const std::string& s) {
  if (s == "float32") return DType::kFloat32;
  if (s == "float64") return DType::kFloat64;
  throw ConfigError("unknown dtype '" + s + "' (expected float32, float64)");
}

std::string SourceName(FederationSource::Kind k) {
  switch (k) {
    case FederationSource::Kind::kBuiltin:
      return "builtin";
    case FederationSource::Kind::kCohorts:
      return "cohorts";
    case FederationSource::Kind::kManifest:
      return "manifest";
  }
  return "?";
}

}  // namespace

ExperimentConfig ParseExperimentConfig(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  Fields top(root, "");
  c.seed = top.Seed("seed", 0);
  c.output = top.String("output", c.output);
  if (c.output.empty()) throw ConfigError("output must be a non-empty path");

  if (const json* j = top.Find("federation")) {
    Fields f(*j, "federation");
    const std::string source = f.String("source", "builtin");
    if (source == "builtin") {
      c.federation.kind = FederationSource::Kind::kBuiltin;
    } else if (source == "cohorts") {
      c.federation.kind = FederationSource::Kind::kCohorts;
    } else if (source == "manifest") {
      c.federation.kind = FederationSource::Kind::kManifest;
    } else {
      throw ConfigError("federation.source '" + source + "' (expected builtin, cohorts, manifest)");
    }
    if (const json* cohorts = f.Find("cohorts")) {
      if (c.federation.kind != FederationSource::Kind::kCohorts) {
        throw ConfigError("federation.cohorts requires source 'cohorts'");
      }
      if (!cohorts->is_array() || cohorts->empty()) {
        throw ConfigError("federation.cohorts must be a non-empty list");
      }
      std::set<std::string> names;
      for (size_t i = 0; i < cohorts->size(); ++i) {
        c.federation.cohorts.push_back(
            ParseCohort((*cohorts)[i], "federation.cohorts[" + std::to_string(i) + "]"));
        if (!names.insert(c.federation.cohorts.back().name).second) {
          throw ConfigError("federation.cohorts repeats the name '" + c.federation.cohorts.back().name + "'");
        }
      }
    } else if (c.federation.kind == FederationSource::Kind::kCohorts) {
      throw ConfigError("federation.source 'cohorts' needs federation.cohorts");
    }
    c.federation.manifest = f.String("manifest", "");
    if ((c.federation.kind == FederationSource::Kind::kManifest) == c.federation.manifest.empty()) {
      throw ConfigError("federation.manifest is required for, and only allowed with, source 'manifest'");
    }
    c.federation.mode = ParseInputMode(f.String("mode", "features"));
    c.federation.feature_channels = f.Int("feature_channels", 384, 1, 4096);
    c.federation.feature_spatial = f.Int("feature_spatial", 8, 1, 64);
    f.Finish();
    if (c.federation.kind == FederationSource::Kind::kManifest &&
        (c.federation.mode != InputMode::kFeatures || c.federation.feature_channels != 384 ||
         c.federation.feature_spatial != 8)) {
      throw ConfigError("manifest federations hold 384 x 8^3 feature maps (mode 'features')");
    }
  }

  if (const json* j = top.Find("heterogeneity")) {
    Fields f(*j, "heterogeneity");
    auto& h = c.heterogeneity;
    h.class_separation = f.Number("class_separation", h.class_separation, 0.0, 1e6);
    h.noise = f.Number("noise", h.noise, 0.0, 1e6);
    h.client_shift = f.Number("client_shift", h.client_shift, 0.0, 1e6);
    h.outlier_factor = f.Number("outlier_factor", h.outlier_factor, 0.0, 1e6);
    h.outlier_client = f.String("outlier_client", h.outlier_client);
    h.nuisance = f.Number("nuisance", h.nuisance, 0.0, 1e6);
    h.nuisance_correlation = f.Number("nuisance_correlation", h.nuisance_correlation, -1.0, 1.0);
    f.Finish();
    h.Validate();
  }

  if (const json* j = top.Find("encoder")) {
    Fields f(*j, "encoder");
    auto& e = c.encoder;
    e.input_size = f.Int("input_size", e.input_size, 8, 512);
    e.patch_size = f.Int("patch_size", e.patch_size, 1, 64);
    e.embed_dim = f.Int("embed_dim", e.embed_dim, 1, 4096);
    e.depth = f.Int("depth", e.depth, 0, 64);
    e.heads = f.Int("heads", e.heads, 1, 64);
    e.mlp_ratio = f.Int("mlp_ratio", e.mlp_ratio, 1, 16);
    e.seed = f.Seed("seed", e.seed);
    f.Finish();
  }

  if (const json* j = top.Find("model")) {
    Fields f(*j, "model");
    c.lora_rank = f.Int("lora_rank", c.lora_rank, 1, 1024);
    c.heads.clear();
    for (const auto& h : f.StringList("head", {"ConvS"})) c.heads.push_back(heads::ParseHeadKind(h));
    c.regimes.clear();
    for (const auto& r : f.StringList("regime", {"ClsOnly"})) c.regimes.push_back(Regime::Parse(r, c.lora_rank));
    c.dtype = ParseDType(f.String("dtype", "float32"));
    f.Finish();
  }

  if (const json* j = top.Find("training")) {
    Fields f(*j, "training");
    auto& t = c.training;
    t.rounds = f.Int("rounds", t.rounds, 1, 10000);
    t.batch_size = f.Int("batch_size", t.batch_size, 1, 1 << 20);
    t.lr = f.Number("lr", t.lr, 0.0, 1e3);
    t.optimizer = fed::ParseOptimizer(f.String("optimizer", "adamw"));
    t.local_epochs = f.Int("local_epochs", t.local_epochs, 1, 10000);
    t.weight_decay = f.Number("weight_decay", t.weight_decay, 0.0, 1e3);
    t.threads = static_cast<int>(f.Int("threads", t.threads, 1, 1024));
    f.Finish();
  }

  c.aggregations.clear();
  for (const auto& a : top.StringList("aggregation", {"FedAvg"})) c.aggregations.push_back(agg::ParseMethod(a));

  if (const json* j = top.Find("link")) {
    Fields f(*j, "link");
    c.training.link.bandwidth_bytes_per_s = f.Number("bandwidth_mbps", 100.0, 1e-6, 1e9) * 1e6 / 8.0;
    c.training.link.rtt_s = f.Number("rtt_ms", 20.0, 0.0, 1e7) / 1e3;
    f.Finish();
  }

  if (const json* j = top.Find("baselines")) {
    Fields f(*j, "baselines");
    c.ncc = f.Bool("ncc", false);
    c.centralized = f.Bool("centralized", false);
    f.Finish();
  }

  if (const json* j = top.Find("evaluation")) {
    Fields f(*j, "evaluation");
    c.bootstraps = static_cast<int>(f.Int("bootstraps", c.bootstraps, 1, 1'000'000));
    f.Finish();
  }
  top.Finish();
  if (c.federation.kind != FederationSource::Kind::kManifest && !c.heterogeneity.outlier_client.empty()) {
    bool found = false;
    for (const auto& co : SyntheticCohorts(c)) found = found || co.name == c.heterogeneity.outlier_client;
    if (!found) {
      throw ConfigError("heterogeneity.outlier_client '" + c.heterogeneity.outlier_client +
                        "' is not a cohort of the federation");
    }
  }
  ExpandSweep(c);
  return c;
}

ExperimentConfig LoadExperimentConfig(const std::string& path) {
  return ParseExperimentConfig(ReadTextFile(path));
}

std::string ToJson(const ExperimentConfig& c) {
  ordered_json j;
  j["seed"] = c.seed;
  j["output"] = c.output;
  ordered_json fedj;
  fedj["source"] = SourceName(c.federation.kind);
  if (c.federation.kind == FederationSource::Kind::kCohorts) {
    ordered_json list = ordered_json::array();
    for (const auto& co : c.federation.cohorts) {
      ordered_json e;
      e["name"] = co.name;
      const char* keys[] = {"train", "val", "test"};
      for (size_t s = 0; s < 3; ++s) e[keys[s]] = {co.splits[s].de, co.splits[s].cn};
      list.push_back(e);
    }
    fedj["cohorts"] = list;
  }
  if (c.federation.kind == FederationSource::Kind::kManifest) fedj["manifest"] = c.federation.manifest;
  fedj["mode"] = ToString(c.federation.mode);
  fedj["feature_channels"] = c.federation.feature_channels;
  fedj["feature_spatial"] = c.federation.feature_spatial;
  j["federation"] = fedj;
  const auto& h = c.heterogeneity;
  j["heterogeneity"] = {{"class_separation", h.class_separation}, {"noise", h.noise},
                        {"client_shift", h.client_shift}, {"outlier_factor", h.outlier_factor},
                        {"outlier_client", h.outlier_client}, {"nuisance", h.nuisance},
                        {"nuisance_correlation", h.nuisance_correlation}};
  const auto& e = c.encoder;
  j["encoder"] = {{"input_size", e.input_size}, {"patch_size", e.patch_size}, {"embed_dim", e.embed_dim},
                  {"depth", e.depth}, {"heads", e.heads}, {"mlp_ratio", e.mlp_ratio}, {"seed", e.seed}};
  ordered_json heads_j = ordered_json::array(), regimes_j = ordered_json::array(), agg_j = ordered_json::array();
  for (auto k : c.heads) heads_j.push_back(heads::ToString(k));
  for (const auto& r : c.regimes) regimes_j.push_back(r.Name());
  for (auto m : c.aggregations) agg_j.push_back(agg::ToString(m));
  j["model"] = {{"head", heads_j}, {"regime", regimes_j}, {"lora_rank", c.lora_rank},
                {"dtype", ToString(c.dtype)}};
  const auto& t = c.training;
  j["training"] = {{"rounds", t.rounds}, {"batch_size", t.batch_size}, {"lr", t.lr},
                   {"optimizer", fed::ToString(t.optimizer)}, {"local_epochs", t.local_epochs},
                   {"weight_decay", t.weight_decay}, {"threads", t.threads}};
  j["aggregation"] = agg_j;
  j["link"] = {{"bandwidth_mbps", t.link.bandwidth_bytes_per_s * 8.0 / 1e6}, {"rtt_ms", t.link.rtt_s * 1e3}};
  j["baselines"] = {{"ncc", c.ncc}, {"centralized", c.centralized}};
  j["evaluation"] = {{"bootstraps", c.bootstraps}};
  return j.dump(2) + "\n";
}

std::vector<data::CohortSpec> SyntheticCohorts(const ExperimentConfig& config) {
  switch (config.federation.kind) {
    case FederationSource::Kind::kBuiltin:
      return data::BuiltinFederation();
    case FederationSource::Kind::kCohorts:
      return config.federation.cohorts;
    case FederationSource::Kind::kManifest:
      break;
  }
  throw ConfigError("manifest federations are not synthetic");
}

data::SynthGeometry SyntheticGeometry(const ExperimentConfig& config) {
  if (config.federation.mode == InputMode::kVolumes) {
    return data::SynthGeometry::Volumes(config.encoder.input_size);
  }
  return data::SynthGeometry::Features(config.federation.feature_channels,
                                       config.federation.feature_spatial);
}

data::HeterogeneityConfig DataConfig(const ExperimentConfig& config) {
  data::HeterogeneityConfig het = config.heterogeneity;
  het.seed = DeriveSeed(config.seed, "data");
  return het;
}

std::vector<RunPlan> ExpandSweep(const ExperimentConfig& config) {
  auto spec_for = [&](heads::HeadKind head, const Regime& regime) {
    ModelSpec spec;
    spec.mode = config.federation.mode;
    spec.encoder = config.encoder;
    spec.head.kind = head;
    if (spec.mode == InputMode::kFeatures) {
      spec.head.in_channels = config.federation.feature_channels;
      spec.head.spatial = config.federation.feature_spatial;
    } else {
      spec.head.in_channels = config.encoder.embed_dim;
      spec.head.spatial = backbone::kTokenGrid;
    }
    spec.regime = regime;
    spec.dtype = config.dtype;
    spec.Validate();
    return spec;
  };
  auto with_seed = [&](const std::string& name) {
    fed::FedConfig t = config.training;
    t.seed = DeriveSeed(config.seed, "run/" + name);
    t.Validate();
    return t;
  };
  std::vector<RunPlan> plans;
  for (auto head : config.heads) {
    for (const auto& regime : config.regimes) {
      for (auto method : config.aggregations) {
        const std::string name = heads::ToString(head) + "_" + regime.Name() + "_" + agg::ToString(method);
        RunPlan p{RunPlan::Kind::kFederated, name, spec_for(head, regime), with_seed(name)};
        p.training.aggregation = method;
        plans.push_back(p);
      }
    }
  }
  if (config.centralized) {
    for (auto head : config.heads) {
      for (const auto& regime : config.regimes) {
        const std::string name = "Centralized_" + heads::ToString(head) + "_" + regime.Name();
        plans.push_back({RunPlan::Kind::kCentralized, name, spec_for(head, regime), with_seed(name)});
      }
    }
  }
  if (config.ncc) {
    plans.push_back({RunPlan::Kind::kNcc, "NCC", spec_for(heads::HeadKind::kLinear, Regime::ClsOnly()),
                     with_seed("NCC")});
  }
  if (config.federation.kind == FederationSource::Kind::kCohorts && config.federation.cohorts.empty()) {
    throw ConfigError("federation.cohorts is empty");
  }
  if (config.federation.mode == InputMode::kVolumes) config.encoder.Validate();
  return plans;
}

}  // namespace fedtune::cli
