// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtune/cli/commands.h"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <set>

#include <CLI11.hpp>

#include "fedtune/baselines/baselines.h"
#include "fedtune/common/text_io.h"
#include "fedtune/data/feature_file.h"
#include "fedtune/data/synth.h"
#include "fedtune/tensor/rng.h"

namespace fedtune::cli {
namespace {

namespace fs = std::filesystem;

bool BothClasses(const std::vector<int>& labels) {
  return std::count(labels.begin(), labels.end(), 1) > 0 && std::count(labels.begin(), labels.end(), 0) > 0;
}

std::vector<int> TestLabels(const data::ClientDataset& c) {
  const auto& test = c.split(data::Split::kTest);
  std::vector<int> labels;
  for (int64_t i = 0; i < test.size(); ++i) labels.push_back(test.label(i));
  return labels;
}

std::string Interval(const eval::EvalResult& r) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%.3f (%.3f-%.3f)", r.auc, r.ci_low, r.ci_high);
  return buf;
}

struct RunResults {
  std::string name;
  std::vector<eval::EvalResult> results;
  std::vector<eval::EfficiencyReport> efficiency;
};

RunResults ReadRun(const fs::path& dir) {
  RunResults r;
  r.name = dir.filename().string();
  r.results = eval::ParseResultsCsv(ReadTextFile((dir / eval::kResultsFile).string()));
  const fs::path eff = dir / eval::kEfficiencyFile;
  if (fs::exists(eff)) r.efficiency = eval::ParseEfficiencyCsv(ReadTextFile(eff.string()));
  return r;
}

const eval::EvalResult* FindScope(const RunResults& r, const std::string& scope) {
  for (const auto& e : r.results) {
    if (e.scope == scope) return &e;
  }
  return nullptr;
}

void LogRound(std::ostream& log, const std::string& name, int64_t rounds, const fed::RoundLog& r) {
  double auc = 0.0;
  for (const auto& v : r.val) auc += v.auc;
  auc /= static_cast<double>(std::max<size_t>(1, r.val.size()));
  log << name << " round " << (r.round + 1) << "/" << rounds << ": mean val AUC " << std::fixed
      << std::setprecision(4) << auc << ", weights [";
  for (size_t i = 0; i < r.weights.size(); ++i) log << (i ? " " : "") << std::setprecision(3) << r.weights[i];
  log << "], latency " << std::setprecision(1) << r.latency_s * 1e3 << " ms" << std::endl;
  log.unsetf(std::ios::floatfield);
}

}  // namespace

std::vector<data::ClientDataset> LoadFederation(const ExperimentConfig& config) {
  if (config.federation.kind == FederationSource::Kind::kManifest) {
    return data::LoadManifestClients(config.federation.manifest);
  }
  return data::SyntheticFederation(DataConfig(config), SyntheticGeometry(config))
      .Clients(SyntheticCohorts(config));
}

std::vector<eval::EvalResult> EvaluateScores(std::span<const data::ClientDataset> clients,
                                             const std::vector<std::vector<double>>& scores,
                                             int bootstraps, uint64_t seed) {
  std::vector<eval::EvalResult> out;
  std::vector<double> all_scores;
  std::vector<int> all_labels;
  for (size_t i = 0; i < clients.size(); ++i) {
    const std::vector<int> labels = TestLabels(clients[i]);
    if (labels.size() != scores.at(i).size()) throw ConfigError("one score per test sample required");
    all_scores.insert(all_scores.end(), scores[i].begin(), scores[i].end());
    all_labels.insert(all_labels.end(), labels.begin(), labels.end());
    if (!BothClasses(labels)) continue;
    out.push_back(eval::Evaluate(clients[i].name, scores[i], labels, bootstraps,
                                 DeriveSeed(seed, "bootstrap/" + clients[i].name)));
  }
  if (BothClasses(all_labels)) {
    out.push_back(eval::Evaluate("All", all_scores, all_labels, bootstraps, DeriveSeed(seed, "bootstrap/All")));
  }
  return out;
}

std::vector<eval::EvalResult> EvaluateModel(const Model& model,
                                            std::span<const data::ClientDataset> clients,
                                            int bootstraps, uint64_t seed) {
  std::vector<std::vector<double>> scores;
  for (const auto& c : clients) scores.push_back(fed::ScoreSource(model, c.split(data::Split::kTest)).scores);
  return EvaluateScores(clients, scores, bootstraps, seed);
}

RunOutcome ExecuteRun(const RunPlan& plan, std::span<const data::ClientDataset> clients,
                      const ExperimentConfig& config, std::ostream& log) {
  RunOutcome out;
  out.name = plan.name;
  const uint64_t eval_seed = plan.training.seed;
  auto observer = [&](const fed::RoundLog& r, const Model&) {
    LogRound(log, plan.name, plan.training.rounds, r);
    return true;
  };
  switch (plan.kind) {
    case RunPlan::Kind::kFederated: {
      const auto fed = fed::RunFederation(clients, plan.spec, plan.training, observer);
      out.logs = fed.logs;
      out.results = EvaluateModel(fed.model, clients, config.bootstraps, eval_seed);
      out.efficiency = eval::ModelEfficiency(plan.name, plan.spec, plan.training.link);
      break;
    }
    case RunPlan::Kind::kCentralized: {
      const std::vector<data::ClientDataset> pooled = {baselines::PoolClients(clients)};
      const auto fed = fed::RunFederation(pooled, plan.spec, plan.training, observer);
      out.logs = fed.logs;
      out.results = EvaluateModel(fed.model, clients, config.bootstraps, eval_seed);
      out.efficiency = eval::ModelEfficiency(plan.name, plan.spec, plan.training.link);
      out.efficiency.bytes_down = out.efficiency.bytes_up = 0;
      out.efficiency.latency_s = 0.0;
      break;
    }
    case RunPlan::Kind::kNcc: {
      const Model model = fed::InitialModel(plan.spec, plan.training);
      const auto g = baselines::PooledFeatures(model);
      const auto ncc = baselines::RunFederatedNcc(clients, g, plan.training.threads);
      std::vector<std::vector<double>> scores;
      for (const auto& c : clients) {
        scores.push_back(baselines::NccScores(c.split(data::Split::kTest), g, ncc.centroids));
      }
      out.results = EvaluateScores(clients, scores, config.bootstraps, eval_seed);
      out.efficiency = eval::NccEfficiency(plan.name, plan.spec, plan.training.link);
      log << plan.name << ": centroids from " << clients.size() << " clients" << std::endl;
      break;
    }
  }
  for (const auto& r : out.results) {
    if (r.scope == "All") log << plan.name << ": test AUC " << Interval(r) << std::endl;
  }
  return out;
}

void CmdGenData(const ExperimentConfig& config, const std::string& out, std::ostream& log) {
  if (config.federation.kind == FederationSource::Kind::kManifest) {
    throw ConfigError("gen-data needs a synthetic federation (source builtin or cohorts)");
  }
  if (config.federation.mode != InputMode::kFeatures || config.federation.feature_channels != 384 ||
      config.federation.feature_spatial != 8) {
    throw ConfigError("feature files hold 384 x 8^3 maps; set mode 'features' with the default shape");
  }
  const auto clients = LoadFederation(config);
  fs::create_directories(out);
  data::Manifest manifest;
  for (const auto& c : clients) {
    const std::string file = c.name + ".fdt";
    data::SaveFeatures((fs::path(out) / file).string(),
                       data::ConcatSource({c.splits[0], c.splits[1], c.splits[2]}));
    manifest.clients.push_back({c.name, file, c.split(data::Split::kTrain).size(),
                                c.split(data::Split::kVal).size(), c.split(data::Split::kTest).size()});
    log << "wrote " << file << " (" << manifest.clients.back().train + manifest.clients.back().val +
                                           manifest.clients.back().test
        << " samples)" << std::endl;
  }
  data::WriteManifest((fs::path(out) / "manifest.json").string(), manifest);
}

void CmdRun(const ExperimentConfig& config, const std::string& out, std::ostream& log) {
  const std::vector<RunPlan> plans = ExpandSweep(config);
  const auto clients = LoadFederation(config);
  WriteTextFile((fs::path(out) / "config.json").string(), ToJson(config));
  for (const auto& plan : plans) {
    log << "== " << plan.name << std::endl;
    const RunOutcome r = ExecuteRun(plan, clients, config, log);
    const std::vector<eval::EfficiencyReport> eff = {r.efficiency};
    eval::EmitReports((fs::path(out) / plan.name).string(), r.results, r.logs, eff);
  }
}

void CmdReport(const std::string& dir, std::ostream& out) {
  if (!fs::is_directory(dir)) throw IoError("'" + dir + "' is not a directory");
  std::vector<fs::path> run_dirs;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory() && fs::exists(e.path() / eval::kResultsFile)) run_dirs.push_back(e.path());
  }
  std::sort(run_dirs.begin(), run_dirs.end());
  if (run_dirs.empty()) throw IoError("no run directories with " + std::string(eval::kResultsFile) + " under '" + dir + "'");
  std::vector<RunResults> runs;
  for (const auto& d : run_dirs) runs.push_back(ReadRun(d));

  std::vector<std::string> scopes;
  for (const auto& r : runs) {
    for (const auto& e : r.results) {
      if (e.scope != "All" && std::find(scopes.begin(), scopes.end(), e.scope) == scopes.end()) {
        scopes.push_back(e.scope);
      }
    }
  }
  scopes.push_back("All");

  std::string auc = "run";
  for (const auto& s : scopes) auc += "," + s;
  auc += "\n";
  for (const auto& r : runs) {
    auc += r.name;
    for (const auto& s : scopes) {
      const auto* e = FindScope(r, s);
      auc += "," + (e ? Interval(*e) : std::string("-"));
    }
    auc += "\n";
  }

  std::vector<eval::EfficiencyReport> eff;
  for (const auto& r : runs) eff.insert(eff.end(), r.efficiency.begin(), r.efficiency.end());
  const std::string eff_csv = eval::EfficiencyCsv(eff);

  std::string sig = "scope,run_a,run_b,significant\n";
  for (const auto& s : scopes) {
    for (size_t a = 0; a < runs.size(); ++a) {
      for (size_t b = a + 1; b < runs.size(); ++b) {
        const auto* ea = FindScope(runs[a], s);
        const auto* eb = FindScope(runs[b], s);
        if (!ea || !eb) continue;
        sig += s + "," + runs[a].name + "," + runs[b].name + "," +
               (eval::Significant(*ea, *eb) ? "yes" : "no") + "\n";
      }
    }
  }
  WriteTextFile((fs::path(dir) / "table_auc.csv").string(), auc);
  WriteTextFile((fs::path(dir) / "table_efficiency.csv").string(), eff_csv);
  WriteTextFile((fs::path(dir) / "significance.csv").string(), sig);
  out << "Test AUC (95% CI)\n" << auc << "\nEfficiency\n" << eff_csv << "\nSignificant pairs\n";
  for (const auto& s : scopes) {
    for (size_t a = 0; a < runs.size(); ++a) {
      for (size_t b = a + 1; b < runs.size(); ++b) {
        const auto* ea = FindScope(runs[a], s);
        const auto* eb = FindScope(runs[b], s);
        if (ea && eb && eval::Significant(*ea, *eb)) {
          out << "  " << s << ": " << runs[a].name << " vs " << runs[b].name << "\n";
        }
      }
    }
  }
}

void CmdCompare(const std::string& a, const std::string& b, std::ostream& out) {
  const RunResults ra = ReadRun(a), rb = ReadRun(b);
  out << "scope," << ra.name << "," << rb.name << ",significant\n";
  for (const auto& ea : ra.results) {
    const auto* eb = FindScope(rb, ea.scope);
    if (!eb) continue;
    out << ea.scope << "," << Interval(ea) << "," << Interval(*eb) << ","
        << (eval::Significant(ea, *eb) ? "yes" : "no") << "\n";
  }
}

int RunCli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Federated fine-tuning of frozen 3D encoders on synthetic or precomputed features"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  uint64_t seed = 0;
  int threads = 0;
  auto add_run_flags = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Experiment config (JSON)")->required();
    cmd->add_option("--seed", seed, "Master seed (overrides the config)");
    cmd->add_option("--out", out_dir, "Output directory (overrides the config)");
    cmd->add_option("--threads", threads, "Concurrent client tasks")->check(CLI::PositiveNumber);
  };
  CLI::App* gen = app.add_subcommand("gen-data", "Write the synthetic federation as feature files");
  add_run_flags(gen);
  CLI::App* run = app.add_subcommand("run", "Run an experiment sweep");
  add_run_flags(run);
  CLI::App* report = app.add_subcommand("report", "Summarize the runs under a directory");
  report->add_option("--out,dir", out_dir, "Directory holding run subdirectories")->required();
  CLI::App* compare = app.add_subcommand("compare", "Compare two run directories");
  std::vector<std::string> pair;
  compare->add_option("runs", pair, "Two run directories")->required()->expected(2);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (*gen || *run) {
      ExperimentConfig config = LoadExperimentConfig(config_path);
      if (gen->count("--seed") || run->count("--seed")) config.seed = seed;
      if (threads > 0) config.training.threads = threads;
      if (!out_dir.empty()) config.output = out_dir;
      ExpandSweep(config);
      if (*gen) {
        CmdGenData(config, config.output, err);
      } else {
        CmdRun(config, config.output, err);
      }
    } else if (*report) {
      CmdReport(out_dir, out);
    } else if (*compare) {
      CmdCompare(pair[0], pair[1], out);
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericError& e) {
    err << "divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitOk;
}

}  // namespace fedtune::cli
