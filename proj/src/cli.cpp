//
// Copyright 2026 The ctfinv Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "ctfinv/cli.hpp"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include "ctfinv/corpus.hpp"
#include "ctfinv/eval.hpp"
#include "ctfinv/featurize.hpp"
#include "ctfinv/mmd.hpp"
#include "ctfinv/model.hpp"
#include "ctfinv/scm_suites.hpp"
#include "ctfinv/train.hpp"
#include "ctfinv/util.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace ctfinv {
namespace cli {

std::string Config::get(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::string Config::require(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) {
    throw ValidationError("config: missing required key " + key);
  }
  return it->second;
}

int Config::get_int(const std::string& key, int fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    size_t consumed = 0;
    const int value = std::stoi(it->second, &consumed);
    if (consumed != it->second.size()) throw std::invalid_argument(key);
    return value;
  } catch (const std::exception&) {
    throw ValidationError("config: key " + key + " is not an integer");
  }
}

uint64_t Config::get_u64(const std::string& key, uint64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    size_t consumed = 0;
    const uint64_t value = std::stoull(it->second, &consumed);
    if (consumed != it->second.size()) throw std::invalid_argument(key);
    return value;
  } catch (const std::exception&) {
    throw ValidationError("config: key " + key + " is not an unsigned integer");
  }
}

double Config::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw ValidationError("config: key " + key + " is not a number");
  }
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw ValidationError("config: key " + key + " is not a boolean");
}

std::vector<double> Config::get_doubles(
    const std::string& key, const std::vector<double>& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<double> out;
  for (const auto& part : util::split_string(it->second, ',')) {
    const std::string item = util::trim(part);
    if (item.empty()) continue;
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ValidationError("config: key " + key + " has a non-numeric entry");
    }
  }
  return out;
}

std::vector<std::string> Config::get_strings(
    const std::string& key, const std::vector<std::string>& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<std::string> out;
  for (const auto& part : util::split_string(it->second, ',')) {
    const std::string item = util::trim(part);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string Config::canonical_text() const {
  std::ostringstream out;
  for (const auto& [key, value] : values_) {
    out << key << '=' << value << '\n';
  }
  return out.str();
}

std::string Config::digest() const {
  const uint64_t h = util::fnv1a64(canonical_text());
  std::ostringstream out;
  out << std::hex << h;
  return out.str();
}

Config parse_config_text(const std::string& text) {
  std::map<std::string, std::string> values;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = util::trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("config: line " + std::to_string(line_no) +
                            " is not key=value");
    }
    const std::string key = util::trim(stripped.substr(0, eq));
    const std::string value = util::trim(stripped.substr(eq + 1));
    if (key.empty()) {
      throw ValidationError("config: empty key on line " + std::to_string(line_no));
    }
    values[key] = value;
  }
  return Config(std::move(values));
}

Config load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_config_text(text);
}

namespace {

int thread_budget() {
  const char* env = std::getenv("CTFINV_THREADS");
  if (env == nullptr) return 1;
  try {
    return std::clamp(std::stoi(env), 1, 64);
  } catch (const std::exception&) {
    return 1;
  }
}

std::string provenance_line(const Config& config, uint64_t seed) {
  return std::string("# ") + kToolVersion + " config_digest=" + config.digest() +
         " seed=" + std::to_string(seed) + "\n";
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open for writing: " + path);
  out << content;
}

featurize::HashConfig feature_config_from(const Config& config) {
  featurize::HashConfig fc;
  fc.dim = config.get_int("featurize.dim", 1 << 18);
  fc.hash_seed = config.get_u64("featurize.hash_seed", 0);
  fc.binary = config.get_bool("featurize.binary", false);
  fc.validate();
  return fc;
}

struct SweepPoint {
  mmd::PenaltyKind kind;
  double lambda;
};

std::vector<SweepPoint> sweep_points_from(const Config& config) {
  const auto kinds = config.get_strings("sweep.kinds", {"none", "conditional"});
  const auto lambdas =
      config.get_doubles("sweep.lambdas", {1, 2, 4, 8, 16, 32, 64, 128});
  std::vector<SweepPoint> points;
  for (const auto& kind_name : kinds) {
    const mmd::PenaltyKind kind = mmd::penalty_kind_from_string(kind_name);
    if (kind == mmd::PenaltyKind::none) {
      points.push_back({kind, 0.0});
      continue;
    }
    for (double lambda : lambdas) {
      if (lambda < 0.0) {
        throw ValidationError("config: sweep.lambdas must be non-negative");
      }
      points.push_back({kind, lambda});
    }
  }
  if (points.empty()) {
    throw ValidationError("config: empty sweep");
  }
  return points;
}

std::string point_tag(const SweepPoint& point) {
  return mmd::to_string(point.kind) + "_" + util::format_double(point.lambda);
}

int exit_code_for(const std::exception& error) {
  if (dynamic_cast<const InfeasibleError*>(&error) != nullptr) {
    return kExitInfeasible;
  }
  return kExitValidation;
}

}  // namespace

int cmd_gen_data(const Config& config, const std::string& out_dir) {
  try {
    fs::create_directories(out_dir);
    const uint64_t seed = config.get_u64("data.seed", 7);
    const int max_tokens = config.get_int("data.max_tokens", 20);
    const double gamma = config.get_double("data.gamma", 0.3);
    const auto fractions_vec =
        config.get_doubles("data.fractions", {0.6, 0.15, 0.25});
    if (fractions_vec.size() != 3) {
      throw ValidationError("config: data.fractions needs three entries");
    }
    const std::array<double, 3> fractions = {fractions_vec[0], fractions_vec[1],
                                             fractions_vec[2]};

    std::vector<corpus::RawReview> raws;
    const std::string source = config.get("data.source", "pseudo");
    if (source == "pseudo") {
      raws = corpus::generate_pseudo_reviews(config.get_int("data.raw_count", 40000),
                                             seed);
    } else if (source == "jsonl") {
      raws = corpus::load_raw_reviews(config.require("data.raws_path"));
    } else {
      throw ValidationError("config: data.source must be pseudo or jsonl");
    }

    const corpus::Dataset confounded =
        corpus::synthesize_confound(raws, max_tokens, seed + 1);
    const corpus::Dataset induced =
        corpus::induce_assoc_anticausal(confounded, gamma, seed + 2);
    const corpus::SplitResult splits = corpus::split(induced, fractions, seed + 3);

    corpus::Dataset counterfactual_test;
    counterfactual_test.class_count = splits.test.class_count;
    counterfactual_test.structure_tag = splits.test.structure_tag;
    for (const auto& e : splits.test.examples) {
      counterfactual_test.examples.push_back(corpus::make_counterfactual(e));
    }

    // Evaluation pool: everything never seen by training or validation.
    std::set<int64_t> held;
    for (const auto& e : splits.train.examples) held.insert(e.id);
    for (const auto& e : splits.val.examples) held.insert(e.id);
    corpus::Dataset pool;
    pool.class_count = confounded.class_count;
    pool.structure_tag = corpus::StructureTag::anticausal;
    for (const auto& e : confounded.examples) {
      if (!held.count(e.id)) pool.examples.push_back(e);
    }

    corpus::save_dataset(splits.train, out_dir + "/train.jsonl");
    corpus::save_dataset(splits.val, out_dir + "/val.jsonl");
    corpus::save_dataset(splits.test, out_dir + "/test.jsonl");
    corpus::save_dataset(counterfactual_test,
                         out_dir + "/test_counterfactual.jsonl");
    corpus::save_dataset(pool, out_dir + "/pool.jsonl");

    nlohmann::json manifest;
    manifest["tool_version"] = kToolVersion;
    manifest["config_digest"] = config.digest();
    manifest["seed"] = seed;
    manifest["gamma_target"] = gamma;
    manifest["gamma_achieved_y1_given_z1"] = induced.pr_y1_given_z1();
    manifest["gamma_achieved_y0_given_z0"] = induced.pr_y0_given_z0();
    manifest["class_count"] = induced.class_count;
    manifest["counts"] = {{"train", splits.train.examples.size()},
                          {"val", splits.val.examples.size()},
                          {"test", splits.test.examples.size()},
                          {"test_counterfactual",
                           counterfactual_test.examples.size()},
                          {"pool", pool.examples.size()}};
    write_file(out_dir + "/manifest.json", manifest.dump(2) + "\n");
    return kExitOk;
  } catch (const std::exception& error) {
    std::cerr << "gen-data: " << error.what() << "\n";
    return exit_code_for(error);
  }
}

namespace {

struct SweepRow {
  SweepPoint point;
  bool failed = false;
  std::string failure;
  int best_epoch = 0;
  double val_ce = 0.0;
  double test_accuracy = 0.0;
  double marginal_mmd = 0.0;
  double conditional_mmd = 0.0;
};

}  // namespace

int cmd_train(const Config& config, const std::string& data_dir,
              const std::string& out_dir) {
  try {
    fs::create_directories(out_dir);
    const corpus::Dataset train_set = corpus::load_dataset(data_dir + "/train.jsonl");
    const corpus::Dataset val_set = corpus::load_dataset(data_dir + "/val.jsonl");
    const corpus::Dataset test_set = corpus::load_dataset(data_dir + "/test.jsonl");
    const featurize::HashConfig fc = feature_config_from(config);

    const std::string arch_name = config.get("model.architecture", "linear");
    model::Architecture arch;
    if (arch_name == "linear") {
      arch = model::Architecture::linear;
    } else if (arch_name == "mlp") {
      arch = model::Architecture::mlp;
    } else {
      throw ValidationError("config: model.architecture must be linear or mlp");
    }
    const int hidden = config.get_int("model.hidden_size", 16);
    const uint64_t init_seed = config.get_u64("model.init_seed", 11);

    mmd::KernelConfig kernel;
    kernel.bandwidth = config.get_double("train.kernel_bandwidth", 10.0);

    train::TrainConfig base_config;
    base_config.batch_size = config.get_int("train.batch_size", 1024);
    base_config.learning_rate = config.get_double("train.learning_rate", 0.1);
    base_config.max_epochs = config.get_int("train.max_epochs", 30);
    base_config.patience = config.get_int("train.patience", 10);
    base_config.seed = config.get_u64("train.seed", 13);
    base_config.penalty.kernel = kernel;

    const std::vector<SweepPoint> points = sweep_points_from(config);
    std::vector<SweepRow> rows(points.size());

    const auto run_point = [&](size_t index) {
      SweepRow& row = rows[index];
      row.point = points[index];
      try {
        train::TrainConfig tc = base_config;
        tc.penalty.kind = points[index].kind;
        tc.penalty.lambda = points[index].lambda;
        const model::ClassifierModel init = model::make_model(
            arch, fc.dim, train_set.class_count, hidden, init_seed);
        const train::TrainResult result =
            train::fit(train_set, val_set, fc, init, tc);
        const std::string tag = point_tag(points[index]);
        model::save_model(result.model, out_dir + "/model_" + tag + ".json");
        write_file(out_dir + "/report_" + tag + ".csv",
                   provenance_line(config, tc.seed) +
                       train::report_to_csv(result.report));
        row.best_epoch = result.report.best_epoch;
        row.val_ce = result.report.epochs[result.report.best_epoch].val_ce;
        row.test_accuracy = eval::accuracy(result.model, test_set, fc);
        const eval::MeasuredMmd measured =
            eval::measured_mmd(result.model, test_set, kernel, fc);
        row.marginal_mmd = measured.marginal.value;
        row.conditional_mmd = measured.conditional.value;
      } catch (const std::exception& error) {
        row.failed = true;
        row.failure = error.what();
      }
    };

    const int threads = thread_budget();
    if (threads <= 1) {
      for (size_t i = 0; i < points.size(); ++i) run_point(i);
    } else {
      std::vector<std::thread> workers;
      std::atomic<size_t> next{0};
      for (int t = 0; t < threads; ++t) {
        workers.emplace_back([&] {
          while (true) {
            const size_t i = next.fetch_add(1);
            if (i >= points.size()) return;
            run_point(i);
          }
        });
      }
      for (auto& w : workers) w.join();
    }

    std::ostringstream summary;
    summary << provenance_line(config, base_config.seed);
    summary << "kind,lambda,status,best_epoch,val_ce,test_acc,marginal_mmd,"
               "conditional_mmd\n";
    for (const auto& row : rows) {
      summary << mmd::to_string(row.point.kind) << ','
              << util::format_double(row.point.lambda) << ','
              << (row.failed ? "failed" : "ok") << ',';
      if (row.failed) {
        summary << ",,,,\n";
      } else {
        summary << row.best_epoch << ',' << util::format_double(row.val_ce) << ','
                << util::format_double(row.test_accuracy) << ','
                << util::format_double(row.marginal_mmd) << ','
                << util::format_double(row.conditional_mmd) << "\n";
      }
    }
    write_file(out_dir + "/sweep_summary.csv", summary.str());

    nlohmann::json manifest;
    manifest["tool_version"] = kToolVersion;
    manifest["config_digest"] = config.digest();
    manifest["train_seed"] = base_config.seed;
    manifest["init_seed"] = init_seed;
    manifest["kernel"] = {{"type", "gaussian_rbf"},
                          {"convention", "exp(-d^2 / (2 sigma^2))"},
                          {"bandwidth", kernel.bandwidth}};
    nlohmann::json point_list = nlohmann::json::array();
    for (const auto& row : rows) {
      point_list.push_back({{"kind", mmd::to_string(row.point.kind)},
                            {"lambda", row.point.lambda},
                            {"status", row.failed ? "failed" : "ok"}});
    }
    manifest["sweep"] = point_list;
    write_file(out_dir + "/manifest.json", manifest.dump(2) + "\n");
    return kExitOk;
  } catch (const std::exception& error) {
    std::cerr << "train: " << error.what() << "\n";
    return exit_code_for(error);
  }
}

int cmd_stress(const Config& config, const std::string& checkpoint,
               const std::string& out_dir) {
  try {
    fs::create_directories(out_dir);
    const model::ClassifierModel m = model::load_model(checkpoint);
    const featurize::HashConfig fc = feature_config_from(config);
    const corpus::Dataset base =
        corpus::load_dataset(config.require("eval.stress_base"));
    const corpus::Dataset cf = corpus::load_dataset(config.require("eval.stress_cf"));
    if (cf.examples.empty()) {
      throw ValidationError("stress: empty pair file");
    }
    const std::vector<eval::StressPair> pairs = eval::pair_up(base, cf);
    const eval::StressReport report = eval::stress_test(m, pairs, fc);
    const uint64_t seed = config.get_u64("data.seed", 7);
    write_file(out_dir + "/stress_pairs.csv",
               provenance_line(config, seed) + eval::stress_pairs_to_csv(report));
    write_file(out_dir + "/stress_summary.csv",
               provenance_line(config, seed) + eval::stress_summary_to_csv(report));
    return kExitOk;
  } catch (const std::exception& error) {
    std::cerr << "stress: " << error.what() << "\n";
    return exit_code_for(error);
  }
}

int cmd_domain_eval(const Config& config, const std::string& checkpoint,
                    const std::string& out_dir) {
  try {
    fs::create_directories(out_dir);
    const model::ClassifierModel m = model::load_model(checkpoint);
    const featurize::HashConfig fc = feature_config_from(config);
    const corpus::Dataset pool = corpus::load_dataset(config.require("eval.pool"));
    const std::vector<double> gammas =
        config.get_doubles("eval.gammas", {0.3, 0.4, 0.5, 0.6, 0.7, 0.8});
    const uint64_t grid_seed = config.get_u64("eval.grid_seed", 99);
    const corpus::StructureTag structure = corpus::structure_tag_from_string(
        config.get("eval.structure", "anticausal"));
    const eval::DomainGrid grid =
        eval::domain_grid(m, pool, gammas, structure, grid_seed, fc);
    if (grid.gammas.empty()) {
      std::cerr << "domain-eval: every gamma infeasible for the pool\n";
      return kExitInfeasible;
    }
    write_file(out_dir + "/grid.csv",
               provenance_line(config, grid_seed) + eval::grid_to_csv(grid));
    write_file(out_dir + "/grid_summary.csv",
               provenance_line(config, grid_seed) + eval::grid_summary_to_csv(grid));
    if (config.get_bool("eval.worst_group", false)) {
      const eval::GroupTable groups = eval::worst_group_accuracy(m, pool, fc);
      write_file(out_dir + "/groups.csv",
                 provenance_line(config, grid_seed) + eval::groups_to_csv(groups));
    }
    return kExitOk;
  } catch (const std::exception& error) {
    std::cerr << "domain-eval: " << error.what() << "\n";
    return exit_code_for(error);
  }
}

int cmd_oracle(const Config& config, const std::string& out_dir) {
  try {
    fs::create_directories(out_dir);
    const uint64_t seed = config.get_u64("oracle.seed", 1);
    scm::OracleCounts counts;
    counts.signature_per_case = config.get_int("oracle.signature_count", 50);
    counts.decomposition = config.get_int("oracle.decomposition_count", 20);
    counts.transfer_per_condition = config.get_int("oracle.transfer_count", 20);
    counts.overlap = config.get_int("oracle.overlap_count", 10);
    const scm::OracleReport report = scm::run_all_suites(seed, counts);
    write_file(out_dir + "/oracle_report.json", report.to_json() + "\n");
    for (const auto& suite : report.suites) {
      std::cout << (suite.pass ? "PASS" : "FAIL") << " " << suite.name << " ("
                << suite.cases_run << " cases): " << suite.detail << "\n";
    }
    return report.all_pass() ? kExitOk : kExitTheoremFailure;
  } catch (const std::exception& error) {
    std::cerr << "oracle: " << error.what() << "\n";
    return exit_code_for(error);
  }
}

int run(const std::vector<std::string>& args) {
  try {
    if (args.empty()) {
      std::cerr << "usage: ctfinv <gen-data|train|stress|domain-eval|oracle> "
                   "[--config PATH] [--seed N] [--out DIR] [--checkpoint PATH] "
                   "[--data DIR]\n";
      return kExitValidation;
    }
    const std::string command = args[0];
    std::string config_path;
    std::string out_dir = ".";
    std::string checkpoint;
    std::string data_dir;
    std::string seed_override;
    for (size_t i = 1; i < args.size(); ++i) {
      const std::string& arg = args[i];
      auto next = [&]() -> const std::string& {
        if (i + 1 >= args.size()) {
          throw ValidationError("missing value for flag " + arg);
        }
        return args[++i];
      };
      if (arg == "--config") {
        config_path = next();
      } else if (arg == "--out") {
        out_dir = next();
      } else if (arg == "--checkpoint") {
        checkpoint = next();
      } else if (arg == "--data") {
        data_dir = next();
      } else if (arg == "--seed") {
        seed_override = next();
      } else {
        throw ValidationError("unknown flag " + arg);
      }
    }
    Config config =
        config_path.empty() ? Config() : load_config(config_path);
    if (!seed_override.empty()) {
      // The seed flag overrides the main seed of whichever command runs.
      std::map<std::string, std::string> values;
      for (const auto& line :
           util::split_string(config.canonical_text(), '\n')) {
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        values[line.substr(0, eq)] = line.substr(eq + 1);
      }
      values["data.seed"] = seed_override;
      values["oracle.seed"] = seed_override;
      values["train.seed"] = seed_override;
      config = Config(std::move(values));
    }
    if (command == "gen-data") return cmd_gen_data(config, out_dir);
    if (command == "train") {
      return cmd_train(config, data_dir.empty() ? out_dir : data_dir, out_dir);
    }
    if (command == "stress") {
      if (checkpoint.empty()) {
        throw ValidationError("stress requires --checkpoint");
      }
      return cmd_stress(config, checkpoint, out_dir);
    }
    if (command == "domain-eval") {
      if (checkpoint.empty()) {
        throw ValidationError("domain-eval requires --checkpoint");
      }
      return cmd_domain_eval(config, checkpoint, out_dir);
    }
    if (command == "oracle") return cmd_oracle(config, out_dir);
    throw ValidationError("unknown command " + command);
  } catch (const std::exception& error) {
    std::cerr << "ctfinv: " << error.what() << "\n";
    return exit_code_for(error);
  }
}

}  // namespace cli
}  // namespace ctfinv
