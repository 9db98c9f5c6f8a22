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

#ifndef CTFINV_CLI_HPP_
#define CTFINV_CLI_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace ctfinv {
namespace cli {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitInfeasible = 2;
inline constexpr int kExitTheoremFailure = 3;

// Flat key=value configuration with dotted section names, '#' comments.
class Config {
 public:
  Config() = default;
  explicit Config(std::map<std::string, std::string> values)
      : values_(std::move(values)) {}

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::string get(const std::string& key, const std::string& fallback) const;
  std::string require(const std::string& key) const;
  int get_int(const std::string& key, int fallback) const;
  uint64_t get_u64(const std::string& key, uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key,
                                  const std::vector<double>& fallback) const;
  std::vector<std::string> get_strings(
      const std::string& key, const std::vector<std::string>& fallback) const;

  // Canonical sorted text form; hashed into the provenance digest.
  std::string canonical_text() const;
  std::string digest() const;

 private:
  std::map<std::string, std::string> values_;
};

Config parse_config_text(const std::string& text);
Config load_config(const std::string& path);

// Subcommands; each writes its artifacts under out_dir and returns an
// exit code. They throw nothing: errors map onto exit codes with a
// message on stderr.
int cmd_gen_data(const Config& config, const std::string& out_dir);
int cmd_train(const Config& config, const std::string& data_dir,
              const std::string& out_dir);
int cmd_stress(const Config& config, const std::string& checkpoint,
               const std::string& out_dir);
int cmd_domain_eval(const Config& config, const std::string& checkpoint,
                    const std::string& out_dir);
int cmd_oracle(const Config& config, const std::string& out_dir);

// Full argv dispatch for the binary.
int run(const std::vector<std::string>& args);

}  // namespace cli
}  // namespace ctfinv

#endif  // CTFINV_CLI_HPP_
