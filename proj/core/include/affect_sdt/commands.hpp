#pragma once

// Run configuration and the command implementations behind the CLI.

#include <cstdint>
#include <exception>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "affect_sdt/analysis.hpp"
#include "affect_sdt/embed.hpp"
#include "affect_sdt/harness.hpp"
#include "affect_sdt/stats.hpp"

namespace affect_sdt {

struct EmbeddingSource {
  std::string id;
  ProviderKind kind = ProviderKind::WordVectors;
  std::string path;
  OovPolicy oov = OovPolicy::Skip;
};

struct RunConfig {
  std::string data;
  std::vector<EmbeddingSource> embeddings;
  std::string template_name = "zh";  // "zh", "en" or a template file
  std::vector<GridBlock> grid;       // empty: every Original component
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
  std::string out = "out";
  bool force = false;
  bool paper_faithful = false;  // whitening fit on every trial
  WhiteningScope scope = WhiteningScope::Fold;
  bool split_whitening = false;
  std::vector<int> stages{1, 2, 3, 0};  // 0 = all stages pooled
  std::vector<Family> baselines{Family::Random, Family::Probability, Family::Detective,
                                Family::Knn};
  KnnOptions knn;
  std::size_t permutations = 10000;
  std::size_t bootstrap = 10000;
  bool two_tailed = false;
  WilcoxonOptions wilcoxon;
  MannWhitneyOptions mann_whitney;
  RsaOptions rsa;
  MagnitudeMode magnitude = MagnitudeMode::Prediction;
  std::vector<int> affect_change_stages{1, 2};
  bool cache = true;
  std::string cache_dir;  // $AFFECT_SDT_CACHE_DIR unless set in the file

  // Effective scope after the paper-faithful flag.
  WhiteningScope whitening_scope() const {
    return paper_faithful ? WhiteningScope::All : scope;
  }
  HarnessOptions harness_options() const;
};

// JSON object; relative paths are resolved against `base_dir`. Unknown keys
// raise ConfigError.
RunConfig parse_run_config(std::string_view json_text, const std::string& base_dir);
RunConfig load_run_config(const std::string& path);

// Command-line values; unset fields fall back to the file, then defaults.
struct ConfigOverrides {
  std::optional<std::string> data;
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
  std::optional<std::string> out;
  std::optional<std::string> grid;  // grid JSON file
  bool force = false;
  bool paper_faithful = false;
};

RunConfig resolve_config(const ConfigOverrides& overrides);

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitCompute = 3;

// ParseError and ValidationError -> 1, ConfigError -> 2, anything else -> 3.
int exit_code_for(const std::exception& e);

inline constexpr std::string_view kAnalyses[] = {
    "turing", "rsa", "simulate", "affect-change", "correlations", "wordcloud", "magnitude"};

// Each command reports to `out`/`err` and returns an exit code; library
// errors are caught and mapped through exit_code_for.
int cmd_validate(const std::string& data_path, std::ostream& out, std::ostream& err);
int cmd_fit(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_analyze(const RunConfig& config, std::string_view which, std::ostream& out,
                std::ostream& err);

}  // namespace affect_sdt
