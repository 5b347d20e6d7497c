#pragma once

// Nested leave-one-out model selection, naive and KNN baselines, and
// simulation of ratings under a fixed model.

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "affect_sdt/affect.hpp"
#include "affect_sdt/corpus.hpp"
#include "affect_sdt/embed.hpp"
#include "affect_sdt/sdt.hpp"

namespace affect_sdt {

enum class Family { Original, PlmWv, PlmTf, Random, Probability, Detective, Knn };

std::string_view to_string(Family f);
std::optional<Family> parse_family(std::string_view s);
bool is_baseline(Family f);

struct ModelSpec {
  Family family = Family::Original;
  Component component = Component::AA;
  DistanceMeasure measure = DistanceMeasure::Euclidean;
  PoolingSpec pooling;
  ReprLevel level = ReprLevel::Sentence;
  int kappa = kKappaNone;
  Hypothesis hypothesis = Hypothesis::H1;
  std::string embedding;  // registry id for the PLM families

  // Fields the family ignores reset to their defaults.
  ModelSpec normalized() const;
  // Stable text key, e.g. "Original|AA|euclidean|-|-|-|H1|-".
  std::string key() const;
  // The key without the hypothesis: specs sharing it share distances.
  std::string distance_key() const;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

// Order (family, component, measure, pooling, level, kappa, hypothesis,
// embedding); the first of equally scored specs in this order wins.
bool canonical_less(const ModelSpec& a, const ModelSpec& b);

// One block of a grid: the cartesian product of its lists.
struct GridBlock {
  Family family = Family::Original;
  std::vector<Component> components;
  std::vector<DistanceMeasure> measures;
  std::vector<PoolingSpec> poolings{PoolingSpec{}};
  std::vector<ReprLevel> levels{ReprLevel::Sentence};
  std::vector<int> kappas{kKappaNone};
  std::vector<Hypothesis> hypotheses{Hypothesis::H1, Hypothesis::H2};
  std::string embedding;
};

// Normalized, deduplicated, canonically sorted.
std::vector<ModelSpec> expand_grid(std::span<const GridBlock> blocks);

// JSON: an array of blocks (or {"grid": [...]}) with keys family,
// components, measures, pooling, levels, kappa, hypotheses, embedding. Lists
// may be given as single values; kappa accepts "none", "full" or integers.
// Throws ConfigError on unknown keys or values.
std::vector<GridBlock> parse_grid(std::string_view json_text);

// Every component, every vector measure, both hypotheses.
std::vector<GridBlock> default_original_grid();

// Embedding providers by id, plus the verbalization template they share.
class EmbeddingRegistry {
 public:
  EmbeddingRegistry();
  explicit EmbeddingRegistry(VerbalizationTemplate tmpl);

  // `fingerprint` identifies the provider content for the disk cache.
  void add(std::string id, EmbeddingProvider provider, std::string fingerprint);
  const EmbeddingProvider* find(const std::string& id) const;
  std::string fingerprint(const std::string& id) const;
  const VerbalizationTemplate& template_() const noexcept { return tmpl_; }
  void set_template(VerbalizationTemplate tmpl) { tmpl_ = std::move(tmpl); }

 private:
  VerbalizationTemplate tmpl_;
  std::map<std::string, std::pair<EmbeddingProvider, std::string>> providers_;
};

// Throws ConfigError when a spec cannot run: missing or wrong-kind provider,
// transport measure in the Original family, document level on one field,
// kappa outside [1, d'/2] (or "full"/"none"), baseline family in a grid.
void validate_spec(const ModelSpec& spec, const EmbeddingRegistry& registry);

TransitionSpec transition_spec(const ModelSpec& spec, const EmbeddingRegistry& registry,
                               bool split_whitening);

// Which training set whitening and Mahalanobis covariances are fit on: the
// training set of every (inner and outer) fold, the outer training set only,
// or every trial.
enum class WhiteningScope { Fold, Outer, All };

std::string_view to_string(WhiteningScope s);
std::optional<WhiteningScope> parse_whitening_scope(std::string_view s);

struct HarnessOptions {
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  std::size_t n_perm = 10000;
  WhiteningScope scope = WhiteningScope::Fold;
  bool split_whitening = false;
  bool cache = true;
  std::string cache_dir;  // raw distances persisted here when non-empty
};

struct EvaluationReport {
  std::vector<int> predictions;
  std::vector<int> ratings;
  // z-scored transition of each held-out trial under its fold's winner
  // (NaN for baselines).
  std::vector<double> signal;
  // Winning spec key per outer fold.
  std::vector<std::string> chosen;
  double rho = 0.0;
  double p = 1.0;
  bool degenerate = false;  // predictions or ratings constant, rho set to 0
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;

  std::map<std::string, std::size_t> chosen_histogram() const;
  // Most frequent winner; ties go to the first in key order.
  std::string modal_choice() const;
};

// Outer rho of predictions against ratings with a one-tailed permutation p.
void score_report(EvaluationReport& report, std::size_t n_perm, std::uint64_t seed);

// For each held-out trial k, every spec is scored by the Spearman rho of its
// inner leave-one-out predictions on the other N - 1 trials (constant
// predictions score 0, an undefined signal scores -inf). The best spec, first
// in canonical order on ties, is refit on the N - 1 trials and predicts k.
// Throws DegenerateError when no spec is usable for some fold, DomainError
// when a condition has fewer than three trials.
EvaluationReport nested_loocv(const StudyDataset& dataset, std::vector<ModelSpec> grid,
                              const EmbeddingRegistry& registry, const HarnessOptions& options);

// Random: uniform over 1..3. Probability: a draw from the ratings of the
// other N - 1 trials. Detective: 3 for human drivers, 1 for AI.
EvaluationReport run_baseline(Family baseline, const StudyDataset& dataset,
                              const HarnessOptions& options);

enum class KnnPhase { Pre, Post, Both };

std::string_view to_string(KnnPhase p);
std::optional<KnnPhase> parse_knn_phase(std::string_view s);

struct KnnOptions {
  Component component = Component::AA_MF;
  KnnPhase phase = KnnPhase::Both;
  std::vector<int> k_grid{1, 3, 5, 7, 9};
};

// Majority vote among the k nearest training trials (Euclidean on score
// vectors, distance ties to the lower index, vote ties to the label of the
// nearest tied neighbour). k is chosen by inner leave-one-out. Throws
// DomainError unless every k is odd and at most N - 2.
EvaluationReport knn_baseline(const StudyDataset& dataset, const KnnOptions& knn,
                              const HarnessOptions& options);

struct LoocvPrediction {
  std::vector<int> predictions;
  std::vector<double> signal;
};

// Plain leave-one-out with a fixed spec: fit on N - 1, predict the rest.
LoocvPrediction loocv_predict(const StudyDataset& dataset, const ModelSpec& spec,
                              const EmbeddingRegistry& registry, const HarnessOptions& options);

struct GroupProportions {
  int stage = 0;
  Condition condition = Condition::Human;
  std::size_t n = 0;
  std::array<double, 3> observed{};
  std::array<double, 3> simulated{};
};

struct SimulationResult {
  std::vector<int> predictions;  // dataset order
  std::vector<double> signal;
  std::vector<GroupProportions> groups;  // stage 1..3 x Human, AI
};

// Each stage is simulated by leave-one-out with its own spec (baseline
// families included). Stages without a spec are left out of the groups and
// predicted as 0.
SimulationResult simulate(const StudyDataset& dataset, const std::map<int, ModelSpec>& specs,
                          const EmbeddingRegistry& registry, const HarnessOptions& options);

// Proportions of ratings 1, 2, 3 in `ratings`.
std::array<double, 3> rating_proportions(std::span<const int> ratings);

// "1", "2", "3" or "all" for 0.
std::string stage_label(int stage);

struct Table2Row {
  std::string stage;
  std::string family;
  std::string component;
  double rho = 0.0;
  double p = 1.0;
  bool degenerate = false;
  std::string chosen;  // "key:count;key:count"
};

Table2Row table2_row(int stage, Family family, std::string component,
                     const EvaluationReport& report);

}  // namespace affect_sdt
