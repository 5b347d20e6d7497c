#pragma once

// Replication recipes: each returns named tables plus plot-ready series.

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "affect_sdt/affect.hpp"
#include "affect_sdt/corpus.hpp"
#include "affect_sdt/harness.hpp"
#include "affect_sdt/stats.hpp"

namespace affect_sdt {

// Empty cells (monostate) print as NA.
using Cell = std::variant<std::monostate, std::int64_t, double, std::string, bool>;

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  // Throws DomainError when the row width does not match the columns.
  void add_row(std::vector<Cell> row);
  // Index of a column; throws DomainError when absent.
  std::size_t column(const std::string& name) const;
};

struct AnalysisReport {
  std::string name;
  std::vector<Table> tables;
  // Figure name -> serialized JSON value.
  std::map<std::string, std::string> series;

  const Table& table(const std::string& name) const;
};

// Shortest text that reads back to the same double; NA for NaN.
std::string format_number(double v);
std::string to_csv(const Table& table);
// {"name": ..., "tables": {name: [{column: value}]}, "series": {...}}
std::string to_json(const AnalysisReport& report);
// Keeps only rows whose "stage" column equals `stage`; tables without that
// column are kept whole. Series are dropped.
AnalysisReport filter_stage(const AnalysisReport& report, const std::string& stage);

struct TuringOptions {
  bool two_tailed = false;  // otherwise AI less than chance, Human two-tailed
  std::size_t n_boot = 10000;
  double level = 0.95;
  WilcoxonOptions wilcoxon;
  std::uint64_t seed = 0;
};

// Per stage (and pooled) and condition: mean normalized rating, bootstrap CI,
// one-sample Wilcoxon against 0.5. Throws DomainError on an empty group.
AnalysisReport turing_test_analysis(const StudyDataset& dataset, const TuringOptions& options);

struct AffectChangeOptions {
  std::vector<int> stages{1, 2};
  bool two_tailed = false;  // otherwise Human greater, AI less
  WilcoxonOptions wilcoxon;
};

// Post-stage minus pre-study PA sum scores: mean, SD, z and signed-rank p.
AnalysisReport affect_change_analysis(const StudyDataset& dataset,
                                      const AffectChangeOptions& options);

// Spearman rho and two-tailed p of every pre/post item, safety, comfort and
// the mixed-feelings indicator against the rating, per stage and pooled, and
// two-tailed Mann-Whitney tests of each measure between the conditions.
AnalysisReport correlate_measures(const StudyDataset& dataset,
                                  const MannWhitneyOptions& mann_whitney = {});

struct RsaOptions {
  Component component = Component::AA;
  DistanceMeasure measure = DistanceMeasure::Euclidean;
  std::size_t n_perm = 10000;
  std::uint64_t seed = 0;
};

// Per stage and condition: RDM of raw-score transitions against RDM of
// ratings, one-tailed permutation p.
AnalysisReport rsa_at_behaviour(const StudyDataset& dataset, const RsaOptions& options);

enum class MagnitudeMode { Prediction, Tercile };

// Per stage: Spearman rho and two-tailed p of transition magnitude against
// the rating. Prediction mode uses the model's predicted rating; Tercile
// mode bins each trial's held-out signal at the 1/3 and 2/3 quantiles of the
// other trials' signals. `reports` is keyed by stage (0 = pooled).
AnalysisReport magnitude_correlation(const StudyDataset& dataset,
                                     const std::map<int, EvaluationReport>& reports,
                                     MagnitudeMode mode);

// Mixed-feelings text split at sentence punctuation, trimmed, empties dropped.
std::vector<std::string> split_mf_items(const std::string& text);

// One row per mixed-feelings item, weighted by the trial's held-out z-scored
// transition: magnitude = z - min z + 1, weight = +magnitude for human
// drivers and -magnitude for AI. Trials without mixed feelings are skipped.
AnalysisReport wordcloud_weights(const StudyDataset& dataset, std::span<const double> signal);

// Observed against simulated rating proportions per stage and condition, and
// the RSA of the two 6 x 6 condition RDMs.
AnalysisReport simulation_report(const StudyDataset& dataset, const SimulationResult& sim,
                                 std::size_t n_perm, std::uint64_t seed);

AnalysisReport table2_report(const std::vector<Table2Row>& rows);

}  // namespace affect_sdt
