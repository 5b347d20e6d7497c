#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "affect_sdt/harness.hpp"

namespace affect_sdt::detail {

// Per-dataset distance computation with in-memory and on-disk memoization.
// Only fold-independent distance vectors are persisted.
class DistanceEngine {
 public:
  DistanceEngine(const StudyDataset& dataset, const EmbeddingRegistry& registry,
                 const HarnessOptions& options);

  // Distances depend on the training set (whitening or Mahalanobis fit per fold).
  bool fitted(const ModelSpec& spec) const;
  // Distances fit on every trial. Throws DegenerateError.
  std::shared_ptr<const std::vector<double>> full(const ModelSpec& spec);
  std::vector<double> fit_on(const ModelSpec& spec, std::span<const std::size_t> train);

 private:
  std::shared_ptr<const TransitionInputs> inputs(const ModelSpec& spec);
  std::string cache_key(const ModelSpec& spec) const;

  const StudyDataset& dataset_;
  const EmbeddingRegistry& registry_;
  HarnessOptions options_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const TransitionInputs>> inputs_;
  std::map<std::string, std::shared_ptr<const std::vector<double>>> full_;
};

// z-scores distances on `train`, fits the SDT model on the training ratings
// and predicts `target`. nullopt when the training distances do not vary.
std::optional<int> predict_held_out(std::span<const double> distances,
                                    std::span<const std::size_t> train, std::size_t target,
                                    const StudyDataset& dataset, Hypothesis hypothesis,
                                    double* signal);

void require_both_conditions(const StudyDataset& dataset, std::size_t minimum);

}  // namespace affect_sdt::detail
