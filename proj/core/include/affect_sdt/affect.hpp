#pragma once

// Affective transition: the distance between a passenger's pre-study and
// post-stage affect representations, and its z-scored signal strength.

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "affect_sdt/corpus.hpp"
#include "affect_sdt/embed.hpp"

namespace affect_sdt {

enum class DistanceMeasure {
  Absolute,          // mean |a - b|
  AkMean,            // mean (a + b) / 2
  AkMin,             // mean min(a, b)
  AkAbsMinProduct,   // mean |a - b| * min(a, b)
  AkMaxReversed,     // mean max(a, b)
  Pearson,           // 1 - r
  Euclidean,
  Mahalanobis,
  Cosine,            // 1 - cos
  Manhattan,         // sum |a - b|
  Wmd,               // word mover's distance
  Wrd,               // word rotator's distance
};

inline constexpr DistanceMeasure kDistanceMeasures[] = {
    DistanceMeasure::Absolute,  DistanceMeasure::AkMean,          DistanceMeasure::AkMin,
    DistanceMeasure::AkAbsMinProduct, DistanceMeasure::AkMaxReversed, DistanceMeasure::Pearson,
    DistanceMeasure::Euclidean, DistanceMeasure::Mahalanobis,     DistanceMeasure::Cosine,
    DistanceMeasure::Manhattan, DistanceMeasure::Wmd,             DistanceMeasure::Wrd};

std::string_view to_string(DistanceMeasure m);
std::optional<DistanceMeasure> parse_distance(std::string_view s);

// WMD and WRD compare token matrices; every other measure compares vectors.
bool is_transport_measure(DistanceMeasure m);

// Distance between two vectors of equal length. Mahalanobis needs the
// precision matrix (inverse covariance). Throws DegenerateError where the
// measure is undefined (zero vector for cosine, constant vector for pearson)
// and DomainError on shape problems or a transport measure.
double distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b, DistanceMeasure measure,
                const Eigen::MatrixXd* precision = nullptr);

// WMD: uniform masses over rows, Euclidean ground cost. WRD: masses
// proportional to row norms, cost 1 - cosine. Identical rows are merged with
// their masses summed. Throws DegenerateError on empty matrices and, for WRD,
// zero rows.
double transport_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                          DistanceMeasure measure);

// Inverse of the sample covariance of `vectors`, after adding
// 1e-6 * trace / d to the diagonal. Throws DegenerateError when the vectors do
// not vary at all.
Eigen::MatrixXd mahalanobis_precision(std::span<const Eigen::VectorXd> vectors);

inline constexpr int kKappaNone = -1;

// How a per-trial transition is computed.
struct TransitionSpec {
  Component component = Component::AA;
  DistanceMeasure measure = DistanceMeasure::Euclidean;
  // Raw score vectors (with a 0/1 mixed-feelings coordinate) when null.
  const EmbeddingProvider* provider = nullptr;
  const VerbalizationTemplate* tmpl = nullptr;
  PoolingSpec pooling;
  ReprLevel level = ReprLevel::Sentence;
  int kappa = kKappaNone;        // kKappaNone, kKappaFull or a column count
  bool split_whitening = false;  // separate models for pre and post vectors
};

// Score vector of a trial: component emotions in DES order, followed by the
// mixed-feelings coordinate (0 before the study, has_mf after) when the
// component includes MF.
Eigen::VectorXd score_vector(const TrialRecord& trial, Component component, Phase phase);

// Fold-independent material: pooled vectors for vector measures, token
// matrices for transport measures.
struct TransitionInputs {
  std::vector<Eigen::VectorXd> pre;
  std::vector<Eigen::VectorXd> post;
  std::vector<Eigen::MatrixXd> pre_tokens;
  std::vector<Eigen::MatrixXd> post_tokens;
};

TransitionInputs prepare_transition(const StudyDataset& dataset, const TransitionSpec& spec);

// True when whitening or a Mahalanobis covariance has to be fit on data.
bool transition_is_fitted(const TransitionSpec& spec);

// Raw distance for every trial. Whitening and the Mahalanobis covariance are
// fit on the trials listed in `fit_on` (pre and post vectors together).
std::vector<double> transition_distances(const TransitionInputs& inputs,
                                         const TransitionSpec& spec,
                                         std::span<const std::size_t> fit_on);

// prepare_transition + transition_distances fit on every trial.
std::vector<double> affective_transition(const StudyDataset& dataset, const TransitionSpec& spec);

struct SignalStrength {
  std::vector<double> raw;
  std::vector<double> ss;  // (raw - mean) / sd for every trial
  double mean = 0.0;       // over the training trials
  double sd = 1.0;         // sample sd over the training trials
};

// Throws DomainError for fewer than two training values and DegenerateError
// when they do not vary.
SignalStrength z_normalize(std::span<const double> values, std::span<const std::size_t> train);

}  // namespace affect_sdt
