#pragma once

// Vector representations of verbalized affect: embedding providers, sentence
// and document matrices, pooling over time and whitening.

#include <cstddef>
#include <iosfwd>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "affect_sdt/corpus.hpp"

namespace affect_sdt {

enum class OovPolicy { Skip, Error };

std::string_view to_string(OovPolicy p);

// Static word vectors in the plain text format: a `<vocab> <dim>` header, then
// one `token v1 ... vd` line per entry.
class WordVectors {
 public:
  WordVectors() = default;
  WordVectors(std::size_t dim, OovPolicy policy) : dim_(dim), policy_(policy) {}

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return vectors_.size(); }
  OovPolicy policy() const noexcept { return policy_; }
  void set_policy(OovPolicy p) noexcept { policy_ = p; }

  // Inserts or replaces; throws DomainError on a dimension mismatch.
  void add(std::string token, Eigen::VectorXd v);
  // nullptr when the token is unknown.
  const Eigen::VectorXd* lookup(std::string_view token) const;
  bool contains(std::string_view token) const { return lookup(token) != nullptr; }

  // Whitespace split, then greedy forward maximum matching over code points
  // for chunks that are not themselves in the vocabulary. Unmatched code
  // points come back as single-character tokens.
  std::vector<std::string> segment(std::string_view text) const;

  // Token vectors stacked as rows. Unknown tokens are dropped under Skip and
  // raise DomainError under Error.
  Eigen::MatrixXd embed_tokens(const std::vector<std::string>& tokens) const;

 private:
  std::size_t dim_ = 0;
  std::size_t max_token_chars_ = 0;
  OovPolicy policy_ = OovPolicy::Skip;
  std::unordered_map<std::string, Eigen::VectorXd> vectors_;
};

// Throws ParseError naming the line on a malformed header or row.
WordVectors load_word_vectors(std::istream& source, OovPolicy policy = OovPolicy::Skip);
WordVectors load_word_vectors_file(const std::string& path, OovPolicy policy = OovPolicy::Skip);

// One line of a hidden-state JSONL file.
struct HiddenStateRecord {
  std::string trial_id;  // "<participant>#<stage>" or "<participant>#pre"
  std::string field;     // emotion name or "mixed_feelings"
  std::vector<std::string> tokens;
  Eigen::MatrixXd first_layer;  // tokens x d
  Eigen::MatrixXd last_layer;   // tokens x d
  std::string model_id;
  std::string tokenizer_id;
};

void write_hidden_state_record(std::ostream& out, const HiddenStateRecord& record);

// Per (trial_id, field): the mean of the first- and last-layer matrices.
class HiddenStates {
 public:
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return states_.size(); }
  const std::string& model_id() const noexcept { return model_id_; }

  void add(const HiddenStateRecord& record);
  bool contains(const std::string& trial_id, const std::string& field) const;
  // Throws DomainError naming the trial and field when absent.
  const Eigen::MatrixXd& lookup(const std::string& trial_id, const std::string& field) const;

 private:
  std::size_t dim_ = 0;
  std::string model_id_;
  std::map<std::pair<std::string, std::string>, Eigen::MatrixXd> states_;
};

HiddenStates load_hidden_states(std::istream& source);
HiddenStates load_hidden_states_file(const std::string& path);

enum class ProviderKind { WordVectors, HiddenStates };

std::string_view to_string(ProviderKind k);

// A word-vector table or a hidden-state store behind one interface.
class EmbeddingProvider {
 public:
  explicit EmbeddingProvider(WordVectors wv);
  explicit EmbeddingProvider(HiddenStates hs);

  ProviderKind kind() const noexcept { return kind_; }
  std::size_t dim() const noexcept;
  const WordVectors& word_vectors() const;
  const HiddenStates& hidden_states() const;

 private:
  ProviderKind kind_;
  std::shared_ptr<const WordVectors> wv_;
  std::shared_ptr<const HiddenStates> hs_;
};

enum class ReprLevel { Sentence, Document };

std::string_view to_string(ReprLevel l);

// Concatenation of the selected reductions, always in max, mean, min order.
struct PoolingSpec {
  bool max = false;
  bool mean = true;
  bool min = false;

  std::size_t count() const { return std::size_t{max} + std::size_t{mean} + std::size_t{min}; }
  std::string key() const;  // e.g. "max+mean"
  friend bool operator==(const PoolingSpec&, const PoolingSpec&) = default;
};

// Parses "max", "mean+min", ...; throws ConfigError.
PoolingSpec parse_pooling(std::string_view s);

// Field names in representation order: emotions in DES order, MF last.
std::vector<std::string> represented_fields(const TrialRecord& trial, Component component,
                                            Phase phase);

// Sentence level: token rows of every selected field stacked into one
// matrix. Document level: each field's token matrix mean-pooled to one row.
// Empty MF text is dropped; a selection with no fields left (MF before the
// study) yields a 0 x d matrix. Throws DegenerateError when a non-empty field
// has no known tokens.
Eigen::MatrixXd represent(const TrialRecord& trial, Component component, Phase phase,
                          const EmbeddingProvider& provider, ReprLevel level,
                          const VerbalizationTemplate& tmpl);

// Columnwise reductions over rows. Throws DomainError on an empty matrix or
// an empty spec.
Eigen::VectorXd pool(const Eigen::MatrixXd& m, const PoolingSpec& spec);

// Sentinel for keeping every whitened dimension.
inline constexpr int kKappaFull = 0;

struct WhiteningModel {
  Eigen::VectorXd mean;        // d'
  Eigen::MatrixXd projection;  // d' x kappa
  int kappa = kKappaFull;
  std::size_t n = 0;

  std::size_t output_dim() const { return static_cast<std::size_t>(projection.cols()); }
};

// mu = mean, Sigma = biased covariance, Sigma = U Lambda U^T by SVD and
// W = U Lambda^{-1/2} truncated to the first kappa columns. Throws DomainError
// for fewer than two vectors, unequal lengths or kappa outside [1, d'], and
// DegenerateError when a kept eigenvalue is numerically zero.
WhiteningModel fit_whitening(std::span<const Eigen::VectorXd> vectors, int kappa);

// (v - mu) W. Throws DomainError on a length mismatch.
Eigen::VectorXd apply_whitening(const Eigen::VectorXd& v, const WhiteningModel& model);

}  // namespace affect_sdt
