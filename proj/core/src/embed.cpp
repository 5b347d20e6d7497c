#include "affect_sdt/embed.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "affect_sdt/error.hpp"
#include "json.hpp"

namespace affect_sdt {

namespace {

using nlohmann::json;

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v'; }

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    std::size_t j = i;
    while (j < s.size() && !is_space(s[j])) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

// Byte offsets of code point starts, plus s.size() at the end.
std::vector<std::size_t> code_points(std::string_view s) {
  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i < s.size();) {
    starts.push_back(i);
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    if (c >= 0xF0) len = 4;
    else if (c >= 0xE0) len = 3;
    else if (c >= 0xC0) len = 2;
    i = std::min(s.size(), i + len);
  }
  starts.push_back(s.size());
  return starts;
}

std::size_t count_code_points(std::string_view s) { return code_points(s).size() - 1; }

double parse_double(std::string_view tok, std::size_t line) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (!tok.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw ParseError("word vectors line " + std::to_string(line) + ": bad number '" +
                     std::string(tok) + "'");
  }
  return v;
}

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw ParseError(what + " must be a non-empty array of rows");
  const auto rows = j.size();
  const auto cols = j[0].is_array() ? j[0].size() : 0;
  if (cols == 0) throw ParseError(what + " rows must be non-empty arrays");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw ParseError(what + " is ragged");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) throw ParseError(what + " holds a non-number");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    }
  }
  return m;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd stack_rows(const std::vector<Eigen::MatrixXd>& parts, std::size_t dim) {
  Eigen::Index rows = 0;
  for (const auto& p : parts) rows += p.rows();
  Eigen::MatrixXd out(rows, static_cast<Eigen::Index>(dim));
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p;
    at += p.rows();
  }
  return out;
}

}  // namespace

std::string_view to_string(OovPolicy p) { return p == OovPolicy::Skip ? "skip" : "error"; }

std::string_view to_string(ProviderKind k) {
  return k == ProviderKind::WordVectors ? "word_vectors" : "hidden_states";
}

std::string_view to_string(ReprLevel l) {
  return l == ReprLevel::Sentence ? "sentence" : "document";
}

void WordVectors::add(std::string token, Eigen::VectorXd v) {
  if (static_cast<std::size_t>(v.size()) != dim_) {
    throw DomainError("word vector for '" + token + "' has length " + std::to_string(v.size()) +
                      ", expected " + std::to_string(dim_));
  }
  max_token_chars_ = std::max(max_token_chars_, count_code_points(token));
  vectors_.insert_or_assign(std::move(token), std::move(v));
}

const Eigen::VectorXd* WordVectors::lookup(std::string_view token) const {
  auto it = vectors_.find(std::string(token));
  return it == vectors_.end() ? nullptr : &it->second;
}

std::vector<std::string> WordVectors::segment(std::string_view text) const {
  std::vector<std::string> tokens;
  for (auto chunk : split_ws(text)) {
    if (contains(chunk)) {
      tokens.emplace_back(chunk);
      continue;
    }
    const auto cp = code_points(chunk);
    const std::size_t n = cp.size() - 1;
    std::size_t i = 0;
    while (i < n) {
      std::size_t take = 1;
      for (std::size_t len = std::min(max_token_chars_, n - i); len > 1; --len) {
        if (contains(chunk.substr(cp[i], cp[i + len] - cp[i]))) {
          take = len;
          break;
        }
      }
      tokens.emplace_back(chunk.substr(cp[i], cp[i + take] - cp[i]));
      i += take;
    }
  }
  return tokens;
}

Eigen::MatrixXd WordVectors::embed_tokens(const std::vector<std::string>& tokens) const {
  std::vector<const Eigen::VectorXd*> found;
  for (const auto& t : tokens) {
    const auto* v = lookup(t);
    if (v) {
      found.push_back(v);
    } else if (policy_ == OovPolicy::Error) {
      throw DomainError("token '" + t + "' is not in the vocabulary");
    }
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(found.size()), static_cast<Eigen::Index>(dim_));
  for (std::size_t r = 0; r < found.size(); ++r) {
    m.row(static_cast<Eigen::Index>(r)) = found[r]->transpose();
  }
  return m;
}

WordVectors load_word_vectors(std::istream& source, OovPolicy policy) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t vocab = 0, dim = 0;
  while (std::getline(source, line)) {
    ++line_no;
    auto f = split_ws(line);
    if (f.empty()) continue;
    auto bad_header = [&] {
      return ParseError("word vectors line " + std::to_string(line_no) +
                        ": header must be '<vocab_size> <dim>'");
    };
    if (f.size() != 2) throw bad_header();
    auto p1 = std::from_chars(f[0].data(), f[0].data() + f[0].size(), vocab);
    auto p2 = std::from_chars(f[1].data(), f[1].data() + f[1].size(), dim);
    if (p1.ec != std::errc() || p2.ec != std::errc() || p1.ptr != f[0].data() + f[0].size() ||
        p2.ptr != f[1].data() + f[1].size() || dim == 0) {
      throw bad_header();
    }
    break;
  }
  if (dim == 0) throw ParseError("word vectors: missing header");
  WordVectors wv(dim, policy);
  std::size_t rows = 0;
  while (std::getline(source, line)) {
    ++line_no;
    auto f = split_ws(line);
    if (f.empty()) continue;
    if (f.size() != dim + 1) {
      throw ParseError("word vectors line " + std::to_string(line_no) + ": expected " +
                       std::to_string(dim) + " values, found " + std::to_string(f.size() - 1));
    }
    Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < dim; ++i) {
      v(static_cast<Eigen::Index>(i)) = parse_double(f[i + 1], line_no);
    }
    wv.add(std::string(f[0]), std::move(v));
    ++rows;
  }
  if (rows != vocab) {
    throw ParseError("word vectors: header declares " + std::to_string(vocab) + " entries, found " +
                     std::to_string(rows));
  }
  return wv;
}

WordVectors load_word_vectors_file(const std::string& path, OovPolicy policy) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open word vectors '" + path + "'");
  return load_word_vectors(in, policy);
}

void write_hidden_state_record(std::ostream& out, const HiddenStateRecord& r) {
  json j;
  j["trial_id"] = r.trial_id;
  j["field"] = r.field;
  j["tokens"] = r.tokens;
  j["first_layer"] = matrix_to_json(r.first_layer);
  j["last_layer"] = matrix_to_json(r.last_layer);
  j["model_id"] = r.model_id;
  j["tokenizer_id"] = r.tokenizer_id;
  out << j.dump() << '\n';
}

void HiddenStates::add(const HiddenStateRecord& r) {
  if (r.first_layer.rows() != r.last_layer.rows() || r.first_layer.cols() != r.last_layer.cols()) {
    throw ParseError("hidden states for " + r.trial_id + "/" + r.field + ": first layer is " +
                     std::to_string(r.first_layer.rows()) + "x" +
                     std::to_string(r.first_layer.cols()) + ", last layer is " +
                     std::to_string(r.last_layer.rows()) + "x" +
                     std::to_string(r.last_layer.cols()));
  }
  const auto d = static_cast<std::size_t>(r.first_layer.cols());
  if (dim_ == 0) {
    dim_ = d;
    model_id_ = r.model_id;
  } else if (d != dim_) {
    throw ParseError("hidden states for " + r.trial_id + "/" + r.field + " have dimension " +
                     std::to_string(d) + ", expected " + std::to_string(dim_));
  }
  states_.insert_or_assign({r.trial_id, r.field}, (r.first_layer + r.last_layer) / 2.0);
}

bool HiddenStates::contains(const std::string& trial_id, const std::string& field) const {
  return states_.count({trial_id, field}) > 0;
}

const Eigen::MatrixXd& HiddenStates::lookup(const std::string& trial_id,
                                            const std::string& field) const {
  auto it = states_.find({trial_id, field});
  if (it == states_.end()) {
    throw DomainError("no hidden states for trial " + trial_id + ", field " + field);
  }
  return it->second;
}

HiddenStates load_hidden_states(std::istream& source) {
  static const std::vector<std::string> keys = {"trial_id",    "field",      "tokens",
                                                "first_layer", "last_layer", "model_id",
                                                "tokenizer_id"};
  HiddenStates hs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(source, line)) {
    ++line_no;
    if (split_ws(line).empty()) continue;
    const std::string where = "hidden states line " + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(where + ": " + e.what());
    }
    if (!j.is_object()) throw ParseError(where + ": expected an object");
    for (const auto& k : keys) {
      if (!j.contains(k)) throw ParseError(where + ": missing key '" + k + "'");
    }
    for (const auto& [k, _] : j.items()) {
      if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
        throw ParseError(where + ": unknown key '" + k + "'");
      }
    }
    HiddenStateRecord r;
    try {
      r.trial_id = j.at("trial_id").get<std::string>();
      r.field = j.at("field").get<std::string>();
      r.tokens = j.at("tokens").get<std::vector<std::string>>();
      r.model_id = j.at("model_id").get<std::string>();
      r.tokenizer_id = j.at("tokenizer_id").get<std::string>();
    } catch (const json::exception& e) {
      throw ParseError(where + ": " + e.what());
    }
    r.first_layer = matrix_from_json(j.at("first_layer"), where + ": first_layer");
    r.last_layer = matrix_from_json(j.at("last_layer"), where + ": last_layer");
    if (r.tokens.empty()) throw ParseError(where + ": empty token list");
    if (static_cast<std::size_t>(r.first_layer.rows()) != r.tokens.size()) {
      throw ParseError(where + ": " + std::to_string(r.tokens.size()) + " tokens but " +
                       std::to_string(r.first_layer.rows()) + " rows");
    }
    try {
      hs.add(r);
    } catch (const ParseError& e) {
      throw ParseError(where + ": " + e.what());
    }
  }
  return hs;
}

HiddenStates load_hidden_states_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open hidden states '" + path + "'");
  return load_hidden_states(in);
}

EmbeddingProvider::EmbeddingProvider(WordVectors wv)
    : kind_(ProviderKind::WordVectors), wv_(std::make_shared<const WordVectors>(std::move(wv))) {}

EmbeddingProvider::EmbeddingProvider(HiddenStates hs)
    : kind_(ProviderKind::HiddenStates), hs_(std::make_shared<const HiddenStates>(std::move(hs))) {}

std::size_t EmbeddingProvider::dim() const noexcept {
  return kind_ == ProviderKind::WordVectors ? wv_->dim() : hs_->dim();
}

const WordVectors& EmbeddingProvider::word_vectors() const {
  if (!wv_) throw DomainError("provider holds hidden states, not word vectors");
  return *wv_;
}

const HiddenStates& EmbeddingProvider::hidden_states() const {
  if (!hs_) throw DomainError("provider holds word vectors, not hidden states");
  return *hs_;
}

std::string PoolingSpec::key() const {
  std::string k;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!k.empty()) k += '+';
    k += name;
  };
  add(max, "max");
  add(mean, "mean");
  add(min, "min");
  return k;
}

PoolingSpec parse_pooling(std::string_view s) {
  PoolingSpec p{false, false, false};
  std::size_t i = 0;
  while (i <= s.size()) {
    const auto j = std::min(s.find('+', i), s.size());
    const auto part = s.substr(i, j - i);
    if (part == "max") p.max = true;
    else if (part == "mean") p.mean = true;
    else if (part == "min") p.min = true;
    else throw ConfigError("unknown pooling operation '" + std::string(part) + "'");
    i = j + 1;
  }
  return p;
}

std::vector<std::string> represented_fields(const TrialRecord& trial, Component component,
                                            Phase phase) {
  const auto sel = select_component(trial, component, phase);
  std::vector<std::string> fields;
  for (auto e : sel.emotions) fields.emplace_back(to_string(e));
  if (sel.includes_mf && !sel.mf_text.empty()) fields.emplace_back("mixed_feelings");
  return fields;
}

Eigen::MatrixXd represent(const TrialRecord& trial, Component component, Phase phase,
                          const EmbeddingProvider& provider, ReprLevel level,
                          const VerbalizationTemplate& tmpl) {
  const auto sel = select_component(trial, component, phase);
  const std::size_t d = provider.dim();
  const std::string key = phase == Phase::Pre ? trial.baseline_id() : trial.trial_id();

  std::vector<Eigen::MatrixXd> fields;
  auto field_matrix = [&](const std::string& name, const std::vector<std::string>& tokens) {
    Eigen::MatrixXd m;
    if (provider.kind() == ProviderKind::HiddenStates) {
      m = provider.hidden_states().lookup(key, name);
    } else {
      m = provider.word_vectors().embed_tokens(tokens);
    }
    if (m.rows() == 0) {
      throw DegenerateError("empty representation for trial " + key + ", field " + name);
    }
    fields.push_back(std::move(m));
  };

  for (std::size_t i = 0; i < sel.emotions.size(); ++i) {
    std::vector<std::string> tokens;
    if (provider.kind() == ProviderKind::WordVectors) {
      const auto& wv = provider.word_vectors();
      for (auto& piece : verbalize_pieces(sel.scores[i], sel.emotions[i], tmpl)) {
        if (wv.contains(piece)) {
          tokens.push_back(piece);
        } else {
          for (auto& t : wv.segment(piece)) tokens.push_back(std::move(t));
        }
      }
    }
    field_matrix(std::string(to_string(sel.emotions[i])), tokens);
  }
  if (sel.includes_mf && !sel.mf_text.empty()) {
    std::vector<std::string> tokens;
    if (provider.kind() == ProviderKind::WordVectors) {
      tokens = provider.word_vectors().segment(sel.mf_text);
    }
    field_matrix("mixed_feelings", tokens);
  }

  if (level == ReprLevel::Sentence) return stack_rows(fields, d);
  Eigen::MatrixXd doc(static_cast<Eigen::Index>(fields.size()), static_cast<Eigen::Index>(d));
  for (std::size_t r = 0; r < fields.size(); ++r) {
    doc.row(static_cast<Eigen::Index>(r)) = fields[r].colwise().mean();
  }
  return doc;
}

Eigen::VectorXd pool(const Eigen::MatrixXd& m, const PoolingSpec& spec) {
  if (m.rows() == 0 || m.cols() == 0) throw DomainError("pool: empty matrix");
  if (spec.count() == 0) throw DomainError("pool: no pooling operation selected");
  const auto d = m.cols();
  Eigen::VectorXd out(d * static_cast<Eigen::Index>(spec.count()));
  Eigen::Index at = 0;
  if (spec.max) {
    out.segment(at, d) = m.colwise().maxCoeff().transpose();
    at += d;
  }
  if (spec.mean) {
    out.segment(at, d) = m.colwise().mean().transpose();
    at += d;
  }
  if (spec.min) out.segment(at, d) = m.colwise().minCoeff().transpose();
  return out;
}

WhiteningModel fit_whitening(std::span<const Eigen::VectorXd> vectors, int kappa) {
  if (vectors.size() < 2) throw DomainError("fit_whitening: need at least two vectors");
  const auto d = vectors.front().size();
  for (const auto& v : vectors) {
    if (v.size() != d) throw DomainError("fit_whitening: vectors differ in length");
  }
  const int full = static_cast<int>(d);
  const int keep = kappa == kKappaFull ? full : kappa;
  if (keep < 1 || keep > full) {
    throw DomainError("fit_whitening: kappa " + std::to_string(kappa) + " outside [1, " +
                      std::to_string(full) + "]");
  }
  const auto n = static_cast<Eigen::Index>(vectors.size());
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) x.row(i) = vectors[static_cast<std::size_t>(i)].transpose();

  WhiteningModel model;
  model.kappa = kappa;
  model.n = vectors.size();
  model.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - model.mean.transpose();
  Eigen::MatrixXd sigma = (centered.transpose() * centered) / static_cast<double>(n);
  sigma = (sigma + sigma.transpose()) / 2.0;

  Eigen::BDCSVD<Eigen::MatrixXd> svd(sigma, Eigen::ComputeFullU);
  const Eigen::VectorXd lambda = svd.singularValues();
  Eigen::MatrixXd u = svd.matrixU();
  const double top = lambda.size() ? lambda(0) : 0.0;
  if (!(top > 0.0)) {
    throw DegenerateError("fit_whitening: all vectors are identical");
  }
  const double tiny = 1e-8 * top;
  if (lambda(keep - 1) <= tiny) {
    int rank = 0;
    while (rank < lambda.size() && lambda(rank) > tiny) ++rank;
    throw DegenerateError("fit_whitening: covariance has numerical rank " + std::to_string(rank) +
                          "; use kappa <= " + std::to_string(rank));
  }
  model.projection.resize(d, keep);
  for (int c = 0; c < keep; ++c) {
    Eigen::VectorXd col = u.col(c);
    Eigen::Index arg = 0;
    col.cwiseAbs().maxCoeff(&arg);
    if (col(arg) < 0.0) col = -col;
    model.projection.col(c) = col / std::sqrt(lambda(c));
  }
  return model;
}

Eigen::VectorXd apply_whitening(const Eigen::VectorXd& v, const WhiteningModel& model) {
  if (v.size() != model.mean.size()) {
    throw DomainError("apply_whitening: vector has length " + std::to_string(v.size()) +
                      ", model expects " + std::to_string(model.mean.size()));
  }
  return model.projection.transpose() * (v - model.mean);
}

}  // namespace affect_sdt
