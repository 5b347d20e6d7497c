#include "affect_sdt/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include "affect_sdt/error.hpp"
#include "affect_sdt/parallel.hpp"
#include "affect_sdt/rng.hpp"
#include "affect_sdt/stats.hpp"
#include "harness_internal.hpp"
#include "json.hpp"

namespace affect_sdt {

namespace {

using nlohmann::json;

constexpr std::string_view kFamilyNames[] = {"Original", "PLM-wv",    "PLM-tf", "Random",
                                             "Probability", "Detective", "KNN"};

std::size_t component_rank(Component c) {
  return static_cast<std::size_t>(std::find(kComponents.begin(), kComponents.end(), c) -
                                  kComponents.begin());
}

int pooling_rank(const PoolingSpec& p) { return (p.max ? 4 : 0) + (p.mean ? 2 : 0) + (p.min ? 1 : 0); }

std::string kappa_label(int kappa) {
  if (kappa == kKappaNone) return "-";
  if (kappa == kKappaFull) return "full";
  return std::to_string(kappa);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

std::string template_fingerprint(const VerbalizationTemplate& t) {
  std::string s = t.language + '\x1f' + t.separator;
  for (const auto& x : t.intensity) s += '\x1f' + x;
  for (const auto& x : t.emotion) s += '\x1f' + x;
  return hex64(fnv1a(s));
}

template <typename T>
std::vector<T> as_list(const json& j, const char* key, T (*convert)(const json&)) {
  std::vector<T> out;
  if (j.is_array()) {
    for (const auto& e : j) out.push_back(convert(e));
  } else {
    out.push_back(convert(j));
  }
  if (out.empty()) throw ConfigError(std::string("grid: '") + key + "' is empty");
  return out;
}

std::string json_string(const json& j, const char* what) {
  if (!j.is_string()) throw ConfigError(std::string("grid: ") + what + " must be a string");
  return j.get<std::string>();
}

Component to_component(const json& j) {
  auto s = json_string(j, "component");
  auto c = parse_component(s);
  if (!c) throw ConfigError("grid: unknown component '" + s + "'");
  return *c;
}

DistanceMeasure to_measure(const json& j) {
  auto s = json_string(j, "measure");
  auto m = parse_distance(s);
  if (!m) throw ConfigError("grid: unknown distance measure '" + s + "'");
  return *m;
}

PoolingSpec to_pooling(const json& j) { return parse_pooling(json_string(j, "pooling")); }

ReprLevel to_level(const json& j) {
  auto s = json_string(j, "level");
  if (s == "sentence") return ReprLevel::Sentence;
  if (s == "document") return ReprLevel::Document;
  throw ConfigError("grid: unknown level '" + s + "'");
}

int to_kappa(const json& j) {
  if (j.is_number_integer()) {
    const int k = j.get<int>();
    if (k < 1) throw ConfigError("grid: kappa must be positive");
    return k;
  }
  auto s = json_string(j, "kappa");
  if (s == "none") return kKappaNone;
  if (s == "full") return kKappaFull;
  throw ConfigError("grid: unknown kappa '" + s + "'");
}

Hypothesis to_hypothesis(const json& j) {
  auto s = json_string(j, "hypothesis");
  if (s == "H1") return Hypothesis::H1;
  if (s == "H2") return Hypothesis::H2;
  throw ConfigError("grid: unknown hypothesis '" + s + "'");
}

GridBlock parse_block(const json& j) {
  static const std::set<std::string> keys = {"family", "components", "measures",   "pooling",
                                             "levels", "kappa",      "hypotheses", "embedding"};
  if (!j.is_object()) throw ConfigError("grid: each block must be an object");
  for (const auto& [k, _] : j.items()) {
    if (!keys.count(k)) throw ConfigError("grid: unknown key '" + k + "'");
  }
  GridBlock b;
  if (!j.contains("family")) throw ConfigError("grid: block without 'family'");
  const auto fam = json_string(j["family"], "family");
  auto f = parse_family(fam);
  if (!f) throw ConfigError("grid: unknown family '" + fam + "'");
  b.family = *f;
  if (j.contains("components")) {
    b.components = as_list<Component>(j["components"], "components", to_component);
  } else {
    b.components.assign(kComponents.begin(), kComponents.end());
  }
  if (j.contains("measures")) {
    b.measures = as_list<DistanceMeasure>(j["measures"], "measures", to_measure);
  } else {
    b.measures = {DistanceMeasure::Euclidean};
  }
  if (j.contains("pooling")) b.poolings = as_list<PoolingSpec>(j["pooling"], "pooling", to_pooling);
  if (j.contains("levels")) b.levels = as_list<ReprLevel>(j["levels"], "levels", to_level);
  if (j.contains("kappa")) b.kappas = as_list<int>(j["kappa"], "kappa", to_kappa);
  if (j.contains("hypotheses")) {
    b.hypotheses = as_list<Hypothesis>(j["hypotheses"], "hypotheses", to_hypothesis);
  }
  if (j.contains("embedding")) b.embedding = json_string(j["embedding"], "embedding");
  return b;
}

bool constant(std::span<const int> v) {
  return std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) == v.end();
}

double safe_rho(std::span<const int> pred, std::span<const int> obs) {
  if (pred.size() < 2 || constant(pred) || constant(obs)) return 0.0;
  std::vector<double> a(pred.begin(), pred.end()), b(obs.begin(), obs.end());
  return spearman(a, b);
}

std::vector<std::size_t> all_but(std::size_t n, std::size_t skip) {
  std::vector<std::size_t> v;
  v.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (i != skip) v.push_back(i);
  }
  return v;
}

}  // namespace

std::string_view to_string(Family f) { return kFamilyNames[static_cast<int>(f)]; }

std::optional<Family> parse_family(std::string_view s) {
  for (int i = 0; i < 7; ++i) {
    if (kFamilyNames[i] == s) return static_cast<Family>(i);
  }
  return std::nullopt;
}

bool is_baseline(Family f) {
  return f == Family::Random || f == Family::Probability || f == Family::Detective ||
         f == Family::Knn;
}

ModelSpec ModelSpec::normalized() const {
  ModelSpec s = *this;
  if (is_baseline(family)) {
    ModelSpec b;
    b.family = family;
    return b;
  }
  if (family == Family::Original) {
    s.pooling = PoolingSpec{};
    s.level = ReprLevel::Sentence;
    s.kappa = kKappaNone;
    s.embedding.clear();
  } else if (is_transport_measure(measure)) {
    s.pooling = PoolingSpec{};
    s.kappa = kKappaNone;
  }
  return s;
}

std::string ModelSpec::distance_key() const {
  const ModelSpec s = normalized();
  if (is_baseline(s.family)) return std::string(to_string(s.family));
  const auto k = key();
  const auto cut = k.rfind('|', k.rfind('|') - 1);
  return k.substr(0, cut) + k.substr(k.rfind('|'));
}

std::string ModelSpec::key() const {
  const ModelSpec s = normalized();
  if (is_baseline(s.family)) return std::string(to_string(s.family));
  const bool plm = s.family == Family::PlmWv || s.family == Family::PlmTf;
  std::string k(to_string(s.family));
  k += '|';
  k += to_string(s.component);
  k += '|';
  k += to_string(s.measure);
  k += '|';
  k += plm && !is_transport_measure(s.measure) ? s.pooling.key() : "-";
  k += '|';
  k += plm ? std::string(to_string(s.level)) : "-";
  k += '|';
  k += kappa_label(s.kappa);
  k += '|';
  k += to_string(s.hypothesis);
  k += '|';
  k += s.embedding.empty() ? "-" : s.embedding;
  return k;
}

bool canonical_less(const ModelSpec& x, const ModelSpec& y) {
  const ModelSpec a = x.normalized(), b = y.normalized();
  return std::make_tuple(static_cast<int>(a.family), component_rank(a.component),
                         static_cast<int>(a.measure), pooling_rank(a.pooling),
                         static_cast<int>(a.level), a.kappa, static_cast<int>(a.hypothesis),
                         std::cref(a.embedding)) <
         std::make_tuple(static_cast<int>(b.family), component_rank(b.component),
                         static_cast<int>(b.measure), pooling_rank(b.pooling),
                         static_cast<int>(b.level), b.kappa, static_cast<int>(b.hypothesis),
                         std::cref(b.embedding));
}

std::vector<ModelSpec> expand_grid(std::span<const GridBlock> blocks) {
  std::vector<ModelSpec> out;
  for (const auto& b : blocks) {
    for (auto c : b.components)
      for (auto m : b.measures)
        for (const auto& p : b.poolings)
          for (auto l : b.levels)
            for (auto k : b.kappas)
              for (auto h : b.hypotheses) {
                ModelSpec s;
                s.family = b.family;
                s.component = c;
                s.measure = m;
                s.pooling = p;
                s.level = l;
                s.kappa = k;
                s.hypothesis = h;
                s.embedding = b.embedding;
                out.push_back(s.normalized());
              }
  }
  std::sort(out.begin(), out.end(), canonical_less);
  out.erase(std::unique(out.begin(), out.end(),
                        [](const ModelSpec& a, const ModelSpec& b) { return a.key() == b.key(); }),
            out.end());
  return out;
}

std::vector<GridBlock> parse_grid(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("grid: ") + e.what());
  }
  if (j.is_object() && j.contains("grid")) {
    if (j.size() != 1) throw ConfigError("grid: only the key 'grid' is allowed at top level");
    j = j["grid"];
  }
  std::vector<GridBlock> blocks;
  if (j.is_array()) {
    for (const auto& b : j) blocks.push_back(parse_block(b));
  } else {
    blocks.push_back(parse_block(j));
  }
  if (blocks.empty()) throw ConfigError("grid: no blocks");
  return blocks;
}

std::vector<GridBlock> default_original_grid() {
  GridBlock b;
  b.family = Family::Original;
  b.components.assign(kComponents.begin(), kComponents.end());
  for (auto m : kDistanceMeasures) {
    if (!is_transport_measure(m)) b.measures.push_back(m);
  }
  return {b};
}

EmbeddingRegistry::EmbeddingRegistry() = default;

EmbeddingRegistry::EmbeddingRegistry(VerbalizationTemplate tmpl) : tmpl_(std::move(tmpl)) {}

void EmbeddingRegistry::add(std::string id, EmbeddingProvider provider, std::string fingerprint) {
  providers_.insert_or_assign(std::move(id),
                              std::make_pair(std::move(provider), std::move(fingerprint)));
}

const EmbeddingProvider* EmbeddingRegistry::find(const std::string& id) const {
  auto it = providers_.find(id);
  return it == providers_.end() ? nullptr : &it->second.first;
}

std::string EmbeddingRegistry::fingerprint(const std::string& id) const {
  auto it = providers_.find(id);
  return it == providers_.end() ? std::string() : it->second.second;
}

void validate_spec(const ModelSpec& raw, const EmbeddingRegistry& registry) {
  const ModelSpec s = raw.normalized();
  if (is_baseline(s.family)) {
    throw ConfigError("baseline family " + std::string(to_string(s.family)) +
                      " cannot appear in a model grid");
  }
  if (s.family == Family::Original) {
    if (is_transport_measure(s.measure)) {
      throw ConfigError("Original family cannot use " + std::string(to_string(s.measure)));
    }
    return;
  }
  const auto* provider = registry.find(s.embedding);
  if (!provider) {
    throw ConfigError("spec " + s.key() + " names unknown embedding '" + s.embedding + "'");
  }
  const auto want =
      s.family == Family::PlmWv ? ProviderKind::WordVectors : ProviderKind::HiddenStates;
  if (provider->kind() != want) {
    throw ConfigError("spec " + s.key() + ": embedding '" + s.embedding + "' holds " +
                      std::string(to_string(provider->kind())));
  }
  if (s.level == ReprLevel::Document && s.component == Component::MF) {
    throw ConfigError("spec " + s.key() + ": document level needs more than one field");
  }
  if (!is_transport_measure(s.measure)) {
    if (s.pooling.count() == 0) throw ConfigError("spec " + s.key() + ": empty pooling");
    const int dprime = static_cast<int>(s.pooling.count() * provider->dim());
    if (s.kappa != kKappaNone && s.kappa != kKappaFull && (s.kappa < 1 || s.kappa > dprime / 2)) {
      throw ConfigError("spec " + s.key() + ": kappa must lie in [1, " + std::to_string(dprime / 2) +
                        "] or be 'full'");
    }
  }
}

TransitionSpec transition_spec(const ModelSpec& raw, const EmbeddingRegistry& registry,
                               bool split_whitening) {
  const ModelSpec s = raw.normalized();
  TransitionSpec t;
  t.component = s.component;
  t.measure = s.measure;
  t.pooling = s.pooling;
  t.level = s.level;
  t.kappa = s.kappa;
  t.split_whitening = split_whitening;
  if (s.family != Family::Original) {
    t.provider = registry.find(s.embedding);
    t.tmpl = &registry.template_();
  }
  return t;
}

std::string_view to_string(WhiteningScope s) {
  switch (s) {
    case WhiteningScope::Fold: return "fold";
    case WhiteningScope::Outer: return "outer";
    case WhiteningScope::All: return "all";
  }
  return "fold";
}

std::optional<WhiteningScope> parse_whitening_scope(std::string_view s) {
  if (s == "fold") return WhiteningScope::Fold;
  if (s == "outer") return WhiteningScope::Outer;
  if (s == "all") return WhiteningScope::All;
  return std::nullopt;
}

std::map<std::string, std::size_t> EvaluationReport::chosen_histogram() const {
  std::map<std::string, std::size_t> h;
  for (const auto& c : chosen) ++h[c];
  return h;
}

std::string EvaluationReport::modal_choice() const {
  std::string best;
  std::size_t count = 0;
  for (const auto& [k, c] : chosen_histogram()) {
    if (c > count) {
      best = k;
      count = c;
    }
  }
  return best;
}

void score_report(EvaluationReport& r, std::size_t n_perm, std::uint64_t seed) {
  r.degenerate = r.predictions.size() < 3 || constant(r.predictions) || constant(r.ratings);
  if (r.degenerate) {
    r.rho = 0.0;
    r.p = 1.0;
    return;
  }
  std::vector<double> a(r.predictions.begin(), r.predictions.end());
  std::vector<double> b(r.ratings.begin(), r.ratings.end());
  const auto t = perm_test_rho(a, b, n_perm, Tail::OneGreater, derive_seed(seed, 0x7065726dULL));
  r.rho = t.statistic;
  r.p = t.p;
}

namespace detail {

DistanceEngine::DistanceEngine(const StudyDataset& dataset, const EmbeddingRegistry& registry,
                               const HarnessOptions& options)
    : dataset_(dataset), registry_(registry), options_(options) {}

bool DistanceEngine::fitted(const ModelSpec& spec) const {
  return options_.scope != WhiteningScope::All &&
         transition_is_fitted(transition_spec(spec, registry_, options_.split_whitening));
}

std::string DistanceEngine::cache_key(const ModelSpec& spec) const {
  const auto t = transition_spec(spec, registry_, options_.split_whitening);
  std::string key = "affect_sdt-distances-v1|" + hex64(dataset_.digest()) + '|' + spec.distance_key();
  if (t.provider) {
    key += '|' + registry_.fingerprint(spec.normalized().embedding) + '|' +
           template_fingerprint(registry_.template_());
  }
  if (transition_is_fitted(t)) key += t.split_whitening ? "|split" : "|shared";
  return key;
}

std::shared_ptr<const TransitionInputs> DistanceEngine::inputs(const ModelSpec& spec) {
  const auto compute = [&] {
    return std::make_shared<const TransitionInputs>(
        prepare_transition(dataset_, transition_spec(spec, registry_, options_.split_whitening)));
  };
  if (!options_.cache) return compute();
  const auto key = spec.distance_key();
  {
    std::lock_guard lock(mutex_);
    auto it = inputs_.find(key);
    if (it != inputs_.end()) return it->second;
  }
  auto made = compute();
  std::lock_guard lock(mutex_);
  return inputs_.emplace(key, made).first->second;
}

std::vector<double> DistanceEngine::fit_on(const ModelSpec& spec,
                                           std::span<const std::size_t> train) {
  const auto in = inputs(spec);
  return transition_distances(*in, transition_spec(spec, registry_, options_.split_whitening),
                              train);
}

std::shared_ptr<const std::vector<double>> DistanceEngine::full(const ModelSpec& spec) {
  const auto key = spec.distance_key();
  if (options_.cache) {
    std::lock_guard lock(mutex_);
    auto it = full_.find(key);
    if (it != full_.end()) return it->second;
  }
  std::shared_ptr<const std::vector<double>> result;
  const bool disk = options_.cache && !options_.cache_dir.empty();
  std::filesystem::path file;
  const std::string ck = disk ? cache_key(spec) : std::string();
  if (disk) {
    file = std::filesystem::path(options_.cache_dir) / (hex64(fnv1a(ck)) + ".bin");
    std::ifstream in(file, std::ios::binary);
    if (in) {
      std::uint64_t len = 0, n = 0;
      in.read(reinterpret_cast<char*>(&len), sizeof len);
      std::string stored(len < (1u << 20) ? len : 0, '\0');
      in.read(stored.data(), static_cast<std::streamsize>(stored.size()));
      in.read(reinterpret_cast<char*>(&n), sizeof n);
      if (in && stored == ck && n == dataset_.size()) {
        std::vector<double> v(n);
        in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
        if (in) result = std::make_shared<const std::vector<double>>(std::move(v));
      }
    }
  }
  if (!result) {
    std::vector<std::size_t> all(dataset_.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    result = std::make_shared<const std::vector<double>>(fit_on(spec, all));
    if (disk) {
      std::error_code ec;
      std::filesystem::create_directories(options_.cache_dir, ec);
      const auto tmp = file.string() + ".tmp" + std::to_string(fnv1a(key) ^ dataset_.digest());
      std::ofstream out(tmp, std::ios::binary);
      if (out) {
        const std::uint64_t len = ck.size(), n = result->size();
        out.write(reinterpret_cast<const char*>(&len), sizeof len);
        out.write(ck.data(), static_cast<std::streamsize>(ck.size()));
        out.write(reinterpret_cast<const char*>(&n), sizeof n);
        out.write(reinterpret_cast<const char*>(result->data()),
                  static_cast<std::streamsize>(n * sizeof(double)));
        out.close();
        if (out) std::filesystem::rename(tmp, file, ec);
        if (ec) std::filesystem::remove(tmp, ec);
      }
    }
  }
  if (!options_.cache) return result;
  std::lock_guard lock(mutex_);
  return full_.emplace(key, result).first->second;
}

std::optional<int> predict_held_out(std::span<const double> distances,
                                    std::span<const std::size_t> train, std::size_t target,
                                    const StudyDataset& dataset, Hypothesis hypothesis,
                                    double* signal) {
  double sum = 0.0;
  for (auto i : train) sum += distances[i];
  const double m = sum / static_cast<double>(train.size());
  double ss = 0.0;
  for (auto i : train) ss += (distances[i] - m) * (distances[i] - m);
  const double sd = std::sqrt(ss / static_cast<double>(train.size() - 1));
  if (!(sd > 1e-12 * std::max(1.0, std::abs(m))) || !std::isfinite(sd)) return std::nullopt;
  std::vector<Observation> obs;
  obs.reserve(train.size());
  for (auto i : train) obs.push_back({dataset[i].rating, dataset[i].condition});
  const auto model = fit_sdt(obs, hypothesis);
  const double z = (distances[target] - m) / sd;
  if (signal) *signal = z;
  return predict(z, dataset[target].condition, model);
}

void require_both_conditions(const StudyDataset& dataset, std::size_t minimum) {
  std::size_t human = 0, ai = 0;
  for (const auto& t : dataset) (t.condition == Condition::Human ? human : ai)++;
  if (human < minimum || ai < minimum) {
    throw DomainError("need at least " + std::to_string(minimum) +
                      " trials per condition, found " + std::to_string(human) + " human and " +
                      std::to_string(ai) + " AI");
  }
}

}  // namespace detail

EvaluationReport nested_loocv(const StudyDataset& dataset, std::vector<ModelSpec> grid,
                              const EmbeddingRegistry& registry, const HarnessOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  if (grid.empty()) throw DomainError("nested_loocv: empty grid");
  detail::require_both_conditions(dataset, 3);
  for (auto& s : grid) {
    validate_spec(s, registry);
    s = s.normalized();
  }
  std::sort(grid.begin(), grid.end(), canonical_less);
  grid.erase(std::unique(grid.begin(), grid.end(),
                         [](const ModelSpec& a, const ModelSpec& b) { return a.key() == b.key(); }),
             grid.end());

  // Specs sharing distances, in canonical order of their first member.
  std::vector<std::vector<std::size_t>> groups;
  {
    std::map<std::string, std::size_t> at;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      auto [it, fresh] = at.emplace(grid[i].distance_key(), groups.size());
      if (fresh) groups.emplace_back();
      groups[it->second].push_back(i);
    }
  }

  detail::DistanceEngine engine(dataset, registry, options);
  const std::size_t n = dataset.size();
  std::vector<int> ratings(n);
  for (std::size_t i = 0; i < n; ++i) ratings[i] = dataset[i].rating;

  // Fold-independent distances; nullptr marks a degenerate group.
  std::vector<std::shared_ptr<const std::vector<double>>> shared(groups.size());
  std::vector<bool> fitted(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& spec = grid[groups[g].front()];
    fitted[g] = engine.fitted(spec);
    if (fitted[g] || !options.cache) continue;
    try {
      shared[g] = engine.full(spec);
    } catch (const DegenerateError&) {
      shared[g] = nullptr;
    }
  }
  auto full_distances = [&](std::size_t g) -> std::shared_ptr<const std::vector<double>> {
    if (options.cache) return shared[g];
    try {
      return engine.full(grid[groups[g].front()]);
    } catch (const DegenerateError&) {
      return nullptr;
    }
  };

  EvaluationReport report;
  report.seed = options.seed;
  report.ratings = ratings;
  report.predictions.assign(n, 0);
  report.signal.assign(n, std::numeric_limits<double>::quiet_NaN());
  report.chosen.assign(n, std::string());

  parallel_for(n, options.jobs, [&](std::size_t k) {
    const auto train = all_but(n, k);
    std::vector<int> inner_obs;
    for (auto j : train) inner_obs.push_back(ratings[j]);

    std::vector<double> score(grid.size(), -std::numeric_limits<double>::infinity());
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const auto& lead = grid[groups[g].front()];
      std::shared_ptr<const std::vector<double>> base;
      if (!fitted[g]) {
        base = full_distances(g);
        if (!base) continue;
      } else if (options.scope == WhiteningScope::Outer) {
        try {
          base = std::make_shared<const std::vector<double>>(engine.fit_on(lead, train));
        } catch (const DegenerateError&) {
          continue;
        }
      }
      const std::size_t h = groups[g].size();
      std::vector<std::vector<int>> preds(h, std::vector<int>(train.size()));
      std::vector<bool> ok(h, true);
      for (std::size_t jj = 0; jj < train.size(); ++jj) {
        std::vector<std::size_t> t;
        t.reserve(train.size() - 1);
        for (auto i : train) {
          if (i != train[jj]) t.push_back(i);
        }
        std::shared_ptr<const std::vector<double>> d = base;
        if (!d) {
          try {
            d = std::make_shared<const std::vector<double>>(engine.fit_on(lead, t));
          } catch (const DegenerateError&) {
            std::fill(ok.begin(), ok.end(), false);
            break;
          }
        }
        for (std::size_t q = 0; q < h; ++q) {
          if (!ok[q]) continue;
          auto p = detail::predict_held_out(*d, t, train[jj], dataset,
                                            grid[groups[g][q]].hypothesis, nullptr);
          if (!p) {
            ok[q] = false;
          } else {
            preds[q][jj] = *p;
          }
        }
        if (std::none_of(ok.begin(), ok.end(), [](bool b) { return b; })) break;
      }
      for (std::size_t q = 0; q < h; ++q) {
        if (ok[q]) score[groups[g][q]] = safe_rho(preds[q], inner_obs);
      }
    }

    std::size_t best = grid.size();
    for (std::size_t s = 0; s < grid.size(); ++s) {
      if (score[s] == -std::numeric_limits<double>::infinity()) continue;
      if (best == grid.size() || score[s] > score[best]) best = s;
    }
    if (best == grid.size()) {
      throw DegenerateError("nested_loocv: no usable spec when holding out trial " +
                            dataset[k].trial_id());
    }
    const auto& winner = grid[best];
    std::vector<double> d;
    std::size_t g = 0;
    while (std::find(groups[g].begin(), groups[g].end(), best) == groups[g].end()) ++g;
    if (fitted[g]) {
      d = engine.fit_on(winner, train);
    } else {
      d = *full_distances(g);
    }
    double signal = 0.0;
    auto p = detail::predict_held_out(d, train, k, dataset, winner.hypothesis, &signal);
    if (!p) {
      throw DegenerateError("nested_loocv: winning spec " + winner.key() +
                            " has no signal variance when holding out " + dataset[k].trial_id());
    }
    report.predictions[k] = *p;
    report.signal[k] = signal;
    report.chosen[k] = winner.key();
  });

  score_report(report, options.n_perm, options.seed);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

LoocvPrediction loocv_predict(const StudyDataset& dataset, const ModelSpec& raw,
                              const EmbeddingRegistry& registry, const HarnessOptions& options) {
  const ModelSpec spec = raw.normalized();
  LoocvPrediction out;
  const std::size_t n = dataset.size();
  if (is_baseline(spec.family)) {
    const auto r = spec.family == Family::Knn ? knn_baseline(dataset, KnnOptions{}, options)
                                              : run_baseline(spec.family, dataset, options);
    out.predictions = r.predictions;
    out.signal = r.signal;
    return out;
  }
  validate_spec(spec, registry);
  detail::require_both_conditions(dataset, 2);
  detail::DistanceEngine engine(dataset, registry, options);
  const bool fitted = engine.fitted(spec);
  std::shared_ptr<const std::vector<double>> shared;
  if (!fitted) shared = engine.full(spec);
  out.predictions.assign(n, 0);
  out.signal.assign(n, 0.0);
  parallel_for(n, options.jobs, [&](std::size_t k) {
    const auto train = all_but(n, k);
    std::vector<double> d = fitted ? engine.fit_on(spec, train) : *shared;
    auto p = detail::predict_held_out(d, train, k, dataset, spec.hypothesis, &out.signal[k]);
    if (!p) {
      throw DegenerateError("spec " + spec.key() + " has no signal variance when holding out " +
                            dataset[k].trial_id());
    }
    out.predictions[k] = *p;
  });
  return out;
}

std::array<double, 3> rating_proportions(std::span<const int> ratings) {
  std::array<double, 3> p{};
  if (ratings.empty()) return p;
  for (int r : ratings) {
    if (r >= 1 && r <= 3) p[static_cast<std::size_t>(r - 1)] += 1.0;
  }
  for (auto& x : p) x /= static_cast<double>(ratings.size());
  return p;
}

SimulationResult simulate(const StudyDataset& dataset, const std::map<int, ModelSpec>& specs,
                          const EmbeddingRegistry& registry, const HarnessOptions& options) {
  SimulationResult out;
  out.predictions.assign(dataset.size(), 0);
  out.signal.assign(dataset.size(), std::numeric_limits<double>::quiet_NaN());
  for (const auto& [stage, spec] : specs) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (stage == 0 || dataset[i].stage == stage) rows.push_back(i);
    }
    std::vector<TrialRecord> subset;
    for (auto i : rows) subset.push_back(dataset[i]);
    HarnessOptions opt = options;
    opt.seed = derive_seed(options.seed, static_cast<std::uint64_t>(stage));
    const auto pred = loocv_predict(StudyDataset(std::move(subset)), spec, registry, opt);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      out.predictions[rows[r]] = pred.predictions[r];
      out.signal[rows[r]] = pred.signal[r];
    }
  }
  for (int stage = 1; stage <= 3; ++stage) {
    if (!specs.count(stage) && !specs.count(0)) continue;
    for (auto cond : {Condition::Human, Condition::AI}) {
      std::vector<int> obs, sim;
      for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (dataset[i].stage == stage && dataset[i].condition == cond) {
          obs.push_back(dataset[i].rating);
          sim.push_back(out.predictions[i]);
        }
      }
      GroupProportions g;
      g.stage = stage;
      g.condition = cond;
      g.n = obs.size();
      g.observed = rating_proportions(obs);
      g.simulated = rating_proportions(sim);
      out.groups.push_back(g);
    }
  }
  return out;
}

std::string stage_label(int stage) { return stage == 0 ? "all" : std::to_string(stage); }

Table2Row table2_row(int stage, Family family, std::string component,
                     const EvaluationReport& report) {
  Table2Row row;
  row.stage = stage_label(stage);
  row.family = std::string(to_string(family));
  row.component = std::move(component);
  row.rho = report.rho;
  row.p = report.p;
  row.degenerate = report.degenerate;
  for (const auto& [k, c] : report.chosen_histogram()) {
    if (!row.chosen.empty()) row.chosen += ';';
    row.chosen += k + ':' + std::to_string(c);
  }
  return row;
}

}  // namespace affect_sdt
