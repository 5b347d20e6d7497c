#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "affect_sdt/commands.hpp"
#include "affect_sdt/error.hpp"
#include "json.hpp"

namespace affect_sdt {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string resolve(const std::string& path, const std::string& base) {
  if (path.empty() || base.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base) / path).lexically_normal().string();
}

std::string read_file(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(std::string("cannot open ") + what + " '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

template <typename T>
T get(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config: '") + key + "' has the wrong type");
  }
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, _] : j.items()) {
    if (!allowed.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
  }
}

int parse_stage(const json& j) {
  if (j.is_string() && j.get<std::string>() == "all") return 0;
  if (j.is_number_integer()) {
    const int s = j.get<int>();
    if (s >= 1 && s <= 3) return s;
  }
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "1" || s == "2" || s == "3") return s[0] - '0';
  }
  throw ConfigError("config: stages are 1, 2, 3 or \"all\"");
}

}  // namespace

HarnessOptions RunConfig::harness_options() const {
  HarnessOptions h;
  h.seed = seed.value_or(0);
  h.jobs = jobs;
  h.n_perm = permutations;
  h.scope = whitening_scope();
  h.split_whitening = split_whitening;
  h.cache = cache;
  h.cache_dir = cache_dir;
  return h;
}

RunConfig parse_run_config(std::string_view text, const std::string& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  check_keys(j,
             {"data", "embeddings", "template", "grid", "seed", "jobs", "out", "force",
              "paper_faithful", "whitening_scope", "split_whitening", "stages", "baselines", "knn",
              "permutations", "bootstrap", "tails", "wilcoxon", "mann_whitney", "rsa",
              "magnitude", "affect_change_stages", "cache", "cache_dir"},
             "config");
  RunConfig c;
  if (const char* env = std::getenv("AFFECT_SDT_CACHE_DIR")) c.cache_dir = env;
  if (j.contains("data")) c.data = resolve(get<std::string>(j, "data"), base_dir);
  if (j.contains("embeddings")) {
    const auto& e = j["embeddings"];
    if (!e.is_object()) throw ConfigError("config.embeddings must be an object");
    for (const auto& [id, spec] : e.items()) {
      const std::string where = "config.embeddings." + id;
      check_keys(spec, {"kind", "path", "oov"}, where);
      EmbeddingSource src;
      src.id = id;
      const auto kind = spec.contains("kind") ? get<std::string>(spec, "kind") : "word_vectors";
      if (kind == "word_vectors") src.kind = ProviderKind::WordVectors;
      else if (kind == "hidden_states") src.kind = ProviderKind::HiddenStates;
      else throw ConfigError(where + ": kind is word_vectors or hidden_states");
      if (!spec.contains("path")) throw ConfigError(where + ": missing 'path'");
      src.path = resolve(get<std::string>(spec, "path"), base_dir);
      if (spec.contains("oov")) {
        const auto oov = get<std::string>(spec, "oov");
        if (oov == "skip") src.oov = OovPolicy::Skip;
        else if (oov == "error") src.oov = OovPolicy::Error;
        else throw ConfigError(where + ": oov is skip or error");
      }
      c.embeddings.push_back(std::move(src));
    }
  }
  if (j.contains("template")) {
    const auto t = get<std::string>(j, "template");
    c.template_name = (t == "zh" || t == "en") ? t : resolve(t, base_dir);
  }
  if (j.contains("grid")) {
    const auto& g = j["grid"];
    if (g.is_string()) {
      c.grid = parse_grid(read_file(resolve(g.get<std::string>(), base_dir), "grid file"));
    } else {
      c.grid = parse_grid(g.dump());
    }
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer()) {
      throw ConfigError("config: 'seed' must be a non-negative integer");
    }
    if (j["seed"].is_number_integer() && j["seed"].get<long long>() < 0) {
      throw ConfigError("config: 'seed' must be a non-negative integer");
    }
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("jobs")) c.jobs = get<unsigned>(j, "jobs");
  if (j.contains("out")) c.out = resolve(get<std::string>(j, "out"), base_dir);
  if (j.contains("force")) c.force = get<bool>(j, "force");
  if (j.contains("paper_faithful")) c.paper_faithful = get<bool>(j, "paper_faithful");
  if (j.contains("whitening_scope")) {
    auto s = parse_whitening_scope(get<std::string>(j, "whitening_scope"));
    if (!s) throw ConfigError("config: whitening_scope is fold, outer or all");
    c.scope = *s;
  }
  if (j.contains("split_whitening")) c.split_whitening = get<bool>(j, "split_whitening");
  if (j.contains("stages")) {
    c.stages.clear();
    for (const auto& s : j["stages"]) c.stages.push_back(parse_stage(s));
    if (c.stages.empty()) throw ConfigError("config: 'stages' is empty");
  }
  if (j.contains("baselines")) {
    c.baselines.clear();
    for (const auto& b : j["baselines"]) {
      auto f = b.is_string() ? parse_family(b.get<std::string>()) : std::nullopt;
      if (!f || !is_baseline(*f)) throw ConfigError("config: unknown baseline " + b.dump());
      c.baselines.push_back(*f);
    }
  }
  if (j.contains("knn")) {
    const auto& k = j["knn"];
    check_keys(k, {"component", "phase", "k"}, "config.knn");
    if (k.contains("component")) {
      auto comp = parse_component(get<std::string>(k, "component"));
      if (!comp) throw ConfigError("config.knn: unknown component");
      c.knn.component = *comp;
    }
    if (k.contains("phase")) {
      auto p = parse_knn_phase(get<std::string>(k, "phase"));
      if (!p) throw ConfigError("config.knn: phase is pre, post or both");
      c.knn.phase = *p;
    }
    if (k.contains("k")) c.knn.k_grid = get<std::vector<int>>(k, "k");
  }
  if (j.contains("permutations")) c.permutations = get<std::size_t>(j, "permutations");
  if (j.contains("bootstrap")) c.bootstrap = get<std::size_t>(j, "bootstrap");
  if (j.contains("tails")) {
    const auto t = get<std::string>(j, "tails");
    if (t != "directional" && t != "two") throw ConfigError("config: tails is directional or two");
    c.two_tailed = t == "two";
  }
  if (j.contains("wilcoxon")) {
    const auto& w = j["wilcoxon"];
    check_keys(w, {"exact_max_n", "continuity_correction", "force_approx"}, "config.wilcoxon");
    if (w.contains("exact_max_n")) c.wilcoxon.exact_max_n = get<std::size_t>(w, "exact_max_n");
    if (w.contains("continuity_correction")) {
      c.wilcoxon.continuity_correction = get<bool>(w, "continuity_correction");
    }
    if (w.contains("force_approx")) c.wilcoxon.force_approx = get<bool>(w, "force_approx");
  }
  if (j.contains("mann_whitney")) {
    const auto& m = j["mann_whitney"];
    check_keys(m, {"exact_max_total", "continuity_correction"}, "config.mann_whitney");
    if (m.contains("exact_max_total")) {
      c.mann_whitney.exact_max_total = get<std::size_t>(m, "exact_max_total");
    }
    if (m.contains("continuity_correction")) {
      c.mann_whitney.continuity_correction = get<bool>(m, "continuity_correction");
    }
  }
  if (j.contains("rsa")) {
    const auto& r = j["rsa"];
    check_keys(r, {"component", "measure"}, "config.rsa");
    if (r.contains("component")) {
      auto comp = parse_component(get<std::string>(r, "component"));
      if (!comp) throw ConfigError("config.rsa: unknown component");
      c.rsa.component = *comp;
    }
    if (r.contains("measure")) {
      auto m = parse_distance(get<std::string>(r, "measure"));
      if (!m || is_transport_measure(*m)) throw ConfigError("config.rsa: unsupported measure");
      c.rsa.measure = *m;
    }
  }
  if (j.contains("magnitude")) {
    const auto m = get<std::string>(j, "magnitude");
    if (m == "prediction") c.magnitude = MagnitudeMode::Prediction;
    else if (m == "tercile") c.magnitude = MagnitudeMode::Tercile;
    else throw ConfigError("config: magnitude is prediction or tercile");
  }
  if (j.contains("affect_change_stages")) {
    c.affect_change_stages.clear();
    for (const auto& s : j["affect_change_stages"]) c.affect_change_stages.push_back(parse_stage(s));
  }
  if (j.contains("cache")) c.cache = get<bool>(j, "cache");
  if (j.contains("cache_dir")) c.cache_dir = resolve(get<std::string>(j, "cache_dir"), base_dir);
  return c;
}

RunConfig load_run_config(const std::string& path) {
  const auto text = read_file(path, "config");
  return parse_run_config(text, fs::path(path).parent_path().string());
}

RunConfig resolve_config(const ConfigOverrides& o) {
  RunConfig c;
  if (o.config) {
    c = load_run_config(*o.config);
  } else if (const char* env = std::getenv("AFFECT_SDT_CACHE_DIR")) {
    c.cache_dir = env;
  }
  if (o.data) c.data = *o.data;
  if (o.seed) c.seed = *o.seed;
  if (o.jobs) c.jobs = *o.jobs;
  if (o.out) c.out = *o.out;
  if (o.grid) c.grid = parse_grid(read_file(*o.grid, "grid file"));
  if (o.force) c.force = true;
  if (o.paper_faithful) c.paper_faithful = true;
  if (c.jobs == 0) c.jobs = 1;
  return c;
}

}  // namespace affect_sdt
