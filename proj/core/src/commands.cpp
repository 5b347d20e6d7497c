#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "affect_sdt/commands.hpp"
#include "affect_sdt/error.hpp"
#include "affect_sdt/rng.hpp"

namespace affect_sdt {

namespace {

namespace fs = std::filesystem;

constexpr int kAllStages[] = {1, 2, 3, 0};

std::string fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open embedding file '" + path + "'");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

StudyDataset load_data(const RunConfig& c) {
  if (c.data.empty()) throw ConfigError("no data file given (--data or \"data\")");
  if (!fs::exists(c.data)) throw ConfigError("data file '" + c.data + "' not found");
  return load_trials_file(c.data);
}

std::uint64_t require_seed(const RunConfig& c, std::string_view command) {
  if (!c.seed) throw ConfigError(std::string(command) + " needs a seed (--seed or \"seed\")");
  return *c.seed;
}

EmbeddingRegistry build_registry(const RunConfig& c) {
  const bool builtin = c.template_name == "zh" || c.template_name == "en";
  EmbeddingRegistry reg(builtin ? builtin_template(c.template_name)
                                : load_template_file(c.template_name));
  for (const auto& src : c.embeddings) {
    if (!fs::exists(src.path)) {
      throw ConfigError("embedding '" + src.id + "': file '" + src.path + "' not found");
    }
    auto fp = fnv1a_file(src.path);
    if (src.kind == ProviderKind::WordVectors) {
      reg.add(src.id, EmbeddingProvider(load_word_vectors_file(src.path, src.oov)), fp);
    } else {
      reg.add(src.id, EmbeddingProvider(load_hidden_states_file(src.path)), fp);
    }
  }
  return reg;
}

// Embedding files named by the grid are checked before anything is loaded.
void check_grid_sources(const RunConfig& c, const std::vector<ModelSpec>& grid) {
  for (const auto& s : grid) {
    if (s.embedding.empty()) continue;
    const EmbeddingSource* found = nullptr;
    for (const auto& e : c.embeddings) {
      if (e.id == s.embedding) found = &e;
    }
    if (!found) throw ConfigError("grid names embedding '" + s.embedding + "' with no source");
    if (!fs::exists(found->path)) {
      throw ConfigError("embedding '" + found->id + "': file '" + found->path + "' not found");
    }
  }
}

std::vector<ModelSpec> model_grid(const RunConfig& c) {
  return expand_grid(c.grid.empty() ? default_original_grid() : c.grid);
}

StudyDataset stage_data(const StudyDataset& ds, int stage) {
  return stage == 0 ? ds : ds.stage(stage);
}

class OutputSet {
 public:
  OutputSet(std::string dir, bool force) : dir_(std::move(dir)), force_(force) {}

  void add(const std::string& name, std::string content) {
    files_.emplace_back(name, std::move(content));
  }

  void add_report(const AnalysisReport& report, std::string_view which,
                  std::span<const std::string> stages) {
    for (const auto& st : stages) {
      const auto filtered = filter_stage(report, st);
      for (std::size_t t = 0; t < filtered.tables.size(); ++t) {
        const auto& table = filtered.tables[t];
        const std::string stem = t == 0 ? std::string(which) : table.name;
        add(stem + "." + st + ".csv", to_csv(table));
      }
      add(std::string(which) + "." + st + ".json", to_json(filtered));
    }
    for (const auto& [fig, text] : report.series) add(fig + ".json", text + "\n");
  }

  // All or nothing: existing targets abort the write unless forced.
  void write(std::ostream& out) const {
    std::vector<std::string> clash;
    for (const auto& [name, _] : files_) {
      if (fs::exists(fs::path(dir_) / name)) clash.push_back(name);
    }
    if (!clash.empty() && !force_) {
      std::string msg = "refusing to overwrite existing output in '" + dir_ + "' (use --force):";
      for (const auto& c : clash) msg += " " + c;
      throw ConfigError(msg);
    }
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir_ + "': " + ec.message());
    for (const auto& [name, content] : files_) {
      const auto path = fs::path(dir_) / name;
      std::ofstream f(path, std::ios::binary | std::ios::trunc);
      if (!f || !(f << content)) throw Error("cannot write '" + path.string() + "'");
      out << "wrote " << path.string() << "\n";
    }
  }

 private:
  std::string dir_;
  bool force_;
  std::vector<std::pair<std::string, std::string>> files_;
};

std::vector<std::string> stage_labels(std::span<const int> stages) {
  std::vector<std::string> out;
  for (int s : stages) out.push_back(stage_label(s));
  return out;
}

template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    for (const auto& o : e.offenders()) err << "  " << o << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

std::map<int, EvaluationReport> per_stage_loocv(const StudyDataset& ds,
                                                const std::vector<ModelSpec>& grid,
                                                const EmbeddingRegistry& reg,
                                                const RunConfig& c, std::span<const int> stages,
                                                std::uint64_t seed) {
  std::map<int, EvaluationReport> out;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    auto opts = c.harness_options();
    opts.seed = derive_seed(seed, static_cast<std::uint64_t>(stages[i]));
    out[stages[i]] = nested_loocv(stage_data(ds, stages[i]), grid, reg, opts);
  }
  return out;
}

ModelSpec spec_for_key(const std::vector<ModelSpec>& grid, const std::string& key) {
  for (const auto& s : grid) {
    if (s.key() == key) return s;
  }
  throw Error("winning spec '" + key + "' is not in the grid");
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const ValidationError*>(&e)) {
    return kExitValidation;
  }
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  return kExitCompute;
}

int cmd_validate(const std::string& data_path, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (data_path.empty()) throw ConfigError("no data file given (--data)");
    if (!fs::exists(data_path)) throw ConfigError("data file '" + data_path + "' not found");
    const auto ds = load_trials_file(data_path);
    std::size_t human = 0, mf = 0;
    for (const auto& t : ds) {
      human += t.condition == Condition::Human;
      mf += t.has_mf();
    }
    out << "ok: " << ds.size() << " trials\n";
    for (int s = 1; s <= 3; ++s) out << "  stage " << s << ": " << ds.stage_count(s) << "\n";
    out << "  human: " << human << ", ai: " << ds.size() - human << "\n";
    out << "  mixed feelings: " << mf << "\n";
    return kExitOk;
  });
}

int cmd_fit(const RunConfig& c, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto seed = require_seed(c, "fit");
    const auto grid = model_grid(c);
    check_grid_sources(c, grid);
    const auto ds = load_data(c);
    const auto reg = build_registry(c);
    for (const auto& s : grid) validate_spec(s, reg);

    std::vector<std::pair<std::pair<Family, Component>, std::vector<ModelSpec>>> groups;
    for (const auto& s : grid) {
      const auto key = std::make_pair(s.family, s.component);
      if (groups.empty() || groups.back().first != key) groups.push_back({key, {}});
      groups.back().second.push_back(s);
    }

    const auto start = std::chrono::steady_clock::now();
    std::vector<Table2Row> rows;
    for (std::size_t si = 0; si < c.stages.size(); ++si) {
      const int stage = c.stages[si];
      const auto sub = stage_data(ds, stage);
      auto opts = c.harness_options();
      for (std::size_t b = 0; b < c.baselines.size(); ++b) {
        opts.seed = derive_seed(seed, si, 0x1000 + b);
        const Family f = c.baselines[b];
        const auto rep = f == Family::Knn ? knn_baseline(sub, c.knn, opts)
                                          : run_baseline(f, sub, opts);
        rows.push_back(table2_row(stage, f,
                                  f == Family::Knn ? std::string(to_string(c.knn.component))
                                                   : std::string("-"),
                                  rep));
      }
      for (std::size_t g = 0; g < groups.size(); ++g) {
        opts.seed = derive_seed(seed, si, g);
        const auto rep = nested_loocv(sub, groups[g].second, reg, opts);
        rows.push_back(table2_row(stage, groups[g].first.first,
                                  std::string(to_string(groups[g].first.second)), rep));
      }
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const auto report = table2_report(rows);
    OutputSet files(c.out, c.force);
    files.add("table2.csv", to_csv(report.tables.front()));
    files.add("table2.json", to_json(report));
    files.add_report(report, "table2", stage_labels(c.stages));
    files.write(out);
    out << rows.size() << " rows in " << std::fixed << std::setprecision(2) << secs << " s\n";
    return kExitOk;
  });
}

int cmd_analyze(const RunConfig& c, std::string_view which, std::ostream& out,
                std::ostream& err) {
  return guarded(err, [&] {
    bool known = false;
    for (auto a : kAnalyses) known = known || a == which;
    if (!known) {
      std::string msg = "unknown analysis '" + std::string(which) + "'; expected one of:";
      for (auto a : kAnalyses) msg += " " + std::string(a);
      throw ConfigError(msg);
    }
    std::vector<int> all(std::begin(kAllStages), std::end(kAllStages));
    std::vector<std::string> labels = stage_labels(all);
    AnalysisReport report;

    if (which == "turing") {
      const auto seed = require_seed(c, "turing");
      const auto ds = load_data(c);
      report = turing_test_analysis(ds, {c.two_tailed, c.bootstrap, 0.95, c.wilcoxon, seed});
    } else if (which == "rsa") {
      const auto seed = require_seed(c, "rsa");
      const auto ds = load_data(c);
      auto opts = c.rsa;
      opts.n_perm = c.permutations;
      opts.seed = seed;
      report = rsa_at_behaviour(ds, opts);
    } else if (which == "affect-change") {
      const auto ds = load_data(c);
      report = affect_change_analysis(ds, {c.affect_change_stages, c.two_tailed, c.wilcoxon});
    } else if (which == "correlations") {
      const auto ds = load_data(c);
      report = correlate_measures(ds, c.mann_whitney);
    } else {
      const auto seed = require_seed(c, which);
      const auto grid = model_grid(c);
      check_grid_sources(c, grid);
      const auto ds = load_data(c);
      const auto reg = build_registry(c);
      for (const auto& s : grid) validate_spec(s, reg);
      auto opts = c.harness_options();
      if (which == "simulate") {
        const int stages[] = {1, 2, 3};
        const auto reps = per_stage_loocv(ds, grid, reg, c, stages, seed);
        std::map<int, ModelSpec> specs;
        for (const auto& [st, rep] : reps) specs[st] = spec_for_key(grid, rep.modal_choice());
        opts.seed = derive_seed(seed, 0x73696d);
        const auto sim = simulate(ds, specs, reg, opts);
        report = simulation_report(ds, sim, c.permutations, derive_seed(seed, 0x727361));
      } else if (which == "magnitude") {
        const auto reps = per_stage_loocv(ds, grid, reg, c, c.stages, seed);
        report = magnitude_correlation(ds, reps, c.magnitude);
        labels = stage_labels(c.stages);
      } else {
        const int pooled[] = {0};
        const auto reps = per_stage_loocv(ds, grid, reg, c, pooled, seed);
        const auto spec = spec_for_key(grid, reps.at(0).modal_choice());
        opts.seed = derive_seed(seed, 0x73696d);
        const auto sim = simulate(ds, {{0, spec}}, reg, opts);
        report = wordcloud_weights(ds, sim.signal);
        labels = {"all"};
      }
    }

    OutputSet files(c.out, c.force);
    files.add_report(report, which, labels);
    files.write(out);
    return kExitOk;
  });
}

}  // namespace affect_sdt
