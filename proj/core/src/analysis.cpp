#include "affect_sdt/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "affect_sdt/error.hpp"
#include "affect_sdt/rdm.hpp"
#include "affect_sdt/rng.hpp"
#include "csv.hpp"
#include "json.hpp"

namespace affect_sdt {

namespace {

using nlohmann::ordered_json;

const int kStages[] = {1, 2, 3, 0};

std::vector<const TrialRecord*> group(const StudyDataset& ds, int stage,
                                      std::optional<Condition> cond) {
  std::vector<const TrialRecord*> out;
  for (const auto& t : ds) {
    if ((stage == 0 || t.stage == stage) && (!cond || t.condition == *cond)) out.push_back(&t);
  }
  return out;
}

ordered_json cell_json(const Cell& c) {
  return std::visit(
      [](const auto& v) -> ordered_json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::monostate>) {
          return nullptr;
        } else if constexpr (std::is_same_v<T, double>) {
          if (!std::isfinite(v)) return nullptr;
          return v;
        } else {
          return v;
        }
      },
      c);
}

std::string cell_text(const Cell& c) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::monostate>) {
          return "NA";
        } else if constexpr (std::is_same_v<T, double>) {
          return format_number(v);
        } else if constexpr (std::is_same_v<T, bool>) {
          return v ? "true" : "false";
        } else if constexpr (std::is_same_v<T, std::int64_t>) {
          return std::to_string(v);
        } else {
          return v;
        }
      },
      c);
}

Tail tail_for(Condition c, bool two_tailed, Tail human, Tail ai) {
  if (two_tailed) return Tail::Two;
  return c == Condition::Human ? human : ai;
}

std::int64_t as_int(std::size_t n) { return static_cast<std::int64_t>(n); }

std::vector<std::size_t> code_point_starts(const std::string& s) {
  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i < s.size();) {
    starts.push_back(i);
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = c >= 0xF0 ? 4 : c >= 0xE0 ? 3 : c >= 0xC0 ? 2 : 1;
    i = std::min(s.size(), i + len);
  }
  starts.push_back(s.size());
  return starts;
}

std::string trim(const std::string& s) {
  const auto* ws = " \t\r\n\f\v";
  const auto a = s.find_first_not_of(ws);
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(ws);
  return s.substr(a, b - a + 1);
}

}  // namespace

void Table::add_row(std::vector<Cell> row) {
  if (row.size() != columns.size()) {
    throw DomainError("table " + name + ": row has " + std::to_string(row.size()) +
                      " cells, expected " + std::to_string(columns.size()));
  }
  rows.push_back(std::move(row));
}

std::size_t Table::column(const std::string& col) const {
  auto it = std::find(columns.begin(), columns.end(), col);
  if (it == columns.end()) throw DomainError("table " + name + " has no column " + col);
  return static_cast<std::size_t>(it - columns.begin());
}

const Table& AnalysisReport::table(const std::string& table_name) const {
  for (const auto& t : tables) {
    if (t.name == table_name) return t;
  }
  throw DomainError("report " + name + " has no table " + table_name);
}

std::string format_number(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string to_csv(const Table& table) {
  std::ostringstream out;
  csv::write_row(out, table.columns);
  for (const auto& row : table.rows) {
    std::vector<std::string> fields;
    for (const auto& c : row) fields.push_back(cell_text(c));
    csv::write_row(out, fields);
  }
  return out.str();
}

std::string to_json(const AnalysisReport& report) {
  ordered_json j;
  j["name"] = report.name;
  ordered_json tables = ordered_json::object();
  for (const auto& t : report.tables) {
    ordered_json rows = ordered_json::array();
    for (const auto& r : t.rows) {
      ordered_json o = ordered_json::object();
      for (std::size_t c = 0; c < t.columns.size(); ++c) o[t.columns[c]] = cell_json(r[c]);
      rows.push_back(std::move(o));
    }
    tables[t.name] = std::move(rows);
  }
  j["tables"] = std::move(tables);
  ordered_json series = ordered_json::object();
  for (const auto& [k, v] : report.series) series[k] = ordered_json::parse(v);
  j["series"] = std::move(series);
  return j.dump(2) + "\n";
}

AnalysisReport filter_stage(const AnalysisReport& report, const std::string& stage) {
  AnalysisReport out;
  out.name = report.name;
  for (const auto& t : report.tables) {
    auto it = std::find(t.columns.begin(), t.columns.end(), "stage");
    if (it == t.columns.end()) {
      out.tables.push_back(t);
      continue;
    }
    const auto col = static_cast<std::size_t>(it - t.columns.begin());
    Table f{t.name, t.columns, {}};
    for (const auto& r : t.rows) {
      if (cell_text(r[col]) == stage) f.rows.push_back(r);
    }
    out.tables.push_back(std::move(f));
  }
  return out;
}

AnalysisReport turing_test_analysis(const StudyDataset& dataset, const TuringOptions& options) {
  AnalysisReport report;
  report.name = "turing";
  Table t{"turing",
          {"stage", "condition", "n", "mean", "ci_lo", "ci_hi", "statistic", "z", "p", "tail",
           "method", "note"},
          {}};
  ordered_json fig = ordered_json::array();
  std::uint64_t stream = 0;
  for (int stage : kStages) {
    for (auto cond : {Condition::Human, Condition::AI}) {
      const auto g = group(dataset, stage, cond);
      if (g.empty()) {
        throw DomainError("turing: no " + std::string(to_string(cond)) + " trials in stage " +
                          stage_label(stage));
      }
      std::vector<double> x;
      for (const auto* r : g) x.push_back(normalize_rating(r->rating));
      const double m = mean(x);
      std::pair<double, double> ci{m, m};
      if (x.size() >= 2) {
        ci = bootstrap_ci(x, options.level, options.n_boot, derive_seed(options.seed, stream));
      }
      ++stream;
      const Tail tail = tail_for(cond, options.two_tailed, Tail::Two, Tail::OneLess);
      Cell stat, z, p, method;
      std::string note;
      try {
        const auto w = wilcoxon_signed_rank(x, 0.5, tail, options.wilcoxon);
        stat = w.statistic;
        z = w.method == TestMethod::Exact ? Cell() : Cell(w.z);
        p = w.p;
        method = std::string(to_string(w.method));
      } catch (const DegenerateError&) {
        note = "all ratings at chance";
      }
      t.add_row({stage_label(stage), std::string(to_string(cond)), as_int(x.size()), m, ci.first,
                 ci.second, stat, z, p, std::string(to_string(tail)), method, note});
      ordered_json e;
      e["stage"] = stage_label(stage);
      e["condition"] = to_string(cond);
      e["n"] = x.size();
      e["mean"] = m;
      e["ci"] = {ci.first, ci.second};
      e["p"] = cell_json(p);
      fig.push_back(std::move(e));
    }
  }
  report.tables.push_back(std::move(t));
  report.series["fig4"] = fig.dump();
  return report;
}

AnalysisReport affect_change_analysis(const StudyDataset& dataset,
                                      const AffectChangeOptions& options) {
  AnalysisReport report;
  report.name = "affect-change";
  Table t{"affect_change",
          {"stage", "condition", "n", "delta_mean", "sd", "statistic", "z", "p", "tail", "method",
           "note"},
          {}};
  const auto pa = component_emotions(Component::PA);
  for (int stage : options.stages) {
    for (auto cond : {Condition::Human, Condition::AI}) {
      const auto g = group(dataset, stage, cond);
      std::vector<double> diff;
      for (const auto* r : g) {
        double d = 0.0;
        for (auto e : pa) d += r->post[e] - r->pre[e];
        diff.push_back(d);
      }
      const Tail tail = tail_for(cond, options.two_tailed, Tail::OneGreater, Tail::OneLess);
      Cell dm, sd, stat, z, p, method;
      std::string note;
      if (!diff.empty()) dm = mean(diff);
      if (diff.size() >= 2) sd = sample_sd(diff);
      if (diff.empty()) {
        note = "empty group";
      } else {
        try {
          const auto w = wilcoxon_signed_rank(diff, 0.0, tail, options.wilcoxon);
          stat = w.statistic;
          z = w.method == TestMethod::Exact ? Cell() : Cell(w.z);
          p = w.p;
          method = std::string(to_string(w.method));
        } catch (const DegenerateError&) {
          note = "all differences zero";
        }
      }
      t.add_row({stage_label(stage), std::string(to_string(cond)), as_int(diff.size()), dm, sd,
                 stat, z, p, std::string(to_string(tail)), method, note});
    }
  }
  report.tables.push_back(std::move(t));
  return report;
}

AnalysisReport correlate_measures(const StudyDataset& dataset,
                                  const MannWhitneyOptions& mann_whitney) {
  AnalysisReport report;
  report.name = "correlations";
  Table t{"correlations", {"stage", "measure", "n", "rho", "p", "note"}, {}};
  struct Measure {
    std::string name;
    double (*get)(const TrialRecord&, std::size_t);
    std::size_t arg;
  };
  std::vector<Measure> measures;
  for (std::size_t e = 0; e < 6; ++e) {
    measures.push_back({"pre_" + std::string(to_string(kEmotions[e])),
                        [](const TrialRecord& r, std::size_t i) {
                          return static_cast<double>(r.pre.scores[i]);
                        },
                        e});
  }
  for (std::size_t e = 0; e < 6; ++e) {
    measures.push_back({"post_" + std::string(to_string(kEmotions[e])),
                        [](const TrialRecord& r, std::size_t i) {
                          return static_cast<double>(r.post.scores[i]);
                        },
                        e});
  }
  measures.push_back(
      {"safety", [](const TrialRecord& r, std::size_t) { return double(r.safety); }, 0});
  measures.push_back(
      {"comfort", [](const TrialRecord& r, std::size_t) { return double(r.comfort); }, 0});
  measures.push_back(
      {"mixed_feelings", [](const TrialRecord& r, std::size_t) { return r.has_mf() ? 1.0 : 0.0; },
       0});
  for (int stage : kStages) {
    const auto g = group(dataset, stage, std::nullopt);
    for (const auto& m : measures) {
      std::vector<double> x, b;
      for (const auto* r : g) {
        x.push_back(m.get(*r, m.arg));
        b.push_back(r->rating);
      }
      Cell rho, p;
      std::string note;
      if (g.size() < 3) {
        note = "too few trials";
      } else {
        try {
          const double r = spearman(x, b);
          rho = r;
          p = spearman_p_two_tailed(r, g.size());
        } catch (const DegenerateError&) {
          note = "constant";
        }
      }
      t.add_row({stage_label(stage), m.name, as_int(g.size()), rho, p, note});
    }
  }
  report.tables.push_back(std::move(t));

  Table d{"condition_differences",
          {"stage", "measure", "n_human", "n_ai", "statistic", "z", "p", "method"},
          {}};
  for (int stage : kStages) {
    const auto h = group(dataset, stage, Condition::Human);
    const auto a = group(dataset, stage, Condition::AI);
    for (const auto& m : measures) {
      std::vector<double> x, y;
      for (const auto* r : h) x.push_back(m.get(*r, m.arg));
      for (const auto* r : a) y.push_back(m.get(*r, m.arg));
      Cell stat, z, p, method;
      if (!x.empty() && !y.empty()) {
        const auto u = mann_whitney_u(x, y, Tail::Two, mann_whitney);
        stat = u.statistic;
        z = u.method == TestMethod::Exact ? Cell() : Cell(u.z);
        p = u.p;
        method = std::string(to_string(u.method));
      }
      d.add_row({stage_label(stage), m.name, as_int(x.size()), as_int(y.size()), stat, z, p,
                 method});
    }
  }
  report.tables.push_back(std::move(d));
  return report;
}

AnalysisReport rsa_at_behaviour(const StudyDataset& dataset, const RsaOptions& options) {
  AnalysisReport report;
  report.name = "rsa";
  Table t{"rsa", {"stage", "condition", "n", "rho", "p", "method", "note"}, {}};
  TransitionSpec spec;
  spec.component = options.component;
  spec.measure = options.measure;
  const auto at = affective_transition(dataset, spec);
  ordered_json fig = ordered_json::array();
  std::uint64_t stream = 0;
  for (int stage : {1, 2, 3}) {
    for (auto cond : {Condition::Human, Condition::AI}) {
      std::vector<double> a, b;
      for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (dataset[i].stage == stage && dataset[i].condition == cond) {
          a.push_back(at[i]);
          b.push_back(dataset[i].rating);
        }
      }
      Cell rho, p;
      std::string note;
      const auto seed = derive_seed(options.seed, stream++);
      if (a.size() < 3) {
        note = "too few trials";
      } else {
        try {
          const auto r = compare_rdms(build_rdm(a), build_rdm(b), options.n_perm, seed);
          rho = r.statistic;
          p = r.p;
        } catch (const DegenerateError&) {
          note = "constant dissimilarities";
        }
      }
      t.add_row({stage_label(stage), std::string(to_string(cond)), as_int(a.size()), rho, p,
                 std::string("permutation"), note});
      ordered_json e;
      e["stage"] = stage_label(stage);
      e["condition"] = to_string(cond);
      e["rho"] = cell_json(rho);
      e["p"] = cell_json(p);
      fig.push_back(std::move(e));
    }
  }
  report.tables.push_back(std::move(t));
  report.series["fig3"] = fig.dump();
  return report;
}

AnalysisReport magnitude_correlation(const StudyDataset& dataset,
                                     const std::map<int, EvaluationReport>& reports,
                                     MagnitudeMode mode) {
  AnalysisReport report;
  report.name = "magnitude";
  Table t{"magnitude", {"stage", "n", "mode", "rho", "p", "note"}, {}};
  ordered_json fig = ordered_json::array();
  for (const auto& [stage, ev] : reports) {
    const std::size_t n = ev.ratings.size();
    if (stage != 0 && dataset.stage_count(stage) != n) {
      throw DomainError("magnitude: report for stage " + stage_label(stage) +
                        " does not match the dataset");
    }
    std::vector<double> mag(n), b(n);
    for (std::size_t i = 0; i < n; ++i) b[i] = ev.ratings[i];
    if (mode == MagnitudeMode::Prediction) {
      for (std::size_t i = 0; i < n; ++i) mag[i] = ev.predictions[i];
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> others;
        for (std::size_t j = 0; j < n; ++j) {
          if (j != i && std::isfinite(ev.signal[j])) others.push_back(ev.signal[j]);
        }
        std::sort(others.begin(), others.end());
        if (others.empty()) throw DomainError("magnitude: no signal to bin");
        const double q1 = quantile_sorted(others, 1.0 / 3.0);
        const double q2 = quantile_sorted(others, 2.0 / 3.0);
        const double s = ev.signal[i];
        mag[i] = s <= q1 ? 1.0 : (s > q2 ? 3.0 : 2.0);
      }
    }
    Cell rho, p;
    std::string note;
    try {
      const double r = spearman(mag, b);
      rho = r;
      p = spearman_p_two_tailed(r, n);
    } catch (const DegenerateError&) {
      note = "constant";
    }
    const std::string mode_name = mode == MagnitudeMode::Prediction ? "prediction" : "tercile";
    t.add_row({stage_label(stage), as_int(n), mode_name, rho, p, note});
    ordered_json e;
    e["stage"] = stage_label(stage);
    e["rho"] = cell_json(rho);
    ordered_json levels = ordered_json::array();
    for (int level = 1; level <= 3; ++level) {
      std::vector<double> r;
      for (std::size_t i = 0; i < n; ++i) {
        if (mag[i] == level) r.push_back(normalize_rating(ev.ratings[i]));
      }
      ordered_json l;
      l["magnitude"] = level;
      l["n"] = r.size();
      l["mean_rating"] = r.empty() ? ordered_json(nullptr) : ordered_json(mean(r));
      levels.push_back(std::move(l));
    }
    e["levels"] = std::move(levels);
    fig.push_back(std::move(e));
  }
  report.tables.push_back(std::move(t));
  report.series["fig7"] = fig.dump();
  return report;
}

std::vector<std::string> split_mf_items(const std::string& text) {
  static const std::vector<std::string> marks = {".", ",", "!", "?", ";", ":", "\n",
                                                 "。", "，", "！", "？", "；", "：", "、", "…"};
  std::vector<std::string> items;
  std::string current;
  const auto cp = code_point_starts(text);
  for (std::size_t i = 0; i + 1 < cp.size(); ++i) {
    const std::string ch = text.substr(cp[i], cp[i + 1] - cp[i]);
    if (std::find(marks.begin(), marks.end(), ch) != marks.end()) {
      auto item = trim(current);
      if (!item.empty()) items.push_back(std::move(item));
      current.clear();
    } else {
      current += ch;
    }
  }
  auto item = trim(current);
  if (!item.empty()) items.push_back(std::move(item));
  return items;
}

AnalysisReport wordcloud_weights(const StudyDataset& dataset, std::span<const double> signal) {
  if (signal.size() != dataset.size()) {
    throw DomainError("wordcloud: signal length does not match the dataset");
  }
  AnalysisReport report;
  report.name = "wordcloud";
  Table t{"wordcloud",
          {"rank", "item", "trial_id", "trial_stage", "condition", "z", "magnitude", "weight"},
          {}};
  double lowest = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset[i].has_mf() && std::isfinite(signal[i])) lowest = std::min(lowest, signal[i]);
  }
  struct Item {
    std::string text;
    std::size_t trial;
    double weight;
  };
  std::vector<Item> items;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (!dataset[i].has_mf() || !std::isfinite(signal[i])) continue;
    const double magnitude = signal[i] - lowest + 1.0;
    const double w = dataset[i].condition == Condition::Human ? magnitude : -magnitude;
    for (auto& s : split_mf_items(dataset[i].mixed_feelings)) items.push_back({s, i, w});
  }
  std::stable_sort(items.begin(), items.end(),
                   [](const Item& a, const Item& b) { return a.weight > b.weight; });
  ordered_json fig = ordered_json::array();
  for (std::size_t r = 0; r < items.size(); ++r) {
    const auto& it = items[r];
    const auto& trial = dataset[it.trial];
    const double z = signal[it.trial];
    t.add_row({as_int(r + 1), it.text, trial.trial_id(), stage_label(trial.stage),
               std::string(to_string(trial.condition)), z, std::abs(it.weight), it.weight});
    ordered_json e;
    e["item"] = it.text;
    e["condition"] = to_string(trial.condition);
    e["weight"] = it.weight;
    fig.push_back(std::move(e));
  }
  report.tables.push_back(std::move(t));
  report.series["fig8"] = fig.dump();
  return report;
}

AnalysisReport simulation_report(const StudyDataset& dataset, const SimulationResult& sim,
                                 std::size_t n_perm, std::uint64_t seed) {
  AnalysisReport report;
  report.name = "simulate";
  Table t{"simulation",
          {"stage", "condition", "n", "observed_1", "observed_2", "observed_3", "simulated_1",
           "simulated_2", "simulated_3"},
          {}};
  ordered_json fig = ordered_json::array();
  for (const auto& g : sim.groups) {
    t.add_row({stage_label(g.stage), std::string(to_string(g.condition)), as_int(g.n),
               g.observed[0], g.observed[1], g.observed[2], g.simulated[0], g.simulated[1],
               g.simulated[2]});
    ordered_json e;
    e["stage"] = stage_label(g.stage);
    e["condition"] = to_string(g.condition);
    e["observed"] = {g.observed[0], g.observed[1], g.observed[2]};
    e["simulated"] = {g.simulated[0], g.simulated[1], g.simulated[2]};
    fig.push_back(std::move(e));
  }
  report.tables.push_back(std::move(t));
  report.series["fig5"] = fig.dump();

  Table rsa{"simulation_rsa", {"n_cells", "rho", "p", "method", "note"}, {}};
  std::vector<double> obs, pred;
  std::vector<int> stages;
  std::vector<Condition> conds;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (sim.predictions[i] == 0) continue;
    obs.push_back(normalize_rating(dataset[i].rating));
    pred.push_back(normalize_rating(sim.predictions[i]));
    stages.push_back(dataset[i].stage);
    conds.push_back(dataset[i].condition);
  }
  Cell rho, p;
  std::string note;
  try {
    const auto a = condition_rdm(obs, stages, conds);
    const auto b = condition_rdm(pred, stages, conds);
    const auto r = compare_rdms(a, b, n_perm, derive_seed(seed, 0x72736121ULL));
    rho = r.statistic;
    p = r.p;
  } catch (const DomainError&) {
    note = "missing stage or condition";
  } catch (const DegenerateError&) {
    note = "constant dissimilarities";
  }
  rsa.add_row({std::int64_t{15}, rho, p, std::string("permutation"), note});
  report.tables.push_back(std::move(rsa));
  return report;
}

AnalysisReport table2_report(const std::vector<Table2Row>& rows) {
  AnalysisReport report;
  report.name = "table2";
  Table t{"table2", {"stage", "family", "component", "rho", "p", "degenerate", "chosen"}, {}};
  for (const auto& r : rows) {
    t.add_row({r.stage, r.family, r.component, r.rho, r.p, r.degenerate, r.chosen});
  }
  report.tables.push_back(std::move(t));
  return report;
}

}  // namespace affect_sdt
