#include "affect_sdt/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>
#include <set>
#include <sstream>
#include <utility>

#include "affect_sdt/error.hpp"
#include "csv.hpp"
#include "json.hpp"

namespace affect_sdt {

namespace {

using nlohmann::json;

constexpr std::array<std::string_view, 6> kEmotionNames = {
    "enjoyment", "interest", "surprise", "fear", "tension", "satisfaction"};

constexpr std::array<std::string_view, 19> kColumns = {
    "participant_id", "stage",          "condition",       "rating",
    "pre_enjoyment",  "pre_interest",   "pre_surprise",    "pre_fear",
    "pre_tension",    "pre_satisfaction", "post_enjoyment", "post_interest",
    "post_surprise",  "post_fear",      "post_tension",    "post_satisfaction",
    "safety",         "comfort",        "mixed_feelings"};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return std::string(s.substr(first, last - first + 1));
}

std::string where(std::size_t row, std::size_t line, std::string_view column) {
  std::string s = "row " + std::to_string(row);
  if (line) s += " (line " + std::to_string(line) + ")";
  s += ", column '" + std::string(column) + "'";
  return s;
}

int parse_int(const std::string& raw, const std::string& location) {
  const std::string text = trim(raw);
  int value = 0;
  const auto* begin = text.data();
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (text.empty() || ec != std::errc{} || ptr != end) {
    throw ParseError(location + ": expected an integer, got '" + raw + "'");
  }
  return value;
}

Condition parse_condition_field(const std::string& raw, const std::string& location) {
  if (auto c = parse_condition(trim(raw))) return *c;
  throw ParseError(location + ": condition must be 'human' or 'ai', got '" + raw + "'");
}

// Field accessors shared by the CSV and JSON readers, keyed by column index.
struct RawRow {
  std::size_t row = 0;
  std::size_t line = 0;
  std::array<std::string, 19> values;
};

TrialRecord to_record(const RawRow& raw) {
  auto loc = [&](std::size_t col) { return where(raw.row, raw.line, kColumns[col]); };
  TrialRecord t;
  t.participant_id = trim(raw.values[0]);
  if (t.participant_id.empty()) throw ParseError(loc(0) + ": empty participant_id");
  t.stage = parse_int(raw.values[1], loc(1));
  t.condition = parse_condition_field(raw.values[2], loc(2));
  t.rating = parse_int(raw.values[3], loc(3));
  for (std::size_t e = 0; e < 6; ++e) {
    t.pre.scores[e] = parse_int(raw.values[4 + e], loc(4 + e));
    t.post.scores[e] = parse_int(raw.values[10 + e], loc(10 + e));
  }
  t.safety = parse_int(raw.values[16], loc(16));
  t.comfort = parse_int(raw.values[17], loc(17));
  t.mixed_feelings = trim(raw.values[18]);
  return t;
}

void check_range(std::vector<std::string>& offenders, std::size_t row, std::string_view col,
                 int value, int lo, int hi) {
  if (value < lo || value > hi) {
    offenders.push_back("row " + std::to_string(row) + ", column '" + std::string(col) +
                        "': " + std::to_string(value) + " not in [" + std::to_string(lo) +
                        ", " + std::to_string(hi) + "]");
  }
}

std::vector<std::string> validate(const std::vector<TrialRecord>& trials) {
  std::vector<std::string> offenders;
  std::set<std::pair<std::string, int>> seen;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto& t = trials[i];
    const std::size_t row = i + 1;
    check_range(offenders, row, "stage", t.stage, 1, 3);
    check_range(offenders, row, "rating", t.rating, 1, 3);
    for (std::size_t e = 0; e < 6; ++e) {
      check_range(offenders, row, kColumns[4 + e], t.pre.scores[e], 1, 4);
      check_range(offenders, row, kColumns[10 + e], t.post.scores[e], 1, 4);
    }
    check_range(offenders, row, "safety", t.safety, 1, 4);
    check_range(offenders, row, "comfort", t.comfort, 1, 4);
    if (!seen.emplace(t.participant_id, t.stage).second) {
      offenders.push_back("row " + std::to_string(row) + ": duplicate (participant_id, stage) = (" +
                          t.participant_id + ", " + std::to_string(t.stage) + ")");
    }
  }
  return offenders;
}

StudyDataset load_csv(std::istream& in) {
  const auto rows = csv::read(in);
  if (rows.empty()) throw ParseError("trials CSV is empty (missing header)");
  const auto& header = rows.front().fields;
  bool header_ok = header.size() == kColumns.size();
  for (std::size_t c = 0; header_ok && c < header.size(); ++c) {
    header_ok = trim(header[c]) == kColumns[c];
  }
  if (!header_ok) {
    throw ParseError("trials CSV header must be exactly: " + std::string(kTrialsCsvHeader));
  }
  std::vector<TrialRecord> trials;
  trials.reserve(rows.size() - 1);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.fields.size() != kColumns.size()) {
      throw ParseError("row " + std::to_string(r) + " (line " + std::to_string(row.line) +
                       "): expected " + std::to_string(kColumns.size()) + " columns, got " +
                       std::to_string(row.fields.size()));
    }
    RawRow raw{r, row.line, {}};
    std::copy(row.fields.begin(), row.fields.end(), raw.values.begin());
    trials.push_back(to_record(raw));
  }
  return StudyDataset(std::move(trials));
}

StudyDataset load_json(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("trials JSON: ") + e.what());
  }
  if (!doc.is_array()) throw ParseError("trials JSON must be an array of objects");
  std::vector<TrialRecord> trials;
  trials.reserve(doc.size());
  for (std::size_t r = 0; r < doc.size(); ++r) {
    const auto& obj = doc[r];
    if (!obj.is_object()) {
      throw ParseError("row " + std::to_string(r + 1) + ": expected an object");
    }
    for (const auto& [key, _] : obj.items()) {
      if (std::find(kColumns.begin(), kColumns.end(), key) == kColumns.end()) {
        throw ParseError("row " + std::to_string(r + 1) + ": unknown field '" + key + "'");
      }
    }
    RawRow raw{r + 1, 0, {}};
    for (std::size_t c = 0; c < kColumns.size(); ++c) {
      const std::string key(kColumns[c]);
      if (!obj.contains(key)) {
        if (key == "mixed_feelings") continue;
        throw ParseError(where(r + 1, 0, key) + ": missing");
      }
      const auto& v = obj.at(key);
      if (v.is_string()) {
        raw.values[c] = v.get<std::string>();
      } else if (v.is_number_integer()) {
        raw.values[c] = std::to_string(v.get<long long>());
      } else if (v.is_null() && key == "mixed_feelings") {
        raw.values[c].clear();
      } else {
        throw ParseError(where(r + 1, 0, key) + ": unsupported value " + v.dump());
      }
    }
    trials.push_back(to_record(raw));
  }
  return StudyDataset(std::move(trials));
}

std::vector<std::string> csv_fields(const TrialRecord& t) {
  std::vector<std::string> f;
  f.reserve(kColumns.size());
  f.push_back(t.participant_id);
  f.push_back(std::to_string(t.stage));
  f.emplace_back(to_string(t.condition));
  f.push_back(std::to_string(t.rating));
  for (int s : t.pre.scores) f.push_back(std::to_string(s));
  for (int s : t.post.scores) f.push_back(std::to_string(s));
  f.push_back(std::to_string(t.safety));
  f.push_back(std::to_string(t.comfort));
  f.push_back(t.mixed_feelings);
  return f;
}

}  // namespace

std::string_view to_string(Condition c) { return c == Condition::Human ? "human" : "ai"; }

std::string_view to_string(Emotion e) { return kEmotionNames[static_cast<std::size_t>(e)]; }

std::string_view to_string(Component c) {
  switch (c) {
    case Component::AA: return "AA";
    case Component::PA: return "PA";
    case Component::NA: return "NA";
    case Component::MF: return "MF";
    case Component::AA_MF: return "AA+MF";
    case Component::PA_MF: return "PA+MF";
    case Component::NA_MF: return "NA+MF";
  }
  return "?";
}

std::string_view to_string(Phase p) { return p == Phase::Pre ? "pre" : "post"; }

std::optional<Condition> parse_condition(std::string_view s) {
  const auto l = lower(s);
  if (l == "human") return Condition::Human;
  if (l == "ai") return Condition::AI;
  return std::nullopt;
}

std::optional<Emotion> parse_emotion(std::string_view s) {
  const auto l = lower(s);
  for (std::size_t i = 0; i < kEmotionNames.size(); ++i) {
    if (l == kEmotionNames[i]) return static_cast<Emotion>(i);
  }
  return std::nullopt;
}

std::optional<Component> parse_component(std::string_view s) {
  std::string u(s);
  std::transform(u.begin(), u.end(), u.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  std::replace(u.begin(), u.end(), '_', '+');
  for (Component c : kComponents) {
    if (u == to_string(c)) return c;
  }
  return std::nullopt;
}

std::vector<Emotion> component_emotions(Component c) {
  const bool pa = c == Component::AA || c == Component::AA_MF || c == Component::PA ||
                  c == Component::PA_MF;
  const bool na = c == Component::AA || c == Component::AA_MF || c == Component::NA ||
                  c == Component::NA_MF;
  std::vector<Emotion> out;
  for (Emotion e : kEmotions) {
    const bool negative = e == Emotion::Fear || e == Emotion::Tension;
    if (negative ? na : pa) out.push_back(e);
  }
  return out;
}

bool component_has_mf(Component c) {
  return c == Component::MF || c == Component::AA_MF || c == Component::PA_MF ||
         c == Component::NA_MF;
}

std::string TrialRecord::trial_id() const {
  return participant_id + "#" + std::to_string(stage);
}

std::string TrialRecord::baseline_id() const { return participant_id + "#pre"; }

StudyDataset::StudyDataset(std::vector<TrialRecord> trials) : trials_(std::move(trials)) {
  auto offenders = validate(trials_);
  if (!offenders.empty()) {
    std::string msg = "trial data failed validation (" + std::to_string(offenders.size()) +
                      " problem" + (offenders.size() == 1 ? "" : "s") + "): " + offenders[0];
    if (offenders.size() > 1) msg += "; ...";
    throw ValidationError(msg, std::move(offenders));
  }
}

std::size_t StudyDataset::stage_count(int stage) const {
  return static_cast<std::size_t>(std::count_if(
      trials_.begin(), trials_.end(), [stage](const TrialRecord& t) { return t.stage == stage; }));
}

StudyDataset StudyDataset::stage(int stage) const {
  std::vector<TrialRecord> out;
  std::copy_if(trials_.begin(), trials_.end(), std::back_inserter(out),
               [stage](const TrialRecord& t) { return t.stage == stage; });
  return StudyDataset(std::move(out));
}

std::uint64_t StudyDataset::digest() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= 0xff;
    h *= 0x100000001b3ULL;
  };
  for (const auto& t : trials_) {
    for (const auto& f : csv_fields(t)) feed(f);
  }
  return h;
}

StudyDataset load_trials(std::istream& source, DataFormat format) {
  return format == DataFormat::Json ? load_json(source) : load_csv(source);
}

StudyDataset load_trials_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open trials file '" + path.string() + "'");
  const auto ext = lower(path.extension().string());
  return load_trials(in, ext == ".json" ? DataFormat::Json : DataFormat::Csv);
}

void write_trials(std::ostream& out, const StudyDataset& dataset, DataFormat format) {
  if (format == DataFormat::Csv) {
    out << kTrialsCsvHeader << '\n';
    for (const auto& t : dataset) {
      auto fields = csv_fields(t);
      for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        // mixed_feelings is always quoted.
        out << csv::escape(fields[i], i + 1 == fields.size());
      }
      out << '\n';
    }
    return;
  }
  json arr = json::array();
  for (const auto& t : dataset) {
    json obj = json::object();
    obj["participant_id"] = t.participant_id;
    obj["stage"] = t.stage;
    obj["condition"] = std::string(to_string(t.condition));
    obj["rating"] = t.rating;
    for (std::size_t e = 0; e < 6; ++e) {
      obj[std::string(kColumns[4 + e])] = t.pre.scores[e];
      obj[std::string(kColumns[10 + e])] = t.post.scores[e];
    }
    obj["safety"] = t.safety;
    obj["comfort"] = t.comfort;
    obj["mixed_feelings"] = t.mixed_feelings;
    arr.push_back(std::move(obj));
  }
  out << arr.dump(2) << '\n';
}

VerbalizationTemplate load_template(std::istream& source) {
  json doc;
  try {
    doc = json::parse(source);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("verbalization template: ") + e.what());
  }
  VerbalizationTemplate t;
  try {
    t.language = doc.at("language").get<std::string>();
    t.separator = doc.value("separator", std::string{});
    const auto& intensity = doc.at("intensity");
    if (!intensity.is_array() || intensity.size() != 4) {
      throw ParseError("verbalization template: 'intensity' needs 4 entries");
    }
    for (std::size_t i = 0; i < 4; ++i) t.intensity[i] = intensity[i].get<std::string>();
    const auto& nouns = doc.at("emotion");
    for (std::size_t e = 0; e < 6; ++e) {
      t.emotion[e] = nouns.at(std::string(kEmotionNames[e])).get<std::string>();
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("verbalization template: ") + e.what());
  }
  // Renderings must be pairwise distinct or verbalize stops being injective.
  std::set<std::string> rendered;
  for (int s = 1; s <= 4; ++s) {
    for (Emotion e : kEmotions) rendered.insert(verbalize(s, e, t));
  }
  if (rendered.size() != 24) {
    throw ParseError("verbalization template '" + t.language + "' has colliding renderings");
  }
  return t;
}

VerbalizationTemplate load_template_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open template file '" + path.string() + "'");
  return load_template(in);
}

VerbalizationTemplate builtin_template(std::string_view language) {
  const std::string file = std::string(language) + ".json";
  std::vector<std::filesystem::path> dirs;
  if (const char* env = std::getenv("AFFECT_SDT_TEMPLATE_DIR")) dirs.emplace_back(env);
  dirs.emplace_back(AFFECT_SDT_BUILD_TEMPLATE_DIR);
  dirs.emplace_back(AFFECT_SDT_INSTALL_TEMPLATE_DIR);
  for (const auto& dir : dirs) {
    const auto path = dir / file;
    if (std::filesystem::exists(path)) return load_template_file(path);
  }
  throw ConfigError("no verbalization template for language '" + std::string(language) + "'");
}

std::string verbalize(int score, Emotion emotion, const VerbalizationTemplate& tmpl) {
  if (score < 1 || score > 4) {
    throw DomainError("verbalize: score " + std::to_string(score) + " not in [1, 4]");
  }
  return tmpl.intensity[static_cast<std::size_t>(score - 1)] + tmpl.separator +
         tmpl.emotion[static_cast<std::size_t>(emotion)];
}

std::vector<std::string> verbalize_pieces(int score, Emotion emotion,
                                          const VerbalizationTemplate& tmpl) {
  if (score < 1 || score > 4) {
    throw DomainError("verbalize: score " + std::to_string(score) + " not in [1, 4]");
  }
  return {tmpl.intensity[static_cast<std::size_t>(score - 1)],
          tmpl.emotion[static_cast<std::size_t>(emotion)]};
}

ComponentSelection select_component(const TrialRecord& trial, Component component,
                                    Phase phase) {
  ComponentSelection sel;
  sel.emotions = component_emotions(component);
  const auto& profile = phase == Phase::Pre ? trial.pre : trial.post;
  sel.scores.reserve(sel.emotions.size());
  for (Emotion e : sel.emotions) sel.scores.push_back(profile[e]);
  sel.includes_mf = component_has_mf(component);
  if (sel.includes_mf && phase == Phase::Post) sel.mf_text = trial.mixed_feelings;
  return sel;
}

double normalize_rating(int rating) {
  if (rating < 1 || rating > 3) {
    throw DomainError("normalize_rating: rating " + std::to_string(rating) + " not in [1, 3]");
  }
  return (rating - 1) / 2.0;
}

}  // namespace affect_sdt
