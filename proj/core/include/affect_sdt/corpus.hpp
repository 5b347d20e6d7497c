#pragma once

// Trial data: loading, validation, verbalization and the data components
// (PA / NA / AA / MF) every downstream stage consumes.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace affect_sdt {

enum class Condition { Human, AI };

// DES-IV items in questionnaire order. The numeric values index EmotionProfile.
enum class Emotion { Enjoyment, Interest, Surprise, Fear, Tension, Satisfaction };

inline constexpr std::array<Emotion, 6> kEmotions = {
    Emotion::Enjoyment, Emotion::Interest, Emotion::Surprise,
    Emotion::Fear,      Emotion::Tension,  Emotion::Satisfaction};

enum class Component { AA, PA, NA, MF, AA_MF, PA_MF, NA_MF };

inline constexpr std::array<Component, 7> kComponents = {
    Component::AA_MF, Component::AA,    Component::PA_MF, Component::PA,
    Component::NA_MF, Component::NA,    Component::MF};

enum class Phase { Pre, Post };

enum class DataFormat { Csv, Json };

std::string_view to_string(Condition c);
std::string_view to_string(Emotion e);
std::string_view to_string(Component c);
std::string_view to_string(Phase p);

std::optional<Condition> parse_condition(std::string_view s);
std::optional<Emotion> parse_emotion(std::string_view s);
std::optional<Component> parse_component(std::string_view s);

// Emotions a component covers, in DES order. MF-only components yield none.
std::vector<Emotion> component_emotions(Component c);
bool component_has_mf(Component c);

struct EmotionProfile {
  std::array<int, 6> scores{};

  int operator[](Emotion e) const { return scores[static_cast<std::size_t>(e)]; }
  int& operator[](Emotion e) { return scores[static_cast<std::size_t>(e)]; }

  friend bool operator==(const EmotionProfile&, const EmotionProfile&) = default;
};

struct TrialRecord {
  std::string participant_id;
  int stage = 1;
  Condition condition = Condition::Human;
  int rating = 2;  // 1 AI driver, 2 not sure, 3 human driver
  EmotionProfile pre;
  EmotionProfile post;
  int safety = 1;
  int comfort = 1;
  std::string mixed_feelings;

  bool has_mf() const { return !mixed_feelings.empty(); }

  // Key used by hidden-state files: "<participant>#<stage>".
  std::string trial_id() const;
  // Key of the participant's pre-study baseline: "<participant>#pre".
  std::string baseline_id() const;

  friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

// Validated, immutable list of trials. Row order is preserved from the source.
class StudyDataset {
 public:
  StudyDataset() = default;
  // Throws ValidationError listing every offending row.
  explicit StudyDataset(std::vector<TrialRecord> trials);

  const std::vector<TrialRecord>& trials() const noexcept { return trials_; }
  std::size_t size() const noexcept { return trials_.size(); }
  bool empty() const noexcept { return trials_.empty(); }
  const TrialRecord& operator[](std::size_t i) const { return trials_[i]; }
  auto begin() const noexcept { return trials_.begin(); }
  auto end() const noexcept { return trials_.end(); }

  std::size_t stage_count(int stage) const;
  // Trials of one stage, order preserved.
  StudyDataset stage(int stage) const;
  // Stable FNV-1a digest of the content; keys on-disk caches.
  std::uint64_t digest() const;

  friend bool operator==(const StudyDataset&, const StudyDataset&) = default;

 private:
  std::vector<TrialRecord> trials_;
};

StudyDataset load_trials(std::istream& source, DataFormat format);
// Format inferred from the extension (.json, otherwise CSV).
StudyDataset load_trials_file(const std::filesystem::path& path);
void write_trials(std::ostream& out, const StudyDataset& dataset, DataFormat format);

inline constexpr std::string_view kTrialsCsvHeader =
    "participant_id,stage,condition,rating,pre_enjoyment,pre_interest,pre_surprise,"
    "pre_fear,pre_tension,pre_satisfaction,post_enjoyment,post_interest,post_surprise,"
    "post_fear,post_tension,post_satisfaction,safety,comfort,mixed_feelings";

// Score phrase x emotion noun renderings, loaded from a data file.
struct VerbalizationTemplate {
  std::string language;
  std::array<std::string, 4> intensity;  // index score-1
  std::array<std::string, 6> emotion;    // index by Emotion
  std::string separator;                 // between intensity and noun
};

VerbalizationTemplate load_template(std::istream& source);
VerbalizationTemplate load_template_file(const std::filesystem::path& path);
// Shipped template for "zh" or "en". Looks in $AFFECT_SDT_TEMPLATE_DIR, then
// the build tree, then the install prefix.
VerbalizationTemplate builtin_template(std::string_view language);

std::string verbalize(int score, Emotion emotion, const VerbalizationTemplate& tmpl);
// The same rendering split into its intensity and noun pieces.
std::vector<std::string> verbalize_pieces(int score, Emotion emotion,
                                          const VerbalizationTemplate& tmpl);

struct ComponentSelection {
  std::vector<Emotion> emotions;  // canonical DES order
  std::vector<int> scores;        // parallel to emotions
  bool includes_mf = false;
  std::string mf_text;            // empty for Phase::Pre
};

ComponentSelection select_component(const TrialRecord& trial, Component component,
                                    Phase phase);

// (B - 1) / 2.
double normalize_rating(int rating);

}  // namespace affect_sdt
