#pragma once

#include <algorithm>
#include <array>
#include <string>
#include <vector>

#include "affect_sdt/corpus.hpp"
#include "affect_sdt/rng.hpp"

namespace affect_sdt::test {

inline std::string fixture(const std::string& name) {
  return std::string(AFFECT_SDT_FIXTURE_DIR) + "/" + name;
}

inline TrialRecord trial(std::string id, int stage, Condition c, int rating,
                         std::array<int, 6> pre, std::array<int, 6> post,
                         std::string mf = "") {
  TrialRecord t;
  t.participant_id = std::move(id);
  t.stage = stage;
  t.condition = c;
  t.rating = rating;
  t.pre.scores = pre;
  t.post.scores = post;
  t.mixed_feelings = std::move(mf);
  return t;
}

// Post = pre + (rating - 1) on every emotion, with an occasional one-step
// jitter; the transition size tracks the rating.
inline StudyDataset planted_dataset(int participants, std::uint64_t seed, double jitter = 0.25) {
  Rng rng(seed);
  std::vector<TrialRecord> out;
  std::vector<std::array<int, 6>> pres(static_cast<std::size_t>(participants));
  for (auto& p : pres) {
    for (auto& s : p) s = 1 + static_cast<int>(rng.below(2));
  }
  for (int stage = 1; stage <= 3; ++stage) {
    std::vector<int> ratings, conds;
    for (int i = 0; i < participants; ++i) {
      ratings.push_back(1 + i % 3);
      conds.push_back(i % 2);
    }
    rng.shuffle(ratings.begin(), ratings.end());
    rng.shuffle(conds.begin(), conds.end());
    for (int i = 0; i < participants; ++i) {
      const auto& pre = pres[static_cast<std::size_t>(i)];
      std::array<int, 6> post{};
      for (int e = 0; e < 6; ++e) post[e] = pre[e] + ratings[i] - 1;
      if (rng.uniform() < jitter) {
        const auto e = rng.below(6);
        post[e] += rng.below(2) == 0 ? -1 : 1;
      }
      for (auto& s : post) s = std::clamp(s, 1, 4);
      out.push_back(trial("P" + std::to_string(i), stage,
                          conds[i] == 0 ? Condition::Human : Condition::AI, ratings[i], pre,
                          post, i % 3 == 0 ? "有点担心，但是很安全。" : ""));
    }
  }
  return StudyDataset(std::move(out));
}

}  // namespace affect_sdt::test
