#pragma once

// Equal-variance signal detection model with two response criteria.
//
// Signal is the human driver, noise the AI driver. Cumulative response rates
// per condition give the criteria c1 <= c2 on the z scale, and a z-scored
// signal strength is mapped to a 1/2/3 humanness rating by comparing it with
// the criteria of the trial's own condition.

#include <cstddef>
#include <span>
#include <string_view>

#include "affect_sdt/corpus.hpp"

namespace affect_sdt {

// Inverse standard normal CDF. Acklam's rational approximation followed by one
// Halley step against erfc; absolute error below 1e-9 on (0, 1).
// Throws DomainError for p outside (0, 1).
double probit(double p);

enum class Hypothesis {
  H1,  // stronger signal for the human driver: rating rises with SS
  H2,  // stronger signal for the AI driver: rating falls with SS
};

std::string_view to_string(Hypothesis h);

struct Observation {
  int rating;  // B in {1, 2, 3}
  Condition condition;
};

struct ResponseRates {
  double hit_12 = 0.5;    // P(B in {2,3} | human)
  double hit_23 = 0.5;    // P(B = 3 | human)
  double false_12 = 0.5;  // P(B in {2,3} | AI)
  double false_23 = 0.5;  // P(B = 3 | AI)
  std::size_t n_human = 0;
  std::size_t n_ai = 0;
};

struct Criteria {
  double c1 = 0.0;
  double c2 = 0.0;
};

// Counts the training responses, then replaces a rate of 0 by 1/(2n) and a
// rate of 1 by 1 - 1/(2n) for that condition's n. Throws DomainError when a
// condition has no observations.
ResponseRates estimate_rates(std::span<const Observation> train);

// Human trials use the hit rates, AI trials the false-alarm rates:
// c1 = -probit(rate_12), c2 = -probit(rate_23).
Criteria criteria_for(Condition condition, const ResponseRates& rates);

struct SdtModel {
  ResponseRates rates;  // under H2, estimated on reversed ratings 4 - B
  Hypothesis hypothesis = Hypothesis::H1;
};

// Under H2 the responses are reversed before estimating rates.
SdtModel fit_sdt(std::span<const Observation> train, Hypothesis hypothesis);

// 1 if SS <= c1, 3 if SS >= c2, 2 otherwise; under H2 the same rule runs on
// the reversed model and the result is mapped back through 4 - M.
int predict(double signal_strength, Condition condition, const SdtModel& model);

}  // namespace affect_sdt
