#include "affect_sdt/sdt.hpp"

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "affect_sdt/error.hpp"

namespace affect_sdt {

double probit(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("probit: p = " + std::to_string(p) + " outside (0, 1)");
  }
  static constexpr std::array<double, 6> a = {-3.969683028665376e+01, 2.209460984245205e+02,
                                              -2.759285104469687e+02, 1.383577518672690e+02,
                                              -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr std::array<double, 5> b = {-5.447609879822406e+01, 1.615858368580409e+02,
                                              -1.556989798598866e+02, 6.680131188771972e+01,
                                              -1.328068155288572e+01};
  static constexpr std::array<double, 6> c = {-7.784894002430293e-03, -3.223964580411365e-01,
                                              -2.400758277161838e+00, -2.549732539343734e+00,
                                              4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr std::array<double, 4> d = {7.784695709041462e-03, 3.224671290700398e-01,
                                              2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  constexpr double p_high = 1.0 - p_low;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= p_high) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  // Halley refinement. For the upper half work with the complement so the
  // residual keeps full relative precision.
  constexpr double kSqrt2Pi = 2.5066282746310002;
  if (p <= 0.5) {
    const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    const double u = e * kSqrt2Pi * std::exp(0.5 * x * x);
    x = x - u / (1.0 + 0.5 * x * u);
  } else {
    const double e = 0.5 * std::erfc(x / std::sqrt(2.0)) - (1.0 - p);
    const double u = -e * kSqrt2Pi * std::exp(0.5 * x * x);
    x = x - u / (1.0 + 0.5 * x * u);
  }
  return x;
}

std::string_view to_string(Hypothesis h) { return h == Hypothesis::H1 ? "H1" : "H2"; }

ResponseRates estimate_rates(std::span<const Observation> train) {
  std::size_t human = 0, human_23 = 0, human_3 = 0;
  std::size_t ai = 0, ai_23 = 0, ai_3 = 0;
  for (const auto& o : train) {
    if (o.rating < 1 || o.rating > 3) {
      throw DomainError("estimate_rates: rating " + std::to_string(o.rating) + " not in [1, 3]");
    }
    if (o.condition == Condition::Human) {
      ++human;
      human_23 += o.rating >= 2;
      human_3 += o.rating == 3;
    } else {
      ++ai;
      ai_23 += o.rating >= 2;
      ai_3 += o.rating == 3;
    }
  }
  if (human == 0) throw DomainError("estimate_rates: no human-driver observations in training");
  if (ai == 0) throw DomainError("estimate_rates: no AI-driver observations in training");

  auto corrected = [](std::size_t k, std::size_t n) {
    const double nn = static_cast<double>(n);
    if (k == 0) return 1.0 / (2.0 * nn);
    if (k == n) return 1.0 - 1.0 / (2.0 * nn);
    return static_cast<double>(k) / nn;
  };
  ResponseRates r;
  r.hit_12 = corrected(human_23, human);
  r.hit_23 = corrected(human_3, human);
  r.false_12 = corrected(ai_23, ai);
  r.false_23 = corrected(ai_3, ai);
  r.n_human = human;
  r.n_ai = ai;
  return r;
}

Criteria criteria_for(Condition condition, const ResponseRates& rates) {
  if (condition == Condition::Human) {
    return {-probit(rates.hit_12), -probit(rates.hit_23)};
  }
  return {-probit(rates.false_12), -probit(rates.false_23)};
}

SdtModel fit_sdt(std::span<const Observation> train, Hypothesis hypothesis) {
  SdtModel model;
  model.hypothesis = hypothesis;
  if (hypothesis == Hypothesis::H1) {
    model.rates = estimate_rates(train);
    return model;
  }
  std::vector<Observation> reversed(train.begin(), train.end());
  for (auto& o : reversed) o.rating = 4 - o.rating;
  model.rates = estimate_rates(reversed);
  return model;
}

int predict(double signal_strength, Condition condition, const SdtModel& model) {
  const Criteria c = criteria_for(condition, model.rates);
  int m = 2;
  if (signal_strength <= c.c1) {
    m = 1;
  } else if (signal_strength >= c.c2) {
    m = 3;
  }
  return model.hypothesis == Hypothesis::H1 ? m : 4 - m;
}

}  // namespace affect_sdt
