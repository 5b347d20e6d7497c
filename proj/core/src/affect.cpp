#include "affect_sdt/affect.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "affect_sdt/error.hpp"
#include "affect_sdt/stats.hpp"
#include "affect_sdt/transport.hpp"

namespace affect_sdt {

namespace {

constexpr std::string_view kMeasureNames[] = {
    "absolute", "ak_mean",   "ak_min",      "ak_abs_min_product", "ak_max_reversed", "pearson",
    "euclidean", "mahalanobis", "cosine",   "manhattan",          "wmd",             "wrd"};

// Rows with identical values merged, masses summed. Order of first
// occurrence is kept.
void merge_rows(Eigen::MatrixXd& rows, Eigen::VectorXd& mass) {
  std::vector<Eigen::Index> keep;
  std::vector<double> merged;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    bool found = false;
    for (std::size_t k = 0; k < keep.size(); ++k) {
      if (rows.row(keep[k]) == rows.row(i)) {
        merged[k] += mass(i);
        found = true;
        break;
      }
    }
    if (!found) {
      keep.push_back(i);
      merged.push_back(mass(i));
    }
  }
  Eigen::MatrixXd r(static_cast<Eigen::Index>(keep.size()), rows.cols());
  Eigen::VectorXd m(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    r.row(static_cast<Eigen::Index>(k)) = rows.row(keep[k]);
    m(static_cast<Eigen::Index>(k)) = merged[k];
  }
  rows = std::move(r);
  mass = std::move(m);
}

Eigen::VectorXd masses(const Eigen::MatrixXd& rows, DistanceMeasure measure) {
  if (measure == DistanceMeasure::Wmd) {
    return Eigen::VectorXd::Constant(rows.rows(), 1.0 / static_cast<double>(rows.rows()));
  }
  Eigen::VectorXd norms = rows.rowwise().norm();
  if ((norms.array() <= 0.0).any()) throw DegenerateError("wrd: zero token vector");
  return norms / norms.sum();
}

std::vector<Eigen::VectorXd> whiten_all(const std::vector<Eigen::VectorXd>& vs,
                                        const WhiteningModel& model) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(vs.size());
  for (const auto& v : vs) out.push_back(apply_whitening(v, model));
  return out;
}

}  // namespace

std::string_view to_string(DistanceMeasure m) { return kMeasureNames[static_cast<int>(m)]; }

std::optional<DistanceMeasure> parse_distance(std::string_view s) {
  for (auto m : kDistanceMeasures) {
    if (to_string(m) == s) return m;
  }
  return std::nullopt;
}

bool is_transport_measure(DistanceMeasure m) {
  return m == DistanceMeasure::Wmd || m == DistanceMeasure::Wrd;
}

double distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b, DistanceMeasure measure,
                const Eigen::MatrixXd* precision) {
  if (a.size() != b.size()) {
    throw DomainError("distance: lengths " + std::to_string(a.size()) + " and " +
                      std::to_string(b.size()) + " differ");
  }
  if (a.size() == 0) throw DomainError("distance: empty vectors");
  const double n = static_cast<double>(a.size());
  switch (measure) {
    case DistanceMeasure::Absolute:
      return (a - b).cwiseAbs().sum() / n;
    case DistanceMeasure::AkMean:
      return (a + b).sum() / (2.0 * n);
    case DistanceMeasure::AkMin:
      return a.cwiseMin(b).sum() / n;
    case DistanceMeasure::AkAbsMinProduct:
      return (a - b).cwiseAbs().cwiseProduct(a.cwiseMin(b)).sum() / n;
    case DistanceMeasure::AkMaxReversed:
      return a.cwiseMax(b).sum() / n;
    case DistanceMeasure::Pearson: {
      if (a.size() < 2) throw DegenerateError("pearson distance needs at least two coordinates");
      return 1.0 - pearson(std::span<const double>(a.data(), a.size()),
                           std::span<const double>(b.data(), b.size()));
    }
    case DistanceMeasure::Euclidean:
      return (a - b).norm();
    case DistanceMeasure::Mahalanobis: {
      if (!precision) throw DomainError("mahalanobis distance needs a covariance");
      if (precision->rows() != a.size() || precision->cols() != a.size()) {
        throw DomainError("mahalanobis: covariance shape does not match the vectors");
      }
      const Eigen::VectorXd d = a - b;
      return std::sqrt(std::max(0.0, d.dot(*precision * d)));
    }
    case DistanceMeasure::Cosine: {
      const double na = a.norm(), nb = b.norm();
      if (na == 0.0 || nb == 0.0) throw DegenerateError("cosine distance of a zero vector");
      return 1.0 - a.dot(b) / (na * nb);
    }
    case DistanceMeasure::Manhattan:
      return (a - b).cwiseAbs().sum();
    case DistanceMeasure::Wmd:
    case DistanceMeasure::Wrd:
      break;
  }
  throw DomainError("distance: " + std::string(to_string(measure)) + " compares token matrices");
}

double transport_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                          DistanceMeasure measure) {
  if (!is_transport_measure(measure)) {
    throw DomainError("transport_distance: " + std::string(to_string(measure)) +
                      " is not a transport measure");
  }
  if (a.rows() == 0 || b.rows() == 0) throw DegenerateError("transport distance of an empty text");
  if (a.cols() != b.cols()) throw DomainError("transport distance: dimensions differ");
  Eigen::MatrixXd ra = a, rb = b;
  Eigen::VectorXd ma = masses(ra, measure), mb = masses(rb, measure);
  merge_rows(ra, ma);
  merge_rows(rb, mb);
  TransportProblem p;
  p.source = ma;
  p.target = mb;
  p.cost.resize(ra.rows(), rb.rows());
  for (Eigen::Index i = 0; i < ra.rows(); ++i) {
    for (Eigen::Index j = 0; j < rb.rows(); ++j) {
      if (measure == DistanceMeasure::Wmd) {
        p.cost(i, j) = (ra.row(i) - rb.row(j)).norm();
      } else {
        const double c = ra.row(i).dot(rb.row(j)) / (ra.row(i).norm() * rb.row(j).norm());
        p.cost(i, j) = std::max(0.0, 1.0 - c);
      }
    }
  }
  return solve_transport(p).cost;
}

Eigen::MatrixXd mahalanobis_precision(std::span<const Eigen::VectorXd> vectors) {
  if (vectors.size() < 2) throw DomainError("mahalanobis: need at least two vectors");
  const auto d = vectors.front().size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(vectors.size()), d);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() != d) throw DomainError("mahalanobis: vectors differ in length");
    x.row(static_cast<Eigen::Index>(i)) = vectors[i].transpose();
  }
  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  Eigen::MatrixXd sigma =
      (centered.transpose() * centered) / static_cast<double>(vectors.size() - 1);
  const double trace = sigma.trace();
  if (!(trace > 0.0)) throw DegenerateError("mahalanobis: vectors do not vary");
  sigma.diagonal().array() += 1e-6 * trace / static_cast<double>(d);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(sigma);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw DegenerateError("mahalanobis: covariance is singular");
  }
  return ldlt.solve(Eigen::MatrixXd::Identity(d, d));
}

Eigen::VectorXd score_vector(const TrialRecord& trial, Component component, Phase phase) {
  const auto sel = select_component(trial, component, phase);
  Eigen::VectorXd v(static_cast<Eigen::Index>(sel.scores.size() + (sel.includes_mf ? 1 : 0)));
  for (std::size_t i = 0; i < sel.scores.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = sel.scores[i];
  }
  if (sel.includes_mf) {
    v(v.size() - 1) = (phase == Phase::Post && trial.has_mf()) ? 1.0 : 0.0;
  }
  return v;
}

TransitionInputs prepare_transition(const StudyDataset& dataset, const TransitionSpec& spec) {
  TransitionInputs in;
  const std::size_t n = dataset.size();
  if (!spec.provider) {
    if (is_transport_measure(spec.measure)) {
      throw DomainError("transport measures need an embedding provider");
    }
    for (const auto& t : dataset) {
      in.pre.push_back(score_vector(t, spec.component, Phase::Pre));
      in.post.push_back(score_vector(t, spec.component, Phase::Post));
    }
    return in;
  }
  if (!spec.tmpl) throw DomainError("embedding transitions need a verbalization template");
  const auto d = static_cast<Eigen::Index>(spec.provider->dim());
  for (std::size_t i = 0; i < n; ++i) {
    for (Phase phase : {Phase::Pre, Phase::Post}) {
      Eigen::MatrixXd m =
          represent(dataset[i], spec.component, phase, *spec.provider, spec.level, *spec.tmpl);
      if (is_transport_measure(spec.measure)) {
        (phase == Phase::Pre ? in.pre_tokens : in.post_tokens).push_back(std::move(m));
      } else {
        Eigen::VectorXd v =
            m.rows() == 0
                ? Eigen::VectorXd::Zero(d * static_cast<Eigen::Index>(spec.pooling.count()))
                : pool(m, spec.pooling);
        (phase == Phase::Pre ? in.pre : in.post).push_back(std::move(v));
      }
    }
  }
  return in;
}

bool transition_is_fitted(const TransitionSpec& spec) {
  if (is_transport_measure(spec.measure)) return false;
  return spec.kappa != kKappaNone || spec.measure == DistanceMeasure::Mahalanobis;
}

std::vector<double> transition_distances(const TransitionInputs& inputs,
                                         const TransitionSpec& spec,
                                         std::span<const std::size_t> fit_on) {
  if (is_transport_measure(spec.measure)) {
    std::vector<double> out(inputs.pre_tokens.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = transport_distance(inputs.pre_tokens[i], inputs.post_tokens[i], spec.measure);
    }
    return out;
  }
  const std::vector<Eigen::VectorXd>* pre = &inputs.pre;
  const std::vector<Eigen::VectorXd>* post = &inputs.post;
  std::vector<Eigen::VectorXd> wpre, wpost;
  if (spec.kappa != kKappaNone) {
    std::vector<Eigen::VectorXd> a, b;
    for (auto i : fit_on) {
      a.push_back(inputs.pre[i]);
      b.push_back(inputs.post[i]);
    }
    if (spec.split_whitening) {
      wpre = whiten_all(inputs.pre, fit_whitening(a, spec.kappa));
      wpost = whiten_all(inputs.post, fit_whitening(b, spec.kappa));
    } else {
      a.insert(a.end(), b.begin(), b.end());
      const auto model = fit_whitening(a, spec.kappa);
      wpre = whiten_all(inputs.pre, model);
      wpost = whiten_all(inputs.post, model);
    }
    pre = &wpre;
    post = &wpost;
  }
  Eigen::MatrixXd precision;
  if (spec.measure == DistanceMeasure::Mahalanobis) {
    std::vector<Eigen::VectorXd> fit;
    for (auto i : fit_on) fit.push_back((*pre)[i]);
    for (auto i : fit_on) fit.push_back((*post)[i]);
    precision = mahalanobis_precision(fit);
  }
  std::vector<double> out(pre->size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = distance((*pre)[i], (*post)[i], spec.measure,
                      spec.measure == DistanceMeasure::Mahalanobis ? &precision : nullptr);
  }
  return out;
}

std::vector<double> affective_transition(const StudyDataset& dataset, const TransitionSpec& spec) {
  const auto inputs = prepare_transition(dataset, spec);
  std::vector<std::size_t> all(dataset.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return transition_distances(inputs, spec, all);
}

SignalStrength z_normalize(std::span<const double> values, std::span<const std::size_t> train) {
  if (train.size() < 2) throw DomainError("z_normalize: need at least two training values");
  std::vector<double> t;
  t.reserve(train.size());
  for (auto i : train) t.push_back(values[i]);
  SignalStrength s;
  s.raw.assign(values.begin(), values.end());
  s.mean = mean(t);
  s.sd = sample_sd(t);
  if (!(s.sd > 1e-12 * std::max(1.0, std::abs(s.mean)))) throw DegenerateError("z_normalize: training values do not vary");
  s.ss.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) s.ss[i] = (values[i] - s.mean) / s.sd;
  return s;
}

}  // namespace affect_sdt
