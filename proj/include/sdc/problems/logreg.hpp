#pragma once

#include "sdc/problems/oracle.hpp"

#include <Eigen/SparseCore>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace sdc {

using SparseRowMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Binary classification data with the bias coordinate appended: row i of
/// `features` is (a_i, 1) and has num_features + 1 columns.
struct LogRegDataset {
  Index num_features = 0;
  SparseRowMat features;
  Vec labels;  // entries in {-1, +1}

  Index size() const { return labels.size(); }
  Index dim() const { return num_features + 1; }
};

/// Maps a raw label to -1 or +1; used when a file is not already binary.
using LabelRule = std::function<double(double)>;

/// Even digits -> +1, odd -> -1 (multi-class digit data split into two classes).
inline LabelRule even_odd_split() {
  return [](double label) {
    const auto v = static_cast<long long>(std::llround(label));
    return v % 2 == 0 ? 1.0 : -1.0;
  };
}

struct LibsvmOptions {
  // Feature count; 0 means "largest index seen in the file".
  Index num_features = 0;
  LabelRule label_rule;  // empty: accept only {-1,+1} / {0,1} style labels
};

namespace detail {

inline double default_label(double raw, std::size_t line_no) {
  if (raw == 1.0) return 1.0;
  if (raw == -1.0 || raw == 0.0) return -1.0;
  throw Error(ErrorKind::unsupported_label,
              "line " + std::to_string(line_no) + ": label " + std::to_string(raw) +
                  " is not binary; supply a label rule");
}

inline bool parse_double(std::string_view s, double& out) {
  // std::from_chars rejects a leading '+', which libsvm files use for labels.
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace detail

inline LogRegDataset parse_libsvm(std::istream& in, const LibsvmOptions& opts = {}) {
  std::vector<Eigen::Triplet<double>> triplets;
  std::vector<double> labels;
  Index max_index = 0;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw Error(ErrorKind::parse_error, "line " + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream tokens(line);
    std::string tok;
    if (!(tokens >> tok)) continue;
    double raw = 0.0;
    if (!detail::parse_double(tok, raw)) fail("bad label '" + tok + "'");
    const double label = opts.label_rule ? opts.label_rule(raw) : detail::default_label(raw, line_no);
    if (label != 1.0 && label != -1.0) fail("label rule must return -1 or +1");
    const auto row = static_cast<Index>(labels.size());
    labels.push_back(label);
    Index prev = 0;
    while (tokens >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos) fail("expected idx:val, got '" + tok + "'");
      long long idx = 0;
      const auto [p, ec] = std::from_chars(tok.data(), tok.data() + colon, idx);
      if (ec != std::errc() || p != tok.data() + colon || idx < 1) fail("bad index in '" + tok + "'");
      if (idx <= prev) fail("indices must be strictly increasing");
      double val = 0.0;
      if (!detail::parse_double(std::string_view(tok).substr(colon + 1), val)) {
        fail("bad value in '" + tok + "'");
      }
      prev = static_cast<Index>(idx);
      max_index = std::max(max_index, prev);
      triplets.emplace_back(row, prev - 1, val);
    }
  }
  if (labels.empty()) throw Error(ErrorKind::invalid_input, "libsvm input contains no data points");
  LogRegDataset data;
  data.num_features = opts.num_features > 0 ? opts.num_features : max_index;
  if (max_index > data.num_features) {
    throw Error(ErrorKind::invalid_input, "feature index exceeds declared feature count");
  }
  const auto n_rows = static_cast<Index>(labels.size());
  for (Index i = 0; i < n_rows; ++i) triplets.emplace_back(i, data.num_features, 1.0);
  data.features.resize(n_rows, data.num_features + 1);
  data.features.setFromTriplets(triplets.begin(), triplets.end());
  data.features.makeCompressed();
  data.labels = Eigen::Map<const Vec>(labels.data(), n_rows);
  return data;
}

inline LogRegDataset read_libsvm(const std::string& path, const LibsvmOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io_error, "cannot open " + path);
  return parse_libsvm(in, opts);
}

/// Writes labels as +1/-1 and every stored feature except the bias column.
inline void write_libsvm(const LogRegDataset& data, std::ostream& out) {
  char buf[64];
  for (Index i = 0; i < data.size(); ++i) {
    out << (data.labels(i) > 0 ? "+1" : "-1");
    for (SparseRowMat::InnerIterator it(data.features, i); it; ++it) {
      if (it.col() == data.num_features) continue;
      std::snprintf(buf, sizeof buf, " %lld:%.17g", static_cast<long long>(it.col() + 1), it.value());
      out << buf;
    }
    out << '\n';
  }
}

inline void write_libsvm(const LogRegDataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io_error, "cannot open " + path);
  write_libsvm(data, out);
}

/// Synthetic data: a_i with `density` fraction of N(0,1) entries, labels drawn
/// from the logistic model around a half-sparse ground-truth weight vector.
inline LogRegDataset synthetic_logreg(Index num_points, Index num_features, double density,
                                      std::uint64_t seed) {
  if (num_points <= 0 || num_features <= 0 || density <= 0.0 || density > 1.0) {
    throw Error(ErrorKind::invalid_input, "synthetic_logreg: bad sizes or density");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Vec w = Vec::Zero(num_features + 1);
  for (Index j = 0; j < num_features; j += 2) w(j) = normal(rng);
  w(num_features) = 0.5 * normal(rng);

  std::vector<Eigen::Triplet<double>> triplets;
  LogRegDataset data;
  data.num_features = num_features;
  data.labels.resize(num_points);
  for (Index i = 0; i < num_points; ++i) {
    double z = w(num_features);
    for (Index j = 0; j < num_features; ++j) {
      if (unif(rng) < density) {
        const double v = normal(rng);
        triplets.emplace_back(i, j, v);
        z += w(j) * v;
      }
    }
    triplets.emplace_back(i, num_features, 1.0);
    const double p = 1.0 / (1.0 + std::exp(-z));
    data.labels(i) = unif(rng) < p ? 1.0 : -1.0;
  }
  data.features.resize(num_points, num_features + 1);
  data.features.setFromTriplets(triplets.begin(), triplets.end());
  data.features.makeCompressed();
  return data;
}

namespace detail {
// log(1 + e^t) without overflow.
inline double softplus(double t) { return t > 30.0 ? t : std::log1p(std::exp(t)); }
// 1 / (1 + e^{-t}) without overflow.
inline double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}
}  // namespace detail

/// psi(x) = (1/N) sum_i log(1 + exp(-b_i <(a_i, 1), x>)).
class LogRegOracle final : public FiniteSumOracle {
 public:
  explicit LogRegOracle(std::shared_ptr<const LogRegDataset> data) : data_(std::move(data)) {
    if (!data_ || data_->size() == 0) {
      throw Error(ErrorKind::invalid_input, "logistic regression needs a nonempty dataset");
    }
    // trace bound: lambda_max(A^T A) / (4N) <= sum ||a_i||^2 / (4N)
    lip_ = data_->features.squaredNorm() / (4.0 * static_cast<double>(data_->size()));
  }

  Index dim() const override { return data_->dim(); }
  Index num_terms() const override { return data_->size(); }
  const LogRegDataset& data() const { return *data_; }
  double lipschitz() const override { return lip_; }

  double value(const Vec& x) override {
    ++counters_.n_value;
    const Vec z = data_->features * x;
    double acc = 0.0;
    for (Index i = 0; i < z.size(); ++i) acc += detail::softplus(-data_->labels(i) * z(i));
    return acc / static_cast<double>(z.size());
  }

  Vec gradient(const Vec& x) override {
    Vec g;
    value_and_gradient_impl(x, g, false);
    return g;
  }

  double value_and_gradient(const Vec& x, Vec& grad) override {
    return value_and_gradient_impl(x, grad, true);
  }

  double component_value(const Vec& x, Index i) override {
    const double z = data_->features.row(i).dot(x);
    return detail::softplus(-data_->labels(i) * z);
  }

  void batch_gradient(const Vec& x, std::span<const Index> batch, Vec& out) override {
    out.setZero(dim());
    const auto& a = data_->features;
    for (Index i : batch) {
      double z = 0.0;
      for (SparseRowMat::InnerIterator it(a, i); it; ++it) z += it.value() * x(it.col());
      const double bi = data_->labels(i);
      const double coef = -bi * detail::sigmoid(-bi * z);
      for (SparseRowMat::InnerIterator it(a, i); it; ++it) out(it.col()) += coef * it.value();
    }
    out /= static_cast<double>(batch.size());
    counters_.n_component_grads += batch.size();
  }

  std::unique_ptr<SmoothOracle> clone() const override {
    return std::make_unique<LogRegOracle>(data_);
  }

 private:
  // Row-by-row accumulation in index order: batch_gradient over the sorted full
  // index set performs exactly the same floating-point operations.
  double value_and_gradient_impl(const Vec& x, Vec& grad, bool want_value) {
    if (want_value) ++counters_.n_value;
    ++counters_.n_grad;
    counters_.n_component_grads += static_cast<std::uint64_t>(num_terms());
    const auto& a = data_->features;
    grad.setZero(dim());
    double acc = 0.0;
    for (Index i = 0; i < num_terms(); ++i) {
      double z = 0.0;
      for (SparseRowMat::InnerIterator it(a, i); it; ++it) z += it.value() * x(it.col());
      const double bi = data_->labels(i);
      acc += detail::softplus(-bi * z);
      const double coef = -bi * detail::sigmoid(-bi * z);
      for (SparseRowMat::InnerIterator it(a, i); it; ++it) grad(it.col()) += coef * it.value();
    }
    grad /= static_cast<double>(num_terms());
    return acc / static_cast<double>(num_terms());
  }

  std::shared_ptr<const LogRegDataset> data_;
  double lip_ = 0.0;
};

}  // namespace sdc
