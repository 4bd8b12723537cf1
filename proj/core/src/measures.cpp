// Copyright 2026 The qotstat Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "qot/measures.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <system_error>

#include "qot/error.hpp"
#include "qot/io.hpp"
#include "qot/rng.hpp"

namespace qot {

// ---------------------------------------------------------------------------
// io helpers

std::string FormatDouble(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

double ParseDouble(std::string_view field) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) {
    field.remove_prefix(1);
  }
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t' ||
                            field.back() == '\r')) {
    field.remove_suffix(1);
  }
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double value = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  if (field.empty() || res.ec != std::errc() ||
      res.ptr != field.data() + field.size()) {
    throw Error(ErrorCode::kParseError, "not a number: '" + std::string(field) + "'");
  }
  return value;
}

std::vector<std::string_view> SplitCsvLine(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

void WriteFileAtomic(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot open " + tmp);
    out << contents;
    if (!out) throw Error(ErrorCode::kIoError, "write failed: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCode::kIoError, "cannot rename to " + path);
  }
}

// ---------------------------------------------------------------------------
// DiscreteMeasure

void ValidateMeasure(const PointMatrix& points, const Eigen::VectorXd& weights) {
  if (points.rows() < 1 || points.rows() != weights.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "need one weight per atom and at least one atom");
  }
  if (points.cols() < 1) {
    throw Error(ErrorCode::kDimensionMismatch, "points must have dimension >= 1");
  }
  double sum = 0.0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) {
      throw Error(ErrorCode::kNegativeWeight,
                  "weight " + std::to_string(i) + " is " + FormatDouble(weights[i]));
    }
    sum += weights[i];
  }
  if (std::abs(sum - 1.0) > kWeightSumTolerance) {
    throw Error(ErrorCode::kWeightSumMismatch, "weights sum to " + FormatDouble(sum));
  }
  if (!points.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "non-finite coordinate");
  }
}

DiscreteMeasure::DiscreteMeasure(PointMatrix points, Eigen::VectorXd weights)
    : points_(std::move(points)), weights_(std::move(weights)) {
  ValidateMeasure(points_, weights_);
}

DiscreteMeasure DiscreteMeasure::Uniform(PointMatrix points) {
  const Eigen::Index n = points.rows();
  if (n < 1) throw Error(ErrorCode::kDimensionMismatch, "empty point set");
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  return DiscreteMeasure(std::move(points), std::move(w));
}

DiscreteMeasure DiscreteMeasure::Dirac(const Point& atom) {
  PointMatrix pts(1, atom.size());
  pts.row(0) = atom.transpose();
  return DiscreteMeasure(std::move(pts), Eigen::VectorXd::Ones(1));
}

DiscreteMeasure DiscreteMeasure::OnLine(const std::vector<double>& xs,
                                        const std::vector<double>& ws) {
  if (xs.size() != ws.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "points and weights differ in length");
  }
  PointMatrix pts(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::VectorXd w(static_cast<Eigen::Index>(ws.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    pts(static_cast<Eigen::Index>(i), 0) = xs[i];
    w[static_cast<Eigen::Index>(i)] = ws[i];
  }
  return DiscreteMeasure(std::move(pts), std::move(w));
}

DiscreteMeasure DiscreteMeasure::WithoutZeroWeights() const {
  Eigen::Index keep = 0;
  for (Eigen::Index i = 0; i < size(); ++i) keep += weights_[i] > 0.0 ? 1 : 0;
  if (keep == size()) return *this;
  PointMatrix pts(keep, dim());
  Eigen::VectorXd w(keep);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < size(); ++i) {
    if (weights_[i] > 0.0) {
      pts.row(k) = points_.row(i);
      w[k] = weights_[i];
      ++k;
    }
  }
  return DiscreteMeasure(std::move(pts), std::move(w));
}

DiscreteMeasure DiscreteMeasure::MergeDuplicates() const {
  std::map<std::vector<double>, Eigen::Index> seen;
  std::vector<Eigen::Index> first;
  std::vector<double> mass;
  std::vector<Eigen::Index> count;
  for (Eigen::Index i = 0; i < size(); ++i) {
    std::vector<double> key(points_.row(i).begin(), points_.row(i).end());
    auto [it, inserted] = seen.emplace(std::move(key), static_cast<Eigen::Index>(first.size()));
    if (inserted) {
      first.push_back(i);
      mass.push_back(weights_[i]);
      count.push_back(1);
    } else {
      mass[static_cast<std::size_t>(it->second)] += weights_[i];
      ++count[static_cast<std::size_t>(it->second)];
    }
  }
  const auto k = static_cast<Eigen::Index>(first.size());
  // Equal input weights: use exact count / size.
  const bool uniform = size() > 0 && (weights_.array() == weights_[0]).all();
  PointMatrix pts(k, dim());
  Eigen::VectorXd w(k);
  for (Eigen::Index r = 0; r < k; ++r) {
    pts.row(r) = points_.row(first[static_cast<std::size_t>(r)]);
    const auto s = static_cast<std::size_t>(r);
    w[r] = uniform ? static_cast<double>(count[s]) / static_cast<double>(size()) : mass[s];
  }
  return DiscreteMeasure(std::move(pts), std::move(w));
}

DiscreteMeasure DiscreteMeasure::Translated(const Point& shift) const {
  if (shift.size() != dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "shift dimension");
  }
  PointMatrix pts = points_;
  pts.rowwise() += shift.transpose();
  return DiscreteMeasure(std::move(pts), weights_);
}

Point DiscreteMeasure::Mean() const {
  return (points_.transpose() * weights_).eval();
}

// ---------------------------------------------------------------------------
// DomainSpec

DomainSpec DomainSpec::UniformBox(Point lower, Point upper) {
  DomainSpec s;
  s.kind = Kind::kUniformBox;
  s.lower = std::move(lower);
  s.upper = std::move(upper);
  s.Validate();
  return s;
}

DomainSpec DomainSpec::UnitInterval() {
  return UniformBox(Point::Zero(1), Point::Ones(1));
}

DomainSpec DomainSpec::Explicit(DiscreteMeasure m) {
  DomainSpec s;
  s.kind = Kind::kExplicit;
  s.measure = std::move(m);
  return s;
}

int DomainSpec::dim() const {
  if (kind == Kind::kExplicit) return measure ? measure->dim() : 0;
  return static_cast<int>(lower.size());
}

void DomainSpec::Validate() const {
  if (kind == Kind::kExplicit) {
    if (!measure) throw Error(ErrorCode::kInvalidArgument, "explicit domain without measure");
    return;
  }
  if (lower.size() < 1 || lower.size() != upper.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "box bounds differ in dimension");
  }
  for (Eigen::Index k = 0; k < lower.size(); ++k) {
    if (!(lower[k] < upper[k])) {
      throw Error(ErrorCode::kInvalidArgument, "box requires lower < upper");
    }
  }
}

DiscreteMeasure QuadratureGrid(const DomainSpec& spec, int m_per_axis, std::int64_t cap) {
  spec.Validate();
  if (spec.kind != DomainSpec::Kind::kUniformBox) {
    throw Error(ErrorCode::kInvalidArgument, "quadrature grid needs a uniform box");
  }
  if (m_per_axis < 1) throw Error(ErrorCode::kInvalidArgument, "m_per_axis must be >= 1");
  const int d = spec.dim();
  std::int64_t total = 1;
  for (int k = 0; k < d; ++k) {
    total *= m_per_axis;
    if (total > cap) {
      throw Error(ErrorCode::kTooLarge, "grid exceeds " + std::to_string(cap) + " points");
    }
  }
  PointMatrix pts(total, d);
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  for (std::int64_t r = 0; r < total; ++r) {
    for (int k = 0; k < d; ++k) {
      const double h = (spec.upper[k] - spec.lower[k]) / m_per_axis;
      pts(r, k) = spec.lower[k] + (idx[static_cast<std::size_t>(k)] + 0.5) * h;
    }
    // Last axis fastest.
    for (int k = d - 1; k >= 0; --k) {
      if (++idx[static_cast<std::size_t>(k)] < m_per_axis) break;
      idx[static_cast<std::size_t>(k)] = 0;
    }
  }
  Eigen::VectorXd w = Eigen::VectorXd::Constant(
      total, std::pow(static_cast<double>(m_per_axis), -static_cast<double>(d)));
  return DiscreteMeasure(std::move(pts), std::move(w));
}

DiscreteMeasure SampleEmpirical(const DiscreteMeasure& source, Eigen::Index n,
                                std::uint64_t seed, std::uint64_t stream) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "sample size must be >= 1");
  CounterRng rng(seed, stream);
  std::vector<double> cdf(static_cast<std::size_t>(source.size()));
  double acc = 0.0;
  for (Eigen::Index i = 0; i < source.size(); ++i) {
    acc += source.weight(i);
    cdf[static_cast<std::size_t>(i)] = acc;
  }
  PointMatrix pts(n, source.dim());
  for (Eigen::Index r = 0; r < n; ++r) {
    const double u = rng.Uniform() * acc;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    auto k = static_cast<Eigen::Index>(it - cdf.begin());
    if (k >= source.size()) k = source.size() - 1;
    // Skip zero-weight atoms that share a cdf value with their successor.
    while (source.weight(k) <= 0.0 && k + 1 < source.size()) ++k;
    pts.row(r) = source.point(k);
  }
  return DiscreteMeasure::Uniform(std::move(pts));
}

DiscreteMeasure SampleEmpirical(const DomainSpec& source, Eigen::Index n,
                                std::uint64_t seed, std::uint64_t stream) {
  source.Validate();
  if (source.kind == DomainSpec::Kind::kExplicit) {
    return SampleEmpirical(*source.measure, n, seed, stream);
  }
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "sample size must be >= 1");
  CounterRng rng(seed, stream);
  const int d = source.dim();
  PointMatrix pts(n, d);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (int k = 0; k < d; ++k) {
      pts(r, k) = source.lower[k] + (source.upper[k] - source.lower[k]) * rng.Uniform();
    }
  }
  return DiscreteMeasure::Uniform(std::move(pts));
}

// ---------------------------------------------------------------------------
// CSV

DiscreteMeasure ReadMeasureCsv(std::istream& in) {
  std::string line;
  std::size_t arity = 0;
  bool header_seen = false;
  std::vector<double> coords;
  std::vector<double> weights;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto fields = SplitCsvLine(line);
    if (!header_seen) {
      if (fields.size() < 2 || fields.back() != "w") {
        throw Error(ErrorCode::kParseError, "expected header x1,...,xd,w");
      }
      for (std::size_t k = 0; k + 1 < fields.size(); ++k) {
        if (fields[k] != "x" + std::to_string(k + 1)) {
          throw Error(ErrorCode::kParseError, "expected header x1,...,xd,w");
        }
      }
      arity = fields.size();
      header_seen = true;
      continue;
    }
    if (fields.size() != arity) {
      throw Error(ErrorCode::kParseError,
                  "line " + std::to_string(line_no) + ": expected " +
                      std::to_string(arity) + " fields");
    }
    for (std::size_t k = 0; k + 1 < arity; ++k) coords.push_back(ParseDouble(fields[k]));
    weights.push_back(ParseDouble(fields.back()));
  }
  if (!header_seen) throw Error(ErrorCode::kParseError, "missing header");
  if (weights.empty()) throw Error(ErrorCode::kParseError, "no atoms");
  const auto n = static_cast<Eigen::Index>(weights.size());
  const auto d = static_cast<Eigen::Index>(arity - 1);
  PointMatrix pts = Eigen::Map<PointMatrix>(coords.data(), n, d);
  Eigen::VectorXd w = Eigen::Map<Eigen::VectorXd>(weights.data(), n);
  return DiscreteMeasure(std::move(pts), std::move(w));
}

DiscreteMeasure ReadMeasureCsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  return ReadMeasureCsv(in);
}

void WriteMeasureCsv(std::ostream& out, const DiscreteMeasure& m) {
  out << "# format_version: " << kFormatVersion << '\n';
  for (int k = 0; k < m.dim(); ++k) out << 'x' << (k + 1) << ',';
  out << "w\n";
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    for (int k = 0; k < m.dim(); ++k) out << FormatDouble(m.points()(i, k)) << ',';
    out << FormatDouble(m.weight(i)) << '\n';
  }
}

}  // namespace qot
