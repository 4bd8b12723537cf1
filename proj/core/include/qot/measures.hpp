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

#ifndef QOT_MEASURES_HPP_
#define QOT_MEASURES_HPP_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace qot {

// One atom per row.
using PointMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Point = Eigen::VectorXd;

inline constexpr double kWeightSumTolerance = 1e-12;
inline constexpr std::int64_t kDefaultGridCap = 1'000'000;

// Throws NegativeWeight, WeightSumMismatch or DimensionMismatch.
void ValidateMeasure(const PointMatrix& points, const Eigen::VectorXd& weights);

/// A finitely supported probability measure on R^d.
///
/// Immutable after construction; every constructor validates, so any
/// DiscreteMeasure in hand satisfies the invariants (nonnegative weights
/// summing to one within 1e-12, at least one atom, consistent dimension).
class DiscreteMeasure {
 public:
  DiscreteMeasure(PointMatrix points, Eigen::VectorXd weights);

  // Equal weights 1/n on the rows of `points`.
  static DiscreteMeasure Uniform(PointMatrix points);
  static DiscreteMeasure Dirac(const Point& atom);
  // Convenience for d = 1.
  static DiscreteMeasure OnLine(const std::vector<double>& xs,
                                const std::vector<double>& ws);

  Eigen::Index size() const { return points_.rows(); }
  int dim() const { return static_cast<int>(points_.cols()); }
  const PointMatrix& points() const { return points_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  auto point(Eigen::Index i) const { return points_.row(i); }
  double weight(Eigen::Index i) const { return weights_[i]; }

  // Same measure with zero-weight atoms removed.
  DiscreteMeasure WithoutZeroWeights() const;
  // Coincident atoms collapsed into one, first-occurrence order kept.
  DiscreteMeasure MergeDuplicates() const;
  DiscreteMeasure Translated(const Point& shift) const;
  // Weighted mean of the atoms.
  Point Mean() const;

 private:
  PointMatrix points_;
  Eigen::VectorXd weights_;
};

struct DomainSpec {
  enum class Kind { kUniformBox, kExplicit };

  Kind kind = Kind::kUniformBox;
  Point lower;
  Point upper;
  std::optional<DiscreteMeasure> measure;

  static DomainSpec UniformBox(Point lower, Point upper);
  static DomainSpec UnitInterval();
  static DomainSpec Explicit(DiscreteMeasure m);

  int dim() const;
  // Throws InvalidArgument unless lower < upper componentwise (box case).
  void Validate() const;
};

/// Midpoint-rule tensor grid on a uniform box: m^d cell centers, each with
/// weight m^-d, ordered lexicographically with the first axis slowest.
DiscreteMeasure QuadratureGrid(const DomainSpec& spec, int m_per_axis,
                               std::int64_t cap = kDefaultGridCap);

/// n i.i.d. draws with weights 1/n: uniform on the box for kUniformBox,
/// multinomial from the atoms for kExplicit. A pure function of
/// (source, n, seed, stream).
DiscreteMeasure SampleEmpirical(const DomainSpec& source, Eigen::Index n,
                                std::uint64_t seed, std::uint64_t stream = 0);
DiscreteMeasure SampleEmpirical(const DiscreteMeasure& source, Eigen::Index n,
                                std::uint64_t seed, std::uint64_t stream = 0);

// CSV measure format: optional '#' comment lines, header x1,...,xd,w, then one
// row per atom. Rows of the wrong arity are rejected with ParseError.
DiscreteMeasure ReadMeasureCsv(std::istream& in);
DiscreteMeasure ReadMeasureCsv(const std::string& path);
void WriteMeasureCsv(std::ostream& out, const DiscreteMeasure& m);

}  // namespace qot

#endif  // QOT_MEASURES_HPP_
