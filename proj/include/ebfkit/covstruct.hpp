#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ebfkit/errors.hpp"
#include "ebfkit/linalg.hpp"

namespace ebfkit {

/// Named variance-component values. Variance slots hold variances (squared
/// response units) and covariance slots hold covariances.
class VarianceParams {
 public:
  VarianceParams() = default;
  VarianceParams(std::initializer_list<std::pair<const std::string, double>> init)
      : values_(init) {}

  void set(const std::string& slot, double value) { values_[slot] = value; }

  double at(const std::string& slot) const {
    const auto it = values_.find(slot);
    if (it == values_.end()) throw MissingSlot("no value for slot '" + slot + "'");
    return it->second;
  }

  bool contains(const std::string& slot) const { return values_.count(slot) != 0; }
  std::size_t size() const { return values_.size(); }
  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }

  friend bool operator==(const VarianceParams&, const VarianceParams&) = default;

 private:
  std::map<std::string, double> values_;
};

enum class StructureKind { Diagonal, ScaledIdentity, BlockKronecker, Car, DenseSymmetric };

inline const char* to_string(StructureKind kind) {
  switch (kind) {
    case StructureKind::Diagonal: return "diagonal";
    case StructureKind::ScaledIdentity: return "scaled_identity";
    case StructureKind::BlockKronecker: return "block_kronecker";
    case StructureKind::Car: return "car";
    case StructureKind::DenseSymmetric: return "dense_symmetric";
  }
  return "unknown";
}

/// Half-open index range [begin, end) of a diagonal structure that shares
/// one variance slot.
struct DiagonalRange {
  std::string slot;
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// Slot names for the upper triangle (row-major, i <= j) of a p x p
/// symmetric matrix: prefix_1_1, prefix_1_2, ..., prefix_p_p.
inline std::vector<std::string> upper_triangle_slot_names(std::size_t p,
                                                          const std::string& prefix = "s") {
  std::vector<std::string> names;
  names.reserve(p * (p + 1) / 2);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i; j < p; ++j) {
      names.push_back(prefix + "_" + std::to_string(i + 1) + "_" + std::to_string(j + 1));
    }
  }
  return names;
}

namespace detail {

inline void require_distinct(const std::vector<std::string>& slots) {
  std::set<std::string> seen;
  for (const auto& s : slots) {
    if (s.empty()) throw InvalidArgument("empty slot name");
    if (!seen.insert(s).second) throw InvalidArgument("duplicate slot name '" + s + "'");
  }
}

inline double positive_variance(const VarianceParams& params, const std::string& slot) {
  const double v = params.at(slot);
  if (!std::isfinite(v) || v <= 0.0) {
    throw NotPositiveDefinite("variance slot '" + slot + "' = " + std::to_string(v) +
                              " is not strictly positive");
  }
  return v;
}

// Factorisation of (I - W), shared by every instantiation of one CAR structure.
struct CarFactor {
  bool singular = false;
  double rcond = 0.0;
  double log_abs_det = 0.0;  // log|det(I - W)|
  Matrix inverse;            // (I - W)^{-1}
};

inline std::shared_ptr<const CarFactor> factor_car(const Matrix& weights) {
  const auto n = weights.rows();
  auto out = std::make_shared<CarFactor>();
  const Matrix a = Matrix::Identity(n, n) - weights;
  Eigen::PartialPivLU<Matrix> lu(a);
  out->rcond = lu.rcond();
  const auto diag = lu.matrixLU().diagonal();
  if (!(out->rcond >= 1e-12) || (diag.array() == 0.0).any()) {
    out->singular = true;
    return out;
  }
  out->log_abs_det = diag.array().abs().log().sum();
  out->inverse = lu.inverse();
  return out;
}

}  // namespace detail

/// Symbolic description of a random-effects covariance matrix Psi(tau) and
/// its named parameter slots. Immutable after construction.
class CovarianceStructure {
 public:
  /// One variance slot per coordinate.
  static CovarianceStructure diagonal(std::vector<std::string> slots) {
    std::vector<DiagonalRange> ranges;
    ranges.reserve(slots.size());
    for (std::size_t j = 0; j < slots.size(); ++j) ranges.push_back({slots[j], j, j + 1});
    return diagonal(slots.size(), std::move(ranges));
  }

  /// Variance slots broadcast over index ranges that tile [0, dim).
  static CovarianceStructure diagonal(std::size_t dim, std::vector<DiagonalRange> ranges) {
    CovarianceStructure s(StructureKind::Diagonal, dim);
    std::vector<bool> covered(dim, false);
    for (const auto& r : ranges) {
      if (r.begin >= r.end || r.end > dim) {
        throw InvalidArgument("diagonal range [" + std::to_string(r.begin) + ", " +
                              std::to_string(r.end) + ") is empty or exceeds dim " +
                              std::to_string(dim));
      }
      for (std::size_t j = r.begin; j < r.end; ++j) {
        if (covered[j]) throw InvalidArgument("diagonal ranges overlap at index " + std::to_string(j));
        covered[j] = true;
      }
      s.slots_.push_back(r.slot);
    }
    for (std::size_t j = 0; j < dim; ++j) {
      if (!covered[j]) throw InvalidArgument("diagonal index " + std::to_string(j) + " has no slot");
    }
    detail::require_distinct(s.slots_);
    s.ranges_ = std::move(ranges);
    return s;
  }

  static CovarianceStructure scaled_identity(std::size_t dim, std::string slot = "variance") {
    CovarianceStructure s(StructureKind::ScaledIdentity, dim);
    s.slots_ = {std::move(slot)};
    detail::require_distinct(s.slots_);
    return s;
  }

  /// Psi = block (p x p) kron I_m, so effect a of replicate r sits at a*m + r.
  static CovarianceStructure block_kronecker(std::size_t block_dim, std::size_t replications,
                                             std::vector<std::string> slots = {}) {
    if (block_dim == 0 || replications == 0) {
      throw InvalidArgument("block_kronecker needs block_dim >= 1 and replications >= 1");
    }
    CovarianceStructure s(StructureKind::BlockKronecker, block_dim * replications);
    s.block_dim_ = block_dim;
    s.replications_ = replications;
    s.slots_ = slots.empty() ? upper_triangle_slot_names(block_dim) : std::move(slots);
    if (s.slots_.size() != block_dim * (block_dim + 1) / 2) {
      throw InvalidArgument("block_kronecker with block_dim " + std::to_string(block_dim) +
                            " needs " + std::to_string(block_dim * (block_dim + 1) / 2) + " slots");
    }
    detail::require_distinct(s.slots_);
    return s;
  }

  /// tau^2 (I - W)^{-1} B (I - W)^{-T} with B = diag(b). W is used verbatim;
  /// a row-normalised adjacency matrix makes (I - W) singular.
  static CovarianceStructure car(Matrix weights, Vector b, std::string slot = "variance") {
    const auto n = weights.rows();
    if (n == 0 || weights.cols() != n) throw InvalidArgument("CAR weight matrix must be square and nonempty");
    if (b.size() != n) throw DimensionMismatch("CAR b has length " + std::to_string(b.size()) +
                                               ", expected " + std::to_string(n));
    if (!weights.allFinite()) throw InvalidArgument("CAR weight matrix has non-finite entries");
    for (Eigen::Index j = 0; j < n; ++j) {
      if (weights(j, j) != 0.0) throw InvalidArgument("CAR weight matrix must have a zero diagonal");
      if (!std::isfinite(b(j)) || b(j) <= 0.0) throw InvalidArgument("CAR b entries must be strictly positive");
    }
    CovarianceStructure s(StructureKind::Car, static_cast<std::size_t>(n));
    s.slots_ = {std::move(slot)};
    detail::require_distinct(s.slots_);
    s.car_factor_ = detail::factor_car(weights);
    s.weights_ = std::move(weights);
    s.car_b_ = std::move(b);
    return s;
  }

  static CovarianceStructure dense_symmetric(std::size_t dim, std::vector<std::string> slots = {}) {
    CovarianceStructure s(StructureKind::DenseSymmetric, dim);
    s.block_dim_ = dim;
    s.replications_ = 1;
    s.slots_ = slots.empty() ? upper_triangle_slot_names(dim) : std::move(slots);
    if (s.slots_.size() != dim * (dim + 1) / 2) {
      throw InvalidArgument("dense_symmetric of dim " + std::to_string(dim) + " needs " +
                            std::to_string(dim * (dim + 1) / 2) + " slots");
    }
    detail::require_distinct(s.slots_);
    return s;
  }

  StructureKind kind() const { return kind_; }
  std::size_t dim() const { return dim_; }
  const std::vector<std::string>& slots() const { return slots_; }
  const std::vector<DiagonalRange>& ranges() const { return ranges_; }
  std::size_t block_dim() const { return block_dim_; }
  std::size_t replications() const { return replications_; }
  const Matrix& weights() const { return weights_; }
  const Vector& car_b() const { return car_b_; }

  /// True when Psi is an affine function of the slot values.
  bool affine_in_slots() const { return kind_ != StructureKind::Car; }

  /// The p x p symmetric matrix spanned by the slots of a BlockKronecker or
  /// DenseSymmetric structure.
  Matrix block(const VarianceParams& params) const {
    if (kind_ != StructureKind::BlockKronecker && kind_ != StructureKind::DenseSymmetric) {
      throw InvalidArgument(std::string("structure kind ") + to_string(kind_) + " has no symmetric block");
    }
    const auto p = static_cast<Eigen::Index>(block_dim_);
    Matrix out(p, p);
    std::size_t idx = 0;
    for (Eigen::Index i = 0; i < p; ++i) {
      for (Eigen::Index j = i; j < p; ++j) {
        const double v = params.at(slots_[idx++]);
        out(i, j) = v;
        out(j, i) = v;
      }
    }
    return out;
  }

  /// Dense Psi(params). Throws if the result is not positive definite.
  Matrix build(const VarianceParams& params) const {
    const auto n = static_cast<Eigen::Index>(dim_);
    Matrix out = Matrix::Zero(n, n);
    switch (kind_) {
      case StructureKind::Diagonal:
        for (const auto& r : ranges_) {
          const double v = detail::positive_variance(params, r.slot);
          for (std::size_t j = r.begin; j < r.end; ++j) out(j, j) = v;
        }
        return out;
      case StructureKind::ScaledIdentity:
        out.diagonal().setConstant(detail::positive_variance(params, slots_[0]));
        return out;
      case StructureKind::BlockKronecker:
      case StructureKind::DenseSymmetric: {
        const Matrix blk = block(params);
        cholesky(blk, "covariance block");
        const auto p = static_cast<Eigen::Index>(block_dim_);
        const auto m = static_cast<Eigen::Index>(replications_);
        for (Eigen::Index a = 0; a < p; ++a) {
          for (Eigen::Index b = 0; b < p; ++b) {
            for (Eigen::Index r = 0; r < m; ++r) out(a * m + r, b * m + r) = blk(a, b);
          }
        }
        return out;
      }
      case StructureKind::Car: {
        const double tau2 = detail::positive_variance(params, slots_[0]);
        const auto& f = require_car_factor();
        out = tau2 * (f.inverse * car_b_.asDiagonal() * f.inverse.transpose());
        out = symmetrize(out);
        cholesky(out, "CAR covariance");
        return out;
      }
    }
    return out;
  }

  /// log|Psi(params)| by the structure's closed form.
  double log_det(const VarianceParams& params) const {
    switch (kind_) {
      case StructureKind::Diagonal: {
        double acc = 0.0;
        for (const auto& r : ranges_) {
          acc += static_cast<double>(r.end - r.begin) * std::log(detail::positive_variance(params, r.slot));
        }
        return acc;
      }
      case StructureKind::ScaledIdentity:
        return static_cast<double>(dim_) * std::log(detail::positive_variance(params, slots_[0]));
      case StructureKind::BlockKronecker:
      case StructureKind::DenseSymmetric:
        return static_cast<double>(replications_) * log_det_spd(block(params), "covariance block");
      case StructureKind::Car: {
        const double tau2 = detail::positive_variance(params, slots_[0]);
        const auto& f = require_car_factor();
        return static_cast<double>(dim_) * std::log(tau2) - 2.0 * f.log_abs_det +
               car_b_.array().log().sum();
      }
    }
    return 0.0;
  }

 private:
  CovarianceStructure(StructureKind kind, std::size_t dim) : kind_(kind), dim_(dim) {
    if (dim == 0) throw InvalidArgument("covariance structure dimension must be >= 1");
  }

  const detail::CarFactor& require_car_factor() const {
    if (car_factor_->singular) {
      throw SingularSystem("(I - W) is numerically singular (reciprocal condition " +
                           std::to_string(car_factor_->rcond) +
                           "); scale W to obtain a proper CAR model");
    }
    return *car_factor_;
  }

  StructureKind kind_;
  std::size_t dim_;
  std::vector<std::string> slots_;
  std::vector<DiagonalRange> ranges_;
  std::size_t block_dim_ = 0;
  std::size_t replications_ = 0;
  Matrix weights_;
  Vector car_b_;
  std::shared_ptr<const detail::CarFactor> car_factor_;
};

inline Matrix build_covariance(const CovarianceStructure& structure, const VarianceParams& params) {
  return structure.build(params);
}

inline double log_det(const CovarianceStructure& structure, const VarianceParams& params) {
  return structure.log_det(params);
}

}  // namespace ebfkit
