#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace mfs {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Points = Eigen::Matrix3Xd;  // one column per point
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

// Error hierarchy. Everything derives from Error so callers can catch broadly.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line) : Error(what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Coincident target/source points. Indices are -1 when not applicable.
class SingularityError : public Error {
 public:
  SingularityError(const std::string& what, Index target = -1, Index source = -1)
      : Error(what), target_(target), source_(source) {}
  Index target() const { return target_; }
  Index source() const { return source_; }

 private:
  Index target_;
  Index source_;
};

class OverlapError : public Error {
 public:
  OverlapError(const std::string& what, double penetration)
      : Error(what), penetration_(penetration) {}
  /// Positive estimate of how deep the bodies interpenetrate.
  double penetration() const { return penetration_; }

 private:
  double penetration_;
};

class PlacementError : public Error {
 public:
  using Error::Error;
};

class DegenerateGeometryError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

}  // namespace mfs
