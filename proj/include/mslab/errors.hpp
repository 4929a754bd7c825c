#pragma once

#include <stdexcept>
#include <string>

namespace mslab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Induced metric vanished (or fell below the degeneracy threshold) at a grid node.
class GeometryDegenerateError : public Error {
 public:
  GeometryDegenerateError(const std::string& what, int node) : Error(what), node_(node) {}
  int node() const noexcept { return node_; }

 private:
  int node_;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A grid function that must lie in the zero-mean pivot space did not.
class ZeroMeanViolation : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class RankDeficiencyError : public Error {
 public:
  RankDeficiencyError(const std::string& what, int index) : Error(what), index_(index) {}
  int index() const noexcept { return index_; }

 private:
  int index_;
};

/// Explicit time stepping left the finite range (|x| above the blow-up guard).
class BlowUpError : public Error {
 public:
  BlowUpError(const std::string& what, int step) : Error(what), step_(step) {}
  int step() const noexcept { return step_; }

 private:
  int step_;
};

class DiffeomorphismError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace mslab
