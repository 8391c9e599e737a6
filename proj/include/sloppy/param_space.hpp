#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace sloppy {

// A point in P-dimensional parameter space. Linear and log coordinates are
// kept side by side; the log coordinates are only meaningful when every
// linear value is strictly positive (see log_valid()).
class ParameterPoint {
 public:
  ParameterPoint() = default;

  // Strictly positive values; throws NonPositiveParameter / DuplicateName.
  static ParameterPoint from_linear(std::vector<std::string> names, std::vector<double> linear);
  static ParameterPoint from_log(std::vector<std::string> names, std::vector<double> log);
  // Admits zero or negative values (e.g. polynomial coefficients). The log
  // coordinates are unusable when any value is <= 0.
  static ParameterPoint linear_only(std::vector<std::string> names, std::vector<double> linear);

  std::size_t size() const noexcept { return linear_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::vector<double>& linear() const noexcept { return linear_; }
  // Throws NonPositiveParameter when !log_valid().
  const std::vector<double>& log() const;
  bool log_valid() const noexcept { return log_valid_; }

  std::size_t index_of(const std::string& name) const;

  ParameterPoint with_log(std::vector<double> log) const;
  ParameterPoint with_linear(std::vector<double> linear) const;

  friend bool operator==(const ParameterPoint&, const ParameterPoint&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<double> linear_;
  std::vector<double> log_;
  bool log_valid_ = true;
};

// Shorthand for from_linear.
inline ParameterPoint make_point(std::vector<std::string> names, std::vector<double> linear) {
  return ParameterPoint::from_linear(std::move(names), std::move(linear));
}

struct PerturbationPair {
  ParameterPoint plus;
  ParameterPoint minus;
  std::size_t axis = 0;
  double step = 0.0;
};

// Central-difference endpoints at +-h along one log axis.
PerturbationPair perturb(const ParameterPoint& base, std::size_t axis, double h);
// Same in bare (linear) coordinates; endpoints may leave the positive orthant.
PerturbationPair perturb_linear(const ParameterPoint& base, std::size_t axis, double h);

// Flat {name: linear_value} object. Doubles are written with shortest
// round-trip formatting.
nlohmann::ordered_json point_to_json(const ParameterPoint& p);
// Reads a flat object. When `order` is non-empty it defines the canonical name
// order and the key sets must match; otherwise file order is kept.
ParameterPoint point_from_json(const nlohmann::ordered_json& j,
                               const std::vector<std::string>& order = {},
                               bool allow_nonpositive = false);

}  // namespace sloppy
