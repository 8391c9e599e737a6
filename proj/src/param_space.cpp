#include "sloppy/param_space.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "sloppy/error.hpp"

namespace sloppy {

namespace {

void check_names(const std::vector<std::string>& names, std::size_t n_values) {
  if (names.size() != n_values) {
    throw Error(ErrorKind::InvalidArgument, "got " + std::to_string(names.size()) + " names for " +
                                                std::to_string(n_values) + " values");
  }
  std::set<std::string> seen;
  for (const auto& name : names) {
    if (!seen.insert(name).second) throw Error(ErrorKind::DuplicateName, "parameter '" + name + "'");
  }
}

void check_positive(const std::vector<std::string>& names, const std::vector<double>& linear) {
  for (std::size_t i = 0; i < linear.size(); ++i) {
    if (!(linear[i] > 0.0) || !std::isfinite(linear[i])) {
      throw Error(ErrorKind::NonPositiveParameter,
                  "parameter '" + names[i] + "' = " + std::to_string(linear[i]));
    }
  }
}

}  // namespace

ParameterPoint ParameterPoint::from_linear(std::vector<std::string> names, std::vector<double> linear) {
  check_names(names, linear.size());
  check_positive(names, linear);
  ParameterPoint p;
  p.names_ = std::move(names);
  p.log_.resize(linear.size());
  std::transform(linear.begin(), linear.end(), p.log_.begin(), [](double x) { return std::log(x); });
  p.linear_ = std::move(linear);
  return p;
}

ParameterPoint ParameterPoint::from_log(std::vector<std::string> names, std::vector<double> log) {
  check_names(names, log.size());
  ParameterPoint p;
  p.names_ = std::move(names);
  p.linear_.resize(log.size());
  std::transform(log.begin(), log.end(), p.linear_.begin(), [](double x) { return std::exp(x); });
  p.log_ = std::move(log);
  check_positive(p.names_, p.linear_);
  return p;
}

ParameterPoint ParameterPoint::linear_only(std::vector<std::string> names, std::vector<double> linear) {
  check_names(names, linear.size());
  ParameterPoint p;
  p.names_ = std::move(names);
  p.log_.resize(linear.size());
  for (std::size_t i = 0; i < linear.size(); ++i) {
    if (!std::isfinite(linear[i])) {
      throw Error(ErrorKind::InvalidArgument, "parameter '" + p.names_[i] + "' is not finite");
    }
    if (linear[i] > 0.0) {
      p.log_[i] = std::log(linear[i]);
    } else {
      p.log_[i] = std::numeric_limits<double>::quiet_NaN();
      p.log_valid_ = false;
    }
  }
  p.linear_ = std::move(linear);
  return p;
}

const std::vector<double>& ParameterPoint::log() const {
  if (!log_valid_) {
    throw Error(ErrorKind::NonPositiveParameter, "point has non-positive values; log coordinates undefined");
  }
  return log_;
}

std::size_t ParameterPoint::index_of(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw Error(ErrorKind::InvalidArgument, "unknown parameter '" + name + "'");
  return static_cast<std::size_t>(it - names_.begin());
}

ParameterPoint ParameterPoint::with_log(std::vector<double> log) const {
  return from_log(names_, std::move(log));
}

ParameterPoint ParameterPoint::with_linear(std::vector<double> linear) const {
  return log_valid_ ? from_linear(names_, std::move(linear)) : linear_only(names_, std::move(linear));
}

PerturbationPair perturb(const ParameterPoint& base, std::size_t axis, double h) {
  if (axis >= base.size()) {
    throw Error(ErrorKind::AxisOutOfRange,
                "axis " + std::to_string(axis) + " for P=" + std::to_string(base.size()));
  }
  if (!(h > 0.0)) throw Error(ErrorKind::InvalidArgument, "step must be positive");
  auto up = base.log();
  auto down = up;
  up[axis] += h;
  down[axis] -= h;
  return {base.with_log(std::move(up)), base.with_log(std::move(down)), axis, h};
}

PerturbationPair perturb_linear(const ParameterPoint& base, std::size_t axis, double h) {
  if (axis >= base.size()) {
    throw Error(ErrorKind::AxisOutOfRange,
                "axis " + std::to_string(axis) + " for P=" + std::to_string(base.size()));
  }
  if (!(h > 0.0)) throw Error(ErrorKind::InvalidArgument, "step must be positive");
  auto up = base.linear();
  auto down = up;
  up[axis] += h;
  down[axis] -= h;
  return {ParameterPoint::linear_only(base.names(), std::move(up)),
          ParameterPoint::linear_only(base.names(), std::move(down)), axis, h};
}

nlohmann::ordered_json point_to_json(const ParameterPoint& p) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < p.size(); ++i) j[p.names()[i]] = p.linear()[i];
  return j;
}

ParameterPoint point_from_json(const nlohmann::ordered_json& j, const std::vector<std::string>& order,
                               bool allow_nonpositive) {
  if (!j.is_object()) throw Error(ErrorKind::InvalidArgument, "parameter point must be a JSON object");
  std::vector<std::string> names;
  std::vector<double> values;
  if (order.empty()) {
    for (const auto& [key, value] : j.items()) {
      if (!value.is_number()) throw Error(ErrorKind::InvalidArgument, "parameter '" + key + "' is not a number");
      names.push_back(key);
      values.push_back(value.get<double>());
    }
  } else {
    if (j.size() != order.size()) {
      throw Error(ErrorKind::InvalidArgument, "expected " + std::to_string(order.size()) + " parameters, got " +
                                                  std::to_string(j.size()));
    }
    for (const auto& name : order) {
      auto it = j.find(name);
      if (it == j.end()) throw Error(ErrorKind::InvalidArgument, "missing parameter '" + name + "'");
      if (!it->is_number()) throw Error(ErrorKind::InvalidArgument, "parameter '" + name + "' is not a number");
      names.push_back(name);
      values.push_back(it->get<double>());
    }
  }
  return allow_nonpositive ? ParameterPoint::linear_only(std::move(names), std::move(values))
                           : ParameterPoint::from_linear(std::move(names), std::move(values));
}

}  // namespace sloppy
