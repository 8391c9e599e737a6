#include <doctest.h>

#include <cmath>
#include <random>

#include "sloppy/error.hpp"
#include "sloppy/param_space.hpp"
#include "test_util.hpp"

using namespace sloppy;

TEST_CASE("make_point computes natural logs") {
  auto p = make_point({"a", "b"}, {1.0, std::exp(1.0)});
  CHECK(p.log()[0] == 0.0);
  CHECK(p.log()[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(p.names() == std::vector<std::string>{"a", "b"});

  auto theta = make_point({"Theta"}, {2.5});
  CHECK(theta.log()[0] == doctest::Approx(0.9163).epsilon(1e-4));
}

TEST_CASE("make_point rejects bad input") {
  CHECK_ERROR_KIND(make_point({"a"}, {0.0}), ErrorKind::NonPositiveParameter);
  CHECK_ERROR_KIND(make_point({"a"}, {-1.0}), ErrorKind::NonPositiveParameter);
  CHECK_ERROR_KIND(make_point({"a", "a"}, {1.0, 2.0}), ErrorKind::DuplicateName);
  CHECK_ERROR_KIND(make_point({"a"}, {std::nan("")}), ErrorKind::NonPositiveParameter);
}

TEST_CASE("perturb moves one log coordinate by exactly h") {
  auto base = ParameterPoint::from_log({"a", "b"}, {0.0, 0.0});
  auto pair = perturb(base, 0, 0.1);
  CHECK(pair.plus.log() == std::vector<double>{0.1, 0.0});
  CHECK(pair.minus.log() == std::vector<double>{-0.1, 0.0});
  CHECK(pair.plus.linear()[0] == doctest::Approx(std::exp(0.1)));
  CHECK(pair.minus.linear()[0] == doctest::Approx(std::exp(-0.1)));
  CHECK(pair.plus.linear()[1] == 1.0);
  CHECK(pair.axis == 0);
  CHECK(pair.step == 0.1);
  CHECK(base.log() == std::vector<double>{0.0, 0.0});

  auto base2 = ParameterPoint::from_log({"a", "b"}, {1.0, 2.0});
  auto p2 = perturb(base2, 1, 0.001);
  CHECK(p2.plus.log()[0] == 1.0);
  CHECK(p2.plus.log()[1] == 2.0 + 0.001);

  CHECK_ERROR_KIND(perturb(base, 5, 0.1), ErrorKind::AxisOutOfRange);
  CHECK_ERROR_KIND(perturb(base, 0, 0.0), ErrorKind::InvalidArgument);
}

TEST_CASE("property: log/linear round trip and single-axis perturbation") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-8.0, 8.0);
  std::uniform_int_distribution<int> dim(1, 12);
  for (int trial = 0; trial < 500; ++trial) {
    const int p = dim(rng);
    std::vector<std::string> names;
    std::vector<double> logs;
    for (int i = 0; i < p; ++i) {
      names.push_back("x" + std::to_string(i));
      logs.push_back(u(rng));
    }
    auto a = ParameterPoint::from_log(names, logs);
    auto b = ParameterPoint::from_linear(names, a.linear());
    for (int i = 0; i < p; ++i) {
      CHECK(std::abs(b.log()[i] - logs[i]) <= 1e-12 * std::max(1.0, std::abs(logs[i])));
      CHECK(std::abs(std::exp(b.log()[i]) - a.linear()[i]) <= 1e-12 * a.linear()[i]);
    }
    const auto axis = static_cast<std::size_t>(trial % p);
    const double h = 0.001 + 0.1 * (trial % 7);
    auto pair = perturb(a, axis, h);
    for (int i = 0; i < p; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      if (ii == axis) {
        CHECK(pair.plus.log()[ii] == logs[ii] + h);
        CHECK(pair.minus.log()[ii] == logs[ii] - h);
      } else {
        CHECK(pair.plus.log()[ii] == logs[ii]);
        CHECK(pair.minus.log()[ii] == logs[ii]);
      }
    }
  }
}

TEST_CASE("linear-only points admit non-positive values") {
  auto p = ParameterPoint::linear_only({"p0", "p1"}, {0.0, -2.0});
  CHECK_FALSE(p.log_valid());
  CHECK_ERROR_KIND(p.log(), ErrorKind::NonPositiveParameter);
  auto pair = perturb_linear(p, 1, 0.5);
  CHECK(pair.plus.linear() == std::vector<double>{0.0, -1.5});
  CHECK(pair.minus.linear() == std::vector<double>{0.0, -2.5});
  CHECK_ERROR_KIND(perturb(p, 0, 0.1), ErrorKind::NonPositiveParameter);
}

TEST_CASE("json round trip keeps canonical order and exact values") {
  auto p = make_point({"b", "a"}, {0.1, 1.0 / 3.0});
  auto j = point_to_json(p);
  auto text = j.dump();
  auto back = point_from_json(nlohmann::ordered_json::parse(text));
  CHECK(back == p);

  // Key order in a file is irrelevant when a canonical order is given.
  auto reordered = nlohmann::ordered_json::parse(R"({"a": 0.3333333333333333, "b": 0.1})");
  auto q = point_from_json(reordered, {"b", "a"});
  CHECK(q.names() == std::vector<std::string>{"b", "a"});
  CHECK(q.linear()[0] == 0.1);

  CHECK_ERROR_KIND(point_from_json(reordered, {"b", "c"}), ErrorKind::InvalidArgument);
  CHECK_ERROR_KIND(point_from_json(nlohmann::ordered_json::parse(R"({"a": -1})")),
                   ErrorKind::NonPositiveParameter);
  CHECK(point_from_json(nlohmann::ordered_json::parse(R"({"a": -1})"), {}, true).linear()[0] == -1.0);
}
