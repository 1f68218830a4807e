#include <filesystem>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "nlbound/config.hpp"
#include "nlbound/error.hpp"

using namespace nlbound;

namespace {

std::string config_error_key(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "";
}

}  // namespace

TEST_CASE("preset by name equals vdp_preset") {
  const auto spec = parse_config(R"(
preset:
  name: vdp
  alpha2: 0.1
  a1: 0.5
  a2: 0.5
  r1: pi
  r2: 7
  omega2: 2pi
)");
  VdpParameters p;
  p.alpha2 = 0.1;
  p.a1 = p.a2 = 0.5;
  p.r1 = std::numbers::pi;
  p.r2 = 7.0;
  p.omega2 = 2.0 * std::numbers::pi;
  CHECK(spec == vdp_preset(p));
}

TEST_CASE("explicit linear system") {
  const auto spec = parse_config(R"(
dimension: 2
linear:
  entry.1.1: -1
  entry.2.2:
    offset: -2
    term:
      - {amplitude: 0.5, frequency: 3, kind: cos}
)");
  CHECK(spec.dimension() == 2);
  CHECK(spec.nonlinear.empty());
  CHECK(spec.linear(0.0)(0, 0) == -1.0);
  CHECK(spec.linear(0.0)(1, 1) == doctest::Approx(-1.5));
  CHECK(spec.linear(0.0)(0, 1) == 0.0);
  CHECK_FALSE(spec.preset.has_value());
}

TEST_CASE("degree-zero nonlinear term is a validation error") {
  CHECK_THROWS_AS(parse_config(R"(
dimension: 2
nonlinear:
  term:
    - {component: 1, coefficient: 1.0, exponents: [0, 0]}
)"),
                  ValidationError);
}

TEST_CASE("schema violations name the key") {
  CHECK(config_error_key("dimension: 2\nlinaer: {}\n") == "linaer");
  CHECK(config_error_key("dimension: 2\nlinear:\n  entry.3.1: 1\n") == "linear.entry.3.1");
  CHECK(config_error_key("dimension: 2\nnonlinear:\n  term:\n    - {component: 1, coefficient: 1, exponents: [1]}\n") ==
        "nonlinear.term[0].exponents");
  CHECK(config_error_key("preset:\n  name: vdp\n  omega9: 1\n") == "preset.omega9");
  CHECK(config_error_key("preset:\n  name: duffing\n") == "preset.name");
  CHECK(config_error_key("dimension: 2\nt0: abc\n") == "t0");
}

TEST_CASE("pi multiples") {
  CHECK(parse_real(YAML::Load("3.2pi"), "x") == doctest::Approx(3.2 * std::numbers::pi));
  CHECK(parse_real(YAML::Load("-0.5*pi"), "x") == doctest::Approx(-0.5 * std::numbers::pi));
  CHECK(parse_real(YAML::Load("-pi"), "x") == doctest::Approx(-std::numbers::pi));
  CHECK(parse_real(YAML::Load("1e-3"), "x") == 1e-3);
}

TEST_CASE("property: serialization round-trips") {
  const char* docs[] = {
      "preset:\n  name: vdp\n  alpha2: -0.05\n  a1: 0.1\n  a2: 0.1\n  r1: 3.2pi\n  r2: 13\n  a: 0.01\n  omega2: 2pi\n",
      R"(
dimension: 3
t0: 1.5
linear:
  entry.1.2: 1
  entry.3.3: {offset: -0.3, term: [{amplitude: 0.1, frequency: 2, phase: 0.5, kind: sin}]}
nonlinear:
  term:
    - {component: 2, coefficient: -0.7, exponents: [1, 2, 0]}
    - {component: 3, coefficient: {offset: 0, term: [{amplitude: 1, frequency: 1}]}, exponents: [0, 0, 3]}
forcing:
  1: {term: [{amplitude: 0.2, frequency: 5, kind: cos}]}
)"};
  for (const char* doc : docs) {
    const auto spec = parse_config(doc);
    const auto again = parse_config(to_config_text(spec));
    CHECK(again == spec);
    CHECK(to_config_text(again) == to_config_text(spec));
  }
}

TEST_CASE("missing config file") {
  const auto path = std::filesystem::temp_directory_path() / "nlbound_no_such_config.yaml";
  std::filesystem::remove(path);
  try {
    load_config_file(path);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("config not found") != std::string::npos);
  }
}

TEST_CASE("config file on disk") {
  const auto path = std::filesystem::temp_directory_path() / "nlbound_test_config.yaml";
  {
    std::ofstream out(path);
    out << "preset:\n  name: vdp\n  alpha2: 0.1\n";
  }
  const auto spec = load_config_file(path);
  CHECK(spec.preset.has_value());
  CHECK(spec.preset->alpha2 == 0.1);
  std::filesystem::remove(path);
}
