#include <doctest.h>

#include "tnfo/units.hpp"

using namespace tnfo;

TEST_SUITE("units") {
  TEST_CASE("pound-force per square inch in pascals") {
    // 1 psi = (pound-force in N) / (inch in m)^2, frozen to full precision.
    CHECK(units::pascal_per_psi ==
          doctest::Approx(4.4482216152605 / (0.0254 * 0.0254)).epsilon(1e-14));
    CHECK(units::psi_to_pascal(40.0) == doctest::Approx(275790.291727).epsilon(1e-11));
    CHECK(units::psi_to_pascal(5.0) == doctest::Approx(34473.7864658).epsilon(1e-11));
  }

  TEST_CASE("celsius to kelvin") {
    CHECK(units::celsius_to_kelvin(124.86) == doctest::Approx(398.01).epsilon(1e-12));
    CHECK(units::celsius_to_kelvin(0.0) == 273.15);
    CHECK(units::kelvin_to_celsius(373.15) == doctest::Approx(100.0).epsilon(1e-12));
  }

  TEST_CASE("megawatts to watts") {
    CHECK(units::megawatt_to_watt(15.14) == doctest::Approx(15.14e6).epsilon(1e-14));
    CHECK(units::watt_to_megawatt(2.23e6) == doctest::Approx(2.23).epsilon(1e-14));
  }

  TEST_CASE("round trips are identities to 1e-9 relative") {
    const double psis[] = {5.0, 40.0, 79.999, 0.013, 1234.5};
    for (double v : psis)
      CHECK(units::pascal_to_psi(units::psi_to_pascal(v)) == doctest::Approx(v).epsilon(1e-9));
    const double cels[] = {-40.0, 0.0, 80.04, 124.86, 150.0};
    for (double v : cels)
      CHECK(units::kelvin_to_celsius(units::celsius_to_kelvin(v)) ==
            doctest::Approx(v).epsilon(1e-9));
    const double mws[] = {1e-6, 1.0, 15.14, 30.0};
    for (double v : mws)
      CHECK(units::watt_to_megawatt(units::megawatt_to_watt(v)) ==
            doctest::Approx(v).epsilon(1e-9));
  }
}
