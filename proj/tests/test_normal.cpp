#include <cmath>

#include <gtest/gtest.h>

#include "rvcp/error.hpp"
#include "rvcp/normal.hpp"

namespace nrm = rvcp::normal;

namespace {

// Reference values computed with 30-digit arbitrary precision arithmetic.
struct QuantileCase {
  double p;
  double x;
};

constexpr QuantileCase kQuantiles[] = {
    {1e-20, -9.26234008979840757371735697788},
    {1e-10, -6.36134090240405620469537582827},
    {1e-5, -4.26489079392282462849852469891},
    {0.001, -3.09023230616781354154039983011},
    {0.01, -2.32634787404084110088560616335},
    {0.025, -1.95996398454005423552459443052},
    {0.05, -1.64485362695147271486384890799},
    {0.1, -1.28155156554460046696510332945},
    {0.2, -0.841621233572914205178706121363},
    {0.3, -0.524400512708040784038289325025},
    {0.4, -0.253347103135799798798196181424},
    {0.45, -0.125661346855074034210184388301},
};

struct CdfCase {
  double x;
  double p;
};

constexpr CdfCase kCdf[] = {
    {-10.0, 7.6198530241605260659733432516e-24},
    {-5.0, 2.86651571879193911673752332875e-7},
    {-3.0, 0.00134989803163009452665181476759},
    {-1.0, 0.158655253931457051414767454368},
    {-0.5, 0.308537538725986896362295389392},
    {0.3, 0.617911422188952637306528963121},
    {1.0, 0.841344746068542948585232545632},
    {2.0, 0.977249868051820792799717362833},
    {3.0, 0.998650101968369905473348185232},
    {5.0, 0.999999713348428120806088326248},
    {8.0, 0.999999999999999377903942572822},
};

}  // namespace

TEST(Normal, QuantileMatchesHighPrecisionTable) {
  for (const auto& c : kQuantiles) {
    EXPECT_NEAR(nrm::quantile(c.p), c.x, 1e-14 * std::max(1.0, std::abs(c.x))) << c.p;
    // Symmetry, checked against the complement actually representable.
    const double q = 1.0 - c.p;
    if (q < 1.0) {
      EXPECT_NEAR(nrm::quantile(q), -nrm::quantile(1.0 - q), 1e-12 * std::abs(c.x)) << c.p;
    }
  }
  EXPECT_EQ(nrm::quantile(0.5), 0.0);
}

TEST(Normal, CdfMatchesHighPrecisionTable) {
  for (const auto& c : kCdf) {
    EXPECT_NEAR(nrm::cdf(c.x), c.p, 1e-15 * std::max(c.p, 1e-300) + 1e-16) << c.x;
    EXPECT_NEAR(nrm::sf(-c.x), c.p, 1e-14 * c.p + 1e-16) << c.x;
  }
}

TEST(Normal, DeepTailRelativeAccuracy) {
  EXPECT_NEAR(nrm::cdf(-10.0) / 7.6198530241605260659733432516e-24, 1.0, 1e-13);
  EXPECT_NEAR(nrm::sf(10.0) / 7.6198530241605260659733432516e-24, 1.0, 1e-13);
}

TEST(Normal, RoundTrip) {
  for (double p = 1e-12; p < 1.0; p = p < 0.01 ? p * 10.0 : p + 0.01) {
    EXPECT_NEAR(nrm::cdf(nrm::quantile(p)), p, 1e-14 * p) << p;
  }
}

TEST(Normal, UpperQuantile) {
  EXPECT_NEAR(nrm::upper_quantile(0.05), 1.64485362695147271486384890799, 1e-14);
  EXPECT_NEAR(nrm::sf(nrm::upper_quantile(0.3)), 0.3, 1e-15);
}

TEST(Normal, PdfAtZero) {
  EXPECT_NEAR(nrm::pdf(0.0), 0.398942280401432677939946059934, 1e-16);
}

TEST(Normal, QuantileDomain) {
  for (double p : {0.0, 1.0, -0.1, 1.5, std::nan("")}) {
    try {
      nrm::quantile(p);
      FAIL() << "no throw for " << p;
    } catch (const rvcp::Error& e) {
      EXPECT_EQ(e.kind(), rvcp::ErrorKind::domain_error);
    }
  }
}
