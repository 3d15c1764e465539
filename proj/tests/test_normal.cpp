#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <moeeqi/normal.hpp>

#include "oracles.hpp"

using namespace moeeqi;

TEST(Normal, PdfAndCdfAgreeWithErfcForm) {
    for (double z : {-8.0, -3.0, -1.0, 0.0, 0.5, 2.0, 7.5}) {
        EXPECT_NEAR(normal_pdf(z), oracle::phi(z), 1e-16);
        EXPECT_NEAR(normal_cdf(z), oracle::Phi(z), 1e-16);
        EXPECT_NEAR(normal_cdf(z) + normal_sf(z), 1.0, 1e-15);
    }
}

// Reference values from an independent high-precision inverse-normal.
TEST(Normal, QuantileKnownValues) {
    EXPECT_NEAR(normal_quantile(0.7), 0.524400512708041, 1e-14);
    EXPECT_NEAR(normal_quantile(0.8), 0.8416212335729143, 1e-14);
    EXPECT_NEAR(normal_quantile(0.9), 1.2815515655446004, 1e-14);
    EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-14);
    EXPECT_NEAR(normal_quantile(1e-10), -6.361340902404056, 1e-11);
    EXPECT_EQ(normal_quantile(0.5), 0.0);
}

TEST(Normal, QuantileInvertsCdf) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(1e-12, 1.0 - 1e-12);
    for (int i = 0; i < 2000; ++i) {
        const double p = u(rng);
        const double x = normal_quantile(p);
        const double back = p < 0.5 ? normal_cdf(x) : 1.0 - normal_sf(x);
        EXPECT_NEAR(back, p, 1e-14 * std::max(1.0, p / (1 - p))) << p;
    }
}

TEST(Normal, QuantileEdges) {
    EXPECT_EQ(normal_quantile(0.0), -std::numeric_limits<double>::infinity());
    EXPECT_EQ(normal_quantile(1.0), std::numeric_limits<double>::infinity());
    EXPECT_THROW(normal_quantile(-0.1), std::domain_error);
    EXPECT_THROW(normal_quantile(1.5), std::domain_error);
}

TEST(Normal, MassIsStableInTheTails) {
    EXPECT_NEAR(normal_mass(-1.0, 1.0), 0.6826894921370859, 1e-15);
    // Far upper tail: naive cdf differences would round to zero.
    const double tail = normal_mass(10.0, 11.0);
    EXPECT_GT(tail, 0.0);
    EXPECT_NEAR(tail / (normal_sf(10.0) - normal_sf(11.0)), 1.0, 1e-12);
    EXPECT_EQ(normal_mass(2.0, 1.0), 0.0);
}
