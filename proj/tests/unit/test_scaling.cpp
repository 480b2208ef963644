#include <cmath>
#include <vector>

#include "doctest.h"
#include "streamx/rng.hpp"
#include "streamx/scaling.hpp"

using namespace streamx;

TEST_CASE("Welford first sample falls back to unit variance") {
    double p = 0.0;
    std::int64_t n = 0;
    const auto r = welford_step(2.0, 0.0, p, n);
    CHECK(r.mean == 2.0);
    CHECK(p == 0.0);
    CHECK(r.variance == 1.0);
    CHECK(n == 1);
}

TEST_CASE("Welford two samples") {
    RunningMoments m(1);
    m.update(std::vector<double>{2.0});
    const auto var = m.update(std::vector<double>{4.0});
    CHECK(m.mean()[0] == 3.0);
    CHECK(m.p()[0] == 2.0);
    CHECK(var[0] == 2.0);
}

TEST_CASE("single pass agrees with two pass") {
    Rng rng(7);
    RunningMoments m(2);
    std::vector<std::vector<double>> xs(10000, std::vector<double>(2));
    for (auto& x : xs) {
        x[0] = 100.0 + rng.normal();
        x[1] = -3.0 + 10.0 * rng.uniform();
        m.update(x);
    }
    for (std::size_t d = 0; d < 2; ++d) {
        double mean = 0.0;
        for (const auto& x : xs) mean += x[d];
        mean /= xs.size();
        double ss = 0.0;
        for (const auto& x : xs) ss += (x[d] - mean) * (x[d] - mean);
        CHECK(std::abs(m.mean()[d] - mean) < 1e-9);
        CHECK(std::abs(m.variance()[d] - ss / (xs.size() - 1)) < 1e-9);
    }
}

TEST_CASE("observation normalization hand trace") {
    ObservationNormalizer norm(1);
    CHECK(norm.normalize(std::vector<double>{2.0})[0] == 0.0);
    CHECK(norm.normalize(std::vector<double>{4.0})[0] == doctest::Approx(0.7071).epsilon(1e-4));
    CHECK(norm.moments().mean()[0] == 3.0);
}

TEST_CASE("constant observations normalize to zero; transform does not update") {
    ObservationNormalizer norm(2);
    for (int i = 0; i < 20; ++i) {
        const auto y = norm.normalize(std::vector<double>{5.0, -1.0});
        CHECK(std::abs(y[0]) < 1e-12);
        CHECK(std::abs(y[1]) < 1e-12);
    }
    norm.transform(std::vector<double>{100.0, 100.0});
    CHECK(norm.moments().count() == 20);
}

TEST_CASE("ScaleReward hand trace") {
    RewardScaler s;
    CHECK(s.scale(1.0, 0.99, false) == doctest::Approx(1.0));
    CHECK(s.u() == 1.0);
    const double r = s.scale(1.0, 0.99, false);
    CHECK(s.u() == doctest::Approx(1.99));
    CHECK(s.p() == doctest::Approx(1.98005));
    CHECK(r == doctest::Approx(0.7107).epsilon(1e-4));
}

TEST_CASE("ScaleReward zero rewards stay zero; termination cuts the sum") {
    RewardScaler s;
    for (int i = 0; i < 5; ++i) CHECK(s.scale(0.0, 0.99, false) == 0.0);
    RewardScaler t;
    t.scale(1.0, 0.99, false);
    t.scale(2.0, 0.99, true);
    CHECK(t.u() == 2.0);
}

TEST_CASE("RewardScaler restore reproduces the variance") {
    RewardScaler a;
    for (double r : {1.0, -2.0, 0.5, 3.0}) a.scale(r, 0.9, false);
    RewardScaler b;
    b.restore(a.u(), a.p(), a.count());
    CHECK(b.scale_factor() == a.scale_factor());
    CHECK(b.scale(1.0, 0.9, false) == a.scale(1.0, 0.9, false));
}
