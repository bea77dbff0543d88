#include <doctest.h>

#include <random>

#include "emomap/error.hpp"
#include "emomap/reduction.hpp"
#include "oracles.hpp"

using namespace emomap;

namespace {

Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d) {
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd m(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) m(i, j) = g(rng) * (1.0 + static_cast<double>(j % 7));
    }
    return m;
}

double column_variance(const Eigen::MatrixXd& p, Eigen::Index c) {
    const double mean = p.col(c).mean();
    return (p.col(c).array() - mean).square().sum() / static_cast<double>(p.rows());
}

}  // namespace

TEST_CASE("standardizer uses population variance and keeps constant columns") {
    Eigen::MatrixXd x(4, 3);
    x << 1, 5, 2, 2, 5, 4, 3, 5, 6, 4, 5, 8;
    const auto s = Standardizer::fit(x);
    CHECK(s.means(0) == doctest::Approx(2.5));
    CHECK(s.scales(0) == doctest::Approx(std::sqrt(1.25)));
    CHECK(s.scales(1) == 1.0);
    const auto z = s.transform(x);
    CHECK(z.col(1).cwiseAbs().maxCoeff() == 0.0);
    CHECK(column_variance(z, 2) == doctest::Approx(1.0));
}

TEST_CASE("explained variance matches the Gram eigendecomposition") {
    std::mt19937_64 rng(17);
    for (int t = 0; t < 5; ++t) {
        const auto x = random_matrix(rng, 50, 1536);
        const auto p = fit_transform(x);
        const auto oracle = emomap::testing::gram_explained_variance(x, 3);
        for (int c = 0; c < 3; ++c) {
            CHECK(std::abs(p.explained_variance[c] - oracle[c]) <= 1e-8 * oracle[c]);
            CHECK(column_variance(p.points, c) == doctest::Approx(p.explained_variance[c]).epsilon(1e-8));
        }
    }
}

TEST_CASE("components are orthonormal, signed and ordered") {
    std::mt19937_64 rng(23);
    const auto x = random_matrix(rng, 30, 200);
    const auto p = fit_transform(x);
    CHECK(p.n_components == 3);
    for (int a = 0; a < 3; ++a) {
        CHECK(p.components.row(a).norm() == doctest::Approx(1.0).epsilon(1e-8));
        for (int b = a + 1; b < 3; ++b) CHECK(std::abs(p.components.row(a).dot(p.components.row(b))) < 1e-8);
        Eigen::Index idx;
        p.components.row(a).cwiseAbs().maxCoeff(&idx);
        CHECK(p.components(a, idx) > 0);
    }
    CHECK(p.explained_variance[0] >= p.explained_variance[1]);
    CHECK(p.explained_variance[1] >= p.explained_variance[2]);
    CHECK(p.explained_variance[2] >= 0);
    CHECK((p.transform(x) - p.points).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("two samples pad the third column with zeros") {
    std::mt19937_64 rng(2);
    const auto x = random_matrix(rng, 2, 1536);
    const auto p = fit_transform(x);
    CHECK(p.n_components == 2);
    CHECK(p.points.cols() == 3);
    CHECK(p.points(0, 2) == 0.0);
    CHECK(p.points(1, 2) == 0.0);
    CHECK(p.explained_variance[2] == 0.0);
    CHECK(p.components.row(2).norm() == 0.0);
}

TEST_CASE("single sample projects to the origin") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Constant(1, 8, 3.0);
    const auto p = fit_transform(x);
    CHECK(p.n_components == 1);
    CHECK(p.points.rows() == 1);
    CHECK(p.points.cwiseAbs().maxCoeff() == 0.0);
    CHECK(p.points.allFinite());
}

TEST_CASE("axis-aligned data is reproduced up to an isometry") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g;
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(40, 1536);
    for (int i = 0; i < 40; ++i) {
        x(i, 10) = 3.0 * g(rng);
        x(i, 500) = 2.0 * g(rng);
        x(i, 1200) = g(rng);
    }
    const auto p = fit_transform(x);
    const auto z = p.standardizer.transform(x);
    Eigen::MatrixXd axes(40, 3);
    axes << z.col(10), z.col(500), z.col(1200);
    CHECK((p.points * p.points.transpose() - axes * axes.transpose()).cwiseAbs().maxCoeff() < 1e-9);
    for (int a = 0; a < 3; ++a) {
        double mass = 0;
        for (int j : {10, 500, 1200}) mass += p.components(a, j) * p.components(a, j);
        CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("three components minimize reconstruction error") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> g;
    for (int t = 0; t < 4; ++t) {
        const auto x = random_matrix(rng, 12 + t * 2, 60);
        const auto p = fit_transform(x);
        const auto z = p.standardizer.transform(x);
        const double best = (z - p.points * p.components).squaredNorm();
        for (int r = 0; r < 100; ++r) {
            Eigen::MatrixXd m(60, 3);
            for (int i = 0; i < 60; ++i) {
                for (int j = 0; j < 3; ++j) m(i, j) = g(rng);
            }
            const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(m).householderQ() * Eigen::MatrixXd::Identity(60, 3);
            const double err = (z - z * q * q.transpose()).squaredNorm();
            CHECK(best <= err + 1e-9);
        }
    }
}

TEST_CASE("fit_transform is deterministic") {
    std::mt19937_64 rng(4);
    const auto x = random_matrix(rng, 25, 1536);
    const auto a = fit_transform(x);
    const auto b = fit_transform(x);
    CHECK(a.points == b.points);
    CHECK(a.components == b.components);
    CHECK(a.explained_variance == b.explained_variance);
}

TEST_CASE("fit_transform rejects empty and non-finite input") {
    CHECK_THROWS_AS(fit_transform(Eigen::MatrixXd(0, 4)), ValidationError);
    Eigen::MatrixXd x = Eigen::MatrixXd::Ones(5, 4);
    x(3, 1) = std::numeric_limits<double>::quiet_NaN();
    try {
        fit_transform(x);
        FAIL("accepted NaN");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("row 3") != std::string::npos);
    }
    CHECK_THROWS_AS(to_matrix({{1.0, 2.0}, {3.0}}), ValidationError);
    CHECK(to_matrix({{1.0, 2.0}, {3.0, 4.0}})(1, 0) == 3.0);
}
