#include "emomap/reduction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/SVD>

#include "emomap/error.hpp"

namespace emomap {

Standardizer Standardizer::fit(const Eigen::MatrixXd& x) {
    const auto n = static_cast<double>(x.rows());
    Standardizer s;
    s.means = x.colwise().sum().transpose() / n;
    s.scales.resize(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double var = (x.col(j).array() - s.means(j)).square().sum() / n;
        const double sd = std::sqrt(var);
        // rounding noise around a constant column is not real variance
        const bool constant = sd == 0.0 || sd <= 10.0 * std::numeric_limits<double>::epsilon() * std::abs(s.means(j));
        s.scales(j) = constant ? 1.0 : sd;
    }
    return s;
}

Eigen::MatrixXd Standardizer::transform(const Eigen::MatrixXd& x) const {
    return (x.rowwise() - means.transpose()).array().rowwise() / scales.transpose().array();
}

Eigen::MatrixXd Projection3D::transform(const Eigen::MatrixXd& x) const {
    return standardizer.transform(x) * components.transpose();
}

std::vector<Point3> Projection3D::point_list() const {
    std::vector<Point3> out(static_cast<std::size_t>(points.rows()));
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        out[static_cast<std::size_t>(i)] = {points(i, 0), points(i, 1), points(i, 2)};
    }
    return out;
}

Projection3D fit_transform(const Eigen::MatrixXd& embeddings) {
    const Eigen::Index n = embeddings.rows();
    const Eigen::Index d = embeddings.cols();
    if (n == 0) throw ValidationError("fit_transform: no samples");
    if (d == 0) throw ValidationError("fit_transform: no features");
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!embeddings.row(i).allFinite()) {
            throw ValidationError("fit_transform: non-finite value in row " + std::to_string(i));
        }
    }

    Projection3D p;
    p.standardizer = Standardizer::fit(embeddings);
    const Eigen::MatrixXd xs = p.standardizer.transform(embeddings);

    const auto k = static_cast<Eigen::Index>(std::min<Eigen::Index>({3, n, d}));
    p.n_components = static_cast<std::size_t>(k);
    p.components = Eigen::MatrixXd::Zero(3, d);
    p.points = Eigen::MatrixXd::Zero(n, 3);

    Eigen::BDCSVD<Eigen::MatrixXd> svd(xs, Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const auto& v = svd.matrixV();
    for (Eigen::Index c = 0; c < k; ++c) {
        Eigen::VectorXd axis = v.col(c);
        Eigen::Index arg = 0;
        double best = -1.0;
        for (Eigen::Index j = 0; j < d; ++j) {
            if (std::abs(axis(j)) > best) {
                best = std::abs(axis(j));
                arg = j;
            }
        }
        if (axis(arg) < 0) axis = -axis;
        p.components.row(c) = axis.transpose();
        p.explained_variance[static_cast<std::size_t>(c)] = sv(c) * sv(c) / static_cast<double>(n);
    }
    p.points.leftCols(k) = xs * p.components.topRows(k).transpose();
    return p;
}

Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return {};
    const auto d = rows.front().size();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != d) throw ValidationError("to_matrix: ragged rows");
        for (std::size_t j = 0; j < d; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    return m;
}

}  // namespace emomap
