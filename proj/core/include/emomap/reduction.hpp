#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace emomap {

using Point3 = std::array<double, 3>;

/// Per-feature centring and scaling with population standard deviations.
/// Features with zero variance keep scale 1.
struct Standardizer {
    Eigen::VectorXd means;
    Eigen::VectorXd scales;  // all > 0

    static Standardizer fit(const Eigen::MatrixXd& x);
    Eigen::MatrixXd transform(const Eigen::MatrixXd& x) const;
};

/// Three-component principal-axis projection of standardized embeddings.
struct Projection3D {
    Standardizer standardizer;
    /// 3 x d; rows beyond `n_components` are zero.
    Eigen::MatrixXd components;
    /// Population variance of each projected coordinate; non-increasing,
    /// zero for padded components.
    std::array<double, 3> explained_variance{};
    std::size_t n_components = 0;
    /// n x 3; columns beyond `n_components` are zero.
    Eigen::MatrixXd points;

    /// Projects new rows with the fitted standardizer and components.
    Eigen::MatrixXd transform(const Eigen::MatrixXd& x) const;

    std::vector<Point3> point_list() const;
};

/// Standardizes `embeddings` (n x d), computes the top min(3, n, d)
/// principal axes from the SVD of the standardized matrix and pads the
/// projection to three columns with zeros. Each axis is signed so that its
/// largest-magnitude loading is positive (first such index on ties).
///
/// Throws ValidationError for n = 0 or a non-finite entry (naming the row).
Projection3D fit_transform(const Eigen::MatrixXd& embeddings);

/// Row-stacks vectors of equal length into an n x d matrix.
Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& rows);

}  // namespace emomap
