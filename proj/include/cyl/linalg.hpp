#pragma once

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <vector>

namespace cyl {

struct SvdResult {
    Eigen::VectorXd sigma;  // descending
    Eigen::MatrixXd U, V;   // thin factors, only when requested
};
struct SvdResultC {
    Eigen::VectorXd sigma;
    Eigen::MatrixXcd U, V;
};

// LAPACK divide-and-conquer SVD; vectors = false skips U, V.
SvdResult svd(const Eigen::MatrixXd& A, bool vectors);
SvdResultC svd(const Eigen::MatrixXcd& A, bool vectors);

// Sparse triplet export: header "# triplets rows cols nnz", then "row,col,value".
void write_triplets(const Eigen::MatrixXd& A, const std::string& path, double drop = 0.0);

}  // namespace cyl
