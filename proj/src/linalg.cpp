#include "cyl/linalg.hpp"

#include <lapacke.h>

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace cyl {

SvdResult svd(const Eigen::MatrixXd& A, bool vectors) {
    SvdResult r;
    const lapack_int m = lapack_int(A.rows()), n = lapack_int(A.cols());
    const lapack_int k = std::min(m, n);
    r.sigma.resize(k);
    if (k == 0) {
        r.U.resize(m, 0);
        r.V.resize(n, 0);
        return r;
    }
    Eigen::MatrixXd a = A;  // column-major copy, destroyed by LAPACK
    if (vectors) {
        r.U.resize(m, k);
        Eigen::MatrixXd vt(k, n);
        lapack_int info = LAPACKE_dgesdd(LAPACK_COL_MAJOR, 'S', m, n, a.data(), m, r.sigma.data(),
                                         r.U.data(), m, vt.data(), k);
        if (info != 0) throw std::runtime_error("dgesdd failed, info = " + std::to_string(info));
        r.V = vt.transpose();
    } else {
        lapack_int info =
            LAPACKE_dgesdd(LAPACK_COL_MAJOR, 'N', m, n, a.data(), m, r.sigma.data(), nullptr, 1, nullptr, 1);
        if (info != 0) throw std::runtime_error("dgesdd failed, info = " + std::to_string(info));
    }
    return r;
}

SvdResultC svd(const Eigen::MatrixXcd& A, bool vectors) {
    SvdResultC r;
    const lapack_int m = lapack_int(A.rows()), n = lapack_int(A.cols());
    const lapack_int k = std::min(m, n);
    r.sigma.resize(k);
    if (k == 0) {
        r.U.resize(m, 0);
        r.V.resize(n, 0);
        return r;
    }
    Eigen::MatrixXcd a = A;
    auto* ap = reinterpret_cast<lapack_complex_double*>(a.data());
    if (vectors) {
        r.U.resize(m, k);
        Eigen::MatrixXcd vh(k, n);
        lapack_int info = LAPACKE_zgesdd(LAPACK_COL_MAJOR, 'S', m, n, ap, m, r.sigma.data(),
                                         reinterpret_cast<lapack_complex_double*>(r.U.data()), m,
                                         reinterpret_cast<lapack_complex_double*>(vh.data()), k);
        if (info != 0) throw std::runtime_error("zgesdd failed, info = " + std::to_string(info));
        r.V = vh.adjoint();
    } else {
        lapack_int info = LAPACKE_zgesdd(LAPACK_COL_MAJOR, 'N', m, n, ap, m, r.sigma.data(), nullptr, 1,
                                         nullptr, 1);
        if (info != 0) throw std::runtime_error("zgesdd failed, info = " + std::to_string(info));
    }
    return r;
}

void write_triplets(const Eigen::MatrixXd& A, const std::string& path, double drop) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os.precision(17);
    long nnz = 0;
    for (Eigen::Index j = 0; j < A.cols(); ++j)
        for (Eigen::Index i = 0; i < A.rows(); ++i)
            if (std::abs(A(i, j)) > drop) ++nnz;
    os << "# triplets " << A.rows() << ' ' << A.cols() << ' ' << nnz << "\nrow,col,value\n";
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < A.cols(); ++j)
            if (std::abs(A(i, j)) > drop) os << i << ',' << j << ',' << A(i, j) << '\n';
}

}  // namespace cyl
