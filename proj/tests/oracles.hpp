// Straightforward reference computations used to check the library from outside.

#ifndef ATTNFMRI_TESTS_ORACLES_HPP
#define ATTNFMRI_TESTS_ORACLES_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

inline double mean(const std::vector<double>& x) {
    double s = 0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double mx = mean(x), my = mean(y);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

inline std::vector<double> row(const Eigen::MatrixXd& m, Eigen::Index i) {
    std::vector<double> out(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(j)] = m(i, j);
    return out;
}

inline std::vector<double> col(const Eigen::MatrixXd& m, Eigen::Index j) {
    std::vector<double> out(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) out[static_cast<std::size_t>(i)] = m(i, j);
    return out;
}

// atanh(x) = sum x^(2k+1)/(2k+1), |x| < 1.
inline double atanh_series(double x) {
    double term = x, sum = 0;
    for (int k = 0; k < 2000; ++k) {
        sum += term / (2 * k + 1);
        term *= x * x;
    }
    return sum;
}

// Sample standard deviation over |mean|.
inline double cv(const std::vector<double>& x) {
    const double m = mean(x);
    double ss = 0;
    for (double v : x) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(x.size() - 1)) / std::abs(m);
}

inline double normal_log_density(double x, double mu, double var) {
    const double pi = 3.14159265358979323846;
    return -0.5 * std::log(2 * pi * var) - (x - mu) * (x - mu) / (2 * var);
}

// Random orthogonal d x d matrix from QR of a Gaussian matrix.
inline Eigen::MatrixXd random_orthogonal(int d, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0, 1);
    Eigen::MatrixXd a(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) a(i, j) = n(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ();
    return q;
}

inline Eigen::MatrixXd gaussian(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double sd = 1.0) {
    std::normal_distribution<double> n(0, sd);
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = n(rng);
    return m;
}

// Connected components of a 0/1 adjacency, by repeated relabelling.
inline int components(const Eigen::MatrixXd& a) {
    const auto n = a.rows();
    std::vector<int> label(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) label[static_cast<std::size_t>(i)] = static_cast<int>(i);
    bool changed = true;
    while (changed) {
        changed = false;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j)
                if (a(i, j) != 0 && label[static_cast<std::size_t>(j)] > label[static_cast<std::size_t>(i)]) {
                    label[static_cast<std::size_t>(j)] = label[static_cast<std::size_t>(i)];
                    changed = true;
                }
    }
    int count = 0;
    for (Eigen::Index i = 0; i < n; ++i) count += label[static_cast<std::size_t>(i)] == static_cast<int>(i);
    return count;
}

}

#endif
