#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dnpu {

// The current 4-vector over the logic inputs, ordered (I00, I10, I01, I11)
// with the first bit the left input, in nA.
using Vec4 = std::array<double, 4>;
using Mat4 = std::array<std::array<double, 4>, 4>;

// Subtracts the component mean. The last component is reconstructed so the
// left-to-right component sum of the result is exactly zero, which also
// makes the operation exactly idempotent.
Vec4 subtract_average(const Vec4& v);

// The orthogonal current decomposition: average, effective left/right input
// conductances, and the nonlinear input coupling.
struct Decomposition {
    double i_av = 0.0;
    double m_l = 0.0;
    double m_r = 0.0;
    double x = 0.0;
};

Decomposition decompose(const Vec4& v);
Vec4 recompose(const Decomposition& d);

struct CovarianceSummary {
    Mat4 c{};                 // population covariance (1/N), nA^2
    double mean_iav_sq = 0.0; // <I_av^2> from the pre-shift vectors, nA^2
    std::int64_t n = 0;
};

// Population covariance of the four components across records; when
// `shifted` the per-record component mean is subtracted first (the PCA
// pipeline). <I_av^2> always comes from the unshifted records.
CovarianceSummary covariance_matrix(std::span<const Vec4> records, bool shifted);

struct PcaResult {
    // eigenvalues[0] is the one whose eigenvector best aligns with
    // (1,1,1,1)/2; the remaining three are sorted descending.
    std::array<double, 4> eigenvalues{};
    std::array<Vec4, 4> eigenvectors{};  // orthonormal; largest component positive
    std::array<double, 4> normalized{};  // eigenvalues / <I_av^2>
};

PcaResult pca(const CovarianceSummary& c);

struct MomentReport {
    double mean_ml = 0.0, mean_mr = 0.0, mean_x = 0.0;   // nA
    double var_ml = 0.0, var_mr = 0.0, var_x = 0.0;      // population, nA^2
    double sq_ml = 0.0, sq_mr = 0.0, sq_x = 0.0;         // second moments, nA^2
    double cov_lr = 0.0;                                 // Cov(M_l, M_r)
    // Pearson matrix over {M_l, M_r, X}; empty where a variance vanishes.
    std::array<std::array<std::optional<double>, 3>, 3> pearson{};
    std::int64_t n = 0;
};

MomentReport moments(std::span<const Vec4> records);

// Analytic PCA spectrum from the decomposition moments, valid when the
// correlations of X with M_l and M_r are negligible:
//   lambda_{1,2} = 2(var_l + var_r) +- 2*sqrt((var_l - var_r)^2 + 4 cov^2)
//   lambda_3     = 4 var(X), eigenvector (-1,1,1,-1)/2.
// Under l-r symmetry this reduces to 4 var(M) (1 +- Corr(M_l, M_r)).
struct AnalyticPca {
    double lambda1 = 0.0, lambda2 = 0.0, lambda3 = 0.0;
    Vec4 j1{}, j2{}, j3{};
    bool lr_symmetric = false;
    std::string caveat;  // states the neglected correlations
};

AnalyticPca analytic_eigenvalues(const MomentReport& m);

struct NdrIndicators {
    double q_l = 0.0;
    double q_r = 0.0;
};

// Q = (1 - tanh(<M>/sigma(M))) / 2 per side; 0.5 means half of the control
// combinations show negative differential resistance.
NdrIndicators ndr_indicators(const MomentReport& m);

// Q_lr = 2 <X^2> / (<M_l^2> + <M_r^2>).
double coupling_indicator(const MomentReport& m);

}  // namespace dnpu
