#include "dnpu/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "dnpu/errors.hpp"

namespace dnpu {

Vec4 subtract_average(const Vec4& v) {
    const double avg = (((v[0] + v[1]) + v[2]) + v[3]) / 4.0;
    Vec4 d;
    d[0] = v[0] - avg;
    d[1] = v[1] - avg;
    d[2] = v[2] - avg;
    d[3] = -((d[0] + d[1]) + d[2]);
    return d;
}

Decomposition decompose(const Vec4& v) {
    Decomposition d;
    d.i_av = 0.25 * (v[3] + v[1] + v[2] + v[0]);
    d.m_l = 0.25 * (v[3] + v[1] - v[2] - v[0]);
    d.m_r = 0.25 * (v[3] - v[1] + v[2] - v[0]);
    d.x = 0.25 * (v[3] - v[1] - v[2] + v[0]);
    return d;
}

Vec4 recompose(const Decomposition& d) {
    return Vec4{d.i_av - d.m_l - d.m_r + d.x, d.i_av + d.m_l - d.m_r - d.x,
                d.i_av - d.m_l + d.m_r - d.x, d.i_av + d.m_l + d.m_r + d.x};
}

CovarianceSummary covariance_matrix(std::span<const Vec4> records, bool shifted) {
    const std::int64_t n = static_cast<std::int64_t>(records.size());
    if (n < 2) throw ConfigError("covariance needs at least two records");

    CovarianceSummary out;
    out.n = n;

    double iav_sq = 0.0;
    for (const Vec4& r : records) {
        const double iav = (((r[0] + r[1]) + r[2]) + r[3]) / 4.0;
        iav_sq += iav * iav;
    }
    out.mean_iav_sq = iav_sq / static_cast<double>(n);

    std::vector<Vec4> work;
    work.reserve(records.size());
    for (const Vec4& r : records) work.push_back(shifted ? subtract_average(r) : r);

    Vec4 mean{};
    for (const Vec4& r : work)
        for (int c = 0; c < 4; ++c) mean[c] += r[c];
    for (int c = 0; c < 4; ++c) mean[c] /= static_cast<double>(n);

    for (const Vec4& r : work) {
        for (int a = 0; a < 4; ++a) {
            const double da = r[a] - mean[a];
            for (int b = a; b < 4; ++b) out.c[a][b] += da * (r[b] - mean[b]);
        }
    }
    for (int a = 0; a < 4; ++a)
        for (int b = a; b < 4; ++b) {
            out.c[a][b] /= static_cast<double>(n);
            out.c[b][a] = out.c[a][b];
        }
    return out;
}

namespace {

// Cyclic Jacobi rotations on a symmetric 4x4; returns eigenvalues on the
// diagonal of a and the accumulated rotations in v (columns).
void jacobi4(Mat4& a, Mat4& v) {
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) v[i][j] = (i == j) ? 1.0 : 0.0;

    double norm = 0.0;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) norm += a[i][j] * a[i][j];
    norm = std::sqrt(norm);
    const double stop = std::max(norm * 1e-13, 1e-300);

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < 4; ++p)
            for (int q = p + 1; q < 4; ++q) off += a[p][q] * a[p][q];
        if (std::sqrt(2.0 * off) < stop) break;

        for (int p = 0; p < 4; ++p) {
            for (int q = p + 1; q < 4; ++q) {
                if (a[p][q] == 0.0) continue;
                const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < 4; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (int k = 0; k < 4; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for (int k = 0; k < 4; ++k) {
                    const double vkp = v[k][p], vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
}

void fix_sign(Vec4& v) {
    int arg = 0;
    for (int i = 1; i < 4; ++i)
        if (std::fabs(v[i]) > std::fabs(v[arg])) arg = i;
    if (v[arg] < 0.0)
        for (double& c : v) c = -c;
}

}  // namespace

PcaResult pca(const CovarianceSummary& summary) {
    double scale = 0.0;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) scale = std::max(scale, std::fabs(summary.c[i][j]));
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j)
            if (std::fabs(summary.c[i][j] - summary.c[j][i]) > 1e-12 * std::max(scale, 1.0))
                throw ConfigError("covariance matrix is not symmetric");

    Mat4 a = summary.c;
    Mat4 rot;
    jacobi4(a, rot);

    std::array<double, 4> lambda;
    std::array<Vec4, 4> vec;
    for (int i = 0; i < 4; ++i) {
        lambda[i] = a[i][i];
        for (int k = 0; k < 4; ++k) vec[i][k] = rot[k][i];
    }

    // The structural lambda_0 is identified by eigenvector alignment with
    // (1,1,1,1)/2, not by magnitude; the others are sorted descending.
    int i0 = 0;
    double best = -1.0;
    for (int i = 0; i < 4; ++i) {
        const double dot = std::fabs(0.5 * (vec[i][0] + vec[i][1] + vec[i][2] + vec[i][3]));
        if (dot > best) {
            best = dot;
            i0 = i;
        }
    }
    std::array<int, 3> rest{};
    int r = 0;
    for (int i = 0; i < 4; ++i)
        if (i != i0) rest[r++] = i;
    std::sort(rest.begin(), rest.end(), [&](int x, int y) { return lambda[x] > lambda[y]; });

    PcaResult out;
    const int order[4] = {i0, rest[0], rest[1], rest[2]};
    for (int i = 0; i < 4; ++i) {
        out.eigenvalues[i] = lambda[order[i]];
        out.eigenvectors[i] = vec[order[i]];
        fix_sign(out.eigenvectors[i]);
        out.normalized[i] = summary.mean_iav_sq > 0.0 ? out.eigenvalues[i] / summary.mean_iav_sq : 0.0;
    }
    return out;
}

MomentReport moments(std::span<const Vec4> records) {
    const std::int64_t n = static_cast<std::int64_t>(records.size());
    if (n < 2) throw ConfigError("moments need at least two records");

    MomentReport m;
    m.n = n;
    for (const Vec4& r : records) {
        const Decomposition d = decompose(r);
        m.mean_ml += d.m_l;
        m.mean_mr += d.m_r;
        m.mean_x += d.x;
        m.sq_ml += d.m_l * d.m_l;
        m.sq_mr += d.m_r * d.m_r;
        m.sq_x += d.x * d.x;
        m.cov_lr += d.m_l * d.m_r;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    m.mean_ml *= inv_n;
    m.mean_mr *= inv_n;
    m.mean_x *= inv_n;
    m.sq_ml *= inv_n;
    m.sq_mr *= inv_n;
    m.sq_x *= inv_n;
    m.cov_lr = m.cov_lr * inv_n - m.mean_ml * m.mean_mr;
    m.var_ml = m.sq_ml - m.mean_ml * m.mean_ml;
    m.var_mr = m.sq_mr - m.mean_mr * m.mean_mr;
    m.var_x = m.sq_x - m.mean_x * m.mean_x;
    m.var_ml = std::max(m.var_ml, 0.0);
    m.var_mr = std::max(m.var_mr, 0.0);
    m.var_x = std::max(m.var_x, 0.0);

    // Pearson among {M_l, M_r, X}; recompute cross moments pairwise.
    double cov_lx = 0.0, cov_rx = 0.0;
    for (const Vec4& r : records) {
        const Decomposition d = decompose(r);
        cov_lx += (d.m_l - m.mean_ml) * (d.x - m.mean_x);
        cov_rx += (d.m_r - m.mean_mr) * (d.x - m.mean_x);
    }
    cov_lx *= inv_n;
    cov_rx *= inv_n;

    const double sd[3] = {std::sqrt(m.var_ml), std::sqrt(m.var_mr), std::sqrt(m.var_x)};
    const double cov[3][3] = {{m.var_ml, m.cov_lr, cov_lx},
                              {m.cov_lr, m.var_mr, cov_rx},
                              {cov_lx, cov_rx, m.var_x}};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            if (sd[i] > 0.0 && sd[j] > 0.0)
                m.pearson[i][j] = std::clamp(cov[i][j] / (sd[i] * sd[j]), -1.0, 1.0);
        }
    }
    return m;
}

AnalyticPca analytic_eigenvalues(const MomentReport& m) {
    AnalyticPca out;
    out.caveat = "neglects Corr(X, M_l) and Corr(X, M_r)";

    const double sum = m.var_ml + m.var_mr;
    const double diff = m.var_ml - m.var_mr;
    const double root = std::sqrt(diff * diff + 4.0 * m.cov_lr * m.cov_lr);
    out.lambda1 = 2.0 * sum + 2.0 * root;
    out.lambda2 = 2.0 * sum - 2.0 * root;
    out.lambda3 = 4.0 * m.var_x;
    out.lr_symmetric = std::fabs(diff) <= 1e-9 * std::max(sum, 1e-300);

    out.j3 = Vec4{-0.5, 0.5, 0.5, -0.5};

    // J1, J2 live in the span of e_l = (-1,1,-1,1)/2 and e_r = (-1,-1,1,1)/2,
    // where the covariance restricts to [[4 var_l, 4 cov], [4 cov, 4 var_r]].
    const Vec4 e_l{-0.5, 0.5, -0.5, 0.5};
    const Vec4 e_r{-0.5, -0.5, 0.5, 0.5};
    const double a = 4.0 * m.var_ml, b = 4.0 * m.cov_lr, d = 4.0 * m.var_mr;
    auto block_vector = [&](double lambda) {
        double cl = b, cr = lambda - a;
        if (std::fabs(cl) + std::fabs(cr) < 1e-14 * std::max({std::fabs(a), std::fabs(d), 1e-300})) {
            cl = lambda - d;
            cr = b;
        }
        if (cl == 0.0 && cr == 0.0) {
            cl = std::fabs(lambda - a) <= std::fabs(lambda - d) ? 1.0 : 0.0;
            cr = 1.0 - cl;
        }
        const double norm = std::sqrt(cl * cl + cr * cr);
        cl /= norm;
        cr /= norm;
        Vec4 v;
        for (int i = 0; i < 4; ++i) v[i] = cl * e_l[i] + cr * e_r[i];
        fix_sign(v);
        return v;
    };
    out.j1 = block_vector(out.lambda1);
    out.j2 = block_vector(out.lambda2);
    return out;
}

NdrIndicators ndr_indicators(const MomentReport& m) {
    if (m.var_ml <= 0.0 || m.var_mr <= 0.0)
        throw ConfigError("NDR indicators undefined: zero variance of M_l or M_r");
    NdrIndicators q;
    q.q_l = 0.5 * (1.0 - std::tanh(m.mean_ml / std::sqrt(m.var_ml)));
    q.q_r = 0.5 * (1.0 - std::tanh(m.mean_mr / std::sqrt(m.var_mr)));
    return q;
}

double coupling_indicator(const MomentReport& m) {
    const double denom = m.sq_ml + m.sq_mr;
    if (denom <= 0.0) throw ConfigError("coupling indicator undefined: <M_l^2> + <M_r^2> is zero");
    return 2.0 * m.sq_x / denom;
}

}  // namespace dnpu
