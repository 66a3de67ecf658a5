#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. They are written for clarity, not speed, and share no code with the
// library beyond its plain data types.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <vector>

namespace oracle {

// ---- features ----------------------------------------------------------

inline double jumpRate(const std::vector<double>& p, double tau)
{
    if (p.size() < 2)
        return 0.0;
    double count = 0;
    for (std::size_t j = 1; j < p.size(); ++j)
        count += std::fabs(p[j] - p[j - 1]) > tau ? 1 : 0;
    return count / double(p.size() - 1);
}

inline double fracOutsideMainCluster(const std::vector<double>& p, double d)
{
    if (p.empty())
        return 0.0;
    std::map<long long, int> counts;
    for (double x : p)
        counts[(long long)std::floor(x / d)]++;
    long long best = 0;
    int bestCount = -1;
    for (auto [bin, c] : counts) // ascending bins, so the first max wins
        if (c > bestCount) {
            bestCount = c;
            best = bin;
        }
    int inside = 0;
    for (double x : p) {
        long long b = (long long)std::floor(x / d);
        if (b == best - 1 || b == best || b == best + 1)
            inside++;
    }
    return 1.0 - double(inside) / double(p.size());
}

// connected components of the "within tau" graph, by flood fill
inline double largestClusterFraction(const std::vector<double>& p, double tau)
{
    const std::size_t n = p.size();
    if (n == 0)
        return 0.0;
    std::vector<int> label(n, -1);
    std::size_t largest = 0;
    for (std::size_t s = 0; s < n; ++s) {
        if (label[s] >= 0)
            continue;
        std::vector<std::size_t> stack{s};
        label[s] = int(s);
        std::size_t size = 0;
        while (!stack.empty()) {
            auto i = stack.back();
            stack.pop_back();
            ++size;
            for (std::size_t j = 0; j < n; ++j)
                if (label[j] < 0 && std::fabs(p[i] - p[j]) <= tau) {
                    // 1-D: a chain of gaps <= tau connects exactly the points between
                    // them, so edges between any pair within tau give the same components
                    label[j] = int(s);
                    stack.push_back(j);
                }
        }
        largest = std::max(largest, size);
    }
    return double(largest) / double(n);
}

inline double turnRate(const std::vector<double>& p)
{
    if (p.size() < 3)
        return 0.0;
    double count = 0;
    for (std::size_t j = 1; j + 1 < p.size(); ++j) {
        double before = p[j] - p[j - 1];
        double after = p[j + 1] - p[j];
        count += (after - before) != 0.0 ? 1 : 0;
    }
    return count / double(p.size() - 2);
}

// ---- ridge -------------------------------------------------------------

struct RidgeFit
{
    std::array<double, 4> w{}; // raw feature space
    double b = 0.0;
};

struct Standardized
{
    std::vector<std::array<double, 4>> z;
    std::vector<double> yc;
    std::array<double, 4> mean{};
    std::array<double, 4> sd{};
    std::array<bool, 4> active{};
    double ybar = 0.0;
};

inline Standardized standardize(const std::vector<std::array<double, 4>>& x,
                                const std::vector<double>& y)
{
    Standardized s;
    const double n = double(x.size());
    for (double v : y)
        s.ybar += v / n;
    for (int j = 0; j < 4; ++j) {
        double m = 0;
        for (auto& r : x)
            m += r[j];
        m /= n;
        double v = 0;
        for (auto& r : x)
            v += (r[j] - m) * (r[j] - m);
        v /= n;
        double lo = x[0][j], hi = x[0][j];
        for (auto& r : x) {
            lo = std::min(lo, r[j]);
            hi = std::max(hi, r[j]);
        }
        s.mean[j] = m;
        s.active[j] = hi > lo;
        s.sd[j] = s.active[j] ? std::sqrt(v) : 1.0;
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        std::array<double, 4> z{};
        for (int j = 0; j < 4; ++j)
            z[j] = s.active[j] ? (x[i][j] - s.mean[j]) / s.sd[j] : 0.0;
        s.z.push_back(z);
        s.yc.push_back(y[i] - s.ybar);
    }
    return s;
}

inline RidgeFit toRaw(const Standardized& s, const std::array<double, 4>& beta)
{
    RidgeFit f;
    f.b = s.ybar;
    for (int j = 0; j < 4; ++j) {
        f.w[j] = s.active[j] ? beta[j] / s.sd[j] : 0.0;
        f.b -= f.w[j] * s.mean[j];
    }
    return f;
}

// Centered normal equations (Z'Z + lambda I) beta = Z'y, solved by Gaussian
// elimination with partial pivoting. nullopt when the system is singular.
inline std::optional<RidgeFit> ridgeNormalEquations(const std::vector<std::array<double, 4>>& x,
                                                    const std::vector<double>& y, double lambda)
{
    auto s = standardize(x, y);
    std::vector<int> idx;
    for (int j = 0; j < 4; ++j)
        if (s.active[j])
            idx.push_back(j);
    const std::size_t m = idx.size();
    std::vector<std::vector<double>> a(m, std::vector<double>(m + 1, 0.0));
    double scale = double(x.size());
    for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < m; ++c) {
            for (auto& z : s.z)
                a[r][c] += z[idx[r]] * z[idx[c]];
        }
        a[r][r] += lambda;
        for (std::size_t i = 0; i < s.z.size(); ++i)
            a[r][m] += s.z[i][idx[r]] * s.yc[i];
    }
    for (std::size_t col = 0; col < m; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < m; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[piv][col]))
                piv = r;
        if (std::fabs(a[piv][col]) <= 1e-9 * scale)
            return std::nullopt;
        std::swap(a[piv], a[col]);
        for (std::size_t r = 0; r < m; ++r) {
            if (r == col)
                continue;
            double f = a[r][col] / a[col][col];
            for (std::size_t c = col; c <= m; ++c)
                a[r][c] -= f * a[col][c];
        }
    }
    std::array<double, 4> beta{};
    for (std::size_t r = 0; r < m; ++r)
        beta[idx[r]] = a[r][m] / a[r][r];
    return toRaw(s, beta);
}

// Symmetric 4x4 eigenvalues by cyclic Jacobi rotations.
inline std::array<double, 4> eigenvalues(std::array<std::array<double, 4>, 4> a)
{
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0;
        for (int p = 0; p < 4; ++p)
            for (int q = p + 1; q < 4; ++q)
                off += a[p][q] * a[p][q];
        if (off < 1e-30)
            break;
        for (int p = 0; p < 4; ++p)
            for (int q = p + 1; q < 4; ++q) {
                if (a[p][q] == 0.0)
                    continue;
                double theta = (a[q][q] - a[p][p]) / (2 * a[p][q]);
                double t = (theta >= 0 ? 1 : -1) / (std::fabs(theta) + std::sqrt(theta * theta + 1));
                double c = 1 / std::sqrt(t * t + 1), sn = t * c;
                for (int k = 0; k < 4; ++k) {
                    double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - sn * akq;
                    a[k][q] = sn * akp + c * akq;
                }
                for (int k = 0; k < 4; ++k) {
                    double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - sn * aqk;
                    a[q][k] = sn * apk + c * aqk;
                }
            }
    }
    return {a[0][0], a[1][1], a[2][2], a[3][3]};
}

// Heavy-ball gradient descent on the same objective, tuned from the spectrum.
inline RidgeFit ridgeGradientDescent(const std::vector<std::array<double, 4>>& x,
                                     const std::vector<double>& y, double lambda, int steps)
{
    auto s = standardize(x, y);
    std::array<std::array<double, 4>, 4> h{};
    std::array<double, 4> g{};
    for (std::size_t i = 0; i < s.z.size(); ++i)
        for (int r = 0; r < 4; ++r) {
            g[r] += s.z[i][r] * s.yc[i];
            for (int c = 0; c < 4; ++c)
                h[r][c] += s.z[i][r] * s.z[i][c];
        }
    for (int r = 0; r < 4; ++r)
        h[r][r] += s.active[r] ? lambda : 1.0; // inactive coordinates stay at zero
    auto ev = eigenvalues(h);
    double L = *std::max_element(ev.begin(), ev.end());
    double mu = *std::min_element(ev.begin(), ev.end());
    double alpha = 4.0 / std::pow(std::sqrt(L) + std::sqrt(mu), 2);
    double momentum = std::pow((std::sqrt(L) - std::sqrt(mu)) / (std::sqrt(L) + std::sqrt(mu)), 2);

    std::array<double, 4> beta{}, prev{};
    for (int it = 0; it < steps; ++it) {
        std::array<double, 4> next{};
        for (int r = 0; r < 4; ++r) {
            double grad = -g[r];
            for (int c = 0; c < 4; ++c)
                grad += h[r][c] * beta[c];
            next[r] = beta[r] - alpha * grad + momentum * (beta[r] - prev[r]);
        }
        prev = beta;
        beta = next;
    }
    for (int r = 0; r < 4; ++r)
        if (!s.active[r])
            beta[r] = 0.0;
    return toRaw(s, beta);
}

// ---- selection ---------------------------------------------------------

struct Choice
{
    int rate;
    bool feasible;
};

// Literal enumeration: feasible set first, otherwise every rate compared
// against every other.
inline Choice selectRate(const std::vector<std::pair<int, double>>& table, double target)
{
    std::vector<int> feasible;
    for (auto& [k, r] : table)
        if (r >= target)
            feasible.push_back(k);
    if (!feasible.empty())
        return {*std::max_element(feasible.begin(), feasible.end()), true};
    for (auto& [k, r] : table) {
        bool best = true;
        for (auto& [k2, r2] : table)
            if (r2 > r || (r2 == r && k2 < k))
                best = false;
        if (best)
            return {k, false};
    }
    return {-1, false};
}

} // namespace oracle
