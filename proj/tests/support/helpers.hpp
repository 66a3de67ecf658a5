#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <cmath>
#include <functional>
#include <memory>

#include "densel/matching.hpp"
#include "densel/metrics.hpp"

namespace testing {

/* Scratch directory removed on scope exit. */
class TempDir
{
public:
    TempDir()
    {
        static std::mt19937_64 rng(std::random_device{}());
        mPath = std::filesystem::temp_directory_path() /
                ("densel_test_" + std::to_string(rng()));
        std::filesystem::create_directories(mPath);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(mPath, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return mPath; }
    std::filesystem::path operator/(const std::string& name) const { return mPath / name; }

private:
    std::filesystem::path mPath;
};

inline std::string readText(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void writeText(const std::filesystem::path& p, const std::string& text)
{
    std::ofstream(p, std::ios::binary) << text;
}

/* Match table whose query j sits at j meters and matched `top1[j]`. */
inline densel::MatchTable tableOf(const std::vector<double>& top1, int rateK = 1)
{
    densel::MatchTable t;
    t.rateK = rateK;
    for (std::size_t j = 0; j < top1.size(); ++j)
        t.entries.push_back({j, double(j), std::size_t(top1[j]), top1[j], 0.0});
    return t;
}

inline std::vector<double> iota(std::size_t n, double spacing = 1.0)
{
    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i)
        p[i] = double(i) * spacing;
    return p;
}

/*
 * Provider over n queries at 1 m spacing whose recall is set per segment:
 * in segment s at rate k the first round(recall(s, k) * m) queries match the
 * nearest kept frame and the rest match a kept frame half the route away.
 */
inline std::shared_ptr<densel::TableMatchProvider>
profileProvider(std::string name, std::size_t n, double segmentLengthM, const std::vector<int>& grid,
                const std::function<double(std::size_t, int)>& recall)
{
    const auto pos = iota(n);
    const auto per = static_cast<std::size_t>(segmentLengthM);
    std::map<int, densel::MatchTable> tables;
    for (int k : grid) {
        densel::MatchTable t;
        t.rateK = k;
        const auto uk = static_cast<std::size_t>(k);
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t seg = j / per;
            const std::size_t start = seg * per;
            const std::size_t m = std::min(n, start + per) - start;
            const auto good = static_cast<std::size_t>(std::llround(recall(seg, k) * double(m)));
            std::size_t frame = (j / uk) * uk;
            if (j - start >= good)
                frame = (((j + n / 2) % n) / uk) * uk;
            t.entries.push_back({j, pos[j], frame, pos[frame], 0.0});
        }
        tables[k] = std::move(t);
    }
    return std::make_shared<densel::TableMatchProvider>(std::move(name), std::move(tables), pos, pos);
}

} // namespace testing
