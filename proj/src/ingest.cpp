#include "densel/ingest.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "densel/errors.hpp"

namespace densel {

namespace {

constexpr std::uint32_t kFormatVersion = 1;

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T byteswap(T value)
{
    auto bytes = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(value);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
}

class ByteWriter
{
public:
    void magic(std::string_view tag) { mOut.insert(mOut.end(), tag.begin(), tag.end()); }

    template <typename T>
    void put(T value)
    {
        if constexpr (std::endian::native == std::endian::big)
            value = byteswap(value);
        const auto bytes = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(value);
        mOut.insert(mOut.end(), bytes.begin(), bytes.end());
    }

    std::vector<std::uint8_t> take() { return std::move(mOut); }

private:
    std::vector<std::uint8_t> mOut;
};

class ByteReader
{
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : mBytes(bytes) { }

    std::size_t offset() const { return mPos; }
    std::size_t remaining() const { return mBytes.size() - mPos; }

    void expectMagic(std::string_view tag)
    {
        require(tag.size(), "magic");
        if (std::memcmp(mBytes.data() + mPos, tag.data(), tag.size()) != 0)
            throw ParseError(fmt::format("bad magic, expected '{}'", tag), mPos);
        mPos += tag.size();
    }

    template <typename T>
    T get(std::string_view what)
    {
        require(sizeof(T), what);
        std::array<std::uint8_t, sizeof(T)> raw{};
        std::memcpy(raw.data(), mBytes.data() + mPos, sizeof(T));
        mPos += sizeof(T);
        auto value = std::bit_cast<T>(raw);
        if constexpr (std::endian::native == std::endian::big)
            value = byteswap(value);
        return value;
    }

    /* Checks a payload of count * width bytes fits before allocating. */
    void requireArray(std::uint64_t count, std::size_t width, std::string_view what) const
    {
        if (count > remaining() / width)
            throw ParseError(fmt::format("truncated {}: need {} x {} bytes, {} available", what,
                                         count, width, remaining()),
                             mPos);
    }

private:
    void require(std::size_t n, std::string_view what) const
    {
        if (remaining() < n)
            throw ParseError(fmt::format("truncated input while reading {}", what), mPos);
    }

    std::span<const std::uint8_t> mBytes;
    std::size_t mPos = 0;
};

void validatePositions(std::span<const double> positions, std::string_view what)
{
    for (std::size_t i = 0; i < positions.size(); ++i) {
        const double p = positions[i];
        if (!std::isfinite(p))
            throw ValidationError(fmt::format("{}: position at index {} is not finite", what, i));
        if (p < 0.0)
            throw ValidationError(fmt::format("{}: position at index {} is negative", what, i));
        if (i > 0 && p < positions[i - 1])
            throw ValidationError(
                fmt::format("{}: positions decrease at index {} ({} < {})", what, i, p,
                            positions[i - 1]));
    }
}

} // namespace

std::string_view toString(TraversalRole role)
{
    switch (role) {
    case TraversalRole::Ref1: return "Ref1";
    case TraversalRole::Ref2: return "Ref2";
    case TraversalRole::Qry1: return "Qry1";
    }
    return "unknown";
}

std::string_view toString(DistanceMetric metric)
{
    return metric == DistanceMetric::Cosine ? "cosine" : "euclidean";
}

DistanceMetric parseDistanceMetric(std::string_view text)
{
    if (text == "cosine")
        return DistanceMetric::Cosine;
    if (text == "euclidean")
        return DistanceMetric::Euclidean;
    throw ConfigError(fmt::format("unknown distance_metric '{}'", text));
}

Traversal::Traversal(std::string routeId, TraversalRole role, std::vector<double> positions,
                     std::vector<float> descriptors, std::size_t descriptorDim) :
    mRouteId(std::move(routeId)),
    mRole(role),
    mPositions(std::move(positions)),
    mDescriptors(std::move(descriptors)),
    mDim(descriptorDim)
{
    if (mPositions.empty())
        throw ValidationError("traversal must contain at least one frame");
    validatePositions(mPositions, "traversal");
    if (mDescriptors.size() != mPositions.size() * mDim)
        throw ValidationError(fmt::format("descriptor payload has {} values, expected {} x {}",
                                          mDescriptors.size(), mPositions.size(), mDim));
    for (std::size_t i = 0; i < mDescriptors.size(); ++i) {
        if (!std::isfinite(mDescriptors[i]))
            throw ValidationError(
                fmt::format("descriptor of frame {} has a non-finite value at component {}",
                            i / mDim, i % mDim));
    }
}

Traversal Traversal::fromDescriptors(std::string routeId, TraversalRole role,
                                     std::vector<float> descriptors, std::size_t descriptorDim,
                                     std::optional<std::vector<double>> positions,
                                     double spacingM)
{
    if (descriptorDim == 0)
        throw ValidationError("descriptor dimension must be positive");
    const std::size_t n = descriptors.size() / descriptorDim;
    if (!positions) {
        positions.emplace(n);
        for (std::size_t i = 0; i < n; ++i)
            (*positions)[i] = static_cast<double>(i) * spacingM;
    }
    return Traversal(std::move(routeId), role, std::move(*positions), std::move(descriptors),
                     descriptorDim);
}

Traversal Traversal::positionsOnly(std::string routeId, TraversalRole role,
                                   std::vector<double> positions)
{
    return Traversal(std::move(routeId), role, std::move(positions), {}, 0);
}

std::span<const float> Traversal::descriptor(std::size_t index) const
{
    if (index >= size())
        throw std::out_of_range(fmt::format("frame {} out of range ({})", index, size()));
    return std::span<const float>(mDescriptors).subspan(index * mDim, mDim);
}

FrameRecord Traversal::frame(std::size_t index) const
{
    return FrameRecord{index, mPositions.at(index), descriptor(index)};
}

Traversal Traversal::withRole(TraversalRole role) const
{
    Traversal copy = *this;
    copy.mRole = role;
    return copy;
}

void DistanceMatrix::validate() const
{
    if (scores.size() != rows * cols)
        throw ValidationError(
            fmt::format("matrix payload has {} scores, expected {} x {}", scores.size(), rows, cols));
    if (refPositions.size() != cols)
        throw ValidationError(fmt::format("matrix has {} reference positions for {} columns",
                                          refPositions.size(), cols));
    if (queryPositions.size() != rows)
        throw ValidationError(fmt::format("matrix has {} query positions for {} rows",
                                          queryPositions.size(), rows));
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            if (!std::isfinite(scores[r * cols + c]))
                throw ValidationError(fmt::format("non-finite score at ({}, {})", r, c));
    validatePositions(refPositions, "matrix reference");
    validatePositions(queryPositions, "matrix query");
}

void DatasetConfig::validate() const
{
    if (!(segmentLengthM > 0.0) || !std::isfinite(segmentLengthM))
        throw ConfigError("segment_length_d must be positive");
    if (!(gtToleranceM > 0.0) || !std::isfinite(gtToleranceM))
        throw ConfigError("gt_tolerance_tau must be positive");
    if (rateGrid.empty() || rateGrid.front() != 1)
        throw ConfigError("rate_grid must start with stride 1");
    for (std::size_t i = 1; i < rateGrid.size(); ++i)
        if (rateGrid[i] <= rateGrid[i - 1])
            throw ConfigError("rate_grid must be strictly increasing");
}

DatasetConfig DatasetConfig::fromConfig(const KeyValueConfig& config)
{
    return fromConfig(config, DatasetConfig{});
}

DatasetConfig DatasetConfig::fromConfig(const KeyValueConfig& config, const DatasetConfig& defaults)
{
    DatasetConfig out = defaults;
    out.segmentLengthM = config.getDouble("segment_length_d", defaults.segmentLengthM);
    out.gtToleranceM = config.getDouble("gt_tolerance_tau", defaults.gtToleranceM);
    if (config.has("rate_grid"))
        out.rateGrid = config.getIntList("rate_grid");
    if (const auto metric = config.find("distance_metric"))
        out.metric = parseDistanceMetric(*metric);
    out.validate();
    return out;
}

DatasetConfig DatasetConfig::load(const std::filesystem::path& path)
{
    return fromConfig(KeyValueConfig::load(path));
}

void DatasetConfig::writeTo(KeyValueConfig& config) const
{
    config.set("segment_length_d", fmt::format("{}", segmentLengthM));
    config.set("gt_tolerance_tau", fmt::format("{}", gtToleranceM));
    config.set("rate_grid", fmt::format("{}", fmt::join(rateGrid, ",")));
    config.set("distance_metric", std::string(toString(metric)));
}

CorrespondenceReport checkCorrespondence(std::size_t lengthA, std::size_t lengthB)
{
    const std::size_t delta = lengthA > lengthB ? lengthA - lengthB : lengthB - lengthA;
    return CorrespondenceReport{delta == 0, lengthA, lengthB, delta};
}

CorrespondenceReport checkCorrespondence(const Traversal& a, const Traversal& b)
{
    return checkCorrespondence(a.size(), b.size());
}

std::vector<std::uint8_t> encodeTraversal(const Traversal& traversal)
{
    ByteWriter w;
    w.magic("DMAP");
    w.put<std::uint32_t>(kFormatVersion);
    w.put<std::uint64_t>(traversal.size());
    w.put<std::uint64_t>(traversal.descriptorDim());
    for (const double p : traversal.positions())
        w.put(p);
    for (const float v : traversal.descriptors())
        w.put(v);
    return w.take();
}

Traversal decodeTraversal(std::span<const std::uint8_t> bytes, TraversalRole role,
                          std::string routeId)
{
    ByteReader r(bytes);
    r.expectMagic("DMAP");
    const auto versionOffset = r.offset();
    const auto version = r.get<std::uint32_t>("version");
    if (version != kFormatVersion)
        throw ParseError(fmt::format("unsupported descriptor format version {}", version),
                         versionOffset);
    const auto frameCount = r.get<std::uint64_t>("frame_count");
    const auto dimOffset = r.offset();
    const auto dim = r.get<std::uint64_t>("descriptor_dim");

    r.requireArray(frameCount, sizeof(double), "positions");
    std::vector<double> positions(frameCount);
    for (auto& p : positions)
        p = r.get<double>("position");

    if (dim != 0 && frameCount > std::numeric_limits<std::uint64_t>::max() / dim)
        throw ParseError("descriptor payload size overflows", dimOffset);
    r.requireArray(frameCount * dim, sizeof(float), "descriptors");
    std::vector<float> descriptors(frameCount * dim);
    for (auto& v : descriptors)
        v = r.get<float>("descriptor");

    if (r.remaining() != 0)
        throw ParseError(fmt::format("{} trailing bytes after payload", r.remaining()), r.offset());

    return Traversal(std::move(routeId), role, std::move(positions), std::move(descriptors),
                     static_cast<std::size_t>(dim));
}

std::vector<std::uint8_t> encodeDistanceMatrix(const DistanceMatrix& matrix)
{
    matrix.validate();
    ByteWriter w;
    w.magic("DMTX");
    w.put<std::uint32_t>(kFormatVersion);
    w.put<std::uint64_t>(matrix.rows);
    w.put<std::uint64_t>(matrix.cols);
    for (const double p : matrix.queryPositions)
        w.put(p);
    for (const double p : matrix.refPositions)
        w.put(p);
    for (const float s : matrix.scores)
        w.put(s);
    return w.take();
}

DistanceMatrix decodeDistanceMatrix(std::span<const std::uint8_t> bytes)
{
    ByteReader r(bytes);
    r.expectMagic("DMTX");
    const auto versionOffset = r.offset();
    const auto version = r.get<std::uint32_t>("version");
    if (version != kFormatVersion)
        throw ParseError(fmt::format("unsupported matrix format version {}", version),
                         versionOffset);
    DistanceMatrix m;
    const auto rows = r.get<std::uint64_t>("rows");
    const auto colsOffset = r.offset();
    const auto cols = r.get<std::uint64_t>("cols");

    r.requireArray(rows, sizeof(double), "query positions");
    m.queryPositions.resize(rows);
    for (auto& p : m.queryPositions)
        p = r.get<double>("query position");
    r.requireArray(cols, sizeof(double), "reference positions");
    m.refPositions.resize(cols);
    for (auto& p : m.refPositions)
        p = r.get<double>("reference position");

    if (cols != 0 && rows > std::numeric_limits<std::uint64_t>::max() / cols)
        throw ParseError("score payload size overflows", colsOffset);
    r.requireArray(rows * cols, sizeof(float), "scores");
    m.scores.resize(rows * cols);
    for (auto& s : m.scores)
        s = r.get<float>("score");
    if (r.remaining() != 0)
        throw ParseError(fmt::format("{} trailing bytes after payload", r.remaining()), r.offset());

    m.rows = rows;
    m.cols = cols;
    m.validate();
    return m;
}

std::vector<std::uint8_t> readFileBytes(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError(fmt::format("cannot open '{}'", path.string()));
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                     std::istreambuf_iterator<char>());
}

void writeFileBytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes)
{
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw IoError(fmt::format("cannot write '{}'", tmp.string()));
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out)
            throw IoError(fmt::format("short write to '{}'", tmp.string()));
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec)
        throw IoError(fmt::format("cannot rename '{}' to '{}': {}", tmp.string(), path.string(),
                                  ec.message()));
}

void writeTextFile(const std::filesystem::path& path, std::string_view text)
{
    writeFileBytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void writeTraversal(const std::filesystem::path& path, const Traversal& traversal)
{
    writeFileBytes(path, encodeTraversal(traversal));
}

Traversal loadTraversal(const std::filesystem::path& path, TraversalRole role)
{
    return decodeTraversal(readFileBytes(path), role, path.stem().string());
}

void writeDistanceMatrix(const std::filesystem::path& path, const DistanceMatrix& matrix)
{
    writeFileBytes(path, encodeDistanceMatrix(matrix));
}

DistanceMatrix loadDistanceMatrix(const std::filesystem::path& path)
{
    return decodeDistanceMatrix(readFileBytes(path));
}

} // namespace densel
