#include "noisemod/data.hpp"

#include "noisemod/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>

namespace noisemod {

LabeledDataset LabeledDataset::take(std::size_t n) const {
    if (n == 0 || n >= size()) return *this;
    LabeledDataset out = *this;
    out.images.assign(images.begin(), images.begin() + static_cast<long>(n));
    out.labels.assign(labels.begin(), labels.begin() + static_cast<long>(n));
    return out;
}

std::pair<LabeledDataset, LabeledDataset> LabeledDataset::split_tail(double tail_fraction) const {
    if (!(tail_fraction >= 0.0 && tail_fraction < 1.0))
        throw ConfigError("split_tail: fraction must lie in [0,1)");
    const std::size_t tail = static_cast<std::size_t>(
        std::floor(static_cast<double>(size()) * tail_fraction));
    const std::size_t head = size() - tail;

    LabeledDataset a = *this, b = *this;
    a.images.assign(images.begin(), images.begin() + static_cast<long>(head));
    a.labels.assign(labels.begin(), labels.begin() + static_cast<long>(head));
    b.images.assign(images.begin() + static_cast<long>(head), images.end());
    b.labels.assign(labels.begin() + static_cast<long>(head), labels.end());
    b.split = "val";
    return {std::move(a), std::move(b)};
}

namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return {raw.begin(), raw.end()};
}

std::uint32_t be32(const std::vector<std::uint8_t>& buf, std::size_t off) {
    if (off + 4 > buf.size()) throw DataError("truncated header");
    return (static_cast<std::uint32_t>(buf[off]) << 24) |
           (static_cast<std::uint32_t>(buf[off + 1]) << 16) |
           (static_cast<std::uint32_t>(buf[off + 2]) << 8) |
           static_cast<std::uint32_t>(buf[off + 3]);
}

} // namespace

LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path) {
    const auto ibuf = read_file(images_path);
    const auto lbuf = read_file(labels_path);

    if (ibuf.size() < 16 || be32(ibuf, 0) != 0x00000803u)
        throw DataError("idx: bad image magic in " + images_path);
    if (lbuf.size() < 8 || be32(lbuf, 0) != 0x00000801u)
        throw DataError("idx: bad label magic in " + labels_path);

    const std::uint32_t n = be32(ibuf, 4);
    const std::uint32_t h = be32(ibuf, 8);
    const std::uint32_t w = be32(ibuf, 12);
    const std::uint32_t nl = be32(lbuf, 4);
    if (n != nl)
        throw DataError("idx: image count " + std::to_string(n) + " != label count " +
                        std::to_string(nl));
    if (ibuf.size() != 16 + static_cast<std::size_t>(n) * h * w)
        throw DataError("idx: truncated image file " + images_path);
    if (lbuf.size() != 8 + static_cast<std::size_t>(n))
        throw DataError("idx: truncated label file " + labels_path);

    LabeledDataset ds;
    ds.channels = 1;
    ds.height = h;
    ds.width = w;
    ds.classes = 10;
    ds.images.reserve(n);
    ds.labels.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        Tensor img({1, h, w});
        const std::uint8_t* p = ibuf.data() + 16 + static_cast<std::size_t>(i) * h * w;
        for (std::size_t j = 0; j < static_cast<std::size_t>(h) * w; ++j)
            img.data[j] = static_cast<double>(p[j]) / 255.0;
        ds.images.push_back(std::move(img));
        ds.labels.push_back(static_cast<int>(lbuf[8 + i]));
    }
    return ds;
}

LabeledDataset load_cifar10_binary(const std::vector<std::string>& paths) {
    constexpr std::size_t kRecord = 1 + 3 * 32 * 32;
    LabeledDataset ds;
    ds.channels = 3;
    ds.height = 32;
    ds.width = 32;
    ds.classes = 10;

    for (const std::string& path : paths) {
        const auto buf = read_file(path);
        if (buf.empty() || buf.size() % kRecord != 0)
            throw DataError("cifar10: file size " + std::to_string(buf.size()) +
                            " is not a multiple of record size in " + path);
        const std::size_t n = buf.size() / kRecord;
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint8_t* rec = buf.data() + i * kRecord;
            const int label = static_cast<int>(rec[0]);
            if (label > 9) throw DataError("cifar10: label byte out of range in " + path);
            Tensor img({3, 32, 32});
            for (std::size_t j = 0; j < 3 * 32 * 32; ++j)
                img.data[j] = static_cast<double>(rec[1 + j]) / 255.0;
            ds.images.push_back(std::move(img));
            ds.labels.push_back(label);
        }
    }
    return ds;
}

LabeledDataset synthetic_dataset(const SyntheticSpec& spec, RngStream& rng) {
    if (spec.classes < 2) throw ConfigError("synthetic_dataset: need at least 2 classes");
    if (spec.count == 0) throw ConfigError("synthetic_dataset: need at least 1 example");

    LabeledDataset ds;
    ds.channels = spec.channels;
    ds.height = spec.height;
    ds.width = spec.width;
    ds.classes = spec.classes;
    ds.images.reserve(spec.count);
    ds.labels.reserve(spec.count);

    // One oriented bar through the center per class, stroke-like on a
    // black background: class evidence is spread along the bar and the
    // supports overlap near the center, while exactly-zero pixels stay
    // invariant under multiplicative transforms, as in real digit data.
    constexpr double kPi = 3.14159265358979323846;
    const double cy0 = static_cast<double>(spec.height - 1) / 2.0;
    const double cx0 = static_cast<double>(spec.width - 1) / 2.0;
    const double half_len = 0.42 * static_cast<double>(std::min(spec.height, spec.width));
    const double stroke_sigma = 0.05 * static_cast<double>(std::min(spec.height, spec.width));

    auto gauss = [&rng]() {
        const double u1 = rng.uniform_open();
        const double u2 = rng.uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    };

    for (std::size_t i = 0; i < spec.count; ++i) {
        const int label = static_cast<int>(i % static_cast<std::size_t>(spec.classes));
        // Per-example deformation, scaled by the noise level: strokes move
        // and tilt a little, as handwriting does.
        double angle = kPi * static_cast<double>(label) / spec.classes;
        double cy = cy0, cx = cx0;
        if (spec.noise > 0.0) {
            angle += spec.noise * gauss();
            cy += 10.0 * spec.noise * gauss();
            cx += 10.0 * spec.noise * gauss();
        }
        const double uy = std::sin(angle), ux = std::cos(angle);

        Tensor img({spec.channels, spec.height, spec.width});
        for (std::size_t ch = 0; ch < spec.channels; ++ch) {
            // Channel 0 always carries the full stroke; extra channels get
            // a class-dependent tint.
            const double gain =
                ch == 0 ? 0.9
                        : 0.9 * (0.6 + 0.4 * std::cos(2.0 * angle + static_cast<double>(ch)));
            for (std::size_t y = 0; y < spec.height; ++y)
                for (std::size_t x = 0; x < spec.width; ++x) {
                    const double dy = static_cast<double>(y) - cy;
                    const double dx = static_cast<double>(x) - cx;
                    const double along = dy * uy + dx * ux;
                    const double perp = dx * uy - dy * ux;
                    const double over = std::max(0.0, std::fabs(along) - half_len);
                    const double bar =
                        gain * std::exp(-(perp * perp + 4.0 * over * over) /
                                        (2.0 * stroke_sigma * stroke_sigma));
                    double v = bar < 0.02 ? 0.0 : bar;
                    // Per-pixel stroke jitter; the background stays exactly
                    // zero so its pixels carry no spurious noise.
                    if (spec.noise > 0.0 && v > 0.0) {
                        const double u1 = rng.uniform_open();
                        const double u2 = rng.uniform();
                        const double z = std::sqrt(-2.0 * std::log(u1)) *
                                         std::cos(2.0 * kPi * u2);
                        v *= std::max(0.0, 1.0 + 3.0 * spec.noise * z);
                    }
                    img.at({ch, y, x}) = std::clamp(v, 0.0, 1.0);
                }
        }
        ds.images.push_back(std::move(img));
        ds.labels.push_back(label);
    }
    return ds;
}

void compute_normalization(LabeledDataset& ds) {
    if (ds.images.empty()) throw DataError("compute_normalization: empty dataset");
    const std::size_t c = ds.channels, plane = ds.height * ds.width;
    std::vector<double> mean(c, 0.0), var(c, 0.0);
    const double n = static_cast<double>(ds.size() * plane);

    for (const Tensor& img : ds.images)
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double* p = img.data.data() + ch * plane;
            for (std::size_t i = 0; i < plane; ++i) mean[ch] += p[i];
        }
    for (double& m : mean) m /= n;
    for (const Tensor& img : ds.images)
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double* p = img.data.data() + ch * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                const double d = p[i] - mean[ch];
                var[ch] += d * d;
            }
        }
    ds.norm_mean = mean;
    ds.norm_std.resize(c);
    for (std::size_t ch = 0; ch < c; ++ch) {
        // Floor keeps constant channels usable.
        ds.norm_std[ch] = std::max(std::sqrt(var[ch] / n), 1e-6);
    }
}

namespace {

Tensor affine_per_channel(const Tensor& x, const std::vector<double>& mean,
                          const std::vector<double>& stddev, bool forward) {
    if (x.rank() != 3 || mean.size() != x.shape[0] || stddev.size() != x.shape[0])
        throw ShapeError("normalize: stats do not match image " + x.shape_str());
    const std::size_t plane = x.shape[1] * x.shape[2];
    Tensor out(x.shape);
    for (std::size_t ch = 0; ch < x.shape[0]; ++ch) {
        const double m = mean[ch], s = stddev[ch];
        const double* p = x.data.data() + ch * plane;
        double* q = out.data.data() + ch * plane;
        if (forward)
            for (std::size_t i = 0; i < plane; ++i) q[i] = (p[i] - m) / s;
        else
            for (std::size_t i = 0; i < plane; ++i) q[i] = p[i] * s + m;
    }
    return out;
}

} // namespace

Tensor normalize_image(const Tensor& x, const std::vector<double>& mean,
                       const std::vector<double>& stddev) {
    return affine_per_channel(x, mean, stddev, true);
}

Tensor denormalize_image(const Tensor& x, const std::vector<double>& mean,
                         const std::vector<double>& stddev) {
    return affine_per_channel(x, mean, stddev, false);
}

} // namespace noisemod
