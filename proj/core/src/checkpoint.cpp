#include "noisemod/error.hpp"
#include "noisemod/model.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace noisemod {

// Container layout (all integers and floats little-endian):
//   "NMCK" | u16 version | u8 arch | u8 has_opt
//   u32 in_c | u32 in_h | u32 in_w | u32 classes
//   u32 n_widths | u32 widths[...]
//   u32 n_channels | f32 norm_mean[...] | f32 norm_std[...]
//   u32 epoch | f32 best_val_accuracy
//   u32 n_params
//   per param: u16 name_len | name | u8 rank | u32 dims[rank] | f32 data[numel]
//   if has_opt: u64 t | per param f32 m[numel] | f32 v[numel]

namespace {

constexpr char kMagic[4] = {'N', 'M', 'C', 'K'};
constexpr std::uint16_t kVersion = 1;

class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u16(std::uint16_t v) {
        for (int i = 0; i < 2; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float v) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        u32(bits);
    }
    void bytes(const char* p, std::size_t n) { buf_.insert(buf_.end(), p, p + n); }
    const std::vector<char>& buffer() const { return buf_; }

private:
    std::vector<char> buf_;
};

class ByteReader {
public:
    ByteReader(const char* p, std::size_t n) : p_(p), n_(n) {}

    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(p_[pos_++]);
    }
    std::uint16_t u16() {
        std::uint16_t v = 0;
        for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(u8()) << (8 * i);
        return v;
    }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
        return v;
    }
    float f32() {
        const std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s(p_ + pos_, n);
        pos_ += n;
        return s;
    }
    bool exhausted() const { return pos_ == n_; }

private:
    void need(std::size_t n) const {
        if (pos_ + n > n_) throw DataError("checkpoint: truncated file");
    }
    const char* p_;
    std::size_t n_;
    std::size_t pos_ = 0;
};

void write_f32_tensor(ByteWriter& w, const Tensor& t) {
    for (double v : t.data) w.f32(static_cast<float>(v));
}

Tensor read_f32_tensor(ByteReader& r, const std::vector<std::size_t>& shape) {
    Tensor t(shape);
    for (double& v : t.data) v = static_cast<double>(r.f32());
    return t;
}

} // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    ByteWriter w;
    w.bytes(kMagic, 4);
    w.u16(kVersion);
    w.u8(static_cast<std::uint8_t>(ckpt.spec.arch));
    w.u8(1); // optimizer state always carried
    w.u32(static_cast<std::uint32_t>(ckpt.spec.in_c));
    w.u32(static_cast<std::uint32_t>(ckpt.spec.in_h));
    w.u32(static_cast<std::uint32_t>(ckpt.spec.in_w));
    w.u32(static_cast<std::uint32_t>(ckpt.spec.classes));
    w.u32(static_cast<std::uint32_t>(ckpt.spec.widths.size()));
    for (std::size_t x : ckpt.spec.widths) w.u32(static_cast<std::uint32_t>(x));
    w.u32(static_cast<std::uint32_t>(ckpt.spec.norm_mean.size()));
    for (double v : ckpt.spec.norm_mean) w.f32(static_cast<float>(v));
    for (double v : ckpt.spec.norm_std) w.f32(static_cast<float>(v));
    w.u32(ckpt.epoch);
    w.f32(static_cast<float>(ckpt.best_val_accuracy));

    w.u32(static_cast<std::uint32_t>(ckpt.params.size()));
    for (const auto& p : ckpt.params) {
        w.u16(static_cast<std::uint16_t>(p.name.size()));
        w.bytes(p.name.data(), p.name.size());
        w.u8(static_cast<std::uint8_t>(p.value.rank()));
        for (std::size_t d : p.value.shape) w.u32(static_cast<std::uint32_t>(d));
        write_f32_tensor(w, p.value);
    }
    w.u64(ckpt.opt.t);
    for (const Tensor& t : ckpt.opt.m) write_f32_tensor(w, t);
    for (const Tensor& t : ckpt.opt.v) write_f32_tensor(w, t);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("checkpoint: cannot open " + path + " for writing");
    out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
    if (!out) throw DataError("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("checkpoint: cannot open " + path);
    std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    ByteReader r(raw.data(), raw.size());

    if (r.str(4) != std::string(kMagic, 4))
        throw DataError("checkpoint: bad magic in " + path);
    const std::uint16_t version = r.u16();
    if (version != kVersion)
        throw DataError("checkpoint: unsupported version " + std::to_string(version));

    Checkpoint ckpt;
    const std::uint8_t arch = r.u8();
    if (arch > 2) throw DataError("checkpoint: unknown architecture tag");
    ckpt.spec.arch = static_cast<Arch>(arch);
    const bool has_opt = r.u8() != 0;
    ckpt.spec.in_c = r.u32();
    ckpt.spec.in_h = r.u32();
    ckpt.spec.in_w = r.u32();
    ckpt.spec.classes = static_cast<int>(r.u32());
    ckpt.spec.widths.resize(r.u32());
    for (auto& x : ckpt.spec.widths) x = r.u32();
    const std::uint32_t nc = r.u32();
    ckpt.spec.norm_mean.resize(nc);
    ckpt.spec.norm_std.resize(nc);
    for (auto& v : ckpt.spec.norm_mean) v = static_cast<double>(r.f32());
    for (auto& v : ckpt.spec.norm_std) v = static_cast<double>(r.f32());
    ckpt.epoch = r.u32();
    ckpt.best_val_accuracy = static_cast<double>(r.f32());

    const std::uint32_t n_params = r.u32();
    ckpt.params.reserve(n_params);
    for (std::uint32_t i = 0; i < n_params; ++i) {
        const std::uint16_t name_len = r.u16();
        std::string name = r.str(name_len);
        std::vector<std::size_t> shape(r.u8());
        for (auto& d : shape) d = r.u32();
        ckpt.params.push_back({std::move(name), read_f32_tensor(r, shape)});
    }
    if (has_opt) {
        ckpt.opt.t = r.u64();
        for (const auto& p : ckpt.params) ckpt.opt.m.push_back(read_f32_tensor(r, p.value.shape));
        for (const auto& p : ckpt.params) ckpt.opt.v.push_back(read_f32_tensor(r, p.value.shape));
    } else {
        for (const auto& p : ckpt.params) {
            ckpt.opt.m.emplace_back(p.value.shape);
            ckpt.opt.v.emplace_back(p.value.shape);
        }
    }
    if (!r.exhausted()) throw DataError("checkpoint: trailing bytes in " + path);
    ckpt.spec.validate();
    return ckpt;
}

} // namespace noisemod
