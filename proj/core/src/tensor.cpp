#include "noisemod/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace noisemod {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

Tensor::Tensor(std::vector<std::size_t> s, double fill) : shape(std::move(s)) {
    for (std::size_t d : shape) {
        if (d == 0) throw ShapeError("Tensor: zero extent in shape");
    }
    data.assign(shape_numel(shape), fill);
}

Tensor Tensor::scalar(double v) {
    Tensor t;
    t.data[0] = v;
    return t;
}

Tensor Tensor::from(std::vector<std::size_t> s, std::vector<double> values) {
    Tensor t(std::move(s));
    if (values.size() != t.data.size()) {
        throw ShapeError("Tensor::from: " + std::to_string(values.size()) +
                         " values for shape " + t.shape_str());
    }
    t.data = std::move(values);
    return t;
}

double& Tensor::at(std::initializer_list<std::size_t> idx) {
    return const_cast<double&>(std::as_const(*this).at(idx));
}

const double& Tensor::at(std::initializer_list<std::size_t> idx) const {
    if (idx.size() != shape.size())
        throw ShapeError("Tensor::at: rank " + std::to_string(idx.size()) +
                         " index into tensor " + shape_str());
    std::size_t flat = 0;
    std::size_t dim = 0;
    for (std::size_t i : idx) {
        if (i >= shape[dim])
            throw ShapeError("Tensor::at: index out of range in dim " + std::to_string(dim));
        flat = flat * shape[dim] + i;
        ++dim;
    }
    return data[flat];
}

bool Tensor::all_finite() const {
    return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                         b.shape_str());
}

template <typename F>
Tensor zip(const Tensor& a, const Tensor& b, const char* op, F f) {
    require_same_shape(a, b, op);
    Tensor out(a.shape);
    for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = f(a.data[i], b.data[i]);
    return out;
}

template <typename F>
Tensor map(const Tensor& a, F f) {
    Tensor out(a.shape);
    for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = f(a.data[i]);
    return out;
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return zip(a, b, "add", [](double x, double y) { return x + y; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return zip(a, b, "sub", [](double x, double y) { return x - y; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return zip(a, b, "mul", [](double x, double y) { return x * y; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "div");
    for (std::size_t i = 0; i < b.size(); ++i) {
        if (b.data[i] == 0.0)
            throw NumericError("div: zero divisor entry at flat index " + std::to_string(i));
    }
    Tensor out(a.shape);
    for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = a.data[i] / b.data[i];
    return out;
}

Tensor add(const Tensor& a, double s) {
    return map(a, [s](double x) { return x + s; });
}

Tensor scale(const Tensor& a, double s) {
    return map(a, [s](double x) { return x * s; });
}

Tensor sign(const Tensor& a) {
    return map(a, [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor abs(const Tensor& a) {
    return map(a, [](double x) { return std::fabs(x); });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw ShapeError("matmul: need rank-2 operands, got " + a.shape_str() + " and " +
                         b.shape_str());
    const std::size_t m = a.shape[0], k = a.shape[1];
    if (b.shape[0] != k)
        throw ShapeError("matmul: inner dimensions disagree, " + a.shape_str() + " vs " +
                         b.shape_str());
    const std::size_t n = b.shape[1];

    Tensor out({m, n});
    const double* pa = a.data.data();
    const double* pb = b.data.data();
    double* po = out.data.data();
    // i-k-j order keeps the inner loop contiguous on both b and out.
    for (std::size_t i = 0; i < m; ++i) {
        double* orow = po + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = pa[i * k + kk];
            const double* brow = pb + kk * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

Tensor conv2d(const Tensor& input, const Tensor& kernels, std::size_t stride,
              std::size_t padding) {
    if (input.rank() != 3)
        throw ShapeError("conv2d: input must be [c,h,w], got " + input.shape_str());
    if (kernels.rank() != 4)
        throw ShapeError("conv2d: kernels must be [co,ci,kh,kw], got " + kernels.shape_str());
    if (stride == 0) throw ShapeError("conv2d: stride must be positive");

    const std::size_t ci = input.shape[0], h = input.shape[1], w = input.shape[2];
    const std::size_t co = kernels.shape[0], kh = kernels.shape[2], kw = kernels.shape[3];
    if (kernels.shape[1] != ci)
        throw ShapeError("conv2d: kernel channels " + kernels.shape_str() +
                         " do not match input " + input.shape_str());
    if (kh > h + 2 * padding || kw > w + 2 * padding)
        throw ShapeError("conv2d: kernel " + kernels.shape_str() + " larger than padded input " +
                         input.shape_str());

    const std::size_t oh = (h + 2 * padding - kh) / stride + 1;
    const std::size_t ow = (w + 2 * padding - kw) / stride + 1;
    Tensor out({co, oh, ow});

    const long pad = static_cast<long>(padding);
    const long st = static_cast<long>(stride);
    const double* in = input.data.data();
    const double* kr = kernels.data.data();
    double* po = out.data.data();

    // Valid output range for one kernel tap offset d: all y with
    // 0 <= y*stride + d < extent. Empty when the tap misses the input
    // entirely (negative numerator must not truncate toward zero).
    auto tap_range = [st](long d, std::size_t extent, std::size_t out_extent) {
        const long lo = d < 0 ? (-d + st - 1) / st : 0;
        const long num = static_cast<long>(extent) - 1 - d;
        long hi = num < 0 ? -1 : num / st;
        if (hi >= static_cast<long>(out_extent)) hi = static_cast<long>(out_extent) - 1;
        return std::pair<long, long>(lo, hi);
    };

    for (std::size_t oc = 0; oc < co; ++oc) {
        double* ochan = po + oc * oh * ow;
        for (std::size_t ic = 0; ic < ci; ++ic) {
            const double* ichan = in + ic * h * w;
            for (std::size_t ky = 0; ky < kh; ++ky) {
                const long dy = static_cast<long>(ky) - pad;
                const auto [ylo, yhi] = tap_range(dy, h, oh);
                for (std::size_t kx = 0; kx < kw; ++kx) {
                    const double kval = kr[((oc * ci + ic) * kh + ky) * kw + kx];
                    const long dx = static_cast<long>(kx) - pad;
                    const auto [xlo, xhi] = tap_range(dx, w, ow);
                    for (long y = ylo; y <= yhi; ++y) {
                        const double* irow = ichan + (y * st + dy) * static_cast<long>(w) + dx;
                        double* orow = ochan + y * ow;
                        for (long x = xlo; x <= xhi; ++x) orow[x] += kval * irow[x * st];
                    }
                }
            }
        }
    }
    return out;
}

namespace {

void require_nonempty(const Tensor& a, const char* op) {
    if (a.data.empty()) throw ShapeError(std::string(op) + ": empty tensor");
}

} // namespace

Tensor reduce(ReduceOp op, const Tensor& a, const std::vector<std::size_t>& axes) {
    require_nonempty(a, "reduce");
    std::vector<bool> reduced(a.rank(), false);
    for (std::size_t ax : axes) {
        if (ax >= a.rank())
            throw ShapeError("reduce: axis " + std::to_string(ax) + " out of range for " +
                             a.shape_str());
        reduced[ax] = true;
    }

    std::vector<std::size_t> out_shape;
    for (std::size_t d = 0; d < a.rank(); ++d)
        if (!reduced[d]) out_shape.push_back(a.shape[d]);

    const std::size_t out_n = shape_numel(out_shape);
    std::vector<double> acc;
    std::vector<double> best_idx; // Argmax bookkeeping, reduced-group-local index.
    std::vector<std::size_t> count(out_n, 0);
    if (op == ReduceOp::Max || op == ReduceOp::Argmax)
        acc.assign(out_n, -std::numeric_limits<double>::infinity());
    else
        acc.assign(out_n, 0.0);
    if (op == ReduceOp::Argmax) best_idx.assign(out_n, 0.0);

    // Walk the flat input, tracking the output slot and the position within
    // the reduced group (row-major over the reduced axes).
    std::vector<std::size_t> idx(a.rank(), 0);
    for (std::size_t flat = 0; flat < a.size(); ++flat) {
        std::size_t out_flat = 0, group_flat = 0;
        for (std::size_t d = 0; d < a.rank(); ++d) {
            if (reduced[d])
                group_flat = group_flat * a.shape[d] + idx[d];
            else
                out_flat = out_flat * a.shape[d] + idx[d];
        }
        const double v = a.data[flat];
        switch (op) {
            case ReduceOp::Sum:
            case ReduceOp::Mean: acc[out_flat] += v; break;
            case ReduceOp::Max:
                if (v > acc[out_flat]) acc[out_flat] = v;
                break;
            case ReduceOp::Argmax:
                if (v > acc[out_flat]) {
                    acc[out_flat] = v;
                    best_idx[out_flat] = static_cast<double>(group_flat);
                }
                break;
        }
        count[out_flat]++;
        for (std::size_t d = a.rank(); d-- > 0;) {
            if (++idx[d] < a.shape[d]) break;
            idx[d] = 0;
        }
        if (a.rank() == 0) break;
    }

    Tensor out(out_shape);
    for (std::size_t i = 0; i < out_n; ++i) {
        switch (op) {
            case ReduceOp::Sum: out.data[i] = acc[i]; break;
            case ReduceOp::Mean: out.data[i] = acc[i] / static_cast<double>(count[i]); break;
            case ReduceOp::Max: out.data[i] = acc[i]; break;
            case ReduceOp::Argmax: out.data[i] = best_idx[i]; break;
        }
    }
    return out;
}

double sum(const Tensor& a) {
    require_nonempty(a, "sum");
    double s = 0.0;
    for (double v : a.data) s += v;
    return s;
}

double mean(const Tensor& a) {
    require_nonempty(a, "mean");
    return sum(a) / static_cast<double>(a.size());
}

double max_value(const Tensor& a) {
    require_nonempty(a, "max");
    return *std::max_element(a.data.begin(), a.data.end());
}

std::size_t argmax(const Tensor& a) {
    require_nonempty(a, "argmax");
    std::size_t best = 0;
    for (std::size_t i = 1; i < a.size(); ++i)
        if (a.data[i] > a.data[best]) best = i; // strict: ties keep the lowest index
    return best;
}

} // namespace noisemod
