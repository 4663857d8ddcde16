#pragma once

#include "noisemod/rng.hpp"
#include "noisemod/tensor.hpp"

#include <string>
#include <vector>

namespace noisemod {

/// Images scaled to [0,1], one [c,h,w] tensor per example. Normalization
/// stats are computed from a training split and applied inside the model,
/// never to the stored pixels.
struct LabeledDataset {
    std::vector<Tensor> images;
    std::vector<int> labels;
    std::size_t channels = 0, height = 0, width = 0;
    int classes = 0;
    std::vector<double> norm_mean, norm_std;
    std::string split = "train";

    std::size_t size() const { return images.size(); }
    std::vector<std::size_t> image_shape() const { return {channels, height, width}; }

    /// First n examples (n == 0 keeps everything).
    LabeledDataset take(std::size_t n) const;
    /// Split off the trailing fraction (e.g. the last 10% as validation).
    std::pair<LabeledDataset, LabeledDataset> split_tail(double tail_fraction) const;
};

/// MNIST IDX pair: image magic 0x00000803, label magic 0x00000801,
/// big-endian dimensions, u8 pixels mapped to [0,1].
LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path);

/// CIFAR-10 binary batches: records of 1 label byte + 3072 channel-planar
/// pixel bytes (3x32x32).
LabeledDataset load_cifar10_binary(const std::vector<std::string>& paths);

struct SyntheticSpec {
    int classes = 10;
    std::size_t count = 1000;
    std::size_t channels = 1, height = 28, width = 28;
    double noise = 0.05;
};

/// Class-dependent blob patterns plus pixel noise; linearly separable at
/// zero noise and deterministic given the stream.
LabeledDataset synthetic_dataset(const SyntheticSpec& spec, RngStream& rng);

/// Per-channel mean/std over a dataset's [0,1] pixels.
void compute_normalization(LabeledDataset& ds);

Tensor normalize_image(const Tensor& x, const std::vector<double>& mean,
                       const std::vector<double>& stddev);
Tensor denormalize_image(const Tensor& x, const std::vector<double>& mean,
                         const std::vector<double>& stddev);

} // namespace noisemod
