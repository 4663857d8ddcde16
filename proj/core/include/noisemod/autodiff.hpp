#pragma once

#include "noisemod/tensor.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace noisemod {

/// Gradients of one scalar loss with respect to the tape's differentiable
/// leaves. Every parameter leaf gets an entry (zero if the loss does not
/// depend on it); `input` is the gradient w.r.t. the input leaf when one
/// was registered.
struct GradientBundle {
    std::map<std::string, Tensor> params;
    std::optional<Tensor> input;
};

/// Reverse-mode tape. Nodes are created define-by-run, so forward values
/// are cached at construction and creation order is a topological order.
/// One tape per thread; a tape computes one scalar loss.
class Tape {
public:
    using NodeId = int;

    NodeId leaf(Tensor value, std::string id, bool requires_grad);
    /// The designated input leaf; its gradient lands in GradientBundle::input.
    NodeId input_leaf(Tensor value, bool requires_grad = true);

    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId scale(NodeId a, double s);
    NodeId relu(NodeId a);
    NodeId reshape(NodeId a, std::vector<std::size_t> new_shape);

    /// w [m,k] * x [k] + b [m] -> [m]
    NodeId dense(NodeId w, NodeId x, NodeId b);
    /// kernels [co,ci,kh,kw] over x [ci,h,w] plus per-channel bias [co]
    NodeId conv(NodeId kernels, NodeId x, NodeId b, std::size_t stride,
                std::size_t padding);
    /// 2x2 average pooling, stride 2; spatial dims must be even
    NodeId avg_pool2(NodeId a);
    /// [c,h,w] -> [c]
    NodeId global_avg_pool(NodeId a);
    /// Fixed per-channel (x - mean) / stddev; not differentiable parameters.
    NodeId normalize(NodeId a, std::vector<double> mean, std::vector<double> stddev);

    NodeId sum_all(NodeId a);
    NodeId mean_all(NodeId a);
    /// -log(softmax(logits)[label]), max-subtracted for stability.
    NodeId softmax_cross_entropy(NodeId logits, int label);

    const Tensor& value(NodeId n) const;
    std::size_t node_count() const { return nodes_.size(); }

    struct BackwardOptions {
        bool param_grads = true; // false: propagate only toward the input leaf
    };

    /// Gradients of the scalar loss node w.r.t. all requested leaves.
    /// Visits each node exactly once in reverse creation order.
    GradientBundle backward(NodeId loss) { return backward(loss, BackwardOptions{}); }
    GradientBundle backward(NodeId loss, BackwardOptions opts);

    /// Gradient of any node after backward().
    const Tensor& grad(NodeId n);

    /// Process-wide count of backward() invocations, for cost accounting.
    static std::uint64_t backward_pass_count();
    static void reset_backward_pass_count();

private:
    enum class Op {
        Leaf,
        Add,
        Sub,
        Mul,
        Scale,
        Relu,
        Reshape,
        Dense,
        Conv,
        AvgPool2,
        GlobalAvgPool,
        Normalize,
        Sum,
        Mean,
        SoftmaxXent,
    };

    struct Node {
        Op op;
        std::array<NodeId, 3> in{-1, -1, -1};
        Tensor value;
        double scalar = 0.0;
        std::size_t stride = 1, padding = 0;
        int label = -1;
        Tensor cached; // softmax probabilities
        std::vector<double> ch_mean, ch_std;
        std::string leaf_id;
        bool requires_grad = false;
        bool is_input = false;
    };

    NodeId push(Node n);
    const Node& node(NodeId n) const;
    Tensor& grad_slot(NodeId n);

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
    std::vector<char> has_grad_;
    bool backward_done_ = false;
};

} // namespace noisemod
