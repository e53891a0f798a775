#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lp/kernels.hpp"
#include "lp/tensor.hpp"

namespace lp {

using NodeId = int;

enum class Op : std::uint8_t {
    Leaf,
    Constant,
    Dense,             // (W[M,K], x[K]) -> [M]
    DenseT,            // (W[M,K], v[M]) -> [K]
    Outer,             // (a[M], b[K]) -> [M,K]
    Conv2d,            // (x[Ci,H,W], w[Co,Ci,kh,kw]) -> [Co,Ho,Wo]
    ConvTranspose2d,   // (x[Ci,H,W], w[Ci,Co,kh,kw]) -> [Co,OH,OW]; adjoint of Conv2d
    Conv2dFilterGrad,  // (x, gy) -> [Co,Ci,kh,kw]
    MaxPool2d,         // (x[C,H,W]) -> [C,Ho,Wo]
    MaxPool2dInputGrad,  // (x, gy) -> x-shaped
    LeakyRelu,           // slope in attr a; derivative 1 at the kink
    LeakyReluMask,       // (x, g) -> g * dLeakyRelu(x)
    ClampBelow,          // max(x, c), c in attr a; derivative 1 at the kink
    ClampBelowMask,      // (x, g) -> g * [x >= c]
    Sigmoid,
    AddBias,    // (x, b); b matches x, or b[C] broadcast over [C,H,W]
    ChannelSum,       // [C,H,W] -> [C]
    ChannelBroadcast,  // [C] -> [C,H,W]
    Reshape,
    Crop,     // iattrs: offset per dim, then extent per dim
    PadZero,  // iattrs: offset per dim, then output extent per dim
    Square,
    Sqrt,
    Log,
    Sum,            // -> [1]
    Add,
    Sub,
    Mul,
    Div,
    ScalarMul,  // x * a
    ScalarAdd,  // x + a
    BroadcastFull,  // [1] -> shape
    Pick,           // flat index (iattrs[0]) -> [1]
    ScatterOne,     // [1] -> shape with the value at flat index iattrs[0]
};

const char* op_name(Op op);

enum class Pad { Valid, Same };

struct Node {
    Op op = Op::Leaf;
    std::vector<NodeId> in;
    Shape shape;
    double a = 0.0;            // scalar attribute
    std::vector<int> iattrs;   // op-specific layout data
    Tensor value;              // Constant payload
    std::string name;
};

/// Immutable-after-build computation DAG. Node ids are topologically ordered
/// by construction: every input id is smaller than its consumer's id.
class Graph {
public:
    std::vector<Node> nodes;

    int size() const { return static_cast<int>(nodes.size()); }
    const Node& node(NodeId id) const { return nodes[static_cast<std::size_t>(id)]; }

    NodeId leaf(Shape shape, std::string name = {});
    NodeId constant(Tensor value, std::string name = {});
    NodeId dense(NodeId w, NodeId x);
    NodeId dense_t(NodeId w, NodeId v);
    NodeId outer(NodeId a, NodeId b);
    NodeId conv2d(NodeId x, NodeId w, Pad pad, int sh, int sw);
    /// Transposed convolution producing spatial extents (oh, ow).
    NodeId conv_transpose2d(NodeId x, NodeId w, int sh, int sw, int ph, int pw, int oh, int ow);
    NodeId maxpool2d(NodeId x, int kh, int kw, int sh, int sw);
    NodeId leaky_relu(NodeId x, double slope);
    NodeId clamp_below(NodeId x, double floor);
    NodeId sigmoid(NodeId x);
    NodeId add_bias(NodeId x, NodeId b);
    NodeId channel_sum(NodeId x);
    NodeId reshape(NodeId x, Shape target);
    NodeId crop(NodeId x, const std::vector<int>& offsets, const std::vector<int>& extents);
    NodeId square(NodeId x);
    NodeId sqrt_(NodeId x);
    NodeId log_(NodeId x);
    NodeId sum(NodeId x);
    NodeId mean(NodeId x);
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId div(NodeId a, NodeId b);
    NodeId scalar_mul(NodeId x, double c);
    NodeId scalar_add(NodeId x, double c);
    NodeId pick(NodeId x, std::int64_t flat_index);

    /// TF-style same padding: (leading, trailing) pad for one spatial axis.
    static std::pair<int, int> same_pads(int in, int k, int s);

private:
    friend std::vector<NodeId> add_gradients(Graph&, NodeId, std::span<const NodeId>);
    NodeId push(Node n);
    NodeId conv2d_explicit(NodeId x, NodeId w, int sh, int sw, int ph, int pw, int ho, int wo);
    NodeId conv2d_filter_grad(NodeId x, NodeId gy, const kern::ConvGeom& geom);
    NodeId leaky_relu_mask(NodeId x, NodeId g, double slope);
    NodeId clamp_below_mask(NodeId x, NodeId g, double floor);
    NodeId channel_broadcast(NodeId c, int h, int w);
    NodeId pad_zero(NodeId x, const std::vector<int>& offsets, const Shape& target);
    NodeId scatter_one(NodeId s, std::int64_t flat_index, Shape target);
    const Node& in_node(const Node& n, int i) const { return nodes[static_cast<std::size_t>(n.in[static_cast<std::size_t>(i)])]; }
};

using Binding = std::pair<NodeId, const Tensor*>;

/// Evaluates a graph. Reusable: buffers persist between runs.
class Evaluator {
public:
    explicit Evaluator(const Graph& g);

    /// Computes every node needed for `wanted` given leaf bindings.
    void run(std::span<const Binding> bindings, std::span<const NodeId> wanted);
    const Tensor& value(NodeId id) const;

private:
    void compute(NodeId id);

    const Graph* g_;
    std::vector<Tensor> vals_;
    std::vector<std::uint8_t> ready_;
    std::vector<std::uint8_t> needed_;
    std::vector<double> scratch_;
};

/// Appends symbolic adjoint nodes for d(output)/d(wrt) and returns one
/// gradient node per entry of `wrt` (or -1 when no path exists).
/// `output` must be scalar-valued. Differentiating the appended nodes again
/// is supported for the piecewise-linear op family.
std::vector<NodeId> add_gradients(Graph& g, NodeId output, std::span<const NodeId> wrt);

/// One-shot forward evaluation of the requested nodes.
std::unordered_map<NodeId, Tensor> forward(const Graph& g, std::span<const Binding> bindings,
                                           std::span<const NodeId> outputs);

/// d(seed_output)/d(leaf) for every differentiable leaf reachable from seed.
std::unordered_map<NodeId, Tensor> backward(const Graph& g, std::span<const Binding> bindings,
                                            NodeId seed_output);

/// d||grad_x f||_2 / d(param) at the bound probe point, computed by
/// differentiating the graph of the first backward pass.
std::unordered_map<NodeId, Tensor> backward_of_gradient_norm(const Graph& g,
                                                             std::span<const Binding> bindings,
                                                             NodeId output, NodeId input_leaf,
                                                             std::span<const NodeId> params);

}  // namespace lp
