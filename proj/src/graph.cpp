#include "lp/graph.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace lp {

const char* op_name(Op op) {
    switch (op) {
        case Op::Leaf: return "Leaf";
        case Op::Constant: return "Constant";
        case Op::Dense: return "Dense";
        case Op::DenseT: return "DenseT";
        case Op::Outer: return "Outer";
        case Op::Conv2d: return "Conv2d";
        case Op::ConvTranspose2d: return "ConvTranspose2d";
        case Op::Conv2dFilterGrad: return "Conv2dFilterGrad";
        case Op::MaxPool2d: return "MaxPool2d";
        case Op::MaxPool2dInputGrad: return "MaxPool2dInputGrad";
        case Op::LeakyRelu: return "LeakyRelu";
        case Op::LeakyReluMask: return "LeakyReluMask";
        case Op::ClampBelow: return "ClampBelow";
        case Op::ClampBelowMask: return "ClampBelowMask";
        case Op::Sigmoid: return "Sigmoid";
        case Op::AddBias: return "AddBias";
        case Op::ChannelSum: return "ChannelSum";
        case Op::ChannelBroadcast: return "ChannelBroadcast";
        case Op::Reshape: return "Reshape";
        case Op::Crop: return "Crop";
        case Op::PadZero: return "PadZero";
        case Op::Square: return "Square";
        case Op::Sqrt: return "Sqrt";
        case Op::Log: return "Log";
        case Op::Sum: return "Sum";
        case Op::Add: return "Add";
        case Op::Sub: return "Sub";
        case Op::Mul: return "Mul";
        case Op::Div: return "Div";
        case Op::ScalarMul: return "ScalarMul";
        case Op::ScalarAdd: return "ScalarAdd";
        case Op::BroadcastFull: return "BroadcastFull";
        case Op::Pick: return "Pick";
        case Op::ScatterOne: return "ScatterOne";
    }
    return "?";
}

namespace {

[[noreturn]] void builder_fail(const char* op, const std::string& detail) {
    throw std::invalid_argument(std::string("graph: ") + op + ": " + detail);
}

void expect_rank(const char* op, const char* role, const Node& n, int rank) {
    if (static_cast<int>(n.shape.size()) != rank) {
        builder_fail(op, std::string(role) + " must have rank " + std::to_string(rank) + ", got shape " +
                             shape_str(n.shape));
    }
}

int conv_out_extent(int in, int k, int s, int pad_total) {
    return (in + pad_total - k) / s + 1;
}

}  // namespace

NodeId Graph::push(Node n) {
    for (NodeId id : n.in) {
        if (id < 0 || id >= size()) {
            builder_fail(op_name(n.op), "input node id " + std::to_string(id) + " out of range");
        }
    }
    if (shape_numel(n.shape) <= 0) builder_fail(op_name(n.op), "empty result shape");
    nodes.push_back(std::move(n));
    return size() - 1;
}

NodeId Graph::leaf(Shape shape, std::string name) {
    Node n;
    n.op = Op::Leaf;
    n.shape = std::move(shape);
    n.name = std::move(name);
    return push(std::move(n));
}

NodeId Graph::constant(Tensor value, std::string name) {
    Node n;
    n.op = Op::Constant;
    n.shape = value.dims;
    n.value = std::move(value);
    n.name = std::move(name);
    return push(std::move(n));
}

NodeId Graph::dense(NodeId w, NodeId x) {
    const Node& wn = nodes[w];
    const Node& xn = nodes[x];
    expect_rank("Dense", "weight", wn, 2);
    expect_rank("Dense", "input", xn, 1);
    if (wn.shape[1] != xn.shape[0]) {
        builder_fail("Dense", "weight " + shape_str(wn.shape) + " does not match input " + shape_str(xn.shape));
    }
    Node n;
    n.op = Op::Dense;
    n.in = {w, x};
    n.shape = {wn.shape[0]};
    return push(std::move(n));
}

NodeId Graph::dense_t(NodeId w, NodeId v) {
    const Node& wn = nodes[w];
    const Node& vn = nodes[v];
    expect_rank("DenseT", "weight", wn, 2);
    expect_rank("DenseT", "input", vn, 1);
    if (wn.shape[0] != vn.shape[0]) {
        builder_fail("DenseT", "weight " + shape_str(wn.shape) + " does not match input " + shape_str(vn.shape));
    }
    Node n;
    n.op = Op::DenseT;
    n.in = {w, v};
    n.shape = {wn.shape[1]};
    return push(std::move(n));
}

NodeId Graph::outer(NodeId a, NodeId b) {
    const Node& an = nodes[a];
    const Node& bn = nodes[b];
    expect_rank("Outer", "left", an, 1);
    expect_rank("Outer", "right", bn, 1);
    Node n;
    n.op = Op::Outer;
    n.in = {a, b};
    n.shape = {an.shape[0], bn.shape[0]};
    return push(std::move(n));
}

std::pair<int, int> Graph::same_pads(int in, int k, int s) {
    int out = (in + s - 1) / s;
    int total = (out - 1) * s + k - in;
    if (total < 0) total = 0;
    int lead = total / 2;
    return {lead, total - lead};
}

NodeId Graph::conv2d(NodeId x, NodeId w, Pad pad, int sh, int sw) {
    const Node& xn = nodes[x];
    const Node& wn = nodes[w];
    expect_rank("Conv2d", "input", xn, 3);
    expect_rank("Conv2d", "filter", wn, 4);
    if (wn.shape[1] != xn.shape[0]) {
        builder_fail("Conv2d", "filter " + shape_str(wn.shape) + " does not match input " + shape_str(xn.shape));
    }
    int hi = xn.shape[1], wi = xn.shape[2];
    int kh = wn.shape[2], kw = wn.shape[3];
    int ph = 0, pw = 0, tot_h = 0, tot_w = 0;
    if (pad == Pad::Same) {
        auto [lh, th] = same_pads(hi, kh, sh);
        auto [lw, tw] = same_pads(wi, kw, sw);
        ph = lh;
        pw = lw;
        tot_h = lh + th;
        tot_w = lw + tw;
    } else if (kh > hi || kw > wi) {
        builder_fail("Conv2d", "filter " + shape_str(wn.shape) + " larger than valid-pad input " + shape_str(xn.shape));
    }
    int ho = conv_out_extent(hi, kh, sh, tot_h);
    int wo = conv_out_extent(wi, kw, sw, tot_w);
    return conv2d_explicit(x, w, sh, sw, ph, pw, ho, wo);
}

NodeId Graph::conv2d_explicit(NodeId x, NodeId w, int sh, int sw, int ph, int pw, int ho, int wo) {
    const Node& wn = nodes[w];
    Node n;
    n.op = Op::Conv2d;
    n.in = {x, w};
    n.shape = {wn.shape[0], ho, wo};
    n.iattrs = {sh, sw, ph, pw};
    return push(std::move(n));
}

NodeId Graph::conv_transpose2d(NodeId x, NodeId w, int sh, int sw, int ph, int pw, int oh, int ow) {
    const Node& xn = nodes[x];
    const Node& wn = nodes[w];
    expect_rank("ConvTranspose2d", "input", xn, 3);
    expect_rank("ConvTranspose2d", "filter", wn, 4);
    if (wn.shape[0] != xn.shape[0]) {
        builder_fail("ConvTranspose2d",
                     "filter " + shape_str(wn.shape) + " does not match input " + shape_str(xn.shape));
    }
    // The output extents must convolve back to the input extents. Up to
    // stride-1 trailing rows may fall outside every window (their adjoint is
    // zero), which happens when this node is the adjoint of a strided conv.
    int kh = wn.shape[2], kw = wn.shape[3];
    int hi = xn.shape[1], wi = xn.shape[2];
    bool bad_h = ph < 0 || (hi - 1) * sh + kh - ph + sh - 1 < oh || (hi - 1) * sh - ph > oh - 1;
    bool bad_w = pw < 0 || (wi - 1) * sw + kw - pw + sw - 1 < ow || (wi - 1) * sw - pw > ow - 1;
    if (bad_h || bad_w) {
        builder_fail("ConvTranspose2d", "output " + std::to_string(oh) + "x" + std::to_string(ow) +
                                            " unreachable from input " + shape_str(xn.shape) + " with filter " +
                                            shape_str(wn.shape));
    }
    Node n;
    n.op = Op::ConvTranspose2d;
    n.in = {x, w};
    n.shape = {wn.shape[1], oh, ow};
    n.iattrs = {sh, sw, ph, pw};
    return push(std::move(n));
}

NodeId Graph::conv2d_filter_grad(NodeId x, NodeId gy, const kern::ConvGeom& geom) {
    Node n;
    n.op = Op::Conv2dFilterGrad;
    n.in = {x, gy};
    n.shape = {geom.co, geom.ci, geom.kh, geom.kw};
    n.iattrs = {geom.sh, geom.sw, geom.ph, geom.pw};
    return push(std::move(n));
}

NodeId Graph::maxpool2d(NodeId x, int kh, int kw, int sh, int sw) {
    const Node& xn = nodes[x];
    expect_rank("MaxPool2d", "input", xn, 3);
    if (kh > xn.shape[1] || kw > xn.shape[2]) {
        builder_fail("MaxPool2d", "window " + std::to_string(kh) + "x" + std::to_string(kw) +
                                      " larger than input " + shape_str(xn.shape));
    }
    Node n;
    n.op = Op::MaxPool2d;
    n.in = {x};
    n.shape = {xn.shape[0], (xn.shape[1] - kh) / sh + 1, (xn.shape[2] - kw) / sw + 1};
    n.iattrs = {kh, kw, sh, sw};
    return push(std::move(n));
}

NodeId Graph::leaky_relu(NodeId x, double slope) {
    Node n;
    n.op = Op::LeakyRelu;
    n.in = {x};
    n.shape = nodes[x].shape;
    n.a = slope;
    return push(std::move(n));
}

NodeId Graph::leaky_relu_mask(NodeId x, NodeId g, double slope) {
    if (nodes[x].shape != nodes[g].shape) builder_fail("LeakyReluMask", "shape mismatch");
    Node n;
    n.op = Op::LeakyReluMask;
    n.in = {x, g};
    n.shape = nodes[x].shape;
    n.a = slope;
    return push(std::move(n));
}

NodeId Graph::clamp_below(NodeId x, double floor) {
    Node n;
    n.op = Op::ClampBelow;
    n.in = {x};
    n.shape = nodes[x].shape;
    n.a = floor;
    return push(std::move(n));
}

NodeId Graph::clamp_below_mask(NodeId x, NodeId g, double floor) {
    if (nodes[x].shape != nodes[g].shape) builder_fail("ClampBelowMask", "shape mismatch");
    Node n;
    n.op = Op::ClampBelowMask;
    n.in = {x, g};
    n.shape = nodes[x].shape;
    n.a = floor;
    return push(std::move(n));
}

NodeId Graph::sigmoid(NodeId x) {
    Node n;
    n.op = Op::Sigmoid;
    n.in = {x};
    n.shape = nodes[x].shape;
    return push(std::move(n));
}

NodeId Graph::add_bias(NodeId x, NodeId b) {
    const Node& xn = nodes[x];
    const Node& bn = nodes[b];
    bool same = xn.shape == bn.shape;
    bool channel = bn.shape.size() == 1 && xn.shape.size() == 3 && bn.shape[0] == xn.shape[0];
    if (!same && !channel) {
        builder_fail("AddBias", "bias " + shape_str(bn.shape) + " does not match input " + shape_str(xn.shape));
    }
    Node n;
    n.op = Op::AddBias;
    n.in = {x, b};
    n.shape = xn.shape;
    return push(std::move(n));
}

NodeId Graph::channel_sum(NodeId x) {
    expect_rank("ChannelSum", "input", nodes[x], 3);
    Node n;
    n.op = Op::ChannelSum;
    n.in = {x};
    n.shape = {nodes[x].shape[0]};
    return push(std::move(n));
}

NodeId Graph::channel_broadcast(NodeId c, int h, int w) {
    expect_rank("ChannelBroadcast", "input", nodes[c], 1);
    Node n;
    n.op = Op::ChannelBroadcast;
    n.in = {c};
    n.shape = {nodes[c].shape[0], h, w};
    return push(std::move(n));
}

NodeId Graph::reshape(NodeId x, Shape target) {
    if (shape_numel(target) != shape_numel(nodes[x].shape)) {
        builder_fail("Reshape", "cannot reshape " + shape_str(nodes[x].shape) + " to " + shape_str(target));
    }
    Node n;
    n.op = Op::Reshape;
    n.in = {x};
    n.shape = std::move(target);
    return push(std::move(n));
}

NodeId Graph::crop(NodeId x, const std::vector<int>& offsets, const std::vector<int>& extents) {
    const Node& xn = nodes[x];
    int r = static_cast<int>(xn.shape.size());
    if (static_cast<int>(offsets.size()) != r || static_cast<int>(extents.size()) != r) {
        builder_fail("Crop", "offsets/extents rank does not match input " + shape_str(xn.shape));
    }
    for (int d = 0; d < r; ++d) {
        if (offsets[d] < 0 || extents[d] <= 0 || offsets[d] + extents[d] > xn.shape[d]) {
            builder_fail("Crop", "window exceeds input " + shape_str(xn.shape) + " on axis " + std::to_string(d));
        }
    }
    Node n;
    n.op = Op::Crop;
    n.in = {x};
    n.shape = extents;
    n.iattrs = offsets;
    n.iattrs.insert(n.iattrs.end(), extents.begin(), extents.end());
    return push(std::move(n));
}

NodeId Graph::pad_zero(NodeId x, const std::vector<int>& offsets, const Shape& target) {
    const Node& xn = nodes[x];
    int r = static_cast<int>(xn.shape.size());
    if (static_cast<int>(offsets.size()) != r || static_cast<int>(target.size()) != r) {
        builder_fail("PadZero", "offsets/target rank does not match input " + shape_str(xn.shape));
    }
    for (int d = 0; d < r; ++d) {
        if (offsets[d] < 0 || offsets[d] + xn.shape[d] > target[d]) {
            builder_fail("PadZero", "input does not fit target " + shape_str(target) + " on axis " + std::to_string(d));
        }
    }
    Node n;
    n.op = Op::PadZero;
    n.in = {x};
    n.shape = target;
    n.iattrs = offsets;
    n.iattrs.insert(n.iattrs.end(), target.begin(), target.end());
    return push(std::move(n));
}

NodeId Graph::square(NodeId x) {
    Node n;
    n.op = Op::Square;
    n.in = {x};
    n.shape = nodes[x].shape;
    return push(std::move(n));
}

NodeId Graph::sqrt_(NodeId x) {
    Node n;
    n.op = Op::Sqrt;
    n.in = {x};
    n.shape = nodes[x].shape;
    return push(std::move(n));
}

NodeId Graph::log_(NodeId x) {
    Node n;
    n.op = Op::Log;
    n.in = {x};
    n.shape = nodes[x].shape;
    return push(std::move(n));
}

NodeId Graph::sum(NodeId x) {
    Node n;
    n.op = Op::Sum;
    n.in = {x};
    n.shape = {1};
    return push(std::move(n));
}

NodeId Graph::mean(NodeId x) {
    return scalar_mul(sum(x), 1.0 / static_cast<double>(shape_numel(nodes[x].shape)));
}

NodeId Graph::add(NodeId a, NodeId b) {
    if (nodes[a].shape != nodes[b].shape) {
        builder_fail("Add", shape_str(nodes[a].shape) + " vs " + shape_str(nodes[b].shape));
    }
    Node n;
    n.op = Op::Add;
    n.in = {a, b};
    n.shape = nodes[a].shape;
    return push(std::move(n));
}

NodeId Graph::sub(NodeId a, NodeId b) {
    if (nodes[a].shape != nodes[b].shape) {
        builder_fail("Sub", shape_str(nodes[a].shape) + " vs " + shape_str(nodes[b].shape));
    }
    Node n;
    n.op = Op::Sub;
    n.in = {a, b};
    n.shape = nodes[a].shape;
    return push(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b) {
    if (nodes[a].shape != nodes[b].shape) {
        builder_fail("Mul", shape_str(nodes[a].shape) + " vs " + shape_str(nodes[b].shape));
    }
    Node n;
    n.op = Op::Mul;
    n.in = {a, b};
    n.shape = nodes[a].shape;
    return push(std::move(n));
}

NodeId Graph::div(NodeId a, NodeId b) {
    if (nodes[a].shape != nodes[b].shape) {
        builder_fail("Div", shape_str(nodes[a].shape) + " vs " + shape_str(nodes[b].shape));
    }
    Node n;
    n.op = Op::Div;
    n.in = {a, b};
    n.shape = nodes[a].shape;
    return push(std::move(n));
}

NodeId Graph::scalar_mul(NodeId x, double c) {
    Node n;
    n.op = Op::ScalarMul;
    n.in = {x};
    n.shape = nodes[x].shape;
    n.a = c;
    return push(std::move(n));
}

NodeId Graph::scalar_add(NodeId x, double c) {
    Node n;
    n.op = Op::ScalarAdd;
    n.in = {x};
    n.shape = nodes[x].shape;
    n.a = c;
    return push(std::move(n));
}

NodeId Graph::pick(NodeId x, std::int64_t flat_index) {
    if (flat_index < 0 || flat_index >= shape_numel(nodes[x].shape)) {
        builder_fail("Pick", "index " + std::to_string(flat_index) + " out of range for " + shape_str(nodes[x].shape));
    }
    Node n;
    n.op = Op::Pick;
    n.in = {x};
    n.shape = {1};
    n.iattrs = {static_cast<int>(flat_index)};
    return push(std::move(n));
}

NodeId Graph::scatter_one(NodeId s, std::int64_t flat_index, Shape target) {
    Node n;
    n.op = Op::ScatterOne;
    n.in = {s};
    n.shape = std::move(target);
    n.iattrs = {static_cast<int>(flat_index)};
    return push(std::move(n));
}

// ---------------------------------------------------------------------------
// Symbolic differentiation
// ---------------------------------------------------------------------------

namespace {

kern::ConvGeom conv_geom_of(const Graph& g, const Node& n) {
    const Node& a = g.node(n.in[0]);
    const Node& b = g.node(n.in[1]);
    kern::ConvGeom geom;
    geom.sh = n.iattrs[0];
    geom.sw = n.iattrs[1];
    geom.ph = n.iattrs[2];
    geom.pw = n.iattrs[3];
    switch (n.op) {
        case Op::Conv2d:
            geom.ci = a.shape[0];
            geom.hi = a.shape[1];
            geom.wi = a.shape[2];
            geom.co = b.shape[0];
            geom.kh = b.shape[2];
            geom.kw = b.shape[3];
            geom.ho = n.shape[1];
            geom.wo = n.shape[2];
            break;
        case Op::ConvTranspose2d:
            // Geometry of the underlying (virtual) forward convolution, which
            // maps this node's output back to its input extents.
            geom.ci = n.shape[0];
            geom.hi = n.shape[1];
            geom.wi = n.shape[2];
            geom.co = a.shape[0];
            geom.kh = b.shape[2];
            geom.kw = b.shape[3];
            geom.ho = a.shape[1];
            geom.wo = a.shape[2];
            break;
        case Op::Conv2dFilterGrad:
            geom.ci = a.shape[0];
            geom.hi = a.shape[1];
            geom.wi = a.shape[2];
            geom.co = b.shape[0];
            geom.kh = n.shape[2];
            geom.kw = n.shape[3];
            geom.ho = b.shape[1];
            geom.wo = b.shape[2];
            break;
        default:
            throw std::logic_error("graph: conv geometry requested for non-conv node");
    }
    return geom;
}

kern::PoolGeom pool_geom_of(const Graph& g, const Node& n) {
    const Node& x = g.node(n.in[0]);
    kern::PoolGeom geom;
    geom.c = x.shape[0];
    geom.hi = x.shape[1];
    geom.wi = x.shape[2];
    geom.kh = n.iattrs[0];
    geom.kw = n.iattrs[1];
    geom.sh = n.iattrs[2];
    geom.sw = n.iattrs[3];
    geom.ho = (geom.hi - geom.kh) / geom.sh + 1;
    geom.wo = (geom.wi - geom.kw) / geom.sw + 1;
    return geom;
}

}  // namespace

std::vector<NodeId> add_gradients(Graph& g, NodeId output, std::span<const NodeId> wrt) {
    if (output < 0 || output >= g.size()) throw std::invalid_argument("graph: gradient output id out of range");
    if (shape_numel(g.node(output).shape) != 1) {
        throw std::invalid_argument("graph: gradient output must be scalar, got " +
                                    shape_str(g.node(output).shape));
    }
    const int frozen = g.size();  // adjoints reference only pre-existing nodes

    // Nodes through which one of the wrt targets can influence a consumer.
    std::vector<std::uint8_t> active(static_cast<std::size_t>(frozen), 0);
    for (NodeId w : wrt) {
        if (w < 0 || w >= frozen) throw std::invalid_argument("graph: gradient target id out of range");
        active[static_cast<std::size_t>(w)] = 1;
    }
    for (NodeId id = 0; id < frozen; ++id) {
        if (active[static_cast<std::size_t>(id)]) continue;
        for (NodeId in : g.nodes[static_cast<std::size_t>(id)].in) {
            if (active[static_cast<std::size_t>(in)]) {
                active[static_cast<std::size_t>(id)] = 1;
                break;
            }
        }
    }

    // Nodes the output actually depends on.
    std::vector<std::uint8_t> reach(static_cast<std::size_t>(frozen), 0);
    reach[static_cast<std::size_t>(output)] = 1;
    for (NodeId id = output; id >= 0; --id) {
        if (!reach[static_cast<std::size_t>(id)]) continue;
        for (NodeId in : g.nodes[static_cast<std::size_t>(id)].in) reach[static_cast<std::size_t>(in)] = 1;
    }

    std::vector<NodeId> adj(static_cast<std::size_t>(frozen), -1);
    auto accumulate = [&](NodeId target, NodeId contribution) {
        NodeId& slot = adj[static_cast<std::size_t>(target)];
        slot = (slot < 0) ? contribution : g.add(slot, contribution);
    };

    const Node& on = g.node(output);
    NodeId seed = g.constant(Tensor::full(on.shape, 1.0));
    adj[static_cast<std::size_t>(output)] = seed;

    for (NodeId id = output; id >= 0; --id) {
        if (!reach[static_cast<std::size_t>(id)] || !active[static_cast<std::size_t>(id)]) continue;
        NodeId abar = adj[static_cast<std::size_t>(id)];
        if (abar < 0) continue;  // no sensitivity flowed here
        const Node n = g.nodes[static_cast<std::size_t>(id)];  // copy: g.nodes may reallocate below
        auto wants = [&](int slot) {
            NodeId in = n.in[static_cast<std::size_t>(slot)];
            return active[static_cast<std::size_t>(in)] != 0;
        };
        switch (n.op) {
            case Op::Leaf:
            case Op::Constant:
                break;
            case Op::Dense: {
                if (wants(0)) accumulate(n.in[0], g.outer(abar, n.in[1]));
                if (wants(1)) accumulate(n.in[1], g.dense_t(n.in[0], abar));
                break;
            }
            case Op::DenseT: {
                if (wants(0)) accumulate(n.in[0], g.outer(n.in[1], abar));
                if (wants(1)) accumulate(n.in[1], g.dense(n.in[0], abar));
                break;
            }
            case Op::Outer: {
                if (wants(0)) accumulate(n.in[0], g.dense(abar, n.in[1]));
                if (wants(1)) accumulate(n.in[1], g.dense_t(abar, n.in[0]));
                break;
            }
            case Op::Conv2d: {
                kern::ConvGeom geom = conv_geom_of(g, n);
                if (wants(0)) {
                    accumulate(n.in[0], g.conv_transpose2d(abar, n.in[1], geom.sh, geom.sw, geom.ph, geom.pw,
                                                           geom.hi, geom.wi));
                }
                if (wants(1)) accumulate(n.in[1], g.conv2d_filter_grad(n.in[0], abar, geom));
                break;
            }
            case Op::ConvTranspose2d: {
                kern::ConvGeom geom = conv_geom_of(g, n);
                if (wants(0)) {
                    accumulate(n.in[0],
                               g.conv2d_explicit(abar, n.in[1], geom.sh, geom.sw, geom.ph, geom.pw, geom.ho, geom.wo));
                }
                if (wants(1)) accumulate(n.in[1], g.conv2d_filter_grad(abar, n.in[0], geom));
                break;
            }
            case Op::Conv2dFilterGrad:
            case Op::MaxPool2dInputGrad:
                throw std::logic_error(std::string("graph: node ") + std::to_string(id) + " (" + op_name(n.op) +
                                       ") is outside the supported double-differentiation set");
            case Op::MaxPool2d: {
                if (wants(0)) {
                    Node gn;
                    gn.op = Op::MaxPool2dInputGrad;
                    gn.in = {n.in[0], abar};
                    gn.shape = g.nodes[static_cast<std::size_t>(n.in[0])].shape;
                    gn.iattrs = n.iattrs;
                    accumulate(n.in[0], g.push(std::move(gn)));
                }
                break;
            }
            case Op::LeakyRelu: {
                if (wants(0)) accumulate(n.in[0], g.leaky_relu_mask(n.in[0], abar, n.a));
                break;
            }
            case Op::LeakyReluMask: {
                // d/dx is zero almost everywhere and is dropped by convention.
                if (wants(1)) accumulate(n.in[1], g.leaky_relu_mask(n.in[0], abar, n.a));
                break;
            }
            case Op::ClampBelow: {
                if (wants(0)) accumulate(n.in[0], g.clamp_below_mask(n.in[0], abar, n.a));
                break;
            }
            case Op::ClampBelowMask: {
                if (wants(1)) accumulate(n.in[1], g.clamp_below_mask(n.in[0], abar, n.a));
                break;
            }
            case Op::Sigmoid: {
                if (wants(0)) {
                    NodeId one_minus = g.scalar_add(g.scalar_mul(id, -1.0), 1.0);
                    accumulate(n.in[0], g.mul(abar, g.mul(id, one_minus)));
                }
                break;
            }
            case Op::AddBias: {
                if (wants(0)) accumulate(n.in[0], abar);
                if (wants(1)) {
                    const Node& bn = g.nodes[static_cast<std::size_t>(n.in[1])];
                    accumulate(n.in[1], bn.shape == n.shape ? abar : g.channel_sum(abar));
                }
                break;
            }
            case Op::ChannelSum: {
                if (wants(0)) {
                    const Node& xn = g.nodes[static_cast<std::size_t>(n.in[0])];
                    accumulate(n.in[0], g.channel_broadcast(abar, xn.shape[1], xn.shape[2]));
                }
                break;
            }
            case Op::ChannelBroadcast: {
                if (wants(0)) accumulate(n.in[0], g.channel_sum(abar));
                break;
            }
            case Op::Reshape: {
                if (wants(0)) accumulate(n.in[0], g.reshape(abar, g.nodes[static_cast<std::size_t>(n.in[0])].shape));
                break;
            }
            case Op::Crop: {
                if (wants(0)) {
                    int r = static_cast<int>(n.shape.size());
                    std::vector<int> offsets(n.iattrs.begin(), n.iattrs.begin() + r);
                    accumulate(n.in[0], g.pad_zero(abar, offsets, g.nodes[static_cast<std::size_t>(n.in[0])].shape));
                }
                break;
            }
            case Op::PadZero: {
                if (wants(0)) {
                    int r = static_cast<int>(n.shape.size());
                    std::vector<int> offsets(n.iattrs.begin(), n.iattrs.begin() + r);
                    const Shape& xs = g.nodes[static_cast<std::size_t>(n.in[0])].shape;
                    accumulate(n.in[0], g.crop(abar, offsets, xs));
                }
                break;
            }
            case Op::Square: {
                if (wants(0)) accumulate(n.in[0], g.mul(abar, g.scalar_mul(n.in[0], 2.0)));
                break;
            }
            case Op::Sqrt: {
                if (wants(0)) accumulate(n.in[0], g.div(g.scalar_mul(abar, 0.5), id));
                break;
            }
            case Op::Log: {
                if (wants(0)) accumulate(n.in[0], g.div(abar, n.in[0]));
                break;
            }
            case Op::Sum: {
                if (wants(0)) {
                    Node bn;
                    bn.op = Op::BroadcastFull;
                    bn.in = {abar};
                    bn.shape = g.nodes[static_cast<std::size_t>(n.in[0])].shape;
                    accumulate(n.in[0], g.push(std::move(bn)));
                }
                break;
            }
            case Op::BroadcastFull: {
                if (wants(0)) accumulate(n.in[0], g.sum(abar));
                break;
            }
            case Op::Add: {
                if (wants(0)) accumulate(n.in[0], abar);
                if (wants(1)) accumulate(n.in[1], abar);
                break;
            }
            case Op::Sub: {
                if (wants(0)) accumulate(n.in[0], abar);
                if (wants(1)) accumulate(n.in[1], g.scalar_mul(abar, -1.0));
                break;
            }
            case Op::Mul: {
                if (wants(0)) accumulate(n.in[0], g.mul(abar, n.in[1]));
                if (wants(1)) accumulate(n.in[1], g.mul(abar, n.in[0]));
                break;
            }
            case Op::Div: {
                if (wants(0)) accumulate(n.in[0], g.div(abar, n.in[1]));
                if (wants(1)) {
                    NodeId q = g.div(id, n.in[1]);  // a / b^2
                    accumulate(n.in[1], g.scalar_mul(g.mul(abar, q), -1.0));
                }
                break;
            }
            case Op::ScalarMul: {
                if (wants(0)) accumulate(n.in[0], g.scalar_mul(abar, n.a));
                break;
            }
            case Op::ScalarAdd: {
                if (wants(0)) accumulate(n.in[0], abar);
                break;
            }
            case Op::Pick: {
                if (wants(0)) {
                    accumulate(n.in[0],
                               g.scatter_one(abar, n.iattrs[0], g.nodes[static_cast<std::size_t>(n.in[0])].shape));
                }
                break;
            }
            case Op::ScatterOne: {
                if (wants(0)) accumulate(n.in[0], g.pick(id, n.iattrs[0]));
                break;
            }
        }
    }

    std::vector<NodeId> out;
    out.reserve(wrt.size());
    for (NodeId w : wrt) {
        NodeId a = adj[static_cast<std::size_t>(w)];
        out.push_back(reach[static_cast<std::size_t>(w)] ? a : -1);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

Evaluator::Evaluator(const Graph& g) : g_(&g) {}

const Tensor& Evaluator::value(NodeId id) const {
    if (id < 0 || id >= static_cast<int>(vals_.size())) {
        throw std::logic_error("graph: value requested for node " + std::to_string(id) + " outside the last run");
    }
    const Node& n = g_->node(id);
    if (n.op == Op::Constant) return n.value;
    if (!ready_[static_cast<std::size_t>(id)]) {
        throw std::logic_error("graph: node " + std::to_string(id) + " (" + op_name(n.op) +
                               ") was not computed in the last run");
    }
    return vals_[static_cast<std::size_t>(id)];
}

void Evaluator::run(std::span<const Binding> bindings, std::span<const NodeId> wanted) {
    const std::size_t total = static_cast<std::size_t>(g_->size());
    vals_.resize(total);
    ready_.assign(total, 0);
    needed_.assign(total, 0);

    for (const auto& [id, t] : bindings) {
        if (id < 0 || id >= g_->size()) throw std::invalid_argument("graph: binding id out of range");
        const Node& n = g_->node(id);
        if (n.op != Op::Leaf) {
            throw std::invalid_argument("graph: binding target " + std::to_string(id) + " is " + op_name(n.op) +
                                        ", not a leaf");
        }
        if (t->dims != n.shape) {
            throw std::invalid_argument("graph: leaf " + (n.name.empty() ? std::to_string(id) : n.name) +
                                        " expects " + shape_str(n.shape) + ", bound " + shape_str(t->dims));
        }
        vals_[static_cast<std::size_t>(id)] = *t;
        ready_[static_cast<std::size_t>(id)] = 1;
    }

    for (NodeId id : wanted) {
        if (id < 0 || id >= g_->size()) throw std::invalid_argument("graph: wanted id out of range");
        needed_[static_cast<std::size_t>(id)] = 1;
    }
    for (NodeId id = g_->size() - 1; id >= 0; --id) {
        if (!needed_[static_cast<std::size_t>(id)] || ready_[static_cast<std::size_t>(id)]) continue;
        for (NodeId in : g_->node(id).in) needed_[static_cast<std::size_t>(in)] = 1;
    }
    for (NodeId id = 0; id < g_->size(); ++id) {
        if (needed_[static_cast<std::size_t>(id)] && !ready_[static_cast<std::size_t>(id)]) compute(id);
    }
}

void Evaluator::compute(NodeId id) {
    const Node& n = g_->node(id);
    auto input = [&](int slot) -> const Tensor& {
        NodeId in = n.in[static_cast<std::size_t>(slot)];
        const Node& m = g_->node(in);
        if (m.op == Op::Constant) return m.value;
        if (!ready_[static_cast<std::size_t>(in)]) {
            throw std::logic_error("graph: evaluation order violated at node " + std::to_string(id));
        }
        return vals_[static_cast<std::size_t>(in)];
    };
    Tensor& out = vals_[static_cast<std::size_t>(id)];
    if (n.op != Op::Constant) {
        if (out.dims != n.shape) out = Tensor::zeros(n.shape);
    }
    const std::int64_t count = shape_numel(n.shape);

    switch (n.op) {
        case Op::Leaf:
            throw std::invalid_argument("graph: leaf " + (n.name.empty() ? std::to_string(id) : n.name) +
                                        " has no bound value");
        case Op::Constant:
            break;
        case Op::Dense: {
            const Tensor& w = input(0);
            const Tensor& x = input(1);
            kern::dense(w.data.data(), x.data.data(), out.data.data(), w.dims[0], w.dims[1]);
            break;
        }
        case Op::DenseT: {
            const Tensor& w = input(0);
            const Tensor& v = input(1);
            kern::dense_t(w.data.data(), v.data.data(), out.data.data(), w.dims[0], w.dims[1]);
            break;
        }
        case Op::Outer: {
            const Tensor& a = input(0);
            const Tensor& b = input(1);
            kern::outer(a.data.data(), b.data.data(), out.data.data(), a.dims[0], b.dims[0]);
            break;
        }
        case Op::Conv2d: {
            kern::ConvGeom geom = conv_geom_of(*g_, n);
            kern::conv2d(geom, input(0).data.data(), input(1).data.data(), out.data.data(), scratch_);
            break;
        }
        case Op::ConvTranspose2d: {
            kern::ConvGeom geom = conv_geom_of(*g_, n);
            kern::conv2d_input_grad(geom, input(0).data.data(), input(1).data.data(), out.data.data(), scratch_);
            break;
        }
        case Op::Conv2dFilterGrad: {
            kern::ConvGeom geom = conv_geom_of(*g_, n);
            kern::conv2d_filter_grad(geom, input(0).data.data(), input(1).data.data(), out.data.data(), scratch_);
            break;
        }
        case Op::MaxPool2d: {
            kern::PoolGeom geom = pool_geom_of(*g_, n);
            kern::maxpool(geom, input(0).data.data(), out.data.data());
            break;
        }
        case Op::MaxPool2dInputGrad: {
            kern::PoolGeom geom = pool_geom_of(*g_, n);
            kern::maxpool_input_grad(geom, input(0).data.data(), input(1).data.data(), out.data.data());
            break;
        }
        case Op::LeakyRelu: {
            const double* x = input(0).data.data();
            double* y = out.data.data();
            const double s = n.a;
            for (std::int64_t i = 0; i < count; ++i) y[i] = x[i] >= 0.0 ? x[i] : s * x[i];
            break;
        }
        case Op::LeakyReluMask: {
            const double* x = input(0).data.data();
            const double* gy = input(1).data.data();
            double* y = out.data.data();
            const double s = n.a;
            for (std::int64_t i = 0; i < count; ++i) y[i] = x[i] >= 0.0 ? gy[i] : s * gy[i];
            break;
        }
        case Op::ClampBelow: {
            const double* x = input(0).data.data();
            double* y = out.data.data();
            const double c = n.a;
            for (std::int64_t i = 0; i < count; ++i) y[i] = x[i] >= c ? x[i] : c;
            break;
        }
        case Op::ClampBelowMask: {
            const double* x = input(0).data.data();
            const double* gy = input(1).data.data();
            double* y = out.data.data();
            const double c = n.a;
            for (std::int64_t i = 0; i < count; ++i) y[i] = x[i] >= c ? gy[i] : 0.0;
            break;
        }
        case Op::Sigmoid: {
            const double* x = input(0).data.data();
            double* y = out.data.data();
            for (std::int64_t i = 0; i < count; ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
            break;
        }
        case Op::AddBias: {
            const Tensor& x = input(0);
            const Tensor& b = input(1);
            double* y = out.data.data();
            if (b.dims == x.dims) {
                for (std::int64_t i = 0; i < count; ++i) y[i] = x.data[static_cast<std::size_t>(i)] + b.data[static_cast<std::size_t>(i)];
            } else {
                const std::int64_t plane = static_cast<std::int64_t>(x.dims[1]) * x.dims[2];
                for (int c = 0; c < x.dims[0]; ++c) {
                    const double bc = b.data[static_cast<std::size_t>(c)];
                    const double* xc = x.data.data() + c * plane;
                    double* yc = y + c * plane;
                    for (std::int64_t i = 0; i < plane; ++i) yc[i] = xc[i] + bc;
                }
            }
            break;
        }
        case Op::ChannelSum: {
            const Tensor& x = input(0);
            const std::int64_t plane = static_cast<std::int64_t>(x.dims[1]) * x.dims[2];
            for (int c = 0; c < x.dims[0]; ++c) {
                const double* xc = x.data.data() + c * plane;
                double s = 0.0;
                for (std::int64_t i = 0; i < plane; ++i) s += xc[i];
                out.data[static_cast<std::size_t>(c)] = s;
            }
            break;
        }
        case Op::ChannelBroadcast: {
            const Tensor& x = input(0);
            const std::int64_t plane = static_cast<std::int64_t>(n.shape[1]) * n.shape[2];
            for (int c = 0; c < n.shape[0]; ++c) {
                const double v = x.data[static_cast<std::size_t>(c)];
                double* yc = out.data.data() + c * plane;
                for (std::int64_t i = 0; i < plane; ++i) yc[i] = v;
            }
            break;
        }
        case Op::Reshape: {
            out.data = input(0).data;
            break;
        }
        case Op::Crop: {
            const Tensor& x = input(0);
            const int r = static_cast<int>(n.shape.size());
            std::vector<std::int64_t> xstride(static_cast<std::size_t>(r), 1);
            for (int d = r - 2; d >= 0; --d) {
                xstride[static_cast<std::size_t>(d)] = xstride[static_cast<std::size_t>(d + 1)] * x.dims[static_cast<std::size_t>(d + 1)];
            }
            std::vector<int> idx(static_cast<std::size_t>(r), 0);
            for (std::int64_t o = 0; o < count; ++o) {
                std::int64_t src = 0;
                for (int d = 0; d < r; ++d) {
                    src += (n.iattrs[static_cast<std::size_t>(d)] + idx[static_cast<std::size_t>(d)]) *
                           xstride[static_cast<std::size_t>(d)];
                }
                out.data[static_cast<std::size_t>(o)] = x.data[static_cast<std::size_t>(src)];
                for (int d = r - 1; d >= 0; --d) {
                    if (++idx[static_cast<std::size_t>(d)] < n.shape[static_cast<std::size_t>(d)]) break;
                    idx[static_cast<std::size_t>(d)] = 0;
                }
            }
            break;
        }
        case Op::PadZero: {
            const Tensor& x = input(0);
            std::fill(out.data.begin(), out.data.end(), 0.0);
            const int r = static_cast<int>(n.shape.size());
            std::vector<std::int64_t> ostride(static_cast<std::size_t>(r), 1);
            for (int d = r - 2; d >= 0; --d) {
                ostride[static_cast<std::size_t>(d)] = ostride[static_cast<std::size_t>(d + 1)] * n.shape[static_cast<std::size_t>(d + 1)];
            }
            std::vector<int> idx(static_cast<std::size_t>(r), 0);
            const std::int64_t in_count = x.size();
            for (std::int64_t o = 0; o < in_count; ++o) {
                std::int64_t dst = 0;
                for (int d = 0; d < r; ++d) {
                    dst += (n.iattrs[static_cast<std::size_t>(d)] + idx[static_cast<std::size_t>(d)]) *
                           ostride[static_cast<std::size_t>(d)];
                }
                out.data[static_cast<std::size_t>(dst)] = x.data[static_cast<std::size_t>(o)];
                for (int d = r - 1; d >= 0; --d) {
                    if (++idx[static_cast<std::size_t>(d)] < x.dims[static_cast<std::size_t>(d)]) break;
                    idx[static_cast<std::size_t>(d)] = 0;
                }
            }
            break;
        }
        case Op::Square: {
            const double* x = input(0).data.data();
            double* y = out.data.data();
            for (std::int64_t i = 0; i < count; ++i) y[i] = x[i] * x[i];
            break;
        }
        case Op::Sqrt: {
            const double* x = input(0).data.data();
            double* y = out.data.data();
            for (std::int64_t i = 0; i < count; ++i) y[i] = std::sqrt(x[i]);
            break;
        }
        case Op::Log: {
            const double* x = input(0).data.data();
            double* y = out.data.data();
            for (std::int64_t i = 0; i < count; ++i) y[i] = std::log(x[i]);
            break;
        }
        case Op::Sum: {
            const Tensor& x = input(0);
            double s = 0.0;
            for (double v : x.data) s += v;
            out.data[0] = s;
            break;
        }
        case Op::Add: {
            const double* a = input(0).data.data();
            const double* b = input(1).data.data();
            double* y = out.data.data();
            for (std::int64_t i = 0; i < count; ++i) y[i] = a[i] + b[i];
            break;
        }
        case Op::Sub: {
            const double* a = input(0).data.data();
            const double* b = input(1).data.data();
            double* y = out.data.data();
            for (std::int64_t i = 0; i < count; ++i) y[i] = a[i] - b[i];
            break;
        }
        case Op::Mul: {
            const double* a = input(0).data.data();
            const double* b = input(1).data.data();
            double* y = out.data.data();
            for (std::int64_t i = 0; i < count; ++i) y[i] = a[i] * b[i];
            break;
        }
        case Op::Div: {
            const double* a = input(0).data.data();
            const double* b = input(1).data.data();
            double* y = out.data.data();
            for (std::int64_t i = 0; i < count; ++i) y[i] = a[i] / b[i];
            break;
        }
        case Op::ScalarMul: {
            const double* x = input(0).data.data();
            double* y = out.data.data();
            const double c = n.a;
            for (std::int64_t i = 0; i < count; ++i) y[i] = c * x[i];
            break;
        }
        case Op::ScalarAdd: {
            const double* x = input(0).data.data();
            double* y = out.data.data();
            const double c = n.a;
            for (std::int64_t i = 0; i < count; ++i) y[i] = x[i] + c;
            break;
        }
        case Op::BroadcastFull: {
            const double v = input(0).data[0];
            std::fill(out.data.begin(), out.data.end(), v);
            break;
        }
        case Op::Pick: {
            out.data[0] = input(0).data[static_cast<std::size_t>(n.iattrs[0])];
            break;
        }
        case Op::ScatterOne: {
            std::fill(out.data.begin(), out.data.end(), 0.0);
            out.data[static_cast<std::size_t>(n.iattrs[0])] = input(0).data[0];
            break;
        }
    }
    ready_[static_cast<std::size_t>(id)] = 1;
}

// ---------------------------------------------------------------------------
// One-shot convenience entry points
// ---------------------------------------------------------------------------

std::unordered_map<NodeId, Tensor> forward(const Graph& g, std::span<const Binding> bindings,
                                           std::span<const NodeId> outputs) {
    Evaluator ev(g);
    ev.run(bindings, outputs);
    std::unordered_map<NodeId, Tensor> result;
    for (NodeId id : outputs) result[id] = ev.value(id);
    return result;
}

std::unordered_map<NodeId, Tensor> backward(const Graph& g, std::span<const Binding> bindings,
                                            NodeId seed_output) {
    Graph work = g;
    std::vector<NodeId> leaves;
    for (NodeId id = 0; id < work.size(); ++id) {
        if (work.node(id).op == Op::Leaf) leaves.push_back(id);
    }
    std::vector<NodeId> grads = add_gradients(work, seed_output, leaves);
    std::vector<NodeId> wanted;
    for (NodeId gid : grads) {
        if (gid >= 0) wanted.push_back(gid);
    }
    Evaluator ev(work);
    ev.run(bindings, wanted);
    std::unordered_map<NodeId, Tensor> result;
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        if (grads[i] >= 0) result[leaves[i]] = ev.value(grads[i]);
    }
    return result;
}

std::unordered_map<NodeId, Tensor> backward_of_gradient_norm(const Graph& g,
                                                             std::span<const Binding> bindings,
                                                             NodeId output, NodeId input_leaf,
                                                             std::span<const NodeId> params) {
    Graph work = g;
    NodeId wrt[1] = {input_leaf};
    std::vector<NodeId> gx = add_gradients(work, output, wrt);
    if (gx[0] < 0) {
        throw std::invalid_argument("graph: output node " + std::to_string(output) +
                                    " does not depend on leaf " + std::to_string(input_leaf));
    }
    NodeId norm = work.sqrt_(work.sum(work.square(gx[0])));
    std::vector<NodeId> grads = add_gradients(work, norm, params);
    std::vector<NodeId> wanted;
    for (NodeId gid : grads) {
        if (gid >= 0) wanted.push_back(gid);
    }
    Evaluator ev(work);
    ev.run(bindings, wanted);
    std::unordered_map<NodeId, Tensor> result;
    for (std::size_t i = 0; i < params.size(); ++i) {
        NodeId p = params[i];
        if (grads[i] >= 0) {
            result[p] = ev.value(grads[i]);
        } else {
            result[p] = Tensor::zeros(work.node(p).shape);
        }
    }
    return result;
}

}  // namespace lp
