#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace hoidet {

/// Dense row-major tensor of doubles, rank 1 to 4.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s);
    Tensor(std::vector<int> s, std::vector<double> d);

    static Tensor scalar(double v) { return Tensor({1}, {v}); }
    static size_t numel_of(const std::vector<int>& s);

    size_t numel() const { return data.size(); }
    int rows() const { return shape[0]; }
    int cols() const { return shape[1]; }
    double& at(int i, int j) { return data[static_cast<size_t>(i) * static_cast<size_t>(cols()) + static_cast<size_t>(j)]; }
    double at(int i, int j) const { return data[static_cast<size_t>(i) * static_cast<size_t>(cols()) + static_cast<size_t>(j)]; }
    bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

/// Reverse-mode tape over tensor operations. Every op records the node
/// values it needs for its backward pass; gradients() walks the recorded
/// graph once in reverse. A tape is single-use per forward evaluation and
/// not thread-safe; build one per concurrent evaluation.
class Tape {
public:
    using Id = int;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Leaf node, gradient tracked like any other node.
    Id input(Tensor value);

    const Tensor& value(Id id) const { return nodes_[static_cast<size_t>(id)].value; }
    size_t size() const { return nodes_.size(); }

    Id matmul(Id a, Id b);
    Id transpose(Id a);
    Id add(Id a, Id b);
    Id sub(Id a, Id b);
    Id mul(Id a, Id b);
    Id div(Id a, Id b);
    Id minimum(Id a, Id b);
    Id maximum(Id a, Id b);
    Id add_rowvec(Id a, Id v);  // [m,n] + [n], broadcast over rows
    Id scale(Id a, double c);
    Id add_const(Id a, double c);
    Id mul_const(Id a, const Tensor& mask);  // elementwise, mask not a node
    Id abs(Id a);
    Id relu(Id a);
    Id sigmoid(Id a);
    Id log(Id a);
    Id powc(Id a, double c);  // elementwise a^c, a > 0
    Id clamp(Id a, double lo, double hi);
    Id softmax_rows(Id a);
    Id layer_norm_rows(Id x, Id gamma, Id beta, double eps);
    Id sum_all(Id a);  // -> [1]
    Id slice_cols(Id a, int c0, int c1);
    Id concat_cols(const std::vector<Id>& parts);
    Id gather_rows(Id a, std::vector<int> rows);
    Id reshape(Id a, std::vector<int> new_shape);
    /// input [C,H,W], weight [OC,C,kh,kw], bias [OC] -> [OC,OH,OW]
    Id conv2d(Id input, Id weight, Id bias, int stride, int pad);

    Id add_all(const std::vector<Id>& xs);

    /// Gradients of the scalar node `root` with respect to the given nodes.
    std::vector<Tensor> gradients(Id root, const std::vector<Id>& wrt) const;

private:
    using BackwardFn =
        std::function<void(const Tape&, const Tensor& gout, std::vector<Tensor>& grads)>;

    struct Node {
        Tensor value;
        BackwardFn backward;
    };

    Id push(Tensor value, BackwardFn backward);
    static Tensor& grad_of(std::vector<Tensor>& grads, Id id, const std::vector<int>& shape);

    std::vector<Node> nodes_;
};

}  // namespace hoidet
