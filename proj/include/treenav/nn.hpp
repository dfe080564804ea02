#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "treenav/rng.hpp"

namespace treenav::nn {

using Mat = Eigen::MatrixXd;

/// Persistent parameter tensor. Lives outside any tape; tapes route gradient
/// contributions into `grad`, the optimizer consumes and clears it.
struct Param {
    std::string name;
    Mat value;
    Mat grad;

    Param() = default;
    Param(std::string n, int rows, int cols) : name(std::move(n)), value(Mat::Zero(rows, cols)), grad(Mat::Zero(rows, cols)) {}

    void zero_grad() { grad.setZero(); }
};

/// Handle to a tape node.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

/// Reverse-mode tape over Eigen matrices. Build a forward expression, call
/// backward(loss) once; gradients for Params accumulate in Param::grad.
/// Column dimension is the batch throughout.
class Graph {
  public:
    explicit Graph(bool training = false, Rng* dropout_rng = nullptr)
        : training_(training), dropout_rng_(dropout_rng) {}

    // Leaves.
    Var input(Mat value);                                   // constant, no grad
    Var param(Param& p);                                    // whole tensor
    Var gather(Param& p, std::vector<int> cols);            // embedding lookup
    Var gather_cols(Var src, std::vector<int> cols);        // differentiable gather
    /// Stacked convolution windows over an embedding table: output column j
    /// is [table.col(idx(0,j)) ; ... ; table.col(idx(w-1,j))]. Index -1
    /// denotes zero padding.
    Var char_windows(Param& table, Eigen::MatrixXi idx);

    // Linear algebra.
    Var affine(Param& w, Var x, Param& b);                  // w*x + b (b broadcast)
    Var matmul(Param& w, Var x);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);                                  // elementwise
    Var scale(Var a, double k);

    // Nonlinearities.
    Var tanh_(Var a);
    Var sigmoid_(Var a);

    // Shape plumbing.
    Var concat_rows(const std::vector<Var>& parts);
    Var slice_rows(Var a, int row0, int rows);

    /// Per-segment max over columns: out column s = elementwise max of x's
    /// columns [seg[s].first, seg[s].second). Backward routes to argmax.
    Var segment_max(Var x, std::vector<std::pair<int, int>> segments);

    /// Column-wise masked softmax (mask 1 = keep). Fully-masked columns
    /// yield zeros.
    Var softmax_cols(Var logits, Mat mask);

    /// sum_t slices[t] .* alpha.row(t): attention pooling over time.
    Var weighted_sum(const std::vector<Var>& slices, Var alpha);

    /// mask .* a + (1-mask) .* b with a 1xB row mask broadcast over rows.
    Var lerp_rows(Var a, Var b, Eigen::RowVectorXd mask);

    Var mean_rows(Var a);                                   // 1xB column means
    Var add_rowbcast(Var a, Var row);                       // a + 1*row
    Var sub_rowbcast(Var a, Var row);                       // a - 1*row
    Var select_rows(Var a, std::vector<int> row_per_col);   // 1xB picks

    /// Inverted dropout; identity when not training or rate == 0.
    Var dropout(Var a, double rate);

    /// (sum of all entries) * k, as a 1x1 node.
    Var scaled_sum(Var a, double k);

    const Mat& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }

    /// Reverse pass from a 1x1 loss node; seeds with 1.
    void backward(Var loss);

    bool training() const { return training_; }
    std::size_t size() const { return nodes_.size(); }

  private:
    struct Node {
        Mat value;
        Mat grad;
        std::function<void(Graph&, Node&)> back;  // null for constants
    };

    Node& node(Var v) { return nodes_[static_cast<std::size_t>(v.id)]; }
    Mat& grad_of(Var v);
    void accumulate(Var v, const Mat& g);
    Var emplace(Mat value, std::function<void(Graph&, Node&)> back);

    std::vector<Node> nodes_;
    bool training_ = false;
    Rng* dropout_rng_ = nullptr;

    friend struct NodeAccess;
};

/// Global-norm gradient clipping: rescale all grads so the joint L2 norm is
/// at most `max_norm`. Returns the pre-clip norm.
double clip_global_norm(const std::vector<Param*>& params, double max_norm);

/// RMSprop with per-tensor accumulators.
class RmsProp {
  public:
    RmsProp(double lr, double decay = 0.95, double eps = 1e-8)
        : lr_(lr), decay_(decay), eps_(eps) {}

    /// Applies grads (after clipping) and clears them. Throws on non-finite
    /// gradients.
    void step(const std::vector<Param*>& params);

    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }
    double decay() const { return decay_; }
    double eps() const { return eps_; }

    /// Accumulator access for checkpointing, keyed like the param list.
    std::vector<Mat>& cache() { return cache_; }
    const std::vector<Mat>& cache() const { return cache_; }

  private:
    double lr_, decay_, eps_;
    std::vector<Mat> cache_;
};

}  // namespace treenav::nn
