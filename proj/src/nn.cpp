#include "treenav/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace treenav::nn {

Mat& Graph::grad_of(Var v) {
    Node& n = node(v);
    if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    return n.grad;
}

void Graph::accumulate(Var v, const Mat& g) { grad_of(v) += g; }

Var Graph::emplace(Mat value, std::function<void(Graph&, Node&)> back) {
    nodes_.push_back(Node{std::move(value), Mat(), std::move(back)});
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Graph::input(Mat value) { return emplace(std::move(value), nullptr); }

Var Graph::param(Param& p) {
    Param* pp = &p;
    return emplace(p.value, [pp](Graph&, Node& self) { pp->grad += self.grad; });
}

Var Graph::gather(Param& p, std::vector<int> cols) {
    Param* pp = &p;
    Mat out(p.value.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j)
        out.col(static_cast<Eigen::Index>(j)) = p.value.col(cols[j]);
    return emplace(std::move(out), [pp, cols = std::move(cols)](Graph&, Node& self) {
        for (std::size_t j = 0; j < cols.size(); ++j)
            pp->grad.col(cols[j]) += self.grad.col(static_cast<Eigen::Index>(j));
    });
}

Var Graph::gather_cols(Var src, std::vector<int> cols) {
    const Mat& s = value(src);
    Mat out(s.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j)
        out.col(static_cast<Eigen::Index>(j)) = s.col(cols[j]);
    return emplace(std::move(out), [src, cols = std::move(cols)](Graph& g, Node& self) {
        Mat& ds = g.grad_of(src);
        for (std::size_t j = 0; j < cols.size(); ++j)
            ds.col(cols[j]) += self.grad.col(static_cast<Eigen::Index>(j));
    });
}

Var Graph::char_windows(Param& table, Eigen::MatrixXi idx) {
    Param* pp = &table;
    const Eigen::Index d = table.value.rows();
    const Eigen::Index w = idx.rows(), n = idx.cols();
    Mat out = Mat::Zero(w * d, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index k = 0; k < w; ++k)
            if (idx(k, j) >= 0) out.block(k * d, j, d, 1) = table.value.col(idx(k, j));
    return emplace(std::move(out), [pp, idx = std::move(idx), d](Graph&, Node& self) {
        for (Eigen::Index j = 0; j < idx.cols(); ++j)
            for (Eigen::Index k = 0; k < idx.rows(); ++k)
                if (idx(k, j) >= 0)
                    pp->grad.col(idx(k, j)) += self.grad.block(k * d, j, d, 1);
    });
}

Var Graph::affine(Param& w, Var x, Param& b) {
    Param *pw = &w, *pb = &b;
    Mat out = (w.value * value(x)).colwise() + Eigen::VectorXd(b.value.col(0));
    return emplace(std::move(out), [pw, pb, x](Graph& g, Node& self) {
        pw->grad.noalias() += self.grad * g.value(x).transpose();
        pb->grad.col(0) += self.grad.rowwise().sum();
        g.grad_of(x).noalias() += pw->value.transpose() * self.grad;
    });
}

Var Graph::matmul(Param& w, Var x) {
    Param* pw = &w;
    return emplace(w.value * value(x), [pw, x](Graph& g, Node& self) {
        pw->grad.noalias() += self.grad * g.value(x).transpose();
        g.grad_of(x).noalias() += pw->value.transpose() * self.grad;
    });
}

Var Graph::add(Var a, Var b) {
    return emplace(value(a) + value(b), [a, b](Graph& g, Node& self) {
        g.accumulate(a, self.grad);
        g.accumulate(b, self.grad);
    });
}

Var Graph::sub(Var a, Var b) {
    return emplace(value(a) - value(b), [a, b](Graph& g, Node& self) {
        g.accumulate(a, self.grad);
        g.grad_of(b) -= self.grad;
    });
}

Var Graph::mul(Var a, Var b) {
    return emplace(value(a).cwiseProduct(value(b)), [a, b](Graph& g, Node& self) {
        g.grad_of(a) += self.grad.cwiseProduct(g.value(b));
        g.grad_of(b) += self.grad.cwiseProduct(g.value(a));
    });
}

Var Graph::scale(Var a, double k) {
    return emplace(value(a) * k, [a, k](Graph& g, Node& self) {
        g.grad_of(a) += self.grad * k;
    });
}

Var Graph::tanh_(Var a) {
    Mat out = value(a).array().tanh().matrix();
    return emplace(std::move(out), [a](Graph& g, Node& self) {
        g.grad_of(a).array() += self.grad.array() * (1.0 - self.value.array().square());
    });
}

Var Graph::sigmoid_(Var a) {
    Mat out = (1.0 / (1.0 + (-value(a).array()).exp())).matrix();
    return emplace(std::move(out), [a](Graph& g, Node& self) {
        g.grad_of(a).array() += self.grad.array() * self.value.array() * (1.0 - self.value.array());
    });
}

Var Graph::concat_rows(const std::vector<Var>& parts) {
    Eigen::Index rows = 0;
    const Eigen::Index cols = value(parts.front()).cols();
    for (Var p : parts) rows += value(p).rows();
    Mat out(rows, cols);
    Eigen::Index r = 0;
    for (Var p : parts) {
        out.middleRows(r, value(p).rows()) = value(p);
        r += value(p).rows();
    }
    return emplace(std::move(out), [parts](Graph& g, Node& self) {
        Eigen::Index r = 0;
        for (Var p : parts) {
            Eigen::Index pr = g.value(p).rows();
            g.grad_of(p) += self.grad.middleRows(r, pr);
            r += pr;
        }
    });
}

Var Graph::slice_rows(Var a, int row0, int rows) {
    return emplace(value(a).middleRows(row0, rows), [a, row0, rows](Graph& g, Node& self) {
        g.grad_of(a).middleRows(row0, rows) += self.grad;
    });
}

Var Graph::segment_max(Var x, std::vector<std::pair<int, int>> segments) {
    const Mat& v = value(x);
    Mat out(v.rows(), static_cast<Eigen::Index>(segments.size()));
    Eigen::MatrixXi arg(v.rows(), static_cast<Eigen::Index>(segments.size()));
    for (std::size_t s = 0; s < segments.size(); ++s) {
        auto [c0, c1] = segments[s];
        for (Eigen::Index i = 0; i < v.rows(); ++i) {
            double best = v(i, c0);
            int bestc = c0;
            for (int c = c0 + 1; c < c1; ++c)
                if (v(i, c) > best) { best = v(i, c); bestc = c; }
            out(i, static_cast<Eigen::Index>(s)) = best;
            arg(i, static_cast<Eigen::Index>(s)) = bestc;
        }
    }
    return emplace(std::move(out), [x, arg = std::move(arg)](Graph& g, Node& self) {
        Mat& dx = g.grad_of(x);
        for (Eigen::Index s = 0; s < arg.cols(); ++s)
            for (Eigen::Index i = 0; i < arg.rows(); ++i)
                dx(i, arg(i, s)) += self.grad(i, s);
    });
}

Var Graph::softmax_cols(Var logits, Mat mask) {
    const Mat& a = value(logits);
    Mat p = Mat::Zero(a.rows(), a.cols());
    for (Eigen::Index b = 0; b < a.cols(); ++b) {
        double mx = -1e300;
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            if (mask(i, b) > 0.5) mx = std::max(mx, a(i, b));
        if (mx == -1e300) continue;
        double z = 0;
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            if (mask(i, b) > 0.5) z += std::exp(a(i, b) - mx);
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            if (mask(i, b) > 0.5) p(i, b) = std::exp(a(i, b) - mx) / z;
    }
    return emplace(std::move(p), [logits](Graph& g, Node& self) {
        const Mat& p = self.value;
        Mat dl(p.rows(), p.cols());
        for (Eigen::Index b = 0; b < p.cols(); ++b) {
            double s = p.col(b).dot(self.grad.col(b));
            dl.col(b) = (p.col(b).array() * (self.grad.col(b).array() - s)).matrix();
        }
        g.grad_of(logits) += dl;
    });
}

Var Graph::weighted_sum(const std::vector<Var>& slices, Var alpha) {
    const Mat& al = value(alpha);
    Mat out = Mat::Zero(value(slices.front()).rows(), al.cols());
    for (std::size_t t = 0; t < slices.size(); ++t)
        out += (value(slices[t]).array().rowwise() * al.row(static_cast<Eigen::Index>(t)).array())
                   .matrix();
    return emplace(std::move(out), [slices, alpha](Graph& g, Node& self) {
        const Mat& al = g.value(alpha);
        Mat& da = g.grad_of(alpha);
        for (std::size_t t = 0; t < slices.size(); ++t) {
            Eigen::Index ti = static_cast<Eigen::Index>(t);
            g.grad_of(slices[t]).array() +=
                self.grad.array().rowwise() * al.row(ti).array();
            da.row(ti) += (self.grad.cwiseProduct(g.value(slices[t]))).colwise().sum();
        }
    });
}

Var Graph::lerp_rows(Var a, Var b, Eigen::RowVectorXd mask) {
    const Mat& va = value(a);
    const Mat& vb = value(b);
    Mat out = vb;
    for (Eigen::Index c = 0; c < out.cols(); ++c)
        if (mask(c) > 0.5) out.col(c) = va.col(c);
    return emplace(std::move(out), [a, b, mask = std::move(mask)](Graph& g, Node& self) {
        Mat& da = g.grad_of(a);
        Mat& db = g.grad_of(b);
        for (Eigen::Index c = 0; c < self.grad.cols(); ++c) {
            if (mask(c) > 0.5)
                da.col(c) += self.grad.col(c);
            else
                db.col(c) += self.grad.col(c);
        }
    });
}

Var Graph::mean_rows(Var a) {
    const Mat& v = value(a);
    Mat out = v.colwise().mean().matrix();
    double inv = 1.0 / static_cast<double>(v.rows());
    return emplace(std::move(out), [a, inv](Graph& g, Node& self) {
        g.grad_of(a).array() += (self.grad.array() * inv).replicate(g.value(a).rows(), 1);
    });
}

Var Graph::add_rowbcast(Var a, Var row) {
    Mat out = value(a);
    out.array().rowwise() += Eigen::RowVectorXd(value(row).row(0)).array();
    return emplace(std::move(out), [a, row](Graph& g, Node& self) {
        g.accumulate(a, self.grad);
        g.grad_of(row).row(0) += self.grad.colwise().sum();
    });
}

Var Graph::sub_rowbcast(Var a, Var row) {
    Mat out = value(a);
    out.array().rowwise() -= Eigen::RowVectorXd(value(row).row(0)).array();
    return emplace(std::move(out), [a, row](Graph& g, Node& self) {
        g.accumulate(a, self.grad);
        g.grad_of(row).row(0) -= self.grad.colwise().sum();
    });
}

Var Graph::select_rows(Var a, std::vector<int> row_per_col) {
    const Mat& v = value(a);
    Mat out(1, v.cols());
    for (Eigen::Index c = 0; c < v.cols(); ++c) out(0, c) = v(row_per_col[static_cast<std::size_t>(c)], c);
    return emplace(std::move(out), [a, rows = std::move(row_per_col)](Graph& g, Node& self) {
        Mat& da = g.grad_of(a);
        for (Eigen::Index c = 0; c < self.grad.cols(); ++c)
            da(rows[static_cast<std::size_t>(c)], c) += self.grad(0, c);
    });
}

Var Graph::dropout(Var a, double rate) {
    if (!training_ || rate <= 0.0) return a;
    if (dropout_rng_ == nullptr) throw std::logic_error("dropout: training graph has no rng");
    const Mat& v = value(a);
    Mat mask(v.rows(), v.cols());
    double keep = 1.0 - rate;
    for (Eigen::Index c = 0; c < v.cols(); ++c)
        for (Eigen::Index r = 0; r < v.rows(); ++r)
            mask(r, c) = dropout_rng_->bernoulli(keep) ? 1.0 / keep : 0.0;
    Mat out = v.cwiseProduct(mask);
    return emplace(std::move(out), [a, mask = std::move(mask)](Graph& g, Node& self) {
        g.grad_of(a) += self.grad.cwiseProduct(mask);
    });
}

Var Graph::scaled_sum(Var a, double k) {
    Mat out(1, 1);
    out(0, 0) = value(a).sum() * k;
    return emplace(std::move(out), [a, k](Graph& g, Node& self) {
        g.grad_of(a).array() += self.grad(0, 0) * k;
    });
}

void Graph::backward(Var loss) {
    Node& ln = node(loss);
    if (ln.value.rows() != 1 || ln.value.cols() != 1)
        throw std::logic_error("backward: loss must be 1x1");
    grad_of(loss)(0, 0) = 1.0;
    for (int i = loss.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.grad.size() != 0 && n.back) n.back(*this, n);
    }
}

double clip_global_norm(const std::vector<Param*>& params, double max_norm) {
    double sq = 0.0;
    for (const Param* p : params) sq += p->grad.squaredNorm();
    double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        double s = max_norm / norm;
        for (Param* p : params) p->grad *= s;
    }
    return norm;
}

void RmsProp::step(const std::vector<Param*>& params) {
    if (cache_.empty())
        for (const Param* p : params) cache_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    if (cache_.size() != params.size())
        throw std::logic_error("rmsprop: parameter list changed size");
    for (std::size_t i = 0; i < params.size(); ++i) {
        Param& p = *params[i];
        if (!p.grad.allFinite()) throw std::runtime_error("rmsprop: non-finite gradient in " + p.name);
        cache_[i] = decay_ * cache_[i] + (1.0 - decay_) * p.grad.cwiseProduct(p.grad);
        p.value.array() -= lr_ * p.grad.array() / (cache_[i].array().sqrt() + eps_);
        p.grad.setZero();
    }
}

}  // namespace treenav::nn
