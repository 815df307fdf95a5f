#include "ablab/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ablab {

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Tensor value) { return record(std::move(value), false, nullptr); }

Var Tape::leaf(Tensor value, bool requires_grad) { return record(std::move(value), requires_grad, nullptr); }

Var Tape::param(const std::string& name) {
    if (!source_) throw std::logic_error("tape has no bound parameter set");
    if (auto it = param_nodes_.find(name); it != param_nodes_.end()) return Var(this, it->second);
    Var v = record(source_->value(name), sink_ && sink_->is_trainable(name), nullptr);
    auto [it, _] = param_nodes_.emplace(name, v.id());
    nodes_[v.id()].param_name = &it->first;
    return v;
}

Var Tape::record(Tensor value, bool requires_grad, Backward backward) {
    Node node;
    node.value = std::move(value);
    node.requires_grad = requires_grad;
    if (requires_grad) node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
}

Tensor Tape::grad(Var v) const {
    const Node& n = nodes_.at(v.id());
    if (n.has_grad) return n.grad;
    return Tensor(n.value.shape(), 0.0);
}

Tensor& Tape::grad_buffer(std::size_t id) {
    Node& n = nodes_[id];
    if (!n.has_grad) {
        n.grad = Tensor(n.value.shape(), 0.0);
        n.has_grad = true;
    }
    return n.grad;
}

void Tape::backward(Var loss) {
    if (&loss.tape() != this) throw std::invalid_argument("backward: variable belongs to another tape");
    if (loss.value().size() != 1) throw std::invalid_argument("backward: loss must be a scalar, got " + shape_str(loss.shape()));
    if (!nodes_[loss.id()].requires_grad) return;
    grad_buffer(loss.id())[0] = 1.0;
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.has_grad || !n.requires_grad) continue;
        if (n.backward) n.backward(*this, i);
        if (n.param_name && sink_) {
            Tensor& g = sink_->grad(*n.param_name);
            for (std::size_t k = 0; k < g.size(); ++k) g[k] += n.grad[k];
        }
    }
}

namespace {

void same_tape(Var a, Var b, const char* op) {
    if (&a.tape() != &b.tape()) throw std::invalid_argument(std::string(op) + ": operands live on different tapes");
}

void require_matrix(const Tensor& t, const char* op, const char* what) {
    if (t.rank() != 2)
        throw std::invalid_argument(std::string(op) + ": " + what + " must be a matrix, got " + shape_str(t.shape()));
}

std::string mismatch(const char* op, const Tensor& a, const Tensor& b) {
    return std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape());
}

// out[n×m] += a[n×k]·b[k×m]
void gemm_nn(const double* a, const double* b, double* out, std::size_t n, std::size_t k, std::size_t m) {
    for (std::size_t i = 0; i < n; ++i) {
        double* o = out + i * m;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a[i * k + p];
            const double* br = b + p * m;
            for (std::size_t j = 0; j < m; ++j) o[j] += av * br[j];
        }
    }
}

// out[n×m] += a[n×k]·bᵀ for b[m×k]
void gemm_nt(const double* a, const double* b, double* out, std::size_t n, std::size_t k, std::size_t m) {
    for (std::size_t i = 0; i < n; ++i) {
        const double* ar = a + i * k;
        for (std::size_t j = 0; j < m; ++j) {
            const double* br = b + j * k;
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += ar[p] * br[p];
            out[i * m + j] += s;
        }
    }
}

// out[k×m] += aᵀ·b for a[n×k], b[n×m]
void gemm_tn(const double* a, const double* b, double* out, std::size_t n, std::size_t k, std::size_t m) {
    for (std::size_t i = 0; i < n; ++i) {
        const double* br = b + i * m;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a[i * k + p];
            double* o = out + p * m;
            for (std::size_t j = 0; j < m; ++j) o[j] += av * br[j];
        }
    }
}

}  // namespace

Var affine(Var x, Var w, Var b) {
    same_tape(x, w, "affine");
    same_tape(x, b, "affine");
    Tape& t = x.tape();
    const Tensor& X = x.value();
    const Tensor& W = w.value();
    const Tensor& B = b.value();
    require_matrix(X, "affine", "x");
    require_matrix(W, "affine", "W");
    if (X.cols() != W.rows()) throw std::invalid_argument(mismatch("affine", X, W));
    if (B.size() != W.cols()) throw std::invalid_argument(mismatch("affine", W, B));
    const std::size_t n = X.rows(), in = X.cols(), out = W.cols();
    Tensor y({n, out}, 0.0);
    gemm_nn(X.data().data(), W.data().data(), y.data().data(), n, in, out);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < out; ++j) y[i * out + j] += B[j];
    const bool rg = t.wants_grad(x.id()) || t.wants_grad(w.id()) || t.wants_grad(b.id());
    const auto xi = x.id(), wi = w.id(), bi = b.id();
    return t.record(std::move(y), rg, [xi, wi, bi, n, in, out](Tape& t, std::size_t self) {
        const Tensor& g = t.node_grad(self);
        if (t.wants_grad(xi))
            gemm_nt(g.data().data(), t.value(wi).data().data(), t.grad_buffer(xi).data().data(), n, out, in);
        if (t.wants_grad(wi))
            gemm_tn(t.value(xi).data().data(), g.data().data(), t.grad_buffer(wi).data().data(), n, in, out);
        if (t.wants_grad(bi)) {
            Tensor& gb = t.grad_buffer(bi);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < out; ++j) gb[j] += g[i * out + j];
        }
    });
}

Var matmul(Var a, Var b) {
    same_tape(a, b, "matmul");
    Tape& t = a.tape();
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    require_matrix(A, "matmul", "lhs");
    require_matrix(B, "matmul", "rhs");
    if (A.cols() != B.rows()) throw std::invalid_argument(mismatch("matmul", A, B));
    const std::size_t n = A.rows(), k = A.cols(), m = B.cols();
    Tensor y({n, m}, 0.0);
    gemm_nn(A.data().data(), B.data().data(), y.data().data(), n, k, m);
    const bool rg = t.wants_grad(a.id()) || t.wants_grad(b.id());
    const auto ai = a.id(), bi = b.id();
    return t.record(std::move(y), rg, [ai, bi, n, k, m](Tape& t, std::size_t self) {
        const Tensor& g = t.node_grad(self);
        if (t.wants_grad(ai))
            gemm_nt(g.data().data(), t.value(bi).data().data(), t.grad_buffer(ai).data().data(), n, m, k);
        if (t.wants_grad(bi))
            gemm_tn(t.value(ai).data().data(), g.data().data(), t.grad_buffer(bi).data().data(), n, k, m);
    });
}

Var matmul_nt(Var a, Var b) {
    same_tape(a, b, "matmul_nt");
    Tape& t = a.tape();
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    require_matrix(A, "matmul_nt", "lhs");
    require_matrix(B, "matmul_nt", "rhs");
    if (A.cols() != B.cols()) throw std::invalid_argument(mismatch("matmul_nt", A, B));
    const std::size_t n = A.rows(), k = A.cols(), m = B.rows();
    Tensor y({n, m}, 0.0);
    gemm_nt(A.data().data(), B.data().data(), y.data().data(), n, k, m);
    const bool rg = t.wants_grad(a.id()) || t.wants_grad(b.id());
    const auto ai = a.id(), bi = b.id();
    return t.record(std::move(y), rg, [ai, bi, n, k, m](Tape& t, std::size_t self) {
        const Tensor& g = t.node_grad(self);
        // dA = g·B, dB = gᵀ·A
        if (t.wants_grad(ai))
            gemm_nn(g.data().data(), t.value(bi).data().data(), t.grad_buffer(ai).data().data(), n, m, k);
        if (t.wants_grad(bi))
            gemm_tn(g.data().data(), t.value(ai).data().data(), t.grad_buffer(bi).data().data(), n, m, k);
    });
}

Var tanh(Var x) {
    Tape& t = x.tape();
    Tensor y = x.value();
    for (auto& v : y.data()) v = std::tanh(v);
    const auto xi = x.id();
    return t.record(std::move(y), t.wants_grad(xi), [xi](Tape& t, std::size_t self) {
        const Tensor& g = t.node_grad(self);
        const Tensor& y = t.value(self);
        Tensor& gx = t.grad_buffer(xi);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (1.0 - y[i] * y[i]);
    });
}

Var softmax(Var x) {
    Tape& t = x.tape();
    const Tensor& X = x.value();
    const std::size_t rows = X.rows(), k = X.cols();
    if (X.rank() > 2) throw std::invalid_argument("softmax: expects a vector or matrix, got " + shape_str(X.shape()));
    Tensor y = X;
    for (std::size_t r = 0; r < rows; ++r) {
        auto row = y.row(r);
        const double mx = *std::max_element(row.begin(), row.end());
        double s = 0.0;
        for (auto& v : row) {
            v = std::exp(v - mx);
            s += v;
        }
        for (auto& v : row) v /= s;
    }
    const auto xi = x.id();
    return t.record(std::move(y), t.wants_grad(xi), [xi, rows, k](Tape& t, std::size_t self) {
        const Tensor& g = t.node_grad(self);
        const Tensor& y = t.value(self);
        Tensor& gx = t.grad_buffer(xi);
        for (std::size_t r = 0; r < rows; ++r) {
            double dot = 0.0;
            for (std::size_t j = 0; j < k; ++j) dot += g[r * k + j] * y[r * k + j];
            for (std::size_t j = 0; j < k; ++j) gx[r * k + j] += y[r * k + j] * (g[r * k + j] - dot);
        }
    });
}

Var concat_cols(Var a, Var b) {
    same_tape(a, b, "concat_cols");
    Tape& t = a.tape();
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    require_matrix(A, "concat_cols", "lhs");
    require_matrix(B, "concat_cols", "rhs");
    if (A.rows() != B.rows()) throw std::invalid_argument(mismatch("concat_cols", A, B));
    const std::size_t n = A.rows(), p = A.cols(), q = B.cols();
    Tensor y({n, p + q});
    for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(A.row(i).begin(), p, y.row(i).begin());
        std::copy_n(B.row(i).begin(), q, y.row(i).begin() + static_cast<std::ptrdiff_t>(p));
    }
    const bool rg = t.wants_grad(a.id()) || t.wants_grad(b.id());
    const auto ai = a.id(), bi = b.id();
    return t.record(std::move(y), rg, [ai, bi, n, p, q](Tape& t, std::size_t self) {
        const Tensor& g = t.node_grad(self);
        if (t.wants_grad(ai)) {
            Tensor& ga = t.grad_buffer(ai);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < p; ++j) ga[i * p + j] += g[i * (p + q) + j];
        }
        if (t.wants_grad(bi)) {
            Tensor& gb = t.grad_buffer(bi);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < q; ++j) gb[i * q + j] += g[i * (p + q) + p + j];
        }
    });
}

Var gather_rows(Var table, std::span<const std::size_t> ids) {
    Tape& t = table.tape();
    const Tensor& T = table.value();
    require_matrix(T, "gather_rows", "table");
    if (ids.empty()) throw std::invalid_argument("gather_rows: empty index list");
    const std::size_t e = T.cols();
    for (auto id : ids)
        if (id >= T.rows())
            throw std::out_of_range("gather_rows: row " + std::to_string(id) + " outside table " + shape_str(T.shape()));
    Tensor y({ids.size(), e});
    for (std::size_t r = 0; r < ids.size(); ++r) std::copy_n(T.row(ids[r]).begin(), e, y.row(r).begin());
    std::vector<std::size_t> idv(ids.begin(), ids.end());
    const auto ti = table.id();
    return t.record(std::move(y), t.wants_grad(ti), [ti, idv = std::move(idv), e](Tape& t, std::size_t self) {
        const Tensor& g = t.node_grad(self);
        Tensor& gt = t.grad_buffer(ti);
        for (std::size_t r = 0; r < idv.size(); ++r)
            for (std::size_t j = 0; j < e; ++j) gt[idv[r] * e + j] += g[r * e + j];
    });
}

static Var add_scaled(Var a, Var b, double sb, const char* op) {
    same_tape(a, b, op);
    Tape& t = a.tape();
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    if (A.shape() != B.shape()) throw std::invalid_argument(mismatch(op, A, B));
    Tensor y = A;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += sb * B[i];
    const bool rg = t.wants_grad(a.id()) || t.wants_grad(b.id());
    const auto ai = a.id(), bi = b.id();
    return t.record(std::move(y), rg, [ai, bi, sb](Tape& t, std::size_t self) {
        const Tensor& g = t.node_grad(self);
        if (t.wants_grad(ai)) {
            Tensor& ga = t.grad_buffer(ai);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (t.wants_grad(bi)) {
            Tensor& gb = t.grad_buffer(bi);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += sb * g[i];
        }
    });
}

Var add(Var a, Var b) { return add_scaled(a, b, 1.0, "add"); }

Var sub(Var a, Var b) { return add_scaled(a, b, -1.0, "sub"); }

Var scale(Var a, double c) {
    Tape& t = a.tape();
    Tensor y = a.value();
    for (auto& v : y.data()) v *= c;
    const auto ai = a.id();
    return t.record(std::move(y), t.wants_grad(ai), [ai, c](Tape& t, std::size_t self) {
        const Tensor& g = t.node_grad(self);
        Tensor& ga = t.grad_buffer(ai);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
    });
}

Var sum_squares(Var a) {
    Tape& t = a.tape();
    double s = 0.0;
    for (double v : a.value().data()) s += v * v;
    const auto ai = a.id();
    return t.record(Tensor::scalar(s), t.wants_grad(ai), [ai](Tape& t, std::size_t self) {
        const double g = t.node_grad(self)[0];
        const Tensor& A = t.value(ai);
        Tensor& ga = t.grad_buffer(ai);
        for (std::size_t i = 0; i < A.size(); ++i) ga[i] += 2.0 * g * A[i];
    });
}

Var weighted_mse(Var pred, Var target, std::span<const double> row_weights) {
    same_tape(pred, target, "weighted_mse");
    Tape& t = pred.tape();
    const Tensor& P = pred.value();
    const Tensor& Y = target.value();
    if (P.shape() != Y.shape()) throw std::invalid_argument(mismatch("weighted_mse", P, Y));
    const std::size_t n = P.rows(), d = P.cols();
    if (row_weights.size() != n)
        throw std::invalid_argument("weighted_mse: " + std::to_string(row_weights.size()) + " weights for " +
                                    std::to_string(n) + " rows");
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double r = P[i * d + j] - Y[i * d + j];
            s += r * r;
        }
        total += row_weights[i] * s / static_cast<double>(d);
    }
    total /= static_cast<double>(n);
    std::vector<double> w(row_weights.begin(), row_weights.end());
    const bool rg = t.wants_grad(pred.id()) || t.wants_grad(target.id());
    const auto pi = pred.id(), yi = target.id();
    return t.record(Tensor::scalar(total), rg, [pi, yi, n, d, w = std::move(w)](Tape& t, std::size_t self) {
        const double g = t.node_grad(self)[0];
        const Tensor& P = t.value(pi);
        const Tensor& Y = t.value(yi);
        const double c = 2.0 * g / static_cast<double>(n * d);
        if (t.wants_grad(pi)) {
            Tensor& gp = t.grad_buffer(pi);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < d; ++j) gp[i * d + j] += c * w[i] * (P[i * d + j] - Y[i * d + j]);
        }
        if (t.wants_grad(yi)) {
            Tensor& gy = t.grad_buffer(yi);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < d; ++j) gy[i * d + j] -= c * w[i] * (P[i * d + j] - Y[i * d + j]);
        }
    });
}

Var stop_gradient(Var a) { return a.tape().constant(a.value()); }

}  // namespace ablab
