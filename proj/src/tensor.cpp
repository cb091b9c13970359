#include "unts/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace unts {

namespace {

std::string shape_str(const Tensor& t) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < t.shape.size(); ++i) {
        if (i) os << ",";
        os << t.shape[i];
    }
    os << "]";
    return os.str();
}

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
    throw ShapeError(std::string("shape mismatch in node '") + op + "': " +
                     shape_str(a) + " vs " + shape_str(b));
}

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const char* why) {
    throw ShapeError(std::string("shape mismatch in node '") + op + "': " +
                     shape_str(a) + " (" + why + ")");
}

int checked_numel(const std::vector<int>& shape) {
    long long n = 1;
    for (int d : shape) {
        if (d <= 0) throw ShapeError("tensor dimensions must be positive");
        n *= d;
    }
    return static_cast<int>(n);
}

} // namespace

Tensor::Tensor(std::vector<int> s, double fill)
    : shape(std::move(s)), values(static_cast<std::size_t>(checked_numel(shape)), fill) {}

Tensor Tensor::scalar(double x) {
    Tensor t;
    t.values = {x};
    return t; // rank 0
}

Tensor Tensor::vec(std::vector<double> v) {
    Tensor t;
    t.shape = {static_cast<int>(v.size())};
    t.values = std::move(v);
    return t;
}

Tensor Tensor::mat(int rows, int cols, std::vector<double> v) {
    if (static_cast<int>(v.size()) != rows * cols)
        throw ShapeError("mat: element count does not match rows*cols");
    Tensor t;
    t.shape = {rows, cols};
    t.values = std::move(v);
    return t;
}

Tensor Tensor::randn(std::vector<int> s, Rng& rng, double stddev) {
    Tensor t(std::move(s));
    for (auto& x : t.values) x = rng.next_normal() * stddev;
    return t;
}

Value make_parameter(Tensor t, std::string name, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->val = std::move(t);
    n->requires_grad = requires_grad;
    n->name = std::move(name);
    return n;
}

Value Graph::push(const char* op, Tensor val, std::vector<Value> inputs) {
    auto n = std::make_shared<Node>();
    n->val = std::move(val);
    n->op = op;
    n->inputs = std::move(inputs);
    for (const auto& in : n->inputs)
        if (in->requires_grad) n->requires_grad = true;
    tape_.push_back(n);
    return n;
}

Value Graph::leaf(Tensor t, std::string name) {
    auto n = std::make_shared<Node>();
    n->val = std::move(t);
    n->name = std::move(name);
    tape_.push_back(n);
    return n;
}

Value Graph::detach(const Value& v) {
    return leaf(v->val);
}

Value Graph::add(const Value& a, const Value& b) {
    if (a->val.shape != b->val.shape) shape_fail("add", a->val, b->val);
    Value out = push("add", Tensor(a->val.shape), {a, b});
    Node *pa = a.get(), *pb = b.get(), *po = out.get();
    out->forward_fn = [pa, pb, po] {
        const std::size_t n = po->val.values.size();
        for (std::size_t i = 0; i < n; ++i)
            po->val.values[i] = pa->val.values[i] + pb->val.values[i];
    };
    out->backward_fn = [pa, pb, po] {
        const std::size_t n = po->grad.size();
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) pa->grad[i] += po->grad[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) pb->grad[i] += po->grad[i];
        }
    };
    out->forward_fn();
    return out;
}

Value Graph::sub(const Value& a, const Value& b) {
    if (a->val.shape != b->val.shape) shape_fail("sub", a->val, b->val);
    Value out = push("sub", Tensor(a->val.shape), {a, b});
    Node *pa = a.get(), *pb = b.get(), *po = out.get();
    out->forward_fn = [pa, pb, po] {
        const std::size_t n = po->val.values.size();
        for (std::size_t i = 0; i < n; ++i)
            po->val.values[i] = pa->val.values[i] - pb->val.values[i];
    };
    out->backward_fn = [pa, pb, po] {
        const std::size_t n = po->grad.size();
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) pa->grad[i] += po->grad[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) pb->grad[i] -= po->grad[i];
        }
    };
    out->forward_fn();
    return out;
}

Value Graph::mul(const Value& a, const Value& b) {
    if (a->val.shape != b->val.shape) shape_fail("mul", a->val, b->val);
    Value out = push("mul", Tensor(a->val.shape), {a, b});
    Node *pa = a.get(), *pb = b.get(), *po = out.get();
    out->forward_fn = [pa, pb, po] {
        const std::size_t n = po->val.values.size();
        for (std::size_t i = 0; i < n; ++i)
            po->val.values[i] = pa->val.values[i] * pb->val.values[i];
    };
    out->backward_fn = [pa, pb, po] {
        const std::size_t n = po->grad.size();
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) pa->grad[i] += po->grad[i] * pb->val.values[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) pb->grad[i] += po->grad[i] * pa->val.values[i];
        }
    };
    out->forward_fn();
    return out;
}

Value Graph::affine(const Value& x, double mul_c, double add_c) {
    Value out = push("affine", Tensor(x->val.shape), {x});
    Node *px = x.get(), *po = out.get();
    out->forward_fn = [px, po, mul_c, add_c] {
        const std::size_t n = po->val.values.size();
        for (std::size_t i = 0; i < n; ++i)
            po->val.values[i] = mul_c * px->val.values[i] + add_c;
    };
    out->backward_fn = [px, po, mul_c] {
        if (!px->requires_grad) return;
        px->ensure_grad();
        const std::size_t n = po->grad.size();
        for (std::size_t i = 0; i < n; ++i) px->grad[i] += mul_c * po->grad[i];
    };
    out->forward_fn();
    return out;
}

Value Graph::matmul(const Value& a, const Value& b) {
    if (a->val.ndim() != 2 || b->val.ndim() != 2 || a->val.dim(1) != b->val.dim(0))
        shape_fail("matmul", a->val, b->val);
    const int m = a->val.dim(0), k = a->val.dim(1), n = b->val.dim(1);
    Value out = push("matmul", Tensor({m, n}), {a, b});
    Node *pa = a.get(), *pb = b.get(), *po = out.get();
    out->forward_fn = [pa, pb, po, m, k, n] {
        const double* A = pa->val.values.data();
        const double* B = pb->val.values.data();
        double* C = po->val.values.data();
        std::fill(po->val.values.begin(), po->val.values.end(), 0.0);
        for (int i = 0; i < m; ++i)
            for (int p = 0; p < k; ++p) {
                const double aip = A[i * k + p];
                const double* brow = B + p * n;
                double* crow = C + i * n;
                for (int j = 0; j < n; ++j) crow[j] += aip * brow[j];
            }
    };
    out->backward_fn = [pa, pb, po, m, k, n] {
        const double* G = po->grad.data();
        if (pa->requires_grad) {
            pa->ensure_grad();
            const double* B = pb->val.values.data();
            for (int i = 0; i < m; ++i)
                for (int p = 0; p < k; ++p) {
                    double s = 0.0;
                    const double* grow = G + i * n;
                    const double* brow = B + p * n;
                    for (int j = 0; j < n; ++j) s += grow[j] * brow[j];
                    pa->grad[static_cast<std::size_t>(i) * k + p] += s;
                }
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            const double* A = pa->val.values.data();
            for (int p = 0; p < k; ++p)
                for (int i = 0; i < m; ++i) {
                    const double aip = A[i * k + p];
                    const double* grow = G + i * n;
                    double* brow = pb->grad.data() + p * n;
                    for (int j = 0; j < n; ++j) brow[j] += aip * grow[j];
                }
        }
    };
    out->forward_fn();
    return out;
}

Value Graph::matvec(const Value& a, const Value& x) {
    if (a->val.ndim() != 2 || x->val.ndim() != 1 || a->val.dim(1) != x->val.dim(0))
        shape_fail("matvec", a->val, x->val);
    const int m = a->val.dim(0), k = a->val.dim(1);
    Value out = push("matvec", Tensor({m}), {a, x});
    Node *pa = a.get(), *px = x.get(), *po = out.get();
    out->forward_fn = [pa, px, po, m, k] {
        const double* A = pa->val.values.data();
        const double* X = px->val.values.data();
        for (int i = 0; i < m; ++i) {
            double s = 0.0;
            const double* arow = A + static_cast<std::size_t>(i) * k;
            for (int j = 0; j < k; ++j) s += arow[j] * X[j];
            po->val.values[static_cast<std::size_t>(i)] = s;
        }
    };
    out->backward_fn = [pa, px, po, m, k] {
        const double* G = po->grad.data();
        if (pa->requires_grad) {
            pa->ensure_grad();
            const double* X = px->val.values.data();
            for (int i = 0; i < m; ++i) {
                double* arow = pa->grad.data() + static_cast<std::size_t>(i) * k;
                const double gi = G[i];
                for (int j = 0; j < k; ++j) arow[j] += gi * X[j];
            }
        }
        if (px->requires_grad) {
            px->ensure_grad();
            const double* A = pa->val.values.data();
            for (int i = 0; i < m; ++i) {
                const double gi = G[i];
                const double* arow = A + static_cast<std::size_t>(i) * k;
                for (int j = 0; j < k; ++j) px->grad[static_cast<std::size_t>(j)] += gi * arow[j];
            }
        }
    };
    out->forward_fn();
    return out;
}

Value Graph::vecmat(const Value& x, const Value& a) {
    if (x->val.ndim() != 1 || a->val.ndim() != 2 || x->val.dim(0) != a->val.dim(0))
        shape_fail("vecmat", x->val, a->val);
    const int m = a->val.dim(0), k = a->val.dim(1);
    Value out = push("vecmat", Tensor({k}), {x, a});
    Node *px = x.get(), *pa = a.get(), *po = out.get();
    out->forward_fn = [px, pa, po, m, k] {
        const double* X = px->val.values.data();
        const double* A = pa->val.values.data();
        std::fill(po->val.values.begin(), po->val.values.end(), 0.0);
        double* O = po->val.values.data();
        for (int i = 0; i < m; ++i) {
            const double xi = X[i];
            const double* arow = A + static_cast<std::size_t>(i) * k;
            for (int j = 0; j < k; ++j) O[j] += xi * arow[j];
        }
    };
    out->backward_fn = [px, pa, po, m, k] {
        const double* G = po->grad.data();
        if (px->requires_grad) {
            px->ensure_grad();
            const double* A = pa->val.values.data();
            for (int i = 0; i < m; ++i) {
                double s = 0.0;
                const double* arow = A + static_cast<std::size_t>(i) * k;
                for (int j = 0; j < k; ++j) s += arow[j] * G[j];
                px->grad[static_cast<std::size_t>(i)] += s;
            }
        }
        if (pa->requires_grad) {
            pa->ensure_grad();
            const double* X = px->val.values.data();
            for (int i = 0; i < m; ++i) {
                const double xi = X[i];
                double* arow = pa->grad.data() + static_cast<std::size_t>(i) * k;
                for (int j = 0; j < k; ++j) arow[j] += xi * G[j];
            }
        }
    };
    out->forward_fn();
    return out;
}

Value Graph::sigmoid(const Value& x) {
    Value out = push("sigmoid", Tensor(x->val.shape), {x});
    Node *px = x.get(), *po = out.get();
    out->forward_fn = [px, po] {
        const std::size_t n = po->val.values.size();
        for (std::size_t i = 0; i < n; ++i)
            po->val.values[i] = 1.0 / (1.0 + std::exp(-px->val.values[i]));
    };
    out->backward_fn = [px, po] {
        if (!px->requires_grad) return;
        px->ensure_grad();
        const std::size_t n = po->grad.size();
        for (std::size_t i = 0; i < n; ++i) {
            const double y = po->val.values[i];
            px->grad[i] += po->grad[i] * y * (1.0 - y);
        }
    };
    out->forward_fn();
    return out;
}

Value Graph::tanh(const Value& x) {
    Value out = push("tanh", Tensor(x->val.shape), {x});
    Node *px = x.get(), *po = out.get();
    out->forward_fn = [px, po] {
        const std::size_t n = po->val.values.size();
        for (std::size_t i = 0; i < n; ++i)
            po->val.values[i] = std::tanh(px->val.values[i]);
    };
    out->backward_fn = [px, po] {
        if (!px->requires_grad) return;
        px->ensure_grad();
        const std::size_t n = po->grad.size();
        for (std::size_t i = 0; i < n; ++i) {
            const double y = po->val.values[i];
            px->grad[i] += po->grad[i] * (1.0 - y * y);
        }
    };
    out->forward_fn();
    return out;
}

Value Graph::log(const Value& x) {
    Value out = push("log", Tensor(x->val.shape), {x});
    Node *px = x.get(), *po = out.get();
    out->forward_fn = [px, po] {
        const std::size_t n = po->val.values.size();
        for (std::size_t i = 0; i < n; ++i)
            po->val.values[i] = std::log(px->val.values[i]);
    };
    out->backward_fn = [px, po] {
        if (!px->requires_grad) return;
        px->ensure_grad();
        const std::size_t n = po->grad.size();
        for (std::size_t i = 0; i < n; ++i)
            px->grad[i] += po->grad[i] / px->val.values[i];
    };
    out->forward_fn();
    return out;
}

Value Graph::clamp_min(const Value& x, double lo) {
    Value out = push("clamp_min", Tensor(x->val.shape), {x});
    Node *px = x.get(), *po = out.get();
    out->forward_fn = [px, po, lo] {
        const std::size_t n = po->val.values.size();
        for (std::size_t i = 0; i < n; ++i)
            po->val.values[i] = std::max(px->val.values[i], lo);
    };
    out->backward_fn = [px, po, lo] {
        if (!px->requires_grad) return;
        px->ensure_grad();
        const std::size_t n = po->grad.size();
        for (std::size_t i = 0; i < n; ++i)
            if (px->val.values[i] > lo) px->grad[i] += po->grad[i];
    };
    out->forward_fn();
    return out;
}

Value Graph::softmax(const Value& x, int axis) {
    const int nd = x->val.ndim();
    if (nd != 1 && nd != 2) shape_fail("softmax", x->val, "rank must be 1 or 2");
    if (axis < 0) axis += nd;
    if (axis < 0 || axis >= nd) shape_fail("softmax", x->val, "axis out of range");

    // View as `rows` independent softmaxes of length `len` with stride.
    int rows, len, row_stride, el_stride;
    if (nd == 1) {
        rows = 1; len = x->val.dim(0); row_stride = 0; el_stride = 1;
    } else if (axis == 1) {
        rows = x->val.dim(0); len = x->val.dim(1); row_stride = len; el_stride = 1;
    } else {
        rows = x->val.dim(1); len = x->val.dim(0); row_stride = 1; el_stride = x->val.dim(1);
    }

    Value out = push("softmax", Tensor(x->val.shape), {x});
    Node *px = x.get(), *po = out.get();
    out->forward_fn = [px, po, rows, len, row_stride, el_stride] {
        for (int r = 0; r < rows; ++r) {
            const double* in = px->val.values.data() + static_cast<std::size_t>(r) * row_stride;
            double* o = po->val.values.data() + static_cast<std::size_t>(r) * row_stride;
            double mx = in[0];
            for (int i = 1; i < len; ++i) mx = std::max(mx, in[static_cast<std::size_t>(i) * el_stride]);
            double z = 0.0;
            for (int i = 0; i < len; ++i) {
                const double e = std::exp(in[static_cast<std::size_t>(i) * el_stride] - mx);
                o[static_cast<std::size_t>(i) * el_stride] = e;
                z += e;
            }
            for (int i = 0; i < len; ++i) o[static_cast<std::size_t>(i) * el_stride] /= z;
        }
    };
    out->backward_fn = [px, po, rows, len, row_stride, el_stride] {
        if (!px->requires_grad) return;
        px->ensure_grad();
        for (int r = 0; r < rows; ++r) {
            const double* y = po->val.values.data() + static_cast<std::size_t>(r) * row_stride;
            const double* g = po->grad.data() + static_cast<std::size_t>(r) * row_stride;
            double* gx = px->grad.data() + static_cast<std::size_t>(r) * row_stride;
            double dot = 0.0;
            for (int i = 0; i < len; ++i) {
                const std::size_t k = static_cast<std::size_t>(i) * el_stride;
                dot += g[k] * y[k];
            }
            for (int i = 0; i < len; ++i) {
                const std::size_t k = static_cast<std::size_t>(i) * el_stride;
                gx[k] += y[k] * (g[k] - dot);
            }
        }
    };
    out->forward_fn();
    return out;
}

Value Graph::concat(const std::vector<Value>& xs) {
    if (xs.empty()) throw ShapeError("concat: no inputs");
    int total = 0;
    for (const auto& x : xs) {
        if (x->val.ndim() > 1) shape_fail("concat", x->val, "rank 0 or 1 inputs required");
        total += x->val.numel();
    }
    Value out = push("concat", Tensor({total}), xs);
    Node* po = out.get();
    std::vector<Node*> ins;
    ins.reserve(xs.size());
    for (const auto& x : xs) ins.push_back(x.get());
    out->forward_fn = [ins, po] {
        std::size_t off = 0;
        for (Node* in : ins) {
            std::copy(in->val.values.begin(), in->val.values.end(), po->val.values.begin() + off);
            off += in->val.values.size();
        }
    };
    out->backward_fn = [ins, po] {
        std::size_t off = 0;
        for (Node* in : ins) {
            const std::size_t n = in->val.values.size();
            if (in->requires_grad) {
                in->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) in->grad[i] += po->grad[off + i];
            }
            off += n;
        }
    };
    out->forward_fn();
    return out;
}

Value Graph::stack_rows(const std::vector<Value>& xs) {
    if (xs.empty()) throw ShapeError("stack_rows: no inputs");
    const int k = xs[0]->val.dim(0);
    for (const auto& x : xs)
        if (x->val.ndim() != 1 || x->val.dim(0) != k)
            shape_fail("stack_rows", x->val, "all rows must be rank-1 of equal length");
    const int n = static_cast<int>(xs.size());
    Value out = push("stack_rows", Tensor({n, k}), xs);
    Node* po = out.get();
    std::vector<Node*> ins;
    ins.reserve(xs.size());
    for (const auto& x : xs) ins.push_back(x.get());
    out->forward_fn = [ins, po, k] {
        for (std::size_t r = 0; r < ins.size(); ++r)
            std::copy(ins[r]->val.values.begin(), ins[r]->val.values.end(),
                      po->val.values.begin() + r * static_cast<std::size_t>(k));
    };
    out->backward_fn = [ins, po, k] {
        for (std::size_t r = 0; r < ins.size(); ++r) {
            if (!ins[r]->requires_grad) continue;
            ins[r]->ensure_grad();
            const double* g = po->grad.data() + r * static_cast<std::size_t>(k);
            for (int i = 0; i < k; ++i) ins[r]->grad[static_cast<std::size_t>(i)] += g[i];
        }
    };
    out->forward_fn();
    return out;
}

Value Graph::slice(const Value& x, int start, int len) {
    if (x->val.ndim() != 1) shape_fail("slice", x->val, "rank-1 input required");
    if (start < 0 || len < 1 || start + len > x->val.dim(0))
        shape_fail("slice", x->val, "slice range out of bounds");
    Value out = push("slice", Tensor({len}), {x});
    Node *px = x.get(), *po = out.get();
    out->forward_fn = [px, po, start, len] {
        std::copy(px->val.values.begin() + start, px->val.values.begin() + start + len,
                  po->val.values.begin());
    };
    out->backward_fn = [px, po, start, len] {
        if (!px->requires_grad) return;
        px->ensure_grad();
        for (int i = 0; i < len; ++i)
            px->grad[static_cast<std::size_t>(start + i)] += po->grad[static_cast<std::size_t>(i)];
    };
    out->forward_fn();
    return out;
}

Value Graph::gather_row(const Value& table, int id, bool backprop) {
    return gather_rows(table, std::vector<int>{id}, backprop);
}

Value Graph::gather_rows(const Value& table, const std::vector<int>& ids, bool backprop) {
    if (table->val.ndim() != 2) shape_fail("gather_rows", table->val, "rank-2 table required");
    const int rows = table->val.dim(0), k = table->val.dim(1);
    for (int id : ids)
        if (id < 0 || id >= rows)
            throw ShapeError("gather_rows: id " + std::to_string(id) + " out of range");
    const int n = static_cast<int>(ids.size());
    Value out = push("gather_rows", Tensor(n == 1 ? std::vector<int>{k} : std::vector<int>{n, k}),
                     {table});
    out->iaux = ids;
    if (!backprop) out->requires_grad = false;
    Node *pt = table.get(), *po = out.get();
    out->forward_fn = [pt, po, k] {
        for (std::size_t r = 0; r < po->iaux.size(); ++r) {
            const double* row = pt->val.values.data() + static_cast<std::size_t>(po->iaux[r]) * k;
            std::copy(row, row + k, po->val.values.begin() + r * static_cast<std::size_t>(k));
        }
    };
    const bool bp = backprop;
    out->backward_fn = [pt, po, k, bp] {
        if (!bp || !pt->requires_grad) return;
        pt->ensure_grad();
        for (std::size_t r = 0; r < po->iaux.size(); ++r) {
            double* row = pt->grad.data() + static_cast<std::size_t>(po->iaux[r]) * k;
            const double* g = po->grad.data() + r * static_cast<std::size_t>(k);
            for (int i = 0; i < k; ++i) row[i] += g[i];
        }
    };
    out->forward_fn();
    return out;
}

Value Graph::conv1d(const Value& x, const Value& w, const Value& b) {
    if (x->val.ndim() != 2 || w->val.ndim() != 3 || b->val.ndim() != 1)
        shape_fail("conv1d", x->val, "expects x[m,k], w[f,s,k], b[f]");
    const int m = x->val.dim(0), k = x->val.dim(1);
    const int f = w->val.dim(0), s = w->val.dim(1);
    if (w->val.dim(2) != k) shape_fail("conv1d", x->val, w->val);
    if (b->val.dim(0) != f) shape_fail("conv1d", w->val, b->val);
    if (m < s) shape_fail("conv1d", x->val, "sequence shorter than filter");
    const int om = m - s + 1;
    Value out = push("conv1d", Tensor({om, f}), {x, w, b});
    Node *px = x.get(), *pw = w.get(), *pb = b.get(), *po = out.get();
    out->forward_fn = [px, pw, pb, po, k, f, s, om] {
        const double* X = px->val.values.data();
        const double* W = pw->val.values.data();
        const double* B = pb->val.values.data();
        double* O = po->val.values.data();
        for (int t = 0; t < om; ++t)
            for (int j = 0; j < f; ++j) {
                double acc = B[j];
                const double* wf = W + static_cast<std::size_t>(j) * s * k;
                const double* xw = X + static_cast<std::size_t>(t) * k;
                for (int u = 0; u < s * k; ++u) acc += xw[u] * wf[u];
                O[static_cast<std::size_t>(t) * f + j] = acc;
            }
    };
    out->backward_fn = [px, pw, pb, po, k, f, s, om] {
        const double* G = po->grad.data();
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (int t = 0; t < om; ++t)
                for (int j = 0; j < f; ++j)
                    pb->grad[static_cast<std::size_t>(j)] += G[static_cast<std::size_t>(t) * f + j];
        }
        if (pw->requires_grad) {
            pw->ensure_grad();
            const double* X = px->val.values.data();
            for (int t = 0; t < om; ++t) {
                const double* xw = X + static_cast<std::size_t>(t) * k;
                for (int j = 0; j < f; ++j) {
                    const double g = G[static_cast<std::size_t>(t) * f + j];
                    double* wf = pw->grad.data() + static_cast<std::size_t>(j) * s * k;
                    for (int u = 0; u < s * k; ++u) wf[u] += g * xw[u];
                }
            }
        }
        if (px->requires_grad) {
            px->ensure_grad();
            const double* W = pw->val.values.data();
            for (int t = 0; t < om; ++t) {
                double* xw = px->grad.data() + static_cast<std::size_t>(t) * k;
                for (int j = 0; j < f; ++j) {
                    const double g = G[static_cast<std::size_t>(t) * f + j];
                    const double* wf = W + static_cast<std::size_t>(j) * s * k;
                    for (int u = 0; u < s * k; ++u) xw[u] += g * wf[u];
                }
            }
        }
    };
    out->forward_fn();
    return out;
}

Value Graph::maxpool_time(const Value& x) {
    if (x->val.ndim() != 2) shape_fail("maxpool_time", x->val, "rank-2 input required");
    const int m = x->val.dim(0), f = x->val.dim(1);
    Value out = push("maxpool_time", Tensor({f}), {x});
    out->iaux.assign(static_cast<std::size_t>(f), 0);
    Node *px = x.get(), *po = out.get();
    out->forward_fn = [px, po, m, f] {
        const double* X = px->val.values.data();
        for (int j = 0; j < f; ++j) {
            int best = 0;
            double bv = X[j];
            for (int t = 1; t < m; ++t) {
                const double v = X[static_cast<std::size_t>(t) * f + j];
                if (v > bv) { bv = v; best = t; }
            }
            po->val.values[static_cast<std::size_t>(j)] = bv;
            po->iaux[static_cast<std::size_t>(j)] = best;
        }
    };
    out->backward_fn = [px, po, f] {
        if (!px->requires_grad) return;
        px->ensure_grad();
        for (int j = 0; j < f; ++j)
            px->grad[static_cast<std::size_t>(po->iaux[static_cast<std::size_t>(j)]) * f + j] +=
                po->grad[static_cast<std::size_t>(j)];
    };
    out->forward_fn();
    return out;
}

Value Graph::mean(const Value& x) {
    const int n = x->val.numel();
    if (n == 0) shape_fail("mean", x->val, "empty input");
    Value out = push("mean", Tensor::scalar(0.0), {x});
    Node *px = x.get(), *po = out.get();
    out->forward_fn = [px, po, n] {
        double s = 0.0;
        for (double v : px->val.values) s += v;
        po->val.values[0] = s / n;
    };
    out->backward_fn = [px, po, n] {
        if (!px->requires_grad) return;
        px->ensure_grad();
        const double g = po->grad[0] / n;
        for (auto& v : px->grad) v += g;
    };
    out->forward_fn();
    return out;
}

Value Graph::sum(const Value& x) {
    Value out = push("sum", Tensor::scalar(0.0), {x});
    Node *px = x.get(), *po = out.get();
    out->forward_fn = [px, po] {
        double s = 0.0;
        for (double v : px->val.values) s += v;
        po->val.values[0] = s;
    };
    out->backward_fn = [px, po] {
        if (!px->requires_grad) return;
        px->ensure_grad();
        const double g = po->grad[0];
        for (auto& v : px->grad) v += g;
    };
    out->forward_fn();
    return out;
}

const Tensor& Graph::forward(const Value& root) {
    for (auto& n : tape_)
        if (n->forward_fn) n->forward_fn();
    return root->val;
}

void Graph::backward(const Value& root) {
    if (root->val.numel() != 1)
        throw ContractError("backward: root must be a scalar, got numel=" +
                            std::to_string(root->val.numel()));
    for (auto& n : tape_) {
        if (n->requires_grad) {
            n->ensure_grad();
            n->zero_grad();
        }
        n->reached = false;
    }
    // Only sweep nodes on a gradient path from the root; detached subgraphs
    // stay untouched.
    std::vector<Node*> stack{root.get()};
    root->reached = true;
    while (!stack.empty()) {
        Node* n = stack.back();
        stack.pop_back();
        for (const auto& in : n->inputs)
            if (in->requires_grad && !in->reached) {
                in->reached = true;
                stack.push_back(in.get());
            }
    }
    root->ensure_grad();
    root->grad[0] = 1.0;
    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it)
        if ((*it)->reached && (*it)->requires_grad && (*it)->backward_fn) (*it)->backward_fn();
}

Value average(Graph& g, const std::vector<Value>& scalars) {
    if (scalars.empty()) throw ContractError("average: empty input");
    Value acc = scalars[0];
    for (std::size_t i = 1; i < scalars.size(); ++i) acc = g.add(acc, scalars[i]);
    return g.affine(acc, 1.0 / static_cast<double>(scalars.size()), 0.0);
}

} // namespace unts
