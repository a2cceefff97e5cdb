#include "hoidet/tape.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

namespace hoidet {

size_t Tensor::numel_of(const std::vector<int>& s) {
    size_t n = 1;
    for (int d : s) n *= static_cast<size_t>(d);
    return n;
}

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)), data(numel_of(shape), 0.0) {}

Tensor::Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != numel_of(shape)) throw std::invalid_argument("Tensor: shape/data mismatch");
}

Tape::Id Tape::push(Tensor value, BackwardFn backward) {
    nodes_.push_back({std::move(value), std::move(backward)});
    return static_cast<Id>(nodes_.size()) - 1;
}

Tensor& Tape::grad_of(std::vector<Tensor>& grads, Id id, const std::vector<int>& shape) {
    Tensor& g = grads[static_cast<size_t>(id)];
    if (g.shape.empty()) g = Tensor(shape);
    return g;
}

Tape::Id Tape::input(Tensor value) {
    return push(std::move(value), nullptr);
}

Tape::Id Tape::matmul(Id a, Id b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    const int m = A.rows(), k = A.cols(), n = B.cols();
    if (B.rows() != k) throw std::invalid_argument("matmul: inner dimensions differ");
    Tensor out({m, n});
    for (int i = 0; i < m; ++i) {
        const double* arow = &A.data[static_cast<size_t>(i) * static_cast<size_t>(k)];
        double* orow = &out.data[static_cast<size_t>(i) * static_cast<size_t>(n)];
        for (int p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = &B.data[static_cast<size_t>(p) * static_cast<size_t>(n)];
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    return push(std::move(out), [a, b, m, k, n](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
        const Tensor& A = t.value(a);
        const Tensor& B = t.value(b);
        Tensor& ga = grad_of(grads, a, A.shape);
        Tensor& gb = grad_of(grads, b, B.shape);
        // ga += g * B^T
        for (int i = 0; i < m; ++i) {
            const double* grow = &g.data[static_cast<size_t>(i) * static_cast<size_t>(n)];
            double* garow = &ga.data[static_cast<size_t>(i) * static_cast<size_t>(k)];
            for (int p = 0; p < k; ++p) {
                const double* brow = &B.data[static_cast<size_t>(p) * static_cast<size_t>(n)];
                double acc = 0.0;
                for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
                garow[p] += acc;
            }
        }
        // gb += A^T * g
        for (int p = 0; p < k; ++p) {
            double* gbrow = &gb.data[static_cast<size_t>(p) * static_cast<size_t>(n)];
            for (int i = 0; i < m; ++i) {
                const double av = A.data[static_cast<size_t>(i) * static_cast<size_t>(k) + static_cast<size_t>(p)];
                if (av == 0.0) continue;
                const double* grow = &g.data[static_cast<size_t>(i) * static_cast<size_t>(n)];
                for (int j = 0; j < n; ++j) gbrow[j] += av * grow[j];
            }
        }
    });
}

Tape::Id Tape::transpose(Id a) {
    const Tensor& A = value(a);
    const int m = A.rows(), n = A.cols();
    Tensor out({n, m});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out.at(j, i) = A.at(i, j);
    return push(std::move(out), [a, m, n](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
        Tensor& ga = grad_of(grads, a, t.value(a).shape);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) ga.at(i, j) += g.at(j, i);
    });
}

namespace {

void check_same_shape(const Tensor& x, const Tensor& y, const char* op) {
    if (!x.same_shape(y)) throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

Tape::Id Tape::add(Id a, Id b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    check_same_shape(A, B, "add");
    Tensor out = A;
    for (size_t i = 0; i < out.numel(); ++i) out.data[i] += B.data[i];
    return push(std::move(out), [a, b](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
        Tensor& ga = grad_of(grads, a, t.value(a).shape);
        Tensor& gb = grad_of(grads, b, t.value(b).shape);
        for (size_t i = 0; i < g.numel(); ++i) {
            ga.data[i] += g.data[i];
            gb.data[i] += g.data[i];
        }
    });
}

Tape::Id Tape::sub(Id a, Id b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    check_same_shape(A, B, "sub");
    Tensor out = A;
    for (size_t i = 0; i < out.numel(); ++i) out.data[i] -= B.data[i];
    return push(std::move(out), [a, b](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
        Tensor& ga = grad_of(grads, a, t.value(a).shape);
        Tensor& gb = grad_of(grads, b, t.value(b).shape);
        for (size_t i = 0; i < g.numel(); ++i) {
            ga.data[i] += g.data[i];
            gb.data[i] -= g.data[i];
        }
    });
}

Tape::Id Tape::mul(Id a, Id b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    check_same_shape(A, B, "mul");
    Tensor out = A;
    for (size_t i = 0; i < out.numel(); ++i) out.data[i] *= B.data[i];
    return push(std::move(out), [a, b](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
        const Tensor& A = t.value(a);
        const Tensor& B = t.value(b);
        Tensor& ga = grad_of(grads, a, A.shape);
        Tensor& gb = grad_of(grads, b, B.shape);
        for (size_t i = 0; i < g.numel(); ++i) {
            ga.data[i] += g.data[i] * B.data[i];
            gb.data[i] += g.data[i] * A.data[i];
        }
    });
}

Tape::Id Tape::div(Id a, Id b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    check_same_shape(A, B, "div");
    Tensor out = A;
    for (size_t i = 0; i < out.numel(); ++i) out.data[i] /= B.data[i];
    return push(std::move(out), [a, b](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
        const Tensor& A = t.value(a);
        const Tensor& B = t.value(b);
        Tensor& ga = grad_of(grads, a, A.shape);
        Tensor& gb = grad_of(grads, b, B.shape);
        for (size_t i = 0; i < g.numel(); ++i) {
            ga.data[i] += g.data[i] / B.data[i];
            gb.data[i] -= g.data[i] * A.data[i] / (B.data[i] * B.data[i]);
        }
    });
}

Tape::Id Tape::minimum(Id a, Id b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    check_same_shape(A, B, "minimum");
    Tensor out = A;
    for (size_t i = 0; i < out.numel(); ++i) out.data[i] = std::min(A.data[i], B.data[i]);
    return push(std::move(out), [a, b](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
        const Tensor& A = t.value(a);
        const Tensor& B = t.value(b);
        Tensor& ga = grad_of(grads, a, A.shape);
        Tensor& gb = grad_of(grads, b, B.shape);
        for (size_t i = 0; i < g.numel(); ++i) {
            if (A.data[i] <= B.data[i]) ga.data[i] += g.data[i];
            else gb.data[i] += g.data[i];
        }
    });
}

Tape::Id Tape::maximum(Id a, Id b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    check_same_shape(A, B, "maximum");
    Tensor out = A;
    for (size_t i = 0; i < out.numel(); ++i) out.data[i] = std::max(A.data[i], B.data[i]);
    return push(std::move(out), [a, b](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
        const Tensor& A = t.value(a);
        const Tensor& B = t.value(b);
        Tensor& ga = grad_of(grads, a, A.shape);
        Tensor& gb = grad_of(grads, b, B.shape);
        for (size_t i = 0; i < g.numel(); ++i) {
            if (A.data[i] >= B.data[i]) ga.data[i] += g.data[i];
            else gb.data[i] += g.data[i];
        }
    });
}

Tape::Id Tape::add_rowvec(Id a, Id v) {
    const Tensor& A = value(a);
    const Tensor& V = value(v);
    const int m = A.rows(), n = A.cols();
    if (static_cast<int>(V.numel()) != n) throw std::invalid_argument("add_rowvec: length mismatch");
    Tensor out = A;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out.at(i, j) += V.data[static_cast<size_t>(j)];
    return push(std::move(out), [a, v, m, n](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
        Tensor& ga = grad_of(grads, a, t.value(a).shape);
        Tensor& gv = grad_of(grads, v, t.value(v).shape);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) {
                ga.at(i, j) += g.at(i, j);
                gv.data[static_cast<size_t>(j)] += g.at(i, j);
            }
        }
    });
}

Tape::Id Tape::scale(Id a, double c) {
    Tensor out = value(a);
    for (double& x : out.data) x *= c;
    return push(std::move(out), [a, c](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
        Tensor& ga = grad_of(grads, a, t.value(a).shape);
        for (size_t i = 0; i < g.numel(); ++i) ga.data[i] += c * g.data[i];
    });
}

Tape::Id Tape::add_const(Id a, double c) {
    Tensor out = value(a);
    for (double& x : out.data) x += c;
    return push(std::move(out), [a](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
        Tensor& ga = grad_of(grads, a, t.value(a).shape);
        for (size_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i];
    });
}

Tape::Id Tape::mul_const(Id a, const Tensor& mask) {
    const Tensor& A = value(a);
    check_same_shape(A, mask, "mul_const");
    Tensor out = A;
    for (size_t i = 0; i < out.numel(); ++i) out.data[i] *= mask.data[i];
    return push(std::move(out), [a, mask](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
        Tensor& ga = grad_of(grads, a, t.value(a).shape);
        for (size_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i] * mask.data[i];
    });
}

Tape::Id Tape::abs(Id a) {
    Tensor out = value(a);
    for (double& x : out.data) x = std::abs(x);
    return push(std::move(out), [a](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
        const Tensor& A = t.value(a);
        Tensor& ga = grad_of(grads, a, A.shape);
        for (size_t i = 0; i < g.numel(); ++i) {
            if (A.data[i] > 0.0) ga.data[i] += g.data[i];
            else if (A.data[i] < 0.0) ga.data[i] -= g.data[i];
        }
    });
}

Tape::Id Tape::relu(Id a) {
    Tensor out = value(a);
    for (double& x : out.data) x = std::max(0.0, x);
    return push(std::move(out), [a](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
        const Tensor& A = t.value(a);
        Tensor& ga = grad_of(grads, a, A.shape);
        for (size_t i = 0; i < g.numel(); ++i) {
            if (A.data[i] > 0.0) ga.data[i] += g.data[i];
        }
    });
}

Tape::Id Tape::sigmoid(Id a) {
    Tensor out = value(a);
    for (double& x : out.data) x = 1.0 / (1.0 + std::exp(-x));
    const Id self_placeholder = static_cast<Id>(nodes_.size());
    return push(std::move(out), [a, self_placeholder](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
        const Tensor& Y = t.value(self_placeholder);
        Tensor& ga = grad_of(grads, a, t.value(a).shape);
        for (size_t i = 0; i < g.numel(); ++i) {
            ga.data[i] += g.data[i] * Y.data[i] * (1.0 - Y.data[i]);
        }
    });
}

Tape::Id Tape::log(Id a) {
    Tensor out = value(a);
    for (double& x : out.data) x = std::log(x);
    return push(std::move(out), [a](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
        const Tensor& A = t.value(a);
        Tensor& ga = grad_of(grads, a, A.shape);
        for (size_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i] / A.data[i];
    });
}

Tape::Id Tape::powc(Id a, double c) {
    Tensor out = value(a);
    for (double& x : out.data) x = std::pow(x, c);
    return push(std::move(out), [a, c](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
        const Tensor& A = t.value(a);
        Tensor& ga = grad_of(grads, a, A.shape);
        for (size_t i = 0; i < g.numel(); ++i) {
            ga.data[i] += g.data[i] * c * std::pow(A.data[i], c - 1.0);
        }
    });
}

Tape::Id Tape::clamp(Id a, double lo, double hi) {
    Tensor out = value(a);
    for (double& x : out.data) x = std::clamp(x, lo, hi);
    return push(std::move(out), [a, lo, hi](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
        const Tensor& A = t.value(a);
        Tensor& ga = grad_of(grads, a, A.shape);
        for (size_t i = 0; i < g.numel(); ++i) {
            if (A.data[i] > lo && A.data[i] < hi) ga.data[i] += g.data[i];
        }
    });
}

Tape::Id Tape::softmax_rows(Id a) {
    const Tensor& A = value(a);
    const int m = A.rows(), n = A.cols();
    Tensor out({m, n});
    for (int i = 0; i < m; ++i) {
        double mx = A.at(i, 0);
        for (int j = 1; j < n; ++j) mx = std::max(mx, A.at(i, j));
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
            const double e = std::exp(A.at(i, j) - mx);
            out.at(i, j) = e;
            sum += e;
        }
        for (int j = 0; j < n; ++j) out.at(i, j) /= sum;
    }
    const Id self_placeholder = static_cast<Id>(nodes_.size());
    return push(std::move(out), [a, m, n, self_placeholder](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
        const Tensor& Y = t.value(self_placeholder);
        Tensor& ga = grad_of(grads, a, t.value(a).shape);
        for (int i = 0; i < m; ++i) {
            double dot = 0.0;
            for (int j = 0; j < n; ++j) dot += g.at(i, j) * Y.at(i, j);
            for (int j = 0; j < n; ++j) ga.at(i, j) += Y.at(i, j) * (g.at(i, j) - dot);
        }
    });
}

Tape::Id Tape::layer_norm_rows(Id x, Id gamma, Id beta, double eps) {
    const Tensor& X = value(x);
    const int m = X.rows(), n = X.cols();
    const Tensor& G = value(gamma);
    const Tensor& B = value(beta);
    if (static_cast<int>(G.numel()) != n || static_cast<int>(B.numel()) != n) {
        throw std::invalid_argument("layer_norm_rows: affine parameter length mismatch");
    }
    Tensor out({m, n});
    // Saved for backward: normalized input and inverse std per row.
    auto xhat = std::make_shared<Tensor>(Tensor({m, n}));
    auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(m), 0.0);
    for (int i = 0; i < m; ++i) {
        double mean = 0.0;
        for (int j = 0; j < n; ++j) mean += X.at(i, j);
        mean /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) {
            const double d = X.at(i, j) - mean;
            var += d * d;
        }
        var /= n;
        const double inv = 1.0 / std::sqrt(var + eps);
        (*inv_std)[static_cast<size_t>(i)] = inv;
        for (int j = 0; j < n; ++j) {
            const double xh = (X.at(i, j) - mean) * inv;
            xhat->at(i, j) = xh;
            out.at(i, j) = G.data[static_cast<size_t>(j)] * xh + B.data[static_cast<size_t>(j)];
        }
    }
    return push(std::move(out), [x, gamma, beta, m, n, xhat, inv_std](const Tape& t, const Tensor& g,
                                                                      std::vector<Tensor>& grads) {
        const Tensor& G = t.value(gamma);
        Tensor& gx = grad_of(grads, x, t.value(x).shape);
        Tensor& gg = grad_of(grads, gamma, t.value(gamma).shape);
        Tensor& gb = grad_of(grads, beta, t.value(beta).shape);
        for (int i = 0; i < m; ++i) {
            double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
            for (int j = 0; j < n; ++j) {
                const double go = g.at(i, j);
                const double xh = xhat->at(i, j);
                gg.data[static_cast<size_t>(j)] += go * xh;
                gb.data[static_cast<size_t>(j)] += go;
                const double dxh = go * G.data[static_cast<size_t>(j)];
                sum_dxhat += dxh;
                sum_dxhat_xhat += dxh * xh;
            }
            const double inv = (*inv_std)[static_cast<size_t>(i)];
            for (int j = 0; j < n; ++j) {
                const double dxh = g.at(i, j) * G.data[static_cast<size_t>(j)];
                gx.at(i, j) += inv * (dxh - sum_dxhat / n - xhat->at(i, j) * sum_dxhat_xhat / n);
            }
        }
    });
}

Tape::Id Tape::sum_all(Id a) {
    const Tensor& A = value(a);
    double s = 0.0;
    for (double x : A.data) s += x;
    return push(Tensor::scalar(s), [a](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
        Tensor& ga = grad_of(grads, a, t.value(a).shape);
        for (size_t i = 0; i < ga.numel(); ++i) ga.data[i] += g.data[0];
    });
}

Tape::Id Tape::slice_cols(Id a, int c0, int c1) {
    const Tensor& A = value(a);
    const int m = A.rows(), n = A.cols(), w = c1 - c0;
    if (c0 < 0 || c1 > n || w <= 0) throw std::invalid_argument("slice_cols: bad range");
    Tensor out({m, w});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < w; ++j) out.at(i, j) = A.at(i, c0 + j);
    return push(std::move(out), [a, m, w, c0](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
        Tensor& ga = grad_of(grads, a, t.value(a).shape);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < w; ++j) ga.at(i, c0 + j) += g.at(i, j);
    });
}

Tape::Id Tape::concat_cols(const std::vector<Id>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
    const int m = value(parts[0]).rows();
    int n = 0;
    for (Id p : parts) {
        if (value(p).rows() != m) throw std::invalid_argument("concat_cols: row mismatch");
        n += value(p).cols();
    }
    Tensor out({m, n});
    int off = 0;
    for (Id p : parts) {
        const Tensor& P = value(p);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < P.cols(); ++j) out.at(i, off + j) = P.at(i, j);
        off += P.cols();
    }
    return push(std::move(out), [parts, m](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
        int off = 0;
        for (Id p : parts) {
            const Tensor& P = t.value(p);
            Tensor& gp = grad_of(grads, p, P.shape);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < P.cols(); ++j) gp.at(i, j) += g.at(i, off + j);
            off += P.cols();
        }
    });
}

Tape::Id Tape::gather_rows(Id a, std::vector<int> rows) {
    const Tensor& A = value(a);
    const int n = A.cols();
    Tensor out({static_cast<int>(rows.size()), n});
    for (size_t i = 0; i < rows.size(); ++i)
        for (int j = 0; j < n; ++j) out.at(static_cast<int>(i), j) = A.at(rows[i], j);
    return push(std::move(out), [a, rows = std::move(rows), n](const Tape& t, const Tensor& g,
                                                               std::vector<Tensor>& grads) {
        Tensor& ga = grad_of(grads, a, t.value(a).shape);
        for (size_t i = 0; i < rows.size(); ++i)
            for (int j = 0; j < n; ++j) ga.at(rows[i], j) += g.at(static_cast<int>(i), j);
    });
}

Tape::Id Tape::reshape(Id a, std::vector<int> new_shape) {
    const Tensor& A = value(a);
    if (Tensor::numel_of(new_shape) != A.numel()) throw std::invalid_argument("reshape: size mismatch");
    Tensor out(new_shape, A.data);
    return push(std::move(out), [a](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
        Tensor& ga = grad_of(grads, a, t.value(a).shape);
        for (size_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i];
    });
}

Tape::Id Tape::conv2d(Id input, Id weight, Id bias, int stride, int pad) {
    const Tensor& X = value(input);
    const Tensor& W = value(weight);
    const Tensor& B = value(bias);
    if (X.shape.size() != 3 || W.shape.size() != 4) throw std::invalid_argument("conv2d: rank mismatch");
    const int c_in = X.shape[0], h = X.shape[1], w = X.shape[2];
    const int c_out = W.shape[0], kh = W.shape[2], kw = W.shape[3];
    if (W.shape[1] != c_in) throw std::invalid_argument("conv2d: channel mismatch");
    const int oh = (h + 2 * pad - kh) / stride + 1;
    const int ow = (w + 2 * pad - kw) / stride + 1;

    auto x_at = [&](int c, int y, int xx) -> double {
        if (y < 0 || y >= h || xx < 0 || xx >= w) return 0.0;
        return X.data[(static_cast<size_t>(c) * static_cast<size_t>(h) + static_cast<size_t>(y)) * static_cast<size_t>(w) + static_cast<size_t>(xx)];
    };
    Tensor out({c_out, oh, ow});
    for (int oc = 0; oc < c_out; ++oc) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                double acc = B.data[static_cast<size_t>(oc)];
                for (int ic = 0; ic < c_in; ++ic) {
                    for (int ky = 0; ky < kh; ++ky) {
                        for (int kx = 0; kx < kw; ++kx) {
                            const double wv = W.data[((static_cast<size_t>(oc) * static_cast<size_t>(c_in) + static_cast<size_t>(ic)) * static_cast<size_t>(kh) + static_cast<size_t>(ky)) * static_cast<size_t>(kw) + static_cast<size_t>(kx)];
                            acc += wv * x_at(ic, oy * stride - pad + ky, ox * stride - pad + kx);
                        }
                    }
                }
                out.data[(static_cast<size_t>(oc) * static_cast<size_t>(oh) + static_cast<size_t>(oy)) * static_cast<size_t>(ow) + static_cast<size_t>(ox)] = acc;
            }
        }
    }
    return push(std::move(out), [input, weight, bias, stride, pad, c_in, h, w, c_out, kh, kw, oh, ow](
                                    const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
        const Tensor& X = t.value(input);
        const Tensor& W = t.value(weight);
        Tensor& gx = grad_of(grads, input, X.shape);
        Tensor& gw = grad_of(grads, weight, W.shape);
        Tensor& gb = grad_of(grads, bias, t.value(bias).shape);
        for (int oc = 0; oc < c_out; ++oc) {
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    const double go = g.data[(static_cast<size_t>(oc) * static_cast<size_t>(oh) + static_cast<size_t>(oy)) * static_cast<size_t>(ow) + static_cast<size_t>(ox)];
                    if (go == 0.0) continue;
                    gb.data[static_cast<size_t>(oc)] += go;
                    for (int ic = 0; ic < c_in; ++ic) {
                        for (int ky = 0; ky < kh; ++ky) {
                            const int y = oy * stride - pad + ky;
                            if (y < 0 || y >= h) continue;
                            for (int kx = 0; kx < kw; ++kx) {
                                const int x = ox * stride - pad + kx;
                                if (x < 0 || x >= w) continue;
                                const size_t wi = ((static_cast<size_t>(oc) * static_cast<size_t>(c_in) + static_cast<size_t>(ic)) * static_cast<size_t>(kh) + static_cast<size_t>(ky)) * static_cast<size_t>(kw) + static_cast<size_t>(kx);
                                const size_t xi = (static_cast<size_t>(ic) * static_cast<size_t>(h) + static_cast<size_t>(y)) * static_cast<size_t>(w) + static_cast<size_t>(x);
                                gw.data[wi] += go * X.data[xi];
                                gx.data[xi] += go * W.data[wi];
                            }
                        }
                    }
                }
            }
        }
    });
}

Tape::Id Tape::add_all(const std::vector<Id>& xs) {
    if (xs.empty()) throw std::invalid_argument("add_all: empty");
    Id acc = xs[0];
    for (size_t i = 1; i < xs.size(); ++i) acc = add(acc, xs[i]);
    return acc;
}

std::vector<Tensor> Tape::gradients(Id root, const std::vector<Id>& wrt) const {
    if (value(root).numel() != 1) throw std::invalid_argument("gradients: root is not scalar");
    std::vector<Tensor> grads(nodes_.size());
    grads[static_cast<size_t>(root)] = Tensor::scalar(1.0);
    for (Id id = root; id >= 0; --id) {
        const Node& node = nodes_[static_cast<size_t>(id)];
        const Tensor& g = grads[static_cast<size_t>(id)];
        if (!node.backward || g.shape.empty()) continue;
        node.backward(*this, g, grads);
    }
    std::vector<Tensor> out;
    out.reserve(wrt.size());
    for (Id id : wrt) {
        Tensor& g = grads[static_cast<size_t>(id)];
        if (g.shape.empty()) g = Tensor(value(id).shape);
        out.push_back(std::move(g));
    }
    return out;
}

}  // namespace hoidet
