#include "trifusion/ops.hpp"

#include <cmath>
#include <utility>

#include "trifusion/errors.hpp"
#include "trifusion/resample.hpp"
#include "trifusion/wavelet.hpp"

namespace trifusion::nn {

namespace {

// Elementwise unary op with derivative expressed in terms of (x, y).
template <typename F, typename DF>
NodePtr unary_elementwise(NodePtr x, F&& f, DF&& df) {
    Tensor out(x->value.shape);
    for (size_t i = 0; i < out.numel(); ++i) out[i] = f(x->value[i]);
    NodePtr n = make_node(std::move(out), {x});
    if (n->needs_grad) {
        Node* self = n.get();
        n->backprop = [self, x, df]() {
            Tensor& gx = x->ensure_grad();
            for (size_t i = 0; i < gx.numel(); ++i)
                gx[i] += df(x->value[i], self->value[i]) * self->grad[i];
        };
    }
    return n;
}

void conv_shapes(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int& pad) {
    require_rank3(x, "conv2d input");
    if (w.rank() != 4) throw ShapeError("conv2d: weight must be [C_out,C_in,k,k]");
    if (w.shape[2] != w.shape[3] || w.shape[2] % 2 == 0)
        throw ShapeError("conv2d: kernel must be square with odd size, got " + shape_str(w.shape));
    if (w.shape[1] != x.channels())
        throw ShapeError("conv2d: weight expects " + std::to_string(w.shape[1]) +
                         " input channels, input has " + std::to_string(x.channels()));
    if (b.shape != std::vector<int>{w.shape[0]})
        throw ShapeError("conv2d: bias shape must be [C_out]");
    if (stride != 1 && stride != 2) throw ValueError("conv2d: stride must be 1 or 2");
    if (stride == 2 && (x.height() % 2 != 0 || x.width() % 2 != 0))
        throw ShapeError("conv2d: stride-2 requires even extents");
    pad = w.shape[2] / 2;
}

// Patch matrix: row r = (c, ky, kx), column j = output pixel. Zero padding
// materializes as zero entries, so forward and both backward passes become
// long contiguous dot/axpy loops.
struct PatchMatrix {
    std::vector<double> data;  // [rows x cols]
    int rows = 0, cols = 0;
    double* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
    const double* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }
};

PatchMatrix im2col(const Tensor& x, int k, int stride, int pad) {
    const int ci = x.channels(), h = x.height(), wd = x.width();
    const int oh = h / stride, ow = wd / stride;
    PatchMatrix m;
    m.rows = ci * k * k;
    m.cols = oh * ow;
    m.data.assign(static_cast<size_t>(m.rows) * m.cols, 0.0);
    for (int c = 0; c < ci; ++c) {
        const double* iplane = &x.data[static_cast<size_t>(c) * h * wd];
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                double* mrow = m.row((c * k + ky) * k + kx);
                const int dy = ky - pad, dx = kx - pad;
                for (int y = 0; y < oh; ++y) {
                    const int sy = y * stride + dy;
                    if (sy < 0 || sy >= h) continue;
                    const double* irow = iplane + static_cast<size_t>(sy) * wd;
                    double* mdst = mrow + static_cast<size_t>(y) * ow;
                    if (stride == 1) {
                        const int x0 = std::max(0, -dx), x1 = std::min(ow, wd - dx);
                        for (int xx = x0; xx < x1; ++xx) mdst[xx] = irow[xx + dx];
                    } else {
                        for (int xx = 0; xx < ow; ++xx) {
                            const int sx = xx * stride + dx;
                            if (sx >= 0 && sx < wd) mdst[xx] = irow[sx];
                        }
                    }
                }
            }
        }
    }
    return m;
}

// Transpose of im2col: scatter-add patch-space cotangents back to the input.
void col2im_add(const PatchMatrix& m, int k, int stride, int pad, Tensor& gx) {
    const int ci = gx.channels(), h = gx.height(), wd = gx.width();
    const int oh = h / stride, ow = wd / stride;
    for (int c = 0; c < ci; ++c) {
        double* iplane = &gx.data[static_cast<size_t>(c) * h * wd];
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const double* mrow = m.row((c * k + ky) * k + kx);
                const int dy = ky - pad, dx = kx - pad;
                for (int y = 0; y < oh; ++y) {
                    const int sy = y * stride + dy;
                    if (sy < 0 || sy >= h) continue;
                    double* irow = iplane + static_cast<size_t>(sy) * wd;
                    const double* msrc = mrow + static_cast<size_t>(y) * ow;
                    if (stride == 1) {
                        const int x0 = std::max(0, -dx), x1 = std::min(ow, wd - dx);
                        for (int xx = x0; xx < x1; ++xx) irow[xx + dx] += msrc[xx];
                    } else {
                        for (int xx = 0; xx < ow; ++xx) {
                            const int sx = xx * stride + dx;
                            if (sx >= 0 && sx < wd) irow[sx] += msrc[xx];
                        }
                    }
                }
            }
        }
    }
}

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad,
                      const PatchMatrix& cols) {
    const int ci = x.channels();
    const int co = w.shape[0], k = w.shape[2];
    const int oh = x.height() / stride, ow = x.width() / stride;
    Tensor out({co, oh, ow});
    const int rows = ci * k * k, hw = oh * ow;
    for (int o = 0; o < co; ++o) {
        double* orow = &out.data[static_cast<size_t>(o) * hw];
        const double bias = b[o];
        for (int i = 0; i < hw; ++i) orow[i] = bias;
        const double* wrow = &w.data[static_cast<size_t>(o) * rows];
        for (int r = 0; r < rows; ++r) {
            const double wv = wrow[r];
            if (wv == 0.0) continue;
            const double* crow = cols.row(r);
            for (int i = 0; i < hw; ++i) orow[i] += wv * crow[i];
        }
    }
    return out;
}

}  // namespace

NodePtr conv2d(NodePtr x, NodePtr w, NodePtr b, int stride) {
    int pad = 0;
    conv_shapes(x->value, w->value, b->value, stride, pad);
    const int k = w->value.shape[2];
    auto cols = std::make_shared<PatchMatrix>(im2col(x->value, k, stride, pad));
    Tensor out = conv2d_forward(x->value, w->value, b->value, stride, pad, *cols);
    NodePtr n = make_node(std::move(out), {x, w, b});
    if (n->needs_grad) {
        Node* self = n.get();
        n->backprop = [self, x, w, b, stride, pad, k, cols]() {
            const Tensor& g = self->grad;
            const Tensor& wv = w->value;
            const int ci = x->value.channels();
            const int co = wv.shape[0];
            const int hw = g.height() * g.width();
            const int rows = ci * k * k;

            if (b->needs_grad) {
                Tensor& gb = b->ensure_grad();
                for (int o = 0; o < co; ++o) {
                    const double* grow = &g.data[static_cast<size_t>(o) * hw];
                    double acc = 0.0;
                    for (int i = 0; i < hw; ++i) acc += grow[i];
                    gb[o] += acc;
                }
            }
            if (w->needs_grad) {
                Tensor& gw = w->ensure_grad();
                for (int o = 0; o < co; ++o) {
                    const double* grow = &g.data[static_cast<size_t>(o) * hw];
                    double* gwrow = &gw.data[static_cast<size_t>(o) * rows];
                    for (int r = 0; r < rows; ++r) {
                        const double* crow = cols->row(r);
                        double acc = 0.0;
                        for (int i = 0; i < hw; ++i) acc += crow[i] * grow[i];
                        gwrow[r] += acc;
                    }
                }
            }
            if (x->needs_grad) {
                PatchMatrix gcols;
                gcols.rows = rows;
                gcols.cols = hw;
                gcols.data.assign(static_cast<size_t>(rows) * hw, 0.0);
                for (int o = 0; o < co; ++o) {
                    const double* grow = &g.data[static_cast<size_t>(o) * hw];
                    const double* wrow = &wv.data[static_cast<size_t>(o) * rows];
                    for (int r = 0; r < rows; ++r) {
                        const double wval = wrow[r];
                        if (wval == 0.0) continue;
                        double* crow = gcols.row(r);
                        for (int i = 0; i < hw; ++i) crow[i] += wval * grow[i];
                    }
                }
                col2im_add(gcols, k, stride, pad, x->ensure_grad());
            }
        };
    }
    return n;
}

NodePtr relu(NodePtr x) {
    return unary_elementwise(
        std::move(x), [](double v) { return v > 0.0 ? v : 0.0; },
        [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

NodePtr leaky_relu(NodePtr x, double slope) {
    return unary_elementwise(
        std::move(x), [slope](double v) { return v > 0.0 ? v : slope * v; },
        [slope](double v, double) { return v > 0.0 ? 1.0 : slope; });
}

NodePtr sigmoid(NodePtr x) {
    return unary_elementwise(
        std::move(x), [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
        [](double, double y) { return y * (1.0 - y); });
}

NodePtr activation(NodePtr x, Act kind) {
    switch (kind) {
        case Act::relu: return relu(std::move(x));
        case Act::sigmoid: return sigmoid(std::move(x));
        case Act::leaky_relu: return leaky_relu(std::move(x));
    }
    throw ValueError("activation: unknown kind");
}

NodePtr linear(NodePtr x, NodePtr w, NodePtr b) {
    const Tensor& xv = x->value;
    const Tensor& wv = w->value;
    if (xv.rank() != 1 || wv.rank() != 2 || wv.shape[1] != xv.shape[0] ||
        b->value.shape != std::vector<int>{wv.shape[0]})
        throw ShapeError("linear: inconsistent shapes x" + shape_str(xv.shape) + " w" +
                         shape_str(wv.shape) + " b" + shape_str(b->value.shape));
    const int m = wv.shape[0], k = wv.shape[1];
    Tensor out({m});
    for (int i = 0; i < m; ++i) {
        double acc = b->value[i];
        for (int j = 0; j < k; ++j) acc += wv.data[static_cast<size_t>(i) * k + j] * xv[j];
        out[i] = acc;
    }
    NodePtr n = make_node(std::move(out), {x, w, b});
    if (n->needs_grad) {
        Node* self = n.get();
        n->backprop = [self, x, w, b, m, k]() {
            const Tensor& g = self->grad;
            if (b->needs_grad) {
                Tensor& gb = b->ensure_grad();
                for (int i = 0; i < m; ++i) gb[i] += g[i];
            }
            if (w->needs_grad) {
                Tensor& gw = w->ensure_grad();
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < k; ++j)
                        gw.data[static_cast<size_t>(i) * k + j] += g[i] * x->value[j];
            }
            if (x->needs_grad) {
                Tensor& gx = x->ensure_grad();
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < k; ++j)
                        gx[j] += g[i] * w->value.data[static_cast<size_t>(i) * k + j];
            }
        };
    }
    return n;
}

NodePtr global_avg_pool(NodePtr x) {
    require_rank3(x->value, "global_avg_pool");
    const int c = x->value.channels();
    const size_t hw = static_cast<size_t>(x->value.height()) * x->value.width();
    Tensor out({c, 1, 1});
    for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (size_t i = 0; i < hw; ++i) acc += x->value.data[ch * hw + i];
        out[ch] = acc / static_cast<double>(hw);
    }
    NodePtr n = make_node(std::move(out), {x});
    if (n->needs_grad) {
        Node* self = n.get();
        n->backprop = [self, x, c, hw]() {
            Tensor& gx = x->ensure_grad();
            for (int ch = 0; ch < c; ++ch) {
                const double g = self->grad[ch] / static_cast<double>(hw);
                for (size_t i = 0; i < hw; ++i) gx.data[ch * hw + i] += g;
            }
        };
    }
    return n;
}

NodePtr global_max_pool(NodePtr x) {
    require_rank3(x->value, "global_max_pool");
    const int c = x->value.channels();
    const size_t hw = static_cast<size_t>(x->value.height()) * x->value.width();
    Tensor out({c, 1, 1});
    std::vector<size_t> argmax(c);
    for (int ch = 0; ch < c; ++ch) {
        size_t best = 0;
        for (size_t i = 1; i < hw; ++i)
            if (x->value.data[ch * hw + i] > x->value.data[ch * hw + best]) best = i;
        argmax[ch] = best;
        out[ch] = x->value.data[ch * hw + best];
    }
    NodePtr n = make_node(std::move(out), {x});
    if (n->needs_grad) {
        Node* self = n.get();
        n->backprop = [self, x, c, hw, argmax = std::move(argmax)]() {
            Tensor& gx = x->ensure_grad();
            for (int ch = 0; ch < c; ++ch) gx.data[ch * hw + argmax[ch]] += self->grad[ch];
        };
    }
    return n;
}

NodePtr softmax_channels(NodePtr x) {
    require_rank3(x->value, "softmax_channels");
    const int c = x->value.channels(), h = x->value.height(), w = x->value.width();
    const size_t hw = static_cast<size_t>(h) * w;
    Tensor out(x->value.shape);
    for (size_t p = 0; p < hw; ++p) {
        double mx = x->value.data[p];
        for (int ch = 1; ch < c; ++ch) mx = std::max(mx, x->value.data[ch * hw + p]);
        double denom = 0.0;
        for (int ch = 0; ch < c; ++ch) {
            const double e = std::exp(x->value.data[ch * hw + p] - mx);
            out.data[ch * hw + p] = e;
            denom += e;
        }
        for (int ch = 0; ch < c; ++ch) out.data[ch * hw + p] /= denom;
    }
    NodePtr n = make_node(std::move(out), {x});
    if (n->needs_grad) {
        Node* self = n.get();
        n->backprop = [self, x, c, hw]() {
            Tensor& gx = x->ensure_grad();
            for (size_t p = 0; p < hw; ++p) {
                double dot = 0.0;
                for (int ch = 0; ch < c; ++ch)
                    dot += self->grad[ch * hw + p] * self->value[ch * hw + p];
                for (int ch = 0; ch < c; ++ch)
                    gx.data[ch * hw + p] +=
                        self->value[ch * hw + p] * (self->grad[ch * hw + p] - dot);
            }
        };
    }
    return n;
}

NodePtr add(NodePtr a, NodePtr b) {
    require_same_shape(a->value, b->value, "add");
    Tensor out = a->value;
    out += b->value;
    NodePtr n = make_node(std::move(out), {a, b});
    if (n->needs_grad) {
        Node* self = n.get();
        n->backprop = [self, a, b]() {
            if (a->needs_grad) a->ensure_grad() += self->grad;
            if (b->needs_grad) b->ensure_grad() += self->grad;
        };
    }
    return n;
}

NodePtr sub(NodePtr a, NodePtr b) {
    require_same_shape(a->value, b->value, "sub");
    Tensor out = a->value;
    out -= b->value;
    NodePtr n = make_node(std::move(out), {a, b});
    if (n->needs_grad) {
        Node* self = n.get();
        n->backprop = [self, a, b]() {
            if (a->needs_grad) a->ensure_grad() += self->grad;
            if (b->needs_grad) b->ensure_grad() -= self->grad;
        };
    }
    return n;
}

NodePtr mul(NodePtr a, NodePtr b) {
    require_same_shape(a->value, b->value, "mul");
    Tensor out(a->value.shape);
    for (size_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * b->value[i];
    NodePtr n = make_node(std::move(out), {a, b});
    if (n->needs_grad) {
        Node* self = n.get();
        n->backprop = [self, a, b]() {
            if (a->needs_grad) {
                Tensor& ga = a->ensure_grad();
                for (size_t i = 0; i < ga.numel(); ++i) ga[i] += b->value[i] * self->grad[i];
            }
            if (b->needs_grad) {
                Tensor& gb = b->ensure_grad();
                for (size_t i = 0; i < gb.numel(); ++i) gb[i] += a->value[i] * self->grad[i];
            }
        };
    }
    return n;
}

NodePtr scale(NodePtr x, double s) {
    return unary_elementwise(
        std::move(x), [s](double v) { return s * v; }, [s](double, double) { return s; });
}

NodePtr mul_scalar_param(NodePtr x, NodePtr s) {
    if (s->value.numel() != 1) throw ShapeError("mul_scalar_param: scalar must have one element");
    const double sv = s->value[0];
    Tensor out = x->value;
    out *= sv;
    NodePtr n = make_node(std::move(out), {x, s});
    if (n->needs_grad) {
        Node* self = n.get();
        n->backprop = [self, x, s, sv]() {
            if (x->needs_grad) {
                Tensor& gx = x->ensure_grad();
                for (size_t i = 0; i < gx.numel(); ++i) gx[i] += sv * self->grad[i];
            }
            if (s->needs_grad) {
                double acc = 0.0;
                for (size_t i = 0; i < x->value.numel(); ++i) acc += x->value[i] * self->grad[i];
                s->ensure_grad()[0] += acc;
            }
        };
    }
    return n;
}

NodePtr add_channel_vec(NodePtr x, NodePtr v) {
    require_rank3(x->value, "add_channel_vec");
    if (v->value.shape != std::vector<int>{x->value.channels()})
        throw ShapeError("add_channel_vec: vector must be [C]");
    const int c = x->value.channels();
    const size_t hw = static_cast<size_t>(x->value.height()) * x->value.width();
    Tensor out = x->value;
    for (int ch = 0; ch < c; ++ch)
        for (size_t i = 0; i < hw; ++i) out.data[ch * hw + i] += v->value[ch];
    NodePtr n = make_node(std::move(out), {x, v});
    if (n->needs_grad) {
        Node* self = n.get();
        n->backprop = [self, x, v, c, hw]() {
            if (x->needs_grad) x->ensure_grad() += self->grad;
            if (v->needs_grad) {
                Tensor& gv = v->ensure_grad();
                for (int ch = 0; ch < c; ++ch) {
                    double acc = 0.0;
                    for (size_t i = 0; i < hw; ++i) acc += self->grad[ch * hw + i];
                    gv[ch] += acc;
                }
            }
        };
    }
    return n;
}

NodePtr scale_channels(NodePtr x, NodePtr s) {
    require_rank3(x->value, "scale_channels");
    const int c = x->value.channels();
    if (s->value.numel() != static_cast<size_t>(c))
        throw ShapeError("scale_channels: scale must have C elements");
    const size_t hw = static_cast<size_t>(x->value.height()) * x->value.width();
    Tensor out(x->value.shape);
    for (int ch = 0; ch < c; ++ch)
        for (size_t i = 0; i < hw; ++i) out.data[ch * hw + i] = x->value.data[ch * hw + i] * s->value[ch];
    NodePtr n = make_node(std::move(out), {x, s});
    if (n->needs_grad) {
        Node* self = n.get();
        n->backprop = [self, x, s, c, hw]() {
            if (x->needs_grad) {
                Tensor& gx = x->ensure_grad();
                for (int ch = 0; ch < c; ++ch)
                    for (size_t i = 0; i < hw; ++i)
                        gx.data[ch * hw + i] += s->value[ch] * self->grad[ch * hw + i];
            }
            if (s->needs_grad) {
                Tensor& gs = s->ensure_grad();
                for (int ch = 0; ch < c; ++ch) {
                    double acc = 0.0;
                    for (size_t i = 0; i < hw; ++i)
                        acc += x->value.data[ch * hw + i] * self->grad[ch * hw + i];
                    gs[ch] += acc;
                }
            }
        };
    }
    return n;
}

NodePtr scale_pixels(NodePtr x, NodePtr m) {
    require_rank3(x->value, "scale_pixels");
    require_shape(m->value, {1, x->value.height(), x->value.width()}, "scale_pixels map");
    const int c = x->value.channels();
    const size_t hw = static_cast<size_t>(x->value.height()) * x->value.width();
    Tensor out(x->value.shape);
    for (int ch = 0; ch < c; ++ch)
        for (size_t i = 0; i < hw; ++i)
            out.data[ch * hw + i] = x->value.data[ch * hw + i] * m->value.data[i];
    NodePtr n = make_node(std::move(out), {x, m});
    if (n->needs_grad) {
        Node* self = n.get();
        n->backprop = [self, x, m, c, hw]() {
            if (x->needs_grad) {
                Tensor& gx = x->ensure_grad();
                for (int ch = 0; ch < c; ++ch)
                    for (size_t i = 0; i < hw; ++i)
                        gx.data[ch * hw + i] += m->value.data[i] * self->grad[ch * hw + i];
            }
            if (m->needs_grad) {
                Tensor& gm = m->ensure_grad();
                for (int ch = 0; ch < c; ++ch)
                    for (size_t i = 0; i < hw; ++i)
                        gm.data[i] += x->value.data[ch * hw + i] * self->grad[ch * hw + i];
            }
        };
    }
    return n;
}

NodePtr concat_channels(std::vector<NodePtr> xs) {
    if (xs.empty()) throw ValueError("concat_channels: empty input");
    const int h = xs[0]->value.height(), w = xs[0]->value.width();
    int c_total = 0;
    for (const NodePtr& p : xs) {
        require_rank3(p->value, "concat_channels");
        if (p->value.height() != h || p->value.width() != w)
            throw ShapeError("concat_channels: spatial extents differ");
        c_total += p->value.channels();
    }
    Tensor out({c_total, h, w});
    size_t off = 0;
    for (const NodePtr& p : xs) {
        std::copy(p->value.data.begin(), p->value.data.end(), out.data.begin() + off);
        off += p->value.numel();
    }
    NodePtr n = make_node(std::move(out), xs);
    if (n->needs_grad) {
        Node* self = n.get();
        n->backprop = [self, xs]() {
            size_t off = 0;
            for (const NodePtr& p : xs) {
                if (p->needs_grad) {
                    Tensor& gp = p->ensure_grad();
                    for (size_t i = 0; i < gp.numel(); ++i) gp[i] += self->grad[off + i];
                }
                off += p->value.numel();
            }
        };
    }
    return n;
}

NodePtr slice_channels(NodePtr x, int c0, int c1) {
    require_rank3(x->value, "slice_channels");
    if (c0 < 0 || c1 <= c0 || c1 > x->value.channels())
        throw ShapeError("slice_channels: bad range");
    const size_t hw = static_cast<size_t>(x->value.height()) * x->value.width();
    Tensor out({c1 - c0, x->value.height(), x->value.width()});
    std::copy(x->value.data.begin() + c0 * hw, x->value.data.begin() + c1 * hw, out.data.begin());
    NodePtr n = make_node(std::move(out), {x});
    if (n->needs_grad) {
        Node* self = n.get();
        n->backprop = [self, x, c0, hw]() {
            Tensor& gx = x->ensure_grad();
            for (size_t i = 0; i < self->grad.numel(); ++i) gx.data[c0 * hw + i] += self->grad[i];
        };
    }
    return n;
}

NodePtr channel_mean_map(NodePtr x) {
    require_rank3(x->value, "channel_mean_map");
    const int c = x->value.channels();
    const size_t hw = static_cast<size_t>(x->value.height()) * x->value.width();
    Tensor out({1, x->value.height(), x->value.width()});
    for (size_t i = 0; i < hw; ++i) {
        double acc = 0.0;
        for (int ch = 0; ch < c; ++ch) acc += x->value.data[ch * hw + i];
        out.data[i] = acc / c;
    }
    NodePtr n = make_node(std::move(out), {x});
    if (n->needs_grad) {
        Node* self = n.get();
        n->backprop = [self, x, c, hw]() {
            Tensor& gx = x->ensure_grad();
            for (size_t i = 0; i < hw; ++i) {
                const double g = self->grad[i] / c;
                for (int ch = 0; ch < c; ++ch) gx.data[ch * hw + i] += g;
            }
        };
    }
    return n;
}

NodePtr channel_max_map(NodePtr x) {
    require_rank3(x->value, "channel_max_map");
    const int c = x->value.channels();
    const size_t hw = static_cast<size_t>(x->value.height()) * x->value.width();
    Tensor out({1, x->value.height(), x->value.width()});
    std::vector<int> argmax(hw, 0);
    for (size_t i = 0; i < hw; ++i) {
        int best = 0;
        for (int ch = 1; ch < c; ++ch)
            if (x->value.data[ch * hw + i] > x->value.data[best * hw + i]) best = ch;
        argmax[i] = best;
        out.data[i] = x->value.data[best * hw + i];
    }
    NodePtr n = make_node(std::move(out), {x});
    if (n->needs_grad) {
        Node* self = n.get();
        n->backprop = [self, x, hw, argmax = std::move(argmax)]() {
            Tensor& gx = x->ensure_grad();
            for (size_t i = 0; i < hw; ++i) gx.data[argmax[i] * hw + i] += self->grad[i];
        };
    }
    return n;
}

NodePtr reshape(NodePtr x, std::vector<int> shape) {
    if (shape_numel(shape) != x->value.numel()) throw ShapeError("reshape: numel mismatch");
    Tensor out = x->value;
    out.shape = shape;
    NodePtr n = make_node(std::move(out), {x});
    if (n->needs_grad) {
        Node* self = n.get();
        n->backprop = [self, x]() {
            Tensor& gx = x->ensure_grad();
            for (size_t i = 0; i < gx.numel(); ++i) gx[i] += self->grad[i];
        };
    }
    return n;
}

namespace {

// Linear resampling ops share the forward/transpose pattern.
NodePtr linear_map_node(NodePtr x, Tensor out, Tensor (*transpose)(const Tensor&, int, int)) {
    const int in_h = x->value.height(), in_w = x->value.width();
    NodePtr n = make_node(std::move(out), {x});
    if (n->needs_grad) {
        Node* self = n.get();
        n->backprop = [self, x, in_h, in_w, transpose]() {
            x->ensure_grad() += transpose(self->grad, in_h, in_w);
        };
    }
    return n;
}

}  // namespace

NodePtr nearest_upsample2x(NodePtr x) {
    return linear_map_node(x, resample::nearest_up2x(x->value),
                           [](const Tensor& g, int, int) { return resample::nearest_up2x_transpose(g); });
}

NodePtr bilinear_upsample2x(NodePtr x) {
    return linear_map_node(x, resample::bilinear_up2x(x->value),
                           [](const Tensor& g, int, int) { return resample::bilinear_up2x_transpose(g); });
}

NodePtr bicubic_resize(NodePtr x, int out_h, int out_w) {
    return linear_map_node(x, resample::bicubic_resize(x->value, out_h, out_w),
                           &resample::bicubic_resize_transpose);
}

NodePtr haar_packed(NodePtr x, int levels) {
    wavelet::SpectrumTensor spec = wavelet::pack_spectrum(wavelet::dwt_multi(x->value, levels));
    const auto manifest = spec.manifest;
    NodePtr n = make_node(std::move(spec.data), {x});
    if (n->needs_grad) {
        Node* self = n.get();
        n->backprop = [self, x, manifest]() {
            wavelet::SpectrumTensor cot{self->grad, manifest};
            x->ensure_grad() += wavelet::idwt_multi(wavelet::pack_spectrum_transpose(cot));
        };
    }
    return n;
}

NodePtr sum_all(NodePtr x) {
    Tensor out = Tensor::scalar(x->value.sum());
    NodePtr n = make_node(std::move(out), {x});
    if (n->needs_grad) {
        Node* self = n.get();
        n->backprop = [self, x]() {
            Tensor& gx = x->ensure_grad();
            const double g = self->grad[0];
            for (size_t i = 0; i < gx.numel(); ++i) gx[i] += g;
        };
    }
    return n;
}

NodePtr mean_all(NodePtr x) {
    const double inv = 1.0 / static_cast<double>(x->value.numel());
    Tensor out = Tensor::scalar(x->value.sum() * inv);
    NodePtr n = make_node(std::move(out), {x});
    if (n->needs_grad) {
        Node* self = n.get();
        n->backprop = [self, x, inv]() {
            Tensor& gx = x->ensure_grad();
            const double g = self->grad[0] * inv;
            for (size_t i = 0; i < gx.numel(); ++i) gx[i] += g;
        };
    }
    return n;
}

NodePtr abs_val(NodePtr x) {
    return unary_elementwise(
        std::move(x), [](double v) { return std::fabs(v); },
        [](double v, double) { return v >= 0.0 ? 1.0 : -1.0; });
}

}  // namespace trifusion::nn
