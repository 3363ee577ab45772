#include "doctest.h"

#include <cmath>
#include <functional>

#include "sspd/nn.hpp"
#include "sspd/rng.hpp"

using namespace sspd;
using namespace sspd::nn;

namespace {

using D = double;

Tens<D> random_tens(Rng& rng, int t, int c, int h, int w) {
    Tens<D> x = Tens<D>::zeros(t, c, h, w);
    for (auto& v : x.d) v = rng.gaussian(0.0, 1.0);
    return x;
}

Mx<D> random_mat(Rng& rng, int r, int c) {
    Mx<D> m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.gaussian(0.0, 1.0);
    return m;
}

// Central finite differences over a raw buffer against an analytic gradient.
void check_grad(D* x, const D* analytic, Eigen::Index n, const std::function<D()>& f,
                double tol = 1e-6, double h = 1e-5) {
    for (Eigen::Index i = 0; i < n; ++i) {
        const D keep = x[i];
        x[i] = keep + h;
        const D up = f();
        x[i] = keep - h;
        const D dn = f();
        x[i] = keep;
        const D fd = (up - dn) / (2 * h);
        const D denom = std::max<D>(1.0, std::abs(fd));
        CHECK(std::abs(fd - analytic[i]) / denom < tol);
    }
}

}  // namespace

TEST_CASE("spatial conv gradients") {
    Rng rng(1);
    SpatialConv<D> conv;
    conv.init("c", 2, 3, 2, rng);
    Tens<D> x = random_tens(rng, 2, 2, 6, 6);
    Tens<D> out = conv.forward(x);
    CHECK(out.t == 2);
    CHECK(out.c == 3);
    CHECK(out.h == 3);
    CHECK(out.w == 3);
    Tens<D> g = random_tens(rng, out.t, out.c, out.h, out.w);
    auto f = [&] {
        Tens<D> o = conv.forward(x);
        D s = 0;
        for (size_t i = 0; i < o.d.size(); ++i) s += o.d[i] * g.d[i];
        return s;
    };
    Tens<D> gx = conv.backward(x, g);
    check_grad(x.d.data(), gx.d.data(), 40, f);
    check_grad(conv.w.value.data(), conv.w.grad.data(), conv.w.value.size(), f);
    check_grad(conv.b.value.data(), conv.b.grad.data(), conv.b.value.size(), f);
}

TEST_CASE("temporal conv gradients (same and valid)") {
    Rng rng(2);
    for (bool same : {true, false}) {
        TemporalConv<D> conv;
        conv.init("t", 3, 2, 3, same, rng);
        Tens<D> x = random_tens(rng, 8, 3, 2, 2);
        Tens<D> out = conv.forward(x);
        CHECK(out.t == (same ? 8 : 6));
        CHECK(out.c == 2);
        Tens<D> g = random_tens(rng, out.t, out.c, out.h, out.w);
        auto f = [&] {
            Tens<D> o = conv.forward(x);
            D s = 0;
            for (size_t i = 0; i < o.d.size(); ++i) s += o.d[i] * g.d[i];
            return s;
        };
        conv.w.grad.setZero();
        conv.b.grad.setZero();
        Tens<D> gx = conv.backward(x, g);
        check_grad(x.d.data(), gx.d.data(), static_cast<Eigen::Index>(x.d.size()), f);
        check_grad(conv.w.value.data(), conv.w.grad.data(), conv.w.value.size(), f);
        check_grad(conv.b.value.data(), conv.b.grad.data(), conv.b.value.size(), f);
    }
}

TEST_CASE("channel norm gradients and statistics") {
    Rng rng(3);
    ChannelNorm<D> norm;
    norm.init("n", 3);
    norm.gamma.value.setRandom();
    norm.gamma.value.array() += 1.5;
    norm.beta.value.setRandom();
    Tens<D> x = random_tens(rng, 3, 3, 3, 3);
    Tens<D> out = norm.forward(x);
    // Per-channel output statistics follow gamma/beta exactly.
    for (int c = 0; c < 3; ++c) {
        double mean = 0, var = 0;
        int n = 0;
        for (int t = 0; t < out.t; ++t) {
            for (int i = 0; i < out.spatial(); ++i) {
                mean += out.fmat(t)(i, c);
                ++n;
            }
        }
        mean /= n;
        for (int t = 0; t < out.t; ++t) {
            for (int i = 0; i < out.spatial(); ++i) {
                var += (out.fmat(t)(i, c) - mean) * (out.fmat(t)(i, c) - mean);
            }
        }
        var /= n;
        CHECK(mean == doctest::Approx(norm.beta.value[c]).epsilon(1e-9));
        CHECK(std::sqrt(var) ==
              doctest::Approx(std::abs(norm.gamma.value[c])).epsilon(1e-3));
    }
    Tens<D> g = random_tens(rng, 3, 3, 3, 3);
    auto f = [&] {
        Tens<D> o = norm.forward(x);
        D s = 0;
        for (size_t i = 0; i < o.d.size(); ++i) s += o.d[i] * g.d[i];
        return s;
    };
    norm.gamma.grad.setZero();
    norm.beta.grad.setZero();
    norm.forward(x);
    Tens<D> gx = norm.backward(x, g);
    check_grad(x.d.data(), gx.d.data(), static_cast<Eigen::Index>(x.d.size()), f, 1e-5);
    check_grad(norm.gamma.value.data(), norm.gamma.grad.data(), 3, f, 1e-5);
    check_grad(norm.beta.value.data(), norm.beta.grad.data(), 3, f, 1e-5);
}

TEST_CASE("linear gradients") {
    Rng rng(4);
    Linear<D> lin;
    lin.init("l", 4, 3, rng);
    Mx<D> x = random_mat(rng, 6, 4);
    Mx<D> g = random_mat(rng, 6, 3);
    auto f = [&] { return (lin.forward(x).array() * g.array()).sum(); };
    lin.w.grad.setZero();
    lin.b.grad.setZero();
    Mx<D> gx = lin.backward(x, g);
    check_grad(x.data(), gx.data(), x.size(), f);
    check_grad(lin.w.value.data(), lin.w.grad.data(), lin.w.value.size(), f);
    check_grad(lin.b.value.data(), lin.b.grad.data(), lin.b.value.size(), f);
}

TEST_CASE("attention matches a small-matrix oracle and its gradients") {
    Rng rng(5);
    DotProductAttention<D> attn;
    attn.configure(2, 4);
    Mx<D> q = random_mat(rng, 5, 4), k = random_mat(rng, 5, 4), v = random_mat(rng, 5, 4);
    Mx<D> out = attn.forward(q, k, v);
    // Oracle: per head h, A_h = (Q_h K_h^T / dim) V_h with dim the full width.
    for (int h = 0; h < 2; ++h) {
        Mx<D> qh = q.middleCols(h * 2, 2), kh = k.middleCols(h * 2, 2),
              vh = v.middleCols(h * 2, 2);
        Mx<D> ref = (qh * kh.transpose() / 4.0) * vh;
        CHECK((out.middleCols(h * 2, 2) - ref).cwiseAbs().maxCoeff() < 1e-12);
    }
    Mx<D> g = random_mat(rng, 5, 4);
    auto f = [&] { return (attn.forward(q, k, v).array() * g.array()).sum(); };
    Mx<D> gq, gk, gv;
    attn.backward(q, k, v, g, gq, gk, gv);
    check_grad(q.data(), gq.data(), q.size(), f);
    check_grad(k.data(), gk.data(), k.size(), f);
    check_grad(v.data(), gv.data(), v.size(), f);
}

TEST_CASE("cosine map forward properties and gradients") {
    Rng rng(6);
    CosineMap<D> cm;
    Mx<D> u = random_mat(rng, 6, 4);
    Mx<D> m = cm.forward(u);
    CHECK((m - m.transpose()).cwiseAbs().maxCoeff() == 0.0);
    for (int i = 0; i < 6; ++i) CHECK(m(i, i) == 1.0);
    for (int i = 0; i < 6; ++i) {
        for (int j = 0; j < 6; ++j) {
            const double ref = u.row(i).dot(u.row(j)) / (u.row(i).norm() * u.row(j).norm());
            CHECK(std::abs(m(i, j) - ref) < 1e-12);
        }
    }
    Mx<D> g = random_mat(rng, 6, 6);
    auto f = [&] { return (cm.forward(u).array() * g.array()).sum(); };
    cm.forward(u);
    Mx<D> gu = cm.backward(g);
    check_grad(u.data(), gu.data(), u.size(), f, 1e-6);
}

TEST_CASE("diagonal wave forward and backward") {
    Rng rng(7);
    Mx<D> m = random_mat(rng, 5, 5);
    Vx<D> w = DiagonalWave<D>::forward(m);
    CHECK(w.size() == 5);
    for (int lag = 0; lag < 5; ++lag) {
        double s = 0;
        for (int i = 0; i + lag < 5; ++i) s += m(i, i + lag);
        CHECK(w[lag] == doctest::Approx(s / (5 - lag)).epsilon(1e-12));
    }
    Vx<D> g(5);
    for (int i = 0; i < 5; ++i) g[i] = rng.gaussian(0, 1);
    Mx<D> gm = DiagonalWave<D>::backward(5, g);
    auto f = [&] { return DiagonalWave<D>::forward(m).dot(g); };
    check_grad(m.data(), gm.data(), m.size(), f);
}

TEST_CASE("adaptive pool bounds and gradients") {
    Rng rng(8);
    Mx<D> x = random_mat(rng, 7, 3);
    Mx<D> y = AdaptivePool<D>::forward(x, 4);
    CHECK(y.rows() == 4);
    // Window i covers rows [floor(i*7/4), ceil((i+1)*7/4)).
    for (int i = 0; i < 4; ++i) {
        const int lo = (i * 7) / 4;
        const int hi = ((i + 1) * 7 + 3) / 4;
        Mx<D> ref = Mx<D>::Zero(1, 3);
        for (int r = lo; r < hi; ++r) ref += x.row(r);
        ref /= (hi - lo);
        CHECK((y.row(i) - ref).cwiseAbs().maxCoeff() < 1e-12);
    }
    Mx<D> g = random_mat(rng, 4, 3);
    Mx<D> gx = AdaptivePool<D>::backward(7, g);
    auto f = [&] { return (AdaptivePool<D>::forward(x, 4).array() * g.array()).sum(); };
    check_grad(x.data(), gx.data(), x.size(), f);
    // Identity when sizes match.
    CHECK((AdaptivePool<D>::forward(x, 7) - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("spatial gap and relu") {
    Rng rng(9);
    Tens<D> x = random_tens(rng, 3, 2, 2, 2);
    Mx<D> tokens = SpatialGap<D>::forward(x);
    CHECK(tokens.rows() == 3);
    CHECK(tokens.cols() == 2);
    CHECK(tokens(1, 0) == doctest::Approx(x.fmat(1).col(0).mean()));
    Mx<D> g = random_mat(rng, 3, 2);
    Tens<D> gx = SpatialGap<D>::backward(x, g);
    auto f = [&] { return (SpatialGap<D>::forward(x).array() * g.array()).sum(); };
    check_grad(x.d.data(), gx.d.data(), static_cast<Eigen::Index>(x.d.size()), f);

    Relu<D> relu;
    Tens<D> out = relu.forward(x);
    for (size_t i = 0; i < x.d.size(); ++i) CHECK(out.d[i] == std::max(0.0, x.d[i]));
    Tens<D> gr = random_tens(rng, 3, 2, 2, 2);
    Tens<D> gin = relu.backward(out, gr);
    for (size_t i = 0; i < x.d.size(); ++i) {
        CHECK(gin.d[i] == (x.d[i] > 0 ? gr.d[i] : 0.0));
    }
}
