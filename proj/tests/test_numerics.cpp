#include <cmath>
#include <stdexcept>

#include "ablab/autodiff.hpp"
#include "ablab/gradcheck_suite.hpp"
#include "ablab/optim.hpp"
#include "ablab/rng.hpp"
#include "doctest.h"

using namespace ablab;

namespace {

Tensor naive_affine(const Tensor& x, const Tensor& w, const Tensor& b) {
    Tensor y({x.rows(), w.cols()});
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < w.cols(); ++j) {
            double s = b[j];
            for (std::size_t k = 0; k < x.cols(); ++k) s += x.at(i, k) * w.at(k, j);
            y.at(i, j) = s;
        }
    return y;
}

Tensor eval_unary(Var (*op)(Var), const Tensor& x) {
    Tape tape;
    return op(tape.constant(x)).value();
}

}  // namespace

TEST_CASE("tensor shape bookkeeping") {
    Tensor t({2, 3}, 1.5);
    CHECK(t.size() == 6);
    CHECK(t.rows() == 2);
    CHECK(t.cols() == 3);
    CHECK_THROWS(Tensor({2, 3}, std::vector<double>(5)));
    CHECK(t.reshaped({3, 2}).shape() == Shape{3, 2});
    CHECK_THROWS(t.reshaped({4, 2}));
}

TEST_CASE("affine: identity and hand arithmetic") {
    Tape tape;
    const Tensor eye = Tensor::matrix({{1, 0}, {0, 1}});
    Var y = affine(tape.constant(eye), tape.constant(eye), tape.constant(Tensor::vector({0, 0})));
    CHECK(y.value().identical(eye));

    Var z = affine(tape.constant(Tensor::matrix({{1, 2}})), tape.constant(Tensor::matrix({{1}, {1}})),
                   tape.constant(Tensor::vector({3})));
    CHECK(z.value().shape() == Shape{1, 1});
    CHECK(z.value()[0] == 6.0);
}

TEST_CASE("affine matches a triple-loop reference") {
    Rng rng(11);
    const Tensor x = randn({3, 4}, rng), w = randn({4, 2}, rng), b = randn({2}, rng);
    Tape tape;
    const Tensor y = affine(tape.constant(x), tape.constant(w), tape.constant(b)).value();
    CHECK(max_abs_diff(y, naive_affine(x, w, b)) < 1e-12);
}

TEST_CASE("affine rejects non-conforming shapes and names them") {
    Tape tape;
    try {
        affine(tape.constant(Tensor({2, 3})), tape.constant(Tensor({4, 2})), tape.constant(Tensor({2})));
        FAIL("expected a shape error");
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2x3]") != std::string::npos);
        CHECK(msg.find("[4x2]") != std::string::npos);
    }
}

TEST_CASE("tanh values and derivative") {
    CHECK(eval_unary(ablab::tanh, Tensor::vector({0.0}))[0] == 0.0);
    const double big = eval_unary(ablab::tanh, Tensor::vector({20.0}))[0];
    CHECK(big > 1.0 - 1e-6);
    CHECK(big <= 1.0);

    ParamSet ps;
    ps.add("x", Tensor::vector({0.0}));
    Tape tape(ps);
    Var y = ablab::tanh(tape.param("x"));
    tape.backward(sum_squares(add(y, tape.constant(Tensor::vector({0.5})))));
    // d/dx (tanh x + 0.5)² at 0 = 2·0.5·(1 − tanh² 0) = 1
    CHECK(ps.grad("x")[0] == doctest::Approx(1.0).epsilon(1e-15));

    Rng rng(3);
    const Tensor x = randn({3, 5}, rng, 2.0);
    const Tensor t = eval_unary(ablab::tanh, x);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(t[i] - std::tanh(x[i])) < 1e-12);
}

TEST_CASE("softmax: symmetry, stability, direct formula") {
    const Tensor a = eval_unary(softmax, Tensor::vector({0, 0}));
    CHECK(a[0] == doctest::Approx(0.5));
    CHECK(a[1] == doctest::Approx(0.5));

    const Tensor b = eval_unary(softmax, Tensor::vector({1000, 0}));
    CHECK(b.all_finite());
    CHECK(b[0] == doctest::Approx(1.0));
    CHECK(b[1] < 1e-300);

    const Tensor c = eval_unary(softmax, Tensor::vector({1, 2, 3}));
    const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
    for (int i = 0; i < 3; ++i) CHECK(std::abs(c[i] - std::exp(i + 1.0) / z) < 1e-15);

    Rng rng(5);
    const Tensor m = eval_unary(softmax, randn({4, 7}, rng, 3.0));
    for (std::size_t r = 0; r < 4; ++r) {
        double s = 0;
        for (double v : m.row(r)) {
            CHECK(v > 0);
            s += v;
        }
        CHECK(std::abs(s - 1.0) < 1e-12);
    }
    CHECK_THROWS(eval_unary(softmax, Tensor({0})));
}

TEST_CASE("grad_check on a quadratic and on a constant") {
    ParamSet ps;
    Rng rng(9);
    ps.add("p", randn({3, 2}, rng));
    const LossFn quad = [](ParamSet& p) {
        Tape tape(p);
        Var loss = scale(sum_squares(tape.param("p")), 0.5);
        tape.backward(loss);
        return loss.value()[0];
    };
    CHECK(grad_check(quad, ps) < 1e-7);

    const LossFn constant = [](ParamSet&) { return 4.2; };
    CHECK(grad_check(constant, ps) == doctest::Approx(0.0));

    const LossFn bad = [](ParamSet&) { return std::nan(""); };
    CHECK_THROWS(grad_check(bad, ps));
}

TEST_CASE("every differentiable op passes the finite-difference check") {
    for (const auto& row : op_gradcheck_suite()) {
        INFO(row.name << " " << row.max_rel_error);
        CHECK(row.max_rel_error < 1e-5);
        CHECK(row.entries > 0);
    }
}

TEST_CASE("stop_gradient passes the value and blocks the gradient") {
    ParamSet ps;
    ps.add("x", Tensor::vector({1.5, -2.0}));
    Tape tape(ps);
    Var x = tape.param("x");
    Var y = add(x, stop_gradient(x));
    CHECK(y.value()[0] == 3.0);
    tape.backward(sum_squares(y));
    // d/dx (x + c)² with c = x held fixed = 2(2x)
    CHECK(ps.grad("x")[0] == doctest::Approx(6.0));
    CHECK(ps.grad("x")[1] == doctest::Approx(-8.0));
}

TEST_CASE("adam: zero gradient, single step, mask") {
    ParamSet ps;
    ps.add("p", Tensor::vector({1.0}));
    ps.add("frozen", Tensor::vector({2.0}));
    ps.set_trainable({"p"});

    AdamState zero({0.1});
    adam_step(ps, zero);
    CHECK(ps.value("p")[0] == 1.0);

    AdamState st({0.1});
    ps.grad("p")[0] = 1.0;
    ps.grad("frozen")[0] = 5.0;
    adam_step(ps, st);
    // m̂ = 1, v̂ = 1, so the step is lr·1/(1 + ε)
    CHECK(ps.value("p")[0] == doctest::Approx(1.0 - 0.1 / (1.0 + 1e-8)).epsilon(1e-14));
    CHECK(std::abs(ps.value("p")[0] - 0.9) < 1e-8);
    CHECK(ps.value("frozen")[0] == 2.0);
    CHECK(st.step == 1);
    CHECK(st.m.count("frozen") == 0);

    ps.grad("p")[0] = std::nan("");
    CHECK_THROWS(adam_step(ps, st));
    CHECK_THROWS(AdamState({-1.0}));
}

TEST_CASE("adam step count increases by one per update") {
    ParamSet ps;
    ps.add("p", Tensor::vector({1.0, 2.0}));
    AdamState st;
    for (int i = 1; i <= 5; ++i) {
        ps.grad("p")[0] = 0.1 * i;
        adam_step(ps, st);
        CHECK(st.step == static_cast<std::uint64_t>(i));
        CHECK(st.m.at("p").shape() == ps.value("p").shape());
    }
}

TEST_CASE("trainable mask must name existing parameters") {
    ParamSet ps;
    ps.add("a", Tensor({2}));
    CHECK_THROWS(ps.set_trainable({"b"}));
    CHECK(ps.grad("a").shape() == ps.value("a").shape());
}

TEST_CASE("ops are deterministic") {
    Rng r1(42), r2(42);
    const Tensor a = randn({5, 3}, r1), b = randn({5, 3}, r2);
    CHECK(a.identical(b));
    Tape t1, t2;
    CHECK(softmax(ablab::tanh(t1.constant(a))).value().identical(softmax(ablab::tanh(t2.constant(b))).value()));
}

TEST_CASE("derived seeds differ per stage and are stable") {
    CHECK(derive_seed(1, "pretrain") == derive_seed(1, "pretrain"));
    CHECK(derive_seed(1, "pretrain") != derive_seed(1, "ablation"));
    CHECK(derive_seed(1, "pretrain") != derive_seed(2, "pretrain"));
}
