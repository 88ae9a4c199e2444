#include <doctest.h>

#include <cmath>
#include <functional>
#include <sstream>
#include <vector>

#include "nodemr/tensor/checkpoint.hpp"
#include "nodemr/tensor/gradcheck.hpp"
#include "nodemr/tensor/io.hpp"
#include "nodemr/tensor/ops.hpp"
#include "nodemr/tensor/random.hpp"

using namespace nodemr;

namespace {

using Builder = std::function<Var(Tape&, std::span<const Var>)>;

// Scalar objective for the oracle: a fixed random projection of the output,
// so every output coordinate contributes a distinct weight.
Var project(const Var& y, std::uint64_t seed) {
  Rng rng(seed);
  Tensor w = rng.uniform_tensor(y.shape(), -1.0, 1.0, y.dtype());
  return ops::sum(ops::mul(y, y.tape().constant(w)));
}

// Tape gradients against central differences for every input, in f64.
double worst_grad_error(const Builder& build, std::vector<Tensor> inputs, double eps = 1e-3) {
  Tape tape;
  std::vector<Var> vars;
  for (const Tensor& t : inputs) vars.push_back(tape.leaf(t));
  Var loss = project(build(tape, vars), 77);
  tape.backward(loss);

  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    ScalarFn fn = [&](const Tensor& probe) {
      Tape t2;
      std::vector<Var> v2;
      for (std::size_t j = 0; j < inputs.size(); ++j) v2.push_back(t2.leaf(j == k ? probe : inputs[j], false));
      return project(build(t2, v2), 77).value().item();
    };
    Tensor numeric = finite_diff_grad(fn, inputs[k], eps);
    GradComparison c = compare_gradients(tape.grad(vars[k]), numeric);
    worst = std::max(worst, c.max_relative_error);
  }
  return worst;
}

Tensor rand64(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  return Rng(seed).uniform_tensor(std::move(shape), lo, hi, DType::f64);
}

// Values bounded away from zero so relu is not probed at its kink.
Tensor away_from_zero(Shape shape, std::uint64_t seed) {
  Tensor t = rand64(std::move(shape), seed);
  for (std::int64_t i = 0; i < t.numel(); ++i) {
    const double v = t.at(i);
    t.set(i, v >= 0 ? v + 0.05 : v - 0.05);
  }
  return t;
}

std::vector<double> values(const Tensor& t) {
  std::vector<double> v;
  for (std::int64_t i = 0; i < t.numel(); ++i) v.push_back(t.at(i));
  return v;
}

}  // namespace

TEST_SUITE("tensor") {
  TEST_CASE("shape and dtype contracts") {
    Tensor t({2, 3, 4});
    CHECK(t.numel() == 24);
    CHECK(t.dim(-1) == 4);
    CHECK(t.dtype() == DType::f32);
    CHECK_THROWS_AS(Tensor({2, 2}, std::vector<float>{1, 2, 3}), DimensionError);
    CHECK_THROWS_AS((void)t.data<double>(), ContractError);
    CHECK_THROWS_AS((void)t.reshape({5, 5}), DimensionError);
  }

  TEST_CASE("copies share storage until written") {
    Tensor a = Tensor::full({4}, 1.0);
    Tensor b = a;
    b.set(0, 5.0);
    CHECK(a.at(0) == 1.0);
    CHECK(b.at(0) == 5.0);
  }

  TEST_CASE("dtype conversion round-trips representable values") {
    Tensor a({3}, std::vector<float>{0.5f, -2.0f, 3.25f});
    CHECK(bit_equal(a.to(DType::f64).to(DType::f32), a));
  }
}

TEST_SUITE("ops") {
  TEST_CASE("1x1 identity kernel leaves input unchanged") {
    Tape tape;
    Tensor x = Rng(1).uniform_tensor({2, 3, 5, 4}, -1, 1);
    Tensor w({3, 3, 1, 1});
    for (int c = 0; c < 3; ++c) w.set(c * 3 + c, 1.0);
    Var y = ops::conv2d(tape.constant(x), tape.constant(w), tape.constant(Tensor({3})), 1);
    CHECK(bit_equal(y.value(), x));
  }

  TEST_CASE("dilated 3x3 keeps spatial size") {
    Tape tape;
    Var y = ops::conv2d(tape.constant(Tensor({1, 2, 8, 8})), tape.constant(Tensor({5, 2, 3, 3})),
                        tape.constant(Tensor({5})), 2);
    CHECK(y.shape() == Shape{1, 5, 8, 8});
  }

  TEST_CASE("conv2d rejects mismatched channels and bad dilation") {
    Tape tape;
    Var x = tape.constant(Tensor({1, 2, 8, 8}));
    CHECK_THROWS_AS(ops::conv2d(x, tape.constant(Tensor({5, 3, 3, 3})), tape.constant(Tensor({5})), 1),
                    DimensionError);
    CHECK_THROWS_AS(ops::conv2d(x, tape.constant(Tensor({5, 2, 3, 3})), tape.constant(Tensor({4})), 1),
                    DimensionError);
    CHECK_THROWS_AS(ops::conv2d(x, tape.constant(Tensor({5, 2, 3, 3})), tape.constant(Tensor({5})), 0),
                    ContractError);
  }

  TEST_CASE("relu examples") {
    Tape tape;
    Var x = tape.leaf(Tensor({3}, std::vector<float>{-1, 0, 2}));
    Var y = ops::relu(x);
    CHECK(values(y.value()) == std::vector<double>{0, 0, 2});
    tape.backward(ops::sum(y));
    CHECK(values(tape.grad(x)) == std::vector<double>{0, 0, 1});

    Tape t2;
    Var neg = t2.leaf(Tensor::full({4}, -0.5));
    Var r = ops::relu(neg);
    t2.backward(ops::sum(r));
    CHECK(values(r.value()) == std::vector<double>(4, 0.0));
    CHECK(values(t2.grad(neg)) == std::vector<double>(4, 0.0));
  }

  TEST_CASE("concat examples") {
    Tape tape;
    Var a = tape.leaf(Rng(2).uniform_tensor({1, 2, 3, 3}, -1, 1));
    Var b = tape.leaf(Rng(3).uniform_tensor({1, 1, 3, 3}, -1, 1));
    Var c = ops::concat_channels(a, b);
    CHECK(c.shape() == Shape{1, 3, 3, 3});
    CHECK(bit_equal(ops::slice_channels(c, 0, 2).value(), a.value()));
    tape.backward(ops::sum(c));
    CHECK(bit_equal(tape.grad(a), Tensor::full({1, 2, 3, 3}, 1.0)));
    CHECK(bit_equal(tape.grad(b), Tensor::full({1, 1, 3, 3}, 1.0)));

    Var empty = tape.constant(Tensor({1, 0, 3, 3}));
    CHECK(bit_equal(ops::concat_channels(a, empty).value(), a.value()));
    CHECK_THROWS_AS(ops::concat_channels(a, tape.constant(Tensor({1, 1, 4, 3}))), DimensionError);
  }

  TEST_CASE("backward examples and errors") {
    Tape tape;
    Var x = tape.leaf(Tensor({2}, std::vector<float>{1, 2}));
    Var unused = tape.leaf(Tensor({3}));
    tape.backward(ops::sum(ops::mul(x, x)));
    CHECK(values(tape.grad(x)) == std::vector<double>{2, 4});
    CHECK(values(tape.grad(unused)) == std::vector<double>{0, 0, 0});

    Tape t2;
    Var s = t2.leaf(Tensor({3}));
    t2.backward(ops::sum(s));
    CHECK(values(t2.grad(s)) == std::vector<double>{1, 1, 1});

    CHECK_THROWS_AS(tape.backward(x), ContractError);
    CHECK_THROWS_AS(tape.backward(ops::sum(s)), ContractError);
  }

  TEST_CASE("every differentiable op matches the finite-difference oracle") {
    const Shape s4{2, 3, 5, 4};
    auto unary = [](auto op) { return Builder([op](Tape&, std::span<const Var> v) { return op(v[0]); }); };
    CHECK(worst_grad_error([](Tape&, std::span<const Var> v) { return ops::add(v[0], v[1]); },
                           {rand64(s4, 1), rand64(s4, 2)}) < 1e-3);
    CHECK(worst_grad_error([](Tape&, std::span<const Var> v) { return ops::sub(v[0], v[1]); },
                           {rand64(s4, 3), rand64(s4, 4)}) < 1e-3);
    CHECK(worst_grad_error([](Tape&, std::span<const Var> v) { return ops::mul(v[0], v[1]); },
                           {rand64(s4, 5), rand64(s4, 6)}) < 1e-3);
    CHECK(worst_grad_error(unary([](const Var& x) { return ops::scale(x, -1.7); }), {rand64(s4, 7)}) < 1e-3);
    CHECK(worst_grad_error(unary([](const Var& x) { return ops::add_scalar(x, 0.3); }), {rand64(s4, 8)}) < 1e-3);
    CHECK(worst_grad_error(unary([](const Var& x) { return ops::mean(x); }), {rand64(s4, 9)}) < 1e-3);
    CHECK(worst_grad_error(unary([](const Var& x) { return ops::relu(x); }), {away_from_zero(s4, 10)}) < 1e-4);
    CHECK(worst_grad_error(unary([](const Var& x) { return ops::softmax_channels(x); }), {rand64(s4, 11)}) <
          1e-3);
    CHECK(worst_grad_error(unary([](const Var& x) { return ops::slice_channels(x, 1, 3); }), {rand64(s4, 12)}) <
          1e-3);
    CHECK(worst_grad_error(
              [](Tape&, std::span<const Var> v) {
                const double c[] = {0.5, -2.0, 1.25};
                return ops::linear_combination(v, c);
              },
              {rand64(s4, 13), rand64(s4, 14), rand64(s4, 15)}) < 1e-3);
    CHECK(worst_grad_error([](Tape&, std::span<const Var> v) { return ops::concat_channels(v); },
                           {rand64({2, 1, 5, 4}, 16), rand64(s4, 17)}) < 1e-3);
    CHECK(worst_grad_error(
              [](Tape&, std::span<const Var> v) { return ops::time_channel(v[0], v[1], 0.7, 2, 3, 4); },
              {rand64({1}, 18), rand64({1}, 19)}) < 1e-3);
    CHECK(worst_grad_error(
              [](Tape&, std::span<const Var> v) {
                return ops::weighted_stage_sum(ops::softmax_channels(v[0]), v.subspan(1));
              },
              {rand64({2, 3, 5, 4}, 20), rand64({2, 2, 5, 4}, 21), rand64({2, 2, 5, 4}, 22),
               rand64({2, 2, 5, 4}, 23)}) < 1e-3);
    for (int d : {1, 2, 3}) {
      CAPTURE(d);
      CHECK(worst_grad_error([d](Tape&, std::span<const Var> v) { return ops::conv2d(v[0], v[1], v[2], d); },
                             {rand64({2, 3, 7, 6}, 30 + d), rand64({4, 3, 3, 3}, 40 + d), rand64({4}, 50 + d)}) <
            1e-3);
    }
  }

  TEST_CASE("gradient of sum(conv2d(x)) in f32 matches finite differences") {
    // The literal example: eps 1e-3 on f32 data, oracle in f64 on the same values.
    Tensor x = Rng(3).uniform_tensor({1, 2, 6, 6}, -1, 1);
    Tensor w = Rng(4).uniform_tensor({3, 2, 3, 3}, -1, 1);
    Tape tape;
    Var xv = tape.leaf(x);
    tape.backward(ops::sum(ops::conv2d(xv, tape.constant(w), tape.constant(Tensor({3})), 2)));
    ScalarFn fn = [&](const Tensor& probe) {
      Tape t;
      return ops::sum(ops::conv2d(t.constant(probe), t.constant(w.to(DType::f64)),
                                  t.constant(Tensor({3}, DType::f64)), 2))
          .value()
          .item();
    };
    Tensor numeric = finite_diff_grad(fn, x.to(DType::f64), 1e-3);
    CHECK(compare_gradients(tape.grad(xv), numeric).max_relative_error < 1e-3);
  }

  TEST_CASE("composite of ops matches the oracle on a random 3-layer CNN") {
    auto net = [](Tape&, std::span<const Var> v) {
      Var h = ops::relu(ops::conv2d(v[0], v[1], v[2], 1));
      h = ops::relu(ops::conv2d(h, v[3], v[4], 2));
      return ops::conv2d(h, v[5], v[6], 1);
    };
    std::vector<Tensor> in = {rand64({1, 2, 6, 6}, 1), rand64({4, 2, 3, 3}, 2), rand64({4}, 3),
                              rand64({4, 4, 3, 3}, 4), rand64({4}, 5),       rand64({2, 4, 3, 3}, 6),
                              rand64({2}, 7)};
    // Small eps keeps the probes from crossing relu kinks.
    CHECK(worst_grad_error(net, in, 1e-6) < 1e-3);
  }

  TEST_CASE("conv2d is linear in its input with zero bias") {
    Tape tape;
    Tensor x = Rng(1).uniform_tensor({1, 3, 9, 7}, -1, 1);
    Tensor y = Rng(2).uniform_tensor({1, 3, 9, 7}, -1, 1);
    Var w = tape.constant(Rng(3).uniform_tensor({4, 3, 3, 3}, -1, 1));
    Var b = tape.constant(Tensor({4}));
    const double a = 0.7, c = -1.3;
    Var xv = tape.constant(x), yv = tape.constant(y);
    const Var parts[] = {xv, yv};
    const double coeffs[] = {a, c};
    Var lhs = ops::conv2d(ops::linear_combination(parts, coeffs), w, b, 2);
    const Var outs[] = {ops::conv2d(xv, w, b, 2), ops::conv2d(yv, w, b, 2)};
    Var rhs = ops::linear_combination(outs, coeffs);
    CHECK(max_abs_diff(lhs.value(), rhs.value()) < 1e-5);
  }

  TEST_CASE("softmax weights form a distribution per pixel") {
    Tape tape;
    Var w = ops::softmax_channels(tape.constant(Rng(9).uniform_tensor({2, 4, 3, 3}, -20, 20)));
    for (int b = 0; b < 2; ++b)
      for (int p = 0; p < 9; ++p) {
        double s = 0.0;
        for (int i = 0; i < 4; ++i) {
          const double v = w.value().at((b * 4 + i) * 9 + p);
          CHECK(v >= 0.0);
          CHECK(v <= 1.0);
          s += v;
        }
        CHECK(std::abs(s - 1.0) < 1e-6);
      }
  }

  TEST_CASE("replay is deterministic") {
    auto run = [] {
      Tape tape;
      Rng rng(derive_seed(5, "replay"));
      Var x = tape.leaf(rng.uniform_tensor({2, 3, 8, 8}, -1, 1));
      Var w = tape.leaf(rng.uniform_tensor({3, 3, 3, 3}, -1, 1));
      Var loss = ops::mean(ops::relu(ops::conv2d(x, w, tape.leaf(Tensor({3})), 1)));
      tape.backward(loss);
      return std::pair(loss.value(), tape.grad(w));
    };
    auto [l1, g1] = run();
    auto [l2, g2] = run();
    CHECK(bit_equal(l1, l2));
    CHECK(bit_equal(g1, g2));
  }
}

TEST_SUITE("checkpoint") {
  // Five conv layers with parameters passed as segment inputs.
  Var five_layer(Tape&, std::span<const Var> v) {
    Var h = v[0];
    for (int l = 0; l < 5; ++l) {
      h = ops::conv2d(h, v[1 + 2 * l], v[2 + 2 * l], 1);
      if (l < 4) h = ops::relu(h);
    }
    return h;
  }

  std::vector<Tensor> five_layer_inputs(DType dtype) {
    Rng rng(17);
    std::vector<Tensor> in{rng.uniform_tensor({2, 2, 8, 8}, -1, 1, dtype)};
    const int ch[] = {2, 8, 8, 8, 8, 2};
    for (int l = 0; l < 5; ++l) {
      in.push_back(rng.uniform_tensor({ch[l + 1], ch[l], 3, 3}, -0.4, 0.4, dtype));
      in.push_back(rng.uniform_tensor({ch[l + 1]}, -0.1, 0.1, dtype));
    }
    return in;
  }

  TEST_CASE("checkpointed 5-layer CNN matches the plain gradient") {
    for (DType dtype : {DType::f32, DType::f64}) {
      auto in = five_layer_inputs(dtype);
      Tape plain, ckpt;
      std::vector<Var> pv, cv;
      for (const Tensor& t : in) {
        pv.push_back(plain.leaf(t));
        cv.push_back(ckpt.leaf(t));
      }
      Var py = five_layer(plain, pv);
      Var cy = checkpoint(five_layer, cv);
      CHECK(bit_equal(py.value(), cy.value()));
      plain.backward(project(py, 3));
      ckpt.backward(project(cy, 3));
      for (std::size_t i = 0; i < in.size(); ++i) {
        CAPTURE(i);
        CHECK(relative_l2(ckpt.grad(cv[i]), plain.grad(pv[i])) < 1e-6);
      }
    }
  }

  TEST_CASE("identity segment passes values and gradients through") {
    Tape tape;
    Var x = tape.leaf(Rng(4).uniform_tensor({1, 2, 3, 3}, -1, 1));
    const Var in[] = {x};
    Var y = checkpoint([](Tape&, std::span<const Var> v) { return v[0]; }, in);
    CHECK(bit_equal(y.value(), x.value()));
    tape.backward(ops::sum(y));
    CHECK(bit_equal(tape.grad(x), Tensor::full({1, 2, 3, 3}, 1.0)));
  }

  TEST_CASE("checkpointing lowers the activation high-water mark") {
    auto in = five_layer_inputs(DType::f32);
    auto peak = [&](bool use_ckpt) {
      reset_activation_peak();
      const std::size_t base = activation_stats().live;
      Tape tape;
      std::vector<Var> v;
      for (const Tensor& t : in) v.push_back(tape.leaf(t));
      Var h = v[0];
      for (int rep = 0; rep < 4; ++rep) {
        std::vector<Var> seg{h};
        seg.insert(seg.end(), v.begin() + 1, v.end());
        h = use_ckpt ? checkpoint(five_layer, seg) : five_layer(tape, seg);
      }
      tape.backward(ops::sum(h));
      return activation_stats().peak - base;
    };
    const std::size_t with = peak(true), without = peak(false);
    MESSAGE("peak bytes: checkpointed " << with << ", plain " << without);
    CHECK(with < without / 2);
  }
}

TEST_SUITE("gradcheck") {
  TEST_CASE("finite differences of known functions") {
    Tensor x = Rng(1).uniform_tensor({5}, -1, 1, DType::f64);
    Tensor g = finite_diff_grad([](const Tensor& t) {
      double s = 0;
      for (std::int64_t i = 0; i < t.numel(); ++i) s += t.at(i);
      return s;
    }, x, 1e-3);
    for (std::int64_t i = 0; i < 5; ++i) CHECK(std::abs(g.at(i) - 1.0) < 1e-9);

    Tensor three = Tensor::full({1}, 3.0, DType::f64);
    const double d = finite_diff_grad([](const Tensor& t) { return t.at(0) * t.at(0); }, three, 1e-3).at(0);
    CHECK(std::abs(d - 6.0) < 1e-6);
    CHECK_THROWS_AS(finite_diff_grad([](const Tensor&) { return 0.0; }, three, 0.0), ContractError);
  }
}

TEST_SUITE("io") {
  TEST_CASE("tensor record layout is bit-exact") {
    Tensor t({2, 1}, std::vector<float>{1.0f, -2.0f});
    std::ostringstream os;
    write_tensor(os, t);
    const std::string expected("NODT\x01\x00\x02\x02\x00\x00\x00\x01\x00\x00\x00"
                               "\x00\x00\x80\x3f\x00\x00\x00\xc0",
                               23);
    CHECK(os.str() == expected);
    std::istringstream is(os.str());
    CHECK(bit_equal(read_tensor(is), t));
  }

  TEST_CASE("archives round-trip and reject corruption") {
    ParamSet p;
    p.add("dyn.layer1.weight", Rng(1).uniform_tensor({4, 5, 3, 3}, -1, 1));
    p.add("meta.steps", Tensor::scalar(5));
    p.add("x64", Rng(2).uniform_tensor({3}, -1, 1, DType::f64));
    std::ostringstream os;
    write_archive(os, p);
    std::istringstream is(os.str());
    ParamSet q = read_archive(is);
    REQUIRE(q.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(q[i].name == p[i].name);
      CHECK(bit_equal(q[i].tensor, p[i].tensor));
    }
    std::istringstream cut(os.str().substr(0, os.str().size() - 3));
    CHECK_THROWS_AS(read_archive(cut), IoError);
    std::string bad = os.str();
    bad[4 + 2 + 17] = 'X';  // first magic byte of entry 0
    std::istringstream badmagic(bad);
    CHECK_THROWS_AS(read_archive(badmagic), IoError);
    CHECK_THROWS_AS(p.add("meta.steps", Tensor()), ContractError);
  }
}

TEST_SUITE("random") {
  TEST_CASE("streams are reproducible and derived seeds separate") {
    Rng a(42), b(42);
    for (int i = 0; i < 10; ++i) CHECK(a.bits() == b.bits());
    CHECK(derive_seed(1, "mask") != derive_seed(1, "phantom"));
    CHECK(derive_seed(1, "mask", 0) != derive_seed(1, "mask", 1));
    CHECK(derive_seed(1, "mask", 3) == derive_seed(1, "mask", 3));
    Rng r(7);
    double m = 0, v = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
      const double z = r.normal();
      m += z;
      v += z * z;
    }
    CHECK(std::abs(m / n) < 0.03);
    CHECK(std::abs(v / n - 1.0) < 0.05);
    for (int i = 0; i < 1000; ++i) {
      const auto k = r.uniform_int(-2, 3);
      CHECK((k >= -2 && k <= 3));
    }
  }
}
