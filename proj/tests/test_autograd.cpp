#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "irisforge/nn/module.hpp"

using namespace irisforge::nn;

namespace {

Tensor random_tensor(std::vector<int> shape, std::mt19937_64& rng, float s = 1.0f) {
  Tensor t(std::move(shape));
  std::normal_distribution<float> d(0.0f, s);
  for (auto& v : t.values()) v = d(rng);
  return t;
}

// Scalar probe <f(x), r> so every output element contributes.
double probe(const Var& out, const Tensor& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < r.numel(); ++i) s += double(out->value[i]) * r[i];
  return s;
}

// Compares tape gradients of <f(inputs), r> against central differences for
// each listed leaf.
void gradcheck(const std::vector<Var>& leaves, const std::function<Var()>& f, double tol = 2e-2) {
  std::mt19937_64 rng(77);
  Var out = f();
  Tensor r = random_tensor(out->value.shape(), rng);
  for (auto& l : leaves) l->grad = Tensor();
  backward(out, r);
  for (auto& l : leaves) {
    Tensor analytic = l->grad;
    REQUIRE(analytic.numel() == l->value.numel());
    const float h = 5e-3f;
    double worst = 0.0, scale = 1e-3;
    for (std::size_t i = 0; i < l->value.numel(); ++i) {
      const float v0 = l->value[i];
      l->value[i] = v0 + h;
      const double fp = probe(f(), r);
      l->value[i] = v0 - h;
      const double fm = probe(f(), r);
      l->value[i] = v0;
      const double fd = (fp - fm) / (2 * h);
      worst = std::max(worst, std::abs(fd - analytic[i]));
      scale = std::max(scale, std::abs(fd));
    }
    INFO("leaf " << l->name);
    CHECK(worst / scale < tol);
  }
}

}  // namespace

TEST_CASE("conv, norm and activation chain gradients") {
  std::mt19937_64 rng(1);
  ParameterSet ps;
  Conv2d conv(ps, "c", 2, 3, 4, 2, 1, rng);
  InstanceNorm norm(ps, "n", 3);
  ConvTranspose2d up(ps, "u", 3, 2, 4, 2, 1, rng);
  auto x = parameter(random_tensor({2, 2, 8, 8}, rng), "x");
  // The bias before instance norm has an identically zero gradient; smooth
  // activations keep central differences away from kinks.
  std::vector<Var> leaves{x, conv.weight, up.weight, up.bias};
  gradcheck(leaves, [&] { return tanh(up(tanh(norm(conv(x))))); });
}

TEST_CASE("leaky relu gradient away from the kink") {
  std::mt19937_64 rng(9);
  Tensor t = random_tensor({3, 7}, rng);
  for (auto& v : t.values()) v += v > 0 ? 0.1f : -0.1f;
  auto x = parameter(t, "x");
  gradcheck({x}, [&] { return leaky_relu(x, 0.2f); });
}

TEST_CASE("instance norm affine gradients") {
  std::mt19937_64 rng(2);
  ParameterSet ps;
  InstanceNorm norm(ps, "n", 3);
  for (auto& v : norm.gamma->value.values()) v = 0.5f + v;
  auto x = parameter(random_tensor({2, 3, 4, 4}, rng), "x");
  gradcheck({x, norm.gamma, norm.beta}, [&] { return norm(x); });
}

TEST_CASE("linear, concat, planes, normalize and slicing gradients") {
  std::mt19937_64 rng(3);
  ParameterSet ps;
  Linear lin(ps, "l", 7, 4, rng);
  auto a = parameter(random_tensor({3, 3}, rng), "a");
  auto b = parameter(random_tensor({3, 4}, rng), "b");
  gradcheck({a, b, lin.weight, lin.bias}, [&] { return l2_normalize(lin(concat_features(a, b))); });

  auto img = parameter(random_tensor({2, 1, 3, 3}, rng), "img");
  auto feat = parameter(random_tensor({2, 2}, rng), "feat");
  Conv2d conv(ps, "c", 3, 2, 3, 1, 1, rng);
  gradcheck({img, feat}, [&] { return conv(attach_planes(img, feat)); });

  auto p = parameter(random_tensor({4, 3}, rng), "p");
  auto q = parameter(random_tensor({2, 3}, rng), "q");
  gradcheck({p, q}, [&] { return concat_batch(slice_batch(p, 1, 3), scale(q, 2.0f)); });
}

TEST_CASE("external loss and weighted sum route gradients") {
  auto x = parameter(Tensor({2}, {1.0f, 2.0f}), "x");
  auto l1 = external_loss({x}, 5.0, {Tensor({2}, {0.5f, -1.0f})});
  auto y = parameter(Tensor({1}, {3.0f}), "y");
  auto total = weighted_sum({{2.0f, l1}, {-1.0f, y}});
  CHECK(total->value[0] == doctest::Approx(7.0));
  backward(total);
  CHECK(x->grad[0] == doctest::Approx(1.0));
  CHECK(x->grad[1] == doctest::Approx(-2.0));
  CHECK(y->grad[0] == doctest::Approx(-1.0));
}

TEST_CASE("frozen parameters receive no gradient but pass it through") {
  std::mt19937_64 rng(4);
  ParameterSet frozen, live;
  Linear a(live, "a", 3, 3, rng);
  Linear b(frozen, "b", 3, 1, rng);
  frozen.set_trainable(false);
  auto x = constant(random_tensor({2, 3}, rng));
  backward(reshape(b(a(x)), {2}), Tensor({2}, 1.0f));
  CHECK(b.weight->grad.empty());
  CHECK(!a.weight->grad.empty());
}

TEST_CASE("adam moves only parameters with gradients") {
  ParameterSet ps;
  auto p = ps.add("p", Tensor({2}, {1.0f, 1.0f}));
  auto q = ps.add("q", Tensor({1}, {4.0f}));
  Adam opt(ps, {});
  p->ensure_grad()[0] = 1.0f;
  p->grad[1] = -1.0f;
  opt.step();
  CHECK(p->value[0] == doctest::Approx(1.0f - 2e-4f));
  CHECK(p->value[1] == doctest::Approx(1.0f + 2e-4f));
  CHECK(q->value[0] == 4.0f);
}
